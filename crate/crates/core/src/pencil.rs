//! Complex exponential interpolation through the Hankel pencil
//! `[U1(a), U0(a)]`.
//!
//! For `n` moments the pencil has order `n/2`; its generalized eigenvalues
//! are the Padé poles `ξ_j` and the residues `c_j` solve the square
//! Vandermonde system `V c = [a_0 .. a_{n/2-1}]`, so that
//! `a_k = Σ_j c_j ξ_j^k` for `k < n/2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{check_moment_count, MomentSequence};

/// Reciprocal condition below which `U0` or `V` is treated as singular.
pub const RCOND_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct HankelPair {
    /// `u0[i][j] = a_{i+j}`
    pub u0: DMatrix<Complex64>,
    /// `u1[i][j] = a_{i+j+1}`
    pub u1: DMatrix<Complex64>,
}

impl HankelPair {
    pub fn order(&self) -> usize {
        self.u0.nrows()
    }

    /// `U1 − z U0`.
    pub fn shifted(&self, z: Complex64) -> DMatrix<Complex64> {
        &self.u1 - &self.u0 * z
    }
}

/// Poles and residues of one interpolation solve, sorted by decreasing
/// residue magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct PencilSolution {
    pub poles: Vec<Complex64>,
    pub residues: Vec<Complex64>,
    /// Reciprocal 1-norm condition of the column-scaled Vandermonde system.
    pub condition: f64,
}

impl PencilSolution {
    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    /// `Σ_j c_j ξ_j^k` for `k = 0..count`.
    pub fn reconstruct(&self, count: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); count];
        for (&xi, &c) in self.poles.iter().zip(&self.residues) {
            let mut term = c;
            for v in out.iter_mut() {
                *v += term;
                term *= xi;
            }
        }
        out
    }

    fn sort_by_residue(&mut self) {
        let mut idx: Vec<usize> = (0..self.poles.len()).collect();
        idx.sort_by(|&a, &b| {
            self.residues[b]
                .norm()
                .partial_cmp(&self.residues[a].norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        self.poles = idx.iter().map(|&i| self.poles[i]).collect();
        self.residues = idx.iter().map(|&i| self.residues[i]).collect();
    }
}

pub fn build_hankel(moments: &MomentSequence) -> Result<HankelPair> {
    hankel_from_slice(moments.values())
}

pub(crate) fn hankel_from_slice(a: &[Complex64]) -> Result<HankelPair> {
    check_moment_count(a.len())?;
    let m = a.len() / 2;
    Ok(HankelPair {
        u0: DMatrix::from_fn(m, m, |i, j| a[i + j]),
        u1: DMatrix::from_fn(m, m, |i, j| a[i + j + 1]),
    })
}

/// All roots of `det(U1 − z U0)`, computed as the eigenvalues of `U0⁻¹ U1`.
pub fn solve_pencil(pair: &HankelPair) -> Result<Vec<Complex64>> {
    let (rcond, _) = linalg::rcond_and_inverse(&pair.u0);
    if !(rcond >= RCOND_FLOOR) {
        return Err(Error::SingularPencil(rcond));
    }
    let shift = pair
        .u0
        .clone()
        .lu()
        .solve(&pair.u1)
        .ok_or(Error::SingularPencil(0.0))?;
    if shift.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::SingularPencil(rcond));
    }
    linalg::eigenvalues(shift)
}

/// Solves `V c = [a_0 .. a_{m-1}]` with `V[k][j] = ξ_j^k`, `m = poles.len()`.
/// Returns the residues and the reciprocal condition of `V` after scaling
/// each column to unit maximum modulus.
///
/// The scaling leaves the solution unchanged but removes the spurious
/// ill-conditioning caused by poles of very different modulus; column `j`
/// is divided by `max(1, |ξ_j|)^(m−1)`, built from the top row down so
/// large poles do not overflow.
pub fn residues_from_poles(moments: &[Complex64], poles: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    let m = poles.len();
    if m == 0 || moments.len() < m {
        return Err(Error::InvalidArgument(format!(
            "need at least {m} moments for {m} poles, got {}",
            moments.len()
        )));
    }
    let mut vander = DMatrix::from_element(m, m, Complex64::new(1.0, 0.0));
    let mut log_scale = vec![0.0; m];
    for (j, &xi) in poles.iter().enumerate() {
        let r = xi.norm();
        if r <= 1.0 {
            for k in 1..m {
                vander[(k, j)] = vander[(k - 1, j)] * xi;
            }
        } else {
            let unit = xi / r;
            vander[(m - 1, j)] = unit.powu((m - 1) as u32);
            for k in (0..m - 1).rev() {
                vander[(k, j)] = vander[(k + 1, j)] / xi;
            }
            log_scale[j] = (m - 1) as f64 * r.ln();
        }
    }
    let (rcond, _) = linalg::rcond_and_inverse(&vander);
    if !(rcond >= RCOND_FLOOR) {
        return Err(Error::IllConditionedVandermonde(rcond));
    }
    let rhs = DVector::from_column_slice(&moments[..m]);
    let scaled = vander
        .lu()
        .solve(&rhs)
        .ok_or(Error::IllConditionedVandermonde(0.0))?;
    let c = scaled.iter().zip(&log_scale).map(|(y, &ls)| y * (-ls).exp()).collect();
    Ok((c, rcond))
}

/// The interpolation map `a ↦ (ξ, c)`.
pub fn interpolate(moments: &MomentSequence) -> Result<PencilSolution> {
    interpolate_slice(moments.values())
}

pub(crate) fn interpolate_slice(a: &[Complex64]) -> Result<PencilSolution> {
    let pair = hankel_from_slice(a)?;
    let poles = solve_pencil(&pair)?;
    let (residues, condition) = residues_from_poles(a, &poles)?;
    let mut sol = PencilSolution {
        poles,
        residues,
        condition,
    };
    sol.sort_by_residue();
    Ok(sol)
}
