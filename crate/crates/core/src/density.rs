//! Condensed density of the generalized eigenvalues of the random pencil
//! `[U1(a), U0(a)]`.
//!
//! The condensed density is `h_n = (1/4π) Δ u_n` with
//! `u_n(z) = (2/n) E log |det(U1(a) − z U0(a))|²`. Three evaluations are
//! provided:
//!
//! * [`mc_condensed_density`]: Monte Carlo average of `u_n` followed by the
//!   discrete Laplacian.
//! * [`analytic_density`]: the approximation built from the eigenvalues
//!   `μ_j` of `E[F(z, z̄)]`, `h̃_n = (1/2πn) Δ Σ_{μ_j>0} log μ_j`.
//! * closed forms for two moments ([`h2_closed_form`]) and for pure noise
//!   ([`pure_noise_density`]).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

pub use crate::lattice::{laplacian, GridField, Lattice};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{check_moment_count, complex_gaussian, ComplexMeasure, NoiseSpec};
use crate::pencil::hankel_from_slice;

/// Eigenvalues of `E[F]` below `POSITIVITY_CUTOFF × μ_max` count as zero.
pub const POSITIVITY_CUTOFF: f64 = 1e-13;

/// Local maxima lower than this fraction of a disk's peak are ignored by
/// [`identifiability_report`].
pub const DEFAULT_MODE_FLOOR: f64 = 0.05;

const MC_CHUNK: usize = 64;
const MC_MAX_REDRAWS: usize = 1000;

/// Condensed density of the single pole `a_1/a_0` for two noisy moments
/// `a_0 ~ CN(s_0, σ²)`, `a_1 ~ CN(s_1, σ²)`:
///
/// `h_2(z) = (σ²(1+|z|²) + |s_0 + z̄ s_1|²) / (π σ² (1+|z|²)³) · exp(−|z s_0 − s_1|² / (σ²(1+|z|²)))`.
pub fn h2_closed_form(s0: Complex64, s1: Complex64, sigma: f64, z: Complex64) -> f64 {
    let var = sigma * sigma;
    let q = 1.0 + z.norm_sqr();
    let centre = s0 + z.conj() * s1;
    let gap = (z * s0 - s1).norm_sqr();
    (var * q + centre.norm_sqr()) / (PI * var * q.powi(3)) * (-gap / (var * q)).exp()
}

/// `w_n(z) = (2/n) log Σ_{j=0}^{n/2} |z|^{2j}`, the normalised log-determinant
/// of `A(z, z̄)` of order `n/2`.
pub fn pure_noise_potential(n: usize, z: Complex64) -> f64 {
    let t = z.norm_sqr();
    let m = n / 2;
    let mut sum = 0.0;
    let mut term = 1.0;
    for _ in 0..=m {
        sum += term;
        term *= t;
    }
    2.0 / n as f64 * sum.ln()
}

/// `(1/4π) Δ w_n(z)` evaluated exactly.
///
/// With `t = |z|²` and `P(t) = Σ_{j=0}^{n/2} t^j`, `Δ g(t) = 4 (t g'(t))'`,
/// so the density is `(2/(πn)) [(P' + tP'')/P − t P'²/P²]`.
pub fn pure_noise_density(n: usize, z: Complex64) -> f64 {
    let t = z.norm_sqr();
    let m = n / 2;
    let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
    for j in 0..=m {
        let jf = j as f64;
        p += t.powi(j as i32);
        if j >= 1 {
            dp += jf * t.powi(j as i32 - 1);
        }
        if j >= 2 {
            ddp += jf * (jf - 1.0) * t.powi(j as i32 - 2);
        }
    }
    2.0 / (PI * n as f64) * ((dp + t * ddp) / p - t * dp * dp / (p * p))
}

/// `E[F(z, z̄)] = B B̄ + (nσ²/2) A(z, z̄)` with `B = U1(s) − z U0(s)` built
/// from the clean moments `s`.
///
/// `A` is tridiagonal with `1 + |z|²` on the diagonal, `−z̄` above it and
/// `−z` below it; this is the placement produced by
/// `E[N N̄]` for `N = U1(ν) − z U0(ν)`, `E[ν_k ν̄_h] = σ² δ_{hk}`.
pub fn expected_f(clean: &[Complex64], sigma: f64, z: Complex64) -> Result<DMatrix<Complex64>> {
    let pair = hankel_from_slice(clean)?;
    let b = pair.shifted(z);
    let m = pair.order();
    let mut out = &b * b.map(|v| v.conj());
    let scale = clean.len() as f64 * sigma * sigma / 2.0;
    let diag = Complex64::new(scale * (1.0 + z.norm_sqr()), 0.0);
    for i in 0..m {
        out[(i, i)] += diag;
        if i + 1 < m {
            out[(i, i + 1)] -= z.conj() * scale;
            out[(i + 1, i)] -= z * scale;
        }
    }
    Ok(out)
}

/// [`expected_f`] for the moments of `measure`.
pub fn expected_f_for_measure(measure: &ComplexMeasure, n: usize, sigma: f64, z: Complex64) -> Result<DMatrix<Complex64>> {
    let clean = measure.moments(n)?;
    expected_f(clean.values(), sigma, z)
}

/// `(M + Mᴴ)/2`.
pub fn hermitize(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `Σ log μ_j` over the eigenvalues of the hermitized matrix exceeding
/// `POSITIVITY_CUTOFF × μ_max`; `None` when no eigenvalue is positive.
pub fn positive_log_eigensum(m: &DMatrix<Complex64>) -> Option<f64> {
    let eig = hermitize(m).symmetric_eigenvalues();
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return None;
    }
    let floor = POSITIVITY_CUTOFF * max;
    Some(eig.iter().filter(|&&mu| mu > floor).map(|mu| mu.ln()).sum())
}

fn log_eigensum_field(clean: &[Complex64], sigma: f64, lattice: &Lattice) -> Result<GridField> {
    check_moment_count(clean.len())?;
    let rows: Vec<Vec<Option<f64>>> = (0..lattice.ny)
        .into_par_iter()
        .map(|j| {
            (0..lattice.nx)
                .map(|i| {
                    let f = expected_f(clean, sigma, lattice.point(i, j)).expect("validated moment count");
                    positive_log_eigensum(&f)
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(lattice.len());
    let mut mask = Vec::with_capacity(lattice.len());
    for v in rows.into_iter().flatten() {
        values.push(v.unwrap_or(0.0));
        mask.push(v.is_some());
    }
    Ok(GridField {
        lattice: *lattice,
        values,
        mask,
    })
}

/// The analytic approximation `h̃_n` on a lattice, from clean moments.
/// Not clamped: it can take negative values.
pub fn analytic_density_from_moments(clean: &[Complex64], sigma: f64, lattice: &Lattice) -> Result<GridField> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidSigma {
            value: sigma,
            expected: "nonnegative",
        });
    }
    let potential = log_eigensum_field(clean, sigma, lattice)?;
    let scale = 1.0 / (2.0 * PI * clean.len() as f64);
    Ok(laplacian(&potential).map(|v| v * scale))
}

pub fn analytic_density(measure: &ComplexMeasure, n: usize, sigma: f64, lattice: &Lattice) -> Result<GridField> {
    let clean = measure.moments(n)?;
    analytic_density_from_moments(clean.values(), sigma, lattice)
}

/// `h̃_n(z)` at a single point, with a five-point stencil of spacing `h`.
pub fn analytic_density_at(clean: &[Complex64], sigma: f64, z: Complex64, h: f64) -> Result<f64> {
    let eval = |w: Complex64| -> Result<f64> {
        let f = expected_f(clean, sigma, w)?;
        Ok(positive_log_eigensum(&f).unwrap_or(f64::NAN))
    };
    let centre = eval(z)?;
    let mut acc = -4.0 * centre;
    for dz in [Complex64::new(h, 0.0), Complex64::new(-h, 0.0), Complex64::new(0.0, h), Complex64::new(0.0, -h)] {
        acc += eval(z + dz)?;
    }
    Ok(acc / (h * h) / (2.0 * PI * clean.len() as f64))
}

/// Monte Carlo estimate of the condensed density with its per-cell standard
/// error.
#[derive(Debug, Clone)]
pub struct McDensity {
    pub density: GridField,
    pub std_error: GridField,
    pub trials: usize,
    /// Draws redrawn because the determinant vanished at a lattice point.
    pub rejected: usize,
}

/// Monte Carlo condensed density for the clean moments of `measure`.
pub fn mc_condensed_density(
    measure: &ComplexMeasure,
    n: usize,
    sigma: f64,
    lattice: &Lattice,
    trials: usize,
    noise: &NoiseSpec,
) -> Result<McDensity> {
    let clean = measure.moments(n)?;
    mc_condensed_density_from_moments(clean.values(), sigma, lattice, trials, noise)
}

/// Averages `(2/n) log |det(U1(a) − zU0(a))|²` over `trials` noisy copies
/// `a = s + ν` and applies `(1/4π) Δ`.
///
/// Trials are drawn in fixed-size chunks, chunk `c` using substream
/// `noise.stream + c`, and reduced in chunk order, so the result does not
/// depend on the number of worker threads.
pub fn mc_condensed_density_from_moments(
    clean: &[Complex64],
    sigma: f64,
    lattice: &Lattice,
    trials: usize,
    noise: &NoiseSpec,
) -> Result<McDensity> {
    check_moment_count(clean.len())?;
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidSigma {
            value: sigma,
            expected: "nonnegative",
        });
    }
    let cells = lattice.len();
    let chunks = trials.div_ceil(MC_CHUNK);
    let batch = (rayon::current_num_threads() * 2).max(1);
    let mut sum = vec![0.0; cells];
    let mut sumsq = vec![0.0; cells];
    let mut rejected = 0;
    let mut mask = None;

    let mut start = 0;
    while start < chunks {
        let end = (start + batch).min(chunks);
        let partials: Vec<Result<ChunkAccum>> = (start..end)
            .into_par_iter()
            .map(|c| {
                let count = MC_CHUNK.min(trials - c * MC_CHUNK);
                let spec = noise.with_stream(noise.stream.wrapping_add(c as u64)).with_sigma(sigma);
                mc_chunk(clean, lattice, count, &spec)
            })
            .collect();
        for part in partials {
            let part = part?;
            for k in 0..cells {
                sum[k] += part.sum[k];
                sumsq[k] += part.sumsq[k];
            }
            rejected += part.rejected;
            mask.get_or_insert(part.mask);
        }
        start = end;
    }

    let mask = mask.expect("at least one chunk");
    let t = trials as f64;
    let scale = 1.0 / (4.0 * PI);
    let mut density = vec![0.0; cells];
    let mut std_error = vec![0.0; cells];
    for k in 0..cells {
        let mean = sum[k] / t;
        let var = if trials > 1 {
            ((sumsq[k] / t - mean * mean) * t / (t - 1.0)).max(0.0)
        } else {
            0.0
        };
        density[k] = mean * scale;
        std_error[k] = (var / t).sqrt() * scale;
    }
    Ok(McDensity {
        density: GridField {
            lattice: *lattice,
            values: density,
            mask: mask.clone(),
        },
        std_error: GridField {
            lattice: *lattice,
            values: std_error,
            mask,
        },
        trials,
        rejected,
    })
}

struct ChunkAccum {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    mask: Vec<bool>,
    rejected: usize,
}

fn mc_chunk(clean: &[Complex64], lattice: &Lattice, count: usize, spec: &NoiseSpec) -> Result<ChunkAccum> {
    let n = clean.len();
    let m = n / 2;
    let cells = lattice.len();
    let mut rng = spec.rng();
    let mut sum = vec![0.0; cells];
    let mut sumsq = vec![0.0; cells];
    let mut mask = vec![false; cells];
    let mut rejected = 0;
    let mut noisy = vec![Complex64::new(0.0, 0.0); n];
    let mut buf = vec![Complex64::new(0.0, 0.0); m * m];
    let mut potential = GridField {
        lattice: *lattice,
        values: vec![0.0; cells],
        mask: vec![true; cells],
    };
    let weight = 4.0 / n as f64; // (2/n) log|det|² = (4/n) log|det|

    for _ in 0..count {
        let mut redraws = 0;
        loop {
            for (a, s) in noisy.iter_mut().zip(clean) {
                *a = s + complex_gaussian(&mut rng, spec.sigma);
            }
            if fill_log_det(&noisy, lattice, &mut buf, &mut potential.values, weight) {
                break;
            }
            redraws += 1;
            rejected += 1;
            if redraws >= MC_MAX_REDRAWS {
                return Err(Error::InvalidArgument(
                    "pencil determinant keeps vanishing on the lattice; is sigma zero?".into(),
                ));
            }
        }
        let lap = laplacian(&potential);
        for k in 0..cells {
            if lap.mask[k] {
                let v = lap.values[k];
                sum[k] += v;
                sumsq[k] += v * v;
            }
        }
        mask.copy_from_slice(&lap.mask);
    }
    Ok(ChunkAccum {
        sum,
        sumsq,
        mask,
        rejected,
    })
}

/// Writes `weight × log|det(U1(a) − zU0(a))|` for every lattice point;
/// `false` if the determinant vanished somewhere.
fn fill_log_det(a: &[Complex64], lattice: &Lattice, buf: &mut [Complex64], out: &mut [f64], weight: f64) -> bool {
    let m = a.len() / 2;
    for j in 0..lattice.ny {
        for i in 0..lattice.nx {
            let z = lattice.point(i, j);
            for r in 0..m {
                for c in 0..m {
                    buf[r * m + c] = a[r + c + 1] - z * a[r + c];
                }
            }
            let ld = linalg::log_abs_det_in_place(buf, m);
            if !ld.is_finite() {
                return false;
            }
            out[lattice.index(i, j)] = weight * ld;
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeIdentifiability {
    pub node: Complex64,
    pub radius: f64,
    /// Local maxima of the field restricted to the disk.
    pub local_maxima: usize,
    pub unimodal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiabilityReport {
    pub nodes: Vec<NodeIdentifiability>,
    pub disjoint: bool,
    pub identifiable: bool,
}

/// Checks that `field` is unimodal on each disk `|z − ξ_k| ≤ r_k` and that
/// the disks are pairwise disjoint. Uses [`DEFAULT_MODE_FLOOR`].
pub fn identifiability_report(field: &GridField, measure: &ComplexMeasure, radii: &[f64]) -> Result<IdentifiabilityReport> {
    identifiability_report_with_floor(field, measure, radii, DEFAULT_MODE_FLOOR)
}

/// As [`identifiability_report`]; local maxima below `mode_floor × (disk
/// peak)` are discarded as stencil ripple.
pub fn identifiability_report_with_floor(
    field: &GridField,
    measure: &ComplexMeasure,
    radii: &[f64],
    mode_floor: f64,
) -> Result<IdentifiabilityReport> {
    if radii.len() != measure.len() {
        return Err(Error::InvalidArgument(format!(
            "{} radii for {} nodes",
            radii.len(),
            measure.len()
        )));
    }
    let lat = field.lattice;
    let mut nodes = Vec::with_capacity(radii.len());
    for (index, (&node, &radius)) in measure.nodes().iter().zip(radii).enumerate() {
        if !(radius > 0.0) || !lat.contains_disk(node, radius) {
            return Err(Error::DiskOutsideLattice { index, radius });
        }
        let inside = |i: usize, j: usize| field.is_valid(i, j) && (lat.point(i, j) - node).norm() <= radius;
        let mut cells = Vec::new();
        for j in 1..lat.ny - 1 {
            for i in 1..lat.nx - 1 {
                if inside(i, j) {
                    cells.push((i, j));
                }
            }
        }
        let peak = cells
            .iter()
            .map(|&(i, j)| field.get(i, j))
            .fold(f64::NEG_INFINITY, f64::max);
        let floor = if peak > 0.0 { mode_floor * peak } else { f64::INFINITY };
        let mut local_maxima = 0;
        for &(i, j) in &cells {
            let v = field.get(i, j);
            if v < floor {
                continue;
            }
            let mut is_max = true;
            'nbr: for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ni, nj) = ((i as i64 + di) as usize, (j as i64 + dj) as usize);
                    if inside(ni, nj) && field.get(ni, nj) >= v {
                        is_max = false;
                        break 'nbr;
                    }
                }
            }
            if is_max {
                local_maxima += 1;
            }
        }
        nodes.push(NodeIdentifiability {
            node,
            radius,
            local_maxima,
            unimodal: local_maxima == 1,
        });
    }
    let mut disjoint = true;
    for a in 0..nodes.len() {
        for b in (a + 1)..nodes.len() {
            if (nodes[a].node - nodes[b].node).norm() <= nodes[a].radius + nodes[b].radius {
                disjoint = false;
            }
        }
    }
    let identifiable = disjoint && nodes.iter().all(|n| n.unimodal);
    Ok(IdentifiabilityReport {
        nodes,
        disjoint,
        identifiable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn h2_reduces_to_pure_noise_form() {
        for sigma in [0.1, 1.0, 3.0] {
            assert_relative_eq!(h2_closed_form(c(0.0, 0.0), c(0.0, 0.0), sigma, c(0.0, 0.0)), 1.0 / PI, epsilon = 1e-15);
            let z = c(0.3, -1.2);
            let want = 1.0 / (PI * (1.0 + z.norm_sqr()).powi(2));
            assert_relative_eq!(h2_closed_form(c(0.0, 0.0), c(0.0, 0.0), sigma, z), want, epsilon = 1e-15);
        }
    }

    #[test]
    fn h2_point_value() {
        assert_relative_eq!(h2_closed_form(c(1.0, 0.0), c(0.0, 0.0), 1.0, c(0.0, 0.0)), 2.0 / PI, epsilon = 1e-15);
    }

    #[test]
    fn h2_conjugate_symmetry_for_real_moments() {
        for z in [c(0.2, 0.7), c(-1.1, 0.4), c(0.5, -0.01)] {
            let a = h2_closed_form(c(1.0, 0.0), c(0.5, 0.0), 0.3, z);
            let b = h2_closed_form(c(1.0, 0.0), c(0.5, 0.0), 0.3, z.conj());
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
    }

    #[test]
    fn h2_integrates_to_one() {
        // midpoint rule on a large square; the tail beyond |z| = 40 is O(1/40²)
        for (s0, s1, sigma) in [(c(0.0, 0.0), c(0.0, 0.0), 1.0), (c(1.0, 0.5), c(-0.3, 0.2), 0.5)] {
            let n = 1600;
            let half = 40.0;
            let h = 2.0 * half / n as f64;
            let mut total = 0.0;
            for j in 0..n {
                for i in 0..n {
                    let z = c(-half + (i as f64 + 0.5) * h, -half + (j as f64 + 0.5) * h);
                    total += h2_closed_form(s0, s1, sigma, z);
                }
            }
            assert!((total * h * h - 1.0).abs() < 2e-3, "mass {}", total * h * h);
        }
    }

    #[test]
    fn pure_noise_density_matches_n2_closed_form() {
        for z in [c(0.0, 0.0), c(0.4, 0.3), c(-1.5, 2.0)] {
            let want = h2_closed_form(c(0.0, 0.0), c(0.0, 0.0), 1.0, z);
            assert_relative_eq!(pure_noise_density(2, z), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn pure_noise_density_matches_stencil_of_potential() {
        let n = 12;
        let h = 1e-3;
        for z in [c(0.2, 0.1), c(0.7, -0.6), c(1.3, 0.2)] {
            let lap = (pure_noise_potential(n, z + h)
                + pure_noise_potential(n, z - h)
                + pure_noise_potential(n, z + c(0.0, h))
                + pure_noise_potential(n, z - c(0.0, h))
                - 4.0 * pure_noise_potential(n, z))
                / (h * h)
                / (4.0 * PI);
            assert_relative_eq!(pure_noise_density(n, z), lap, max_relative = 1e-4);
        }
    }

    #[test]
    fn expected_f_pure_noise_origin() {
        let n = 8;
        let sigma = 0.3;
        let f = expected_f(&vec![c(0.0, 0.0); n], sigma, c(0.0, 0.0)).unwrap();
        let want = n as f64 * sigma * sigma / 2.0;
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { want } else { 0.0 };
                assert!((f[(i, j)] - c(e, 0.0)).norm() < 1e-15);
            }
        }
        let eig = hermitize(&f).symmetric_eigenvalues();
        assert!(eig.iter().all(|&mu| (mu - want).abs() < 1e-14));
    }

    #[test]
    fn expected_f_is_hermitian() {
        let m = ComplexMeasure::reference_model();
        for z in [c(0.1, 0.2), c(-0.8, 0.9)] {
            let f = expected_f_for_measure(&m, 20, 0.2, z).unwrap();
            let skew = (&f - f.adjoint()).norm();
            assert!(skew < 1e-12 * f.norm(), "skew {skew}");
            let h = hermitize(&f);
            assert!((&h - h.adjoint()).norm() < 1e-12 * h.norm());
        }
    }

    #[test]
    fn clean_expected_f_is_singular_exactly_at_nodes() {
        let m = ComplexMeasure::new(vec![c(0.5, 0.3), c(-0.4, 0.6)], vec![c(2.0, 0.0), c(1.0, -1.0)]).unwrap();
        let s = m.moments(4).unwrap();
        let det_abs = |z: Complex64| expected_f(s.values(), 0.0, z).unwrap().determinant().norm();
        let off = det_abs(c(0.0, 0.0));
        for node in m.nodes() {
            assert!(det_abs(*node) < 1e-12 * off);
        }
        // and the roots agree with the pencil solve
        let roots = crate::pencil::solve_pencil(&crate::pencil::build_hankel(&s).unwrap()).unwrap();
        for r in roots {
            assert!(det_abs(r) < 1e-10 * off);
        }
    }

    #[test]
    fn positive_log_eigensum_cuts_numerical_zeros() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(4.0, 0.0), c(1.0, 0.0), c(1e-20, 0.0), c(-1e-18, 0.0)]));
        assert_relative_eq!(positive_log_eigensum(&m).unwrap(), 4f64.ln(), epsilon = 1e-14);
        assert!(positive_log_eigensum(&DMatrix::zeros(2, 2)).is_none());
    }

    #[test]
    fn analytic_density_pure_noise_n2() {
        let lat = Lattice::square(1.0, 41).unwrap();
        let field = analytic_density_from_moments(&[c(0.0, 0.0); 2], 0.7, &lat).unwrap();
        let i = lat.nearest(c(0.0, 0.0)).unwrap();
        assert!((field.get(i.0, i.1) - 1.0 / PI).abs() < 1e-2);
    }

    #[test]
    fn analytic_density_can_go_negative() {
        // two nodes in strong noise: h̃ is not clamped
        let m = ComplexMeasure::reference_model();
        let lat = Lattice::square(1.5, 61).unwrap();
        let field = analytic_density(&m, 80, 0.2, &lat).unwrap();
        let min = field
            .values
            .iter()
            .zip(&field.mask)
            .filter(|(_, &k)| k)
            .map(|(v, _)| *v)
            .fold(f64::INFINITY, f64::min);
        assert!(min < 0.0, "min {min}");
    }

    #[test]
    fn mc_n2_concentrates_at_ratio() {
        let m = ComplexMeasure::new(vec![c(0.5, 0.0)], vec![c(1.0, 0.0)]).unwrap();
        let lat = Lattice::square(1.0, 41).unwrap();
        let mc = mc_condensed_density(&m, 2, 0.01, &lat, 500, &NoiseSpec::new(0.0, 3, 0).unwrap()).unwrap();
        let (pi, pj) = lat.nearest(c(0.5, 0.0)).unwrap();
        let mut best = (0, 0);
        let mut bestv = f64::NEG_INFINITY;
        for j in 1..lat.ny - 1 {
            for i in 1..lat.nx - 1 {
                if mc.density.get(i, j) > bestv {
                    bestv = mc.density.get(i, j);
                    best = (i, j);
                }
            }
        }
        assert_eq!(best, (pi, pj));
        let near = mc.density.masked_sum(|z, _| (z - c(0.5, 0.0)).norm() < 0.1);
        assert!(near > 0.9, "mass near ratio {near}");
    }

    #[test]
    fn mc_is_deterministic_and_thread_independent() {
        let lat = Lattice::square(1.5, 15).unwrap();
        let spec = NoiseSpec::new(0.0, 77, 0).unwrap();
        let a = mc_condensed_density_from_moments(&[c(1.0, 0.0), c(0.2, 0.1), c(0.3, 0.0), c(0.0, 0.1)], 0.5, &lat, 200, &spec).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool
            .install(|| mc_condensed_density_from_moments(&[c(1.0, 0.0), c(0.2, 0.1), c(0.3, 0.0), c(0.0, 0.1)], 0.5, &lat, 200, &spec))
            .unwrap();
        assert_eq!(a.density.values, b.density.values);
        assert_eq!(a.std_error.values, b.std_error.values);
    }

    #[test]
    fn mc_rejects_zero_trials() {
        let lat = Lattice::square(1.0, 5).unwrap();
        assert!(mc_condensed_density_from_moments(&[c(0.0, 0.0); 2], 1.0, &lat, 0, &NoiseSpec::new(0.0, 0, 0).unwrap()).is_err());
    }

    #[test]
    fn identifiability_overlapping_disks() {
        let m = ComplexMeasure::new(vec![c(0.0, 0.0), c(0.1, 0.0)], vec![c(1.0, 0.0); 2]).unwrap();
        let lat = Lattice::square(1.0, 41).unwrap();
        let field = lat.sample(|z| (-(z - c(0.0, 0.0)).norm_sqr() / 0.001).exp() + (-(z - c(0.1, 0.0)).norm_sqr() / 0.001).exp());
        let rep = identifiability_report(&field, &m, &[0.08, 0.08]).unwrap();
        assert!(!rep.disjoint);
        assert!(!rep.identifiable);
        let rep = identifiability_report(&field, &m, &[0.04, 0.04]).unwrap();
        assert!(rep.disjoint);
        assert!(rep.identifiable, "{rep:?}");
    }

    #[test]
    fn identifiability_detects_bimodal_disk() {
        let m = ComplexMeasure::new(vec![c(0.0, 0.0)], vec![c(1.0, 0.0)]).unwrap();
        let lat = Lattice::square(1.0, 81).unwrap();
        let field = lat.sample(|z| (-(z - c(-0.1, 0.0)).norm_sqr() / 0.001).exp() + (-(z - c(0.1, 0.0)).norm_sqr() / 0.001).exp());
        let rep = identifiability_report(&field, &m, &[0.3]).unwrap();
        assert_eq!(rep.nodes[0].local_maxima, 2);
        assert!(!rep.identifiable);
    }

    #[test]
    fn identifiability_disk_must_fit() {
        let m = ComplexMeasure::new(vec![c(0.95, 0.0)], vec![c(1.0, 0.0)]).unwrap();
        let lat = Lattice::square(1.0, 21).unwrap();
        let field = lat.sample(|_| 0.0);
        assert!(matches!(
            identifiability_report(&field, &m, &[0.1]),
            Err(Error::DiskOutsideLattice { index: 0, .. })
        ));
    }
}
