//! The P-transform: pseudosample replication, per-replication interpolation
//! and the lattice Laplacian of the averaged logarithmic potential
//!
//! `P(z) = (1/2πR) Δ Σ_r Σ_j c_j^(r) log |z − ξ_j^(r)|`,
//!
//! which discretises `(1/R) Σ_r Σ_j c_j^(r) δ(z − ξ_j^(r))` because
//! `(1/2π) Δ log|z| = δ(z)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{laplacian, GridField, Lattice};
use crate::model::{MomentSequence, NoiseSpec};
use crate::pencil::{interpolate, PencilSolution};

/// Retries allowed per pseudosample before giving up.
pub const MAX_RETRIES: usize = 10;

/// Distances below this are replaced by half a lattice spacing.
pub const POLE_CLAMP_DISTANCE: f64 = 1e-9;

const RETRY_SEED_STEP: u64 = 0x9E37_79B9_7F4A_7C15;

/// The Padé poles and residues of `R` pseudosamples.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudosamplePool {
    pub sigma_prime: f64,
    pub solutions: Vec<PencilSolution>,
    /// Pseudosamples redrawn after a failed solve.
    pub failed: usize,
}

impl PseudosamplePool {
    pub fn from_solutions(sigma_prime: f64, solutions: Vec<PencilSolution>) -> Self {
        Self {
            sigma_prime,
            solutions,
            failed: 0,
        }
    }

    /// Number of pseudosamples `R`.
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    /// `(r, pole, residue)` for every stored pole, `r` counted from zero.
    pub fn iter_poles(&self) -> impl Iterator<Item = (usize, Complex64, Complex64)> + '_ {
        self.solutions
            .iter()
            .enumerate()
            .flat_map(|(r, s)| s.poles.iter().zip(&s.residues).map(move |(&p, &c)| (r, p, c)))
    }

    /// Whether every pole lies strictly inside the lattice bounding box with
    /// at least `margin` to spare.
    pub fn contained_in(&self, lattice: &Lattice, margin: f64) -> bool {
        self.iter_poles().all(|(_, p, _)| {
            p.re > lattice.x_min + margin
                && p.re < lattice.x_max - margin
                && p.im > lattice.y_min + margin
                && p.im < lattice.y_max - margin
        })
    }
}

/// Replicates `data` `count` times with fresh noise of level `noise.sigma`
/// (the σ′ of the pseudosamples) and solves each replication.
///
/// Pseudosample `r = 1..=count` draws from substream `noise.stream + r`. A
/// failed solve is redrawn with a shifted seed, at most [`MAX_RETRIES`]
/// times.
pub fn make_pseudosamples(data: &MomentSequence, count: usize, noise: &NoiseSpec) -> Result<PseudosamplePool> {
    if count == 0 {
        return Err(Error::InvalidArgument("at least one pseudosample is required".into()));
    }
    let solved: Vec<Result<(PencilSolution, usize)>> = (1..=count)
        .into_par_iter()
        .map(|r| solve_pseudosample(data, noise, r))
        .collect();
    let mut solutions = Vec::with_capacity(count);
    let mut failed = 0;
    for s in solved {
        let (sol, retries) = s?;
        solutions.push(sol);
        failed += retries;
    }
    Ok(PseudosamplePool {
        sigma_prime: noise.sigma,
        solutions,
        failed,
    })
}

fn solve_pseudosample(data: &MomentSequence, noise: &NoiseSpec, r: usize) -> Result<(PencilSolution, usize)> {
    let stream = noise.stream.wrapping_add(r as u64);
    let mut last = None;
    for attempt in 0..=MAX_RETRIES {
        let spec = NoiseSpec {
            seed: noise.seed.wrapping_add((attempt as u64).wrapping_mul(RETRY_SEED_STEP)),
            stream,
            sigma: noise.sigma,
        };
        let replica = data.with_noise(&spec)?;
        match interpolate(&replica) {
            Ok(sol) => return Ok((sol, attempt)),
            Err(e @ (Error::SingularPencil(_) | Error::IllConditionedVandermonde(_) | Error::EigenFailure)) => {
                last = Some(e)
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::PseudosampleExhausted {
        index: r,
        retries: MAX_RETRIES,
        last: Box::new(last.expect("loop ran")),
    })
}

/// `(1/R) Σ_r Σ_j c_j^(r) log |z − ξ_j^(r)|` on every lattice point.
pub fn accumulate_potential(pool: &PseudosamplePool, lattice: &Lattice) -> GridField<Complex64> {
    let weight = if pool.is_empty() { 0.0 } else { 1.0 / pool.len() as f64 };
    // log|d| = ½ log|d|²
    let terms: Vec<(f64, f64, Complex64)> = pool
        .iter_poles()
        .map(|(_, p, c)| (p.re, p.im, c * (0.5 * weight)))
        .collect();
    let clamp_sq = {
        let h = 0.5 * lattice.hx().min(lattice.hy());
        h * h
    };
    let min_sq = POLE_CLAMP_DISTANCE * POLE_CLAMP_DISTANCE;
    let rows: Vec<Vec<Complex64>> = (0..lattice.ny)
        .into_par_iter()
        .map(|j| {
            let y = lattice.y(j);
            (0..lattice.nx)
                .map(|i| {
                    let x = lattice.x(i);
                    let (mut re, mut im) = (0.0, 0.0);
                    for &(px, py, c) in &terms {
                        let (dx, dy) = (x - px, y - py);
                        let mut d2 = dx * dx + dy * dy;
                        if d2 < min_sq {
                            d2 = clamp_sq;
                        }
                        let l = d2.ln();
                        re += c.re * l;
                        im += c.im * l;
                    }
                    Complex64::new(re, im)
                })
                .collect()
        })
        .collect();
    GridField {
        lattice: *lattice,
        values: rows.into_iter().flatten().collect(),
        mask: vec![true; lattice.len()],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PTransformMeta {
    pub n: usize,
    pub sigma: f64,
    pub sigma_prime: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct PTransform {
    /// Real part of the transform: the canonical P matrix.
    pub grid: GridField,
    /// Modulus of the complex transform.
    pub modulus: GridField,
    pub pool: PseudosamplePool,
    pub meta: PTransformMeta,
}

impl PTransform {
    /// `Σ P(h, k) h_x h_y`.
    pub fn mass(&self) -> f64 {
        self.grid.mass()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.grid.lattice
    }
}

/// Transforms an already computed pool.
pub fn transform_pool(pool: PseudosamplePool, lattice: &Lattice, meta: PTransformMeta) -> PTransform {
    let potential = accumulate_potential(&pool, lattice);
    let lap = laplacian(&potential);
    let scale = 1.0 / (2.0 * PI);
    PTransform {
        grid: lap.map(|v| v.re * scale),
        modulus: lap.map(|v| v.norm() * scale),
        pool,
        meta,
    }
}

/// The P-transform of `data` from `count` pseudosamples with noise level
/// `noise.sigma`.
pub fn ptransform(data: &MomentSequence, lattice: &Lattice, count: usize, noise: &NoiseSpec) -> Result<PTransform> {
    let pool = make_pseudosamples(data, count, noise)?;
    let meta = PTransformMeta {
        n: data.n(),
        sigma: data.sigma(),
        sigma_prime: noise.sigma,
        seed: noise.seed,
    };
    Ok(transform_pool(pool, lattice, meta))
}
