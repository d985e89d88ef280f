//! Estimation of a discrete complex measure `S(z) = Σ c_j δ(z − ξ_j)` from
//! finitely many noisy complex moments.
//!
//! The pipeline replicates the observed moments with artificial Gaussian
//! noise (pseudosamples), solves the complex exponential interpolation
//! problem for each replication through a Hankel pencil, accumulates the
//! residue-weighted logarithmic potential of the Padé poles on a lattice and
//! applies a discrete Laplacian. The resulting matrix (the P-transform) is a
//! discretised estimate of the measure; [`estimate`] turns its peaks into
//! parameter estimates.
//!
//! [`density`] computes the condensed density of the pencil's generalized
//! eigenvalues, either by Monte Carlo or through the analytic approximation
//! built from the expected Gram matrix `E[F(z, z̄)]`, and checks
//! identifiability of a model before an experiment is run.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod io;
pub mod lattice;
mod linalg;
pub mod model;
pub mod pencil;
pub mod ptransform;

pub use num_complex::Complex64;

pub use error::{Error, Result};
pub use estimate::{estimate_params, Cluster, EstimateParams, EstimationResult};
pub use lattice::{GridField, Lattice};
pub use model::{ComplexMeasure, MomentSequence, NoiseSpec};
pub use pencil::{interpolate, HankelPair, PencilSolution};
pub use ptransform::{ptransform, PTransform, PseudosamplePool};
