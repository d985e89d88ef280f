//! Parameter estimation from a P-transform: peaks of the transform are node
//! candidates, the memorized Padé poles near each candidate form a cluster,
//! clusters supported by too few pseudosamples are dropped and the rest are
//! averaged.

use std::collections::BTreeSet;

use num_complex::Complex64;

use crate::lattice::{GridField, Lattice};
use crate::ptransform::{PTransform, PseudosamplePool};

/// Parameters of the cluster step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateParams {
    /// Minimum fraction of pseudosamples a cluster must draw poles from.
    pub tau: f64,
    /// Membership radius around a candidate.
    pub radius: f64,
    /// Maxima below this fraction of the global maximum are ignored.
    pub min_height_fraction: f64,
}

impl EstimateParams {
    pub const DEFAULT_TAU: f64 = 0.5;
    pub const DEFAULT_MIN_HEIGHT: f64 = 0.05;
    pub const DEFAULT_RADIUS_SPACINGS: f64 = 5.0;

    /// Defaults with the radius set to five lattice spacings.
    pub fn for_lattice(lattice: &Lattice) -> Self {
        Self {
            tau: Self::DEFAULT_TAU,
            radius: Self::DEFAULT_RADIUS_SPACINGS * lattice.hx().max(lattice.hy()),
            min_height_fraction: Self::DEFAULT_MIN_HEIGHT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterMember {
    pub pole: Complex64,
    pub residue: Complex64,
    /// Pseudosample index, from zero.
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub candidate: Complex64,
    /// Transform value at the candidate.
    pub peak: f64,
    pub members: Vec<ClusterMember>,
    pub radius: f64,
    /// Distinct pseudosample indices among the members, divided by `R`.
    pub cardinality_fraction: f64,
}

impl Cluster {
    fn from_members(candidate: Complex64, peak: f64, members: Vec<ClusterMember>, radius: f64, pool_size: usize) -> Self {
        let distinct: BTreeSet<usize> = members.iter().map(|m| m.r).collect();
        let cardinality_fraction = if pool_size == 0 {
            0.0
        } else {
            distinct.len() as f64 / pool_size as f64
        };
        Self {
            candidate,
            peak,
            members,
            radius,
            cardinality_fraction,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Average member pole; the candidate itself for an empty cluster.
    pub fn mean_pole(&self) -> Complex64 {
        if self.members.is_empty() {
            return self.candidate;
        }
        self.members.iter().map(|m| m.pole).sum::<Complex64>() / self.members.len() as f64
    }

    pub fn mean_residue(&self) -> Complex64 {
        if self.members.is_empty() {
            return Complex64::new(0.0, 0.0);
        }
        self.members.iter().map(|m| m.residue).sum::<Complex64>() / self.members.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub p_hat: usize,
    pub nodes_hat: Vec<Complex64>,
    pub weights_hat: Vec<Complex64>,
    /// Kept clusters, in the same order as the estimates.
    pub clusters: Vec<Cluster>,
    /// Number of local maxima found before any filtering.
    pub candidates: usize,
    pub residual_amplitude: Option<f64>,
}

impl EstimationResult {
    /// Sets [`residual_amplitude`](Self::residual_amplitude) for a known
    /// true order `p`: the mean `|ĉ_j|` over the components ranked after the
    /// first `p`. `None` unless `p̂ > p`.
    pub fn with_reference_order(mut self, p: usize) -> Self {
        self.residual_amplitude = residual_amplitude(&self.weights_hat, p);
        self
    }
}

/// Mean modulus of `weights[p..]`, `None` if there are at most `p` weights.
pub fn residual_amplitude(weights: &[Complex64], p: usize) -> Option<f64> {
    if weights.len() <= p {
        return None;
    }
    let surplus = &weights[p..];
    Some(surplus.iter().map(|c| c.norm()).sum::<f64>() / surplus.len() as f64)
}

/// Interior points strictly greater than all eight neighbours and at least
/// `min_height_fraction` times the global maximum, strongest first.
pub fn local_maxima(grid: &GridField, min_height_fraction: f64) -> Vec<(Complex64, f64)> {
    let lat = grid.lattice;
    let global = grid.max_value();
    if !global.is_finite() {
        return Vec::new();
    }
    let floor = min_height_fraction * global;
    let mut found = Vec::new();
    for j in 1..lat.ny - 1 {
        for i in 1..lat.nx - 1 {
            if !grid.is_valid(i, j) {
                continue;
            }
            let v = grid.get(i, j);
            if !v.is_finite() || v < floor {
                continue;
            }
            let strict = (j - 1..=j + 1)
                .flat_map(|nj| (i - 1..=i + 1).map(move |ni| (ni, nj)))
                .filter(|&(ni, nj)| (ni, nj) != (i, j))
                .all(|(ni, nj)| grid.is_valid(ni, nj) && grid.get(ni, nj) < v);
            if strict {
                found.push((lat.index(i, j), lat.point(i, j), v));
            }
        }
    }
    found.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    found.into_iter().map(|(_, z, v)| (z, v)).collect()
}

/// All pool poles within `radius` of `candidate`.
pub fn build_cluster(candidate: Complex64, pool: &PseudosamplePool, radius: f64) -> Cluster {
    let members = pool
        .iter_poles()
        .filter(|(_, p, _)| (p - candidate).norm() <= radius)
        .map(|(r, pole, residue)| ClusterMember { pole, residue, r })
        .collect();
    Cluster::from_members(candidate, f64::NAN, members, radius, pool.len())
}

/// Runs the cluster step on a transform grid and its pole pool.
///
/// Candidates are visited strongest first and any candidate within `radius`
/// of an earlier survivor is dropped. Each pole then joins the nearest
/// surviving candidate within `radius`, so no pole is shared. Clusters whose
/// cardinality fraction is below `tau` are discarded, and the remaining ones
/// are averaged and ordered by decreasing `|ĉ|`.
pub fn estimate_from_grid(grid: &GridField, pool: &PseudosamplePool, params: &EstimateParams) -> EstimationResult {
    let maxima = local_maxima(grid, params.min_height_fraction);
    let radius = params.radius;

    let mut survivors: Vec<(Complex64, f64)> = Vec::new();
    for &(z, v) in &maxima {
        if survivors.iter().all(|(s, _)| (z - s).norm() > radius) {
            survivors.push((z, v));
        }
    }

    let mut members: Vec<Vec<ClusterMember>> = vec![Vec::new(); survivors.len()];
    for (r, pole, residue) in pool.iter_poles() {
        let mut best: Option<(usize, f64)> = None;
        for (k, (s, _)) in survivors.iter().enumerate() {
            let d = (pole - s).norm();
            if d <= radius && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((k, d));
            }
        }
        if let Some((k, _)) = best {
            members[k].push(ClusterMember { pole, residue, r });
        }
    }

    let mut clusters: Vec<Cluster> = survivors
        .into_iter()
        .zip(members)
        .map(|((z, v), m)| Cluster::from_members(z, v, m, radius, pool.len()))
        .filter(|c| !c.is_empty() && c.cardinality_fraction >= params.tau)
        .collect();
    let mut ranked: Vec<(Complex64, Complex64, Cluster)> =
        clusters.drain(..).map(|c| (c.mean_pole(), c.mean_residue(), c)).collect();
    ranked.sort_by(|a, b| b.1.norm().total_cmp(&a.1.norm()));

    let mut result = EstimationResult {
        p_hat: ranked.len(),
        nodes_hat: Vec::with_capacity(ranked.len()),
        weights_hat: Vec::with_capacity(ranked.len()),
        clusters: Vec::with_capacity(ranked.len()),
        candidates: maxima.len(),
        residual_amplitude: None,
    };
    for (node, weight, cluster) in ranked {
        result.nodes_hat.push(node);
        result.weights_hat.push(weight);
        result.clusters.push(cluster);
    }
    result
}

/// [`estimate_from_grid`] on a computed transform.
pub fn estimate_params(pt: &PTransform, params: &EstimateParams) -> EstimationResult {
    estimate_from_grid(&pt.grid, &pt.pool, params)
}
