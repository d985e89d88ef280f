//! Simulation drivers: repeated estimation on independent noisy data sets,
//! the single-solve versus pseudosample-average error comparison, and the
//! support radii of the analytic density peaks.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::density::analytic_density_at;
use crate::error::{Error, Result};
use crate::estimate::{estimate_params, EstimateParams, EstimationResult};
use crate::lattice::Lattice;
use crate::model::{ComplexMeasure, MomentSequence, NoiseSpec};
use crate::pencil::{interpolate, PencilSolution};
use crate::ptransform::{make_pseudosamples, ptransform};

/// Replicate `m` draws its data noise from substream `m << 32` and its
/// pseudosamples from the substreams directly above it.
const REPLICATE_STREAM_SHIFT: u32 = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub measure: ComplexMeasure,
    pub n: usize,
    pub sigma: f64,
    /// Outer replications `M`.
    pub replications: usize,
    /// Pseudosamples per data set `R`.
    pub pseudosamples: usize,
    pub sigma_prime: f64,
    pub lattice: Lattice,
    pub estimate: EstimateParams,
    pub seed: u64,
}

impl ExperimentConfig {
    /// The five node reference model at `σ = 0.2`, `n = 80`, with `M = 50`
    /// data sets, `R = 100` pseudosamples of variance `10⁻⁴σ²` and a
    /// 200 × 200 lattice on `[-1.1, 1.1]²`.
    pub fn table1(seed: u64) -> Self {
        let sigma = 0.2;
        Self {
            measure: ComplexMeasure::reference_model(),
            n: 80,
            sigma,
            replications: 50,
            pseudosamples: 100,
            sigma_prime: 1e-2 * sigma,
            lattice: Lattice::square(1.1, 200).expect("valid lattice"),
            estimate: EstimateParams {
                tau: EstimateParams::DEFAULT_TAU,
                radius: 0.03,
                min_height_fraction: 0.03,
            },
            seed,
        }
    }

    /// As [`table1`](Self::table1) with `M = 30` and `σ′² = 0.64σ²`.
    pub fn fig2(seed: u64) -> Self {
        let base = Self::table1(seed);
        Self {
            replications: 30,
            sigma_prime: 0.8 * base.sigma,
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::model::check_moment_count(self.n)?;
        if self.replications == 0 || self.pseudosamples == 0 {
            return Err(Error::InvalidArgument("replications and pseudosamples must be positive".into()));
        }
        if self.pseudosamples as u64 >= 1 << REPLICATE_STREAM_SHIFT {
            return Err(Error::InvalidArgument("too many pseudosamples".into()));
        }
        for value in [self.sigma, self.sigma_prime] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidSigma {
                    value,
                    expected: "nonnegative",
                });
            }
        }
        let p = &self.estimate;
        if !(p.tau > 0.0 && p.tau <= 1.0) || !(p.radius > 0.0) || !(0.0..1.0).contains(&p.min_height_fraction) {
            return Err(Error::InvalidArgument(format!("invalid estimation parameters {p:?}")));
        }
        Ok(())
    }

    fn clean_moments(&self) -> Result<MomentSequence> {
        self.measure.moments(self.n)
    }

    fn data_noise(&self, m: usize) -> NoiseSpec {
        NoiseSpec {
            sigma: self.sigma,
            seed: self.seed,
            stream: (m as u64) << REPLICATE_STREAM_SHIFT,
        }
    }

    fn pseudo_noise(&self, m: usize) -> NoiseSpec {
        self.data_noise(m).with_sigma(self.sigma_prime)
    }

    /// Data set `m` (from zero).
    pub fn data(&self, m: usize) -> Result<MomentSequence> {
        self.clean_moments()?.with_noise(&self.data_noise(m))
    }
}

/// Bias, spread and mean squared error of one estimated parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub truth: Complex64,
    pub bias: Complex64,
    /// `sqrt(mean |x − mean x|²)`.
    pub sd: f64,
    /// `mean |x − truth|²`.
    pub mse: f64,
    pub count: usize,
}

impl Summary {
    pub fn new(values: &[Complex64], truth: Complex64) -> Self {
        if values.is_empty() {
            return Self {
                truth,
                bias: Complex64::new(f64::NAN, f64::NAN),
                sd: f64::NAN,
                mse: f64::NAN,
                count: 0,
            };
        }
        let k = values.len() as f64;
        let mean = values.iter().sum::<Complex64>() / k;
        let var = values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / k;
        let mse = values.iter().map(|v| (v - truth).norm_sqr()).sum::<f64>() / k;
        Self {
            truth,
            bias: mean - truth,
            sd: var.sqrt(),
            mse,
            count: values.len(),
        }
    }

    pub fn from_real(values: &[f64], truth: f64) -> Self {
        let v: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::new(&v, Complex64::new(truth, 0.0))
    }
}

/// Why a data set was left out of the parameter statistics.
#[derive(Debug, Clone, PartialEq)]
pub enum Discard {
    TooFewMaxima,
    TooFewClusters,
    DuplicateMatch,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Replicate {
    /// Estimates matched to the true nodes, in the measure's node order.
    Accepted {
        p_hat: usize,
        nodes: Vec<Complex64>,
        weights: Vec<Complex64>,
        residual_amplitude: Option<f64>,
    },
    Discarded {
        p_hat: Option<usize>,
        residual_amplitude: Option<f64>,
        reason: Discard,
    },
}

impl Replicate {
    pub fn p_hat(&self) -> Option<usize> {
        match self {
            Replicate::Accepted { p_hat, .. } => Some(*p_hat),
            Replicate::Discarded { p_hat, .. } => *p_hat,
        }
    }

    pub fn residual_amplitude(&self) -> Option<f64> {
        match self {
            Replicate::Accepted { residual_amplitude, .. } | Replicate::Discarded { residual_amplitude, .. } => {
                *residual_amplitude
            }
        }
    }

    pub fn is_accepted(&self) -> bool {
        matches!(self, Replicate::Accepted { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiscardCounts {
    pub too_few_maxima: usize,
    pub too_few_clusters: usize,
    pub duplicate_match: usize,
    pub failed: usize,
}

impl DiscardCounts {
    pub fn total(&self) -> usize {
        self.too_few_maxima + self.too_few_clusters + self.duplicate_match + self.failed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamStats {
    pub nodes: Vec<Summary>,
    pub weights: Vec<Summary>,
    /// Statistics of `p̂` over every data set whose pipeline completed.
    pub order: Summary,
    pub replications: usize,
    pub accepted: usize,
    pub discarded: DiscardCounts,
    pub acceptance_rate: f64,
    /// Mean residual amplitude over the data sets with `p̂ > p`.
    pub a_res: Option<f64>,
    pub surplus_runs: usize,
    pub replicates: Vec<Replicate>,
}

/// Assigns to every true node the nearest estimate, ties going to the larger
/// `|ĉ|`. `None` if two nodes share an estimate.
pub fn match_estimates(truth: &[Complex64], nodes_hat: &[Complex64], weights_hat: &[Complex64]) -> Option<Vec<usize>> {
    let mut chosen = Vec::with_capacity(truth.len());
    for &xi in truth {
        let mut best: Option<(usize, f64)> = None;
        for (j, &z) in nodes_hat.iter().enumerate() {
            let d = (z - xi).norm();
            let better = match best {
                None => true,
                Some((b, bd)) => d < bd || (d == bd && weights_hat[j].norm() > weights_hat[b].norm()),
            };
            if better {
                best = Some((j, d));
            }
        }
        chosen.push(best?.0);
    }
    let mut sorted = chosen.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some(chosen)
}

/// Applies the discard rules to one estimation result.
pub fn classify(measure: &ComplexMeasure, est: &EstimationResult) -> Replicate {
    let p = measure.len();
    let p_hat = est.p_hat;
    let residual_amplitude = est.clone().with_reference_order(p).residual_amplitude;
    let discard = |reason| Replicate::Discarded {
        p_hat: Some(p_hat),
        residual_amplitude,
        reason,
    };
    if est.candidates < p {
        return discard(Discard::TooFewMaxima);
    }
    if p_hat < p {
        return discard(Discard::TooFewClusters);
    }
    match match_estimates(measure.nodes(), &est.nodes_hat, &est.weights_hat) {
        None => discard(Discard::DuplicateMatch),
        Some(idx) => Replicate::Accepted {
            p_hat,
            nodes: idx.iter().map(|&j| est.nodes_hat[j]).collect(),
            weights: idx.iter().map(|&j| est.weights_hat[j]).collect(),
            residual_amplitude,
        },
    }
}

/// Transform and estimation for data set `m`.
pub fn estimate_replicate(cfg: &ExperimentConfig, m: usize) -> Result<EstimationResult> {
    let data = cfg.data(m)?;
    let pt = ptransform(&data, &cfg.lattice, cfg.pseudosamples, &cfg.pseudo_noise(m))?;
    Ok(estimate_params(&pt, &cfg.estimate))
}

pub fn run_replicate(cfg: &ExperimentConfig, m: usize) -> Replicate {
    match estimate_replicate(cfg, m) {
        Ok(est) => classify(&cfg.measure, &est),
        Err(e) => Replicate::Discarded {
            p_hat: None,
            residual_amplitude: None,
            reason: Discard::Failed(e.to_string()),
        },
    }
}

/// Aggregates per data set outcomes.
pub fn summarize_replicates(measure: &ComplexMeasure, replicates: Vec<Replicate>) -> ParamStats {
    let p = measure.len();
    let mut discarded = DiscardCounts::default();
    let mut node_values = vec![Vec::new(); p];
    let mut weight_values = vec![Vec::new(); p];
    let mut orders = Vec::new();
    let mut surplus = Vec::new();
    for rep in &replicates {
        if let Some(ph) = rep.p_hat() {
            orders.push(ph as f64);
        }
        if let Some(a) = rep.residual_amplitude() {
            surplus.push(a);
        }
        match rep {
            Replicate::Accepted { nodes, weights, .. } => {
                for k in 0..p {
                    node_values[k].push(nodes[k]);
                    weight_values[k].push(weights[k]);
                }
            }
            Replicate::Discarded { reason, .. } => match reason {
                Discard::TooFewMaxima => discarded.too_few_maxima += 1,
                Discard::TooFewClusters => discarded.too_few_clusters += 1,
                Discard::DuplicateMatch => discarded.duplicate_match += 1,
                Discard::Failed(_) => discarded.failed += 1,
            },
        }
    }
    let accepted = replicates.len() - discarded.total();
    ParamStats {
        nodes: (0..p).map(|k| Summary::new(&node_values[k], measure.nodes()[k])).collect(),
        weights: (0..p).map(|k| Summary::new(&weight_values[k], measure.weights()[k])).collect(),
        order: Summary::from_real(&orders, p as f64),
        replications: replicates.len(),
        accepted,
        acceptance_rate: accepted as f64 / replicates.len().max(1) as f64,
        a_res: if surplus.is_empty() {
            None
        } else {
            Some(surplus.iter().sum::<f64>() / surplus.len() as f64)
        },
        surplus_runs: surplus.len(),
        discarded,
        replicates,
    }
}

/// Repeats transform and estimation on `M` independent data sets.
pub fn run_table1(cfg: &ExperimentConfig) -> Result<ParamStats> {
    cfg.validate()?;
    let replicates: Vec<Replicate> = (0..cfg.replications)
        .into_par_iter()
        .map(|m| run_replicate(cfg, m))
        .collect();
    Ok(summarize_replicates(&cfg.measure, replicates))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorPair {
    pub m: usize,
    pub e0: f64,
    pub e_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorComparison {
    pub pairs: Vec<ErrorPair>,
    /// Data sets where either error could not be computed.
    pub failed: Vec<usize>,
}

impl ErrorComparison {
    pub fn fraction_improved(&self) -> f64 {
        if self.pairs.is_empty() {
            return f64::NAN;
        }
        self.pairs.iter().filter(|p| p.e_r < p.e0).count() as f64 / self.pairs.len() as f64
    }

    pub fn mean_e0(&self) -> f64 {
        mean_sd(self.pairs.iter().map(|p| p.e0)).0
    }

    pub fn mean_e_r(&self) -> f64 {
        mean_sd(self.pairs.iter().map(|p| p.e_r)).0
    }

    pub fn sd_e0(&self) -> f64 {
        mean_sd(self.pairs.iter().map(|p| p.e0)).1
    }

    pub fn sd_e_r(&self) -> f64 {
        mean_sd(self.pairs.iter().map(|p| p.e_r)).1
    }
}

fn mean_sd(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k;
    (mean, var.sqrt())
}

/// The `p` largest-`|c|` components of a solution, largest first.
pub fn leading_components(sol: &PencilSolution, p: usize) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    if sol.len() < p {
        return Err(Error::InvalidArgument(format!("{} components, need {p}", sol.len())));
    }
    let mut idx: Vec<usize> = (0..sol.len()).collect();
    idx.sort_by(|&a, &b| sol.residues[b].norm().total_cmp(&sol.residues[a].norm()));
    idx.truncate(p);
    Ok((idx.iter().map(|&j| sol.poles[j]).collect(), idx.iter().map(|&j| sol.residues[j]).collect()))
}

/// `Σ |ξ̂_j − ξ_j|² + Σ |ĉ_j − c_j|²`, both sides ordered by decreasing
/// weight modulus.
pub fn squared_error(measure: &ComplexMeasure, nodes: &[Complex64], weights: &[Complex64]) -> f64 {
    let mut order: Vec<usize> = (0..measure.len()).collect();
    order.sort_by(|&a, &b| measure.weights()[b].norm().total_cmp(&measure.weights()[a].norm()));
    order
        .iter()
        .enumerate()
        .map(|(j, &k)| (nodes[j] - measure.nodes()[k]).norm_sqr() + (weights[j] - measure.weights()[k]).norm_sqr())
        .sum()
}

fn error_pair(cfg: &ExperimentConfig, m: usize) -> Result<ErrorPair> {
    let p = cfg.measure.len();
    let data = cfg.data(m)?;
    let (nodes, weights) = leading_components(&interpolate(&data)?, p)?;
    let e0 = squared_error(&cfg.measure, &nodes, &weights);

    let pool = make_pseudosamples(&data, cfg.pseudosamples, &cfg.pseudo_noise(m))?;
    // running means, so identical pseudosamples average to themselves exactly
    let mut mean_nodes = vec![Complex64::new(0.0, 0.0); p];
    let mut mean_weights = vec![Complex64::new(0.0, 0.0); p];
    for (r, sol) in pool.solutions.iter().enumerate() {
        let (xs, cs) = leading_components(sol, p)?;
        let k = (r + 1) as f64;
        for j in 0..p {
            let (dx, dc) = (xs[j] - mean_nodes[j], cs[j] - mean_weights[j]);
            mean_nodes[j] += dx / k;
            mean_weights[j] += dc / k;
        }
    }
    let e_r = squared_error(&cfg.measure, &mean_nodes, &mean_weights);
    Ok(ErrorPair { m, e0, e_r })
}

/// Single-solve error `e_0(m)` against the pseudosample-averaged error
/// `e_R(m)` for each data set.
pub fn run_error_comparison(cfg: &ExperimentConfig) -> Result<ErrorComparison> {
    cfg.validate()?;
    let results: Vec<Result<ErrorPair>> = (0..cfg.replications)
        .into_par_iter()
        .map(|m| error_pair(cfg, m))
        .collect();
    let mut out = ErrorComparison {
        pairs: Vec::new(),
        failed: Vec::new(),
    };
    for (m, r) in results.into_iter().enumerate() {
        match r {
            Ok(pair) => out.pairs.push(pair),
            Err(_) => out.failed.push(m),
        }
    }
    Ok(out)
}

/// Half-width of the probe window used by [`support_radii`] when the
/// nearest other node is far away.
pub const MAX_PROBE_HALF_WIDTH: f64 = 0.25;

/// Analytic density profile along the line through `node` and `toward`,
/// sampled with step `h` on `|t| ≤ half_width`.
pub fn density_profile(
    clean: &[Complex64],
    sigma: f64,
    node: Complex64,
    toward: Complex64,
    half_width: f64,
    h: f64,
) -> Result<Vec<(f64, f64)>> {
    let dir = (toward - node) / (toward - node).norm();
    let steps = (half_width / h).floor() as i64;
    (-steps..=steps)
        .map(|s| {
            let t = s as f64 * h;
            analytic_density_at(clean, sigma, node + dir * t, h).map(|v| (t, v))
        })
        .collect()
}

/// Interquartile range of the peak of `profile` closest to `t = 0`,
/// restricted to the monotone flanks around it. Each sample is spread over a
/// cell of width `h`, so a single-sample spike has range `h/2`.
pub fn peak_interquartile_range(profile: &[(f64, f64)], h: f64) -> Option<f64> {
    let n = profile.len();
    let v: Vec<f64> = profile.iter().map(|p| p.1).collect();
    let peak = (1..n.saturating_sub(1))
        .filter(|&i| v[i].is_finite() && v[i] > 0.0 && v[i] > v[i - 1] && v[i] >= v[i + 1])
        .min_by(|&a, &b| profile[a].0.abs().total_cmp(&profile[b].0.abs()))?;
    let mut lo = peak;
    while lo > 0 && v[lo - 1] <= v[lo] && v[lo - 1] > 0.0 {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < n && v[hi + 1] <= v[hi] && v[hi + 1] > 0.0 {
        hi += 1;
    }
    let weights = &v[lo..=hi];
    let total: f64 = weights.iter().sum();
    let quantile = |q: f64| {
        let target = q * total;
        let mut acc = 0.0;
        for (k, &w) in weights.iter().enumerate() {
            if acc + w >= target {
                let frac = if w > 0.0 { (target - acc) / w } else { 0.0 };
                return profile[lo + k].0 - h / 2.0 + frac * h;
            }
            acc += w;
        }
        profile[hi].0 + h / 2.0
    };
    Some(quantile(0.75) - quantile(0.25))
}

/// Support radius of the analytic density peak at each node, from the
/// interquartile range of its profile along the line to the nearest other
/// node. `None` marks a node without a nearby peak.
pub fn support_radii(measure: &ComplexMeasure, n: usize, sigma: f64, lattice: &Lattice) -> Result<Vec<Option<f64>>> {
    let clean = measure.moments(n)?;
    let h = lattice.hx().min(lattice.hy());
    let nodes = measure.nodes();
    (0..nodes.len())
        .into_par_iter()
        .map(|j| {
            let (other, dist) = nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &z)| (z, (z - nodes[j]).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap_or((nodes[j] + 1.0, f64::INFINITY));
            let half = (dist / 2.0).min(MAX_PROBE_HALF_WIDTH);
            let profile = density_profile(clean.values(), sigma, nodes[j], other, half, h)?;
            Ok(peak_interquartile_range(&profile, h))
        })
        .collect()
}

/// For each node, the fraction of poles it attracts that fall within its
/// radius, over `trials` noisy data sets. A pole is attracted by its nearest
/// node when it lies within half the distance to that node's nearest
/// neighbour, capped at [`MAX_PROBE_HALF_WIDTH`].
pub fn pole_coverage(
    measure: &ComplexMeasure,
    n: usize,
    sigma: f64,
    radii: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let clean = measure.moments(n)?;
    let nodes = measure.nodes();
    let reach: Vec<f64> = (0..nodes.len())
        .map(|j| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, z)| (z - nodes[j]).norm() / 2.0)
                .fold(MAX_PROBE_HALF_WIDTH, f64::min)
        })
        .collect();
    let counts: Vec<Result<Vec<(usize, usize)>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let data = clean.with_noise(&NoiseSpec::new(sigma, seed, t as u64)?)?;
            let sol = interpolate(&data)?;
            let mut c = vec![(0, 0); nodes.len()];
            for &pole in &sol.poles {
                let (j, d) = nodes
                    .iter()
                    .enumerate()
                    .map(|(j, z)| (j, (pole - z).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("nonempty measure");
                if d <= reach[j] {
                    c[j].0 += 1;
                    if d <= radii[j] {
                        c[j].1 += 1;
                    }
                }
            }
            Ok(c)
        })
        .collect();
    let mut total = vec![(0usize, 0usize); nodes.len()];
    for c in counts.into_iter().flatten() {
        for (acc, v) in total.iter_mut().zip(c) {
            acc.0 += v.0;
            acc.1 += v.1;
        }
    }
    Ok(total
        .iter()
        .map(|&(a, inside)| if a == 0 { f64::NAN } else { inside as f64 / a as f64 })
        .collect())
}
