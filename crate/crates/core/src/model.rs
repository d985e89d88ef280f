//! Measures, moment sequences and the complex white Gaussian noise model.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Nodes closer than this are treated as the same point.
pub const DUPLICATE_NODE_TOLERANCE: f64 = 1e-10;

/// A discrete complex measure `Σ c_j δ(z − ξ_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMeasure {
    nodes: Vec<Complex64>,
    weights: Vec<Complex64>,
}

impl ComplexMeasure {
    pub fn new(nodes: Vec<Complex64>, weights: Vec<Complex64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::MeasureShape {
                nodes: nodes.len(),
                weights: weights.len(),
            });
        }
        for i in 0..nodes.len() {
            for j in (i + 1)..nodes.len() {
                if (nodes[i] - nodes[j]).norm() < DUPLICATE_NODE_TOLERANCE {
                    return Err(Error::DuplicateNodes(i, j));
                }
            }
        }
        Ok(Self { nodes, weights })
    }

    /// The five-component benchmark: two damped modes, a pair of nearly
    /// undamped modes whose frequencies differ by less than `1/80`, and a
    /// strongly damped dominant mode. Used with `σ = 0.2`, `n = 80`.
    pub fn reference_model() -> Self {
        let mode = |damping: f64, freq: f64| Complex64::new(-damping, 2.0 * std::f64::consts::PI * freq).exp();
        let nodes = vec![
            mode(0.1, -0.3),
            mode(0.05, -0.28),
            mode(0.0001, 0.2),
            mode(0.0001, 0.21),
            mode(0.3, -0.35),
        ];
        let weights = [6.0, 3.0, 1.0, 1.0, 20.0]
            .iter()
            .map(|&w| Complex64::new(w, 0.0))
            .collect();
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    /// Number of components `p`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn min_node_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.nodes.len() {
            for j in (i + 1)..self.nodes.len() {
                best = best.min((self.nodes[i] - self.nodes[j]).norm());
            }
        }
        best
    }

    /// `s_k = Σ_j c_j ξ_j^k` for `k = 0..n`.
    pub fn moments(&self, n: usize) -> Result<MomentSequence> {
        gen_moments(self, n)
    }

    /// Signal-to-noise ratio `min_h |c_h| / σ`.
    pub fn snr(&self, sigma: f64) -> Result<f64> {
        snr(self, sigma)
    }
}

/// An even-length sequence of complex moments together with the standard
/// deviation of the noise it carries (`0` for clean moments).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSequence {
    values: Vec<Complex64>,
    sigma: f64,
}

impl MomentSequence {
    pub fn new(values: Vec<Complex64>, sigma: f64) -> Result<Self> {
        check_moment_count(values.len())?;
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidSigma {
                value: sigma,
                expected: "nonnegative",
            });
        }
        Ok(Self { values, sigma })
    }

    pub fn clean(values: Vec<Complex64>) -> Result<Self> {
        Self::new(values, 0.0)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Returns `self + ν` with `ν` drawn from `spec`.
    pub fn with_noise(&self, spec: &NoiseSpec) -> Result<Self> {
        add_noise(self, spec)
    }
}

pub(crate) fn check_moment_count(n: usize) -> Result<()> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidMomentCount(n));
    }
    Ok(())
}

/// Reproducible source of complex white Gaussian noise.
///
/// Real and imaginary parts are independent `N(0, σ²/2)`, so `E|ν|² = σ²`.
/// The stream is a ChaCha8 generator seeded by `seed` and positioned on the
/// substream `stream`, so distinct streams never overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
    pub stream: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64, stream: u64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidSigma {
                value: sigma,
                expected: "nonnegative",
            });
        }
        Ok(Self { sigma, seed, stream })
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        Self { sigma, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// `len` noise samples from this stream.
    pub fn sample(&self, len: usize) -> Vec<Complex64> {
        let mut rng = self.rng();
        (0..len).map(|_| complex_gaussian(&mut rng, self.sigma)).collect()
    }
}

/// One complex Gaussian draw with `E|ν|² = σ²`.
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, sigma: f64) -> Complex64 {
    let scale = sigma * std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * scale, im * scale)
}

pub fn gen_moments(measure: &ComplexMeasure, n: usize) -> Result<MomentSequence> {
    check_moment_count(n)?;
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    for (&node, &weight) in measure.nodes.iter().zip(&measure.weights) {
        let mut term = weight;
        for v in values.iter_mut() {
            *v += term;
            term *= node;
        }
    }
    Ok(MomentSequence { values, sigma: 0.0 })
}

/// Adds fresh noise to `clean`; noise variances add.
pub fn add_noise(clean: &MomentSequence, spec: &NoiseSpec) -> Result<MomentSequence> {
    if !spec.sigma.is_finite() || spec.sigma < 0.0 {
        return Err(Error::InvalidSigma {
            value: spec.sigma,
            expected: "nonnegative",
        });
    }
    let sigma = clean.sigma.hypot(spec.sigma);
    if spec.sigma == 0.0 {
        return Ok(MomentSequence {
            values: clean.values.clone(),
            sigma,
        });
    }
    let noise = spec.sample(clean.n());
    let values = clean.values.iter().zip(noise).map(|(a, v)| a + v).collect();
    Ok(MomentSequence { values, sigma })
}

pub fn snr(measure: &ComplexMeasure, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidSigma {
            value: sigma,
            expected: "positive",
        });
    }
    let min = measure
        .weights
        .iter()
        .map(|c| c.norm())
        .fold(f64::INFINITY, f64::min);
    Ok(min / sigma)
}
