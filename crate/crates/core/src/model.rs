//! Domain vocabulary: observed samples, probability vectors, the `psi`
//! contract, configuration and results.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of each probability block.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Observed cell counts for one multinomial sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultinomialSample {
    counts: Vec<u32>,
    n: u32,
}

impl MultinomialSample {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::InvalidDimension(counts.len()));
        }
        let n = counts
            .iter()
            .try_fold(0u32, |acc, &c| acc.checked_add(c))
            .ok_or_else(|| Error::InvalidSample {
                index: 0,
                reason: "total count overflows u32".into(),
            })?;
        Ok(Self { counts, n })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Number of trials.
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Number of categories.
    pub fn d(&self) -> usize {
        self.counts.len()
    }

    pub fn shape(&self) -> BlockShape {
        BlockShape { n: self.n, d: self.d() }
    }
}

/// Trials and categories of one multinomial block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockShape {
    pub n: u32,
    pub d: usize,
}

/// The k independent samples `T = (T_1, ..., T_k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    samples: Vec<MultinomialSample>,
}

impl Dataset {
    pub fn new(samples: Vec<MultinomialSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Config("a dataset needs at least one sample".into()));
        }
        let total: u64 = samples.iter().map(|s| u64::from(s.n())).sum();
        if total == 0 {
            return Err(Error::Config("total sample size must be positive".into()));
        }
        Ok(Self { samples })
    }

    pub fn from_counts(counts: Vec<Vec<u32>>) -> Result<Self> {
        let samples = counts
            .into_iter()
            .enumerate()
            .map(|(index, c)| {
                MultinomialSample::new(c).map_err(|e| match e {
                    Error::InvalidSample { reason, .. } => Error::InvalidSample { index, reason },
                    Error::InvalidDimension(d) => Error::InvalidSample {
                        index,
                        reason: format!("needs at least 2 categories, got {d}"),
                    },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples)
    }

    pub fn samples(&self) -> &[MultinomialSample] {
        &self.samples
    }

    pub fn k(&self) -> usize {
        self.samples.len()
    }

    pub fn total_n(&self) -> u64 {
        self.samples.iter().map(|s| u64::from(s.n())).sum()
    }

    pub fn shape(&self) -> Vec<BlockShape> {
        self.samples.iter().map(MultinomialSample::shape).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.samples.iter().map(MultinomialSample::d).collect()
    }

    /// Concatenated counts of all samples.
    pub fn flat_counts(&self) -> Vec<u32> {
        self.samples.iter().flat_map(|s| s.counts().iter().copied()).collect()
    }
}

/// Concatenated probability blocks `(theta_1, ..., theta_k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityVector {
    probs: Vec<f64>,
    dims: Vec<usize>,
}

impl ProbabilityVector {
    pub fn new(probs: Vec<f64>, dims: Vec<usize>) -> Result<Self> {
        let expected: usize = dims.iter().sum();
        if expected != probs.len() {
            return Err(Error::Shape(format!(
                "block sizes {dims:?} sum to {expected} but {} probabilities were given",
                probs.len()
            )));
        }
        if let Some(&d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidDimension(d));
        }
        let mut offset = 0;
        for (j, &d) in dims.iter().enumerate() {
            let block = &probs[offset..offset + d];
            if let Some(p) = block.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidProbability(format!(
                    "block {j} has entry {p} outside [0, 1]"
                )));
            }
            let sum: f64 = block.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidProbability(format!("block {j} sums to {sum}")));
            }
            offset += d;
        }
        Ok(Self { probs, dims })
    }

    pub fn from_blocks(blocks: Vec<Vec<f64>>) -> Result<Self> {
        let dims = blocks.iter().map(Vec::len).collect();
        Self::new(blocks.into_iter().flatten().collect(), dims)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> + '_ {
        let mut offset = 0;
        self.dims.iter().map(move |&d| {
            let block = &self.probs[offset..offset + d];
            offset += d;
            block
        })
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

/// Sample proportions `counts_j / n_j`, block by block.
pub fn theta_hat(data: &Dataset) -> Result<ProbabilityVector> {
    let mut probs = Vec::with_capacity(data.dims().iter().sum());
    for (index, sample) in data.samples().iter().enumerate() {
        if sample.n() == 0 {
            return Err(Error::DegenerateSample { index });
        }
        let n = f64::from(sample.n());
        probs.extend(sample.counts().iter().map(|&c| f64::from(c) / n));
    }
    ProbabilityVector::new(probs, data.dims())
}

/// Writes the proportions of a flat count vector into `out`.
pub(crate) fn proportions_into(counts: &[u32], shape: &[BlockShape], out: &mut [f64]) {
    let mut offset = 0;
    for block in shape {
        let n = f64::from(block.n);
        for i in offset..offset + block.d {
            out[i] = f64::from(counts[i]) / n;
        }
        offset += block.d;
    }
}

type PsiFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A real-valued function of the concatenated probability vector together
/// with its declared range `[psi_min, psi_max]`.
///
/// The function must be pure and total on the closed product simplex, since
/// sample proportions routinely sit on its boundary.
#[derive(Clone)]
pub struct PsiSpec {
    name: String,
    limits: (f64, f64),
    dims: Option<Vec<usize>>,
    func: Arc<PsiFn>,
}

impl PsiSpec {
    pub fn new<F>(name: impl Into<String>, limits: (f64, f64), func: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), limits, dims: None, func: Arc::new(func) }
    }

    /// Restricts the function to inputs with the given block sizes.
    pub fn with_dims(mut self, dims: Vec<usize>) -> Self {
        self.dims = Some(dims);
        self
    }

    pub fn with_limits(mut self, limits: (f64, f64)) -> Self {
        self.limits = limits;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn limits(&self) -> (f64, f64) {
        self.limits
    }

    pub fn required_dims(&self) -> Option<&[usize]> {
        self.dims.as_deref()
    }

    pub fn evaluate(&self, theta: &[f64]) -> f64 {
        (self.func)(theta)
    }

    pub fn evaluate_vector(&self, theta: &ProbabilityVector) -> Result<f64> {
        self.check_dims(theta.dims())?;
        Ok(self.evaluate(theta.as_slice()))
    }

    pub fn check_dims(&self, dims: &[usize]) -> Result<()> {
        match &self.dims {
            Some(required) if required.as_slice() != dims => Err(Error::Shape(format!(
                "psi `{}` expects blocks {required:?}, data has {dims:?}",
                self.name
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Debug for PsiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PsiSpec")
            .field("name", &self.name)
            .field("limits", &self.limits)
            .field("dims", &self.dims)
            .finish_non_exhaustive()
    }
}

/// Which one-sided null hypothesis is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `H0: psi <= psi0` against `psi > psi0`; inverted for the lower limit.
    #[default]
    Lower,
    /// `H0: psi >= psi0` against `psi < psi0`; inverted for the upper limit.
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceConfig {
    pub alpha: f64,
    /// Null value. `None` requests a confidence interval only.
    pub psi0: Option<f64>,
    pub direction: Direction,
    /// When false and `psi0` is set, only the p-value is computed.
    pub conf_int: bool,
    pub maxit: usize,
    pub chunksize: usize,
    /// Stops the reported p-value computation once the running maximum
    /// exceeds this value. The confidence-interval search always stops at
    /// `alpha / 2 + 0.001` unless this is set.
    pub early_stop_threshold: Option<f64>,
    pub seed: u64,
    /// Root-finding tolerance; defaults to `1e-4` times the width of the
    /// psi limits.
    pub itp_eps: Option<f64>,
    pub cardinality_cap: u64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            psi0: None,
            direction: Direction::Lower,
            conf_int: true,
            maxit: 50,
            chunksize: 50,
            early_stop_threshold: None,
            seed: 0,
            itp_eps: None,
            cardinality_cap: crate::space::DEFAULT_CARDINALITY_CAP,
        }
    }
}

impl InferenceConfig {
    /// Total number of candidate draws, `maxit * chunksize`.
    pub fn total_draws(&self) -> usize {
        self.maxit * self.chunksize
    }

    pub fn ci_threshold(&self) -> f64 {
        self.early_stop_threshold.unwrap_or(self.alpha / 2.0 + 0.001)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.maxit == 0 || self.chunksize == 0 {
            return Err(Error::Config("maxit and chunksize must be positive".into()));
        }
        if let Some(t) = self.early_stop_threshold {
            if t.is_nan() {
                return Err(Error::Config("early stop threshold is NaN".into()));
            }
        }
        if let Some(eps) = self.itp_eps {
            if !(eps > 0.0) {
                return Err(Error::Config(format!("itp_eps must be positive, got {eps}")));
            }
        }
        Ok(())
    }
}

/// Running p-value after `iteration` candidate draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceResult {
    pub estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conf_int: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    /// Running maximum of the p-value computation, one point per chunk.
    pub trace: Vec<TracePoint>,
    /// Candidate parameter achieving the reported p-value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmax_theta: Option<Vec<f64>>,
    pub iterations_used: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}
