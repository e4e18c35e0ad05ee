//! Coverage simulations: repeated datasets from a known truth, scored for
//! interval coverage, width and runtime per method.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use exact_multinom::bootstrap::sample_multinomial;
use exact_multinom::iv::DiscreteIvModel;
use exact_multinom::psi::{registry_lookup, PsiParams};
use exact_multinom::{
    bootstrap_ci, BlockShape, BootstrapConfig, Dataset, InferenceConfig, PreparedSpace, ProbabilityVector,
    PsiSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Bootstrap,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Bootstrap => "bootstrap",
        }
    }
}

/// Where the true parameter comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    /// Explicit per-sample probability vectors.
    Theta { blocks: Vec<Vec<f64>> },
    /// Conditional outcome distributions of a structural IV model, one sample
    /// per instrument arm.
    IvModel {
        #[serde(flatten)]
        model: DiscreteIvModel,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageBounds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl CoverageBounds {
    pub fn check(&self, coverage: f64) -> bool {
        self.min.is_none_or(|m| coverage >= m) && self.max.is_none_or(|m| coverage <= m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub psi: String,
    #[serde(default)]
    pub psi_params: PsiParams,
    pub psi_limits: [f64; 2],
    pub generator: Generator,
    /// Sample size of each block.
    pub n: Vec<u32>,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_iterations")]
    pub maxit: usize,
    #[serde(default = "default_iterations")]
    pub chunksize: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_replicates: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Expected coverage range per method.
    #[serde(default)]
    pub coverage: BTreeMap<Method, CoverageBounds>,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_iterations() -> usize {
    50
}

fn default_bootstrap() -> usize {
    500
}

fn default_methods() -> Vec<Method> {
    vec![Method::Exact, Method::Bootstrap]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub scenario: String,
    pub method: Method,
    pub replicates: usize,
    pub seed: u64,
    pub true_value: f64,
    pub covered: usize,
    pub coverage: f64,
    pub mean_width: f64,
    pub mean_runtime_s: f64,
    #[serde(skip)]
    pub bounds: CoverageBounds,
}

impl MethodSummary {
    pub fn passes(&self) -> bool {
        self.bounds.check(self.coverage)
    }
}

/// Per-replicate outcome for one method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateOutcome {
    pub interval: (f64, f64),
    pub runtime_s: f64,
}

/// A scenario with its psi, truth and prepared sample space resolved.
pub struct PreparedScenario {
    pub scenario: Scenario,
    pub psi: PsiSpec,
    pub truth: ProbabilityVector,
    pub true_value: f64,
    prepared: PreparedSpace,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("scenario JSON: {e}")))
    }

    pub fn truth(&self) -> Result<ProbabilityVector, CliError> {
        let truth = match &self.generator {
            Generator::Theta { blocks } => {
                ProbabilityVector::from_blocks(blocks.clone()).map_err(|e| CliError::field("generator", e))?
            }
            Generator::IvModel { model } => {
                model.validate().map_err(|e| CliError::field("generator", e))?;
                model.observed_probs()
            }
        };
        if truth.dims().len() != self.n.len() {
            return Err(CliError::field(
                "n",
                format!("{} sample sizes for {} probability blocks", self.n.len(), truth.dims().len()),
            ));
        }
        Ok(truth)
    }

    pub fn prepare(self) -> Result<PreparedScenario, CliError> {
        if self.replicates == 0 {
            return Err(CliError::field("replicates", "must be positive"));
        }
        let [lo, hi] = self.psi_limits;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(CliError::field("psi_limits", format!("need finite lower < upper, got [{lo}, {hi}]")));
        }
        let truth = self.truth()?;
        let mut params = self.psi_params.clone();
        if params.dims.is_none() {
            params.dims = Some(truth.dims().to_vec());
        }
        let psi = registry_lookup(&self.psi, &params)
            .map_err(|e| CliError::field("psi", e))?
            .with_limits((lo, hi));
        psi.check_dims(truth.dims()).map_err(|e| CliError::field("generator", e))?;
        let true_value = psi.evaluate(truth.as_slice());
        let shape: Vec<BlockShape> =
            self.n.iter().zip(truth.dims()).map(|(&n, &d)| BlockShape { n, d }).collect();
        let prepared = PreparedSpace::new(&shape, &psi, exact_multinom::DEFAULT_CARDINALITY_CAP)?;
        Ok(PreparedScenario { scenario: self, psi, truth, true_value, prepared })
    }
}

impl PreparedScenario {
    /// Replicate dataset `r`, drawn from the truth on its own random stream.
    pub fn dataset(&self, r: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.scenario.seed, 0, 0));
        rng.set_stream(r as u64);
        let counts = self
            .truth
            .blocks()
            .zip(&self.scenario.n)
            .map(|(probs, &n)| {
                let mut out = vec![0; probs.len()];
                sample_multinomial(&mut rng, n, probs, &mut out);
                out
            })
            .collect();
        Dataset::from_counts(counts).expect("sampled counts match the scenario shape")
    }

    pub fn run_replicate(&self, r: usize, method: Method) -> Result<ReplicateOutcome, CliError> {
        let data = self.dataset(r);
        let s = &self.scenario;
        let start = Instant::now();
        let interval = match method {
            Method::Exact => {
                let config = InferenceConfig {
                    alpha: s.alpha,
                    maxit: s.maxit,
                    chunksize: s.chunksize,
                    seed: mix_seed(s.seed, 1, r as u64),
                    ..Default::default()
                };
                self.prepared.confidence_interval(&data, &config)?
            }
            Method::Bootstrap => {
                let config = BootstrapConfig {
                    replicates: s.bootstrap_replicates,
                    alpha: s.alpha,
                    seed: mix_seed(s.seed, 2, r as u64),
                };
                bootstrap_ci(&data, &self.psi, &config)?
            }
        };
        Ok(ReplicateOutcome { interval, runtime_s: start.elapsed().as_secs_f64() })
    }

    pub fn run_method(&self, method: Method) -> Result<MethodSummary, CliError> {
        let s = &self.scenario;
        let outcomes: Vec<ReplicateOutcome> = (0..s.replicates)
            .into_par_iter()
            .map(|r| self.run_replicate(r, method))
            .collect::<Result<_, _>>()?;
        let covered = outcomes
            .iter()
            .filter(|o| o.interval.0 <= self.true_value && self.true_value <= o.interval.1)
            .count();
        let reps = s.replicates as f64;
        Ok(MethodSummary {
            scenario: s.name.clone(),
            method,
            replicates: s.replicates,
            seed: s.seed,
            true_value: self.true_value,
            covered,
            coverage: covered as f64 / reps,
            mean_width: outcomes.iter().map(|o| o.interval.1 - o.interval.0).sum::<f64>() / reps,
            mean_runtime_s: outcomes.iter().map(|o| o.runtime_s).sum::<f64>() / reps,
            bounds: s.coverage.get(&method).copied().unwrap_or_default(),
        })
    }

    pub fn run(&self) -> Result<Vec<MethodSummary>, CliError> {
        self.scenario.methods.iter().map(|&m| self.run_method(m)).collect()
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[MethodSummary]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario",
        "method",
        "replicates",
        "seed",
        "true_value",
        "covered",
        "coverage",
        "mean_width",
        "mean_runtime_s",
        "coverage_min",
        "coverage_max",
        "pass",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        w.write_record([
            row.scenario.clone(),
            row.method.as_str().to_string(),
            row.replicates.to_string(),
            row.seed.to_string(),
            row.true_value.to_string(),
            row.covered.to_string(),
            row.coverage.to_string(),
            row.mean_width.to_string(),
            row.mean_runtime_s.to_string(),
            opt(row.bounds.min),
            opt(row.bounds.max),
            row.passes().to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::Internal(format!("csv output failed: {e}")))?;
    Ok(())
}
