//! The `infer` command: one dataset in, one JSON result out.

use exact_multinom::psi::{registry_lookup, PsiParams};
use exact_multinom::{Dataset, Direction, InferenceConfig, InferenceResult, PreparedSpace, PsiSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferRequest {
    /// Category counts, one row per independent sample.
    pub samples: Vec<Vec<u32>>,
    /// Registered psi name.
    pub psi: String,
    #[serde(default)]
    pub psi_params: PsiParams,
    /// `[lower, upper]` range of psi over the parameter space.
    pub psi_limits: Option<[f64; 2]>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi0: Option<f64>,
    #[serde(default)]
    pub direction: Direction,
    #[serde(default = "default_true")]
    pub conf_int: bool,
    #[serde(default = "default_iterations")]
    pub maxit: usize,
    #[serde(default = "default_iterations")]
    pub chunksize: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_true() -> bool {
    true
}

fn default_iterations() -> usize {
    50
}

/// Command-line values that take precedence over the request file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub maxit: Option<usize>,
    pub chunksize: Option<usize>,
    pub threshold: Option<f64>,
}

impl InferRequest {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("request JSON: {e}")))
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(alpha) = overrides.alpha {
            self.alpha = alpha;
        }
        if let Some(maxit) = overrides.maxit {
            self.maxit = maxit;
        }
        if let Some(chunksize) = overrides.chunksize {
            self.chunksize = chunksize;
        }
        if overrides.threshold.is_some() {
            self.threshold = overrides.threshold;
        }
    }

    pub fn dataset(&self) -> Result<Dataset, CliError> {
        Dataset::from_counts(self.samples.clone()).map_err(|e| CliError::field("samples", e))
    }

    pub fn psi_spec(&self, data: &Dataset) -> Result<PsiSpec, CliError> {
        let [lo, hi] = self
            .psi_limits
            .ok_or_else(|| CliError::Input("field `psi_limits` is required".into()))?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(CliError::field("psi_limits", format!("need finite lower < upper, got [{lo}, {hi}]")));
        }
        let mut params = self.psi_params.clone();
        if params.dims.is_none() {
            params.dims = Some(data.dims());
        }
        let spec = registry_lookup(&self.psi, &params).map_err(|e| CliError::field("psi", e))?;
        spec.check_dims(&data.dims()).map_err(|e| CliError::field("samples", e))?;
        Ok(spec.with_limits((lo, hi)))
    }

    pub fn config(&self) -> InferenceConfig {
        InferenceConfig {
            alpha: self.alpha,
            psi0: self.psi0,
            direction: self.direction,
            conf_int: self.conf_int,
            maxit: self.maxit,
            chunksize: self.chunksize,
            early_stop_threshold: self.threshold,
            seed: self.seed,
            ..Default::default()
        }
    }
}

/// Runs a parsed request. The trace is dropped unless `keep_trace`.
pub fn run_infer(request: &InferRequest, keep_trace: bool) -> Result<InferenceResult, CliError> {
    let data = request.dataset()?;
    let psi = request.psi_spec(&data)?;
    let config = request.config();
    let prepared = PreparedSpace::new(&data.shape(), &psi, config.cardinality_cap)?;
    let mut result = prepared.infer(&data, &config)?;
    if !keep_trace {
        result.trace.clear();
    }
    Ok(result)
}
