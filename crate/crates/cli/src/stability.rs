//! Running p-value traces over the full candidate budget, one per null value.

use std::io::Write;

use exact_multinom::{InferenceConfig, PreparedSpace, TracePoint};

use crate::error::CliError;
use crate::request::InferRequest;

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityTrace {
    pub psi0: f64,
    pub points: Vec<TracePoint>,
}

/// Traces for each `psi0`, with early stopping disabled.
pub fn stability_traces(request: &InferRequest, psi0s: &[f64]) -> Result<Vec<StabilityTrace>, CliError> {
    if psi0s.is_empty() {
        return Err(CliError::Input("stability needs at least one psi0".into()));
    }
    let data = request.dataset()?;
    let psi = request.psi_spec(&data)?;
    let config = InferenceConfig { early_stop_threshold: None, ..request.config() };
    let prepared = PreparedSpace::new(&data.shape(), &psi, config.cardinality_cap)?;
    psi0s
        .iter()
        .map(|&psi0| {
            let run = prepared.p_value(&data, psi0, config.direction, &config)?;
            Ok(StabilityTrace { psi0, points: run.trace })
        })
        .collect()
}

pub fn write_csv<W: Write>(out: W, traces: &[StabilityTrace]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["psi0", "iteration", "p_value"])?;
    for trace in traces {
        for point in &trace.points {
            w.write_record([trace.psi0.to_string(), point.iteration.to_string(), point.p_value.to_string()])?;
        }
    }
    w.flush().map_err(|e| CliError::Internal(format!("csv output failed: {e}")))?;
    Ok(())
}
