//! Enumeration and p-value timings across data shapes.

use std::io::Write;
use std::time::{Duration, Instant};

use exact_multinom::space::clear_block_cache;
use exact_multinom::{psi, BlockShape, Dataset, Direction, InferenceConfig, JointSpace, PreparedSpace};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchShape {
    pub k: usize,
    pub d: usize,
    pub n: u32,
}

impl std::str::FromStr for BenchShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [k, d, n] = parts.as_slice() else {
            return Err(format!("expected k,d,n, got `{s}`"));
        };
        let parse = |v: &str| v.parse::<u64>().map_err(|e| format!("`{v}` in `{s}`: {e}"));
        let (k, d, n) = (parse(k)?, parse(d)?, parse(n)?);
        if k == 0 || d < 2 || n == 0 {
            return Err(format!("need k >= 1, d >= 2, n >= 1, got `{s}`"));
        }
        Ok(BenchShape { k: k as usize, d: d as usize, n: n as u32 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub shape: BenchShape,
    pub cardinality: u128,
    pub enumeration_s: Option<f64>,
    pub p_value_s: Option<f64>,
    pub status: &'static str,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub runs: usize,
    pub maxit: usize,
    pub chunksize: usize,
    pub seed: u64,
    pub cardinality_cap: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { runs: 3, maxit: 50, chunksize: 50, seed: 0, cardinality_cap: exact_multinom::DEFAULT_CARDINALITY_CAP }
    }
}

fn median(mut xs: Vec<Duration>) -> f64 {
    xs.sort();
    xs[xs.len() / 2].as_secs_f64()
}

/// Balanced counts: `n` spread as evenly as possible over `d` cells.
fn balanced(n: u32, d: usize) -> Vec<u32> {
    let d32 = d as u32;
    (0..d32).map(|i| n / d32 + u32::from(i < n % d32)).collect()
}

pub fn bench_shape(shape: BenchShape, config: &BenchConfig) -> Result<BenchRow, CliError> {
    let blocks = vec![BlockShape { n: shape.n, d: shape.d }; shape.k];
    let cardinality = JointSpace::cardinality(&blocks);
    if cardinality > u128::from(config.cardinality_cap) {
        return Ok(BenchRow { shape, cardinality, enumeration_s: None, p_value_s: None, status: "skipped" });
    }
    let f = if shape.k >= 2 { psi::bhattacharyya(shape.k, shape.d)? } else { psi::cell(0) };
    let data = Dataset::from_counts(vec![balanced(shape.n, shape.d); shape.k])?;
    // Largest psi0 in range, so the null region is as large as possible and
    // no run stops early.
    let psi0 = f.limits().1;
    let inference = InferenceConfig {
        maxit: config.maxit,
        chunksize: config.chunksize,
        seed: config.seed,
        cardinality_cap: config.cardinality_cap,
        ..Default::default()
    };

    let runs = config.runs.max(1);
    let mut enumeration = Vec::with_capacity(runs);
    let mut p_value = Vec::with_capacity(runs);
    for _ in 0..runs {
        clear_block_cache();
        let start = Instant::now();
        let prepared = PreparedSpace::new(&blocks, &f, config.cardinality_cap)?;
        enumeration.push(start.elapsed());
        let start = Instant::now();
        prepared.p_value(&data, psi0, Direction::Lower, &inference)?;
        p_value.push(start.elapsed());
    }
    Ok(BenchRow {
        shape,
        cardinality,
        enumeration_s: Some(median(enumeration)),
        p_value_s: Some(median(p_value)),
        status: "ok",
    })
}

pub fn write_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "d", "n", "cardinality", "enumeration_s", "p_value_s", "status"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        w.write_record([
            row.shape.k.to_string(),
            row.shape.d.to_string(),
            row.shape.n.to_string(),
            row.cardinality.to_string(),
            opt(row.enumeration_s),
            opt(row.p_value_s),
            row.status.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::Internal(format!("csv output failed: {e}")))?;
    Ok(())
}
