//! p-values and central confidence intervals by test inversion.
//!
//! The lower limit is the largest `psi0` whose p-value for `H0: psi <= psi0`
//! is at most `alpha / 2`; the upper limit is the smallest `psi0` whose
//! p-value for `H0: psi >= psi0` is at most `alpha / 2`. Each side searches
//! over its own frozen candidate pool so the p-value is a deterministic
//! monotone function of `psi0` during root finding.

use std::sync::Arc;

use crate::engine::{CandidatePool, PValueFunction, PValueRun};
use crate::error::{Error, Result};
use crate::itp::{itp_root, ItpParams};
use crate::model::{
    theta_hat, BlockShape, Dataset, Direction, InferenceConfig, InferenceResult, PsiSpec,
};
use crate::space::{select_subspace, JointSpace, TailDirection};

const PVALUE_STREAM: u32 = 0;
const LOWER_STREAM: u32 = 1;
const UPPER_STREAM: u32 = 2;

/// A joint sample space enumerated once for a data shape and a `psi`, reused
/// across datasets of that shape.
#[derive(Debug, Clone)]
pub struct PreparedSpace {
    psi: PsiSpec,
    space: Arc<JointSpace>,
}

impl PreparedSpace {
    pub fn new(shape: &[BlockShape], psi: &PsiSpec, cap: u64) -> Result<Self> {
        let space = JointSpace::enumerate(shape, psi, cap)?;
        Ok(Self { psi: psi.clone(), space: Arc::new(space) })
    }

    pub fn space(&self) -> &Arc<JointSpace> {
        &self.space
    }

    pub fn psi(&self) -> &PsiSpec {
        &self.psi
    }

    fn check(&self, data: &Dataset) -> Result<()> {
        if !self.space.matches(data) {
            return Err(Error::Shape(format!(
                "data shape {:?} differs from the prepared shape {:?}",
                data.shape(),
                self.space.shape()
            )));
        }
        Ok(())
    }

    pub fn estimate(&self, data: &Dataset) -> Result<f64> {
        let th = theta_hat(data)?;
        self.psi.evaluate_vector(&th)
    }

    /// One-sided supremum p-value at `psi0`.
    pub fn p_value(
        &self,
        data: &Dataset,
        psi0: f64,
        direction: Direction,
        config: &InferenceConfig,
    ) -> Result<PValueRun> {
        config.validate()?;
        self.check(data)?;
        let (lower, upper) = self.psi.limits();
        if !(lower <= psi0 && psi0 <= upper) {
            return Err(Error::Domain { psi0, lower, upper });
        }
        let estimate = self.estimate(data)?;
        let tail = match direction {
            Direction::Lower => TailDirection::Geq,
            Direction::Upper => TailDirection::Leq,
        };
        let sub = select_subspace(&self.space, estimate, tail)?;
        let pool = CandidatePool::draw(&data.dims(), config.maxit, config.chunksize, config.seed, PVALUE_STREAM)?;
        let pf = PValueFunction::new(&sub, &pool, &self.psi, direction)?;
        Ok(pf.evaluate(psi0, config.early_stop_threshold))
    }

    /// Central `100 (1 - alpha)%` interval.
    pub fn confidence_interval(&self, data: &Dataset, config: &InferenceConfig) -> Result<(f64, f64)> {
        config.validate()?;
        self.check(data)?;
        let (lo, hi) = self.psi.limits();
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!(
                "confidence intervals need finite psi limits, got [{lo}, {hi}]; transform psi first"
            )));
        }
        let estimate = self.estimate(data)?;
        if !(lo - crate::space::TIE_TOL <= estimate && estimate <= hi + crate::space::TIE_TOL) {
            return Err(Error::Config(format!(
                "estimate {estimate} lies outside psi limits [{lo}, {hi}]"
            )));
        }
        let estimate = estimate.clamp(lo, hi);
        let target = config.alpha / 2.0;
        let threshold = Some(config.ci_threshold());
        let params = ItpParams::with_eps(config.itp_eps.unwrap_or((hi - lo) * 1e-4));
        let dims = data.dims();

        let sub = select_subspace(&self.space, estimate, TailDirection::Geq)?;
        let pool = CandidatePool::draw(&dims, config.maxit, config.chunksize, config.seed, LOWER_STREAM)?;
        let p_lower = PValueFunction::new(&sub, &pool, &self.psi, Direction::Lower)?;
        // Nondecreasing in psi0.
        let g = |x: f64| p_lower.evaluate(x, threshold).p_value - target;
        let lower = if g(lo) > 0.0 || estimate <= lo {
            lo
        } else if g(estimate) <= 0.0 {
            estimate
        } else {
            // Report the rejected end of the final bracket, which keeps every
            // psi0 not yet rejected inside the interval.
            itp_root(g, lo, estimate, params)?.bracket.0
        };

        let sub = select_subspace(&self.space, estimate, TailDirection::Leq)?;
        let pool = CandidatePool::draw(&dims, config.maxit, config.chunksize, config.seed, UPPER_STREAM)?;
        let p_upper = PValueFunction::new(&sub, &pool, &self.psi, Direction::Upper)?;
        // Nonincreasing in psi0.
        let h = |x: f64| p_upper.evaluate(x, threshold).p_value - target;
        let upper = if h(hi) > 0.0 || estimate >= hi {
            hi
        } else if h(estimate) <= 0.0 {
            estimate
        } else {
            itp_root(h, estimate, hi, params)?.bracket.1
        };

        if lower > upper {
            return Err(Error::Invariant(format!("lower limit {lower} above upper limit {upper}")));
        }
        Ok((lower, upper))
    }

    /// Estimate, and the p-value and/or interval requested by `config`.
    pub fn infer(&self, data: &Dataset, config: &InferenceConfig) -> Result<InferenceResult> {
        config.validate()?;
        self.check(data)?;
        let estimate = self.estimate(data)?;
        let mut result = InferenceResult {
            estimate,
            conf_int: None,
            p_value: None,
            trace: Vec::new(),
            argmax_theta: None,
            iterations_used: 0,
            warnings: Vec::new(),
        };
        if let Some(psi0) = config.psi0 {
            let run = self.p_value(data, psi0, config.direction, config)?;
            if !run.null_region_hit() {
                result.warnings.push(format!(
                    "no candidate parameter fell in the null region at psi0 = {psi0}; p-value is the 1/B floor"
                ));
            }
            result.p_value = Some(run.p_value);
            result.trace = run.trace;
            result.argmax_theta = run.argmax_theta;
            result.iterations_used = run.iterations_used;
        }
        if config.psi0.is_none() || config.conf_int {
            result.conf_int = Some(self.confidence_interval(data, config)?);
        }
        Ok(result)
    }
}

/// See [`PreparedSpace::infer`].
pub fn infer(data: &Dataset, psi: &PsiSpec, config: &InferenceConfig) -> Result<InferenceResult> {
    PreparedSpace::new(&data.shape(), psi, config.cardinality_cap)?.infer(data, config)
}

/// See [`PreparedSpace::confidence_interval`].
pub fn confidence_interval(data: &Dataset, psi: &PsiSpec, config: &InferenceConfig) -> Result<(f64, f64)> {
    PreparedSpace::new(&data.shape(), psi, config.cardinality_cap)?.confidence_interval(data, config)
}

/// See [`PreparedSpace::p_value`].
pub fn p_value(
    data: &Dataset,
    psi: &PsiSpec,
    psi0: f64,
    direction: Direction,
    config: &InferenceConfig,
) -> Result<PValueRun> {
    PreparedSpace::new(&data.shape(), psi, config.cardinality_cap)?.p_value(data, psi0, direction, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psi;

    fn binomial_data(x: u32, n: u32) -> Dataset {
        Dataset::from_counts(vec![vec![x, n - x]]).unwrap()
    }

    #[test]
    fn all_successes_clamp_upper_limit() {
        let config = InferenceConfig { maxit: 20, chunksize: 50, ..Default::default() };
        let (lo, hi) = confidence_interval(&binomial_data(6, 6), &psi::cell(0), &config).unwrap();
        assert_eq!(hi, 1.0);
        assert!(lo > 0.4 && lo < 0.7, "{lo}");
    }

    #[test]
    fn constant_psi_collapses_to_the_constant() {
        // The null region {psi <= psi0} is empty below the constant, so every
        // such psi0 is rejected at the 1/B floor; above it nothing is.
        let constant = PsiSpec::new("constant", (0.0, 1.0), |_: &[f64]| 0.4);
        let config = InferenceConfig { maxit: 10, chunksize: 50, ..Default::default() };
        let (lo, hi) = confidence_interval(&binomial_data(2, 5), &constant, &config).unwrap();
        assert!(lo <= 0.4 && 0.4 <= hi, "({lo}, {hi})");
        assert!(hi - lo < 1e-3, "({lo}, {hi})");
    }

    #[test]
    fn psi0_outside_limits() {
        let config = InferenceConfig::default();
        let err = p_value(&binomial_data(2, 5), &psi::cell(0), 1.5, Direction::Lower, &config).unwrap_err();
        assert_eq!(err, Error::Domain { psi0: 1.5, lower: 0.0, upper: 1.0 });
    }

    #[test]
    fn unbounded_limits_are_rejected_for_intervals() {
        let f = psi::cell(0).with_limits((f64::NEG_INFINITY, f64::INFINITY));
        let config = InferenceConfig::default();
        assert!(matches!(confidence_interval(&binomial_data(2, 5), &f, &config), Err(Error::Config(_))));
        assert!(p_value(&binomial_data(2, 5), &f, 0.3, Direction::Lower, &config).is_ok());
    }

    #[test]
    fn estimate_outside_limits_is_a_config_error() {
        let f = psi::cell(0).with_limits((0.0, 0.5));
        let config = InferenceConfig::default();
        assert!(matches!(confidence_interval(&binomial_data(4, 5), &f, &config), Err(Error::Config(_))));
    }

    #[test]
    fn infer_field_rules() {
        let data = binomial_data(3, 8);
        let f = psi::cell(0);
        let base = InferenceConfig { maxit: 10, chunksize: 20, ..Default::default() };

        let ci_only = infer(&data, &f, &base).unwrap();
        assert!(ci_only.conf_int.is_some() && ci_only.p_value.is_none());

        let both = infer(&data, &f, &InferenceConfig { psi0: Some(0.3), ..base.clone() }).unwrap();
        assert!(both.conf_int.is_some() && both.p_value.is_some());
        assert_eq!(both.trace.len(), 10);

        let p_only =
            infer(&data, &f, &InferenceConfig { psi0: Some(0.3), conf_int: false, ..base }).unwrap();
        assert!(p_only.conf_int.is_none() && p_only.p_value.is_some());
        assert!(p_only.argmax_theta.is_some());
    }

    #[test]
    fn upper_direction_p_value() {
        // H0: theta >= 0.6 with 1 success out of 6: sup_{theta >= 0.6} P(X <= 1)
        // is attained at 0.6: 0.4^6 + 6 * 0.6 * 0.4^5.
        let exact = 0.4f64.powi(6) + 6.0 * 0.6 * 0.4f64.powi(5);
        let config = InferenceConfig { maxit: 100, chunksize: 100, ..Default::default() };
        let run = p_value(&binomial_data(1, 6), &psi::cell(0), 0.6, Direction::Upper, &config).unwrap();
        assert!(run.p_value <= exact + 1e-12);
        assert!((run.p_value - exact).abs() < 0.003, "{} vs {exact}", run.p_value);
    }

    #[test]
    fn shape_mismatch_with_prepared_space() {
        let prepared = PreparedSpace::new(&[BlockShape { n: 5, d: 2 }], &psi::cell(0), 1000).unwrap();
        let config = InferenceConfig::default();
        assert!(matches!(prepared.infer(&binomial_data(2, 6), &config), Err(Error::Shape(_))));
    }
}
