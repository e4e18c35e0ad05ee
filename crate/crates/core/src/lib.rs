//! Exact inference for real-valued functions of k-sample multinomial
//! probabilities.
//!
//! Given independent multinomial samples `T_1, ..., T_k` and a function
//! `psi` of the concatenated probability vector, this crate computes
//! supremum p-values for one-sided hypotheses about `psi` and central
//! confidence intervals obtained by inverting those p-values. The supremum
//! over the null region is approximated by a uniform random search on the
//! product of probability simplices; tail probabilities are exact sums over
//! the enumerated sample space.
//!
//! ```
//! use exact_multinom::{infer, psi, Dataset, InferenceConfig};
//!
//! let data = Dataset::from_counts(vec![vec![7, 3]]).unwrap();
//! let first_cell = psi::cell(0);
//! let config = InferenceConfig { psi0: Some(0.5), maxit: 20, chunksize: 50, ..Default::default() };
//! let result = infer(&data, &first_cell, &config).unwrap();
//! assert!((result.estimate - 0.7).abs() < 1e-12);
//! let (lo, hi) = result.conf_int.unwrap();
//! assert!(lo < 0.7 && 0.7 < hi);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod engine;
mod error;
pub mod inference;
pub mod itp;
pub mod iv;
pub mod model;
pub mod psi;
pub mod simplex;
pub mod space;

pub use bootstrap::{bootstrap_ci, BootstrapConfig};
pub use engine::{log_pmf, tail_prob, CandidatePool, PValueFunction, PValueRun};
pub use error::{Error, Result};
pub use inference::{confidence_interval, infer, p_value, PreparedSpace};
pub use itp::{itp_root, ItpParams, ItpSolution};
pub use model::{
    theta_hat, BlockShape, Dataset, Direction, InferenceConfig, InferenceResult, MultinomialSample,
    ProbabilityVector, PsiSpec, TracePoint,
};
pub use space::{
    enumerate_counts, enumerate_joint, log_multinomial_coef, select_subspace, JointOutcome,
    JointSpace, SubSampleSpace, TailDirection, DEFAULT_CARDINALITY_CAP, TIE_TOL,
};
