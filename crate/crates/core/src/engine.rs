//! Monte Carlo supremum p-values.
//!
//! The p-value for `H0: psi <= psi0` is the largest probability, over
//! parameters in the null region, of drawing an outcome at least as extreme
//! as the observed one. The supremum is approximated by a running maximum
//! over candidate parameters drawn uniformly from the product simplex, in
//! chunks, starting from `1 / B` so that the result is never zero.

use std::ops::Range;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Direction, PsiSpec, TracePoint};
use crate::simplex::fill_simplex;
use crate::space::{JointOutcome, SubSampleSpace, TailDirection};

/// `log f(t, theta)` for one joint outcome and the concatenated `theta`.
///
/// Cells with zero count contribute nothing; a positive count in a cell of
/// probability zero gives `-inf`.
pub fn log_pmf(outcome: &JointOutcome, theta: &[f64]) -> f64 {
    let mut acc = outcome.log_coef;
    for (&c, &p) in outcome.counts.iter().zip(theta) {
        if c == 0 {
            continue;
        }
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += f64::from(c) * p.ln();
    }
    acc
}

fn block_log_pmf(counts: &[u32], log_coef: f64, theta: &[f64]) -> f64 {
    let mut acc = log_coef;
    for (&c, &p) in counts.iter().zip(theta) {
        if c == 0 {
            continue;
        }
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += f64::from(c) * p.ln();
    }
    acc
}

/// `sum_{t in subspace} f(t, theta)`.
///
/// The joint pmf factors over independent blocks, so each block's pmf is
/// tabulated once and the sum runs over products of table entries.
pub fn tail_prob(subspace: &SubSampleSpace, theta: &[f64]) -> f64 {
    let blocks = subspace.space().blocks();
    let mut offset = 0;
    let tables: Vec<Vec<f64>> = blocks
        .iter()
        .map(|b| {
            let d = b.shape.d;
            let th = &theta[offset..offset + d];
            offset += d;
            // exp(-inf) is exactly 0, so impossible outcomes drop out.
            (0..b.len()).map(|i| block_log_pmf(b.counts(i), b.log_coef(i), th).exp()).collect()
        })
        .collect();

    let index = subspace.flat_block_index();
    let total = match tables.as_slice() {
        [t0] => index.iter().map(|&i| t0[i as usize]).sum::<f64>(),
        [t0, t1] => index
            .chunks_exact(2)
            .map(|ix| t0[ix[0] as usize] * t1[ix[1] as usize])
            .sum::<f64>(),
        _ => index
            .chunks_exact(tables.len())
            .map(|ix| ix.iter().zip(&tables).map(|(&i, t)| t[i as usize]).product::<f64>())
            .sum::<f64>(),
    };
    total.clamp(0.0, 1.0)
}

/// Candidate parameters `theta^(1..B)`, drawn uniformly from the product
/// simplex and grouped into `maxit` chunks of `chunksize`.
///
/// Each chunk has its own ChaCha stream derived from `(seed, stream, chunk)`,
/// so the pool does not depend on how chunks are scheduled.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    dims: Vec<usize>,
    width: usize,
    maxit: usize,
    chunksize: usize,
    seed: u64,
    thetas: Vec<f64>,
}

impl CandidatePool {
    pub fn draw(dims: &[usize], maxit: usize, chunksize: usize, seed: u64, stream: u32) -> Result<Self> {
        if maxit == 0 || chunksize == 0 {
            return Err(Error::Config("maxit and chunksize must be positive".into()));
        }
        if let Some(&d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidDimension(d));
        }
        let width: usize = dims.iter().sum();
        let chunks: Vec<Vec<f64>> = (0..maxit)
            .into_par_iter()
            .map(|chunk| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((u64::from(stream) << 32) | chunk as u64);
                let mut out = vec![0.0; chunksize * width];
                for theta in out.chunks_exact_mut(width) {
                    let mut offset = 0;
                    for &d in dims {
                        fill_simplex(&mut rng, &mut theta[offset..offset + d]);
                        offset += d;
                    }
                }
                out
            })
            .collect();
        Ok(Self { dims: dims.to_vec(), width, maxit, chunksize, seed, thetas: chunks.concat() })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn maxit(&self) -> usize {
        self.maxit
    }

    pub fn chunksize(&self) -> usize {
        self.chunksize
    }

    /// `B = maxit * chunksize`.
    pub fn len(&self) -> usize {
        self.maxit * self.chunksize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn theta(&self, i: usize) -> &[f64] {
        &self.thetas[i * self.width..(i + 1) * self.width]
    }

    pub fn chunk(&self, c: usize) -> Range<usize> {
        c * self.chunksize..(c + 1) * self.chunksize
    }
}

/// Outcome of one p-value evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueRun {
    pub p_value: f64,
    /// Candidates examined before stopping.
    pub iterations_used: usize,
    /// Running maximum after each chunk.
    pub trace: Vec<TracePoint>,
    /// Pool index of the candidate achieving `p_value`, if any beat `1 / B`.
    pub argmax: Option<usize>,
    pub argmax_theta: Option<Vec<f64>>,
    /// Candidates that fell inside the null region.
    pub accepted: usize,
    pub stopped_early: bool,
}

impl PValueRun {
    pub fn null_region_hit(&self) -> bool {
        self.accepted > 0
    }
}

/// `psi0 -> p(psi0)` over a frozen candidate pool.
///
/// Tail probabilities depend on the candidate but not on `psi0`, so they are
/// computed on first use and reused; with the pool fixed, `p` is a
/// deterministic monotone step function of `psi0`.
pub struct PValueFunction<'a> {
    subspace: &'a SubSampleSpace,
    pool: &'a CandidatePool,
    direction: Direction,
    psi_values: Vec<f64>,
    tails: Vec<OnceLock<f64>>,
}

impl<'a> PValueFunction<'a> {
    pub fn new(
        subspace: &'a SubSampleSpace,
        pool: &'a CandidatePool,
        psi: &PsiSpec,
        direction: Direction,
    ) -> Result<Self> {
        let expected = match direction {
            Direction::Lower => TailDirection::Geq,
            Direction::Upper => TailDirection::Leq,
        };
        if subspace.direction() != expected {
            return Err(Error::Config(format!(
                "{direction:?} hypotheses need a {expected:?} sub-sample space"
            )));
        }
        let space_dims: Vec<usize> = subspace.space().shape().iter().map(|b| b.d).collect();
        if space_dims != pool.dims() {
            return Err(Error::Shape(format!(
                "candidate pool blocks {:?} differ from data blocks {space_dims:?}",
                pool.dims()
            )));
        }
        let psi_values = (0..pool.len()).into_par_iter().map(|i| psi.evaluate(pool.theta(i))).collect();
        let tails = (0..pool.len()).map(|_| OnceLock::new()).collect();
        Ok(Self { subspace, pool, direction, psi_values, tails })
    }

    pub fn total_draws(&self) -> usize {
        self.pool.len()
    }

    fn in_null(&self, i: usize, psi0: f64) -> bool {
        let v = self.psi_values[i];
        match self.direction {
            Direction::Lower => v <= psi0,
            Direction::Upper => v >= psi0,
        }
    }

    fn tail(&self, i: usize) -> f64 {
        *self.tails[i].get_or_init(|| tail_prob(self.subspace, self.pool.theta(i)))
    }

    /// Runs the chunked search at `psi0`, stopping after the first chunk
    /// whose running maximum exceeds `threshold`.
    pub fn evaluate(&self, psi0: f64, threshold: Option<f64>) -> PValueRun {
        let floor = 1.0 / self.pool.len() as f64;
        let mut p = floor;
        let mut argmax = None;
        let mut accepted = 0;
        let mut trace = Vec::with_capacity(self.pool.maxit());
        let mut stopped_early = false;
        let mut used = 0;

        for c in 0..self.pool.maxit() {
            let range = self.pool.chunk(c);
            used = range.end;
            let members: Vec<usize> = range.filter(|&i| self.in_null(i, psi0)).collect();
            accepted += members.len();
            let best = members
                .par_iter()
                .map(|&i| (self.tail(i), i))
                .reduce_with(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
            if let Some((tail, i)) = best {
                if tail > p {
                    p = tail;
                    argmax = Some(i);
                }
            }
            trace.push(TracePoint { iteration: used, p_value: p });
            if threshold.is_some_and(|t| p > t) {
                stopped_early = c + 1 < self.pool.maxit();
                break;
            }
        }
        PValueRun {
            p_value: p,
            iterations_used: used,
            trace,
            argmax,
            argmax_theta: argmax.map(|i| self.pool.theta(i).to_vec()),
            accepted,
            stopped_early,
        }
    }

    pub fn candidate(&self, i: usize) -> &[f64] {
        self.pool.theta(i)
    }
}
