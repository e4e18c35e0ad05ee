//! Enumeration of multinomial sample spaces and selection of the
//! "at least as extreme" region used by the p-value.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use rayon::prelude::*;
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::model::{proportions_into, BlockShape, Dataset, PsiSpec};

/// Default upper bound on the number of joint outcomes.
pub const DEFAULT_CARDINALITY_CAP: u64 = 50_000_000;

/// Absolute tolerance for ties when comparing `psi` at sample proportions.
pub const TIE_TOL: f64 = 1e-9;

/// All non-negative integer vectors of length `d` summing to `n`.
///
/// Built by fixing the first cell at `0..=n` and recursing on the rest, so
/// the first cell varies slowest.
pub fn enumerate_counts(n: u32, d: usize) -> Result<Vec<Vec<u32>>> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    Ok(compositions(n, d))
}

fn compositions(n: u32, d: usize) -> Vec<Vec<u32>> {
    if d == 2 {
        return (0..=n).map(|i| vec![i, n - i]).collect();
    }
    let mut out = Vec::new();
    for i in 0..=n {
        for rest in compositions(n - i, d - 1) {
            let mut v = Vec::with_capacity(d);
            v.push(i);
            v.extend(rest);
            out.push(v);
        }
    }
    out
}

/// Number of compositions of `n` into `d` parts, `C(n + d - 1, d - 1)`.
pub fn count_compositions(n: u32, d: usize) -> u128 {
    let n = u128::from(n);
    // c_i = C(n + i, i) stays integral at every step.
    (1..d as u128).fold(1u128, |c, i| c * (n + i) / i)
}

/// `log(n! / prod_i t_i!)`.
pub fn log_multinomial_coef(counts: &[u32]) -> f64 {
    let n: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    let denom: f64 = counts.iter().map(|&c| ln_factorial(u64::from(c))).sum();
    // Clamp tiny negative rounding for single-arrangement outcomes.
    (ln_factorial(n) - denom).max(0.0)
}

/// Sample space of a single block, stored flat.
#[derive(Debug)]
pub struct BlockSpace {
    pub shape: BlockShape,
    counts: Vec<u32>,
    log_coef: Vec<f64>,
}

impl BlockSpace {
    fn build(shape: BlockShape) -> Result<Self> {
        let outcomes = enumerate_counts(shape.n, shape.d)?;
        let log_coef = outcomes.iter().map(|t| log_multinomial_coef(t)).collect();
        Ok(Self { shape, counts: outcomes.concat(), log_coef })
    }

    pub fn len(&self) -> usize {
        self.log_coef.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_coef.is_empty()
    }

    pub fn counts(&self, i: usize) -> &[u32] {
        &self.counts[i * self.shape.d..(i + 1) * self.shape.d]
    }

    pub fn log_coef(&self, i: usize) -> f64 {
        self.log_coef[i]
    }
}

fn block_cache() -> &'static RwLock<HashMap<BlockShape, Arc<BlockSpace>>> {
    static CACHE: OnceLock<RwLock<HashMap<BlockShape, Arc<BlockSpace>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Cached per-block sample space.
pub fn block_space(shape: BlockShape) -> Result<Arc<BlockSpace>> {
    if let Some(hit) = block_cache().read().expect("block cache poisoned").get(&shape) {
        return Ok(Arc::clone(hit));
    }
    let built = Arc::new(BlockSpace::build(shape)?);
    let mut cache = block_cache().write().expect("block cache poisoned");
    Ok(Arc::clone(cache.entry(shape).or_insert(built)))
}

/// Drops every cached block space. Used by benchmarks to time cold runs.
pub fn clear_block_cache() {
    block_cache().write().expect("block cache poisoned").clear();
}

/// One element `t` of the joint sample space.
#[derive(Debug, Clone, PartialEq)]
pub struct JointOutcome {
    /// Concatenated counts `(t_1, ..., t_k)`.
    pub counts: Box<[u32]>,
    /// Position of each block's counts in its [`BlockSpace`].
    pub block_index: Box<[u32]>,
    /// Sum over blocks of the log multinomial coefficients.
    pub log_coef: f64,
    /// `psi` evaluated at the sample proportions of `counts`.
    pub psi_hat: f64,
}

/// The full joint sample space for one data shape and one `psi`.
#[derive(Debug)]
pub struct JointSpace {
    shape: Vec<BlockShape>,
    blocks: Vec<Arc<BlockSpace>>,
    outcomes: Vec<JointOutcome>,
}

impl JointSpace {
    pub fn enumerate(shape: &[BlockShape], psi: &PsiSpec, cap: u64) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::Shape("no blocks given".into()));
        }
        for (index, b) in shape.iter().enumerate() {
            if b.d < 2 {
                return Err(Error::InvalidDimension(b.d));
            }
            if b.n == 0 {
                return Err(Error::DegenerateSample { index });
            }
        }
        let dims: Vec<usize> = shape.iter().map(|b| b.d).collect();
        psi.check_dims(&dims)?;

        let cardinality = Self::cardinality(shape);
        if cardinality > u128::from(cap) {
            return Err(Error::SpaceTooLarge { cardinality, cap });
        }
        let blocks = shape.iter().map(|&b| block_space(b)).collect::<Result<Vec<_>>>()?;
        let total = cardinality as usize;
        let width: usize = dims.iter().sum();

        let outcomes = (0..total)
            .into_par_iter()
            .map_init(
                || vec![0.0; width],
                |theta, flat| {
                    let mut block_index = vec![0u32; blocks.len()];
                    let mut rem = flat;
                    for (j, b) in blocks.iter().enumerate().rev() {
                        block_index[j] = (rem % b.len()) as u32;
                        rem /= b.len();
                    }
                    let mut counts = Vec::with_capacity(width);
                    let mut log_coef = 0.0;
                    for (b, &i) in blocks.iter().zip(&block_index) {
                        counts.extend_from_slice(b.counts(i as usize));
                        log_coef += b.log_coef(i as usize);
                    }
                    proportions_into(&counts, shape, theta);
                    JointOutcome {
                        psi_hat: psi.evaluate(theta),
                        counts: counts.into_boxed_slice(),
                        block_index: block_index.into_boxed_slice(),
                        log_coef,
                    }
                },
            )
            .collect();

        Ok(Self { shape: shape.to_vec(), blocks, outcomes })
    }

    /// `prod_j C(n_j + d_j - 1, d_j - 1)`, saturating.
    pub fn cardinality(shape: &[BlockShape]) -> u128 {
        shape
            .iter()
            .map(|b| count_compositions(b.n, b.d))
            .fold(1u128, |acc, c| acc.saturating_mul(c))
    }

    pub fn shape(&self) -> &[BlockShape] {
        &self.shape
    }

    pub fn blocks(&self) -> &[Arc<BlockSpace>] {
        &self.blocks
    }

    pub fn outcomes(&self) -> &[JointOutcome] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn find(&self, counts: &[u32]) -> Option<&JointOutcome> {
        self.outcomes.iter().find(|o| &*o.counts == counts)
    }

    /// Whether `data` has the shape this space was enumerated for.
    pub fn matches(&self, data: &Dataset) -> bool {
        data.shape() == self.shape
    }
}

/// Joint sample space with the default cardinality cap.
pub fn enumerate_joint(shape: &[BlockShape], psi: &PsiSpec) -> Result<JointSpace> {
    JointSpace::enumerate(shape, psi, DEFAULT_CARDINALITY_CAP)
}

/// Which side of the observed estimate counts as "at least as extreme".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TailDirection {
    /// `psi_hat(t) >= psi_hat(T)`
    Geq,
    /// `psi_hat(t) <= psi_hat(T)`
    Leq,
}

/// Outcomes at least as extreme as the observed one.
#[derive(Debug, Clone)]
pub struct SubSampleSpace {
    space: Arc<JointSpace>,
    members: Vec<u32>,
    // members.len() * k block positions, member-major.
    flat_index: Vec<u32>,
    direction: TailDirection,
    threshold_psi: f64,
}

impl SubSampleSpace {
    pub fn direction(&self) -> TailDirection {
        self.direction
    }

    pub fn threshold_psi(&self) -> f64 {
        self.threshold_psi
    }

    pub fn space(&self) -> &JointSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[u32] {
        &self.members
    }

    pub(crate) fn flat_block_index(&self) -> &[u32] {
        &self.flat_index
    }

    pub fn outcomes(&self) -> impl Iterator<Item = &JointOutcome> + '_ {
        self.members.iter().map(|&i| &self.space.outcomes[i as usize])
    }

    pub fn contains_counts(&self, counts: &[u32]) -> bool {
        self.outcomes().any(|o| &*o.counts == counts)
    }
}

/// Keeps the outcomes whose `psi_hat` is on the `direction` side of
/// `observed_psi`, with ties resolved inclusively within [`TIE_TOL`].
pub fn select_subspace(
    space: &Arc<JointSpace>,
    observed_psi: f64,
    direction: TailDirection,
) -> Result<SubSampleSpace> {
    if observed_psi.is_nan() {
        return Err(Error::Invariant("observed psi is NaN".into()));
    }
    let keep = |psi_hat: f64| match direction {
        TailDirection::Geq => psi_hat >= observed_psi - TIE_TOL,
        TailDirection::Leq => psi_hat <= observed_psi + TIE_TOL,
    };
    let members: Vec<u32> = space
        .outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| keep(o.psi_hat))
        .map(|(i, _)| i as u32)
        .collect();
    if members.is_empty() {
        return Err(Error::Invariant(format!(
            "no outcome is at least as extreme as the observed psi {observed_psi}"
        )));
    }
    let flat_index = members
        .iter()
        .flat_map(|&i| space.outcomes[i as usize].block_index.iter().copied())
        .collect();
    Ok(SubSampleSpace {
        space: Arc::clone(space),
        members,
        flat_index,
        direction,
        threshold_psi: observed_psi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psi;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn exact_binomial(n: u128, k: u128) -> u128 {
        let k = k.min(n - k);
        (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
    }

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn base_case_two_cells() {
        assert_eq!(enumerate_counts(2, 2).unwrap(), vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
    }

    #[test]
    fn three_cells_five_trials() {
        assert_eq!(enumerate_counts(5, 3).unwrap().len(), 21);
    }

    #[test]
    fn zero_trials() {
        assert_eq!(enumerate_counts(0, 3).unwrap(), vec![vec![0, 0, 0]]);
    }

    #[test]
    fn rejects_single_category() {
        assert_eq!(enumerate_counts(3, 1), Err(Error::InvalidDimension(1)));
    }

    #[test]
    fn cardinality_matches_stars_and_bars() {
        for n in 0..=12u32 {
            for d in 2..=5usize {
                let all = enumerate_counts(n, d).unwrap();
                let expected = exact_binomial(u128::from(n) + d as u128 - 1, d as u128 - 1);
                assert_eq!(all.len() as u128, expected, "n={n} d={d}");
                assert_eq!(count_compositions(n, d), expected);
                let distinct: HashSet<_> = all.iter().collect();
                assert_eq!(distinct.len(), all.len());
                assert!(all.iter().all(|t| t.len() == d && t.iter().sum::<u32>() == n));
            }
        }
    }

    #[test]
    fn log_coef_examples() {
        assert!((log_multinomial_coef(&[1, 1]) - 2f64.ln()).abs() < 1e-14);
        assert_eq!(log_multinomial_coef(&[7, 0]), 0.0);
        // 6! / (3! 2! 1!) = 720 / 12
        assert!((log_multinomial_coef(&[3, 2, 1]) - 60f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn log_coef_matches_integer_arithmetic() {
        for d in 2..=4 {
            for n in 0..=12u32 {
                for t in enumerate_counts(n, d).unwrap() {
                    let exact = factorial(n) / t.iter().map(|&c| factorial(c)).product::<f64>();
                    let got = log_multinomial_coef(&t).exp();
                    assert!((got - exact).abs() / exact < 1e-9, "{t:?}: {got} vs {exact}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn log_coef_permutation_invariant(mut t in prop::collection::vec(0u32..8, 2..6), seed in any::<u64>()) {
            let base = log_multinomial_coef(&t);
            let len = t.len();
            t.rotate_left((seed as usize) % len);
            t.reverse();
            prop_assert!((log_multinomial_coef(&t) - base).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_cardinality_multiplies() {
        let f = psi::cell(0);
        let two = [BlockShape { n: 2, d: 2 }, BlockShape { n: 2, d: 2 }];
        assert_eq!(enumerate_joint(&two, &f).unwrap().len(), 9);
        assert_eq!(enumerate_joint(&[BlockShape { n: 5, d: 3 }], &f).unwrap().len(), 21);
        let bc = psi::bhattacharyya(2, 4).unwrap();
        let big = [BlockShape { n: 10, d: 4 }, BlockShape { n: 10, d: 4 }];
        assert_eq!(enumerate_joint(&big, &bc).unwrap().len(), 286 * 286);
    }

    #[test]
    fn joint_outcomes_are_consistent() {
        let f = psi::bhattacharyya(2, 3).unwrap();
        let shape = [BlockShape { n: 3, d: 3 }, BlockShape { n: 2, d: 3 }];
        let space = enumerate_joint(&shape, &f).unwrap();
        for o in space.outcomes() {
            assert_eq!(o.counts[..3].iter().sum::<u32>(), 3);
            assert_eq!(o.counts[3..].iter().sum::<u32>(), 2);
            let expected = log_multinomial_coef(&o.counts[..3]) + log_multinomial_coef(&o.counts[3..]);
            assert!((o.log_coef - expected).abs() < 1e-12);
            assert!(o.log_coef >= 0.0);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let f = psi::cell(0);
        let shape = [BlockShape { n: 10, d: 4 }, BlockShape { n: 10, d: 4 }];
        let err = JointSpace::enumerate(&shape, &f, 1000).unwrap_err();
        assert_eq!(err, Error::SpaceTooLarge { cardinality: 81796, cap: 1000 });
        assert!(err.to_string().contains("1000"));
    }

    #[test]
    fn shape_checked_against_psi() {
        let bc = psi::bhattacharyya(2, 4).unwrap();
        let shape = [BlockShape { n: 2, d: 3 }, BlockShape { n: 2, d: 3 }];
        assert!(matches!(enumerate_joint(&shape, &bc), Err(Error::Shape(_))));
    }

    fn binomial_space(n: u32) -> Arc<JointSpace> {
        Arc::new(enumerate_joint(&[BlockShape { n, d: 2 }], &psi::cell(0)).unwrap())
    }

    #[test]
    fn select_from_minimum_keeps_everything() {
        let space = binomial_space(5);
        let sub = select_subspace(&space, 0.0, TailDirection::Geq).unwrap();
        assert_eq!(sub.len(), space.len());
    }

    #[test]
    fn select_from_maximum_keeps_argmax() {
        let space = binomial_space(5);
        let sub = select_subspace(&space, 1.0, TailDirection::Geq).unwrap();
        assert_eq!(sub.len(), 1);
        assert!(sub.contains_counts(&[5, 0]));
    }

    #[test]
    fn select_binomial_upper_tail() {
        // psi_hat over the space is 0, .2, .4, .6, .8, 1
        let space = binomial_space(5);
        let sub = select_subspace(&space, 0.8, TailDirection::Geq).unwrap();
        let mut got: Vec<Vec<u32>> = sub.outcomes().map(|o| o.counts.to_vec()).collect();
        got.sort();
        assert_eq!(got, vec![vec![4, 1], vec![5, 0]]);
        let low = select_subspace(&space, 0.2, TailDirection::Leq).unwrap();
        assert_eq!(low.len(), 2);
        assert!(low.contains_counts(&[0, 5]) && low.contains_counts(&[1, 4]));
    }

    #[test]
    fn ties_are_inclusive() {
        // 0.1 * 3 is not exactly 0.3; the tie tolerance keeps the boundary.
        let f = PsiSpec::new("third", (0.0, 1.0), |t: &[f64]| t[0] * 3.0 / 3.0);
        let space = Arc::new(enumerate_joint(&[BlockShape { n: 10, d: 2 }], &f).unwrap());
        let sub = select_subspace(&space, 0.1 * 3.0, TailDirection::Geq).unwrap();
        assert!(sub.contains_counts(&[3, 7]));
    }

    #[test]
    fn empty_selection_is_an_invariant_violation() {
        let space = binomial_space(3);
        assert!(matches!(
            select_subspace(&space, 2.0, TailDirection::Geq),
            Err(Error::Invariant(_))
        ));
    }

    #[test]
    fn lowering_the_threshold_never_removes_outcomes() {
        let f = psi::bhattacharyya(2, 3).unwrap();
        let shape = [BlockShape { n: 3, d: 3 }, BlockShape { n: 3, d: 3 }];
        let space = Arc::new(enumerate_joint(&shape, &f).unwrap());
        let mut values: Vec<f64> = space.outcomes().iter().map(|o| o.psi_hat).collect();
        values.sort_by(f64::total_cmp);
        values.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut previous: Option<HashSet<u32>> = None;
        for v in values.iter().rev() {
            let now: HashSet<u32> =
                select_subspace(&space, *v, TailDirection::Geq).unwrap().members().iter().copied().collect();
            if let Some(prev) = &previous {
                assert!(prev.is_subset(&now));
            }
            previous = Some(now);
        }
    }

    #[test]
    fn block_cache_returns_shared_space() {
        let a = block_space(BlockShape { n: 4, d: 3 }).unwrap();
        let b = block_space(BlockShape { n: 4, d: 3 }).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(a.len(), 15);
    }
}
