//! Built-in `psi` functions and a name registry for the command line.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ProbabilityVector, PsiSpec};

/// `sum_i (prod_j theta_ji)^(1/k)` over `k` blocks of `d` categories.
///
/// Equals 1 exactly when all blocks coincide and 0 when their supports are
/// disjoint. Zero cells contribute 0.
pub fn bhattacharyya(k: usize, d: usize) -> Result<PsiSpec> {
    if k < 2 {
        return Err(Error::Shape(format!("bhattacharyya needs k >= 2 samples, got {k}")));
    }
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let inv_k = 1.0 / k as f64;
    let spec = PsiSpec::new("bhattacharyya", (0.0, 1.0), move |theta: &[f64]| {
        (0..d)
            .map(|i| {
                let prod: f64 = (0..k).map(|j| theta[j * d + i]).product();
                match k {
                    2 => prod.sqrt(),
                    _ => prod.powf(inv_k),
                }
            })
            .sum()
    });
    Ok(spec.with_dims(vec![d; k]))
}

/// Euclidean distance between a single probability block and `theta0`.
pub fn euclidean_to_ref(theta0: &ProbabilityVector) -> Result<PsiSpec> {
    if theta0.dims().len() != 1 {
        return Err(Error::Shape(format!(
            "euclidean_ref takes one reference block, got {}",
            theta0.dims().len()
        )));
    }
    let reference = theta0.as_slice().to_vec();
    let d = reference.len();
    let spec = PsiSpec::new("euclidean_ref", (0.0, std::f64::consts::SQRT_2), move |theta: &[f64]| {
        theta.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    });
    Ok(spec.with_dims(vec![d]))
}

/// The probability of a single cell of the concatenated vector.
pub fn cell(index: usize) -> PsiSpec {
    PsiSpec::new("cell", (0.0, 1.0), move |theta: &[f64]| theta[index])
}

// Blocks are (p00, p10, p01, p11) given z = 0, then the same given z = 1,
// where the subscript is (x, y).
#[inline]
fn p(theta: &[f64], x: usize, y: usize, z: usize) -> f64 {
    theta[4 * z + x + 2 * y]
}

/// Sharp lower bound on the risk difference `P(Y(1)=1) - P(Y(0)=1)` with a
/// binary instrument `Z`, binary treatment `X` and binary outcome `Y`.
///
/// Input blocks are `p{X=x, Y=y | Z=z}` in cell order `(00, 10, 01, 11)`,
/// block `z = 0` first.
pub fn causal_lower_bound() -> PsiSpec {
    PsiSpec::new("causal_lower", (-1.0, 1.0), |t: &[f64]| {
        [
            -1.0 + p(t, 0, 0, 1) + p(t, 1, 1, 1),
            -1.0 + p(t, 0, 0, 1) + p(t, 1, 1, 0),
            -1.0 + p(t, 0, 0, 0) + p(t, 1, 1, 0),
            -1.0 + p(t, 0, 0, 0) + p(t, 1, 1, 1),
            -2.0 + 2.0 * p(t, 0, 0, 0) + p(t, 0, 1, 1) + p(t, 1, 1, 0) + p(t, 1, 1, 1),
            -2.0 + p(t, 0, 0, 0) + p(t, 0, 0, 1) + p(t, 1, 0, 0) + 2.0 * p(t, 1, 1, 1),
            -2.0 + 2.0 * p(t, 0, 0, 1) + p(t, 0, 1, 0) + p(t, 1, 1, 0) + p(t, 1, 1, 1),
            -2.0 + p(t, 0, 0, 0) + p(t, 0, 0, 1) + p(t, 1, 0, 1) + 2.0 * p(t, 1, 1, 0),
        ]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
    })
    .with_dims(vec![4, 4])
}

/// Sharp upper bound companion of [`causal_lower_bound`], same cell layout.
pub fn causal_upper_bound() -> PsiSpec {
    PsiSpec::new("causal_upper", (-1.0, 1.0), |t: &[f64]| {
        [
            1.0 - p(t, 1, 0, 1) - p(t, 0, 1, 0),
            1.0 - p(t, 1, 0, 1) - p(t, 0, 1, 1),
            1.0 - p(t, 1, 0, 0) - p(t, 0, 1, 0),
            1.0 - p(t, 1, 0, 0) - p(t, 0, 1, 1),
            2.0 - 2.0 * p(t, 1, 0, 1) - p(t, 0, 1, 0) - p(t, 0, 1, 1) - p(t, 1, 1, 0),
            2.0 - p(t, 0, 0, 1) - p(t, 1, 0, 0) - p(t, 1, 0, 1) - 2.0 * p(t, 0, 1, 0),
            2.0 - 2.0 * p(t, 1, 0, 0) - p(t, 0, 1, 0) - p(t, 0, 1, 1) - p(t, 1, 1, 1),
            2.0 - p(t, 0, 0, 0) - p(t, 1, 0, 0) - p(t, 1, 0, 1) - 2.0 * p(t, 0, 1, 1),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    })
    .with_dims(vec![4, 4])
}

/// Shape and auxiliary constants used to construct a registered `psi`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiParams {
    /// Block sizes of the data; fills in `k` and `d` when they are absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
}

impl PsiParams {
    pub fn for_dims(dims: &[usize]) -> Self {
        Self { dims: Some(dims.to_vec()), ..Default::default() }
    }

    fn k(&self) -> Result<usize> {
        self.k
            .or_else(|| self.dims.as_ref().map(Vec::len))
            .ok_or_else(|| Error::Config("psi parameter `k` is required".into()))
    }

    fn d(&self) -> Result<usize> {
        if let Some(d) = self.d {
            return Ok(d);
        }
        match self.dims.as_deref() {
            Some([first, rest @ ..]) if rest.iter().all(|d| d == first) => Ok(*first),
            Some(dims) => Err(Error::Shape(format!("blocks of unequal size {dims:?}"))),
            None => Err(Error::Config("psi parameter `d` is required".into())),
        }
    }
}

type Constructor = fn(&PsiParams) -> Result<PsiSpec>;

/// Immutable name -> constructor table.
pub struct PsiRegistry {
    entries: BTreeMap<&'static str, Constructor>,
}

impl PsiRegistry {
    pub fn builtin() -> Self {
        let mut entries: BTreeMap<&'static str, Constructor> = BTreeMap::new();
        entries.insert("bhattacharyya", |p| bhattacharyya(p.k()?, p.d()?));
        entries.insert("euclidean_ref", |p| {
            let theta0 = p
                .theta0
                .clone()
                .ok_or_else(|| Error::Config("euclidean_ref requires `theta0`".into()))?;
            let d = theta0.len();
            let reference = ProbabilityVector::new(theta0, vec![d])?;
            if let Some(dims) = &p.dims {
                if dims.as_slice() != [d] {
                    return Err(Error::Shape(format!(
                        "theta0 has {d} cells but the data blocks are {dims:?}"
                    )));
                }
            }
            euclidean_to_ref(&reference)
        });
        entries.insert("causal_lower", |_| Ok(causal_lower_bound()));
        entries.insert("causal_upper", |_| Ok(causal_upper_bound()));
        entries.insert("cell", |p| {
            let index = p.index.unwrap_or(0);
            if let Some(dims) = &p.dims {
                let width: usize = dims.iter().sum();
                if index >= width {
                    return Err(Error::Shape(format!(
                        "cell index {index} out of range for {width} cells"
                    )));
                }
            }
            Ok(cell(index))
        });
        Self { entries }
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().map(|s| s.to_string()).collect()
    }

    pub fn lookup(&self, name: &str, params: &PsiParams) -> Result<PsiSpec> {
        let ctor = self.entries.get(name).ok_or_else(|| Error::UnknownPsi {
            name: name.to_string(),
            registered: self.names(),
        })?;
        ctor(params)
    }
}

/// Looks `name` up in the built-in registry.
pub fn registry_lookup(name: &str, params: &PsiParams) -> Result<PsiSpec> {
    PsiRegistry::builtin().lookup(name, params)
}
