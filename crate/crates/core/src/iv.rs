//! Discrete structural model for a binary instrument `Z`, binary treatment
//! `X`, binary outcome `Y` and a finite latent confounder `U`.
//!
//! `Z` depends on nothing, `X` on `(U, Z)` and `Y` on `(U, X)`. Given `U = u`,
//! the treatment follows one of four response functions of `z` and the
//! outcome one of four response functions of `x`, drawn independently with
//! the per-`u` probabilities below. Any finite `U` with independent errors
//! reduces to this form.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProbabilityVector;
use crate::simplex::fill_simplex;

/// Treatment response types, in the order of [`DiscreteIvModel::x_response`].
const X_TYPES: [fn(usize) -> usize; 4] = [|_| 0, |z| z, |z| 1 - z, |_| 1];
/// Outcome response types, in the order of [`DiscreteIvModel::y_response`].
const Y_TYPES: [fn(usize) -> usize; 4] = [|_| 0, |x| x, |x| 1 - x, |_| 1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteIvModel {
    /// `P(U = u)`.
    pub latent_probs: Vec<f64>,
    /// Per `u`: P(never treated, complier, defier, always treated).
    pub x_response: Vec<[f64; 4]>,
    /// Per `u`: P(Y = 0, Y = x, Y = 1 - x, Y = 1).
    pub y_response: Vec<[f64; 4]>,
    /// `P(Z = 1)`. Does not affect the conditional probabilities.
    #[serde(default = "half")]
    pub instrument_prob: f64,
}

fn half() -> f64 {
    0.5
}

fn check_distribution(what: &str, probs: &[f64]) -> Result<()> {
    let sum: f64 = probs.iter().sum();
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidProbability(format!("{what} probabilities {probs:?} do not form a distribution")));
    }
    Ok(())
}

impl DiscreteIvModel {
    pub fn validate(&self) -> Result<()> {
        let m = self.latent_probs.len();
        if m == 0 || self.x_response.len() != m || self.y_response.len() != m {
            return Err(Error::Config(format!(
                "latent model needs matching lengths, got {m} latent probabilities, {} treatment and {} outcome response rows",
                self.x_response.len(),
                self.y_response.len()
            )));
        }
        check_distribution("latent", &self.latent_probs)?;
        for row in self.x_response.iter().chain(&self.y_response) {
            check_distribution("response", row)?;
        }
        if !(0.0..=1.0).contains(&self.instrument_prob) {
            return Err(Error::Config("instrument probability outside [0, 1]".into()));
        }
        Ok(())
    }

    /// `p{X = x, Y = y | Z = z}` as two blocks in cell order
    /// `(00, 10, 01, 11)` of `(x, y)`, `z = 0` first.
    pub fn observed_probs(&self) -> ProbabilityVector {
        let mut probs = vec![0.0; 8];
        for z in 0..2 {
            for (u, &w) in self.latent_probs.iter().enumerate() {
                for (rx, gx) in X_TYPES.iter().enumerate() {
                    let x = gx(z);
                    for (ry, gy) in Y_TYPES.iter().enumerate() {
                        let y = gy(x);
                        probs[4 * z + x + 2 * y] += w * self.x_response[u][rx] * self.y_response[u][ry];
                    }
                }
            }
        }
        // Renormalize away accumulated rounding so the blocks validate.
        for block in probs.chunks_mut(4) {
            let s: f64 = block.iter().sum();
            block.iter_mut().for_each(|p| *p /= s);
        }
        ProbabilityVector::new(probs, vec![4, 4]).expect("model probabilities form two blocks")
    }

    /// `P(Y(1) = 1) - P(Y(0) = 1)`.
    pub fn risk_difference(&self) -> f64 {
        self.latent_probs
            .iter()
            .zip(&self.y_response)
            .map(|(w, ry)| w * (ry[1] - ry[2]))
            .sum()
    }

    /// A model with `m` latent values and all probabilities drawn uniformly
    /// from their simplices.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Self {
        let mut latent_probs = vec![0.0; m.max(1)];
        fill_simplex(rng, &mut latent_probs);
        let mut row = || {
            let mut r = [0.0; 4];
            fill_simplex(rng, &mut r);
            r
        };
        let x_response = (0..latent_probs.len()).map(|_| row()).collect();
        let y_response = (0..latent_probs.len()).map(|_| row()).collect();
        Self { latent_probs, x_response, y_response, instrument_prob: 0.5 }
    }
}
