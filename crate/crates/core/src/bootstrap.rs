//! Nonparametric bootstrap percentile intervals, the usual comparison
//! baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{theta_hat, Dataset, PsiSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { replicates: 500, alpha: 0.05, seed: 0 }
    }
}

/// Draws Multinomial(n, probs) counts into `out` by sequential conditional
/// binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(rng: &mut R, n: u32, probs: &[f64], out: &mut [u32]) {
    let mut remaining = u64::from(n);
    let mut mass = 1.0;
    let last = probs.len() - 1;
    for (i, &p) in probs.iter().enumerate() {
        if i == last {
            out[i] = remaining as u32;
            break;
        }
        if remaining == 0 {
            out[i] = 0;
            continue;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let x = Binomial::new(remaining, q).expect("probability in [0, 1]").sample(rng);
        out[i] = x as u32;
        remaining -= x;
        mass -= p;
    }
}

/// Percentile interval from `replicates` resamples of each block from its
/// sample proportions. Endpoints are the order statistics at positions
/// `ceil(R alpha / 2)` and `ceil(R (1 - alpha / 2))` (1-based).
pub fn bootstrap_ci(data: &Dataset, psi: &PsiSpec, config: &BootstrapConfig) -> Result<(f64, f64)> {
    if config.replicates < 2 {
        return Err(Error::Config("the bootstrap needs at least 2 replicates".into()));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", config.alpha)));
    }
    psi.check_dims(&data.dims())?;
    let th = theta_hat(data)?;
    let shape = data.shape();
    let width: usize = data.dims().iter().sum();

    let mut stats: Vec<f64> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(r as u64);
            let mut counts = vec![0u32; width];
            let mut theta = vec![0.0; width];
            let mut offset = 0;
            for (block, probs) in shape.iter().zip(th.blocks()) {
                let slot = &mut counts[offset..offset + block.d];
                sample_multinomial(&mut rng, block.n, probs, slot);
                let n = f64::from(block.n);
                for (t, &c) in theta[offset..offset + block.d].iter_mut().zip(slot.iter()) {
                    *t = f64::from(c) / n;
                }
                offset += block.d;
            }
            psi.evaluate(&theta)
        })
        .collect();
    stats.sort_by(f64::total_cmp);

    let r = config.replicates as f64;
    let pick = |q: f64| {
        let pos = ((r * q).ceil() as usize).clamp(1, config.replicates);
        stats[pos - 1]
    };
    Ok((pick(config.alpha / 2.0), pick(1.0 - config.alpha / 2.0)))
}
