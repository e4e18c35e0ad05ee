//! Uniform sampling on the probability simplex.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};

/// Overwrites `out` with a uniform draw from the simplex of dimension
/// `out.len()`: independent standard exponentials divided by their sum.
pub fn fill_simplex<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut total = 0.0;
        for x in out.iter_mut() {
            let e: f64 = rng.sample(Exp1);
            *x = e;
            total += e;
        }
        // All-zero draws have probability zero but are not representable.
        if total > 0.0 {
            out.iter_mut().for_each(|x| *x /= total);
            return;
        }
    }
}

/// `count` independent uniform draws from the `d`-simplex.
pub fn sample_simplex<R: Rng + ?Sized>(d: usize, count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    Ok((0..count)
        .map(|_| {
            let mut v = vec![0.0; d];
            fill_simplex(rng, &mut v);
            v
        })
        .collect())
}
