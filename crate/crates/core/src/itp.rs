//! Interpolate-truncate-project bracketed root finding.
//!
//! Keeps bisection's worst-case iteration count,
//! `ceil(log2((b - a) / (2 eps))) + n0`, while converging superlinearly on
//! smooth functions.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItpParams {
    pub eps: f64,
    /// Truncation scale; `None` means `0.2 / (b - a)`.
    pub kappa1: Option<f64>,
    pub kappa2: f64,
    /// Extra iterations allowed beyond bisection.
    pub n0: u32,
}

impl ItpParams {
    pub fn with_eps(eps: f64) -> Self {
        Self { eps, kappa1: None, kappa2: 2.0, n0: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItpSolution {
    pub root: f64,
    /// Final bracket, ordered as the input interval.
    pub bracket: (f64, f64),
    pub iterations: u32,
    pub evaluations: u32,
}

/// Upper bound on the number of iterations for bracket `[a, b]`.
pub fn iteration_bound(a: f64, b: f64, params: &ItpParams) -> u32 {
    let n_half = ((b - a) / (2.0 * params.eps)).log2().ceil().max(0.0) as u32;
    n_half + params.n0
}

/// Finds `x` within `eps` of a sign change of `f` on `[a, b]`.
pub fn itp_root<F>(mut f: F, a: f64, b: f64, params: ItpParams) -> Result<ItpSolution>
where
    F: FnMut(f64) -> f64,
{
    if !(a < b) || !(params.eps > 0.0) || !(params.kappa2 >= 1.0 && params.kappa2 < 2.618_033_988_75) {
        return Err(Error::Config(format!(
            "invalid ITP setup: a = {a}, b = {b}, eps = {}, kappa2 = {}",
            params.eps, params.kappa2
        )));
    }
    let (fa, fb) = (f(a), f(b));
    let mut evaluations = 2;
    if fa == 0.0 {
        return Ok(ItpSolution { root: a, bracket: (a, a), iterations: 0, evaluations });
    }
    if fb == 0.0 {
        return Ok(ItpSolution { root: b, bracket: (b, b), iterations: 0, evaluations });
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(Error::Bracket { a, b, fa, fb });
    }
    // Work with g = s f so that g(a) < 0 < g(b).
    let s = if fa < 0.0 { 1.0 } else { -1.0 };
    let (mut a, mut b, mut ya, mut yb) = (a, b, s * fa, s * fb);

    let kappa1 = params.kappa1.unwrap_or(0.2 / (b - a));
    let n_max = iteration_bound(a, b, &params);
    let mut j = 0u32;
    while b - a > 2.0 * params.eps && j < n_max {
        let mid = 0.5 * (a + b);
        let r = params.eps * 2f64.powi((n_max - j) as i32) - 0.5 * (b - a);
        let delta = kappa1 * (b - a).powf(params.kappa2);

        // Interpolation (regula falsi).
        let xf = (yb * a - ya * b) / (yb - ya);
        // Truncation toward the midpoint.
        let sigma = (mid - xf).signum();
        let xt = if delta <= (mid - xf).abs() { xf + sigma * delta } else { mid };
        // Projection onto the minmax disk around the midpoint.
        let x = if (xt - mid).abs() <= r { xt } else { mid - sigma * r };

        let y = s * f(x);
        evaluations += 1;
        j += 1;
        if y > 0.0 {
            b = x;
            yb = y;
        } else if y < 0.0 {
            a = x;
            ya = y;
        } else {
            return Ok(ItpSolution { root: x, bracket: (x, x), iterations: j, evaluations });
        }
    }
    Ok(ItpSolution { root: 0.5 * (a + b), bracket: (a, b), iterations: j, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_root() {
        let sol = itp_root(|x| x - 0.5, 0.0, 1.0, ItpParams::with_eps(1e-8)).unwrap();
        assert!((sol.root - 0.5).abs() < 1e-8);
    }

    #[test]
    fn square_root_of_two() {
        let sol = itp_root(|x| x * x - 2.0, 1.0, 2.0, ItpParams::with_eps(1e-8)).unwrap();
        assert!((sol.root - 2f64.sqrt()).abs() <= 1e-8);
        assert!(sol.iterations <= iteration_bound(1.0, 2.0, &ItpParams::with_eps(1e-8)));
    }

    #[test]
    fn step_function() {
        let step = |x: f64| if x < 0.3 { -1.0 } else { 1.0 };
        let params = ItpParams::with_eps(1e-6);
        let sol = itp_root(step, 0.0, 1.0, params).unwrap();
        assert!((sol.root - 0.3).abs() <= 1e-6, "{}", sol.root);
        assert!(sol.iterations <= iteration_bound(0.0, 1.0, &params));
    }

    #[test]
    fn decreasing_function() {
        let sol = itp_root(|x| 0.25 - x, 0.0, 1.0, ItpParams::with_eps(1e-10)).unwrap();
        assert!((sol.root - 0.25).abs() <= 1e-10);
    }

    #[test]
    fn endpoint_roots() {
        assert_eq!(itp_root(|x| x, 0.0, 1.0, ItpParams::with_eps(1e-6)).unwrap().root, 0.0);
        assert_eq!(itp_root(|x| x - 1.0, 0.0, 1.0, ItpParams::with_eps(1e-6)).unwrap().root, 1.0);
    }

    #[test]
    fn missing_sign_change() {
        match itp_root(|x| x * x + 1.0, -1.0, 1.0, ItpParams::with_eps(1e-6)) {
            Err(Error::Bracket { fa, fb, .. }) => assert_eq!((fa, fb), (2.0, 2.0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn smooth_functions_beat_bisection() {
        let params = ItpParams::with_eps(1e-12);
        let sol = itp_root(|x: f64| x.exp() - 3.0, 0.0, 2.0, params).unwrap();
        assert!((sol.root - 3f64.ln()).abs() <= 1e-12);
        assert!(sol.iterations < iteration_bound(0.0, 2.0, &params));
    }
}
