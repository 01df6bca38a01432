//! Scalar root finding.

use roots::{find_root_brent, SimpleConvergency};

use crate::error::{Error, Result};

/// Brent's method on a sign-changing bracket `[a, b]`.
pub fn brent<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoRoot(format!("no sign change on [{a:e}, {b:e}]")));
    }
    // The convergence test is absolute in x, so keep it above one ulp of the bracket.
    let eps = tol.max(4.0 * f64::EPSILON * a.abs().max(b.abs()));
    let mut conv = SimpleConvergency { eps, max_iter: 1000 };
    find_root_brent(a, b, &f, &mut conv).map_err(|e| Error::NoRoot(format!("{e:?}")))
}

/// Root of `f` on `[lo, hi]` (both positive), located by scanning a
/// logarithmic grid for the first sign change and refined with Brent.
pub fn log_scan_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize, tol: f64) -> Result<f64> {
    let (la, lb) = (lo.ln(), hi.ln());
    let mut prev_x = lo;
    let mut prev = f(lo);
    for i in 1..=points {
        let x = (la + (lb - la) * i as f64 / points as f64).exp();
        let v = f(x);
        if prev == 0.0 {
            return Ok(prev_x);
        }
        if v.signum() != prev.signum() {
            return brent(&f, prev_x, x, tol);
        }
        prev_x = x;
        prev = v;
    }
    Err(Error::NoRoot(format!("no sign change on [{lo:e}, {hi:e}]")))
}
