//! Quadrature helpers: radial weights, composite Simpson on nonuniform grids
//! and Gauss–Legendre panels for semi-infinite tails.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Surface measure |S^{N−1}| of the unit sphere in R^N (2 for N = 1).
pub fn sphere_area(dim: u32) -> f64 {
    match dim {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        n => 2.0 * PI / (n as f64 - 2.0) * sphere_area(n - 2),
    }
}

/// Composite Simpson rule on a strictly increasing, possibly nonuniform grid.
///
/// An odd trailing interval is integrated with the quadratic through the
/// last three nodes; two nodes fall back to the trapezoid rule.
pub fn simpson(x: &[f64], f: &[f64]) -> f64 {
    assert_eq!(x.len(), f.len());
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * (x[1] - x[0]) * (f[0] + f[1]);
    }
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 < n {
        let h0 = x[i + 1] - x[i];
        let h1 = x[i + 2] - x[i + 1];
        let s = h0 + h1;
        total += s / 6.0
            * ((2.0 - h1 / h0) * f[i] + s * s / (h0 * h1) * f[i + 1] + (2.0 - h0 / h1) * f[i + 2]);
        i += 2;
    }
    if i + 1 < n {
        // One interval [x[n-2], x[n-1]] left over.
        let (f0, f1, f2) = (f[n - 3], f[n - 2], f[n - 1]);
        let h0 = x[n - 2] - x[n - 3];
        let h1 = x[n - 1] - x[n - 2];
        let s = h0 + h1;
        total += f2 * (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * s)
            + f1 * (h1 * h1 + 3.0 * h0 * h1) / (6.0 * h0)
            - f0 * h1 * h1 * h1 / (6.0 * h0 * s);
    }
    total
}

const GL_ORDER: usize = 16;

/// Nodes and weights of the Gauss–Legendre rule on [−1, 1].
fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut rule = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        rule
    })
}

/// Gauss–Legendre integral of `f` over [a, b].
pub fn gauss_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    gauss_legendre()
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Integral of a decaying integrand over [start, ∞) on geometrically
/// growing panels, stopping once panels stop contributing.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, start: f64, first_width: f64) -> f64 {
    let mut total = 0.0;
    let mut a = start;
    let mut w = first_width;
    let mut quiet = 0;
    for _ in 0..400 {
        let part = gauss_panel(&f, a, a + w);
        total += part;
        if part.abs() <= 1e-17 * total.abs() {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
        a += w;
        w *= 2.0;
        if !a.is_finite() {
            break;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn simpson_exact_for_cubics_on_nonuniform_grid() {
        let x: Vec<f64> = (0..=13).map(|i| (i as f64 * 0.3).powf(1.4)).collect();
        let f: Vec<f64> = x.iter().map(|&t| 1.0 - 2.0 * t + 3.0 * t * t).collect();
        let b = *x.last().unwrap();
        let exact = b - b * b + b * b * b;
        assert!((simpson(&x, &f) - exact).abs() < 1e-10 * exact.abs());
    }

    #[test]
    fn gauss_panel_polynomial() {
        let v = gauss_panel(&|t: f64| t.powi(9), 0.0, 2.0);
        assert!((v - 102.4).abs() < 1e-11);
    }

    #[test]
    fn semi_infinite_exponential() {
        let v = integrate_to_infinity(|t| (-3.0 * t).exp(), 1.0, 0.1);
        let exact = (-3.0f64).exp() / 3.0;
        assert!((v - exact).abs() < 1e-14);
    }

    #[test]
    fn semi_infinite_power() {
        let v = integrate_to_infinity(|t| t.powi(-3), 2.0, 1.0);
        assert!((v - 0.125).abs() < 1e-12);
    }
}
