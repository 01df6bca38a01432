//! Adaptive Dormand–Prince 5(4) integration for small autonomous-in-form
//! systems with fixed dimension.

use crate::error::{Error, Result};

/// Right-hand side and error scaling of an ODE system `y' = f(r, y)`.
pub trait OdeSystem<const D: usize> {
    fn rhs(&self, r: f64, y: &[f64; D]) -> [f64; D];

    /// Per-component error scale; the step is accepted when every
    /// component of the local error estimate is below its scale.
    fn error_scale(&self, _r: f64, y_old: &[f64; D], y_new: &[f64; D], tol: &Tolerance) -> [f64; D] {
        let mut sc = [0.0; D];
        for i in 0..D {
            sc[i] = tol.atol + tol.rtol * y_old[i].abs().max(y_new[i].abs());
        }
        sc
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Stepper state. The caller drives it one accepted step at a time and
/// inspects `r` and `y` between steps (event detection, recording).
#[derive(Debug, Clone)]
pub struct Dopri<const D: usize> {
    pub r: f64,
    pub y: [f64; D],
    h: f64,
    k1: [f64; D],
    tol: Tolerance,
    steps: usize,
}

fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for i in 0..D {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

impl<const D: usize> Dopri<D> {
    pub fn new<S: OdeSystem<D>>(sys: &S, r0: f64, y0: [f64; D], h0: f64, tol: Tolerance) -> Self {
        let k1 = sys.rhs(r0, &y0);
        Dopri { r: r0, y: y0, h: h0, k1, tol, steps: 0 }
    }

    /// Current derivative `f(r, y)`.
    pub fn slope(&self) -> &[f64; D] {
        &self.k1
    }

    pub fn accepted_steps(&self) -> usize {
        self.steps
    }

    /// Performs one accepted step of size at most `h_cap`.
    pub fn step<S: OdeSystem<D>>(&mut self, sys: &S, h_cap: f64) -> Result<()> {
        loop {
            let capped = self.h >= h_cap;
            let h = self.h.min(h_cap);
            let h_floor = 1e-14 * self.r.abs().max(1e-3);
            if !(h > h_floor) {
                return Err(Error::StiffnessFailure { r: self.r, h });
            }
            let r = self.r;
            let y = &self.y;
            let k1 = self.k1;
            let k2 = sys.rhs(r + C2 * h, &axpy(y, h, &[(A21, &k1)]));
            let k3 = sys.rhs(r + C3 * h, &axpy(y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = sys.rhs(r + C4 * h, &axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = sys.rhs(
                r + C5 * h,
                &axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = sys.rhs(
                r + h,
                &axpy(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y_new = axpy(y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = sys.rhs(r + h, &y_new);

            let sc = sys.error_scale(r, y, &y_new, &self.tol);
            let mut err: f64 = 0.0;
            for i in 0..D {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                err = err.max(e.abs() / sc[i].max(f64::MIN_POSITIVE));
            }
            if !err.is_finite() {
                self.h = 0.2 * h;
                continue;
            }
            if err <= 1.0 {
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                let proposal = h * factor;
                self.h = if capped { proposal.max(self.h) } else { proposal };
                self.r = r + h;
                self.y = y_new;
                self.k1 = k7;
                self.steps += 1;
                return Ok(());
            }
            self.h = h * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Harmonic;
    impl OdeSystem<2> for Harmonic {
        fn rhs(&self, _r: f64, y: &[f64; 2]) -> [f64; 2] {
            [y[1], -y[0]]
        }
        fn error_scale(&self, _r: f64, _o: &[f64; 2], _n: &[f64; 2], tol: &Tolerance) -> [f64; 2] {
            [tol.atol + tol.rtol; 2]
        }
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let tol = Tolerance { atol: 1e-12, rtol: 1e-12 };
        let mut st = Dopri::new(&Harmonic, 0.0, [1.0, 0.0], 1e-3, tol);
        let t_end = 10.0;
        while st.r < t_end {
            let cap = t_end - st.r;
            st.step(&Harmonic, cap).unwrap();
        }
        assert!((st.r - t_end).abs() < 1e-12);
        assert!((st.y[0] - t_end.cos()).abs() < 1e-9);
        assert!((st.y[1] + t_end.sin()).abs() < 1e-9);
    }

    struct Exp;
    impl OdeSystem<1> for Exp {
        fn rhs(&self, _r: f64, y: &[f64; 1]) -> [f64; 1] {
            [-y[0]]
        }
    }

    #[test]
    fn relative_control_on_decay() {
        let tol = Tolerance { atol: 0.0, rtol: 1e-11 };
        let mut st = Dopri::new(&Exp, 0.0, [1.0], 1e-2, tol);
        while st.r < 40.0 {
            st.step(&Exp, 40.0 - st.r).unwrap();
        }
        let exact = (-40.0f64).exp();
        assert!(((st.y[0] - exact) / exact).abs() < 1e-8);
    }
}
