//! Norms and variational functionals of radial profiles.
//!
//! With `G = ‖∇v‖²`, `M = ‖v‖²`, `A = ‖v‖_{p+1}^{p+1}`, `B = ‖v‖_{q+1}^{q+1}`:
//!
//! * action `S = G/2 + ωM/2 + A/(p+1) − B/(q+1)`
//! * Nehari functional `K = G + ωM + A − B`
//! * `J = (1/2 − 1/(q+1))(G + ωM) + (1/(p+1) − 1/(q+1))A`
//! * virial functional `P = G + α/(p+1) A − β/(q+1) B`
//!
//! Every functional of a rescaled profile follows from these four numbers,
//! so rescalings never trigger new quadrature.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groundstate::{solve_ground_state, RadialProfile, ShootingConfig, TailModel};
use crate::model::{l2_membership, ModelParams};
use crate::numerics::{brent, log_scan_root};
use crate::quadrature::{integrate_to_infinity, simpson, sphere_area};

/// The four integrals every functional is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l2_sq: f64,
    pub grad_l2_sq: f64,
    pub lp1: f64,
    pub lq1: f64,
}

impl Norms {
    /// Norms of `a·v`.
    pub fn amplitude_scaled(&self, a: f64, params: &ModelParams) -> Norms {
        Norms {
            l2_sq: self.l2_sq * a * a,
            grad_l2_sq: self.grad_l2_sq * a * a,
            lp1: self.lp1 * a.abs().powf(params.p + 1.0),
            lq1: self.lq1 * a.abs().powf(params.q + 1.0),
        }
    }

    /// Norms of `v^λ = λ^{N/2} v(λ·)`; the L² norm is unchanged.
    pub fn l2_scaled(&self, lambda: f64, params: &ModelParams) -> Norms {
        Norms {
            l2_sq: self.l2_sq,
            grad_l2_sq: self.grad_l2_sq * lambda * lambda,
            lp1: self.lp1 * lambda.powf(params.alpha()),
            lq1: self.lq1 * lambda.powf(params.beta()),
        }
    }

    /// `G + ωM`, skipping the mass term entirely at ω = 0.
    fn quadratic(&self, params: &ModelParams) -> f64 {
        if params.omega == 0.0 {
            self.grad_l2_sq
        } else {
            self.grad_l2_sq + params.omega * self.l2_sq
        }
    }

    pub fn action(&self, params: &ModelParams) -> f64 {
        0.5 * self.quadratic(params) + self.lp1 / (params.p + 1.0) - self.lq1 / (params.q + 1.0)
    }

    pub fn nehari(&self, params: &ModelParams) -> f64 {
        self.quadratic(params) + self.lp1 - self.lq1
    }

    pub fn j_functional(&self, params: &ModelParams) -> f64 {
        let (p, q) = (params.p, params.q);
        (0.5 - 1.0 / (q + 1.0)) * self.quadratic(params) + (1.0 / (p + 1.0) - 1.0 / (q + 1.0)) * self.lp1
    }

    pub fn virial(&self, params: &ModelParams) -> f64 {
        self.grad_l2_sq + params.alpha() / (params.p + 1.0) * self.lp1
            - params.beta() / (params.q + 1.0) * self.lq1
    }

    /// Energy `G/2 + A/(p+1) − B/(q+1)`.
    pub fn energy(&self, params: &ModelParams) -> f64 {
        0.5 * self.grad_l2_sq + self.lp1 / (params.p + 1.0) - self.lq1 / (params.q + 1.0)
    }
}

/// Treatment of norms that diverge under the tail model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum NormPolicy {
    /// Report the grid-only value and set the divergence flag.
    #[default]
    Truncate,
    /// Fail with `DivergentNorm`.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub params: ModelParams,
    pub norms: Norms,
    /// Set when the L² norm diverges; `norms.l2_sq` then holds the grid-only value.
    pub l2_divergent: bool,
    pub action: f64,
    pub nehari: f64,
    pub j: f64,
    pub virial: f64,
    pub pohozaev_residual_k: f64,
    pub pohozaev_residual_p: f64,
}

impl FunctionalReport {
    pub fn from_norms(norms: Norms, params: &ModelParams, l2_divergent: bool) -> Self {
        let nehari = norms.nehari(params);
        let virial = norms.virial(params);
        FunctionalReport {
            params: *params,
            norms,
            l2_divergent,
            action: norms.action(params),
            nehari,
            j: norms.j_functional(params),
            virial,
            pohozaev_residual_k: nehari / norms.grad_l2_sq,
            pohozaev_residual_p: virial / norms.grad_l2_sq,
        }
    }
}

enum TailPart {
    Finite(f64),
    Divergent,
}

/// ∫_{r_a}^∞ |φ|^m r^{N−1} dr (or |φ'|² r^{N−1} when `gradient`), without the sphere factor.
fn tail_integral(tail: &TailModel, dim: u32, m: f64, gradient: bool) -> TailPart {
    let n = dim as f64;
    match *tail {
        TailModel::Truncated => TailPart::Finite(0.0),
        TailModel::Exponential { rate, power, r_anchor, value_anchor } => {
            let order = if gradient { 2.0 } else { m };
            let f = |r: f64| {
                let phi = value_anchor * (r / r_anchor).powf(-power) * (-rate * (r - r_anchor)).exp();
                let w = r.powf(n - 1.0);
                if gradient {
                    let d = phi * (rate + power / r);
                    d * d * w
                } else {
                    phi.powf(m) * w
                }
            };
            let width = 0.25 / (order * rate).max(1e-300);
            TailPart::Finite(integrate_to_infinity(f, r_anchor, width.min(r_anchor.max(1.0))))
        }
        TailModel::Algebraic { exponent, log_power, log_scale, r_anchor, value_anchor } => {
            let rho = exponent;
            // Integrand ~ r^{−1−a} (ln r)^{−b} at infinity.
            let (a, b) = if gradient {
                (2.0 * rho + 2.0 - n, 2.0 * log_power)
            } else {
                (m * rho - n, m * log_power)
            };
            let scale = if gradient {
                value_anchor * value_anchor * r_anchor.powf(n - 2.0)
            } else {
                value_anchor.powf(m) * r_anchor.powf(n)
            };
            if log_power == 0.0 {
                if a <= 0.0 {
                    return TailPart::Divergent;
                }
                let factor = if gradient { rho * rho } else { 1.0 };
                return TailPart::Finite(scale * factor / a);
            }
            let la = (log_scale * r_anchor).ln();
            if !(la > 0.0) {
                return TailPart::Divergent;
            }
            if a.abs() <= 1e-12 * (1.0 + rho * m.max(2.0)) {
                if gradient || b <= 1.0 {
                    return TailPart::Divergent;
                }
                return TailPart::Finite(scale * la / (b - 1.0));
            }
            if a < 0.0 {
                return TailPart::Divergent;
            }
            // Substitute r = r_a e^t.
            let f = |t: f64| {
                let logs = 1.0 + t / la;
                let mut v = (-a * t).exp() * logs.powf(-b);
                if gradient {
                    let k = rho + log_power / (la + t);
                    v *= k * k;
                }
                v
            };
            TailPart::Finite(scale * integrate_to_infinity(f, 0.0, 0.5 / a))
        }
    }
}

/// Computes the four norms of `profile` with exponents taken from `params`.
///
/// Returns the norms and whether the L² norm diverges.
pub fn compute_norms(profile: &RadialProfile, params: &ModelParams, policy: NormPolicy) -> Result<(Norms, bool)> {
    if profile.dim() != params.dim {
        return Err(Error::InvalidParams(format!(
            "profile dimension {} differs from parameter dimension {}",
            profile.dim(),
            params.dim
        )));
    }
    let dim = params.dim;
    let n = params.n();
    let area = sphere_area(dim);
    let r = &profile.r_grid;
    let weight: Vec<f64> = r.iter().map(|&x| if dim == 1 { 1.0 } else { x.powf(n - 1.0) }).collect();
    let integrate = |g: &dyn Fn(usize) -> f64| {
        let f: Vec<f64> = (0..r.len()).map(|i| g(i) * weight[i]).collect();
        simpson(r, &f)
    };
    let v = &profile.values;
    let d = &profile.derivs;
    let l2_grid = integrate(&|i| v[i] * v[i]);
    let grad_grid = integrate(&|i| d[i] * d[i]);
    let lp1_grid = integrate(&|i| v[i].abs().powf(params.p + 1.0));
    let lq1_grid = integrate(&|i| v[i].abs().powf(params.q + 1.0));

    let finite = |part: TailPart, name: &'static str| match part {
        TailPart::Finite(x) => Ok(x),
        TailPart::Divergent => Err(Error::DivergentNorm(name)),
    };
    let grad_tail = finite(tail_integral(&profile.tail, dim, 2.0, true), "gradient L2")?;
    let lp1_tail = finite(tail_integral(&profile.tail, dim, params.p + 1.0, false), "L^{p+1}")?;
    let lq1_tail = finite(tail_integral(&profile.tail, dim, params.q + 1.0, false), "L^{q+1}")?;

    let zero_mass_profile = profile.params.omega == 0.0 && matches!(profile.tail, TailModel::Algebraic { .. });
    let mut l2_divergent = zero_mass_profile && !l2_membership(dim, profile.params.p);
    let l2_tail = match tail_integral(&profile.tail, dim, 2.0, false) {
        TailPart::Finite(x) if !l2_divergent => x,
        _ => {
            l2_divergent = true;
            0.0
        }
    };
    if l2_divergent && policy == NormPolicy::Strict {
        return Err(Error::DivergentNorm("L2"));
    }
    Ok((
        Norms {
            l2_sq: area * (l2_grid + l2_tail),
            grad_l2_sq: area * (grad_grid + grad_tail),
            lp1: area * (lp1_grid + lp1_tail),
            lq1: area * (lq1_grid + lq1_tail),
        },
        l2_divergent,
    ))
}

/// Functional report with divergent L² norms truncated and flagged.
pub fn compute_report(profile: &RadialProfile, params: &ModelParams) -> Result<FunctionalReport> {
    compute_report_with(profile, params, NormPolicy::Truncate)
}

pub fn compute_report_with(profile: &RadialProfile, params: &ModelParams, policy: NormPolicy) -> Result<FunctionalReport> {
    let (norms, l2_divergent) = compute_norms(profile, params, policy)?;
    if l2_divergent && params.omega > 0.0 {
        return Err(Error::DivergentNorm("L2 (needed for omega > 0)"));
    }
    Ok(FunctionalReport::from_norms(norms, params, l2_divergent))
}

const SCALE_LO: f64 = 1e-6;
const SCALE_HI: f64 = 1e6;
const ROOT_TOL: f64 = 1e-12;

/// λ₁ > 0 with `K(λ₁ v) = 0`.
pub fn nehari_rescale(report: &FunctionalReport, params: &ModelParams) -> Result<f64> {
    let norms = &report.norms;
    let quad = norms.quadratic(params);
    if norms.lq1 <= 0.0 || quad <= 0.0 {
        return Err(Error::NoRoot("profile has no focusing part".into()));
    }
    // K(λv)/λ² = (G + ωM) + λ^{p−1} A − λ^{q−1} B, decreasing past its maximum.
    let h = |l: f64| quad + l.powf(params.p - 1.0) * norms.lp1 - l.powf(params.q - 1.0) * norms.lq1;
    if h(SCALE_HI) > 0.0 {
        return Err(Error::NoRoot("K(lambda v) > 0 on the whole search range".into()));
    }
    brent(h, SCALE_LO, SCALE_HI, ROOT_TOL)
}

/// λ₀ > 0 with `K(v^{λ₀}) = 0`, `v^λ = λ^{N/2} v(λ·)`.
pub fn virial_scaling_root(report: &FunctionalReport, params: &ModelParams) -> Result<f64> {
    if params.q_is_mass_critical() && report.virial > 0.0 {
        return Err(Error::HypothesisViolated(
            "q = 1+4/N requires P(v) <= 0 for the virial rescaling".into(),
        ));
    }
    let norms = report.norms;
    let k = |l: f64| norms.l2_scaled(l, params).nehari(params);
    // Prefer the root at λ = 1 when the profile already lies on the Nehari manifold.
    let k1 = k(1.0);
    let scale = norms.quadratic(params).abs().max(norms.lq1.abs());
    if k1.abs() <= 1e-10 * scale {
        let (a, b) = (1.0 - 1e-3, 1.0 + 1e-3);
        if k(a).signum() != k(b).signum() {
            return brent(k, a, b, ROOT_TOL);
        }
    }
    log_scan_root(k, SCALE_LO, SCALE_HI, 4000, ROOT_TOL)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DPoint {
    pub omega: f64,
    pub d: Option<f64>,
    pub mass: Option<f64>,
    pub mass_divergent: bool,
    pub status: String,
}

/// d(ω) = S_ω(φ_ω) sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DCurve {
    pub points: Vec<DPoint>,
    /// Strictly increasing over consecutive successful points with distinct ω.
    pub strictly_increasing: bool,
    pub all_positive: bool,
}

pub fn d_curve(omega_grid: &[f64], template: &ModelParams, cfg: &ShootingConfig) -> Result<DCurve> {
    if omega_grid.windows(2).any(|w| w[1] < w[0]) || omega_grid.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::InvalidParams("omega grid must be ascending and nonnegative".into()));
    }
    let points: Vec<DPoint> = omega_grid
        .par_iter()
        .map(|&omega| {
            let params = template.with_omega(omega);
            let result = solve_ground_state(&params, cfg).and_then(|prof| compute_report(&prof, &params));
            match result {
                Ok(rep) => DPoint {
                    omega,
                    d: Some(rep.action),
                    mass: (!rep.l2_divergent).then_some(rep.norms.l2_sq),
                    mass_divergent: rep.l2_divergent,
                    status: "ok".into(),
                },
                Err(e) => DPoint {
                    omega,
                    d: None,
                    mass: None,
                    mass_divergent: false,
                    status: format!("failed: {e}"),
                },
            }
        })
        .collect();
    let ok: Vec<&DPoint> = points.iter().filter(|p| p.d.is_some()).collect();
    let strictly_increasing = ok
        .windows(2)
        .all(|w| w[1].omega == w[0].omega || w[1].d.unwrap() > w[0].d.unwrap());
    let all_positive = ok.iter().all(|p| p.d.unwrap() > 0.0);
    Ok(DCurve { points, strictly_increasing, all_positive })
}

/// `min_r [ A^{1/(p+3)} G^{1/(p+3)} − r^{2(N−1)/(p+3)} φ(r) ]` over the grid
/// and a logarithmic sample of the tail, i.e. the radial pointwise bound
/// with constant 1.
///
/// For N = 1 that bound can fail (e.g. `e^{−|x|}` with p = 2); see
/// [`strauss_proof_constant`] for the constant the integration argument gives.
pub fn strauss_bound_check(profile: &RadialProfile, report: &FunctionalReport) -> f64 {
    strauss_margin_with_constant(profile, report, 1.0)
}

/// Constant `((p+3)/(2|S^{N−1}|))^{2/(p+3)}` obtained from
/// `r^{N−1}|u|^{(p+3)/2} ≤ (p+3)/2 ∫_r^∞ s^{N−1}|u|^{(p+1)/2}|u'| ds` and Cauchy–Schwarz.
pub fn strauss_proof_constant(dim: u32, p: f64) -> f64 {
    ((p + 3.0) / (2.0 * sphere_area(dim))).powf(2.0 / (p + 3.0))
}

/// Margin of the pointwise bound with an explicit constant in front of the norms.
pub fn strauss_margin_with_constant(profile: &RadialProfile, report: &FunctionalReport, constant: f64) -> f64 {
    let p = report.params.p;
    let e = 1.0 / (p + 3.0);
    let rhs = constant * report.norms.lp1.powf(e) * report.norms.grad_l2_sq.powf(e);
    let k = 2.0 * (profile.params.n() - 1.0) * e;
    let lhs = |r: f64, v: f64| if k == 0.0 { v.abs() } else { r.powf(k) * v.abs() };
    let mut worst = f64::INFINITY;
    for (&r, &v) in profile.r_grid.iter().zip(&profile.values) {
        worst = worst.min(rhs - lhs(r, v));
    }
    let ra = profile.r_max();
    for i in 1..=200 {
        let r = ra * 10f64.powf(4.0 * i as f64 / 200.0);
        worst = worst.min(rhs - lhs(r, profile.evaluate(r)));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groundstate::solve_ground_state;
    use std::f64::consts::PI;

    fn params(n: u32, p: f64, q: f64, w: f64) -> ModelParams {
        ModelParams::new(n, p, q, w).unwrap()
    }

    fn gaussian(n: u32) -> RadialProfile {
        let r: Vec<f64> = (0..=2400).map(|i| i as f64 * 0.005).collect();
        let v: Vec<f64> = r.iter().map(|x| (-x * x).exp()).collect();
        let d: Vec<f64> = r.iter().map(|x| -2.0 * x * (-x * x).exp()).collect();
        RadialProfile::from_samples(params(n, 2.0, 3.0, 1.0), r, v, d, TailModel::Truncated).unwrap()
    }

    #[test]
    fn gaussian_norms_match_closed_forms() {
        // ∫_{R^N} e^{−m|x|²} = (π/m)^{N/2}; ∫ |∇e^{−|x|²}|² = N (π/2)^{N/2}.
        for n in 1..=3 {
            let m = params(n, 2.0, 3.0, 1.0);
            let (norms, div) = compute_norms(&gaussian(n), &m, NormPolicy::Strict).unwrap();
            assert!(!div);
            let nn = n as f64;
            let g = |k: f64| (PI / k).powf(nn / 2.0);
            let checks = [
                (norms.l2_sq, g(2.0)),
                (norms.grad_l2_sq, nn * g(2.0)),
                (norms.lp1, g(3.0)),
                (norms.lq1, g(4.0)),
            ];
            for (got, exact) in checks {
                assert!(((got - exact) / exact).abs() < 1e-9, "N={n}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn power_tail_closed_form() {
        // v = (1 + r²)^{-1} in N = 1 with an exact r^{-2} tail beyond r = 20
        // is only approximately that function, so compare against the model itself.
        let tail = TailModel::Algebraic { exponent: 2.0, log_power: 0.0, log_scale: 1.0, r_anchor: 20.0, value_anchor: 0.5 };
        match tail_integral(&tail, 1, 2.0, false) {
            TailPart::Finite(x) => assert!((x - 0.25 * 20.0 / 3.0).abs() < 1e-14),
            TailPart::Divergent => panic!(),
        }
        let log_tail = TailModel::Algebraic { exponent: 2.0, log_power: 1.0, log_scale: 1.0, r_anchor: 20.0, value_anchor: 0.5 };
        // N = 4, m = 2: a = 0, b = 2 → φ_a² r_a⁴ ln(r_a)/(b − 1).
        match tail_integral(&log_tail, 4, 2.0, false) {
            TailPart::Finite(x) => assert!((x - 0.25 * 20f64.powi(4) * 20f64.ln()).abs() < 1e-9 * x),
            TailPart::Divergent => panic!(),
        }
        let slow = TailModel::Algebraic { exponent: 1.0, log_power: 0.0, log_scale: 1.0, r_anchor: 20.0, value_anchor: 0.05 };
        assert!(matches!(tail_integral(&slow, 3, 2.0, false), TailPart::Divergent));
    }

    #[test]
    fn log_tail_numeric_matches_substitution() {
        // ∫_{r_a}^∞ r^{-3} (ln r / ln r_a)^{-1} dr compared against a fine sum.
        let tail = TailModel::Algebraic { exponent: 1.0, log_power: 0.5, log_scale: 1.0, r_anchor: 5.0, value_anchor: 1.0 };
        let got = match tail_integral(&tail, 1, 2.0, false) {
            TailPart::Finite(x) => x,
            TailPart::Divergent => panic!(),
        };
        let la = 5f64.ln();
        let f = |r: f64| (r / 5.0).powi(-2) * (r.ln() / la).powf(-1.0);
        let reference = integrate_to_infinity(f, 5.0, 0.5);
        assert!(((got - reference) / reference).abs() < 1e-10);
    }

    #[test]
    fn identities_hold_on_arbitrary_profiles() {
        let m = params(2, 2.0, 3.5, 0.3);
        let (norms, _) = compute_norms(&gaussian(2), &m, NormPolicy::Strict).unwrap();
        for a in [0.3, 1.0, 2.7] {
            let nm = norms.amplitude_scaled(a, &m);
            let rep = FunctionalReport::from_norms(nm, &m, false);
            let (p, q) = (m.p, m.q);
            assert!((rep.action - rep.nehari / (q + 1.0) - rep.j).abs() <= 1e-12 * (rep.action.abs() + 1.0));
            let alt = rep.nehari / 2.0 - (p - 1.0) / (2.0 * (p + 1.0)) * nm.lp1 + (q - 1.0) / (2.0 * (q + 1.0)) * nm.lq1;
            assert!((rep.action - alt).abs() <= 1e-12 * (rep.action.abs() + 1.0));
        }
    }

    #[test]
    fn ground_state_pohozaev_and_rescalings() {
        let m = params(1, 3.0, 5.0, 0.1);
        let prof = solve_ground_state(&m, &ShootingConfig::default()).unwrap();
        let rep = compute_report(&prof, &m).unwrap();
        assert!(rep.pohozaev_residual_k.abs() < 1e-6, "{rep:?}");
        assert!(rep.pohozaev_residual_p.abs() < 1e-6, "{rep:?}");
        let twice = FunctionalReport::from_norms(rep.norms.amplitude_scaled(2.0, &m), &m, false);
        assert!(twice.nehari < 0.0);
        assert!((nehari_rescale(&rep, &m).unwrap() - 1.0).abs() < 1e-8);
        assert!(nehari_rescale(&twice, &m).unwrap() < 1.0);
        let half = FunctionalReport::from_norms(rep.norms.amplitude_scaled(0.5, &m), &m, false);
        assert!(nehari_rescale(&half, &m).unwrap() > 1.0);
    }

    #[test]
    fn virial_root_examples() {
        let m = params(1, 2.0, 6.0, 1.0);
        let prof = solve_ground_state(&m, &ShootingConfig::default()).unwrap();
        let rep = compute_report(&prof, &m).unwrap();
        assert!((virial_scaling_root(&rep, &m).unwrap() - 1.0).abs() < 1e-8);
        let big = FunctionalReport::from_norms(rep.norms.amplitude_scaled(1.1, &m), &m, false);
        let l0 = virial_scaling_root(&big, &m).unwrap();
        assert!(big.norms.l2_scaled(l0, &m).nehari(&m).abs() < 1e-9 * big.norms.grad_l2_sq);

        let crit = params(1, 2.0, 5.0, 1.0);
        let prof = solve_ground_state(&crit, &ShootingConfig::default()).unwrap();
        let rep = compute_report(&prof, &crit).unwrap();
        let small = FunctionalReport::from_norms(rep.norms.amplitude_scaled(0.5, &crit), &crit, false);
        assert!(small.virial > 0.0);
        assert!(matches!(virial_scaling_root(&small, &crit), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn divergent_l2_is_flagged_or_rejected() {
        // N = 1, p = 5.5 > 1 + 4/N: φ_0 ~ r^{-0.44} has infinite mass.
        let m = params(1, 5.5, 7.0, 0.0);
        let prof = solve_ground_state(&m, &ShootingConfig::default()).unwrap();
        let rep = compute_report(&prof, &m).unwrap();
        assert!(rep.l2_divergent);
        assert!(rep.pohozaev_residual_p.abs() < 1e-6);
        assert!(matches!(
            compute_report_with(&prof, &m, NormPolicy::Strict),
            Err(Error::DivergentNorm(_))
        ));
    }

    #[test]
    fn d_curve_examples() {
        let cfg = ShootingConfig::default();
        let c = d_curve(&[0.0], &params(1, 2.0, 4.0, 0.0), &cfg).unwrap();
        assert!(c.all_positive && c.points[0].d.unwrap() > 0.0);
        let c = d_curve(&[0.0, 0.5, 1.0], &params(1, 2.0, 4.0, 0.0), &cfg).unwrap();
        assert!(c.strictly_increasing);
        let c = d_curve(&[0.2, 0.2], &params(1, 2.0, 4.0, 0.0), &cfg).unwrap();
        assert_eq!(c.points[0].d, c.points[1].d);
        assert!(d_curve(&[0.5, 0.1], &params(1, 2.0, 4.0, 0.0), &cfg).is_err());
    }

    #[test]
    fn strauss_constant_one_fails_in_one_dimension() {
        // u = e^{-|x|}, p = 2: sup|u| = 1, ‖u‖_3^3 = 2/3, ‖u'‖² = 1.
        let r: Vec<f64> = (0..=8000).map(|i| i as f64 * 0.005).collect();
        let v: Vec<f64> = r.iter().map(|x| (-x).exp()).collect();
        let d: Vec<f64> = v.iter().map(|y| -y).collect();
        let tail = TailModel::Exponential { rate: 1.0, power: 0.0, r_anchor: 40.0, value_anchor: (-40f64).exp() };
        let prof = RadialProfile::from_samples(params(1, 2.0, 3.0, 1.0), r, v, d, tail).unwrap();
        let rep = compute_report(&prof, &params(1, 2.0, 3.0, 1.0)).unwrap();
        assert!((rep.norms.lp1 - 2.0 / 3.0).abs() < 1e-9);
        assert!(strauss_bound_check(&prof, &rep) < -0.05);
        let c = strauss_proof_constant(1, 2.0);
        assert!(strauss_margin_with_constant(&prof, &rep, c) >= 0.0);
    }

    #[test]
    fn strauss_examples() {
        let cfg = ShootingConfig::default();
        for m in [params(1, 2.0, 3.0, 0.5), params(3, 2.0, 3.0, 0.1)] {
            let prof = solve_ground_state(&m, &cfg).unwrap();
            let rep = compute_report(&prof, &m).unwrap();
            let c = strauss_proof_constant(m.dim, m.p).max(1.0);
            let margin = strauss_margin_with_constant(&prof, &rep, c);
            assert!(margin >= -1e-8, "{margin}");
            let tripled = prof.scaled_amplitude(3.0);
            let rep3 = compute_report(&tripled, &m).unwrap();
            let margin3 = strauss_margin_with_constant(&tripled, &rep3, c);
            assert!((margin3 - 3.0 * margin).abs() < 1e-8 * margin.abs().max(1.0));
        }
    }
}
