//! Scaling-based instability tests: the action along `v^λ = λ^{N/2} v(λ·)`,
//! its second derivative at λ = 1, the sign comparison with γ_N(p) at ω = 0,
//! and membership in the blowup set B_ω = {S_ω < μ(ω), P < 0}.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{compute_norms, FunctionalReport, NormPolicy, Norms};
use crate::groundstate::{solve_ground_state, RadialProfile, ShootingConfig};
use crate::model::{gamma_curve, ModelParams};

/// Half-width of the near-degenerate band |q − γ_N(p)| in sign sweeps.
pub const DEGENERATE_BAND: f64 = 0.02;
/// Relative agreement required between closed form and finite differences.
pub const FD_AGREEMENT: f64 = 1e-4;
/// Indeterminate band for the second derivative, relative to ‖∇φ‖².
pub const SECOND_DERIV_BAND: f64 = 1e-6;

const FD_STEP: f64 = 1e-3;

/// `S_ω(v^λ)` from the norms of `v`.
pub fn scaled_action(norms: &Norms, params: &ModelParams, lambda: f64) -> f64 {
    norms.l2_scaled(lambda, params).action(params)
}

/// Fourth-order central differences of `f` at 1: (first, second).
fn central_differences(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let h = FD_STEP;
    let (m2, m1, z, p1, p2) = (f(1.0 - 2.0 * h), f(1.0 - h), f(1.0), f(1.0 + h), f(1.0 + 2.0 * h));
    let first = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
    let second = (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2) / (12.0 * h * h);
    (first, second)
}

/// `∂²_λ S_ω(v^λ)` at λ = 1 read directly off the norms. The mass term is
/// λ-independent, so the same expression holds for every ω.
pub fn direct_second_derivative(norms: &Norms, params: &ModelParams) -> f64 {
    let (a, b) = (params.alpha(), params.beta());
    norms.grad_l2_sq + a * (a - 1.0) / (params.p + 1.0) * norms.lp1
        - b * (b - 1.0) / (params.q + 1.0) * norms.lq1
}

/// The ω = 0 second derivative with both L^r norms eliminated through the
/// Pohozaev identities K_0 = P = 0. Only ‖∇φ‖² enters.
pub fn pohozaev_second_derivative(grad_l2_sq: f64, params: &ModelParams) -> f64 {
    let (p, q) = (params.p, params.q);
    let (a, b) = (params.alpha(), params.beta());
    let ap = a / (p + 1.0);
    let bq = b / (q + 1.0);
    let inv = 1.0 / (bq - ap);
    grad_l2_sq
        * (1.0 + a * (a - 1.0) / (p + 1.0) * inv * (1.0 - bq) - b * (b - 1.0) / (q + 1.0) * inv * (1.0 - ap))
}

/// Second derivative used by the criterion: the Pohozaev-eliminated form at
/// ω = 0, the direct form otherwise.
pub fn closed_form_second_derivative(norms: &Norms, params: &ModelParams) -> f64 {
    if params.omega == 0.0 {
        pohozaev_second_derivative(norms.grad_l2_sq, params)
    } else {
        direct_second_derivative(norms, params)
    }
}

/// The action along the L²-invariant scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCurve {
    pub lambda_grid: Vec<f64>,
    pub s_values: Vec<f64>,
    pub first_deriv_at_1: f64,
    /// Fourth-order central difference.
    pub second_deriv_at_1: f64,
    pub closed_form_second_deriv: f64,
    pub virial: f64,
    pub grad_l2_sq: f64,
}

pub fn scaling_curve_from_norms(norms: &Norms, params: &ModelParams, lambda_grid: &[f64]) -> ScalingCurve {
    let s_values = lambda_grid.iter().map(|&l| scaled_action(norms, params, l)).collect();
    let (first, second) = central_differences(|l| scaled_action(norms, params, l));
    ScalingCurve {
        lambda_grid: lambda_grid.to_vec(),
        s_values,
        first_deriv_at_1: first,
        second_deriv_at_1: second,
        closed_form_second_deriv: closed_form_second_derivative(norms, params),
        virial: norms.virial(params),
        grad_l2_sq: norms.grad_l2_sq,
    }
}

/// Scaling curve of a profile. Divergent L² norms (zero-frequency states
/// without L² decay) are harmless here since ω = 0 drops the mass term.
pub fn scaling_curve(profile: &RadialProfile, params: &ModelParams, lambda_grid: &[f64]) -> Result<ScalingCurve> {
    let (norms, _) = compute_norms(profile, params, NormPolicy::Truncate)?;
    Ok(scaling_curve_from_norms(&norms, params, lambda_grid))
}

/// Second derivative at λ = 1 with its cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondDerivative {
    pub closed_form: f64,
    pub finite_difference: f64,
    pub relative_disagreement: f64,
    pub band: f64,
}

impl SecondDerivative {
    pub fn from_norms(norms: &Norms, params: &ModelParams) -> Self {
        let closed_form = closed_form_second_derivative(norms, params);
        let (_, fd) = central_differences(|l| scaled_action(norms, params, l));
        let scale = closed_form.abs().max(fd.abs());
        let relative_disagreement = if scale > 0.0 { (closed_form - fd).abs() / scale } else { 0.0 };
        SecondDerivative {
            closed_form,
            finite_difference: fd,
            relative_disagreement,
            band: SECOND_DERIV_BAND * norms.grad_l2_sq,
        }
    }

    /// `Some(true)` when the value is decidably negative, `Some(false)` when
    /// decidably positive, `None` inside the band or without agreement.
    pub fn decided_negative(&self) -> Option<bool> {
        if self.closed_form.abs() < self.band || self.relative_disagreement > FD_AGREEMENT {
            None
        } else {
            Some(self.closed_form < 0.0)
        }
    }
}

/// Whether the ground state satisfies the sufficient instability condition
/// `∂²_λ S_ω(φ^λ)|_{λ=1} < 0`. `false` means "criterion not met", which says
/// nothing about stability.
pub fn instability_criterion(profile: &RadialProfile, params: &ModelParams) -> Result<bool> {
    let (norms, _) = compute_norms(profile, params, NormPolicy::Truncate)?;
    let sd = SecondDerivative::from_norms(&norms, params);
    sd.decided_negative().ok_or_else(|| {
        Error::Indeterminate(format!(
            "second derivative {:.3e} (finite difference {:.3e}) is not resolved: band {:.1e}, disagreement {:.1e}",
            sd.closed_form, sd.finite_difference, sd.band, sd.relative_disagreement
        ))
    })
}

/// One (p, q) pair of a sign sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub q: f64,
    pub gamma: Option<f64>,
    pub sign_closed_form: Option<i8>,
    pub sign_gamma_test: Option<i8>,
    pub agreement: Option<bool>,
    pub near_degenerate: bool,
    pub fd_relative_disagreement: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub dim: u32,
    pub rows: Vec<SweepRow>,
    /// Rows outside the near-degenerate band with a computed sign.
    pub decided: usize,
    pub agreeing: usize,
    pub near_degenerate: usize,
    pub failures: usize,
}

impl SweepTable {
    pub fn full_agreement(&self) -> bool {
        self.agreeing == self.decided
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn sweep_row(dim: u32, p: f64, q: f64, cfg: &ShootingConfig) -> SweepRow {
    let gamma = gamma_curve(dim, p).ok();
    let near_degenerate = gamma.map_or(false, |g| (q - g).abs() < DEGENERATE_BAND);
    let mut row = SweepRow {
        p,
        q,
        gamma,
        sign_closed_form: None,
        sign_gamma_test: gamma.map(|g| sign(g - q)),
        agreement: None,
        near_degenerate,
        fd_relative_disagreement: None,
        status: "ok".into(),
    };
    let outcome = (|| -> Result<SecondDerivative> {
        let params = ModelParams::new(dim, p, q, 0.0)?;
        if params.q_at_least_mass_critical() {
            return Err(Error::Domain(format!("q = {q} is not below 1 + 4/N")));
        }
        let profile = solve_ground_state(&params, cfg)?;
        let (norms, _) = compute_norms(&profile, &params, NormPolicy::Truncate)?;
        Ok(SecondDerivative::from_norms(&norms, &params))
    })();
    match outcome {
        Ok(sd) => {
            row.sign_closed_form = Some(sign(sd.closed_form));
            row.fd_relative_disagreement = Some(sd.relative_disagreement);
            if !near_degenerate {
                row.agreement = match (row.sign_closed_form, row.sign_gamma_test) {
                    (Some(a), Some(b)) => Some(a == b && sd.relative_disagreement <= FD_AGREEMENT),
                    _ => None,
                };
            }
        }
        Err(e) => row.status = format!("{}: {e}", e.kind()),
    }
    row
}

/// Compares the sign of the ω = 0 second derivative with the sign of
/// γ_N(p) − q for every pair. Negative second derivative goes with q > γ_N(p).
pub fn sign_equivalence_sweep(dim: u32, pairs: &[(f64, f64)], cfg: &ShootingConfig) -> SweepTable {
    let rows: Vec<SweepRow> = pairs.par_iter().map(|&(p, q)| sweep_row(dim, p, q, cfg)).collect();
    let decided = rows.iter().filter(|r| r.agreement.is_some()).count();
    let agreeing = rows.iter().filter(|r| r.agreement == Some(true)).count();
    SweepTable {
        dim,
        near_degenerate: rows.iter().filter(|r| r.near_degenerate).count(),
        failures: rows.iter().filter(|r| r.status != "ok").count(),
        decided,
        agreeing,
        rows,
    }
}

/// Membership of a function in B_ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BOmegaVerdict {
    pub s_lt_mu: bool,
    pub p_negative: bool,
    pub member: bool,
    /// `[μ(ω) − S_ω(v), −P(v)]`.
    pub margins: [f64; 2],
}

pub fn b_omega_verdict(report: &FunctionalReport, mu_omega: f64) -> BOmegaVerdict {
    let s_margin = mu_omega - report.action;
    let p_margin = -report.virial;
    BOmegaVerdict {
        s_lt_mu: s_margin > 0.0,
        p_negative: p_margin > 0.0,
        member: s_margin > 0.0 && p_margin > 0.0,
        margins: [s_margin, p_margin],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::compute_report;
    use proptest::prelude::*;

    fn zero_mass(dim: u32, p: f64, q: f64) -> (ModelParams, RadialProfile) {
        let params = ModelParams::new(dim, p, q, 0.0).unwrap();
        let prof = solve_ground_state(&params, &ShootingConfig::default()).unwrap();
        (params, prof)
    }

    #[test]
    fn first_derivative_is_virial_and_vanishes_on_ground_state() {
        let params = ModelParams::new(1, 2.0, 3.0, 0.5).unwrap();
        let prof = solve_ground_state(&params, &ShootingConfig::default()).unwrap();
        let curve = scaling_curve(&prof, &params, &[0.9, 1.0, 1.1]).unwrap();
        assert!((curve.first_deriv_at_1 - curve.virial).abs() <= 1e-6 * (curve.virial.abs() + curve.grad_l2_sq));
        assert!(curve.first_deriv_at_1.abs() < 1e-6 * curve.grad_l2_sq);
    }

    #[test]
    fn zero_mass_second_derivative_signs() {
        let (params, prof) = zero_mass(1, 2.0, 4.8);
        let c = scaling_curve(&prof, &params, &[0.99, 1.0, 1.01]).unwrap();
        assert!(c.second_deriv_at_1 < 0.0 && c.closed_form_second_deriv < 0.0);
        assert!(instability_criterion(&prof, &params).unwrap());

        let (params, prof) = zero_mass(1, 2.0, 3.0);
        let c = scaling_curve(&prof, &params, &[0.99, 1.0, 1.01]).unwrap();
        assert!(c.second_deriv_at_1 > 0.0 && c.closed_form_second_deriv > 0.0);
        assert!(!instability_criterion(&prof, &params).unwrap());
    }

    #[test]
    fn two_dimensional_criterion() {
        let (params, prof) = zero_mass(2, 1.5, 2.6);
        assert!(instability_criterion(&prof, &params).unwrap());
    }

    #[test]
    fn pohozaev_form_matches_finite_difference() {
        for &(dim, p, q) in &[(1, 2.0, 4.8), (1, 3.0, 4.5), (3, 1.2, 2.0)] {
            let (params, prof) = zero_mass(dim, p, q);
            let (norms, _) = compute_norms(&prof, &params, NormPolicy::Truncate).unwrap();
            let sd = SecondDerivative::from_norms(&norms, &params);
            assert!(sd.relative_disagreement < FD_AGREEMENT, "{dim} {p} {q}: {sd:?}");
        }
    }

    #[test]
    fn norm_formula_matches_requadrature() {
        let params = ModelParams::new(1, 2.0, 4.0, 1.0).unwrap();
        let prof = solve_ground_state(&params, &ShootingConfig::default()).unwrap();
        let (norms, _) = compute_norms(&prof, &params, NormPolicy::Truncate).unwrap();
        for &l in &[0.5, 1.0, 2.0] {
            let (direct, _) = compute_norms(&prof.l2_scaled(l), &params, NormPolicy::Truncate).unwrap();
            let a = scaled_action(&norms, &params, l);
            let b = direct.action(&params);
            assert!((a - b).abs() < 1e-8 * b.abs(), "λ = {l}: {a} vs {b}");
        }
    }

    #[test]
    fn sweep_examples() {
        let cfg = ShootingConfig::default();
        let t = sign_equivalence_sweep(1, &[(2.0, 4.8), (2.0, 3.0), (3.0, 4.5)], &cfg);
        let signs: Vec<_> = t.rows.iter().map(|r| r.sign_closed_form).collect();
        assert_eq!(signs, vec![Some(-1), Some(1), Some(-1)]);
        assert_eq!((t.decided, t.agreeing), (3, 3));

        let t = sign_equivalence_sweep(2, &[(2.0, 2.0)], &cfg);
        assert!(t.rows[0].near_degenerate);
        assert_eq!(t.decided, 0);

        let t = sign_equivalence_sweep(1, &[], &cfg);
        assert!(t.rows.is_empty() && t.full_agreement());
    }

    #[test]
    fn b_omega_examples() {
        let params = ModelParams::new(1, 2.0, 6.0, 1.0).unwrap();
        let prof = solve_ground_state(&params, &ShootingConfig::default()).unwrap();
        let base = compute_report(&prof, &params).unwrap();
        let mu = base.action;
        assert!(!b_omega_verdict(&base, mu).member);
        let up = FunctionalReport::from_norms(base.norms.amplitude_scaled(1.2, &params), &params, false);
        let v = b_omega_verdict(&up, mu);
        assert!(v.member && v.s_lt_mu && v.p_negative);
        let down = FunctionalReport::from_norms(base.norms.amplitude_scaled(0.5, &params), &params, false);
        assert!(!b_omega_verdict(&down, mu).member);
    }

    #[test]
    fn virial_bound_on_scalings() {
        // P(v)/2 ≤ S_ω(v) − μ(ω) whenever P(v) ≤ 0.
        let params = ModelParams::new(1, 2.0, 6.0, 1.0).unwrap();
        let prof = solve_ground_state(&params, &ShootingConfig::default()).unwrap();
        let base = compute_report(&prof, &params).unwrap();
        let mu = base.action;
        for i in 0..40 {
            let l = 0.6 + 0.05 * i as f64;
            for n in [base.norms.l2_scaled(l, &params), base.norms.amplitude_scaled(l, &params)] {
                let p = n.virial(&params);
                if p <= 0.0 {
                    assert!(0.5 * p <= n.action(&params) - mu + 1e-8 * mu.abs(), "λ = {l}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn mass_is_invariant_under_l2_scaling(l in 0.1f64..10.0, m in 0.01f64..100.0) {
            let params = ModelParams::new(1, 2.0, 4.0, 0.3).unwrap();
            let n = Norms { l2_sq: m, grad_l2_sq: 1.0, lp1: 1.0, lq1: 1.0 };
            prop_assert_eq!(n.l2_scaled(l, &params).l2_sq, m);
        }

        #[test]
        fn closed_form_equals_direct_on_pohozaev_manifold(
            p in 1.1f64..2.9, dq in 0.05f64..2.0, g in 0.1f64..10.0,
        ) {
            // Build norms satisfying K_0 = P = 0 exactly and compare both forms.
            let q = (p + dq).min(4.95);
            prop_assume!(q > p + 0.01);
            let params = ModelParams::new(1, p, q, 0.0).unwrap();
            let (a, b) = (params.alpha(), params.beta());
            let (ap, bq) = (a / (p + 1.0), b / (q + 1.0));
            let lp1 = (1.0 - bq) * g / (bq - ap);
            let lq1 = (1.0 - ap) * g / (bq - ap);
            let n = Norms { l2_sq: 1.0, grad_l2_sq: g, lp1, lq1 };
            prop_assert!(n.nehari(&params).abs() < 1e-9 * g);
            let d = direct_second_derivative(&n, &params);
            let c = pohozaev_second_derivative(g, &params);
            prop_assert!((d - c).abs() < 1e-9 * g);
            // The sign matches the γ curve away from it.
            let gamma = gamma_curve(1, p).unwrap();
            if (q - gamma).abs() > 1e-6 {
                prop_assert_eq!(c < 0.0, q > gamma);
            }
        }
    }
}
