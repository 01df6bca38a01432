//! Far-field decay fits and the zero-frequency limit φ_ω → φ_0.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::compute_report;
use crate::groundstate::{solve_ground_state, RadialProfile, ShootingConfig};
use crate::model::{expected_decay, l2_membership, ModelParams, TailLaw};
use crate::quadrature::{integrate_to_infinity, simpson, sphere_area};

/// Relative spread allowed for the local exponent `−rφ'/φ` over a decade.
pub const STABILIZATION_TOL: f64 = 0.01;
const MIN_WINDOW_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayKind {
    Algebraic,
    Exponential,
}

/// Fitted far-field law of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub kind: DecayKind,
    /// ρ̂ for algebraic decay; for exponential decay the fitted rate κ̂.
    pub fitted_exponent: f64,
    pub fitted_log_power: f64,
    pub coefficient: f64,
    pub fit_window: [f64; 2],
    pub residual_rms: f64,
    /// Law predicted for ω = 0 profiles.
    pub theory: Option<TailLaw>,
    /// √ω for ω > 0 profiles.
    pub expected_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PowerFit {
    pub exponent: f64,
    pub log_power: f64,
    pub log_coeff: f64,
    pub rms: f64,
}

/// Least squares for `ln φ = a − ρ ln r − λ ln ln r`. The log regressor is
/// used only when `law.log_power > 0`, with λ confined to ±50% of it.
fn regress_power(r: &[f64], v: &[f64], law: &TailLaw) -> PowerFit {
    let x: Vec<f64> = r.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = v.iter().map(|t| t.ln()).collect();
    let line = |y: &[f64]| {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = sxy / sxx;
        (my - slope * mx, slope)
    };
    let rms_of = |a: f64, rho: f64, lam: f64| {
        let s: f64 = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| {
                let e = yi - (a - rho * xi - lam * xi.ln());
                e * e
            })
            .sum();
        (s / x.len() as f64).sqrt()
    };
    if law.log_power <= 0.0 {
        let (a, slope) = line(&y);
        return PowerFit { exponent: -slope, log_power: 0.0, log_coeff: a, rms: rms_of(a, -slope, 0.0) };
    }
    // Two regressors: solve the 3×3 normal equations.
    let cols: [Vec<f64>; 3] = [vec![1.0; x.len()], x.clone(), x.iter().map(|t| -t.ln()).collect()];
    let mut m = [[0.0; 4]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
        }
        m[i][3] = cols[i].iter().zip(&y).map(|(a, b)| a * b).sum();
    }
    let sol = solve3(m);
    let (a, slope, lam) = (sol[0], sol[1], sol[2]);
    let (lo, hi) = (0.5 * law.log_power, 1.5 * law.log_power);
    if lam >= lo && lam <= hi {
        return PowerFit { exponent: -slope, log_power: lam, log_coeff: a, rms: rms_of(a, -slope, lam) };
    }
    let lam = lam.clamp(lo, hi);
    let shifted: Vec<f64> = y.iter().zip(&x).map(|(yi, xi)| yi + lam * xi.ln()).collect();
    let (a, slope) = line(&shifted);
    PowerFit { exponent: -slope, log_power: lam, log_coeff: a, rms: rms_of(a, -slope, lam) }
}

fn solve3(mut m: [[f64; 4]; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        m.swap(col, piv);
        for row in 0..3 {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..4 {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    [m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]]
}

/// Whether the local exponent is stable over the index range.
fn stabilized(r: &[f64], v: &[f64], d: &[f64]) -> bool {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..r.len() {
        let k = -r[i] * d[i] / v[i];
        lo = lo.min(k);
        hi = hi.max(k);
    }
    lo > 0.0 && (hi - lo) <= STABILIZATION_TOL * lo
}

/// Fit over the last decade of the grid, if the local exponent has settled there.
pub(crate) fn fit_last_decade(r: &[f64], v: &[f64], d: &[f64], law: &TailLaw) -> Option<PowerFit> {
    let rb = *r.last()?;
    let start = r.partition_point(|&x| x < rb / 10.0);
    if rb / 10.0 < r[0] || r.len() - start < MIN_WINDOW_POINTS || (law.log_power > 0.0 && rb / 10.0 <= std::f64::consts::E) {
        return None;
    }
    let (rw, vw, dw) = (&r[start..], &v[start..], &d[start..]);
    stabilized(rw, vw, dw).then(|| regress_power(rw, vw, law))
}

/// Fits the far-field decay of a profile.
///
/// ω = 0: power law (with a log factor at p = p*) on the outermost decade
/// of the grid where the local exponent is stable. ω > 0: exponential rate
/// from `ln(r^{(N−1)/2} φ)` against r on the outer 40% of the grid.
pub fn fit_tail(profile: &RadialProfile) -> Result<DecayFit> {
    let mut r = profile.r_grid.clone();
    let mut v = profile.values.clone();
    let mut d = profile.derivs.clone();
    for &[x, y, z] in &profile.far_field {
        r.push(x);
        v.push(y);
        d.push(z);
    }
    let rb = *r.last().unwrap();
    if profile.params.omega > 0.0 {
        let start = r.partition_point(|&x| x < 0.6 * rb);
        if r.len() - start < MIN_WINDOW_POINTS {
            return Err(Error::WindowNotFound("too few points in the outer window".into()));
        }
        let pw = (profile.params.n() - 1.0) / 2.0;
        let xs = &r[start..];
        let ys: Vec<f64> = xs.iter().zip(&v[start..]).map(|(x, y)| y.ln() + pw * x.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|a| (a - mx) * (a - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = sxy / sxx;
        let icpt = my - slope * mx;
        let rms = (xs.iter().zip(&ys).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum::<f64>() / n).sqrt();
        return Ok(DecayFit {
            kind: DecayKind::Exponential,
            fitted_exponent: -slope,
            fitted_log_power: 0.0,
            coefficient: icpt.exp(),
            fit_window: [xs[0], rb],
            residual_rms: rms,
            theory: None,
            expected_rate: Some(profile.params.omega.sqrt()),
        });
    }

    let law = expected_decay(&profile.params)?;
    let min_r = if law.log_power > 0.0 { std::f64::consts::E } else { 0.0 };
    // Scan windows [r_b/10, r_b] from the outside in.
    let mut end = r.len();
    while end > MIN_WINDOW_POINTS {
        let rb = r[end - 1];
        if rb / 10.0 <= min_r.max(r[0]) || rb <= 0.0 {
            break;
        }
        let start = r.partition_point(|&x| x < rb / 10.0);
        if end - start >= MIN_WINDOW_POINTS && stabilized(&r[start..end], &v[start..end], &d[start..end]) {
            let fit = regress_power(&r[start..end], &v[start..end], &law);
            return Ok(DecayFit {
                kind: DecayKind::Algebraic,
                fitted_exponent: fit.exponent,
                fitted_log_power: fit.log_power,
                coefficient: fit.log_coeff.exp(),
                fit_window: [r[start], rb],
                residual_rms: fit.rms,
                theory: Some(law),
                expected_rate: None,
            });
        }
        end -= 1;
    }
    Err(Error::WindowNotFound(format!(
        "local exponent never stable within {}% over a decade",
        STABILIZATION_TOL * 100.0
    )))
}

/// Window over which `r^ρ φ_ω(r)` is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundWindow {
    pub r_lo: f64,
    pub r_hi: f64,
    pub samples: usize,
}

impl Default for BoundWindow {
    fn default() -> Self {
        BoundWindow { r_lo: 50.0, r_hi: 500.0, samples: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformBound {
    pub c_hat: f64,
    /// (ω, sup over the window of r^ρ φ_ω(r)).
    pub per_omega: Vec<(f64, f64)>,
    pub window: BoundWindow,
}

/// Largest value of `r^ρ φ_ω(r)` over the window and the frequency grid.
pub fn uniform_bound_check(
    template: &ModelParams,
    omega_grid: &[f64],
    cfg: &ShootingConfig,
    window: &BoundWindow,
) -> Result<UniformBound> {
    if omega_grid.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
        return Err(Error::InvalidParams("omega grid must lie in [0, 1]".into()));
    }
    if !(window.r_lo > 0.0 && window.r_hi > window.r_lo && window.samples >= 2) {
        return Err(Error::InvalidParams("bound window must satisfy 0 < r_lo < r_hi".into()));
    }
    let rho = template.rho();
    let per_omega: Vec<(f64, f64)> = omega_grid
        .par_iter()
        .map(|&omega| {
            let prof = solve_ground_state(&template.with_omega(omega), cfg)?;
            let (la, lb) = (window.r_lo.ln(), window.r_hi.ln());
            let sup = (0..window.samples)
                .map(|i| {
                    let r = (la + (lb - la) * i as f64 / (window.samples - 1) as f64).exp();
                    r.powf(rho) * prof.evaluate(r)
                })
                .fold(0.0, f64::max);
            Ok((omega, sup))
        })
        .collect::<Result<_>>()?;
    let c_hat = per_omega.iter().map(|x| x.1).fold(0.0, f64::max);
    Ok(UniformBound { c_hat, per_omega, window: *window })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub omega: f64,
    pub delta_h1dot: Option<f64>,
    pub delta_lp1: Option<f64>,
    pub delta_l2: Option<f64>,
    pub d_gap: Option<f64>,
    pub mass_times_omega: Option<f64>,
    /// |K_0(φ_ω) + ω‖φ_ω‖²| / ‖∇φ_ω‖².
    pub k0_identity_residual: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitStudy {
    pub rows: Vec<LimitRow>,
    pub d_zero: f64,
    pub deltas_nonincreasing: bool,
    pub d_gap_decreasing: bool,
    pub mass_times_omega_decreasing: bool,
    pub final_below_tolerance: bool,
    pub identity_holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimitConfig {
    /// Bound on the last ‖∇(φ_ω − φ_0)‖ and ‖φ_ω − φ_0‖_{p+1}.
    pub final_tolerance: f64,
    /// Relative slack in the monotonicity checks.
    pub monotone_slack: f64,
    pub identity_tolerance: f64,
}

impl Default for LimitConfig {
    fn default() -> Self {
        LimitConfig { final_tolerance: 0.05, monotone_slack: 0.05, identity_tolerance: 1e-6 }
    }
}

/// Union of two grids, thinned so neighbouring nodes are not nearly coincident.
fn union_grid(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(|x, y| x.total_cmp(y));
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for r in all {
        match out.last() {
            Some(&last) if r - last < 1e-3 * r.max(0.01) => {}
            _ => out.push(r),
        }
    }
    out
}

/// (‖∇(u − v)‖², ‖u − v‖_{m}^{m} for each requested m) of two radial profiles.
fn difference_norms(u: &RadialProfile, v: &RadialProfile, powers: &[f64]) -> (f64, Vec<f64>) {
    let dim = u.params.dim;
    let n = u.params.n();
    let area = sphere_area(dim);
    let grid = union_grid(&u.r_grid, &v.r_grid);
    let w = |r: f64| if dim == 1 { 1.0 } else { r.powf(n - 1.0) };
    let du: Vec<f64> = grid.iter().map(|&r| (u.evaluate(r) - v.evaluate(r)).abs()).collect();
    let dd: Vec<f64> = grid.iter().map(|&r| u.evaluate_deriv(r) - v.evaluate_deriv(r)).collect();
    let rmax = *grid.last().unwrap();
    let grad_grid = simpson(&grid, &grid.iter().zip(&dd).map(|(&r, d)| d * d * w(r)).collect::<Vec<_>>());
    let grad_tail = integrate_to_infinity(
        |r| {
            let d = u.evaluate_deriv(r) - v.evaluate_deriv(r);
            d * d * w(r)
        },
        rmax,
        rmax,
    );
    let others = powers
        .iter()
        .map(|&m| {
            let g = simpson(&grid, &grid.iter().zip(&du).map(|(&r, d)| d.powf(m) * w(r)).collect::<Vec<_>>());
            let t = integrate_to_infinity(|r| (u.evaluate(r) - v.evaluate(r)).abs().powf(m) * w(r), rmax, rmax);
            area * (g + t)
        })
        .collect();
    (area * (grad_grid + grad_tail), others)
}

fn nonincreasing(xs: &[f64], slack: f64) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0] * (1.0 + slack))
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

/// Compares φ_ω with φ_0 along a decreasing frequency sequence.
pub fn zero_mass_limit_study(
    template: &ModelParams,
    omega_sequence: &[f64],
    cfg: &ShootingConfig,
    limit: &LimitConfig,
) -> Result<LimitStudy> {
    if omega_sequence.is_empty() {
        return Err(Error::InvalidParams("omega sequence is empty".into()));
    }
    if omega_sequence.windows(2).any(|w| !(w[1] < w[0])) || omega_sequence.iter().any(|&w| w < 1e-4) {
        return Err(Error::InvalidParams(
            "omega sequence must decrease strictly and stay >= 1e-4".into(),
        ));
    }
    let p0 = template.with_omega(0.0);
    let phi0 = solve_ground_state(&p0, cfg)?;
    let rep0 = compute_report(&phi0, &p0)?;
    let d_zero = rep0.action;
    let with_l2 = l2_membership(template.dim, template.p);

    let rows: Vec<LimitRow> = omega_sequence
        .par_iter()
        .map(|&omega| {
            let pw = template.with_omega(omega);
            let run = || -> Result<LimitRow> {
                let prof = solve_ground_state(&pw, cfg)?;
                let rep = compute_report(&prof, &pw)?;
                let k0 = compute_report(&prof, &p0)?.nehari;
                let mass = rep.norms.l2_sq;
                let mut powers = vec![pw.p + 1.0];
                if with_l2 {
                    powers.push(2.0);
                }
                let (grad, others) = difference_norms(&prof, &phi0, &powers);
                Ok(LimitRow {
                    omega,
                    delta_h1dot: Some(grad.sqrt()),
                    delta_lp1: Some(others[0].powf(1.0 / (pw.p + 1.0))),
                    delta_l2: with_l2.then(|| others[1].sqrt()),
                    d_gap: Some(rep.action - d_zero),
                    mass_times_omega: Some(omega * mass),
                    k0_identity_residual: Some((k0 + omega * mass).abs() / rep.norms.grad_l2_sq),
                    status: "ok".into(),
                })
            };
            run().unwrap_or_else(|e| LimitRow {
                omega,
                delta_h1dot: None,
                delta_lp1: None,
                delta_l2: None,
                d_gap: None,
                mass_times_omega: None,
                k0_identity_residual: None,
                status: format!("failed: {e}"),
            })
        })
        .collect();

    let col = |f: &dyn Fn(&LimitRow) -> Option<f64>| rows.iter().filter_map(f).collect::<Vec<f64>>();
    let h1 = col(&|r| r.delta_h1dot);
    let lp = col(&|r| r.delta_lp1);
    let l2 = col(&|r| r.delta_l2);
    let gaps = col(&|r| r.d_gap);
    let mw = col(&|r| r.mass_times_omega);
    let ids = col(&|r| r.k0_identity_residual);
    let slack = limit.monotone_slack;
    Ok(LimitStudy {
        d_zero,
        deltas_nonincreasing: nonincreasing(&h1, slack) && nonincreasing(&lp, slack) && nonincreasing(&l2, slack),
        d_gap_decreasing: strictly_decreasing(&gaps) && gaps.iter().all(|&g| g > 0.0),
        mass_times_omega_decreasing: strictly_decreasing(&mw),
        final_below_tolerance: matches!((h1.last(), lp.last()), (Some(&a), Some(&b))
            if a < limit.final_tolerance && b < limit.final_tolerance),
        identity_holds: ids.iter().all(|&x| x <= limit.identity_tolerance),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groundstate::TailModel;

    fn params(n: u32, p: f64, q: f64, w: f64) -> ModelParams {
        ModelParams::new(n, p, q, w).unwrap()
    }

    fn synthetic(exponent: f64) -> RadialProfile {
        let r: Vec<f64> = (0..=3000).map(|i| if i == 0 { 0.0 } else { 1e-2 * 10f64.powf(i as f64 / 600.0) }).collect();
        let v: Vec<f64> = r.iter().map(|x| (1.0 + x * x).powf(-exponent / 2.0)).collect();
        let d: Vec<f64> = r.iter().map(|x| -exponent * x * (1.0 + x * x).powf(-exponent / 2.0 - 1.0)).collect();
        RadialProfile::from_samples(params(1, 3.0, 5.0, 0.0), r, v, d, TailModel::Truncated).unwrap()
    }

    #[test]
    fn synthetic_power_law_exponent() {
        let fit = fit_tail(&synthetic(2.0)).unwrap();
        assert!((fit.fitted_exponent - 2.0).abs() < 0.02);
        assert!(fit.fit_window[0] < fit.fit_window[1]);
        assert!(fit.residual_rms >= 0.0);
        let fit = fit_tail(&synthetic(0.7)).unwrap();
        assert!((fit.fitted_exponent - 0.7).abs() < 0.007);
    }

    #[test]
    fn log_corrected_regression_recovers_log_power() {
        let r: Vec<f64> = (0..400).map(|i| 10f64.powf(1.0 + 2.0 * i as f64 / 399.0)).collect();
        let v: Vec<f64> = r.iter().map(|x| 3.0 * x.powf(-2.0) * x.ln().powf(-1.0)).collect();
        let fit = regress_power(&r, &v, &TailLaw { exponent: 2.0, log_power: 1.0 });
        assert!((fit.exponent - 2.0).abs() < 1e-8);
        assert!((fit.log_power - 1.0).abs() < 1e-6);
        assert!((fit.log_coeff.exp() - 3.0).abs() < 1e-6);
    }

    #[test]
    fn unstable_window_reported() {
        let r: Vec<f64> = (0..200).map(|i| 1.0 + i as f64 * 0.05).collect();
        let v: Vec<f64> = r.iter().map(|x| (-x).exp()).collect();
        let d: Vec<f64> = v.iter().map(|y| -y).collect();
        let prof = RadialProfile::from_samples(params(1, 3.0, 5.0, 0.0), r, v, d, TailModel::Truncated).unwrap();
        assert!(matches!(fit_tail(&prof), Err(Error::WindowNotFound(_))));
    }

    #[test]
    fn ground_state_decay_fits() {
        let cfg = ShootingConfig::default();
        let prof = solve_ground_state(&params(1, 3.0, 5.0, 0.0), &cfg).unwrap();
        let fit = fit_tail(&prof).unwrap();
        assert!((fit.fitted_exponent - 1.0).abs() < 0.02, "{fit:?}");
        let prof = solve_ground_state(&params(1, 2.0, 3.0, 0.25), &cfg).unwrap();
        let fit = fit_tail(&prof).unwrap();
        assert!((fit.fitted_exponent - 0.5).abs() < 0.01, "{fit:?}");
    }

    #[test]
    fn uniform_bound_examples() {
        let cfg = ShootingConfig::default();
        let m = params(1, 3.0, 5.0, 0.0);
        let w = BoundWindow::default();
        let single = uniform_bound_check(&m, &[0.0], &cfg, &w).unwrap();
        let c = solve_ground_state(&m, &cfg).unwrap().tail.coefficient().unwrap();
        assert!((single.c_hat - c).abs() < 1e-6 * c);
        let full = uniform_bound_check(&m, &[0.0, 0.5, 1.0], &cfg, &w).unwrap();
        assert!(full.c_hat.is_finite());
        assert!(full.per_omega.windows(2).all(|p| p[1].1 <= p[0].1));
        let one = uniform_bound_check(&m, &[1.0], &cfg, &w).unwrap();
        assert!(one.c_hat <= full.c_hat);
        let fine = uniform_bound_check(&m, &[0.0, 0.5, 1.0], &cfg, &BoundWindow { samples: 800, ..w }).unwrap();
        assert!((fine.c_hat - full.c_hat).abs() <= 0.05 * full.c_hat);
    }

    #[test]
    fn limit_study_rejects_bad_sequences() {
        let cfg = ShootingConfig::default();
        let m = params(1, 3.0, 5.0, 0.0);
        let lc = LimitConfig::default();
        assert!(zero_mass_limit_study(&m, &[0.1, 0.5], &cfg, &lc).is_err());
        assert!(zero_mass_limit_study(&m, &[1e-5], &cfg, &lc).is_err());
        assert!(zero_mass_limit_study(&m, &[], &cfg, &lc).is_err());
    }

    #[test]
    fn limit_study_single_row() {
        let cfg = ShootingConfig::default();
        let study = zero_mass_limit_study(&params(1, 2.0, 3.0, 0.0), &[0.1], &cfg, &LimitConfig::default()).unwrap();
        assert_eq!(study.rows.len(), 1);
        assert!(study.rows[0].delta_l2.is_some());
        assert!(study.rows[0].k0_identity_residual.unwrap() < 1e-6);
    }
}
