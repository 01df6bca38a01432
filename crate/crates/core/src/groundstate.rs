//! Radial ground states by shooting on
//! `φ'' + (N−1)/r φ' = ωφ + φ^p − φ^q`, `φ'(0) = 0`, `φ(∞) = 0`.
//!
//! The amplitude `s = φ(0)` is bisected between an undershooting trajectory
//! (φ' turns nonnegative while φ > 0) and an overshooting one (φ crosses
//! zero). The final bracket is then integrated in lockstep; the profile is
//! the midpoint of the pair up to the radius where the two separate, and an
//! analytic far-field tail takes over beyond it.

use serde::{Deserialize, Serialize};

use crate::asymptotics;
use crate::error::{Error, Result};
use crate::model::{expected_decay, ModelParams};
use crate::numerics::brent;
use crate::ode::{Dopri, OdeSystem, Tolerance};

/// Numerical settings for [`solve_ground_state`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootingConfig {
    /// Initial amplitude bracket; derived from the equilibrium amplitude when absent.
    pub bracket: Option<[f64; 2]>,
    pub atol: f64,
    pub rtol: f64,
    /// Hard cap on the integration radius; automatic when absent.
    pub r_max: Option<f64>,
    /// Radius cap used for ω = 0 when `r_max` is absent.
    pub zero_mass_r_cap: f64,
    /// Relative width of the final amplitude interval.
    pub bisection_tol: f64,
    /// Starting radius ε for N ≥ 2.
    pub origin_offset: f64,
    /// Relative separation of the bracketing pair at which the trusted grid
    /// ends. The pair is `s ± max(bracket half-width, rtol·s)`, so the
    /// stopping radius reflects integration error as well as bisection width.
    pub divergence_tol: f64,
    /// Separation at which the loose far-field continuation (used only for
    /// decay fits) ends.
    pub far_field_tol: f64,
    pub max_doublings: u32,
    /// Recorded grid spacing is at most `max(grid_spacing, grid_spacing·r)`.
    pub grid_spacing: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            bracket: None,
            atol: 1e-30,
            rtol: 1e-12,
            r_max: None,
            zero_mass_r_cap: 1e8,
            bisection_tol: 1e-14,
            origin_offset: 1e-6,
            divergence_tol: 1e-5,
            far_field_tol: 1e-3,
            max_doublings: 60,
            grid_spacing: 0.01,
        }
    }
}

impl ShootingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("atol", self.atol),
            ("rtol", self.rtol),
            ("zero_mass_r_cap", self.zero_mass_r_cap),
            ("bisection_tol", self.bisection_tol),
            ("origin_offset", self.origin_offset),
            ("divergence_tol", self.divergence_tol),
            ("far_field_tol", self.far_field_tol),
            ("grid_spacing", self.grid_spacing),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("shooting.{name} must be positive")));
            }
        }
        if let Some([lo, hi]) = self.bracket {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(Error::InvalidParams("shooting.bracket must satisfy 0 < lo < hi".into()));
            }
        }
        if self.far_field_tol < self.divergence_tol {
            return Err(Error::InvalidParams("shooting.far_field_tol must be >= divergence_tol".into()));
        }
        if let Some(r) = self.r_max {
            if !(r > 0.0) {
                return Err(Error::InvalidParams("shooting.r_max must be positive".into()));
            }
        }
        Ok(())
    }

    fn tolerance(&self) -> Tolerance {
        Tolerance { atol: self.atol, rtol: self.rtol }
    }
}

/// Far-field model valid beyond the last grid point, anchored so that it
/// matches the grid value there exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TailModel {
    /// `φ_a (r/r_a)^{−power} e^{−rate (r − r_a)}`.
    Exponential { rate: f64, power: f64, r_anchor: f64, value_anchor: f64 },
    /// `φ_a (r/r_a)^{−exponent} (ln(s r)/ln(s r_a))^{−log_power}` with `s = log_scale`.
    Algebraic { exponent: f64, log_power: f64, log_scale: f64, r_anchor: f64, value_anchor: f64 },
    /// Identically zero beyond the grid.
    Truncated,
}

impl TailModel {
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            TailModel::Exponential { rate, power, r_anchor, value_anchor } => {
                value_anchor * (r / r_anchor).powf(-power) * (-rate * (r - r_anchor)).exp()
            }
            TailModel::Algebraic { exponent, log_power, log_scale, r_anchor, value_anchor } => {
                let mut v = value_anchor * (r / r_anchor).powf(-exponent);
                if log_power != 0.0 {
                    v *= ((log_scale * r).ln() / (log_scale * r_anchor).ln()).powf(-log_power);
                }
                v
            }
            TailModel::Truncated => 0.0,
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            TailModel::Exponential { rate, power, .. } => -self.value(r) * (rate + power / r),
            TailModel::Algebraic { exponent, log_power, log_scale, .. } => {
                let mut k = exponent;
                if log_power != 0.0 {
                    k += log_power / (log_scale * r).ln();
                }
                -self.value(r) * k / r
            }
            TailModel::Truncated => 0.0,
        }
    }

    /// Coefficient `c` of the algebraic law `c r^{−ρ} (ln(s r))^{−λ}`.
    pub fn coefficient(&self) -> Option<f64> {
        match *self {
            TailModel::Algebraic { exponent, log_power, log_scale, r_anchor, value_anchor } => {
                let mut c = value_anchor * r_anchor.powf(exponent);
                if log_power != 0.0 {
                    c *= (log_scale * r_anchor).ln().powf(log_power);
                }
                Some(c)
            }
            _ => None,
        }
    }

    fn scale_amplitude(&self, a: f64) -> TailModel {
        let mut t = *self;
        match &mut t {
            TailModel::Exponential { value_anchor, .. } | TailModel::Algebraic { value_anchor, .. } => {
                *value_anchor *= a
            }
            TailModel::Truncated => {}
        }
        t
    }

    /// Tail of `λ^{N/2} v(λ r)`.
    fn l2_scale(&self, lambda: f64, dim: u32) -> TailModel {
        let amp = lambda.powf(dim as f64 / 2.0);
        match *self {
            TailModel::Exponential { rate, power, r_anchor, value_anchor } => TailModel::Exponential {
                rate: rate * lambda,
                power,
                r_anchor: r_anchor / lambda,
                value_anchor: value_anchor * amp,
            },
            TailModel::Algebraic { exponent, log_power, log_scale, r_anchor, value_anchor } => {
                TailModel::Algebraic {
                    exponent,
                    log_power,
                    log_scale: log_scale * lambda,
                    r_anchor: r_anchor / lambda,
                    value_anchor: value_anchor * amp,
                }
            }
            TailModel::Truncated => TailModel::Truncated,
        }
    }
}

/// Bookkeeping from the shooting solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingDiagnostics {
    pub amplitude_bracket: [f64; 2],
    pub bisection_iterations: u32,
    pub bracket_expansions: u32,
    /// Radius where recording stopped.
    pub r_match: f64,
    pub stop_reason: String,
    /// "decay law" for algebraic tails, "linearization" for exponential ones.
    pub tail_source: String,
    /// Exponent fitted on the outermost decade of grid plus far field, when stable.
    pub fitted_exponent: Option<f64>,
    /// Largest |ODE residual| over interior grid points, estimated by finite
    /// differences of the stored derivative.
    pub ode_residual_max: f64,
}

/// Radial profile on a grid plus far-field tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub params: ModelParams,
    pub r_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
    pub tail: TailModel,
    /// Loose-accuracy samples `[r, φ, φ']` beyond the grid, used only to fit
    /// decay laws. Never used by [`RadialProfile::evaluate`] or quadrature.
    #[serde(default)]
    pub far_field: Vec<[f64; 3]>,
    pub diagnostics: Option<ShootingDiagnostics>,
}

impl RadialProfile {
    /// Profile from sampled data, e.g. a closed-form test function.
    pub fn from_samples(
        params: ModelParams,
        r_grid: Vec<f64>,
        values: Vec<f64>,
        derivs: Vec<f64>,
        tail: TailModel,
    ) -> Result<Self> {
        if r_grid.len() < 3 || r_grid.len() != values.len() || r_grid.len() != derivs.len() {
            return Err(Error::InvalidProfile("grid, values and derivs need equal length >= 3".into()));
        }
        if r_grid[0] < 0.0 || r_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidProfile("grid must be strictly increasing from r >= 0".into()));
        }
        if values.iter().chain(derivs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("non-finite samples".into()));
        }
        Ok(RadialProfile { params, r_grid, values, derivs, tail, far_field: Vec::new(), diagnostics: None })
    }

    pub fn amplitude(&self) -> f64 {
        self.values[0]
    }

    pub fn r_max(&self) -> f64 {
        *self.r_grid.last().unwrap()
    }

    pub fn dim(&self) -> u32 {
        self.params.dim
    }

    /// φ(r): monotone cubic Hermite on the grid, tail beyond it.
    pub fn evaluate(&self, r: f64) -> f64 {
        self.hermite(r).0
    }

    /// φ'(r), consistent with [`RadialProfile::evaluate`].
    pub fn evaluate_deriv(&self, r: f64) -> f64 {
        self.hermite(r).1
    }

    fn hermite(&self, r: f64) -> (f64, f64) {
        let n = self.r_grid.len();
        if r <= self.r_grid[0] {
            return (self.values[0], self.derivs[0]);
        }
        if r >= self.r_grid[n - 1] {
            if r == self.r_grid[n - 1] {
                return (self.values[n - 1], self.derivs[n - 1]);
            }
            return (self.tail.value(r), self.tail.derivative(r));
        }
        let i = self.r_grid.partition_point(|&x| x <= r) - 1;
        let (x0, x1) = (self.r_grid[i], self.r_grid[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let h = x1 - x0;
        let (mut m0, mut m1) = (self.derivs[i], self.derivs[i + 1]);
        let delta = (y1 - y0) / h;
        if delta == 0.0 {
            m0 = 0.0;
            m1 = 0.0;
        } else {
            let a = m0 / delta;
            let b = m1 / delta;
            if a < 0.0 {
                m0 = 0.0;
            }
            if b < 0.0 {
                m1 = 0.0;
            }
            let s = a * a + b * b;
            if a >= 0.0 && b >= 0.0 && s > 9.0 {
                let tau = 3.0 / s.sqrt();
                m0 = tau * a * delta;
                m1 = tau * b * delta;
            }
        }
        let t = (r - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let v = h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        let d = d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1;
        (v, d)
    }

    /// The profile multiplied by `a`.
    pub fn scaled_amplitude(&self, a: f64) -> RadialProfile {
        RadialProfile {
            params: self.params,
            r_grid: self.r_grid.clone(),
            values: self.values.iter().map(|v| v * a).collect(),
            derivs: self.derivs.iter().map(|v| v * a).collect(),
            tail: self.tail.scale_amplitude(a),
            far_field: self.far_field.iter().map(|&[r, v, d]| [r, v * a, d * a]).collect(),
            diagnostics: None,
        }
    }

    /// The mass-preserving rescaling `λ^{N/2} v(λ r)`.
    pub fn l2_scaled(&self, lambda: f64) -> RadialProfile {
        let n = self.params.n();
        let amp = lambda.powf(n / 2.0);
        RadialProfile {
            params: self.params,
            r_grid: self.r_grid.iter().map(|r| r / lambda).collect(),
            values: self.values.iter().map(|v| v * amp).collect(),
            derivs: self.derivs.iter().map(|v| v * amp * lambda).collect(),
            tail: self.tail.l2_scale(lambda, self.params.dim),
            far_field: self
                .far_field
                .iter()
                .map(|&[r, v, d]| [r / lambda, v * amp, d * amp * lambda])
                .collect(),
            diagnostics: None,
        }
    }
}

/// Free-function form of [`RadialProfile::evaluate`].
pub fn evaluate(profile: &RadialProfile, r: f64) -> f64 {
    profile.evaluate(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryClass {
    Overshoot,
    Undershoot,
    Converged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Raw {
    Under,
    Over,
}

struct RadialOde {
    nm1: f64,
    omega: f64,
    p: f64,
    q: f64,
}

fn spow(x: f64, e: f64) -> f64 {
    if x >= 0.0 {
        x.powf(e)
    } else {
        -(-x).powf(e)
    }
}

impl RadialOde {
    fn new(params: &ModelParams) -> Self {
        RadialOde { nm1: params.n() - 1.0, omega: params.omega, p: params.p, q: params.q }
    }

    fn force(&self, phi: f64) -> f64 {
        self.omega * phi + spow(phi, self.p) - spow(phi, self.q)
    }

    fn accel(&self, r: f64, phi: f64, dphi: f64) -> f64 {
        let friction = if r > 0.0 { self.nm1 / r * dphi } else { 0.0 };
        self.force(phi) - friction
    }

    fn scale(r: f64, old: &[f64], new: &[f64], tol: &Tolerance) -> [f64; 2] {
        let len = r.max(1.0);
        [
            tol.atol + tol.rtol * old[0].abs().max(new[0].abs()).max(old[1].abs()),
            tol.atol + tol.rtol * old[1].abs().max(new[1].abs()).max(old[0].abs() / len),
        ]
    }
}

impl OdeSystem<2> for RadialOde {
    fn rhs(&self, r: f64, y: &[f64; 2]) -> [f64; 2] {
        [y[1], self.accel(r, y[0], y[1])]
    }

    fn error_scale(&self, r: f64, y_old: &[f64; 2], y_new: &[f64; 2], tol: &Tolerance) -> [f64; 2] {
        RadialOde::scale(r, y_old, y_new, tol)
    }
}

/// Two trajectories advanced with a common step.
struct PairOde(RadialOde);

impl OdeSystem<4> for PairOde {
    fn rhs(&self, r: f64, y: &[f64; 4]) -> [f64; 4] {
        [y[1], self.0.accel(r, y[0], y[1]), y[3], self.0.accel(r, y[2], y[3])]
    }

    fn error_scale(&self, r: f64, y_old: &[f64; 4], y_new: &[f64; 4], tol: &Tolerance) -> [f64; 4] {
        let a = RadialOde::scale(r, &y_old[0..2], &y_new[0..2], tol);
        let b = RadialOde::scale(r, &y_old[2..4], &y_new[2..4], tol);
        [a[0], a[1], b[0], b[1]]
    }
}

/// Starting radius and state for amplitude `s`.
fn initial_state(params: &ModelParams, cfg: &ShootingConfig, sys: &RadialOde, s: f64) -> (f64, [f64; 2]) {
    if params.dim == 1 {
        return (0.0, [s, 0.0]);
    }
    let eps = cfg.origin_offset;
    let n = params.n();
    let f = sys.force(s);
    (eps, [s + f * eps * eps / (2.0 * n), f * eps / n])
}

fn radius_cap(params: &ModelParams, cfg: &ShootingConfig) -> f64 {
    match cfg.r_max {
        Some(r) => r,
        None if params.omega > 0.0 => 45.0 / params.omega.sqrt() + 20.0,
        None => cfg.zero_mass_r_cap,
    }
}

/// Sign of the growing far-field mode when no event occurred before the cap.
fn indicator_class(params: &ModelParams, r: f64, phi: f64, dphi: f64) -> Raw {
    let value = if params.omega > 0.0 {
        dphi + (params.omega.sqrt() + (params.n() - 1.0) / (2.0 * r)) * phi
    } else {
        let law = expected_decay(params).expect("omega = 0");
        let mut v = law.exponent * phi + r * dphi;
        if law.log_power != 0.0 && r > 1.0 {
            v += law.log_power * phi / r.ln();
        }
        v
    };
    if value > 0.0 {
        Raw::Under
    } else {
        Raw::Over
    }
}

fn shoot(params: &ModelParams, cfg: &ShootingConfig, s: f64) -> Result<Raw> {
    let sys = RadialOde::new(params);
    if sys.force(s) >= 0.0 {
        return Ok(Raw::Under);
    }
    let (r0, y0) = initial_state(params, cfg, &sys, s);
    let r_cap = radius_cap(params, cfg);
    let mut st = Dopri::new(&sys, r0, y0, 1e-3, cfg.tolerance());
    loop {
        let cap = (r_cap - st.r).min(st.r.max(1.0));
        st.step(&sys, cap)?;
        let [phi, dphi] = st.y;
        if !(phi > 0.0) {
            return Ok(Raw::Over);
        }
        if dphi >= 0.0 {
            return Ok(Raw::Under);
        }
        if st.r >= r_cap {
            return Ok(indicator_class(params, st.r, phi, dphi));
        }
    }
}

/// Classifies the trajectory started from amplitude `s`.
///
/// `Converged` means the amplitude sits inside a bisection-tolerance
/// interval that brackets the ground state.
pub fn classify_trajectory(amplitude: f64, params: &ModelParams, cfg: &ShootingConfig) -> Result<TrajectoryClass> {
    if !(amplitude > 0.0) {
        return Err(Error::InvalidParams("amplitude must be positive".into()));
    }
    params.validate()?;
    cfg.validate()?;
    let delta = cfg.bisection_tol * amplitude;
    let below = shoot(params, cfg, amplitude - delta)?;
    let above = shoot(params, cfg, amplitude + delta)?;
    if below == Raw::Under && above == Raw::Over {
        return Ok(TrajectoryClass::Converged);
    }
    Ok(match shoot(params, cfg, amplitude)? {
        Raw::Under => TrajectoryClass::Undershoot,
        Raw::Over => TrajectoryClass::Overshoot,
    })
}

/// Amplitude where `ω + s^{p−1} − s^{q−1}` vanishes; below it φ''(0) ≥ 0.
pub fn equilibrium_amplitude(params: &ModelParams) -> Result<f64> {
    let g = |s: f64| params.omega + s.powf(params.p - 1.0) - s.powf(params.q - 1.0);
    if params.omega == 0.0 {
        return Ok(1.0);
    }
    let mut b = 2.0;
    while g(b) >= 0.0 {
        b *= 2.0;
    }
    brent(g, 1.0, b, 1e-15)
}

/// Positive root of `ωs²/2 + s^{p+1}/(p+1) − s^{q+1}/(q+1)`, which is the
/// exact N = 1 ground-state amplitude.
pub fn first_integral_amplitude(params: &ModelParams) -> Result<f64> {
    let (p, q, w) = (params.p, params.q, params.omega);
    let f = |s: f64| w * s * s / 2.0 + s.powf(p + 1.0) / (p + 1.0) - s.powf(q + 1.0) / (q + 1.0);
    let a = equilibrium_amplitude(params)?;
    let mut b = 2.0 * a;
    while f(b) >= 0.0 {
        b *= 2.0;
    }
    brent(f, a, b, 1e-15)
}

struct Bracket {
    lo: f64,
    hi: f64,
    expansions: u32,
}

fn find_bracket(params: &ModelParams, cfg: &ShootingConfig) -> Result<Bracket> {
    let (mut lo, mut hi) = match cfg.bracket {
        Some([lo, hi]) => (lo, hi),
        None => {
            let s_eq = equilibrium_amplitude(params)?;
            (s_eq, 2.0 * first_integral_amplitude(params)?.max(s_eq))
        }
    };
    let mut expansions = 0;
    while shoot(params, cfg, hi)? != Raw::Over {
        if expansions >= cfg.max_doublings {
            return Err(Error::BracketFailure(format!("no overshoot up to amplitude {hi:e}")));
        }
        lo = lo.min(hi);
        hi *= 2.0;
        expansions += 1;
    }
    while shoot(params, cfg, lo)? != Raw::Under {
        if expansions >= cfg.max_doublings {
            return Err(Error::BracketFailure(format!("no undershoot down to amplitude {lo:e}")));
        }
        hi = hi.min(lo);
        lo *= 0.5;
        expansions += 1;
    }
    Ok(Bracket { lo, hi, expansions })
}

/// Computes the positive radial ground state.
pub fn solve_ground_state(params: &ModelParams, cfg: &ShootingConfig) -> Result<RadialProfile> {
    params.validate()?;
    cfg.validate()?;
    let Bracket { mut lo, mut hi, expansions } = find_bracket(params, cfg)?;
    let mut iterations = 0;
    while hi - lo > cfg.bisection_tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shoot(params, cfg, mid)? {
            Raw::Under => lo = mid,
            Raw::Over => hi = mid,
        }
        iterations += 1;
    }
    build_profile(params, cfg, lo, hi, iterations, expansions)
}

fn build_profile(
    params: &ModelParams,
    cfg: &ShootingConfig,
    lo: f64,
    hi: f64,
    iterations: u32,
    expansions: u32,
) -> Result<RadialProfile> {
    let base = RadialOde::new(params);
    let s_mid = 0.5 * (lo + hi);
    let spread = (0.5 * (hi - lo)).max(cfg.rtol * s_mid);
    let (r0, ylo) = initial_state(params, cfg, &base, s_mid - spread);
    let (_, yhi) = initial_state(params, cfg, &base, s_mid + spread);
    let sys = PairOde(base);
    let r_cap = radius_cap(params, cfg);

    let mut r_grid = Vec::new();
    let mut values = Vec::new();
    let mut derivs = Vec::new();
    if r0 > 0.0 {
        r_grid.push(0.0);
        values.push(s_mid);
        derivs.push(0.0);
    } else {
        r_grid.push(r0);
        values.push(0.5 * (ylo[0] + yhi[0]));
        derivs.push(0.0);
    }

    let h0 = 1e-3f64.min(cfg.grid_spacing);
    let mut st = Dopri::new(&sys, r0, [ylo[0], ylo[1], yhi[0], yhi[1]], h0, cfg.tolerance());
    let mut far_field = Vec::new();
    let mut stop_reason = "";
    loop {
        let h_rec = cfg.grid_spacing.max(cfg.grid_spacing * st.r);
        st.step(&sys, h_rec.min(r_cap - st.r))?;
        let [a, da, b, db] = st.y;
        if !(a > 0.0 && b > 0.0) || da >= 0.0 || db >= 0.0 {
            if stop_reason.is_empty() {
                stop_reason = "event";
            }
            break;
        }
        let mid = 0.5 * (a + b);
        let sep = (b - a).abs() / mid;
        if sep > cfg.far_field_tol {
            break;
        }
        if sep > cfg.divergence_tol || !stop_reason.is_empty() {
            if stop_reason.is_empty() {
                stop_reason = "divergence";
            }
            far_field.push([st.r, mid, 0.5 * (da + db)]);
        } else {
            r_grid.push(st.r);
            values.push(mid);
            derivs.push(0.5 * (da + db));
        }
        if st.r >= r_cap {
            if stop_reason.is_empty() {
                stop_reason = "radius cap";
            }
            break;
        }
    }
    if r_grid.len() < 8 {
        return Err(Error::InvalidProfile(format!(
            "recorded only {} grid points before the bracketing pair separated",
            r_grid.len()
        )));
    }
    if values.iter().any(|&v| !(v > 0.0)) || values.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidProfile("profile is not positive and nonincreasing".into()));
    }

    let n = r_grid.len();
    let (r_a, v_a) = (r_grid[n - 1], values[n - 1]);
    let (tail, tail_source, fitted_exponent) = if params.omega > 0.0 {
        (
            TailModel::Exponential {
                rate: params.omega.sqrt(),
                power: (params.n() - 1.0) / 2.0,
                r_anchor: r_a,
                value_anchor: v_a,
            },
            "linearization",
            None,
        )
    } else {
        let law = expected_decay(params)?;
        let mut rr = r_grid.clone();
        let mut vv = values.clone();
        let mut dd = derivs.clone();
        for &[r, v, d] in &far_field {
            rr.push(r);
            vv.push(v);
            dd.push(d);
        }
        let fit = asymptotics::fit_last_decade(&rr, &vv, &dd, &law);
        (
            TailModel::Algebraic {
                exponent: law.exponent,
                log_power: law.log_power,
                log_scale: 1.0,
                r_anchor: r_a,
                value_anchor: v_a,
            },
            "decay law",
            fit.map(|f| f.exponent),
        )
    };

    let ode_residual_max = residual_estimate(&sys.0, &r_grid, &values, &derivs);
    Ok(RadialProfile {
        params: *params,
        r_grid,
        values,
        derivs,
        tail,
        far_field,
        diagnostics: Some(ShootingDiagnostics {
            amplitude_bracket: [lo, hi],
            bisection_iterations: iterations,
            bracket_expansions: expansions,
            r_match: r_a,
            stop_reason: stop_reason.into(),
            tail_source: tail_source.into(),
            fitted_exponent,
            ode_residual_max,
        }),
    })
}

/// Max over interior nodes of |φ'' + (N−1)/r φ' − ωφ − φ^p + φ^q| with φ''
/// from a three-point difference of the stored φ'.
fn residual_estimate(sys: &RadialOde, r: &[f64], v: &[f64], d: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 1..r.len() - 1 {
        let (h0, h1) = (r[i] - r[i - 1], r[i + 1] - r[i]);
        let dd = (-h1 / (h0 * (h0 + h1))) * d[i - 1]
            + ((h1 - h0) / (h0 * h1)) * d[i]
            + (h0 / (h1 * (h0 + h1))) * d[i + 1];
        let res = dd - sys.accel(r[i], v[i], d[i]);
        worst = worst.max(res.abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u32, p: f64, q: f64, w: f64) -> ModelParams {
        ModelParams::new(n, p, q, w).unwrap()
    }

    #[test]
    fn first_integral_oracles() {
        assert!((first_integral_amplitude(&params(1, 3.0, 5.0, 0.0)).unwrap() - 1.5f64.sqrt()).abs() < 1e-14);
        assert!((first_integral_amplitude(&params(1, 2.0, 3.0, 0.0)).unwrap() - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn amplitude_matches_first_integral_zero_mass() {
        let cfg = ShootingConfig::default();
        let prof = solve_ground_state(&params(1, 3.0, 5.0, 0.0), &cfg).unwrap();
        assert!((prof.amplitude() - 1.5f64.sqrt()).abs() < 1e-9, "{}", prof.amplitude());
        let prof = solve_ground_state(&params(1, 2.0, 3.0, 0.0), &cfg).unwrap();
        assert!((prof.amplitude() - 4.0 / 3.0).abs() < 1e-9, "{}", prof.amplitude());
    }

    #[test]
    fn closed_form_zero_mass_profile() {
        // φ0(r) = √2 (r² + 4/3)^{-1/2} for N = 1, p = 3, q = 5.
        let prof = solve_ground_state(&params(1, 3.0, 5.0, 0.0), &ShootingConfig::default()).unwrap();
        // Grid region: limited by integration accuracy.
        for &r in &[0.0f64, 0.3, 1.0, 2.5, 10.0, 40.0] {
            let exact = 2f64.sqrt() / (r * r + 4.0 / 3.0).sqrt();
            let got = prof.evaluate(r);
            assert!(((got - exact) / exact).abs() < 1e-7, "r = {r}: {got} vs {exact}");
        }
        // Tail region: a pure power law misses the relative r^{-2} correction.
        let ra = prof.r_max();
        for &r in &[ra * 1.5, 1e3, 1e5] {
            let exact = 2f64.sqrt() / (r * r + 4.0 / 3.0).sqrt();
            let got = prof.evaluate(r);
            assert!(((got - exact) / exact).abs() < 1.0 / (ra * ra), "r = {r}: {got} vs {exact}");
        }
    }

    #[test]
    fn classification_examples() {
        let m = params(1, 3.0, 5.0, 0.0);
        let cfg = ShootingConfig::default();
        let s = 1.5f64.sqrt();
        assert_eq!(classify_trajectory(10.0 * s, &m, &cfg).unwrap(), TrajectoryClass::Overshoot);
        assert_eq!(classify_trajectory(0.5 * s, &m, &cfg).unwrap(), TrajectoryClass::Undershoot);
        let prof = solve_ground_state(&m, &cfg).unwrap();
        assert_eq!(
            classify_trajectory(prof.amplitude(), &m, &cfg).unwrap(),
            TrajectoryClass::Converged
        );
    }

    #[test]
    fn profile_invariants_and_tail_kinds() {
        let cfg = ShootingConfig::default();
        for m in [params(1, 2.0, 3.0, 0.5), params(3, 2.0, 3.0, 0.1), params(2, 2.0, 3.0, 0.0)] {
            let prof = solve_ground_state(&m, &cfg).unwrap();
            assert_eq!(prof.derivs[0], 0.0);
            assert!(prof.values.iter().all(|&v| v > 0.0));
            assert!(prof.derivs.iter().all(|&d| d <= 0.0));
            let ra = prof.r_max();
            let tail = prof.tail.value(ra);
            assert!(((tail - *prof.values.last().unwrap()) / tail).abs() < 1e-6);
            match prof.tail {
                TailModel::Exponential { rate, .. } => assert!((rate - m.omega.sqrt()).abs() < 1e-15),
                TailModel::Algebraic { exponent, .. } => {
                    let law = expected_decay(&m).unwrap();
                    assert!((exponent - law.exponent).abs() < 0.05 * law.exponent);
                }
                TailModel::Truncated => panic!("solver profiles carry a tail"),
            }
        }
    }

    #[test]
    fn tolerance_refinement_is_stable() {
        let m = params(3, 2.0, 3.0, 0.1);
        let cfg = ShootingConfig::default();
        let fine = ShootingConfig { rtol: cfg.rtol / 2.0, ..cfg.clone() };
        let a = solve_ground_state(&m, &cfg).unwrap().amplitude();
        let b = solve_ground_state(&m, &fine).unwrap().amplitude();
        assert!((a - b).abs() < 10.0 * cfg.bisection_tol * a.max(1.0) + 1e-10, "{a} vs {b}");
    }

    #[test]
    fn evaluate_is_continuous_at_r_max() {
        let prof = solve_ground_state(&params(1, 2.0, 3.0, 1.0), &ShootingConfig::default()).unwrap();
        let ra = prof.r_max();
        let left = prof.evaluate(ra * (1.0 - 1e-12));
        let right = prof.evaluate(ra * (1.0 + 1e-12));
        assert!(((left - right) / left).abs() < 1e-6);
        assert_eq!(prof.evaluate(0.0), prof.amplitude());
    }

    #[test]
    fn scalings_transform_tail_and_grid() {
        let prof = solve_ground_state(&params(1, 2.0, 3.0, 1.0), &ShootingConfig::default()).unwrap();
        let v = prof.l2_scaled(1.3);
        for &r in &[0.0, 0.7, 3.0, 30.0] {
            let expect = 1.3f64.sqrt() * prof.evaluate(1.3 * r);
            assert!((v.evaluate(r) - expect).abs() < 1e-12 * expect.max(1e-300) + 1e-300);
        }
        let w = prof.scaled_amplitude(2.0);
        assert!((w.evaluate(50.0) - 2.0 * prof.evaluate(50.0)).abs() < 1e-30);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = ShootingConfig { rtol: 0.0, ..Default::default() };
        assert!(solve_ground_state(&params(1, 2.0, 3.0, 1.0), &bad).is_err());
        let bad = ShootingConfig { bracket: Some([2.0, 1.0]), ..Default::default() };
        assert!(solve_ground_state(&params(1, 2.0, 3.0, 1.0), &bad).is_err());
    }
}
