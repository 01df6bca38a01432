//! One-dimensional split-step Fourier integration of
//! `i∂ₜu + u_xx − |u|^{p−1}u + |u|^{q−1}u = 0` on a periodic box, with
//! conservation, virial and orbital-distance diagnostics.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groundstate::RadialProfile;
use crate::model::{classify_regime, ModelParams, RegimeTag, RegimeThresholds};

/// Fraction of the half-length beyond which mass counts as "near the boundary".
pub const BOUNDARY_ZONE: f64 = 0.9;
/// Fraction of the half-length that initial data may occupy.
pub const SUPPORT_FRACTION: f64 = 0.8;
/// Relative level defining the effective support of a profile.
pub const SUPPORT_LEVEL: f64 = 1e-8;

/// Uniform periodic grid `x_j = −L + 2Lj/M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1d {
    pub half_length: f64,
    pub points: usize,
}

impl Grid1d {
    pub fn new(half_length: f64, points: usize) -> Result<Self> {
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::InvalidParams(format!("half-length must be positive, got {half_length}")));
        }
        if points < 16 || !points.is_power_of_two() {
            return Err(Error::InvalidParams(format!("grid size must be a power of two >= 16, got {points}")));
        }
        Ok(Grid1d { half_length, points })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_length + self.dx() * j as f64
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let m = self.points;
        let k0 = std::f64::consts::PI / self.half_length;
        (0..m)
            .map(|j| if j < m / 2 { j as f64 * k0 } else { (j as f64 - m as f64) * k0 })
            .collect()
    }
}

/// Complex field on a [`Grid1d`] at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub grid: Grid1d,
    pub values: Vec<Complex64>,
    pub t: f64,
}

impl WaveField {
    pub fn new(grid: Grid1d, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.points {
            return Err(Error::InvalidParams(format!(
                "field has {} values for a grid of {}",
                values.len(),
                grid.points
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(if v.re.is_finite() { v.im } else { v.re }));
        }
        Ok(WaveField { grid, values, t: 0.0 })
    }

    pub fn from_real(grid: Grid1d, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn with_phase(&self, theta: f64) -> Self {
        let rot = Complex64::from_polar(1.0, theta);
        WaveField { values: self.values.iter().map(|v| v * rot).collect(), ..self.clone() }
    }

    pub fn conj(&self) -> Self {
        WaveField { values: self.values.iter().map(|v| v.conj()).collect(), ..self.clone() }
    }

    pub fn mass(&self) -> f64 {
        self.grid.dx() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }
}

/// FFT plans, wavenumbers and a work buffer for one grid.
struct Spectral {
    grid: Grid1d,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    k2: Vec<f64>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Spectral {
    fn new(grid: Grid1d) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.points);
        let inv = planner.plan_fft_inverse(grid.points);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Spectral {
            grid,
            k2: grid.wavenumbers().iter().map(|k| k * k).collect(),
            fwd,
            inv,
            buf: vec![Complex64::default(); grid.points],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    fn forward(&mut self, data: &mut [Complex64]) {
        self.fwd.process_with_scratch(data, &mut self.scratch);
    }

    fn inverse(&mut self, data: &mut [Complex64]) {
        self.inv.process_with_scratch(data, &mut self.scratch);
    }

    /// `Σ w(k)|f̂(k)|²` scaled so that w ≡ 1 gives the L² norm squared.
    fn weighted_norm_sq(&mut self, f: &[Complex64], weight: impl Fn(f64) -> f64) -> f64 {
        let mut buf = std::mem::take(&mut self.buf);
        buf.copy_from_slice(f);
        self.forward(&mut buf);
        let s: f64 = buf.iter().zip(&self.k2).map(|(c, &k2)| weight(k2) * c.norm_sqr()).sum();
        self.buf = buf;
        s * self.grid.dx() / self.grid.points as f64
    }

    fn grad_sq(&mut self, f: &[Complex64]) -> f64 {
        self.weighted_norm_sq(f, |k2| k2)
    }

    fn h1_sq(&mut self, f: &[Complex64]) -> f64 {
        self.weighted_norm_sq(f, |k2| 1.0 + k2)
    }
}

/// Smooth cutoff χ: 1 on [0, 1], 0 on [2, ∞), C^∞ in between.
pub fn cutoff(s: f64) -> f64 {
    let g = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let s = s.abs();
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let a = g(2.0 - s);
        a / (a + g(s - 1.0))
    }
}

/// Radius where a profile first drops to `level·φ(0)`; infinite if it never
/// does before 1e12.
pub fn effective_support(profile: &RadialProfile, level: f64) -> f64 {
    let target = level * profile.amplitude();
    let mut hi = 1.0;
    while profile.evaluate(hi) > target {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if profile.evaluate(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Profile reflected evenly onto the grid.
pub fn sample_profile(profile: &RadialProfile, grid: &Grid1d) -> Vec<f64> {
    (0..grid.points).map(|j| profile.evaluate(grid.x(j).abs())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    /// λφ
    AmplitudeScaled,
    /// φ^λ = λ^{1/2} φ(λ·)
    L2Scaled,
    /// χ_R · λφ
    CutoffAmplitudeScaled,
    /// χ_R · φ^λ
    CutoffL2Scaled,
}

impl InitialKind {
    pub fn has_cutoff(self) -> bool {
        matches!(self, InitialKind::CutoffAmplitudeScaled | InitialKind::CutoffL2Scaled)
    }
}

/// Initial data built from a one-dimensional ground state.
///
/// Fails with `GridTooSmall` when the cutoff diameter `2R` or the effective
/// support of the scaled profile exceeds `0.8·L`.
pub fn make_initial_data(
    kind: InitialKind,
    profile: &RadialProfile,
    lambda: f64,
    radius: f64,
    grid: &Grid1d,
) -> Result<WaveField> {
    if profile.dim() != 1 {
        return Err(Error::Domain(format!("time evolution needs N = 1, profile has N = {}", profile.dim())));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParams(format!("lambda must be positive, got {lambda}")));
    }
    let limit = SUPPORT_FRACTION * grid.half_length;
    let l2 = matches!(kind, InitialKind::L2Scaled | InitialKind::CutoffL2Scaled);
    let mut support = effective_support(profile, SUPPORT_LEVEL);
    if l2 {
        support /= lambda;
    }
    if kind.has_cutoff() {
        if !(radius > 0.0) {
            return Err(Error::InvalidParams(format!("cutoff radius must be positive, got {radius}")));
        }
        if 2.0 * radius > limit {
            return Err(Error::GridTooSmall(format!("cutoff diameter {} exceeds {limit}", 2.0 * radius)));
        }
        support = support.min(2.0 * radius);
    }
    if support > limit {
        return Err(Error::GridTooSmall(format!("profile support {support:.4e} exceeds {limit}")));
    }
    let values: Vec<f64> = (0..grid.points)
        .map(|j| {
            let x = grid.x(j).abs();
            let base = if l2 { lambda.sqrt() * profile.evaluate(lambda * x) } else { lambda * profile.evaluate(x) };
            if kind.has_cutoff() {
                base * cutoff(x / radius)
            } else {
                base
            }
        })
        .collect();
    WaveField::from_real(*grid, &values)
}

/// Result of the orbital distance minimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitalDistance {
    pub distance: f64,
    /// Optimal translation, restricted to multiples of the grid spacing.
    pub shift: f64,
    pub phase: f64,
    /// Translation resolution (the grid spacing).
    pub resolution: f64,
}

/// `inf_{θ, y} ‖u − e^{iθ}φ(· − y)‖_{H¹}` with y on the grid.
pub fn orbital_distance(field: &WaveField, reference: &[f64]) -> Result<OrbitalDistance> {
    let mut sp = Spectral::new(field.grid);
    orbital_distance_with(&mut sp, field, reference)
}

fn orbital_distance_with(sp: &mut Spectral, field: &WaveField, reference: &[f64]) -> Result<OrbitalDistance> {
    let m = field.grid.points;
    if reference.len() != m {
        return Err(Error::InvalidParams(format!("reference has {} samples, field {}", reference.len(), m)));
    }
    let mut uh = field.values.clone();
    sp.forward(&mut uh);
    let mut ph: Vec<Complex64> = reference.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    sp.forward(&mut ph);
    let mut corr: Vec<Complex64> =
        ph.iter().zip(&uh).zip(&sp.k2).map(|((a, b), &k2)| a.conj() * b * (1.0 + k2)).collect();
    sp.inverse(&mut corr);
    let (best, c) = corr
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map(|(i, c)| (i, *c))
        .unwrap();
    let phase = if c.norm() > 0.0 { c.arg() } else { 0.0 };
    let rot = Complex64::from_polar(1.0, phase);
    let diff: Vec<Complex64> =
        (0..m).map(|j| field.values[j] - rot * reference[(j + m - best) % m]).collect();
    let dx = field.grid.dx();
    let shift_idx = if best > m / 2 { best as f64 - m as f64 } else { best as f64 };
    Ok(OrbitalDistance { distance: sp.h1_sq(&diff).max(0.0).sqrt(), shift: shift_idx * dx, phase, resolution: dx })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Second-order symmetric splitting.
    Strang,
    /// Fourth-order triple-jump composition of Strang steps.
    Yoshida4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_end: f64,
    pub diagnostics_every: usize,
    pub scheme: Scheme,
    /// Blowup is flagged once ‖∂ₓu‖² reaches this multiple of its initial value.
    pub blowup_factor: f64,
    pub dt_floor: f64,
    /// Per-step relative energy jump that triggers halving dt.
    pub energy_jump_tol: f64,
    /// Drop the nonlinearity (free Schrödinger flow).
    pub linear_only: bool,
    /// Stop once the orbital distance exceeds this value.
    pub stop_distance: Option<f64>,
    /// Times at which to keep copies of the field.
    pub snapshot_times: Vec<f64>,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            dt: 1e-3,
            t_end: 5.0,
            diagnostics_every: 10,
            scheme: Scheme::Yoshida4,
            blowup_factor: 1e3,
            dt_floor: 1e-12,
            energy_jump_tol: 1e-9,
            linear_only: false,
            stop_distance: None,
            snapshot_times: Vec::new(),
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("t_end", self.t_end),
            ("blowup_factor", self.blowup_factor),
            ("dt_floor", self.dt_floor),
            ("energy_jump_tol", self.energy_jump_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("evolution.{name} must be positive and finite")));
            }
        }
        if self.diagnostics_every == 0 {
            return Err(Error::InvalidParams("evolution.diagnostics_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagSample {
    pub t: f64,
    pub energy: f64,
    pub mass: f64,
    pub virial: f64,
    pub variance: f64,
    /// ‖∂ₓu‖²_{L²}.
    pub grad_norm: f64,
    pub distance: Option<f64>,
    /// Fraction of the mass in |x| > 0.9·L.
    pub boundary_mass: f64,
    pub dt: f64,
    /// False for the final sample of a run stopped between sampling times.
    pub regular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionDiagnostics {
    pub samples: Vec<DiagSample>,
    pub blowup_flag: bool,
    pub blowup_time: Option<f64>,
    pub stop_reason: String,
    pub steps: u64,
    pub dt_halvings: u32,
}

impl EvolutionDiagnostics {
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.samples[0].energy;
        self.samples.iter().map(|s| (s.energy - e0).abs() / (e0.abs() + 1.0)).fold(0.0, f64::max)
    }

    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.samples[0].mass;
        self.samples.iter().map(|s| (s.mass - m0).abs() / m0).fold(0.0, f64::max)
    }

    pub fn max_boundary_mass(&self) -> f64 {
        self.samples.iter().map(|s| s.boundary_mass).fold(0.0, f64::max)
    }

    pub fn max_distance(&self) -> Option<f64> {
        self.samples.iter().filter_map(|s| s.distance).reduce(f64::max)
    }

    /// Samples up to and including time `t`.
    pub fn until(&self, t: f64) -> EvolutionDiagnostics {
        EvolutionDiagnostics {
            samples: self.samples.iter().copied().filter(|s| s.t <= t).collect(),
            ..self.clone()
        }
    }
}

/// Final field, diagnostics and requested snapshots of an evolution.
#[derive(Debug, Clone)]
pub struct EvolutionRun {
    pub field: WaveField,
    pub diagnostics: EvolutionDiagnostics,
    pub snapshots: Vec<WaveField>,
}

struct Stepper<'a> {
    sp: Spectral,
    params: &'a ModelParams,
    linear_only: bool,
    scheme: Scheme,
    dt: f64,
    /// Linear propagators (including 1/M) for the distinct substep lengths.
    props: Vec<(f64, Vec<Complex64>)>,
}

const YOSHIDA_W1: f64 = 1.351_207_191_959_657_8;
const YOSHIDA_W0: f64 = -1.702_414_383_919_315_3;

impl<'a> Stepper<'a> {
    fn substeps(&self) -> Vec<f64> {
        match self.scheme {
            Scheme::Strang => vec![self.dt],
            Scheme::Yoshida4 => vec![YOSHIDA_W1 * self.dt, YOSHIDA_W0 * self.dt, YOSHIDA_W1 * self.dt],
        }
    }

    fn set_dt(&mut self, dt: f64) {
        self.dt = dt;
        let m = self.sp.grid.points as f64;
        self.props = self
            .substeps()
            .into_iter()
            .map(|tau| (tau, self.sp.k2.iter().map(|&k2| Complex64::from_polar(1.0 / m, -k2 * tau)).collect()))
            .collect();
    }

    fn nonlinear(&self, u: &mut [Complex64], tau: f64) {
        if self.linear_only {
            return;
        }
        let (a, b) = ((self.params.p - 1.0) / 2.0, (self.params.q - 1.0) / 2.0);
        for v in u.iter_mut() {
            let n2 = v.norm_sqr();
            let pot = n2.powf(a) - n2.powf(b);
            *v *= Complex64::from_polar(1.0, -pot * tau);
        }
    }

    fn step(&mut self, u: &mut [Complex64]) {
        let props = std::mem::take(&mut self.props);
        for (tau, prop) in &props {
            self.nonlinear(u, 0.5 * tau);
            self.sp.forward(u);
            for (v, f) in u.iter_mut().zip(prop) {
                *v *= f;
            }
            self.sp.inverse(u);
            self.nonlinear(u, 0.5 * tau);
        }
        self.props = props;
    }

    /// (energy, ‖∂ₓu‖², ‖u‖^{p+1}_{p+1}, ‖u‖^{q+1}_{q+1})
    fn energy_parts(&mut self, u: &[Complex64]) -> (f64, f64, f64, f64) {
        let g = self.sp.grad_sq(u);
        if self.linear_only {
            return (0.5 * g, g, 0.0, 0.0);
        }
        let dx = self.sp.grid.dx();
        let (p, q) = (self.params.p, self.params.q);
        let (mut a, mut b) = (0.0, 0.0);
        for v in u {
            let m = v.norm();
            a += m.powf(p + 1.0);
            b += m.powf(q + 1.0);
        }
        let (a, b) = (a * dx, b * dx);
        (0.5 * g + a / (p + 1.0) - b / (q + 1.0), g, a, b)
    }

    fn sample(&mut self, field: &WaveField, reference: Option<&[f64]>, regular: bool) -> Result<DiagSample> {
        let u = &field.values;
        let (energy, g, a, b) = self.energy_parts(u);
        let virial = if self.linear_only {
            g
        } else {
            let (p, q) = (self.params.p, self.params.q);
            g + (p - 1.0) / 2.0 / (p + 1.0) * a - (q - 1.0) / 2.0 / (q + 1.0) * b
        };
        let grid = field.grid;
        let dx = grid.dx();
        let (mut mass, mut var, mut edge) = (0.0, 0.0, 0.0);
        for (j, v) in u.iter().enumerate() {
            let x = grid.x(j);
            let d = v.norm_sqr();
            mass += d;
            var += x * x * d;
            if x.abs() > BOUNDARY_ZONE * grid.half_length {
                edge += d;
            }
        }
        let distance = match reference {
            Some(r) => Some(orbital_distance_with(&mut self.sp, field, r)?.distance),
            None => None,
        };
        Ok(DiagSample {
            t: field.t,
            energy,
            mass: mass * dx,
            virial,
            variance: var * dx,
            grad_norm: g,
            distance,
            boundary_mass: if mass > 0.0 { edge / mass } else { 0.0 },
            dt: self.dt,
            regular,
        })
    }
}

/// Integrates the field to `cfg.t_end`.
///
/// Samples are taken every `diagnostics_every` initial steps, so sampling
/// stays uniform in time when dt is halved. The run stops early with the
/// blowup flag when ‖∂ₓu‖² crosses the threshold or dt would drop below the
/// floor; a non-finite field without either is an error.
pub fn evolve(
    field: WaveField,
    params: &ModelParams,
    cfg: &EvolutionConfig,
    reference: Option<&[f64]>,
) -> Result<EvolutionRun> {
    cfg.validate()?;
    let mut st = Stepper {
        sp: Spectral::new(field.grid),
        params,
        linear_only: cfg.linear_only,
        scheme: cfg.scheme,
        dt: cfg.dt,
        props: Vec::new(),
    };
    st.set_dt(cfg.dt);

    let mut field = field;
    let first = st.sample(&field, reference, true)?;
    let grad0 = first.grad_norm;
    let mut diag = EvolutionDiagnostics {
        samples: vec![first],
        blowup_flag: false,
        blowup_time: None,
        stop_reason: "t_end".into(),
        steps: 0,
        dt_halvings: 0,
    };
    let mut snapshots = Vec::new();
    let mut pending: Vec<f64> = cfg.snapshot_times.clone();
    pending.sort_by(f64::total_cmp);
    pending.reverse();
    let mut take_snapshots = |field: &WaveField, pending: &mut Vec<f64>| {
        while pending.last().is_some_and(|&t| t <= field.t + 1e-12) {
            pending.pop();
            snapshots.push(field.clone());
        }
    };
    take_snapshots(&field, &mut pending);

    let interval = cfg.dt * cfg.diagnostics_every as f64;
    let n_samples = (cfg.t_end / interval).round().max(1.0) as u64;
    let mut energy = st.energy_parts(&field.values).0;
    let mut trial = field.values.clone();

    'outer: for k in 1..=n_samples {
        let t_target = k as f64 * interval;
        let mut steps_left = cfg.diagnostics_every << diag.dt_halvings;
        while steps_left > 0 {
            trial.copy_from_slice(&field.values);
            st.step(&mut trial);
            let (e_new, g_new, _, _) = st.energy_parts(&trial);
            if !e_new.is_finite() || !g_new.is_finite() {
                return Err(Error::NonFinite(e_new));
            }
            if (e_new - energy).abs() > cfg.energy_jump_tol * (energy.abs() + 1.0) {
                if 0.5 * st.dt < cfg.dt_floor {
                    diag.blowup_flag = true;
                    diag.blowup_time = Some(field.t);
                    diag.stop_reason = "dt floor".into();
                    let s = st.sample(&field, reference, false)?;
                    diag.samples.push(s);
                    break 'outer;
                }
                st.set_dt(0.5 * st.dt);
                diag.dt_halvings += 1;
                steps_left *= 2;
                continue;
            }
            std::mem::swap(&mut field.values, &mut trial);
            energy = e_new;
            diag.steps += 1;
            steps_left -= 1;
            field.t = if steps_left == 0 { t_target } else { field.t + st.dt };
            if g_new >= cfg.blowup_factor * grad0 {
                diag.blowup_flag = true;
                diag.blowup_time = Some(field.t);
                diag.stop_reason = "gradient threshold".into();
                let s = st.sample(&field, reference, steps_left == 0)?;
                diag.samples.push(s);
                break 'outer;
            }
        }
        let s = st.sample(&field, reference, true)?;
        let far = cfg.stop_distance.zip(s.distance).is_some_and(|(lim, d)| d > lim);
        diag.samples.push(s);
        take_snapshots(&field, &mut pending);
        if far {
            diag.stop_reason = "distance".into();
            break;
        }
    }
    Ok(EvolutionRun { field, diagnostics: diag, snapshots })
}

/// Second difference of the variance next to 8P at each interior regular sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirialPoint {
    pub t: f64,
    pub variance_dd: f64,
    pub eight_p: f64,
    pub grad_norm: f64,
}

pub fn virial_points(diag: &EvolutionDiagnostics) -> Result<Vec<VirialPoint>> {
    let s: Vec<&DiagSample> = diag.samples.iter().filter(|s| s.regular).collect();
    if s.len() < 5 {
        return Err(Error::InsufficientSamples { need: 5, have: s.len() });
    }
    let h = s[1].t - s[0].t;
    if s.windows(2).any(|w| ((w[1].t - w[0].t) - h).abs() > 1e-9 * h) {
        return Err(Error::Domain("diagnostic samples are not uniformly spaced".into()));
    }
    Ok(s.windows(3)
        .map(|w| VirialPoint {
            t: w[1].t,
            variance_dd: (w[2].variance - 2.0 * w[1].variance + w[0].variance) / (h * h),
            eight_p: 8.0 * w[1].virial,
            grad_norm: w[1].grad_norm,
        })
        .collect())
}

/// Largest discrepancy between `V''` and `8P`, relative to `8·max(|P|, ‖∂ₓu‖²)`.
pub fn virial_consistency(diag: &EvolutionDiagnostics) -> Result<f64> {
    Ok(virial_points(diag)?
        .iter()
        .map(|v| (v.variance_dd - v.eight_p).abs() / v.eight_p.abs().max(8.0 * v.grad_norm))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EscapeConfig {
    pub escape_factor: f64,
    /// Distance the escape factor multiplies; the run's initial distance when absent.
    pub reference_distance: Option<f64>,
}

impl Default for EscapeConfig {
    fn default() -> Self {
        EscapeConfig { escape_factor: 3.0, reference_distance: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeReport {
    pub initial_distance: f64,
    pub threshold: f64,
    pub escape_time: Option<f64>,
    pub max_distance: f64,
    /// Minimum of −P(u(t)) over samples inside the tube.
    pub min_neg_virial_in_tube: f64,
    pub virial_negative_in_tube: bool,
    pub in_tube_samples: usize,
    pub diagnostics: EvolutionDiagnostics,
}

/// Evolves data near the ground state and reports when the orbital distance
/// first exceeds `escape_factor` times the reference distance.
pub fn instability_escape_test(
    field: WaveField,
    reference: &[f64],
    params: &ModelParams,
    cfg: &EvolutionConfig,
    escape: &EscapeConfig,
) -> Result<EscapeReport> {
    let regime = classify_regime(params, &RegimeThresholds::default());
    if regime.tag != RegimeTag::UnstableSmallOmega || params.dim != 1 {
        return Err(Error::HypothesisViolated(format!(
            "escape test needs N = 1 in the small-frequency instability regime, got {:?}",
            regime.tag
        )));
    }
    let d0 = orbital_distance(&field, reference)?.distance;
    let threshold = escape.escape_factor * escape.reference_distance.unwrap_or(d0);
    let cfg = EvolutionConfig { stop_distance: Some(threshold), ..cfg.clone() };
    let run = evolve(field, params, &cfg, Some(reference))?;
    let samples = &run.diagnostics.samples;
    let escape_time = samples.iter().find(|s| s.distance.is_some_and(|d| d > threshold)).map(|s| s.t);
    let tube: Vec<&DiagSample> = samples.iter().take_while(|s| s.distance.is_some_and(|d| d <= threshold)).collect();
    let min_neg = tube.iter().map(|s| -s.virial).fold(f64::INFINITY, f64::min);
    Ok(EscapeReport {
        initial_distance: d0,
        threshold,
        escape_time,
        max_distance: run.diagnostics.max_distance().unwrap_or(d0),
        min_neg_virial_in_tube: min_neg,
        virial_negative_in_tube: !tube.is_empty() && min_neg > 0.0,
        in_tube_samples: tube.len(),
        diagnostics: run.diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groundstate::{solve_ground_state, ShootingConfig};
    use proptest::prelude::*;

    fn ground(p: f64, q: f64, omega: f64) -> (ModelParams, RadialProfile) {
        let params = ModelParams::new(1, p, q, omega).unwrap();
        let prof = solve_ground_state(&params, &ShootingConfig::default()).unwrap();
        (params, prof)
    }

    fn gaussian(grid: Grid1d, width: f64, k0: f64) -> WaveField {
        let v = (0..grid.points)
            .map(|j| {
                let x = grid.x(j);
                Complex64::from_polar((-x * x / (2.0 * width * width)).exp(), k0 * x)
            })
            .collect();
        WaveField::new(grid, v).unwrap()
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.5), 1.0);
        assert_eq!(cutoff(1.0), 1.0);
        assert_eq!(cutoff(2.0), 0.0);
        assert!((cutoff(1.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=100 {
            let c = cutoff(1.0 + i as f64 / 100.0);
            assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1d::new(10.0, 100).is_err());
        assert!(Grid1d::new(-1.0, 128).is_err());
        let g = Grid1d::new(10.0, 128).unwrap();
        assert_eq!(g.x(0), -10.0);
        assert!((g.x(64)).abs() < 1e-15);
    }

    #[test]
    fn initial_data_examples() {
        let (params, prof) = ground(2.0, 6.0, 1.0);
        let grid = Grid1d::new(100.0, 4096).unwrap();
        let u = make_initial_data(InitialKind::AmplitudeScaled, &prof, 1.0, 0.0, &grid).unwrap();
        assert_eq!(u.values[2048].re, prof.amplitude());
        let m1 = make_initial_data(InitialKind::L2Scaled, &prof, 1.0, 0.0, &grid).unwrap().mass();
        let m2 = make_initial_data(InitialKind::L2Scaled, &prof, 1.01, 0.0, &grid).unwrap().mass();
        assert!((m1 - m2).abs() < 1e-10 * m1);
        let _ = params;

        // Cutoff diameter or support too large for the box.
        assert!(matches!(
            make_initial_data(InitialKind::CutoffAmplitudeScaled, &prof, 1.1, 45.0, &grid),
            Err(Error::GridTooSmall(_))
        ));
        let small = Grid1d::new(15.0, 1024).unwrap();
        assert!(matches!(
            make_initial_data(InitialKind::AmplitudeScaled, &prof, 1.0, 0.0, &small),
            Err(Error::GridTooSmall(_))
        ));
        // Algebraic tails need a cutoff.
        let (_, zero) = ground(2.0, 4.8, 0.0);
        assert!(matches!(
            make_initial_data(InitialKind::AmplitudeScaled, &zero, 1.0, 0.0, &grid),
            Err(Error::GridTooSmall(_))
        ));
        assert!(make_initial_data(InitialKind::CutoffAmplitudeScaled, &zero, 1.0, 30.0, &grid).is_ok());
    }

    #[test]
    fn orbital_distance_examples() {
        let (_, prof) = ground(2.0, 3.0, 1.0);
        let grid = Grid1d::new(40.0, 2048).unwrap();
        let phi = sample_profile(&prof, &grid);
        let m = grid.points;
        let shifted: Vec<f64> = (0..m).map(|j| phi[(j + m - 3) % m]).collect();
        let u = WaveField::from_real(grid, &shifted).unwrap().with_phase(0.7);
        let d = orbital_distance(&u, &phi).unwrap();
        assert!(d.distance <= 1e-10, "{d:?}");
        assert!((d.shift - 3.0 * grid.dx()).abs() < 1e-12 && (d.phase - 0.7).abs() < 1e-12);

        let same = WaveField::from_real(grid, &phi).unwrap();
        assert!(orbital_distance(&same, &phi).unwrap().distance < 1e-12);

        let big: Vec<f64> = phi.iter().map(|v| 1.1 * v).collect();
        let d = orbital_distance(&WaveField::from_real(grid, &big).unwrap(), &phi).unwrap();
        let mut sp = Spectral::new(grid);
        let h1 = sp.h1_sq(&same.values).sqrt();
        assert!((d.distance - 0.1 * h1).abs() < 1e-10 * h1);
    }

    #[test]
    fn free_gaussian_conservation_and_variance() {
        let grid = Grid1d::new(60.0, 2048).unwrap();
        let u0 = gaussian(grid, 1.5, 0.0);
        let params = ModelParams::new(1, 2.0, 3.0, 1.0).unwrap();
        let cfg = EvolutionConfig {
            dt: 1e-2,
            t_end: 3.0,
            diagnostics_every: 5,
            linear_only: true,
            ..Default::default()
        };
        let run = evolve(u0, &params, &cfg, None).unwrap();
        let d = &run.diagnostics;
        assert!(d.max_energy_drift() < 1e-12 && d.max_mass_drift() < 1e-12);
        assert!(virial_consistency(d).unwrap() < 1e-6);
    }

    #[test]
    fn standing_wave_stays_on_orbit() {
        let (params, prof) = ground(2.0, 3.0, 1.0);
        let grid = Grid1d::new(50.0, 2048).unwrap();
        let phi = sample_profile(&prof, &grid);
        let u0 = make_initial_data(InitialKind::AmplitudeScaled, &prof, 1.0, 0.0, &grid).unwrap();
        let cfg = EvolutionConfig { dt: 1e-3, t_end: 5.0, diagnostics_every: 100, ..Default::default() };
        let run = evolve(u0, &params, &cfg, Some(&phi)).unwrap();
        let d = &run.diagnostics;
        assert!(!d.blowup_flag);
        assert!(d.max_distance().unwrap() <= 1e-6, "{:?}", d.max_distance());
        assert!(d.samples[0].virial.abs() < 1e-6 * d.samples[0].grad_norm);
        // The field rotates as e^{iωt}φ.
        let u = run.field.values[grid.points / 2];
        let expect = Complex64::from_polar(phi[grid.points / 2], params.omega * 5.0);
        assert!((u - expect).norm() < 1e-6, "{u} vs {expect}");
    }

    #[test]
    fn phase_equivariance_and_time_reversal() {
        let (params, prof) = ground(2.0, 3.0, 1.0);
        let grid = Grid1d::new(40.0, 1024).unwrap();
        let u0 = make_initial_data(InitialKind::AmplitudeScaled, &prof, 1.05, 0.0, &grid).unwrap();
        let cfg = EvolutionConfig { dt: 2e-3, t_end: 1.0, diagnostics_every: 50, ..Default::default() };
        let a = evolve(u0.clone(), &params, &cfg, None).unwrap().field;
        let b = evolve(u0.with_phase(0.4), &params, &cfg, None).unwrap().field;
        let rot = Complex64::from_polar(1.0, 0.4);
        let err = a.values.iter().zip(&b.values).map(|(x, y)| (x * rot - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");

        let mut back = a.conj();
        back.t = 0.0;
        let c = evolve(back, &params, &cfg, None).unwrap().field.conj();
        let err = c.values.iter().zip(&u0.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn strang_is_second_order() {
        let (params, prof) = ground(2.0, 3.0, 1.0);
        let grid = Grid1d::new(40.0, 1024).unwrap();
        let u0 = make_initial_data(InitialKind::AmplitudeScaled, &prof, 1.1, 0.0, &grid).unwrap();
        let run = |dt: f64, scheme| {
            let cfg = EvolutionConfig { dt, t_end: 0.5, diagnostics_every: 1, scheme, energy_jump_tol: 1.0, ..Default::default() };
            evolve(u0.clone(), &params, &cfg, None).unwrap().field
        };
        let reference = run(1e-3, Scheme::Yoshida4);
        let err = |f: &WaveField| {
            f.values.iter().zip(&reference.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
        };
        let e1 = err(&run(0.02, Scheme::Strang));
        let e2 = err(&run(0.01, Scheme::Strang));
        let order = (e1 / e2).log2();
        assert!(order >= 1.9, "observed order {order}");
    }

    #[test]
    fn virial_points_need_samples() {
        let diag = EvolutionDiagnostics {
            samples: Vec::new(),
            blowup_flag: false,
            blowup_time: None,
            stop_reason: String::new(),
            steps: 0,
            dt_halvings: 0,
        };
        assert!(matches!(virial_consistency(&diag), Err(Error::InsufficientSamples { need: 5, have: 0 })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn free_flow_conserves_mass_and_energy(width in 0.5f64..3.0, k0 in -2.0f64..2.0) {
            let grid = Grid1d::new(40.0, 1024).unwrap();
            let params = ModelParams::new(1, 2.0, 3.0, 1.0).unwrap();
            let cfg = EvolutionConfig { dt: 1e-2, t_end: 0.5, linear_only: true, ..Default::default() };
            let run = evolve(gaussian(grid, width, k0), &params, &cfg, None).unwrap();
            prop_assert!(run.diagnostics.max_mass_drift() < 1e-12);
            prop_assert!(run.diagnostics.max_energy_drift() < 1e-12);
        }
    }
}
