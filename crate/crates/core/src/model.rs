//! Problem parameters, derived exponents, the instability curve γ_N(p) and
//! the regime classifier.
//!
//! The equation is `i u_t + Δu − |u|^{p−1}u + |u|^{q−1}u = 0` on R^N with
//! standing waves `e^{iωt} φ(x)` solving `−Δφ + ωφ + φ^p − φ^q = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when an exponent is compared against a critical
/// value (p = p*, q = 1 + 4/N).
pub const CRITICAL_REL_TOL: f64 = 1e-12;

/// Upper bound of an exponent range that may be infinite.
///
/// Infinity is kept out of the arithmetic: callers match on the variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExponentBound {
    Unbounded,
    Finite(f64),
}

impl ExponentBound {
    /// Whether `x` lies strictly below the bound.
    pub fn exceeds(&self, x: f64) -> bool {
        match *self {
            ExponentBound::Unbounded => true,
            ExponentBound::Finite(b) => x < b,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            ExponentBound::Unbounded => None,
            ExponentBound::Finite(b) => Some(b),
        }
    }
}

/// Dimension, nonlinearity exponents and frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: u32,
    pub p: f64,
    pub q: f64,
    pub omega: f64,
}

impl ModelParams {
    /// Builds and validates a parameter set.
    pub fn new(dim: u32, p: f64, q: f64, omega: f64) -> Result<Self> {
        let params = ModelParams { dim, p, q, omega };
        params.validate()?;
        Ok(params)
    }

    /// Checks `1 < p < q < 2* − 1` and `ω ≥ 0`.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParams("dimension must be positive".into()));
        }
        if !(self.p.is_finite() && self.q.is_finite() && self.omega.is_finite()) {
            return Err(Error::InvalidParams("p, q and omega must be finite".into()));
        }
        if self.p <= 1.0 {
            return Err(Error::InvalidParams("p must exceed 1".into()));
        }
        if self.q <= self.p {
            return Err(Error::InvalidParams("q must exceed p".into()));
        }
        if !self.sobolev_bound().exceeds(self.q) {
            return Err(Error::InvalidParams(format!(
                "q must be below the energy-critical exponent {}",
                self.sobolev_bound().finite().unwrap_or(f64::NAN)
            )));
        }
        if self.omega < 0.0 {
            return Err(Error::InvalidParams("omega must be nonnegative".into()));
        }
        Ok(())
    }

    /// Same exponents and dimension, different frequency.
    pub fn with_omega(&self, omega: f64) -> Self {
        ModelParams { omega, ..*self }
    }

    pub fn n(&self) -> f64 {
        self.dim as f64
    }

    /// α = N(p − 1)/2.
    pub fn alpha(&self) -> f64 {
        self.n() * (self.p - 1.0) / 2.0
    }

    /// β = N(q − 1)/2.
    pub fn beta(&self) -> f64 {
        self.n() * (self.q - 1.0) / 2.0
    }

    /// ρ = max(2/(p − 1), N − 2), the uniform algebraic decay rate.
    pub fn rho(&self) -> f64 {
        (2.0 / (self.p - 1.0)).max(self.n() - 2.0)
    }

    /// p* = N/(N − 2) for N ≥ 3, unbounded otherwise.
    pub fn p_star(&self) -> ExponentBound {
        p_star(self.dim)
    }

    /// Mass-critical exponent p_c = 1 + 4/N.
    pub fn p_c(&self) -> f64 {
        1.0 + 4.0 / self.n()
    }

    /// 2* − 1, i.e. (N + 2)/(N − 2) for N ≥ 3.
    pub fn sobolev_bound(&self) -> ExponentBound {
        sobolev_bound(self.dim)
    }

    /// Whether q equals or exceeds 1 + 4/N (up to [`CRITICAL_REL_TOL`]).
    pub fn q_at_least_mass_critical(&self) -> bool {
        self.q >= self.p_c() * (1.0 - CRITICAL_REL_TOL)
    }

    /// Whether q equals 1 + 4/N (up to [`CRITICAL_REL_TOL`]).
    pub fn q_is_mass_critical(&self) -> bool {
        ((self.q - self.p_c()) / self.p_c()).abs() <= CRITICAL_REL_TOL
    }
}

pub fn p_star(dim: u32) -> ExponentBound {
    if dim <= 2 {
        ExponentBound::Unbounded
    } else {
        let n = dim as f64;
        ExponentBound::Finite(n / (n - 2.0))
    }
}

pub fn sobolev_bound(dim: u32) -> ExponentBound {
    if dim <= 2 {
        ExponentBound::Unbounded
    } else {
        let n = dim as f64;
        ExponentBound::Finite((n + 2.0) / (n - 2.0))
    }
}

/// The curve γ_N(p) = (16 + N² + 6N − pN(N+2)) / (N(N + 2 − (N − 2)p)).
///
/// Errors when the denominator is not positive or p is outside (1, 2* − 1).
pub fn gamma_curve(dim: u32, p: f64) -> Result<f64> {
    if dim == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    let n = dim as f64;
    let den = n * (n + 2.0 - (n - 2.0) * p);
    if !(den > 0.0) {
        return Err(Error::Domain(format!(
            "gamma curve denominator {den} is not positive at p = {p}"
        )));
    }
    if p < 1.0 || !sobolev_bound(dim).exceeds(p) {
        return Err(Error::Domain(format!("p = {p} outside (1, 2*-1)")));
    }
    Ok((16.0 + n * n + 6.0 * n - p * n * (n + 2.0)) / den)
}

/// The fixed point p_N of γ_N: (N + √(2N) + 4) / (√N (√N + √2)).
pub fn p_threshold(dim: u32) -> f64 {
    let n = dim as f64;
    let sn = n.sqrt();
    (n + (2.0 * n).sqrt() + 4.0) / (sn * (sn + 2f64.sqrt()))
}

/// Whether the zero-frequency ground state has finite L² norm.
pub fn l2_membership(dim: u32, p: f64) -> bool {
    let n = dim as f64;
    match dim {
        1..=3 => p < 1.0 + 4.0 / n,
        4 => p <= 2.0,
        _ => true,
    }
}

/// Far-field law φ(r) ~ c r^{−exponent} (ln r)^{−log_power}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailLaw {
    pub exponent: f64,
    pub log_power: f64,
}

/// Position of p relative to p*.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayBranch {
    Subcritical,
    Critical,
    Supercritical,
}

pub fn decay_branch(dim: u32, p: f64) -> DecayBranch {
    match p_star(dim) {
        ExponentBound::Unbounded => DecayBranch::Subcritical,
        ExponentBound::Finite(ps) => {
            if ((p - ps) / ps).abs() <= CRITICAL_REL_TOL {
                DecayBranch::Critical
            } else if p < ps {
                DecayBranch::Subcritical
            } else {
                DecayBranch::Supercritical
            }
        }
    }
}

/// Decay law of the zero-frequency ground state.
pub fn expected_decay(params: &ModelParams) -> Result<TailLaw> {
    if params.omega != 0.0 {
        return Err(Error::Domain("expected_decay requires omega = 0".into()));
    }
    let n = params.n();
    Ok(match decay_branch(params.dim, params.p) {
        DecayBranch::Subcritical => TailLaw {
            exponent: 2.0 / (params.p - 1.0),
            log_power: 0.0,
        },
        DecayBranch::Critical => TailLaw {
            exponent: n - 2.0,
            log_power: (n - 2.0) / 2.0,
        },
        DecayBranch::Supercritical => TailLaw {
            exponent: n - 2.0,
            log_power: 0.0,
        },
    })
}

/// Constant in the log-corrected tail at p = p*: ((N − 2)/√2)^{N − 2}.
pub fn log_tail_constant(dim: u32) -> f64 {
    let n = dim as f64;
    ((n - 2.0) / 2f64.sqrt()).powf(n - 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeTag {
    StronglyUnstable,
    UnstableSmallOmega,
    StableLargeOmegaCited,
    Unknown,
}

/// Stability verdict with a short statement of the result it rests on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub tag: RegimeTag,
    pub citation: String,
}

/// Frequency thresholds used by [`classify_regime`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegimeThresholds {
    pub omega0: f64,
    pub omega1: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds {
            omega0: 0.1,
            omega1: 10.0,
        }
    }
}

/// Maps parameters onto the known stability verdicts.
pub fn classify_regime(params: &ModelParams, thresholds: &RegimeThresholds) -> RegimeLabel {
    if params.q_at_least_mass_critical() {
        return RegimeLabel {
            tag: RegimeTag::StronglyUnstable,
            citation: "strong instability by virial blowup for q >= 1+4/N, every omega >= 0"
                .into(),
        };
    }
    let gamma = gamma_curve(params.dim, params.p).ok();
    if let Some(g) = gamma {
        if g < params.q && params.omega <= thresholds.omega0 {
            return RegimeLabel {
                tag: RegimeTag::UnstableSmallOmega,
                citation: format!(
                    "orbital instability for small omega when gamma_N(p) = {g:.6} < q < 1+4/N \
                     (omega0 = {} is a configured threshold)",
                    thresholds.omega0
                ),
            };
        }
    }
    if params.omega >= thresholds.omega1 {
        return RegimeLabel {
            tag: RegimeTag::StableLargeOmegaCited,
            citation: format!(
                "cited: stability for large omega when q < 1+4/N, by perturbation from the \
                 single-power problem (omega1 = {} is a configured threshold)",
                thresholds.omega1
            ),
        };
    }
    RegimeLabel {
        tag: RegimeTag::Unknown,
        citation: String::new(),
    }
}
