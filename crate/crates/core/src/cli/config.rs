//! Run configuration: one TOML document with a section per module.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asymptotics::LimitConfig;
use crate::error::{Error, Result};
use crate::evolution::{EscapeConfig, EvolutionConfig, Grid1d, InitialKind};
use crate::functionals::NormPolicy;
use crate::groundstate::ShootingConfig;
use crate::model::ModelParams;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    /// Reserved. Every algorithm is deterministic.
    pub seed: u64,
    /// Where artifacts go. Not part of the canonical rendering or the hash.
    #[serde(skip_serializing_if = "String::is_empty")]
    pub output_dir: String,
    pub model: ModelParams,
    pub shooting: ShootingConfig,
    pub quadrature: QuadratureConfig,
    pub functionals: FunctionalsConfig,
    pub stability: StabilityConfig,
    pub zero_mass: ZeroMassConfig,
    pub evolution: EvolveSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub policy: Policy,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { policy: Policy::Truncate }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Truncate,
    Strict,
}

impl From<Policy> for NormPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Truncate => NormPolicy::Truncate,
            Policy::Strict => NormPolicy::Strict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FunctionalsConfig {
    /// Frequencies for the d(ω) table; empty skips it.
    pub omega_grid: Vec<f64>,
}

impl Default for FunctionalsConfig {
    fn default() -> Self {
        FunctionalsConfig { omega_grid: (0..=10).map(|i| i as f64 / 10.0).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub pq_grid: Vec<[f64; 2]>,
    /// Samples of the γ_N boundary polyline.
    pub boundary_samples: usize,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        let mut pq_grid = Vec::new();
        for &p in &[1.5, 2.0, 2.5, 3.0, 3.5] {
            for &q in &[2.2, 2.8, 3.4, 4.0, 4.6] {
                if q > p {
                    pq_grid.push([p, q]);
                }
            }
        }
        StabilityConfig { pq_grid, boundary_samples: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroMassConfig {
    pub omega_sequence: Vec<f64>,
    pub limit: LimitConfig,
}

impl Default for ZeroMassConfig {
    fn default() -> Self {
        ZeroMassConfig { omega_sequence: vec![0.5, 0.1, 0.02, 0.004], limit: LimitConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvolveMode {
    /// Plain evolution with blowup and orbit diagnostics.
    Run,
    /// Orbital escape test against a reference distance.
    Escape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSection {
    pub mode: EvolveMode,
    pub initial: InitialKind,
    pub lambda: f64,
    pub cutoff_radius: f64,
    pub grid: Grid1d,
    pub integrator: EvolutionConfig,
    pub escape: EscapeConfig,
    /// Also run λ = 1 in escape mode, measured against the perturbed run's distance.
    pub control_run: bool,
}

impl Default for EvolveSection {
    fn default() -> Self {
        EvolveSection {
            mode: EvolveMode::Run,
            initial: InitialKind::AmplitudeScaled,
            lambda: 1.0,
            cutoff_radius: 10.0,
            grid: Grid1d { half_length: 40.0, points: 4096 },
            integrator: EvolutionConfig::default(),
            escape: EscapeConfig::default(),
            control_run: true,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            format_version: FORMAT_VERSION,
            seed: 0,
            output_dir: "out".into(),
            model: ModelParams { dim: 1, p: 3.0, q: 5.0, omega: 0.0 },
            shooting: ShootingConfig::default(),
            quadrature: QuadratureConfig::default(),
            functionals: FunctionalsConfig::default(),
            stability: StabilityConfig::default(),
            zero_mass: ZeroMassConfig::default(),
            evolution: EvolveSection::default(),
        }
    }
}

pub const PRESETS: &[&str] = &["zero-mass", "strong-instability", "stationary", "small-omega"];

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidParams(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// The configuration without its output location.
    pub fn canonical_toml(&self) -> String {
        RunConfig { output_dir: String::new(), ..self.clone() }.to_toml()
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::InvalidParams(format!(
                "format_version {} does not match {FORMAT_VERSION}",
                self.format_version
            )));
        }
        self.model.validate()?;
        self.shooting.validate()?;
        self.evolution.integrator.validate()?;
        Ok(())
    }

    pub fn preset(name: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        match name {
            "zero-mass" => {}
            "strong-instability" => {
                cfg.model = ModelParams { dim: 1, p: 2.0, q: 5.0, omega: 1.0 };
                cfg.evolution.lambda = 1.1;
                cfg.evolution.grid = Grid1d { half_length: 40.0, points: 8192 };
                cfg.evolution.integrator.t_end = 5.0;
            }
            "stationary" => {
                cfg.model = ModelParams { dim: 1, p: 2.0, q: 3.0, omega: 1.0 };
                cfg.evolution.grid = Grid1d { half_length: 50.0, points: 2048 };
                cfg.evolution.integrator.diagnostics_every = 100;
            }
            "small-omega" => {
                cfg.model = ModelParams { dim: 1, p: 2.0, q: 4.8, omega: 0.01 };
                cfg.evolution.mode = EvolveMode::Escape;
                cfg.evolution.initial = InitialKind::CutoffL2Scaled;
                cfg.evolution.lambda = 1.01;
                cfg.evolution.cutoff_radius = 100.0;
                cfg.evolution.grid = Grid1d { half_length: 400.0, points: 4096 };
                cfg.evolution.integrator.dt = 0.01;
                cfg.evolution.integrator.diagnostics_every = 50;
            }
            other => {
                return Err(Error::InvalidParams(format!(
                    "unknown preset {other:?}; known presets: {}",
                    PRESETS.join(", ")
                )))
            }
        }
        Ok(cfg)
    }
}
