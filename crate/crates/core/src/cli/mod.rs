//! `dpnls` command-line front end.
//!
//! Every subcommand reads one [`RunConfig`], writes CSV/JSON artifacts into
//! an output directory it locks for the duration of the run, and finishes
//! with `manifest.json`. Exit codes: 0 success (including detected blowup or
//! escape), 2 numerical failure, 3 validation failure.

pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

pub use config::{EvolveMode, RunConfig, FORMAT_VERSION, PRESETS};
use output::{fmt_f64, fmt_opt, OutputDir};

use crate::asymptotics::{fit_tail, zero_mass_limit_study};
use crate::error::{Error, Result};
use crate::evolution::{
    evolve, instability_escape_test, make_initial_data, sample_profile, virial_consistency, EscapeConfig,
    EvolutionDiagnostics, WaveField,
};
use crate::functionals::{
    compute_report_with, d_curve, nehari_rescale, strauss_bound_check, strauss_margin_with_constant,
    strauss_proof_constant, virial_scaling_root, FunctionalReport,
};
use crate::groundstate::{first_integral_amplitude, solve_ground_state, RadialProfile};
use crate::model::{classify_regime, gamma_curve, p_threshold, sobolev_bound, RegimeThresholds};
use crate::stability::sign_equivalence_sweep;

/// Relative tolerance of the Pohozaev checks, in units of ‖∇φ‖².
pub const POHOZAEV_TOL: f64 = 1e-6;
/// Orbit-preservation tolerance for stationary runs.
pub const ORBIT_TOL: f64 = 1e-6;
/// Fraction of sweep rows that must succeed.
pub const SWEEP_SUCCESS: f64 = 0.9;

#[derive(Debug, Parser)]
#[command(name = "dpnls", version, about = "Ground states and standing-wave instability for double-power NLS")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Built-in configuration.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Treat divergent norms as errors.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the ground state and evaluate its functionals.
    Groundstate(CommonArgs),
    /// Functionals, rescalings and the d(ω) table.
    Functionals(CommonArgs),
    /// Sign of the ω = 0 scaling second derivative over a (p, q) grid.
    StabilityMap {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write the boundary polyline as a tidy CSV.
        #[arg(long)]
        plot_data: bool,
    },
    /// Fit the far-field decay law of the ground state.
    DecayFit(CommonArgs),
    /// Compare φ_ω with φ_0 along a frequency sequence.
    ZeroMass(CommonArgs),
    /// Split-step evolution of ground-state based initial data (N = 1).
    Evolve(CommonArgs),
    /// Print the default configuration (or a preset) as TOML.
    Defaults {
        #[arg(long, value_name = "NAME")]
        preset: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Groundstate(_) => "groundstate",
            Command::Functionals(_) => "functionals",
            Command::StabilityMap { .. } => "stability-map",
            Command::DecayFit(_) => "decay-fit",
            Command::ZeroMass(_) => "zero-mass",
            Command::Evolve(_) => "evolve",
            Command::Defaults { .. } => "defaults",
        }
    }
}

/// Result of a subcommand: named pass/fail checks and a one-line summary.
#[derive(Debug, Default, Serialize)]
pub struct Outcome {
    pub checks: BTreeMap<String, bool>,
    pub summary: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: String,
    files: Vec<String>,
    started_at_unix: u64,
    wall_time_seconds: f64,
    software_version: &'static str,
    checks: &'a BTreeMap<String, bool>,
    summary: &'a str,
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        3
    } else {
        2
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => RunConfig::from_toml(&std::fs::read_to_string(path)?)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output_dir = out.to_string_lossy().into_owned();
    }
    if common.strict {
        cfg.quadrature.policy = config::Policy::Strict;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Applies `DPNLS_THREADS` to the global rayon pool.
fn configure_threads() {
    if let Some(n) = std::env::var("DPNLS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    run(cli.command)
}

pub fn run(command: Command) -> i32 {
    configure_threads();
    if let Command::Defaults { preset } = &command {
        return match preset.as_deref().map(RunConfig::preset).unwrap_or_else(|| Ok(RunConfig::default())) {
            Ok(cfg) => {
                print!("{}", cfg.to_toml());
                0
            }
            Err(e) => report_error(&e, None),
        };
    }
    let common = match &command {
        Command::Groundstate(c) | Command::Functionals(c) | Command::DecayFit(c) | Command::ZeroMass(c) | Command::Evolve(c) => c,
        Command::StabilityMap { common, .. } => common,
        Command::Defaults { .. } => unreachable!(),
    };
    let cfg = match load_config(common) {
        Ok(c) => c,
        Err(e) => return report_error(&e, common.out.clone()),
    };
    let dir = PathBuf::from(&cfg.output_dir);
    match execute(&command, &cfg) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            0
        }
        Err(e) => report_error(&e, Some(dir)),
    }
}

fn report_error(err: &Error, dir: Option<PathBuf>) -> i32 {
    let code = exit_code(err);
    let doc = json!({
        "format_version": FORMAT_VERSION,
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": code,
    });
    eprintln!("{doc}");
    if let Some(dir) = dir {
        if dir.is_dir() {
            let _ = std::fs::write(dir.join("error.json"), format!("{doc:#}\n"));
        }
    }
    code
}

/// Runs a subcommand against an already validated configuration.
pub fn execute(command: &Command, cfg: &RunConfig) -> Result<Outcome> {
    let started = Instant::now();
    let started_at_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut out = OutputDir::acquire(&PathBuf::from(&cfg.output_dir))?;
    let _ = std::fs::remove_file(out.path().join("error.json"));
    std::fs::write(out.path().join("config.toml"), cfg.canonical_toml())?;
    let outcome = match command {
        Command::Groundstate(_) => cmd_groundstate(cfg, &mut out)?,
        Command::Functionals(_) => cmd_functionals(cfg, &mut out)?,
        Command::StabilityMap { plot_data, .. } => cmd_stability_map(cfg, *plot_data, &mut out)?,
        Command::DecayFit(_) => cmd_decay_fit(cfg, &mut out)?,
        Command::ZeroMass(_) => cmd_zero_mass(cfg, &mut out)?,
        Command::Evolve(_) => cmd_evolve(cfg, &mut out)?,
        Command::Defaults { .. } => return Err(Error::InvalidParams("defaults writes no artifacts".into())),
    };
    let mut files = vec!["config.toml".to_string()];
    files.extend(out.files().iter().cloned());
    files.push("manifest.json".into());
    let manifest = Manifest {
        command: command.name(),
        config_hash: cfg.hash(),
        files,
        started_at_unix,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        software_version: env!("CARGO_PKG_VERSION"),
        checks: &outcome.checks,
        summary: &outcome.summary,
    };
    out.write_json("manifest.json", &manifest)?;
    Ok(outcome)
}

fn solve(cfg: &RunConfig) -> Result<(RadialProfile, FunctionalReport)> {
    let profile = solve_ground_state(&cfg.model, &cfg.shooting)?;
    let report = compute_report_with(&profile, &cfg.model, cfg.quadrature.policy.into())?;
    Ok((profile, report))
}

fn write_profile(out: &mut OutputDir, profile: &RadialProfile) -> Result<()> {
    let rows: Vec<Vec<String>> = profile
        .r_grid
        .iter()
        .zip(&profile.values)
        .zip(&profile.derivs)
        .map(|((r, v), d)| vec![fmt_f64(*r), fmt_f64(*v), fmt_f64(*d)])
        .collect();
    out.write_csv("profile.csv", &["r", "phi", "dphi"], &rows)?;
    out.write_json(
        "profile.meta.json",
        &json!({
            "params": profile.params,
            "amplitude": profile.amplitude(),
            "r_max": profile.r_max(),
            "grid_points": profile.r_grid.len(),
            "far_field_points": profile.far_field.len(),
            "tail": profile.tail,
            "diagnostics": profile.diagnostics,
        }),
    )
}

fn cmd_groundstate(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let (profile, report) = solve(cfg)?;
    write_profile(out, &profile)?;
    let oracle = if cfg.model.dim == 1 { first_integral_amplitude(&cfg.model).ok() } else { None };
    let k_ok = report.pohozaev_residual_k.abs() <= POHOZAEV_TOL;
    let p_ok = report.pohozaev_residual_p.abs() <= POHOZAEV_TOL;
    let strauss_unit = strauss_bound_check(&profile, &report);
    let strauss_proof =
        strauss_margin_with_constant(&profile, &report, strauss_proof_constant(cfg.model.dim, cfg.model.p));
    out.write_json(
        "report.json",
        &json!({
            "amplitude": profile.amplitude(),
            "first_integral_amplitude": oracle,
            "report": report,
            "pohozaev_tolerance": POHOZAEV_TOL,
            "checks": { "pohozaev_k": k_ok, "pohozaev_p": p_ok },
            "strauss_margin_unit_constant": strauss_unit,
            "strauss_margin_proof_constant": strauss_proof,
            "regime": classify_regime(&cfg.model, &RegimeThresholds::default()),
        }),
    )?;
    let mut checks = BTreeMap::new();
    checks.insert("pohozaev_k".into(), k_ok);
    checks.insert("pohozaev_p".into(), p_ok);
    Ok(Outcome {
        checks,
        summary: format!(
            "ground state amplitude {:.10} (K/G = {:.2e}, P/G = {:.2e})",
            profile.amplitude(),
            report.pohozaev_residual_k,
            report.pohozaev_residual_p
        ),
    })
}

fn cmd_functionals(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let (_, report) = solve(cfg)?;
    let nehari = nehari_rescale(&report, &cfg.model).map_err(|e| e.to_string());
    let virial = virial_scaling_root(&report, &cfg.model).map_err(|e| e.to_string());
    let mut checks = BTreeMap::new();
    let mut curve_json = serde_json::Value::Null;
    if !cfg.functionals.omega_grid.is_empty() {
        let curve = d_curve(&cfg.functionals.omega_grid, &cfg.model, &cfg.shooting)?;
        let rows: Vec<Vec<String>> = curve
            .points
            .iter()
            .map(|p| {
                vec![fmt_f64(p.omega), fmt_opt(p.d), fmt_opt(p.mass), p.mass_divergent.to_string(), p.status.clone()]
            })
            .collect();
        out.write_csv("d_curve.csv", &["omega", "d", "mass", "mass_divergent", "status"], &rows)?;
        checks.insert("d_strictly_increasing".into(), curve.strictly_increasing);
        checks.insert("d_positive".into(), curve.all_positive);
        curve_json = json!({ "strictly_increasing": curve.strictly_increasing, "all_positive": curve.all_positive });
    }
    out.write_json(
        "functionals.json",
        &json!({
            "report": report,
            "nehari_rescale": nehari.as_ref().ok(),
            "nehari_rescale_error": nehari.as_ref().err(),
            "virial_scaling_root": virial.as_ref().ok(),
            "virial_scaling_root_error": virial.as_ref().err(),
            "d_curve": curve_json,
        }),
    )?;
    Ok(Outcome { checks, summary: format!("action {:.10e}, virial {:.3e}", report.action, report.virial) })
}

/// γ_N(p) sampled over its admissible p range.
fn gamma_polyline(dim: u32, samples: usize) -> Vec<[f64; 2]> {
    let upper = sobolev_bound(dim).finite().unwrap_or(1.0 + 4.0 / dim as f64 + 2.0);
    let hi = upper.min(1.0 + 4.0 / dim as f64);
    (0..samples.max(2))
        .filter_map(|i| {
            let p = 1.0 + (hi - 1.0) * i as f64 / (samples.max(2) - 1) as f64;
            gamma_curve(dim, p).ok().map(|g| [p, g])
        })
        .collect()
}

fn cmd_stability_map(cfg: &RunConfig, plot_data: bool, out: &mut OutputDir) -> Result<Outcome> {
    let grid = &cfg.stability.pq_grid;
    if grid.is_empty() {
        return Err(Error::InvalidParams("stability.pq_grid is empty".into()));
    }
    let dim = cfg.model.dim;
    let pairs: Vec<(f64, f64)> = grid.iter().map(|&[p, q]| (p, q)).collect();
    let table = sign_equivalence_sweep(dim, &pairs, &cfg.shooting);
    let sgn = |s: Option<i8>| s.map(|v| v.to_string()).unwrap_or_default();
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.p),
                fmt_f64(r.q),
                fmt_opt(r.gamma),
                sgn(r.sign_closed_form),
                sgn(r.sign_gamma_test),
                r.agreement.map(|a| a.to_string()).unwrap_or_default(),
                r.near_degenerate.to_string(),
                fmt_opt(r.fd_relative_disagreement),
                r.status.clone(),
            ]
        })
        .collect();
    out.write_csv(
        "sweep.csv",
        &[
            "p",
            "q",
            "gamma",
            "sign_closed_form",
            "sign_gamma_test",
            "agreement",
            "near_degenerate",
            "fd_relative_disagreement",
            "status",
        ],
        &rows,
    )?;
    let boundary = gamma_polyline(dim, cfg.stability.boundary_samples);
    out.write_json(
        "regions.json",
        &json!({
            "dim": dim,
            "p_threshold": p_threshold(dim),
            "mass_critical": 1.0 + 4.0 / dim as f64,
            "boundary": boundary,
            "decided": table.decided,
            "agreeing": table.agreeing,
            "near_degenerate": table.near_degenerate,
            "failures": table.failures,
        }),
    )?;
    if plot_data {
        let rows: Vec<Vec<String>> = boundary.iter().map(|[p, g]| vec![fmt_f64(*p), fmt_f64(*g)]).collect();
        out.write_csv("boundary.csv", &["p", "gamma"], &rows)?;
    }
    let succeeded = table.rows.len() - table.failures;
    if (succeeded as f64) < SWEEP_SUCCESS * table.rows.len() as f64 {
        return Err(Error::PartialFailure(format!("{succeeded} of {} rows succeeded", table.rows.len())));
    }
    let mut checks = BTreeMap::new();
    checks.insert("sign_agreement".into(), table.full_agreement());
    Ok(Outcome {
        checks,
        summary: format!(
            "{} of {} decided pairs agree with the gamma curve ({} near-degenerate, {} failed)",
            table.agreeing, table.decided, table.near_degenerate, table.failures
        ),
    })
}

fn cmd_decay_fit(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let profile = solve_ground_state(&cfg.model, &cfg.shooting)?;
    let fit = fit_tail(&profile)?;
    out.write_json("decay.json", &fit)?;
    let (target, label) = match (fit.theory, fit.expected_rate) {
        (Some(law), _) => (law.exponent, "exponent"),
        (None, Some(rate)) => (rate, "rate"),
        _ => (f64::NAN, "exponent"),
    };
    let rel = ((fit.fitted_exponent - target) / target).abs();
    let mut checks = BTreeMap::new();
    checks.insert("within_2_percent".into(), rel <= 0.02);
    Ok(Outcome {
        checks,
        summary: format!("fitted {label} {:.6} (expected {:.6}, relative error {:.2e})", fit.fitted_exponent, target, rel),
    })
}

fn cmd_zero_mass(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let zm = &cfg.zero_mass;
    let study = zero_mass_limit_study(&cfg.model, &zm.omega_sequence, &cfg.shooting, &zm.limit)?;
    let rows: Vec<Vec<String>> = study
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.omega),
                fmt_opt(r.delta_h1dot),
                fmt_opt(r.delta_lp1),
                fmt_opt(r.delta_l2),
                fmt_opt(r.d_gap),
                fmt_opt(r.mass_times_omega),
                fmt_opt(r.k0_identity_residual),
                r.status.clone(),
            ]
        })
        .collect();
    out.write_csv(
        "limit.csv",
        &["omega", "delta_h1dot", "delta_lp1", "delta_l2", "d_gap", "mass_times_omega", "k0_identity_residual", "status"],
        &rows,
    )?;
    let mut checks = BTreeMap::new();
    checks.insert("deltas_nonincreasing".into(), study.deltas_nonincreasing);
    checks.insert("final_below_tolerance".into(), study.final_below_tolerance);
    checks.insert("identity_holds".into(), study.identity_holds);
    checks.insert("mass_times_omega_decreasing".into(), study.mass_times_omega_decreasing);
    let failed = study.rows.iter().filter(|r| r.status != "ok").count();
    Ok(Outcome {
        checks,
        summary: format!("{} frequencies ({} failed), d(0) = {:.10e}", study.rows.len(), failed, study.d_zero),
    })
}

fn write_diag(out: &mut OutputDir, rel: &str, diag: &EvolutionDiagnostics) -> Result<()> {
    let n = diag.samples.len();
    let rows: Vec<Vec<String>> = diag
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut flags = Vec::new();
            if diag.blowup_flag && i + 1 == n {
                flags.push("blowup");
            }
            if !s.regular {
                flags.push("irregular");
            }
            vec![
                fmt_f64(s.t),
                fmt_f64(s.energy),
                fmt_f64(s.mass),
                fmt_f64(s.virial),
                fmt_f64(s.variance),
                fmt_f64(s.grad_norm),
                fmt_opt(s.distance),
                fmt_f64(s.boundary_mass),
                fmt_f64(s.dt),
                flags.join("|"),
            ]
        })
        .collect();
    out.write_csv(
        rel,
        &["t", "energy", "mass", "virial", "variance", "grad_norm", "distance", "boundary_mass", "dt", "flags"],
        &rows,
    )
}

fn write_snapshot(out: &mut OutputDir, field: &WaveField) -> Result<()> {
    let rows: Vec<Vec<String>> = field
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| vec![fmt_f64(field.grid.x(j)), fmt_f64(v.re), fmt_f64(v.im)])
        .collect();
    out.write_csv(&format!("snapshots/t{:012.6}.csv", field.t), &["x", "re", "im"], &rows)
}

fn cmd_evolve(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let ev = &cfg.evolution;
    if cfg.model.dim != 1 {
        return Err(Error::Domain("evolution is implemented for N = 1 only".into()));
    }
    let profile = solve_ground_state(&cfg.model, &cfg.shooting)?;
    let reference = sample_profile(&profile, &ev.grid);
    let u0 = make_initial_data(ev.initial, &profile, ev.lambda, ev.cutoff_radius, &ev.grid)?;
    let mut checks = BTreeMap::new();
    let summary;
    match ev.mode {
        EvolveMode::Run => {
            let run = evolve(u0, &cfg.model, &ev.integrator, Some(&reference))?;
            let d = &run.diagnostics;
            write_diag(out, "diag.csv", d)?;
            for snap in &run.snapshots {
                write_snapshot(out, snap)?;
            }
            let virial = virial_consistency(d).ok();
            let max_dist = d.max_distance().unwrap_or(f64::NAN);
            checks.insert("blowup_detected".into(), d.blowup_flag);
            if d.blowup_flag {
                summary = format!(
                    "blowup detected at t = {:.6} ({}): strong instability of the standing wave at the mass-critical exponent",
                    d.blowup_time.unwrap_or(f64::NAN),
                    d.stop_reason
                );
            } else {
                checks.insert("orbit_preserved".into(), max_dist <= ORBIT_TOL);
                checks.insert("virial_consistent".into(), virial.is_some_and(|v| v <= 1e-3));
                summary = if max_dist <= ORBIT_TOL {
                    format!("orbit preserved: max orbital distance {max_dist:.3e}")
                } else {
                    format!("orbit not preserved within {ORBIT_TOL:e}: max orbital distance {max_dist:.3e}")
                };
            }
            out.write_json(
                "evolution.json",
                &json!({
                    "stop_reason": d.stop_reason,
                    "blowup_flag": d.blowup_flag,
                    "blowup_time": d.blowup_time,
                    "steps": d.steps,
                    "dt_halvings": d.dt_halvings,
                    "max_energy_drift": d.max_energy_drift(),
                    "max_mass_drift": d.max_mass_drift(),
                    "max_boundary_mass": d.max_boundary_mass(),
                    "max_distance": d.max_distance(),
                    "virial_consistency": virial,
                    "distance_resolution": ev.grid.dx(),
                }),
            )?;
        }
        EvolveMode::Escape => {
            let rep = instability_escape_test(u0, &reference, &cfg.model, &ev.integrator, &ev.escape)?;
            write_diag(out, "diag.csv", &rep.diagnostics)?;
            let control = if ev.control_run {
                let c0 = make_initial_data(ev.initial, &profile, 1.0, ev.cutoff_radius, &ev.grid)?;
                let esc = EscapeConfig { reference_distance: Some(rep.initial_distance), ..ev.escape };
                let c = instability_escape_test(c0, &reference, &cfg.model, &ev.integrator, &esc)?;
                write_diag(out, "control_diag.csv", &c.diagnostics)?;
                Some(c)
            } else {
                None
            };
            let escaped = rep.escape_time.is_some();
            checks.insert("escape_observed".into(), escaped);
            checks.insert("virial_negative_in_tube".into(), rep.virial_negative_in_tube);
            if let Some(c) = &control {
                checks.insert("control_no_escape".into(), c.escape_time.is_none());
            }
            summary = if escaped {
                format!(
                    "escape observed at t = {:.4}: instability for small frequencies when q exceeds the gamma curve",
                    rep.escape_time.unwrap()
                )
            } else {
                format!("no escape within t_end = {}", ev.integrator.t_end)
            };
            let strip = |r: &crate::evolution::EscapeReport| {
                json!({
                    "initial_distance": r.initial_distance,
                    "threshold": r.threshold,
                    "escape_time": r.escape_time,
                    "max_distance": r.max_distance,
                    "min_neg_virial_in_tube": r.min_neg_virial_in_tube,
                    "virial_negative_in_tube": r.virial_negative_in_tube,
                    "in_tube_samples": r.in_tube_samples,
                })
            };
            out.write_json(
                "evolution.json",
                &json!({
                    "escape": strip(&rep),
                    "control": control.as_ref().map(strip),
                    "distance_resolution": ev.grid.dx(),
                    "escape_factor_note": "escape factor and t_end are empirical choices",
                }),
            )?;
        }
    }
    Ok(Outcome { checks, summary })
}
