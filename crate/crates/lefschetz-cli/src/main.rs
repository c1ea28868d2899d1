//! Batch front-end: uniformizing flows on one mesh, families over a sampled
//! base, and signature reports for factorization words.
//!
//! Results go to stdout and the output directory; diagnostics go to stderr.
//! Exit codes: 0 success, 1 error, 2 flow stopped at the time cap, 3 word is
//! not an identity factorization.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use lefschetz::exec::Parallelism;
use lefschetz::fibered::{
    export_family, loop_continuity, make_family, run_family_with, uniform_envelope, BaseKind,
    BaseSample, DEFAULT_FINGERPRINT_MODES,
};
use lefschetz::flow::{run_flow, write_trace_csv, FlowConfig, TargetCurvature, Termination};
use lefschetz::mcg::read_word;
use lefschetz::mesh::io::read_mesh;
use lefschetz::meyer::{fibration_signature, report_json, MeyerError};

#[derive(Parser)]
#[command(name = "lefschetz", version, about = "fibered uniformization flows and signature reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the uniformizing flow on a mesh and write trace.csv + summary.json.
    Flow {
        /// Mesh file.
        mesh: PathBuf,
        /// TOML config overlaying the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a family over a sampled base and export the family directory.
    Family {
        /// Mesh file (the common fiber).
        mesh: PathBuf,
        /// TOML config overlaying the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the signature report of a factorization word.
    Signature {
        /// Word file.
        word: PathBuf,
        /// Output directory for report.json.
        #[arg(long)]
        out: PathBuf,
    },
}

/// `[flow]` keys, each optional over [`FlowConfig::default`].
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowSection {
    dt_init: Option<f64>,
    dt_max: Option<f64>,
    tol: Option<f64>,
    t_max: Option<f64>,
    step_rule: Option<String>,
    monitor_every: Option<usize>,
}

/// `[family]` keys, each optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilySection {
    /// "loop", "disk-grid" or "sphere-mesh".
    base: Option<String>,
    /// Loop sample count (including the closing point).
    points: Option<usize>,
    rows: Option<usize>,
    cols: Option<usize>,
    amplitude: Option<f64>,
    seed: Option<u64>,
    /// Fingerprint mode count.
    modes: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    flow: FlowSection,
    #[serde(default)]
    family: FamilySection,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn flow_config(section: &FlowSection) -> Result<FlowConfig> {
    let mut cfg = FlowConfig::default();
    if let Some(v) = section.dt_init {
        cfg.dt_init = v;
    }
    if let Some(v) = section.dt_max {
        cfg.dt_max = v;
    }
    if let Some(v) = section.tol {
        cfg.tol = v;
    }
    if let Some(v) = section.t_max {
        cfg.t_max = v;
    }
    if let Some(rule) = &section.step_rule {
        cfg.step_rule = rule.parse().map_err(anyhow::Error::msg)?;
    }
    if let Some(v) = section.monitor_every {
        cfg.monitor_every = v;
    }
    cfg.check()?;
    Ok(cfg)
}

fn base_sample(section: &FamilySection) -> Result<BaseSample> {
    let kind = section.base.as_deref().unwrap_or("loop");
    match kind {
        "loop" => Ok(BaseSample::loop_circle(section.points.unwrap_or(8))),
        "disk-grid" => Ok(BaseSample::disk_grid(
            section.rows.unwrap_or(3),
            section.cols.unwrap_or(3),
        )),
        "sphere-mesh" => Ok(BaseSample::sphere_mesh()),
        other => bail!("unknown base kind {other:?} (expected loop, disk-grid or sphere-mesh)"),
    }
}

#[derive(Serialize)]
struct FlowSummary {
    converged: bool,
    t_final: f64,
    fitted_rate: Option<f64>,
    r2: Option<f64>,
}

fn cmd_flow(mesh: &Path, config: Option<&Path>, out: &Path) -> Result<i32> {
    let cfg = flow_config(&load_config(config)?.flow)?;
    let surface = Arc::new(read_mesh(mesh).with_context(|| format!("mesh {}", mesh.display()))?);
    let state0 = lefschetz::mesh::ConformalState::reference(surface.clone());
    let target = TargetCurvature::uniform(&surface);

    let (_, trace) = run_flow(&state0, &target, &cfg)?;

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_trace_csv(&trace, out.join("trace.csv"))?;
    let summary = FlowSummary {
        converged: trace.terminated == Termination::Converged,
        t_final: trace.samples.last().expect("trace has samples").t,
        fitted_rate: trace.fitted_rate,
        r2: trace.fit.as_ref().map(|f| f.r2),
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(out.join("summary.json"), &text)?;

    match trace.terminated {
        Termination::Converged => {
            println!(
                "converged t_final={} rate={}",
                summary.t_final,
                summary
                    .fitted_rate
                    .map_or_else(|| "none".to_string(), |r| r.to_string())
            );
            Ok(0)
        }
        Termination::TimeCap => {
            println!("time-cap t_final={}", summary.t_final);
            Ok(2)
        }
        Termination::Degenerate => bail!("flow degenerated"),
    }
}

fn cmd_family(mesh: &Path, config: Option<&Path>, out: &Path) -> Result<i32> {
    let file = load_config(config)?;
    let cfg = flow_config(&file.flow)?;
    let surface = Arc::new(read_mesh(mesh).with_context(|| format!("mesh {}", mesh.display()))?);
    let base = base_sample(&file.family)?;
    let amplitude = file.family.amplitude.unwrap_or(0.1);
    let seed = file.family.seed.unwrap_or(0);
    let modes = file.family.modes.unwrap_or(DEFAULT_FINGERPRINT_MODES);

    let family = make_family(&surface, base, amplitude, seed);
    let run = run_family_with(&family, &cfg, Parallelism::from_env())?;
    export_family(&run, out, modes)?;
    let envelope = uniform_envelope(&run)?;

    let mut line = format!(
        "fibers={} rate={} r2={} bound={}",
        run.base().len(),
        envelope.rate,
        envelope.r2,
        if envelope.bound_satisfied { "ok" } else { "exceeded" }
    );
    if run.base().kind() == BaseKind::Loop {
        let continuity = loop_continuity(&run, modes)?;
        line.push_str(&format!(
            " max_gap={} closed={}",
            continuity.max_gap, continuity.closed
        ));
    }
    println!("{line}");
    Ok(0)
}

fn cmd_signature(word_path: &Path, out: &Path) -> Result<i32> {
    let word =
        read_word(word_path).with_context(|| format!("word {}", word_path.display()))?;
    match fibration_signature(&word) {
        Ok(report) => {
            std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
            std::fs::write(out.join("report.json"), report_json(&report))?;
            println!(
                "sigma={} c1={} delta={}",
                report.sigma, report.c1_pairing, report.delta_pairing
            );
            Ok(0)
        }
        Err(MeyerError::NonIdentity { product }) => {
            eprintln!("error: word is not an identity factorization; total product:");
            eprintln!("{product}");
            Ok(3)
        }
        Err(err) => Err(err.into()),
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Flow { mesh, config, out } => cmd_flow(mesh, config.as_deref(), out),
        Command::Family { mesh, config, out } => cmd_family(mesh, config.as_deref(), out),
        Command::Signature { word, out } => cmd_signature(word, out),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}
