//! `qpl`: run single trajectories, ensembles and scaling studies of the
//! continuous parity measurement, and export record files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qpl_core::ensemble::{run_ensemble, scaling_study, ScalingBranch};
use qpl_core::filter_reduced::{run_on_trajectory, REDUCED_COLUMNS};
use qpl_core::io::csv_out::{self, REDUCED_SCHEMA, TRAJECTORY_SCHEMA};
use qpl_core::io::{read_record, svg, write_record, RunConfig};
use qpl_core::sde_physical::{default_initial_state, simulate_opts, SimOptions, TrajectoryRecord};
use qpl_core::{AlphaSchedule, Error, ReducedKet, SystemParams};

/// Window of the plotted homodyne moving average, in time units.
const MA_WINDOW: f64 = 1.0;

#[derive(Parser, Debug)]
#[command(name = "qpl", version, about = "Continuous two-qubit parity measurement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides outputs.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit SVG figures (sets outputs.emit_svg).
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BranchArg {
    G,
    AlphaKappa,
    Both,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One physical trajectory: record file, CSV and optional figure.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Trajectory seed (overrides ensemble.seed_base).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Trajectory ensemble: pointwise statistics and per-shot summaries.
    Ensemble {
        #[command(flatten)]
        common: Common,
        /// First seed (overrides ensemble.seed_base).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cross-driven ensembles over stretched couplings.
    Scaling {
        #[command(flatten)]
        common: Common,
        /// Comma-separated scale factors ≥ 1 (overrides scaling.scales).
        #[arg(long)]
        scales: Option<String>,
        #[arg(long, value_enum)]
        branch: Option<BranchArg>,
        /// First seed (overrides ensemble.seed_base).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Converts a binary record to CSV, optionally replaying the reduced
    /// filter on its homodyne record.
    Export {
        #[arg(long)]
        record: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        reduced: bool,
    },
}

/// Failure reported to the user as JSON on stderr.
struct Failure {
    kind: String,
    message: String,
    code: u8,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidParams(_) | Error::FockDimTooSmall { .. } => 2,
            _ => 1,
        };
        let message = match &e {
            Error::FockDimTooSmall { required, .. } => {
                format!("{e}; set params.fock_dim to {required} or more")
            }
            _ => e.to_string(),
        };
        Failure {
            kind: e.kind().to_string(),
            message,
            code,
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        kind: "usage".into(),
        message: message.into(),
        code: 2,
    }
}

type CmdResult = Result<Value, Failure>;

fn workers() -> Result<Option<usize>, Failure> {
    match std::env::var("QPL_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(usage(format!("QPL_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

fn load(common: &Common, seed: Option<u64>) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &common.out {
        cfg.outputs.dir = dir.clone();
    }
    if common.svg {
        cfg.outputs.emit_svg = true;
    }
    if let Some(s) = seed {
        cfg.ensemble.seed_base = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn write_trajectory_csv(dir: &Path, rec: &TrajectoryRecord) -> Result<Vec<PathBuf>, Failure> {
    let ma = csv_out::homodyne_moving_average(&rec.dy0, rec.dt, MA_WINDOW, &rec.observables.steps);
    let csv_path = dir.join("trajectory.csv");
    csv_out::write_table(
        &csv_path,
        TRAJECTORY_SCHEMA,
        &rec.observables,
        &[("homodyne_moving_avg", &ma)],
    )?;
    let jumps_path = dir.join("jumps.csv");
    csv_out::write_jumps(&jumps_path, rec)?;
    Ok(vec![csv_path, jumps_path])
}

fn cmd_simulate(common: &Common, seed: Option<u64>) -> CmdResult {
    let cfg = load(common, seed)?;
    let params = cfg.system_params();
    let dir = cfg.outputs.dir.clone();
    let seed = cfg.ensemble.seed_base;
    let rec = simulate_opts(
        &params,
        &default_initial_state(params.fock_dim),
        seed,
        SimOptions {
            decimation: cfg.outputs.decimation,
        },
    )?;
    let mut files = vec![cfg.write_echo(&dir)?];
    let rec_path = dir.join("trajectory.qplrec");
    write_record(&rec_path, &rec, &params)?;
    files.push(rec_path);
    files.extend(write_trajectory_csv(&dir, &rec)?);
    if cfg.outputs.emit_svg {
        let ma =
            csv_out::homodyne_moving_average(&rec.dy0, rec.dt, MA_WINDOW, &rec.observables.steps);
        let path = dir.join("trajectory.svg");
        std::fs::write(&path, svg::trajectory_figure(&rec.observables, &ma)?).map_err(Error::from)?;
        files.push(path);
    }
    let t = &rec.observables;
    Ok(json!({
        "command": "simulate",
        "seed": seed,
        "rows": t.len(),
        "final_var_zz": t.last("var_zz"),
        "final_mean_zz": t.last("mean_zz"),
        "jumps": rec.jumps.len(),
        "files": files.iter().map(|p| path_str(p)).collect::<Vec<_>>(),
    }))
}

fn cmd_ensemble(common: &Common, seed: Option<u64>) -> CmdResult {
    let cfg = load(common, seed)?;
    let mut ec = cfg.ensemble_config();
    ec.workers = workers()?;
    let stats = run_ensemble(&ec)?;
    let dir = cfg.outputs.dir.clone();
    let mut files = vec![cfg.write_echo(&dir)?];
    for (name, f) in [
        ("ensemble_stats.csv", csv_out::write_ensemble_stats as fn(&Path, _) -> _),
        ("shots.csv", csv_out::write_shots),
        ("failures.csv", csv_out::write_failures),
    ] {
        let path = dir.join(name);
        f(&path, &stats)?;
        files.push(path);
    }
    if cfg.outputs.emit_svg {
        let path = dir.join("ensemble.svg");
        std::fs::write(&path, svg::ensemble_figure(&stats)?).map_err(Error::from)?;
        files.push(path);
    }
    let max_frac = stats
        .shots
        .iter()
        .filter_map(|s| s.tracking.as_ref().map(|t| t.max_frac_err))
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    Ok(json!({
        "command": "ensemble",
        "mode": stats.mode.label(),
        "n_ok": stats.n_ok(),
        "n_failed": stats.failures.len(),
        "even_fraction": stats.even_fraction(),
        "max_frac_err": max_frac,
        "files": files.iter().map(|p| path_str(p)).collect::<Vec<_>>(),
    }))
}

fn parse_scales(text: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if parts.is_empty() {
        return Err(usage("--scales needs at least one value"));
    }
    parts
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| usage(format!("cannot parse scale {s:?}")))
        })
        .collect()
}

fn cmd_scaling(
    common: &Common,
    scales: Option<&str>,
    branch: Option<BranchArg>,
    seed: Option<u64>,
) -> CmdResult {
    let mut cfg = load(common, seed)?;
    if let Some(text) = scales {
        cfg.scaling.scales = parse_scales(text)?;
    }
    if let Some(b) = branch {
        cfg.scaling.branches = match b {
            BranchArg::G => vec![ScalingBranch::G],
            BranchArg::AlphaKappa => vec![ScalingBranch::AlphaKappa],
            BranchArg::Both => vec![ScalingBranch::G, ScalingBranch::AlphaKappa],
        };
    }
    if cfg.scaling.scales.is_empty() {
        return Err(usage("scaling needs at least one scale factor"));
    }
    if cfg.scaling.branches.is_empty() {
        return Err(usage("scaling needs at least one branch"));
    }
    if let Some(s) = cfg.scaling.scales.iter().find(|s| !(s.is_finite() && **s >= 1.0)) {
        return Err(usage(format!("scale factors must be ≥ 1, got {s}")));
    }
    let study = scaling_study(
        &cfg.system_params(),
        &cfg.scaling.scales,
        &cfg.scaling.branches,
        cfg.ensemble.n_traj,
        cfg.ensemble.seed_base,
        workers()?,
    )?;
    let dir = cfg.outputs.dir.clone();
    let mut files = vec![cfg.write_echo(&dir)?];
    let path = dir.join("scaling.csv");
    csv_out::write_scaling(&path, &study)?;
    files.push(path);
    if cfg.outputs.emit_svg {
        let path = dir.join("scaling.svg");
        std::fs::write(&path, svg::scaling_figure(&study)?).map_err(Error::from)?;
        files.push(path);
    }
    let rows: Vec<Value> = study
        .rows
        .iter()
        .map(|r| {
            json!({
                "branch": r.branch.label(),
                "scale": r.scale,
                "discrepancy": r.discrepancy,
                "flag": r.flag,
            })
        })
        .collect();
    Ok(json!({
        "command": "scaling",
        "rows": rows,
        "files": files.iter().map(|p| path_str(p)).collect::<Vec<_>>(),
    }))
}

fn cmd_export(record: &Path, out: Option<&Path>, reduced: bool) -> CmdResult {
    let (params, rec): (SystemParams, TrajectoryRecord) = read_record(record)?;
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| record.parent().map(Path::to_path_buf).unwrap_or_default());
    std::fs::create_dir_all(&dir).map_err(Error::from)?;
    let mut files = write_trajectory_csv(&dir, &rec)?;
    if reduced {
        let run = run_on_trajectory(
            &ReducedKet::equal_superposition(),
            &rec,
            &AlphaSchedule::from_params(&params),
            rec.dt,
        )?;
        if run.record_checksum != rec.dy0_checksum() {
            return Err(Error::Record("reduced filter consumed a different record".into()).into());
        }
        let path = dir.join("reduced.csv");
        csv_out::write_table(&path, REDUCED_SCHEMA, &run.table, &[])?;
        files.push(path);
    }
    Ok(json!({
        "command": "export",
        "seed": rec.seed,
        "params_digest": params.digest_hex(),
        "reduced_columns": if reduced { Some(REDUCED_COLUMNS.to_vec()) } else { None },
        "files": files.iter().map(|p| path_str(p)).collect::<Vec<_>>(),
    }))
}

fn run(cli: Cli) -> CmdResult {
    match &cli.command {
        Command::Simulate { common, seed } => cmd_simulate(common, *seed),
        Command::Ensemble { common, seed } => cmd_ensemble(common, *seed),
        Command::Scaling {
            common,
            scales,
            branch,
            seed,
        } => cmd_scaling(common, scales.as_deref(), *branch, *seed),
        Command::Export {
            record,
            out,
            reduced,
        } => cmd_export(record, out.as_deref(), *reduced),
    }
}

fn report(f: Failure) -> ExitCode {
    let body = json!({ "error": f.kind, "message": f.message });
    eprintln!("{body}");
    ExitCode::from(f.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return report(usage(e.to_string().trim().to_string()));
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => report(f),
    }
}
