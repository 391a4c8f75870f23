//! Versioned CSV tables. The first line of every file is
//! `# schema: <id>`, followed by a header row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::ensemble::{EnsembleStats, ScalingStudy, ShotSummary};
use crate::error::{Error, Result};
use crate::sde_physical::TrajectoryRecord;
use crate::table::DecimatedTable;

pub const TRAJECTORY_SCHEMA: &str = "qpl.trajectory.v1";
pub const JUMPS_SCHEMA: &str = "qpl.jumps.v1";
pub const REDUCED_SCHEMA: &str = "qpl.reduced.v1";
pub const ENSEMBLE_SCHEMA: &str = "qpl.ensemble_stats.v1";
pub const SHOTS_SCHEMA: &str = "qpl.shots.v1";
pub const FAILURES_SCHEMA: &str = "qpl.failures.v1";
pub const SCALING_SCHEMA: &str = "qpl.scaling.v1";

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Record(format!("csv: {other:?}")),
    }
}

fn open(path: &Path, schema: &str) -> Result<csv::Writer<BufWriter<File>>> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# schema: {schema}")?;
    Ok(csv::Writer::from_writer(f))
}

fn finish(mut w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// `step, t` followed by every table column, plus optional extra columns of
/// the same length.
pub fn write_table(
    path: &Path,
    schema: &str,
    table: &DecimatedTable,
    extra: &[(&str, &[f64])],
) -> Result<usize> {
    for (name, col) in extra {
        if col.len() != table.len() {
            return Err(Error::Record(format!("extra column {name} has wrong length")));
        }
    }
    let mut w = open(path, schema)?;
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend(table.names().iter().cloned());
    header.extend(extra.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    let cols: Vec<&[f64]> = table.columns().map(|(_, c)| c).collect();
    for i in 0..table.len() {
        let mut row = vec![table.steps[i].to_string(), num(table.times[i])];
        row.extend(cols.iter().map(|c| num(c[i])));
        row.extend(extra.iter().map(|(_, c)| num(c[i])));
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)?;
    Ok(table.len())
}

pub fn write_jumps(path: &Path, rec: &TrajectoryRecord) -> Result<()> {
    let mut w = open(path, JUMPS_SCHEMA)?;
    w.write_record(["step", "t", "channel"]).map_err(csv_err)?;
    for j in &rec.jumps {
        w.write_record([
            j.step.to_string(),
            num(j.step as f64 * rec.dt),
            j.channel.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Centered moving average of `dY0/dt` over `window` time units, sampled at
/// the table's steps.
pub fn homodyne_moving_average(dy0: &[f64], dt: f64, window: f64, steps: &[u64]) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(dy0.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for x in dy0 {
        acc += x;
        prefix.push(acc);
    }
    let half = ((window / dt / 2.0).round() as usize).max(1);
    steps
        .iter()
        .map(|&s| {
            let s = s as usize;
            let lo = s.saturating_sub(half);
            let hi = (s + half).min(dy0.len());
            if hi <= lo {
                f64::NAN
            } else {
                (prefix[hi] - prefix[lo]) / ((hi - lo) as f64 * dt)
            }
        })
        .collect()
}

pub fn write_ensemble_stats(path: &Path, stats: &EnsembleStats) -> Result<()> {
    let mut w = open(path, ENSEMBLE_SCHEMA)?;
    let mut header = vec!["t".to_string()];
    for b in &stats.bands {
        header.push(format!("{}_mean", b.name));
        header.push(format!("{}_std", b.name));
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, &t) in stats.times.iter().enumerate() {
        let mut row = vec![num(t)];
        for b in &stats.bands {
            row.push(num(b.mean[i]));
            row.push(num(b.std[i]));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

pub const SHOT_COLUMNS: [&str; 22] = [
    "shot",
    "seed",
    "parity_sign",
    "final_var",
    "plateau_end_var",
    "jumps1",
    "jumps2",
    "plateau_jumps1",
    "plateau_jumps2",
    "coupled_exposure1",
    "coupled_exposure2",
    "max_pop_e_plateau",
    "max_pop_e",
    "min_var_xx_plateau",
    "mean_var_xx_plateau",
    "homodyne_conditional",
    "homodyne_raw",
    "max_frac_err",
    "mean_frac_err_plateau",
    "record_checksum",
    "filter_checksum",
    "checksum_match",
];

fn shot_row(s: &ShotSummary) -> Vec<String> {
    let mut row = vec![
        s.shot.to_string(),
        s.seed.to_string(),
        s.parity_sign.to_string(),
        num(s.final_var),
        num(s.plateau_end_var),
    ];
    match &s.physical {
        Some(p) => {
            row.extend(p.jumps.iter().map(|j| j.to_string()));
            row.extend(p.plateau_jumps.iter().map(|j| j.to_string()));
            row.extend(p.coupled_exposure.iter().map(|&x| num(x)));
            row.extend(
                [
                    p.max_pop_e,
                    p.max_pop_e_any,
                    p.min_var_xx_plateau,
                    p.mean_var_xx_plateau,
                    p.homodyne_conditional,
                    p.homodyne_raw,
                ]
                .map(num),
            );
        }
        None => row.extend(std::iter::repeat_n(String::new(), 12)),
    }
    let tr = s.tracking.as_ref();
    row.push(opt(tr.map(|t| t.max_frac_err)));
    row.push(opt(tr.map(|t| t.mean_frac_err_plateau)));
    let rc = s.physical.as_ref().map(|p| p.record_checksum.clone());
    let fc = tr.map(|t| t.filter_checksum.clone());
    let matched = match (&rc, &fc) {
        (Some(a), Some(b)) => (a == b).to_string(),
        _ => String::new(),
    };
    row.push(rc.unwrap_or_default());
    row.push(fc.unwrap_or_default());
    row.push(matched);
    row
}

pub fn write_shots(path: &Path, stats: &EnsembleStats) -> Result<()> {
    let mut w = open(path, SHOTS_SCHEMA)?;
    w.write_record(SHOT_COLUMNS).map_err(csv_err)?;
    for s in &stats.shots {
        w.write_record(shot_row(s)).map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_failures(path: &Path, stats: &EnsembleStats) -> Result<()> {
    let mut w = open(path, FAILURES_SCHEMA)?;
    w.write_record(["shot", "seed", "kind", "message"]).map_err(csv_err)?;
    for f in &stats.failures {
        w.write_record([
            f.shot.to_string(),
            f.seed.to_string(),
            f.kind.clone(),
            f.message.clone(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_scaling(path: &Path, study: &ScalingStudy) -> Result<()> {
    let mut w = open(path, SCALING_SCHEMA)?;
    w.write_record([
        "branch",
        "scale",
        "g",
        "kappa2_half",
        "alpha_max",
        "n_ok",
        "discrepancy",
        "flag",
    ])
    .map_err(csv_err)?;
    for r in &study.rows {
        w.write_record([
            r.branch.label().to_string(),
            num(r.scale),
            num(r.g),
            num(r.kappa2_half),
            num(r.alpha_max),
            r.n_ok.to_string(),
            opt(r.discrepancy),
            r.flag.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Reads a file written by this module: returns the schema id, header and
/// rows.
pub fn read_csv(path: &Path) -> Result<(String, Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)?;
    let (first, rest) = text
        .split_once('\n')
        .ok_or_else(|| Error::Record("empty csv".into()))?;
    let schema = first
        .strip_prefix("# schema: ")
        .ok_or_else(|| Error::Record("missing schema line".into()))?
        .to_string();
    let mut r = csv::Reader::from_reader(rest.as_bytes());
    let header = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(String::from)
        .collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()).map_err(csv_err))
        .collect::<Result<_>>()?;
    Ok((schema, header, rows))
}
