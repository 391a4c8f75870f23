//! Seeded trajectory ensembles: pointwise statistics, per-shot summaries,
//! martingale checks and the strong-coupling scaling study.
//!
//! Shot `k` always uses seed `seed_base + k`. Shots run in fixed-size
//! batches on a worker pool and are folded into the statistics strictly in
//! shot order, so results do not depend on the number of workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter_reduced::{run_on_trajectory, simulate_ideal_biased, AlphaSchedule, ReducedKet};
use crate::hilbert::build_catalog;
use crate::noise::CounterNoise;
use crate::observables::{fractional_residual_error, PhysicalProbe};
use crate::params::SystemParams;
use crate::sde_physical::{
    default_initial_state, simulate_with, PhysicalStepper, SimOptions, TrajectoryRecord,
    DEFAULT_DECIMATION, TRUNCATION_TOLERANCE,
};
use crate::table::DecimatedTable;

/// Shots handed to the worker pool at a time.
const BATCH: usize = 16;
/// Abort threshold on the fraction of failed shots.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;
/// Length of the homodyne averaging window at the end of the plateau.
pub const HOMODYNE_WINDOW: f64 = 20.0;
/// Default spacing of martingale checkpoints.
pub const MARTINGALE_CHECKPOINT: f64 = 10.0;
/// Derived column holding `⟨Π⟩(t) − ⟨Π⟩(0)` per shot.
pub const PARITY_DRIFT: &str = "parity_drift";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    /// Full filter only.
    Physical,
    /// Reduced filter driven by its own simulated record.
    Ideal,
    /// Full filter, then the reduced filter driven by each shot's record.
    CrossDriven,
}

impl EnsembleMode {
    pub fn label(self) -> &'static str {
        match self {
            EnsembleMode::Physical => "physical",
            EnsembleMode::Ideal => "ideal",
            EnsembleMode::CrossDriven => "cross_driven",
        }
    }

    /// Column holding the parity variance of the primary filter.
    pub fn variance_column(self) -> &'static str {
        match self {
            EnsembleMode::Ideal => "var_pi",
            _ => "var_zz",
        }
    }

    /// Column holding ⟨Π⟩ of the primary filter.
    pub fn parity_column(self) -> &'static str {
        match self {
            EnsembleMode::Ideal => "mean_pi",
            _ => "mean_zz",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub seed_base: u64,
    pub mode: EnsembleMode,
    pub params: SystemParams,
    pub decimation: usize,
    /// Worker count; `None` uses the pool default.
    pub workers: Option<usize>,
    /// Extra drift added to every increment of the self-driven reduced
    /// filter, `dȲ += bias·dt`. Zero except for negative controls.
    pub record_bias: f64,
}

impl EnsembleConfig {
    pub fn new(mode: EnsembleMode, n_traj: usize, seed_base: u64, params: SystemParams) -> Self {
        Self {
            n_traj,
            seed_base,
            mode,
            params,
            decimation: DEFAULT_DECIMATION,
            workers: None,
            record_bias: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(Error::InvalidParams("n_traj must be at least 1".into()));
        }
        if self.decimation == 0 {
            return Err(Error::InvalidParams("decimation must be at least 1".into()));
        }
        if self.seed_base.checked_add(self.n_traj as u64 - 1).is_none() {
            return Err(Error::InvalidParams("seed range overflows u64".into()));
        }
        if !self.record_bias.is_finite() {
            return Err(Error::InvalidParams("record_bias must be finite".into()));
        }
        if self.record_bias != 0.0 && self.mode != EnsembleMode::Ideal {
            return Err(Error::InvalidParams(
                "record_bias only applies to ideal mode".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidParams("workers must be at least 1".into()));
        }
        self.params.validate()
    }

    pub fn seed_of(&self, shot: usize) -> u64 {
        self.seed_base + shot as u64
    }
}

/// Pointwise statistics of one observable across shots.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub name: String,
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Quantities only the full filter produces.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalShot {
    /// Total counts per channel.
    pub jumps: [u32; 2],
    /// Counts per channel on the plateau.
    pub plateau_jumps: [u32; 2],
    /// `∫⟨P₊ + P_e⟩dt` per atom over the plateau.
    pub coupled_exposure: [f64; 2],
    /// Largest excited population of either atom on the plateau.
    pub max_pop_e: f64,
    /// Largest excited population of either atom at any time.
    pub max_pop_e_any: f64,
    pub min_var_xx_plateau: f64,
    pub mean_var_xx_plateau: f64,
    /// Window average of `⟨L + L†⟩`.
    pub homodyne_conditional: f64,
    /// Window average of the raw record `dY0/dt`.
    pub homodyne_raw: f64,
    pub record_checksum: String,
}

/// Tracking quality of the record-driven reduced filter.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingShot {
    pub max_frac_err: f64,
    pub mean_frac_err_plateau: f64,
    /// Digest of the record the reduced filter consumed.
    pub filter_checksum: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotSummary {
    pub shot: usize,
    pub seed: u64,
    /// Sign of the final ⟨Π⟩: +1 even, −1 odd.
    pub parity_sign: i8,
    pub final_var: f64,
    pub plateau_end_var: f64,
    pub physical: Option<PhysicalShot>,
    pub tracking: Option<TrackingShot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotFailure {
    pub shot: usize,
    pub seed: u64,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub mode: EnsembleMode,
    pub params: SystemParams,
    pub seed_base: u64,
    pub n_requested: usize,
    pub steps: Vec<u64>,
    pub times: Vec<f64>,
    pub bands: Vec<Band>,
    /// Successful shots in shot order.
    pub shots: Vec<ShotSummary>,
    pub failures: Vec<ShotFailure>,
}

impl EnsembleStats {
    pub fn n_ok(&self) -> usize {
        self.shots.len()
    }

    pub fn band(&self, name: &str) -> Option<&Band> {
        self.bands.iter().find(|b| b.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Band> {
        self.band(name)
            .ok_or_else(|| Error::Record(format!("ensemble has no column {name:?}")))
    }

    /// Grid indices on the probe plateau.
    pub fn plateau_rows(&self) -> Vec<usize> {
        plateau_rows(&self.times, &self.params)
    }

    /// Fraction of even final parities.
    pub fn even_fraction(&self) -> f64 {
        let even = self.shots.iter().filter(|s| s.parity_sign > 0).count();
        even as f64 / self.shots.len().max(1) as f64
    }

    /// Plateau time-average of the ensemble-mean fractional residual error.
    pub fn tracking_discrepancy(&self) -> Option<f64> {
        let band = self.band("frac_err")?;
        let rows = self.plateau_rows();
        if rows.is_empty() {
            return None;
        }
        Some(rows.iter().map(|&i| band.mean[i]).sum::<f64>() / rows.len() as f64)
    }
}

fn plateau_window(params: &SystemParams) -> (f64, f64) {
    let r = &params.ramp;
    let start = r.plateau_start().max(0.0);
    let end = r.plateau_end().min(params.t_final);
    (start, end)
}

fn plateau_rows(times: &[f64], params: &SystemParams) -> Vec<usize> {
    let (t0, t1) = plateau_window(params);
    times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= t0 - 1e-12 && t <= t1 + 1e-12)
        .map(|(i, _)| i)
        .collect()
}

/// Pointwise accumulator updated one shot at a time (Welford).
struct Accumulator {
    names: Vec<String>,
    n: usize,
    mean: Vec<Vec<f64>>,
    m2: Vec<Vec<f64>>,
    min: Vec<Vec<f64>>,
    max: Vec<Vec<f64>>,
}

impl Accumulator {
    fn new(names: Vec<String>, rows: usize) -> Self {
        let c = names.len();
        Self {
            names,
            n: 0,
            mean: vec![vec![0.0; rows]; c],
            m2: vec![vec![0.0; rows]; c],
            min: vec![vec![f64::INFINITY; rows]; c],
            max: vec![vec![f64::NEG_INFINITY; rows]; c],
        }
    }

    fn push(&mut self, table: &DecimatedTable) -> Result<()> {
        self.n += 1;
        let n = self.n as f64;
        for (c, name) in self.names.iter().enumerate() {
            let col = table.require(name)?;
            if col.len() != self.mean[c].len() {
                return Err(Error::GridMismatch(format!(
                    "column {name} has {} rows, expected {}",
                    col.len(),
                    self.mean[c].len()
                )));
            }
            for (i, &x) in col.iter().enumerate() {
                let delta = x - self.mean[c][i];
                self.mean[c][i] += delta / n;
                self.m2[c][i] += delta * (x - self.mean[c][i]);
                self.min[c][i] = self.min[c][i].min(x);
                self.max[c][i] = self.max[c][i].max(x);
            }
        }
        Ok(())
    }

    fn finish(self) -> Vec<Band> {
        let n = self.n.max(1) as f64;
        let Accumulator {
            names,
            mean,
            m2,
            min,
            max,
            ..
        } = self;
        names
            .into_iter()
            .zip(mean)
            .zip(m2)
            .zip(min.into_iter().zip(max))
            .map(|(((name, mean), m2), (min, max))| {
                let std = m2.iter().map(|&s| (s / n).max(0.0).sqrt()).collect();
                Band {
                    name,
                    mean,
                    std,
                    min,
                    max,
                }
            })
            .collect()
    }
}

struct ShotOutput {
    table: DecimatedTable,
    summary: ShotSummary,
}

/// Everything a worker needs, shared read-only.
struct Shared<'a> {
    config: &'a EnsembleConfig,
    stepper: Option<PhysicalStepper>,
    probe: Option<PhysicalProbe>,
    schedule: AlphaSchedule,
}

fn with_parity_drift(table: &mut DecimatedTable, parity_col: &str) -> Result<()> {
    let col = table.require(parity_col)?;
    let p0 = col.first().copied().unwrap_or(0.0);
    let drift = col.iter().map(|&p| p - p0).collect();
    table.add_column(PARITY_DRIFT, drift);
    Ok(())
}

fn sign_of(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

fn value_near(table: &DecimatedTable, col: &[f64], t: f64) -> f64 {
    let i = table
        .times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    col[i]
}

/// Trapezoid integral of `col` over rows `rows` (which must be contiguous).
fn integrate(times: &[f64], col: &[f64], rows: &[usize]) -> f64 {
    rows.windows(2)
        .map(|w| 0.5 * (col[w[0]] + col[w[1]]) * (times[w[1]] - times[w[0]]))
        .sum()
}

fn summarize_physical(rec: &TrajectoryRecord, params: &SystemParams) -> Result<PhysicalShot> {
    let t = &rec.observables;
    let rows = plateau_rows(&t.times, params);
    let (p0, p1) = plateau_window(params);
    let in_plateau = |step: u64| {
        let time = step as f64 * params.dt;
        time >= p0 && time < p1
    };

    let mut jumps = [0u32; 2];
    let mut plateau_jumps = [0u32; 2];
    for j in &rec.jumps {
        let c = (j.channel - 1) as usize;
        jumps[c] += 1;
        if in_plateau(j.step) {
            plateau_jumps[c] += 1;
        }
    }

    let pop_c = [t.require("pop_c1")?, t.require("pop_c2")?];
    let coupled_exposure = [
        integrate(&t.times, pop_c[0], &rows),
        integrate(&t.times, pop_c[1], &rows),
    ];

    let (e1, e2) = (t.require("pop_e1")?, t.require("pop_e2")?);
    let max_e = |idx: &mut dyn Iterator<Item = usize>| {
        idx.map(|i| e1[i].max(e2[i])).fold(0.0, f64::max)
    };
    let max_pop_e = max_e(&mut rows.iter().copied());
    let max_pop_e_any = max_e(&mut (0..t.len()));

    let xx = t.require("var_xx")?;
    let (min_var_xx_plateau, mean_var_xx_plateau) = if rows.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let min = rows.iter().map(|&i| xx[i]).fold(f64::INFINITY, f64::min);
        let mean = rows.iter().map(|&i| xx[i]).sum::<f64>() / rows.len() as f64;
        (min, mean)
    };

    let w1 = p1;
    let w0 = (p1 - HOMODYNE_WINDOW).max(p0);
    let hom = t.require("homodyne_mean_rate")?;
    let window_rows: Vec<usize> = t.rows_in(w0, w1).collect();
    let homodyne_conditional = if window_rows.is_empty() {
        f64::NAN
    } else {
        window_rows.iter().map(|&i| hom[i]).sum::<f64>() / window_rows.len() as f64
    };
    let s0 = (w0 / params.dt).round() as usize;
    let s1 = ((w1 / params.dt).round() as usize).min(rec.dy0.len());
    let homodyne_raw = if s1 > s0 {
        rec.dy0[s0..s1].iter().sum::<f64>() / ((s1 - s0) as f64 * params.dt)
    } else {
        f64::NAN
    };

    Ok(PhysicalShot {
        jumps,
        plateau_jumps,
        coupled_exposure,
        max_pop_e,
        max_pop_e_any,
        min_var_xx_plateau,
        mean_var_xx_plateau,
        homodyne_conditional,
        homodyne_raw,
        record_checksum: rec.dy0_checksum(),
    })
}

fn run_shot(shared: &Shared<'_>, stepper: &mut Option<PhysicalStepper>, shot: usize) -> Result<ShotOutput> {
    let cfg = shared.config;
    let params = &cfg.params;
    let seed = cfg.seed_of(shot);
    let n_steps = params.n_steps();

    match cfg.mode {
        EnsembleMode::Ideal => {
            let v0 = ReducedKet::equal_superposition();
            let run = simulate_ideal_biased(
                &v0,
                &shared.schedule,
                params.dt,
                n_steps,
                seed,
                cfg.decimation,
                cfg.record_bias,
            )?;
            let mut table = run.table;
            with_parity_drift(&mut table, "mean_pi")?;
            let var = table.require("var_pi")?;
            let summary = ShotSummary {
                shot,
                seed,
                parity_sign: sign_of(run.final_state.mean_parity()),
                final_var: *var.last().unwrap_or(&f64::NAN),
                plateau_end_var: value_near(&table, var, plateau_window(params).1),
                physical: None,
                tracking: None,
            };
            Ok(ShotOutput { table, summary })
        }
        EnsembleMode::Physical | EnsembleMode::CrossDriven => {
            let stepper = stepper.as_mut().expect("physical stepper");
            let probe = shared.probe.as_ref().expect("physical probe");
            let v0 = default_initial_state(params.fock_dim);
            let rec = simulate_with(
                params,
                stepper,
                probe,
                &v0,
                &mut CounterNoise::new(seed),
                seed,
                SimOptions {
                    decimation: cfg.decimation,
                },
            )?;
            let physical = summarize_physical(&rec, params)?;
            let mut table = rec.observables.clone();
            with_parity_drift(&mut table, "mean_zz")?;
            let var = table.require("var_zz")?.to_vec();
            let final_mean_zz = *table.require("mean_zz")?.last().unwrap_or(&0.0);

            let mut tracking = None;
            if cfg.mode == EnsembleMode::CrossDriven {
                let red = run_on_trajectory(
                    &ReducedKet::equal_superposition(),
                    &rec,
                    &shared.schedule,
                    params.dt,
                )?;
                if red.record_checksum != physical.record_checksum {
                    return Err(Error::Record(format!(
                        "shot {shot}: reduced filter consumed record {} but trajectory produced {}",
                        red.record_checksum, physical.record_checksum
                    )));
                }
                if red.table.times != table.times {
                    return Err(Error::GridMismatch(format!(
                        "shot {shot}: reduced and physical grids differ"
                    )));
                }
                let var_rf = red.table.require("var_pi")?.to_vec();
                let mean_rf = red.table.require("mean_pi")?.to_vec();
                let frac: Vec<f64> = var
                    .iter()
                    .zip(&var_rf)
                    .map(|(&p, &r)| fractional_residual_error(p, r))
                    .collect();
                let rows = plateau_rows(&table.times, params);
                let mean_frac = if rows.is_empty() {
                    f64::NAN
                } else {
                    rows.iter().map(|&i| frac[i]).sum::<f64>() / rows.len() as f64
                };
                tracking = Some(TrackingShot {
                    max_frac_err: frac.iter().copied().fold(0.0, f64::max),
                    mean_frac_err_plateau: mean_frac,
                    filter_checksum: red.record_checksum,
                });
                table.add_column("var_pi_rf", var_rf);
                table.add_column("mean_pi_rf", mean_rf);
                table.add_column("frac_err", frac);
            }

            let summary = ShotSummary {
                shot,
                seed,
                parity_sign: sign_of(final_mean_zz),
                final_var: *var.last().unwrap_or(&f64::NAN),
                plateau_end_var: value_near(&table, &var, plateau_window(params).1),
                physical: Some(physical),
                tracking,
            };
            Ok(ShotOutput { table, summary })
        }
    }
}

fn build_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs the ensemble described by `config`.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleStats> {
    config.validate()?;
    let params = &config.params;
    let (stepper, probe) = match config.mode {
        EnsembleMode::Ideal => (None, None),
        _ => {
            let catalog = build_catalog(params)?;
            (
                Some(PhysicalStepper::new(&catalog, params)?),
                Some(PhysicalProbe::new(&catalog)),
            )
        }
    };
    let shared = Shared {
        config,
        stepper,
        probe,
        schedule: AlphaSchedule::from_params(params),
    };
    let pool = build_pool(config.workers)?;

    let mut acc: Option<Accumulator> = None;
    let mut grid: Option<(Vec<u64>, Vec<f64>)> = None;
    let mut shots = Vec::new();
    let mut failures = Vec::new();

    for start in (0..config.n_traj).step_by(BATCH) {
        let end = (start + BATCH).min(config.n_traj);
        let outputs: Vec<Result<ShotOutput>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map_init(
                    || shared.stepper.clone(),
                    |st, shot| run_shot(&shared, st, shot),
                )
                .collect()
        });
        for (shot, out) in (start..end).zip(outputs) {
            match out {
                Ok(out) => {
                    let acc = acc.get_or_insert_with(|| {
                        Accumulator::new(out.table.names().to_vec(), out.table.len())
                    });
                    if grid.is_none() {
                        grid = Some((out.table.steps.clone(), out.table.times.clone()));
                    }
                    acc.push(&out.table)?;
                    shots.push(out.summary);
                }
                Err(e) => failures.push(ShotFailure {
                    shot,
                    seed: config.seed_of(shot),
                    kind: e.kind().to_string(),
                    message: e.to_string(),
                }),
            }
        }
        check_failures(&failures, config.n_traj)?;
    }

    let acc = match acc {
        Some(a) => a,
        None => {
            let first = &failures[0];
            return Err(Error::TooManyFailures {
                failed: failures.len(),
                total: config.n_traj,
                first: format!("shot {}: {}", first.shot, first.message),
            });
        }
    };
    let (steps, times) = grid.unwrap_or_default();
    Ok(EnsembleStats {
        mode: config.mode,
        params: config.params.clone(),
        seed_base: config.seed_base,
        n_requested: config.n_traj,
        steps,
        times,
        bands: acc.finish(),
        shots,
        failures,
    })
}

fn check_failures(failures: &[ShotFailure], total: usize) -> Result<()> {
    if failures.len() as f64 > MAX_FAILURE_FRACTION * total as f64 {
        let first = &failures[0];
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total,
            first: format!("shot {}: {}", first.shot, first.message),
        });
    }
    Ok(())
}

/// Fraction of plateau grid points where two variance ensembles overlap:
/// `|mean_a − mean_b| ≤ 0.5·(std_a + std_b)`.
pub fn overlap_fraction(
    a: &EnsembleStats,
    col_a: &str,
    b: &EnsembleStats,
    col_b: &str,
) -> Result<f64> {
    if a.times.len() != b.times.len()
        || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > 1e-9)
    {
        return Err(Error::GridMismatch("ensembles sampled on different grids".into()));
    }
    let (ba, bb) = (a.require(col_a)?, b.require(col_b)?);
    let rows = a.plateau_rows();
    if rows.is_empty() {
        return Err(Error::InvalidParams("ensemble has no plateau".into()));
    }
    let ok = rows
        .iter()
        .filter(|&&i| (ba.mean[i] - bb.mean[i]).abs() <= 0.5 * (ba.std[i] + bb.std[i]))
        .count();
    Ok(ok as f64 / rows.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum MartingaleVerdict {
    Pass,
    Fail,
    InsufficientStatistics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub verdict: MartingaleVerdict,
    pub n: usize,
    pub times: Vec<f64>,
    /// z-score of the mean drift of ⟨Π⟩ from t = 0 at each checked point.
    pub z: Vec<f64>,
    pub max_abs_z: f64,
    pub threshold: f64,
}

impl MartingaleReport {
    pub fn passed(&self) -> bool {
        self.verdict == MartingaleVerdict::Pass
    }
}

/// z-scores of the ensemble-mean drift `⟨Π⟩(t) − ⟨Π⟩(0)` at every grid
/// point, or only at points spaced at least `spacing` apart when given.
/// Points with zero spread and zero mean drift score 0; zero spread with
/// nonzero drift scores infinity.
pub fn martingale_report(stats: &EnsembleStats, spacing: Option<f64>) -> Result<MartingaleReport> {
    let threshold = 3.0;
    let n = stats.n_ok();
    if n < 2 {
        return Ok(MartingaleReport {
            verdict: MartingaleVerdict::InsufficientStatistics,
            n,
            times: Vec::new(),
            z: Vec::new(),
            max_abs_z: f64::NAN,
            threshold,
        });
    }
    let band = stats.require(PARITY_DRIFT)?;
    // population std → standard error of the mean
    let se_factor = 1.0 / ((n - 1) as f64).sqrt();
    let mut times = Vec::new();
    let mut z = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (i, &t) in stats.times.iter().enumerate() {
        if let Some(s) = spacing {
            if t < last + s - 1e-9 {
                continue;
            }
        }
        last = t;
        let se = band.std[i] * se_factor;
        let m = band.mean[i];
        let zi = if se > 0.0 {
            m / se
        } else if m == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        times.push(t);
        z.push(zi);
    }
    let max_abs_z = z.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let verdict = if max_abs_z < threshold {
        MartingaleVerdict::Pass
    } else {
        MartingaleVerdict::Fail
    };
    Ok(MartingaleReport {
        verdict,
        n,
        times,
        z,
        max_abs_z,
        threshold,
    })
}

/// Which parameters a scaling run stretches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingBranch {
    /// `g → g·s`
    G,
    /// `α → α·√s`, `κ → κ·√s`, so α/κ is held fixed.
    AlphaKappa,
}

impl ScalingBranch {
    pub fn label(self) -> &'static str {
        match self {
            ScalingBranch::G => "g",
            ScalingBranch::AlphaKappa => "alpha_kappa",
        }
    }

    pub fn apply(self, base: &SystemParams, s: f64) -> SystemParams {
        let mut p = base.clone();
        match self {
            ScalingBranch::G => p.g *= s,
            ScalingBranch::AlphaKappa => {
                p.alpha_max *= s.sqrt();
                p.kappa2_half *= s;
            }
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub branch: ScalingBranch,
    pub scale: f64,
    pub g: f64,
    pub kappa2_half: f64,
    pub alpha_max: f64,
    pub n_ok: usize,
    /// `None` when the run carries no measurement.
    pub discrepancy: Option<f64>,
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingStudy {
    pub base: SystemParams,
    pub n_traj: usize,
    pub seed_base: u64,
    pub rows: Vec<ScalingRow>,
}

impl ScalingStudy {
    pub fn branch(&self, branch: ScalingBranch) -> Vec<&ScalingRow> {
        self.rows.iter().filter(|r| r.branch == branch).collect()
    }
}

/// Smallest Fock dimension whose top level holds less than 1% of the
/// truncation tolerance for the plateau coherent amplitude `2α/κ`.
pub fn required_fock_dim(params: &SystemParams) -> usize {
    let beta_sq = (2.0 * params.alpha_max / params.kappa()).powi(2);
    let limit = 0.01 * TRUNCATION_TOLERANCE;
    // Poisson weight of level n, built up iteratively
    let mut w = (-beta_sq).exp();
    let mut n = 0usize;
    loop {
        if w < limit || n >= 256 {
            return (n + 1).max(2);
        }
        n += 1;
        w *= beta_sq / n as f64;
    }
}

/// Runs cross-driven ensembles over `scales` on each requested branch and
/// tabulates the plateau-averaged tracking discrepancy. All runs share the
/// same seeds.
pub fn scaling_study(
    base: &SystemParams,
    scales: &[f64],
    branches: &[ScalingBranch],
    n_traj: usize,
    seed_base: u64,
    workers: Option<usize>,
) -> Result<ScalingStudy> {
    if scales.is_empty() {
        return Err(Error::InvalidParams("scaling study needs at least one scale".into()));
    }
    if branches.is_empty() {
        return Err(Error::InvalidParams("scaling study needs at least one branch".into()));
    }
    if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s >= 1.0)) {
        return Err(Error::InvalidParams(format!("scale factors must be ≥ 1, got {s}")));
    }
    base.validate()?;
    let mut rows = Vec::new();
    for &branch in branches {
        for &s in scales {
            let p = branch.apply(base, s);
            let required = required_fock_dim(&p);
            if p.fock_dim < required {
                return Err(Error::FockDimTooSmall {
                    required,
                    current: p.fock_dim,
                });
            }
            let mut row = ScalingRow {
                branch,
                scale: s,
                g: p.g,
                kappa2_half: p.kappa2_half,
                alpha_max: p.alpha_max,
                n_ok: 0,
                discrepancy: None,
                flag: None,
            };
            if p.alpha_max == 0.0 {
                row.flag = Some("no_measurement".into());
                rows.push(row);
                continue;
            }
            let mut cfg = EnsembleConfig::new(EnsembleMode::CrossDriven, n_traj, seed_base, p);
            cfg.workers = workers;
            let stats = run_ensemble(&cfg)?;
            row.n_ok = stats.n_ok();
            row.discrepancy = stats.tracking_discrepancy();
            if row.discrepancy.is_none() {
                row.flag = Some("no_plateau".into());
            }
            rows.push(row);
        }
    }
    Ok(ScalingStudy {
        base: base.clone(),
        n_traj,
        seed_base,
        rows,
    })
}
