//! Idealized parity filter on the four-dimensional qubit space
//! `{|uu⟩, |ud⟩, |du⟩, |dd⟩}`.
//!
//! The generator `αΠ dY − (α²/2)dt` is diagonal, so each step applies the
//! per-sector factor `exp(±α dY − α²dt/2)` exactly. Because Π² = I the Itô
//! correction of the linear equation is a multiple of the identity and drops
//! out under normalization; the normalized state therefore depends on the
//! record only through `∫α dY`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::noise::{CounterNoise, Stream};
use crate::params::{RampSchedule, SystemParams};
use crate::sde_physical::{record_checksum, TrajectoryRecord};
use crate::table::{sample_steps, DecimatedTable};

/// Diagonal of Π₁₂ = Z₁Z₂ on the ordered basis.
pub const PARITY: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

pub const REDUCED_COLUMNS: [&str; 3] = ["alpha", "mean_pi", "var_pi"];

/// Normalized state of the reduced filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedKet {
    amps: [Complex64; 4],
}

impl ReducedKet {
    /// Normalizes the given amplitudes.
    pub fn new(amps: [Complex64; 4]) -> Result<Self> {
        let mut k = Self { amps };
        k.normalize()?;
        Ok(k)
    }

    pub fn from_real(amps: [f64; 4]) -> Result<Self> {
        Self::new(amps.map(|x| Complex64::new(x, 0.0)))
    }

    /// `2⁻¹(|u⟩ + |d⟩)^⊗2`
    pub fn equal_superposition() -> Self {
        Self {
            amps: [Complex64::new(0.5, 0.0); 4],
        }
    }

    pub fn basis(i: usize) -> Self {
        let mut amps = [Complex64::new(0.0, 0.0); 4];
        amps[i] = Complex64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::NotNormalized(n));
        }
        for a in &mut self.amps {
            *a /= n;
        }
        Ok(())
    }

    /// (even, odd) sector populations.
    pub fn sector_populations(&self) -> (f64, f64) {
        let p = self.amps.map(|a| a.norm_sqr());
        (p[0] + p[3], p[1] + p[2])
    }

    /// ⟨Π⟩
    pub fn mean_parity(&self) -> f64 {
        let (e, o) = self.sector_populations();
        (e - o) / (e + o)
    }

    /// Var(Π) = 1 − ⟨Π⟩², evaluated as 4·P_even·P_odd for precision.
    pub fn var_parity(&self) -> f64 {
        let (e, o) = self.sector_populations();
        4.0 * e * o / ((e + o) * (e + o))
    }
}

/// Probe amplitude seen by the reduced filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSchedule {
    pub alpha_max: f64,
    pub ramp: RampSchedule,
}

impl AlphaSchedule {
    pub fn constant(alpha: f64) -> Self {
        Self {
            alpha_max: alpha,
            ramp: RampSchedule::constant(),
        }
    }

    /// Mirrors the physical ramp.
    pub fn from_params(params: &SystemParams) -> Self {
        Self {
            alpha_max: params.alpha_max,
            ramp: params.ramp,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        self.alpha_max * self.ramp.envelope(t)
    }
}

/// One normalized step: exact sector-wise exponential of the generator.
pub fn reduced_step(v: &ReducedKet, dy: f64, alpha: f64, dt: f64) -> ReducedKet {
    let damp = -0.5 * alpha * alpha * dt;
    let even = (alpha * dy + damp).exp();
    let odd = (-alpha * dy + damp).exp();
    let mut amps = v.amps;
    for (a, p) in amps.iter_mut().zip(PARITY) {
        *a *= if p > 0.0 { even } else { odd };
    }
    let mut out = ReducedKet { amps };
    out.normalize().expect("finite exponential factors keep the norm positive");
    out
}

/// Forward-Euler form `v ← v + (αΠ dY − (α²/2)dt)·v`, then renormalize.
/// Agrees with [`reduced_step`] to second order in the increment.
pub fn reduced_step_euler(v: &ReducedKet, dy: f64, alpha: f64, dt: f64) -> Result<ReducedKet> {
    let mut amps = v.amps;
    for (a, p) in amps.iter_mut().zip(PARITY) {
        *a *= 1.0 + alpha * p * dy - 0.5 * alpha * alpha * dt;
    }
    ReducedKet::new(amps)
}

/// Output of a reduced-filter run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedRun {
    /// Increments that drove the filter.
    pub record: Vec<f64>,
    pub table: DecimatedTable,
    pub final_state: ReducedKet,
    /// Digest of the record actually consumed.
    pub record_checksum: String,
}

fn drive(
    v0: &ReducedKet,
    n_steps: usize,
    dt: f64,
    schedule: &AlphaSchedule,
    decimation: usize,
    mut increment: impl FnMut(u64, f64, &ReducedKet) -> f64,
) -> (Vec<f64>, DecimatedTable, ReducedKet) {
    let samples = sample_steps(n_steps, decimation);
    let mut table = DecimatedTable::new(REDUCED_COLUMNS);
    let mut record = Vec::with_capacity(n_steps);
    let mut v = *v0;
    let mut next = 0;
    for step in 0..=n_steps as u64 {
        let t = step as f64 * dt;
        let alpha = schedule.at(t);
        if next < samples.len() && samples[next] == step {
            table.push_row(step, t, &[alpha, v.mean_parity(), v.var_parity()]);
            next += 1;
        }
        if step == n_steps as u64 {
            break;
        }
        let dy = increment(step, alpha, &v);
        record.push(dy);
        v = reduced_step(&v, dy, alpha, dt);
    }
    (record, table, v)
}

fn check_unit(v: &ReducedKet) -> Result<()> {
    let n = v.norm();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(n));
    }
    Ok(())
}

/// Self-driven ideal parity measurement: `dȲ = 2α⟨Π⟩dt + dW`.
pub fn simulate_ideal(
    v0: &ReducedKet,
    schedule: &AlphaSchedule,
    dt: f64,
    n_steps: usize,
    seed: u64,
    decimation: usize,
) -> Result<ReducedRun> {
    simulate_ideal_biased(v0, schedule, dt, n_steps, seed, decimation, 0.0)
}

/// As [`simulate_ideal`] with a spurious drift, `dȲ = (2α⟨Π⟩ + bias)dt + dW`.
pub fn simulate_ideal_biased(
    v0: &ReducedKet,
    schedule: &AlphaSchedule,
    dt: f64,
    n_steps: usize,
    seed: u64,
    decimation: usize,
    bias: f64,
) -> Result<ReducedRun> {
    check_unit(v0)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("dt must be > 0, got {dt}")));
    }
    let mut noise = CounterNoise::with_diffusion_stream(seed, Stream::IdealDiffusion);
    let sqrt_dt = dt.sqrt();
    let (record, table, final_state) = drive(v0, n_steps, dt, schedule, decimation, |step, alpha, v| {
        let dy = 2.0 * alpha * v.mean_parity() * dt + noise.standard_normal(step) * sqrt_dt;
        if bias == 0.0 {
            dy
        } else {
            dy + bias * dt
        }
    });
    let record_checksum = record_checksum(&record);
    Ok(ReducedRun {
        record,
        table,
        final_state,
        record_checksum,
    })
}

/// Drives the reduced filter with a given homodyne record.
pub fn run_on_record(
    v0: &ReducedKet,
    dy: &[f64],
    schedule: &AlphaSchedule,
    dt: f64,
    decimation: usize,
) -> Result<ReducedRun> {
    check_unit(v0)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("dt must be > 0, got {dt}")));
    }
    let record_checksum = record_checksum(dy);
    let (record, table, final_state) =
        drive(v0, dy.len(), dt, schedule, decimation, |step, _, _| dy[step as usize]);
    Ok(ReducedRun {
        record,
        table,
        final_state,
        record_checksum,
    })
}

/// Drives the reduced filter with the homodyne record of a physical
/// trajectory. Counting events in the record are ignored.
pub fn run_on_trajectory(
    v0: &ReducedKet,
    trajectory: &TrajectoryRecord,
    schedule: &AlphaSchedule,
    dt: f64,
) -> Result<ReducedRun> {
    if (trajectory.dt - dt).abs() > 1e-15 * dt.max(1.0) {
        return Err(Error::GridMismatch(format!(
            "record dt {} differs from filter dt {}",
            trajectory.dt, dt
        )));
    }
    if trajectory.dy0.len() as u64 != trajectory.n_steps {
        return Err(Error::GridMismatch(format!(
            "record holds {} increments for {} steps",
            trajectory.dy0.len(),
            trajectory.n_steps
        )));
    }
    run_on_record(v0, &trajectory.dy0, schedule, dt, trajectory.decimation as usize)
}
