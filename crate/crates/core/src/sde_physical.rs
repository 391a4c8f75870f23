//! Physical pure-state filter of the two-cavity cascade: one homodyne
//! channel on the probe and two photon-counting channels on the atomic
//! spontaneous emission.
//!
//! The linear form of the filter is stepped with Euler–Maruyama and the
//! state renormalized after every step. Records are generated from the
//! normalized expectations: `dY0 = ⟨L + L†⟩dt + dW` with `L = κb₁ + κb₂ + α(t)`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hilbert::{
    atom_state, fock_state, product_state, Ket, Op, OperatorCatalog, EXCITED, MINUS, PLUS,
};
use crate::noise::{CounterNoise, NoiseSource, StepNoise};
use crate::observables::{PhysicalProbe, PHYSICAL_COLUMNS};
use crate::params::{RampSchedule, SystemParams};
use crate::table::{sample_steps, DecimatedTable};

/// Observables are sampled every this many steps by default.
pub const DEFAULT_DECIMATION: usize = 50;
/// Pre-normalization norm below which a step is treated as a collapse.
pub const NORM_COLLAPSE: f64 = 1e-8;
/// Largest tolerated population in the highest Fock level of a cavity.
pub const TRUNCATION_TOLERANCE: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Probe amplitude α(t) under the ramp.
pub fn probe_amplitude(t: f64, ramp: &RampSchedule, alpha_max: f64) -> f64 {
    alpha_max * ramp.envelope(t)
}

/// Spontaneous-emission event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JumpEvent {
    /// Grid step at which the jump fired; its time is `step · dt`.
    pub step: u64,
    /// Counting channel, 1 or 2.
    pub channel: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Homodyne increment recorded during the step.
    pub dy0: f64,
    /// Whether each counting channel clicked.
    pub jumps: [bool; 2],
}

/// Fused sparse kernel for one Euler step.
///
/// The drift, its α-coefficient and the measurement operator are stored on
/// one union sparsity pattern with three real coefficient arrays, so one pass
/// over the pattern applies `dt·D + α·dt·D_α + dY·L0`.
#[derive(Debug, Clone)]
pub struct StepKernel {
    dim: usize,
    indptr: Vec<u32>,
    indices: Vec<u32>,
    drift: Vec<f64>,
    drift_alpha: Vec<f64>,
    meas: Vec<f64>,
    excited1: Vec<u32>,
    excited2: Vec<u32>,
    jump1: Op,
    jump2: Op,
}

fn real_values(op: &Op, name: &str) -> Result<()> {
    if op.is_real() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "step kernel needs a real-valued {name} operator"
        )))
    }
}

impl StepKernel {
    pub fn new(catalog: &OperatorCatalog) -> Result<Self> {
        real_values(&catalog.drift_const, "drift")?;
        real_values(&catalog.drift_linear_in_alpha, "drift_linear_in_alpha")?;
        real_values(&catalog.measurement_l0, "measurement")?;
        let space = catalog.space;
        let dim = space.total_dim();

        let mut indptr = vec![0u32];
        let mut indices = Vec::new();
        let (mut drift, mut drift_alpha, mut meas) = (Vec::new(), Vec::new(), Vec::new());
        for r in 0..dim {
            let mut row: BTreeMap<usize, [f64; 3]> = BTreeMap::new();
            for (c, v) in catalog.drift_const.row(r) {
                row.entry(c).or_default()[0] += v.re;
            }
            for (c, v) in catalog.drift_linear_in_alpha.row(r) {
                row.entry(c).or_default()[1] += v.re;
            }
            for (c, v) in catalog.measurement_l0.row(r) {
                row.entry(c).or_default()[2] += v.re;
            }
            for (c, [d, a, m]) in row {
                indices.push(c as u32);
                drift.push(d);
                drift_alpha.push(a);
                meas.push(m);
            }
            indptr.push(indices.len() as u32);
        }

        let mut excited1 = Vec::new();
        let mut excited2 = Vec::new();
        for i in 0..dim {
            let (a1, _, a2, _) = space.decompose(i);
            if a1 == EXCITED {
                excited1.push(i as u32);
            }
            if a2 == EXCITED {
                excited2.push(i as u32);
            }
        }
        Ok(Self {
            dim,
            indptr,
            indices,
            drift,
            drift_alpha,
            meas,
            excited1,
            excited2,
            jump1: catalog.jump1.clone(),
            jump2: catalog.jump2.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nonzeros of the fused pattern.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    fn population(v: &[Complex64], idx: &[u32]) -> f64 {
        idx.iter().map(|&i| v[i as usize].norm_sqr()).sum()
    }
}

/// Steps the physical filter for one parameter set. Owns its scratch buffer;
/// the kernel is cloned per worker.
#[derive(Debug, Clone)]
pub struct PhysicalStepper {
    kernel: StepKernel,
    dt: f64,
    gamma_sq: f64,
    alpha_max: f64,
    ramp: RampSchedule,
    scratch: Vec<Complex64>,
    scratch_meas: Vec<Complex64>,
}

impl PhysicalStepper {
    pub fn new(catalog: &OperatorCatalog, params: &SystemParams) -> Result<Self> {
        params.validate()?;
        if catalog.space.fock_dim() != params.fock_dim {
            return Err(Error::DimensionMismatch {
                expected: params.fock_dim,
                got: catalog.space.fock_dim(),
            });
        }
        let kernel = StepKernel::new(catalog)?;
        let dim = kernel.dim;
        Ok(Self {
            kernel,
            dt: params.dt,
            gamma_sq: params.gamma_sq(),
            alpha_max: params.alpha_max,
            ramp: params.ramp,
            scratch: vec![ZERO; dim],
            scratch_meas: vec![ZERO; dim],
        })
    }

    pub fn kernel(&self) -> &StepKernel {
        &self.kernel
    }

    pub fn alpha_at(&self, t: f64) -> f64 {
        probe_amplitude(t, &self.ramp, self.alpha_max)
    }

    /// Advances `v` by one grid step in place.
    ///
    /// Jumps are decided first from the pre-step state; the diffusive update
    /// then applies every dt-term of the linear filter plus `L·dY0`.
    pub fn step(&mut self, v: &mut Ket, step: u64, noise: &StepNoise) -> Result<StepOutcome> {
        let dt = self.dt;
        let t = step as f64 * dt;
        let alpha = self.alpha_at(t);
        let k = &self.kernel;

        let p1 = self.gamma_sq * StepKernel::population(v.as_slice(), &k.excited1) * dt;
        let p2 = self.gamma_sq * StepKernel::population(v.as_slice(), &k.excited2) * dt;
        let jumps = [noise.jump_draws[0] < p1, noise.jump_draws[1] < p2];
        for (fired, op) in jumps.iter().zip([&k.jump1, &k.jump2]) {
            if *fired {
                op.apply_into(v.as_slice(), &mut self.scratch);
                v.as_mut_slice().copy_from_slice(&self.scratch);
                let norm = v.norm();
                if norm < NORM_COLLAPSE {
                    return Err(Error::NormCollapse { step, time: t, norm });
                }
                v.normalize()?;
            }
        }

        // One pass gives both the drift image and L0·v; ⟨L0⟩ then fixes dY0
        // and the rows are combined.
        let amps = v.as_slice();
        let c_d = dt;
        let c_a = alpha * dt;
        let mut l0_expect = 0.0;
        for r in 0..k.dim {
            let (lo, hi) = (k.indptr[r] as usize, k.indptr[r + 1] as usize);
            let mut s_drift = ZERO;
            let mut s_meas = ZERO;
            for ((&c, (&d, &a)), &m) in k.indices[lo..hi]
                .iter()
                .zip(k.drift[lo..hi].iter().zip(&k.drift_alpha[lo..hi]))
                .zip(&k.meas[lo..hi])
            {
                let x = amps[c as usize];
                s_drift += x * (c_d * d + c_a * a);
                s_meas += x * m;
            }
            let vr = amps[r];
            l0_expect += vr.re * s_meas.re + vr.im * s_meas.im;
            self.scratch[r] = s_drift;
            self.scratch_meas[r] = s_meas;
        }
        let homodyne = 2.0 * l0_expect + 2.0 * alpha;
        let dy0 = homodyne * dt + noise.dw;
        let diag = 1.0 + alpha * dy0;
        let mut norm_sqr = 0.0;
        for ((s, &m), &x) in self.scratch.iter_mut().zip(&self.scratch_meas).zip(amps) {
            *s += x * diag + m * dy0;
            norm_sqr += s.norm_sqr();
        }
        let norm = norm_sqr.sqrt();
        if !(norm >= NORM_COLLAPSE) {
            return Err(Error::NormCollapse { step, time: t, norm });
        }
        let inv = 1.0 / norm;
        for (dst, src) in v.as_mut_slice().iter_mut().zip(&self.scratch) {
            *dst = src * inv;
        }
        Ok(StepOutcome { dy0, jumps })
    }
}

/// One Euler step of the physical filter from time `t` (which must lie on
/// the grid of `params.dt`). Returns the new state, the homodyne increment
/// and the jump channels that fired.
pub fn euler_step(
    v: &Ket,
    t: f64,
    noise: &StepNoise,
    catalog: &OperatorCatalog,
    params: &SystemParams,
) -> Result<(Ket, f64, Vec<JumpEvent>)> {
    check_unit_norm(v)?;
    let mut stepper = PhysicalStepper::new(catalog, params)?;
    let step = (t / params.dt).round() as u64;
    let mut out = v.clone();
    let outcome = stepper.step(&mut out, step, noise)?;
    let events = outcome
        .jumps
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(i, _)| JumpEvent {
            step,
            channel: i as u8 + 1,
        })
        .collect();
    Ok((out, outcome.dy0, events))
}

fn check_unit_norm(v: &Ket) -> Result<()> {
    let n = v.norm();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(n));
    }
    Ok(())
}

/// Full output of one physical trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub params_digest: [u8; 32],
    pub dt: f64,
    pub n_steps: u64,
    pub decimation: u32,
    /// Homodyne increments at full rate.
    pub dy0: Vec<f64>,
    pub jumps: Vec<JumpEvent>,
    pub observables: DecimatedTable,
}

impl TrajectoryRecord {
    pub fn t_final(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// Digest of the homodyne record, used to verify record/filter pairing.
    pub fn dy0_checksum(&self) -> String {
        record_checksum(&self.dy0)
    }
}

/// SHA-256 over the little-endian bytes of a record.
pub fn record_checksum(dy: &[f64]) -> String {
    let mut h = Sha256::new();
    for x in dy {
        h.update(x.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub decimation: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            decimation: DEFAULT_DECIMATION,
        }
    }
}

/// Default initial state `2⁻¹((|+⟩ + |−⟩) ⊗ |0⟩)^⊗2`.
pub fn default_initial_state(fock_dim: usize) -> Ket {
    let x = atom_state(PLUS)
        .add(&atom_state(MINUS))
        .scaled(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
    let vac = fock_state(0, fock_dim);
    product_state(&x, &vac, &x, &vac)
}

/// Integrates one trajectory with counter-based noise keyed by `seed`.
pub fn simulate(params: &SystemParams, v0: &Ket, seed: u64) -> Result<TrajectoryRecord> {
    simulate_opts(params, v0, seed, SimOptions::default())
}

pub fn simulate_opts(
    params: &SystemParams,
    v0: &Ket,
    seed: u64,
    options: SimOptions,
) -> Result<TrajectoryRecord> {
    if options.decimation == 0 {
        return Err(Error::InvalidParams("decimation must be at least 1".into()));
    }
    let catalog = crate::hilbert::build_catalog(params)?;
    let mut stepper = PhysicalStepper::new(&catalog, params)?;
    let probe = PhysicalProbe::new(&catalog);
    simulate_with(
        params,
        &mut stepper,
        &probe,
        v0,
        &mut CounterNoise::new(seed),
        seed,
        options,
    )
}

/// Integrates one trajectory with an explicit stepper, probe and noise source.
pub fn simulate_with(
    params: &SystemParams,
    stepper: &mut PhysicalStepper,
    probe: &PhysicalProbe,
    v0: &Ket,
    noise: &mut dyn NoiseSource,
    seed: u64,
    options: SimOptions,
) -> Result<TrajectoryRecord> {
    params.validate()?;
    check_unit_norm(v0)?;
    if v0.dim() != probe.space().total_dim() {
        return Err(Error::DimensionMismatch {
            expected: probe.space().total_dim(),
            got: v0.dim(),
        });
    }
    let n_steps = params.n_steps();
    let samples = sample_steps(n_steps, options.decimation);
    let mut table = DecimatedTable::new(PHYSICAL_COLUMNS);
    let mut dy0 = Vec::with_capacity(n_steps);
    let mut jumps = Vec::new();
    let mut v = v0.clone();
    let mut next = 0usize;

    for step in 0..=n_steps as u64 {
        if next < samples.len() && samples[next] == step {
            let t = step as f64 * params.dt;
            let obs = probe.measure(&v, stepper.alpha_at(t))?;
            if obs.top_fock_pop > TRUNCATION_TOLERANCE {
                return Err(Error::TruncationLeak {
                    step,
                    time: t,
                    population: obs.top_fock_pop,
                    fock_dim: params.fock_dim,
                });
            }
            table.push_row(step, t, &obs.row());
            next += 1;
        }
        if step == n_steps as u64 {
            break;
        }
        let sn = noise.step_noise(step, params.dt);
        let outcome = stepper.step(&mut v, step, &sn)?;
        dy0.push(outcome.dy0);
        for (i, fired) in outcome.jumps.iter().enumerate() {
            if *fired {
                jumps.push(JumpEvent {
                    step,
                    channel: i as u8 + 1,
                });
            }
        }
    }

    Ok(TrajectoryRecord {
        seed,
        params_digest: params.digest(),
        dt: params.dt,
        n_steps: n_steps as u64,
        decimation: options.decimation as u32,
        dy0,
        jumps,
        observables: table,
    })
}

/// Ground-qubit configuration of the two atoms; `u` is the cavity-coupled
/// state |+⟩, `d` the uncoupled |−⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitConfig {
    UU,
    UD,
    DU,
    DD,
}

impl QubitConfig {
    pub const ALL: [QubitConfig; 4] = [QubitConfig::UU, QubitConfig::UD, QubitConfig::DU, QubitConfig::DD];

    pub fn coupled(self) -> (bool, bool) {
        match self {
            QubitConfig::UU => (true, true),
            QubitConfig::UD => (true, false),
            QubitConfig::DU => (false, true),
            QubitConfig::DD => (false, false),
        }
    }

    /// +1 for even parity, −1 for odd.
    pub fn parity(self) -> f64 {
        let (a, b) = self.coupled();
        if a == b {
            1.0
        } else {
            -1.0
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            QubitConfig::UU => "uu",
            QubitConfig::UD => "ud",
            QubitConfig::DU => "du",
            QubitConfig::DD => "dd",
        }
    }

    /// Atoms in this configuration, both cavities in vacuum.
    pub fn vacuum_state(self, fock_dim: usize) -> Ket {
        let level = |c: bool| if c { PLUS } else { MINUS };
        let (a, b) = self.coupled();
        let vac = fock_state(0, fock_dim);
        product_state(&atom_state(level(a)), &vac, &atom_state(level(b)), &vac)
    }
}

/// Steady intracavity amplitudes and mean homodyne rate ⟨L + L†⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub beta1: Complex64,
    pub beta2: Complex64,
    pub homodyne_mean_rate: f64,
}

/// Strong-coupling cascade: an uncoupled cavity driven with input `a` holds
/// `−2a/κ` and reflects `−a`; a coupled cavity stays empty and reflects `a`.
/// Cavity 2 is driven by the output of cavity 1.
pub fn steady_state_oracle(config: QubitConfig, params: &SystemParams) -> SteadyState {
    let kappa = params.kappa();
    let cavity = |coupled: bool, input: f64| {
        if coupled {
            (0.0, input)
        } else {
            (-2.0 * input / kappa, -input)
        }
    };
    cascade(config, params.alpha_max, cavity)
}

/// Weak-drive steady state at finite g: a coupled cavity with input `a` holds
/// `−κa / (κ²/2 + g²/(γ²/2))` and reflects `a + κβ`. Reduces to
/// [`steady_state_oracle`] as g → ∞.
pub fn dressed_steady_state(config: QubitConfig, params: &SystemParams) -> SteadyState {
    let kappa = params.kappa();
    let damping = params.kappa2_half + params.g * params.g / params.gamma2_half;
    let cavity = |coupled: bool, input: f64| {
        if coupled {
            let b = -kappa * input / damping;
            (b, input + kappa * b)
        } else {
            (-2.0 * input / kappa, -input)
        }
    };
    cascade(config, params.alpha_max, cavity)
}

fn cascade(config: QubitConfig, alpha: f64, cavity: impl Fn(bool, f64) -> (f64, f64)) -> SteadyState {
    let (c1, c2) = config.coupled();
    let (beta1, out1) = cavity(c1, alpha);
    let (beta2, out2) = cavity(c2, out1);
    SteadyState {
        beta1: Complex64::new(beta1, 0.0),
        beta2: Complex64::new(beta2, 0.0),
        homodyne_mean_rate: 2.0 * out2,
    }
}
