//! Counter-based noise.
//!
//! Every draw is a pure function of `(seed, stream, step)`: each stream is a
//! ChaCha8 keystream selected with `set_stream`, and step `k` owns a fixed
//! window of `WORDS_PER_STEP` 32-bit words starting at `k * WORDS_PER_STEP`.
//! Sequential use never repositions the cipher; random access does.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 32-bit words consumed per step and stream (two u64 draws).
const WORDS_PER_STEP: u128 = 4;

/// Stream identifiers. Distinct streams of one seed are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    PhysicalDiffusion = 0,
    Jumps = 1,
    IdealDiffusion = 2,
}

/// Random inputs of one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepNoise {
    /// Wiener increment, variance `dt`.
    pub dw: f64,
    /// One uniform in [0, 1) per counting channel.
    pub jump_draws: [f64; 2],
}

impl StepNoise {
    /// No diffusion and no jumps.
    pub const QUIET: StepNoise = StepNoise {
        dw: 0.0,
        jump_draws: [1.0, 1.0],
    };
}

pub trait NoiseSource {
    fn step_noise(&mut self, step: u64, dt: f64) -> StepNoise;
}

#[derive(Debug, Clone)]
struct KeyedStream {
    rng: ChaCha8Rng,
    next_step: u64,
}

impl KeyedStream {
    fn new(seed: u64, stream: Stream) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        Self { rng, next_step: 0 }
    }

    fn pair(&mut self, step: u64) -> (u64, u64) {
        if step != self.next_step {
            self.rng.set_word_pos(step as u128 * WORDS_PER_STEP);
        }
        self.next_step = step + 1;
        (self.rng.next_u64(), self.rng.next_u64())
    }
}

/// Uniform in [0, 1) from the top 53 bits.
#[inline]
fn unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal via Box–Muller, consuming exactly two draws.
#[inline]
fn gaussian(a: u64, b: u64) -> f64 {
    let u1 = 1.0 - unit(a); // (0, 1]
    let u2 = unit(b);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Noise for the physical filter: Gaussian increments plus two jump
/// uniforms per step.
#[derive(Debug, Clone)]
pub struct CounterNoise {
    seed: u64,
    diffusion: KeyedStream,
    jumps: KeyedStream,
}

impl CounterNoise {
    pub fn new(seed: u64) -> Self {
        Self::with_diffusion_stream(seed, Stream::PhysicalDiffusion)
    }

    pub fn with_diffusion_stream(seed: u64, stream: Stream) -> Self {
        Self {
            seed,
            diffusion: KeyedStream::new(seed, stream),
            jumps: KeyedStream::new(seed, Stream::Jumps),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Standard normal of `step`, before scaling by √dt.
    pub fn standard_normal(&mut self, step: u64) -> f64 {
        let (a, b) = self.diffusion.pair(step);
        gaussian(a, b)
    }
}

impl NoiseSource for CounterNoise {
    fn step_noise(&mut self, step: u64, dt: f64) -> StepNoise {
        let dw = self.standard_normal(step) * dt.sqrt();
        let (a, b) = self.jumps.pair(step);
        StepNoise {
            dw,
            jump_draws: [unit(a), unit(b)],
        }
    }
}

/// Deterministic source: no diffusion, no jumps.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuietNoise;

impl NoiseSource for QuietNoise {
    fn step_noise(&mut self, _step: u64, _dt: f64) -> StepNoise {
        StepNoise::QUIET
    }
}

/// Replays a fixed list of per-step noise.
#[derive(Debug, Clone)]
pub struct ScriptedNoise {
    steps: Vec<StepNoise>,
}

impl ScriptedNoise {
    pub fn new(steps: Vec<StepNoise>) -> Self {
        Self { steps }
    }
}

impl NoiseSource for ScriptedNoise {
    fn step_noise(&mut self, step: u64, _dt: f64) -> StepNoise {
        self.steps[step as usize]
    }
}
