//! Physical rates, truncation and time grid.
//!
//! All rates share one frequency unit. With the default values γ² = 1, so the
//! simulation clock reads directly in units of γ²t.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Largest allowed `dt · γ²`; keeps the per-step jump probability tiny.
pub const MAX_JUMP_RATE_DT: f64 = 0.01;
/// Largest allowed `dt · max(g, κ²)` for the explicit stepper.
pub const MAX_STIFFNESS_DT: f64 = 0.1;

/// Shape of the adiabatic probe switch-on / switch-off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampProfile {
    Sin2,
    Linear,
}

/// Probe envelope: off before `t_on`, rising over `t_rise`, on until `t_off`,
/// falling over `t_fall`, off afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampSchedule {
    pub t_on: f64,
    pub t_rise: f64,
    pub t_off: f64,
    pub t_fall: f64,
    pub profile: RampProfile,
}

impl Default for RampSchedule {
    fn default() -> Self {
        Self {
            t_on: 0.0,
            t_rise: 10.0,
            t_off: 80.0,
            t_fall: 10.0,
            profile: RampProfile::Sin2,
        }
    }
}

impl RampSchedule {
    /// A probe that is always off.
    pub fn off() -> Self {
        Self {
            t_on: f64::MAX,
            t_rise: 0.0,
            t_off: f64::MAX,
            t_fall: 0.0,
            profile: RampProfile::Sin2,
        }
    }

    /// A probe that is on at full amplitude from `t = 0` onwards.
    pub fn constant() -> Self {
        Self {
            t_on: 0.0,
            t_rise: 0.0,
            t_off: f64::MAX,
            t_fall: 0.0,
            profile: RampProfile::Sin2,
        }
    }

    pub fn plateau_start(&self) -> f64 {
        self.t_on + self.t_rise
    }

    pub fn plateau_end(&self) -> f64 {
        self.t_off
    }

    pub fn is_on_plateau(&self, t: f64) -> bool {
        t >= self.plateau_start() && t <= self.plateau_end()
    }

    /// Fraction of full amplitude at time `t`, in [0, 1].
    pub fn envelope(&self, t: f64) -> f64 {
        if t < self.t_on {
            return 0.0;
        }
        if t < self.t_on + self.t_rise {
            return self.shape((t - self.t_on) / self.t_rise);
        }
        if t <= self.t_off {
            return 1.0;
        }
        if t < self.t_off + self.t_fall {
            return self.shape(1.0 - (t - self.t_off) / self.t_fall);
        }
        0.0
    }

    fn shape(&self, s: f64) -> f64 {
        match self.profile {
            RampProfile::Sin2 => (0.5 * std::f64::consts::PI * s).sin().powi(2),
            RampProfile::Linear => s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.t_on, self.t_rise, self.t_off, self.t_fall];
        if vals.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidParams("ramp times must not be NaN".into()));
        }
        if self.t_on < 0.0 || self.t_rise < 0.0 || self.t_fall < 0.0 {
            return Err(Error::InvalidParams(
                "ramp times t_on, t_rise, t_fall must be non-negative".into(),
            ));
        }
        if self.t_on.is_finite() && self.t_on + self.t_rise > self.t_off {
            return Err(Error::InvalidParams(format!(
                "ramp rise must complete before t_off (t_on + t_rise = {} > t_off = {})",
                self.t_on + self.t_rise,
                self.t_off
            )));
        }
        Ok(())
    }
}

/// Physical parameters of the two cascaded atom–cavity systems plus the
/// integration grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Vacuum Rabi frequency.
    pub g: f64,
    /// κ²/2, cavity field decay.
    pub kappa2_half: f64,
    /// γ²/2, atomic excited-state decay.
    pub gamma2_half: f64,
    /// Plateau probe amplitude α.
    pub alpha_max: f64,
    pub fock_dim: usize,
    pub dt: f64,
    pub t_final: f64,
    pub ramp: RampSchedule,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            g: 20.0,
            kappa2_half: 4.5,
            gamma2_half: 0.5,
            alpha_max: 0.2,
            fock_dim: 8,
            dt: 2e-4,
            t_final: 90.0,
            ramp: RampSchedule::default(),
        }
    }
}

impl SystemParams {
    pub fn kappa(&self) -> f64 {
        (2.0 * self.kappa2_half).sqrt()
    }

    pub fn kappa_sq(&self) -> f64 {
        2.0 * self.kappa2_half
    }

    pub fn gamma(&self) -> f64 {
        (2.0 * self.gamma2_half).sqrt()
    }

    pub fn gamma_sq(&self) -> f64 {
        2.0 * self.gamma2_half
    }

    /// Probe amplitude α(t).
    pub fn alpha_at(&self, t: f64) -> f64 {
        self.alpha_max * self.ramp.envelope(t)
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn time_of_step(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("g", self.g),
            ("kappa2_half", self.kappa2_half),
            ("gamma2_half", self.gamma2_half),
            ("alpha_max", self.alpha_max),
            ("dt", self.dt),
            ("t_final", self.t_final),
        ];
        for (name, v) in named {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite, got {v}")));
            }
            if v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.fock_dim < 2 {
            return Err(Error::InvalidParams(format!(
                "fock_dim must be >= 2, got {}",
                self.fock_dim
            )));
        }
        if self.dt <= 0.0 {
            return Err(Error::InvalidParams("dt must be > 0".into()));
        }
        if self.t_final <= 0.0 {
            return Err(Error::InvalidParams("t_final must be > 0".into()));
        }
        let jump_dt = self.dt * self.gamma_sq();
        if jump_dt >= MAX_JUMP_RATE_DT {
            return Err(Error::InvalidParams(format!(
                "dt * gamma^2 = {jump_dt} must be < {MAX_JUMP_RATE_DT}"
            )));
        }
        let stiff = self.dt * self.g.max(self.kappa_sq());
        if stiff >= MAX_STIFFNESS_DT {
            return Err(Error::InvalidParams(format!(
                "dt * max(g, kappa^2) = {stiff} must be < {MAX_STIFFNESS_DT}"
            )));
        }
        self.ramp.validate()
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("SystemParams always serializes");
        Sha256::digest(&bytes).into()
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest())
    }
}
