use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleConfig, EnsembleMode, ScalingBranch};
use crate::error::{Error, Result};
use crate::params::{RampSchedule, SystemParams};
use crate::sde_physical::DEFAULT_DECIMATION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    pub g: f64,
    pub kappa2_half: f64,
    pub gamma2_half: f64,
    pub alpha_max: f64,
    pub fock_dim: usize,
    pub dt: f64,
    pub t_final: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        let p = SystemParams::default();
        Self {
            g: p.g,
            kappa2_half: p.kappa2_half,
            gamma2_half: p.gamma2_half,
            alpha_max: p.alpha_max,
            fock_dim: p.fock_dim,
            dt: p.dt,
            t_final: p.t_final,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub n_traj: usize,
    pub seed_base: u64,
    pub mode: EnsembleMode,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            n_traj: 200,
            seed_base: 1,
            mode: EnsembleMode::CrossDriven,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsSection {
    pub dir: PathBuf,
    pub emit_svg: bool,
    pub decimation: usize,
}

impl Default for OutputsSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            emit_svg: false,
            decimation: DEFAULT_DECIMATION,
        }
    }
}

/// Scaling-study settings. Scales and branches normally come from the
/// command line and are echoed here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingSection {
    pub scales: Vec<f64>,
    pub branches: Vec<ScalingBranch>,
}

impl Default for ScalingSection {
    fn default() -> Self {
        Self {
            scales: vec![1.0, 2.0, 4.0],
            branches: vec![ScalingBranch::G, ScalingBranch::AlphaKappa],
        }
    }
}

/// Complete run description. Every section and field is optional on input
/// and falls back to the defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: ParamsSection,
    pub ramp: RampSchedule,
    pub ensemble: EnsembleSection,
    pub outputs: OutputsSection,
    pub scaling: ScalingSection,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn system_params(&self) -> SystemParams {
        let p = &self.params;
        SystemParams {
            g: p.g,
            kappa2_half: p.kappa2_half,
            gamma2_half: p.gamma2_half,
            alpha_max: p.alpha_max,
            fock_dim: p.fock_dim,
            dt: p.dt,
            t_final: p.t_final,
            ramp: self.ramp,
        }
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        let mut c = EnsembleConfig::new(
            self.ensemble.mode,
            self.ensemble.n_traj,
            self.ensemble.seed_base,
            self.system_params(),
        );
        c.decimation = self.outputs.decimation;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.system_params().validate()?;
        if self.ensemble.n_traj == 0 {
            return Err(Error::InvalidParams("ensemble.n_traj must be at least 1".into()));
        }
        if self.outputs.decimation == 0 {
            return Err(Error::InvalidParams("outputs.decimation must be at least 1".into()));
        }
        if let Some(s) = self.scaling.scales.iter().find(|s| !(s.is_finite() && **s >= 1.0)) {
            return Err(Error::InvalidParams(format!("scale factors must be ≥ 1, got {s}")));
        }
        Ok(())
    }

    /// Pretty JSON of the resolved configuration, newline terminated.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("RunConfig always serializes");
        s.push('\n');
        s
    }

    /// Writes the resolved configuration as `config.json` under `dir`.
    pub fn write_echo(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("config.json");
        std::fs::write(&path, self.to_json())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_json_str("{}").unwrap();
        assert_eq!(c.system_params(), SystemParams::default());
        assert_eq!(c.outputs.decimation, 50);
    }

    #[test]
    fn unknown_keys_rejected() {
        for doc in [
            r#"{"params": {"g": 20, "q": 1}}"#,
            r#"{"extra": {}}"#,
            r#"{"ramp": {"t_on": 0, "t_rise": 10, "t_off": 80, "t_fall": 10, "profile": "sin2", "x": 0}}"#,
            r#"{"outputs": {"emit_png": true}}"#,
        ] {
            let e = RunConfig::from_json_str(doc).unwrap_err();
            assert_eq!(e.kind(), "config", "{doc}");
        }
    }

    #[test]
    fn physical_rules_apply() {
        let e = RunConfig::from_json_str(r#"{"params": {"dt": 0.5}}"#).unwrap_err();
        assert_eq!(e.kind(), "invalid_params");
        let e = RunConfig::from_json_str(r#"{"params": {"g": -1}}"#).unwrap_err();
        assert_eq!(e.kind(), "invalid_params");
        let e = RunConfig::from_json_str(r#"{"ensemble": {"n_traj": 0}}"#).unwrap_err();
        assert_eq!(e.kind(), "invalid_params");
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::from_json_str(
            r#"{"ensemble": {"mode": "ideal", "n_traj": 5}, "ramp": {"t_on": 1, "t_rise": 2, "t_off": 5, "t_fall": 1, "profile": "linear"}}"#,
        )
        .unwrap();
        let back = RunConfig::from_json_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.ensemble.mode, EnsembleMode::Ideal);
    }

    #[test]
    fn shipped_defaults_file_matches() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
        let c = RunConfig::from_path(&path).unwrap();
        assert_eq!(c.system_params(), SystemParams::default());
    }
}
