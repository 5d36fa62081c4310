//! JSON run-configuration file. Missing keys take defaults, unknown keys are
//! rejected, and every range is checked on load.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{QedError, Result};
use crate::experiments::{
    default_p_grid, Metric, PhaseMode, SweepSpec, DEFAULT_PRECISION, DEFAULT_TAU2_US,
};
use crate::hilbert::C64;
use crate::protocol::{Backend, DeviceParams, Kappas, ProtocolConfig, ProtocolPhases, Uncollapse};
use crate::tomography::JointReadout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub p: f64,
    pub p_u: Uncollapse,
    pub tau2_us: f64,
    pub storage_enabled: bool,
    pub kappas: Kappas,
    pub phases: ProtocolPhases,
    pub tau1_ns: f64,
    pub tau3_ns: f64,
    pub resonator_truncation: usize,
    pub backend: Backend,
    pub phase_mode: PhaseMode,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        let d = ProtocolConfig::default();
        Self {
            p: d.p,
            p_u: d.p_u,
            tau2_us: d.tau2_us,
            storage_enabled: d.storage_enabled,
            kappas: d.kappas,
            phases: d.phases,
            tau1_ns: d.tau1_ns,
            tau3_ns: d.tau3_ns,
            resonator_truncation: d.resonator_truncation,
            backend: Backend::Analytic,
            phase_mode: PhaseMode::Model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub p_grid: Vec<f64>,
    pub tau2_us: Vec<f64>,
    pub metric: Metric,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            p_grid: default_p_grid(),
            tau2_us: DEFAULT_TAU2_US.to_vec(),
            metric: Metric::F,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct MonteCarloSection {
    /// Shots per input and tomography setting; 0 evaluates exactly.
    pub shots: u64,
    pub seed: u64,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub csv: Option<PathBuf>,
    /// Defaults to the CSV path with a `.manifest.json` suffix.
    pub manifest: Option<PathBuf>,
    /// Significant digits of every emitted number.
    pub precision: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            csv: None,
            manifest: None,
            precision: DEFAULT_PRECISION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub device: DeviceParams,
    pub protocol: ProtocolSection,
    pub sweep: SweepSection,
    pub monte_carlo: MonteCarloSection,
    pub output: OutputSection,
}

impl RunConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| QedError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| QedError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: QedError| match e {
            QedError::Config(m) => QedError::Config(m),
            other => QedError::Config(other.to_string()),
        };
        self.device.validate().map_err(wrap)?;
        self.protocol_config().validate().map_err(wrap)?;
        self.sweep_spec().validate().map_err(wrap)?;
        if !(1..=17).contains(&self.output.precision) {
            return Err(QedError::Config(format!(
                "output precision {} must lie in 1..=17",
                self.output.precision
            )));
        }
        Ok(())
    }

    /// Protocol parameters with the `|g>` input.
    pub fn protocol_config(&self) -> ProtocolConfig {
        let s = &self.protocol;
        ProtocolConfig {
            alpha: C64::new(1.0, 0.0),
            beta: C64::new(0.0, 0.0),
            p: s.p,
            p_u: s.p_u,
            tau2_us: s.tau2_us,
            storage_enabled: s.storage_enabled,
            kappas: s.kappas,
            phases: s.phases,
            idle_detuning_mhz: self.device.idle_detuning_mhz,
            memory_t1_us: self.device.m1.t1_us,
            tau1_ns: s.tau1_ns,
            tau3_ns: s.tau3_ns,
            resonator_truncation: s.resonator_truncation,
        }
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            p_grid: self.sweep.p_grid.clone(),
            tau2_us: self.sweep.tau2_us.clone(),
            backend: self.protocol.backend,
            metric: self.sweep.metric,
            base: self.protocol_config(),
            shots: self.monte_carlo.shots,
            seed: self.monte_carlo.seed,
            readout: JointReadout {
                models: [self.device.readout_q1, self.device.readout_q2, self.device.readout_q3],
            },
            phase_mode: self.protocol.phase_mode,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfigFile::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfigFile::default());
        assert_eq!(cfg.device.q2.t1_us, 0.614);
        assert_eq!(cfg.device.readout_q3.f_e, 0.91);
        assert_eq!(cfg.sweep.p_grid.len(), 8);
    }

    #[test]
    fn sections_merge_with_defaults() {
        let cfg = RunConfigFile::from_json(
            r#"{"protocol": {"p": 0.5, "p_u": 0.6, "kappas": {"k1": 1.0}},
                "device": {"m1": {"freq_ghz": 7.55, "t1_us": 5.0, "t2_us": 5.0, "tse_us": null}},
                "monte_carlo": {"shots": 100, "seed": 9}}"#,
        )
        .unwrap();
        let pc = cfg.protocol_config();
        assert_eq!(pc.p_u, Uncollapse::Fixed(0.6));
        assert_eq!(pc.kappas.k1, 1.0);
        assert_eq!(pc.kappas.k3, 0.985);
        assert_eq!(pc.memory_t1_us, 5.0);
        let spec = cfg.sweep_spec();
        assert_eq!((spec.shots, spec.seed), (100, 9));
    }

    #[test]
    fn unknown_and_invalid_keys_rejected() {
        assert!(RunConfigFile::from_json(r#"{"protocl": {}}"#).is_err());
        assert!(RunConfigFile::from_json(r#"{"protocol": {"q": 1}}"#).is_err());
        assert!(RunConfigFile::from_json(r#"{"protocol": {"p": 1.5}}"#).is_err());
        assert!(RunConfigFile::from_json(r#"{"sweep": {"p_grid": [-0.1]}}"#).is_err());
        assert!(RunConfigFile::from_json(r#"{"device": {"readout_q1": {"f_g": 0.3, "f_e": 0.9}}}"#).is_err());
        assert!(RunConfigFile::from_json(r#"{"output": {"precision": 0}}"#).is_err());
        assert!(matches!(
            RunConfigFile::from_json("not json"),
            Err(QedError::Config(_))
        ));
    }

    #[test]
    fn roundtrip() {
        let cfg = RunConfigFile::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfigFile::from_json(&text).unwrap(), cfg);
    }
}
