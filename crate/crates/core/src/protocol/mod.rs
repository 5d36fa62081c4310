//! The error-detection sequence and its device/protocol parameters.
//!
//! Step 1 weakly measures Q1 through a Q1-B-Q2 swap and keeps the Q2 null
//! outcome, step 2 parks the state in the memory resonator M1 for `tau2`,
//! step 3 applies `pi_x` and the un-collapsing Q1-B-Q3 swap keeping the Q3
//! null outcome. The closing `pi_x` is not applied, so the ideal operation is
//! `pi_x` itself.

mod analytic;
mod statevector;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::SwapPhases;
use crate::error::{QedError, Result};
use crate::hilbert::{BranchEvent, QubitDensityMatrix, C64};
use crate::tomography::ReadoutModel;

pub use analytic::{analytic_map, free_decay_map, run_analytic};
pub use statevector::{free_decay_statevector, run_statevector, simulate_ensemble};

pub const DEFAULT_KAPPA_STEP: f64 = 0.985;
pub const DEFAULT_KAPPA_PHI: f64 = 0.95;
pub const DEFAULT_MEMORY_T1_US: f64 = 2.5;

const PU_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementParams {
    pub freq_ghz: f64,
    pub t1_us: f64,
    pub t2_us: f64,
    /// Spin-echo time; not measured for the resonators.
    pub tse_us: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Couplings {
    pub q1_b_mhz: f64,
    pub q2_b_mhz: f64,
    pub q3_b_mhz: f64,
    pub q1_m1_mhz: f64,
}

/// Device characteristics; defaults are the measured operating values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceParams {
    pub q1: ElementParams,
    pub q2: ElementParams,
    pub q3: ElementParams,
    pub b: ElementParams,
    pub m1: ElementParams,
    pub couplings: Couplings,
    /// Frequency difference between M1 and Q1 at its idle point.
    pub idle_detuning_mhz: f64,
    pub readout_q1: ReadoutModel,
    pub readout_q2: ReadoutModel,
    pub readout_q3: ReadoutModel,
}

impl Default for DeviceParams {
    fn default() -> Self {
        let qubit = |freq_ghz, t1_us, t2_us, tse_us| ElementParams {
            freq_ghz,
            t1_us,
            t2_us,
            tse_us: Some(tse_us),
        };
        let resonator = |freq_ghz, t1_us| ElementParams {
            freq_ghz,
            t1_us,
            t2_us: 5.0,
            tse_us: None,
        };
        Self {
            q1: qubit(6.01, 0.580, 0.140, 0.500),
            q2: qubit(5.90, 0.614, 0.100, 0.510),
            q3: qubit(5.81, 0.580, 0.150, 0.430),
            b: resonator(6.24, 3.0),
            m1: resonator(7.55, DEFAULT_MEMORY_T1_US),
            couplings: Couplings {
                q1_b_mhz: 34.7,
                q2_b_mhz: 34.1,
                q3_b_mhz: 33.3,
                q1_m1_mhz: 56.8,
            },
            idle_detuning_mhz: 0.0,
            readout_q1: ReadoutModel::new(0.95, 0.89).expect("valid"),
            readout_q2: ReadoutModel::new(0.94, 0.88).expect("valid"),
            readout_q3: ReadoutModel::new(0.94, 0.91).expect("valid"),
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        for (name, e) in [
            ("Q1", &self.q1),
            ("Q2", &self.q2),
            ("Q3", &self.q3),
            ("B", &self.b),
            ("M1", &self.m1),
        ] {
            let times = [Some(e.t1_us), Some(e.t2_us), e.tse_us];
            if times.iter().flatten().any(|t| !(*t > 0.0)) || !(e.freq_ghz > 0.0) {
                return Err(QedError::Config(format!(
                    "device element {name} needs positive times and frequency"
                )));
            }
        }
        let c = &self.couplings;
        if [c.q1_b_mhz, c.q2_b_mhz, c.q3_b_mhz, c.q1_m1_mhz]
            .iter()
            .any(|f| !(*f > 0.0))
        {
            return Err(QedError::Config("coupling strengths must be positive".into()));
        }
        if !self.idle_detuning_mhz.is_finite() {
            return Err(QedError::Config("idle detuning must be finite".into()));
        }
        for r in [self.readout_q1, self.readout_q2, self.readout_q3] {
            r.validate()?;
        }
        Ok(())
    }
}

/// Un-collapsing strength: tuned from the decay factors or fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Uncollapse {
    Auto,
    Fixed(f64),
}

impl Serialize for Uncollapse {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Uncollapse::Auto => s.serialize_str("auto"),
            Uncollapse::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Uncollapse {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Uncollapse::Fixed(v)),
            Raw::Text(t) if t.eq_ignore_ascii_case("auto") => Ok(Uncollapse::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "p_u must be a number or \"auto\", got {t:?}"
            ))),
        }
    }
}

/// Energy-relaxation survival factors for steps 1-3 and aggregate pure dephasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Kappas {
    pub k1: f64,
    /// `None` derives `exp(-tau2 / T1)` from the memory lifetime.
    pub k2: Option<f64>,
    pub k3: f64,
    pub kphi: f64,
}

impl Default for Kappas {
    fn default() -> Self {
        Self {
            k1: DEFAULT_KAPPA_STEP,
            k2: None,
            k3: DEFAULT_KAPPA_STEP,
            kphi: DEFAULT_KAPPA_PHI,
        }
    }
}

impl Kappas {
    pub fn lossless() -> Self {
        Self {
            k1: 1.0,
            k2: None,
            k3: 1.0,
            kphi: 1.0,
        }
    }

    /// `k1 = exp(-tau1 / T1)` and `k3 = exp(-tau3 / T1)` from effective step
    /// exposures (ns) and the target qubit lifetime (us).
    pub fn from_step_exposure(tau1_ns: f64, tau3_ns: f64, qubit_t1_us: f64, kphi: f64) -> Result<Self> {
        use crate::dynamics::DampingFactor;
        Ok(Self {
            k1: DampingFactor::from_lifetime(tau1_ns * 1e-3, qubit_t1_us)?.value(),
            k2: None,
            k3: DampingFactor::from_lifetime(tau3_ns * 1e-3, qubit_t1_us)?.value(),
            kphi,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolPhases {
    /// Q1-B partial swap and B-Q2 iSWAP of step 1.
    pub first: SwapPhases,
    /// Q1-M1 swap-in (`entry`, `aux`) and swap-back (`completion`) of step 2.
    pub storage: SwapPhases,
    /// Q1-B partial swap and B-Q3 iSWAP of step 3.
    pub second: SwapPhases,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub alpha: C64,
    pub beta: C64,
    pub p: f64,
    pub p_u: Uncollapse,
    pub tau2_us: f64,
    pub storage_enabled: bool,
    pub kappas: Kappas,
    pub phases: ProtocolPhases,
    pub idle_detuning_mhz: f64,
    pub memory_t1_us: f64,
    /// Effective exposure before the first partial swap; bookkeeping only.
    pub tau1_ns: f64,
    /// Effective exposure between `pi_x` and the second partial swap; bookkeeping only.
    pub tau3_ns: f64,
    pub resonator_truncation: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            alpha: C64::new(1.0, 0.0),
            beta: C64::new(0.0, 0.0),
            p: 0.75,
            p_u: Uncollapse::Auto,
            tau2_us: 3.0,
            storage_enabled: true,
            kappas: Kappas::default(),
            phases: ProtocolPhases::default(),
            idle_detuning_mhz: 0.0,
            memory_t1_us: DEFAULT_MEMORY_T1_US,
            tau1_ns: 10.0,
            tau3_ns: 10.0,
            resonator_truncation: 2,
        }
    }
}

impl ProtocolConfig {
    /// The sequence without the storage step and with `p_u = p`.
    pub fn without_storage(p: f64) -> Self {
        Self {
            p,
            p_u: Uncollapse::Fixed(p),
            tau2_us: 0.0,
            storage_enabled: false,
            ..Self::default()
        }
    }

    pub fn with_device(mut self, device: &DeviceParams) -> Self {
        self.memory_t1_us = device.m1.t1_us;
        self.idle_detuning_mhz = device.idle_detuning_mhz;
        self
    }

    pub fn with_input(&self, alpha: C64, beta: C64) -> Self {
        Self {
            alpha,
            beta,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let norm = self.alpha.norm_sqr() + self.beta.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(QedError::InvalidParameter {
                name: "initial state",
                reason: format!("|alpha|^2 + |beta|^2 = {norm}"),
            });
        }
        self.validate_channel()
    }

    /// Checks everything except the initial state.
    pub fn validate_channel(&self) -> Result<()> {
        QedError::check_unit("p", self.p)?;
        if let Uncollapse::Fixed(pu) = self.p_u {
            QedError::check_unit("p_u", pu)?;
        }
        QedError::check_unit("kappa1", self.kappas.k1)?;
        QedError::check_unit("kappa3", self.kappas.k3)?;
        QedError::check_unit("kappa_phi", self.kappas.kphi)?;
        if let Some(k2) = self.kappas.k2 {
            QedError::check_unit("kappa2", k2)?;
        }
        if !(self.tau2_us >= 0.0) {
            return Err(QedError::InvalidParameter {
                name: "tau2",
                reason: format!("{} us is negative", self.tau2_us),
            });
        }
        if !(self.memory_t1_us > 0.0) {
            return Err(QedError::InvalidParameter {
                name: "memory T1",
                reason: "must be positive".into(),
            });
        }
        for ph in [self.phases.first, self.phases.storage, self.phases.second] {
            ph.validate()?;
        }
        if !self.idle_detuning_mhz.is_finite() {
            return Err(QedError::InvalidParameter {
                name: "idle detuning",
                reason: "must be finite".into(),
            });
        }
        if self.resonator_truncation < 2 {
            return Err(QedError::InvalidParameter {
                name: "resonator truncation",
                reason: "needs at least two levels".into(),
            });
        }
        Ok(())
    }

    /// Storage survival factor; 1 when the storage step is skipped.
    pub fn kappa2(&self) -> f64 {
        if !self.storage_enabled {
            return 1.0;
        }
        self.kappas
            .k2
            .unwrap_or_else(|| (-self.tau2_us / self.memory_t1_us).exp())
    }

    pub fn resolved_pu(&self) -> Result<f64> {
        match self.p_u {
            Uncollapse::Fixed(pu) => QedError::check_unit("p_u", pu),
            Uncollapse::Auto => compute_pu(self.p, self.kappas.k1, self.kappa2(), self.kappas.k3),
        }
    }

    /// Phase of the storage step (zero without storage).
    pub fn storage_phase(&self) -> f64 {
        if !self.storage_enabled {
            return 0.0;
        }
        let s = self.phases.storage;
        s.entry + s.aux + s.completion + 2.0 * PI * self.idle_detuning_mhz * self.tau2_us
    }
}

/// `p_u = 1 - (1 - p) k1 k2 / k3`.
pub fn compute_pu(p: f64, k1: f64, k2: f64, k3: f64) -> Result<f64> {
    for (name, v) in [("p", p), ("kappa1", k1), ("kappa2", k2), ("kappa3", k3)] {
        QedError::check_unit(name, v)?;
    }
    if k3 == 0.0 {
        return Err(QedError::InvalidParameter {
            name: "kappa3",
            reason: "must be positive to tune p_u".into(),
        });
    }
    let pu = 1.0 - (1.0 - p) * k1 * k2 / k3;
    if pu < -PU_TOL || !pu.is_finite() {
        return Err(QedError::InfeasibleUncollapse(pu));
    }
    Ok(pu.max(0.0))
}

/// Relative phase `theta_p + theta_s - theta_u` picked up by the output coherence.
pub fn net_dynamic_phase(config: &ProtocolConfig) -> f64 {
    config.phases.first.entry + config.storage_phase() - config.phases.second.entry
}

/// No-jump and jump double-null probabilities of the lossless-gate model with
/// storage decay `exp(-gamma_tau)`: `(|a|^2 (1-p_u) + |b|^2 (1-p) e^-gt,
/// |b|^2 (1-p)(1-p_u)(1 - e^-gt))`.
pub fn closed_form_probabilities(alpha: C64, beta: C64, p: f64, p_u: f64, gamma_tau: f64) -> (f64, f64) {
    let survive = (-gamma_tau).exp();
    let (a2, b2) = (alpha.norm_sqr(), beta.norm_sqr());
    let no_jump = a2 * (1.0 - p_u) + b2 * (1.0 - p) * survive;
    let jump = b2 * (1.0 - p) * (1.0 - p_u) * (1.0 - survive);
    (no_jump, jump)
}

/// The same probabilities when `p_u` is tuned to `1 - (1-p) e^-gt`.
pub fn tuned_probabilities(beta: C64, p: f64, gamma_tau: f64) -> (f64, f64) {
    let survive = (-gamma_tau).exp();
    (
        (1.0 - p) * survive,
        beta.norm_sqr() * (1.0 - p).powi(2) * survive * (1.0 - survive),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Analytic,
    Statevector,
}

impl FromStr for Backend {
    type Err = QedError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "analytic" => Ok(Backend::Analytic),
            "statevector" => Ok(Backend::Statevector),
            other => Err(QedError::Config(format!("unknown backend {other:?}"))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Analytic => "analytic",
            Backend::Statevector => "statevector",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchWeight {
    pub events: Vec<BranchEvent>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Components {
    /// Weights of the no-jump state and of the incoherent `|g>` and `|e>` outcomes.
    Analytic {
        no_jump: f64,
        final_g: f64,
        final_e: f64,
    },
    /// Weights of every selected branch.
    Branches(Vec<BranchWeight>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    /// Unnormalized final state of Q1; its trace is the selection probability.
    pub rho: QubitDensityMatrix,
    pub p_dn: f64,
    pub p_u: f64,
    pub components: Components,
    /// Phase acquired by `rho_ge` relative to the ideal operation.
    pub net_phase: f64,
}

impl ProtocolResult {
    pub fn normalized(&self) -> Result<QubitDensityMatrix> {
        self.rho.normalized()
    }

    pub fn no_jump_probability(&self) -> f64 {
        match &self.components {
            Components::Analytic { no_jump, .. } => *no_jump,
            Components::Branches(b) => b
                .iter()
                .filter(|w| !w.events.iter().any(|e| matches!(e, BranchEvent::Jump { .. })))
                .map(|w| w.weight)
                .sum(),
        }
    }

    pub fn jump_probability(&self) -> f64 {
        match &self.components {
            Components::Analytic { final_g, final_e, .. } => final_g + final_e,
            Components::Branches(_) => self.p_dn - self.no_jump_probability(),
        }
    }
}

pub fn run(config: &ProtocolConfig, backend: Backend) -> Result<ProtocolResult> {
    match backend {
        Backend::Analytic => run_analytic(config),
        Backend::Statevector => run_statevector(config),
    }
}

/// Storage without weak measurements or post-selection, sharing the step
/// relaxation, storage decay and dephasing of `config`. The ideal operation
/// is the identity.
pub fn free_decay_baseline(config: &ProtocolConfig, backend: Backend) -> Result<ProtocolResult> {
    match backend {
        Backend::Analytic => {
            config.validate()?;
            let rho = QubitDensityMatrix::pure(config.alpha, config.beta);
            let m = free_decay_map(config, rho.matrix());
            let rho = QubitDensityMatrix::new(m)?;
            Ok(ProtocolResult {
                p_dn: rho.trace(),
                rho,
                p_u: 0.0,
                components: Components::Analytic {
                    no_jump: 1.0,
                    final_g: 0.0,
                    final_e: 0.0,
                },
                net_phase: -config.storage_phase(),
            })
        }
        Backend::Statevector => free_decay_statevector(config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compute_pu_examples() {
        assert!((compute_pu(0.75, 1.0, 1.0, 1.0).unwrap() - 0.75).abs() < 1e-15);
        assert!((compute_pu(0.75, 1.0, 0.3, 1.0).unwrap() - 0.925).abs() < 1e-15);
        let k2 = (-0.9f64 / 2.5).exp();
        let pu = compute_pu(0.0, 0.985, k2, 0.985).unwrap();
        assert!((pu - (1.0 - (-0.36f64).exp())).abs() < 1e-15);
        assert!((pu - 0.3023).abs() < 1e-4);
    }

    #[test]
    fn compute_pu_infeasible() {
        assert!(matches!(
            compute_pu(0.0, 1.0, 1.0, 0.9),
            Err(QedError::InfeasibleUncollapse(_))
        ));
        assert!(compute_pu(0.5, 1.0, 1.0, 0.0).is_err());
        assert!(compute_pu(1.5, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let h = C64::new(0.5f64.sqrt(), 0.0);
        let (nj, j) = closed_form_probabilities(h, h, 0.75, 0.75, 0.0);
        assert!((nj - 0.25).abs() < 1e-15 && j.abs() < 1e-15);
        let gt = -(0.3f64.ln());
        let (nj, j) = closed_form_probabilities(h, h, 0.75, 0.925, gt);
        assert!((nj - 0.075).abs() < 1e-15);
        assert!((j - 0.0065625).abs() < 1e-15);
        let (_, j) = closed_form_probabilities(C64::new(1.0, 0.0), C64::new(0.0, 0.0), 0.3, 0.6, 2.0);
        assert_eq!(j, 0.0);
        // tuned p_u reproduces the short forms
        let pu = 1.0 - 0.25 * 0.3;
        let general = closed_form_probabilities(h, h, 0.75, pu, gt);
        let tuned = tuned_probabilities(h, 0.75, gt);
        assert!((general.0 - tuned.0).abs() < 1e-15 && (general.1 - tuned.1).abs() < 1e-15);
    }

    #[test]
    fn net_phase_examples() {
        let mut cfg = ProtocolConfig::default();
        assert_eq!(net_dynamic_phase(&cfg), 0.0);
        cfg.idle_detuning_mhz = 1.0;
        cfg.tau2_us = 3.0;
        let phase = net_dynamic_phase(&cfg);
        assert!((phase - 6.0 * PI).abs() < 1e-12);
        assert!(phase.rem_euclid(2.0 * PI).min(2.0 * PI - phase.rem_euclid(2.0 * PI)) < 1e-9);

        let mut cfg = ProtocolConfig::without_storage(0.6);
        cfg.phases.first.entry = 0.37;
        cfg.phases.second = cfg.phases.first;
        cfg.phases.storage.entry = 5.0;
        assert_eq!(net_dynamic_phase(&cfg), 0.0);
    }

    #[test]
    fn kappa2_follows_storage_flag() {
        let cfg = ProtocolConfig::default();
        assert!((cfg.kappa2() - (-1.2f64).exp()).abs() < 1e-15);
        assert_eq!(ProtocolConfig::without_storage(0.5).kappa2(), 1.0);
        let k = Kappas::from_step_exposure(10.0, 10.0, 0.6, 0.95).unwrap();
        assert!((k.k1 - 0.98347).abs() < 1e-5);
    }

    #[test]
    fn config_validation() {
        let cfg = ProtocolConfig {
            alpha: C64::new(0.9, 0.0),
            ..ProtocolConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ProtocolConfig {
            p_u: Uncollapse::Fixed(1.2),
            ..ProtocolConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(DeviceParams::default().validate().is_ok());
    }

    #[test]
    fn uncollapse_serde() {
        let auto: Uncollapse = serde_json::from_str("\"auto\"").unwrap();
        assert_eq!(auto, Uncollapse::Auto);
        let fixed: Uncollapse = serde_json::from_str("0.8").unwrap();
        assert_eq!(fixed, Uncollapse::Fixed(0.8));
        assert!(serde_json::from_str::<Uncollapse>("\"sometimes\"").is_err());
        assert_eq!(serde_json::to_string(&Uncollapse::Auto).unwrap(), "\"auto\"");
    }
}
