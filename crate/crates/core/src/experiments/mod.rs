//! Sweep drivers for the fidelity, selection-probability and density-matrix
//! figures, with optional finite-shot emulation.

mod monte_carlo;
mod output;

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{pauli, Axis};
use crate::error::{QedError, Result};
use crate::hilbert::{QubitDensityMatrix, C64};
use crate::protocol::{
    free_decay_baseline, net_dynamic_phase, run, Backend, DeviceParams, ProtocolConfig, Uncollapse,
};
use crate::tomography::{
    fit_compensation_phase, input_amplitudes, input_states, reconstruct_chi, FidelityReport,
    JointReadout, PhaseCompensation, ProcessMatrix,
};

pub use monte_carlo::{
    corrected_outputs, monte_carlo_estimate, outcome_distributions, sample_counts, McEstimate,
    OutcomeDistributions,
};
pub use output::{
    config_hash, format_g, format_g12, timestamp, write_csv, write_csv_with_precision, Manifest,
    CSV_HEADER, DEFAULT_PRECISION,
};

pub const DEFAULT_TAU2_US: [f64; 3] = [0.9, 1.7, 3.0];
pub const DEFAULT_SHOTS: u64 = 3000;

/// `0, 0.125, ..., 0.875`.
pub fn default_p_grid() -> Vec<f64> {
    (0..8).map(|i| i as f64 * 0.125).collect()
}

pub const INPUT_LABELS: [&str; 4] = ["g", "g-ie", "g+e", "e"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Metric {
    /// Process fidelity.
    #[default]
    #[serde(rename = "F")]
    F,
    /// Scaled uniform average state fidelity.
    #[serde(rename = "fav")]
    Fav,
    /// Scaled selection-weighted average state fidelity.
    #[serde(rename = "favp")]
    Favp,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::F => "F",
            Metric::Fav => "F_av_sc",
            Metric::Favp => "F_av_prime_sc",
        }
    }

    pub fn of(self, report: &FidelityReport) -> f64 {
        match self {
            Metric::F => report.f,
            Metric::Fav => report.f_av_sc,
            Metric::Favp => report.f_av_prime_sc,
        }
    }
}

impl FromStr for Metric {
    type Err = QedError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F" | "f" => Ok(Metric::F),
            "fav" | "Fav" | "F_av" => Ok(Metric::Fav),
            "favp" | "Favp" | "F_av_prime" => Ok(Metric::Favp),
            other => Err(QedError::Config(format!("unknown metric {other:?}"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::F => "F",
            Metric::Fav => "fav",
            Metric::Favp => "favp",
        })
    }
}

/// How the dynamic phase is removed before fidelities are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    None,
    /// Use the phase predicted by the configured swap phases.
    #[default]
    Model,
    /// Choose the phase maximizing `F`.
    Fit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub p_grid: Vec<f64>,
    pub tau2_us: Vec<f64>,
    pub backend: Backend,
    pub metric: Metric,
    /// Decay factors, phases and memory lifetime shared by every grid point.
    pub base: ProtocolConfig,
    /// Shots per input state and tomography setting; 0 is exact.
    pub shots: u64,
    pub seed: u64,
    pub readout: JointReadout,
    pub phase_mode: PhaseMode,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self::from_device(&DeviceParams::default())
    }
}

impl SweepSpec {
    pub fn from_device(device: &DeviceParams) -> Self {
        Self {
            p_grid: default_p_grid(),
            tau2_us: DEFAULT_TAU2_US.to_vec(),
            backend: Backend::Analytic,
            metric: Metric::F,
            base: ProtocolConfig::default().with_device(device),
            shots: 0,
            seed: 0,
            readout: JointReadout {
                models: [device.readout_q1, device.readout_q2, device.readout_q3],
            },
            phase_mode: PhaseMode::Model,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for &p in &self.p_grid {
            QedError::check_unit("grid p", p)?;
        }
        for &t in &self.tau2_us {
            if !(t >= 0.0) {
                return Err(QedError::InvalidParameter {
                    name: "tau2",
                    reason: format!("{t} us is negative"),
                });
            }
        }
        for m in self.readout.models {
            m.validate()?;
        }
        self.base.validate_channel()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    InfeasibleUncollapse,
    NoSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Absent for free-decay baseline rows.
    pub p: Option<f64>,
    pub p_u: Option<f64>,
    pub tau2_us: f64,
    pub metric: String,
    pub value: Option<f64>,
    pub p_dn: Option<f64>,
    pub stderr: Option<f64>,
    pub status: RowStatus,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }
}

/// What a row reports, computed from the four unnormalized tomography outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    Metric(Metric),
    /// Uniform-input average selection probability, `Tr(chi)`.
    SelectionAverage,
    /// Selection probability of one tomography input.
    SelectionOf(usize),
}

/// Ideal operation and phase handling for a reconstructed process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub ideal: Matrix2<C64>,
    pub net_phase: f64,
    pub phase_mode: PhaseMode,
}

impl Target {
    pub fn qed(config: &ProtocolConfig, phase_mode: PhaseMode) -> Self {
        Self {
            ideal: pauli(Some(Axis::X)),
            net_phase: net_dynamic_phase(config),
            phase_mode,
        }
    }

    pub fn free_decay(config: &ProtocolConfig, phase_mode: PhaseMode) -> Self {
        Self {
            ideal: Matrix2::identity(),
            net_phase: -config.storage_phase(),
            phase_mode,
        }
    }

    pub fn process(&self, outputs: &[QubitDensityMatrix; 4]) -> Result<ProcessMatrix> {
        let chi = reconstruct_chi(&input_states(), outputs, false)?;
        Ok(match self.phase_mode {
            PhaseMode::None => chi,
            PhaseMode::Model => chi.compensate_phase(self.net_phase),
            PhaseMode::Fit => {
                let (phi, _) = fit_compensation_phase(&chi, &ProcessMatrix::from_unitary(&self.ideal))?;
                chi.compensate_phase(phi)
            }
        })
    }

    pub fn report(&self, outputs: &[QubitDensityMatrix; 4]) -> Result<FidelityReport> {
        FidelityReport::new(&self.process(outputs)?, &self.ideal)
    }

    pub fn evaluate(&self, quantity: Quantity, outputs: &[QubitDensityMatrix; 4]) -> Result<f64> {
        match quantity {
            Quantity::Metric(m) => Ok(m.of(&self.report(outputs)?)),
            Quantity::SelectionAverage => Ok(reconstruct_chi(&input_states(), outputs, false)?.trace()),
            Quantity::SelectionOf(i) => Ok(outputs[i].trace()),
        }
    }
}

/// Unnormalized outputs of the protocol for the four tomography inputs.
pub fn qed_outputs(config: &ProtocolConfig, backend: Backend) -> Result<[QubitDensityMatrix; 4]> {
    outputs_with(|a, b| Ok(run(&config.with_input(a, b), backend)?.rho))
}

pub fn free_decay_outputs(config: &ProtocolConfig, backend: Backend) -> Result<[QubitDensityMatrix; 4]> {
    outputs_with(|a, b| Ok(free_decay_baseline(&config.with_input(a, b), backend)?.rho))
}

fn outputs_with<F>(f: F) -> Result<[QubitDensityMatrix; 4]>
where
    F: Fn(C64, C64) -> Result<QubitDensityMatrix>,
{
    let [i0, i1, i2, i3] = input_amplitudes();
    Ok([f(i0.0, i0.1)?, f(i1.0, i1.1)?, f(i2.0, i2.1)?, f(i3.0, i3.1)?])
}

/// Phase-compensated process matrix and fidelities of the QED sequence.
pub fn qed_process(
    config: &ProtocolConfig,
    backend: Backend,
    phase_mode: PhaseMode,
) -> Result<(ProcessMatrix, FidelityReport)> {
    let target = Target::qed(config, phase_mode);
    let outputs = qed_outputs(config, backend)?;
    let chi = target.process(&outputs)?;
    Ok((chi, FidelityReport::new(&chi, &target.ideal)?))
}

pub fn free_decay_process(
    config: &ProtocolConfig,
    backend: Backend,
    phase_mode: PhaseMode,
) -> Result<(ProcessMatrix, FidelityReport)> {
    let target = Target::free_decay(config, phase_mode);
    let outputs = free_decay_outputs(config, backend)?;
    let chi = target.process(&outputs)?;
    Ok((chi, FidelityReport::new(&chi, &target.ideal)?))
}

fn is_no_selection(e: &QedError) -> bool {
    matches!(
        e,
        QedError::ZeroTrace | QedError::EmptySelection | QedError::InvalidParameter { name: "selection probability", .. }
    )
}

struct RowBuilder<'a> {
    spec: &'a SweepSpec,
    rows: Vec<SweepRow>,
}

impl<'a> RowBuilder<'a> {
    fn new(spec: &'a SweepSpec) -> Self {
        Self {
            spec,
            rows: Vec::new(),
        }
    }

    /// One protocol row; exact or sampled depending on `spec.shots`.
    fn protocol(&mut self, config: &ProtocolConfig, quantity: Quantity, label: String) -> Result<()> {
        let spec = self.spec;
        let index = self.rows.len() as u64;
        let mut row = SweepRow {
            p: Some(config.p),
            p_u: None,
            tau2_us: config.tau2_us,
            metric: label,
            value: None,
            p_dn: None,
            stderr: None,
            status: RowStatus::Ok,
        };
        match config.resolved_pu() {
            Ok(pu) => row.p_u = Some(pu),
            Err(QedError::InfeasibleUncollapse(pu)) => {
                row.p_u = Some(pu);
                row.status = RowStatus::InfeasibleUncollapse;
                self.rows.push(row);
                return Ok(());
            }
            Err(e) => return Err(e),
        }
        let target = Target::qed(config, spec.phase_mode);
        let result = if spec.shots == 0 {
            qed_outputs(config, spec.backend).and_then(|out| {
                let value = target.evaluate(quantity, &out)?;
                let p_dn = target.evaluate(Quantity::SelectionAverage, &out)?;
                Ok((value, p_dn, None))
            })
        } else {
            let dists = outcome_distributions(config, spec.backend)?;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(index);
            monte_carlo_estimate(&dists, &spec.readout, spec.shots, &mut rng, |out| {
                target.evaluate(quantity, out)
            })
            .map(|est| (est.value, est.p_dn, Some(est.stderr)))
        };
        match result {
            Ok((value, p_dn, stderr)) => {
                row.value = Some(value);
                row.p_dn = Some(p_dn);
                row.stderr = stderr;
            }
            Err(e) if is_no_selection(&e) => row.status = RowStatus::NoSelection,
            Err(e) => return Err(e),
        }
        self.rows.push(row);
        Ok(())
    }

    /// Exact free-decay baseline row for one storage time.
    fn free_decay(&mut self, config: &ProtocolConfig, metric: Metric) -> Result<()> {
        let (_, report) = free_decay_process(config, self.spec.backend, self.spec.phase_mode)?;
        self.rows.push(SweepRow {
            p: None,
            p_u: None,
            tau2_us: config.tau2_us,
            metric: format!("{}_free_decay", metric.label()),
            value: Some(metric.of(&report)),
            p_dn: Some(report.trace),
            stderr: None,
            status: RowStatus::Ok,
        });
        Ok(())
    }
}

fn storage_config(spec: &SweepSpec, p: f64, tau2_us: f64) -> ProtocolConfig {
    ProtocolConfig {
        p,
        p_u: Uncollapse::Auto,
        tau2_us,
        storage_enabled: true,
        ..spec.base.clone()
    }
}

/// Process fidelity without the storage step, `p_u = p`.
pub fn fig2b_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut b = RowBuilder::new(spec);
    for &p in &spec.p_grid {
        let cfg = ProtocolConfig {
            p,
            p_u: Uncollapse::Fixed(p),
            tau2_us: 0.0,
            storage_enabled: false,
            ..spec.base.clone()
        };
        b.protocol(&cfg, Quantity::Metric(spec.metric), spec.metric.label().into())?;
    }
    Ok(b.rows)
}

/// Metric vs `p` for each storage time with tuned `p_u`, followed by the
/// free-decay baseline for that storage time.
pub fn fig3a_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut b = RowBuilder::new(spec);
    for &tau in &spec.tau2_us {
        for &p in &spec.p_grid {
            let cfg = storage_config(spec, p, tau);
            b.protocol(&cfg, Quantity::Metric(spec.metric), spec.metric.label().into())?;
        }
        b.free_decay(&storage_config(spec, 0.0, tau), spec.metric)?;
    }
    Ok(b.rows)
}

/// Selection probability vs `p`: uniform-input average and per tomography input.
pub fn fig4_pdn(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut b = RowBuilder::new(spec);
    for &tau in &spec.tau2_us {
        for &p in &spec.p_grid {
            let cfg = storage_config(spec, p, tau);
            b.protocol(&cfg, Quantity::SelectionAverage, "P_DN".into())?;
            for (i, label) in INPUT_LABELS.iter().enumerate() {
                b.protocol(&cfg, Quantity::SelectionOf(i), format!("P_DN[{label}]"))?;
            }
        }
    }
    Ok(b.rows)
}

/// Both scaled average-state fidelities vs `p`, with free-decay baselines.
pub fn figs1_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut b = RowBuilder::new(spec);
    for &tau in &spec.tau2_us {
        for metric in [Metric::Fav, Metric::Favp] {
            for &p in &spec.p_grid {
                let cfg = storage_config(spec, p, tau);
                b.protocol(&cfg, Quantity::Metric(metric), metric.label().into())?;
            }
            b.free_decay(&storage_config(spec, 0.0, tau), metric)?;
        }
    }
    Ok(b.rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    FreeDecay,
    Qed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityPanel {
    pub input: &'static str,
    pub pipeline: Pipeline,
    /// Normalized output state.
    pub rho: QubitDensityMatrix,
    pub p_dn: f64,
}

/// Normalized outputs for the four inputs, free decay then QED, without
/// phase compensation.
pub fn fig3b_densities(
    base: &ProtocolConfig,
    backend: Backend,
    p: f64,
    tau2_us: f64,
) -> Result<Vec<DensityPanel>> {
    let cfg = ProtocolConfig {
        p,
        p_u: Uncollapse::Auto,
        tau2_us,
        storage_enabled: true,
        ..base.clone()
    };
    let mut panels = Vec::with_capacity(8);
    for (pipeline, outputs) in [
        (Pipeline::FreeDecay, free_decay_outputs(&cfg, backend)?),
        (Pipeline::Qed, qed_outputs(&cfg, backend)?),
    ] {
        for (input, rho) in INPUT_LABELS.iter().zip(outputs) {
            panels.push(DensityPanel {
                input,
                pipeline,
                p_dn: rho.trace(),
                rho: rho.normalized()?,
            });
        }
    }
    Ok(panels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Kappas;

    fn value(rows: &[SweepRow], p: f64, tau: f64, metric: &str) -> f64 {
        rows.iter()
            .find(|r| r.metric == metric && r.p.is_some_and(|x| (x - p).abs() < 1e-12) && (r.tau2_us - tau).abs() < 1e-12)
            .and_then(|r| r.value)
            .expect("row present")
    }

    #[test]
    fn lossless_fig2b_is_perfect() {
        let mut spec = SweepSpec::default();
        spec.base.kappas = Kappas::lossless();
        for row in fig2b_sweep(&spec).unwrap() {
            assert!((row.value.unwrap() - 1.0).abs() < 1e-12, "{row:?}");
            assert!((row.p_dn.unwrap() - (1.0 - row.p.unwrap())).abs() < 1e-12);
        }
    }

    #[test]
    fn fig3a_layout_and_kappa2() {
        let spec = SweepSpec::default();
        let rows = fig3a_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 3 * (8 + 1));
        let base = rows.iter().filter(|r| r.p.is_none()).count();
        assert_eq!(base, 3);
        let cfg = storage_config(&spec, 0.75, 3.0);
        assert!((cfg.kappa2() - 0.3).abs() < 0.002);
    }

    #[test]
    fn fig4_limits() {
        let mut spec = SweepSpec::default();
        spec.base.kappas.k1 = 1.0;
        spec.base.kappas.k3 = 1.0;
        spec.p_grid = vec![0.0, 0.5, 0.9, 0.99, 1.0];
        let rows = fig4_pdn(&spec).unwrap();
        let avg: Vec<_> = rows.iter().filter(|r| r.metric == "P_DN" && r.tau2_us == 3.0).collect();
        for w in avg.windows(2) {
            assert!(w[1].value.unwrap() < w[0].value.unwrap());
        }
        assert!(avg.last().unwrap().value.unwrap().abs() < 1e-15);

        let mut spec = SweepSpec::default();
        spec.base.kappas = Kappas::lossless();
        spec.tau2_us = vec![0.0];
        let rows = fig4_pdn(&spec).unwrap();
        for r in rows.iter().filter(|r| r.metric == "P_DN") {
            assert!((r.value.unwrap() - (1.0 - r.p.unwrap())).abs() < 1e-12);
        }
    }

    #[test]
    fn figs1_identity_with_f() {
        let spec = SweepSpec::default();
        let s1 = figs1_sweep(&spec).unwrap();
        let f = fig3a_sweep(&spec).unwrap();
        for &tau in &spec.tau2_us {
            for &p in &spec.p_grid {
                let a = value(&s1, p, tau, "F_av_prime_sc");
                let b = value(&f, p, tau, "F");
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn trace_preserving_limit_averages_agree() {
        let mut spec = SweepSpec::default();
        spec.base.kappas = Kappas::lossless();
        spec.base.kappas.k2 = Some(1.0);
        spec.p_grid = vec![0.0];
        let rows = figs1_sweep(&spec).unwrap();
        for &tau in &spec.tau2_us {
            let a = value(&rows, 0.0, tau, "F_av_sc");
            let b = value(&rows, 0.0, tau, "F_av_prime_sc");
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn infeasible_rows_are_flagged() {
        let mut spec = SweepSpec::default();
        spec.base.kappas.k1 = 1.0;
        spec.base.kappas.k3 = 0.9;
        spec.base.kappas.k2 = Some(1.0);
        spec.p_grid = vec![0.0, 0.5];
        spec.tau2_us = vec![0.5];
        let rows = fig3a_sweep(&spec).unwrap();
        assert_eq!(rows[0].status, RowStatus::InfeasibleUncollapse);
        assert!(rows[0].p_u.unwrap() < 0.0 && rows[0].value.is_none());
        assert!(rows[1].is_ok());
    }

    #[test]
    fn fig3b_patterns() {
        let panels = fig3b_densities(&ProtocolConfig::default(), Backend::Analytic, 0.75, 3.0).unwrap();
        assert_eq!(panels.len(), 8);
        let free_g = &panels[0];
        assert_eq!(free_g.pipeline, Pipeline::FreeDecay);
        assert!((free_g.rho.get(0, 0).re - 1.0).abs() < 1e-15);
        let qed_g = &panels[4];
        // step-3 relaxation leaves a small |g> part
        assert!(qed_g.rho.get(1, 1).re > 0.8);
        let qed_plus = &panels[6];
        assert!((qed_plus.rho.get(0, 1).norm() - 0.4).abs() < 0.03);
    }

    #[test]
    fn metric_parsing() {
        assert_eq!("fav".parse::<Metric>().unwrap(), Metric::Fav);
        assert_eq!("F".parse::<Metric>().unwrap(), Metric::F);
        assert!("G".parse::<Metric>().is_err());
    }
}
