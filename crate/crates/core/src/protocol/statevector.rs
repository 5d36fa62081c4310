use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};

use super::{net_dynamic_phase, BranchWeight, Components, ProtocolConfig, ProtocolResult};
use crate::dynamics::{
    amplitude_damping_branches, iswap, partial_swap, project_ground, pure_dephasing, rotation,
    Axis, DampingFactor, SwapPhases,
};
use crate::error::{QedError, Result};
use crate::hilbert::{
    reduce_to_qubit, BranchEnsemble, CompositeState, Operator, QubitDensityMatrix, Subsystem,
    SubsystemLayout, C64,
};

use Subsystem::{B, M1, Q1, Q2, Q3};

fn initial(config: &ProtocolConfig) -> Result<(SubsystemLayout, BranchEnsemble)> {
    let layout = SubsystemLayout::with_resonator_truncation(config.resonator_truncation)?;
    let state = CompositeState::qubit_superposition(layout.clone(), Q1, config.alpha, config.beta)?;
    Ok((layout, BranchEnsemble::from_state(state)))
}

fn damp(ens: BranchEnsemble, target: Subsystem, kappa: f64, step: u8) -> Result<BranchEnsemble> {
    amplitude_damping_branches(&ens, target, DampingFactor::new(kappa)?, step)
}

/// Number-dependent phase `e^{i n phi}` on a resonator.
fn resonator_phase(layout: &SubsystemLayout, resonator: Subsystem, phi: f64) -> Result<Operator> {
    let d = layout.dim_of(resonator)?;
    let diag = (0..d).map(|n| C64::from_polar(1.0, n as f64 * phi));
    Operator::new(
        vec![resonator],
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d, diag)),
    )
}

/// Swap Q1 into M1, idle for `tau2` with decay, swap back.
fn storage(
    layout: &SubsystemLayout,
    ens: BranchEnsemble,
    config: &ProtocolConfig,
) -> Result<BranchEnsemble> {
    if !config.storage_enabled {
        return Ok(ens);
    }
    let ph = config.phases.storage;
    let swap_in = SwapPhases {
        completion: 0.0,
        ..ph
    };
    let ens = ens.apply(&partial_swap(layout, Q1, M1, 1.0, swap_in)?)?;
    let idle = 2.0 * PI * config.idle_detuning_mhz * config.tau2_us;
    let ens = ens.apply(&resonator_phase(layout, M1, idle)?)?;
    let ens = damp(ens, M1, config.kappa2(), 2)?;
    // the extra pi cancels the (-i)^2 of the two exchanges
    ens.apply(&iswap(layout, M1, Q1, ph.completion + PI)?)
}

/// Full branch ensemble after the sequence, rejected branches included.
/// Returns the ensemble and the `p_u` used.
pub fn simulate_ensemble(config: &ProtocolConfig) -> Result<(BranchEnsemble, f64)> {
    config.validate()?;
    let pu = config.resolved_pu()?;
    let k = config.kappas;
    let (layout, ens) = initial(config)?;
    let (first, second) = (config.phases.first, config.phases.second);

    let ens = damp(ens, Q1, k.k1, 1)?;
    let ens = ens.apply(&partial_swap(&layout, Q1, B, config.p, first)?)?;
    let ens = ens.apply(&iswap(&layout, B, Q2, first.completion)?)?;
    let ens = project_ground(&ens, Q2)?;

    let ens = storage(&layout, ens, config)?;

    let ens = ens.apply(&rotation(Q1, Axis::X, PI)?)?;
    let ens = damp(ens, Q1, k.k3, 3)?;
    let ens = ens.apply(&partial_swap(&layout, Q1, B, pu, second)?)?;
    let ens = ens.apply(&iswap(&layout, B, Q3, second.completion)?)?;
    let ens = project_ground(&ens, Q3)?;
    Ok((ens, pu))
}

fn reduce_or_zero(ens: &BranchEnsemble) -> Result<QubitDensityMatrix> {
    match reduce_to_qubit(ens, Q1) {
        Err(QedError::EmptySelection) => Ok(QubitDensityMatrix::from_matrix_unchecked(Matrix2::zeros())),
        other => other,
    }
}

fn selected_weights(ens: &BranchEnsemble) -> Components {
    Components::Branches(
        ens.selected()
            .map(|b| BranchWeight {
                events: b.events.clone(),
                weight: b.weight(),
            })
            .collect(),
    )
}

pub fn run_statevector(config: &ProtocolConfig) -> Result<ProtocolResult> {
    let (ens, pu) = simulate_ensemble(config)?;
    let rho = pure_dephasing(&reduce_or_zero(&ens)?, config.kappas.kphi)?;
    Ok(ProtocolResult {
        p_dn: ens.selected_weight(),
        rho,
        p_u: pu,
        components: selected_weights(&ens),
        net_phase: net_dynamic_phase(config),
    })
}

pub fn free_decay_statevector(config: &ProtocolConfig) -> Result<ProtocolResult> {
    config.validate()?;
    let k = config.kappas;
    let (layout, ens) = initial(config)?;
    let ens = damp(ens, Q1, k.k1, 1)?;
    let ens = storage(&layout, ens, config)?;
    let ens = damp(ens, Q1, k.k3, 3)?;
    let rho = pure_dephasing(&reduce_or_zero(&ens)?, k.kphi)?;
    Ok(ProtocolResult {
        p_dn: ens.selected_weight(),
        rho,
        p_u: 0.0,
        components: selected_weights(&ens),
        net_phase: -config.storage_phase(),
    })
}
