//! Gates and decoherence channels used by the protocol.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{QedError, Result};
use crate::hilbert::{
    Branch, BranchEnsemble, BranchEvent, CompositeState, Operator, QubitDensityMatrix, Subsystem,
    SubsystemLayout, C64, ONE, ZERO,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Dynamic phases picked up while tuning a qubit into and out of resonance.
///
/// `entry` multiplies the whole `|e>|0>` image of a partial swap, `aux` the
/// transferred `|g>|1>` term, and `completion` the image of a full iSWAP.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwapPhases {
    pub entry: f64,
    pub aux: f64,
    pub completion: f64,
}

impl SwapPhases {
    pub fn validate(&self) -> Result<()> {
        if [self.entry, self.aux, self.completion]
            .iter()
            .all(|v| v.is_finite())
        {
            Ok(())
        } else {
            Err(QedError::InvalidParameter {
                name: "phase",
                reason: "phases must be finite".into(),
            })
        }
    }
}

/// Survival factor of an excitation under energy relaxation, `kappa = exp(-t / T1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DampingFactor(f64);

impl DampingFactor {
    pub fn new(kappa: f64) -> Result<Self> {
        QedError::check_unit("kappa", kappa).map(Self)
    }

    /// `exp(-rate * duration)` with any consistent pair of units.
    pub fn from_rate(rate: f64, duration: f64) -> Result<Self> {
        if !(rate >= 0.0 && duration >= 0.0) {
            return Err(QedError::InvalidParameter {
                name: "decay",
                reason: format!("rate {rate} and duration {duration} must be non-negative"),
            });
        }
        Self::new((-rate * duration).exp())
    }

    pub fn from_lifetime(duration: f64, t1: f64) -> Result<Self> {
        if !(t1 > 0.0) {
            return Err(QedError::InvalidParameter {
                name: "T1",
                reason: format!("{t1} must be positive"),
            });
        }
        Self::from_rate(1.0 / t1, duration)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

fn qubit_matrix(entries: [C64; 4]) -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &entries)
}

fn require_qubit(layout: &SubsystemLayout, s: Subsystem) -> Result<()> {
    if layout.dim_of(s)? != 2 {
        return Err(QedError::InvalidParameter {
            name: "qubit",
            reason: format!("{s} is not a two-level subsystem"),
        });
    }
    Ok(())
}

/// `exp(-i angle sigma_axis / 2)` on `target`.
pub fn rotation(target: Subsystem, axis: Axis, angle: f64) -> Result<Operator> {
    if !angle.is_finite() {
        return Err(QedError::InvalidParameter {
            name: "angle",
            reason: "must be finite".into(),
        });
    }
    let c = C64::new((angle / 2.0).cos(), 0.0);
    let s = (angle / 2.0).sin();
    let m = match axis {
        Axis::X => qubit_matrix([c, C64::new(0.0, -s), C64::new(0.0, -s), c]),
        Axis::Y => qubit_matrix([c, C64::new(-s, 0.0), C64::new(s, 0.0), c]),
        Axis::Z => qubit_matrix([
            C64::from_polar(1.0, -angle / 2.0),
            ZERO,
            ZERO,
            C64::from_polar(1.0, angle / 2.0),
        ]),
    };
    Operator::new(vec![target], m)
}

/// Resonant qubit-resonator exchange with swap probability `p`.
///
/// On the single-excitation manifold:
/// `|e0> -> e^{i entry} (sqrt(1-p) |e0> - i e^{i aux} sqrt(p) |g1>)` and
/// `|g1> -> -i e^{-i aux} sqrt(p) |e0> + sqrt(1-p) |g1>`; every other level is left alone.
pub fn partial_swap(
    layout: &SubsystemLayout,
    qubit: Subsystem,
    resonator: Subsystem,
    p: f64,
    phases: SwapPhases,
) -> Result<Operator> {
    let p = QedError::check_unit("swap probability", p)?;
    phases.validate()?;
    require_qubit(layout, qubit)?;
    let d = layout.dim_of(resonator)?;

    let (c, s) = ((1.0 - p).sqrt(), p.sqrt());
    let (e0, g1) = (d, 1);
    let mut m = DMatrix::identity(2 * d, 2 * d);
    let entry = C64::from_polar(1.0, phases.entry);
    let minus_i = C64::new(0.0, -1.0);
    m[(e0, e0)] = entry * c;
    m[(g1, e0)] = entry * minus_i * C64::from_polar(s, phases.aux);
    m[(e0, g1)] = minus_i * C64::from_polar(s, -phases.aux);
    m[(g1, g1)] = C64::new(c, 0.0);
    Operator::new(vec![qubit, resonator], m)
}

/// Full excitation transfer `|1>|g> -> -i e^{i completion} |0>|e>` from
/// `resonator` into `qubit`, completed unitarily on `|0>|e>`.
pub fn iswap(
    layout: &SubsystemLayout,
    resonator: Subsystem,
    qubit: Subsystem,
    completion_phase: f64,
) -> Result<Operator> {
    if !completion_phase.is_finite() {
        return Err(QedError::InvalidParameter {
            name: "completion phase",
            reason: "must be finite".into(),
        });
    }
    require_qubit(layout, qubit)?;
    let d = layout.dim_of(resonator)?;
    // local index = photon * 2 + qubit level
    let (one_g, zero_e) = (2, 1);
    let mut m = DMatrix::identity(2 * d, 2 * d);
    let minus_i = C64::new(0.0, -1.0);
    m[(one_g, one_g)] = ZERO;
    m[(zero_e, zero_e)] = ZERO;
    m[(zero_e, one_g)] = minus_i * C64::from_polar(1.0, completion_phase);
    m[(one_g, zero_e)] = minus_i * C64::from_polar(1.0, -completion_phase);
    Operator::new(vec![resonator, qubit], m)
}

/// Swap probability `sin^2(pi f_c t)` after `t_ns` of resonant interaction at
/// coupling strength `coupling_mhz`.
pub fn strength_from_time(t_ns: f64, coupling_mhz: f64) -> Result<f64> {
    if !(t_ns >= 0.0) {
        return Err(QedError::InvalidParameter {
            name: "interaction time",
            reason: format!("{t_ns} ns is negative"),
        });
    }
    if !(coupling_mhz > 0.0) {
        return Err(QedError::InvalidParameter {
            name: "coupling strength",
            reason: format!("{coupling_mhz} MHz must be positive"),
        });
    }
    let cycles = coupling_mhz * 1e-3 * t_ns;
    Ok((PI * cycles).sin().powi(2))
}

const OVERFLOW_TOL: f64 = 1e-12;

fn push_event(events: &[BranchEvent], event: BranchEvent) -> Vec<BranchEvent> {
    let mut out = events.to_vec();
    out.push(event);
    out
}

/// Split every branch into a no-jump and a jump branch for energy relaxation
/// of `target` with survival factor `kappa`.
///
/// Kraus operators `K0 = |0><0| + sqrt(kappa) |1><1|` and
/// `K1 = sqrt(1 - kappa) |0><1|`. Branches of exactly zero weight are dropped.
pub fn amplitude_damping_branches(
    ensemble: &BranchEnsemble,
    target: Subsystem,
    kappa: DampingFactor,
    step: u8,
) -> Result<BranchEnsemble> {
    let kappa = kappa.value();
    let mut out = Vec::with_capacity(ensemble.branches().len() * 2);
    for branch in ensemble.branches() {
        let state = &branch.state;
        let layout = state.layout();
        let pos = layout.position(target)?;
        let n = layout.total_dim();
        let amps = state.amplitudes();

        let mut kept = DVector::from_element(n, ZERO);
        let mut jumped = DVector::from_element(n, ZERO);
        for i in 0..n {
            let mut digits = layout.digits(i);
            match digits[pos] {
                0 => kept[i] += amps[i],
                1 => {
                    kept[i] += amps[i] * kappa.sqrt();
                    digits[pos] = 0;
                    jumped[layout.index(&digits)] += amps[i] * (1.0 - kappa).sqrt();
                }
                _ if amps[i].norm() > OVERFLOW_TOL => {
                    return Err(QedError::ExcitationOverflow { subsystem: target })
                }
                _ => {}
            }
        }

        for (amplitudes, event) in [
            (kept, BranchEvent::NoJump { subsystem: target, step }),
            (jumped, BranchEvent::Jump { subsystem: target, step }),
        ] {
            if amplitudes.norm_squared() == 0.0 {
                continue;
            }
            out.push(Branch {
                state: CompositeState::new(layout.clone(), amplitudes)?,
                events: push_event(&branch.events, event),
                selected: branch.selected,
            });
        }
    }
    Ok(BranchEnsemble::from_raw(out))
}

/// Multiply the off-diagonal elements of `rho` by `kappa_phi`.
pub fn pure_dephasing(rho: &QubitDensityMatrix, kappa_phi: f64) -> Result<QubitDensityMatrix> {
    let k = QedError::check_unit("kappa_phi", kappa_phi)?;
    let mut m = *rho.matrix();
    m[(0, 1)] *= k;
    m[(1, 0)] *= k;
    Ok(QubitDensityMatrix::from_matrix_unchecked(m))
}

/// Projective measurement of `target` keeping the null (`|g>`) outcome.
///
/// Each branch splits into its `|g>` part, which keeps the branch's selection
/// flag, and its `|e>` part, which is marked rejected. States stay
/// unnormalized so squared norms remain outcome probabilities.
pub fn project_ground(ensemble: &BranchEnsemble, target: Subsystem) -> Result<BranchEnsemble> {
    let mut out = Vec::with_capacity(ensemble.branches().len() * 2);
    for branch in ensemble.branches() {
        let state = &branch.state;
        let layout = state.layout();
        let pos = layout.position(target)?;
        if layout.entries()[pos].1 != 2 {
            return Err(QedError::InvalidParameter {
                name: "target",
                reason: format!("{target} is not a qubit"),
            });
        }
        let n = layout.total_dim();
        let mut null = state.amplitudes().clone();
        let mut detected = DVector::from_element(n, ZERO);
        for i in 0..n {
            if layout.digits(i)[pos] == 1 {
                detected[i] = null[i];
                null[i] = ZERO;
            }
        }

        let parts = [
            (null, BranchEvent::Null { subsystem: target }, branch.selected),
            (detected, BranchEvent::Detected { subsystem: target }, false),
        ];
        for (amplitudes, event, selected) in parts {
            if amplitudes.norm_squared() == 0.0 {
                continue;
            }
            // repeated projections confirm the previous outcome without a new event
            let events = if branch.events.contains(&event) {
                branch.events.clone()
            } else {
                push_event(&branch.events, event)
            };
            out.push(Branch {
                state: CompositeState::new(layout.clone(), amplitudes)?,
                events,
                selected,
            });
        }
    }
    Ok(BranchEnsemble::from_raw(out))
}

pub(crate) fn pauli(axis: Option<Axis>) -> nalgebra::Matrix2<C64> {
    let i = C64::new(0.0, 1.0);
    match axis {
        None => nalgebra::Matrix2::new(ONE, ZERO, ZERO, ONE),
        Some(Axis::X) => nalgebra::Matrix2::new(ZERO, ONE, ONE, ZERO),
        Some(Axis::Y) => nalgebra::Matrix2::new(ZERO, -i, i, ZERO),
        Some(Axis::Z) => nalgebra::Matrix2::new(ONE, ZERO, ZERO, -ONE),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{apply, embed, reduce_to_qubit};
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    fn layout() -> SubsystemLayout {
        SubsystemLayout::default()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < TOL
    }

    fn superposition(alpha: C64, beta: C64) -> CompositeState {
        CompositeState::qubit_superposition(layout(), Subsystem::Q1, alpha, beta).unwrap()
    }

    #[test]
    fn pi_x_exchanges_amplitudes() {
        let (alpha, beta) = (c(0.6, 0.0), c(0.0, 0.8));
        let s = superposition(alpha, beta);
        let out = apply(&s, &rotation(Subsystem::Q1, Axis::X, PI).unwrap()).unwrap();
        let minus_i = c(0.0, -1.0);
        assert!(close(out.amplitude(&[]).unwrap(), minus_i * beta));
        assert!(close(out.amplitude(&[(Subsystem::Q1, 1)]).unwrap(), minus_i * alpha));
    }

    #[test]
    fn zero_rotation_is_identity_and_z_keeps_populations() {
        let id = rotation(Subsystem::Q1, Axis::X, 0.0).unwrap();
        assert_eq!(id.matrix(), &DMatrix::<C64>::identity(2, 2));
        let s = superposition(c(0.6, 0.0), c(0.0, 0.8));
        let out = apply(&s, &rotation(Subsystem::Q1, Axis::Z, 1.234).unwrap()).unwrap();
        assert!((out.amplitude(&[]).unwrap().norm() - 0.6).abs() < TOL);
        assert!((out.amplitude(&[(Subsystem::Q1, 1)]).unwrap().norm() - 0.8).abs() < TOL);
        assert!(rotation(Subsystem::Q1, Axis::Y, f64::NAN).is_err());
    }

    #[test]
    fn partial_swap_limits() {
        let l = layout();
        let e = CompositeState::basis(l.clone(), &[(Subsystem::Q1, 1)]).unwrap();
        let phases = SwapPhases { entry: 0.4, ..Default::default() };
        let none = partial_swap(&l, Subsystem::Q1, Subsystem::B, 0.0, phases).unwrap();
        let out = apply(&e, &none).unwrap();
        assert!(close(out.amplitude(&[(Subsystem::Q1, 1)]).unwrap(), C64::from_polar(1.0, 0.4)));

        let full = partial_swap(&l, Subsystem::Q1, Subsystem::B, 1.0, SwapPhases::default()).unwrap();
        let out = apply(&e, &full).unwrap();
        assert!(close(out.amplitude(&[(Subsystem::B, 1)]).unwrap(), c(0.0, -1.0)));
        assert!(out.amplitude(&[(Subsystem::Q1, 1)]).unwrap().norm() < TOL);
    }

    #[test]
    fn partial_swap_three_quarters() {
        let l = layout();
        let (alpha, beta) = (c(0.6, 0.0), c(0.0, 0.8));
        let s = superposition(alpha, beta);
        let u = partial_swap(&l, Subsystem::Q1, Subsystem::B, 0.75, SwapPhases::default()).unwrap();
        let out = apply(&s, &u).unwrap();
        assert!(close(out.amplitude(&[]).unwrap(), alpha));
        assert!(close(out.amplitude(&[(Subsystem::Q1, 1)]).unwrap(), beta * 0.5));
        let expected = beta * c(0.0, -(3f64.sqrt() / 2.0));
        assert!(close(out.amplitude(&[(Subsystem::B, 1)]).unwrap(), expected));
        assert!(partial_swap(&l, Subsystem::Q1, Subsystem::B, 1.2, SwapPhases::default()).is_err());
    }

    #[test]
    fn iswap_vacuum_and_transfer() {
        let l = layout();
        let u = iswap(&l, Subsystem::B, Subsystem::Q2, 0.0).unwrap();
        let vac = CompositeState::ground(l.clone());
        assert_eq!(apply(&vac, &u).unwrap(), vac);
        let one = CompositeState::basis(l, &[(Subsystem::B, 1)]).unwrap();
        let out = apply(&one, &u).unwrap();
        assert!(close(out.amplitude(&[(Subsystem::Q2, 1)]).unwrap(), c(0.0, -1.0)));
    }

    #[test]
    fn qrq_swap_coefficient() {
        // partial swap then iSWAP: |geg>|00> coefficient is -sqrt(p) e^{i theta_p} e^{i theta_pa}
        let l = layout();
        let (p, theta_p, aux, completion) = (0.3, 0.7, -0.4, 1.1);
        let beta = c(0.0, 0.8);
        let s = superposition(c(0.6, 0.0), beta);
        let ps = partial_swap(&l, Subsystem::Q1, Subsystem::B, p, SwapPhases { entry: theta_p, aux, completion: 0.0 }).unwrap();
        let out = apply(&apply(&s, &ps).unwrap(), &iswap(&l, Subsystem::B, Subsystem::Q2, completion).unwrap()).unwrap();
        let expected = -beta * p.sqrt() * C64::from_polar(1.0, theta_p + aux + completion);
        assert!(close(out.amplitude(&[(Subsystem::Q2, 1)]).unwrap(), expected));
    }

    #[test]
    fn strength_from_time_cases() {
        assert_eq!(strength_from_time(0.0, 34.7).unwrap(), 0.0);
        assert!((strength_from_time(1e3 / (2.0 * 34.7), 34.7).unwrap() - 1.0).abs() < TOL);
        // sin^2(pi * 34.7e-3 * t) = 1/2  =>  t = 250 / 34.7 ns = 7.2046 ns
        assert!((strength_from_time(7.204, 34.7).unwrap() - 0.5).abs() < 1e-4);
        assert!(strength_from_time(-1.0, 34.7).is_err());
        assert!(strength_from_time(1.0, 0.0).is_err());
    }

    #[test]
    fn damping_unit_kappa_keeps_single_branch() {
        let s = superposition(c(0.6, 0.0), c(0.0, 0.8));
        let ens = BranchEnsemble::from_state(s.clone());
        let out = amplitude_damping_branches(&ens, Subsystem::Q1, DampingFactor::new(1.0).unwrap(), 1).unwrap();
        assert_eq!(out.branches().len(), 1);
        assert_eq!(out.branches()[0].state, s);
    }

    #[test]
    fn damping_zero_kappa_decays_resonator() {
        let l = layout();
        let beta = c(0.0, 0.8);
        let amps = CompositeState::basis(l.clone(), &[(Subsystem::M1, 1)]).unwrap().amplitudes() * beta;
        let s = CompositeState::new(l, amps).unwrap();
        let out = amplitude_damping_branches(&BranchEnsemble::from_state(s), Subsystem::M1, DampingFactor::new(0.0).unwrap(), 2).unwrap();
        assert_eq!(out.branches().len(), 1);
        let b = &out.branches()[0];
        assert!(b.has_jump());
        assert!(close(b.state.amplitude(&[]).unwrap(), beta));
        assert!((b.weight() - 0.64).abs() < TOL);
    }

    #[test]
    fn damping_overflow_and_range_errors() {
        let l = SubsystemLayout::with_resonator_truncation(3).unwrap();
        let s = CompositeState::basis(l, &[(Subsystem::M1, 2)]).unwrap();
        let err = amplitude_damping_branches(&BranchEnsemble::from_state(s), Subsystem::M1, DampingFactor::new(0.5).unwrap(), 2);
        assert_eq!(err, Err(QedError::ExcitationOverflow { subsystem: Subsystem::M1 }));
        assert!(DampingFactor::new(1.5).is_err());
        assert!(DampingFactor::new(-0.1).is_err());
        assert!((DampingFactor::from_lifetime(3.0, 2.5).unwrap().value() - (-1.2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn storage_jump_branch_weight() {
        // alpha = beta = 1/sqrt(2), p = 0.75, store in M1 with kappa = 0.3
        let l = layout();
        let h = c(0.5f64.sqrt(), 0.0);
        let mut amps = DVector::from_element(32, ZERO);
        amps[0] = h;
        amps[l.index_of(&[(Subsystem::M1, 1)]).unwrap()] = c(0.0, -1.0) * h * 0.5;
        let s = CompositeState::new(l, amps).unwrap();
        let out = amplitude_damping_branches(&BranchEnsemble::from_state(s), Subsystem::M1, DampingFactor::new(0.3).unwrap(), 2).unwrap();
        let jump: f64 = out.branches().iter().filter(|b| b.has_jump()).map(Branch::weight).sum();
        assert!((jump - 0.0875).abs() < TOL);
        assert!((out.total_weight() - 0.625).abs() < TOL);
    }

    #[test]
    fn dephasing_cases() {
        let plus = QubitDensityMatrix::pure(c(0.5f64.sqrt(), 0.0), c(0.5f64.sqrt(), 0.0));
        assert_eq!(pure_dephasing(&plus, 1.0).unwrap(), plus);
        let full = pure_dephasing(&plus, 0.0).unwrap();
        assert!(full.get(0, 1).norm() < TOL && (full.get(0, 0).re - 0.5).abs() < TOL);
        let m = QubitDensityMatrix::from_bloch(1.0, [2.0 * 0.4598, 0.0, 0.0]);
        let out = pure_dephasing(&m, 0.95).unwrap();
        assert!((out.get(0, 1).re - 0.43681).abs() < 1e-12);
        assert!(pure_dephasing(&m, 1.01).is_err());
    }

    #[test]
    fn projection_cases() {
        let l = layout();
        let g = CompositeState::ground(l.clone());
        let ens = BranchEnsemble::from_state(g);
        let out = project_ground(&ens, Subsystem::Q2).unwrap();
        assert_eq!(out.branches().len(), 1);
        assert_eq!(out.branches()[0].state, ens.branches()[0].state);

        let e = CompositeState::basis(l, &[(Subsystem::Q2, 1)]).unwrap();
        let out = project_ground(&BranchEnsemble::from_state(e), Subsystem::Q2).unwrap();
        assert_eq!(out.selected_weight(), 0.0);
        assert_eq!(reduce_to_qubit(&out, Subsystem::Q1), Err(QedError::EmptySelection));
    }

    #[test]
    fn step_one_matches_null_outcome_norm() {
        let l = layout();
        let (alpha, beta, p) = (c(0.6, 0.0), c(0.0, 0.8), 0.75);
        let s = superposition(alpha, beta);
        let s = apply(&s, &partial_swap(&l, Subsystem::Q1, Subsystem::B, p, SwapPhases::default()).unwrap()).unwrap();
        let s = apply(&s, &iswap(&l, Subsystem::B, Subsystem::Q2, 0.0).unwrap()).unwrap();
        let out = project_ground(&BranchEnsemble::from_state(s), Subsystem::Q2).unwrap();
        let expected = alpha.norm_sqr() + beta.norm_sqr() * (1.0 - p);
        assert!((out.selected_weight() - expected).abs() < TOL);
        assert!((out.total_weight() - 1.0).abs() < TOL);
    }

    fn arb_phases() -> impl Strategy<Value = SwapPhases> {
        (0.0..2.0 * PI, 0.0..2.0 * PI, 0.0..2.0 * PI).prop_map(|(entry, aux, completion)| SwapPhases { entry, aux, completion })
    }

    proptest! {
        #[test]
        fn swaps_are_unitary(p in 0.0..=1.0f64, phases in arb_phases(), trunc in 2usize..=3) {
            let l = SubsystemLayout::with_resonator_truncation(trunc).unwrap();
            let ps = partial_swap(&l, Subsystem::Q1, Subsystem::B, p, phases).unwrap();
            prop_assert!(embed(&ps, &l).unwrap().unitarity_error() < TOL);
            let is = iswap(&l, Subsystem::M1, Subsystem::Q1, phases.completion).unwrap();
            prop_assert!(embed(&is, &l).unwrap().unitarity_error() < TOL);
        }

        #[test]
        fn rotations_are_unitary(angle in -10.0..10.0f64, axis in prop_oneof![Just(Axis::X), Just(Axis::Y), Just(Axis::Z)]) {
            prop_assert!(rotation(Subsystem::Q3, axis, angle).unwrap().unitarity_error() < TOL);
        }

        #[test]
        fn damping_conserves_norm(theta in 0.0..PI, phi in 0.0..2.0 * PI, kappa in 0.0..=1.0f64) {
            let s = superposition(c((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi));
            let out = amplitude_damping_branches(&BranchEnsemble::from_state(s), Subsystem::Q1, DampingFactor::new(kappa).unwrap(), 1).unwrap();
            prop_assert!((out.total_weight() - 1.0).abs() < TOL);
        }

        #[test]
        fn projection_is_idempotent(theta in 0.0..PI, phi in 0.0..2.0 * PI, p in 0.0..=1.0f64) {
            let l = layout();
            let s = superposition(c((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi));
            let s = apply(&s, &partial_swap(&l, Subsystem::Q1, Subsystem::B, p, SwapPhases::default()).unwrap()).unwrap();
            let s = apply(&s, &iswap(&l, Subsystem::B, Subsystem::Q2, 0.0).unwrap()).unwrap();
            let once = project_ground(&BranchEnsemble::from_state(s), Subsystem::Q2).unwrap();
            let twice = project_ground(&once, Subsystem::Q2).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn strength_is_periodic_and_symmetric(x in 0.0..1.0f64, k in 0u32..4, fc in 1.0..100.0f64) {
            let t = |cycles: f64| cycles / (fc * 1e-3);
            let base = strength_from_time(t(x), fc).unwrap();
            prop_assert!((strength_from_time(t(x + k as f64), fc).unwrap() - base).abs() < 1e-9);
            prop_assert!((strength_from_time(t(1.0 - x), fc).unwrap() - base).abs() < 1e-9);
        }
    }
}
