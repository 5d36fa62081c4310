//! State and process tomography of the post-selected map.

mod fidelity;
mod phase;
mod readout;

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Matrix2, Matrix4, SMatrix, SVector, SymmetricEigen};
use serde::Serialize;

use crate::dynamics::pauli;
use crate::dynamics::Axis;
use crate::error::{QedError, Result};
use crate::hilbert::{QubitDensityMatrix, C64};
use crate::protocol::{run, Backend, ProtocolConfig};

pub use fidelity::{
    average_selection_probability, fidelity_f, fidelity_fav, fidelity_favp, FidelityReport,
};
pub use phase::{compensation_operator, fit_compensation_phase, PhaseCompensation};
pub use readout::{
    correct_readout, delayed_measurement_correction, JointReadout, ReadoutCorrection, ReadoutModel,
};

pub const HERMITIAN_TOL: f64 = 1e-10;

/// Operator basis `{I, X, Y, Z}`.
pub fn pauli_basis() -> [Matrix2<C64>; 4] {
    [
        pauli(None),
        pauli(Some(Axis::X)),
        pauli(Some(Axis::Y)),
        pauli(Some(Axis::Z)),
    ]
}

/// `(alpha, beta)` of `|g>, (|g> - i|e>)/sqrt2, (|g> + |e>)/sqrt2, |e>`.
pub fn input_amplitudes() -> [(C64, C64); 4] {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    [
        (C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
        (h, C64::new(0.0, -FRAC_1_SQRT_2)),
        (h, h),
        (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
    ]
}

pub fn input_states() -> [QubitDensityMatrix; 4] {
    input_amplitudes().map(|(a, b)| QubitDensityMatrix::pure(a, b))
}

/// Process matrix in the `{I, X, Y, Z}` basis, not necessarily trace preserving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessMatrix {
    chi: Matrix4<C64>,
}

impl ProcessMatrix {
    pub fn new(chi: Matrix4<C64>) -> Result<Self> {
        let err = (chi - chi.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if err > HERMITIAN_TOL {
            return Err(QedError::InvalidParameter {
                name: "process matrix",
                reason: format!("not Hermitian (deviation {err:.3e})"),
            });
        }
        Ok(Self { chi })
    }

    pub(crate) fn new_unchecked(chi: Matrix4<C64>) -> Self {
        Self { chi }
    }

    /// Process matrix of `rho -> U rho U^dagger`.
    pub fn from_unitary(u: &Matrix2<C64>) -> Self {
        let c = SVector::<C64, 4>::from_iterator(pauli_basis().iter().map(|e| (e * u).trace() / 2.0));
        Self { chi: c * c.adjoint() }
    }

    /// `sum_k c_k c_k^dagger` with `c_kn = Tr(E_n K_k) / 2`.
    pub fn from_kraus(kraus: &[Matrix2<C64>]) -> Self {
        let mut chi = Matrix4::zeros();
        for k in kraus {
            let c =
                SVector::<C64, 4>::from_iterator(pauli_basis().iter().map(|e| (e * k).trace() / 2.0));
            chi += c * c.adjoint();
        }
        Self { chi }
    }

    pub fn identity() -> Self {
        Self::from_unitary(&Matrix2::identity())
    }

    /// The ideal un-collapsing operation, `pi_x`.
    pub fn pi_x() -> Self {
        Self::from_unitary(&pauli(Some(Axis::X)))
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.chi
    }

    pub fn get(&self, n: usize, m: usize) -> C64 {
        self.chi[(n, m)]
    }

    pub fn trace(&self) -> f64 {
        self.chi.trace().re
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            chi: self.chi * C64::new(factor, 0.0),
        }
    }

    /// `chi / Tr(chi)`.
    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if t.abs() < f64::MIN_POSITIVE {
            return Err(QedError::ZeroTrace);
        }
        Ok(self.scaled(1.0 / t))
    }

    /// `sum chi_nm E_n rho E_m^dagger`.
    pub fn apply(&self, rho: &Matrix2<C64>) -> Matrix2<C64> {
        let e = pauli_basis();
        let mut out = Matrix2::zeros();
        for n in 0..4 {
            for m in 0..4 {
                if self.chi[(n, m)] != C64::new(0.0, 0.0) {
                    out += e[n] * rho * e[m].adjoint() * self.chi[(n, m)];
                }
            }
        }
        out
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.hermitian_part())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Nearest positive semidefinite matrix in Frobenius norm.
    pub fn project_psd(&self) -> Self {
        let eig = SymmetricEigen::new(self.hermitian_part());
        let clipped = eig.eigenvalues.map(|l| C64::new(l.max(0.0), 0.0));
        let v = eig.eigenvectors;
        Self {
            chi: v * Matrix4::from_diagonal(&clipped) * v.adjoint(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.chi - other.chi).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn hermitian_part(&self) -> Matrix4<C64> {
        (self.chi + self.chi.adjoint()) * C64::new(0.5, 0.0)
    }
}

fn vec2(m: &Matrix2<C64>) -> [C64; 4] {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

/// Linear inversion of `outputs[i] = sum chi_nm E_n inputs[i] E_m^dagger`.
/// Outputs are unnormalized (their trace is the selection probability).
pub fn reconstruct_chi(
    inputs: &[QubitDensityMatrix],
    outputs: &[QubitDensityMatrix],
    project_psd: bool,
) -> Result<ProcessMatrix> {
    if inputs.len() != 4 || outputs.len() != 4 {
        return Err(QedError::DimensionMismatch {
            expected: 4,
            actual: inputs.len().min(outputs.len()),
        });
    }
    // express the matrix units in terms of the inputs
    let a = Matrix4::from_fn(|r, c| vec2(inputs[c].matrix())[r]);
    let a_inv = a.try_inverse().ok_or(QedError::SingularInputSet)?;
    if (a * a_inv - Matrix4::identity()).norm() > 1e-9 {
        return Err(QedError::SingularInputSet);
    }

    let e = pauli_basis();
    let mut lhs = SMatrix::<C64, 16, 16>::zeros();
    let mut rhs = SVector::<C64, 16>::zeros();
    for unit in 0..4 {
        let mut basis = Matrix2::zeros();
        basis[(unit / 2, unit % 2)] = C64::new(1.0, 0.0);
        let mut image = Matrix2::zeros();
        for (i, out) in outputs.iter().enumerate() {
            image += out.matrix() * a_inv[(i, unit)];
        }
        for (k, value) in vec2(&image).into_iter().enumerate() {
            rhs[unit * 4 + k] = value;
        }
        for n in 0..4 {
            for m in 0..4 {
                let term = vec2(&(e[n] * basis * e[m].adjoint()));
                for k in 0..4 {
                    lhs[(unit * 4 + k, n * 4 + m)] = term[k];
                }
            }
        }
    }
    let x = lhs.lu().solve(&rhs).ok_or(QedError::SingularInputSet)?;
    let chi = Matrix4::from_fn(|n, m| x[n * 4 + m]);
    let chi = ProcessMatrix {
        chi: (chi + chi.adjoint()) * C64::new(0.5, 0.0),
    };
    Ok(if project_psd { chi.project_psd() } else { chi })
}

/// Pre-measurement pulse of a Q1 tomography setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TomographySetting {
    Identity,
    RxHalfPi,
    RyHalfPi,
}

impl TomographySetting {
    pub const ALL: [TomographySetting; 3] = [Self::Identity, Self::RxHalfPi, Self::RyHalfPi];

    pub fn pulse(self) -> Matrix2<C64> {
        let (c, s) = (FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        let axis = match self {
            Self::Identity => return Matrix2::identity(),
            Self::RxHalfPi => pauli(Some(Axis::X)),
            Self::RyHalfPi => pauli(Some(Axis::Y)),
        };
        Matrix2::identity() * C64::new(c, 0.0) - axis * C64::new(0.0, s)
    }

    /// Joint probabilities of (selected, Q1 in `|g>`) and (selected, Q1 in `|e>`).
    pub fn outcome(self, rho: &QubitDensityMatrix) -> SettingOutcome {
        let u = self.pulse();
        let r = u * rho.matrix() * u.adjoint();
        SettingOutcome {
            g: r[(0, 0)].re,
            e: r[(1, 1)].re,
        }
    }
}

/// Selected-outcome probabilities of one tomography setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SettingOutcome {
    pub g: f64,
    pub e: f64,
}

/// Bloch vector scaled by the selection probability, together with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnnormalizedBloch {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub p_s: f64,
}

impl UnnormalizedBloch {
    /// `(P_s I + x X + y Y + z Z) / 2`.
    pub fn density(&self) -> QubitDensityMatrix {
        let m = (Matrix2::identity() * C64::new(self.p_s, 0.0)
            + pauli(Some(Axis::X)) * C64::new(self.x, 0.0)
            + pauli(Some(Axis::Y)) * C64::new(self.y, 0.0)
            + pauli(Some(Axis::Z)) * C64::new(self.z, 0.0))
            * C64::new(0.5, 0.0);
        QubitDensityMatrix::from_matrix_unchecked(m)
    }
}

pub fn outcomes_of(rho: &QubitDensityMatrix) -> [SettingOutcome; 3] {
    TomographySetting::ALL.map(|s| s.outcome(rho))
}

/// Bloch vector without range checks; used for readout-corrected estimates.
pub(crate) fn bloch_vector(outcomes: &[SettingOutcome; 3]) -> UnnormalizedBloch {
    let [id, rx, ry] = outcomes;
    UnnormalizedBloch {
        x: -(ry.g - ry.e),
        y: rx.g - rx.e,
        z: id.g - id.e,
        p_s: (id.g + id.e + rx.g + rx.e + ry.g + ry.e) / 3.0,
    }
}

/// Settings in `TomographySetting::ALL` order; the selection probability is
/// averaged over the three settings.
pub fn bloch_from_counts(outcomes: &[SettingOutcome; 3]) -> Result<UnnormalizedBloch> {
    const TOL: f64 = 1e-12;
    for o in outcomes {
        for value in [o.g, o.e, o.g + o.e] {
            if !(-TOL..=1.0 + TOL).contains(&value) {
                return Err(QedError::OutOfRange {
                    name: "selected-outcome probability",
                    value,
                    min: 0.0,
                    max: 1.0,
                });
            }
        }
    }
    Ok(bloch_vector(outcomes))
}

/// Run the protocol on the four tomography inputs and reconstruct `chi`.
pub fn simulate_process(config: &ProtocolConfig, backend: Backend) -> Result<ProcessMatrix> {
    let outputs = input_amplitudes()
        .iter()
        .map(|&(a, b)| Ok(run(&config.with_input(a, b), backend)?.rho))
        .collect::<Result<Vec<_>>>()?;
    reconstruct_chi(&input_states(), &outputs, false)
}
