use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix2, Matrix4};

use super::{fidelity_f, pauli_basis, ProcessMatrix};
use crate::error::Result;
use crate::hilbert::{QubitDensityMatrix, C64};

/// `Rz(phi) = diag(e^{-i phi/2}, e^{i phi/2})`; multiplies `rho_ge` by `e^{-i phi}`.
pub fn compensation_operator(phi: f64) -> Matrix2<C64> {
    Matrix2::new(
        C64::from_polar(1.0, -phi / 2.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::from_polar(1.0, phi / 2.0),
    )
}

/// Undo a phase `phi` acquired by the output coherence.
pub trait PhaseCompensation: Sized {
    fn compensate_phase(&self, phi: f64) -> Self;
}

impl PhaseCompensation for QubitDensityMatrix {
    fn compensate_phase(&self, phi: f64) -> Self {
        let u = compensation_operator(phi);
        QubitDensityMatrix::from_matrix_unchecked(u * self.matrix() * u.adjoint())
    }
}

impl PhaseCompensation for ProcessMatrix {
    /// `chi' = T chi T^dagger` with `T_na = Tr(E_n U E_a) / 2`.
    fn compensate_phase(&self, phi: f64) -> Self {
        let u = compensation_operator(phi);
        let e = pauli_basis();
        let t = Matrix4::from_fn(|n, a| (e[n].adjoint() * u * e[a]).trace() / 2.0);
        ProcessMatrix::new_unchecked(t * self.matrix() * t.adjoint())
    }
}

/// Compensation phase maximizing `F` against `ideal`, with the maximum.
///
/// `F(phi)` is `a + b cos(phi) + c sin(phi)`, so three evaluations fix it.
pub fn fit_compensation_phase(chi: &ProcessMatrix, ideal: &ProcessMatrix) -> Result<(f64, f64)> {
    let f = |phi: f64| fidelity_f(&chi.compensate_phase(phi), ideal);
    let (f0, f90, f180) = (f(0.0)?, f(FRAC_PI_2)?, f(2.0 * FRAC_PI_2)?);
    let a = (f0 + f180) / 2.0;
    let b = (f0 - f180) / 2.0;
    let c = f90 - a;
    let phi = c.atan2(b);
    Ok((phi, a + b.hypot(c)))
}
