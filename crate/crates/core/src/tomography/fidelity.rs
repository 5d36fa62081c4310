use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::Serialize;

use super::{pauli_basis, ProcessMatrix};
use crate::error::{QedError, Result};
use crate::hilbert::C64;

/// `Tr(chi_ideal chi) / Tr(chi)`.
pub fn fidelity_f(chi: &ProcessMatrix, ideal: &ProcessMatrix) -> Result<f64> {
    let t = chi.trace();
    if t.abs() < f64::MIN_POSITIVE {
        return Err(QedError::ZeroTrace);
    }
    Ok((ideal.matrix() * chi.matrix()).trace().re / t)
}

/// Bloch-sphere average of the selection probability; equals `Tr(chi)`.
pub fn average_selection_probability(chi: &ProcessMatrix) -> f64 {
    chi.trace()
}

fn bloch_state(r: [f64; 3]) -> Matrix2<C64> {
    let e = pauli_basis();
    (e[0] + e[1] * C64::new(r[0], 0.0) + e[2] * C64::new(r[1], 0.0) + e[3] * C64::new(r[2], 0.0))
        * C64::new(0.5, 0.0)
}

const OCTAHEDRON: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0],
];

/// Selection-weighted average state fidelity. Numerator and denominator are
/// quadratic in the Bloch vector, so the octahedral rule is exact.
pub fn fidelity_favp(chi: &ProcessMatrix, ideal: &Matrix2<C64>) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for r in OCTAHEDRON {
        let rho = bloch_state(r);
        let out = chi.apply(&rho);
        let target = ideal * rho * ideal.adjoint();
        num += (out * target).trace().re;
        den += out.trace().re;
    }
    if den.abs() < f64::MIN_POSITIVE {
        return Err(QedError::ZeroTrace);
    }
    Ok(num / den)
}

/// Uniform average of `Tr(rho_f rho_ideal)` over pure inputs, where `rho_f` is
/// the normalized output.
///
/// Writing the unnormalized overlap as `n0 + n.r + r^T M r` and the selection
/// probability as `a + b.r`, the azimuthal average about `b` leaves a
/// quadratic over a linear function of `z = r.b/|b|`, integrated exactly.
pub fn fidelity_fav(chi: &ProcessMatrix, ideal: &Matrix2<C64>) -> Result<f64> {
    let e = pauli_basis();
    let l_id = chi.apply(&e[0]);
    let l_sigma = [chi.apply(&e[1]), chi.apply(&e[2]), chi.apply(&e[3])];
    let s = [1, 2, 3].map(|l| ideal * e[l] * ideal.adjoint());

    let n0 = l_id.trace().re / 4.0;
    let n = Vector3::from_fn(|k, _| (l_sigma[k].trace().re + (l_id * s[k]).trace().re) / 4.0);
    let m = Matrix3::from_fn(|k, l| (l_sigma[k] * s[l]).trace().re / 4.0);
    let a = l_id.trace().re / 2.0;
    let b = Vector3::from_fn(|k, _| l_sigma[k].trace().re / 2.0);
    let c = b.norm();
    if !(a > 0.0) {
        return Err(QedError::ZeroTrace);
    }

    let tr_m = m.trace();
    let (q0, q1, q2) = if c == 0.0 {
        (n0 + tr_m / 3.0, 0.0, 0.0)
    } else {
        let u = b / c;
        let m33 = (u.transpose() * m * u)[(0, 0)];
        let transverse = (tr_m - m33) / 2.0;
        (n0 + transverse, n.dot(&u), m33 - transverse)
    };
    ratio_integral(q0, q1, q2, a, c)
}

/// `(1/2) int_{-1}^{1} (q0 + q1 z + q2 z^2) / (a + c z) dz` for `a > 0`, `c >= 0`.
fn ratio_integral(q0: f64, q1: f64, q2: f64, a: f64, c: f64) -> Result<f64> {
    let t = c / a;
    if t < 0.5 {
        // expand 1/(1 + t z) and integrate even powers
        let moment = |k: i32| if k % 2 == 0 { 1.0 / (k + 1) as f64 } else { 0.0 };
        let mut sum = 0.0;
        let mut coef = 1.0;
        for k in 0..200 {
            let term = coef * (q0 * moment(k) + q1 * moment(k + 1) + q2 * moment(k + 2));
            sum += term;
            coef *= -t;
            if coef.abs() < 1e-18 {
                break;
            }
        }
        return Ok(sum / a);
    }
    // q = (a + c z)(s0 + s1 z) + rem
    let s1 = q2 / c;
    let s0 = (q1 - a * s1) / c;
    let rem = q0 - a * s0;
    if a <= c {
        if rem.abs() < 1e-15 {
            return Ok(s0);
        }
        return Err(QedError::InvalidParameter {
            name: "selection probability",
            reason: "vanishes on part of the Bloch sphere; average fidelity is undefined".into(),
        });
    }
    Ok(s0 + rem / (2.0 * c) * ((a + c) / (a - c)).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityReport {
    pub f: f64,
    pub f_av: f64,
    pub f_av_prime: f64,
    pub f_av_sc: f64,
    pub f_av_prime_sc: f64,
    pub trace: f64,
}

impl FidelityReport {
    pub fn new(chi: &ProcessMatrix, ideal: &Matrix2<C64>) -> Result<Self> {
        let f = fidelity_f(chi, &ProcessMatrix::from_unitary(ideal))?;
        let f_av = fidelity_fav(chi, ideal)?;
        let f_av_prime = fidelity_favp(chi, ideal)?;
        Ok(Self {
            f,
            f_av,
            f_av_prime,
            f_av_sc: (3.0 * f_av - 1.0) / 2.0,
            f_av_prime_sc: (3.0 * f_av_prime - 1.0) / 2.0,
            trace: chi.trace(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{pauli, Axis};
    use nalgebra::Matrix4;
    use std::f64::consts::PI;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    /// Fibonacci-lattice average of `Tr(L(rho) U rho U^dag) / Tr L(rho)`.
    fn brute_fav(chi: &ProcessMatrix, u: &Matrix2<C64>, points: usize) -> f64 {
        let golden = PI * (3.0 - 5f64.sqrt());
        let mut sum = 0.0;
        for i in 0..points {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / points as f64;
            let rho_xy = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            let rho = bloch_state([rho_xy * phi.cos(), rho_xy * phi.sin(), z]);
            let out = chi.apply(&rho);
            let target = u * rho * u.adjoint();
            sum += (out * target).trace().re / out.trace().re;
        }
        sum / points as f64
    }

    fn damping(k: f64) -> ProcessMatrix {
        ProcessMatrix::from_kraus(&[
            Matrix2::new(c(1.0), c(0.0), c(0.0), c(k.sqrt())),
            Matrix2::new(c(0.0), c((1.0 - k).sqrt()), c(0.0), c(0.0)),
        ])
    }

    #[test]
    fn f_examples() {
        let ideal = ProcessMatrix::pi_x();
        assert!((fidelity_f(&ideal, &ideal).unwrap() - 1.0).abs() < 1e-15);
        assert!((fidelity_f(&ideal.scaled(0.3), &ideal).unwrap() - 1.0).abs() < 1e-15);
        let flat = ProcessMatrix::new(Matrix4::identity() * c(0.25)).unwrap();
        assert!((fidelity_f(&flat, &ideal).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(
            fidelity_f(&ideal.scaled(0.0), &ideal),
            Err(QedError::ZeroTrace)
        );
    }

    #[test]
    fn identity_averages() {
        let id = ProcessMatrix::identity();
        let u = Matrix2::identity();
        assert!((fidelity_fav(&id, &u).unwrap() - 1.0).abs() < 1e-15);
        assert!((fidelity_favp(&id, &u).unwrap() - 1.0).abs() < 1e-15);
        assert!((average_selection_probability(&id) - 1.0).abs() < 1e-15);
        assert!((average_selection_probability(&id.scaled(0.5)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dephased_pi_x() {
        let mut m = Matrix4::zeros();
        m[(1, 1)] = c(0.5);
        m[(2, 2)] = c(0.5);
        let chi = ProcessMatrix::new(m).unwrap();
        let x = pauli(Some(Axis::X));
        assert!((fidelity_f(&chi, &ProcessMatrix::pi_x()).unwrap() - 0.5).abs() < 1e-15);
        assert!((fidelity_favp(&chi, &x).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn trace_preserving_averages_agree() {
        let chi = damping(0.4);
        let u = Matrix2::identity();
        let fav = fidelity_fav(&chi, &u).unwrap();
        let favp = fidelity_favp(&chi, &u).unwrap();
        assert!((fav - favp).abs() < 1e-14);
        let f = fidelity_f(&chi, &ProcessMatrix::identity()).unwrap();
        assert!((f - (3.0 * favp - 1.0) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn fav_matches_brute_force() {
        // a post-selected map: projection onto a weak-measurement outcome then damping
        let weak = Matrix2::new(c(0.9), c(0.0), c(0.0), c(0.45));
        let kraus: Vec<_> = [
            Matrix2::new(c(1.0), c(0.0), c(0.0), c(0.8f64.sqrt())),
            Matrix2::new(c(0.0), c(0.2f64.sqrt()), c(0.0), c(0.0)),
        ]
        .iter()
        .map(|k| k * weak)
        .collect();
        let chi = ProcessMatrix::from_kraus(&kraus);
        for u in [Matrix2::identity(), pauli(Some(Axis::X))] {
            let exact = fidelity_fav(&chi, &u).unwrap();
            let brute = brute_fav(&chi, &u, 200_000);
            assert!((exact - brute).abs() < 1e-6, "{exact} vs {brute}");
        }
    }

    #[test]
    fn fav_series_and_log_branches_meet() {
        let (q0, q1, q2, a) = (0.4, 0.1, -0.05, 1.0);
        let below = ratio_integral(q0, q1, q2, a, 0.5 - 1e-9).unwrap();
        let above = ratio_integral(q0, q1, q2, a, 0.5 + 1e-9).unwrap();
        assert!((below - above).abs() < 1e-8);
        assert!(ratio_integral(1.0, 0.0, 0.0, 1.0, 1.0).is_err());
        // numerator divisible by the denominator
        assert!((ratio_integral(1.0, 1.0, 0.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn report_scaled_values() {
        let chi = damping(0.7);
        let r = FidelityReport::new(&chi, &Matrix2::identity()).unwrap();
        assert!((r.f_av_prime_sc - r.f).abs() < 1e-14);
        assert!((r.f_av_sc - (3.0 * r.f_av - 1.0) / 2.0).abs() < 1e-15);
        assert!((r.trace - 1.0).abs() < 1e-14);
    }
}
