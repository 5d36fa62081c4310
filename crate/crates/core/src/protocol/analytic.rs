use nalgebra::Matrix2;

use super::{net_dynamic_phase, Components, ProtocolConfig, ProtocolResult};
use crate::error::Result;
use crate::hilbert::{QubitDensityMatrix, C64};

struct Coefficients {
    /// squared no-jump amplitude factor of the input `|e>` component
    no_jump_e: f64,
    /// squared no-jump amplitude factor of the input `|g>` component
    no_jump_g: f64,
    /// input `|e>` population that reaches step 3 in `|g>` through a jump
    leaked: f64,
    k3: f64,
    pu: f64,
    coherence: C64,
}

impl Coefficients {
    fn new(config: &ProtocolConfig) -> Result<Self> {
        config.validate_channel()?;
        let pu = config.resolved_pu()?;
        let k = config.kappas;
        let k2 = config.kappa2();
        let p = config.p;
        let no_jump_e = k.k1 * k2 * (1.0 - p);
        let no_jump_g = k.k3 * (1.0 - pu);
        let coherence =
            C64::from_polar((no_jump_e * no_jump_g).sqrt() * k.kphi, net_dynamic_phase(config));
        Ok(Self {
            no_jump_e,
            no_jump_g,
            leaked: (1.0 - k.k1) + k.k1 * (1.0 - p) * (1.0 - k2),
            k3: k.k3,
            pu,
            coherence,
        })
    }

    fn apply(&self, m: &Matrix2<C64>) -> Matrix2<C64> {
        let (gg, ee) = (m[(0, 0)], m[(1, 1)]);
        let relaxed = (gg + ee * self.leaked) * (1.0 - self.k3);
        let kept_e = ee * self.leaked * self.k3 * (1.0 - self.pu);
        Matrix2::new(
            ee * self.no_jump_e + relaxed,
            m[(1, 0)] * self.coherence,
            m[(0, 1)] * self.coherence.conj(),
            gg * self.no_jump_g + kept_e,
        )
    }
}

/// Linear map from the input operator to the unnormalized, post-selected
/// output of Q1. Acts on arbitrary (also non-Hermitian) 2x2 matrices.
pub fn analytic_map(config: &ProtocolConfig, m: &Matrix2<C64>) -> Result<Matrix2<C64>> {
    Ok(Coefficients::new(config)?.apply(m))
}

pub fn run_analytic(config: &ProtocolConfig) -> Result<ProtocolResult> {
    config.validate()?;
    let c = Coefficients::new(config)?;
    let input = QubitDensityMatrix::pure(config.alpha, config.beta);
    let rho = QubitDensityMatrix::from_matrix_unchecked(c.apply(input.matrix()));
    let (a2, b2) = (config.alpha.norm_sqr(), config.beta.norm_sqr());
    let components = Components::Analytic {
        no_jump: b2 * c.no_jump_e + a2 * c.no_jump_g,
        final_g: (a2 + b2 * c.leaked) * (1.0 - c.k3),
        final_e: b2 * c.leaked * c.k3 * (1.0 - c.pu),
    };
    Ok(ProtocolResult {
        p_dn: rho.trace(),
        rho,
        p_u: c.pu,
        components,
        net_phase: net_dynamic_phase(config),
    })
}

/// Amplitude damping with survival `k1 k2 k3`, dephasing `kphi` and the storage
/// phase on the `|e>` component.
pub fn free_decay_map(config: &ProtocolConfig, m: &Matrix2<C64>) -> Matrix2<C64> {
    let k = config.kappas;
    let survive = k.k1 * config.kappa2() * k.k3;
    let coherence = C64::from_polar(survive.sqrt() * k.kphi, -config.storage_phase());
    Matrix2::new(
        m[(0, 0)] + m[(1, 1)] * (1.0 - survive),
        m[(0, 1)] * coherence,
        m[(1, 0)] * coherence.conj(),
        m[(1, 1)] * survive,
    )
}
