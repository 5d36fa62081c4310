use nalgebra::Matrix2;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::dynamics::pure_dephasing;
use crate::error::{QedError, Result};
use crate::hilbert::{QubitDensityMatrix, Subsystem};
use crate::protocol::{run_analytic, simulate_ensemble, Backend, ProtocolConfig};
use crate::tomography::{bloch_vector, input_amplitudes, JointReadout, SettingOutcome, TomographySetting};

/// True joint (Q1, Q2, Q3) outcome probabilities per input and tomography
/// setting, indexed `[input][setting][4 l1 + 2 l2 + l3]`.
pub type OutcomeDistributions = [[[f64; 8]; 3]; 4];

const GRADIENT_STEP: f64 = 1e-6;

/// Unnormalized Q1 states conditioned on the Q2/Q3 outcomes, indexed `2 l2 + l3`.
fn conditional_blocks(config: &ProtocolConfig, backend: Backend) -> Result<[QubitDensityMatrix; 4]> {
    let kphi = config.kappas.kphi;
    match backend {
        Backend::Statevector => {
            let (ens, _) = simulate_ensemble(config)?;
            let block = |l2, l3| -> Result<QubitDensityMatrix> {
                let rho = ens.conditional_qubit_state(
                    Subsystem::Q1,
                    &[(Subsystem::Q2, l2), (Subsystem::Q3, l3)],
                )?;
                pure_dephasing(&rho, kphi)
            };
            Ok([block(0, 0)?, block(0, 1)?, block(1, 0)?, block(1, 1)?])
        }
        Backend::Analytic => {
            // the analytic model does not resolve rejected outcomes; they are lumped into Q2 = e
            let selected = run_analytic(config)?;
            let mut lumped = Matrix2::zeros();
            lumped[(0, 0)] = (1.0 - selected.p_dn).max(0.0).into();
            let zero = QubitDensityMatrix::from_matrix_unchecked(Matrix2::zeros());
            Ok([
                selected.rho,
                zero,
                QubitDensityMatrix::from_matrix_unchecked(lumped),
                zero,
            ])
        }
    }
}

pub fn outcome_distributions(config: &ProtocolConfig, backend: Backend) -> Result<OutcomeDistributions> {
    let mut out = [[[0.0; 8]; 3]; 4];
    for (i, &(a, b)) in input_amplitudes().iter().enumerate() {
        let blocks = conditional_blocks(&config.with_input(a, b), backend)?;
        for (s, setting) in TomographySetting::ALL.iter().enumerate() {
            for (k, block) in blocks.iter().enumerate() {
                let o = setting.outcome(block);
                out[i][s][k] = o.g.max(0.0);
                out[i][s][4 + k] = o.e.max(0.0);
            }
        }
    }
    Ok(out)
}

/// Multinomial counts by sequential conditional binomials.
pub fn sample_counts<R: Rng + ?Sized>(probs: &[f64; 8], shots: u64, rng: &mut R) -> Result<[u64; 8]> {
    let mut counts = [0u64; 8];
    let mut remaining = shots;
    let mut mass: f64 = probs.iter().sum();
    for k in 0..7 {
        if remaining == 0 {
            break;
        }
        let q = if mass > 0.0 { (probs[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
        let n = Binomial::new(remaining, q)
            .map_err(|e| QedError::Config(format!("binomial sampling: {e}")))?
            .sample(rng);
        counts[k] = n;
        remaining -= n;
        mass -= probs[k];
    }
    counts[7] = remaining;
    Ok(counts)
}

/// Readout-corrected tomography outputs from observed outcome frequencies.
pub fn corrected_outputs(
    observed: &OutcomeDistributions,
    readout: &JointReadout,
) -> Result<[QubitDensityMatrix; 4]> {
    let mut outputs = [QubitDensityMatrix::from_matrix_unchecked(Matrix2::zeros()); 4];
    for (i, input) in observed.iter().enumerate() {
        let mut settings = [SettingOutcome { g: 0.0, e: 0.0 }; 3];
        for (s, freq) in input.iter().enumerate() {
            let truth = readout.correct(freq)?;
            // double null: Q2 and Q3 both in g
            settings[s] = SettingOutcome {
                g: truth[0],
                e: truth[4],
            };
        }
        outputs[i] = bloch_vector(&settings).density();
    }
    Ok(outputs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    /// Delta-method standard error from the multinomial covariances.
    pub stderr: f64,
    /// Estimated uniform-input selection probability.
    pub p_dn: f64,
}

/// Sample `shots` outcomes per input and setting, pass them through readout
/// errors, invert the readout and evaluate `estimator` on the reconstructed
/// outputs.
pub fn monte_carlo_estimate<R, F>(
    truth: &OutcomeDistributions,
    readout: &JointReadout,
    shots: u64,
    rng: &mut R,
    estimator: F,
) -> Result<McEstimate>
where
    R: Rng + ?Sized,
    F: Fn(&[QubitDensityMatrix; 4]) -> Result<f64>,
{
    if shots == 0 {
        return Err(QedError::InvalidParameter {
            name: "shots",
            reason: "must be positive for sampling".into(),
        });
    }
    let n = shots as f64;
    let mut freq = [[[0.0; 8]; 3]; 4];
    for i in 0..4 {
        for s in 0..3 {
            let observed = readout.apply(&truth[i][s]);
            let counts = sample_counts(&observed, shots, rng)?;
            for k in 0..8 {
                freq[i][s][k] = counts[k] as f64 / n;
            }
        }
    }

    let outputs = corrected_outputs(&freq, readout)?;
    if outputs.iter().all(|o| o.trace() <= 0.0) {
        return Err(QedError::EmptySelection);
    }
    let value = estimator(&outputs)?;
    let p_dn = (outputs[0].trace() + outputs[3].trace()) / 2.0;

    let f = |fr: &OutcomeDistributions| -> Result<f64> { estimator(&corrected_outputs(fr, readout)?) };
    let mut variance = 0.0;
    for i in 0..4 {
        for s in 0..3 {
            let mut grad = [0.0; 8];
            for k in 0..8 {
                let mut up = freq;
                let mut down = freq;
                up[i][s][k] += GRADIENT_STEP;
                down[i][s][k] -= GRADIENT_STEP;
                grad[k] = (f(&up)? - f(&down)?) / (2.0 * GRADIENT_STEP);
            }
            let q = &freq[i][s];
            let mean: f64 = (0..8).map(|k| grad[k] * q[k]).sum();
            let second: f64 = (0..8).map(|k| grad[k] * grad[k] * q[k]).sum();
            variance += (second - mean * mean) / n;
        }
    }
    Ok(McEstimate {
        value,
        stderr: variance.max(0.0).sqrt(),
        p_dn,
    })
}
