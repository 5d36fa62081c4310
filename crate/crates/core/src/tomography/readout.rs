use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{QedError, Result};

const PROB_TOL: f64 = 1e-12;

/// Single-qubit readout with assignment fidelities for `|g>` and `|e>`.
///
/// The confusion matrix `[[F_g, 1 - F_e], [1 - F_g, F_e]]` maps true to
/// observed outcome probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutModel {
    pub f_g: f64,
    pub f_e: f64,
}

impl ReadoutModel {
    pub fn new(f_g: f64, f_e: f64) -> Result<Self> {
        let m = Self { f_g, f_e };
        m.validate()?;
        Ok(m)
    }

    pub fn ideal() -> Self {
        Self { f_g: 1.0, f_e: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("F_g", self.f_g), ("F_e", self.f_e)] {
            if !(0.5..=1.0).contains(&v) {
                return Err(QedError::OutOfRange {
                    name,
                    value: v,
                    min: 0.5,
                    max: 1.0,
                });
            }
        }
        Ok(())
    }

    pub fn confusion(&self) -> Matrix2<f64> {
        Matrix2::new(self.f_g, 1.0 - self.f_e, 1.0 - self.f_g, self.f_e)
    }

    pub fn inverse(&self) -> Result<Matrix2<f64>> {
        let det = self.f_g + self.f_e - 1.0;
        if det.abs() < 1e-12 {
            return Err(QedError::SingularReadout);
        }
        Ok(Matrix2::new(self.f_e, self.f_e - 1.0, self.f_g - 1.0, self.f_g) / det)
    }

    pub fn apply(&self, truth: [f64; 2]) -> Result<[f64; 2]> {
        check_probabilities(&truth)?;
        let v = self.confusion() * Vector2::from(truth);
        Ok([v[0], v[1]])
    }
}

fn check_probabilities(p: &[f64]) -> Result<()> {
    for &v in p {
        if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&v) {
            return Err(QedError::OutOfRange {
                name: "probability",
                value: v,
                min: 0.0,
                max: 1.0,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReadoutCorrection {
    pub probabilities: [f64; 2],
    /// The plain inverse left `[0, 1]`.
    pub out_of_range: bool,
}

/// Invert the confusion matrix. With `clip`, results are clamped to `[0, 1]`
/// and renormalized; `out_of_range` reports whether that was needed.
pub fn correct_readout(observed: [f64; 2], model: &ReadoutModel, clip: bool) -> Result<ReadoutCorrection> {
    check_probabilities(&observed)?;
    let v = model.inverse()? * Vector2::from(observed);
    let raw = [v[0], v[1]];
    let out_of_range = raw.iter().any(|&x| !(-PROB_TOL..=1.0 + PROB_TOL).contains(&x));
    let probabilities = if clip && out_of_range {
        let c = raw.map(|x| x.clamp(0.0, 1.0));
        let total: f64 = c.iter().sum();
        if total > 0.0 {
            c.map(|x| x * observed.iter().sum::<f64>() / total)
        } else {
            c
        }
    } else {
        raw
    };
    Ok(ReadoutCorrection {
        probabilities,
        out_of_range,
    })
}

/// Undo relaxation during a delay before readout: `P_e / exp(-delay / T1)`.
pub fn delayed_measurement_correction(p_e_observed: f64, delay_ns: f64, t1_us: f64) -> Result<f64> {
    if !(delay_ns >= 0.0) {
        return Err(QedError::InvalidParameter {
            name: "delay",
            reason: format!("{delay_ns} ns is negative"),
        });
    }
    if !(t1_us > 0.0) {
        return Err(QedError::InvalidParameter {
            name: "T1",
            reason: "must be positive".into(),
        });
    }
    Ok(p_e_observed / (-delay_ns * 1e-3 / t1_us).exp())
}

/// Independent readout of Q1, Q2, Q3. Joint outcomes are indexed
/// `4 l1 + 2 l2 + l3` with level 1 meaning `|e>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointReadout {
    pub models: [ReadoutModel; 3],
}

impl JointReadout {
    fn contract(dist: &[f64; 8], mats: [Matrix2<f64>; 3]) -> [f64; 8] {
        let mut cur = *dist;
        for (q, m) in mats.iter().enumerate() {
            let stride = 4 >> q;
            let mut next = [0.0; 8];
            for (i, slot) in next.iter_mut().enumerate() {
                let bit = (i / stride) % 2;
                let base = i - bit * stride;
                *slot = m[(bit, 0)] * cur[base] + m[(bit, 1)] * cur[base + stride];
            }
            cur = next;
        }
        cur
    }

    pub fn apply(&self, truth: &[f64; 8]) -> [f64; 8] {
        Self::contract(truth, self.models.map(|m| m.confusion()))
    }

    /// Unclipped inverse; entries may leave `[0, 1]` for finite samples.
    pub fn correct(&self, observed: &[f64; 8]) -> Result<[f64; 8]> {
        let inv = [
            self.models[0].inverse()?,
            self.models[1].inverse()?,
            self.models[2].inverse()?,
        ];
        Ok(Self::contract(observed, inv))
    }
}
