//! States, operators and branch ensembles on the composite space of three
//! qubits and two truncated resonators.
//!
//! Basis ordering follows the ket notation `|q1 q2 q3> |b m1>`: the first
//! subsystem of the layout is the slowest index, the last the fastest. For
//! qubits level 0 is `|g>` and level 1 is `|e>`; for resonators the level is
//! the photon number.

use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QedError, Result};

pub type C64 = Complex64;

/// Slack allowed on squared norms that represent probabilities.
pub const NORM_EPS: f64 = 1e-9;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    Q1,
    Q2,
    Q3,
    B,
    M1,
}

impl Subsystem {
    pub const ALL: [Subsystem; 5] = [
        Subsystem::Q1,
        Subsystem::Q2,
        Subsystem::Q3,
        Subsystem::B,
        Subsystem::M1,
    ];

    pub fn is_qubit(self) -> bool {
        matches!(self, Subsystem::Q1 | Subsystem::Q2 | Subsystem::Q3)
    }
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Subsystem::Q1 => "Q1",
            Subsystem::Q2 => "Q2",
            Subsystem::Q3 => "Q3",
            Subsystem::B => "B",
            Subsystem::M1 => "M1",
        };
        f.write_str(name)
    }
}

/// Ordered subsystems with their local dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemLayout {
    entries: Vec<(Subsystem, usize)>,
}

impl SubsystemLayout {
    pub fn new(entries: Vec<(Subsystem, usize)>) -> Result<Self> {
        for (i, &(s, d)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|&(o, _)| o == s) {
                return Err(QedError::DuplicateSubsystem(s));
            }
            let valid = if s.is_qubit() { d == 2 } else { d >= 2 };
            if !valid {
                return Err(QedError::InvalidParameter {
                    name: "local dimension",
                    reason: format!("{s} cannot have dimension {d}"),
                });
            }
        }
        Ok(Self { entries })
    }

    /// Q1, Q2, Q3, B, M1 with both resonators truncated to `truncation` levels.
    pub fn with_resonator_truncation(truncation: usize) -> Result<Self> {
        Self::new(
            Subsystem::ALL
                .iter()
                .map(|&s| (s, if s.is_qubit() { 2 } else { truncation }))
                .collect(),
        )
    }

    pub fn entries(&self) -> &[(Subsystem, usize)] {
        &self.entries
    }

    pub fn subsystems(&self) -> impl Iterator<Item = Subsystem> + '_ {
        self.entries.iter().map(|&(s, _)| s)
    }

    pub fn total_dim(&self) -> usize {
        self.entries.iter().map(|&(_, d)| d).product()
    }

    pub fn position(&self, s: Subsystem) -> Result<usize> {
        self.entries
            .iter()
            .position(|&(o, _)| o == s)
            .ok_or(QedError::UnknownSubsystem(s))
    }

    pub fn dim_of(&self, s: Subsystem) -> Result<usize> {
        Ok(self.entries[self.position(s)?].1)
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.entries.len()];
        for k in (0..self.entries.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.entries[k + 1].1;
        }
        strides
    }

    /// Local levels of every subsystem for a flat basis index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.entries.len()];
        for k in (0..self.entries.len()).rev() {
            let d = self.entries[k].1;
            out[k] = index % d;
            index /= d;
        }
        out
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(self.strides())
            .map(|(&digit, stride)| digit * stride)
            .sum()
    }

    /// Flat index of the basis state with the given levels, all others at 0.
    pub fn index_of(&self, levels: &[(Subsystem, usize)]) -> Result<usize> {
        let mut digits = vec![0; self.entries.len()];
        for &(s, level) in levels {
            let pos = self.position(s)?;
            let dim = self.entries[pos].1;
            if level >= dim {
                return Err(QedError::DimensionMismatch {
                    expected: dim,
                    actual: level + 1,
                });
            }
            digits[pos] = level;
        }
        Ok(self.index(&digits))
    }
}

impl Default for SubsystemLayout {
    fn default() -> Self {
        Self::with_resonator_truncation(2).expect("default layout is valid")
    }
}

/// A possibly unnormalized pure state of the composite system.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeState {
    layout: SubsystemLayout,
    amplitudes: DVector<C64>,
}

impl CompositeState {
    pub fn new(layout: SubsystemLayout, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(QedError::DimensionMismatch {
                expected: layout.total_dim(),
                actual: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm_squared();
        if !(norm <= 1.0 + NORM_EPS) {
            return Err(QedError::OutOfRange {
                name: "squared norm",
                value: norm,
                min: 0.0,
                max: 1.0 + NORM_EPS,
            });
        }
        Ok(Self { layout, amplitudes })
    }

    pub fn ground(layout: SubsystemLayout) -> Self {
        let mut amplitudes = DVector::from_element(layout.total_dim(), ZERO);
        amplitudes[0] = ONE;
        Self { layout, amplitudes }
    }

    pub fn basis(layout: SubsystemLayout, levels: &[(Subsystem, usize)]) -> Result<Self> {
        let idx = layout.index_of(levels)?;
        let mut amplitudes = DVector::from_element(layout.total_dim(), ZERO);
        amplitudes[idx] = ONE;
        Ok(Self { layout, amplitudes })
    }

    /// `(alpha|g> + beta|e>)` on `target`, every other subsystem in its ground state.
    pub fn qubit_superposition(
        layout: SubsystemLayout,
        target: Subsystem,
        alpha: C64,
        beta: C64,
    ) -> Result<Self> {
        let g = layout.index_of(&[])?;
        let e = layout.index_of(&[(target, 1)])?;
        let mut amplitudes = DVector::from_element(layout.total_dim(), ZERO);
        amplitudes[g] = alpha;
        amplitudes[e] += beta;
        Self::new(layout, amplitudes)
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, levels: &[(Subsystem, usize)]) -> Result<C64> {
        Ok(self.amplitudes[self.layout.index_of(levels)?])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub(crate) fn with_amplitudes(&self, amplitudes: DVector<C64>) -> Self {
        Self {
            layout: self.layout.clone(),
            amplitudes,
        }
    }
}

/// Square matrix acting on an ordered list of subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    targets: Vec<Subsystem>,
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn new(targets: Vec<Subsystem>, matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(QedError::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        for (i, &s) in targets.iter().enumerate() {
            if targets[..i].contains(&s) {
                return Err(QedError::DuplicateSubsystem(s));
            }
        }
        Ok(Self { targets, matrix })
    }

    pub fn identity(layout: &SubsystemLayout) -> Self {
        Self {
            targets: layout.subsystems().collect(),
            matrix: DMatrix::identity(layout.total_dim(), layout.total_dim()),
        }
    }

    pub fn targets(&self) -> &[Subsystem] {
        &self.targets
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// `max |U^dagger U - I|` over all entries.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.matrix.nrows();
        let residual = self.matrix.adjoint() * &self.matrix - DMatrix::<C64>::identity(n, n);
        residual.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() < tol
    }

    /// `self * other`; both must act on the same ordered targets.
    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        if self.targets != other.targets {
            return Err(QedError::LayoutMismatch);
        }
        Ok(Operator {
            targets: self.targets.clone(),
            matrix: &self.matrix * &other.matrix,
        })
    }

    fn acts_on_full(&self, layout: &SubsystemLayout) -> bool {
        self.targets.len() == layout.entries().len()
            && self.targets.iter().copied().eq(layout.subsystems())
    }
}

/// Tensor `op` with the identity on every subsystem it does not target.
pub fn embed(op: &Operator, layout: &SubsystemLayout) -> Result<Operator> {
    let positions = op
        .targets
        .iter()
        .map(|&s| layout.position(s))
        .collect::<Result<Vec<_>>>()?;
    let local_dims: Vec<usize> = positions.iter().map(|&p| layout.entries()[p].1).collect();
    let local_dim: usize = local_dims.iter().product();
    if local_dim != op.matrix.nrows() {
        return Err(QedError::DimensionMismatch {
            expected: local_dim,
            actual: op.matrix.nrows(),
        });
    }

    let local_index = |digits: &[usize]| {
        positions
            .iter()
            .zip(&local_dims)
            .fold(0, |acc, (&p, &d)| acc * d + digits[p])
    };

    let n = layout.total_dim();
    let all_digits: Vec<Vec<usize>> = (0..n).map(|i| layout.digits(i)).collect();
    let local_of: Vec<usize> = all_digits.iter().map(|d| local_index(d)).collect();
    let mut full = DMatrix::from_element(n, n, ZERO);
    for i in 0..n {
        for j in 0..n {
            let spectators_match = (0..layout.entries().len())
                .filter(|k| !positions.contains(k))
                .all(|k| all_digits[i][k] == all_digits[j][k]);
            if spectators_match {
                full[(i, j)] = op.matrix[(local_of[i], local_of[j])];
            }
        }
    }
    Ok(Operator {
        targets: layout.subsystems().collect(),
        matrix: full,
    })
}

/// Apply `op` (local or full-space) to `state`.
pub fn apply(state: &CompositeState, op: &Operator) -> Result<CompositeState> {
    let full;
    let matrix = if op.acts_on_full(&state.layout) {
        if op.matrix.nrows() != state.layout.total_dim() {
            return Err(QedError::LayoutMismatch);
        }
        &op.matrix
    } else {
        full = embed(op, &state.layout).map_err(|e| match e {
            QedError::UnknownSubsystem(_) => QedError::LayoutMismatch,
            other => other,
        })?;
        &full.matrix
    };
    Ok(state.with_amplitudes(matrix * &state.amplitudes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BranchEvent {
    /// Amplitude damping on `subsystem` left the excitation in place.
    NoJump { subsystem: Subsystem, step: u8 },
    /// Amplitude damping on `subsystem` relaxed the excitation.
    Jump { subsystem: Subsystem, step: u8 },
    /// Projective measurement of `subsystem` returned `|g>`.
    Null { subsystem: Subsystem },
    /// Projective measurement of `subsystem` returned `|e>`.
    Detected { subsystem: Subsystem },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub state: CompositeState,
    pub events: Vec<BranchEvent>,
    pub selected: bool,
}

impl Branch {
    pub fn weight(&self) -> f64 {
        self.state.norm_sqr()
    }

    pub fn has_jump(&self) -> bool {
        self.events
            .iter()
            .any(|e| matches!(e, BranchEvent::Jump { .. }))
    }
}

/// Weighted collection of unnormalized pure-state branches. Squared norms are
/// branch probabilities; rejected branches are kept for bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchEnsemble {
    branches: Vec<Branch>,
}

impl BranchEnsemble {
    pub fn from_state(state: CompositeState) -> Self {
        Self {
            branches: vec![Branch {
                state,
                events: Vec::new(),
                selected: true,
            }],
        }
    }

    pub fn from_branches(branches: Vec<Branch>) -> Result<Self> {
        let total: f64 = branches.iter().map(Branch::weight).sum();
        if total > 1.0 + NORM_EPS {
            return Err(QedError::OutOfRange {
                name: "ensemble weight",
                value: total,
                min: 0.0,
                max: 1.0 + NORM_EPS,
            });
        }
        Ok(Self { branches })
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn selected(&self) -> impl Iterator<Item = &Branch> {
        self.branches.iter().filter(|b| b.selected)
    }

    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(Branch::weight).sum()
    }

    pub fn selected_weight(&self) -> f64 {
        self.selected().map(Branch::weight).sum()
    }

    pub fn rejected_weight(&self) -> f64 {
        self.total_weight() - self.selected_weight()
    }

    /// Apply the same operator to every branch.
    pub fn apply(&self, op: &Operator) -> Result<Self> {
        let full = match self.branches.first() {
            Some(b) if !op.acts_on_full(&b.state.layout) => {
                embed(op, &b.state.layout).map_err(|e| match e {
                    QedError::UnknownSubsystem(_) => QedError::LayoutMismatch,
                    other => other,
                })?
            }
            _ => op.clone(),
        };
        let branches = self
            .branches
            .iter()
            .map(|b| {
                Ok(Branch {
                    state: apply(&b.state, &full)?,
                    events: b.events.clone(),
                    selected: b.selected,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { branches })
    }

    pub(crate) fn from_raw(branches: Vec<Branch>) -> Self {
        Self { branches }
    }

    /// Unnormalized state of `target` conditioned on the given levels of
    /// other subsystems, summed over all branches (selected or not).
    pub fn conditional_qubit_state(
        &self,
        target: Subsystem,
        condition: &[(Subsystem, usize)],
    ) -> Result<QubitDensityMatrix> {
        let mut m = Matrix2::zeros();
        for b in &self.branches {
            m += partial_trace_qubit(&b.state, target, condition)?;
        }
        Ok(QubitDensityMatrix::from_matrix_unchecked(m))
    }
}

fn partial_trace_qubit(
    state: &CompositeState,
    target: Subsystem,
    condition: &[(Subsystem, usize)],
) -> Result<Matrix2<C64>> {
    let layout = state.layout();
    let pos = layout.position(target)?;
    if layout.entries()[pos].1 != 2 {
        return Err(QedError::InvalidParameter {
            name: "target",
            reason: format!("{target} is not a two-level subsystem"),
        });
    }
    let cond = condition
        .iter()
        .map(|&(s, level)| Ok((layout.position(s)?, level)))
        .collect::<Result<Vec<_>>>()?;

    let amps = state.amplitudes();
    let mut m = Matrix2::zeros();
    for i in 0..layout.total_dim() {
        let di = layout.digits(i);
        if di[pos] != 0 || cond.iter().any(|&(p, l)| di[p] != l) {
            continue;
        }
        let mut de = di.clone();
        de[pos] = 1;
        let pair = [amps[i], amps[layout.index(&de)]];
        for a in 0..2 {
            for b in 0..2 {
                m[(a, b)] += pair[a] * pair[b].conj();
            }
        }
    }
    Ok(m)
}

/// `sum over selected branches of Tr_other |Psi><Psi|`, left unnormalized.
pub fn reduce_to_qubit(ensemble: &BranchEnsemble, target: Subsystem) -> Result<QubitDensityMatrix> {
    let mut any = false;
    let mut m = Matrix2::zeros();
    for b in ensemble.selected() {
        if b.weight() > 0.0 {
            any = true;
        }
        m += partial_trace_qubit(&b.state, target, &[])?;
    }
    if !any {
        return Err(QedError::EmptySelection);
    }
    Ok(QubitDensityMatrix::from_matrix_unchecked(m))
}

/// 2x2 density matrix in the `(|g>, |e>)` basis, normalized or not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitDensityMatrix {
    m: Matrix2<C64>,
}

impl QubitDensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-12;

    /// Validated constructor: Hermitian, positive semidefinite, trace in (0, 1 + eps].
    pub fn new(m: Matrix2<C64>) -> Result<Self> {
        let rho = Self { m };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix2<C64>) -> Self {
        Self { m }
    }

    pub fn pure(alpha: C64, beta: C64) -> Self {
        let v = [alpha, beta];
        Self {
            m: Matrix2::from_fn(|i, j| v[i] * v[j].conj()),
        }
    }

    /// `(s I + x X + y Y + z Z) / 2`; `s` is the trace.
    pub fn from_bloch(trace: f64, bloch: [f64; 3]) -> Self {
        let [x, y, z] = bloch;
        Self {
            m: Matrix2::new(
                C64::new((trace + z) / 2.0, 0.0),
                C64::new(x / 2.0, -y / 2.0),
                C64::new(x / 2.0, y / 2.0),
                C64::new((trace - z) / 2.0, 0.0),
            ),
        }
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.m
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn trace(&self) -> f64 {
        (self.m[(0, 0)] + self.m[(1, 1)]).re
    }

    /// Unnormalized Bloch vector `(Tr rho X, Tr rho Y, Tr rho Z)`.
    pub fn bloch(&self) -> [f64; 3] {
        let rho_ge = self.m[(0, 1)];
        [
            2.0 * rho_ge.re,
            -2.0 * rho_ge.im,
            (self.m[(0, 0)] - self.m[(1, 1)]).re,
        ]
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if !(t > 0.0) {
            return Err(QedError::EmptySelection);
        }
        Ok(Self { m: self.m / C64::new(t, 0.0) })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            m: self.m * C64::new(factor, 0.0),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let a = self.m[(0, 0)].re;
        let d = self.m[(1, 1)].re;
        let b = self.m[(0, 1)].norm();
        (a + d) / 2.0 - (((a - d) / 2.0).powi(2) + b * b).sqrt()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.m - self.m.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.m - other.m).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let tol = Self::HERMITIAN_TOL;
        if self.hermiticity_error() > tol {
            return Err(QedError::InvalidParameter {
                name: "density matrix",
                reason: "not Hermitian".into(),
            });
        }
        if self.min_eigenvalue() < -tol {
            return Err(QedError::InvalidParameter {
                name: "density matrix",
                reason: "negative eigenvalue".into(),
            });
        }
        let t = self.trace();
        if !(t > 0.0 && t <= 1.0 + NORM_EPS) {
            return Err(QedError::OutOfRange {
                name: "trace",
                value: t,
                min: 0.0,
                max: 1.0 + NORM_EPS,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    fn x_on(s: Subsystem) -> Operator {
        Operator::new(vec![s], pauli_x()).unwrap()
    }

    #[test]
    fn layout_defaults() {
        let layout = SubsystemLayout::default();
        assert_eq!(layout.total_dim(), 32);
        assert_eq!(layout.index_of(&[(Subsystem::Q1, 1)]).unwrap(), 16);
        assert_eq!(layout.index_of(&[(Subsystem::M1, 1)]).unwrap(), 1);
        assert_eq!(layout.digits(16), vec![1, 0, 0, 0, 0]);
        let bigger = SubsystemLayout::with_resonator_truncation(3).unwrap();
        assert_eq!(bigger.total_dim(), 72);
    }

    #[test]
    fn layout_rejects_duplicates_and_bad_dims() {
        let dup = SubsystemLayout::new(vec![(Subsystem::Q1, 2), (Subsystem::Q1, 2)]);
        assert_eq!(dup, Err(QedError::DuplicateSubsystem(Subsystem::Q1)));
        assert!(SubsystemLayout::new(vec![(Subsystem::Q2, 3)]).is_err());
        assert!(SubsystemLayout::with_resonator_truncation(1).is_err());
    }

    #[test]
    fn embed_identity_is_identity() {
        let layout = SubsystemLayout::default();
        let id = Operator::new(vec![Subsystem::Q1], DMatrix::identity(2, 2)).unwrap();
        let full = embed(&id, &layout).unwrap();
        assert_eq!(full.matrix(), &DMatrix::<C64>::identity(32, 32));
    }

    #[test]
    fn embed_x_flips_q1() {
        let layout = SubsystemLayout::default();
        let ground = CompositeState::ground(layout.clone());
        let flipped = apply(&ground, &embed(&x_on(Subsystem::Q1), &layout).unwrap()).unwrap();
        let expected = CompositeState::basis(layout, &[(Subsystem::Q1, 1)]).unwrap();
        assert_eq!(flipped, expected);
    }

    #[test]
    fn disjoint_embeddings_commute() {
        let layout = SubsystemLayout::default();
        let x1 = embed(&x_on(Subsystem::Q1), &layout).unwrap();
        let x2 = embed(&x_on(Subsystem::Q2), &layout).unwrap();
        assert_eq!(x1.compose(&x2).unwrap(), x2.compose(&x1).unwrap());
    }

    #[test]
    fn embed_respects_target_order() {
        // CNOT-like permutation on (M1, Q1): control M1, flip Q1.
        let layout = SubsystemLayout::default();
        let mut m = DMatrix::from_element(4, 4, ZERO);
        m[(0, 0)] = ONE;
        m[(1, 1)] = ONE;
        m[(2, 3)] = ONE;
        m[(3, 2)] = ONE;
        let op = Operator::new(vec![Subsystem::M1, Subsystem::Q1], m).unwrap();
        let s = CompositeState::basis(layout.clone(), &[(Subsystem::M1, 1)]).unwrap();
        let out = apply(&s, &op).unwrap();
        let expected =
            CompositeState::basis(layout, &[(Subsystem::M1, 1), (Subsystem::Q1, 1)]).unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn embed_errors() {
        let layout = SubsystemLayout::new(vec![(Subsystem::Q1, 2), (Subsystem::Q2, 2)]).unwrap();
        assert_eq!(
            embed(&x_on(Subsystem::M1), &layout),
            Err(QedError::UnknownSubsystem(Subsystem::M1))
        );
        let wrong = Operator::new(vec![Subsystem::Q1], DMatrix::identity(3, 3)).unwrap();
        assert!(matches!(
            embed(&wrong, &layout),
            Err(QedError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn apply_exchanges_amplitudes_and_is_involutive() {
        let layout = SubsystemLayout::default();
        let alpha = C64::new(0.6, 0.0);
        let beta = C64::new(0.0, 0.8);
        let s = CompositeState::qubit_superposition(layout, Subsystem::Q1, alpha, beta).unwrap();
        let x = x_on(Subsystem::Q1);
        let once = apply(&s, &x).unwrap();
        assert_eq!(once.amplitude(&[]).unwrap(), beta);
        assert_eq!(once.amplitude(&[(Subsystem::Q1, 1)]).unwrap(), alpha);
        assert_eq!(apply(&once, &x).unwrap(), s);
        assert_eq!(apply(&s, &Operator::identity(s.layout())).unwrap(), s);
    }

    #[test]
    fn apply_rejects_foreign_layout() {
        let small = SubsystemLayout::new(vec![(Subsystem::Q1, 2)]).unwrap();
        let s = CompositeState::ground(small);
        let full = Operator::identity(&SubsystemLayout::default());
        assert_eq!(apply(&s, &full), Err(QedError::LayoutMismatch));
    }

    #[test]
    fn state_rejects_norm_above_one() {
        let layout = SubsystemLayout::default();
        let amps = DVector::from_element(32, C64::new(0.5, 0.0));
        assert!(CompositeState::new(layout, amps).is_err());
    }

    #[test]
    fn reduce_single_branch() {
        let layout = SubsystemLayout::default();
        let alpha = C64::new(0.6, 0.0);
        let beta = C64::new(0.0, 0.8);
        let s = CompositeState::qubit_superposition(layout, Subsystem::Q1, alpha, beta).unwrap();
        let rho = reduce_to_qubit(&BranchEnsemble::from_state(s), Subsystem::Q1).unwrap();
        assert!((rho.get(0, 0).re - 0.36).abs() < 1e-15);
        assert!((rho.get(1, 1).re - 0.64).abs() < 1e-15);
        assert!((rho.get(0, 1) - alpha * beta.conj()).norm() < 1e-15);
        rho.validate().unwrap();
    }

    #[test]
    fn reduce_classical_mixture() {
        let layout = SubsystemLayout::default();
        let g = CompositeState::ground(layout.clone());
        let e = CompositeState::basis(layout, &[(Subsystem::Q1, 1)]).unwrap();
        let branch = |s: &CompositeState, w: f64| Branch {
            state: s.with_amplitudes(s.amplitudes() * C64::new(w.sqrt(), 0.0)),
            events: vec![],
            selected: true,
        };
        let ens = BranchEnsemble::from_branches(vec![branch(&g, 0.3), branch(&e, 0.7)]).unwrap();
        let rho = reduce_to_qubit(&ens, Subsystem::Q1).unwrap();
        assert!((rho.get(0, 0).re - 0.3).abs() < 1e-15);
        assert!((rho.get(1, 1).re - 0.7).abs() < 1e-15);
        assert_eq!(rho.get(0, 1), ZERO);
        assert!((rho.trace() - ens.selected_weight()).abs() < 1e-12);
    }

    #[test]
    fn reduce_traces_out_entangled_partner() {
        let layout = SubsystemLayout::default();
        let mut amps = DVector::from_element(32, ZERO);
        let h = C64::new(0.5f64.sqrt(), 0.0);
        amps[layout.index_of(&[]).unwrap()] = h;
        amps[layout
            .index_of(&[(Subsystem::Q1, 1), (Subsystem::Q2, 1)])
            .unwrap()] = h;
        let s = CompositeState::new(layout, amps).unwrap();
        let rho = reduce_to_qubit(&BranchEnsemble::from_state(s), Subsystem::Q1).unwrap();
        assert!((rho.get(0, 0).re - 0.5).abs() < 1e-15);
        assert!(rho.get(0, 1).norm() < 1e-15);
    }

    #[test]
    fn reduce_empty_selection_errors() {
        let layout = SubsystemLayout::default();
        let ens = BranchEnsemble::from_raw(vec![Branch {
            state: CompositeState::ground(layout),
            events: vec![],
            selected: false,
        }]);
        assert_eq!(reduce_to_qubit(&ens, Subsystem::Q1), Err(QedError::EmptySelection));
    }

    #[test]
    fn bloch_roundtrip() {
        let rho = QubitDensityMatrix::from_bloch(0.4, [0.1, -0.2, 0.3]);
        let b = rho.bloch();
        assert!((b[0] - 0.1).abs() < 1e-15 && (b[1] + 0.2).abs() < 1e-15);
        assert!((b[2] - 0.3).abs() < 1e-15 && (rho.trace() - 0.4).abs() < 1e-15);
        let plus = QubitDensityMatrix::pure(C64::new(0.5f64.sqrt(), 0.0), C64::new(0.5f64.sqrt(), 0.0));
        assert!((plus.bloch()[0] - 1.0).abs() < 1e-15);
    }
}
