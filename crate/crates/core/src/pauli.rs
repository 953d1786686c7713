//! Pauli tensor-product operators and the matrix-free sampling operator.
//!
//! A Pauli string on `n` qubits is stored as its base-4 index. The label
//! string is written in Kronecker order: `"XZ"` is `X ⊗ Z`, its first label
//! acting on the most significant bit of the computational-basis index. The
//! index is the big-endian base-4 reading of the labels (`I=0, X=1, Y=2, Z=3`),
//! so base-4 digit `q` (the coefficient of `4^q`) is the label acting on
//! basis bit `q`.
//!
//! Every Pauli string is a phased permutation matrix: row `r` has its only
//! nonzero entry in column `r ^ x_mask`, with value
//! `(-i)^{#Y} · (-1)^{popcount(r & z_mask)}`. Nothing here materializes the
//! `M × d²` sampling matrix; [`SamplingPlan`] applies it and its adjoint in
//! `O(M·d)`.

use std::fmt;
use std::str::FromStr;

use faer::{c64, Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::linalg;
use crate::states::DensityMatrix;

/// Largest register handled anywhere in the crate (`d = 8192`).
pub const MAX_QUBITS: usize = 13;

/// Largest register for which [`empirical_rip`] runs dense trials.
pub const MAX_RIP_QUBITS: usize = 6;

pub(crate) fn check_qubits(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("at least one qubit is required".into()));
    }
    if n > MAX_QUBITS {
        return Err(Error::ResourceLimit(format!(
            "{n} qubits exceeds the supported maximum of {MAX_QUBITS}"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PauliLabel {
    I,
    X,
    Y,
    Z,
}

impl PauliLabel {
    pub fn digit(self) -> u64 {
        match self {
            PauliLabel::I => 0,
            PauliLabel::X => 1,
            PauliLabel::Y => 2,
            PauliLabel::Z => 3,
        }
    }

    pub fn from_digit(d: u64) -> Self {
        match d & 3 {
            0 => PauliLabel::I,
            1 => PauliLabel::X,
            2 => PauliLabel::Y,
            _ => PauliLabel::Z,
        }
    }

    /// The 2×2 matrix `σ_0..σ_3`.
    pub fn matrix(self) -> [[c64; 2]; 2] {
        let z = c64::new(0.0, 0.0);
        let one = c64::new(1.0, 0.0);
        let i = c64::new(0.0, 1.0);
        match self {
            PauliLabel::I => [[one, z], [z, one]],
            PauliLabel::X => [[z, one], [one, z]],
            PauliLabel::Y => [[z, -i], [i, z]],
            PauliLabel::Z => [[one, z], [z, -one]],
        }
    }
}

impl fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            PauliLabel::I => 'I',
            PauliLabel::X => 'X',
            PauliLabel::Y => 'Y',
            PauliLabel::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

/// An `n`-qubit Pauli tensor product, identified by its base-4 index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    index: u64,
    x_mask: usize,
    z_mask: usize,
    y_count: u32,
}

impl PauliString {
    pub fn from_index(n_qubits: usize, index: u64) -> Result<Self> {
        check_qubits(n_qubits)?;
        if index >= 1u64 << (2 * n_qubits) {
            return Err(Error::InvalidParameter(format!(
                "Pauli index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut x_mask = 0usize;
        let mut z_mask = 0usize;
        let mut y_count = 0u32;
        for bit in 0..n_qubits {
            match PauliLabel::from_digit(index >> (2 * bit)) {
                PauliLabel::I => {}
                PauliLabel::X => x_mask |= 1 << bit,
                PauliLabel::Y => {
                    x_mask |= 1 << bit;
                    z_mask |= 1 << bit;
                    y_count += 1;
                }
                PauliLabel::Z => z_mask |= 1 << bit,
            }
        }
        Ok(PauliString {
            n_qubits,
            index,
            x_mask,
            z_mask,
            y_count,
        })
    }

    pub fn from_labels(labels: &[PauliLabel]) -> Result<Self> {
        let index = labels.iter().fold(0u64, |acc, l| acc * 4 + l.digit());
        Self::from_index(labels.len(), index)
    }

    pub fn identity(n_qubits: usize) -> Result<Self> {
        Self::from_index(n_qubits, 0)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn is_identity(&self) -> bool {
        self.index == 0
    }

    /// Labels in Kronecker order (first label on the most significant bit).
    pub fn labels(&self) -> Vec<PauliLabel> {
        (0..self.n_qubits)
            .rev()
            .map(|bit| PauliLabel::from_digit(self.index >> (2 * bit)))
            .collect()
    }

    /// Column of the nonzero entry in row `row`.
    #[inline]
    pub fn column_of(&self, row: usize) -> usize {
        row ^ self.x_mask
    }

    /// `(-i)^{#Y}`, the row-independent part of every entry.
    #[inline]
    fn global_phase(&self) -> c64 {
        match self.y_count % 4 {
            0 => c64::new(1.0, 0.0),
            1 => c64::new(0.0, -1.0),
            2 => c64::new(-1.0, 0.0),
            _ => c64::new(0.0, 1.0),
        }
    }

    #[inline]
    fn row_sign(&self, row: usize) -> f64 {
        if (row & self.z_mask).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// Value of the nonzero entry in row `row`.
    #[inline]
    pub fn phase_of(&self, row: usize) -> c64 {
        self.global_phase() * self.row_sign(row)
    }

    /// `Tr(ρ P)` for a `d × d` matrix `ρ`, in `O(d)`.
    pub fn trace_with(&self, rho: MatRef<'_, c64>) -> Result<c64> {
        let d = self.dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::dims(d, rho.nrows()));
        }
        Ok(self.trace_unchecked(rho))
    }

    // Tr(ρP) = Σ_r ρ[c_r, r] · P[r, c_r]
    #[inline]
    fn trace_unchecked(&self, rho: MatRef<'_, c64>) -> c64 {
        let mut acc = c64::new(0.0, 0.0);
        for r in 0..self.dim() {
            acc += rho[(r ^ self.x_mask, r)] * self.row_sign(r);
        }
        acc * self.global_phase()
    }

    /// Sparse realization (one `(column, phase)` pair per row).
    pub fn to_sparse(&self) -> SparsePauli {
        let d = self.dim();
        SparsePauli {
            columns: (0..d).map(|r| self.column_of(r)).collect(),
            phases: (0..d).map(|r| self.phase_of(r)).collect(),
        }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.labels() {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let labels = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(PauliLabel::I),
                'X' => Ok(PauliLabel::X),
                'Y' => Ok(PauliLabel::Y),
                'Z' => Ok(PauliLabel::Z),
                other => Err(Error::Parse(format!("unknown Pauli label {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        PauliString::from_labels(&labels)
    }
}

/// A Pauli string as a phased permutation: row `r` holds `phases[r]` at
/// column `columns[r]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsePauli {
    pub columns: Vec<usize>,
    pub phases: Vec<c64>,
}

impl SparsePauli {
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let d = self.dim();
        let mut m = Mat::zeros(d, d);
        for (r, (&c, &p)) in self.columns.iter().zip(&self.phases).enumerate() {
            m[(r, c)] = p;
        }
        m
    }
}

/// Sparse realization of `p`.
pub fn pauli_dense(p: &PauliString) -> Result<SparsePauli> {
    check_qubits(p.n_qubits())?;
    Ok(p.to_sparse())
}

/// `Tr(ρ P)`; the imaginary part vanishes for Hermitian inputs and is dropped.
pub fn expectation(rho: &DensityMatrix, p: &PauliString) -> Result<f64> {
    if rho.n_qubits() != p.n_qubits() {
        return Err(Error::dims(p.n_qubits(), rho.n_qubits()));
    }
    let t = p.trace_with(rho.as_ref())?;
    debug_assert!(
        t.im.abs() <= 1e-10 * p.dim() as f64,
        "imaginary expectation {} for {}",
        t.im,
        p
    );
    Ok(t.re)
}

/// A linear map from `d × d` complex matrices to `R^M` together with its adjoint.
///
/// [`SamplingPlan`] is the production implementation; tests plug in a
/// materialized dense matrix to check the matrix-free path end to end.
pub trait SamplingOperator: Sync {
    fn n_qubits(&self) -> usize;

    /// Number of measurements `M`.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dim(&self) -> usize {
        1 << self.n_qubits()
    }

    /// `A·vec(ρ)`.
    fn apply(&self, rho: MatRef<'_, c64>) -> Result<Vec<f64>>;

    /// `mat(A* v)`.
    fn adjoint(&self, v: &[f64]) -> Result<Mat<c64>>;
}

/// The `M` operators selected for measurement and their common scale.
#[derive(Clone, Debug)]
pub struct SamplingPlan {
    n_qubits: usize,
    operators: Vec<PauliString>,
    normalization: f64,
    seed: Option<u64>,
    execution: Execution,
}

impl PartialEq for SamplingPlan {
    fn eq(&self, other: &Self) -> bool {
        self.n_qubits == other.n_qubits
            && self.normalization == other.normalization
            && self.operators == other.operators
    }
}

impl SamplingPlan {
    /// Builds a plan from explicit indices, e.g. when ingesting measurement files.
    pub fn new(n_qubits: usize, indices: &[u64], normalization: f64) -> Result<Self> {
        check_qubits(n_qubits)?;
        if !(normalization.is_finite() && normalization > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "normalization must be positive, got {normalization}"
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(indices.len());
        let operators = indices
            .iter()
            .map(|&i| {
                if !seen.insert(i) {
                    return Err(Error::InvalidParameter(format!("duplicate Pauli index {i}")));
                }
                PauliString::from_index(n_qubits, i)
            })
            .collect::<Result<Vec<_>>>()?;
        if operators.is_empty() {
            return Err(Error::InvalidParameter("a plan needs at least one operator".into()));
        }
        Ok(SamplingPlan {
            n_qubits,
            operators,
            normalization,
            seed: None,
            execution: Execution::default(),
        })
    }

    /// The orthonormal scale `1/√d`: with it the full Pauli basis is an isometry.
    pub fn default_normalization(n_qubits: usize) -> f64 {
        1.0 / ((1usize << n_qubits) as f64).sqrt()
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn execution(&self) -> Execution {
        self.execution
    }

    pub fn operators(&self) -> &[PauliString] {
        &self.operators
    }

    pub fn indices(&self) -> Vec<u64> {
        self.operators.iter().map(|p| p.index()).collect()
    }

    /// `M / 4^n`.
    pub fn measurement_rate(&self) -> f64 {
        self.operators.len() as f64 / (1u64 << (2 * self.n_qubits)) as f64
    }
}

/// Draws `round(eta · 4^n)` distinct operator indices uniformly at random.
pub fn draw_plan(n_qubits: usize, eta: f64, seed: u64) -> Result<SamplingPlan> {
    check_qubits(n_qubits)?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidRate(eta));
    }
    let total = 1usize << (2 * n_qubits);
    let m = (eta * total as f64).round() as usize;
    if m == 0 {
        return Err(Error::InvalidRate(eta));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices: Vec<u64> = rand::seq::index::sample(&mut rng, total, m)
        .into_iter()
        .map(|i| i as u64)
        .collect();
    let mut plan = SamplingPlan::new(
        n_qubits,
        &indices,
        SamplingPlan::default_normalization(n_qubits),
    )?;
    plan.seed = Some(seed);
    Ok(plan)
}

impl SamplingOperator for SamplingPlan {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn len(&self) -> usize {
        self.operators.len()
    }

    fn apply(&self, rho: MatRef<'_, c64>) -> Result<Vec<f64>> {
        apply_a(self, rho)
    }

    fn adjoint(&self, v: &[f64]) -> Result<Mat<c64>> {
        apply_a_adjoint(self, v)
    }
}

/// Component `i` is `normalization · Re Tr(ρ ω_i)`.
pub fn apply_a(plan: &SamplingPlan, rho: MatRef<'_, c64>) -> Result<Vec<f64>> {
    let d = 1usize << plan.n_qubits;
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::dims(d, rho.nrows()));
    }
    let scale = plan.normalization;
    Ok(exec::map_range(plan.execution, plan.operators.len(), |i| {
        scale * plan.operators[i].trace_unchecked(rho).re
    }))
}

/// `Σ_i v_i · normalization · ω_i†`, accumulated column by column.
pub fn apply_a_adjoint(plan: &SamplingPlan, v: &[f64]) -> Result<Mat<c64>> {
    if v.len() != plan.operators.len() {
        return Err(Error::dims(plan.operators.len(), v.len()));
    }
    let d = 1usize << plan.n_qubits;
    let scale = plan.normalization;
    let mut buf = vec![c64::new(0.0, 0.0); d * d];
    // ω† has conj(P[r, r^x]) at (r^x, r): column r receives one entry per operator
    exec::for_each_chunk_mut(plan.execution, &mut buf, d, |col, out| {
        for (p, &w) in plan.operators.iter().zip(v) {
            if w == 0.0 {
                continue;
            }
            out[p.column_of(col)] += p.phase_of(col).conj() * (w * scale);
        }
    });
    Ok(MatRef::from_column_major_slice(&buf, d, d).to_owned())
}

/// Spread of the sampling map over random low-rank Hermitian matrices.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RipBracket {
    /// Smallest observed `‖A(X)‖₂` over unit-Frobenius `X`.
    pub min: f64,
    /// Largest observed `‖A(X)‖₂` over unit-Frobenius `X`.
    pub max: f64,
}

impl RipBracket {
    /// `δ` such that `(1 − δ) ≤ ‖A(X)‖` held on every trial.
    pub fn delta_lower(&self) -> f64 {
        1.0 - self.min
    }

    /// `δ` such that `‖A(X)‖ ≤ (1 + δ)` held on every trial.
    pub fn delta_upper(&self) -> f64 {
        self.max - 1.0
    }

    pub fn contains_one(&self) -> bool {
        self.min <= 1.0 && 1.0 <= self.max
    }
}

/// Empirical rank-RIP bracket of `plan`.
///
/// Norms are reported for the rescaled map `√(4^n/M) / (normalization·√d) · A`,
/// whose expected squared norm on a fixed `X` is `‖X‖_F²`. For the full
/// basis under the default normalization the rescaling is the identity.
pub fn empirical_rip(plan: &SamplingPlan, rank: usize, trials: usize, seed: u64) -> Result<RipBracket> {
    let n = plan.n_qubits;
    if n > MAX_RIP_QUBITS {
        return Err(Error::ResourceLimit(format!(
            "empirical RIP runs dense trials and is limited to {MAX_RIP_QUBITS} qubits"
        )));
    }
    let d = 1usize << n;
    if rank == 0 || rank > d {
        return Err(Error::InvalidRank { rank, dim: d });
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let rescale = (plan.measurement_rate().recip()).sqrt() / (plan.normalization * (d as f64).sqrt());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bracket = RipBracket {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
    };
    for _ in 0..trials {
        let x = random_low_rank_hermitian(d, rank, &mut rng);
        let y = apply_a(plan, x.as_ref())?;
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt() * rescale;
        bracket.min = bracket.min.min(norm);
        bracket.max = bracket.max.max(norm);
    }
    Ok(bracket)
}

/// `B diag(g) B†` with complex Gaussian `B` (`d × rank`) and real Gaussian
/// `g`, scaled to unit Frobenius norm.
fn random_low_rank_hermitian(d: usize, rank: usize, rng: &mut ChaCha8Rng) -> Mat<c64> {
    let mut gauss = || -> f64 { StandardNormal.sample(&mut *rng) };
    let b = Mat::from_fn(d, rank, |_, _| c64::new(gauss(), gauss()));
    let g: Vec<f64> = (0..rank).map(|_| gauss()).collect();
    let mut x = linalg::reconstruct(b.as_ref(), &g);
    let norm = linalg::frobenius(x.as_ref());
    for j in 0..d {
        for i in 0..d {
            x[(i, j)] /= norm;
        }
    }
    x
}
