//! Ground-truth density matrices.
//!
//! Computational basis state `|b_{n−1} … b_0⟩` is row `Σ b_k 2^k`, so the
//! ket string reads most significant bit first, matching the Kronecker order
//! of Pauli label strings.

use std::fmt;

use faer::{c64, Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::pauli::check_qubits;

/// A `d × d` complex matrix tagged with its qubit count.
///
/// Construction only checks the shape; [`validate`] reports whether the
/// Hermitian, positive-semidefinite and unit-trace conditions hold.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    entries: Mat<c64>,
}

impl DensityMatrix {
    pub fn from_matrix(n_qubits: usize, entries: Mat<c64>) -> Result<Self> {
        check_qubits(n_qubits)?;
        let d = 1usize << n_qubits;
        if entries.nrows() != d {
            return Err(Error::dims(d, entries.nrows()));
        }
        if entries.ncols() != d {
            return Err(Error::dims(d, entries.ncols()));
        }
        Ok(DensityMatrix { n_qubits, entries })
    }

    /// `I/d`.
    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let d = 1usize << n_qubits;
        Ok(DensityMatrix {
            n_qubits,
            entries: linalg::scaled_identity(d, 1.0 / d as f64),
        })
    }

    /// `|ψ⟩⟨ψ|` after normalizing `ψ`; the length must be a power of two.
    pub fn from_pure(psi: &[c64]) -> Result<Self> {
        let d = psi.len();
        if d < 2 || !d.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "state vector length {d} is not a power of two"
            )));
        }
        let n_qubits = d.trailing_zeros() as usize;
        check_qubits(n_qubits)?;
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DivisionByZero("state vector has zero norm"));
        }
        let entries = Mat::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        Ok(DensityMatrix { n_qubits, entries })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn as_ref(&self) -> MatRef<'_, c64> {
        self.entries.as_ref()
    }

    pub fn matrix(&self) -> &Mat<c64> {
        &self.entries
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.entries
    }

    pub fn trace(&self) -> c64 {
        linalg::trace(self.as_ref())
    }
}

/// Normalized Wishart state `ΨΨ†/Tr(ΨΨ†)` with `Ψ` a `d × r` matrix of
/// i.i.d. standard complex Gaussians.
pub fn wishart_state(n_qubits: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    check_qubits(n_qubits)?;
    let d = 1usize << n_qubits;
    if rank == 0 || rank > d {
        return Err(Error::InvalidRank { rank, dim: d });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let psi = Mat::from_fn(d, rank, |_, _| c64::new(gauss(), gauss()));
    let mut rho = &psi * psi.adjoint();
    linalg::make_hermitian(&mut rho);
    let tr = linalg::trace(rho.as_ref()).re;
    for j in 0..d {
        for i in 0..d {
            rho[(i, j)] /= tr;
        }
    }
    DensityMatrix::from_matrix(n_qubits, rho)
}

/// Amplitudes of `|W(φ)⟩`: `e^{iφ_k}/√n` on basis state `2^k`, with `φ_0 = 0`.
pub fn w_state_vector(n_qubits: usize, phases: &[f64]) -> Result<Vec<c64>> {
    if n_qubits < 2 {
        return Err(Error::InvalidParameter("the W state needs at least two qubits".into()));
    }
    check_qubits(n_qubits)?;
    if phases.len() != n_qubits - 1 {
        return Err(Error::dims(n_qubits - 1, phases.len()));
    }
    let d = 1usize << n_qubits;
    let amp = 1.0 / (n_qubits as f64).sqrt();
    let mut psi = vec![c64::new(0.0, 0.0); d];
    psi[1] = c64::new(amp, 0.0);
    for (k, &phi) in phases.iter().enumerate() {
        psi[1 << (k + 1)] = c64::from_polar(amp, phi);
    }
    Ok(psi)
}

pub fn w_state(n_qubits: usize, phases: &[f64]) -> Result<DensityMatrix> {
    DensityMatrix::from_pure(&w_state_vector(n_qubits, phases)?)
}

/// Projector onto `(|0…0⟩ + |1…1⟩)/√2`.
pub fn ghz_state(n_qubits: usize) -> Result<DensityMatrix> {
    if n_qubits < 2 {
        return Err(Error::InvalidParameter("the GHZ state needs at least two qubits".into()));
    }
    check_qubits(n_qubits)?;
    let d = 1usize << n_qubits;
    let mut psi = vec![c64::new(0.0, 0.0); d];
    psi[0] = c64::new(1.0, 0.0);
    psi[d - 1] = c64::new(1.0, 0.0);
    DensityMatrix::from_pure(&psi)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Violation {
    NonFinite,
    /// `‖ρ − ρ†‖_F`.
    NotHermitian(f64),
    NotPositive { min_eigenvalue: f64 },
    TraceNotOne { trace: c64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite => write!(f, "matrix contains non-finite entries"),
            Violation::NotHermitian(dev) => write!(f, "not Hermitian (‖ρ−ρ†‖_F = {dev:e})"),
            Violation::NotPositive { min_eigenvalue } => {
                write!(f, "not positive semidefinite (min eigenvalue {min_eigenvalue:e})")
            }
            Violation::TraceNotOne { trace } => write!(f, "trace is {} + {}i, not 1", trace.re, trace.im),
        }
    }
}

/// Every density-matrix condition that `rho` violates by more than `tol`.
pub fn validate(rho: &DensityMatrix, tol: f64) -> Vec<Violation> {
    let m = rho.as_ref();
    if !linalg::all_finite(m) {
        return vec![Violation::NonFinite];
    }
    let mut out = Vec::new();
    let d = rho.dim();
    let mut asym = 0.0;
    for j in 0..d {
        for i in 0..d {
            asym += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
        }
    }
    let asym = asym.sqrt();
    if asym > tol {
        out.push(Violation::NotHermitian(asym));
    }
    match linalg::hermitian_eigenvalues(linalg::hermitian_part(m).as_ref()) {
        Ok(values) => {
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            if min < -tol {
                out.push(Violation::NotPositive { min_eigenvalue: min });
            }
        }
        Err(_) => out.push(Violation::NonFinite),
    }
    let tr = rho.trace();
    if (tr - c64::new(1.0, 0.0)).norm() > tol {
        out.push(Violation::TraceNotOne { trace: tr });
    }
    out
}
