//! Reconstruction quality: Hilbert–Schmidt difference, fidelity, purity, rank.

use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg;
use crate::states::DensityMatrix;

/// Upper clamp applied to fidelities.
pub const FIDELITY_CEILING: f64 = 1.0 + 1e-8;

/// Eigenvalues below this fraction of the largest are treated as zero when
/// restricting to the support of a state.
const SUPPORT_CUTOFF: f64 = 1e-12;

/// `‖ρ̂ − ρ‖²_F / ‖ρ‖²_F`.
pub fn hs_difference(rho: &DensityMatrix, rho_hat: &DensityMatrix) -> Result<f64> {
    hs_difference_matrices(rho.as_ref(), rho_hat.as_ref())
}

pub fn hs_difference_matrices(rho: MatRef<'_, c64>, rho_hat: MatRef<'_, c64>) -> Result<f64> {
    if rho.nrows() != rho_hat.nrows() || rho.ncols() != rho_hat.ncols() {
        return Err(Error::dims(rho.nrows(), rho_hat.nrows()));
    }
    let denom = linalg::frobenius_sq(rho);
    if denom == 0.0 {
        return Err(Error::DivisionByZero("reference state has zero norm"));
    }
    let mut num = 0.0;
    for j in 0..rho.ncols() {
        for i in 0..rho.nrows() {
            num += (rho_hat[(i, j)] - rho[(i, j)]).norm_sqr();
        }
    }
    Ok(num / denom)
}

/// `1 − D(ρ, ρ̂)`.
pub fn accuracy(rho: &DensityMatrix, rho_hat: &DensityMatrix) -> Result<f64> {
    Ok(1.0 - hs_difference(rho, rho_hat)?)
}

/// `Tr √(√ρ ρ̂ √ρ)`, clamped to `[0, 1 + 1e-8]`.
///
/// `√ρ ρ̂ √ρ` shares its nonzero spectrum with `W^{1/2} V† ρ̂ V W^{1/2}`,
/// where `V W V†` is `ρ` restricted to its support, so only a `k × k`
/// eigenproblem is solved for a rank-`k` `ρ`.
pub fn fidelity(rho: &DensityMatrix, rho_hat: &DensityMatrix) -> Result<f64> {
    if rho.dim() != rho_hat.dim() {
        return Err(Error::dims(rho.dim(), rho_hat.dim()));
    }
    let spec = linalg::hermitian_eigen(linalg::hermitian_part(rho.as_ref()).as_ref())?;
    let top = spec.values.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return Ok(0.0);
    }
    let support: Vec<usize> = (0..spec.values.len())
        .filter(|&i| spec.values[i] > SUPPORT_CUTOFF * top)
        .collect();
    let d = rho.dim();
    let k = support.len();
    let roots: Vec<f64> = support.iter().map(|&i| spec.values[i].sqrt()).collect();
    let basis = Mat::from_fn(d, k, |r, j| spec.vectors[(r, support[j])] * roots[j]);
    let hat = linalg::hermitian_part(rho_hat.as_ref());
    let mut inner = basis.adjoint() * (&hat * &basis);
    linalg::make_hermitian(&mut inner);
    let f: f64 = linalg::hermitian_eigenvalues(inner.as_ref())?
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .sum();
    Ok(f.clamp(0.0, FIDELITY_CEILING))
}

/// `⟨ψ|ρ̂|ψ⟩` for a unit vector `ψ`.
pub fn overlap_fidelity(psi: &[c64], rho_hat: &DensityMatrix) -> Result<f64> {
    let d = rho_hat.dim();
    if psi.len() != d {
        return Err(Error::dims(d, psi.len()));
    }
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!("state vector has norm {norm}, expected 1")));
    }
    let m = rho_hat.as_ref();
    let mut acc = c64::new(0.0, 0.0);
    for j in 0..d {
        let mut col = c64::new(0.0, 0.0);
        for i in 0..d {
            col += psi[i].conj() * m[(i, j)];
        }
        acc += col * psi[j];
    }
    Ok(acc.re)
}

/// `Tr(ρ²)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    linalg::inner_re(rho.as_ref(), rho.as_ref())
}

/// Number of eigenvalues above `rel_tol` times the largest.
pub fn numerical_rank(rho: &DensityMatrix, rel_tol: f64) -> Result<usize> {
    let values = linalg::hermitian_eigenvalues(linalg::hermitian_part(rho.as_ref()).as_ref())?;
    let top = values.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return Ok(0);
    }
    Ok(values.iter().filter(|&&v| v > rel_tol * top).count())
}
