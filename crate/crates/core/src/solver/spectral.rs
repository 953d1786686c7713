//! Singular-value contraction and the density-matrix projection.
//!
//! Inputs are Hermitian, so singular values are `|λ_i|` and both are computed
//! from one Hermitian eigendecomposition: `D_τ(C) = Σ sign(λ_i)·S_τ(|λ_i|)·u_i u_i†`.

use faer::{c64, Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, HermitianSpectrum};

/// Clipped traces at or below this are treated as the zero matrix.
pub const DEGENERATE_TRACE: f64 = 1e-14;

/// How the spectrum of the gradient iterate is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truncation {
    /// Full Hermitian eigendecomposition.
    Exact,
    /// Randomized range finder keeping at most `rank` components.
    Randomized {
        rank: usize,
        oversample: usize,
        power_iters: usize,
        seed: u64,
    },
}

impl Truncation {
    pub fn randomized(rank: usize, seed: u64) -> Self {
        Truncation::Randomized {
            rank,
            oversample: 10,
            power_iters: 2,
            seed,
        }
    }

    pub fn from_rank_cap(rank_cap: Option<usize>, seed: u64) -> Self {
        match rank_cap {
            Some(rank) => Truncation::randomized(rank, seed),
            None => Truncation::Exact,
        }
    }
}

/// Elementwise shrinkage `S_τ`.
#[inline]
pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Eigenpairs of a Hermitian matrix, possibly only the dominant ones.
///
/// The randomized path returns the `rank` pairs of largest `|λ|` from the
/// projection of `c` onto a sketched range.
pub fn spectrum(c: MatRef<'_, c64>, truncation: Truncation) -> Result<HermitianSpectrum> {
    match truncation {
        Truncation::Exact => linalg::hermitian_eigen(c),
        Truncation::Randomized {
            rank,
            oversample,
            power_iters,
            seed,
        } => randomized_spectrum(c, rank, oversample, power_iters, seed),
    }
}

fn randomized_spectrum(
    c: MatRef<'_, c64>,
    rank: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> Result<HermitianSpectrum> {
    let d = c.nrows();
    if rank == 0 {
        return Err(Error::InvalidParameter("rank cap must be positive".into()));
    }
    let width = (rank + oversample).min(d);
    if width == d {
        let full = linalg::hermitian_eigen(c)?;
        return Ok(keep_dominant(full, rank));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let omega = Mat::from_fn(d, width, |_, _| c64::new(gauss(), gauss()));
    let mut q = orthonormal_basis(&(c * &omega))?;
    for _ in 0..power_iters {
        q = orthonormal_basis(&(c * &q))?;
    }
    let mut small = q.adjoint() * (c * &q);
    linalg::make_hermitian(&mut small);
    let inner = linalg::hermitian_eigen(small.as_ref())?;
    let lifted = HermitianSpectrum {
        values: inner.values,
        vectors: &q * &inner.vectors,
    };
    Ok(keep_dominant(lifted, rank))
}

fn orthonormal_basis(y: &Mat<c64>) -> Result<Mat<c64>> {
    let q = y.qr().compute_thin_Q();
    if !linalg::all_finite(q.as_ref()) {
        return Err(Error::DecompositionFailure);
    }
    Ok(q)
}

/// Keeps the `rank` pairs of largest magnitude, returned in ascending order.
fn keep_dominant(spec: HermitianSpectrum, rank: usize) -> HermitianSpectrum {
    let k = spec.values.len();
    if rank >= k {
        return spec;
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| spec.values[b].abs().total_cmp(&spec.values[a].abs()));
    order.truncate(rank);
    order.sort_by(|&a, &b| spec.values[a].total_cmp(&spec.values[b]));
    let d = spec.vectors.nrows();
    HermitianSpectrum {
        values: order.iter().map(|&i| spec.values[i]).collect(),
        vectors: Mat::from_fn(d, order.len(), |r, j| spec.vectors[(r, order[j])]),
    }
}

/// Applies `S_τ` to the singular values `|λ_i|`, keeping signs.
fn contract(spec: &mut HermitianSpectrum, tau: f64) {
    for v in &mut spec.values {
        *v = v.signum() * soft_threshold(v.abs(), tau);
    }
}

/// Clips negative eigenvalues and rescales to unit trace. Returns `false`
/// when nothing positive survives.
fn clip_and_normalize(values: &mut [f64]) -> bool {
    for v in values.iter_mut() {
        *v = v.max(0.0);
    }
    let tr: f64 = values.iter().sum();
    if tr <= DEGENERATE_TRACE {
        return false;
    }
    for v in values.iter_mut() {
        *v /= tr;
    }
    true
}

/// Singular-value contraction `D_τ` of a Hermitian matrix.
pub fn svt(c: MatRef<'_, c64>, tau: f64, truncation: Truncation) -> Result<Mat<c64>> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::InvalidParameter(format!("threshold {tau} must be nonnegative")));
    }
    let mut spec = spectrum(c, truncation)?;
    contract(&mut spec, tau);
    Ok(spec.reconstruct())
}

/// Result of projecting onto density matrices.
#[derive(Clone, Debug)]
pub struct Projection {
    pub matrix: Mat<c64>,
    /// Set when the clipped spectrum had no mass and `I/d` was returned.
    pub degenerate: bool,
}

/// Nearest-spectrum density matrix: clip negative eigenvalues, renormalize
/// the trace to one. Falls back to `I/d` when the clipped trace vanishes.
pub fn quantum_project(c: MatRef<'_, c64>) -> Result<Projection> {
    let mut spec = linalg::hermitian_eigen(c)?;
    Ok(finish_projection(&mut spec))
}

fn finish_projection(spec: &mut HermitianSpectrum) -> Projection {
    let d = spec.dim();
    if clip_and_normalize(&mut spec.values) {
        Projection {
            matrix: spec.reconstruct(),
            degenerate: false,
        }
    } else {
        Projection {
            matrix: linalg::scaled_identity(d, 1.0 / d as f64),
            degenerate: true,
        }
    }
}

/// `quantum_project(svt(c, τ))` from a single eigendecomposition.
///
/// Contraction keeps the eigenvectors, so the projection only needs the
/// contracted eigenvalues.
pub fn contract_and_project(c: MatRef<'_, c64>, tau: f64, truncation: Truncation) -> Result<Projection> {
    let mut spec = spectrum(c, truncation)?;
    contract(&mut spec, tau);
    Ok(finish_projection(&mut spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use approx::assert_abs_diff_eq;

    fn diag(values: &[f64]) -> Mat<c64> {
        Mat::from_fn(values.len(), values.len(), |i, j| {
            if i == j {
                c64::new(values[i], 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        })
    }

    fn random_hermitian(d: usize, seed: u64) -> Mat<c64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
        let a = Mat::from_fn(d, d, |_, _| c64::new(g(), g()));
        linalg::hermitian_part(a.as_ref())
    }

    #[test]
    fn scalar_shrinkage_branches() {
        assert_eq!(soft_threshold(2.0, 0.5), 1.5);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
        assert_eq!(soft_threshold(0.3, 0.5), 0.0);
        assert_eq!(soft_threshold(-0.5, 0.5), 0.0);
    }

    #[test]
    fn svt_on_diagonal() {
        let out = svt(diag(&[2.0, 0.5]).as_ref(), 1.0, Truncation::Exact).unwrap();
        assert!(max_abs_diff(out.as_ref(), diag(&[1.0, 0.0]).as_ref()) < 1e-14);
        // negative eigenvalues shrink toward zero, keeping sign
        let out = svt(diag(&[-3.0, 0.5]).as_ref(), 1.0, Truncation::Exact).unwrap();
        assert!(max_abs_diff(out.as_ref(), diag(&[-2.0, 0.0]).as_ref()) < 1e-14);
    }

    #[test]
    fn svt_zero_threshold_is_identity() {
        let c = random_hermitian(8, 3);
        let out = svt(c.as_ref(), 0.0, Truncation::Exact).unwrap();
        assert!(max_abs_diff(out.as_ref(), c.as_ref()) < 1e-10);
        assert!(svt(c.as_ref(), -1.0, Truncation::Exact).is_err());
    }

    #[test]
    fn project_clips_then_normalizes() {
        let p = quantum_project(diag(&[2.0, -1.0]).as_ref()).unwrap();
        assert!(!p.degenerate);
        assert!(max_abs_diff(p.matrix.as_ref(), diag(&[1.0, 0.0]).as_ref()) < 1e-14);
    }

    #[test]
    fn project_degenerate_falls_back_to_mixed() {
        let p = quantum_project(diag(&[-1.0, -2.0, 0.0, -0.5]).as_ref()).unwrap();
        assert!(p.degenerate);
        assert!(max_abs_diff(p.matrix.as_ref(), diag(&[0.25; 4]).as_ref()) < 1e-15);
    }

    #[test]
    fn fused_path_matches_composition() {
        for seed in 0..5 {
            let c = random_hermitian(16, seed);
            let two_step = quantum_project(svt(c.as_ref(), 0.7, Truncation::Exact).unwrap().as_ref()).unwrap();
            let fused = contract_and_project(c.as_ref(), 0.7, Truncation::Exact).unwrap();
            assert!(max_abs_diff(two_step.matrix.as_ref(), fused.matrix.as_ref()) < 1e-10);
        }
    }

    #[test]
    fn randomized_recovers_dominant_low_rank_part() {
        // rank-2 signal, everything else exactly zero
        let d = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
        let u = Mat::from_fn(d, 2, |_, _| c64::new(g(), g()));
        let c = linalg::reconstruct(u.as_ref(), &[3.0, -1.0]);
        let exact = svt(c.as_ref(), 0.1, Truncation::Exact).unwrap();
        let approx = svt(c.as_ref(), 0.1, Truncation::randomized(2, 9)).unwrap();
        assert!(max_abs_diff(exact.as_ref(), approx.as_ref()) < 1e-8);
    }

    #[test]
    fn randomized_caps_rank() {
        let c = random_hermitian(32, 4);
        let spec = spectrum(c.as_ref(), Truncation::randomized(3, 2)).unwrap();
        assert_eq!(spec.values.len(), 3);
        let small = random_hermitian(6, 4);
        let spec = spectrum(small.as_ref(), Truncation::randomized(2, 2)).unwrap();
        let full = linalg::hermitian_eigenvalues(small.as_ref()).unwrap();
        let mut by_mag = full.clone();
        by_mag.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
        let mut got = spec.values.clone();
        got.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
        assert_abs_diff_eq!(got[0], by_mag[0], epsilon = 1e-10);
        assert_abs_diff_eq!(got[1], by_mag[1], epsilon = 1e-10);
    }
}
