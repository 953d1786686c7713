//! Thin helpers over `faer` for the dense complex matrices used throughout.

use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianSpectrum {
    pub values: Vec<f64>,
    pub vectors: Mat<c64>,
}

impl HermitianSpectrum {
    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// `Σ w_i v_i v_i†` over the pairs where `w_i != 0`.
    pub fn reconstruct(&self) -> Mat<c64> {
        reconstruct(self.vectors.as_ref(), &self.values)
    }
}

pub fn hermitian_eigen(m: MatRef<'_, c64>) -> Result<HermitianSpectrum> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::DecompositionFailure)?;
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..s.nrows()).map(|i| s[i].re).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DecompositionFailure);
    }
    Ok(HermitianSpectrum {
        values,
        vectors: evd.U().to_owned(),
    })
}

pub fn hermitian_eigenvalues(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::DecompositionFailure)
}

/// `Σ w_i v_i v_i†` for the columns `v_i` of `vectors`, skipping zero weights.
pub fn reconstruct(vectors: MatRef<'_, c64>, weights: &[f64]) -> Mat<c64> {
    let d = vectors.nrows();
    let keep: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] != 0.0).collect();
    if keep.is_empty() {
        return Mat::zeros(d, d);
    }
    let basis = Mat::from_fn(d, keep.len(), |i, j| vectors[(i, keep[j])]);
    let scaled = Mat::from_fn(d, keep.len(), |i, j| basis[(i, j)] * weights[keep[j]]);
    let mut out = &scaled * basis.adjoint();
    make_hermitian(&mut out);
    out
}

/// Replaces `m` by `(m + m†)/2` in place.
pub fn make_hermitian(m: &mut Mat<c64>) {
    let d = m.nrows();
    for j in 0..d {
        m[(j, j)].im = 0.0;
        for i in (j + 1)..d {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

pub fn hermitian_part(m: MatRef<'_, c64>) -> Mat<c64> {
    let mut out = m.to_owned();
    make_hermitian(&mut out);
    out
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).fold(c64::new(0.0, 0.0), |acc, i| acc + m[(i, i)])
}

pub fn frobenius(m: MatRef<'_, c64>) -> f64 {
    frobenius_sq(m).sqrt()
}

pub fn frobenius_sq(m: MatRef<'_, c64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc
}

/// Real part of the Frobenius inner product `⟨a, b⟩ = Tr(a† b)`.
pub fn inner_re(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += (a[(i, j)].conj() * b[(i, j)]).re;
        }
    }
    acc
}

pub fn all_finite(m: MatRef<'_, c64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()))
}

pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

pub fn scaled_identity(d: usize, value: f64) -> Mat<c64> {
    Mat::from_fn(d, d, |i, j| if i == j { c64::new(value, 0.0) } else { c64::new(0.0, 0.0) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_round_trip() {
        let a = Mat::from_fn(4, 4, |i, j| c64::new((i + 2 * j) as f64, i as f64 - j as f64));
        let h = hermitian_part(a.as_ref());
        let spec = hermitian_eigen(h.as_ref()).unwrap();
        assert!(spec.values.windows(2).all(|w| w[0] <= w[1]));
        assert!(max_abs_diff(spec.reconstruct().as_ref(), h.as_ref()) < 1e-12);
    }

    #[test]
    fn hermitian_part_is_hermitian() {
        let a = Mat::from_fn(3, 3, |i, j| c64::new(i as f64, (j * j) as f64));
        let h = hermitian_part(a.as_ref());
        let ht = h.adjoint().to_owned();
        assert!(max_abs_diff(h.as_ref(), ht.as_ref()) < 1e-15);
        assert!((trace(h.as_ref()).re - 3.0).abs() < 1e-15);
    }
}
