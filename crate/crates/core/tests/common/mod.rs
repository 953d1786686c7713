//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use qtomo::{c64, Mat, MatRef, Result, SamplingOperator, SamplingPlan};

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

/// `σ_k` written out by hand, `I, X, Y, Z` for `k = 0..4`.
pub fn sigma(k: u64) -> Mat<c64> {
    let one = c64::new(1.0, 0.0);
    let i = c64::new(0.0, 1.0);
    let entries = match k {
        0 => [one, ZERO, ZERO, one],
        1 => [ZERO, one, one, ZERO],
        2 => [ZERO, -i, i, ZERO],
        3 => [one, ZERO, ZERO, -one],
        _ => unreachable!(),
    };
    Mat::from_fn(2, 2, |r, c| entries[2 * r + c])
}

pub fn kron(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    let (rb, cb) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * rb, a.ncols() * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

/// Dense Pauli string: base-4 digits of `index`, most significant first,
/// become the Kronecker factors from left to right.
pub fn dense_pauli(n: usize, index: u64) -> Mat<c64> {
    let mut m = Mat::from_fn(1, 1, |_, _| c64::new(1.0, 0.0));
    for q in (0..n).rev() {
        m = kron(&m, &sigma((index >> (2 * q)) & 3));
    }
    m
}

/// The sampling matrix stored as `M` dense `d × d` rows.
pub struct DenseOracle {
    pub n: usize,
    pub rows: Vec<Mat<c64>>,
}

impl DenseOracle {
    pub fn from_plan(plan: &SamplingPlan) -> Self {
        let s = plan.normalization();
        let rows = plan
            .indices()
            .into_iter()
            .map(|idx| {
                let p = dense_pauli(plan.n_qubits(), idx);
                Mat::from_fn(p.nrows(), p.ncols(), |i, j| p[(i, j)] * s)
            })
            .collect();
        DenseOracle { n: plan.n_qubits(), rows }
    }
}

impl SamplingOperator for DenseOracle {
    fn n_qubits(&self) -> usize {
        self.n
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    fn apply(&self, rho: MatRef<'_, c64>) -> Result<Vec<f64>> {
        let d = rho.nrows();
        Ok(self
            .rows
            .iter()
            .map(|w| {
                let mut tr = ZERO;
                for i in 0..d {
                    for k in 0..d {
                        tr += w[(i, k)] * rho[(k, i)];
                    }
                }
                tr.re
            })
            .collect())
    }

    fn adjoint(&self, v: &[f64]) -> Result<Mat<c64>> {
        let d = 1 << self.n;
        Ok(Mat::from_fn(d, d, |i, j| {
            self.rows
                .iter()
                .zip(v)
                .map(|(w, &x)| w[(j, i)].conj() * x)
                .sum()
        }))
    }
}

pub fn inner(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    let mut acc = ZERO;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].conj() * b[(i, j)];
        }
    }
    acc
}

pub fn max_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}
