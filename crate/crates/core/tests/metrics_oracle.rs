use approx::assert_abs_diff_eq;
use qtomo::metrics::{fidelity, hs_difference, overlap_fidelity};
use qtomo::states::{w_state_vector, wishart_state};
use qtomo::{c64, DensityMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_unit_vector(d: usize, rng: &mut ChaCha8Rng) -> Vec<c64> {
    let v: Vec<c64> = (0..d)
        .map(|_| c64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// For a pure reference `|ψ⟩⟨ψ|`, `F = √⟨ψ|σ|ψ⟩`.
fn shortcut(psi: &[c64], sigma: &DensityMatrix) -> f64 {
    let m = sigma.as_ref();
    let d = psi.len();
    let mut acc = c64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += psi[i].conj() * m[(i, j)] * psi[j];
        }
    }
    acc.re.max(0.0).sqrt()
}

#[test]
fn pure_state_shortcut_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..50 {
        let n = 1 + k % 4;
        let psi = random_unit_vector(1 << n, &mut rng);
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let sigma = wishart_state(n, 1 + (k % 3).min((1 << n) - 1), 1000 + k as u64).unwrap();
        let f = fidelity(&rho, &sigma).unwrap();
        assert_abs_diff_eq!(f, shortcut(&psi, &sigma), epsilon = 1e-8);
        let ov = overlap_fidelity(&psi, &sigma).unwrap();
        assert_abs_diff_eq!(ov, f * f, epsilon = 1e-8);
    }
}

#[test]
fn orthogonal_states_have_zero_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 1..=4 {
        let d = 1 << n;
        let a = random_unit_vector(d, &mut rng);
        // Gram-Schmidt a second vector against the first
        let mut b = random_unit_vector(d, &mut rng);
        let proj: c64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
        for (bi, ai) in b.iter_mut().zip(&a) {
            *bi -= proj * ai;
        }
        let norm = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        b.iter_mut().for_each(|z| *z /= norm);
        let ra = DensityMatrix::from_pure(&a).unwrap();
        let rb = DensityMatrix::from_pure(&b).unwrap();
        assert!(fidelity(&ra, &rb).unwrap() < 1e-7);
        assert!(overlap_fidelity(&a, &rb).unwrap().abs() < 1e-12);
    }
}

#[test]
fn w_state_overlaps() {
    let phases = [0.4, -1.1, 2.0];
    let psi = w_state_vector(4, &phases).unwrap();
    let rho = DensityMatrix::from_pure(&psi).unwrap();
    assert_abs_diff_eq!(overlap_fidelity(&psi, &rho).unwrap(), 1.0, epsilon = 1e-12);
    let mixed = DensityMatrix::maximally_mixed(4).unwrap();
    assert_abs_diff_eq!(overlap_fidelity(&psi, &mixed).unwrap(), 1.0 / 16.0, epsilon = 1e-12);
    assert_abs_diff_eq!(fidelity(&rho, &mixed).unwrap(), 0.25, epsilon = 1e-8);
    // D(ρ, I/d) = (1 − 1/d) for pure ρ
    assert_abs_diff_eq!(hs_difference(&rho, &mixed).unwrap(), 15.0 / 16.0, epsilon = 1e-12);
}
