//! Noisy expectation measurements `y = A·vec(ρ) + e`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::pauli::{apply_a, SamplingPlan};
use crate::states::DensityMatrix;

/// Measured expectations together with the plan that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementVector {
    plan: SamplingPlan,
    values: Vec<f64>,
    noise_sigma: f64,
}

impl MeasurementVector {
    pub fn new(plan: SamplingPlan, values: Vec<f64>, noise_sigma: f64) -> Result<Self> {
        use crate::pauli::SamplingOperator;
        if values.len() != plan.len() {
            return Err(Error::dims(plan.len(), values.len()));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise sigma {noise_sigma} is not a valid standard deviation")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("measurement values must be finite".into()));
        }
        Ok(MeasurementVector {
            plan,
            values,
            noise_sigma,
        })
    }

    pub fn plan(&self) -> &SamplingPlan {
        &self.plan
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseSpec {
    /// `None` measures noiselessly.
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        NoiseSpec { snr_db: None, seed: 0 }
    }

    pub fn snr(snr_db: f64, seed: u64) -> Self {
        NoiseSpec {
            snr_db: Some(snr_db),
            seed,
        }
    }
}

/// Measures `rho` with `plan`, adding i.i.d. Gaussian noise when an SNR is given.
///
/// The SNR is the power ratio `‖y_clean‖² / E‖e‖²` in dB, so each component
/// has `σ = ‖y_clean‖₂ / (√M · 10^{snr/20})`.
pub fn measure(rho: &DensityMatrix, plan: &SamplingPlan, spec: NoiseSpec) -> Result<MeasurementVector> {
    if rho.n_qubits() != plan.n_qubits() {
        return Err(Error::dims(plan.n_qubits(), rho.n_qubits()));
    }
    let mut values = apply_a(plan, rho.as_ref())?;
    let sigma = match spec.snr_db {
        None => 0.0,
        Some(snr) => {
            if !snr.is_finite() {
                return Err(Error::InvalidParameter(format!("SNR {snr} dB is not finite")));
            }
            let signal = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            signal / ((values.len() as f64).sqrt() * 10f64.powf(snr / 20.0))
        }
    };
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let dist = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for v in &mut values {
            *v += dist.sample(&mut rng);
        }
    }
    MeasurementVector::new(plan.clone(), values, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{draw_plan, SamplingOperator};
    use crate::states::wishart_state;

    fn split(rho: &DensityMatrix, plan: &SamplingPlan, spec: NoiseSpec) -> (Vec<f64>, Vec<f64>, f64) {
        let clean = apply_a(plan, rho.as_ref()).unwrap();
        let y = measure(rho, plan, spec).unwrap();
        let e = y.values().iter().zip(&clean).map(|(a, b)| a - b).collect();
        (clean, e, y.noise_sigma())
    }

    #[test]
    fn noiseless_is_exact() {
        let rho = wishart_state(3, 1, 2).unwrap();
        let plan = draw_plan(3, 0.5, 2).unwrap();
        let y = measure(&rho, &plan, NoiseSpec::noiseless()).unwrap();
        assert_eq!(y.values(), apply_a(&plan, rho.as_ref()).unwrap().as_slice());
        assert_eq!(y.noise_sigma(), 0.0);
    }

    #[test]
    fn forty_db_ratio() {
        let rho = wishart_state(6, 1, 3).unwrap();
        let plan = draw_plan(6, 0.2, 3).unwrap();
        assert!(plan.len() >= 500);
        let (clean, e, _) = split(&rho, &plan, NoiseSpec::snr(40.0, 99));
        let ratio = clean.iter().map(|v| v * v).sum::<f64>().sqrt() / e.iter().map(|v| v * v).sum::<f64>().sqrt();
        let db = 20.0 * ratio.log10();
        assert!((37.0..=43.0).contains(&db), "{db}");
    }

    #[test]
    fn noise_is_seeded() {
        let rho = wishart_state(3, 1, 2).unwrap();
        let plan = draw_plan(3, 0.5, 2).unwrap();
        let a = measure(&rho, &plan, NoiseSpec::snr(40.0, 5)).unwrap();
        let b = measure(&rho, &plan, NoiseSpec::snr(40.0, 5)).unwrap();
        let c = measure(&rho, &plan, NoiseSpec::snr(40.0, 6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn noise_has_zero_mean_and_recorded_sigma() {
        let rho = wishart_state(7, 1, 4).unwrap();
        let plan = draw_plan(7, 0.7, 4).unwrap();
        assert!(plan.len() >= 10_000);
        let (clean, e, sigma) = split(&rho, &plan, NoiseSpec::snr(20.0, 8));
        let m = e.len() as f64;
        let expected_sigma = clean.iter().map(|v| v * v).sum::<f64>().sqrt() / (m.sqrt() * 10.0);
        assert!((sigma - expected_sigma).abs() < 1e-15);
        let mean = e.iter().sum::<f64>() / m;
        assert!(mean.abs() < 4.0 * sigma / m.sqrt(), "mean {mean}");
        let sd = (e.iter().map(|v| v * v).sum::<f64>() / m).sqrt();
        assert!((sd / sigma - 1.0).abs() < 0.05);
    }

    #[test]
    fn dimension_checks() {
        let rho = wishart_state(3, 1, 2).unwrap();
        let plan = draw_plan(2, 0.5, 2).unwrap();
        assert!(matches!(measure(&rho, &plan, NoiseSpec::noiseless()), Err(Error::DimensionMismatch { .. })));
        let plan3 = draw_plan(3, 0.5, 2).unwrap();
        assert!(MeasurementVector::new(plan3, vec![0.0], 0.0).is_err());
    }
}
