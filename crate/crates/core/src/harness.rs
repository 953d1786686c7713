//! Seeded benchmark sweeps.
//!
//! A trial draws a random rank-`r` state, a sampling plan and a noisy
//! measurement vector from one seed, reconstructs, and scores the result.
//! Trials run on a worker pool and are merged by trial index, so every output
//! except the wall-time columns is reproducible bit for bit.

use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::metrics;
use crate::noise::{measure, NoiseSpec};
use crate::pauli::draw_plan;
use crate::solver::{self, SolveReport, SolverParams};
use crate::states::wishart_state;

/// Largest register a benchmark will accept.
pub const MAX_BENCH_QUBITS: usize = 12;
/// Registers above this size run, but slowly.
pub const WARN_BENCH_QUBITS: usize = 10;
/// Accuracy `1 − D` whose first crossing is reported per trial.
pub const DEFAULT_ACCURACY_TARGET: f64 = 0.945;

/// Measurement rates used for `n = 8..=12` in the reference table.
pub fn table1_eta(n_qubits: usize) -> Option<f64> {
    match n_qubits {
        8 => Some(0.03),
        9 => Some(0.017),
        10 => Some(0.01),
        11 => Some(0.006),
        12 => Some(0.003),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Admm,
    /// Projected least squares without the low-rank penalty.
    Baseline,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub table_csv: Option<PathBuf>,
    pub curves_csv: Option<PathBuf>,
    pub trials_csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_qubits: usize,
    pub rank: usize,
    pub eta: f64,
    /// `None` measures noiselessly.
    pub snr_db: Option<f64>,
    /// Explicit per-trial seeds; empty means `0..trials`.
    pub seeds: Vec<u64>,
    pub trials: usize,
    pub solver: SolverParams,
    pub method: Method,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
    pub accuracy_target: f64,
    pub outputs: OutputPaths,
}

impl ExperimentConfig {
    pub fn new(n_qubits: usize, eta: f64) -> Self {
        ExperimentConfig {
            n_qubits,
            rank: 1,
            eta,
            snr_db: Some(40.0),
            seeds: Vec::new(),
            trials: 20,
            solver: SolverParams::for_qubits(n_qubits),
            method: Method::Admm,
            workers: 0,
            accuracy_target: DEFAULT_ACCURACY_TARGET,
            outputs: OutputPaths::default(),
        }
    }

    /// Reference-table row for `n` in `8..=12`: rank 1, 40 dB, per-size `η` and `λ`.
    pub fn table1(n_qubits: usize) -> Result<Self> {
        let eta = table1_eta(n_qubits).ok_or_else(|| {
            Error::InvalidParameter(format!("no reference configuration for n = {n_qubits} (expected 8..=12)"))
        })?;
        Ok(ExperimentConfig::new(n_qubits, eta))
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.trials as u64).collect()
        } else {
            self.seeds.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::InvalidParameter("need at least one qubit".into()));
        }
        if self.n_qubits > MAX_BENCH_QUBITS {
            return Err(Error::ResourceLimit(format!(
                "benchmarks are limited to n ≤ {MAX_BENCH_QUBITS}, got {}",
                self.n_qubits
            )));
        }
        let d = 1usize << self.n_qubits;
        if self.rank == 0 || self.rank > d {
            return Err(Error::InvalidRank { rank: self.rank, dim: d });
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidRate(self.eta));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::InvalidParameter(format!("SNR {snr} dB is not finite")));
            }
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("need at least one trial".into()));
        }
        if !self.seeds.is_empty() && self.seeds.len() != self.trials {
            return Err(Error::InvalidParameter(format!(
                "{} seeds given for {} trials",
                self.seeds.len(),
                self.trials
            )));
        }
        if !(self.accuracy_target > 0.0 && self.accuracy_target <= 1.0) {
            return Err(Error::InvalidParameter("accuracy target must lie in (0, 1]".into()));
        }
        self.solver.validate()
    }
}

/// Independent stream `stream` derived from a trial seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub fidelity: f64,
    pub hs_difference: f64,
    pub iterations: usize,
    pub iterations_to_target: Option<usize>,
    pub converged: bool,
    /// Solve time only; state and plan generation are excluded.
    pub wall_seconds: f64,
    /// `1 − D` after each iteration.
    pub accuracy_curve: Vec<f64>,
    pub error: Option<String>,
}

impl TrialResult {
    fn failed(trial: usize, seed: u64, err: Error) -> Self {
        TrialResult {
            trial,
            seed,
            fidelity: f64::NAN,
            hs_difference: f64::NAN,
            iterations: 0,
            iterations_to_target: None,
            converged: false,
            wall_seconds: 0.0,
            accuracy_curve: Vec::new(),
            error: Some(err.to_string()),
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // summation error can push the mean a hair outside the range
        Some(Summary {
            mean: mean.clamp(min, max),
            std,
            min,
            max,
            count: values.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
    pub fidelity: Option<Summary>,
    pub hs_difference: Option<Summary>,
    pub iterations: Option<Summary>,
    /// Over the trials that reached the target.
    pub iterations_to_target: Option<Summary>,
    pub reached_target: usize,
    pub wall_seconds: Option<Summary>,
    /// Averaged `1 − D` per iteration over successful trials. Trials that
    /// stopped early contribute their final value to later iterations.
    pub mean_accuracy_curve: Vec<f64>,
    pub failures: usize,
    /// Set when any trial failed.
    pub flagged: bool,
}

impl BenchmarkRecord {
    /// First iteration at which the averaged curve reaches `accuracy`.
    pub fn curve_crossing(&self, accuracy: f64) -> Option<usize> {
        self.mean_accuracy_curve
            .iter()
            .position(|&a| a >= accuracy)
            .map(|i| i + 1)
    }
}

fn trial_inner(config: &ExperimentConfig, seed: u64) -> Result<(SolveReport, f64, f64)> {
    let truth = wishart_state(config.n_qubits, config.rank, derive_seed(seed, 0))?;
    let plan = draw_plan(config.n_qubits, config.eta, derive_seed(seed, 1))?;
    let noise = match config.snr_db {
        Some(snr) => NoiseSpec::snr(snr, derive_seed(seed, 2)),
        None => NoiseSpec::noiseless(),
    };
    let y = measure(&truth, &plan, noise)?;
    let mut params = config.solver.clone();
    params.track_history = true;
    params.sketch_seed = derive_seed(seed, 3);
    let report = match config.method {
        Method::Admm => solver::solve(&y, &plan, &params, Some(&truth))?,
        Method::Baseline => solver::baseline_lsq_with(&y, &plan, &params, Some(&truth))?,
    };
    let fidelity = metrics::fidelity(&truth, &report.rho_hat)?;
    let hs = metrics::hs_difference(&truth, &report.rho_hat)?;
    Ok((report, fidelity, hs))
}

/// Runs one trial. Errors are captured in the result rather than returned.
pub fn run_trial(config: &ExperimentConfig, trial: usize, seed: u64) -> TrialResult {
    match trial_inner(config, seed) {
        Ok((report, fidelity, hs)) => TrialResult {
            trial,
            seed,
            fidelity,
            hs_difference: hs,
            iterations: report.iterations,
            iterations_to_target: report.iterations_to_accuracy(config.accuracy_target),
            converged: report.converged,
            wall_seconds: report.wall_time.as_secs_f64(),
            accuracy_curve: report
                .history
                .iter()
                .map(|r| 1.0 - r.hs_difference.unwrap_or(f64::NAN))
                .collect(),
            error: None,
        },
        Err(err) => {
            log::warn!("trial {trial} (seed {seed}) failed: {err}");
            TrialResult::failed(trial, seed, err)
        }
    }
}

fn mean_curve(trials: &[TrialResult]) -> Vec<f64> {
    let ok: Vec<&TrialResult> = trials.iter().filter(|t| t.ok() && !t.accuracy_curve.is_empty()).collect();
    let len = ok.iter().map(|t| t.accuracy_curve.len()).max().unwrap_or(0);
    (0..len)
        .map(|k| {
            let sum: f64 = ok
                .iter()
                .map(|t| t.accuracy_curve[k.min(t.accuracy_curve.len() - 1)])
                .sum();
            sum / ok.len() as f64
        })
        .collect()
}

fn aggregate(config: ExperimentConfig, trials: Vec<TrialResult>) -> BenchmarkRecord {
    let ok: Vec<&TrialResult> = trials.iter().filter(|t| t.ok()).collect();
    let pick = |f: &dyn Fn(&TrialResult) -> f64| Summary::of(&ok.iter().map(|t| f(t)).collect::<Vec<_>>());
    let to_target: Vec<f64> = ok
        .iter()
        .filter_map(|t| t.iterations_to_target.map(|k| k as f64))
        .collect();
    let failures = trials.len() - ok.len();
    BenchmarkRecord {
        fidelity: pick(&|t| t.fidelity),
        hs_difference: pick(&|t| t.hs_difference),
        iterations: pick(&|t| t.iterations as f64),
        iterations_to_target: Summary::of(&to_target),
        reached_target: to_target.len(),
        wall_seconds: pick(&|t| t.wall_seconds),
        mean_accuracy_curve: mean_curve(&trials),
        failures,
        flagged: failures > 0,
        config,
        trials,
    }
}

fn run_trials(config: &ExperimentConfig, execution: Execution) -> Vec<TrialResult> {
    let seeds = config.seeds();
    exec::map_range(execution, seeds.len(), |i| run_trial(config, i, seeds[i]))
}

/// Runs every trial of `config` and aggregates them.
///
/// Invalid configurations are rejected up front; failing trials are recorded
/// in the returned record, which is then flagged.
pub fn run_experiment(config: &ExperimentConfig, execution: Execution) -> Result<BenchmarkRecord> {
    config.validate()?;
    if config.n_qubits > WARN_BENCH_QUBITS {
        log::warn!(
            "n = {} is beyond desk scale; expect minutes per trial",
            config.n_qubits
        );
    }
    let trials = with_workers(config.workers, execution, || run_trials(config, execution))?;
    Ok(aggregate(config.clone(), trials))
}

/// Runs each configuration in turn.
pub fn run_benchmark(configs: &[ExperimentConfig], execution: Execution) -> Result<Vec<BenchmarkRecord>> {
    for c in configs {
        c.validate()?;
    }
    configs.iter().map(|c| run_experiment(c, execution)).collect()
}

#[cfg(feature = "parallel")]
fn with_workers<T: Send>(workers: usize, execution: Execution, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 || !execution.is_parallel() {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn with_workers<T: Send>(workers: usize, _execution: Execution, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers > 1 {
        log::warn!("built without the `parallel` feature; ignoring --workers {workers}");
    }
    Ok(f())
}

fn opt_num<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn snr_field(config: &ExperimentConfig) -> String {
    opt_num(config.snr_db)
}

/// Header of the table CSV. `mean_seconds` is the only wall-time column.
pub const TABLE_HEADER: &str =
    "n,eta,mean_fidelity,mean_iterations,mean_seconds,snr_db,trials,failures,std_fidelity,mean_iterations_to_target,reached_target";

pub fn write_table_csv<W: Write>(mut w: W, records: &[BenchmarkRecord]) -> Result<()> {
    writeln!(w, "{TABLE_HEADER}")?;
    for r in records {
        let c = &r.config;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.n_qubits,
            c.eta,
            opt_num(r.fidelity.map(|s| s.mean)),
            opt_num(r.iterations.map(|s| s.mean)),
            opt_num(r.wall_seconds.map(|s| s.mean)),
            snr_field(c),
            r.trials.len(),
            r.failures,
            opt_num(r.fidelity.map(|s| s.std)),
            opt_num(r.iterations_to_target.map(|s| s.mean)),
            r.reached_target,
        )?;
    }
    Ok(())
}

/// Long-form curves: one row per (configuration, iteration).
pub fn write_curves_csv<W: Write>(mut w: W, records: &[BenchmarkRecord]) -> Result<()> {
    writeln!(w, "n,eta,iter,mean_accuracy")?;
    for r in records {
        for (k, a) in r.mean_accuracy_curve.iter().enumerate() {
            writeln!(w, "{},{},{},{}", r.config.n_qubits, r.config.eta, k + 1, a)?;
        }
    }
    Ok(())
}

pub fn write_trials_csv<W: Write>(mut w: W, records: &[BenchmarkRecord]) -> Result<()> {
    writeln!(
        w,
        "n,eta,trial,seed,fidelity,hs_difference,iterations,iterations_to_target,converged,seconds,error"
    )?;
    for r in records {
        for t in &r.trials {
            let error = t.error.as_deref().unwrap_or("").replace(['"', ',', '\n'], " ");
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.config.n_qubits,
                r.config.eta,
                t.trial,
                t.seed,
                t.fidelity,
                t.hs_difference,
                t.iterations,
                opt_num(t.iterations_to_target),
                t.converged,
                t.wall_seconds,
                error,
            )?;
        }
    }
    Ok(())
}

pub fn records_to_json(records: &[BenchmarkRecord]) -> String {
    serde_json::to_string_pretty(records).expect("benchmark records serialize")
}

/// Writes every output named in the first record's configuration.
pub fn write_outputs(records: &[BenchmarkRecord], paths: &OutputPaths) -> Result<()> {
    fn create(path: &PathBuf) -> Result<std::io::BufWriter<std::fs::File>> {
        Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
    if let Some(p) = &paths.table_csv {
        write_table_csv(create(p)?, records)?;
    }
    if let Some(p) = &paths.curves_csv {
        write_curves_csv(create(p)?, records)?;
    }
    if let Some(p) = &paths.trials_csv {
        write_trials_csv(create(p)?, records)?;
    }
    if let Some(p) = &paths.json {
        std::fs::write(p, records_to_json(records))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small(n: usize, eta: f64, trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            snr_db: None,
            trials,
            ..ExperimentConfig::new(n, eta)
        }
    }

    #[test]
    fn table1_rows() {
        let c = ExperimentConfig::table1(8).unwrap();
        assert_eq!((c.eta, c.rank, c.snr_db, c.solver.lambda), (0.03, 1, Some(40.0), 8.0));
        assert_eq!(ExperimentConfig::table1(9).unwrap().solver.lambda, 14.0);
        assert_eq!(ExperimentConfig::table1(12).unwrap().eta, 0.003);
        assert!(ExperimentConfig::table1(7).is_err());
    }

    #[test]
    fn validation() {
        assert!(matches!(small(13, 0.1, 1).validate(), Err(Error::ResourceLimit(_))));
        assert!(matches!(small(3, 0.0, 1).validate(), Err(Error::InvalidRate(_))));
        assert!(matches!(
            ExperimentConfig { rank: 9, ..small(3, 0.5, 1) }.validate(),
            Err(Error::InvalidRank { .. })
        ));
        assert!(ExperimentConfig { seeds: vec![1, 2], ..small(3, 0.5, 3) }.validate().is_err());
        assert!(ExperimentConfig { seeds: vec![1, 2, 3], ..small(3, 0.5, 3) }.validate().is_ok());
        assert!(small(3, 0.5, 0).validate().is_err());
    }

    #[test]
    fn derived_seeds_are_distinct() {
        let mut all: Vec<u64> = (0..50).flat_map(|s| (0..4).map(move |k| derive_seed(s, k))).collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 200);
    }

    #[test]
    fn single_trial_matches_direct_solve() {
        let config = small(3, 0.5, 1);
        let record = run_experiment(&config, Execution::Sequential).unwrap();
        let seed = 0;
        let truth = wishart_state(3, 1, derive_seed(seed, 0)).unwrap();
        let plan = draw_plan(3, 0.5, derive_seed(seed, 1)).unwrap();
        let y = measure(&truth, &plan, NoiseSpec::noiseless()).unwrap();
        let params = SolverParams {
            sketch_seed: derive_seed(seed, 3),
            ..config.solver.clone()
        };
        let report = solver::solve(&y, &plan, &params, Some(&truth)).unwrap();
        let t = &record.trials[0];
        assert_eq!(t.iterations, report.iterations);
        assert_eq!(t.fidelity, metrics::fidelity(&truth, &report.rho_hat).unwrap());
        let s = record.fidelity.unwrap();
        assert_eq!((s.mean, s.std, s.min, s.max), (t.fidelity, 0.0, t.fidelity, t.fidelity));
    }

    #[test]
    fn small_noiseless_recovery() {
        let record = run_experiment(&small(4, 0.3, 4), Execution::default()).unwrap();
        assert!(!record.flagged);
        assert!(1.0 - record.hs_difference.unwrap().mean >= 0.999, "{:?}", record.hs_difference);
        assert_eq!(record.mean_accuracy_curve.len(), 100);
    }

    #[test]
    fn failing_trials_are_recorded_and_flagged() {
        // κλ overflows, so the first multiplier update is infinite
        let mut config = small(2, 0.5, 2);
        config.solver.kappa = 1e308;
        let record = run_experiment(&config, Execution::Sequential).unwrap();
        assert!(record.flagged);
        assert_eq!(record.failures, 2);
        assert!(record.trials.iter().all(|t| t.error.is_some()));
        assert!(record.fidelity.is_none());
        let mut csv = Vec::new();
        write_table_csv(&mut csv, &[record]).unwrap();
        assert!(String::from_utf8(csv).unwrap().lines().nth(1).unwrap().contains(",2,2,"));
    }

    #[test]
    fn curves_carry_final_value_forward() {
        let t = |curve: Vec<f64>| TrialResult {
            accuracy_curve: curve,
            ..TrialResult::failed(0, 0, Error::DecompositionFailure)
        };
        let mut a = t(vec![0.5, 0.7]);
        let mut b = t(vec![0.1, 0.3, 0.9]);
        a.error = None;
        b.error = None;
        let c = t(vec![100.0]);
        assert_eq!(mean_curve(&[a, b, c]), vec![0.3, 0.5, 0.8]);
    }

    #[test]
    fn outputs_are_deterministic_apart_from_wall_time() {
        let configs = [small(3, 0.4, 3), ExperimentConfig { snr_db: Some(30.0), ..small(3, 0.6, 2) }];
        let render = |exec| {
            let records = run_benchmark(&configs, exec).unwrap();
            let mut table = Vec::new();
            let mut curves = Vec::new();
            write_table_csv(&mut table, &records).unwrap();
            write_curves_csv(&mut curves, &records).unwrap();
            let table: Vec<String> = String::from_utf8(table)
                .unwrap()
                .lines()
                .map(|l| {
                    let mut f: Vec<&str> = l.split(',').collect();
                    f.remove(4);
                    f.join(",")
                })
                .collect();
            (table, curves)
        };
        let a = render(Execution::Sequential);
        let b = render(Execution::Parallel);
        assert_eq!(a, b);
        assert!(TABLE_HEADER.split(',').nth(4) == Some("mean_seconds"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn summary_mean_within_range(values in proptest::collection::vec(-1e6f64..1e6, 1..40)) {
            let s = Summary::of(&values).unwrap();
            prop_assert!(s.min <= s.mean && s.mean <= s.max);
            prop_assert!(s.std >= 0.0);
            prop_assert_eq!(s.count, values.len());
        }
    }
}
