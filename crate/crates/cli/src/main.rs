use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qtomo::formats::{self, MatrixFormat};
use qtomo::harness::{self, ExperimentConfig, Method, OutputPaths};
use qtomo::noise::{measure, NoiseSpec};
use qtomo::pauli::{draw_plan, empirical_rip};
use qtomo::solver::{self, LambdaRule, SolveReport, SolverParams};
use qtomo::states::{ghz_state, validate, w_state, wishart_state};
use qtomo::{metrics, DensityMatrix, Execution, SamplingOperator, SamplingPlan};
use serde_json::json;

const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "qtomo", version, about = "Compressive quantum state tomography")]
struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random or named density matrix.
    Generate(GenerateArgs),
    /// Draw a sampling plan and measure a state.
    Measure(MeasureArgs),
    /// Reconstruct a state from a measurement file.
    Reconstruct(ReconstructArgs),
    /// Run seeded reconstruction trials and write table, curve and trial outputs.
    Benchmark(BenchmarkArgs),
    /// Estimate the rank-restricted isometry spread of a random plan.
    RipCheck(RipArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum StateKind {
    Wishart,
    Ghz,
    W,
}

#[derive(Clone, Copy, ValueEnum)]
enum FileFormat {
    Text,
    Binary,
}

impl From<FileFormat> for MatrixFormat {
    fn from(f: FileFormat) -> Self {
        match f {
            FileFormat::Text => MatrixFormat::Text,
            FileFormat::Binary => MatrixFormat::Binary,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n_qubits: usize,
    #[arg(long, value_enum, default_value = "wishart")]
    kind: StateKind,
    #[arg(long, default_value_t = 1)]
    rank: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative phases of the W state, one per qubit after the first.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    phases: Vec<f64>,
    #[arg(long, value_enum, default_value = "text")]
    format: FileFormat,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    eta: f64,
    /// Signal-to-noise ratio in dB; omit for noiseless measurements.
    #[arg(long)]
    snr_db: Option<f64>,
    /// Seeds the plan; the noise uses `seed + 1`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LambdaRuleArg {
    Fixed,
    MeasurementScaled,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-4)]
    gamma: f64,
    /// Penalty; defaults to the per-size schedule.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0.9)]
    step_size: f64,
    #[arg(long, default_value_t = 1.099)]
    kappa: f64,
    /// Shrinkage threshold; defaults to step-size / lambda.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    stop_threshold: f64,
    /// Keep at most this many spectral components (randomized sketch).
    #[arg(long)]
    rank_cap: Option<usize>,
    #[arg(long, value_enum, default_value = "fixed")]
    lambda_rule: LambdaRuleArg,
    /// Halve the step and retry when an iterate turns non-finite.
    #[arg(long)]
    backtrack: bool,
    #[arg(long, default_value_t = 0x5eed)]
    sketch_seed: u64,
}

impl SolverArgs {
    fn params(&self, n_qubits: usize) -> SolverParams {
        SolverParams {
            gamma: self.gamma,
            lambda: self.lambda.unwrap_or_else(|| solver::default_lambda(n_qubits)),
            step_size: self.step_size,
            kappa: self.kappa,
            tau: self.tau,
            max_iters: self.max_iters,
            stop_threshold: self.stop_threshold,
            rank_cap: self.rank_cap,
            track_history: true,
            lambda_rule: match self.lambda_rule {
                LambdaRuleArg::Fixed => LambdaRule::Fixed,
                LambdaRuleArg::MeasurementScaled => LambdaRule::MeasurementScaled,
            },
            backtrack_on_nonfinite: self.backtrack,
            sketch_seed: self.sketch_seed,
        }
    }
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    measurements: PathBuf,
    /// Ground-truth state; enables fidelity and the per-iteration D history.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: FileFormat,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    history: Option<PathBuf>,
    /// Use the projected least-squares baseline instead of the ADMM solver.
    #[arg(long)]
    baseline: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Reference-table rows: per-size eta, rank 1, 40 dB.
    Table1,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Admm,
    Baseline,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long, value_delimiter = ',', required = true)]
    n_qubits: Vec<usize>,
    /// Measurement rates; every (n, eta) pair is run. Ignored with a preset.
    #[arg(long, value_delimiter = ',')]
    eta: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    rank: usize,
    #[arg(long, default_value_t = 40.0)]
    snr_db: f64,
    #[arg(long, conflicts_with = "snr_db")]
    noiseless: bool,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Explicit trial seeds; their count must equal --trials.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Worker threads for trials; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, value_enum, default_value = "admm")]
    method: MethodArg,
    #[arg(long, default_value_t = harness::DEFAULT_ACCURACY_TARGET)]
    accuracy_target: f64,
    #[arg(long)]
    table_csv: Option<PathBuf>,
    #[arg(long)]
    curves_csv: Option<PathBuf>,
    #[arg(long)]
    trials_csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct RipArgs {
    #[arg(long)]
    n_qubits: usize,
    #[arg(long)]
    eta: f64,
    #[arg(long, default_value_t = 1)]
    rank: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load_state(path: &Path) -> anyhow::Result<DensityMatrix> {
    let rho = formats::load_density_matrix(path).with_context(|| format!("reading {}", path.display()))?;
    let problems = validate(&rho, 1e-8);
    if !problems.is_empty() {
        let list: Vec<String> = problems.iter().map(ToString::to_string).collect();
        return Err(qtomo::Error::InvalidParameter(format!(
            "{} is not a density matrix: {}",
            path.display(),
            list.join("; ")
        )))
        .context("validating state");
    }
    Ok(rho)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    let rho = match args.kind {
        StateKind::Wishart => wishart_state(args.n_qubits, args.rank, args.seed)?,
        StateKind::Ghz => ghz_state(args.n_qubits)?,
        StateKind::W => {
            let phases = if args.phases.is_empty() {
                vec![0.0; args.n_qubits.saturating_sub(1)]
            } else {
                args.phases
            };
            w_state(args.n_qubits, &phases)?
        }
    };
    formats::save_density_matrix(&args.output, &rho, args.format.into())
        .with_context(|| format!("writing {}", args.output.display()))?;
    log::info!("wrote {}-qubit state to {}", args.n_qubits, args.output.display());
    Ok(())
}

fn measure_cmd(args: MeasureArgs, execution: Execution) -> anyhow::Result<()> {
    let rho = load_state(&args.state)?;
    let plan = draw_plan(rho.n_qubits(), args.eta, args.seed)?.with_execution(execution);
    let spec = match args.snr_db {
        Some(snr) => NoiseSpec::snr(snr, args.seed.wrapping_add(1)),
        None => NoiseSpec::noiseless(),
    };
    let y = measure(&rho, &plan, spec)?;
    formats::save_measurements(&args.output, &y).with_context(|| format!("writing {}", args.output.display()))?;
    log::info!("wrote {} measurements (sigma = {}) to {}", y.len(), y.noise_sigma(), args.output.display());
    Ok(())
}

fn report_json(report: &SolveReport, params: &SolverParams, truth: Option<&DensityMatrix>, baseline: bool) -> anyhow::Result<serde_json::Value> {
    let mut value = json!({
        "method": if baseline { "baseline" } else { "admm" },
        "n_qubits": report.rho_hat.n_qubits(),
        "iterations": report.iterations,
        "converged": report.converged,
        "final_residual": report.final_residual,
        "wall_seconds": report.wall_time.as_secs_f64(),
        "lambda": report.lambda,
        "tau": report.tau,
        "params": params,
        "purity": metrics::purity(&report.rho_hat),
        "history": report.history,
    });
    if let Some(t) = truth {
        value["fidelity"] = json!(metrics::fidelity(t, &report.rho_hat)?);
        value["hs_difference"] = json!(metrics::hs_difference(t, &report.rho_hat)?);
        value["iterations_to_target"] = json!(report.iterations_to_accuracy(harness::DEFAULT_ACCURACY_TARGET));
    }
    Ok(value)
}

fn reconstruct(args: ReconstructArgs, execution: Execution) -> anyhow::Result<()> {
    let raw = formats::load_measurements(&args.measurements)
        .with_context(|| format!("reading {}", args.measurements.display()))?;
    let n = raw.plan().n_qubits();
    let target = SamplingPlan::default_normalization(n);
    let y = if raw.plan().normalization() == target {
        raw
    } else {
        log::info!(
            "rescaling measurements from normalization {} to {}",
            raw.plan().normalization(),
            target
        );
        formats::rescale_measurements(&raw, target)?
    };
    let plan = y.plan().clone().with_execution(execution);
    let truth = args.truth.as_deref().map(load_state).transpose()?;
    if let Some(t) = &truth {
        if t.n_qubits() != n {
            return Err(qtomo::Error::InvalidParameter(format!(
                "truth has {} qubits but the measurements describe {n}",
                t.n_qubits()
            ))
            .into());
        }
    }
    let params = args.solver.params(n);
    let report = if args.baseline {
        solver::baseline_lsq_with(&y, y.plan(), &params, truth.as_ref())?
    } else {
        solver::solve_with(&plan, y.values(), &params, truth.as_ref())?
    };
    formats::save_density_matrix(&args.output, &report.rho_hat, args.format.into())
        .with_context(|| format!("writing {}", args.output.display()))?;
    let value = report_json(&report, &params, truth.as_ref(), args.baseline)?;
    if let Some(path) = &args.report {
        write_file(path, serde_json::to_string_pretty(&value)?)?;
    }
    if let Some(path) = &args.history {
        write_file(path, report.history_csv())?;
    }
    match value.get("fidelity") {
        Some(f) => println!(
            "{} iterations, residual {:.3e}, fidelity {}",
            report.iterations, report.final_residual, f
        ),
        None => println!("{} iterations, residual {:.3e}", report.iterations, report.final_residual),
    }
    Ok(())
}

fn benchmark(args: BenchmarkArgs, execution: Execution) -> anyhow::Result<()> {
    let snr_db = (!args.noiseless).then_some(args.snr_db);
    let mut configs = Vec::new();
    for &n in &args.n_qubits {
        let etas = match args.preset {
            Some(Preset::Table1) => vec![harness::table1_eta(n).ok_or_else(|| {
                qtomo::Error::InvalidParameter(format!("the table1 preset covers n = 8..=12, not {n}"))
            })?],
            None if args.eta.is_empty() => bail!(qtomo::Error::InvalidParameter("--eta is required without a preset".into())),
            None => args.eta.clone(),
        };
        for eta in etas {
            configs.push(ExperimentConfig {
                rank: args.rank,
                snr_db,
                seeds: args.seeds.clone(),
                trials: args.trials,
                solver: args.solver.params(n),
                method: match args.method {
                    MethodArg::Admm => Method::Admm,
                    MethodArg::Baseline => Method::Baseline,
                },
                workers: args.workers,
                accuracy_target: args.accuracy_target,
                outputs: OutputPaths {
                    table_csv: args.table_csv.clone(),
                    curves_csv: args.curves_csv.clone(),
                    trials_csv: args.trials_csv.clone(),
                    json: args.json.clone(),
                },
                ..ExperimentConfig::new(n, eta)
            });
        }
    }
    let records = harness::run_benchmark(&configs, execution)?;
    harness::write_outputs(&records, &configs[0].outputs).context("writing benchmark outputs")?;
    let mut table = Vec::new();
    harness::write_table_csv(&mut table, &records)?;
    print!("{}", String::from_utf8(table)?);
    for r in records.iter().filter(|r| r.flagged) {
        log::warn!(
            "n={} eta={}: {} of {} trials failed",
            r.config.n_qubits,
            r.config.eta,
            r.failures,
            r.trials.len()
        );
    }
    if records.iter().all(|r| r.fidelity.is_none()) {
        return Err(anyhow::anyhow!("every trial failed").context(SolverFailure));
    }
    Ok(())
}

fn rip_check(args: RipArgs, execution: Execution) -> anyhow::Result<()> {
    let plan = draw_plan(args.n_qubits, args.eta, args.seed)?.with_execution(execution);
    let bracket = empirical_rip(&plan, args.rank, args.trials, args.seed.wrapping_add(1))?;
    let out = json!({
        "n_qubits": args.n_qubits,
        "eta": args.eta,
        "measurements": plan.len(),
        "rank": args.rank,
        "trials": args.trials,
        "min": bracket.min,
        "max": bracket.max,
        "delta_lower": bracket.delta_lower(),
        "delta_upper": bracket.delta_upper(),
        "contains_one": bracket.contains_one(),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

/// Marks an error chain as a solver failure regardless of its root cause.
#[derive(Debug)]
struct SolverFailure;

impl std::fmt::Display for SolverFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("solver failure")
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use qtomo::Error as E;
    if err.downcast_ref::<SolverFailure>().is_some() {
        return EXIT_SOLVER;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io(_) => EXIT_IO,
                E::DecompositionFailure | E::NonFinite { .. } | E::DivisionByZero(_) => EXIT_SOLVER,
                _ => EXIT_VALIDATION,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let execution = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Measure(a) => measure_cmd(a, execution),
        Command::Reconstruct(a) => reconstruct(a, execution),
        Command::Benchmark(a) => benchmark(a, execution),
        Command::RipCheck(a) => rip_check(a, execution),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
