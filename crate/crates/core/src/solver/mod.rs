//! Quantum-ADMM reconstruction.
//!
//! Solves `min γ‖ρ‖_* + I_C(ρ) + ½‖e‖²  s.t.  A·vec(ρ) + e = y` by
//! alternating, from `ρ⁰ = I/d`, `e⁰ = b⁰ = 0`:
//!
//! 1. `e ← γλ/(1+γλ) · (−b/λ − (Aρ − y))`
//! 2. `C ← herm(ρ − t·A*(Aρ + e − y + b/λ))`, then `ρ ← project(D_τ(C))`
//! 3. `b ← b + κλ(Aρ + e − y)`
//!
//! where `project` clips negative eigenvalues and renormalizes the trace.
//! Iteration stops when `|‖b^k‖ − ‖b^{k−1}‖|` drops below the threshold.

pub mod spectral;

use std::time::{Duration, Instant};

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics;
use crate::noise::MeasurementVector;
use crate::pauli::{SamplingOperator, SamplingPlan};
use crate::states::DensityMatrix;

pub use spectral::{contract_and_project, quantum_project, soft_threshold, svt, Projection, Truncation};

/// Upper end of the multiplier step range with known good convergence.
pub const KAPPA_LIMIT: f64 = 1.618_033_988_749_895;

/// Penalty `λ` used for an `n`-qubit register: 8 for `n = 6..=8`, 14 for `n = 9`,
/// 30 beyond.
///
/// Registers of five qubits or fewer use 2; at `λ = 8` some noiseless
/// four-qubit instances stall at a spurious fixed point.
pub fn default_lambda(n_qubits: usize) -> f64 {
    match n_qubits {
        0..=5 => 2.0,
        6..=8 => 8.0,
        9 => 14.0,
        _ => 30.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaRule {
    /// Use `SolverParams::lambda` as given.
    Fixed,
    /// `λ = 2M/‖y‖₂`, fixed for the run. The multiplier starts at zero, so
    /// the measurement vector stands in for it.
    MeasurementScaled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Nuclear-norm weight `γ`.
    pub gamma: f64,
    /// Penalty `λ`.
    pub lambda: f64,
    /// Gradient step `t`.
    pub step_size: f64,
    /// Multiplier step `κ`.
    pub kappa: f64,
    /// Shrinkage threshold; `None` means `t/λ`.
    pub tau: Option<f64>,
    pub max_iters: usize,
    /// Stop once `|‖b^k‖ − ‖b^{k−1}‖|` falls below this.
    pub stop_threshold: f64,
    /// Keep at most this many spectral components, found by randomized sketching.
    pub rank_cap: Option<usize>,
    pub track_history: bool,
    pub lambda_rule: LambdaRule,
    /// Halve `t` and retry an iteration that produced non-finite values.
    pub backtrack_on_nonfinite: bool,
    /// Seed for the randomized range finder.
    pub sketch_seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            gamma: 1e-4,
            lambda: 8.0,
            step_size: 0.9,
            kappa: 1.099,
            tau: None,
            max_iters: 100,
            stop_threshold: 1e-6,
            rank_cap: None,
            track_history: true,
            lambda_rule: LambdaRule::Fixed,
            backtrack_on_nonfinite: false,
            sketch_seed: 0x5eed,
        }
    }
}

impl SolverParams {
    /// Defaults with the per-size penalty from [`default_lambda`].
    pub fn for_qubits(n_qubits: usize) -> Self {
        SolverParams {
            lambda: default_lambda(n_qubits),
            ..Default::default()
        }
    }

    pub fn tau_for(&self, lambda: f64) -> f64 {
        self.tau.unwrap_or(self.step_size / lambda)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("lambda", self.lambda),
            ("step size", self.step_size),
            ("kappa", self.kappa),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(tau) = self.tau {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
            }
        }
        if self.stop_threshold.is_nan() || self.stop_threshold < 0.0 {
            return Err(Error::InvalidParameter("stop threshold must be nonnegative".into()));
        }
        if self.rank_cap == Some(0) {
            return Err(Error::InvalidParameter("rank cap must be positive".into()));
        }
        if self.kappa >= KAPPA_LIMIT {
            log::warn!("kappa = {} is outside (0, (√5+1)/2); convergence may suffer", self.kappa);
        }
        Ok(())
    }
}

/// One row of the iteration history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// `‖Aρ^k + e^k − y‖₂`.
    pub residual_norm: f64,
    pub b_norm: f64,
    /// `γ‖ρ^k‖_* + ½‖e^k‖²`.
    pub objective: f64,
    /// Hilbert–Schmidt difference to the ground truth, when one was supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hs_difference: Option<f64>,
    /// The projection fell back to `I/d`.
    pub degenerate: bool,
    /// Elapsed time since the solve started.
    pub wall_ms: f64,
}

/// Iterates `(ρ^k, e^k, b^k)` of a run.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub rho: Mat<c64>,
    pub e: Vec<f64>,
    pub b: Vec<f64>,
    pub iter: usize,
    pub history: Vec<IterationRecord>,
}

impl SolverState {
    /// `ρ⁰ = I/d`, `e⁰ = b⁰ = 0`.
    pub fn initial(d: usize, m: usize) -> Self {
        SolverState {
            rho: linalg::scaled_identity(d, 1.0 / d as f64),
            e: vec![0.0; m],
            b: vec![0.0; m],
            iter: 0,
            history: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub rho_hat: DensityMatrix,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub wall_time: Duration,
    /// Penalty and threshold actually used; `None` for the baseline.
    pub lambda: Option<f64>,
    pub tau: Option<f64>,
    pub history: Vec<IterationRecord>,
}

impl SolveReport {
    /// First iteration whose `1 − D` reached `accuracy`, if tracked.
    pub fn iterations_to_accuracy(&self, accuracy: f64) -> Option<usize> {
        self.history
            .iter()
            .find(|r| r.hs_difference.is_some_and(|d| 1.0 - d >= accuracy))
            .map(|r| r.iter)
    }

    /// CSV with columns `iter,residual_norm,b_norm,D,wall_ms`; `D` is empty
    /// when no ground truth was given.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iter,residual_norm,b_norm,D,wall_ms\n");
        for r in &self.history {
            let d = r.hs_difference.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{:.3}\n",
                r.iter, r.residual_norm, r.b_norm, d, r.wall_ms
            ));
        }
        out
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_lengths<O: SamplingOperator + ?Sized>(op: &O, state: &SolverState, y: &[f64]) -> Result<()> {
    let m = op.len();
    for len in [y.len(), state.e.len(), state.b.len()] {
        if len != m {
            return Err(Error::dims(m, len));
        }
    }
    if state.rho.nrows() != op.dim() {
        return Err(Error::dims(op.dim(), state.rho.nrows()));
    }
    Ok(())
}

fn e_from(a_rho: &[f64], y: &[f64], b: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let f = gamma * lambda / (1.0 + gamma * lambda);
    a_rho
        .iter()
        .zip(y)
        .zip(b)
        .map(|((ar, yi), bi)| f * (-bi / lambda - (ar - yi)))
        .collect()
}

/// Closed-form minimizer over `e` of the augmented Lagrangian.
pub fn e_update<O: SamplingOperator + ?Sized>(
    state: &SolverState,
    y: &[f64],
    op: &O,
    params: &SolverParams,
) -> Result<Vec<f64>> {
    check_lengths(op, state, y)?;
    let a_rho = op.apply(state.rho.as_ref())?;
    Ok(e_from(&a_rho, y, &state.b, params.gamma, params.lambda))
}

#[allow(clippy::too_many_arguments)]
fn gradient_step_from<O: SamplingOperator + ?Sized>(
    rho: MatRef<'_, c64>,
    a_rho: &[f64],
    e_next: &[f64],
    y: &[f64],
    b: &[f64],
    op: &O,
    step: f64,
    lambda: f64,
) -> Result<Mat<c64>> {
    let g: Vec<f64> = (0..a_rho.len())
        .map(|i| a_rho[i] + e_next[i] - y[i] + b[i] / lambda)
        .collect();
    let grad = op.adjoint(&g)?;
    let d = rho.nrows();
    let mut c = Mat::from_fn(d, d, |i, j| rho[(i, j)] - grad[(i, j)] * step);
    linalg::make_hermitian(&mut c);
    Ok(c)
}

/// Gradient step on the smooth part, projected onto Hermitian matrices.
pub fn rho_gradient_step<O: SamplingOperator + ?Sized>(
    state: &SolverState,
    e_next: &[f64],
    y: &[f64],
    op: &O,
    params: &SolverParams,
) -> Result<Mat<c64>> {
    check_lengths(op, state, y)?;
    if e_next.len() != op.len() {
        return Err(Error::dims(op.len(), e_next.len()));
    }
    let a_rho = op.apply(state.rho.as_ref())?;
    gradient_step_from(
        state.rho.as_ref(),
        &a_rho,
        e_next,
        y,
        &state.b,
        op,
        params.step_size,
        params.lambda,
    )
}

fn b_from(b: &[f64], a_rho_next: &[f64], e_next: &[f64], y: &[f64], kappa: f64, lambda: f64) -> Vec<f64> {
    (0..b.len())
        .map(|i| b[i] + kappa * lambda * (a_rho_next[i] + e_next[i] - y[i]))
        .collect()
}

/// Multiplier ascent step.
pub fn b_update<O: SamplingOperator + ?Sized>(
    state: &SolverState,
    e_next: &[f64],
    rho_next: MatRef<'_, c64>,
    y: &[f64],
    op: &O,
    params: &SolverParams,
) -> Result<Vec<f64>> {
    check_lengths(op, state, y)?;
    if e_next.len() != op.len() {
        return Err(Error::dims(op.len(), e_next.len()));
    }
    let a_rho = op.apply(rho_next)?;
    Ok(b_from(&state.b, &a_rho, e_next, y, params.kappa, params.lambda))
}

/// Stepwise driver; [`solve`] runs it to completion.
pub struct QuantumAdmm<'a, O: SamplingOperator + ?Sized> {
    op: &'a O,
    y: &'a [f64],
    params: SolverParams,
    truth: Option<&'a DensityMatrix>,
    lambda: f64,
    step_size: f64,
    state: SolverState,
    a_rho: Vec<f64>,
    prev_b_norm: f64,
    converged: bool,
    started: Instant,
}

impl<'a, O: SamplingOperator + ?Sized> QuantumAdmm<'a, O> {
    pub fn new(op: &'a O, y: &'a [f64], params: SolverParams, truth: Option<&'a DensityMatrix>) -> Result<Self> {
        params.validate()?;
        if y.len() != op.len() {
            return Err(Error::dims(op.len(), y.len()));
        }
        if let Some(t) = truth {
            if t.dim() != op.dim() {
                return Err(Error::dims(op.dim(), t.dim()));
            }
        }
        let lambda = match params.lambda_rule {
            LambdaRule::Fixed => params.lambda,
            LambdaRule::MeasurementScaled => {
                let ny = norm2(y);
                if ny == 0.0 {
                    return Err(Error::DivisionByZero("measurement vector is zero"));
                }
                2.0 * y.len() as f64 / ny
            }
        };
        let state = SolverState::initial(op.dim(), op.len());
        let a_rho = op.apply(state.rho.as_ref())?;
        Ok(QuantumAdmm {
            op,
            y,
            step_size: params.step_size,
            params,
            truth,
            lambda,
            state,
            a_rho,
            prev_b_norm: 0.0,
            converged: false,
            started: Instant::now(),
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tau(&self) -> f64 {
        self.params.tau.unwrap_or(self.step_size / self.lambda)
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn finished(&self) -> bool {
        self.converged || self.state.iter >= self.params.max_iters
    }

    /// Performs one full iteration. Returns `true` once the run is finished.
    pub fn step(&mut self) -> Result<bool> {
        if self.finished() {
            return Ok(true);
        }
        let mut halvings = 0;
        let (rho, e, b, a_rho, degenerate) = loop {
            match self.try_step() {
                Ok(next) => break next,
                Err(Error::NonFinite { .. }) if self.params.backtrack_on_nonfinite && halvings < 30 => {
                    halvings += 1;
                    self.step_size *= 0.5;
                    log::debug!("non-finite iterate, retrying with t = {}", self.step_size);
                }
                Err(err) => return Err(err),
            }
        };
        let b_norm = norm2(&b);
        let residual: Vec<f64> = (0..a_rho.len()).map(|i| a_rho[i] + e[i] - self.y[i]).collect();
        self.state.rho = rho;
        self.state.e = e;
        self.state.b = b;
        self.state.iter += 1;
        self.a_rho = a_rho;

        if self.params.track_history {
            let hs = match self.truth {
                Some(t) => Some(metrics::hs_difference_matrices(t.as_ref(), self.state.rho.as_ref())?),
                None => None,
            };
            self.state.history.push(IterationRecord {
                iter: self.state.iter,
                residual_norm: norm2(&residual),
                b_norm,
                objective: self.params.gamma * linalg::trace(self.state.rho.as_ref()).re
                    + 0.5 * norm2(&self.state.e).powi(2),
                hs_difference: hs,
                degenerate,
                wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
            });
        }
        if (b_norm - self.prev_b_norm).abs() < self.params.stop_threshold {
            self.converged = true;
        }
        self.prev_b_norm = b_norm;
        Ok(self.finished())
    }

    #[allow(clippy::type_complexity)]
    fn try_step(&self) -> Result<(Mat<c64>, Vec<f64>, Vec<f64>, Vec<f64>, bool)> {
        let iteration = self.state.iter + 1;
        let s = &self.state;
        let e = e_from(&self.a_rho, self.y, &s.b, self.params.gamma, self.lambda);
        let c = gradient_step_from(
            s.rho.as_ref(),
            &self.a_rho,
            &e,
            self.y,
            &s.b,
            self.op,
            self.step_size,
            self.lambda,
        )?;
        if !linalg::all_finite(c.as_ref()) {
            return Err(Error::NonFinite { iteration });
        }
        let truncation = Truncation::from_rank_cap(
            self.params.rank_cap,
            self.params.sketch_seed.wrapping_add(iteration as u64),
        );
        let projected = contract_and_project(c.as_ref(), self.tau(), truncation).map_err(|err| match err {
            Error::DecompositionFailure if !linalg::all_finite(c.as_ref()) => Error::NonFinite { iteration },
            other => other,
        })?;
        let a_rho = self.op.apply(projected.matrix.as_ref())?;
        let b = b_from(&s.b, &a_rho, &e, self.y, self.params.kappa, self.lambda);
        if b.iter().chain(&e).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration });
        }
        Ok((projected.matrix, e, b, a_rho, projected.degenerate))
    }

    pub fn run(mut self) -> Result<SolveReport> {
        while !self.step()? {}
        self.into_report()
    }

    pub fn into_report(self) -> Result<SolveReport> {
        let final_residual = norm2(
            &(0..self.a_rho.len())
                .map(|i| self.a_rho[i] + self.state.e[i] - self.y[i])
                .collect::<Vec<_>>(),
        );
        let tau = self.tau();
        Ok(SolveReport {
            rho_hat: DensityMatrix::from_matrix(self.op.n_qubits(), self.state.rho)?,
            iterations: self.state.iter,
            converged: self.converged,
            final_residual,
            wall_time: self.started.elapsed(),
            lambda: Some(self.lambda),
            tau: Some(tau),
            history: self.state.history,
        })
    }
}

fn check_plan(y: &MeasurementVector, plan: &SamplingPlan) -> Result<()> {
    if y.plan() != plan {
        return Err(Error::InvalidParameter(
            "measurement vector was produced by a different sampling plan".into(),
        ));
    }
    Ok(())
}

/// Reconstructs a density matrix from `y` with the Quantum-ADMM iteration.
pub fn solve(
    y: &MeasurementVector,
    plan: &SamplingPlan,
    params: &SolverParams,
    ground_truth: Option<&DensityMatrix>,
) -> Result<SolveReport> {
    check_plan(y, plan)?;
    solve_with(plan, y.values(), params, ground_truth)
}

/// [`solve`] against any sampling operator.
pub fn solve_with<O: SamplingOperator + ?Sized>(
    op: &O,
    y: &[f64],
    params: &SolverParams,
    ground_truth: Option<&DensityMatrix>,
) -> Result<SolveReport> {
    QuantumAdmm::new(op, y, params.clone(), ground_truth)?.run()
}

/// Projected gradient descent on `½‖A·vec(ρ) − y‖²`, projecting onto
/// density matrices after every step. Stops when the residual norm changes by
/// less than `stop_threshold`.
pub fn baseline_lsq(y: &MeasurementVector, plan: &SamplingPlan, params: &SolverParams) -> Result<SolveReport> {
    baseline_lsq_with(y, plan, params, None)
}

pub fn baseline_lsq_with(
    y: &MeasurementVector,
    plan: &SamplingPlan,
    params: &SolverParams,
    ground_truth: Option<&DensityMatrix>,
) -> Result<SolveReport> {
    check_plan(y, plan)?;
    params.validate()?;
    let started = Instant::now();
    let y = y.values();
    let d = plan.dim();
    let mut rho = linalg::scaled_identity(d, 1.0 / d as f64);
    let mut a_rho = plan.apply(rho.as_ref())?;
    let mut residual_norm = norm2(&(0..y.len()).map(|i| a_rho[i] - y[i]).collect::<Vec<_>>());
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iters {
        let r: Vec<f64> = (0..y.len()).map(|i| a_rho[i] - y[i]).collect();
        let grad = plan.adjoint(&r)?;
        let mut c = Mat::from_fn(d, d, |i, j| rho[(i, j)] - grad[(i, j)] * params.step_size);
        linalg::make_hermitian(&mut c);
        if !linalg::all_finite(c.as_ref()) {
            return Err(Error::NonFinite { iteration: iterations + 1 });
        }
        let projected = quantum_project(c.as_ref())?;
        rho = projected.matrix;
        a_rho = plan.apply(rho.as_ref())?;
        iterations += 1;
        let next = norm2(&(0..y.len()).map(|i| a_rho[i] - y[i]).collect::<Vec<_>>());
        if params.track_history {
            let hs = match ground_truth {
                Some(t) => Some(metrics::hs_difference_matrices(t.as_ref(), rho.as_ref())?),
                None => None,
            };
            history.push(IterationRecord {
                iter: iterations,
                residual_norm: next,
                b_norm: 0.0,
                objective: 0.5 * next * next,
                hs_difference: hs,
                degenerate: projected.degenerate,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            });
        }
        let delta = (next - residual_norm).abs();
        residual_norm = next;
        if delta < params.stop_threshold {
            converged = true;
            break;
        }
    }
    Ok(SolveReport {
        rho_hat: DensityMatrix::from_matrix(plan.n_qubits(), rho)?,
        iterations,
        converged,
        final_residual: residual_norm,
        wall_time: started.elapsed(),
        lambda: None,
        tau: None,
        history,
    })
}
