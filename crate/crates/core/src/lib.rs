//! Compressive quantum state tomography.
//!
//! Reconstructs low-rank `n`-qubit density matrices from a random subset of
//! Pauli expectation values with a Quantum-ADMM iteration: a gradient step on
//! the measurement misfit, singular-value contraction, and projection onto
//! Hermitian, positive-semidefinite, unit-trace matrices.
//!
//! - [`pauli`]: Pauli strings, sampling plans, the matrix-free operator `A` and its adjoint.
//! - [`states`]: Wishart, W and GHZ states, density-matrix validation.
//! - [`noise`]: noisy measurement vectors at a prescribed SNR.
//! - [`solver`]: the reconstruction engine and a projected least-squares baseline.
//! - [`metrics`]: Hilbert–Schmidt difference, fidelity, purity, numerical rank.
//! - [`formats`]: the measurement and density-matrix file formats.
//! - [`harness`]: seeded benchmark sweeps producing table and curve CSVs.
//!
//! ```
//! use qtomo::{noise, pauli, solver, states, metrics};
//!
//! let truth = states::wishart_state(4, 1, 7).unwrap();
//! let plan = pauli::draw_plan(4, 0.3, 7).unwrap();
//! let y = noise::measure(&truth, &plan, noise::NoiseSpec::noiseless()).unwrap();
//! let report = solver::solve(&y, &plan, &solver::SolverParams::for_qubits(4), Some(&truth)).unwrap();
//! assert!(metrics::fidelity(&truth, &report.rho_hat).unwrap() > 0.99);
//! ```

pub mod error;
pub mod exec;
pub mod formats;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod noise;
pub mod pauli;
pub mod solver;
pub mod states;

pub use error::{Error, Result};
pub use exec::Execution;
pub use noise::{MeasurementVector, NoiseSpec};
pub use pauli::{PauliLabel, PauliString, SamplingOperator, SamplingPlan};
pub use solver::{SolveReport, SolverParams};
pub use states::DensityMatrix;

pub use faer::{c64, Mat, MatRef};
