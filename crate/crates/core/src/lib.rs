//! Multi-task regression with ℓ1/ℓ2 (group Lasso) regularization.
//!
//! The crate provides
//!
//! * a block coordinate descent solver for the group Lasso with KKT
//!   certificates ([`solver`]),
//! * the sparsity-overlap function ψ and the rescaled sample size θ that
//!   govern exact row-support recovery ([`theory`]),
//! * the primal-dual witness used to certify recovery ([`witness`]),
//! * seeded problem generators and Monte Carlo phase-transition sweeps
//!   ([`ensembles`], [`experiments`]).
//!
//! Numerical routines are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the double-precision types used by the experiments.

// `!(x > 0)` style checks deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensembles;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod matrix;
pub mod rng;
pub mod scalar;
pub mod solver;
pub mod theory;
pub mod witness;

pub use ensembles::{
    assemble_observations, check_assumptions, make_coefficients, sample_design, sample_noise,
    AssumptionReport, Coefficients, Covariance, DesignSampler, EnsembleSpec, Family, Placement,
};
pub use error::{Error, Result};
pub use experiments::{
    chi2_tail_check, estimate_theta50, lambda_from_rule, run_trial, sample_size, sweep_theta,
    theta50_scan, Chi2TailReport, LambdaRule, Method, SweepPoint, SweepResult, SweepSpec,
    Theta50Row, TrialOutcome,
};
pub use linalg::{
    block_norm, cholesky, linf_operator_norm, solve_spd, spectral_norm, Cholesky, NormOrder,
};
pub use matrix::DenseMatrix;
pub use scalar::Scalar;
pub use solver::{
    group_lasso, kkt_residual, lasso_union_rows, restricted_group_lasso, support, KktReport,
    SolveError, Solution, SolverConfig,
};
pub use theory::{
    bmin, ordinary_lasso_complexity, psi_bounds, psi_two_by_two, sample_complexity_theta,
    sparsity_overlap, zeta, SupportSet, TheoryReport, TwoByTwo,
};
pub use witness::{
    construct_witness, m_matrix, zeta_perturbation_check, MMatrix, WitnessReport, ZetaCheck,
};

/// Double-precision matrix.
pub type Matrix = DenseMatrix<f64>;
/// Single-precision matrix.
pub type Matrix32 = DenseMatrix<f32>;
pub type Solution64 = Solution<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type WitnessReport64 = WitnessReport<f64>;
pub type TheoryReport64 = TheoryReport<f64>;

/// Version string recorded in emitted artifacts.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
