//! Solvers for `min_{a ≥ 0} E(y, M a) + λ‖H a‖₁`, where `H` stacks the
//! weighted corner and difference filters.
//!
//! - [`denoise_dual_apg`]: denoising (`M = I`, squared loss) through its
//!   box-constrained dual, minimized with FISTA and adaptive restart.
//! - [`solve_ip_primal_dual`]: general measurement operators and smooth
//!   data terms with a Condat–Vũ primal-dual iteration.
//! - [`oracle_solve`]: slow projected subgradient reference for small
//!   instances.
//! - [`sweep_theta_lambda`] and the tuning helpers: PSNR-driven parameter
//!   selection.

mod analysis;
mod dual_apg;
mod oracle;
mod primal_dual;
mod sweep;

pub use analysis::StackedAnalysisOp;
pub use dual_apg::{denoise_dual_apg, denoise_dual_apg_from, DualSolution};
pub use oracle::{oracle_solve, oracle_solve_report, OracleReport, ORACLE_MAX_PIXELS};
pub use primal_dual::{solve_ip_primal_dual, DataFit, SquaredLoss};
pub use sweep::{
    golden_section_max, mean_psnr, sweep_theta_lambda, tune_lambda, tune_theta_lambda, SweepEntry,
    SweepTable, Tuned, TuningConfig,
};

use crate::error::{MtvError, Result};

/// Step-size policy for the gradient steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// `1/L` with `L` the analytic bound on `‖H‖²`.
    #[default]
    Fixed,
    /// Start from a fraction of the bound and double on failed
    /// sufficient-decrease tests.
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Threshold on the solver's residual (relative duality gap for the
    /// dual APG, relative fixed-point residual for primal-dual).
    pub tol: f64,
    pub step_rule: StepRule,
    /// Residual evaluation period, in iterations.
    pub check_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iter: 20_000,
            tol: 1e-9,
            step_rule: StepRule::Fixed,
            check_every: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(MtvError::InvalidParameter {
                name: "max_iter",
                reason: "must be at least 1".into(),
            });
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(MtvError::InvalidParameter {
                name: "tol",
                reason: format!("must be positive, got {}", self.tol),
            });
        }
        if self.check_every == 0 {
            return Err(MtvError::InvalidParameter {
                name: "check_every",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverReport {
    pub iterations: usize,
    /// Primal objective at every residual check.
    pub objective_trace: Vec<f64>,
    pub final_objective: f64,
    pub residual: f64,
    pub converged: bool,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
