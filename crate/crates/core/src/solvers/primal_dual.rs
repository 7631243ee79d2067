//! Condat–Vũ primal-dual splitting for
//! `min_{a ≥ 0} E(y, M a) + λ‖H a‖₁` with `E` smooth in its second argument.
//!
//! ```text
//! a⁺ = P₊(a − τ(Mᵀ∇E(y, M a) + Hᵀ v))
//! v⁺ = clip_λ(v + σ H(2a⁺ − a))
//! ```
//!
//! converges when `1/τ − σ‖H‖² ≥ L_E‖M‖²/2`, which also forces
//! `στ‖H‖² < 1`.

use crate::error::{MtvError, Result};
use crate::grid::PixelImage;
use crate::norms::{check_theta, Parametrization};
use crate::operators::MeasurementOp;

use super::analysis::StackedAnalysisOp;
use super::{norm2, SolverConfig, SolverReport};

/// Smooth convex data-fidelity term `E(y, z)`, differentiable in `z`.
///
/// Uniqueness of the minimizer relies on `E(y, ·)` being strictly convex.
pub trait DataFit: Sync {
    fn value(&self, y: &[f64], z: &[f64]) -> f64;
    /// Writes `∇_z E(y, z)` into `out`.
    fn gradient(&self, y: &[f64], z: &[f64], out: &mut [f64]);
    /// Lipschitz constant of `∇_z E(y, ·)`.
    fn lipschitz(&self) -> f64;
}

/// `½‖y − z‖²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredLoss;

impl DataFit for SquaredLoss {
    fn value(&self, y: &[f64], z: &[f64]) -> f64 {
        0.5 * y.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }

    fn gradient(&self, y: &[f64], z: &[f64], out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(z).zip(y) {
            *o = a - b;
        }
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }
}

/// Minimizes `E(y, M a) + λ‖H_θ a‖₁` over nonnegative images on the input
/// grid of `op`. The residual is the relative fixed-point residual
/// `max(‖a⁺−a‖/max(1,‖a⁺‖), ‖v⁺−v‖/max(1,‖v⁺‖))`.
#[allow(clippy::too_many_arguments)]
pub fn solve_ip_primal_dual(
    op: &MeasurementOp,
    y: &[f64],
    lambda: f64,
    theta: f64,
    param: Parametrization,
    fit: &dyn DataFit,
    cfg: &SolverConfig,
) -> Result<(PixelImage, SolverReport)> {
    cfg.validate()?;
    check_theta(theta)?;
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(MtvError::InvalidLambda(lambda));
    }
    if y.len() != op.output_dim() {
        return Err(MtvError::DimensionMismatch {
            expected: format!("{} measurements", op.output_dim()),
            got: format!("{}", y.len()),
        });
    }
    let (rows, cols) = op.input_dims();
    let h = StackedAnalysisOp::for_problem(rows, cols, theta, param)?;
    let n = h.input_len();
    let m = h.output_len();

    let lf = fit.lipschitz() * op.norm_sq();
    let lh = h.norm_sq_bound();
    let sigma = 1.0 / lh.sqrt();
    let tau = 0.99 / (0.5 * lf + sigma * lh);

    let mut a = vec![0.0; n];
    let mut a_new = vec![0.0; n];
    let mut v = vec![0.0; m];
    let mut grad_z = vec![0.0; y.len()];
    let mut hv = vec![0.0; n];
    let mut hx = vec![0.0; m];
    let mut ext = vec![0.0; n];
    let mut report = SolverReport::default();

    let objective = |a: &[f64], scratch: &mut [f64]| -> f64 {
        let z = op.apply(a);
        fit.value(y, &z) + lambda * h.l1(a, scratch)
    };

    let mut k = 0;
    while k < cfg.max_iter {
        let z = op.apply(&a);
        fit.gradient(y, &z, &mut grad_z);
        let g = op.adjoint(&grad_z);
        h.adjoint(&v, &mut hv);
        for i in 0..n {
            a_new[i] = (a[i] - tau * (g[i] + hv[i])).max(0.0);
            ext[i] = 2.0 * a_new[i] - a[i];
        }
        h.apply(&ext, &mut hx);
        let mut dv2 = 0.0;
        let mut v2 = 0.0;
        for i in 0..m {
            let nv = (v[i] + sigma * hx[i]).clamp(-lambda, lambda);
            dv2 += (nv - v[i]) * (nv - v[i]);
            v2 += nv * nv;
            v[i] = nv;
        }
        let mut da2 = 0.0;
        for i in 0..n {
            da2 += (a_new[i] - a[i]) * (a_new[i] - a[i]);
        }
        std::mem::swap(&mut a, &mut a_new);
        k += 1;

        if k % cfg.check_every == 0 {
            let res = (da2.sqrt() / norm2(&a).max(1.0)).max(dv2.sqrt() / v2.sqrt().max(1.0));
            report.residual = res;
            report.objective_trace.push(objective(&a, &mut hx));
            if res <= cfg.tol {
                report.converged = true;
                break;
            }
        }
    }
    report.iterations = k;
    report.final_objective = objective(&a, &mut hx);
    Ok((PixelImage::from_vec(rows, cols, a)?, report))
}
