//! Denoising through the dual problem.
//!
//! For `P(a) = ½‖y − a‖² + λ‖Ha‖₁ + ι_{a≥0}(a)`, writing
//! `λ‖Ha‖₁ = max_{‖v‖_∞ ≤ λ} ⟨Ha, v⟩` and minimizing over `a` first gives
//! `a(v) = max(y − Hᵀv, 0)` and the dual
//!
//! ```text
//! min_{‖v‖_∞ ≤ λ}  φ(v) = ½‖max(y − Hᵀv, 0)‖²,     ∇φ(v) = −H a(v).
//! ```
//!
//! `∇φ` is `‖H‖²`-Lipschitz. Strong duality gives the certificate
//! `gap(v) = P(a(v)) − (½‖y‖² − φ(v)) ≥ ½‖a(v) − a⋆‖²`.

use crate::error::{MtvError, Result};
use crate::grid::PixelImage;
use crate::operators::DenoiseProblem;

use super::analysis::StackedAnalysisOp;
use super::{dot, SolverConfig, SolverReport, StepRule};

/// Primal solution together with the dual variable that produced it.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub image: PixelImage,
    pub dual: Vec<f64>,
    pub report: SolverReport,
}

/// Solves the denoising problem from a zero dual start.
pub fn denoise_dual_apg(prob: &DenoiseProblem, cfg: &SolverConfig) -> Result<(PixelImage, SolverReport)> {
    let sol = denoise_dual_apg_from(prob, cfg, None)?;
    Ok((sol.image, sol.report))
}

/// Solves the denoising problem from an optional dual warm start, which is
/// projected onto the box first.
pub fn denoise_dual_apg_from(
    prob: &DenoiseProblem,
    cfg: &SolverConfig,
    init: Option<&[f64]>,
) -> Result<DualSolution> {
    cfg.validate()?;
    let (rows, cols) = prob.y.dim();
    let op = StackedAnalysisOp::for_problem(rows, cols, prob.theta, prob.param)?;
    let lambda = prob.lambda;
    let y = prob.y.as_slice();
    let n = op.input_len();
    let m = op.output_len();

    let mut v = match init {
        Some(v0) if v0.len() != m => {
            return Err(MtvError::DimensionMismatch {
                expected: format!("dual of length {m}"),
                got: format!("length {}", v0.len()),
            })
        }
        Some(v0) => v0.iter().map(|x| x.clamp(-lambda, lambda)).collect(),
        None => vec![0.0; m],
    };

    let half_y2 = 0.5 * dot(y, y);
    let mut ws = Workspace::new(n, m);
    let mut report = SolverReport::default();

    if lambda == 0.0 {
        let a: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
        let obj = primal_objective(&op, y, &a, lambda, &mut ws.hv);
        report.final_objective = obj;
        report.objective_trace.push(obj);
        report.converged = true;
        return Ok(DualSolution {
            image: PixelImage::from_vec(rows, cols, a)?,
            dual: v,
            report,
        });
    }

    let bound = op.norm_sq_bound();
    let mut lip = match cfg.step_rule {
        StepRule::Fixed => bound,
        StepRule::Backtracking => bound / 16.0,
    };

    let mut w = v.clone();
    let mut v_new = vec![0.0; m];
    let mut t = 1.0_f64;
    let mut k = 0;
    loop {
        if k % cfg.check_every == 0 || k == cfg.max_iter {
            let (obj, gap) = certificate(&op, y, &v, lambda, half_y2, &mut ws);
            report.objective_trace.push(obj);
            report.residual = gap.max(0.0) / obj.abs().max(1.0);
            if report.residual <= cfg.tol {
                report.converged = true;
                break;
            }
            if k == cfg.max_iter {
                break;
            }
        }

        // Gradient step at the extrapolated point w.
        let phi_w = primal_from_dual(&op, y, &w, &mut ws.a, &mut ws.htv);
        op.apply(&ws.a, &mut ws.hv);
        loop {
            for i in 0..m {
                v_new[i] = (w[i] + ws.hv[i] / lip).clamp(-lambda, lambda);
            }
            if cfg.step_rule == StepRule::Fixed || lip >= bound {
                break;
            }
            // φ(v⁺) ≤ φ(w) + ⟨∇φ(w), v⁺ − w⟩ + L/2 ‖v⁺ − w‖²
            let phi_new = primal_from_dual(&op, y, &v_new, &mut ws.a2, &mut ws.htv);
            let mut lin = 0.0;
            let mut quad = 0.0;
            for i in 0..m {
                let d = v_new[i] - w[i];
                lin -= ws.hv[i] * d;
                quad += d * d;
            }
            if phi_new <= phi_w + lin + 0.5 * lip * quad + 1e-15 * phi_w.abs() {
                break;
            }
            lip = (2.0 * lip).min(bound);
        }

        // Adaptive restart when the step opposes the momentum direction.
        let mut restart = 0.0;
        for i in 0..m {
            restart += (w[i] - v_new[i]) * (v_new[i] - v[i]);
        }
        if restart > 0.0 {
            t = 1.0;
            w.copy_from_slice(&v_new);
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            for i in 0..m {
                w[i] = v_new[i] + beta * (v_new[i] - v[i]);
            }
            t = t_next;
        }
        std::mem::swap(&mut v, &mut v_new);
        k += 1;
    }

    report.iterations = k;
    primal_from_dual(&op, y, &v, &mut ws.a, &mut ws.htv);
    report.final_objective = primal_objective(&op, y, &ws.a, lambda, &mut ws.hv);
    Ok(DualSolution {
        image: PixelImage::from_vec(rows, cols, ws.a)?,
        dual: v,
        report,
    })
}

struct Workspace {
    a: Vec<f64>,
    a2: Vec<f64>,
    htv: Vec<f64>,
    hv: Vec<f64>,
}

impl Workspace {
    fn new(n: usize, m: usize) -> Self {
        Workspace {
            a: vec![0.0; n],
            a2: vec![0.0; n],
            htv: vec![0.0; n],
            hv: vec![0.0; m],
        }
    }
}

/// Writes `a(v) = max(y − Hᵀv, 0)` into `a` and returns `φ(v)`.
fn primal_from_dual(op: &StackedAnalysisOp, y: &[f64], v: &[f64], a: &mut [f64], htv: &mut [f64]) -> f64 {
    op.adjoint(v, htv);
    let mut phi = 0.0;
    for i in 0..a.len() {
        let z = (y[i] - htv[i]).max(0.0);
        a[i] = z;
        phi += z * z;
    }
    0.5 * phi
}

fn primal_objective(op: &StackedAnalysisOp, y: &[f64], a: &[f64], lambda: f64, scratch: &mut [f64]) -> f64 {
    let data: f64 = a.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
    0.5 * data + lambda * op.l1(a, scratch)
}

/// `(P(a(v)), P(a(v)) − D(v))`.
fn certificate(
    op: &StackedAnalysisOp,
    y: &[f64],
    v: &[f64],
    lambda: f64,
    half_y2: f64,
    ws: &mut Workspace,
) -> (f64, f64) {
    let phi = primal_from_dual(op, y, v, &mut ws.a, &mut ws.htv);
    let primal = primal_objective(op, y, &ws.a, lambda, &mut ws.hv);
    (primal, primal - (half_y2 - phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridLevel;
    use crate::norms::Parametrization;
    use crate::operators::objective;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(rng: &mut ChaCha8Rng, n: u32, lambda: f64, theta: f64) -> DenoiseProblem {
        let y = PixelImage::from_fn_at(GridLevel(n), |_| rng.gen_range(-0.2..1.2));
        DenoiseProblem::new(y, lambda, theta, Parametrization::Reparametrized).unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let y = PixelImage::zeros_at(GridLevel(3));
        let p = DenoiseProblem::new(y, 0.3, 0.5, Parametrization::Reparametrized).unwrap();
        let (a, rep) = denoise_dual_apg(&p, &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        assert!(a.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_lambda_projects_onto_cone() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = problem(&mut rng, 3, 0.0, 0.5);
        let (a, rep) = denoise_dual_apg(&p, &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(a, p.y.map(|v| v.max(0.0)));
    }

    #[test]
    fn converges_with_small_gap_and_matches_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for theta in [0.0, 0.5, 1.0] {
            let p = problem(&mut rng, 4, 0.1, theta);
            let (a, rep) = denoise_dual_apg(&p, &SolverConfig::default()).unwrap();
            assert!(rep.converged, "theta {theta}: residual {}", rep.residual);
            assert!(rep.residual <= 1e-9);
            assert!(a.is_nonneg());
            let obj = objective(&a, &p).unwrap();
            assert!((obj - rep.final_objective).abs() < 1e-12);
        }
    }

    #[test]
    fn backtracking_reaches_same_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = problem(&mut rng, 3, 0.15, 0.4);
        let cfg = SolverConfig::default().with_tol(1e-13);
        let (a, _) = denoise_dual_apg(&p, &cfg).unwrap();
        let bt = SolverConfig { step_rule: StepRule::Backtracking, ..cfg };
        let (b, rep) = denoise_dual_apg(&p, &bt).unwrap();
        assert!(rep.converged);
        assert!(a.max_abs_diff(&b).unwrap() < 1e-6);
    }

    #[test]
    fn non_convergence_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = problem(&mut rng, 5, 0.2, 0.5);
        let cfg = SolverConfig::default().with_max_iter(3);
        let (a, rep) = denoise_dual_apg(&p, &cfg).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
        assert!(a.is_nonneg());
    }

    #[test]
    fn warm_start_dimension_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = problem(&mut rng, 2, 0.2, 0.5);
        assert!(denoise_dual_apg_from(&p, &SolverConfig::default(), Some(&[0.0; 3])).is_err());
    }

    #[test]
    fn larger_lambda_gives_smaller_regularizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y = PixelImage::from_fn_at(GridLevel(4), |_| rng.gen_range(0.0..1.0));
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let lambda = 0.01 * 1.5f64.powi(k);
            let p = DenoiseProblem::new(y.clone(), lambda, 0.5, Parametrization::Exact).unwrap();
            let (a, _) = denoise_dual_apg(&p, &SolverConfig::default().with_tol(1e-12)).unwrap();
            let r = crate::norms::discrete_theta_norm(&a, 0.5).unwrap();
            assert!(r <= prev + 1e-7, "lambda {lambda}: {r} > {prev}");
            prev = r;
        }
    }
}
