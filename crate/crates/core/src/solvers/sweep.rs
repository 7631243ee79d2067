//! PSNR-driven parameter selection.

use rayon::prelude::*;

use crate::error::{MtvError, Result};
use crate::grid::PixelImage;
use crate::norms::Parametrization;
use crate::operators::{add_gaussian_noise, psnr, DenoiseProblem};

use super::{denoise_dual_apg, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub theta: f64,
    pub lambda: f64,
    pub psnr_db: f64,
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    /// Row-major over `theta_grid × lambda_grid`.
    pub entries: Vec<SweepEntry>,
    pub theta_count: usize,
    pub lambda_count: usize,
    pub best: usize,
}

impl SweepTable {
    pub fn best_entry(&self) -> &SweepEntry {
        &self.entries[self.best]
    }

    pub fn get(&self, theta_index: usize, lambda_index: usize) -> &SweepEntry {
        &self.entries[theta_index * self.lambda_count + lambda_index]
    }
}

/// Adds noise to `clean` with `seed`, denoises at every grid point and
/// records the PSNR against `clean`. Ties go to the earliest grid point.
pub fn sweep_theta_lambda(
    clean: &PixelImage,
    sigma: f64,
    theta_grid: &[f64],
    lambda_grid: &[f64],
    seed: u64,
    param: Parametrization,
    cfg: &SolverConfig,
) -> Result<SweepTable> {
    if theta_grid.is_empty() || lambda_grid.is_empty() {
        return Err(MtvError::InvalidParameter {
            name: "grid",
            reason: "theta and lambda grids must be non-empty".into(),
        });
    }
    let noisy = add_gaussian_noise(clean, sigma, seed)?;
    let points: Vec<(f64, f64)> = theta_grid
        .iter()
        .flat_map(|&t| lambda_grid.iter().map(move |&l| (t, l)))
        .collect();
    let entries = points
        .par_iter()
        .map(|&(theta, lambda)| {
            let prob = DenoiseProblem::new(noisy.clone(), lambda, theta, param)?;
            let (a, rep) = denoise_dual_apg(&prob, cfg)?;
            Ok(SweepEntry {
                theta,
                lambda,
                psnr_db: psnr(&a, clean)?,
                iterations: rep.iterations,
                objective: rep.final_objective,
                converged: rep.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = entries
        .iter()
        .enumerate()
        .fold(0, |b, (i, e)| if e.psnr_db > entries[b].psnr_db { i } else { b });
    Ok(SweepTable {
        entries,
        theta_count: theta_grid.len(),
        lambda_count: lambda_grid.len(),
        best,
    })
}

/// Golden-section search for the maximum of `f` on `[lo, hi]` using exactly
/// `evals` evaluations (at least 2). Returns the best evaluated point.
pub fn golden_section_max(mut f: impl FnMut(f64) -> Result<f64>, lo: f64, hi: f64, evals: usize) -> Result<(f64, f64)> {
    let evals = evals.max(2);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut best = if f2 > f1 { (x2, f2) } else { (x1, f1) };
    for _ in 2..evals {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
            if f1 > best.1 {
                best = (x1, f1);
            }
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
            if f2 > best.1 {
                best = (x2, f2);
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningConfig {
    pub solver: SolverConfig,
    pub param: Parametrization,
    /// Search interval for `λ`, explored on a log scale.
    pub lambda_range: (f64, f64),
    pub lambda_evals: usize,
    pub theta_evals: usize,
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            solver: SolverConfig {
                tol: 1e-7,
                max_iter: 5_000,
                ..SolverConfig::default()
            },
            param: Parametrization::Reparametrized,
            lambda_range: (1e-3, 0.5),
            lambda_evals: 16,
            theta_evals: 20,
        }
    }
}

/// Best parameters found and the mean PSNR they reach.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tuned {
    pub theta: f64,
    pub lambda: f64,
    pub psnr_db: f64,
}

/// Mean PSNR over `(noisy, clean)` pairs after denoising with `(λ, θ)`.
pub fn mean_psnr(pairs: &[(PixelImage, PixelImage)], lambda: f64, theta: f64, cfg: &TuningConfig) -> Result<f64> {
    let vals = pairs
        .par_iter()
        .map(|(noisy, clean)| {
            let prob = DenoiseProblem::new(noisy.clone(), lambda, theta, cfg.param)?;
            let (a, _) = denoise_dual_apg(&prob, &cfg.solver)?;
            psnr(&a, clean)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Tunes `λ` for fixed `θ` by golden-section search on `log λ`.
pub fn tune_lambda(pairs: &[(PixelImage, PixelImage)], theta: f64, cfg: &TuningConfig) -> Result<Tuned> {
    if pairs.is_empty() {
        return Err(MtvError::InvalidParameter {
            name: "pairs",
            reason: "nothing to tune on".into(),
        });
    }
    let (lo, hi) = cfg.lambda_range;
    let (log_l, best) = golden_section_max(
        |t| mean_psnr(pairs, t.exp(), theta, cfg),
        lo.ln(),
        hi.ln(),
        cfg.lambda_evals,
    )?;
    Ok(Tuned {
        theta,
        lambda: log_l.exp(),
        psnr_db: best,
    })
}

/// Tunes `θ ∈ [0, 1]`, with `λ` re-tuned at every `θ` evaluated: golden
/// section on the interior, then both endpoints, `theta_evals` in total.
/// An endpoint is returned only when it strictly beats every interior
/// point tried.
pub fn tune_theta_lambda(pairs: &[(PixelImage, PixelImage)], cfg: &TuningConfig) -> Result<Tuned> {
    let mut best: Option<Tuned> = None;
    let mut eval = |theta: f64| -> Result<f64> {
        let t = tune_lambda(pairs, theta, cfg)?;
        if best.is_none_or(|b| t.psnr_db > b.psnr_db) {
            best = Some(t);
        }
        Ok(t.psnr_db)
    };
    golden_section_max(&mut eval, 0.0, 1.0, cfg.theta_evals.saturating_sub(2))?;
    eval(0.0)?;
    eval(1.0)?;
    Ok(best.expect("at least two evaluations"))
}
