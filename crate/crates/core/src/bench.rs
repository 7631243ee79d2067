//! TV-versus-MTV denoising benchmark over a set of clean images.
//!
//! For every noise level each image gets seeded Gaussian noise; TV (`θ = 0`)
//! and MTV (`θ` tuned) are then tuned for PSNR either per image or jointly
//! over the whole set.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{MtvError, Result};
use crate::grid::PixelImage;
use crate::io::ReportRow;
use crate::operators::{add_gaussian_noise, psnr, DenoiseProblem};
use crate::solvers::{denoise_dual_apg, tune_lambda, tune_theta_lambda, Tuned, TuningConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TuneMode {
    /// `(λ, θ)` chosen separately for every image.
    #[default]
    PerImage,
    /// One `(λ, θ)` per noise level, maximizing the mean PSNR.
    PerSigma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub sigmas: Vec<f64>,
    pub mode: TuneMode,
    /// MTV with this `θ` and only `λ` tuned, instead of tuning both.
    pub fixed_theta: Option<f64>,
    pub seed: u64,
    pub tuning: TuningConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sigmas: vec![5.0 / 255.0, 15.0 / 255.0, 25.0 / 255.0],
            mode: TuneMode::PerImage,
            fixed_theta: None,
            seed: 0,
            tuning: TuningConfig::default(),
        }
    }
}

/// Averages for one noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub sigma: f64,
    pub tv_mean_psnr: f64,
    pub mtv_mean_psnr: f64,
    pub theta_mean: f64,
    /// Sample standard deviation; zero for a single tuned `θ`.
    pub theta_std: f64,
    /// Tuned `θ` per image (one entry in per-σ mode).
    pub thetas: Vec<f64>,
}

impl BenchSummary {
    pub fn gain_db(&self) -> f64 {
        self.mtv_mean_psnr - self.tv_mean_psnr
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    /// One row per (image, σ, method), methods `tv` then `mtv`.
    pub rows: Vec<ReportRow>,
    pub summaries: Vec<BenchSummary>,
}

/// Noise seed of image `index` at noise level `sigma_index`.
pub fn noise_seed(seed: u64, sigma_index: usize, index: usize) -> u64 {
    seed.wrapping_add(1_000_003 * sigma_index as u64).wrapping_add(index as u64)
}

pub fn run_bench(images: &[(String, PixelImage)], cfg: &BenchConfig) -> Result<BenchOutput> {
    if images.is_empty() {
        return Err(MtvError::InvalidParameter {
            name: "images",
            reason: "benchmark needs at least one image".into(),
        });
    }
    if cfg.sigmas.is_empty() {
        return Err(MtvError::InvalidParameter {
            name: "sigmas",
            reason: "benchmark needs at least one noise level".into(),
        });
    }
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (si, &sigma) in cfg.sigmas.iter().enumerate() {
        let pairs: Vec<(PixelImage, PixelImage)> = images
            .iter()
            .enumerate()
            .map(|(i, (_, clean))| Ok((add_gaussian_noise(clean, sigma, noise_seed(cfg.seed, si, i))?, clean.clone())))
            .collect::<Result<_>>()?;

        let (tv, mtv): (Vec<Tuned>, Vec<Tuned>) = match cfg.mode {
            TuneMode::PerImage => {
                let tuned = pairs
                    .par_iter()
                    .map(|p| {
                        let one = std::slice::from_ref(p);
                        Ok((tune_lambda(one, 0.0, &cfg.tuning)?, tune_mtv(one, cfg)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                tuned.into_iter().unzip()
            }
            TuneMode::PerSigma => {
                let t = tune_lambda(&pairs, 0.0, &cfg.tuning)?;
                let m = tune_mtv(&pairs, cfg)?;
                (vec![t; pairs.len()], vec![m; pairs.len()])
            }
        };

        let scored = pairs
            .par_iter()
            .enumerate()
            .map(|(i, (noisy, clean))| {
                let id = &images[i].0;
                Ok([
                    report_row(id, sigma, noisy, clean, &tv[i], "tv", &cfg.tuning)?,
                    report_row(id, sigma, noisy, clean, &mtv[i], "mtv", &cfg.tuning)?,
                ])
            })
            .collect::<Result<Vec<_>>>()?;

        let n = scored.len() as f64;
        let tv_mean = scored.iter().map(|r| r[0].psnr_db).sum::<f64>() / n;
        let mtv_mean = scored.iter().map(|r| r[1].psnr_db).sum::<f64>() / n;
        let thetas: Vec<f64> = match cfg.mode {
            TuneMode::PerImage => mtv.iter().map(|t| t.theta).collect(),
            TuneMode::PerSigma => vec![mtv[0].theta],
        };
        let (theta_mean, theta_std) = mean_std(&thetas);
        summaries.push(BenchSummary {
            sigma,
            tv_mean_psnr: tv_mean,
            mtv_mean_psnr: mtv_mean,
            theta_mean,
            theta_std,
            thetas,
        });
        rows.extend(scored.into_iter().flatten());
    }
    Ok(BenchOutput { rows, summaries })
}

fn tune_mtv(pairs: &[(PixelImage, PixelImage)], cfg: &BenchConfig) -> Result<Tuned> {
    match cfg.fixed_theta {
        Some(theta) => tune_lambda(pairs, theta, &cfg.tuning),
        None => tune_theta_lambda(pairs, &cfg.tuning),
    }
}

fn report_row(
    id: &str,
    sigma: f64,
    noisy: &PixelImage,
    clean: &PixelImage,
    params: &Tuned,
    method: &str,
    tuning: &TuningConfig,
) -> Result<ReportRow> {
    let prob = DenoiseProblem::new(noisy.clone(), params.lambda, params.theta, tuning.param)?;
    let start = Instant::now();
    let (a, rep) = denoise_dual_apg(&prob, &tuning.solver)?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(ReportRow {
        image_id: id.to_string(),
        sigma,
        lambda: params.lambda,
        theta: params.theta,
        psnr_db: psnr(&a, clean)?,
        iterations: rep.iterations,
        runtime_ms,
        objective: rep.final_objective,
        method: method.to_string(),
    })
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::axis_aligned_image;

    fn quick() -> BenchConfig {
        BenchConfig {
            sigmas: vec![0.1],
            tuning: TuningConfig {
                lambda_evals: 5,
                theta_evals: 4,
                ..TuningConfig::default()
            },
            ..BenchConfig::default()
        }
    }

    #[test]
    fn one_row_per_method_and_sigma() {
        let img = axis_aligned_image(16, 16, 2, 1).unwrap();
        let mut cfg = quick();
        cfg.sigmas = vec![0.05, 0.1];
        let out = run_bench(&[("a".into(), img)], &cfg).unwrap();
        assert_eq!(out.rows.len(), 4);
        assert_eq!(out.summaries.len(), 2);
        assert_eq!(out.rows.iter().filter(|r| r.method == "tv").count(), 2);
        assert!(out.rows.iter().filter(|r| r.method == "tv").all(|r| r.theta == 0.0));
    }

    #[test]
    fn deterministic_apart_from_timing() {
        let imgs: Vec<_> = (0..2).map(|s| (format!("i{s}"), axis_aligned_image(16, 16, 2, s).unwrap())).collect();
        let strip = |mut o: BenchOutput| {
            o.rows.iter_mut().for_each(|r| r.runtime_ms = 0.0);
            o
        };
        let a = strip(run_bench(&imgs, &quick()).unwrap());
        let b = strip(run_bench(&imgs, &quick()).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn per_sigma_mode_shares_parameters() {
        let imgs: Vec<_> = (0..2).map(|s| (format!("i{s}"), axis_aligned_image(16, 16, 2, s).unwrap())).collect();
        let cfg = BenchConfig {
            mode: TuneMode::PerSigma,
            ..quick()
        };
        let out = run_bench(&imgs, &cfg).unwrap();
        let mtv: Vec<_> = out.rows.iter().filter(|r| r.method == "mtv").collect();
        assert_eq!((mtv[0].lambda, mtv[0].theta), (mtv[1].lambda, mtv[1].theta));
        assert_eq!(out.summaries[0].thetas.len(), 1);
    }

    #[test]
    fn fixed_theta_is_used() {
        let img = axis_aligned_image(16, 16, 2, 4).unwrap();
        let cfg = BenchConfig {
            fixed_theta: Some(0.4),
            ..quick()
        };
        let out = run_bench(&[("a".into(), img)], &cfg).unwrap();
        assert_eq!(out.rows[1].theta, 0.4);
        assert_eq!(out.summaries[0].thetas, vec![0.4]);
    }

    #[test]
    fn rejects_empty_inputs() {
        assert!(run_bench(&[], &quick()).is_err());
        let img = axis_aligned_image(8, 8, 1, 1).unwrap();
        let cfg = BenchConfig { sigmas: vec![], ..quick() };
        assert!(run_bench(&[("a".into(), img)], &cfg).is_err());
    }

    #[test]
    fn mean_std_values() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
