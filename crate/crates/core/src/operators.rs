//! Measurement and downsampling operators, the denoising objective,
//! Gaussian noise and PSNR.
//!
//! Measurements are pixel means (intensity units): measuring a level-`n`
//! image on level `N ≤ n` averages each block of `4^{n−N}` children. The
//! raw-integral convention `⟨f, 1_E⟩` differs by the pixel area, so a
//! regularization weight `λ` stated against raw integrals corresponds to
//! `λ·2^{−2N}` here.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MtvError, Result};
use crate::grid::{ensure_same_dims, GridLevel, PixelImage};
use crate::norms::{check_theta, regularizer, Parametrization};

/// PSNR returned for identical images.
pub const PSNR_CAP_DB: f64 = 200.0;

/// Linear measurement operator acting on vectorized (row-major) images.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementOp {
    /// Block means from an `in_rows × in_cols` grid onto a grid coarser by
    /// `2^factor` along both axes.
    BlockAverage {
        in_rows: usize,
        in_cols: usize,
        factor: u32,
    },
    /// Arbitrary `M × (in_rows·in_cols)` matrix of bounded functionals.
    Dense {
        matrix: Array2<f64>,
        in_rows: usize,
        in_cols: usize,
    },
}

impl MeasurementOp {
    /// Block means from `input` dims onto `output` dims; both sides must
    /// shrink by the same power of two.
    pub fn block_average(input: (usize, usize), output: (usize, usize)) -> Result<Self> {
        let factor = dyadic_factor(input, output)?;
        Ok(MeasurementOp::BlockAverage {
            in_rows: input.0,
            in_cols: input.1,
            factor,
        })
    }

    pub fn dense(matrix: Array2<f64>, in_rows: usize, in_cols: usize) -> Result<Self> {
        if matrix.ncols() != in_rows * in_cols {
            return Err(MtvError::DimensionMismatch {
                expected: format!("{} columns", in_rows * in_cols),
                got: format!("{} columns", matrix.ncols()),
            });
        }
        if in_rows == 0 || in_cols == 0 {
            return Err(MtvError::EmptyImage);
        }
        Ok(MeasurementOp::Dense {
            matrix,
            in_rows,
            in_cols,
        })
    }

    pub fn input_dims(&self) -> (usize, usize) {
        match self {
            MeasurementOp::BlockAverage { in_rows, in_cols, .. }
            | MeasurementOp::Dense { in_rows, in_cols, .. } => (*in_rows, *in_cols),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            MeasurementOp::BlockAverage {
                in_rows,
                in_cols,
                factor,
            } => (in_rows >> factor) * (in_cols >> factor),
            MeasurementOp::Dense { matrix, .. } => matrix.nrows(),
        }
    }

    pub fn apply(&self, a: &[f64]) -> Vec<f64> {
        let (r, c) = self.input_dims();
        debug_assert_eq!(a.len(), r * c);
        match self {
            MeasurementOp::BlockAverage { factor, .. } => {
                let b = 1usize << factor;
                let (or, oc) = (r / b, c / b);
                let mut out = vec![0.0; or * oc];
                for i in 0..r {
                    for j in 0..c {
                        out[(i / b) * oc + j / b] += a[i * c + j];
                    }
                }
                let w = 1.0 / (b * b) as f64;
                out.iter_mut().for_each(|v| *v *= w);
                out
            }
            MeasurementOp::Dense { matrix, .. } => matrix
                .rows()
                .into_iter()
                .map(|row| row.iter().zip(a).map(|(m, x)| m * x).sum())
                .collect(),
        }
    }

    pub fn adjoint(&self, z: &[f64]) -> Vec<f64> {
        let (r, c) = self.input_dims();
        debug_assert_eq!(z.len(), self.output_dim());
        match self {
            MeasurementOp::BlockAverage { factor, .. } => {
                let b = 1usize << factor;
                let oc = c / b;
                let w = 1.0 / (b * b) as f64;
                let mut out = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        out[i * c + j] = w * z[(i / b) * oc + j / b];
                    }
                }
                out
            }
            MeasurementOp::Dense { matrix, .. } => {
                let mut out = vec![0.0; r * c];
                for (row, &zi) in matrix.rows().into_iter().zip(z) {
                    for (o, m) in out.iter_mut().zip(row.iter()) {
                        *o += m * zi;
                    }
                }
                out
            }
        }
    }

    /// Upper estimate of `‖M‖²`: exact for block averages, power iteration
    /// with a 2% margin for dense matrices.
    pub fn norm_sq(&self) -> f64 {
        match self {
            MeasurementOp::BlockAverage { factor, .. } => 1.0 / (1u64 << (2 * factor)) as f64,
            MeasurementOp::Dense { matrix, .. } => {
                if matrix.is_empty() {
                    return 0.0;
                }
                let mut x = vec![1.0; matrix.ncols()];
                let mut est = 0.0;
                for _ in 0..200 {
                    let y = self.apply(&x);
                    let z = self.adjoint(&y);
                    let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if nz == 0.0 {
                        return 0.0;
                    }
                    est = nz / nx;
                    x = z.into_iter().map(|v| v / nz).collect();
                }
                est * 1.02
            }
        }
    }
}

fn dyadic_factor(input: (usize, usize), output: (usize, usize)) -> Result<u32> {
    let err = || MtvError::DimensionMismatch {
        expected: format!(
            "{}x{} shrunk by a common power of two",
            input.0, input.1
        ),
        got: format!("{}x{}", output.0, output.1),
    };
    if output.0 == 0 || output.1 == 0 || !input.0.is_multiple_of(output.0) || !input.1.is_multiple_of(output.1) {
        return Err(err());
    }
    let (f0, f1) = (input.0 / output.0, input.1 / output.1);
    if f0 != f1 || !f0.is_power_of_two() {
        return Err(err());
    }
    Ok(f0.trailing_zeros())
}

/// `½‖y − measure(a)‖² + λ R_θ(a)` over `a ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseProblem {
    /// Observed image; may contain negative entries from noise.
    pub y: PixelImage,
    pub lambda: f64,
    pub theta: f64,
    pub param: Parametrization,
}

impl DenoiseProblem {
    pub fn new(y: PixelImage, lambda: f64, theta: f64, param: Parametrization) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(MtvError::InvalidLambda(lambda));
        }
        check_theta(theta)?;
        Ok(DenoiseProblem {
            y,
            lambda,
            theta,
            param,
        })
    }

    /// The same problem posed on a grid `k` levels finer: `y` refined, data
    /// term summed over `4^k` times as many pixels, so `λ` is multiplied by
    /// `4^k`. Requires the exact parametrization, which is the only one
    /// invariant under refinement.
    ///
    /// Returned as `(problem, weight)` where `weight = 4^{-k}` maps its
    /// objective back to this problem's units.
    pub fn embedded(&self, k: u32) -> Result<(DenoiseProblem, f64)> {
        if self.param != Parametrization::Exact {
            return Err(MtvError::InvalidParameter {
                name: "param",
                reason: "grid embedding needs the exact parametrization".into(),
            });
        }
        let scale = (1u64 << (2 * k)) as f64;
        let y = crate::grid::refine_by(&self.y, k);
        Ok((
            DenoiseProblem::new(y, self.lambda * scale, self.theta, self.param)?,
            1.0 / scale,
        ))
    }
}

/// Pixel means of `a` on a grid coarser by a common power of two.
pub fn measure_to(a: &PixelImage, rows: usize, cols: usize) -> Result<PixelImage> {
    let op = MeasurementOp::block_average(a.dim(), (rows, cols))?;
    PixelImage::from_vec(rows, cols, op.apply(a.as_slice()))
}

/// Pixel means of a square dyadic image on level `level`.
pub fn measure(a: &PixelImage, level: GridLevel) -> Result<PixelImage> {
    let native = a.level().ok_or_else(|| MtvError::DimensionMismatch {
        expected: "square dyadic image".into(),
        got: format!("{}x{}", a.rows(), a.cols()),
    })?;
    if level > native {
        return Err(MtvError::LevelTooCoarse {
            level: native.n(),
            target: level.n(),
        });
    }
    measure_to(a, level.side(), level.side())
}

/// Four-child averaging onto the next coarser grid.
pub fn downsample(a: &PixelImage) -> Result<PixelImage> {
    let (r, c) = a.dim();
    if r % 2 != 0 || c % 2 != 0 {
        return Err(MtvError::NotDownsamplable { rows: r, cols: c });
    }
    let v = a.values();
    PixelImage::new(Array2::from_shape_fn((r / 2, c / 2), |(i, j)| {
        0.25 * (v[[2 * i, 2 * j]] + v[[2 * i, 2 * j + 1]] + v[[2 * i + 1, 2 * j]] + v[[2 * i + 1, 2 * j + 1]])
    }))
}

/// `½‖y − measure(a)‖² + λ R_θ(a)`, where `a` lives on the grid of `y` or
/// a dyadic refinement of it. Errors on negative entries of `a`.
pub fn objective(a: &PixelImage, prob: &DenoiseProblem) -> Result<f64> {
    if let Some(((row, col), &value)) = a.values().indexed_iter().find(|(_, v)| **v < 0.0) {
        return Err(MtvError::Infeasible { row, col, value });
    }
    let m = measure_to(a, prob.y.rows(), prob.y.cols())?;
    let data = 0.5
        * m.as_slice()
            .iter()
            .zip(prob.y.as_slice())
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>();
    Ok(data + prob.lambda * regularizer(a, prob.theta, prob.param)?)
}

/// Adds i.i.d. `N(0, σ²)` noise drawn with Box–Muller from a ChaCha8
/// stream seeded by `seed`.
pub fn add_gaussian_noise(img: &PixelImage, sigma: f64, seed: u64) -> Result<PixelImage> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(MtvError::InvalidParameter {
            name: "sigma",
            reason: format!("must be finite and nonnegative, got {sigma}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = Vec::with_capacity(img.len() + 1);
    while noise.len() < img.len() {
        let (z0, z1) = box_muller(&mut rng);
        noise.push(z0);
        noise.push(z1);
    }
    let data = img
        .as_slice()
        .iter()
        .zip(noise)
        .map(|(v, z)| v + sigma * z)
        .collect();
    PixelImage::from_vec(img.rows(), img.cols(), data)
}

fn box_muller(rng: &mut impl Rng) -> (f64, f64) {
    // u1 ∈ (0, 1] keeps the logarithm finite.
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let t = std::f64::consts::TAU * u2;
    (r * t.cos(), r * t.sin())
}

/// Mean squared error between two images.
pub fn mse(x: &PixelImage, reference: &PixelImage) -> Result<f64> {
    ensure_same_dims(x, reference)?;
    let s: f64 = x
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(s / x.len() as f64)
}

/// `−10 log₁₀ MSE` for unit peak, capped at [`PSNR_CAP_DB`].
pub fn psnr(x: &PixelImage, reference: &PixelImage) -> Result<f64> {
    let e = mse(x, reference)?;
    Ok(if e == 0.0 {
        PSNR_CAP_DB
    } else {
        (-10.0 * e.log10()).min(PSNR_CAP_DB)
    })
}
