//! Projected subgradient reference solver.
//!
//! Shares nothing with the fast solvers beyond the filter kernels: the
//! subgradient comes from direct zero-padded convolutions and their
//! explicit correlation adjoints, and the reported objective from
//! [`crate::operators::objective`]. The data term is
//! 1-strongly convex, so steps `η_k = 1/(k+2)` with `(k+1)`-weighted
//! averaging converge at rate `O(log k / k)` in objective.

use ndarray::Array2;

use crate::error::{MtvError, Result};
use crate::grid::PixelImage;
use crate::norms::{FilterBank, FilterWeights, Kernel};
use crate::operators::{objective, DenoiseProblem};

/// Largest instance the oracle accepts (a 16×16 image).
pub const ORACLE_MAX_PIXELS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    /// Objective of the returned point.
    pub objective: f64,
    pub last_iterate_objective: f64,
    pub averaged_objective: f64,
    pub iterations: usize,
}

pub fn oracle_solve(prob: &DenoiseProblem, iters: usize) -> Result<PixelImage> {
    oracle_solve_report(prob, iters).map(|(a, _)| a)
}

/// Runs `iters` projected subgradient steps and returns the better of the
/// last and the weighted-average iterate.
pub fn oracle_solve_report(prob: &DenoiseProblem, iters: usize) -> Result<(PixelImage, OracleReport)> {
    let (rows, cols) = prob.y.dim();
    if rows * cols > ORACLE_MAX_PIXELS {
        return Err(MtvError::InstanceTooLarge {
            pixels: rows * cols,
            limit: ORACLE_MAX_PIXELS,
        });
    }
    let bank = FilterBank::new(prob.theta)?;
    let w = FilterWeights::new(prob.param, prob.theta, rows, cols)?;
    let filters = [
        (bank.h11, w.corner),
        (bank.h10, w.rows_diff),
        (bank.h01, w.cols_diff),
    ];
    let y = prob.y.as_slice();
    let n = rows * cols;
    let mut a: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
    let mut avg = vec![0.0; n];
    let mut g = vec![0.0; n];
    let taps: Vec<Taps> = filters
        .iter()
        .filter(|(_, wt)| *wt != 0.0)
        .map(|(h, wt)| Taps::new(h, prob.lambda * wt, rows, cols))
        .collect();
    let mut bufs: Vec<Vec<f64>> = taps.iter().map(|t| vec![0.0; t.out_rows * t.out_cols]).collect();
    let mut weight_sum = 0.0;

    // `a` with a one-pixel zero border, so convolutions need no bounds tests.
    let pc = cols + 2;
    let mut padded = vec![0.0; (rows + 2) * pc];

    for k in 0..iters {
        for i in 0..n {
            g[i] = a[i] - y[i];
        }
        if prob.lambda > 0.0 {
            for i in 0..rows {
                padded[(i + 1) * pc + 1..(i + 1) * pc + 1 + cols].copy_from_slice(&a[i * cols..(i + 1) * cols]);
            }
            for (t, s) in taps.iter().zip(bufs.iter_mut()) {
                t.conv_sign(&padded, s);
                t.correlate_add(s, &mut g);
            }
        }
        let step = 1.0 / (k as f64 + 2.0);
        let wk = k as f64 + 1.0;
        weight_sum += wk;
        let c = wk / weight_sum;
        for i in 0..n {
            a[i] = (a[i] - step * g[i]).max(0.0);
            avg[i] += c * (a[i] - avg[i]);
        }
    }
    let a = Array2::from_shape_vec((rows, cols), a).expect("shape");
    let avg = Array2::from_shape_vec((rows, cols), avg).expect("shape");

    let last = PixelImage::new(a)?;
    let averaged = PixelImage::new(avg)?;
    let last_obj = objective(&last, prob)?;
    let avg_obj = if iters == 0 { last_obj } else { objective(&averaged, prob)? };
    let (best, obj) = if iters > 0 && avg_obj < last_obj {
        (averaged, avg_obj)
    } else {
        (last, last_obj)
    };
    Ok((
        best,
        OracleReport {
            objective: obj,
            last_iterate_objective: last_obj,
            averaged_objective: avg_obj,
            iterations: iters,
        },
    ))
}

/// Branch-free sign with `sign(0) = 0`; subgradient signs flip often, so
/// branches mispredict.
fn sign(v: f64) -> f64 {
    ((v > 0.0) as i32 - (v < 0.0) as i32) as f64
}

/// One weighted filter, laid out for flat row-major buffers.
struct Taps {
    taps: Vec<(usize, usize, f64)>,
    /// Weight applied to the correlation.
    scale: f64,
    rows: usize,
    cols: usize,
    out_rows: usize,
    out_cols: usize,
}

impl Taps {
    fn new(h: &Kernel, scale: f64, rows: usize, cols: usize) -> Self {
        let (kr, kc) = h.dim();
        Taps {
            taps: h.0.indexed_iter().map(|((p, q), v)| (p, q, *v)).collect(),
            scale,
            rows,
            cols,
            out_rows: rows + kr - 1,
            out_cols: cols + kc - 1,
        }
    }

    /// `out = sign(a ∗ h)` for the full convolution, reading `a` from a
    /// copy with a one-pixel zero border (row stride `cols + 2`).
    fn conv_sign(&self, padded: &[f64], out: &mut [f64]) {
        let pc = self.cols + 2;
        let oc = self.out_cols;
        out.fill(0.0);
        // One shifted copy of `a` per tap: out[i,j] += h[p,q] a[i-p, j-q].
        for &(p, q, hv) in &self.taps {
            for i in 0..self.out_rows {
                let src = &padded[(i + 1 - p) * pc + 1 - q..][..oc];
                for (o, x) in out[i * oc..(i + 1) * oc].iter_mut().zip(src) {
                    *o += hv * x;
                }
            }
        }
        for o in out.iter_mut() {
            *o = sign(*o);
        }
    }

    /// `g += scale · corr(s, h)`, the adjoint of the full convolution:
    /// `corr(s, h)[i,j] = Σ_{p,q} h[p,q] s[i+p, j+q]`.
    fn correlate_add(&self, s: &[f64], g: &mut [f64]) {
        let (c, oc) = (self.cols, self.out_cols);
        for &(p, q, hv) in &self.taps {
            let w = self.scale * hv;
            for i in 0..self.rows {
                let src = &s[(i + p) * oc + q..][..c];
                for (gv, x) in g[i * c..(i + 1) * c].iter_mut().zip(src) {
                    *gv += w * x;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridLevel;
    use crate::norms::{conv_full, Parametrization};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_lambda_is_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let y = PixelImage::from_fn_at(GridLevel(2), |_| rng.gen_range(-1.0..1.0));
        let p = DenoiseProblem::new(y.clone(), 0.0, 0.5, Parametrization::Reparametrized).unwrap();
        let a = oracle_solve(&p, 1000).unwrap();
        assert!(a.max_abs_diff(&y.map(|v| v.max(0.0))).unwrap() < 1e-8);
    }

    #[test]
    fn zero_data_stays_zero() {
        let y = PixelImage::zeros_at(GridLevel(2));
        let p = DenoiseProblem::new(y, 0.3, 0.5, Parametrization::Reparametrized).unwrap();
        let a = oracle_solve(&p, 1000).unwrap();
        assert!(a.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn refuses_large_instances() {
        let y = PixelImage::zeros_at(GridLevel(5));
        let p = DenoiseProblem::new(y, 0.3, 0.5, Parametrization::Reparametrized).unwrap();
        assert!(matches!(oracle_solve(&p, 10), Err(MtvError::InstanceTooLarge { .. })));
    }

    #[test]
    fn correlation_is_convolution_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for k in [Kernel::h11(), Kernel::h10(), Kernel::h01()] {
            let a = Array2::from_shape_fn((3, 5), |_| rng.gen_range(-1.0..1.0));
            let c = conv_full(&a, &k).unwrap();
            let s = Array2::from_shape_fn(c.dim(), |_| rng.gen_range(-1.0..1.0));
            let lhs = (&c * &s).sum();
            let t = Taps::new(&k, 1.0, 3, 5);
            let mut corr = vec![0.0; 15];
            t.correlate_add(s.as_slice().unwrap(), &mut corr);
            let rhs = (&a * &Array2::from_shape_vec((3, 5), corr).unwrap()).sum();
            let mut padded = Array2::zeros((5, 7));
            padded.slice_mut(ndarray::s![1..4, 1..6]).assign(&a);
            let mut signs = vec![0.0; c.len()];
            t.conv_sign(padded.as_slice().unwrap(), &mut signs);
            let signs = Array2::from_shape_vec(c.dim(), signs).unwrap();
            assert_eq!(signs, c.mapv(sign));
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
