use crate::error::Result;
use crate::norms::{FilterWeights, Parametrization};

/// `H a = [w₁₁ h₁₁∗a; w₁₀ h₁₀∗a; w₀₁ h₀₁∗a]` with full convolutions,
/// flattened into one vector: the `(r+1)×(c+1)` corner block, then the
/// `(r+1)×c` row-difference block, then the `r×(c+1)` column-difference
/// block, each row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackedAnalysisOp {
    rows: usize,
    cols: usize,
    weights: FilterWeights,
}

impl StackedAnalysisOp {
    pub fn new(rows: usize, cols: usize, weights: FilterWeights) -> Self {
        StackedAnalysisOp { rows, cols, weights }
    }

    pub fn for_problem(rows: usize, cols: usize, theta: f64, param: Parametrization) -> Result<Self> {
        Ok(Self::new(rows, cols, FilterWeights::new(param, theta, rows, cols)?))
    }

    pub fn weights(&self) -> FilterWeights {
        self.weights
    }

    pub fn input_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn output_len(&self) -> usize {
        let (r, c) = (self.rows, self.cols);
        (r + 1) * (c + 1) + (r + 1) * c + r * (c + 1)
    }

    /// Block boundaries inside the output vector.
    fn offsets(&self) -> (usize, usize) {
        let (r, c) = (self.rows, self.cols);
        let o1 = (r + 1) * (c + 1);
        (o1, o1 + (r + 1) * c)
    }

    /// Analytic bound `16w₁₁² + 4w₁₀² + 4w₀₁² ≥ ‖H‖²`.
    pub fn norm_sq_bound(&self) -> f64 {
        self.weights.lipschitz_bound()
    }

    pub fn apply(&self, a: &[f64], out: &mut [f64]) {
        let (r, c) = (self.rows, self.cols);
        debug_assert_eq!(a.len(), r * c);
        debug_assert_eq!(out.len(), self.output_len());
        let w = self.weights;
        let at = |i: usize, j: usize| -> f64 {
            // i, j are shifted by one: index 0 is the zero border.
            if i == 0 || j == 0 || i > r || j > c {
                0.0
            } else {
                a[(i - 1) * c + (j - 1)]
            }
        };
        let (o1, o2) = self.offsets();
        let (corner, rest) = out.split_at_mut(o1);
        let (rdiff, cdiff) = rest.split_at_mut(o2 - o1);
        for i in 0..=r {
            for j in 0..=c {
                let d = at(i + 1, j + 1) - at(i, j + 1) - at(i + 1, j) + at(i, j);
                corner[i * (c + 1) + j] = w.corner * d;
            }
        }
        for i in 0..=r {
            for j in 0..c {
                rdiff[i * c + j] = w.rows_diff * (at(i + 1, j + 1) - at(i, j + 1));
            }
        }
        for i in 0..r {
            for j in 0..=c {
                cdiff[i * (c + 1) + j] = w.cols_diff * (at(i + 1, j + 1) - at(i + 1, j));
            }
        }
    }

    pub fn adjoint(&self, v: &[f64], out: &mut [f64]) {
        let (r, c) = (self.rows, self.cols);
        debug_assert_eq!(v.len(), self.output_len());
        debug_assert_eq!(out.len(), r * c);
        let w = self.weights;
        let (o1, o2) = self.offsets();
        let corner = &v[..o1];
        let rdiff = &v[o1..o2];
        let cdiff = &v[o2..];
        let c1 = c + 1;
        for i in 0..r {
            for j in 0..c {
                let k = corner[i * c1 + j] - corner[(i + 1) * c1 + j] - corner[i * c1 + j + 1]
                    + corner[(i + 1) * c1 + j + 1];
                let d1 = rdiff[i * c + j] - rdiff[(i + 1) * c + j];
                let d2 = cdiff[i * c1 + j] - cdiff[i * c1 + j + 1];
                out[i * c + j] = w.corner * k + w.rows_diff * d1 + w.cols_diff * d2;
            }
        }
    }

    /// `‖H a‖₁`.
    pub fn l1(&self, a: &[f64], scratch: &mut [f64]) -> f64 {
        self.apply(a, scratch);
        scratch.iter().map(|v| v.abs()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PixelImage;
    use crate::norms::{conv_full, regularizer, Kernel};
    use crate::solvers::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_op(rng: &mut ChaCha8Rng) -> StackedAnalysisOp {
        let (r, c) = (rng.gen_range(1..9), rng.gen_range(1..9));
        let theta = rng.gen_range(0.0..=1.0);
        let param = if rng.gen_bool(0.5) {
            Parametrization::Exact
        } else {
            Parametrization::Reparametrized
        };
        StackedAnalysisOp::for_problem(r, c, theta, param).unwrap()
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let op = random_op(&mut rng);
            let a: Vec<f64> = (0..op.input_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..op.output_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut ha = vec![0.0; op.output_len()];
            let mut htv = vec![0.0; op.input_len()];
            op.apply(&a, &mut ha);
            op.adjoint(&v, &mut htv);
            assert!((dot(&ha, &v) - dot(&a, &htv)).abs() < 1e-12);
        }
    }

    #[test]
    fn blocks_match_reference_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..50 {
            let op = random_op(&mut rng);
            let (r, c) = (op.rows, op.cols);
            let a = PixelImage::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let mut ha = vec![0.0; op.output_len()];
            op.apply(a.as_slice(), &mut ha);
            let w = op.weights();
            let expect: Vec<f64> = [
                (Kernel::h11(), w.corner),
                (Kernel::h10(), w.rows_diff),
                (Kernel::h01(), w.cols_diff),
            ]
            .iter()
            .flat_map(|(k, wt)| conv_full(a.values(), k).unwrap().iter().map(|v| wt * v).collect::<Vec<_>>())
            .collect();
            assert_eq!(ha.len(), expect.len());
            for (x, y) in ha.iter().zip(&expect) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn l1_is_regularizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let a = PixelImage::from_vec(4, 4, (0..16).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        for param in [Parametrization::Exact, Parametrization::Reparametrized] {
            let op = StackedAnalysisOp::for_problem(4, 4, 0.6, param).unwrap();
            let mut s = vec![0.0; op.output_len()];
            let v = op.l1(a.as_slice(), &mut s);
            assert!((v - regularizer(&a, 0.6, param).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn norm_bound_dominates_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..20 {
            let op = random_op(&mut rng);
            let mut x: Vec<f64> = (0..op.input_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut hx = vec![0.0; op.output_len()];
            let mut est = 0.0;
            for _ in 0..300 {
                op.apply(&x, &mut hx);
                let mut z = vec![0.0; op.input_len()];
                op.adjoint(&hx, &mut z);
                let nz = crate::solvers::norm2(&z);
                est = nz / crate::solvers::norm2(&x);
                x = z.iter().map(|v| v / nz).collect();
            }
            assert!(est <= op.norm_sq_bound() * (1.0 + 1e-12));
        }
    }
}
