//! Difference filters, the exact discrete θ-norm, and the atomic corner
//! measure of piecewise-constant functions.
//!
//! For `f = Σ a[n] 1_{E_n}` on a `2ⁿ × 2ⁿ` grid,
//!
//! ```text
//! ‖[D⊗D]f‖ = ‖h₁₁ ∗ a‖₁,   ‖[D⊗I]f‖ = 2⁻ⁿ‖h₁₀ ∗ a‖₁,   ‖[I⊗D]f‖ = 2⁻ⁿ‖h₀₁ ∗ a‖₁
//! ```
//!
//! with full (zero-padded) convolutions, so
//! `‖a‖_θ = (1−θ)2⁻ⁿ(‖h₁₀∗a‖₁ + ‖h₀₁∗a‖₁) + θ‖h₁₁∗a‖₁` equals the
//! continuous-domain norm of `f` exactly. On a `rows × cols` grid the two
//! gradient terms are weighted by the pixel side of the axis the jump runs
//! along (`1/cols` for `h₁₀`, `1/rows` for `h₀₁`).
//!
//! `θ = 0` is accepted and gives plain anisotropic TV. Norm equivalence with
//! the mixed-derivative space needs `θ > 0`; at `θ = 0` the corner term is
//! simply absent.

use ndarray::{array, Array2, ArrayView2};

use crate::error::{MtvError, Result};
use crate::grid::PixelImage;

/// A small convolution kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel(pub Array2<f64>);

impl Kernel {
    /// `[[1, −1], [−1, 1]]`, the mixed second difference.
    pub fn h11() -> Self {
        Kernel(array![[1.0, -1.0], [-1.0, 1.0]])
    }

    /// `[1, −1]ᵀ`, difference along rows (`x₁`).
    pub fn h10() -> Self {
        Kernel(array![[1.0], [-1.0]])
    }

    /// `[1, −1]`, difference along columns (`x₂`).
    pub fn h01() -> Self {
        Kernel(array![[1.0, -1.0]])
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    /// Outer product `u vᵀ` of a column kernel and a row kernel.
    pub fn outer(col: &Kernel, row: &Kernel) -> Self {
        let (cr, cc) = col.dim();
        let (rr, rc) = row.dim();
        assert!(cc == 1 && rr == 1, "outer expects a column and a row kernel");
        Kernel(Array2::from_shape_fn((cr, rc), |(i, j)| {
            col.0[[i, 0]] * row.0[[0, j]]
        }))
    }
}

/// Which weighting of the three filters a regularizer uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parametrization {
    /// `θ‖h₁₁∗a‖₁ + (1−θ)(h₂‖h₁₀∗a‖₁ + h₁‖h₀₁∗a‖₁)`, the exact continuous
    /// norm; invariant under [`crate::grid::refine`].
    Exact,
    /// `‖h_θ ∗ a‖₁` with `h_θ = [θ h₁₁; (1−θ/2) h₁₀; (1−θ/2) h₀₁]`, the
    /// grid-independent weighting used for denoising benchmarks.
    #[default]
    Reparametrized,
}

/// Nonnegative weights of the corner, vertical-difference and
/// horizontal-difference filters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterWeights {
    pub corner: f64,
    pub rows_diff: f64,
    pub cols_diff: f64,
}

impl FilterWeights {
    pub fn new(param: Parametrization, theta: f64, rows: usize, cols: usize) -> Result<Self> {
        check_theta(theta)?;
        Ok(match param {
            Parametrization::Exact => FilterWeights {
                corner: theta,
                rows_diff: (1.0 - theta) / cols as f64,
                cols_diff: (1.0 - theta) / rows as f64,
            },
            Parametrization::Reparametrized => FilterWeights {
                corner: theta,
                rows_diff: 1.0 - 0.5 * theta,
                cols_diff: 1.0 - 0.5 * theta,
            },
        })
    }

    /// `Σ w² ‖h‖₁²`, an upper bound on `‖H‖²` for the stacked operator.
    pub fn lipschitz_bound(&self) -> f64 {
        16.0 * self.corner * self.corner
            + 4.0 * self.rows_diff * self.rows_diff
            + 4.0 * self.cols_diff * self.cols_diff
    }
}

/// Converts the reparametrized pair `(λ, θ)` on a square `side × side` grid
/// into the equivalent exact-norm pair: `λ‖h_θ∗a‖₁ = λ'‖a‖_{θ'}` for every
/// `a`. The reparametrized family only spans corner-to-gradient weight
/// ratios in `[0, 2]`, so the converse map is partial and not provided.
pub fn reparametrized_to_exact(lambda: f64, theta: f64, side: usize) -> Result<(f64, f64)> {
    check_theta(theta)?;
    let scale = theta + (1.0 - 0.5 * theta) * side as f64;
    Ok((lambda * scale, theta / scale))
}

/// The three filters together with the mixing parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub h11: Kernel,
    pub h10: Kernel,
    pub h01: Kernel,
    pub theta: f64,
}

impl FilterBank {
    pub fn new(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(FilterBank {
            h11: Kernel::h11(),
            h10: Kernel::h10(),
            h01: Kernel::h01(),
            theta,
        })
    }

    /// Exact θ-norm of `a`; same as [`discrete_theta_norm`].
    pub fn norm(&self, a: &PixelImage) -> f64 {
        let (c11, c10, c01) = self.l1_parts(a);
        let (h1, h2) = a.pixel_sides();
        (1.0 - self.theta) * (h2 * c10 + h1 * c01) + self.theta * c11
    }

    fn l1_parts(&self, a: &PixelImage) -> (f64, f64, f64) {
        let l1 = |k: &Kernel| conv_full_view(a.view(), k).iter().map(|v| v.abs()).sum::<f64>();
        (l1(&self.h11), l1(&self.h10), l1(&self.h01))
    }
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(MtvError::InvalidTheta(theta))
    }
}

/// Full linear convolution of `a` (zero outside) with `h`; the output has
/// shape `(rows + kr − 1) × (cols + kc − 1)`.
pub fn conv_full(a: &Array2<f64>, h: &Kernel) -> Result<Array2<f64>> {
    if a.is_empty() || h.0.is_empty() {
        return Err(MtvError::EmptyImage);
    }
    Ok(conv_full_view(a.view(), h))
}

fn conv_full_view(a: ArrayView2<'_, f64>, h: &Kernel) -> Array2<f64> {
    let (r, c) = a.dim();
    let (kr, kc) = h.dim();
    let mut out = Array2::zeros((r + kr - 1, c + kc - 1));
    for ((i, j), &v) in a.indexed_iter() {
        if v == 0.0 {
            continue;
        }
        for ((p, q), &w) in h.0.indexed_iter() {
            out[[i + p, j + q]] += v * w;
        }
    }
    out
}

/// `(1−θ)(h₂‖h₁₀∗a‖₁ + h₁‖h₀₁∗a‖₁) + θ‖h₁₁∗a‖₁` with pixel sides `h₁, h₂`.
pub fn discrete_theta_norm(a: &PixelImage, theta: f64) -> Result<f64> {
    Ok(FilterBank::new(theta)?.norm(a))
}

/// Regularizer value under either parametrization.
pub fn regularizer(a: &PixelImage, theta: f64, param: Parametrization) -> Result<f64> {
    let w = FilterWeights::new(param, theta, a.rows(), a.cols())?;
    let bank = FilterBank::new(theta)?;
    let (c11, c10, c01) = bank.l1_parts(a);
    Ok(w.corner * c11 + w.rows_diff * c10 + w.cols_diff * c01)
}

/// One Dirac mass of an atomic measure on `ℝ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub x1: f64,
    pub x2: f64,
    /// Knot index `(i, j)`, the atom sits at `(i/rows, j/cols)`.
    pub knot: (usize, usize),
    pub amplitude: f64,
}

/// Finite signed combination of Dirac masses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtomicMeasure {
    pub atoms: Vec<Atom>,
}

impl AtomicMeasure {
    /// Total-variation norm `Σ |amplitude|`.
    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.amplitude.abs()).sum()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn amplitude_at(&self, knot: (usize, usize)) -> f64 {
        self.atoms
            .iter()
            .find(|a| a.knot == knot)
            .map_or(0.0, |a| a.amplitude)
    }
}

/// `[D⊗D]f` as an atomic measure on the knots. Atoms with an amplitude of
/// exactly zero are dropped; nothing else is.
pub fn corner_measure(a: &PixelImage) -> AtomicMeasure {
    let c = conv_full_view(a.view(), &Kernel::h11());
    let (r, cc) = a.dim();
    let atoms = c
        .indexed_iter()
        .filter(|(_, &v)| v != 0.0)
        .map(|((i, j), &v)| Atom {
            x1: i as f64 / r as f64,
            x2: j as f64 / cc as f64,
            knot: (i, j),
            amplitude: v,
        })
        .collect();
    AtomicMeasure { atoms }
}

/// `‖[D⊗D]f‖`, the corner norm.
pub fn corner_norm(a: &PixelImage) -> f64 {
    conv_full_view(a.view(), &Kernel::h11())
        .iter()
        .map(|v| v.abs())
        .sum()
}

/// `(‖[D⊗I]f‖, ‖[I⊗D]f‖)`; their sum is the anisotropic TV of `f`.
pub fn gradient_norms(a: &PixelImage) -> (f64, f64) {
    let (h1, h2) = a.pixel_sides();
    let l1 = |k: Kernel| conv_full_view(a.view(), &k).iter().map(|v| v.abs()).sum::<f64>();
    (h2 * l1(Kernel::h10()), h1 * l1(Kernel::h01()))
}

/// Anisotropic total variation `‖∇f‖`.
pub fn total_variation(a: &PixelImage) -> f64 {
    let (g1, g2) = gradient_norms(a);
    g1 + g2
}
