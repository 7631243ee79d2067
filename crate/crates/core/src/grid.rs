//! Pixel grids over the unit square `K = [0,1]²` and the correspondence
//! between coefficient arrays and piecewise-constant functions.
//!
//! Row index `n₁` runs along the first coordinate `x₁`, column index `n₂`
//! along `x₂`. A `rows × cols` image partitions `K` into pixels of size
//! `1/rows × 1/cols`; the square dyadic case `2ⁿ × 2ⁿ` is [`GridLevel`] `n`.
//! Rectangular images use the per-axis pixel side everywhere a pixel side
//! appears.

use ndarray::{Array2, ArrayView2};

use crate::error::{MtvError, Result};

/// Level `n` of the dyadic grid: `2ⁿ × 2ⁿ` pixels of side `2⁻ⁿ`, knots
/// `2⁻ⁿ·{0, …, 2ⁿ}²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridLevel(pub u32);

impl GridLevel {
    pub fn new(n: u32) -> Self {
        GridLevel(n)
    }

    pub fn n(self) -> u32 {
        self.0
    }

    /// Pixels per side, `2ⁿ`.
    pub fn side(self) -> usize {
        1usize << self.0
    }

    pub fn pixel_side(self) -> f64 {
        1.0 / self.side() as f64
    }

    /// Knots per side, `2ⁿ + 1`.
    pub fn knots_per_side(self) -> usize {
        self.side() + 1
    }

    pub fn finer(self) -> Self {
        GridLevel(self.0 + 1)
    }

    /// Level of a `side × side` grid, if `side` is a power of two.
    pub fn from_side(side: usize) -> Option<Self> {
        if side.is_power_of_two() {
            Some(GridLevel(side.trailing_zeros()))
        } else {
            None
        }
    }
}

/// Coefficient array of a piecewise-constant function. Entries outside the
/// array are implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelImage {
    values: Array2<f64>,
    nonneg: bool,
}

impl PixelImage {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(MtvError::EmptyImage);
        }
        let values = if values.is_standard_layout() {
            values
        } else {
            values.as_standard_layout().to_owned()
        };
        let nonneg = values.iter().all(|&v| v >= 0.0);
        Ok(PixelImage { values, nonneg })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(Array2::zeros((rows, cols)))
    }

    pub fn zeros_at(level: GridLevel) -> Self {
        let s = level.side();
        Self::new(Array2::zeros((s, s))).expect("dyadic grid is non-empty")
    }

    pub fn from_fn_at(level: GridLevel, f: impl FnMut((usize, usize)) -> f64) -> Self {
        let s = level.side();
        Self::new(Array2::from_shape_fn((s, s), f)).expect("dyadic grid is non-empty")
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let got = data.len();
        let values = Array2::from_shape_vec((rows, cols), data).map_err(|_| {
            MtvError::DimensionMismatch {
                expected: format!("{rows}x{cols} = {} values", rows * cols),
                got: format!("{got} values"),
            }
        })?;
        Self::new(values)
    }

    /// Checks that the image lives on the square dyadic grid `level`.
    pub fn at_level(values: Array2<f64>, level: GridLevel) -> Result<Self> {
        let s = level.side();
        if values.dim() != (s, s) {
            let (r, c) = values.dim();
            return Err(MtvError::DimensionMismatch {
                expected: format!("{s}x{s}"),
                got: format!("{r}x{c}"),
            });
        }
        Self::new(values)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Grid level when the image is square with a power-of-two side.
    pub fn level(&self) -> Option<GridLevel> {
        if self.rows() == self.cols() {
            GridLevel::from_side(self.rows())
        } else {
            None
        }
    }

    /// Pixel side along `x₁` (rows) and `x₂` (columns).
    pub fn pixel_sides(&self) -> (f64, f64) {
        (1.0 / self.rows() as f64, 1.0 / self.cols() as f64)
    }

    pub fn is_nonneg(&self) -> bool {
        self.nonneg
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values
            .as_slice()
            .expect("pixel images are stored in standard layout")
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Value at 1-based index `(n₁, n₂)`, zero outside the array.
    pub fn get(&self, n1: i64, n2: i64) -> f64 {
        if n1 < 1 || n2 < 1 || n1 > self.rows() as i64 || n2 > self.cols() as i64 {
            0.0
        } else {
            self.values[[(n1 - 1) as usize, (n2 - 1) as usize]]
        }
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> PixelImage {
        Self::new(self.values.mapv(f)).expect("shape preserved")
    }

    pub fn scaled(&self, c: f64) -> PixelImage {
        self.map(|v| c * v)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &PixelImage) -> Result<f64> {
        ensure_same_dims(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn sub(&self, other: &PixelImage) -> Result<PixelImage> {
        ensure_same_dims(self, other)?;
        Self::new(&self.values - &other.values)
    }

    pub fn add(&self, other: &PixelImage) -> Result<PixelImage> {
        ensure_same_dims(self, other)?;
        Self::new(&self.values + &other.values)
    }

    /// Top-left `rows × cols` crop.
    pub fn crop(&self, rows: usize, cols: usize) -> Result<PixelImage> {
        if rows > self.rows() || cols > self.cols() {
            return Err(MtvError::DimensionMismatch {
                expected: format!("at most {}x{}", self.rows(), self.cols()),
                got: format!("{rows}x{cols}"),
            });
        }
        Self::new(self.values.slice(ndarray::s![..rows, ..cols]).to_owned())
    }
}

pub(crate) fn ensure_same_dims(a: &PixelImage, b: &PixelImage) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(MtvError::DimensionMismatch {
            expected: format!("{}x{}", a.rows(), a.cols()),
            got: format!("{}x{}", b.rows(), b.cols()),
        });
    }
    Ok(())
}

/// `f = Σ a[n₁,n₂] 1_{E_{n₁,n₂}}`, supported in `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantFn {
    image: PixelImage,
}

impl PiecewiseConstantFn {
    pub fn image(&self) -> &PixelImage {
        &self.image
    }

    /// Point evaluation. Pixels are half-open `[(n−1)h, nh)`; the function
    /// is zero outside `[0,1)²`.
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        if !(0.0..1.0).contains(&x1) || !(0.0..1.0).contains(&x2) {
            return 0.0;
        }
        let i = ((x1 * self.image.rows() as f64).floor() as usize).min(self.image.rows() - 1);
        let j = ((x2 * self.image.cols() as f64).floor() as usize).min(self.image.cols() - 1);
        self.image.values[[i, j]]
    }

    /// `∫_K f`.
    pub fn integral(&self) -> f64 {
        let (h1, h2) = self.image.pixel_sides();
        self.image.values.sum() * h1 * h2
    }

    /// `f ≥ 0` everywhere, i.e. `f` lies in the nonnegative cone.
    pub fn is_nonneg(&self) -> bool {
        self.image.is_nonneg()
    }
}

/// Maps coefficients to the piecewise-constant function they expand.
pub fn synthesize(a: &PixelImage) -> PiecewiseConstantFn {
    PiecewiseConstantFn { image: a.clone() }
}

/// Pixel means `|E|⁻¹⟨f, 1_E⟩` of `f` on its own grid.
pub fn analyze(f: &PiecewiseConstantFn) -> PixelImage {
    let (r, c) = f.image.dim();
    analyze_on(f, r, c).expect("own grid is non-empty")
}

/// Pixel means of `f` over an arbitrary `rows × cols` grid of `K`, by exact
/// overlap integration.
pub fn analyze_on(f: &PiecewiseConstantFn, rows: usize, cols: usize) -> Result<PixelImage> {
    if rows == 0 || cols == 0 {
        return Err(MtvError::EmptyImage);
    }
    let w1 = overlap_weights(rows, f.image.rows());
    let w2 = overlap_weights(cols, f.image.cols());
    PixelImage::new(w1.dot(&f.image.values).dot(&w2.t()))
}

/// `W[i][p] = |target_i ∩ source_p| / |target_i|` for the partitions of
/// `[0,1)` into `target` and `source` equal cells. Overlaps are computed on
/// the integer lattice `[0, target·source)`, so each weight is a single
/// rounded division (exact whenever it is dyadic).
fn overlap_weights(target: usize, source: usize) -> Array2<f64> {
    Array2::from_shape_fn((target, source), |(i, p)| {
        let lo = (i * source).max(p * target);
        let hi = ((i + 1) * source).min((p + 1) * target);
        if hi > lo {
            (hi - lo) as f64 / source as f64
        } else {
            0.0
        }
    })
}

/// Embeds a level-`n` image into level `n+1`: every pixel is split into four
/// children carrying the parent value.
pub fn refine(a: &PixelImage) -> PixelImage {
    let (r, c) = a.dim();
    let v = a.values();
    PixelImage::new(Array2::from_shape_fn((2 * r, 2 * c), |(i, j)| v[[i / 2, j / 2]]))
        .expect("non-empty")
}

/// `refine` applied `k` times.
pub fn refine_by(a: &PixelImage, k: u32) -> PixelImage {
    (0..k).fold(a.clone(), |acc, _| refine(&acc))
}
