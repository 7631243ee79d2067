//! Level-set decompositions and the coarea / cocorner splittings of
//! nonnegative pixel images.
//!
//! For `f ≥ 0` and a threshold `s ≥ 0`, `f = min(f, s) + max(f − s, 0)`.
//! Writing `P₋, P₊` for the total variation of the two parts and `C₋, C₊`
//! for their corner norms:
//!
//! - the coarea formula `P₋ + P₊ = ‖∇f‖ = Σₘ (vₘ − vₘ₋₁) ‖∇1_{f ≥ vₘ}‖`
//!   holds for every image;
//! - the cocorner splitting always satisfies `C₋ + C₊ ≥ ‖[D⊗D]f‖`, and the
//!   layer sum `Σₘ (vₘ − vₘ₋₁) ‖[D⊗D]1_{f ≥ vₘ}‖` dominates the corner norm.
//!   Equality requires every knot shared by several level-set corners to
//!   carry the same sign in all of them. A knot surrounded by the values
//!   `[[2, 1], [1, 0]]` is a convex corner of `{f ≥ 2}` but a reflex corner
//!   of `{f ≥ 1}`, and breaks the identity; [`corner_sign_conflicts`]
//!   lists such knots.
//!
//! Only finitely-valued images are handled, i.e. everything here is exact
//! up to floating-point summation; thresholds are the distinct values of
//! the array. [`quantize`] snaps near-ties onto a `2⁻ᵇ` lattice first.

use std::collections::BTreeMap;

use crate::error::{MtvError, Result};
use crate::grid::PixelImage;
use crate::norms::{conv_full, corner_norm, total_variation, Kernel};

fn require_nonneg(a: &PixelImage) -> Result<()> {
    if a.is_nonneg() {
        Ok(())
    } else {
        Err(MtvError::InvalidParameter {
            name: "image",
            reason: "level-set identities need a nonnegative image".into(),
        })
    }
}

fn require_threshold(s: f64) -> Result<()> {
    if s.is_finite() && s >= 0.0 {
        Ok(())
    } else {
        Err(MtvError::InvalidParameter {
            name: "s",
            reason: format!("threshold must be finite and nonnegative, got {s}"),
        })
    }
}

/// `min(a, s)` entrywise.
pub fn truncate_min(a: &PixelImage, s: f64) -> Result<PixelImage> {
    require_threshold(s)?;
    Ok(a.map(|v| v.min(s)))
}

/// `max(a − s, 0)` entrywise.
pub fn truncate_max(a: &PixelImage, s: f64) -> Result<PixelImage> {
    require_threshold(s)?;
    Ok(a.map(|v| (v - s).max(0.0)))
}

/// Snaps every entry to the nearest multiple of `2^{-bits}`.
pub fn quantize(a: &PixelImage, bits: u32) -> PixelImage {
    let scale = (1u64 << bits) as f64;
    a.map(|v| (v * scale).round() / scale)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CocornerCheck {
    pub c_minus: f64,
    pub c_plus: f64,
    pub total: f64,
}

impl CocornerCheck {
    /// `C₋ + C₊ − ‖[D⊗D]f‖`; never negative beyond rounding.
    pub fn excess(&self) -> f64 {
        self.c_minus + self.c_plus - self.total
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.excess().abs() <= tol
    }
}

/// Corner norms of the two truncations at `s`, and of `a` itself.
pub fn cocorner_check(a: &PixelImage, s: f64) -> Result<CocornerCheck> {
    require_nonneg(a)?;
    Ok(CocornerCheck {
        c_minus: corner_norm(&truncate_min(a, s)?),
        c_plus: corner_norm(&truncate_max(a, s)?),
        total: corner_norm(a),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoareaCheck {
    pub p_minus: f64,
    pub p_plus: f64,
    pub tv: f64,
    /// `Σₘ (vₘ − vₘ₋₁) ‖∇1_{a ≥ vₘ}‖`.
    pub layer_cake: f64,
}

impl CoareaCheck {
    pub fn holds(&self, tol: f64) -> bool {
        (self.p_minus + self.p_plus - self.tv).abs() <= tol && (self.layer_cake - self.tv).abs() <= tol
    }
}

/// Total variation of the two truncations at `s`, of `a`, and the
/// layer-cake sum over the level sets of `a`.
pub fn coarea_check(a: &PixelImage, s: f64) -> Result<CoareaCheck> {
    require_nonneg(a)?;
    Ok(CoareaCheck {
        p_minus: total_variation(&truncate_min(a, s)?),
        p_plus: total_variation(&truncate_max(a, s)?),
        tv: total_variation(a),
        layer_cake: level_sets(a)?.weighted_sum(total_variation),
    })
}

/// `a = Σₘ (vₘ − vₘ₋₁) 1_{a ≥ vₘ}` over the distinct values
/// `0 = v₀ < v₁ < … < v_M` of `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelDecomposition {
    /// `v₀ = 0, v₁, …, v_M`.
    pub thresholds: Vec<f64>,
    /// `1_{a ≥ vₘ}` for `m = 1..=M`, decreasing in `m`.
    pub level_sets: Vec<PixelImage>,
    /// Shape of `a`; needed when `a = 0` has no level sets.
    pub dim: (usize, usize),
}

impl LevelDecomposition {
    /// Layer weights `vₘ − vₘ₋₁`.
    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.thresholds.windows(2).map(|w| w[1] - w[0])
    }

    pub fn reconstruct(&self) -> Result<PixelImage> {
        let (r, c) = self.dim;
        let mut acc = PixelImage::zeros(r, c)?;
        for (w, layer) in self.weights().zip(&self.level_sets) {
            acc = acc.add(&layer.scaled(w))?;
        }
        Ok(acc)
    }

    /// `Σₘ (vₘ − vₘ₋₁) g(1_{a ≥ vₘ})`.
    pub fn weighted_sum(&self, g: impl Fn(&PixelImage) -> f64) -> f64 {
        self.weights().zip(&self.level_sets).map(|(w, l)| w * g(l)).sum()
    }

    /// Layer-cake corner sum `Σₘ (vₘ − vₘ₋₁) ‖[D⊗D]1_{a ≥ vₘ}‖`.
    pub fn corner_sum(&self) -> f64 {
        self.weighted_sum(corner_norm)
    }
}

pub fn level_sets(a: &PixelImage) -> Result<LevelDecomposition> {
    require_nonneg(a)?;
    let mut values: Vec<f64> = a.values().iter().copied().filter(|v| *v > 0.0).collect();
    values.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    values.dedup();
    let mut thresholds = Vec::with_capacity(values.len() + 1);
    thresholds.push(0.0);
    thresholds.extend(values);
    let level_sets = thresholds[1..]
        .iter()
        .map(|&t| a.map(|v| if v >= t { 1.0 } else { 0.0 }))
        .collect();
    Ok(LevelDecomposition {
        thresholds,
        level_sets,
        dim: a.dim(),
    })
}

/// Knots (full-convolution indices) where two level sets of `a` have corner
/// atoms of opposite sign. Empty exactly when the layer corner sum equals
/// the corner norm of `a`.
pub fn corner_sign_conflicts(a: &PixelImage) -> Result<Vec<(usize, usize)>> {
    let dec = level_sets(a)?;
    let mut signs: BTreeMap<(usize, usize), (bool, bool)> = BTreeMap::new();
    for layer in &dec.level_sets {
        let c = conv_full(layer.values(), &Kernel::h11())?;
        for ((i, j), &v) in c.indexed_iter() {
            if v != 0.0 {
                let e = signs.entry((i, j)).or_default();
                if v > 0.0 {
                    e.0 = true;
                } else {
                    e.1 = true;
                }
            }
        }
    }
    Ok(signs
        .into_iter()
        .filter(|(_, (pos, neg))| *pos && *neg)
        .map(|(k, _)| k)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridLevel;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn img(v: ndarray::Array2<f64>) -> PixelImage {
        PixelImage::new(v).unwrap()
    }

    fn random_levels(rng: &mut ChaCha8Rng, n: u32, levels: u32) -> PixelImage {
        PixelImage::from_fn_at(GridLevel(n), |_| rng.gen_range(0..=levels) as f64 * 0.25)
    }

    #[test]
    fn truncation_examples() {
        let a = img(array![[0.0, 1.0], [2.0, 3.0]]);
        assert_eq!(truncate_min(&a, 5.0).unwrap(), a);
        assert!(truncate_max(&a, 5.0).unwrap().values().iter().all(|v| *v == 0.0));
        assert!(truncate_min(&a, 0.0).unwrap().values().iter().all(|v| *v == 0.0));
        assert_eq!(truncate_max(&a, 0.0).unwrap(), a);
        let b = img(array![[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(truncate_min(&b, 0.5).unwrap(), b.scaled(0.5));
        assert_eq!(truncate_max(&b, 0.5).unwrap(), b.scaled(0.5));
        assert!(truncate_min(&a, -1.0).is_err());
    }

    #[test]
    fn truncations_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let a = PixelImage::from_fn_at(GridLevel(3), |_| rng.gen_range(0.0..2.0));
            let s = rng.gen_range(0.0..2.0);
            let sum = truncate_min(&a, s).unwrap().add(&truncate_max(&a, s).unwrap()).unwrap();
            assert!(sum.max_abs_diff(&a).unwrap() <= 1e-15);
        }
    }

    #[test]
    fn cocorner_scaled_pixel() {
        let a = PixelImage::from_fn_at(GridLevel(2), |(i, j)| if (i, j) == (1, 2) { 2.0 } else { 0.0 });
        let c = cocorner_check(&a, 1.0).unwrap();
        assert_eq!((c.c_minus, c.c_plus, c.total), (4.0, 4.0, 8.0));
        let beyond = cocorner_check(&a, 3.0).unwrap();
        assert_eq!(beyond.c_plus, 0.0);
        assert_eq!(beyond.c_minus, beyond.total);
    }

    #[test]
    fn cocorner_counterexample() {
        let a = img(array![[2.0, 1.0], [1.0, 0.0]]);
        let c = cocorner_check(&a, 1.5).unwrap();
        assert_eq!(c.total, 8.0);
        assert_eq!(c.c_minus + c.c_plus, 9.0);
        let dec = level_sets(&a).unwrap();
        assert_eq!(dec.corner_sum(), 10.0);
        assert_eq!(corner_sign_conflicts(&a).unwrap(), vec![(1, 1)]);
    }

    #[test]
    fn cocorner_never_below_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let n = rng.gen_range(0..4);
            let a = random_levels(&mut rng, n, 6);
            let s = rng.gen_range(0.0..2.0);
            assert!(cocorner_check(&a, s).unwrap().excess() >= -1e-12);
        }
    }

    #[test]
    fn cocorner_identity_iff_sign_coherent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut coherent, mut conflicting) = (0, 0);
        for _ in 0..300 {
            let n = rng.gen_range(1..4);
            let a = random_levels(&mut rng, n, 3);
            let conflicts = corner_sign_conflicts(&a).unwrap();
            let dec = level_sets(&a).unwrap();
            let identity = (dec.corner_sum() - corner_norm(&a)).abs() <= 1e-10;
            assert_eq!(identity, conflicts.is_empty());
            if conflicts.is_empty() {
                coherent += 1;
                for k in 0..20 {
                    let s = k as f64 * 0.05;
                    assert!(cocorner_check(&a, s).unwrap().holds(1e-10));
                }
            } else {
                conflicting += 1;
            }
        }
        assert!(coherent > 10 && conflicting > 10);
    }

    #[test]
    fn coarea_indicator_scaling() {
        let a = PixelImage::from_fn_at(GridLevel(3), |(i, j)| ((2..5).contains(&i) && j < 6) as u8 as f64);
        let perimeter = total_variation(&a);
        for s in [0.1, 0.5, 0.9] {
            let c = coarea_check(&a, s).unwrap();
            assert!((c.p_minus - s * perimeter).abs() < 1e-14);
            assert!(c.holds(1e-12));
        }
        let z = coarea_check(&PixelImage::zeros_at(GridLevel(2)), 0.5).unwrap();
        assert_eq!((z.p_minus, z.p_plus, z.tv, z.layer_cake), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn coarea_holds_on_random_images() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let n = rng.gen_range(0..5);
            let a = PixelImage::from_fn_at(GridLevel(n), |_| rng.gen_range(0.0..1.0));
            let s = rng.gen_range(0.0..1.2);
            assert!(coarea_check(&a, s).unwrap().holds(1e-10));
        }
    }

    #[test]
    fn level_set_examples() {
        let bin = img(array![[0.0, 1.0], [1.0, 1.0]]);
        let d = level_sets(&bin).unwrap();
        assert_eq!(d.thresholds, vec![0.0, 1.0]);
        assert_eq!(d.level_sets, vec![bin.clone()]);

        let a = img(array![[0.0, 1.0], [2.0, 1.0]]);
        let d = level_sets(&a).unwrap();
        assert_eq!(d.thresholds, vec![0.0, 1.0, 2.0]);
        assert_eq!(d.level_sets[0], img(array![[0.0, 1.0], [1.0, 1.0]]));
        assert_eq!(d.level_sets[1], img(array![[0.0, 0.0], [1.0, 0.0]]));
        assert_eq!(d.reconstruct().unwrap(), a);
    }

    #[test]
    fn level_sets_nested_and_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a = PixelImage::from_fn_at(GridLevel(3), |_| rng.gen_range(0.0..1.0));
            let d = level_sets(&a).unwrap();
            for pair in d.level_sets.windows(2) {
                assert!(pair[1].values().iter().zip(pair[0].values()).all(|(x, y)| x <= y));
            }
            assert!(d.reconstruct().unwrap().max_abs_diff(&a).unwrap() <= 1e-14);
        }
    }

    #[test]
    fn zero_image_has_no_layers() {
        let a = img(array![[0.0, 0.0, 0.0]]);
        let d = level_sets(&a).unwrap();
        assert!(d.level_sets.is_empty());
        assert_eq!(d.reconstruct().unwrap(), a);
    }

    #[test]
    fn rejects_negative_images() {
        let a = img(array![[-1.0, 0.0]]);
        assert!(level_sets(&a).is_err());
        assert!(cocorner_check(&a, 0.5).is_err());
        assert!(coarea_check(&a, 0.5).is_err());
    }

    #[test]
    fn quantization_merges_near_ties() {
        let a = img(array![[0.5, 0.5 + 1e-13], [0.25, 0.0]]);
        assert_eq!(level_sets(&a).unwrap().thresholds.len(), 4);
        assert_eq!(level_sets(&quantize(&a, 20)).unwrap().thresholds.len(), 3);
    }

    #[test]
    fn cocorner_profiles_are_monotone_and_piecewise_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let a = random_levels(&mut rng, 3, 4);
            let vals = level_sets(&a).unwrap().thresholds;
            let grid: Vec<f64> = (0..=40).map(|k| k as f64 * 0.03).collect();
            let checks: Vec<_> = grid.iter().map(|&s| cocorner_check(&a, s).unwrap()).collect();
            for w in checks.windows(2) {
                assert!(w[1].c_minus >= w[0].c_minus - 1e-12);
                assert!(w[1].c_plus <= w[0].c_plus + 1e-12);
            }
            // On sign-coherent images C₋ is the layer integral, hence linear
            // between consecutive image values. Otherwise a knot amplitude
            // may change sign between two values and add a kink.
            if !corner_sign_conflicts(&a).unwrap().is_empty() {
                continue;
            }
            for pair in vals.windows(2) {
                let (lo, hi) = (pair[0], pair[1]);
                let mid = 0.5 * (lo + hi);
                let f = |s| cocorner_check(&a, s).unwrap();
                let (l, m, h) = (f(lo), f(mid), f(hi));
                assert!((m.c_minus - 0.5 * (l.c_minus + h.c_minus)).abs() < 1e-12);
                assert!((m.c_plus - 0.5 * (l.c_plus + h.c_plus)).abs() < 1e-12);
            }
        }
    }
}
