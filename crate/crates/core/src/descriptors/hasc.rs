//! Heterogeneous auto-similarities of characteristics.
//!
//! Six dense maps per pixel: intensity, `|Ix|`, `|Iy|`, gradient magnitude,
//! `|Ixx|`, `|Iyy|` (central differences, mirrored borders). Each patch of
//! the grid contributes the upper triangle of the 6x6 covariance matrix
//! followed by the upper triangle of the entropy/mutual-information matrix.

use serde::{Deserialize, Serialize};

use super::FeatureVector;
use crate::error::{param, Result};
use crate::image::GrayImage;
use crate::scalar::Scalar;

/// Number of histogram bins used for entropy and mutual information.
pub const EMI_BINS: usize = 16;
pub const HASC_MAPS: usize = 6;
/// Values per patch: two 21-entry upper triangles.
pub const HASC_PATCH_DIM: usize = 2 * HASC_MAPS * (HASC_MAPS + 1) / 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HascGrid {
    pub rows: usize,
    pub cols: usize,
}

impl Default for HascGrid {
    fn default() -> Self {
        HascGrid { rows: 2, cols: 2 }
    }
}

impl HascGrid {
    /// Patch bounds `(x0, x1, y0, y1)` (half-open) in row-major order.
    pub fn patches(&self, width: usize, height: usize) -> Result<Vec<(usize, usize, usize, usize)>> {
        if self.rows == 0 || self.cols == 0 {
            return Err(param("HASC grid needs at least one patch"));
        }
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let (x0, x1) = (c * width / self.cols, (c + 1) * width / self.cols);
                let (y0, y1) = (r * height / self.rows, (r + 1) * height / self.rows);
                if x1 - x0 < 2 || y1 - y0 < 2 {
                    return Err(param(format!(
                        "a {}x{} grid on a {width}x{height} image gives patches smaller than 2x2",
                        self.rows, self.cols
                    )));
                }
                out.push((x0, x1, y0, y1));
            }
        }
        Ok(out)
    }
}

/// The six dense maps, each row-major over the full image.
pub fn feature_maps<T: Scalar>(img: &GrayImage<T>) -> [Vec<T>; HASC_MAPS] {
    let (w, h) = (img.width(), img.height());
    let at = |x: isize, y: isize| {
        let rx = reflect(x, w);
        let ry = reflect(y, h);
        img.get(rx, ry)
    };
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut maps: [Vec<T>; HASC_MAPS] = Default::default();
    for m in maps.iter_mut() {
        m.reserve(w * h);
    }
    for y in 0..h as isize {
        for x in 0..w as isize {
            let c = at(x, y);
            let ix = (at(x + 1, y) - at(x - 1, y)) * half;
            let iy = (at(x, y + 1) - at(x, y - 1)) * half;
            let ixx = at(x + 1, y) - two * c + at(x - 1, y);
            let iyy = at(x, y + 1) - two * c + at(x, y - 1);
            maps[0].push(c);
            maps[1].push(ix.abs());
            maps[2].push(iy.abs());
            maps[3].push((ix * ix + iy * iy).sqrt());
            maps[4].push(ixx.abs());
            maps[5].push(iyy.abs());
        }
    }
    maps
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let i = if i < 0 { -i } else { i };
    (if i >= n { 2 * (n - 1) - i } else { i }) as usize
}

/// Sample covariance matrix (upper triangle, row-major) of equally long maps.
pub fn covariance_upper<T: Scalar>(maps: &[Vec<T>]) -> Result<Vec<T>> {
    let n = maps.first().map_or(0, |m| m.len());
    if n < 2 || maps.iter().any(|m| m.len() != n) {
        return Err(param("covariance needs at least two samples per map and equal lengths"));
    }
    let nf = T::from_usize_lossy(n);
    let means: Vec<T> = maps.iter().map(|m| m.iter().copied().sum::<T>() / nf).collect();
    let mut out = Vec::with_capacity(maps.len() * (maps.len() + 1) / 2);
    for i in 0..maps.len() {
        for j in i..maps.len() {
            let s: T = maps[i]
                .iter()
                .zip(&maps[j])
                .map(|(&a, &b)| (a - means[i]) * (b - means[j]))
                .sum();
            out.push(s / T::from_usize_lossy(n - 1));
        }
    }
    Ok(out)
}

fn bin_indices<T: Scalar>(values: &[T]) -> Vec<usize> {
    let lo = values.iter().copied().fold(T::infinity(), T::min);
    let hi = values.iter().copied().fold(T::neg_infinity(), T::max);
    let span = hi - lo;
    if !(span > T::zero()) {
        return vec![0; values.len()];
    }
    let bins = T::from_usize_lossy(EMI_BINS);
    values
        .iter()
        .map(|&v| {
            let b = ((v - lo) / span * bins).floor().to_usize().unwrap_or(0);
            b.min(EMI_BINS - 1)
        })
        .collect()
}

fn entropy_of_counts<T: Scalar>(counts: &[u32], n: usize) -> T {
    let nf = T::from_usize_lossy(n);
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = T::lit(c as f64) / nf;
            -p * p.ln()
        })
        .sum()
}

/// Entropy (diagonal) and mutual information (off-diagonal) in nats from
/// 16-bin marginal and joint histograms; upper triangle, row-major.
pub fn emi_upper<T: Scalar>(maps: &[Vec<T>]) -> Result<Vec<T>> {
    let n = maps.first().map_or(0, |m| m.len());
    if n == 0 || maps.iter().any(|m| m.len() != n) {
        return Err(param("EMI needs non-empty maps of equal length"));
    }
    let bins: Vec<Vec<usize>> = maps.iter().map(|m| bin_indices(m)).collect();
    let entropies: Vec<T> = bins
        .iter()
        .map(|b| {
            let mut counts = [0u32; EMI_BINS];
            for &i in b {
                counts[i] += 1;
            }
            entropy_of_counts(&counts, n)
        })
        .collect();
    let mut out = Vec::with_capacity(maps.len() * (maps.len() + 1) / 2);
    for i in 0..maps.len() {
        for j in i..maps.len() {
            if i == j {
                out.push(entropies[i]);
                continue;
            }
            let mut joint = vec![0u32; EMI_BINS * EMI_BINS];
            for (&a, &b) in bins[i].iter().zip(&bins[j]) {
                joint[a * EMI_BINS + b] += 1;
            }
            let hj: T = entropy_of_counts(&joint, n);
            out.push((entropies[i] + entropies[j] - hj).max(T::zero()));
        }
    }
    Ok(out)
}

/// `[COV upper | EMI upper]` of a set of co-registered maps.
pub fn region_descriptor<T: Scalar>(maps: &[Vec<T>]) -> Result<Vec<T>> {
    let mut v = covariance_upper(maps)?;
    v.extend(emi_upper(maps)?);
    Ok(v)
}

/// Concatenated per-patch region descriptors; `42 * patches` values.
pub fn hasc<T: Scalar>(img: &GrayImage<T>, grid: &HascGrid) -> Result<FeatureVector<T>> {
    let (w, h) = (img.width(), img.height());
    let patches = grid.patches(w, h)?;
    let maps = feature_maps(img);
    let mut values = Vec::with_capacity(patches.len() * HASC_PATCH_DIM);
    for (x0, x1, y0, y1) in patches {
        let sub: Vec<Vec<T>> = maps
            .iter()
            .map(|m| {
                (y0..y1)
                    .flat_map(|y| (x0..x1).map(move |x| (x, y)))
                    .map(|(x, y)| m[y * w + x])
                    .collect()
            })
            .collect();
        values.extend(region_descriptor(&sub)?);
    }
    Ok(FeatureVector::new("hasc", values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_image_is_all_zero() {
        let img = GrayImage::constant(10, 10, 90.0f64).unwrap();
        let f = hasc(&img, &HascGrid::default()).unwrap();
        assert_eq!(f.dim(), 4 * 42);
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn perfectly_correlated_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..400).map(|_| rng.random_range(0.0..10.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        let maps = vec![a.clone(), b];
        let cov = covariance_upper(&maps).unwrap();
        let corr = cov[1] / (cov[0] * cov[2]).sqrt();
        assert!((corr - 1.0).abs() < 1e-12);
        let emi = emi_upper(&maps).unwrap();
        // entropy oracle straight from the 16-bin histogram of map a
        let lo = a.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = [0usize; 16];
        for v in &a {
            counts[(((v - lo) / (hi - lo) * 16.0) as usize).min(15)] += 1;
        }
        let h: f64 = counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / 400.0;
                -p * p.ln()
            })
            .sum();
        assert!((emi[0] - h).abs() < 1e-12);
        assert!((emi[1] - h).abs() < 0.05);
    }

    #[test]
    fn grid_too_fine() {
        let img = GrayImage::constant(6, 6, 1.0f64).unwrap();
        assert!(hasc(&img, &HascGrid { rows: 4, cols: 1 }).is_err());
        assert!(hasc(&img, &HascGrid { rows: 3, cols: 3 }).is_ok());
    }

    #[test]
    fn covariance_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let img = GrayImage::from_fn(9, 8, |_, _| rng.random_range(0.0..255.0)).unwrap();
        let f = hasc(&img, &HascGrid { rows: 1, cols: 1 }).unwrap();
        let maps = feature_maps(&img);
        let n = maps[0].len() as f64;
        let mut k = 0;
        for i in 0..6 {
            for j in i..6 {
                let mi: f64 = maps[i].iter().sum::<f64>() / n;
                let mj: f64 = maps[j].iter().sum::<f64>() / n;
                let mut s = 0.0;
                for t in 0..maps[i].len() {
                    s += (maps[i][t] - mi) * (maps[j][t] - mj);
                }
                assert_eq!(f.values[k], s / (n - 1.0));
                k += 1;
            }
        }
    }
}
