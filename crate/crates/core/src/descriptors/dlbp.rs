//! Discriminative LBP: per-patch optimal threshold with a contrast weight.

use super::{check_code_spec, FeatureVector};
use crate::error::{param, Result};
use crate::image::{GrayImage, NeighborhoodSpec, RingSampler};
use crate::scalar::Scalar;

/// Smoothing constant in the patch weight denominator.
pub const DLBP_C: f64 = 0.01 * 0.01;

/// Optimal split of one patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DlbpPatchResult<T> {
    /// Threshold minimizing the within-class residual; values `<= tau_star`
    /// form the lower class.
    pub tau_star: T,
    /// Between-class variance at `tau_star`.
    pub sigma_b2: T,
    /// Total (population) variance of the patch.
    pub sigma2: T,
    /// `sqrt(sigma_b2 / (sigma2 + c))`.
    pub weight: T,
    pub c: T,
}

/// Within-class residual `eps(tau)`: squared deviations from the two class
/// means (`<= tau` and `> tau`), divided by the patch size.
fn residual<T: Scalar>(values: &[T], tau: T) -> T {
    let (mut s0, mut n0, mut s1, mut n1) = (T::zero(), 0usize, T::zero(), 0usize);
    for &v in values {
        if v <= tau {
            s0 += v;
            n0 += 1;
        } else {
            s1 += v;
            n1 += 1;
        }
    }
    let mu0 = if n0 > 0 { s0 / T::from_usize_lossy(n0) } else { T::zero() };
    let mu1 = if n1 > 0 { s1 / T::from_usize_lossy(n1) } else { T::zero() };
    let mut acc = T::zero();
    for &v in values {
        let d = if v <= tau { v - mu0 } else { v - mu1 };
        acc += d * d;
    }
    acc / T::from_usize_lossy(values.len())
}

/// Finds the threshold of `patch` (centre plus ring samples) that minimizes
/// the within-class residual. Candidates are the distinct patch values below
/// the maximum; the lowest candidate wins ties. A constant patch returns its
/// value with zero weight.
pub fn dlbp_patch<T: Scalar>(patch: &[T]) -> Result<DlbpPatchResult<T>> {
    if patch.len() < 2 {
        return Err(param("a DLBP patch needs at least two values"));
    }
    if patch.iter().any(|v| !v.is_finite()) {
        return Err(param("DLBP patch values must be finite"));
    }
    let n = T::from_usize_lossy(patch.len());
    let mean = patch.iter().copied().sum::<T>() / n;
    let sigma2 = patch.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;

    let mut sorted = patch.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    sorted.dedup();
    let c = T::lit(DLBP_C);

    let (tau_star, sigma_w2) = if sorted.len() == 1 {
        (sorted[0], sigma2)
    } else {
        let mut best = (sorted[0], residual(patch, sorted[0]));
        for &tau in &sorted[1..sorted.len() - 1] {
            let e = residual(patch, tau);
            if e < best.1 {
                best = (tau, e);
            }
        }
        best
    };
    let sigma_b2 = (sigma2 - sigma_w2).max(T::zero());
    let weight = (sigma_b2 / (sigma2 + c)).sqrt();
    Ok(DlbpPatchResult {
        tau_star,
        sigma_b2,
        sigma2,
        weight,
        c,
    })
}

/// Weighted `2^P` histogram: each interior pixel votes for the code of its
/// neighbors above the patch threshold (`i_p > tau_star`) with the patch
/// weight. An image whose patches all carry zero weight yields the uniform
/// distribution.
pub fn dlbp<T: Scalar>(img: &GrayImage<T>, spec: &NeighborhoodSpec) -> Result<FeatureVector<T>> {
    check_code_spec(spec)?;
    let sampler = RingSampler::from_spec(spec);
    let (xs, ys) = sampler.interior(img)?;
    let p = spec.neighbors;
    let bins = 1usize << p;
    let mut hist = vec![T::zero(); bins];
    let mut patch = vec![T::zero(); p + 1];
    for y in ys {
        for x in xs.clone() {
            patch[0] = img.get(x, y);
            sampler.sample(img, x, y, &mut patch[1..]);
            let r = dlbp_patch(&patch)?;
            let code = patch[1..]
                .iter()
                .enumerate()
                .fold(0usize, |acc, (i, &v)| acc | (((v > r.tau_star) as usize) << i));
            hist[code] += r.weight;
        }
    }
    let total: T = hist.iter().copied().sum();
    let values = if total > T::zero() {
        hist.into_iter().map(|h| h / total).collect()
    } else {
        vec![T::one() / T::from_usize_lossy(bins); bins]
    };
    Ok(FeatureVector::new("dlbp", values))
}

/// DLBP histograms at several scales, concatenated.
pub fn dlbp_multiscale<T: Scalar>(img: &GrayImage<T>, specs: &[NeighborhoodSpec]) -> Result<FeatureVector<T>> {
    let parts = specs.iter().map(|s| dlbp(img, s)).collect::<Result<Vec<_>>>()?;
    Ok(FeatureVector::concat("dlbp", parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_patch_has_zero_weight() {
        let r = dlbp_patch(&[4.0f64; 9]).unwrap();
        assert_eq!(r.sigma2, 0.0);
        assert_eq!(r.sigma_b2, 0.0);
        assert_eq!(r.weight, 0.0);
        assert_eq!(r.tau_star, 4.0);
    }

    #[test]
    fn two_valued_patch_splits_perfectly() {
        let patch = [3.0f64, 3.0, 3.0, 10.0, 10.0, 3.0, 10.0, 3.0, 3.0];
        let r = dlbp_patch(&patch).unwrap();
        assert_eq!(r.tau_star, 3.0);
        assert!((r.sigma_b2 - r.sigma2).abs() < 1e-12);
        let w = (r.sigma2 / (r.sigma2 + DLBP_C)).sqrt();
        assert!((r.weight - w).abs() < 1e-12);
        // sweeping every tau in [3, 10) leaves no within-class residual
        for tau in [3.0, 5.5, 9.99] {
            assert!(residual(&patch, tau) < 1e-12);
        }
    }

    #[test]
    fn invariants_hold() {
        let patch = [12.0f64, 200.0, 45.0, 45.0, 90.0, 3.0, 150.0, 151.0, 0.5];
        let r = dlbp_patch(&patch).unwrap();
        assert!(r.sigma_b2 <= r.sigma2 + 1e-12);
        assert!(r.weight >= 0.0 && r.weight <= 1.0);
        assert_eq!(r.c, DLBP_C);
    }

    #[test]
    fn constant_image_gives_uniform_histogram() {
        let img = GrayImage::constant(7, 7, 50.0f64).unwrap();
        let f = dlbp(&img, &NeighborhoodSpec::new(1.0, 8).unwrap()).unwrap();
        assert!(f.values.iter().all(|&v| v == 1.0 / 256.0));
    }

    #[test]
    fn single_patch_carries_all_mass() {
        let mut px = vec![10.0f64; 9];
        px[1] = 200.0; // north neighbor
        px[5] = 180.0; // east neighbor
        let img = GrayImage::new(3, 3, px).unwrap();
        let f = dlbp(&img, &NeighborhoodSpec::new(1.0, 8).unwrap()).unwrap();
        let hot = f.values.iter().position(|&v| v > 0.0).unwrap();
        assert_eq!(f.values[hot], 1.0);
        assert_eq!(hot & 0b101, 0b101);
    }
}
