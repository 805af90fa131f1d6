//! Adaptive hybrid pattern: a ternary pattern whose threshold adapts to the
//! local 3x3 contrast, joined with a coarse-scale LBP histogram.

use serde::{Deserialize, Serialize};

use super::lbp::ternary_codes;
use super::{check_code_spec, lbp, CountHistogram, FeatureVector};
use crate::error::{param, Result};
use crate::image::{GrayImage, NeighborhoodSpec, RingSampler};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AhpParams {
    /// Local ternary pattern ring.
    pub spec: NeighborhoodSpec,
    /// Threshold multiplier on the local standard deviation.
    pub k: f64,
    /// Ring of the global-structure LBP.
    pub global_spec: NeighborhoodSpec,
}

impl Default for AhpParams {
    fn default() -> Self {
        AhpParams {
            spec: NeighborhoodSpec::new(1.0, 8).expect("valid"),
            k: 0.5,
            global_spec: NeighborhoodSpec::new(3.0, 8).expect("valid"),
        }
    }
}

/// Population standard deviation of the 3x3 block, computed from differences
/// to the centre so the value is unchanged by intensity offsets.
pub(crate) fn local_std3<T: Scalar>(img: &GrayImage<T>, x: usize, y: usize) -> T {
    let c = img.get(x, y);
    let block = img.block3(x, y);
    let nine = T::lit(9.0);
    let mean = block.iter().map(|&v| v - c).sum::<T>() / nine;
    let var = block.iter().map(|&v| (v - c - mean) * (v - c - mean)).sum::<T>() / nine;
    var.sqrt()
}

/// `[upper 2^P | lower 2^P | LBP 2^P']` with per-centre threshold
/// `k * std(3x3)`.
pub fn ahp<T: Scalar>(img: &GrayImage<T>, params: &AhpParams) -> Result<FeatureVector<T>> {
    check_code_spec(&params.spec)?;
    if !(params.k >= 0.0 && params.k.is_finite()) {
        return Err(param(format!("AHP threshold multiplier must be >= 0, got {}", params.k)));
    }
    let sampler = RingSampler::from_spec(&params.spec);
    let (xs, ys) = sampler.interior(img)?;
    let bins = 1 << params.spec.neighbors;
    let mut upper = CountHistogram::new(bins);
    let mut lower = CountHistogram::new(bins);
    let k = T::lit(params.k);
    let mut ring = vec![T::zero(); params.spec.neighbors];
    for y in ys {
        for x in xs.clone() {
            sampler.sample(img, x, y, &mut ring);
            let tau = k * local_std3(img, x, y);
            let (u, l) = ternary_codes(img.get(x, y), &ring, tau);
            upper.add(u);
            lower.add(l);
        }
    }
    let mut values = upper.normalized();
    values.extend(lower.normalized::<T>());
    values.extend(lbp(img, &params.global_spec)?.values);
    Ok(FeatureVector::new("ahp", values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image() {
        let img = GrayImage::constant(9, 9, 40.0f64).unwrap();
        let f = ahp(&img, &AhpParams::default()).unwrap();
        assert_eq!(f.dim(), 768);
        assert_eq!(f.values[255], 1.0);
        assert_eq!(f.values[256], 1.0);
        assert_eq!(f.values[512 + 255], 1.0);
    }

    #[test]
    fn shift_invariant() {
        let img = GrayImage::from_fn(11, 11, |x, y| ((x * 13 + y * 7) % 17) as f64).unwrap();
        let shifted = img.map(|v| v + 37.0).unwrap();
        let p = AhpParams::default();
        assert_eq!(ahp(&img, &p).unwrap(), ahp(&shifted, &p).unwrap());
    }

    #[test]
    fn local_std_matches_direct_formula() {
        let img = GrayImage::from_fn(3, 3, |x, y| (x * 3 + y) as f64).unwrap();
        let v: Vec<f64> = img.block3(1, 1).to_vec();
        let m = v.iter().sum::<f64>() / 9.0;
        let s = (v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / 9.0).sqrt();
        assert!((local_std3(&img, 1, 1) - s).abs() < 1e-12);
    }
}
