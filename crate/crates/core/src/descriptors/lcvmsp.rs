//! Local concave micro-structure pattern.
//!
//! Ten bits per centre on the radius-1, 8-neighbor ring: bits 0..7 are
//! concavity bits `q((g_{i-1} + g_{i+1}) / 2 - g_i)` (indices mod 8), bit 8
//! is `q(median3x3 - g_c)` and bit 9 is `q(median(image) - g_c)`.

use super::{q, CountHistogram, FeatureVector};
use crate::error::Result;
use crate::image::{global_stats, GrayImage, NeighborhoodSpec, RingSampler};
use crate::scalar::Scalar;

pub const LCVMSP_BINS: usize = 1024;

#[inline]
pub(crate) fn lcvmsp_code<T: Scalar>(center: T, ring: &[T; 8], local_median: T, global_median: T) -> usize {
    let two = T::lit(2.0);
    let mut code = 0usize;
    for i in 0..8 {
        let prev = ring[(i + 7) % 8];
        let next = ring[(i + 1) % 8];
        code |= (q((prev + next) / two - ring[i]) as usize) << i;
    }
    code | ((q(local_median - center) as usize) << 8) | ((q(global_median - center) as usize) << 9)
}

pub fn lcvmsp<T: Scalar>(img: &GrayImage<T>) -> Result<FeatureVector<T>> {
    let spec = NeighborhoodSpec::new(1.0, 8)?;
    let sampler = RingSampler::from_spec(&spec);
    let (xs, ys) = sampler.interior(img)?;
    let median = global_stats(img).median;
    let mut hist = CountHistogram::new(LCVMSP_BINS);
    let mut ring = [T::zero(); 8];
    for y in ys {
        for x in xs.clone() {
            sampler.sample(img, x, y, &mut ring);
            hist.add(lcvmsp_code(img.get(x, y), &ring, img.local_median3(x, y), median));
        }
    }
    Ok(FeatureVector::new("lcvmsp", hist.normalized()))
}
