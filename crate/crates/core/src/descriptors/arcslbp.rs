//! Attractive-and-repulsive centre-symmetric LBP.
//!
//! For each centre `g_c` with ring samples `g_0..g_{P-1}` and `h = P/2`:
//!
//! * attractive bit `i < h`: `q((g_i + g_{i+h}) / 2 - g_c)`
//! * repulsive bit `i < h`: `q(|g_i - g_c| - |g_{i+h} - g_c|)`
//!
//! Both codes then append `q(ALGL - g_c)`, `q(AGGL - g_c)` and
//! `q(mean(ring) - g_c)` as bits `h`, `h+1`, `h+2`, where ALGL is the 3x3
//! mean around the centre and AGGL the image mean.

use serde::{Deserialize, Serialize};

use super::{check_code_spec, q, CountHistogram, FeatureVector};
use crate::error::{param, Result};
use crate::filters::{gradient_magnitude, hessian_magnitude};
use crate::image::{global_stats, GrayImage, NeighborhoodSpec, RingSampler};
use crate::scalar::Scalar;

/// Image the codes are computed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ArcslbpSource {
    Raw,
    /// Hessian magnitude at each scale; one block per sigma.
    Hessian { sigmas: Vec<f64> },
    /// Sobel gradient magnitude.
    Gradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArcslbpConfig {
    pub scales: Vec<NeighborhoodSpec>,
    pub source: ArcslbpSource,
}

impl ArcslbpConfig {
    /// `(radius, P) = (1, 8), (2, 8), (3, 8)` on the given source.
    pub fn standard(source: ArcslbpSource) -> Self {
        let scales = [1.0, 2.0, 3.0]
            .iter()
            .map(|&r| NeighborhoodSpec::new(r, 8).expect("valid"))
            .collect();
        ArcslbpConfig { scales, source }
    }

    /// Bins per part for one scale.
    pub fn part_bins(spec: &NeighborhoodSpec) -> usize {
        1 << (spec.neighbors / 2 + 3)
    }

    pub fn dim(&self) -> usize {
        let blocks = match &self.source {
            ArcslbpSource::Hessian { sigmas } => sigmas.len(),
            _ => 1,
        };
        blocks * self.scales.iter().map(|s| 2 * Self::part_bins(s)).sum::<usize>()
    }
}

/// Attractive and repulsive codes of one centre.
#[inline]
pub(crate) fn arcs_codes<T: Scalar>(center: T, ring: &[T], algl: T, aggl: T) -> (usize, usize) {
    let half = ring.len() / 2;
    let two = T::lit(2.0);
    let (mut att, mut rep) = (0usize, 0usize);
    for i in 0..half {
        let (a, b) = (ring[i], ring[i + half]);
        att |= (q((a + b) / two - center) as usize) << i;
        rep |= (q((a - center).abs() - (b - center).abs()) as usize) << i;
    }
    let ring_mean = ring.iter().copied().sum::<T>() / T::from_usize_lossy(ring.len());
    let extra = (q(algl - center) as usize)
        | ((q(aggl - center) as usize) << 1)
        | ((q(ring_mean - center) as usize) << 2);
    (att | (extra << half), rep | (extra << half))
}

/// Attractive histogram followed by repulsive histogram for one scale.
pub fn arcslbp_single<T: Scalar>(img: &GrayImage<T>, spec: &NeighborhoodSpec) -> Result<FeatureVector<T>> {
    if spec.neighbors % 2 != 0 {
        return Err(param(format!("ARCSLBP needs an even neighbor count, got {}", spec.neighbors)));
    }
    check_code_spec(spec)?;
    let sampler = RingSampler::from_spec(spec);
    let (xs, ys) = sampler.interior(img)?;
    let bins = ArcslbpConfig::part_bins(spec);
    let mut att = CountHistogram::new(bins);
    let mut rep = CountHistogram::new(bins);
    let aggl = global_stats(img).mean;
    let mut ring = vec![T::zero(); spec.neighbors];
    for y in ys {
        for x in xs.clone() {
            sampler.sample(img, x, y, &mut ring);
            let (a, r) = arcs_codes(img.get(x, y), &ring, img.local_mean3(x, y), aggl);
            att.add(a);
            rep.add(r);
        }
    }
    let mut values = att.normalized();
    values.extend(rep.normalized::<T>());
    Ok(FeatureVector::new("arcslbp", values))
}

/// Full descriptor: every source block times every scale, concatenated.
pub fn arcslbp<T: Scalar>(img: &GrayImage<T>, cfg: &ArcslbpConfig) -> Result<FeatureVector<T>> {
    if cfg.scales.is_empty() {
        return Err(param("ARCSLBP needs at least one scale"));
    }
    let sources: Vec<GrayImage<T>> = match &cfg.source {
        ArcslbpSource::Raw => vec![img.clone()],
        ArcslbpSource::Gradient => vec![gradient_magnitude(img)?],
        ArcslbpSource::Hessian { sigmas } => {
            if sigmas.is_empty() {
                return Err(param("Hessian source needs at least one sigma"));
            }
            sigmas.iter().map(|&s| hessian_magnitude(img, s)).collect::<Result<_>>()?
        }
    };
    let mut parts = Vec::with_capacity(sources.len() * cfg.scales.len());
    for src in &sources {
        for spec in &cfg.scales {
            parts.push(arcslbp_single(src, spec)?);
        }
    }
    Ok(FeatureVector::concat("arcslbp", parts))
}
