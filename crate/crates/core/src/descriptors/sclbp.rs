//! Sorted consecutive LBP: run-length encodings of sign and magnitude
//! patterns, quantized against learned codebooks.

use serde::{Deserialize, Serialize};

use super::{q, CountHistogram, FeatureVector};
use crate::codebook::Codebook;
use crate::error::{param, Error, Result};
use crate::image::{GrayImage, NeighborhoodSpec, RingSampler};
use crate::scalar::Scalar;

/// Raw vector length for 8 neighbors: three run codes of `2 * 4` entries plus
/// the centre bit.
pub const SCLBP_RAW_DIM: usize = raw_dim(8);

pub const fn raw_dim(neighbors: usize) -> usize {
    3 * 2 * neighbors.div_ceil(2) + 1
}

/// Which pattern a run code was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComponentTag {
    /// Sign of the neighbor-centre difference.
    S,
    /// Large positive differences.
    MPlus,
    /// Large negative differences.
    MMinus,
    /// Centre against the global mean.
    C,
}

/// Linear run lengths of ones and zeros, each sorted in descending order and
/// zero-padded to `ceil(P / 2)` entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RunCode {
    pub ones_runs: Vec<u8>,
    pub zeros_runs: Vec<u8>,
    pub component_tag: ComponentTag,
}

impl RunCode {
    /// Ones runs followed by zeros runs.
    pub fn values(&self) -> impl Iterator<Item = u8> + '_ {
        self.ones_runs.iter().chain(&self.zeros_runs).copied()
    }
}

/// Encodes a binary pattern (read left to right, not wrapped) into sorted
/// run lengths.
pub fn sclbp_encode(bits: &[bool], tag: ComponentTag) -> RunCode {
    let pad = bits.len().div_ceil(2);
    let mut ones = Vec::with_capacity(pad);
    let mut zeros = Vec::with_capacity(pad);
    let mut i = 0;
    while i < bits.len() {
        let b = bits[i];
        let start = i;
        while i < bits.len() && bits[i] == b {
            i += 1;
        }
        let run = (i - start) as u8;
        if b {
            ones.push(run);
        } else {
            zeros.push(run);
        }
    }
    for runs in [&mut ones, &mut zeros] {
        runs.sort_unstable_by(|a, b| b.cmp(a));
        runs.resize(pad, 0);
    }
    RunCode {
        ones_runs: ones,
        zeros_runs: zeros,
        component_tag: tag,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SclbpParams {
    pub radii: Vec<f64>,
    pub neighbors: usize,
    /// Codebook size per radius.
    pub clusters: usize,
    /// Cap on training vectors per radius.
    pub max_vectors: usize,
}

impl Default for SclbpParams {
    fn default() -> Self {
        SclbpParams {
            radii: (0..16).map(|i| (10 + 2 * i) as f64 / 10.0).collect(),
            neighbors: 8,
            clusters: 255,
            max_vectors: 100_000,
        }
    }
}

impl SclbpParams {
    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() {
            return Err(param("scLBP needs at least one radius"));
        }
        if self.clusters == 0 {
            return Err(param("scLBP codebooks need at least one cluster"));
        }
        for &r in &self.radii {
            NeighborhoodSpec::new(r, self.neighbors)?;
        }
        if self.neighbors > 64 {
            return Err(param("scLBP supports at most 64 neighbors"));
        }
        Ok(())
    }

    pub fn raw_dim(&self) -> usize {
        raw_dim(self.neighbors)
    }
}

/// Raw per-pixel vectors at one radius, row-major over interior centres.
///
/// Each vector is `[S runs | M+ runs | M- runs | C]`. The magnitude threshold
/// is the mean absolute neighbor difference over the image at this radius;
/// the centre bit compares the centre with the image mean.
pub fn sclbp_raw_vectors<T: Scalar>(img: &GrayImage<T>, radius: f64, neighbors: usize) -> Result<Vec<Vec<u8>>> {
    let spec = NeighborhoodSpec::new(radius, neighbors)?;
    let sampler = RingSampler::from_spec(&spec);
    let (xs, ys) = sampler.interior(img)?;
    let p = neighbors;

    let mut diffs: Vec<T> = Vec::with_capacity(xs.len() * ys.len() * p);
    let mut centers: Vec<T> = Vec::with_capacity(xs.len() * ys.len());
    let mut ring = vec![T::zero(); p];
    for y in ys {
        for x in xs.clone() {
            let c = img.get(x, y);
            sampler.sample(img, x, y, &mut ring);
            diffs.extend(ring.iter().map(|&v| v - c));
            centers.push(c);
        }
    }
    let mean_abs = diffs.iter().map(|d| d.abs()).sum::<T>() / T::from_usize_lossy(diffs.len());
    let global_mean = img.pixels().iter().copied().sum::<T>() / T::from_usize_lossy(img.pixels().len());

    let mut out = Vec::with_capacity(centers.len());
    let mut s = vec![false; p];
    let mut mp = vec![false; p];
    let mut mm = vec![false; p];
    for (k, &c) in centers.iter().enumerate() {
        let d = &diffs[k * p..(k + 1) * p];
        for i in 0..p {
            let big = d[i].abs() >= mean_abs;
            s[i] = q(d[i]) == 1;
            mp[i] = s[i] && big;
            mm[i] = !s[i] && big;
        }
        let mut v = Vec::with_capacity(raw_dim(p));
        v.extend(sclbp_encode(&s, ComponentTag::S).values());
        v.extend(sclbp_encode(&mp, ComponentTag::MPlus).values());
        v.extend(sclbp_encode(&mm, ComponentTag::MMinus).values());
        v.push(q(c - global_mean) as u8);
        out.push(v);
    }
    Ok(out)
}

/// Histogram of nearest-centroid assignments, pooled over every radius into
/// `clusters` bins. `codebooks[i]` quantizes radius `params.radii[i]`.
pub fn sclbp<T: Scalar>(img: &GrayImage<T>, params: &SclbpParams, codebooks: &[Codebook<T>]) -> Result<FeatureVector<T>> {
    params.validate()?;
    if codebooks.len() != params.radii.len() {
        return Err(Error::State(format!(
            "scLBP needs {} trained codebooks, got {}",
            params.radii.len(),
            codebooks.len()
        )));
    }
    let dim = params.raw_dim();
    for cb in codebooks {
        if cb.dim() != dim || cb.k() != params.clusters {
            return Err(Error::State(format!(
                "scLBP codebook is {}x{}, expected {}x{dim}",
                cb.k(),
                cb.dim(),
                params.clusters
            )));
        }
    }
    let mut hist = CountHistogram::new(params.clusters);
    let mut buf = vec![T::zero(); dim];
    for (&r, cb) in params.radii.iter().zip(codebooks) {
        for raw in sclbp_raw_vectors(img, r, params.neighbors)? {
            for (slot, &b) in buf.iter_mut().zip(&raw) {
                *slot = T::lit(b as f64);
            }
            hist.add(cb.assign(&buf)?);
        }
    }
    Ok(FeatureVector::new("sclbp", hist.normalized()))
}
