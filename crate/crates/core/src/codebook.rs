//! k-means dictionaries for the codebook-based descriptors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::descriptors::{jet_pool, sclbp_raw_vectors, SclbpParams};
use crate::error::{param, Error, Result};
use crate::filters::FilterBank;
use crate::image::GrayImage;
use crate::scalar::Scalar;

pub const MAX_ITERATIONS: usize = 300;
/// Default cap on training vectors per codebook.
pub const DEFAULT_MAX_VECTORS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta<T> {
    pub seed: u64,
    pub iterations: usize,
    /// Final within-cluster sum of squared distances.
    pub inertia: T,
    /// Inertia after each assignment step; non-increasing.
    pub inertia_history: Vec<T>,
}

/// `k` centroids of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<T> {
    k: usize,
    dim: usize,
    centroids: Vec<T>,
    pub meta: TrainingMeta<T>,
}

impl<T: Scalar> Codebook<T> {
    pub fn from_centroids(centroids: Vec<Vec<T>>, meta: TrainingMeta<T>) -> Result<Self> {
        let k = centroids.len();
        let dim = centroids.first().map_or(0, |c| c.len());
        if k == 0 || dim == 0 {
            return Err(param("a codebook needs at least one centroid of dimension >= 1"));
        }
        if centroids.iter().any(|c| c.len() != dim) {
            return Err(param("codebook centroids have mixed dimensions"));
        }
        let flat: Vec<T> = centroids.into_iter().flatten().collect();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(param("codebook centroids must be finite"));
        }
        Ok(Codebook {
            k,
            dim,
            centroids: flat,
            meta,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, j: usize) -> &[T] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }

    pub fn centroids(&self) -> impl Iterator<Item = &[T]> {
        self.centroids.chunks_exact(self.dim)
    }

    /// Nearest centroid by squared Euclidean distance; lowest index on ties.
    pub fn assign(&self, v: &[T]) -> Result<usize> {
        if v.len() != self.dim {
            return Err(param(format!(
                "vector has dimension {}, codebook expects {}",
                v.len(),
                self.dim
            )));
        }
        Ok(nearest(&self.centroids, self.dim, v).0)
    }

    /// Header line `k,dim,seed,iterations,inertia` followed by one centroid
    /// per line.
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "{},{},{},{},{}\n",
            self.k, self.dim, self.meta.seed, self.meta.iterations, self.meta.inertia
        );
        for c in self.centroids() {
            for (i, v) in c.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                write!(s, "{v}").expect("write to string");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Parse {
            what: "codebook".into(),
            message: m,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty file".into()))?.split(',').collect();
        if header.len() != 5 {
            return Err(bad(format!("header has {} fields, expected 5", header.len())));
        }
        let num = |s: &str| s.trim().parse::<usize>().map_err(|e| bad(format!("{s:?}: {e}")));
        let (k, dim) = (num(header[0])?, num(header[1])?);
        let seed = header[2].trim().parse::<u64>().map_err(|e| bad(e.to_string()))?;
        let iterations = num(header[3])?;
        let inertia = parse_scalar::<T>(header[4]).map_err(bad)?;
        let mut rows = Vec::with_capacity(k);
        for line in lines {
            let row = line.split(',').map(parse_scalar::<T>).collect::<Result<Vec<_>, _>>().map_err(bad)?;
            if row.len() != dim {
                return Err(bad(format!("centroid row has {} values, expected {dim}", row.len())));
            }
            rows.push(row);
        }
        if rows.len() != k {
            return Err(bad(format!("found {} centroids, expected {k}", rows.len())));
        }
        Codebook::from_centroids(
            rows,
            TrainingMeta {
                seed,
                iterations,
                inertia,
                inertia_history: Vec::new(),
            },
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

fn parse_scalar<T: Scalar>(s: &str) -> Result<T, String> {
    s.trim().parse::<T>().map_err(|_| format!("not a number: {s:?}"))
}

#[inline]
fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest row of `centroids`.
#[inline]
fn nearest<T: Scalar>(centroids: &[T], dim: usize, v: &[T]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(c, v);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Unweighted k-means; see [`kmeans_fit_weighted`].
pub fn kmeans_fit<T: Scalar>(points: &[Vec<T>], k: usize, seed: u64) -> Result<Codebook<T>> {
    kmeans_fit_weighted(points, &vec![1; points.len()], k, seed)
}

/// Lloyd's algorithm with k-means++ seeding. `weights[i]` is the
/// multiplicity of `points[i]`, so duplicated rows can be passed once.
///
/// The point count checked against `k` is the total weight. Stops when the
/// assignment no longer changes or after [`MAX_ITERATIONS`]. A cluster left
/// empty by an update is moved onto the point farthest from its centroid.
/// If rounding would ever raise the inertia the previous centroids are kept
/// and training stops.
pub fn kmeans_fit_weighted<T: Scalar>(points: &[Vec<T>], weights: &[u64], k: usize, seed: u64) -> Result<Codebook<T>> {
    if k == 0 {
        return Err(param("k-means needs k >= 1"));
    }
    if points.len() != weights.len() {
        return Err(param("one weight per point is required"));
    }
    let dim = points.first().map_or(0, |p| p.len());
    if dim == 0 {
        return Err(param("k-means needs points of dimension >= 1"));
    }
    if points.iter().any(|p| p.len() != dim) {
        return Err(param("k-means points have mixed dimensions"));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(param("k-means points must be finite"));
    }
    let total: u64 = weights.iter().sum();
    if (total as u128) < k as u128 {
        return Err(param(format!("k-means needs at least k = {k} points, got {total}")));
    }
    let w: Vec<T> = weights.iter().map(|&c| T::lit(c as f64)).collect();
    let flat: Vec<T> = points.iter().flatten().copied().collect();
    let point = |i: usize| &flat[i * dim..(i + 1) * dim];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(&flat, dim, &w, k, &mut rng);

    let assign_all = |c: &[T]| -> Vec<(usize, T)> {
        (0..points.len()).into_par_iter().map(|i| nearest(c, dim, point(i))).collect()
    };
    let inertia_of = |a: &[(usize, T)]| a.iter().zip(&w).map(|(&(_, d), &wi)| wi * d).sum::<T>();

    let mut assignment = assign_all(&centroids);
    let mut inertia = inertia_of(&assignment);
    let mut history = vec![inertia];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut next = update_centroids(&flat, dim, &w, &assignment, &centroids, k);
        reseed_empty(&flat, dim, &w, &assignment, &mut next, k);
        let next_assignment = assign_all(&next);
        let next_inertia = inertia_of(&next_assignment);
        if next_inertia > inertia {
            break;
        }
        let stable = next_assignment.iter().zip(&assignment).all(|(a, b)| a.0 == b.0);
        centroids = next;
        assignment = next_assignment;
        inertia = next_inertia;
        history.push(inertia);
        if stable {
            break;
        }
    }
    log::debug!("k-means k={k} n={total} converged after {iterations} iterations, inertia {inertia}");
    Ok(Codebook {
        k,
        dim,
        centroids,
        meta: TrainingMeta {
            seed,
            iterations,
            inertia,
            inertia_history: history,
        },
    })
}

fn plus_plus_init<T: Scalar>(flat: &[T], dim: usize, w: &[T], k: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let n = w.len();
    let point = |i: usize| &flat[i * dim..(i + 1) * dim];
    let first = WeightedIndex::new(w.iter().map(|v| v.as_f64()))
        .expect("positive total weight")
        .sample(rng);
    let mut centroids = point(first).to_vec();
    let mut d2: Vec<T> = (0..n).map(|i| sq_dist(point(i), point(first))).collect();
    for _ in 1..k {
        let scores: Vec<f64> = d2.iter().zip(w).map(|(&d, &wi)| (d * wi).as_f64()).collect();
        let pick = match WeightedIndex::new(&scores) {
            Ok(dist) => dist.sample(rng),
            // every point already coincides with a centroid
            Err(_) => {
                let _: u32 = rng.random();
                0
            }
        };
        let c = point(pick);
        centroids.extend_from_slice(c);
        for (i, d) in d2.iter_mut().enumerate() {
            let nd = sq_dist(point(i), c);
            if nd < *d {
                *d = nd;
            }
        }
    }
    centroids
}

fn update_centroids<T: Scalar>(
    flat: &[T],
    dim: usize,
    w: &[T],
    assignment: &[(usize, T)],
    old: &[T],
    k: usize,
) -> Vec<T> {
    let mut sums = vec![T::zero(); k * dim];
    let mut mass = vec![T::zero(); k];
    for (i, &(j, _)) in assignment.iter().enumerate() {
        mass[j] += w[i];
        for (s, &v) in sums[j * dim..(j + 1) * dim].iter_mut().zip(&flat[i * dim..(i + 1) * dim]) {
            *s += w[i] * v;
        }
    }
    for j in 0..k {
        let row = &mut sums[j * dim..(j + 1) * dim];
        if mass[j] > T::zero() {
            for s in row.iter_mut() {
                *s /= mass[j];
            }
        } else {
            row.copy_from_slice(&old[j * dim..(j + 1) * dim]);
        }
    }
    sums
}

fn reseed_empty<T: Scalar>(flat: &[T], dim: usize, w: &[T], assignment: &[(usize, T)], centroids: &mut [T], k: usize) {
    let mut used = vec![false; k];
    for &(j, _) in assignment {
        used[j] = true;
    }
    let mut taken = vec![false; w.len()];
    for j in (0..k).filter(|&j| !used[j]) {
        let mut far = None;
        let mut far_d = T::zero();
        for i in 0..w.len() {
            if taken[i] {
                continue;
            }
            let (_, d) = nearest(centroids, dim, &flat[i * dim..(i + 1) * dim]);
            if d > far_d {
                far = Some(i);
                far_d = d;
            }
        }
        if let Some(i) = far {
            taken[i] = true;
            centroids[j * dim..(j + 1) * dim].copy_from_slice(&flat[i * dim..(i + 1) * dim]);
        }
    }
}

/// Up to `cap` row indices drawn without replacement, in ascending order.
pub fn subsample_indices(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, cap).into_vec();
    idx.sort_unstable();
    idx
}

/// Per-radius seed so radii draw independent samples.
fn radius_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// One codebook per radius of `params`, trained on raw scLBP vectors of the
/// given (training-only) images. Vectors are subsampled to
/// `params.max_vectors` per radius, then deduplicated into weighted points.
pub fn build_sclbp_codebook<T: Scalar>(
    images: &[GrayImage<T>],
    params: &SclbpParams,
    seed: u64,
) -> Result<Vec<Codebook<T>>> {
    params.validate()?;
    if images.is_empty() {
        return Err(param("scLBP codebook training needs at least one image"));
    }
    params
        .radii
        .par_iter()
        .enumerate()
        .map(|(ri, &r)| {
            let mut pool = Vec::new();
            for img in images {
                pool.extend(sclbp_raw_vectors(img, r, params.neighbors)?);
            }
            if pool.len() < params.clusters {
                return Err(param(format!(
                    "radius {r}: {} scLBP vectors cannot train {} clusters",
                    pool.len(),
                    params.clusters
                )));
            }
            let rs = radius_seed(seed, ri);
            let mut counts: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
            for i in subsample_indices(pool.len(), params.max_vectors, rs) {
                *counts.entry(std::mem::take(&mut pool[i])).or_default() += 1;
            }
            let (points, weights): (Vec<Vec<T>>, Vec<u64>) = counts
                .into_iter()
                .map(|(v, c)| (v.into_iter().map(|b| T::lit(b as f64)).collect(), c))
                .unzip();
            kmeans_fit_weighted(&points, &weights, params.clusters, rs)
        })
        .collect()
}

/// `k` jet textons from the pooled per-pixel responses of the training
/// images, subsampled to `max_vectors`.
pub fn build_jet_codebook<T: Scalar>(
    images: &[GrayImage<T>],
    k: usize,
    bank: &FilterBank<T>,
    max_vectors: usize,
    seed: u64,
) -> Result<Codebook<T>> {
    let mut pool = Vec::new();
    for img in images {
        pool.extend(jet_pool(img, bank)?);
    }
    let idx = subsample_indices(pool.len(), max_vectors, seed);
    let points: Vec<Vec<T>> = idx.into_iter().map(|i| std::mem::take(&mut pool[i])).collect();
    kmeans_fit(&points, k, seed)
}
