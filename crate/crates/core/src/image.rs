//! Grayscale rasters, PNG decoding and sub-pixel circular neighborhoods.
//!
//! Neighbor ordering convention used by every descriptor: neighbor `p = 0`
//! points east (+x) and indices increase counter-clockwise as seen on screen,
//! i.e. neighbor `p` sits at `(cx + r cos a, cy - r sin a)` with
//! `a = start + 2 pi p / P` (image rows grow downwards).

use std::path::Path;

use crate::error::{dim, param, Error, Result};
use crate::scalar::Scalar;

/// Minimum side length accepted for an image.
pub const MIN_SIDE: usize = 3;

/// Offsets closer than this to an integer are snapped onto the pixel grid.
const SNAP_EPS: f64 = 1e-9;

/// Row-major real-valued intensity raster.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<T> {
    width: usize,
    height: usize,
    pixels: Vec<T>,
}

impl<T: Scalar> GrayImage<T> {
    pub fn new(width: usize, height: usize, pixels: Vec<T>) -> Result<Self> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(dim(format!(
                "image is {width}x{height}, both sides must be at least {MIN_SIDE}"
            )));
        }
        if pixels.len() != width * height {
            return Err(dim(format!(
                "expected {} pixels for a {width}x{height} image, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(param(format!("pixel {i} is not finite")));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn constant(width: usize, height: usize, value: T) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<T> {
        self.pixels
    }

    /// Pixel at column `x`, row `y`. Panics when out of range.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.pixels[y * self.width + x]
    }

    /// Applies `f` to every pixel. Fails if `f` produces non-finite values.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.width, self.height, self.pixels.iter().map(|&v| f(v)).collect())
    }

    /// Mean of the 3x3 block centred on `(x, y)`; the centre must be at least
    /// one pixel away from every border.
    pub fn local_mean3(&self, x: usize, y: usize) -> T {
        let mut acc = T::zero();
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                acc += self.get(xx, yy);
            }
        }
        acc / T::lit(9.0)
    }

    /// Median of the 3x3 block centred on `(x, y)`.
    pub fn local_median3(&self, x: usize, y: usize) -> T {
        let mut block = self.block3(x, y);
        block.sort_by(|a, b| a.partial_cmp(b).expect("finite pixels"));
        block[4]
    }

    /// The 3x3 block centred on `(x, y)` in row-major order.
    pub fn block3(&self, x: usize, y: usize) -> [T; 9] {
        let mut out = [T::zero(); 9];
        let mut k = 0;
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                out[k] = self.get(xx, yy);
                k += 1;
            }
        }
        out
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> GrayImage<U> {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Reads a PNG file into a real-valued grayscale image with intensities in
/// `[0, 255]`. Color inputs are reduced with Rec.601 luma weights.
pub fn load_image<T: Scalar>(path: impl AsRef<Path>) -> Result<GrayImage<T>> {
    let path = path.as_ref();
    let decoded = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let pixels: Vec<T> = match decoded {
        image::DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(|v| T::lit(v as f64)).collect(),
        image::DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| T::lit(p.0[0] as f64)).collect(),
        image::DynamicImage::ImageLuma16(buf) => buf
            .into_raw()
            .into_iter()
            .map(|v| T::lit(v as f64 / 257.0))
            .collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                T::lit(luma601(r, g, b))
            })
            .collect(),
    };
    GrayImage::new(width, height, pixels)
}

/// Rec.601 luma of an 8-bit RGB triple.
pub fn luma601(r: u8, g: u8, b: u8) -> f64 {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    if r == g && g == b {
        // keep gray inputs exact
        return r;
    }
    0.299 * r + 0.587 * g + 0.114 * b
}

/// Bilinear interpolation at real coordinates; exact at integer coordinates.
pub fn bilinear_sample<T: Scalar>(img: &GrayImage<T>, x: f64, y: f64) -> Result<T> {
    let (w, h) = (img.width as f64, img.height as f64);
    if !(x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0) {
        return Err(Error::Bounds(format!(
            "({x}, {y}) outside [0, {}] x [0, {}]",
            w - 1.0,
            h - 1.0
        )));
    }
    Ok(sample_unchecked(img, x, y))
}

#[inline]
fn sample_unchecked<T: Scalar>(img: &GrayImage<T>, x: f64, y: f64) -> T {
    let x0 = (x.floor() as usize).min(img.width - 1);
    let y0 = (y.floor() as usize).min(img.height - 1);
    let (x1, y1) = ((x0 + 1).min(img.width - 1), (y0 + 1).min(img.height - 1));
    let fx = T::lit(x - x0 as f64);
    let fy = T::lit(y - y0 as f64);
    lerp2(img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1), fx, fy)
}

/// Two-stage lerp; returns `v00` bit-exactly when both fractions are zero and
/// the common value when all four corners agree.
#[inline]
fn lerp2<T: Scalar>(v00: T, v10: T, v01: T, v11: T, fx: T, fy: T) -> T {
    let top = v00 + fx * (v10 - v00);
    let bottom = v01 + fx * (v11 - v01);
    top + fy * (bottom - top)
}

/// Circular sampling geometry: `neighbors` points on a circle of `radius`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NeighborhoodSpec {
    pub radius: f64,
    pub neighbors: usize,
    /// Angle of neighbor 0 in radians, counter-clockwise from east.
    #[serde(default)]
    pub start_angle: f64,
}

impl NeighborhoodSpec {
    pub fn new(radius: f64, neighbors: usize) -> Result<Self> {
        let spec = NeighborhoodSpec {
            radius,
            neighbors,
            start_angle: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_start_angle(mut self, angle: f64) -> Self {
        self.start_angle = angle;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(param(format!("radius must be positive, got {}", self.radius)));
        }
        if self.neighbors < 4 || self.neighbors % 2 != 0 {
            return Err(param(format!(
                "neighbor count must be even and at least 4, got {}",
                self.neighbors
            )));
        }
        if !self.start_angle.is_finite() {
            return Err(param("start angle must be finite"));
        }
        Ok(())
    }

    /// `(dx, dy)` offset of every neighbor, in order.
    pub fn offsets(&self) -> Vec<(f64, f64)> {
        let p = self.neighbors as f64;
        (0..self.neighbors)
            .map(|i| {
                let a = self.start_angle + 2.0 * std::f64::consts::PI * i as f64 / p;
                (snap(self.radius * a.cos()), snap(-self.radius * a.sin()))
            })
            .collect()
    }

    /// Distance in whole pixels a centre must keep from every border.
    pub fn margin(&self) -> usize {
        margin_of(&self.offsets())
    }
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP_EPS {
        r + 0.0
    } else {
        v
    }
}

fn margin_of(offsets: &[(f64, f64)]) -> usize {
    offsets
        .iter()
        .map(|&(dx, dy)| dx.abs().max(dy.abs()).ceil() as usize)
        .max()
        .unwrap_or(0)
}

/// Samples the `P` circular neighbors of an interior pixel.
pub fn circular_neighbors<T: Scalar>(
    img: &GrayImage<T>,
    cx: usize,
    cy: usize,
    spec: &NeighborhoodSpec,
) -> Result<Vec<T>> {
    spec.validate()?;
    let sampler = RingSampler::new(&spec.offsets());
    if !sampler.is_interior(img, cx, cy) {
        return Err(Error::Bounds(format!(
            "centre ({cx}, {cy}) is closer than {} pixels to the border of a {}x{} image",
            sampler.margin(),
            img.width,
            img.height
        )));
    }
    let mut out = vec![T::zero(); spec.neighbors];
    sampler.sample(img, cx, cy, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Tap {
    dx: isize,
    dy: isize,
    fx: f64,
    fy: f64,
}

/// Precomputed sampling pattern for a fixed set of real offsets.
///
/// Each offset is split into an integer base and bilinear fractions once, so
/// dense descriptors avoid recomputing trigonometry per pixel.
#[derive(Debug, Clone)]
pub struct RingSampler {
    taps: Vec<Tap>,
    margin: usize,
}

impl RingSampler {
    pub fn new(offsets: &[(f64, f64)]) -> Self {
        let taps = offsets
            .iter()
            .map(|&(dx, dy)| {
                let bx = dx.floor();
                let by = dy.floor();
                Tap {
                    dx: bx as isize,
                    dy: by as isize,
                    fx: dx - bx,
                    fy: dy - by,
                }
            })
            .collect();
        RingSampler {
            taps,
            margin: margin_of(offsets),
        }
    }

    pub fn from_spec(spec: &NeighborhoodSpec) -> Self {
        Self::new(&spec.offsets())
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    pub fn is_interior<T>(&self, img: &GrayImage<T>, cx: usize, cy: usize) -> bool {
        cx >= self.margin
            && cy >= self.margin
            && cx + self.margin < img.width
            && cy + self.margin < img.height
    }

    /// Interior centre range `(x_range, y_range)`, or an error when the image
    /// has no interior pixel for this pattern.
    pub fn interior<T>(
        &self,
        img: &GrayImage<T>,
    ) -> Result<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        let m = self.margin;
        if img.width <= 2 * m || img.height <= 2 * m {
            return Err(dim(format!(
                "a {}x{} image has no pixel at distance {m} from every border",
                img.width, img.height
            )));
        }
        Ok((m..img.width - m, m..img.height - m))
    }

    /// Writes the samples around `(cx, cy)` into `out`. The centre must be
    /// interior.
    #[inline]
    pub fn sample<T: Scalar>(&self, img: &GrayImage<T>, cx: usize, cy: usize, out: &mut [T]) {
        debug_assert!(self.is_interior(img, cx, cy));
        for (slot, tap) in out.iter_mut().zip(&self.taps) {
            let x0 = (cx as isize + tap.dx) as usize;
            let y0 = (cy as isize + tap.dy) as usize;
            *slot = if tap.fx == 0.0 && tap.fy == 0.0 {
                img.get(x0, y0)
            } else if tap.fy == 0.0 {
                let a = img.get(x0, y0);
                a + T::lit(tap.fx) * (img.get(x0 + 1, y0) - a)
            } else if tap.fx == 0.0 {
                let a = img.get(x0, y0);
                a + T::lit(tap.fy) * (img.get(x0, y0 + 1) - a)
            } else {
                lerp2(
                    img.get(x0, y0),
                    img.get(x0 + 1, y0),
                    img.get(x0, y0 + 1),
                    img.get(x0 + 1, y0 + 1),
                    T::lit(tap.fx),
                    T::lit(tap.fy),
                )
            };
        }
    }
}

/// Whole-image grey-level statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageStats<T> {
    pub mean: T,
    /// Lower median: element `(n - 1) / 2` of the sorted pixels.
    pub median: T,
    pub min: T,
    pub max: T,
}

pub fn global_stats<T: Scalar>(img: &GrayImage<T>) -> ImageStats<T> {
    let n = img.pixels.len();
    let mean = img.pixels.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let mut sorted = img.pixels.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite pixels"));
    let (min, max) = (sorted[0], sorted[n - 1]);
    ImageStats {
        // rounding can push the mean of near-constant images a hair outside
        mean: mean.max(min).min(max),
        median: sorted[(n - 1) / 2],
        min,
        max,
    }
}
