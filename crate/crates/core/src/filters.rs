//! Linear filtering: Gaussian derivative kernels, mirror-border convolution,
//! Hessian and Sobel magnitudes, and the six-filter jet bank.

use crate::error::{dim, param, Result};
use crate::image::GrayImage;
use crate::scalar::Scalar;

/// Square convolution kernel with odd side length, row-major taps
/// (row index is y, column index is x).
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2D<T> {
    size: usize,
    taps: Vec<T>,
}

impl<T: Scalar> Kernel2D<T> {
    pub fn new(size: usize, taps: Vec<T>) -> Result<Self> {
        if size == 0 || size % 2 == 0 {
            return Err(param(format!("kernel size must be odd, got {size}")));
        }
        if taps.len() != size * size {
            return Err(dim(format!("{size}x{size} kernel needs {} taps, got {}", size * size, taps.len())));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(param("kernel taps must be finite"));
        }
        Ok(Kernel2D { size, taps })
    }

    /// Evaluates `f(x, y)` at integer offsets `-half..=half` around the centre.
    pub fn from_fn(size: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if size % 2 == 0 {
            return Err(param(format!("kernel size must be odd, got {size}")));
        }
        let half = (size / 2) as f64;
        let mut taps = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                taps.push(T::lit(f(j as f64 - half, i as f64 - half)));
            }
        }
        Self::new(size, taps)
    }

    /// Single 1 at the centre.
    pub fn identity(size: usize) -> Result<Self> {
        Self::from_fn(size, |x, y| if x == 0.0 && y == 0.0 { 1.0 } else { 0.0 })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn half(&self) -> usize {
        self.size / 2
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    /// Tap at row `i`, column `j`.
    pub fn at(&self, i: usize, j: usize) -> T {
        self.taps[i * self.size + j]
    }

    pub fn sum(&self) -> T {
        self.taps.iter().copied().sum()
    }

    pub fn transpose(&self) -> Self {
        let n = self.size;
        let mut taps = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                taps[j * n + i] = self.taps[i * n + j];
            }
        }
        Kernel2D { size: n, taps }
    }

    /// Subtracts the tap mean so the kernel has no DC response. Symmetry
    /// (including transpose relations between kernels) is preserved.
    pub fn zero_mean(&self) -> Self {
        let mean = self.sum() / T::from_usize_lossy(self.taps.len());
        Kernel2D {
            size: self.size,
            taps: self.taps.iter().map(|&t| t - mean).collect(),
        }
    }
}

/// Default kernel side for a Gaussian of scale `sigma`: truncation at 3 sigma.
pub fn default_kernel_size(sigma: f64) -> usize {
    2 * (3.0 * sigma).ceil() as usize + 1
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(param(format!("sigma must be positive, got {sigma}")))
    }
}

fn gauss(x: f64, y: f64, s: f64) -> f64 {
    (-(x * x + y * y) / (2.0 * s * s)).exp()
}

/// Raw samples of the Gaussian second derivatives
/// `Gxx = (x^2/s^2 - 1) exp(-(x^2+y^2)/2s^2) / (2 pi s^4)` and its transpose
/// `Gyy`, without any DC correction.
pub fn gaussian_second_derivative_taps<T: Scalar>(
    sigma: f64,
    size: Option<usize>,
) -> Result<(Kernel2D<T>, Kernel2D<T>)> {
    check_sigma(sigma)?;
    let size = size.unwrap_or_else(|| default_kernel_size(sigma));
    if size < 3 {
        return Err(param(format!("kernel size must be at least 3, got {size}")));
    }
    let s = sigma;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s.powi(4));
    let gxx = Kernel2D::from_fn(size, |x, y| norm * (x * x / (s * s) - 1.0) * gauss(x, y, s))?;
    let gyy = gxx.transpose();
    Ok((gxx, gyy))
}

/// `Gxx`/`Gyy` pair used for filtering: the raw samples with their mean
/// removed so constant images produce a zero response.
pub fn gaussian_second_derivative_kernels<T: Scalar>(
    sigma: f64,
    size: Option<usize>,
) -> Result<(Kernel2D<T>, Kernel2D<T>)> {
    let (gxx, _) = gaussian_second_derivative_taps::<T>(sigma, size)?;
    let gxx = gxx.zero_mean();
    let gyy = gxx.transpose();
    Ok((gxx, gyy))
}

/// Reflect-101 index: `-1 -> 1`, `n -> n - 2`.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    // a single reflection suffices because kernels never exceed the image
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * (n - 1) - i;
    }
    i as usize
}

/// 2-D convolution `out(x, y) = sum k(i, j) I(x - dx_j, y - dy_i)` with
/// mirror-reflected borders; output has the input's size.
pub fn convolve<T: Scalar>(img: &GrayImage<T>, k: &Kernel2D<T>) -> Result<GrayImage<T>> {
    let (w, h) = (img.width(), img.height());
    if k.size() > w || k.size() > h {
        return Err(dim(format!(
            "{0}x{0} kernel does not fit a {w}x{h} image",
            k.size()
        )));
    }
    let half = k.half() as isize;
    let n = k.size();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = T::zero();
            for i in 0..n {
                let yy = reflect(y - (i as isize - half), h);
                for j in 0..n {
                    let xx = reflect(x - (j as isize - half), w);
                    acc += k.at(i, j) * img.get(xx, yy);
                }
            }
            out.push(acc);
        }
    }
    GrayImage::new(w, h, out)
}

/// Per-pixel `sqrt(Ixx^2 + Iyy^2)` with `Ixx = I * Gxx`, `Iyy = I * Gyy`.
pub fn hessian_magnitude<T: Scalar>(img: &GrayImage<T>, sigma: f64) -> Result<GrayImage<T>> {
    hessian_magnitude_sized(img, sigma, None)
}

pub fn hessian_magnitude_sized<T: Scalar>(
    img: &GrayImage<T>,
    sigma: f64,
    size: Option<usize>,
) -> Result<GrayImage<T>> {
    let (gxx, gyy) = gaussian_second_derivative_kernels::<T>(sigma, size)?;
    let ixx = convolve(img, &gxx)?;
    let iyy = convolve(img, &gyy)?;
    magnitude(&ixx, &iyy)
}

fn magnitude<T: Scalar>(a: &GrayImage<T>, b: &GrayImage<T>) -> Result<GrayImage<T>> {
    let px = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&u, &v)| (u * u + v * v).sqrt())
        .collect();
    GrayImage::new(a.width(), a.height(), px)
}

/// Sobel kernels `(Sx, Sy)` as convolution kernels: `Sx` responds positively
/// to intensity increasing with x, `Sy` to intensity increasing with y.
pub fn sobel_kernels<T: Scalar>() -> (Kernel2D<T>, Kernel2D<T>) {
    // convolution flips the kernel, so the signs are mirrored here
    let sx = [1.0, 0.0, -1.0, 2.0, 0.0, -2.0, 1.0, 0.0, -1.0];
    let sx = Kernel2D::new(3, sx.iter().map(|&v| T::lit(v)).collect()).expect("valid sobel");
    let sy = sx.transpose();
    (sx, sy)
}

/// Per-pixel Sobel gradient magnitude `sqrt(Sx^2 + Sy^2)`.
pub fn gradient_magnitude<T: Scalar>(img: &GrayImage<T>) -> Result<GrayImage<T>> {
    let (sx, sy) = sobel_kernels::<T>();
    let gx = convolve(img, &sx)?;
    let gy = convolve(img, &sy)?;
    magnitude(&gx, &gy)
}

/// Role of a kernel inside the jet filter bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JetRole {
    G,
    Gx,
    Gy,
    Gxx,
    Gxy,
    Gyy,
}

impl JetRole {
    /// Fixed response order of [`apply_bank`].
    pub const ORDER: [JetRole; 6] = [
        JetRole::G,
        JetRole::Gx,
        JetRole::Gy,
        JetRole::Gxx,
        JetRole::Gxy,
        JetRole::Gyy,
    ];
}

/// Derivative-of-Gaussian filter bank up to second order.
#[derive(Debug, Clone)]
pub struct FilterBank<T> {
    pub sigma: f64,
    pub kernels: Vec<(JetRole, Kernel2D<T>)>,
}

impl<T: Scalar> FilterBank<T> {
    pub fn kernel(&self, role: JetRole) -> &Kernel2D<T> {
        &self
            .kernels
            .iter()
            .find(|(r, _)| *r == role)
            .expect("bank holds every role")
            .1
    }
}

/// Builds the six-kernel jet bank `(G, Gx, Gy, Gxx, Gxy, Gyy)` at scale
/// `sigma`. Derivative kernels are exact derivatives of the sampled Gaussian
/// `exp(-(x^2+y^2)/2s^2) / (2 pi s^2)`; second-order ones are mean-corrected.
pub fn dtg_bank<T: Scalar>(sigma: f64) -> Result<FilterBank<T>> {
    dtg_bank_sized(sigma, None)
}

pub fn dtg_bank_sized<T: Scalar>(sigma: f64, size: Option<usize>) -> Result<FilterBank<T>> {
    check_sigma(sigma)?;
    let size = size.unwrap_or_else(|| default_kernel_size(sigma));
    let s = sigma;
    let s2 = s * s;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s2);
    let g = move |x: f64, y: f64| norm * gauss(x, y, s);
    let kg = Kernel2D::from_fn(size, g)?;
    let kx = Kernel2D::from_fn(size, |x, y| -x / s2 * g(x, y))?;
    let ky = kx.transpose();
    let kxx = Kernel2D::from_fn(size, |x, y| (x * x / s2 - 1.0) / s2 * g(x, y))?.zero_mean();
    let kyy = kxx.transpose();
    let kxy = Kernel2D::from_fn(size, |x, y| x * y / (s2 * s2) * g(x, y))?;
    Ok(FilterBank {
        sigma,
        kernels: vec![
            (JetRole::G, kg),
            (JetRole::Gx, kx),
            (JetRole::Gy, ky),
            (JetRole::Gxx, kxx),
            (JetRole::Gxy, kxy),
            (JetRole::Gyy, kyy),
        ],
    })
}

/// Convolves `img` with every kernel of the bank, in [`JetRole::ORDER`].
pub fn apply_bank<T: Scalar>(img: &GrayImage<T>, bank: &FilterBank<T>) -> Result<Vec<GrayImage<T>>> {
    JetRole::ORDER
        .iter()
        .map(|&role| convolve(img, bank.kernel(role)))
        .collect()
}

/// Per-pixel 6-dimensional jet vectors, row-major over the image.
pub fn jet_vectors<T: Scalar>(img: &GrayImage<T>, bank: &FilterBank<T>) -> Result<Vec<[T; 6]>> {
    let maps = apply_bank(img, bank)?;
    let n = img.pixels().len();
    Ok((0..n)
        .map(|i| {
            let mut v = [T::zero(); 6];
            for (slot, m) in v.iter_mut().zip(&maps) {
                *slot = m.pixels()[i];
            }
            v
        })
        .collect())
}
