//! Plain, ternary, quinary and line-sampled local binary patterns.

use super::{check_code_spec, check_quinary, q, CountHistogram, FeatureVector};
use crate::error::{param, Result};
use crate::image::{GrayImage, NeighborhoodSpec, RingSampler};
use crate::scalar::Scalar;

/// Calls `f(center, samples)` for every interior centre of `sampler`.
fn scan<T: Scalar>(
    img: &GrayImage<T>,
    sampler: &RingSampler,
    mut f: impl FnMut(T, &[T]),
) -> Result<()> {
    let (xs, ys) = sampler.interior(img)?;
    let mut buf = vec![T::zero(); sampler.len()];
    for y in ys {
        for x in xs.clone() {
            sampler.sample(img, x, y, &mut buf);
            f(img.get(x, y), &buf);
        }
    }
    Ok(())
}

#[inline]
fn sign_code<T: Scalar>(center: T, samples: &[T]) -> usize {
    samples
        .iter()
        .enumerate()
        .fold(0usize, |acc, (p, &v)| acc | ((q(v - center) as usize) << p))
}

/// `2^P`-bin histogram of `sum_p 2^p q(i_p - i_c)` over interior centres.
pub fn lbp<T: Scalar>(img: &GrayImage<T>, spec: &NeighborhoodSpec) -> Result<FeatureVector<T>> {
    check_code_spec(spec)?;
    let sampler = RingSampler::from_spec(spec);
    let mut hist = CountHistogram::new(1 << spec.neighbors);
    scan(img, &sampler, |c, s| hist.add(sign_code(c, s)))?;
    Ok(FeatureVector::new("lbp", hist.normalized()))
}

/// LBP histograms at several scales, concatenated.
pub fn lbp_multiscale<T: Scalar>(img: &GrayImage<T>, specs: &[NeighborhoodSpec]) -> Result<FeatureVector<T>> {
    let parts = specs.iter().map(|s| lbp(img, s)).collect::<Result<Vec<_>>>()?;
    Ok(FeatureVector::concat("lbp", parts))
}

/// Local ternary pattern split into upper (`d >= tau`) and lower
/// (`d < -tau`) binary codes; two `2^P` histograms concatenated.
pub fn ltp<T: Scalar>(img: &GrayImage<T>, spec: &NeighborhoodSpec, tau: f64) -> Result<FeatureVector<T>> {
    check_code_spec(spec)?;
    if !(tau >= 0.0) {
        return Err(param(format!("LTP threshold must be >= 0, got {tau}")));
    }
    let sampler = RingSampler::from_spec(spec);
    let tau = T::lit(tau);
    let bins = 1 << spec.neighbors;
    let mut upper = CountHistogram::new(bins);
    let mut lower = CountHistogram::new(bins);
    scan(img, &sampler, |c, s| {
        let (u, l) = ternary_codes(c, s, tau);
        upper.add(u);
        lower.add(l);
    })?;
    let mut values = upper.normalized();
    values.extend(lower.normalized::<T>());
    Ok(FeatureVector::new("ltp", values))
}

#[inline]
pub(crate) fn ternary_codes<T: Scalar>(center: T, samples: &[T], tau: T) -> (usize, usize) {
    let (mut upper, mut lower) = (0usize, 0usize);
    for (p, &v) in samples.iter().enumerate() {
        let d = v - center;
        if d >= tau {
            upper |= 1 << p;
        } else if d < -tau {
            lower |= 1 << p;
        }
    }
    (upper, lower)
}

/// Quinary label of a neighbor difference.
#[inline]
fn quinary<T: Scalar>(d: T, tau: T, theta: T) -> i8 {
    if d >= tau {
        2
    } else if d >= theta {
        1
    } else if d >= T::zero() {
        0
    } else if d >= -theta {
        -1
    } else {
        -2
    }
}

/// Multi-quinary coding: four binary maps (label 2, 1, -1, -2), each coded
/// and histogrammed; `4 * 2^P` values.
pub fn mqc<T: Scalar>(img: &GrayImage<T>, spec: &NeighborhoodSpec, tau: f64, theta: f64) -> Result<FeatureVector<T>> {
    check_code_spec(spec)?;
    check_quinary(tau, theta)?;
    let sampler = RingSampler::from_spec(spec);
    let (tau, theta) = (T::lit(tau), T::lit(theta));
    let bins = 1 << spec.neighbors;
    const LABELS: [i8; 4] = [2, 1, -1, -2];
    let mut hists: Vec<CountHistogram> = (0..4).map(|_| CountHistogram::new(bins)).collect();
    scan(img, &sampler, |c, s| {
        let mut codes = [0usize; 4];
        for (p, &v) in s.iter().enumerate() {
            let label = quinary(v - c, tau, theta);
            if let Some(k) = LABELS.iter().position(|&l| l == label) {
                codes[k] |= 1 << p;
            }
        }
        for (h, code) in hists.iter_mut().zip(codes) {
            h.add(code);
        }
    })?;
    let values = hists.iter().flat_map(|h| h.normalized::<T>()).collect();
    Ok(FeatureVector::new("mqc", values))
}

/// Line direction for alpha-LBP, a multiple of 45 degrees taken modulo 180.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AlphaAngle(u16);

impl AlphaAngle {
    pub const DEFAULT_SET: [AlphaAngle; 4] = [AlphaAngle(0), AlphaAngle(45), AlphaAngle(90), AlphaAngle(135)];

    pub fn from_degrees(deg: f64) -> Result<Self> {
        if !deg.is_finite() || deg.fract() != 0.0 || (deg as i64) % 45 != 0 {
            return Err(param(format!("alpha-LBP supports multiples of 45 degrees, got {deg}")));
        }
        Ok(AlphaAngle((deg as i64).rem_euclid(180) as u16))
    }

    pub fn degrees(self) -> u16 {
        self.0
    }

    /// Offsets `t * (cos a, -sin a)` for `t = -4..=-1, 1..=4`, in that order.
    pub fn offsets(self) -> Vec<(f64, f64)> {
        let a = (self.0 as f64).to_radians();
        let snap = |v: f64| {
            let r = v.round();
            if (v - r).abs() < 1e-9 {
                r + 0.0
            } else {
                v
            }
        };
        [-4.0, -3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&t: &f64| (snap(t * a.cos()), snap(-t * a.sin())))
            .collect()
    }
}

/// 256-bin LBP histogram with the 8 neighbors taken on a line through the
/// centre at the given angle.
pub fn alpha_lbp_single<T: Scalar>(img: &GrayImage<T>, angle: AlphaAngle) -> Result<FeatureVector<T>> {
    let sampler = RingSampler::new(&angle.offsets());
    let mut hist = CountHistogram::new(256);
    scan(img, &sampler, |c, s| hist.add(sign_code(c, s)))?;
    Ok(FeatureVector::new("alpha_lbp", hist.normalized()))
}

/// Alpha-LBP histograms for every angle, concatenated.
pub fn alpha_lbp<T: Scalar>(img: &GrayImage<T>, angles: &[AlphaAngle]) -> Result<FeatureVector<T>> {
    if angles.is_empty() {
        return Err(param("alpha-LBP needs at least one angle"));
    }
    let parts = angles
        .iter()
        .map(|&a| alpha_lbp_single(img, a))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureVector::concat("alpha_lbp", parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec8(r: f64) -> NeighborhoodSpec {
        NeighborhoodSpec::new(r, 8).unwrap()
    }

    fn mass_at(v: &[f64], bin: usize) -> bool {
        (v[bin] - 1.0).abs() < 1e-12 && v.iter().enumerate().all(|(i, &x)| i == bin || x == 0.0)
    }

    #[test]
    fn lbp_constant_image() {
        let img = GrayImage::constant(8, 8, 77.0).unwrap();
        let f = lbp(&img, &spec8(1.0)).unwrap();
        assert_eq!(f.dim(), 256);
        assert!(mass_at(&f.values, 255));
    }

    #[test]
    fn lbp_hand_enumerated_patch() {
        let img = GrayImage::new(3, 3, vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0]).unwrap();
        let f = lbp(&img, &spec8(1.0)).unwrap();
        // E=60, NE<50, N=20, NW<50, W=40, SW>50, S=80, SE>50
        assert!(mass_at(&f.values, 0b1110_0001));
        assert_eq!(0b1110_0001, 225);
    }

    #[test]
    fn lbp_no_interior() {
        let img = GrayImage::constant(4, 4, 0.0).unwrap();
        assert!(lbp(&img, &spec8(2.0)).is_err());
    }

    #[test]
    fn ltp_constant_and_zero_threshold() {
        let img = GrayImage::constant(6, 6, 9.0).unwrap();
        let f = ltp(&img, &spec8(1.0), 5.0).unwrap();
        assert_eq!(f.dim(), 512);
        assert!(mass_at(&f.values[..256], 0));
        assert!(mass_at(&f.values[256..], 0));

        let img = GrayImage::from_fn(9, 9, |x, y| ((x * 7 + y * 13) % 11) as f64).unwrap();
        let f = ltp(&img, &spec8(1.0), 0.0).unwrap();
        let plain = lbp(&img, &spec8(1.0)).unwrap();
        assert_eq!(&f.values[..256], plain.values.as_slice());
        // lower code is the complement of the LBP code at tau = 0
        for code in 0..256 {
            assert_eq!(f.values[256 + (255 - code)], plain.values[code]);
        }
    }

    #[test]
    fn ltp_rejects_negative_threshold() {
        let img = GrayImage::constant(6, 6, 9.0).unwrap();
        assert!(ltp(&img, &spec8(1.0), -1.0).is_err());
    }

    #[test]
    fn mqc_boundary_cases() {
        let img = GrayImage::constant(6, 6, 9.0).unwrap();
        let f = mqc(&img, &spec8(1.0), 5.0, 2.0).unwrap();
        assert_eq!(f.dim(), 1024);
        for k in 0..4 {
            assert!(mass_at(&f.values[k * 256..(k + 1) * 256], 0));
        }

        // dark single centre: every neighbor difference is >= tau
        let mut px = vec![100.0; 9];
        px[4] = 0.0;
        let img = GrayImage::new(3, 3, px).unwrap();
        let f = mqc(&img, &spec8(1.0), 5.0, 2.0).unwrap();
        assert!(mass_at(&f.values[..256], 255));
        for k in 1..4 {
            assert!(mass_at(&f.values[k * 256..(k + 1) * 256], 0));
        }
        assert!(mqc(&img, &spec8(1.0), 2.0, 2.0).is_err());
    }

    #[test]
    fn quinary_labels() {
        let (tau, theta) = (5.0, 2.0);
        assert_eq!(quinary(5.0, tau, theta), 2);
        assert_eq!(quinary(4.9, tau, theta), 1);
        assert_eq!(quinary(2.0, tau, theta), 1);
        assert_eq!(quinary(0.0, tau, theta), 0);
        assert_eq!(quinary(-2.0, tau, theta), -1);
        assert_eq!(quinary(-2.1, tau, theta), -2);
    }

    #[test]
    fn alpha_angles() {
        assert_eq!(AlphaAngle::from_degrees(180.0).unwrap(), AlphaAngle::from_degrees(0.0).unwrap());
        assert_eq!(AlphaAngle::from_degrees(-45.0).unwrap().degrees(), 135);
        assert!(AlphaAngle::from_degrees(30.0).is_err());
        assert!(AlphaAngle::from_degrees(45.5).is_err());
        let off = AlphaAngle::from_degrees(90.0).unwrap().offsets();
        assert_eq!(off[0], (0.0, 4.0));
        assert_eq!(off[7], (0.0, -4.0));
    }

    #[test]
    fn alpha_lbp_constant_and_half_turn() {
        let img = GrayImage::constant(12, 12, 3.0).unwrap();
        let f = alpha_lbp(&img, &AlphaAngle::DEFAULT_SET).unwrap();
        assert_eq!(f.dim(), 1024);
        for k in 0..4 {
            assert!(mass_at(&f.values[k * 256..(k + 1) * 256], 255));
        }
        let img = GrayImage::from_fn(14, 14, |x, y| ((x * 31 + y * 17) % 23) as f64).unwrap();
        let a = alpha_lbp_single(&img, AlphaAngle::from_degrees(0.0).unwrap()).unwrap();
        let b = alpha_lbp_single(&img, AlphaAngle::from_degrees(180.0).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
