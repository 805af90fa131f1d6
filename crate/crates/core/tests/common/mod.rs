// Brute-force reference implementations and fixtures shared by the
// integration tests. Everything here works straight from the per-pixel
// definitions on plain f64 buffers.
#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use texfuse::image::GrayImage;

pub struct Pix {
    pub w: usize,
    pub h: usize,
    pub v: Vec<f64>,
}

impl Pix {
    pub fn of(img: &GrayImage<f64>) -> Self {
        Pix {
            w: img.width(),
            h: img.height(),
            v: img.pixels().to_vec(),
        }
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.v[y * self.w + x]
    }

    /// Bilinear value at centre `(cx, cy)` plus a real offset.
    pub fn sample(&self, cx: usize, cy: usize, dx: f64, dy: f64) -> f64 {
        let (bx, by) = (dx.floor(), dy.floor());
        let (fx, fy) = (dx - bx, dy - by);
        let x0 = (cx as f64 + bx) as usize;
        let y0 = (cy as f64 + by) as usize;
        let x1 = if fx == 0.0 { x0 } else { x0 + 1 };
        let y1 = if fy == 0.0 { y0 } else { y0 + 1 };
        let top = self.at(x0, y0) + fx * (self.at(x1, y0) - self.at(x0, y0));
        let bottom = self.at(x0, y1) + fx * (self.at(x1, y1) - self.at(x0, y1));
        top + fy * (bottom - top)
    }
}

pub fn random_image(w: usize, h: usize, rng: &mut ChaCha8Rng, integer: bool) -> GrayImage<f64> {
    GrayImage::from_fn(w, h, |_, _| {
        if integer {
            rng.random_range(0..=255u32) as f64
        } else {
            rng.random_range(0.0..255.0)
        }
    })
    .unwrap()
}

/// Half the images are integer valued so ties (`d == 0`, `d == tau`) occur.
pub fn image_set(n: usize, size: usize, seed: u64) -> Vec<GrayImage<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| random_image(size, size, &mut rng, i % 2 == 0)).collect()
}

fn snap(v: f64) -> f64 {
    if (v - v.round()).abs() < 1e-9 {
        v.round() + 0.0
    } else {
        v
    }
}

pub fn ring_offsets(radius: f64, p: usize) -> Vec<(f64, f64)> {
    (0..p)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / p as f64;
            (snap(radius * a.cos()), snap(-radius * a.sin()))
        })
        .collect()
}

pub fn line_offsets(deg: f64) -> Vec<(f64, f64)> {
    let a = deg.to_radians();
    [-4.0, -3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 4.0]
        .iter()
        .map(|t: &f64| (snap(t * a.cos()), snap(-t * a.sin())))
        .collect()
}

/// Visits every centre whose samples stay inside the image.
pub fn each_centre(p: &Pix, offs: &[(f64, f64)], mut f: impl FnMut(usize, usize, f64, Vec<f64>)) {
    let m = offs
        .iter()
        .map(|&(dx, dy)| dx.abs().max(dy.abs()).ceil() as usize)
        .max()
        .unwrap();
    for y in m..p.h - m {
        for x in m..p.w - m {
            let ring = offs.iter().map(|&(dx, dy)| p.sample(x, y, dx, dy)).collect();
            f(x, y, p.at(x, y), ring);
        }
    }
}

pub fn normalize(counts: &[u64]) -> Vec<f64> {
    let t: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / t as f64).collect()
}

fn bit(b: bool, i: usize) -> usize {
    (b as usize) << i
}

pub fn lbp(img: &GrayImage<f64>, r: f64, p: usize) -> Vec<f64> {
    let px = Pix::of(img);
    let mut h = vec![0u64; 1 << p];
    each_centre(&px, &ring_offsets(r, p), |_, _, c, s| {
        h[(0..p).map(|i| bit(s[i] - c >= 0.0, i)).sum::<usize>()] += 1;
    });
    normalize(&h)
}

pub fn ltp(img: &GrayImage<f64>, r: f64, p: usize, tau: f64) -> Vec<f64> {
    let px = Pix::of(img);
    let mut up = vec![0u64; 1 << p];
    let mut lo = vec![0u64; 1 << p];
    each_centre(&px, &ring_offsets(r, p), |_, _, c, s| {
        up[(0..p).map(|i| bit(s[i] - c >= tau, i)).sum::<usize>()] += 1;
        lo[(0..p).map(|i| bit(s[i] - c < -tau, i)).sum::<usize>()] += 1;
    });
    let mut v = normalize(&up);
    v.extend(normalize(&lo));
    v
}

pub fn mqc(img: &GrayImage<f64>, r: f64, p: usize, tau: f64, theta: f64) -> Vec<f64> {
    let px = Pix::of(img);
    let mut hs = vec![vec![0u64; 1 << p]; 4];
    each_centre(&px, &ring_offsets(r, p), |_, _, c, s| {
        let d: Vec<f64> = s.iter().map(|v| v - c).collect();
        let maps = [
            |d: f64, t: f64, _: f64| d >= t,
            |d: f64, t: f64, th: f64| d >= th && d < t,
            |d: f64, _: f64, th: f64| d < 0.0 && d >= -th,
            |d: f64, _: f64, th: f64| d < -th,
        ];
        for (k, m) in maps.iter().enumerate() {
            hs[k][(0..p).map(|i| bit(m(d[i], tau, theta), i)).sum::<usize>()] += 1;
        }
    });
    hs.iter().flat_map(|h| normalize(h)).collect()
}

pub fn alpha_lbp(img: &GrayImage<f64>, angles: &[f64]) -> Vec<f64> {
    let px = Pix::of(img);
    let mut out = Vec::new();
    for &a in angles {
        let mut h = vec![0u64; 256];
        each_centre(&px, &line_offsets(a), |_, _, c, s| {
            h[(0..8).map(|i| bit(s[i] >= c, i)).sum::<usize>()] += 1;
        });
        out.extend(normalize(&h));
    }
    out
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn block3(p: &Pix, x: usize, y: usize) -> Vec<f64> {
    let mut b = Vec::with_capacity(9);
    for yy in y - 1..=y + 1 {
        for xx in x - 1..=x + 1 {
            b.push(p.at(xx, yy));
        }
    }
    b
}

pub fn lcvmsp(img: &GrayImage<f64>) -> Vec<f64> {
    let px = Pix::of(img);
    let all = sorted(px.v.clone());
    let gmed = all[(all.len() - 1) / 2];
    let mut h = vec![0u64; 1024];
    each_centre(&px, &ring_offsets(1.0, 8), |x, y, c, s| {
        let mut code = 0;
        for i in 0..8 {
            let (prev, next) = (s[(i + 7) % 8], s[(i + 1) % 8]);
            code |= bit((prev + next) / 2.0 - s[i] >= 0.0, i);
        }
        let lmed = sorted(block3(&px, x, y))[4];
        code |= bit(lmed - c >= 0.0, 8) | bit(gmed - c >= 0.0, 9);
        h[code] += 1;
    });
    normalize(&h)
}

/// One scale of ARCSLBP on an arbitrary source image.
pub fn arcslbp(img: &GrayImage<f64>, r: f64, p: usize) -> Vec<f64> {
    let px = Pix::of(img);
    let n = px.v.len() as f64;
    let aggl = px.v.iter().sum::<f64>() / n;
    let half = p / 2;
    let mut att = vec![0u64; 1 << (half + 3)];
    let mut rep = vec![0u64; 1 << (half + 3)];
    each_centre(&px, &ring_offsets(r, p), |x, y, c, s| {
        let algl = block3(&px, x, y).iter().sum::<f64>() / 9.0;
        let ring_mean = s.iter().sum::<f64>() / p as f64;
        let extra = bit(algl >= c, half) | bit(aggl >= c, half + 1) | bit(ring_mean >= c, half + 2);
        let (mut a, mut b) = (extra, extra);
        for i in 0..half {
            a |= bit((s[i] + s[i + half]) / 2.0 >= c, i);
            b |= bit((s[i] - c).abs() >= (s[i + half] - c).abs(), i);
        }
        att[a] += 1;
        rep[b] += 1;
    });
    let mut v = normalize(&att);
    v.extend(normalize(&rep));
    v
}

/// Within-class residual of splitting `v` at `tau` (`<= tau` vs `> tau`).
pub fn residual(v: &[f64], tau: f64) -> f64 {
    let lo: Vec<f64> = v.iter().copied().filter(|&x| x <= tau).collect();
    let hi: Vec<f64> = v.iter().copied().filter(|&x| x > tau).collect();
    let ss = |s: &[f64]| {
        if s.is_empty() {
            return 0.0;
        }
        let m = s.iter().sum::<f64>() / s.len() as f64;
        s.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
    };
    (ss(&lo) + ss(&hi)) / v.len() as f64
}

pub fn population_variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

/// Exhaustive sweep: every sample value is tried as the threshold; the first
/// strict minimum wins.
pub fn dlbp_threshold(v: &[f64]) -> (f64, f64) {
    let mut best = (f64::NAN, f64::INFINITY);
    for tau in sorted(v.to_vec()) {
        let e = residual(v, tau);
        if e < best.1 {
            best = (tau, e);
        }
    }
    best
}

pub fn dlbp(img: &GrayImage<f64>, r: f64, p: usize) -> Vec<f64> {
    let px = Pix::of(img);
    let mut h = vec![0.0f64; 1 << p];
    each_centre(&px, &ring_offsets(r, p), |_, _, c, s| {
        let mut patch = vec![c];
        patch.extend(&s);
        let (tau, sw) = dlbp_threshold(&patch);
        let s2 = population_variance(&patch);
        let w = ((s2 - sw).max(0.0) / (s2 + 1e-4)).sqrt();
        h[(0..p).map(|i| bit(s[i] > tau, i)).sum::<usize>()] += w;
    });
    let t: f64 = h.iter().sum();
    if t > 0.0 {
        h.iter().map(|v| v / t).collect()
    } else {
        vec![1.0 / h.len() as f64; h.len()]
    }
}

/// Writes a small labelled PNG dataset: each class has its own stripe period
/// and noise, so hand-crafted texture features separate them.
pub fn write_dataset(root: &Path, classes: usize, per_class: usize, size: u32, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for c in 0..classes {
        let dir = root.join(format!("class{c}"));
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..per_class {
            let period = 3.0 + 2.5 * c as f64;
            let phase: f64 = rng.random_range(0.0..6.28);
            let img = image::GrayImage::from_fn(size, size, |x, y| {
                let t = (x as f64 + 0.5 * c as f64 * y as f64) / period;
                let v = 128.0 + 80.0 * (t * std::f64::consts::TAU + phase).sin() + rng.random_range(-20.0..20.0);
                image::Luma([v.clamp(0.0, 255.0) as u8])
            });
            img.save(dir.join(format!("img{i:03}.png"))).unwrap();
        }
    }
}
