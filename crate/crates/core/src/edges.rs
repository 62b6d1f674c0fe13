//! Edge-probability maps: ingestion, fusion, a built-in Canny detector and
//! mean-driven hysteresis thresholds.

use std::collections::VecDeque;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, GrayImage};
use crate::scalar::{clamp, Scalar};

/// Largest L2 Sobel response an 8-bit image can produce: `255 * sqrt(4^2 + 2^2)`.
pub const SOBEL_L2_MAX: f64 = 1140.3946685248927;

/// Normalised gradient magnitudes below this are treated as flat.
const FLAT_GRADIENT: f64 = 1e-4;

/// Per-pixel edge probability in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMap<T> {
    width: usize,
    height: usize,
    prob: Vec<T>,
}

impl<T: Scalar> EdgeMap<T> {
    pub fn new(width: usize, height: usize, prob: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input("edge map must be at least 1x1"));
        }
        if prob.len() != width * height {
            return Err(Error::input(format!(
                "edge map length {} does not match {}x{}",
                prob.len(),
                width,
                height
            )));
        }
        if let Some(bad) = prob.iter().find(|p| !(**p >= T::zero() && **p <= T::one())) {
            return Err(Error::input(format!("edge probability {bad} outside [0, 1]")));
        }
        Ok(Self { width, height, prob })
    }

    pub fn filled(width: usize, height: usize, v: T) -> Result<Self> {
        Self::new(width, height, vec![v; width * height])
    }

    /// `prob = intensity / 255`.
    pub fn from_gray(img: &GrayImage) -> Self {
        let scale = T::lit(255.0);
        Self {
            width: img.width(),
            height: img.height(),
            prob: img.data().iter().map(|&v| T::lit(v as f64) / scale).collect(),
        }
    }

    /// Binary map: 1 on set pixels, 0 elsewhere.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            prob: mask
                .bits()
                .iter()
                .map(|&b| if b { T::one() } else { T::zero() })
                .collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn prob(&self) -> &[T] {
        &self.prob
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.prob[y * self.width + x]
    }

    /// Quantises to 8 bits, `round(255 * prob)`.
    pub fn to_gray(&self) -> GrayImage {
        let data = self
            .prob
            .iter()
            .map(|p| (p.to_f64_lossy() * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        GrayImage::new(self.width, self.height, data).expect("dimensions already validated")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_gray().save(path)
    }
}

/// Reads an 8-bit grayscale PNG as an edge map.
pub fn load_edge_map<T: Scalar>(path: &Path) -> Result<EdgeMap<T>> {
    Ok(EdgeMap::from_gray(&GrayImage::load(path)?))
}

/// Per-pixel arithmetic mean of equally sized maps.
pub fn fuse_edge_maps<T: Scalar>(maps: &[EdgeMap<T>]) -> Result<EdgeMap<T>> {
    let first = maps
        .first()
        .ok_or_else(|| Error::input("cannot fuse an empty list of edge maps"))?;
    if let Some(m) = maps
        .iter()
        .find(|m| m.width != first.width || m.height != first.height)
    {
        return Err(Error::input(format!(
            "edge map {}x{} does not match {}x{}",
            m.width, m.height, first.width, first.height
        )));
    }
    let n = T::count(maps.len());
    let prob = (0..first.prob.len())
        .map(|i| {
            let s = maps.iter().fold(T::zero(), |acc, m| acc + m.prob[i]);
            clamp(s / n, T::zero(), T::one())
        })
        .collect();
    Ok(EdgeMap {
        width: first.width,
        height: first.height,
        prob,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HysteresisParams<T> {
    pub low: T,
    pub high: T,
    pub gaussian_sigma: T,
}

impl<T: Scalar> HysteresisParams<T> {
    pub fn new(low: T, high: T, gaussian_sigma: T) -> Result<Self> {
        if !(low >= T::zero() && low <= high && high <= T::one()) {
            return Err(Error::config(format!(
                "hysteresis thresholds must satisfy 0 <= low <= high <= 1 (got {low}, {high})"
            )));
        }
        if !(gaussian_sigma > T::zero()) {
            return Err(Error::config("gaussian sigma must be positive"));
        }
        Ok(Self {
            low,
            high,
            gaussian_sigma,
        })
    }
}

/// Thresholds proportional to the mean normalised intensity under `region`.
pub fn local_hysteresis_params<T: Scalar>(
    img: &GrayImage,
    region: &BinaryMask,
    k_low: T,
    k_high: T,
    gaussian_sigma: T,
) -> Result<HysteresisParams<T>> {
    if !region.same_dims(img.width(), img.height()) {
        return Err(Error::input("region mask does not match image dimensions"));
    }
    if !(k_low > T::zero() && k_low < k_high) {
        return Err(Error::config(format!(
            "hysteresis multipliers must satisfy 0 < k_low < k_high (got {k_low}, {k_high})"
        )));
    }
    let (sum, n) = region
        .iter_set()
        .fold((0u64, 0u64), |(s, n), (x, y)| (s + img.get(x, y) as u64, n + 1));
    if n == 0 {
        return Err(Error::input("hysteresis region is empty"));
    }
    let mean = T::lit(sum as f64 / n as f64 / 255.0);
    let low = clamp(k_low * mean, T::zero(), T::one());
    let high = clamp(k_high * mean, T::zero(), T::one());
    HysteresisParams::new(low, high, gaussian_sigma)
}

/// Pixel set iff `prob >= threshold`.
pub fn binarize_edges<T: Scalar>(map: &EdgeMap<T>, threshold: T) -> BinaryMask {
    let bits = map.prob.iter().map(|&p| p >= threshold).collect();
    BinaryMask::from_bits(map.width, map.height, bits).expect("dimensions already validated")
}

/// Normalised 1-D Gaussian taps for radius `ceil(3 sigma)`.
fn gaussian_kernel<T: Scalar>(sigma: T) -> Vec<T> {
    let radius = (sigma * T::lit(3.0)).ceil().to_usize().unwrap_or(1).max(1);
    let two_s2 = T::lit(2.0) * sigma * sigma;
    let taps: Vec<T> = (0..=2 * radius)
        .map(|i| {
            let d = T::count(i) - T::count(radius);
            (-(d * d) / two_s2).exp()
        })
        .collect();
    let sum = taps.iter().fold(T::zero(), |a, &b| a + b);
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable Gaussian blur with replicated borders.
pub(crate) fn gaussian_blur<T: Scalar>(src: &[T], w: usize, h: usize, sigma: T) -> Vec<T> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let mut tmp = vec![T::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = T::zero();
            for (i, &kv) in k.iter().enumerate() {
                let sx = (x as i64 + i as i64 - r).clamp(0, w as i64 - 1) as usize;
                acc = acc + kv * src[y * w + sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![T::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = T::zero();
            for (i, &kv) in k.iter().enumerate() {
                let sy = (y as i64 + i as i64 - r).clamp(0, h as i64 - 1) as usize;
                acc = acc + kv * tmp[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// 3x3 Sobel derivatives with replicated borders. `gy` grows downwards.
pub(crate) fn sobel<T: Scalar>(src: &[T], w: usize, h: usize) -> (Vec<T>, Vec<T>) {
    let at = |x: i64, y: i64| -> T {
        let cx = x.clamp(0, w as i64 - 1) as usize;
        let cy = y.clamp(0, h as i64 - 1) as usize;
        src[cy * w + cx]
    };
    let two = T::lit(2.0);
    let mut gx = vec![T::zero(); w * h];
    let mut gy = vec![T::zero(); w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let (a, b, c) = (at(x - 1, y - 1), at(x, y - 1), at(x + 1, y - 1));
            let (d, f) = (at(x - 1, y), at(x + 1, y));
            let (g, hh, i) = (at(x - 1, y + 1), at(x, y + 1), at(x + 1, y + 1));
            let idx = y as usize * w + x as usize;
            gx[idx] = (c + two * f + i) - (a + two * d + g);
            gy[idx] = (g + two * hh + i) - (a + two * b + c);
        }
    }
    (gx, gy)
}

/// Gradient magnitude normalised to `[0, 1]` plus raw components, after
/// Gaussian smoothing.
pub(crate) fn normalised_gradient<T: Scalar>(img: &GrayImage, sigma: T) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (w, h) = (img.width(), img.height());
    let src: Vec<T> = img.data().iter().map(|&v| T::lit(v as f64)).collect();
    let smooth = gaussian_blur(&src, w, h, sigma);
    let (gx, gy) = sobel(&smooth, w, h);
    let norm = T::lit(SOBEL_L2_MAX);
    let flat = T::lit(FLAT_GRADIENT);
    let mag = gx
        .iter()
        .zip(&gy)
        .map(|(&a, &b)| {
            let m = (a * a + b * b).sqrt() / norm;
            if m < flat {
                T::zero()
            } else {
                clamp(m, T::zero(), T::one())
            }
        })
        .collect();
    (mag, gx, gy)
}

/// The normalised gradient magnitude [`canny`] thresholds, per pixel.
pub fn gradient_magnitude<T: Scalar>(img: &GrayImage, sigma: T) -> Vec<T> {
    normalised_gradient(img, sigma).0
}

/// Magnitudes closer than this count as equal during non-maximum suppression.
const NMS_TOLERANCE: f64 = 1e-5;

/// Canny edge detector producing a binary-valued edge map.
///
/// Gaussian smoothing, Sobel gradients normalised by [`SOBEL_L2_MAX`],
/// non-maximum suppression along the gradient direction quantised to four
/// sectors, then hysteresis: pixels `>= high` seed, pixels `>= low` that
/// 8-connect to a seed are kept.
pub fn canny<T: Scalar>(img: &GrayImage, params: &HysteresisParams<T>) -> EdgeMap<T> {
    let (w, h) = (img.width(), img.height());
    let (mag, gx, gy) = normalised_gradient(img, params.gaussian_sigma);
    let m_at = |x: i64, y: i64| -> T {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            T::zero()
        } else {
            mag[y as usize * w + x as usize]
        }
    };

    let mut nms = vec![false; w * h];
    let tol = T::lit(NMS_TOLERANCE);
    let deg = T::lit(180.0 / std::f64::consts::PI);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m <= T::zero() {
                continue;
            }
            let mut a = gy[i].atan2(gx[i]) * deg;
            if a < T::zero() {
                a = a + T::lit(180.0);
            }
            let a = a.to_f64_lossy();
            // (dx, dy) points along the gradient.
            let (dx, dy) = if !(22.5..157.5).contains(&a) {
                (1, 0)
            } else if a < 67.5 {
                (1, 1)
            } else if a < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let (xi, yi) = (x as i64, y as i64);
            let before = m_at(xi - dx, yi - dy);
            let after = m_at(xi + dx, yi + dy);
            // Strict on one side so a two-pixel plateau keeps exactly one
            // pixel; the tolerance makes plateaus immune to rounding noise.
            nms[i] = m > before + tol && m + tol >= after;
        }
    }

    let mut keep = vec![false; w * h];
    let mut queue = VecDeque::new();
    for i in 0..w * h {
        if nms[i] && mag[i] >= params.high {
            keep[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !keep[j] && nms[j] && mag[j] >= params.low {
                    keep[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }

    EdgeMap {
        width: w,
        height: h,
        prob: keep
            .into_iter()
            .map(|k| if k { T::one() } else { T::zero() })
            .collect(),
    }
}

/// Dominant gradient angle per pixel, in `(-pi/2, pi/2]`, from the smoothed
/// structure tensor of the edge map. Sign-free, so thin ridges get the
/// orientation across the ridge rather than a zero gradient.
pub fn edge_orientations<T: Scalar>(map: &EdgeMap<T>, sigma: T) -> Vec<T> {
    let (w, h) = (map.width, map.height);
    let (gx, gy) = sobel(&map.prob, w, h);
    let jxx: Vec<T> = gx.iter().map(|&a| a * a).collect();
    let jyy: Vec<T> = gy.iter().map(|&b| b * b).collect();
    let jxy: Vec<T> = gx.iter().zip(&gy).map(|(&a, &b)| a * b).collect();
    let jxx = gaussian_blur(&jxx, w, h, sigma);
    let jyy = gaussian_blur(&jyy, w, h, sigma);
    let jxy = gaussian_blur(&jxy, w, h, sigma);
    let half = T::lit(0.5);
    (0..w * h)
        .map(|i| half * (T::lit(2.0) * jxy[i]).atan2(jxx[i] - jyy[i]))
        .collect()
}
