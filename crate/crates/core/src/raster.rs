//! Image containers, luminance conversion, binary morphology and masking.
//!
//! All containers are row-major with the origin at the top-left pixel. Binary
//! morphology uses a square (Chebyshev) structuring element; pixels outside
//! the frame count as clear, so erosion always clears the frame border.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input("rgb image must be at least 1x1"));
        }
        if data.len() != width * height * 3 {
            return Err(Error::input(format!(
                "rgb data length {} does not match {}x{}x3",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        Self::new(w as usize, h as usize, rgb.into_raw())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        image::save_buffer_with_format(
            path,
            &self.data,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input("gray image must be at least 1x1"));
        }
        if data.len() != width * height {
            return Err(Error::input(format!(
                "gray data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, v: u8) -> Result<Self> {
        Self::new(width, height, vec![v; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    /// Copies the `w`x`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::input("crop window exceeds image bounds"));
        }
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + w]);
        }
        Self::new(w, h, data)
    }

    /// Loads an 8-bit grayscale PNG. Colour images are rejected.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        if img.color().channel_count() != 1 {
            return Err(Error::input(format!(
                "{}: expected a single-channel grayscale image, found {:?}",
                path.display(),
                img.color()
            )));
        }
        let g = img.to_luma8();
        let (w, h) = g.dimensions();
        Self::new(w as usize, h as usize, g.into_raw())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        image::save_buffer_with_format(
            path,
            &self.data,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::L8,
            image::ImageFormat::Png,
        )
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::input(format!(
                "mask length {} does not match {}x{}",
                bits.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Signed lookup; anything outside the frame is clear.
    #[inline]
    pub fn get_i(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_dims(&self, w: usize, h: usize) -> bool {
        self.width == w && self.height == h
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a && b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Result<Self> {
        if !other.same_dims(self.width, self.height) {
            return Err(Error::input(format!(
                "mask dimensions differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Iterates the coordinates of set pixels in raster order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    /// Loads a grayscale PNG as a mask; intensities >= 128 are set.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let g = img.to_luma8();
        let (w, h) = g.dimensions();
        let bits = g.into_raw().into_iter().map(|v| v >= 128).collect();
        Self::from_bits(w as usize, h as usize, bits)
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }

    /// Nearest-neighbour resample to a new frame size.
    pub fn resample_nearest(&self, width: usize, height: usize) -> Self {
        Self::from_fn(width, height, |x, y| {
            let sx = (x * self.width) / width.max(1);
            let sy = (y * self.height) / height.max(1);
            self.get(sx.min(self.width - 1), sy.min(self.height - 1))
        })
    }
}

/// ITU-R 601 luma, rounded and clamped to `[0, 255]`.
pub fn to_gray(img: &RgbImage) -> GrayImage {
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| {
            let l = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
            l.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Separable min/max filter over a `(2r+1)`-square window. Pixels outside
/// the frame are clear, which is what makes erosion clear the border.
fn square_filter(mask: &BinaryMask, radius: usize, all: bool) -> BinaryMask {
    let (w, h) = (mask.width, mask.height);
    let r = radius as i64;
    let pass = |src: &[bool], horizontal: bool| -> Vec<bool> {
        let mut out = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = all;
                for d in -r..=r {
                    let (sx, sy) = if horizontal {
                        (x as i64 + d, y as i64)
                    } else {
                        (x as i64, y as i64 + d)
                    };
                    let v = sx >= 0
                        && sy >= 0
                        && (sx as usize) < w
                        && (sy as usize) < h
                        && src[sy as usize * w + sx as usize];
                    if all && !v {
                        acc = false;
                        break;
                    }
                    if !all && v {
                        acc = true;
                        break;
                    }
                }
                out[y * w + x] = acc;
            }
        }
        out
    };
    let tmp = pass(&mask.bits, true);
    BinaryMask {
        width: w,
        height: h,
        bits: pass(&tmp, false),
    }
}

/// Pixel stays set iff every pixel within Chebyshev distance `radius` is set.
/// A radius of zero is the identity.
pub fn erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    square_filter(mask, radius, true)
}

/// Pixel becomes set iff any pixel within Chebyshev distance `radius` is set.
/// A radius of zero is the identity.
pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    square_filter(mask, radius, false)
}

/// Zhang–Suen thinning to a one-pixel-wide 8-connected skeleton.
///
/// Each sub-iteration marks deletable pixels against a snapshot, as in the
/// classic schedule, then removes them in raster order only if they still
/// satisfy the deletion test against the partially updated mask. The re-check
/// keeps two-pixel-thick diagonals and 2x2 blocks from vanishing.
pub fn thin(mask: &BinaryMask) -> BinaryMask {
    let mut cur = mask.clone();
    loop {
        let mut changed = false;
        for step in 0..2 {
            let marked: Vec<(usize, usize)> = cur
                .iter_set()
                .filter(|&(x, y)| zs_deletable(&cur, x, y, step))
                .collect();
            for (x, y) in marked {
                if zs_deletable(&cur, x, y, step) {
                    cur.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            return cur;
        }
    }
}

/// Neighbours P2..P9 clockwise from north.
#[inline]
fn zs_neighbours(m: &BinaryMask, x: usize, y: usize) -> [bool; 8] {
    let (x, y) = (x as i64, y as i64);
    [
        m.get_i(x, y - 1),
        m.get_i(x + 1, y - 1),
        m.get_i(x + 1, y),
        m.get_i(x + 1, y + 1),
        m.get_i(x, y + 1),
        m.get_i(x - 1, y + 1),
        m.get_i(x - 1, y),
        m.get_i(x - 1, y - 1),
    ]
}

fn zs_deletable(m: &BinaryMask, x: usize, y: usize, step: usize) -> bool {
    let p = zs_neighbours(m, x, y);
    let b = p.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
    if a != 1 {
        return false;
    }
    let (p2, p4, p6, p8) = (p[0], p[2], p[4], p[6]);
    if step == 0 {
        !(p2 && p4 && p6) && !(p4 && p6 && p8)
    } else {
        !(p2 && p4 && p8) && !(p2 && p6 && p8)
    }
}

/// Replaces pixels where the mask is clear with `fill`.
pub fn apply_mask(img: &GrayImage, mask: &BinaryMask, fill: u8) -> Result<GrayImage> {
    if !mask.same_dims(img.width, img.height) {
        return Err(Error::input(format!(
            "mask {}x{} does not match image {}x{}",
            mask.width, mask.height, img.width, img.height
        )));
    }
    let data = img
        .data
        .iter()
        .zip(&mask.bits)
        .map(|(&v, &keep)| if keep { v } else { fill })
        .collect();
    Ok(GrayImage {
        width: img.width,
        height: img.height,
        data,
    })
}
