//! Grayscale frames, binary masks and the pure image primitives the feature
//! pipeline is built on.

mod edt;
pub mod pgm;

pub use edt::euclidean_distance_transform;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-channel intensity image, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Converts interleaved 8-bit RGB to intensity with Rec.601 luma weights.
    pub fn from_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::DimensionMismatch(format!(
                "rgb buffer of {} bytes for {width}x{height}",
                rgb.len()
            )));
        }
        let data = rgb
            .chunks_exact(3)
            .map(|px| luma(px[0] as f64, px[1] as f64, px[2] as f64))
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }
}

/// Rec.601 luma.
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// Foreground/background grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height, bits.len())?;
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    /// Builds a mask from foreground coordinates `(x, y)`.
    pub fn from_points(width: usize, height: usize, points: &[(usize, usize)]) -> Result<Self> {
        let mut mask = Self::empty(width, height)?;
        for &(x, y) in points {
            if x >= width || y >= height {
                return Err(Error::InvalidArgument(format!(
                    "point ({x},{y}) outside {width}x{height}"
                )));
            }
            mask.set(x, y, true);
        }
        Ok(mask)
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

    /// Iterates `(x, y)` of foreground pixels in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }
}

/// Per-pixel distance to the nearest foreground pixel. `+inf` when the source
/// mask had no foreground.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    dist: Vec<f64>,
}

impl DistanceField {
    pub(crate) fn from_raw(width: usize, height: usize, dist: Vec<f64>) -> Self {
        debug_assert_eq!(dist.len(), width * height);
        Self {
            width,
            height,
            dist,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.dist
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.dist[y * self.width + x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!(
            "zero-sized grid {width}x{height}"
        )));
    }
    if len != width * height {
        return Err(Error::DimensionMismatch(format!(
            "{len} values for {width}x{height} grid"
        )));
    }
    Ok(())
}

/// Population variance of the 4-neighbour Laplacian over interior pixels.
pub fn laplacian_variance(img: &Raster) -> Result<f64> {
    let (w, h) = (img.width, img.height);
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
        });
    }
    let d = &img.data;
    let n = ((w - 2) * (h - 2)) as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let response = |x: usize, y: usize| {
        let i = y * w + x;
        d[i - w] + d[i + w] + d[i - 1] + d[i + 1] - 4.0 * d[i]
    };
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            sum += response(x, y);
        }
    }
    let mean = sum / n;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let r = response(x, y) - mean;
            sum_sq += r * r;
        }
    }
    Ok(sum_sq / n)
}

/// Mean squared per-pixel difference.
pub fn frame_diff_energy(a: &Raster, b: &Raster) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch(format!(
            "frames {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let total: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(p, q)| (p - q) * (p - q))
        .sum();
    Ok(total / a.data.len() as f64)
}

/// Mean foreground coordinate, `x` = column and `y` = row.
pub fn mask_centroid(mask: &BinaryMask) -> Result<Point2> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for (x, y) in mask.foreground() {
        sx += x as f64;
        sy += y as f64;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(Point2::new(sx / n as f64, sy / n as f64))
}

/// Smallest field value over the foreground of `sample_mask`.
pub fn min_distance_in_mask(field: &DistanceField, sample_mask: &BinaryMask) -> Result<f64> {
    if field.width != sample_mask.width || field.height != sample_mask.height {
        return Err(Error::DimensionMismatch(format!(
            "field {}x{} vs mask {}x{}",
            field.width, field.height, sample_mask.width, sample_mask.height
        )));
    }
    let mut best: Option<f64> = None;
    for (d, _) in field.dist.iter().zip(&sample_mask.bits).filter(|(_, &b)| b) {
        best = Some(best.map_or(*d, |m: f64| m.min(*d)));
    }
    best.ok_or(Error::EmptyMask)
}
