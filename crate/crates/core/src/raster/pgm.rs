//! Binary 8-bit PGM ("P5") frames and masks.
//!
//! Writers always emit the canonical header `P5\n<w> <h>\n255\n`, so a file
//! produced here round-trips byte for byte. Masks are stored as 0/255 and read
//! back with the threshold `value >= 128` meaning foreground.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{BinaryMask, Raster};
use crate::error::{Error, Result};

pub const MASK_THRESHOLD: u8 = 128;

/// Decoded PGM payload: dimensions plus one byte per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray8 {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

pub fn decode(bytes: &[u8]) -> Result<Gray8> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(Error::Pgm(format!(
            "unsupported magic {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = parse_uint(next_token(bytes, &mut pos)?)?;
    let height = parse_uint(next_token(bytes, &mut pos)?)?;
    let maxval = parse_uint(next_token(bytes, &mut pos)?)?;
    if width == 0 || height == 0 {
        return Err(Error::Pgm(format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::Pgm(format!(
            "maxval {maxval} unsupported (need 255)"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Pgm("missing header terminator".into()));
    }
    pos += 1;
    let n = width * height;
    if bytes.len() < pos + n {
        return Err(Error::Pgm(format!(
            "truncated raster: need {n} bytes, have {}",
            bytes.len() - pos
        )));
    }
    Ok(Gray8 {
        width,
        height,
        pixels: bytes[pos..pos + n].to_vec(),
    })
}

pub fn encode(img: &Gray8) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Pgm("unexpected end of header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn parse_uint(tok: &[u8]) -> Result<usize> {
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Pgm(format!("bad number {:?}", String::from_utf8_lossy(tok))))
}

impl From<&Gray8> for Raster {
    fn from(g: &Gray8) -> Self {
        Raster {
            width: g.width,
            height: g.height,
            data: g.pixels.iter().map(|&p| p as f64).collect(),
        }
    }
}

impl From<&Gray8> for BinaryMask {
    fn from(g: &Gray8) -> Self {
        BinaryMask {
            width: g.width,
            height: g.height,
            bits: g.pixels.iter().map(|&p| p >= MASK_THRESHOLD).collect(),
        }
    }
}

impl Raster {
    /// Quantizes to 8 bits (round half away from zero, clamped to 0..=255).
    pub fn to_gray8(&self) -> Gray8 {
        Gray8 {
            width: self.width,
            height: self.height,
            pixels: self
                .data
                .iter()
                .map(|v| v.round().clamp(0.0, 255.0) as u8)
                .collect(),
        }
    }
}

impl BinaryMask {
    pub fn to_gray8(&self) -> Gray8 {
        Gray8 {
            width: self.width,
            height: self.height,
            pixels: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<Raster> {
    let g = decode(&fs::read(path)?)?;
    Ok(Raster::from(&g))
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let g = decode(&fs::read(path)?)?;
    Ok(BinaryMask::from(&g))
}

pub fn write_raster(path: impl AsRef<Path>, img: &Raster) -> Result<()> {
    write_bytes(path.as_ref(), &encode(&img.to_gray8()))
}

pub fn write_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    write_bytes(path.as_ref(), &encode(&mask.to_gray8()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}
