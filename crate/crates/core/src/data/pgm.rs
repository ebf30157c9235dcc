//! Binary portable graymap (`P5`, maxval 255).

use std::path::Path;

use crate::bytes::{read_file, write_file};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    /// Min-max maps `values` (row-major, `width × height`) onto `0..=255`.
    /// A constant input maps to all zeros.
    pub fn from_minmax(values: &[f32], width: usize, height: usize) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::shape(width * height, values.len()));
        }
        let (lo, hi) = values.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        let range = hi - lo;
        let pixels = values
            .iter()
            .map(|&v| {
                if range > 0.0 {
                    ((v - lo) / range * 255.0).round().clamp(0.0, 255.0) as u8
                } else {
                    0
                }
            })
            .collect();
        Ok(GrayImage { width, height, pixels })
    }

    /// Maps the fixed interval `[lo, hi]` linearly onto `0..=255`, clamping
    /// values outside it.
    pub fn from_range(values: &[f32], width: usize, height: usize, lo: f32, hi: f32) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::shape(width * height, values.len()));
        }
        let pixels = values
            .iter()
            .map(|&v| ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        Ok(GrayImage { width, height, pixels })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    write_file(path, &img.encode())
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = read_file(path)?;
    let bad = |msg: &str| Error::Format {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    if !bytes.starts_with(b"P5") {
        return Err(Error::BadMagic(path.to_path_buf()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for f in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::TruncatedFile(path.to_path_buf())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *f = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("malformed header"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width * height;
    if bytes.len() < pos + n {
        return Err(Error::TruncatedFile(path.to_path_buf()));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: bytes[pos..pos + n].to_vec(),
    })
}
