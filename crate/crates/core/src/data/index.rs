use std::str::FromStr;

use super::MultiSpectralImage;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexKind {
    /// (nir − red) / (nir + red)
    Ndvi,
    /// (nir − swir) / (nir + swir)
    Nbr,
    /// (swir − nir) / (swir + nir)
    Ndbi,
}

impl FromStr for IndexKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ndvi" => Ok(IndexKind::Ndvi),
            "nbr" => Ok(IndexKind::Nbr),
            "ndbi" => Ok(IndexKind::Ndbi),
            _ => Err(Error::Config(format!("unknown index {s:?} (ndvi|nbr|ndbi)"))),
        }
    }
}

/// Band names the index formulas read.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BandMap {
    pub red: String,
    pub nir: String,
    pub swir: String,
}

impl Default for BandMap {
    fn default() -> Self {
        BandMap {
            red: "red".into(),
            nir: "nir".into(),
            swir: "swir2".into(),
        }
    }
}

fn normalized_difference(a: f32, b: f32) -> f32 {
    let den = a + b;
    if den == 0.0 {
        0.0
    } else {
        ((a - b) / den).clamp(-1.0, 1.0)
    }
}

/// Per-pixel index map, `H × W`, values in [−1, 1]. A zero denominator
/// yields 0.
pub fn spectral_index(img: &MultiSpectralImage, kind: IndexKind, map: &BandMap) -> Result<Vec<f32>> {
    let (a, b) = match kind {
        IndexKind::Ndvi => (img.band_index(&map.nir)?, img.band_index(&map.red)?),
        IndexKind::Nbr => (img.band_index(&map.nir)?, img.band_index(&map.swir)?),
        IndexKind::Ndbi => (img.band_index(&map.swir)?, img.band_index(&map.nir)?),
    };
    Ok(img
        .values
        .chunks_exact(img.channels())
        .map(|px| normalized_difference(px[a], px[b]))
        .collect())
}
