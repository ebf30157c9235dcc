use std::path::{Path, PathBuf};

use crate::data::pgm::{write_pgm, GrayImage};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Writes each selected channel of a `[1, H, W, C]` InAmp output as an
/// 8-bit graymap `pseudo_band_XX.pgm` in `dest`, min-max normalised.
pub fn export_pseudo_bands(out: &Tensor<f32>, band_indices: &[usize], dest: &Path) -> Result<Vec<PathBuf>> {
    let s = out.shape();
    if s.len() != 4 || s[0] != 1 {
        return Err(Error::shape("[1, H, W, C]", s));
    }
    let (h, w, c) = (s[1], s[2], s[3]);
    if let Some(&bad) = band_indices.iter().find(|&&i| i >= c) {
        return Err(Error::IndexOutOfRange { index: bad, limit: c });
    }
    std::fs::create_dir_all(dest).map_err(|e| Error::io(dest, e))?;
    let mut written = Vec::with_capacity(band_indices.len());
    for &band in band_indices {
        let values: Vec<f32> = out.data().iter().skip(band).step_by(c).copied().collect();
        let img = GrayImage::from_minmax(&values, w, h)?;
        let path = dest.join(format!("pseudo_band_{band:02}.pgm"));
        write_pgm(&path, &img)?;
        written.push(path);
    }
    Ok(written)
}
