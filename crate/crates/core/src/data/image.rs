use crate::error::{Error, Result};

/// `H × W × C` reflectance raster, values row-major in (row, col, band)
/// order.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiSpectralImage {
    pub width: usize,
    pub height: usize,
    pub bands: Vec<String>,
    pub values: Vec<f32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Each band mapped onto [0, 1]; constant bands become 0.
    PerBandMinMax,
    /// Values already in [0, 1]; passed through unchanged.
    FixedUnit,
}

impl MultiSpectralImage {
    pub fn new(width: usize, height: usize, bands: Vec<String>, values: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || bands.is_empty() {
            return Err(Error::InvalidShape(vec![height, width, bands.len()]));
        }
        if values.len() != width * height * bands.len() {
            return Err(Error::shape([height, width, bands.len()], values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image values"));
        }
        Ok(MultiSpectralImage {
            width,
            height,
            bands,
            values,
        })
    }

    pub fn channels(&self) -> usize {
        self.bands.len()
    }

    pub fn band_index(&self, name: &str) -> Result<usize> {
        self.bands
            .iter()
            .position(|b| b.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::MissingBand(name.to_string()))
    }

    /// One band as an `H × W` map.
    pub fn band(&self, index: usize) -> Vec<f32> {
        self.values
            .iter()
            .skip(index)
            .step_by(self.channels())
            .copied()
            .collect()
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        let c = self.channels();
        let i = (row * self.width + col) * c;
        &self.values[i..i + c]
    }

    pub fn select_bands(&self, indices: &[usize]) -> Result<Self> {
        let c = self.channels();
        if let Some(&bad) = indices.iter().find(|&&i| i >= c) {
            return Err(Error::IndexOutOfRange { index: bad, limit: c });
        }
        let mut values = Vec::with_capacity(self.width * self.height * indices.len());
        for px in self.values.chunks_exact(c) {
            values.extend(indices.iter().map(|&i| px[i]));
        }
        MultiSpectralImage::new(
            self.width,
            self.height,
            indices.iter().map(|&i| self.bands[i].clone()).collect(),
            values,
        )
    }

    /// Reverses columns (`horizontal`) and/or rows (`vertical`).
    pub fn flipped(&self, horizontal: bool, vertical: bool) -> Self {
        MultiSpectralImage {
            values: flip_hwc(
                &self.values,
                self.height,
                self.width,
                self.channels(),
                horizontal,
                vertical,
            ),
            ..self.clone()
        }
    }

    pub fn normalized(&self, mode: Normalization) -> Result<Self> {
        match mode {
            Normalization::FixedUnit => {
                if let Some(v) = self.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return Err(Error::Config(format!("value {v} outside [0, 1]")));
                }
                Ok(self.clone())
            }
            Normalization::PerBandMinMax => {
                let c = self.channels();
                let mut lo = vec![f32::INFINITY; c];
                let mut hi = vec![f32::NEG_INFINITY; c];
                for px in self.values.chunks_exact(c) {
                    for b in 0..c {
                        lo[b] = lo[b].min(px[b]);
                        hi[b] = hi[b].max(px[b]);
                    }
                }
                let values = self
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let b = i % c;
                        let range = hi[b] - lo[b];
                        if range > 0.0 {
                            (v - lo[b]) / range
                        } else {
                            0.0
                        }
                    })
                    .collect();
                Ok(MultiSpectralImage { values, ..self.clone() })
            }
        }
    }
}

/// Axis reversal of a row-major `h × w × c` buffer.
pub fn flip_hwc(values: &[f32], h: usize, w: usize, c: usize, horizontal: bool, vertical: bool) -> Vec<f32> {
    let mut out = Vec::with_capacity(values.len());
    for r in 0..h {
        let sr = if vertical { h - 1 - r } else { r };
        for col in 0..w {
            let sc = if horizontal { w - 1 - col } else { col };
            let i = (sr * w + sc) * c;
            out.extend_from_slice(&values[i..i + c]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(w: usize, h: usize, c: usize, values: Vec<f32>) -> MultiSpectralImage {
        let bands = (0..c).map(|i| format!("b{i}")).collect();
        MultiSpectralImage::new(w, h, bands, values).unwrap()
    }

    #[test]
    fn horizontal_flip_moves_bright_half() {
        // 4 wide, 2 high, 1 band; left half bright
        let im = img(4, 2, 1, vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let f = im.flipped(true, false);
        assert_eq!(f.values, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(f.bands, im.bands);
    }

    #[test]
    fn minmax_normalisation() {
        let im = img(2, 1, 2, vec![2.0, 5.0, 4.0, 5.0]);
        let n = im.normalized(Normalization::PerBandMinMax).unwrap();
        assert_eq!(n.values, vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(n.normalized(Normalization::PerBandMinMax).unwrap(), n);
        assert!(im.normalized(Normalization::FixedUnit).is_err());
        assert_eq!(n.normalized(Normalization::FixedUnit).unwrap(), n);
    }

    #[test]
    fn select_bands_keeps_order() {
        let im = img(1, 2, 3, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let s = im.select_bands(&[2, 0]).unwrap();
        assert_eq!(s.values, vec![0.3, 0.1, 0.6, 0.4]);
        assert_eq!(s.bands, vec!["b2", "b0"]);
        assert!(im.select_bands(&[3]).is_err());
    }

    fn arb_image() -> impl Strategy<Value = MultiSpectralImage> {
        (1usize..6, 1usize..6, 1usize..4).prop_flat_map(|(w, h, c)| {
            prop::collection::vec(-1.0f32..1.0, w * h * c).prop_map(move |v| img(w, h, c, v))
        })
    }

    proptest! {
        #[test]
        fn flips_are_involutions_and_commute(im in arb_image()) {
            prop_assert_eq!(&im.flipped(true, false).flipped(true, false), &im);
            prop_assert_eq!(&im.flipped(false, true).flipped(false, true), &im);
            prop_assert_eq!(
                im.flipped(true, false).flipped(false, true),
                im.flipped(false, true).flipped(true, false)
            );
        }

        #[test]
        fn minmax_is_idempotent(im in arb_image()) {
            let once = im.normalized(Normalization::PerBandMinMax).unwrap();
            let twice = once.normalized(Normalization::PerBandMinMax).unwrap();
            for (a, b) in once.values.iter().zip(&twice.values) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
