use super::{read_msib, DatasetManifest};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A manifest's rasters held in memory, optionally restricted to a subset of
/// bands. Sample `i` corresponds to manifest record `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub size: usize,
    pub bands: Vec<String>,
    pub labels: Vec<String>,
    pub images: Vec<Vec<f32>>,
    pub targets: Vec<usize>,
}

impl Dataset {
    /// Loads every raster; all must be square, equally sized and carry the
    /// same bands. `bands` selects channels by name, in the given order.
    pub fn load(manifest: &DatasetManifest, bands: Option<&[String]>) -> Result<Self> {
        let mut images = Vec::with_capacity(manifest.len());
        let mut shape: Option<(usize, Vec<String>)> = None;
        let mut selected = Vec::new();
        for i in 0..manifest.len() {
            let path = manifest.resolve(i);
            let img = read_msib(&path)?;
            match &shape {
                None => {
                    if img.width != img.height {
                        return Err(Error::Format {
                            path,
                            msg: format!("image is {}x{}, expected square", img.width, img.height),
                        });
                    }
                    selected = match bands {
                        Some(names) => names.iter().map(|n| img.band_index(n)).collect::<Result<_>>()?,
                        None => (0..img.channels()).collect(),
                    };
                    shape = Some((img.width, img.bands.clone()));
                }
                Some((size, names)) => {
                    if img.width != *size || img.height != *size || img.bands != *names {
                        return Err(Error::Format {
                            path,
                            msg: "image size or bands differ from the first image".into(),
                        });
                    }
                }
            }
            images.push(img.select_bands(&selected)?.values);
        }
        let (size, names) = shape.ok_or(Error::EmptyManifest)?;
        Ok(Dataset {
            size,
            bands: selected.iter().map(|&i| names[i].clone()).collect(),
            labels: manifest.labels.clone(),
            images,
            targets: manifest.records.iter().map(|r| r.label_index).collect(),
        })
    }

    pub fn channels(&self) -> usize {
        self.bands.len()
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// `[len(indices), size, size, C]` batch.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor<f32>> {
        let per = self.size * self.size * self.channels();
        let mut data = Vec::with_capacity(indices.len() * per);
        for &i in indices {
            let img = self.images.get(i).ok_or(Error::IndexOutOfRange {
                index: i,
                limit: self.len(),
            })?;
            data.extend_from_slice(img);
        }
        Tensor::from_vec(&[indices.len(), self.size, self.size, self.channels()], data)
    }

    pub fn targets_of(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.targets[i]).collect()
    }
}
