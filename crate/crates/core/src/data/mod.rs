//! Rasters, datasets and the synthetic benchmark.

mod dataset;
mod image;
mod index;
mod manifest;
pub mod msib;
pub mod pgm;
mod split;
pub mod synthetic;

pub use dataset::Dataset;
pub use image::{flip_hwc, MultiSpectralImage, Normalization};
pub use index::{spectral_index, BandMap, IndexKind};
pub use manifest::{read_manifest, write_manifest, DatasetManifest, ManifestRecord};
pub use msib::{read_msib, write_msib};
pub use split::{split_dataset, Splits};
pub use synthetic::{gen_synthetic, generate_image, GeneratedImage, SyntheticSpec};

/// Flip augmentation; band order is untouched.
pub fn augment_flip(img: &MultiSpectralImage, horizontal: bool, vertical: bool) -> MultiSpectralImage {
    img.flipped(horizontal, vertical)
}
