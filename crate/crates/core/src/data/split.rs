use rand::seq::SliceRandom;

use super::DatasetManifest;
use crate::error::{Error, Result};
use crate::harness::{SeedStreams, Stream};

pub const TRAIN_FRACTION: f64 = 0.64;
pub const VAL_FRACTION: f64 = 0.16;

/// Record indices into a manifest, per partition, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn get(&self, name: &str) -> Result<&[usize]> {
        match name {
            "train" => Ok(&self.train),
            "val" => Ok(&self.val),
            "test" => Ok(&self.test),
            _ => Err(Error::Config(format!("unknown split {name:?} (train|val|test)"))),
        }
    }
}

/// Stratified shuffle: per label, ⌊0.64·n⌋ train, ⌊0.16·n⌋ val, rest test.
pub fn split_dataset(manifest: &DatasetManifest, seed: u64) -> Result<Splits> {
    if manifest.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let mut rng = SeedStreams::new(seed).rng(Stream::Split, 0);
    let mut splits = Splits {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for label in 0..manifest.n_labels() {
        let mut members: Vec<usize> = (0..manifest.len())
            .filter(|&i| manifest.records[i].label_index == label)
            .collect();
        members.shuffle(&mut rng);
        let n = members.len();
        let n_train = (TRAIN_FRACTION * n as f64).floor() as usize;
        let n_val = (VAL_FRACTION * n as f64).floor() as usize;
        splits.train.extend_from_slice(&members[..n_train]);
        splits.val.extend_from_slice(&members[n_train..n_train + n_val]);
        splits.test.extend_from_slice(&members[n_train + n_val..]);
    }
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();
    Ok(splits)
}
