//! Model checkpoint: a length-prefixed `key=value` header describing the
//! architecture, band and label names, followed by the `IAWT` parameter
//! container.
//!
//! ```text
//! meta_len  u32 LE
//! meta      meta_len bytes UTF-8, one key=value per line
//! IAWT container (see nn::checkpoint)
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{build_classifier, Classifier, ClassifierConfig};
use crate::bytes::{read_file, write_file, ByteReader};
use crate::error::{Error, Result};
use crate::inamp::InAmpConfig;
use crate::nn::checkpoint::{decode_from, encode_params};

const FORMAT: &str = "inamp-classifier/1";

/// A classifier plus the names it was trained against.
#[derive(Clone, Debug)]
pub struct SavedModel {
    pub classifier: Classifier,
    /// Input band names, in channel order.
    pub bands: Vec<String>,
    /// Class names, by label index.
    pub labels: Vec<String>,
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn meta_text(m: &SavedModel) -> String {
    let c = &m.classifier.cfg;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| writeln!(s, "{k}={v}").unwrap();
    kv("format", FORMAT.into());
    kv("input_bands", c.input_bands.to_string());
    kv("input_size", c.input_size.to_string());
    kv("n_classes", c.n_classes.to_string());
    kv("block_widths", join(&c.block_widths));
    kv("with_inamp", c.with_inamp().to_string());
    if let Some(a) = &c.inamp {
        kv("inamp.out_channels", a.out_channels.to_string());
        kv("inamp.layers", a.n_one_by_one_layers.to_string());
        kv("inamp.spatial_attention", a.use_spatial_attention.to_string());
        kv("inamp.channel_attention", a.use_channel_attention.to_string());
        kv("inamp.sa_kernel", a.sa_kernel.to_string());
        kv("inamp.ca_reduction", a.ca_reduction.to_string());
        kv(
            "inamp.layer_widths",
            a.layer_widths.as_deref().map(join).unwrap_or_default(),
        );
        kv("inamp.concat_all_layers", a.concat_all_layers.to_string());
    }
    kv("bands", m.bands.join(","));
    kv("labels", m.labels.join(","));
    s
}

struct Meta<'a> {
    map: HashMap<&'a str, &'a str>,
    origin: &'a Path,
}

impl Meta<'_> {
    fn err(&self, msg: String) -> Error {
        Error::Format {
            path: self.origin.to_path_buf(),
            msg,
        }
    }

    fn str(&self, k: &str) -> Result<&str> {
        self.map
            .get(k)
            .copied()
            .ok_or_else(|| self.err(format!("missing key {k}")))
    }

    fn get<T: std::str::FromStr>(&self, k: &str) -> Result<T> {
        let v = self.str(k)?;
        v.parse().map_err(|_| self.err(format!("bad value for {k}: {v:?}")))
    }

    fn list<T: std::str::FromStr>(&self, k: &str) -> Result<Vec<T>> {
        let v = self.str(k)?;
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|x| x.parse().map_err(|_| self.err(format!("bad value for {k}: {v:?}"))))
            .collect()
    }
}

pub fn encode_model(m: &SavedModel) -> Result<Vec<u8>> {
    let meta = meta_text(m);
    let len = u32::try_from(meta.len()).map_err(|_| Error::Config("metadata too long".into()))?;
    let mut out = len.to_le_bytes().to_vec();
    out.extend_from_slice(meta.as_bytes());
    out.extend(encode_params(&m.classifier.params)?);
    Ok(out)
}

pub fn decode_model(bytes: &[u8], origin: &Path) -> Result<SavedModel> {
    let mut r = ByteReader::new(bytes, origin);
    let len = r.u32()? as usize;
    let text = r.utf8(len)?;
    let meta = Meta {
        map: text.lines().filter_map(|l| l.split_once('=')).collect(),
        origin,
    };
    if meta.str("format")? != FORMAT {
        return Err(meta.err(format!("unsupported model format {:?}", meta.str("format")?)));
    }
    let input_bands = meta.get("input_bands")?;
    let inamp = if meta.get::<bool>("with_inamp")? {
        let widths: Vec<usize> = meta.list("inamp.layer_widths")?;
        Some(InAmpConfig {
            in_bands: input_bands,
            out_channels: meta.get("inamp.out_channels")?,
            n_one_by_one_layers: meta.get("inamp.layers")?,
            use_spatial_attention: meta.get("inamp.spatial_attention")?,
            use_channel_attention: meta.get("inamp.channel_attention")?,
            sa_kernel: meta.get("inamp.sa_kernel")?,
            ca_reduction: meta.get("inamp.ca_reduction")?,
            layer_widths: (!widths.is_empty()).then_some(widths),
            concat_all_layers: meta.get("inamp.concat_all_layers")?,
        })
    } else {
        None
    };
    let cfg = ClassifierConfig {
        inamp,
        input_bands,
        input_size: meta.get("input_size")?,
        n_classes: meta.get("n_classes")?,
        block_widths: meta.list("block_widths")?,
    };
    let bands: Vec<String> = meta.list("bands")?;
    let labels: Vec<String> = meta.list("labels")?;
    if bands.len() != cfg.input_bands || labels.len() != cfg.n_classes {
        return Err(meta.err("band or label names disagree with the architecture".into()));
    }

    let params = decode_from(&mut r)?;
    if r.remaining() != 0 {
        return Err(meta.err(format!("{} trailing bytes", r.remaining())));
    }
    let mut classifier = build_classifier(cfg, &mut ChaCha8Rng::seed_from_u64(0))?;
    let expected: Vec<_> = classifier
        .params
        .iter()
        .map(|(n, t)| (n.to_string(), t.shape().to_vec()))
        .collect();
    let got: Vec<_> = params
        .iter()
        .map(|(n, t)| (n.to_string(), t.shape().to_vec()))
        .collect();
    if expected != got {
        return Err(meta.err("parameter names or shapes disagree with the architecture".into()));
    }
    classifier.params = params;
    Ok(SavedModel {
        classifier,
        bands,
        labels,
    })
}

pub fn save_model(path: &Path, m: &SavedModel) -> Result<()> {
    write_file(path, &encode_model(m)?)
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    decode_model(&read_file(path)?, path)
}
