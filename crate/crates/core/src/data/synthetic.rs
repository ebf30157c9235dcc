//! Synthetic 6-band aerosol scenes.
//!
//! Backgrounds mix a vegetation and a bare-soil spectrum under a smooth
//! value-noise field. Smoke and other-aerosol images receive 1–3 elliptical
//! plumes drawn from one shared shape distribution; the two signatures agree
//! in the visible bands and differ only in nir/swir, so the classes are
//! separable per pixel in the full band space but not from colour alone.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::manifest::{write_manifest, DatasetManifest, ManifestRecord};
use super::msib::write_msib;
use super::MultiSpectralImage;
use crate::error::{Error, Result};
use crate::harness::{SeedStreams, Stream};

pub const BANDS: [&str; 6] = ["blue", "green", "red", "nir", "swir1", "swir2"];
pub const LABELS: [&str; 3] = ["clear", "other_aerosol", "smoke"];
pub const CLEAR: usize = 0;
pub const OTHER_AEROSOL: usize = 1;
pub const SMOKE: usize = 2;
/// Number of leading visible bands.
pub const VISIBLE: usize = 3;

const VEGETATION: [f64; 6] = [0.04, 0.08, 0.05, 0.40, 0.20, 0.10];
const SOIL: [f64; 6] = [0.10, 0.14, 0.18, 0.28, 0.32, 0.25];

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub per_label: usize,
    pub size: usize,
    pub noise_sigma: f64,
    pub plumes_min: usize,
    pub plumes_max: usize,
    /// Plume semi-axis range as a fraction of the image side.
    pub axis_min: f64,
    pub axis_max: f64,
    /// Normalised radius inside which a plume is at peak opacity.
    pub core_fraction: f64,
    pub peak_alpha_min: f64,
    pub peak_alpha_max: f64,
    /// Value-noise lattice spacing in pixels.
    pub background_cell: usize,
    /// Amplitude of the independent per-band background jitter.
    pub background_jitter: f64,
    pub smoke_signature: [f64; 6],
    pub aerosol_signature: [f64; 6],
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 7,
            per_label: 300,
            size: 64,
            noise_sigma: 0.02,
            plumes_min: 1,
            plumes_max: 3,
            axis_min: 0.12,
            axis_max: 0.30,
            core_fraction: 0.5,
            peak_alpha_min: 0.92,
            peak_alpha_max: 1.0,
            background_cell: 16,
            background_jitter: 0.03,
            smoke_signature: [0.60, 0.60, 0.60, 0.25, 0.15, 0.10],
            aerosol_signature: [0.60, 0.60, 0.60, 0.65, 0.60, 0.55],
        }
    }
}

fn parse_sig(v: &str) -> Result<[f64; 6]> {
    let vals = v
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| Error::Config(format!("bad signature {v:?}")))?;
    vals.try_into()
        .map_err(|_| Error::Config(format!("signature needs 6 values: {v:?}")))
}

fn sig_text(s: &[f64; 6]) -> String {
    s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.per_label == 0 {
            return bad("per_label must be at least 1");
        }
        if self.size < 8 {
            return bad("size must be at least 8");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and non-negative");
        }
        if self.plumes_min == 0 || self.plumes_min > self.plumes_max {
            return bad("need 1 <= plumes_min <= plumes_max");
        }
        if !(self.axis_min > 0.0 && self.axis_min <= self.axis_max && self.axis_max <= 1.0) {
            return bad("need 0 < axis_min <= axis_max <= 1");
        }
        if !(0.0..1.0).contains(&self.core_fraction) {
            return bad("core_fraction must lie in [0, 1)");
        }
        if !(self.peak_alpha_min > 0.0 && self.peak_alpha_min <= self.peak_alpha_max && self.peak_alpha_max <= 1.0) {
            return bad("need 0 < peak_alpha_min <= peak_alpha_max <= 1");
        }
        if self.background_cell == 0 {
            return bad("background_cell must be at least 1");
        }
        if !(0.0..=0.5).contains(&self.background_jitter) {
            return bad("background_jitter must lie in [0, 0.5]");
        }
        for s in [&self.smoke_signature, &self.aerosol_signature] {
            if s.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return bad("signature values must lie in [0, 1]");
            }
        }
        if self.smoke_signature[..VISIBLE] != self.aerosol_signature[..VISIBLE] {
            return bad("smoke and other_aerosol signatures must agree in the visible bands");
        }
        Ok(())
    }

    /// Flat `key=value` form, one key per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k}={v}").unwrap();
        kv("seed", self.seed.to_string());
        kv("per_label", self.per_label.to_string());
        kv("size", self.size.to_string());
        kv("noise_sigma", self.noise_sigma.to_string());
        kv("plumes_min", self.plumes_min.to_string());
        kv("plumes_max", self.plumes_max.to_string());
        kv("axis_min", self.axis_min.to_string());
        kv("axis_max", self.axis_max.to_string());
        kv("core_fraction", self.core_fraction.to_string());
        kv("peak_alpha_min", self.peak_alpha_min.to_string());
        kv("peak_alpha_max", self.peak_alpha_max.to_string());
        kv("background_cell", self.background_cell.to_string());
        kv("background_jitter", self.background_jitter.to_string());
        kv("smoke_signature", sig_text(&self.smoke_signature));
        kv("aerosol_signature", sig_text(&self.aerosol_signature));
        s
    }

    /// Parses `key=value` lines over the defaults. Blank lines and `#`
    /// comments are skipped; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = SyntheticSpec::default();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got {line:?}")))?;
            spec.set(k.trim(), v.trim())?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad value for {k}: {v:?}")))
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "per_label" => self.per_label = num(key, value)?,
            "size" => self.size = num(key, value)?,
            "noise_sigma" => self.noise_sigma = num(key, value)?,
            "plumes_min" => self.plumes_min = num(key, value)?,
            "plumes_max" => self.plumes_max = num(key, value)?,
            "axis_min" => self.axis_min = num(key, value)?,
            "axis_max" => self.axis_max = num(key, value)?,
            "core_fraction" => self.core_fraction = num(key, value)?,
            "peak_alpha_min" => self.peak_alpha_min = num(key, value)?,
            "peak_alpha_max" => self.peak_alpha_max = num(key, value)?,
            "background_cell" => self.background_cell = num(key, value)?,
            "background_jitter" => self.background_jitter = num(key, value)?,
            "smoke_signature" => self.smoke_signature = parse_sig(value)?,
            "aerosol_signature" => self.aerosol_signature = parse_sig(value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    fn signature(&self, label: usize) -> Option<&[f64; 6]> {
        match label {
            SMOKE => Some(&self.smoke_signature),
            OTHER_AEROSOL => Some(&self.aerosol_signature),
            _ => None,
        }
    }
}

/// A generated scene together with its per-pixel plume opacity.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedImage {
    pub image: MultiSpectralImage,
    pub label: usize,
    /// Blend weight of the label signature, `H × W`, zero outside plumes.
    pub alpha: Vec<f32>,
}

/// Smooth field in [0, 1]: random lattice values, smoothstep-interpolated.
fn value_noise(rng: &mut ChaCha8Rng, size: usize, cell: usize) -> Vec<f64> {
    let nodes = size / cell + 2;
    let lattice: Vec<f64> = (0..nodes * nodes).map(|_| rng.random()).collect();
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        let fy = y as f64 / cell as f64;
        let (iy, ty) = (fy as usize, smooth(fy.fract()));
        for x in 0..size {
            let fx = x as f64 / cell as f64;
            let (ix, tx) = (fx as usize, smooth(fx.fract()));
            let at = |r: usize, c: usize| lattice[r * nodes + c];
            let top = at(iy, ix) * (1.0 - tx) + at(iy, ix + 1) * tx;
            let bot = at(iy + 1, ix) * (1.0 - tx) + at(iy + 1, ix + 1) * tx;
            out.push(top * (1.0 - ty) + bot * ty);
        }
    }
    out
}

struct Plume {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
    peak: f64,
}

impl Plume {
    fn draw(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Self {
        let s = spec.size as f64;
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        Plume {
            cx: rng.random_range(0.0..s),
            cy: rng.random_range(0.0..s),
            a: rng.random_range(spec.axis_min..=spec.axis_max) * s,
            b: rng.random_range(spec.axis_min..=spec.axis_max) * s,
            cos: theta.cos(),
            sin: theta.sin(),
            peak: rng.random_range(spec.peak_alpha_min..=spec.peak_alpha_max),
        }
    }

    fn alpha(&self, x: f64, y: f64, core: f64) -> f64 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = (dx * self.cos + dy * self.sin) / self.a;
        let v = (-dx * self.sin + dy * self.cos) / self.b;
        let d = (u * u + v * v).sqrt();
        if d <= core {
            self.peak
        } else if d < 1.0 {
            let t = (d - core) / (1.0 - core);
            self.peak * (1.0 - t * t * (3.0 - 2.0 * t))
        } else {
            0.0
        }
    }
}

/// Scene number `index` (global across labels) of class `label`.
pub fn generate_image(spec: &SyntheticSpec, label: usize, index: u64) -> Result<GeneratedImage> {
    spec.validate()?;
    if label >= LABELS.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: LABELS.len(),
        });
    }
    let mut rng = SeedStreams::new(spec.seed).rng(Stream::Generate, index);
    let n = spec.size;
    let cover = value_noise(&mut rng, n, spec.background_cell);
    let jitter: Vec<Vec<f64>> = (0..BANDS.len())
        .map(|_| value_noise(&mut rng, n, spec.background_cell))
        .collect();

    let mut alpha = vec![0.0f64; n * n];
    if spec.signature(label).is_some() {
        let count = rng.random_range(spec.plumes_min..=spec.plumes_max);
        for _ in 0..count {
            let p = Plume::draw(spec, &mut rng);
            for y in 0..n {
                for x in 0..n {
                    let a = p.alpha(x as f64 + 0.5, y as f64 + 0.5, spec.core_fraction);
                    let cell = &mut alpha[y * n + x];
                    *cell = cell.max(a);
                }
            }
        }
    }

    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let sig = spec.signature(label);
    let mut values = Vec::with_capacity(n * n * BANDS.len());
    for (p, &a) in alpha.iter().enumerate() {
        let t = cover[p];
        for b in 0..BANDS.len() {
            let bg = (1.0 - t) * VEGETATION[b] + t * SOIL[b] + spec.background_jitter * (2.0 * jitter[b][p] - 1.0);
            let clean = match sig {
                Some(s) => (1.0 - a) * bg + a * s[b],
                None => bg,
            };
            let v = clean + noise.sample(&mut rng);
            values.push(v.clamp(0.0, 1.0) as f32);
        }
    }
    let bands = BANDS.iter().map(|s| s.to_string()).collect();
    Ok(GeneratedImage {
        image: MultiSpectralImage::new(n, n, bands, values)?,
        label,
        alpha: alpha.into_iter().map(|a| a as f32).collect(),
    })
}

/// Relative path of a generated scene inside the output directory.
pub fn image_path(label: usize, i: usize) -> PathBuf {
    PathBuf::from("images").join(format!("{}_{i:04}.msib", LABELS[label]))
}

/// Writes `images/*.msib`, `manifest.csv` and `spec.txt` under `out_dir`.
pub fn gen_synthetic(spec: &SyntheticSpec, out_dir: &Path) -> Result<DatasetManifest> {
    spec.validate()?;
    let images = out_dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let mut records = Vec::with_capacity(LABELS.len() * spec.per_label);
    for (label, name) in LABELS.iter().enumerate() {
        for i in 0..spec.per_label {
            let index = (label * spec.per_label + i) as u64;
            let g = generate_image(spec, label, index)?;
            let rel = image_path(label, i);
            write_msib(&g.image, &out_dir.join(&rel))?;
            records.push(ManifestRecord {
                path: rel,
                label_index: label,
                label_name: name.to_string(),
            });
        }
    }
    let manifest = DatasetManifest::new(out_dir.to_path_buf(), records)?;
    write_manifest(&manifest, &out_dir.join("manifest.csv"))?;
    let spec_path = out_dir.join("spec.txt");
    std::fs::write(&spec_path, spec.to_text()).map_err(|e| Error::io(&spec_path, e))?;
    Ok(manifest)
}
