//! `inamp` command line.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 internal failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::pgm::{write_pgm, GrayImage};
use crate::data::{
    gen_synthetic, read_manifest, read_msib, spectral_index, split_dataset, BandMap, Dataset, IndexKind, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::harness::gradcheck::{run_gradcheck, GradModule, TOLERANCE};
use crate::harness::{ablate, evaluate, train, AblationAxis, SeedStreams, Stream, TrainConfig};
use crate::inamp::{export_pseudo_bands, InAmpConfig};
use crate::model::{build_classifier, load_model, save_model, ClassifierConfig, SavedModel};
use crate::tensor::{Graph, Tensor};

#[derive(Parser, Debug)]
#[command(
    name = "inamp",
    version,
    about = "Spectral input amplification for multi-spectral scene classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic 3-class, 6-band dataset.
    GenData(GenDataArgs),
    /// Train a classifier and write checkpoint, report and per-epoch log.
    Train(TrainArgs),
    /// Score a checkpoint on one split.
    Eval(EvalArgs),
    /// Train one model per grid point of an ablation axis.
    Ablate(AblateArgs),
    /// Export InAmp output channels of one image as graymaps.
    Viz(VizArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Compute a spectral index map as a graymap.
    Index(IndexArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    /// Output directory (images/, manifest.csv, spec.txt).
    #[arg(long, default_value = "data")]
    out: PathBuf,
    /// key=value generator spec; flags below override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Images per label.
    #[arg(long)]
    per_label: Option<usize>,
    /// Image side in pixels.
    #[arg(long)]
    size: Option<usize>,
    /// Per-pixel Gaussian noise standard deviation.
    #[arg(long)]
    noise_sigma: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct ScheduleArgs {
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 300)]
    max_epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    initial_lr: f64,
    #[arg(long, default_value_t = 20)]
    plateau_patience: usize,
    #[arg(long, default_value_t = 0.8)]
    plateau_factor: f64,
    #[arg(long, default_value_t = 60)]
    early_stop_patience: usize,
    /// Seed for initialisation, shuffling, augmentation and the split.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Disable random flips.
    #[arg(long)]
    no_augment: bool,
    /// Label whose miss rate is reported.
    #[arg(long, default_value = "smoke")]
    target_label: String,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Comma-separated band names to feed the model (default: all).
    #[arg(long, value_delimiter = ',')]
    bands: Option<Vec<String>>,
    /// Backbone conv widths.
    #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
    block_widths: Vec<usize>,
    #[arg(long, default_value_t = 32)]
    out_channels: usize,
    /// Number of stacked 1×1 layers.
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long)]
    no_spatial_attention: bool,
    #[arg(long)]
    no_channel_attention: bool,
    #[arg(long, default_value_t = 7)]
    sa_kernel: usize,
    #[arg(long, default_value_t = 8)]
    ca_reduction: usize,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset manifest.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Put an InAmp module in front of the backbone.
    #[arg(long)]
    with_inamp: bool,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset manifest.
    #[arg(long)]
    data: PathBuf,
    /// train, val or test.
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, default_value = "smoke")]
    target_label: String,
    /// Split seed; must match the one used for training.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Also write metrics.txt and predictions.csv here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    /// attention, layers or channels.
    #[arg(long)]
    axis: String,
    #[arg(long, default_value = "ablation")]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
}

#[derive(Args, Debug)]
struct VizArgs {
    /// Checkpoint of a model trained with --with-inamp.
    #[arg(long)]
    checkpoint: PathBuf,
    /// MSIB image.
    #[arg(long)]
    image: PathBuf,
    /// InAmp output channels to export (default: all pseudo bands).
    #[arg(long, value_delimiter = ',')]
    bands: Option<Vec<usize>>,
    #[arg(long, default_value = "viz")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// all, conv, activation, pool, dense, loss or inamp.
    #[arg(long, default_value = "all")]
    module: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug)]
struct IndexArgs {
    /// MSIB image.
    #[arg(long)]
    image: PathBuf,
    /// ndvi, nbr or ndbi.
    #[arg(long)]
    kind: String,
    /// Output graymap; [-1, 1] maps linearly onto 0..=255.
    #[arg(long, default_value = "index.pgm")]
    out: PathBuf,
    #[arg(long, default_value = "red")]
    red: String,
    #[arg(long, default_value = "nir")]
    nir: String,
    #[arg(long, default_value = "swir2")]
    swir: String,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match dispatch(cli.command, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Io { .. }
        | Error::BadMagic(_)
        | Error::UnsupportedVersion { .. }
        | Error::TruncatedFile(_)
        | Error::Format { .. }
        | Error::EmptyManifest
        | Error::MissingBand(_)
        | Error::ChannelMismatch { .. }
        | Error::IndexOutOfRange { .. }
        | Error::LabelOutOfRange { .. }
        | Error::InvalidLr(_)
        | Error::ReductionUnderflow { .. }
        | Error::EmptySplit(_)
        | Error::NoTargetSamples(_) => 1,
        _ => 2,
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::GenData(a) => gen_data(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Eval(a) => eval_cmd(a, out),
        Command::Ablate(a) => ablate_cmd(a, out),
        Command::Viz(a) => viz_cmd(a, out),
        Command::Gradcheck(a) => gradcheck_cmd(a, out),
        Command::Index(a) => index_cmd(a, out),
    }
}

fn say(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn gen_data(a: GenDataArgs, out: &mut dyn Write) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => SyntheticSpec::parse(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => SyntheticSpec::default(),
    };
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    if let Some(v) = a.per_label {
        spec.per_label = v;
    }
    if let Some(v) = a.size {
        spec.size = v;
    }
    if let Some(v) = a.noise_sigma {
        spec.noise_sigma = v;
    }
    let manifest = gen_synthetic(&spec, &a.out)?;
    say(
        out,
        &format!(
            "wrote {} images to {}\n",
            manifest.len(),
            a.out.join("manifest.csv").display()
        ),
    )
}

impl ScheduleArgs {
    fn config(&self, labels: &[String]) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            initial_lr: self.initial_lr,
            plateau_patience: self.plateau_patience,
            plateau_factor: self.plateau_factor,
            early_stop_patience: self.early_stop_patience,
            seed: self.seed,
            augment: !self.no_augment,
            target_label: resolve_label(labels, &self.target_label)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ModelArgs {
    fn config(&self, data: &Dataset, with_inamp: bool) -> ClassifierConfig {
        let n = data.channels();
        let inamp = with_inamp.then(|| InAmpConfig {
            out_channels: self.out_channels,
            n_one_by_one_layers: self.layers,
            use_spatial_attention: !self.no_spatial_attention,
            use_channel_attention: !self.no_channel_attention,
            sa_kernel: self.sa_kernel,
            ca_reduction: self.ca_reduction,
            ..InAmpConfig::new(n)
        });
        ClassifierConfig {
            inamp,
            input_bands: n,
            input_size: data.size,
            n_classes: data.labels.len(),
            block_widths: self.block_widths.clone(),
        }
    }
}

/// Label by name or index.
fn resolve_label(labels: &[String], label: &str) -> Result<usize> {
    if let Some(i) = labels.iter().position(|l| l == label) {
        return Ok(i);
    }
    match label.parse::<usize>() {
        Ok(i) if i < labels.len() => Ok(i),
        _ => Err(Error::Config(format!(
            "unknown label {label:?}; labels are {}",
            labels.join(",")
        ))),
    }
}

fn load_data(manifest: &Path, bands: Option<&[String]>) -> Result<(Dataset, crate::data::DatasetManifest)> {
    let m = read_manifest(manifest)?;
    Ok((Dataset::load(&m, bands)?, m))
}

fn train_cmd(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let (data, manifest) = load_data(&a.data, a.model.bands.as_deref())?;
    let cfg = a.schedule.config(&data.labels)?;
    let splits = split_dataset(&manifest, cfg.seed)?;
    let model_cfg = a.model.config(&data, a.with_inamp);
    let mut model = build_classifier(model_cfg, &mut SeedStreams::new(cfg.seed).rng(Stream::Init, 0))?;
    say(
        out,
        &format!(
            "training {} parameters ({} in InAmp) on {} images\n",
            model.param_count(),
            model.inamp_param_count(),
            splits.train.len()
        ),
    )?;
    let report = train(&mut model, &data, &splits, &cfg)?;
    create_dir(&a.out)?;
    let saved = SavedModel {
        classifier: model,
        bands: data.bands.clone(),
        labels: data.labels.clone(),
    };
    save_model(&a.out.join("model.iamodel"), &saved)?;
    write_text(&a.out.join("report.txt"), &report.to_kv())?;
    write_text(&a.out.join("epochs.csv"), &report.epochs_csv())?;
    say(out, &report.to_kv())
}

fn eval_cmd(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let saved = load_model(&a.checkpoint)?;
    let (data, manifest) = load_data(&a.data, Some(&saved.bands))?;
    if data.labels != saved.labels {
        return Err(Error::Config(format!(
            "dataset labels {:?} differ from the model's {:?}",
            data.labels, saved.labels
        )));
    }
    let target = resolve_label(&data.labels, &a.target_label)?;
    let splits = split_dataset(&manifest, a.seed)?;
    let ev = evaluate(&saved.classifier, &data, splits.get(&a.split)?, target)?;
    let text = format!("split={}\n{}", a.split, ev.metrics.to_kv(""));
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write_text(&dir.join("metrics.txt"), &text)?;
        let mut csv = String::from("path,label_index,predicted_index\n");
        for ((&i, &t), &p) in ev.indices.iter().zip(&ev.truth).zip(&ev.predicted) {
            csv.push_str(&format!("{},{t},{p}\n", manifest.records[i].path.display()));
        }
        write_text(&dir.join("predictions.csv"), &csv)?;
    }
    say(out, &text)
}

fn ablate_cmd(a: AblateArgs, out: &mut dyn Write) -> Result<()> {
    let axis: AblationAxis = a.axis.parse()?;
    let (data, manifest) = load_data(&a.data, a.model.bands.as_deref())?;
    let cfg = a.schedule.config(&data.labels)?;
    let splits = split_dataset(&manifest, cfg.seed)?;
    let base = a.model.config(&data, true);
    let table = ablate(&base, axis, &data, &splits, &cfg)?;
    create_dir(&a.out)?;
    let name = axis.name();
    write_text(&a.out.join(format!("ablation_{name}.csv")), &table.to_csv())?;
    write_text(
        &a.out.join(format!("ablation_{name}_best.txt")),
        &format!("best={}\n", table.rows[table.best].variant),
    )?;
    say(out, &table.render())?;
    say(out, &format!("best={}\n", table.rows[table.best].variant))
}

fn viz_cmd(a: VizArgs, out: &mut dyn Write) -> Result<()> {
    let saved = load_model(&a.checkpoint)?;
    let m = &saved.classifier;
    let amp = m
        .net
        .inamp
        .as_ref()
        .ok_or_else(|| Error::Config("checkpoint has no InAmp module".into()))?;
    let img = read_msib(&a.image)?;
    let idx = saved
        .bands
        .iter()
        .map(|b| img.band_index(b))
        .collect::<Result<Vec<_>>>()?;
    let img = img.select_bands(&idx)?;
    m.check_input(&[1, img.height, img.width, img.channels()])?;

    let mut g = Graph::new();
    let p = m.params.bind(&mut g, false);
    let x = g.leaf(Tensor::from_vec(
        &[1, img.height, img.width, img.channels()],
        img.values,
    )?);
    let y = amp.forward(&mut g, &p, x)?;
    let outmap = g.take(y);
    let cfg = amp.config();
    let bands = a.bands.unwrap_or_else(|| (cfg.in_bands..cfg.out_channels).collect());
    let files = export_pseudo_bands(&outmap, &bands, &a.out)?;
    for f in files {
        say(out, &format!("{}\n", f.display()))?;
    }
    Ok(())
}

fn gradcheck_cmd(a: GradcheckArgs, out: &mut dyn Write) -> Result<()> {
    let module: GradModule = a.module.parse()?;
    let cases = run_gradcheck(module, a.seed)?;
    let mut worst = 0.0f64;
    for c in &cases {
        worst = worst.max(c.max_error);
        let status = if c.passed() { "pass" } else { "FAIL" };
        say(
            out,
            &format!("{status} {:<22} max_rel_error={:.3e}\n", c.name, c.max_error),
        )?;
    }
    say(out, &format!("max_rel_error={worst:.3e} tolerance={TOLERANCE:e}\n"))?;
    if cases.iter().all(|c| c.passed()) {
        Ok(())
    } else {
        Err(Error::GradCheckFailed {
            max_error: worst,
            tolerance: TOLERANCE,
        })
    }
}

fn index_cmd(a: IndexArgs, out: &mut dyn Write) -> Result<()> {
    let kind: IndexKind = a.kind.parse()?;
    let img = read_msib(&a.image)?;
    let map = BandMap {
        red: a.red,
        nir: a.nir,
        swir: a.swir,
    };
    let values = spectral_index(&img, kind, &map)?;
    let gray = GrayImage::from_range(&values, img.width, img.height, -1.0, 1.0)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_pgm(&a.out, &gray)?;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64;
    say(out, &format!("{} mean={mean:.4}\n", a.out.display()))
}
