use std::fmt::Write as _;
use std::str::FromStr;

use super::{train, SeedStreams, Stream, TrainConfig, TrainReport};
use crate::data::{Dataset, Splits};
use crate::error::{Error, Result};
use crate::inamp::InAmpConfig;
use crate::metrics::MetricsReport;
use crate::model::{build_classifier, ClassifierConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AblationAxis {
    /// Neither, channel, spatial, or both attentions.
    Attention,
    /// 1 to 4 stacked 1×1 layers.
    Layers,
    /// 16, 24, 32, 40 or 48 output channels.
    Channels,
}

impl FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attention" => Ok(AblationAxis::Attention),
            "layers" => Ok(AblationAxis::Layers),
            "channels" => Ok(AblationAxis::Channels),
            _ => Err(Error::Config(format!("unknown axis {s:?} (attention|layers|channels)"))),
        }
    }
}

impl AblationAxis {
    pub fn name(self) -> &'static str {
        match self {
            AblationAxis::Attention => "attention",
            AblationAxis::Layers => "layers",
            AblationAxis::Channels => "channels",
        }
    }

    /// Row labels with the InAmp configuration of each grid point.
    pub fn variants(self, base: &InAmpConfig) -> Vec<(String, InAmpConfig)> {
        let with = |f: &dyn Fn(&mut InAmpConfig)| {
            let mut c = base.clone();
            c.layer_widths = None;
            f(&mut c);
            c
        };
        match self {
            AblationAxis::Attention => [
                ("None", false, false),
                ("CA", true, false),
                ("SA", false, true),
                ("CA & SA", true, true),
            ]
            .into_iter()
            .map(|(name, ca, sa)| {
                let c = with(&|c| {
                    c.use_channel_attention = ca;
                    c.use_spatial_attention = sa;
                });
                (name.to_string(), c)
            })
            .collect(),
            AblationAxis::Layers => (1..=4)
                .map(|n| (n.to_string(), with(&|c| c.n_one_by_one_layers = n)))
                .collect(),
            AblationAxis::Channels => [16, 24, 32, 40, 48]
                .into_iter()
                .map(|ch| (ch.to_string(), with(&|c| c.out_channels = ch)))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: String,
    pub metrics: MetricsReport,
    pub report: TrainReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationTable {
    pub axis: AblationAxis,
    pub rows: Vec<AblationRow>,
    /// Row with the highest test accuracy, earliest on ties.
    pub best: usize,
}

impl AblationTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("variant,accuracy,kappa,fn_rate\n");
        for r in &self.rows {
            writeln!(s, "{}", r.metrics.csv_row(&r.variant)).unwrap();
        }
        s
    }

    /// Aligned table with the best row marked `*`.
    pub fn render(&self) -> String {
        let mut s = format!(
            "{:<10} {:>9} {:>9} {:>9}\n",
            self.axis.name(),
            "accuracy",
            "kappa",
            "fn_rate"
        );
        for (i, r) in self.rows.iter().enumerate() {
            let m = &r.metrics;
            let kappa = m.kappa.map_or_else(|| "nan".into(), |k| format!("{k:.4}"));
            let mark = if i == self.best { " *" } else { "" };
            writeln!(
                s,
                "{:<10} {:>9.4} {:>9} {:>9.4}{mark}",
                r.variant, m.accuracy, kappa, m.fn_rate
            )
            .unwrap();
        }
        s
    }
}

/// Trains one InAmp classifier per grid point of `axis`, all from the same
/// seed and splits.
pub fn ablate(
    base: &ClassifierConfig,
    axis: AblationAxis,
    data: &Dataset,
    splits: &Splits,
    cfg: &TrainConfig,
) -> Result<AblationTable> {
    let base_amp = base.inamp.clone().unwrap_or_else(|| InAmpConfig::new(base.input_bands));
    let mut rows = Vec::new();
    for (variant, amp) in axis.variants(&base_amp) {
        let model_cfg = ClassifierConfig {
            inamp: Some(amp),
            ..base.clone()
        };
        let mut model = build_classifier(model_cfg, &mut SeedStreams::new(cfg.seed).rng(Stream::Init, 0))?;
        let report = train(&mut model, data, splits, cfg)?;
        let metrics = report.test.clone().ok_or(Error::EmptySplit("test"))?;
        rows.push(AblationRow {
            variant,
            metrics,
            report,
        });
    }
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.metrics.accuracy > rows[best].metrics.accuracy {
            best = i;
        }
    }
    Ok(AblationTable { axis, rows, best })
}
