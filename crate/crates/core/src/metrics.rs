//! Accuracy, Cohen's kappa and target-class miss rate from a confusion
//! matrix whose rows are true labels and columns predictions.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if let Some(row) = counts.iter().find(|r| r.len() != k) {
            return Err(Error::shape([k, k], [k, row.len()]));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, t: usize) -> u64 {
        self.counts[t].iter().sum()
    }

    pub fn col_sum(&self, p: usize) -> u64 {
        self.counts.iter().map(|r| r[p]).sum()
    }

    fn nonempty_total(&self) -> Result<u64> {
        match self.total() {
            0 => Err(Error::EmptyMatrix),
            n => Ok(n),
        }
    }
}

pub fn confusion_matrix(truth: &[usize], pred: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    if truth.len() != pred.len() {
        return Err(Error::shape([truth.len()], [pred.len()]));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in truth.iter().zip(pred) {
        if let Some(&label) = [t, p].iter().find(|&&l| l >= k) {
            return Err(Error::LabelOutOfRange { label, classes: k });
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let n = cm.nonempty_total()?;
    Ok(cm.trace() as f64 / n as f64)
}

/// `(p_o − p_e) / (1 − p_e)`.
pub fn kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let n = cm.nonempty_total()?;
    let chance: u128 = (0..cm.k()).map(|i| cm.row_sum(i) as u128 * cm.col_sum(i) as u128).sum();
    let n2 = n as u128 * n as u128;
    if chance == n2 {
        return Err(Error::DegenerateMarginals);
    }
    let po = cm.trace() as f64 / n as f64;
    let pe = chance as f64 / n2 as f64;
    Ok((po - pe) / (1.0 - pe))
}

/// Fraction of true-`target` samples predicted as something else.
pub fn fn_rate(cm: &ConfusionMatrix, target: usize) -> Result<f64> {
    if target >= cm.k() {
        return Err(Error::LabelOutOfRange {
            label: target,
            classes: cm.k(),
        });
    }
    let row = cm.row_sum(target);
    if row == 0 {
        return Err(Error::NoTargetSamples(target));
    }
    Ok((row - cm.counts[target][target]) as f64 / row as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub samples: u64,
    pub target: usize,
    pub accuracy: f64,
    /// `None` when every sample and prediction fall in one class.
    pub kappa: Option<f64>,
    pub fn_rate: f64,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn new(cm: ConfusionMatrix, target: usize) -> Result<Self> {
        let kappa = match kappa(&cm) {
            Ok(v) => Some(v),
            Err(Error::DegenerateMarginals) => None,
            Err(e) => return Err(e),
        };
        Ok(MetricsReport {
            samples: cm.total(),
            target,
            accuracy: accuracy(&cm)?,
            kappa,
            fn_rate: fn_rate(&cm, target)?,
            confusion: cm,
        })
    }

    /// `key=value` lines; `prefix` is prepended to each key.
    pub fn to_kv(&self, prefix: &str) -> String {
        let mut s = String::new();
        writeln!(s, "{prefix}samples={}", self.samples).unwrap();
        writeln!(s, "{prefix}target={}", self.target).unwrap();
        writeln!(s, "{prefix}accuracy={:.6}", self.accuracy).unwrap();
        writeln!(s, "{prefix}kappa={}", fmt_opt(self.kappa)).unwrap();
        writeln!(s, "{prefix}fn_rate={:.6}", self.fn_rate).unwrap();
        let rows: Vec<String> = self
            .confusion
            .counts
            .iter()
            .map(|r| r.iter().map(u64::to_string).collect::<Vec<_>>().join(" "))
            .collect();
        writeln!(s, "{prefix}confusion={}", rows.join(";")).unwrap();
        s
    }

    /// `variant,accuracy,kappa,fn_rate` row.
    pub fn csv_row(&self, variant: &str) -> String {
        format!(
            "{variant},{:.6},{},{:.6}",
            self.accuracy,
            fmt_opt(self.kappa),
            self.fn_rate
        )
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"))
}
