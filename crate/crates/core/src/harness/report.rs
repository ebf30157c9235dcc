use std::fmt::Write as _;
use std::time::Duration;

use crate::metrics::MetricsReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    EarlyStopping,
    Divergence,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::MaxEpochs => "max_epochs",
            StopReason::EarlyStopping => "early_stopping",
            StopReason::Divergence => "divergence",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Zero-based epoch with the highest val accuracy (earliest on ties).
    pub best_epoch: usize,
    pub stop_reason: StopReason,
    pub wall_time: Duration,
    /// Test metrics of the best-epoch weights.
    pub test: Option<MetricsReport>,
}

/// Wall time is not compared.
impl PartialEq for TrainReport {
    fn eq(&self, other: &Self) -> bool {
        self.epochs == other.epochs
            && self.best_epoch == other.best_epoch
            && self.stop_reason == other.stop_reason
            && self.test == other.test
    }
}

impl TrainReport {
    /// Summary as `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "epochs_run={}", self.epochs.len()).unwrap();
        writeln!(s, "best_epoch={}", self.best_epoch).unwrap();
        writeln!(s, "stop_reason={}", self.stop_reason.as_str()).unwrap();
        if let Some(best) = self.epochs.get(self.best_epoch) {
            writeln!(s, "best_val_accuracy={:.6}", best.val_accuracy).unwrap();
        }
        if let Some(last) = self.epochs.last() {
            writeln!(s, "final_lr={}", last.lr).unwrap();
        }
        if let Some(t) = &self.test {
            s.push_str(&t.to_kv("test_"));
        }
        writeln!(s, "wall_time_secs={:.3}", self.wall_time.as_secs_f64()).unwrap();
        s
    }

    pub fn epochs_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,train_accuracy,val_loss,val_accuracy,lr\n");
        for (i, e) in self.epochs.iter().enumerate() {
            writeln!(
                s,
                "{i},{:.6},{:.6},{:.6},{:.6},{}",
                e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy, e.lr
            )
            .unwrap();
        }
        s
    }
}
