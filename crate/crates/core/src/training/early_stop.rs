use serde::{Deserialize, Serialize};

/// Tracks the best validation metric and signals when to stop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub patience: u64,
    pub best_epoch: u64,
    pub best_metric: f64,
}

impl EarlyStopping {
    pub fn new(patience: u64) -> Self {
        EarlyStopping {
            patience,
            best_epoch: 0,
            best_metric: 0.0,
        }
    }

    /// Records `metric` for `epoch`; true if it is a strict improvement.
    pub fn observe(&mut self, epoch: u64, metric: f64) -> bool {
        if metric > self.best_metric || self.best_epoch == 0 {
            self.best_metric = metric;
            self.best_epoch = epoch;
            true
        } else {
            false
        }
    }

    pub fn should_stop(&self, epoch: u64) -> bool {
        self.best_epoch > 0 && epoch >= self.best_epoch + self.patience
    }
}
