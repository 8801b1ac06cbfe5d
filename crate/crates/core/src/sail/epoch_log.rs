use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::fmt_float;

/// Metrics of one completed epoch. Phases that did not run report NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub idm_loss: f64,
    pub idm_holdout_accuracy: f64,
    pub policy_loss: f64,
    pub generator_loss: f64,
    pub discriminator_loss: f64,
    pub discriminator_accuracy: f64,
    pub eval_aer_mean: f64,
    pub eval_aer_std: f64,
    pub eval_performance: f64,
    pub sample_set_size: usize,
    pub appended: usize,
}

pub const LOG_COLUMNS: [&str; 12] = [
    "epoch",
    "idm_loss",
    "idm_holdout_accuracy",
    "policy_loss",
    "generator_loss",
    "discriminator_loss",
    "discriminator_accuracy",
    "eval_aer_mean",
    "eval_aer_std",
    "eval_performance",
    "sample_set_size",
    "appended",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub records: Vec<EpochRecord>,
}

impl MetricsLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record with the highest evaluation AER; the earliest wins ties.
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records
            .iter()
            .fold(None, |best: Option<&EpochRecord>, r| match best {
                Some(b) if b.eval_aer_mean >= r.eval_aer_mean => Some(b),
                _ => Some(r),
            })
    }

    pub fn to_csv(&self) -> String {
        let mut out = LOG_COLUMNS.join(",");
        out.push('\n');
        for r in &self.records {
            let fields = [
                r.epoch.to_string(),
                fmt_float(r.idm_loss),
                fmt_float(r.idm_holdout_accuracy),
                fmt_float(r.policy_loss),
                fmt_float(r.generator_loss),
                fmt_float(r.discriminator_loss),
                fmt_float(r.discriminator_accuracy),
                fmt_float(r.eval_aer_mean),
                fmt_float(r.eval_aer_std),
                fmt_float(r.eval_performance),
                r.sample_set_size.to_string(),
                r.appended.to_string(),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
