//! Average episodic reward, normalised performance, discriminator accuracy
//! and CSV reports.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::EnvName;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub returns: Vec<f64>,
    pub aer_mean: f64,
    pub aer_std: f64,
    /// Present when a reference band was available.
    pub performance: Option<f64>,
}

impl EvalResult {
    pub fn new(returns: Vec<f64>, band: Option<&ReferenceBand>) -> Result<Self> {
        let (aer_mean, aer_std) = aer(&returns)?;
        let performance = band.map(|b| performance(&returns, b)).transpose()?;
        Ok(EvalResult {
            returns,
            aer_mean,
            aer_std,
            performance,
        })
    }

    pub fn min(&self) -> f64 {
        self.returns.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.returns
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Random-policy and teacher anchors for normalised performance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBand {
    pub random_mean: f64,
    pub expert_mean: f64,
}

impl ReferenceBand {
    pub fn new(random_mean: f64, expert_mean: f64) -> Result<Self> {
        let band = ReferenceBand {
            random_mean,
            expert_mean,
        };
        band.check()?;
        Ok(band)
    }

    fn check(&self) -> Result<()> {
        if !(self.random_mean.is_finite() && self.expert_mean.is_finite())
            || self.random_mean == self.expert_mean
        {
            return Err(Error::Validation(format!(
                "degenerate reference band: random {} expert {}",
                self.random_mean, self.expert_mean
            )));
        }
        Ok(())
    }
}

/// Mean and population standard deviation.
pub fn aer(returns: &[f64]) -> Result<(f64, f64)> {
    if returns.is_empty() {
        return Err(Error::Usage("no returns to average".into()));
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Mean over episodes of `(r - random) / (expert - random)`. Not clipped:
/// worse than random is negative and better than the teacher exceeds 1.
pub fn performance(returns: &[f64], band: &ReferenceBand) -> Result<f64> {
    band.check()?;
    if returns.is_empty() {
        return Err(Error::Usage("no returns to score".into()));
    }
    let span = band.expert_mean - band.random_mean;
    let total: f64 = returns.iter().map(|r| (r - band.random_mean) / span).sum();
    Ok(total / returns.len() as f64)
}

/// Balanced accuracy at threshold 0.5 given discriminator scores on
/// teacher (positive) and policy (negative) windows.
pub fn balanced_accuracy(teacher_scores: &[f64], policy_scores: &[f64]) -> Result<f64> {
    if teacher_scores.is_empty() || policy_scores.is_empty() {
        return Err(Error::Usage("balanced accuracy needs both classes".into()));
    }
    let tpr =
        teacher_scores.iter().filter(|&&s| s >= 0.5).count() as f64 / teacher_scores.len() as f64;
    let tnr =
        policy_scores.iter().filter(|&&s| s < 0.5).count() as f64 / policy_scores.len() as f64;
    Ok(0.5 * (tpr + tnr))
}

/// Formats with 17 significant digits so values round-trip exactly.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.16e}")
    }
}

/// Overall comparison row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: String,
    pub env: String,
    pub aer_mean: f64,
    pub aer_std: f64,
    pub performance: f64,
}

/// Sample-efficiency row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub env: String,
    pub n_trajectories: usize,
    #[serde(rename = "P")]
    pub performance: f64,
    pub aer_avg: f64,
    pub aer_min: f64,
    pub aer_max: f64,
    pub sd: f64,
}

/// Imitation-behaviour row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviourRow {
    pub env: String,
    pub d_accuracy_mean: f64,
    pub d_accuracy_std: f64,
    pub g_loss: f64,
    pub policy_performance: f64,
}

pub const RESULT_COLUMNS: [&str; 5] = ["algorithm", "env", "aer_mean", "aer_std", "performance"];
pub const SWEEP_COLUMNS: [&str; 7] = [
    "env",
    "n_trajectories",
    "P",
    "aer_avg",
    "aer_min",
    "aer_max",
    "sd",
];
pub const BEHAVIOUR_COLUMNS: [&str; 5] = [
    "env",
    "d_accuracy_mean",
    "d_accuracy_std",
    "g_loss",
    "policy_performance",
];

/// Teacher-set sizes of the sample-efficiency sweep.
pub const SWEEP_COUNTS: [usize; 5] = [1, 25, 50, 75, 100];

trait CsvRow {
    fn fields(&self) -> Vec<String>;
}

impl CsvRow for ResultRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.algorithm.clone(),
            self.env.clone(),
            fmt_float(self.aer_mean),
            fmt_float(self.aer_std),
            fmt_float(self.performance),
        ]
    }
}

impl CsvRow for SweepRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.env.clone(),
            self.n_trajectories.to_string(),
            fmt_float(self.performance),
            fmt_float(self.aer_avg),
            fmt_float(self.aer_min),
            fmt_float(self.aer_max),
            fmt_float(self.sd),
        ]
    }
}

impl CsvRow for BehaviourRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.env.clone(),
            fmt_float(self.d_accuracy_mean),
            fmt_float(self.d_accuracy_std),
            fmt_float(self.g_loss),
            fmt_float(self.policy_performance),
        ]
    }
}

fn write_rows<R: CsvRow>(path: &Path, header: &[&str], rows: &[R]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(r.fields()).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_rows(path, &RESULT_COLUMNS, rows)
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_rows(path, &SWEEP_COLUMNS, rows)
}

pub fn write_behaviour(path: &Path, rows: &[BehaviourRow]) -> Result<()> {
    write_rows(path, &BEHAVIOUR_COLUMNS, rows)
}

/// Reads any of the report CSVs back into typed rows.
pub fn read_rows<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<R>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Reported numbers for adversarial baselines that are not re-run here.
/// Rows are labelled "(published)".
pub fn published_rows() -> Vec<ResultRow> {
    let table: [(&str, EnvName, f64, f64, f64); 9] = [
        ("GAIL", EnvName::CartPole, 302.03, 158.96, 0.41),
        ("GAIL", EnvName::MountainCar, -200.0, 0.0, 0.0),
        ("GAIL", EnvName::Acrobot, -274.27, 116.85, 0.54),
        ("GAIfO", EnvName::CartPole, 500.0, 0.0, 1.0),
        ("GAIfO", EnvName::MountainCar, -200.0, 0.0, 0.0),
        ("GAIfO", EnvName::Acrobot, -128.20, 15.88, 0.85),
        ("IUPE", EnvName::CartPole, 500.0, 0.0, 1.0),
        ("IUPE", EnvName::MountainCar, -166.97, 18.34, 0.32),
        ("IUPE", EnvName::Acrobot, -75.65, 12.85, 1.0),
    ];
    table
        .into_iter()
        .map(|(alg, env, m, s, p)| ResultRow {
            algorithm: format!("{alg} (published)"),
            env: env.to_string(),
            aer_mean: m,
            aer_std: s,
            performance: p,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aer_examples() {
        assert_eq!(aer(&[-200.0, -200.0]).unwrap(), (-200.0, 0.0));
        assert_eq!(aer(&[0.0]).unwrap(), (0.0, 0.0));
        assert_eq!(aer(&[1.0, 3.0]).unwrap(), (2.0, 1.0));
        assert!(aer(&[]).is_err());
    }

    #[test]
    fn performance_anchors() {
        let band = ReferenceBand::new(-200.0, -98.03).unwrap();
        assert_eq!(performance(&[-98.03; 4], &band).unwrap(), 1.0);
        assert_eq!(performance(&[-200.0; 4], &band).unwrap(), 0.0);
        let mid = performance(&[-149.015], &band).unwrap();
        assert!((mid - 0.5).abs() <= 0.01);
        assert!(performance(&[-250.0], &band).unwrap() < 0.0);
        assert!(ReferenceBand::new(1.0, 1.0).is_err());
    }

    #[test]
    fn performance_is_affine_invariant() {
        let returns = [-120.0, -101.5, -180.25, -99.0];
        let band = ReferenceBand::new(-200.0, -98.03).unwrap();
        let p = performance(&returns, &band).unwrap();
        for (a, b) in [(2.0, 7.0), (0.5, -300.0), (13.0, 1e3)] {
            let f = |x: f64| a * x + b;
            let moved: Vec<f64> = returns.iter().map(|&r| f(r)).collect();
            let band2 = ReferenceBand::new(f(band.random_mean), f(band.expert_mean)).unwrap();
            assert!((performance(&moved, &band2).unwrap() - p).abs() <= 1e-9);
        }
    }

    #[test]
    fn balanced_accuracy_cases() {
        assert_eq!(balanced_accuracy(&[1.0; 8], &[1.0; 8]).unwrap(), 0.5);
        assert_eq!(balanced_accuracy(&[0.9; 8], &[0.1; 8]).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&[0.1; 3], &[0.9; 5]).unwrap(), 0.0);
        assert!(balanced_accuracy(&[], &[0.5]).is_err());
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        for x in [-98.03, 0.1, 1.0 / 3.0, 500.0, 1e-9, 6.02e23, -2.5e-7] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            let digits = s
                .trim_start_matches('-')
                .split('e')
                .next()
                .unwrap()
                .replace('.', "");
            assert_eq!(digits.trim_start_matches('0').len(), 17, "{s}");
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_results(&p, &[]).unwrap();
        assert_eq!(
            fs::read_to_string(&p).unwrap(),
            "algorithm,env,aer_mean,aer_std,performance\n"
        );
    }

    #[test]
    fn rows_roundtrip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let row = SweepRow {
            env: "MountainCar-v0".into(),
            n_trajectories: 25,
            performance: 0.87123456789,
            aer_avg: -109.96,
            aer_min: -114.4,
            aer_max: -103.6,
            sd: 4.21,
        };
        write_sweep(&p, std::slice::from_ref(&row)).unwrap();
        assert_eq!(read_rows::<SweepRow>(&p).unwrap(), vec![row]);

        let q = dir.path().join("b.csv");
        let b = BehaviourRow {
            env: "CartPole-v1".into(),
            d_accuracy_mean: 0.4944,
            d_accuracy_std: 0.0112,
            g_loss: 0.0015,
            policy_performance: 1.0,
        };
        write_behaviour(&q, std::slice::from_ref(&b)).unwrap();
        assert_eq!(read_rows::<BehaviourRow>(&q).unwrap(), vec![b]);
    }

    #[test]
    fn published_rows_are_labelled() {
        let rows = published_rows();
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().all(|r| r.algorithm.ends_with("(published)")));
    }
}
