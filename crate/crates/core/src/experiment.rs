//! Sweep grids over architecture, encoding, gate, depth and target, and the
//! per-cell train-and-evaluate step shared by the command-line tool and the
//! acceptance suite.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cavity::{CavitySpec, WidebandScattering};
use crate::encoding::EncodingKind;
use crate::error::{Result, WpnnError};
use crate::model::{ArchitectureMode, WpnnModel};
use crate::tasks::{RegressionTask, REFERENCE_G};
use crate::timegate::{GateSetting, Tau};
use crate::training::{init_weights, train, TrainConfig, TrainTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CavitySource {
    Synth(CavitySpec),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSource {
    /// Generated on the fly: every cut-off with seeds `base_seed..base_seed + count`.
    Generate { cutoffs: Vec<f64>, count: usize, base_seed: u64, g: f64 },
    Fixtures(Vec<PathBuf>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub cavity: CavitySource,
    pub encodings: Vec<EncodingKind>,
    pub taus: Vec<Tau>,
    pub depths: Vec<usize>,
    pub modes: Vec<ArchitectureMode>,
    pub tasks: TaskSource,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("encodings", self.encodings.is_empty()),
            ("taus", self.taus.is_empty()),
            ("depths", self.depths.is_empty()),
            ("modes", self.modes.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(WpnnError::Config(format!("sweep list {name} is empty")));
        }
        if self.depths.contains(&0) {
            return Err(WpnnError::Config("depth must be at least 1".into()));
        }
        match &self.tasks {
            TaskSource::Generate { cutoffs, count, g, .. } => {
                if cutoffs.is_empty() || *count == 0 {
                    return Err(WpnnError::Config("task set is empty".into()));
                }
                if cutoffs.iter().any(|c| !(*c > 0.0 && *c < 1.0)) || !(*g > 0.0) {
                    return Err(WpnnError::Config("cut-offs must lie in (0, 1) and g must be positive".into()));
                }
            }
            TaskSource::Fixtures(paths) => {
                if paths.is_empty() {
                    return Err(WpnnError::Config("fixture list is empty".into()));
                }
            }
        }
        if let CavitySource::Synth(spec) = &self.cavity {
            spec.validate()?;
        }
        Ok(())
    }

    /// Cells in a fixed order: task outermost, then encoding, mode, tau, depth.
    pub fn cells(&self, n_tasks: usize) -> Vec<Cell> {
        let mut out = Vec::new();
        for task_index in 0..n_tasks {
            for &encoding in &self.encodings {
                for &mode in &self.modes {
                    for &tau in &self.taus {
                        for &depth in &self.depths {
                            out.push(Cell { encoding, mode, tau, depth, task_index });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn default_task_source() -> TaskSource {
        TaskSource::Generate { cutoffs: vec![0.02], count: 1, base_seed: 0, g: REFERENCE_G }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub encoding: EncodingKind,
    pub mode: ArchitectureMode,
    pub tau: Tau,
    pub depth: usize,
    pub task_index: usize,
}

pub struct CellOutcome {
    pub model: WpnnModel,
    pub trace: TrainTrace,
}

/// Initializes weights from `cfg.seed` and trains on `task`.
pub fn run_cell(cavity: &Arc<WidebandScattering>, task: &RegressionTask, cell: &Cell, cfg: &TrainConfig) -> Result<CellOutcome> {
    let n_s = cavity.partition().n_s();
    let weights = init_weights(n_s, cell.depth, cell.mode, cell.encoding, cfg.weight_init, cfg.seed)?;
    let gate = GateSetting { tau: cell.tau, window: Default::default() };
    let model = WpnnModel::new(cavity.clone(), cell.encoding, gate, weights)?;
    let (model, trace) = train(&model, task, cfg)?;
    Ok(CellOutcome { model, trace })
}

/// One row of a sweep's result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub architecture: ArchitectureMode,
    pub encoding: EncodingKind,
    pub tau: Tau,
    pub depth: usize,
    pub cutoff: f64,
    pub target_seed: u64,
    pub status: String,
    pub train_nmse: Option<f64>,
    pub test_nmse: Option<f64>,
    pub runtime_s: Option<f64>,
    pub trace_path: Option<String>,
    pub checkpoint_path: Option<String>,
    pub error: Option<String>,
}

impl SweepRecord {
    pub const CSV_HEADER: &'static str =
        "architecture,encoding,tau,depth,cutoff,target_seed,status,train_nmse,test_nmse,runtime_s,trace_path,checkpoint_path,error";

    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn to_csv_row(&self) -> String {
        let num = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        let text = |v: &Option<String>| v.as_deref().map_or(String::new(), csv_escape);
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.architecture,
            self.encoding,
            self.tau,
            self.depth,
            self.cutoff,
            self.target_seed,
            self.status,
            num(self.train_nmse),
            num(self.test_nmse),
            num(self.runtime_s),
            text(&self.trace_path),
            text(&self.checkpoint_path),
            text(&self.error)
        )
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Median (mean of the middle pair for even counts).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt())
}

/// Aggregate over target functions of one (architecture, encoding, tau,
/// depth, cutoff) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub architecture: ArchitectureMode,
    pub encoding: EncodingKind,
    pub tau: Tau,
    pub depth: usize,
    pub cutoff: f64,
    pub completed: usize,
    pub failed: usize,
    pub median_train_nmse: Option<f64>,
    pub median_test_nmse: Option<f64>,
    pub std_test_nmse: Option<f64>,
}

impl SummaryRow {
    pub const CSV_HEADER: &'static str = "architecture,encoding,tau,depth,cutoff,completed,failed,median_train_nmse,median_test_nmse,std_test_nmse";

    pub fn to_csv_row(&self) -> String {
        let num = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.architecture,
            self.encoding,
            self.tau,
            self.depth,
            self.cutoff,
            self.completed,
            self.failed,
            num(self.median_train_nmse),
            num(self.median_test_nmse),
            num(self.std_test_nmse)
        )
    }
}

/// Groups records by cell, keeping first-appearance order.
pub fn summarize(records: &[SweepRecord]) -> Vec<SummaryRow> {
    let mut rows: Vec<(SummaryRow, Vec<f64>, Vec<f64>)> = Vec::new();
    for r in records {
        let same = |s: &SummaryRow| {
            s.architecture == r.architecture && s.encoding == r.encoding && s.tau == r.tau && s.depth == r.depth && s.cutoff == r.cutoff
        };
        let idx = match rows.iter().position(|(s, _, _)| same(s)) {
            Some(i) => i,
            None => {
                rows.push((
                    SummaryRow {
                        architecture: r.architecture,
                        encoding: r.encoding,
                        tau: r.tau,
                        depth: r.depth,
                        cutoff: r.cutoff,
                        completed: 0,
                        failed: 0,
                        median_train_nmse: None,
                        median_test_nmse: None,
                        std_test_nmse: None,
                    },
                    vec![],
                    vec![],
                ));
                rows.len() - 1
            }
        };
        let (row, train, test) = &mut rows[idx];
        match (r.ok(), r.train_nmse, r.test_nmse) {
            (true, Some(tr), Some(te)) => {
                row.completed += 1;
                train.push(tr);
                test.push(te);
            }
            _ => row.failed += 1,
        }
    }
    rows.into_iter()
        .map(|(mut row, train, test)| {
            row.median_train_nmse = median(&train);
            row.median_test_nmse = median(&test);
            row.std_test_nmse = std_dev(&test);
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(test: f64) -> SweepRecord {
        SweepRecord {
            architecture: ArchitectureMode::SharedWeights,
            encoding: EncodingKind::Phase,
            tau: Tau::Infinite,
            depth: 1,
            cutoff: 0.02,
            target_seed: 0,
            status: "ok".into(),
            train_nmse: Some(test / 2.0),
            test_nmse: Some(test),
            runtime_s: Some(1.0),
            trace_path: None,
            checkpoint_path: None,
            error: None,
        }
    }

    #[test]
    fn median_and_std() {
        assert_eq!(median(&[1.0, 2.0, 30.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        assert_eq!(std_dev(&[5.0]), Some(0.0));
    }

    #[test]
    fn summary_groups_cells() {
        let mut other = record(9.0);
        other.depth = 2;
        let mut failed = record(0.0);
        failed.status = "failed".into();
        failed.test_nmse = None;
        let rows = summarize(&[record(1.0), record(2.0), other, record(30.0), failed]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].median_test_nmse, Some(2.0));
        assert_eq!(rows[0].completed, 3);
        assert_eq!(rows[0].failed, 1);
        assert_eq!(rows[1].std_test_nmse, Some(0.0));
    }

    #[test]
    fn csv_rows_escape_text() {
        let mut r = record(1.0);
        r.error = Some("bad, \"thing\"".into());
        assert!(r.to_csv_row().ends_with(",\"bad, \"\"thing\"\"\""));
        assert_eq!(r.to_csv_row().split(',').next(), Some("shared"));
    }

    #[test]
    fn cell_enumeration_and_validation() {
        let cfg = ExperimentConfig {
            name: "t".into(),
            cavity: CavitySource::Synth(CavitySpec::default()),
            encodings: vec![EncodingKind::Phase],
            taus: vec![Tau::Infinite, Tau::Finite(2e-11)],
            depths: vec![1, 2],
            modes: vec![ArchitectureMode::SharedWeights],
            tasks: ExperimentConfig::default_task_source(),
            train: TrainConfig::default(),
            output_dir: None,
            seed: 0,
        };
        cfg.validate().unwrap();
        assert_eq!(cfg.cells(1).len(), 4);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), cfg);
        assert!(ExperimentConfig { depths: vec![], ..cfg.clone() }.validate().is_err());
    }
}
