use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use wpnn_core::cavity::WidebandScattering;
use wpnn_core::experiment::{run_cell, summarize, CavitySource, Cell, ExperimentConfig, SummaryRow, SweepRecord, TaskSource};
use wpnn_core::tasks::{generate_task, task_seeds, RegressionTask};
use wpnn_core::training::TrainConfig;

use crate::error::{CliError, CliResult};
use crate::store;

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Concurrent sweep cells (default: logical cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Retrain cells even if a completed record exists.
    #[arg(long)]
    pub fresh: bool,
}

/// Everything a cell's result depends on. Its hash names the cell directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellKey {
    pub cell: Cell,
    pub cavity_hash: String,
    pub fixture_hash: String,
    pub train: TrainConfig,
}

impl CellKey {
    pub fn digest(&self) -> CliResult<String> {
        let mut key = self.clone();
        key.cell.task_index = 0;
        Ok(store::sha256_hex(serde_json::to_string(&key)?.as_bytes())[..16].to_string())
    }
}

pub const CAVITY_SOURCE_FILE: &str = "cavity_source.json";
pub const RECORD_FILE: &str = "record.json";

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads the config and makes its file references absolute against the
/// config's directory.
pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let mut cfg: ExperimentConfig = serde_json::from_str(&store::read_string(path)?)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let base = std::fs::canonicalize(if base.as_os_str().is_empty() { Path::new(".") } else { &base })?;
    if let CavitySource::File(p) = &mut cfg.cavity {
        *p = resolve_path(&base, p);
        if !p.exists() {
            return Err(CliError::Config(format!("cavity file {} does not exist", p.display())));
        }
    }
    if let TaskSource::Fixtures(paths) = &mut cfg.tasks {
        for p in paths.iter_mut() {
            *p = resolve_path(&base, p);
            if !p.exists() {
                return Err(CliError::Config(format!("fixture {} does not exist", p.display())));
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_tasks(source: &TaskSource) -> CliResult<Vec<RegressionTask>> {
    match source {
        TaskSource::Generate { cutoffs, count, base_seed, g } => {
            let mut out = Vec::new();
            for &fc in cutoffs {
                for seed in task_seeds(*base_seed, *count) {
                    out.push(generate_task(fc, *g, seed)?);
                }
            }
            Ok(out)
        }
        TaskSource::Fixtures(paths) => paths
            .iter()
            .map(|p| {
                let task: RegressionTask = serde_json::from_str(&store::read_string(p)?)?;
                task.validate()?;
                Ok(task)
            })
            .collect(),
    }
}

fn failed_record(cell: &Cell, task: &RegressionTask, error: String) -> SweepRecord {
    SweepRecord {
        architecture: cell.mode,
        encoding: cell.encoding,
        tau: cell.tau,
        depth: cell.depth,
        cutoff: task.cutoff,
        target_seed: task.seed,
        status: "failed".into(),
        train_nmse: None,
        test_nmse: None,
        runtime_s: None,
        trace_path: None,
        checkpoint_path: None,
        error: Some(error),
    }
}

struct Sweep<'a> {
    dir: PathBuf,
    cavity: Arc<WidebandScattering>,
    cavity_hash: String,
    tasks: &'a [RegressionTask],
    fixture_hashes: Vec<String>,
    train: TrainConfig,
    fresh: bool,
}

impl Sweep<'_> {
    fn run_one(&self, cell: &Cell) -> CliResult<(SweepRecord, bool)> {
        let task = &self.tasks[cell.task_index];
        let key = CellKey { cell: *cell, cavity_hash: self.cavity_hash.clone(), fixture_hash: self.fixture_hashes[cell.task_index].clone(), train: self.train.clone() };
        let rel = PathBuf::from("cells").join(key.digest()?);
        let cell_dir = self.dir.join(&rel);
        let record_path = cell_dir.join(RECORD_FILE);
        if !self.fresh && record_path.exists() {
            let record: SweepRecord = serde_json::from_str(&store::read_string(&record_path)?)?;
            if record.ok() {
                return Ok((record, true));
            }
        }
        let start = Instant::now();
        let record = match run_cell(&self.cavity, task, cell, &self.train) {
            Ok(outcome) => {
                let mut ck = outcome.model.to_checkpoint();
                ck.cavity = Some(format!("sha256:{}", self.cavity_hash));
                store::write_json(&cell_dir.join("key.json"), &key)?;
                store::write_atomic(&cell_dir.join("task.json"), task.to_json()?.as_bytes())?;
                store::write_atomic(&cell_dir.join("checkpoint.json"), ck.to_json()?.as_bytes())?;
                store::write_atomic(&cell_dir.join("trace.csv"), outcome.trace.to_csv().as_bytes())?;
                store::write_json(&cell_dir.join("trace.json"), &outcome.trace)?;
                SweepRecord {
                    architecture: cell.mode,
                    encoding: cell.encoding,
                    tau: cell.tau,
                    depth: cell.depth,
                    cutoff: task.cutoff,
                    target_seed: task.seed,
                    status: "ok".into(),
                    train_nmse: Some(outcome.trace.final_train_nmse),
                    test_nmse: Some(outcome.trace.final_test_nmse),
                    runtime_s: Some(start.elapsed().as_secs_f64()),
                    trace_path: Some(rel.join("trace.csv").to_string_lossy().into_owned()),
                    checkpoint_path: Some(rel.join("checkpoint.json").to_string_lossy().into_owned()),
                    error: None,
                }
            }
            Err(e) => failed_record(cell, task, e.to_string()),
        };
        store::write_json(&record_path, &record)?;
        Ok((record, false))
    }
}

pub fn write_tables(dir: &Path, records: &[SweepRecord]) -> CliResult<Vec<SummaryRow>> {
    store::write_csv(&dir.join("results.csv"), SweepRecord::CSV_HEADER, records.iter().map(SweepRecord::to_csv_row))?;
    store::write_json(&dir.join("results.json"), &records)?;
    let summary = summarize(records);
    store::write_csv(&dir.join("summary.csv"), SummaryRow::CSV_HEADER, summary.iter().map(SummaryRow::to_csv_row))?;
    store::write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn run(root: &Path, args: TrainArgs) -> CliResult<()> {
    let cfg = load_config(&args.config)?;
    let dir = root.join(cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from(&cfg.name)));
    let tasks = load_tasks(&cfg.tasks)?;
    let fixture_hashes = tasks.iter().map(|t| Ok(store::sha256_hex(t.to_json()?.as_bytes()))).collect::<CliResult<Vec<_>>>()?;
    let cavity_hash = store::cavity_hash(&cfg.cavity)?;
    let cavity = store::load_cavity(&cfg.cavity)?;
    store::write_json(&dir.join("config.json"), &cfg)?;
    store::write_json(&dir.join(CAVITY_SOURCE_FILE), &cfg.cavity)?;

    let mut train = cfg.train.clone();
    train.seed = train.seed.wrapping_add(cfg.seed);
    let sweep = Sweep { dir: dir.clone(), cavity, cavity_hash, tasks: &tasks, fixture_hashes, train, fresh: args.fresh };
    let cells = cfg.cells(tasks.len());
    let workers = args.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| CliError::Config(e.to_string()))?;
    println!("sweep {}: {} cells on {workers} workers -> {}", cfg.name, cells.len(), dir.display());
    let results: Vec<CliResult<(SweepRecord, bool)>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let out = sweep.run_one(cell);
                if let Ok((r, reused)) = &out {
                    let what = if *reused { "reused" } else { r.status.as_str() };
                    eprintln!(
                        "  {} {} tau={} L={} fc={} seed={}: {what}{}",
                        r.architecture,
                        r.encoding,
                        r.tau,
                        r.depth,
                        r.cutoff,
                        r.target_seed,
                        r.test_nmse.map_or(String::new(), |v| format!(" test NMSE {v:.3e}"))
                    );
                }
                out
            })
            .collect()
    });
    let records = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    let reused = records.iter().filter(|(_, r)| *r).count();
    let records: Vec<SweepRecord> = records.into_iter().map(|(r, _)| r).collect();
    let summary = write_tables(&dir, &records)?;
    let failed = records.iter().filter(|r| !r.ok()).count();
    println!("{} cells, {reused} reused, {failed} failed, {} summary rows", records.len(), summary.len());
    match failed {
        0 => Ok(()),
        f if f == records.len() => Err(CliError::Numerical(format!("every cell failed; first error: {}", records[0].error.as_deref().unwrap_or("?")))),
        f => Err(CliError::PartialSweep { failed: f, total: records.len() }),
    }
}
