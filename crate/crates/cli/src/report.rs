use std::path::{Path, PathBuf};

use clap::Args;

use wpnn_core::experiment::{ExperimentConfig, SweepRecord};

use crate::error::{CliError, CliResult};
use crate::store;
use crate::train::{load_tasks, write_tables, RECORD_FILE};

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Sweep directory written by `wpnn train`, relative to the output root.
    #[arg(long)]
    pub sweep_dir: PathBuf,
}

/// Rebuilds the result and summary tables from the cell records on disk.
/// Records follow the sweep's cell order when its config is present.
pub fn run(root: &Path, args: ReportArgs) -> CliResult<()> {
    let dir = root.join(&args.sweep_dir);
    let cells = dir.join("cells");
    let mut records: Vec<SweepRecord> = Vec::new();
    if cells.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&cells)?.filter_map(|e| e.ok().map(|e| e.path().join(RECORD_FILE))).filter(|p| p.exists()).collect();
        entries.sort();
        for p in entries {
            records.push(serde_json::from_str(&store::read_string(&p)?)?);
        }
    }
    let config_path = dir.join("config.json");
    let mut expected = None;
    if config_path.exists() {
        let cfg: ExperimentConfig = serde_json::from_str(&store::read_string(&config_path)?)?;
        let tasks = load_tasks(&cfg.tasks)?;
        let order = cfg.cells(tasks.len());
        expected = Some(order.len());
        let rank = |r: &SweepRecord| {
            order.iter().position(|c| {
                let t = &tasks[c.task_index];
                c.mode == r.architecture && c.encoding == r.encoding && c.tau == r.tau && c.depth == r.depth && t.cutoff == r.cutoff && t.seed == r.target_seed
            })
        };
        records.retain(|r| rank(r).is_some());
        records.sort_by_key(|r| rank(r));
    }
    if !records.iter().any(SweepRecord::ok) {
        return Err(CliError::Config(format!("no completed cells under {}", dir.display())));
    }
    let summary = write_tables(&dir, &records)?;
    let failed = records.iter().filter(|r| !r.ok()).count();
    if failed > 0 {
        eprintln!("warning: {failed} cells are marked failed");
    }
    if let Some(n) = expected {
        if records.len() < n {
            eprintln!("warning: {} of {n} cells have no record yet", n - records.len());
        }
    }
    for row in &summary {
        if row.failed > 0 {
            eprintln!("warning: incomplete cell {} {} tau={} L={} fc={}: {} failed", row.architecture, row.encoding, row.tau, row.depth, row.cutoff, row.failed);
        }
    }
    println!("{}", wpnn_core::experiment::SummaryRow::CSV_HEADER);
    for row in &summary {
        println!("{}", row.to_csv_row());
    }
    Ok(())
}
