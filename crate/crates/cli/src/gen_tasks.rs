use std::path::{Path, PathBuf};

use clap::Args;

use wpnn_core::tasks::{generate_task, task_seeds, CUTOFFS, REFERENCE_G};

use crate::error::CliResult;
use crate::store;

#[derive(Args, Debug)]
pub struct GenTasksArgs {
    /// Normalized low-pass cut-offs, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = CUTOFFS.to_vec())]
    pub cutoffs: Vec<f64>,
    /// Target functions per cut-off.
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    /// First target seed; seeds are consecutive.
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
    /// Target scale divisor.
    #[arg(long, default_value_t = REFERENCE_G)]
    pub g: f64,
    /// Output directory, relative to the output root.
    #[arg(long, default_value = "tasks")]
    pub out: PathBuf,
}

pub fn fixture_name(cutoff: f64, seed: u64) -> String {
    format!("fc{cutoff:.3}_seed{seed:04}.json")
}

pub fn run(root: &Path, args: GenTasksArgs) -> CliResult<()> {
    let dir = root.join(&args.out);
    let mut n = 0;
    for &fc in &args.cutoffs {
        for seed in task_seeds(args.base_seed, args.count) {
            let task = generate_task(fc, args.g, seed)?;
            let mut json = task.to_json()?;
            json.push('\n');
            store::write_atomic(&dir.join(fixture_name(fc, seed)), json.as_bytes())?;
            n += 1;
        }
    }
    println!("wrote {n} fixtures to {}", dir.display());
    Ok(())
}
