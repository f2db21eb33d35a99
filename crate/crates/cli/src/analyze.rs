use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, ValueEnum};
use serde::Serialize;

use wpnn_core::analysis::{
    fourier_multilayer_nomc, fourier_single_layer, max_abs_residual, nonlinearity_score, poly_multilayer_nomc, power_single_layer,
    SeriesCoefficients,
};
use wpnn_core::cavity::CavitySpec;
use wpnn_core::experiment::CavitySource;
use wpnn_core::model::{ModelCheckpoint, WpnnModel};
use wpnn_core::scattering::LoadVector;
use wpnn_core::tasks::{linspace, RegressionTask};
use wpnn_core::timegate::{impulse_response, kept_samples, Tau, TAU_SWEEP_S};
use wpnn_core::training::evaluate;
use wpnn_core::WpnnError;

use crate::error::{CliError, CliResult};
use crate::store;
use crate::train::CAVITY_SOURCE_FILE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Single-layer phase model: Fourier coefficients of the bounce expansion.
    Fourier,
    /// Single-layer linear model: power-series coefficients.
    Power,
    /// Phase cascade with zeroed metasurface coupling: L + 1 Fourier coefficients.
    FourierNomc,
    /// Linear cascade with zeroed metasurface coupling: degree-L polynomial.
    PolyNomc,
    /// Delay-domain impulse response of the first layer at input `--x`, with gate markers.
    Impulse,
    /// Residual of the best affine fit of the readout on the loads.
    Nonlinearity,
    /// Re-evaluate train and test NMSE on a task fixture.
    Evaluate,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Model checkpoint JSON.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Cavity scattering file. Without it (and without --cavity-spec) the
    /// sweep's recorded cavity source next to the checkpoint is used.
    #[arg(long, conflicts_with = "cavity_spec")]
    pub cavity: Option<PathBuf>,
    /// JSON cavity spec to synthesize instead of reading a file.
    #[arg(long)]
    pub cavity_spec: Option<PathBuf>,
    /// Zero the metasurface-metasurface block before analysis (implied by the *-nomc modes).
    #[arg(long)]
    pub zero_coupling: bool,
    /// Highest order tried by the single-layer expansions.
    #[arg(long, default_value_t = 400)]
    pub max_order: usize,
    /// Evaluation points for series residuals and the nonlinearity score.
    #[arg(long, default_value_t = 128)]
    pub points: usize,
    /// Input value for the impulse response.
    #[arg(long, default_value_t = 0.0)]
    pub x: f64,
    /// Task fixture for `evaluate` (default: task.json beside the checkpoint).
    #[arg(long)]
    pub task: Option<PathBuf>,
    /// Seed for the nonlinearity score inputs.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory, relative to the output root.
    #[arg(long, default_value = "analysis")]
    pub out: PathBuf,
}

fn find_cavity_source(checkpoint: &Path) -> CliResult<CavitySource> {
    let start = std::fs::canonicalize(checkpoint)?;
    for dir in start.ancestors().skip(1) {
        let p = dir.join(CAVITY_SOURCE_FILE);
        if p.exists() {
            return Ok(serde_json::from_str(&store::read_string(&p)?)?);
        }
    }
    Err(CliError::Config(format!("no {CAVITY_SOURCE_FILE} above {}; pass --cavity or --cavity-spec", checkpoint.display())))
}

fn guidance(e: WpnnError, mode: Mode) -> CliError {
    match e {
        WpnnError::ModeError(m) => {
            let hint = match mode {
                Mode::Fourier | Mode::Power => "single-layer modes need depth 1 and no gating; for deeper models use fourier-nomc or poly-nomc",
                Mode::FourierNomc | Mode::PolyNomc => "fourier-nomc needs phase encoding and poly-nomc linear encoding, with equal tx and rx counts",
                _ => "check that the checkpoint matches the requested analysis",
            };
            CliError::Config(format!("{m} ({hint})"))
        }
        other => other.into(),
    }
}

#[derive(Serialize)]
struct SeriesSummary {
    mode: String,
    order: usize,
    converged: bool,
    max_abs_residual: f64,
    tail_ratio: f64,
}

fn write_series(dir: &Path, model: &WpnnModel, series: &SeriesCoefficients, mode: Mode, points: usize) -> CliResult<()> {
    let xs = linspace(0.0, 1.0, points);
    let ys = model.batch_forward(&xs)?;
    let residual = max_abs_residual(series, &xs, &ys);
    let largest = series.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let tail = series.coeffs.last().map_or(0.0, |c| c.norm()) / largest.max(f64::MIN_POSITIVE);
    store::write_atomic(&dir.join("coefficients.csv"), series.to_csv().as_bytes())?;
    store::write_atomic(&dir.join("coefficients.json"), series.to_json()?.as_bytes())?;
    let rows = xs.iter().zip(&ys).map(|(&x, &y)| {
        let s = series.evaluate(x);
        format!("{x:e},{y:e},{s:e},{:e}", (s - y).abs())
    });
    store::write_csv(&dir.join("residual.csv"), "x,forward,series,abs_error", rows)?;
    let summary = SeriesSummary { mode: format!("{mode:?}").to_lowercase(), order: series.order(), converged: series.converged, max_abs_residual: residual, tail_ratio: tail };
    store::write_json(&dir.join("series_summary.json"), &summary)?;
    println!("{} coefficients (order {}), converged {}, tail/max {tail:.3e}, max |series - forward| {residual:.3e}", series.coeffs.len(), series.order(), series.converged);
    Ok(())
}

fn write_impulse(dir: &Path, model: &WpnnModel, x: f64) -> CliResult<()> {
    let loads = LoadVector::new(model.loads(x, 0))?;
    let ir = impulse_response(model.cavity(), &loads)?;
    let energy = ir.energy_profile();
    let peak = energy.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let rows = ir.delays_s.iter().zip(&energy).map(|(t, e)| format!("{t:e},{e:e},{:.6}", 10.0 * (e / peak).max(1e-300).log10()));
    store::write_csv(&dir.join("impulse.csv"), "delay_s,energy,energy_db", rows)?;
    let grid = model.cavity().grid();
    let markers = TAU_SWEEP_S.iter().map(|&tau| {
        let keep = kept_samples(grid, Tau::Finite(tau));
        let kept: f64 = energy[..keep.min(energy.len())].iter().sum();
        let total: f64 = energy.iter().sum();
        format!("{tau:e},{keep},{:e},{:.6}", ir.delays_s[keep.saturating_sub(1).min(energy.len() - 1)], kept / total.max(f64::MIN_POSITIVE))
    });
    store::write_csv(&dir.join("tau_markers.csv"), "tau_s,kept_samples,last_kept_delay_s,kept_energy_fraction", markers)?;
    println!("{} delay samples, spacing {:.6e} s", ir.delays_s.len(), ir.delays_s.get(1).copied().unwrap_or(0.0));
    Ok(())
}

pub fn run(root: &Path, args: AnalyzeArgs) -> CliResult<()> {
    let ck = ModelCheckpoint::from_json(&store::read_string(&args.checkpoint)?)?;
    let source = match (&args.cavity, &args.cavity_spec) {
        (Some(p), _) => CavitySource::File(p.clone()),
        (None, Some(p)) => CavitySource::Synth(serde_json::from_str::<CavitySpec>(&store::read_string(p)?)?),
        (None, None) => find_cavity_source(&args.checkpoint)?,
    };
    let mut cavity = store::load_cavity(&source)?;
    if args.zero_coupling || matches!(args.mode, Mode::FourierNomc | Mode::PolyNomc) {
        cavity = Arc::new(cavity.with_zeroed_pm_coupling());
    }
    let model = WpnnModel::from_checkpoint(cavity, &ck)?;
    let dir = root.join(&args.out);
    let mode = args.mode;
    match mode {
        Mode::Fourier => write_series(&dir, &model, &fourier_single_layer(&model, args.max_order).map_err(|e| guidance(e, mode))?, mode, args.points),
        Mode::Power => write_series(&dir, &model, &power_single_layer(&model, args.max_order).map_err(|e| guidance(e, mode))?, mode, args.points),
        Mode::FourierNomc => write_series(&dir, &model, &fourier_multilayer_nomc(&model).map_err(|e| guidance(e, mode))?, mode, args.points),
        Mode::PolyNomc => write_series(&dir, &model, &poly_multilayer_nomc(&model).map_err(|e| guidance(e, mode))?, mode, args.points),
        Mode::Impulse => write_impulse(&dir, &model, args.x),
        Mode::Nonlinearity => {
            let score = nonlinearity_score(&model, args.points, args.seed)?;
            store::write_json(&dir.join("nonlinearity.json"), &serde_json::json!({ "score": score, "samples": args.points, "seed": args.seed }))?;
            println!("nonlinearity score {score:.6e}");
            Ok(())
        }
        Mode::Evaluate => {
            let path = match &args.task {
                Some(p) => p.clone(),
                None => args.checkpoint.parent().unwrap_or(Path::new(".")).join("task.json"),
            };
            let task: RegressionTask = serde_json::from_str(&store::read_string(&path)?)?;
            let (train, test) = evaluate(&model, &task)?;
            store::write_json(&dir.join("evaluation.json"), &serde_json::json!({ "train_nmse": train, "test_nmse": test }))?;
            println!("train NMSE {train:e}, test NMSE {test:e}");
            Ok(())
        }
    }
}
