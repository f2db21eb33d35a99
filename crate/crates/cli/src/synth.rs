use std::path::{Path, PathBuf};

use clap::Args;

use wpnn_core::cavity::{coupling_richness, direct_readout_offsets, lowest_offset_seed, synthesize_cavity, CavitySpec};
use wpnn_core::interchange::ScatteringFile;
use wpnn_core::scattering::validate_passivity;

use crate::error::{CliError, CliResult};
use crate::store;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// JSON cavity spec used as the base; individual flags override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output file, relative to the output root.
    #[arg(long, default_value = "cavity.json")]
    pub out: PathBuf,
    /// Transmit antenna ports.
    #[arg(long)]
    pub n_t: Option<usize>,
    /// Receive antenna ports.
    #[arg(long)]
    pub n_r: Option<usize>,
    /// Metasurface elements.
    #[arg(long)]
    pub n_s: Option<usize>,
    /// Number of cavity modes (default 4 x ports).
    #[arg(long)]
    pub mode_count: Option<usize>,
    /// Dwell time at unit coupling scale, seconds.
    #[arg(long)]
    pub dwell_time: Option<f64>,
    /// Multiplier on every port coupling; 0 gives an uncoupled cavity.
    #[arg(long)]
    pub coupling_scale: Option<f64>,
    /// Absorption linewidth, Hz.
    #[arg(long)]
    pub absorption: Option<f64>,
    /// One-way antenna feed delay, seconds.
    #[arg(long)]
    pub antenna_delay: Option<f64>,
    /// One-way metasurface feed delay, seconds.
    #[arg(long)]
    pub pm_delay: Option<f64>,
    /// First grid frequency, Hz.
    #[arg(long)]
    pub f_start: Option<f64>,
    /// Last grid frequency, Hz.
    #[arg(long)]
    pub f_stop: Option<f64>,
    /// Number of grid frequencies.
    #[arg(long)]
    pub n_freq: Option<usize>,
    /// Operating frequency, Hz; must be a grid point.
    #[arg(long)]
    pub operating: Option<f64>,
    /// Generator seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace the seed by the one in 1..=N with the smallest direct readout
    /// offset for depths 1 and 2.
    #[arg(long, value_name = "N")]
    pub select_seed: Option<u64>,
}

impl SynthArgs {
    pub fn spec(&self) -> CliResult<CavitySpec> {
        let mut s = match &self.spec {
            Some(p) => serde_json::from_str(&store::read_string(p)?)?,
            None => CavitySpec::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {$( if let Some(v) = self.$flag { s.$field = v; } )*};
        }
        set!(n_t => n_t, n_r => n_r, n_s => n_s, dwell_time => mean_dwell_time, coupling_scale => coupling_scale,
            absorption => absorption_rate, antenna_delay => antenna_delay, pm_delay => pm_delay, f_start => f_start_hz,
            f_stop => f_stop_hz, n_freq => n_freq, operating => operating_hz, seed => rng_seed);
        if self.mode_count.is_some() {
            s.mode_count = self.mode_count;
        }
        s.validate()?;
        Ok(s)
    }
}

pub fn run(root: &Path, args: SynthArgs) -> CliResult<()> {
    let mut spec = args.spec()?;
    if let Some(n) = args.select_seed {
        if n == 0 {
            return Err(CliError::Config("--select-seed needs N >= 1".into()));
        }
        let (seed, offset) = lowest_offset_seed(&spec, 1..=n, 2)?;
        println!("selected seed {seed} (largest direct readout offset {offset:.3e})");
        spec.rng_seed = seed;
    }
    let ws = synthesize_cavity(&spec)?;
    let sigma = ws.matrices().iter().map(|s| validate_passivity(s).sigma_max).fold(0.0, f64::max);
    let path = root.join(&args.out);
    let mut buf = Vec::new();
    ScatteringFile::from_wideband(&ws).write(&mut buf)?;
    store::write_atomic(&path, &buf)?;
    println!("ports: {} tx, {} rx, {} metasurface", spec.n_t, spec.n_r, spec.n_s);
    println!("frequencies: {} ({:.3e} to {:.3e} Hz), operating {:.3e} Hz", ws.grid().len, ws.grid().start_hz, ws.grid().stop_hz(), spec.operating_hz);
    println!("passivity: max singular value {sigma:.12} (pass)");
    println!("coupling richness: {:.6}", coupling_richness(&ws));
    let offsets: Vec<String> = direct_readout_offsets(&ws, 2).iter().map(|o| format!("{o:.3e}")).collect();
    println!("direct readout offset (L = 1, 2): {}", offsets.join(", "));
    println!("wrote {}", path.display());
    Ok(())
}
