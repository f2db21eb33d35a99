//! Scalar regression targets: low-pass filtered white Gaussian noise on a
//! uniform grid of `x`, standardized and shrunk by `g` into the range a WPNN
//! readout can reach.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WpnnError};
use crate::linalg::C64;
use crate::model::{WeightMatrix, WpnnModel};
use crate::rng::{substream, uniform, Gaussian};

pub const N_SAMPLES: usize = 600;
pub const N_TRAIN: usize = 200;
pub const FILTER_ORDER: usize = 4;
pub const PAD_LEN: usize = 3 * FILTER_ORDER;
pub const REFERENCE_G: f64 = 30.0;

/// Cut-off grid of the difficulty sweep.
pub const CUTOFFS: [f64; 9] = [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09];

/// One biquad `b0 + b1 z^-1 + b2 z^-2 / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    pub fn response(&self, omega: f64) -> C64 {
        let z1 = C64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (1.0 + self.a[0] * z1 + self.a[1] * z2)
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }
}

/// Digital Butterworth low-pass as cascaded second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    pub sections: Vec<Biquad>,
}

impl Butterworth {
    /// `cutoff` is relative to Nyquist; the analog prototype is prewarped
    /// so the -3 dB point lands exactly on it after the bilinear map.
    pub fn lowpass(order: usize, cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff < 1.0) {
            return Err(WpnnError::FilterDesignError(format!("cut-off {cutoff} outside (0, 1)")));
        }
        if order == 0 || order % 2 == 1 {
            return Err(WpnnError::FilterDesignError(format!("order {order} must be even and positive")));
        }
        let k = (std::f64::consts::FRAC_PI_2 * cutoff).tan();
        let sections = (0..order / 2)
            .map(|i| {
                let theta = std::f64::consts::PI * (2 * i + 1) as f64 / (2 * order) as f64;
                let a1 = 2.0 * theta.sin() * k;
                let k2 = k * k;
                let a0 = 1.0 + a1 + k2;
                Biquad { b: [k2 / a0, 2.0 * k2 / a0, k2 / a0], a: [(2.0 * k2 - 2.0) / a0, (1.0 - a1 + k2) / a0] }
            })
            .collect();
        Ok(Self { sections })
    }

    /// Complex response at normalized angular frequency `omega` (rad/sample).
    pub fn response(&self, omega: f64) -> C64 {
        self.sections.iter().map(|s| s.response(omega)).product()
    }

    /// Magnitude at a frequency given relative to Nyquist.
    pub fn magnitude(&self, f_rel: f64) -> f64 {
        self.response(std::f64::consts::PI * f_rel).norm()
    }

    /// Single pass, transposed direct form II, starting from the steady
    /// state of a constant input equal to `x[0]`.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        let Some(&x0) = x.first() else { return y };
        let mut level = x0;
        for s in &self.sections {
            let out = s.dc_gain() * level;
            let mut z2 = s.b[2] * level - s.a[1] * out;
            let mut z1 = s.b[1] * level - s.a[0] * out + z2;
            for v in y.iter_mut() {
                let xi = *v;
                let yi = s.b[0] * xi + z1;
                z1 = s.b[1] * xi - s.a[0] * yi + z2;
                z2 = s.b[2] * xi - s.a[1] * yi;
                *v = yi;
            }
            level = out;
        }
        y
    }

    /// Forward-backward (zero-phase) filtering with mirrored edges.
    pub fn filtfilt(&self, x: &[f64], pad: usize) -> Vec<f64> {
        let n = x.len();
        let pad = pad.min(n.saturating_sub(1));
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| x[i]));
        ext.extend_from_slice(x);
        ext.extend((n - 1 - pad..n - 1).rev().map(|i| x[i]));
        let mut y = self.filter(&ext);
        y.reverse();
        let mut y = self.filter(&y);
        y.reverse();
        y[pad..pad + n].to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTask {
    pub cutoff: f64,
    #[serde(rename = "g")]
    pub scale_g: f64,
    pub seed: u64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![start],
        _ => (0..n).map(|i| if i == n - 1 { stop } else { start + (stop - start) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn generate_task(cutoff: f64, scale_g: f64, seed: u64) -> Result<RegressionTask> {
    if !(scale_g > 0.0) || !scale_g.is_finite() {
        return Err(WpnnError::Config(format!("scale g must be positive, got {scale_g}")));
    }
    let filter = Butterworth::lowpass(FILTER_ORDER, cutoff)?;
    let mut noise_rng = substream(seed, 0);
    let mut gauss = Gaussian::new();
    let noise: Vec<f64> = (0..N_SAMPLES).map(|_| gauss.sample(&mut noise_rng)).collect();
    let mut ys = filter.filtfilt(&noise, PAD_LEN);
    let (mu, sigma) = mean_std(&ys);
    ys.iter_mut().for_each(|y| *y = (*y - mu) / sigma);
    // Second pass removes the rounding residue left by the first.
    let (mu, sigma) = mean_std(&ys);
    ys.iter_mut().for_each(|y| *y = (*y - mu) / (sigma * scale_g));

    let mut idx: Vec<usize> = (0..N_SAMPLES).collect();
    idx.shuffle(&mut substream(seed, 1));
    let mut train_idx = idx[..N_TRAIN].to_vec();
    let mut test_idx = idx[N_TRAIN..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(RegressionTask { cutoff, scale_g, seed, xs: linspace(0.0, 1.0, N_SAMPLES), ys, train_idx, test_idx })
}

/// Seeds of the `count` target functions of one difficulty level.
pub fn task_seeds(base_seed: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|k| base_seed + k).collect()
}

impl RegressionTask {
    pub fn train_set(&self) -> (Vec<f64>, Vec<f64>) {
        self.subset(&self.train_idx)
    }

    pub fn test_set(&self) -> (Vec<f64>, Vec<f64>) {
        self.subset(&self.test_idx)
    }

    fn subset(&self, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        (idx.iter().map(|&i| self.xs[i]).collect(), idx.iter().map(|&i| self.ys[i]).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.xs.len();
        if self.ys.len() != n {
            return Err(WpnnError::DimensionMismatch(format!("{} inputs, {} targets", n, self.ys.len())));
        }
        let mut seen = vec![false; n];
        for &i in self.train_idx.iter().chain(&self.test_idx) {
            if i >= n || seen[i] {
                return Err(WpnnError::Config(format!("index {i} out of range or repeated in the split")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(WpnnError::Config("train and test indices do not cover the task".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let t: Self = serde_json::from_reader(r)?;
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCalibration {
    /// Smallest `g` that keeps `+-3` standard deviations of the target inside
    /// the readout's 1st..99th percentile interval; `None` when no `g` does.
    pub suggested_g: Option<f64>,
    pub percentile_1: f64,
    pub percentile_99: f64,
    pub reference_g: f64,
}

impl ScaleCalibration {
    pub fn unreachable(&self) -> bool {
        self.suggested_g.is_none()
    }
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 100]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Readout distribution over weights drawn uniformly from `[0, 1)` and
/// random inputs.
pub fn calibrate_scale(model: &WpnnModel, draws: usize, seed: u64) -> Result<ScaleCalibration> {
    if draws < 2 {
        return Err(WpnnError::Config("calibration needs at least two draws".into()));
    }
    let mut rng = substream(seed, 7);
    let n = model.weights().stored().len();
    let mut ys = Vec::with_capacity(draws);
    for _ in 0..draws {
        let v = (0..n).map(|_| uniform(&mut rng)).collect();
        let w = WeightMatrix::new(model.n_s(), model.depth(), model.mode(), v)?;
        let x = uniform(&mut rng);
        ys.push(model.with_weights(w)?.forward(x)?);
    }
    ys.sort_by(f64::total_cmp);
    let p1 = percentile(&ys, 1.0);
    let p99 = percentile(&ys, 99.0);
    let half = (-p1).min(p99);
    let suggested_g = if p99 - p1 > 0.0 && half > 0.0 { Some(3.0 / half) } else { None };
    Ok(ScaleCalibration { suggested_g, percentile_1: p1, percentile_99: p99, reference_g: REFERENCE_G })
}
