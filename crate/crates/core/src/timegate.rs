//! Delay-domain truncation of wideband channels.
//!
//! Each channel entry's spectrum on the uniform grid is inverse-transformed
//! to the delay domain (`t_n = n / B`, `B` the band span), samples with
//! `t_n > tau` are zeroed, and the result is transformed back; only the
//! operating-frequency sample is kept. Because the chain is linear, the
//! whole operation collapses to a fixed weight vector over the grid, which
//! is what [`GateOperator`] precomputes for the training path.

use std::f64::consts::TAU;
use std::fmt;

use nalgebra::DMatrix;
use rustfft::FftPlanner;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cavity::{FrequencyGrid, WidebandScattering};
use crate::error::{Result, WpnnError};
use crate::linalg::{C64, ONE, ZERO};
use crate::scattering::{channel_unguarded, end_to_end_channel, ChannelMatrix, LoadVector};

/// Truncation times in seconds used by the standard sweep (plus no gating).
pub const TAU_SWEEP_S: [f64; 6] = [0.02e-9, 0.05e-9, 0.1e-9, 0.3e-9, 0.8e-9, 2.0e-9];

/// Truncation time; `Infinite` disables gating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tau {
    Finite(f64),
    Infinite,
}

impl Tau {
    pub fn seconds(self) -> Option<f64> {
        match self {
            Tau::Finite(t) => Some(t),
            Tau::Infinite => None,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(Tau::Infinite);
        }
        let t: f64 = s.parse().map_err(|_| WpnnError::Config(format!("cannot parse tau {s:?}")))?;
        Tau::finite(t)
    }

    pub fn finite(t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(WpnnError::Config(format!("tau must be positive and finite, got {t}")));
        }
        Ok(Tau::Finite(t))
    }
}

impl fmt::Display for Tau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tau::Finite(t) => write!(f, "{t:e}"),
            Tau::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Tau {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Tau::Finite(t) => s.serialize_f64(*t),
            Tau::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Tau {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(t) => Tau::finite(t).map_err(serde::de::Error::custom),
            Raw::Str(s) => Tau::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateWindow {
    #[default]
    Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateSetting {
    pub tau: Tau,
    #[serde(default)]
    pub window: GateWindow,
}

impl GateSetting {
    pub fn none() -> Self {
        Self { tau: Tau::Infinite, window: GateWindow::Rect }
    }

    pub fn at(tau_s: f64) -> Result<Self> {
        Ok(Self { tau: Tau::finite(tau_s)?, window: GateWindow::Rect })
    }
}

/// Delay of sample `n`: `n / B`.
pub fn delay_axis(grid: &FrequencyGrid) -> Vec<f64> {
    let b = grid.span_hz();
    (0..grid.len).map(|n| n as f64 / b).collect()
}

/// Number of leading delay samples kept (boundary inclusive).
pub fn kept_samples(grid: &FrequencyGrid, tau: Tau) -> usize {
    match tau {
        Tau::Infinite => grid.len,
        Tau::Finite(t) => {
            let last = (t * grid.span_hz() * (1.0 + 1e-12)).floor();
            if last >= (grid.len - 1) as f64 {
                grid.len
            } else {
                last as usize + 1
            }
        }
    }
}

fn inverse_dft(spectrum: &[C64]) -> Vec<C64> {
    let n = spectrum.len();
    let mut buf = spectrum.to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|z| *z *= scale);
    buf
}

fn forward_dft(signal: &[C64]) -> Vec<C64> {
    let mut buf = signal.to_vec();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Explicit inverse-transform, truncate, forward-transform pipeline on one
/// spectrum; returns the full gated spectrum.
pub fn gate_spectrum_pipeline(spectrum: &[C64], keep: usize) -> Vec<C64> {
    let mut h = inverse_dft(spectrum);
    h.iter_mut().skip(keep).for_each(|z| *z = ZERO);
    forward_dft(&h)
}

/// Linear functional equivalent to gating followed by selection of the
/// operating-frequency sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GateOperator {
    weights: Vec<C64>,
    operating_index: usize,
    keep: usize,
    tau: Tau,
}

impl GateOperator {
    pub fn new(grid: &FrequencyGrid, operating_index: usize, tau: Tau) -> Self {
        let n = grid.len;
        let keep = kept_samples(grid, tau);
        let mut weights = vec![ZERO; n];
        if matches!(tau, Tau::Infinite) {
            weights[operating_index] = ONE;
        } else {
            // g_m = (1/N) sum_{k < keep} exp(j 2 pi (m - m0) k / N)
            for (m, w) in weights.iter_mut().enumerate() {
                let d = m as f64 - operating_index as f64;
                let mut acc = ZERO;
                for k in 0..keep {
                    acc += C64::from_polar(1.0, TAU * d * k as f64 / n as f64);
                }
                *w = acc / n as f64;
            }
        }
        Self { weights, operating_index, keep, tau }
    }

    pub fn for_cavity(ws: &WidebandScattering, setting: GateSetting) -> Self {
        Self::new(ws.grid(), ws.operating_index(), setting.tau)
    }

    pub fn weights(&self) -> &[C64] {
        &self.weights
    }

    pub fn tau(&self) -> Tau {
        self.tau
    }

    pub fn kept(&self) -> usize {
        self.keep
    }

    pub fn is_bypass(&self) -> bool {
        matches!(self.tau, Tau::Infinite)
    }

    /// Frequency indices with non-zero weight and their weights.
    pub fn support(&self) -> Vec<(usize, C64)> {
        self.weights.iter().enumerate().filter(|(_, w)| **w != ZERO).map(|(i, w)| (i, *w)).collect()
    }

    /// Gated operating-frequency value of one spectrum.
    pub fn apply(&self, spectrum: &[C64]) -> C64 {
        self.weights.iter().zip(spectrum).map(|(w, s)| w * s).sum()
    }

    /// Full gated spectrum (delay-domain projection).
    pub fn project(&self, spectrum: &[C64]) -> Vec<C64> {
        if self.is_bypass() {
            return spectrum.to_vec();
        }
        gate_spectrum_pipeline(spectrum, self.keep)
    }
}

/// Loaded end-to-end channel at every grid frequency.
pub fn channel_spectrum(ws: &WidebandScattering, loads: &LoadVector) -> Result<Vec<DMatrix<C64>>> {
    if loads.len() != ws.partition().n_s() {
        return Err(WpnnError::DimensionMismatch(format!("{} loads for {} metasurface ports", loads.len(), ws.partition().n_s())));
    }
    ws.matrices().iter().map(|s| channel_unguarded(s, loads, &s.s_ss()).map(|h| h.entries)).collect()
}

/// Time-gated channel at the operating frequency.
pub fn gate_channel(ws: &WidebandScattering, loads: &LoadVector, setting: GateSetting) -> Result<ChannelMatrix> {
    let f0 = ws.grid().frequency(ws.operating_index());
    if matches!(setting.tau, Tau::Infinite) {
        return end_to_end_channel(ws.operating(), loads);
    }
    if ws.grid().len < 2 {
        return Err(WpnnError::GridError("gating needs a wideband grid".into()));
    }
    let spectra = channel_spectrum(ws, loads)?;
    let keep = kept_samples(ws.grid(), setting.tau);
    let (n_r, n_t) = spectra[0].shape();
    let m0 = ws.operating_index();
    let mut out = DMatrix::from_element(n_r, n_t, ZERO);
    for i in 0..n_r {
        for j in 0..n_t {
            let spec: Vec<C64> = spectra.iter().map(|h| h[(i, j)]).collect();
            out[(i, j)] = gate_spectrum_pipeline(&spec, keep)[m0];
        }
    }
    Ok(ChannelMatrix { entries: out, frequency_hz: f0 })
}

/// Delay-domain responses of every channel entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub delays_s: Vec<f64>,
    pub n_r: usize,
    pub n_t: usize,
    /// `responses[i * n_t + j]` is entry `(i, j)`.
    pub responses: Vec<Vec<C64>>,
}

impl ImpulseResponse {
    pub fn entry(&self, i: usize, j: usize) -> &[C64] {
        &self.responses[i * self.n_t + j]
    }

    /// Energy of all entries per delay sample.
    pub fn energy_profile(&self) -> Vec<f64> {
        let n = self.delays_s.len();
        let mut e = vec![0.0; n];
        for r in &self.responses {
            for (k, z) in r.iter().enumerate() {
                e[k] += z.norm_sqr();
            }
        }
        e
    }
}

pub fn impulse_response(ws: &WidebandScattering, loads: &LoadVector) -> Result<ImpulseResponse> {
    let spectra = channel_spectrum(ws, loads)?;
    let (n_r, n_t) = spectra[0].shape();
    let mut responses = Vec::with_capacity(n_r * n_t);
    for i in 0..n_r {
        for j in 0..n_t {
            let spec: Vec<C64> = spectra.iter().map(|h| h[(i, j)]).collect();
            responses.push(inverse_dft(&spec));
        }
    }
    Ok(ImpulseResponse { delays_s: delay_axis(ws.grid()), n_r, n_t, responses })
}

/// Delay-domain energy of `spectrum` kept by truncation at `tau`.
pub fn retained_energy(grid: &FrequencyGrid, spectrum: &[C64], tau: Tau) -> f64 {
    let keep = kept_samples(grid, tau);
    inverse_dft(spectrum).iter().take(keep).map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, uniform};

    fn grid() -> FrequencyGrid {
        FrequencyGrid::new(110e9, 170e9, 481).unwrap()
    }

    fn random_spectrum(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = seeded(seed);
        (0..n).map(|_| C64::new(uniform(&mut rng) - 0.5, uniform(&mut rng) - 0.5)).collect()
    }

    #[test]
    fn delay_axis_follows_band_span() {
        let g = grid();
        let d = delay_axis(&g);
        assert!((d[1] - 1.0 / 60e9).abs() < 1e-24);
        assert!((d[480] - 480.0 / 60e9).abs() < 1e-20);
    }

    #[test]
    fn kept_samples_are_inclusive() {
        let g = grid();
        assert_eq!(kept_samples(&g, Tau::Finite(0.02e-9)), 2);
        assert_eq!(kept_samples(&g, Tau::Finite(1.0 / 60e9)), 2);
        assert_eq!(kept_samples(&g, Tau::Finite(2.0e-9)), 121);
        assert_eq!(kept_samples(&g, Tau::Finite(8.0e-9)), 481);
        assert_eq!(kept_samples(&g, Tau::Finite(100e-9)), 481);
        assert_eq!(kept_samples(&g, Tau::Infinite), 481);
    }

    #[test]
    fn operator_matches_pipeline() {
        let g = grid();
        let spec = random_spectrum(g.len, 3);
        for tau in TAU_SWEEP_S {
            let op = GateOperator::new(&g, 240, Tau::Finite(tau));
            let pipe = gate_spectrum_pipeline(&spec, op.kept())[240];
            assert!((op.apply(&spec) - pipe).norm() < 1e-12, "tau {tau}");
        }
    }

    #[test]
    fn bypass_selects_operating_sample() {
        let g = grid();
        let op = GateOperator::new(&g, 240, Tau::Infinite);
        assert_eq!(op.support(), vec![(240, ONE)]);
        let spec = random_spectrum(g.len, 4);
        assert_eq!(op.apply(&spec), spec[240]);
    }

    #[test]
    fn full_range_gate_is_identity() {
        let g = grid();
        let spec = random_spectrum(g.len, 5);
        let op = GateOperator::new(&g, 240, Tau::Finite(8.0e-9));
        assert!((op.apply(&spec) - spec[240]).norm() < 1e-12);
    }

    #[test]
    fn projection_is_idempotent() {
        let g = grid();
        let spec = random_spectrum(g.len, 6);
        let op = GateOperator::new(&g, 240, Tau::Finite(4.0e-9));
        let once = op.project(&spec);
        let twice = op.project(&once);
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn gating_is_linear() {
        let g = grid();
        let a = random_spectrum(g.len, 7);
        let b = random_spectrum(g.len, 8);
        let (ca, cb) = (C64::new(0.3, -1.2), C64::new(-2.0, 0.5));
        let mix: Vec<C64> = a.iter().zip(&b).map(|(x, y)| ca * x + cb * y).collect();
        let op = GateOperator::new(&g, 240, Tau::Finite(0.3e-9));
        let lhs = op.apply(&mix);
        let rhs = ca * op.apply(&a) + cb * op.apply(&b);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn retained_energy_is_nested() {
        let g = grid();
        let spec = random_spectrum(g.len, 9);
        let mut prev = 0.0;
        for tau in TAU_SWEEP_S {
            let e = retained_energy(&g, &spec, Tau::Finite(tau));
            assert!(e >= prev);
            prev = e;
        }
        assert!(retained_energy(&g, &spec, Tau::Infinite) >= prev);
    }

    #[test]
    fn tau_strings_and_serde() {
        assert_eq!(Tau::parse("inf").unwrap(), Tau::Infinite);
        assert_eq!(Tau::parse("2e-11").unwrap(), Tau::Finite(2e-11));
        assert!(Tau::parse("-1").is_err());
        let s = GateSetting::none();
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"tau":"inf","window":"rect"}"#);
        let back: GateSetting = serde_json::from_str(r#"{"tau":2e-11}"#).unwrap();
        assert_eq!(back.tau, Tau::Finite(2e-11));
    }
}
