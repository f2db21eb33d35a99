//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The plain functions return JSON strings and are usable natively; the
//! `Demo` wrapper exposes them to JavaScript.

use std::sync::Arc;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use wpnn_core::analysis::{fourier_single_layer, nonlinearity_score};
use wpnn_core::cavity::{coupling_richness, synthesize_cavity, CavitySpec, WidebandScattering};
use wpnn_core::encoding::EncodingKind;
use wpnn_core::model::{ArchitectureMode, WpnnModel};
use wpnn_core::scattering::LoadVector;
use wpnn_core::tasks::linspace;
use wpnn_core::timegate::{impulse_response, kept_samples, GateSetting, Tau, TAU_SWEEP_S};
use wpnn_core::training::{init_weights, WeightInit};

/// Small cavity sized for interactive use.
pub fn demo_spec(n_s: usize, coupling_scale: f64, seed: u64) -> CavitySpec {
    CavitySpec { n_t: 3, n_r: 3, n_s, n_freq: 61, coupling_scale, rng_seed: seed, ..CavitySpec::default() }
}

pub struct DemoCore {
    cavity: Arc<WidebandScattering>,
}

#[derive(Serialize)]
struct Impulse {
    delays_ns: Vec<f64>,
    energy_db: Vec<f64>,
    markers: Vec<Marker>,
}

#[derive(Serialize)]
struct Marker {
    tau_ns: f64,
    kept_samples: usize,
}

#[derive(Serialize)]
struct Readout {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Magnitudes of the Fourier coefficients; empty when gated.
    harmonics: Vec<f64>,
}

#[derive(Serialize)]
struct Sweep {
    taus_ns: Vec<Option<f64>>,
    scores: Vec<f64>,
}

fn tau_from_ns(tau_ns: f64) -> Result<Tau, String> {
    if tau_ns <= 0.0 || !tau_ns.is_finite() {
        Ok(Tau::Infinite)
    } else {
        Tau::finite(tau_ns * 1e-9).map_err(|e| e.to_string())
    }
}

impl DemoCore {
    pub fn new(n_s: usize, coupling_scale: f64, seed: u64) -> Result<Self, String> {
        let cavity = synthesize_cavity(&demo_spec(n_s, coupling_scale, seed)).map_err(|e| e.to_string())?;
        Ok(Self { cavity: Arc::new(cavity) })
    }

    pub fn richness(&self) -> f64 {
        coupling_richness(&self.cavity)
    }

    fn model(&self, tau: Tau, depth: usize, weight_seed: u64) -> Result<WpnnModel, String> {
        let n_s = self.cavity.partition().n_s();
        let mode = ArchitectureMode::IndependentWeights;
        let w = init_weights(n_s, depth, mode, EncodingKind::Phase, WeightInit::Auto, weight_seed).map_err(|e| e.to_string())?;
        WpnnModel::new(self.cavity.clone(), EncodingKind::Phase, GateSetting { tau, window: Default::default() }, w).map_err(|e| e.to_string())
    }

    /// Delay-domain energy of the first layer at input `x`, with the gate
    /// lengths of the standard sweep marked.
    pub fn impulse_json(&self, x: f64, weight_seed: u64) -> Result<String, String> {
        let m = self.model(Tau::Infinite, 1, weight_seed)?;
        let loads = LoadVector::new(m.loads(x, 0)).map_err(|e| e.to_string())?;
        let ir = impulse_response(&self.cavity, &loads).map_err(|e| e.to_string())?;
        let energy = ir.energy_profile();
        let peak = energy.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
        let out = Impulse {
            delays_ns: ir.delays_s.iter().map(|t| t * 1e9).collect(),
            energy_db: energy.iter().map(|e| 10.0 * (e / peak).max(1e-30).log10()).collect(),
            markers: TAU_SWEEP_S.iter().map(|&t| Marker { tau_ns: t * 1e9, kept_samples: kept_samples(self.cavity.grid(), Tau::Finite(t)) }).collect(),
        };
        serde_json::to_string(&out).map_err(|e| e.to_string())
    }

    /// Readout over `x` for random weights; `tau_ns <= 0` disables gating.
    pub fn readout_json(&self, tau_ns: f64, depth: usize, weight_seed: u64, points: usize) -> Result<String, String> {
        let tau = tau_from_ns(tau_ns)?;
        let m = self.model(tau, depth.max(1), weight_seed)?;
        let xs = linspace(0.0, 1.0, points.max(2));
        let ys = m.batch_forward(&xs).map_err(|e| e.to_string())?;
        let harmonics = match fourier_single_layer(&m, 200) {
            Ok(s) => s.coeffs.iter().map(|c| c.norm()).collect(),
            Err(_) => Vec::new(),
        };
        serde_json::to_string(&Readout { xs, ys, harmonics }).map_err(|e| e.to_string())
    }

    /// Mean nonlinearity score over `draws` weight draws for every gate length.
    pub fn nonlinearity_json(&self, draws: usize, samples: usize) -> Result<String, String> {
        let taus: Vec<Tau> = TAU_SWEEP_S.iter().map(|&t| Tau::Finite(t)).chain([Tau::Infinite]).collect();
        let mut scores = Vec::with_capacity(taus.len());
        for &tau in &taus {
            let mut acc = 0.0;
            for k in 0..draws.max(1) {
                let m = self.model(tau, 1, k as u64)?;
                acc += nonlinearity_score(&m, samples.max(8), k as u64).map_err(|e| e.to_string())?;
            }
            scores.push(acc / draws.max(1) as f64);
        }
        let out = Sweep { taus_ns: taus.iter().map(|t| t.seconds().map(|s| s * 1e9)).collect(), scores };
        serde_json::to_string(&out).map_err(|e| e.to_string())
    }
}

#[wasm_bindgen]
pub struct Demo(DemoCore);

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(n_s: usize, coupling_scale: f64, seed: u32) -> Result<Demo, JsError> {
        DemoCore::new(n_s, coupling_scale, seed as u64).map(Demo).map_err(|e| JsError::new(&e))
    }

    pub fn richness(&self) -> f64 {
        self.0.richness()
    }

    pub fn impulse(&self, x: f64, weight_seed: u32) -> Result<String, JsError> {
        self.0.impulse_json(x, weight_seed as u64).map_err(|e| JsError::new(&e))
    }

    pub fn readout(&self, tau_ns: f64, depth: usize, weight_seed: u32, points: usize) -> Result<String, JsError> {
        self.0.readout_json(tau_ns, depth, weight_seed as u64, points).map_err(|e| JsError::new(&e))
    }

    pub fn nonlinearity(&self, draws: usize, samples: usize) -> Result<String, JsError> {
        self.0.nonlinearity_json(draws, samples).map_err(|e| JsError::new(&e))
    }
}
