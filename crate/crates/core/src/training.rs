//! In-silico training: mini-batch NMSE, adjoint gradients from the model,
//! and Adam.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::encoding::EncodingKind;
use crate::error::{Result, WpnnError};
use crate::model::{nmse, ArchitectureMode, WeightMatrix, WpnnModel};
use crate::rng::{substream, uniform};
use crate::tasks::RegressionTask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WeightInit {
    /// Phase: `U[0, 1)`. Linear: `U[0.25, 0.75]`.
    #[default]
    Auto,
    Uniform {
        low: f64,
        high: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub weight_init: WeightInit,
    pub seed: u64,
    /// Coordinates probed by the finite-difference check before training.
    pub gradient_check_coords: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            iterations: 1000,
            batch_size: 100,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            weight_init: WeightInit::Auto,
            seed: 0,
            gradient_check_coords: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n_train: usize) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > n_train {
            return Err(WpnnError::Config(format!("batch size {} must be in 1..={n_train}", self.batch_size)));
        }
        let rates = [self.learning_rate, self.adam_eps, 1.0 - self.adam_beta1, 1.0 - self.adam_beta2];
        if rates.iter().any(|r| !(*r > 0.0)) || self.adam_beta1 < 0.0 || self.adam_beta2 < 0.0 {
            return Err(WpnnError::Config("learning rate and eps must be positive, betas in [0, 1)".into()));
        }
        if let WeightInit::Uniform { low, high } = self.weight_init {
            if !(high >= low) {
                return Err(WpnnError::Config("weight init needs low <= high".into()));
            }
        }
        Ok(())
    }
}

pub fn init_weights(n_s: usize, depth: usize, mode: ArchitectureMode, encoding: EncodingKind, init: WeightInit, seed: u64) -> Result<WeightMatrix> {
    let (low, high) = match (init, encoding) {
        (WeightInit::Uniform { low, high }, _) => (low, high),
        (WeightInit::Auto, EncodingKind::Phase) => (0.0, 1.0),
        (WeightInit::Auto, EncodingKind::Linear) => (0.25, 0.75),
    };
    let cols = match mode {
        ArchitectureMode::SharedWeights => 1,
        ArchitectureMode::IndependentWeights => depth,
    };
    let mut rng = substream(seed, 1);
    let v = (0..n_s * cols).map(|_| low + (high - low) * uniform(&mut rng)).collect();
    WeightMatrix::new(n_s, depth, mode, v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckReport {
    pub coordinates: Vec<usize>,
    pub analytic: Vec<f64>,
    pub finite_difference: Vec<f64>,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub initial_train_nmse: f64,
    /// Mini-batch NMSE before each update.
    pub batch_nmse: Vec<f64>,
    pub final_train_nmse: f64,
    pub final_test_nmse: f64,
    pub wall_time_s: f64,
    pub gradient_check: Option<GradientCheckReport>,
}

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,nmse\n");
        for (i, v) in self.batch_nmse.iter().enumerate() {
            s.push_str(&format!("{i},{v:e}\n"));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Self { lr: cfg.learning_rate, beta1: cfg.adam_beta1, beta2: cfg.adam_beta2, eps: cfg.adam_eps, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

fn per_sample(model: &WpnnModel, xs: &[f64]) -> Result<Vec<(f64, Vec<f64>)>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        xs.par_iter().map_init(|| model.workspace(), |ws, &x| model.readout_gradient_with(x, ws)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut ws = model.workspace();
        xs.iter().map(|&x| model.readout_gradient_with(x, &mut ws)).collect()
    }
}

/// Batch NMSE and its gradient with respect to the stored weights.
pub fn loss_and_gradient(model: &WpnnModel, xs: &[f64], ys: &[f64]) -> Result<(f64, Vec<f64>)> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(WpnnError::DimensionMismatch(format!("{} inputs for {} targets", xs.len(), ys.len())));
    }
    let den: f64 = ys.iter().map(|y| y * y).sum();
    if den == 0.0 {
        return Err(WpnnError::DegenerateTarget);
    }
    let samples = per_sample(model, xs)?;
    let mut grad = vec![0.0; model.weights().stored().len()];
    let mut num = 0.0;
    for ((yhat, g), y) in samples.iter().zip(ys) {
        let r = yhat - y;
        num += r * r;
        let c = 2.0 * r / den;
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += c * gi;
        }
    }
    if let Some(k) = grad.iter().position(|g| !g.is_finite()) {
        let n_s = model.n_s();
        return Err(WpnnError::NonFiniteGradient { row: k % n_s, col: k / n_s });
    }
    Ok((num / den, grad))
}

pub fn batch_nmse(model: &WpnnModel, xs: &[f64], ys: &[f64]) -> Result<f64> {
    nmse(&model.batch_forward(xs)?, ys)
}

/// (train NMSE, test NMSE).
pub fn evaluate(model: &WpnnModel, task: &RegressionTask) -> Result<(f64, f64)> {
    let (xtr, ytr) = task.train_set();
    let (xte, yte) = task.test_set();
    Ok((batch_nmse(model, &xtr, &ytr)?, batch_nmse(model, &xte, &yte)?))
}

/// Central finite differences of the batch NMSE on `coords` random stored
/// weights. Linear-encoding probes avoid the clip boundaries. Errors are
/// relative to the analytic component, floored at 1e-3 of the largest one.
pub fn gradient_check(model: &WpnnModel, xs: &[f64], ys: &[f64], coords: usize, seed: u64) -> Result<GradientCheckReport> {
    let (_, grad) = loss_and_gradient(model, xs, ys)?;
    let h = match model.encoding() {
        EncodingKind::Phase => 1e-6,
        EncodingKind::Linear => 1e-5,
    };
    let stored = model.weights().stored();
    let candidates: Vec<usize> = (0..stored.len())
        .filter(|&k| model.encoding() == EncodingKind::Phase || (stored[k] > h && stored[k] < 1.0 - h))
        .collect();
    let mut rng = substream(seed, 3);
    let picked: Vec<usize> = (0..coords.min(candidates.len())).map(|_| candidates[(uniform(&mut rng) * candidates.len() as f64) as usize]).collect();
    let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    let mut fd = Vec::with_capacity(picked.len());
    let mut worst = 0.0f64;
    let den: f64 = ys.iter().map(|y| y * y).sum();
    for &k in &picked {
        let eval = |delta: f64| -> Result<Vec<f64>> {
            let mut w = model.weights().clone();
            w.stored_mut()[k] += delta;
            model.with_weights(w)?.batch_forward(xs)
        };
        let (plus, minus) = (eval(h)?, eval(-h)?);
        // Difference of squares, so the loss offset does not cancel.
        let diff: f64 = plus.iter().zip(&minus).zip(ys).map(|((p, m), y)| (p - m) * (p + m - 2.0 * y)).sum();
        let d = diff / den / (2.0 * h);
        let denom = grad[k].abs().max(1e-3 * scale).max(f64::MIN_POSITIVE);
        worst = worst.max((d - grad[k]).abs() / denom);
        fd.push(d);
    }
    Ok(GradientCheckReport { analytic: picked.iter().map(|&k| grad[k]).collect(), coordinates: picked, finite_difference: fd, max_relative_error: worst })
}

/// Adam on mini-batches drawn without replacement, reshuffled every epoch.
/// An epoch ends when fewer than `batch_size` unused samples remain.
pub fn train(model: &WpnnModel, task: &RegressionTask, cfg: &TrainConfig) -> Result<(WpnnModel, TrainTrace)> {
    let start = Instant::now();
    let (xtr, ytr) = task.train_set();
    cfg.validate(xtr.len())?;
    let mut model = model.clone();
    let initial_train_nmse = batch_nmse(&model, &xtr, &ytr)?;
    let gradient_check = if cfg.gradient_check_coords > 0 && cfg.iterations > 0 {
        let n = cfg.batch_size.min(xtr.len());
        Some(gradient_check(&model, &xtr[..n], &ytr[..n], cfg.gradient_check_coords, cfg.seed)?)
    } else {
        None
    };

    let mut adam = Adam::new(model.weights().stored().len(), cfg);
    let mut order: Vec<usize> = (0..xtr.len()).collect();
    let mut rng = substream(cfg.seed, 2);
    let mut cursor = order.len();
    let mut batch_trace = Vec::with_capacity(cfg.iterations);
    let mut bx = Vec::with_capacity(cfg.batch_size);
    let mut by = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.iterations {
        if cursor + cfg.batch_size > order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        bx.clear();
        by.clear();
        for &i in &order[cursor..cursor + cfg.batch_size] {
            bx.push(xtr[i]);
            by.push(ytr[i]);
        }
        cursor += cfg.batch_size;
        let (loss, grad) = loss_and_gradient(&model, &bx, &by)?;
        batch_trace.push(loss);
        let w = model.weights_mut();
        adam.step(w.stored_mut(), &grad);
        if model.encoding() == EncodingKind::Linear {
            model.weights_mut().clip_unit_in_place();
        }
    }
    let (final_train_nmse, final_test_nmse) = evaluate(&model, task)?;
    let trace = TrainTrace {
        initial_train_nmse,
        batch_nmse: batch_trace,
        final_train_nmse,
        final_test_nmse,
        wall_time_s: start.elapsed().as_secs_f64(),
        gradient_check,
    };
    Ok((model, trace))
}
