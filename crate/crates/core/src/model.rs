//! Multi-layer WPNN: a cascade of identical metasurface-programmed cavities
//! with unidirectional propagation between layers and the datum re-encoded
//! in every layer.
//!
//! ```text
//! a(1) = 1
//! b(l) = H(r(l)) a(l),  r(l) = encode(x, w(l)),  a(l+1) = b(l)
//! y    = mean_i Re b_i(L)
//! ```
//!
//! `H` is the gated channel, i.e. `sum_m g_m H_m(r)` over the gate support.
//! The same per-frequency solve also yields everything needed for the
//! adjoint pass, so gradients cost little more than the forward pass.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cavity::WidebandScattering;
use crate::encoding::{check_domain, clip_unit, EncodingKind};
use crate::error::{Result, WpnnError};
use crate::linalg::{CMat, DenseLu, C64, ONE, ZERO};
use crate::scattering::EPS_MARG;
use crate::timegate::{GateOperator, GateSetting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArchitectureMode {
    #[serde(rename = "shared")]
    SharedWeights,
    #[serde(rename = "independent")]
    IndependentWeights,
}

impl fmt::Display for ArchitectureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArchitectureMode::SharedWeights => "shared",
            ArchitectureMode::IndependentWeights => "independent",
        })
    }
}

impl FromStr for ArchitectureMode {
    type Err = WpnnError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(ArchitectureMode::SharedWeights),
            "independent" => Ok(ArchitectureMode::IndependentWeights),
            other => Err(WpnnError::Config(format!("unknown architecture {other:?} (expected \"shared\" or \"independent\")"))),
        }
    }
}

/// Trainable weights, `N_S x L`. Shared mode stores a single column.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n_s: usize,
    depth: usize,
    mode: ArchitectureMode,
    values: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(n_s: usize, depth: usize, mode: ArchitectureMode, values: Vec<f64>) -> Result<Self> {
        if depth == 0 {
            return Err(WpnnError::Config("depth must be at least 1".into()));
        }
        let expected = n_s * Self::stored_columns(mode, depth);
        if values.len() != expected {
            return Err(WpnnError::DimensionMismatch(format!("{} weights, expected {expected}", values.len())));
        }
        Ok(Self { n_s, depth, mode, values })
    }

    pub fn filled(n_s: usize, depth: usize, mode: ArchitectureMode, value: f64) -> Result<Self> {
        Self::new(n_s, depth, mode, vec![value; n_s * Self::stored_columns(mode, depth)])
    }

    /// Builds from a full `N_S x L` matrix; shared mode requires equal columns.
    pub fn from_columns(columns: &[Vec<f64>], mode: ArchitectureMode) -> Result<Self> {
        let depth = columns.len();
        let n_s = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n_s) {
            return Err(WpnnError::DimensionMismatch("ragged weight columns".into()));
        }
        match mode {
            ArchitectureMode::SharedWeights => {
                if columns.iter().any(|c| c != &columns[0]) {
                    return Err(WpnnError::Config("shared-weights model with differing layer weights".into()));
                }
                Self::new(n_s, depth, mode, columns.first().cloned().unwrap_or_default())
            }
            ArchitectureMode::IndependentWeights => Self::new(n_s, depth, mode, columns.concat()),
        }
    }

    fn stored_columns(mode: ArchitectureMode, depth: usize) -> usize {
        match mode {
            ArchitectureMode::SharedWeights => 1,
            ArchitectureMode::IndependentWeights => depth,
        }
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn mode(&self) -> ArchitectureMode {
        self.mode
    }

    /// Weight vector of layer `l` (0-based).
    pub fn column(&self, l: usize) -> &[f64] {
        let c = match self.mode {
            ArchitectureMode::SharedWeights => 0,
            ArchitectureMode::IndependentWeights => l,
        };
        &self.values[c * self.n_s..(c + 1) * self.n_s]
    }

    /// Trainable degrees of freedom, column-major by layer.
    pub fn stored(&self) -> &[f64] {
        &self.values
    }

    pub fn stored_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn materialize(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_s, self.depth, |i, l| self.column(l)[i])
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.depth).map(|l| self.column(l).to_vec()).collect()
    }

    pub fn clip_unit_in_place(&mut self) {
        self.values.iter_mut().for_each(|w| *w = clip_unit(*w));
    }
}

/// Per-frequency cavity blocks inside the gate support.
#[derive(Debug)]
struct FreqBlock {
    gate: C64,
    s_rt: CMat,
    s_rs: CMat,
    s_st: CMat,
    s_ss: CMat,
}

#[derive(Debug)]
struct Prepared {
    blocks: Vec<FreqBlock>,
    operating_hz: f64,
}

impl Prepared {
    fn new(cavity: &WidebandScattering, gate: GateSetting) -> Self {
        let op = GateOperator::for_cavity(cavity, gate);
        let blocks = op
            .support()
            .into_iter()
            .map(|(m, g)| {
                let s = &cavity.matrices()[m];
                FreqBlock {
                    gate: g,
                    s_rt: CMat::from_dmatrix(&s.s_rt()),
                    s_rs: CMat::from_dmatrix(&s.s_rs()),
                    s_st: CMat::from_dmatrix(&s.s_st()),
                    s_ss: CMat::from_dmatrix(&s.s_ss()),
                }
            })
            .collect();
        Self { blocks, operating_hz: cavity.grid().frequency(cavity.operating_index()) }
    }
}

/// Scratch buffers reused across samples by one worker.
#[derive(Debug)]
pub struct Workspace {
    lu: DenseLu,
    u: Vec<C64>,
    z: Vec<C64>,
    scratch: Vec<C64>,
    row: Vec<C64>,
}

impl Workspace {
    fn new(n_s: usize) -> Self {
        Self { lu: DenseLu::new(n_s), u: vec![ZERO; n_s], z: vec![ZERO; n_s], scratch: vec![ZERO; n_s], row: vec![ZERO; n_s] }
    }
}

/// What the adjoint pass needs from one frequency of one layer: the wave
/// incident on the metasurface `v = S_ST a + S_SS z` and the rows of
/// `S_RS (I - Phi S_SS)^-1`, stored transposed.
#[derive(Debug, Clone)]
struct FreqCache {
    v: Vec<C64>,
    adj: CMat,
}

#[derive(Debug, Clone)]
struct LayerCache {
    loads: Vec<C64>,
    freqs: Vec<FreqCache>,
}

/// Wavefronts `a(1), ..., a(L+1)` of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub readout: f64,
    pub wavefronts: Vec<Vec<C64>>,
}

#[derive(Debug, Clone)]
pub struct WpnnModel {
    cavity: Arc<WidebandScattering>,
    encoding: EncodingKind,
    gate: GateSetting,
    weights: WeightMatrix,
    prepared: Arc<Prepared>,
}

impl WpnnModel {
    pub fn new(cavity: Arc<WidebandScattering>, encoding: EncodingKind, gate: GateSetting, weights: WeightMatrix) -> Result<Self> {
        let p = cavity.partition();
        if p.n_t() != p.n_r() {
            return Err(WpnnError::DimensionMismatch(format!("cascade needs N_T = N_R, got {} and {}", p.n_t(), p.n_r())));
        }
        if weights.n_s() != p.n_s() {
            return Err(WpnnError::DimensionMismatch(format!("{} weight rows for {} metasurface ports", weights.n_s(), p.n_s())));
        }
        if matches!(gate.tau, crate::timegate::Tau::Finite(_)) && cavity.grid().len < 2 {
            return Err(WpnnError::GridError("time gating needs a wideband cavity".into()));
        }
        let prepared = Arc::new(Prepared::new(&cavity, gate));
        Ok(Self { cavity, encoding, gate, weights, prepared })
    }

    /// Same cavity and gate with new weights; reuses the prepared blocks.
    pub fn with_weights(&self, weights: WeightMatrix) -> Result<Self> {
        if weights.n_s() != self.weights.n_s() {
            return Err(WpnnError::DimensionMismatch("weight rows differ from the cavity".into()));
        }
        Ok(Self { weights, ..self.clone() })
    }

    pub fn cavity(&self) -> &Arc<WidebandScattering> {
        &self.cavity
    }

    pub fn encoding(&self) -> EncodingKind {
        self.encoding
    }

    pub fn gate(&self) -> GateSetting {
        self.gate
    }

    pub fn depth(&self) -> usize {
        self.weights.depth()
    }

    pub fn mode(&self) -> ArchitectureMode {
        self.weights.mode()
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut WeightMatrix {
        &mut self.weights
    }

    pub fn n_s(&self) -> usize {
        self.weights.n_s()
    }

    pub fn n_t(&self) -> usize {
        self.cavity.partition().n_t()
    }

    /// Number of frequencies each layer evaluation touches.
    pub fn gate_support(&self) -> usize {
        self.prepared.blocks.len()
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(self.n_s())
    }

    pub fn loads(&self, x: f64, layer: usize) -> Vec<C64> {
        self.weights.column(layer).iter().map(|&w| self.encoding.reflection(x, w)).collect()
    }

    /// `b = H(r) a` with the gated channel; optionally records adjoint data.
    fn apply_layer(&self, loads: &[C64], a: &[C64], ws: &mut Workspace, mut cache: Option<&mut LayerCache>) -> Result<Vec<C64>> {
        let n_s = self.n_s();
        let n_r = self.n_t();
        let mut b = vec![ZERO; n_r];
        let mut b_m = vec![ZERO; n_r];
        for blk in &self.prepared.blocks {
            {
                let m = ws.lu.matrix_mut();
                for i in 0..n_s {
                    let ri = loads[i];
                    let src = blk.s_ss.row(i);
                    let dst = &mut m[i * n_s..(i + 1) * n_s];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d = -ri * s;
                    }
                    dst[i] += ONE;
                }
            }
            if !ws.lu.factor() || ws.lu.pivot_ratio() < EPS_MARG {
                return Err(WpnnError::SingularResolvent(format!("pivot ratio {:.3e}", ws.lu.pivot_ratio())));
            }
            blk.s_st.matvec_into(a, &mut ws.u);
            for i in 0..n_s {
                ws.z[i] = loads[i] * ws.u[i];
            }
            ws.lu.solve_in_place(&mut ws.z, &mut ws.scratch);
            blk.s_rt.matvec_into(a, &mut b_m);
            blk.s_rs.matvec_add_into(&ws.z, &mut b_m);
            for (bi, bm) in b.iter_mut().zip(&b_m) {
                *bi += blk.gate * bm;
            }
            if let Some(c) = cache.as_deref_mut() {
                let mut v = ws.u.clone();
                blk.s_ss.matvec_add_into(&ws.z, &mut v);
                let mut adj = CMat::zeros(n_r, n_s);
                for k in 0..n_r {
                    ws.row.copy_from_slice(blk.s_rs.row(k));
                    ws.lu.solve_transpose_in_place(&mut ws.row, &mut ws.scratch);
                    adj.data[k * n_s..(k + 1) * n_s].copy_from_slice(&ws.row);
                }
                c.freqs.push(FreqCache { v, adj });
            }
        }
        if b.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(WpnnError::SingularResolvent("non-finite wavefront".into()));
        }
        Ok(b)
    }

    /// Final wavefront `b(L)` for an arbitrary first-layer input `a`.
    pub fn propagate(&self, x: f64, a: &[C64]) -> Result<Vec<C64>> {
        check_domain(x)?;
        if a.len() != self.n_t() {
            return Err(WpnnError::DimensionMismatch(format!("input wavefront of length {}", a.len())));
        }
        let mut ws = self.workspace();
        let mut cur = a.to_vec();
        for l in 0..self.depth() {
            cur = self.apply_layer(&self.loads(x, l), &cur, &mut ws, None)?;
        }
        Ok(cur)
    }

    /// Gated channel matrix of layer `l` at datum `x`.
    pub fn layer_channel(&self, x: f64, layer: usize) -> Result<DMatrix<C64>> {
        check_domain(x)?;
        let n = self.n_t();
        let loads = self.loads(x, layer);
        let mut ws = self.workspace();
        let mut h = DMatrix::from_element(n, n, ZERO);
        for j in 0..n {
            let mut e = vec![ZERO; n];
            e[j] = ONE;
            let col = self.apply_layer(&loads, &e, &mut ws, None)?;
            for i in 0..n {
                h[(i, j)] = col[i];
            }
        }
        Ok(h)
    }

    fn readout_of(b: &[C64]) -> f64 {
        b.iter().map(|z| z.re).sum::<f64>() / b.len() as f64
    }

    pub fn forward_traced(&self, x: f64) -> Result<ForwardTrace> {
        check_domain(x)?;
        let mut ws = self.workspace();
        let mut wavefronts = vec![vec![ONE; self.n_t()]];
        for l in 0..self.depth() {
            let b = self.apply_layer(&self.loads(x, l), wavefronts.last().unwrap(), &mut ws, None)?;
            wavefronts.push(b);
        }
        Ok(ForwardTrace { readout: Self::readout_of(wavefronts.last().unwrap()), wavefronts })
    }

    pub fn forward(&self, x: f64) -> Result<f64> {
        let mut ws = self.workspace();
        self.forward_with(x, &mut ws)
    }

    pub fn forward_with(&self, x: f64, ws: &mut Workspace) -> Result<f64> {
        check_domain(x)?;
        let mut a = vec![ONE; self.n_t()];
        for l in 0..self.depth() {
            a = self.apply_layer(&self.loads(x, l), &a, ws, None)?;
        }
        Ok(Self::readout_of(&a))
    }

    /// Readout and its gradient with respect to the stored weights.
    pub fn readout_gradient_with(&self, x: f64, ws: &mut Workspace) -> Result<(f64, Vec<f64>)> {
        check_domain(x)?;
        let depth = self.depth();
        let n_s = self.n_s();
        let n_r = self.n_t();
        let mut caches = Vec::with_capacity(depth);
        let mut a = vec![ONE; n_r];
        for l in 0..depth {
            let mut cache = LayerCache { loads: self.loads(x, l), freqs: Vec::with_capacity(self.prepared.blocks.len()) };
            a = self.apply_layer(&cache.loads.clone(), &a, ws, Some(&mut cache))?;
            caches.push(cache);
        }
        let y = Self::readout_of(&a);

        // Adjoint: dy = Re(lambda^T db) at each layer output.
        let mut lambda = vec![C64::new(1.0 / n_r as f64, 0.0); n_r];
        let mut per_layer = vec![0.0; n_s * depth];
        let mut mu = vec![ZERO; n_s];
        let mut gl = vec![ZERO; n_r];
        for l in (0..depth).rev() {
            let cache = &caches[l];
            let mut c = vec![ZERO; n_s];
            let mut next = vec![ZERO; n_r];
            for (blk, fc) in self.prepared.blocks.iter().zip(&cache.freqs) {
                for (g, lam) in gl.iter_mut().zip(&lambda) {
                    *g = blk.gate * lam;
                }
                fc.adj.matvec_t_into(&gl, &mut mu);
                for i in 0..n_s {
                    c[i] += mu[i] * fc.v[i];
                    mu[i] *= cache.loads[i];
                }
                blk.s_rt.matvec_t_add_into(&gl, &mut next);
                blk.s_st.matvec_t_add_into(&mu, &mut next);
            }
            let w = self.weights.column(l);
            for i in 0..n_s {
                per_layer[l * n_s + i] = (c[i] * self.encoding.derivative(x, w[i])).re;
            }
            lambda = next;
        }
        let grad = match self.mode() {
            ArchitectureMode::IndependentWeights => per_layer,
            ArchitectureMode::SharedWeights => (0..n_s).map(|i| (0..depth).map(|l| per_layer[l * n_s + i]).sum()).collect(),
        };
        Ok((y, grad))
    }

    pub fn readout_gradient(&self, x: f64) -> Result<(f64, Vec<f64>)> {
        let mut ws = self.workspace();
        self.readout_gradient_with(x, &mut ws)
    }

    /// Elementwise forward, order preserving.
    pub fn batch_forward(&self, xs: &[f64]) -> Result<Vec<f64>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            xs.par_iter().map_init(|| self.workspace(), |ws, &x| self.forward_with(x, ws)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            let mut ws = self.workspace();
            xs.iter().map(|&x| self.forward_with(x, &mut ws)).collect()
        }
    }

    pub fn operating_hz(&self) -> f64 {
        self.prepared.operating_hz
    }

    pub fn to_checkpoint(&self) -> ModelCheckpoint {
        ModelCheckpoint {
            encoding: self.encoding,
            gate: self.gate,
            depth: self.depth(),
            mode: self.mode(),
            n_s: self.n_s(),
            weights: (0..self.n_s()).map(|i| (0..self.depth()).map(|l| self.weights.column(l)[i]).collect()).collect(),
            cavity: None,
        }
    }

    pub fn from_checkpoint(cavity: Arc<WidebandScattering>, ck: &ModelCheckpoint) -> Result<Self> {
        if ck.weights.len() != ck.n_s || ck.weights.iter().any(|r| r.len() != ck.depth) {
            return Err(WpnnError::DimensionMismatch("checkpoint weight matrix does not match n_s x depth".into()));
        }
        let columns: Vec<Vec<f64>> = (0..ck.depth).map(|l| ck.weights.iter().map(|r| r[l]).collect()).collect();
        let weights = WeightMatrix::from_columns(&columns, ck.mode)?;
        Self::new(cavity, ck.encoding, ck.gate, weights)
    }
}

/// Serialized model: architecture plus the row-major `N_S x L` weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub encoding: EncodingKind,
    pub gate: GateSetting,
    pub depth: usize,
    pub mode: ArchitectureMode,
    pub n_s: usize,
    pub weights: Vec<Vec<f64>>,
    /// Where the cavity came from (path or content hash); informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity: Option<String>,
}

impl ModelCheckpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `sum (p - y)^2 / sum y^2`.
pub fn nmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() || targets.is_empty() {
        return Err(WpnnError::DimensionMismatch(format!("{} predictions for {} targets", predictions.len(), targets.len())));
    }
    let den: f64 = targets.iter().map(|y| y * y).sum();
    if den == 0.0 {
        return Err(WpnnError::DegenerateTarget);
    }
    let num: f64 = predictions.iter().zip(targets).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok(num / den)
}
