//! Port-partitioned scattering algebra.
//!
//! A static linear network with `N = N_T + N_R + N_S` ports is terminated at
//! its `N_S` metasurface ports by tunable loads. The resulting end-to-end
//! channel between transmit and receive antennas is
//!
//! ```text
//! H(r) = S_RT + S_RS (I - Phi S_SS)^-1 Phi S_ST,    Phi = diag(r)
//! ```
//!
//! All scattering parameters share one 50 ohm reference; no impedance
//! transformations happen anywhere in the crate.

use nalgebra::{DMatrix, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WpnnError};
use crate::linalg::{C64, ONE, ZERO};

/// Slack on the passivity bound `sigma_max(S) <= 1 + EPS_PASS`.
pub const EPS_PASS: f64 = 1e-9;
/// Margin below unity required of the spectral radius of `Phi S_SS`.
pub const EPS_MARG: f64 = 1e-12;
/// Spectral radii closer than this to unity are flagged in diagnostics.
pub const NEAR_CRITICAL: f64 = 1e-6;

/// Assignment of network ports to transmitters, receivers and metasurface
/// elements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortPartition {
    tx: Vec<usize>,
    rx: Vec<usize>,
    pm: Vec<usize>,
}

impl PortPartition {
    pub fn new(tx: Vec<usize>, rx: Vec<usize>, pm: Vec<usize>) -> Result<Self> {
        if tx.is_empty() || rx.is_empty() || pm.is_empty() {
            return Err(WpnnError::InvalidPartition(format!(
                "every port set needs at least one port (N_T={}, N_R={}, N_S={})",
                tx.len(),
                rx.len(),
                pm.len()
            )));
        }
        let n = tx.len() + rx.len() + pm.len();
        let mut seen = vec![false; n];
        for &p in tx.iter().chain(&rx).chain(&pm) {
            if p >= n {
                return Err(WpnnError::InvalidPartition(format!("port index {p} out of range 0..{n}")));
            }
            if seen[p] {
                return Err(WpnnError::InvalidPartition(format!("port index {p} assigned twice")));
            }
            seen[p] = true;
        }
        Ok(Self { tx, rx, pm })
    }

    /// Ports ordered tx, then rx, then pm.
    pub fn contiguous(n_t: usize, n_r: usize, n_s: usize) -> Result<Self> {
        Self::new(
            (0..n_t).collect(),
            (n_t..n_t + n_r).collect(),
            (n_t + n_r..n_t + n_r + n_s).collect(),
        )
    }

    pub fn tx(&self) -> &[usize] {
        &self.tx
    }
    pub fn rx(&self) -> &[usize] {
        &self.rx
    }
    pub fn pm(&self) -> &[usize] {
        &self.pm
    }
    pub fn n_t(&self) -> usize {
        self.tx.len()
    }
    pub fn n_r(&self) -> usize {
        self.rx.len()
    }
    pub fn n_s(&self) -> usize {
        self.pm.len()
    }
    pub fn total(&self) -> usize {
        self.tx.len() + self.rx.len() + self.pm.len()
    }

    /// Same partition with the metasurface ports listed in a different order.
    pub fn with_pm_order(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.pm.len() {
            return Err(WpnnError::DimensionMismatch("pm order length".into()));
        }
        let pm = order.iter().map(|&i| self.pm[i]).collect();
        Self::new(self.tx.clone(), self.rx.clone(), pm)
    }
}

/// Scattering matrix of the static network at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    entries: DMatrix<C64>,
    partition: PortPartition,
    frequency_hz: f64,
}

impl ScatteringMatrix {
    /// Builds a scattering matrix, rejecting non-square, mis-sized or active
    /// (gain-exhibiting) data.
    pub fn new(entries: DMatrix<C64>, partition: PortPartition, frequency_hz: f64) -> Result<Self> {
        let s = Self::idealized(entries, partition, frequency_hz)?;
        let report = validate_passivity(&s);
        if !report.passes {
            return Err(WpnnError::PassivityViolation { sigma_max: report.sigma_max, frequency_hz });
        }
        Ok(s)
    }

    /// Builds a scattering matrix with shape checks only. Used for idealized
    /// variants such as a network with its metasurface block removed, which
    /// need not be passive.
    pub fn idealized(entries: DMatrix<C64>, partition: PortPartition, frequency_hz: f64) -> Result<Self> {
        let (r, c) = entries.shape();
        if r != c || r != partition.total() {
            return Err(WpnnError::DimensionMismatch(format!(
                "scattering matrix is {r}x{c}, partition needs {n}x{n}",
                n = partition.total()
            )));
        }
        Ok(Self { entries, partition, frequency_hz })
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }
    pub fn partition(&self) -> &PortPartition {
        &self.partition
    }
    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<C64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.entries[(rows[i], cols[j])])
    }

    pub fn s_rt(&self) -> DMatrix<C64> {
        self.block(&self.partition.rx, &self.partition.tx)
    }
    pub fn s_rs(&self) -> DMatrix<C64> {
        self.block(&self.partition.rx, &self.partition.pm)
    }
    pub fn s_st(&self) -> DMatrix<C64> {
        self.block(&self.partition.pm, &self.partition.tx)
    }
    pub fn s_ss(&self) -> DMatrix<C64> {
        self.block(&self.partition.pm, &self.partition.pm)
    }

    /// Copy with the metasurface-to-metasurface block set to zero, i.e. the
    /// same network without mutual coupling between the tunable elements.
    pub fn with_zeroed_pm_coupling(&self) -> Self {
        let mut entries = self.entries.clone();
        for &i in &self.partition.pm {
            for &j in &self.partition.pm {
                entries[(i, j)] = ZERO;
            }
        }
        Self { entries, partition: self.partition.clone(), frequency_hz: self.frequency_hz }
    }
}

/// Reflection coefficients of the tunable loads.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadVector {
    reflections: Vec<C64>,
}

impl LoadVector {
    pub fn new(reflections: Vec<C64>) -> Result<Self> {
        if let Some((i, r)) = reflections.iter().enumerate().find(|(_, r)| !(r.norm() <= 1.0 + EPS_PASS)) {
            return Err(WpnnError::Config(format!("load {i} has |r| = {} > 1 (active load)", r.norm())));
        }
        Ok(Self { reflections })
    }

    pub fn zeros(n: usize) -> Self {
        Self { reflections: vec![ZERO; n] }
    }

    pub fn reflections(&self) -> &[C64] {
        &self.reflections
    }

    pub fn len(&self) -> usize {
        self.reflections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reflections.is_empty()
    }
}

/// End-to-end channel between transmitters and receivers.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub entries: DMatrix<C64>,
    pub frequency_hz: f64,
}

/// Result of [`validate_passivity`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassivityReport {
    pub sigma_max: f64,
    pub passes: bool,
}

/// Spectral radius of the bounce operator together with a near-criticality
/// flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventDiagnostics {
    pub spectral_radius: f64,
    pub near_critical: bool,
}

/// Largest singular value of `S` against `1 + EPS_PASS`.
pub fn validate_passivity(s: &ScatteringMatrix) -> PassivityReport {
    let sigma_max = largest_singular_value(s.entries());
    PassivityReport { sigma_max, passes: sigma_max <= 1.0 + EPS_PASS }
}

pub(crate) fn largest_singular_value(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

fn check_loads(s: &ScatteringMatrix, loads: &LoadVector) -> Result<()> {
    if loads.len() != s.partition.n_s() {
        return Err(WpnnError::DimensionMismatch(format!(
            "{} loads for {} metasurface ports",
            loads.len(),
            s.partition.n_s()
        )));
    }
    Ok(())
}

fn bounce_operator(loads: &LoadVector, s_ss: &DMatrix<C64>) -> DMatrix<C64> {
    let mut m = s_ss.clone();
    for (i, r) in loads.reflections.iter().enumerate() {
        for j in 0..m.ncols() {
            m[(i, j)] *= *r;
        }
    }
    m
}

/// `max |eig(diag(r) S_SS)|`.
pub fn spectral_radius(loads: &LoadVector, s_ss: &DMatrix<C64>) -> Result<f64> {
    let (r, c) = s_ss.shape();
    if r != c || r != loads.len() {
        return Err(WpnnError::DimensionMismatch(format!("S_SS is {r}x{c}, {} loads", loads.len())));
    }
    if r == 0 {
        return Ok(0.0);
    }
    let m = bounce_operator(loads, s_ss);
    if m.iter().all(|z| *z == ZERO) {
        return Ok(0.0);
    }
    let schur = Schur::try_new(m, 1e-15, 10_000).ok_or(WpnnError::EigenFailure(r))?;
    let eig = schur.eigenvalues().ok_or(WpnnError::EigenFailure(r))?;
    Ok(eig.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

pub fn resolvent_diagnostics(loads: &LoadVector, s_ss: &DMatrix<C64>) -> Result<ResolventDiagnostics> {
    let rho = spectral_radius(loads, s_ss)?;
    Ok(ResolventDiagnostics { spectral_radius: rho, near_critical: rho > 1.0 - NEAR_CRITICAL })
}

fn guard_radius(loads: &LoadVector, s_ss: &DMatrix<C64>) -> Result<()> {
    let rho = spectral_radius(loads, s_ss)?;
    if !(rho < 1.0 - EPS_MARG) {
        return Err(WpnnError::SingularResolvent(format!("spectral radius {rho} is not below 1 - {EPS_MARG}")));
    }
    Ok(())
}

/// Exact end-to-end channel via an LU solve of `(I - Phi S_SS) X = Phi S_ST`.
pub fn end_to_end_channel(s: &ScatteringMatrix, loads: &LoadVector) -> Result<ChannelMatrix> {
    check_loads(s, loads)?;
    let s_ss = s.s_ss();
    guard_radius(loads, &s_ss)?;
    channel_unguarded(s, loads, &s_ss)
}

/// Channel evaluation without the eigenvalue guard; singularity is still
/// caught by the LU factorization. Used where passivity of `S` and
/// `|r_i| <= 1` have already been established.
pub(crate) fn channel_unguarded(s: &ScatteringMatrix, loads: &LoadVector, s_ss: &DMatrix<C64>) -> Result<ChannelMatrix> {
    let n_s = loads.len();
    let mut a = bounce_operator(loads, s_ss);
    a.neg_mut();
    for i in 0..n_s {
        a[(i, i)] += ONE;
    }
    let mut rhs = s.s_st();
    for (i, r) in loads.reflections.iter().enumerate() {
        for j in 0..rhs.ncols() {
            rhs[(i, j)] *= *r;
        }
    }
    let lu = a.lu();
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| WpnnError::SingularResolvent("LU factorization found a zero pivot".into()))?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(WpnnError::SingularResolvent("non-finite solution".into()));
    }
    let entries = s.s_rt() + s.s_rs() * x;
    Ok(ChannelMatrix { entries, frequency_hz: s.frequency_hz })
}

/// Partial Neumann sum `S_RT + S_RS [sum_{k=0}^{K} (Phi S_SS)^k] Phi S_ST`.
pub fn neumann_channel(s: &ScatteringMatrix, loads: &LoadVector, order: usize) -> Result<ChannelMatrix> {
    check_loads(s, loads)?;
    let s_ss = s.s_ss();
    guard_radius(loads, &s_ss)?;
    let bounce = bounce_operator(loads, &s_ss);
    let mut term = s.s_st();
    for (i, r) in loads.reflections.iter().enumerate() {
        for j in 0..term.ncols() {
            term[(i, j)] *= *r;
        }
    }
    let mut acc = term.clone();
    for _ in 0..order {
        term = &bounce * &term;
        acc += &term;
    }
    let entries = s.s_rt() + s.s_rs() * acc;
    Ok(ChannelMatrix { entries, frequency_hz: s.frequency_hz })
}
