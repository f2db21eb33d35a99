//! JSON interchange for wideband scattering data.
//!
//! ```text
//! {"n_t", "n_r", "n_s", "frequencies_hz": [...],
//!  "matrices": [[[[re, im], ...], ...], ...]}
//! ```
//!
//! `matrices[f][i][j]` is entry `(i, j)` at frequency index `f`, ports
//! ordered tx, rx, pm. Emitted values are rounded to 15 significant digits
//! so files are reproducible across platforms.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cavity::{FrequencyGrid, WidebandScattering};
use crate::error::{Result, WpnnError};
use crate::linalg::C64;
use crate::scattering::{PortPartition, ScatteringMatrix};

/// Operating frequency assumed for files that do not carry one.
pub const DEFAULT_OPERATING_HZ: f64 = 140e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringFile {
    pub n_t: usize,
    pub n_r: usize,
    pub n_s: usize,
    pub frequencies_hz: Vec<f64>,
    pub matrices: Vec<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operating_frequency_hz: Option<f64>,
}

/// Rounds to 15 significant decimal digits.
pub fn quantize(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { 0.0 } else { v };
    }
    format!("{v:.14e}").parse().unwrap_or(v)
}

impl ScatteringFile {
    pub fn from_wideband(ws: &WidebandScattering) -> Self {
        let p = ws.partition();
        let order: Vec<usize> = p.tx().iter().chain(p.rx()).chain(p.pm()).copied().collect();
        let matrices = ws
            .matrices()
            .iter()
            .map(|s| {
                order
                    .iter()
                    .map(|&i| {
                        order
                            .iter()
                            .map(|&j| {
                                let z = s.entries()[(i, j)];
                                [quantize(z.re), quantize(z.im)]
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            n_t: p.n_t(),
            n_r: p.n_r(),
            n_s: p.n_s(),
            frequencies_hz: ws.grid().frequencies().into_iter().map(quantize).collect(),
            matrices,
            operating_frequency_hz: Some(quantize(ws.grid().frequency(ws.operating_index()))),
        }
    }

    /// Validates dimensions, grid uniformity and passivity.
    pub fn to_wideband(&self) -> Result<WidebandScattering> {
        let grid = FrequencyGrid::from_samples(&self.frequencies_hz)?;
        if self.matrices.len() != self.frequencies_hz.len() {
            return Err(WpnnError::DimensionMismatch(format!(
                "{} matrices for {} frequencies",
                self.matrices.len(),
                self.frequencies_hz.len()
            )));
        }
        let partition = PortPartition::contiguous(self.n_t, self.n_r, self.n_s)?;
        let n = partition.total();
        let mut out = Vec::with_capacity(self.matrices.len());
        for (fi, rows) in self.matrices.iter().enumerate() {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(WpnnError::DimensionMismatch(format!("matrix {fi} is not {n}x{n}")));
            }
            let m = DMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1]));
            out.push(ScatteringMatrix::new(m, partition.clone(), grid.frequency(fi))?);
        }
        let op = self.operating_frequency_hz.unwrap_or(DEFAULT_OPERATING_HZ);
        let op_index = if op >= grid.start_hz && op <= grid.stop_hz() { grid.nearest_index(op) } else { grid.len / 2 };
        WidebandScattering::new(grid, out, op_index)
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }
}
