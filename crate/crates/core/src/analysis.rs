//! Closed-form series expansions of the readout in the datum `x`.
//!
//! Single layer, phase encoding: the Neumann expansion of the resolvent is a
//! Fourier series in `x`, one harmonic per metasurface bounce. Linear
//! encoding gives a power series instead. Without metasurface mutual
//! coupling every layer is affine in `exp(j 2 pi x)` (or `x`), so an
//! `L`-layer cascade has exactly `L + 1` terms.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::encoding::EncodingKind;
use crate::error::{Result, WpnnError};
use crate::linalg::{C64, ONE, ZERO};
use crate::model::WpnnModel;
use crate::rng::{substream, uniform};
use crate::timegate::{GateOperator, Tau};

/// Relative size at which an infinite series is cut.
pub const SERIES_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    /// `y(x) = Re sum_k c_k exp(j 2 pi k x)`
    FourierComplex,
    /// `y(x) = sum_k Re(c_k) x^k`
    PowerReal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCoefficients {
    pub kind: SeriesKind,
    pub coeffs: Vec<C64>,
    /// `true` when the series is finite by construction or the cutoff rule
    /// fired before `max_order`.
    pub converged: bool,
}

impl SeriesCoefficients {
    pub fn evaluate(&self, x: f64) -> f64 {
        match self.kind {
            SeriesKind::FourierComplex => {
                let z = C64::from_polar(1.0, std::f64::consts::TAU * x);
                let mut p = ONE;
                let mut acc = ZERO;
                for c in &self.coeffs {
                    acc += c * p;
                    p *= z;
                }
                acc.re
            }
            SeriesKind::PowerReal => self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c.re),
        }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("order,re,im\n");
        for (k, c) in self.coeffs.iter().enumerate() {
            s.push_str(&format!("{k},{:e},{:e}\n", c.re, c.im));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Largest `|series(x) - forward(x)|` over `xs`.
pub fn max_abs_residual(series: &SeriesCoefficients, xs: &[f64], readouts: &[f64]) -> f64 {
    xs.iter().zip(readouts).map(|(&x, y)| (series.evaluate(x) - y).abs()).fold(0.0, f64::max)
}

fn mean_sum(v: &DVector<C64>) -> C64 {
    v.iter().sum::<C64>() / v.len() as f64
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(WpnnError::ModeError(msg.into()))
    }
}

/// Bounce expansion `c_0 = <S_RT>`, `c_k = <S_RS (D S_SS)^(k-1) D S_ST>`
/// where `<M> = 1^T M 1 / N_R` and `D` is the input-independent load factor.
fn single_layer_series(model: &WpnnModel, max_order: usize) -> (Vec<C64>, bool) {
    let s = model.cavity().operating();
    let d: Vec<C64> = model.weights().column(0).iter().map(|&w| model.encoding().weight_factor(w)).collect();
    let (s_rt, s_rs, s_st, s_ss) = (s.s_rt(), s.s_rs(), s.s_st(), s.s_ss());
    let ones_t = DVector::from_element(s_rt.ncols(), ONE);
    let mut coeffs = vec![mean_sum(&(&s_rt * &ones_t))];
    let mut v = &s_st * &ones_t;
    v.iter_mut().zip(&d).for_each(|(vi, di)| *vi *= di);
    let mut running = 0.0f64;
    for _ in 1..=max_order {
        let out = &s_rs * &v;
        let size = out.norm();
        running = running.max(size);
        if size < SERIES_CUTOFF * running || size == 0.0 {
            return (coeffs, true);
        }
        coeffs.push(mean_sum(&out));
        v = &s_ss * &v;
        v.iter_mut().zip(&d).for_each(|(vi, di)| *vi *= di);
    }
    (coeffs, false)
}

pub fn fourier_single_layer(model: &WpnnModel, max_order: usize) -> Result<SeriesCoefficients> {
    require(model.depth() == 1, "the single-layer Fourier expansion needs depth 1")?;
    require(model.encoding() == EncodingKind::Phase, "the Fourier expansion needs phase encoding; use power_single_layer for linear encoding")?;
    require(model.gate().tau == Tau::Infinite, "the single-layer expansion is defined without time gating")?;
    let (coeffs, converged) = single_layer_series(model, max_order);
    Ok(SeriesCoefficients { kind: SeriesKind::FourierComplex, coeffs, converged })
}

pub fn power_single_layer(model: &WpnnModel, max_order: usize) -> Result<SeriesCoefficients> {
    require(model.depth() == 1, "the single-layer power expansion needs depth 1")?;
    require(model.encoding() == EncodingKind::Linear, "the power expansion needs linear encoding; use fourier_single_layer for phase encoding")?;
    require(model.gate().tau == Tau::Infinite, "the single-layer expansion is defined without time gating")?;
    let (coeffs, converged) = single_layer_series(model, max_order);
    let coeffs = coeffs.into_iter().map(|c| C64::new(c.re, 0.0)).collect();
    Ok(SeriesCoefficients { kind: SeriesKind::PowerReal, coeffs, converged })
}

/// Direct term `T` and per-layer load terms `B(l)` of the gated layer maps
/// with zeroed metasurface coupling: `H(l) = T + s(x) B(l)`.
pub fn affine_layer_terms(model: &WpnnModel) -> Result<(DMatrix<C64>, Vec<DMatrix<C64>>)> {
    let cav = model.cavity();
    let p = cav.partition();
    require(p.n_t() == p.n_r(), "the cascade expansion needs N_T = N_R")?;
    let op = GateOperator::for_cavity(cav, model.gate());
    let n = p.n_t();
    let mut t = DMatrix::from_element(n, n, ZERO);
    let mut b = vec![DMatrix::from_element(n, n, ZERO); model.depth()];
    for (m, g) in op.support() {
        let s = &cav.matrices()[m];
        t += s.s_rt() * g;
        let (s_rs, s_st) = (s.s_rs(), s.s_st());
        for (l, bl) in b.iter_mut().enumerate() {
            let mut scaled = s_st.clone();
            for (i, &w) in model.weights().column(l).iter().enumerate() {
                let f = model.encoding().weight_factor(w) * g;
                for z in scaled.row_mut(i).iter_mut() {
                    *z *= f;
                }
            }
            *bl += &s_rs * scaled;
        }
    }
    Ok((t, b))
}

/// Matrix coefficients of `prod_{l = L..1} (T + s B(l))` in powers of `s`.
pub fn cascade_expansion(t: &DMatrix<C64>, b: &[DMatrix<C64>]) -> Vec<DMatrix<C64>> {
    let n = t.nrows();
    let mut d = vec![DMatrix::<C64>::identity(n, n)];
    for bl in b {
        let mut next = vec![DMatrix::from_element(n, n, ZERO); d.len() + 1];
        for (k, dk) in d.iter().enumerate() {
            next[k] += t * dk;
            next[k + 1] += bl * dk;
        }
        d = next;
    }
    d
}

fn multilayer_coefficients(model: &WpnnModel) -> Result<Vec<C64>> {
    let (t, b) = affine_layer_terms(model)?;
    let n = t.nrows();
    let ones = DVector::from_element(n, ONE);
    Ok(cascade_expansion(&t, &b).iter().map(|dk| mean_sum(&(dk * &ones))).collect())
}

/// Exactly `L + 1` Fourier coefficients of the cascade evaluated on the
/// model's cavity with its metasurface-metasurface block zeroed.
pub fn fourier_multilayer_nomc(model: &WpnnModel) -> Result<SeriesCoefficients> {
    require(model.encoding() == EncodingKind::Phase, "the truncated Fourier expansion needs phase encoding")?;
    Ok(SeriesCoefficients { kind: SeriesKind::FourierComplex, coeffs: multilayer_coefficients(model)?, converged: true })
}

/// Degree-`L` polynomial of the cascade with zeroed metasurface coupling.
pub fn poly_multilayer_nomc(model: &WpnnModel) -> Result<SeriesCoefficients> {
    require(model.encoding() == EncodingKind::Linear, "the polynomial expansion needs linear encoding")?;
    let coeffs = multilayer_coefficients(model)?.into_iter().map(|c| C64::new(c.re, 0.0)).collect();
    Ok(SeriesCoefficients { kind: SeriesKind::PowerReal, coeffs, converged: true })
}

/// Relative residual of the best affine fit of the readout on the encoded
/// loads `[Re r; Im r; 1]` over `samples` random inputs. Zero means the
/// readout is affine in the loads.
pub fn nonlinearity_score(model: &WpnnModel, samples: usize, seed: u64) -> Result<f64> {
    if samples < 8 {
        return Err(WpnnError::Config("nonlinearity score needs at least 8 samples".into()));
    }
    let mut rng = substream(seed, 11);
    let xs: Vec<f64> = (0..samples).map(|_| uniform(&mut rng)).collect();
    let ys = model.batch_forward(&xs)?;
    let cols = match model.mode() {
        crate::model::ArchitectureMode::SharedWeights => 1,
        crate::model::ArchitectureMode::IndependentWeights => model.depth(),
    };
    let n_s = model.n_s();
    let width = 2 * n_s * cols + 1;
    let mut a = DMatrix::<f64>::zeros(samples, width);
    for (row, &x) in xs.iter().enumerate() {
        for l in 0..cols {
            for (i, r) in model.loads(x, l).iter().enumerate() {
                a[(row, 2 * (l * n_s + i))] = r.re;
                a[(row, 2 * (l * n_s + i) + 1)] = r.im;
            }
        }
        a[(row, width - 1)] = 1.0;
    }
    let y = DVector::from_vec(ys);
    let mean = y.mean();
    let spread = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
    if spread == 0.0 {
        return Ok(0.0);
    }
    // Project out an orthonormal basis of the regressors. Linear loads make
    // the columns nearly collinear, so dependent columns are dropped.
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for c in a.column_iter() {
        let norm = c.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = c.into_owned();
        for _ in 0..2 {
            for q in &basis {
                v -= q * q.dot(&v);
            }
        }
        let rest = v.norm();
        if rest > 1e-10 * norm {
            basis.push(v / rest);
        }
    }
    let mut resid = y.clone();
    for _ in 0..2 {
        for q in &basis {
            resid -= q * q.dot(&resid);
        }
    }
    Ok(resid.norm() / spread)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_evaluation() {
        let f = SeriesCoefficients { kind: SeriesKind::FourierComplex, coeffs: vec![C64::new(0.5, 0.0), C64::new(0.0, -1.0)], converged: true };
        assert!((f.evaluate(0.25) - 1.5).abs() < 1e-15);
        let p = SeriesCoefficients { kind: SeriesKind::PowerReal, coeffs: vec![C64::new(1.0, 9.0), C64::new(-2.0, 0.0), C64::new(3.0, 0.0)], converged: true };
        assert!((p.evaluate(0.5) - 0.75).abs() < 1e-15);
        assert_eq!(p.order(), 2);
        assert!(p.to_csv().starts_with("order,re,im\n0,1e0,9e0\n"));
    }

    #[test]
    fn cascade_expansion_of_scalars() {
        let t = DMatrix::from_element(1, 1, C64::new(2.0, 0.0));
        let b = vec![DMatrix::from_element(1, 1, C64::new(3.0, 0.0)), DMatrix::from_element(1, 1, C64::new(5.0, 0.0))];
        // (2 + 5s)(2 + 3s) = 4 + 16 s + 15 s^2
        let d = cascade_expansion(&t, &b);
        let got: Vec<f64> = d.iter().map(|m| m[(0, 0)].re).collect();
        assert_eq!(got, vec![4.0, 16.0, 15.0]);
    }
}
