//! Small dense complex kernels for the training hot path.
//!
//! `nalgebra` backs the public scattering operations; these row-major
//! helpers avoid per-call allocation when the same block sizes are
//! factorized hundreds of thousands of times during training.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn from_dmatrix(m: &DMatrix<C64>) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Self { rows, cols, data }
    }

    pub fn to_dmatrix(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.data[i * self.cols + j])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `out = self * v`
    pub fn matvec_into(&self, v: &[C64], out: &mut [C64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
    }

    /// `out += self * v`
    pub fn matvec_add_into(&self, v: &[C64], out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o += dot(self.row(i), v);
        }
    }

    /// `out = self^T * v` (plain transpose, no conjugation).
    pub fn matvec_t_into(&self, v: &[C64], out: &mut [C64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|o| *o = ZERO);
        self.matvec_t_add_into(v, out);
    }

    /// `out += self^T * v`
    pub fn matvec_t_add_into(&self, v: &[C64], out: &mut [C64]) {
        for (i, &vi) in v.iter().enumerate() {
            if vi == ZERO {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
    }
}

#[inline]
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re - x.im * y.im;
        im += x.re * y.im + x.im * y.re;
    }
    C64::new(re, im)
}

/// In-place LU factorization with partial pivoting, `P A = L U`.
///
/// The buffers are reused across calls; `factor` overwrites them.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<C64>,
    perm: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
}

impl DenseLu {
    pub fn new(n: usize) -> Self {
        Self { n, lu: vec![ZERO; n * n], perm: (0..n).collect(), min_pivot: 0.0, max_pivot: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Mutable access to the row-major matrix that `factor` will decompose.
    pub fn matrix_mut(&mut self) -> &mut [C64] {
        &mut self.lu
    }

    /// Factorizes the matrix currently stored in the buffer. Returns `false`
    /// when a zero pivot is hit.
    pub fn factor(&mut self) -> bool {
        let n = self.n;
        for (i, p) in self.perm.iter_mut().enumerate() {
            *p = i;
        }
        self.min_pivot = f64::INFINITY;
        self.max_pivot = 0.0;
        let a = &mut self.lu;
        for k in 0..n {
            let mut piv = k;
            let mut best = a[k * n + k].norm_sqr();
            for i in k + 1..n {
                let v = a[i * n + k].norm_sqr();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                self.min_pivot = 0.0;
                return false;
            }
            if piv != k {
                for j in 0..n {
                    a.swap(k * n + j, piv * n + j);
                }
                self.perm.swap(k, piv);
            }
            let pivot = a[k * n + k];
            let pabs = pivot.norm();
            self.min_pivot = self.min_pivot.min(pabs);
            self.max_pivot = self.max_pivot.max(pabs);
            let inv = ONE / pivot;
            let (head, tail) = a.split_at_mut((k + 1) * n);
            let row_k = &head[k * n..k * n + n];
            for row_i in tail.chunks_exact_mut(n) {
                let f = row_i[k] * inv;
                row_i[k] = f;
                if f == ZERO {
                    continue;
                }
                for j in k + 1..n {
                    row_i[j] -= f * row_k[j];
                }
            }
        }
        true
    }

    /// Ratio of smallest to largest pivot magnitude of the last factorization.
    pub fn pivot_ratio(&self) -> f64 {
        if self.max_pivot == 0.0 {
            0.0
        } else {
            self.min_pivot / self.max_pivot
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [C64], scratch: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            scratch[i] = b[self.perm[i]];
        }
        let a = &self.lu;
        for i in 0..n {
            let mut s = scratch[i];
            for j in 0..i {
                s -= a[i * n + j] * scratch[j];
            }
            scratch[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = scratch[i];
            for j in i + 1..n {
                s -= a[i * n + j] * scratch[j];
            }
            scratch[i] = s / a[i * n + i];
        }
        b[..n].copy_from_slice(&scratch[..n]);
    }

    /// Solves `A^T x = b` in place (plain transpose).
    pub fn solve_transpose_in_place(&self, b: &mut [C64], scratch: &mut [C64]) {
        let n = self.n;
        let a = &self.lu;
        // U^T y = b
        scratch[..n].copy_from_slice(&b[..n]);
        for i in 0..n {
            let y = scratch[i] / a[i * n + i];
            scratch[i] = y;
            for j in i + 1..n {
                scratch[j] -= a[i * n + j] * y;
            }
        }
        // L^T z = y
        for i in (0..n).rev() {
            let z = scratch[i];
            for j in 0..i {
                scratch[j] -= a[i * n + j] * z;
            }
        }
        // x = P^T z
        for i in 0..n {
            b[self.perm[i]] = scratch[i];
        }
    }
}
