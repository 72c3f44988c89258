use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of 64-bit floats.
///
/// Vectors are stored as single-column matrices so that every learnable
/// parameter has the same on-disk shape encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr", into = "TensorRepr")]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    shape: [usize; 2],
    values: Vec<f64>,
}

impl TryFrom<TensorRepr> for Tensor2 {
    type Error = Error;

    fn try_from(repr: TensorRepr) -> Result<Self> {
        Tensor2::from_vec(repr.shape[0], repr.shape[1], repr.values)
    }
}

impl From<Tensor2> for TensorRepr {
    fn from(t: Tensor2) -> Self {
        TensorRepr {
            shape: [t.rows, t.cols],
            values: t.data,
        }
    }
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::usage(format!(
                "tensor data length {} does not match shape {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("non-finite tensor entry {bad}")));
        }
        Ok(Tensor2 { rows, cols, data })
    }

    /// Single-column tensor holding `values`.
    pub fn column(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Tensor2::from_vec(n, 1, values)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Tensor2 { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn add_assign(&mut self, other: &Tensor2) {
        assert_eq!(self.shape(), other.shape(), "tensor shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// `out += self · x`
    pub fn matvec_acc(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "matvec input length");
        assert_eq!(out.len(), self.rows, "matvec output length");
        for (r, o) in out.iter_mut().enumerate() {
            *o += dot(self.row(r), x);
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.matvec_acc(x, &mut out);
        out
    }

    /// `out += selfᵀ · y`
    pub fn t_matvec_acc(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.rows, "transposed matvec input length");
        assert_eq!(out.len(), self.cols, "transposed matvec output length");
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            axpy(yr, self.row(r), out);
        }
    }

    /// `self += scale · a bᵀ`
    pub fn add_outer(&mut self, a: &[f64], b: &[f64], scale: f64) {
        assert_eq!(a.len(), self.rows, "outer product rows");
        assert_eq!(b.len(), self.cols, "outer product cols");
        for (r, &ar) in a.iter().enumerate() {
            let s = ar * scale;
            if s == 0.0 {
                continue;
            }
            axpy(s, b, self.row_mut(r));
        }
    }

    /// `out += self[:, c]`, the product with a one-hot vector.
    pub fn column_acc(&self, c: usize, out: &mut [f64]) {
        assert!(c < self.cols, "column index out of range");
        assert_eq!(out.len(), self.rows, "column output length");
        for (r, o) in out.iter_mut().enumerate() {
            *o += self.data[r * self.cols + c];
        }
    }

    /// `self[:, c] += scale · v`
    pub fn add_to_column(&mut self, c: usize, v: &[f64], scale: f64) {
        assert!(c < self.cols, "column index out of range");
        assert_eq!(v.len(), self.rows, "column update length");
        for (r, &x) in v.iter().enumerate() {
            self.data[r * self.cols + c] += scale * x;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for Tensor2 {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Tensor2 {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha · x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
