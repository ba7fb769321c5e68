use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Work (multiply-adds) below which matrix products stay on the calling thread.
const PAR_THRESHOLD: usize = 1 << 16;

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Tensor {
            rows,
            cols,
            values: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows * cols != values.len() {
            return Err(Error::shape(
                "tensor",
                format!(
                    "{rows}x{cols} needs {} values, got {}",
                    rows * cols,
                    values.len()
                ),
            ));
        }
        Ok(Tensor { rows, cols, values })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("tensor", "ragged rows"));
        }
        Ok(Tensor {
            rows: rows.len(),
            cols,
            values: rows.concat(),
        })
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            rows: 1,
            cols: 1,
            values: vec![value],
        }
    }

    pub fn row_vector(values: Vec<f64>) -> Self {
        Tensor {
            rows: 1,
            cols: values.len(),
            values,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    /// Scalar value of a 1x1 tensor.
    pub fn item(&self) -> Option<f64> {
        (self.values.len() == 1).then(|| self.values[0])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.values[c * self.rows + r] = self.values[r * self.cols + c];
            }
        }
        out
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "matmul",
                format!("{:?} x {:?}", self.shape(), other.shape()),
            ));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = Tensor::zeros(n, m);
        let kernel = |(r, out_row): (usize, &mut [f64])| {
            let a_row = &self.values[r * k..(r + 1) * k];
            for (p, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.values[p * m..(p + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        };
        if m > 0 {
            if n * k * m >= PAR_THRESHOLD {
                out.values.par_chunks_mut(m).enumerate().for_each(kernel);
            } else {
                out.values.chunks_mut(m).enumerate().for_each(kernel);
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.cols {
            return Err(Error::shape(
                "matmul_t",
                format!("{:?} x {:?}ᵀ", self.shape(), other.shape()),
            ));
        }
        let (n, k, m) = (self.rows, self.cols, other.rows);
        let mut out = Tensor::zeros(n, m);
        let kernel = |(r, out_row): (usize, &mut [f64])| {
            let a_row = &self.values[r * k..(r + 1) * k];
            for (c, o) in out_row.iter_mut().enumerate() {
                let b_row = &other.values[c * k..(c + 1) * k];
                *o = a_row.iter().zip(b_row).map(|(a, b)| a * b).sum();
            }
        };
        if m > 0 {
            if n * k * m >= PAR_THRESHOLD {
                out.values.par_chunks_mut(m).enumerate().for_each(kernel);
            } else {
                out.values.chunks_mut(m).enumerate().for_each(kernel);
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "t_matmul",
                format!("{:?}ᵀ x {:?}", self.shape(), other.shape()),
            ));
        }
        let (k, n, m) = (self.rows, self.cols, other.cols);
        let mut out = Tensor::zeros(n, m);
        for p in 0..k {
            let a_row = &self.values[p * n..(p + 1) * n];
            let b_row = &other.values[p * m..(p + 1) * m];
            for (r, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.values[r * m..(r + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                "add",
                format!("{:?} + {:?}", self.shape(), other.shape()),
            ));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&self) -> Tensor {
        let mut out = self.clone();
        for r in 0..self.rows {
            softmax_in_place(out.row_mut(r));
        }
        out
    }

    /// Row-wise log-softmax (log-sum-exp with max subtraction).
    pub fn log_softmax_rows(&self) -> Tensor {
        let mut out = self.clone();
        for r in 0..self.rows {
            let row = out.row_mut(r);
            let lse = log_sum_exp(row);
            row.iter_mut().for_each(|v| *v -= lse);
        }
        out
    }

    /// Index of the largest entry per row, first index on ties.
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|r| {
                let row = self.row(r);
                let mut best = 0;
                for (i, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().values(), &[3.0, 7.0]);
    }

    #[test]
    fn transposed_products_agree() {
        let a = Tensor::from_vec(2, 3, vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.5]).unwrap();
        let b = Tensor::from_vec(4, 3, (0..12).map(|i| i as f64 * 0.25 - 1.0).collect()).unwrap();
        assert_eq!(a.matmul_t(&b).unwrap(), a.matmul(&b.transpose()).unwrap());
        let c = Tensor::from_vec(2, 4, (0..8).map(|i| i as f64).collect()).unwrap();
        assert_eq!(a.t_matmul(&c).unwrap(), a.transpose().matmul(&c).unwrap());
    }

    #[test]
    fn shape_errors() {
        let a = Tensor::zeros(2, 3);
        assert!(a.matmul(&a).is_err());
        assert!(Tensor::from_vec(2, 2, vec![1.0]).is_err());
    }

    #[test]
    fn softmax_uniform_and_stable() {
        let t = Tensor::from_rows(&[vec![0.0, 0.0], vec![1000.0, 0.0]]).unwrap();
        let s = t.softmax_rows();
        assert_eq!(s.row(0), &[0.5, 0.5]);
        assert!((s.get(1, 0) - 1.0).abs() < 1e-12);
        let ls = t.log_softmax_rows();
        assert!((ls.get(1, 1) + 1000.0).abs() < 1e-9);
    }

    #[test]
    fn argmax_first_on_ties() {
        let t = Tensor::from_rows(&[vec![1.0, 1.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(t.argmax_rows(), vec![0, 1]);
    }
}
