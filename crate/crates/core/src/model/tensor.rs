//! Dense row-major matrices over f64. Vectors are 1×n tensors.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn vector(n: usize) -> Self {
        Self::zeros(1, n)
    }

    pub fn scalar(x: f64) -> Self {
        Tensor { rows: 1, cols: 1, data: vec![x] }
    }

    /// Glorot-uniform initialisation.
    pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
        Tensor { rows, cols, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.rows, self.cols)
    }

    pub fn fill(&mut self, x: f64) {
        self.data.iter_mut().for_each(|v| *v = x);
    }

    /// `out += x · self`, with `x` of length `rows`.
    pub fn vecmat_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(i)) {
                *o += xi * w;
            }
        }
    }

    /// `x · self + bias`.
    pub fn affine(&self, x: &[f64], bias: &Tensor) -> Vec<f64> {
        let mut out = bias.data.clone();
        self.vecmat_acc(x, &mut out);
        out
    }

    /// `out += self · dy`, i.e. the gradient with respect to the input of
    /// `x · self` given the output gradient `dy`.
    pub fn back_acc(&self, dy: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o += self.row(i).iter().zip(dy).map(|(w, d)| w * d).sum::<f64>();
        }
    }

    /// `self += x ⊗ dy`.
    pub fn add_outer(&mut self, x: &[f64], dy: &[f64]) {
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (w, d) in self.row_mut(i).iter_mut().zip(dy) {
                *w += xi * d;
            }
        }
    }

    pub fn add_slice(&mut self, v: &[f64]) {
        for (a, b) in self.data.iter_mut().zip(v) {
            *a += b;
        }
    }

    pub fn add_to_row(&mut self, i: usize, v: &[f64]) {
        for (a, b) in self.row_mut(i).iter_mut().zip(v) {
            *a += b;
        }
    }
}

pub fn tanh_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.tanh());
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut e: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter_mut().for_each(|x| *x /= z);
    e
}

/// `log softmax(logits)[i]` without forming the full distribution.
pub fn log_softmax_at(logits: &[f64], i: usize) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|x| (x - m).exp()).sum();
    logits[i] - m - z.ln()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
