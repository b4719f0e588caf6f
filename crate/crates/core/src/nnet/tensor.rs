//! Dense NCHW tensors and 2-D matrices, f64 throughout.

use crate::spectro::{Spectrogram, WINDOW};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Tensor {
        Tensor { n, c, h, w, data: vec![0.0; n * c * h * w] }
    }

    #[inline]
    pub fn idx(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.c + c) * self.h + h) * self.w + w
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> f64 {
        self.data[self.idx(n, c, h, w)]
    }

    /// Stacks spectrograms into a (N, 1, 1024, n_t) batch. All grids must
    /// share the same n_t.
    pub fn from_spectrograms(batch: &[&Spectrogram]) -> Option<Tensor> {
        let n_t = batch.first()?.n_t;
        if batch.iter().any(|s| s.n_t != n_t) {
            return None;
        }
        let mut t = Tensor::zeros(batch.len(), 1, WINDOW, n_t);
        for (i, s) in batch.iter().enumerate() {
            let base = i * WINDOW * n_t;
            for col in 0..n_t {
                for bin in 0..WINDOW {
                    // Spectrogram stores column-major (bin fastest); the
                    // tensor is (bin, col) row-major.
                    t.data[base + bin * n_t + col] = s.grid[col * WINDOW + bin] as f64;
                }
            }
        }
        Some(t)
    }
}

/// Row-major (rows x cols) matrix for embeddings and head outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}
