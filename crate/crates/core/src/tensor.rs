//! Dense real tensors of order three and four over an n-dimensional index
//! space, viewed as linear maps on symmetric matrices.

use crate::linalg::{Matrix, Vector};

/// τ_jkl, acting as T(R)_j = Σ_kl τ_jkl r_kl and T†(β)_kl = Σ_j τ_jkl β_j.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn offset(&self, j: usize, k: usize, l: usize) -> usize {
        (j * self.n + k) * self.n + l
    }

    pub fn get(&self, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.offset(j, k, l)]
    }

    pub fn set(&mut self, j: usize, k: usize, l: usize, v: f64) {
        let o = self.offset(j, k, l);
        self.data[o] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn apply(&self, r: &Matrix) -> Vector {
        let n = self.n;
        Vector::from_fn(n, |j, _| {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += self.get(j, k, l) * r[(k, l)];
                }
            }
            s
        })
    }

    pub fn adjoint_apply(&self, beta: &Vector) -> Matrix {
        let n = self.n;
        Matrix::from_fn(n, n, |k, l| (0..n).map(|j| self.get(j, k, l) * beta[j]).sum())
    }
}

/// ψ_jklm, acting as Ψ(R)_jk = Σ_lm ψ_jklm r_lm.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n * n] }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n);
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        t.set(j, k, l, m, f(j, k, l, m));
                    }
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn offset(&self, j: usize, k: usize, l: usize, m: usize) -> usize {
        ((j * self.n + k) * self.n + l) * self.n + m
    }

    pub fn get(&self, j: usize, k: usize, l: usize, m: usize) -> f64 {
        self.data[self.offset(j, k, l, m)]
    }

    pub fn set(&mut self, j: usize, k: usize, l: usize, m: usize, v: f64) {
        let o = self.offset(j, k, l, m);
        self.data[o] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn apply(&self, r: &Matrix) -> Matrix {
        let n = self.n;
        Matrix::from_fn(n, n, |j, k| {
            let mut s = 0.0;
            for l in 0..n {
                for m in 0..n {
                    s += self.get(j, k, l, m) * r[(l, m)];
                }
            }
            s
        })
    }
}
