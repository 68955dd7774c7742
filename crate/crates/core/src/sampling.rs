//! Seeded random instances for self-tests and property checks.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{CcrStructure, Monomial, OperatorPolynomial};
use crate::linalg::{self, Matrix, Vector};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn random_vector(rng: &mut impl Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| uniform(rng, -1.0, 1.0))
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| uniform(rng, -1.0, 1.0))
}

pub fn random_symmetric(rng: &mut impl Rng, n: usize) -> Matrix {
    linalg::symmetrize(&random_matrix(rng, n, n))
}

/// GGᵀ for a random square G; almost surely positive definite.
pub fn random_psd(rng: &mut impl Rng, n: usize) -> Matrix {
    let g = random_matrix(rng, n, n);
    linalg::symmetrize(&(&g * g.transpose()))
}

pub fn random_theta(rng: &mut impl Rng, n: usize) -> Matrix {
    linalg::antisymmetrize(&(random_matrix(rng, n, n) * 2.0))
}

/// Either the canonical J⊗I or a random antisymmetric Θ, with equal odds.
pub fn random_ccr(rng: &mut impl Rng, n: usize) -> Arc<CcrStructure> {
    let theta = if rng.random::<bool>() { linalg::symplectic(n / 2) } else { random_theta(rng, n) };
    Arc::new(CcrStructure::new(theta).expect("antisymmetric by construction"))
}

/// Σ with Σ + iΘ/2 ⪰ `margin`·I: a random PSD part plus (ρ(Θ)/2 + margin)I.
pub fn random_admissible_sigma(rng: &mut impl Rng, theta: &Matrix, margin: f64) -> Matrix {
    let n = theta.nrows();
    let rho = theta.singular_values().max();
    let shift = 0.5 * rho + margin + uniform(rng, 0.0, 0.5);
    random_psd(rng, n) * (1.0 / n as f64) + Matrix::identity(n, n) * shift
}

/// A random self-adjoint polynomial of degree at most `degree`, built as
/// Σ c(m + m†) over random monomials with real c.
pub fn random_self_adjoint(rng: &mut impl Rng, ccr: Arc<CcrStructure>, degree: usize, terms: usize) -> OperatorPolynomial {
    let n = ccr.dim();
    let mut p = OperatorPolynomial::zero(ccr.clone());
    for _ in 0..terms {
        let len = rng.random_range(0..=degree);
        let idx: Vec<usize> = (0..len).map(|_| rng.random_range(0..n)).collect();
        let c = Complex64::new(uniform(rng, -1.0, 1.0), 0.0);
        let m = OperatorPolynomial::from_monomials(ccr.clone(), [Monomial::new(c, idx)]).expect("indices in range");
        p = p.add(&m.add(&m.adjoint()).expect("same structure")).expect("same structure");
    }
    p
}

/// Sequence of `len` indices below `n`.
pub fn random_indices(rng: &mut impl Rng, n: usize, len: usize) -> Vec<usize> {
    (0..len).map(|_| rng.random_range(0..n)).collect()
}
