//! Mean-square optimal quadratic approximation of a Hamiltonian.
//!
//! The fitted model α + βᵀξ + ξᵀRξ/2 lives in centered variables ξ = x − μ
//! and approximates η = H − E H. The Gaussian fit inverts the operator
//! K(R) = ΣRΣ + ΘRΘ/4; the general fit works from arbitrary moment data.

use std::sync::Arc;

use crate::algebra::{build_quadratic, CcrStructure, OperatorPolynomial};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::moments::{self, GaussianState, MomentData};

const SIGMA_PD_TOL: f64 = 1e-12;
const BLOCK_RESIDUAL_TOL: f64 = 1e-9;
const SCHUR_DEGENERACY_TOL: f64 = 1e-10;

/// α + βᵀξ + ξᵀRξ/2.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub alpha: f64,
    pub beta: Vector,
    pub r: Matrix,
}

impl QuadraticModel {
    /// R is symmetrized exactly.
    pub fn new(alpha: f64, beta: Vector, r: Matrix) -> Result<Self> {
        let n = beta.len();
        if r.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "R is {}x{} but beta has length {n}",
                r.nrows(),
                r.ncols()
            )));
        }
        Ok(Self { alpha, beta, r: linalg::symmetrize(&r) })
    }

    pub fn zero(n: usize) -> Self {
        Self { alpha: 0.0, beta: Vector::zeros(n), r: Matrix::zeros(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// The model as a polynomial in the variables of `ccr`.
    pub fn to_polynomial(&self, ccr: Arc<CcrStructure>) -> Result<OperatorPolynomial> {
        build_quadratic(self.alpha, &self.beta, &self.r, ccr)
    }

    /// Coefficients (a, b, R) of a + bᵀx + xᵀRx/2 equal to
    /// `mean` + α + βᵀ(x − μ) + (x − μ)ᵀR(x − μ)/2.
    pub fn uncentered(&self, mu: &Vector, mean: f64) -> (f64, Vector, Matrix) {
        let rmu = &self.r * mu;
        let a = mean + self.alpha - self.beta.dot(mu) + 0.5 * mu.dot(&rmu);
        (a, &self.beta - rmu, self.r.clone())
    }
}

/// K(R) = ΣRΣ + ΘRΘ/4.
pub fn k_apply(r: &Matrix, sigma: &Matrix, theta: &Matrix) -> Matrix {
    linalg::symmetrize(&(sigma * r * sigma + theta * r * theta * 0.25))
}

/// Ξ = Σ^{-1/2}ΘΣ^{-1/2}/2.
pub fn xi_matrix(sigma: &Matrix, theta: &Matrix) -> Result<Matrix> {
    let min = linalg::min_eigenvalue(&linalg::symmetrize(sigma))?;
    if min <= SIGMA_PD_TOL {
        return Err(Error::Admissibility(format!(
            "covariance is not positive definite (min eigenvalue {min:e})"
        )));
    }
    let s = linalg::sym_inv_sqrt(&linalg::symmetrize(sigma))?;
    Ok(linalg::antisymmetrize(&(&s * theta * &s * 0.5)))
}

/// Ξ = U(J⊗℧)Uᵀ with U orthogonal, columns ordered v_1..v_ν, w_1..w_ν, so
/// that Ξv_k = −ω_k w_k and Ξw_k = ω_k v_k. `u_tilde` is Σ^{-1/2}U when
/// built from a state, and U itself otherwise.
#[derive(Debug, Clone)]
pub struct SpectralFactorization {
    pub u: Matrix,
    pub omega: Vector,
    pub u_tilde: Matrix,
}

fn project_out(x: &Vector, basis: &[Vector]) -> Vector {
    let mut y = x.clone();
    // two passes keep the result orthogonal to working precision
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&y);
            y -= b * c;
        }
    }
    y
}

/// Takes the candidate with the largest component orthogonal to `basis`.
fn best_candidate(cands: &[Vector], used: &[bool], basis: &[Vector]) -> Option<(usize, Vector)> {
    let mut best: Option<(usize, Vector, f64)> = None;
    for (i, c) in cands.iter().enumerate() {
        if used[i] {
            continue;
        }
        let p = project_out(c, basis);
        let norm = p.norm();
        if best.as_ref().is_none_or(|(_, _, b)| norm > *b) {
            best = Some((i, p, norm));
        }
    }
    best.filter(|(_, _, norm)| *norm > 1e-3).map(|(i, p, norm)| (i, p / norm))
}

/// Orthogonal block-diagonalization of an antisymmetric matrix, from the
/// eigenvectors of −Ξ² = ΞᵀΞ. Each eigenvector v with a nonzero eigenvalue
/// brings its partner w = −Ξv/ω; kernel vectors are paired with ω = 0.
pub fn block_diagonalize_antisymmetric(xi: &Matrix) -> Result<SpectralFactorization> {
    let n = xi.nrows();
    if xi.ncols() != n || !n.is_multiple_of(2) {
        return Err(Error::Dimension(format!("expected an even square matrix, got {}x{}", n, xi.ncols())));
    }
    let xi = linalg::antisymmetrize(xi);
    let nu = n / 2;
    let p = linalg::symmetrize(&(xi.transpose() * &xi));
    let eig = linalg::jacobi_eigen(&p)?;
    let lmax = eig.values.iter().fold(0.0f64, |m, &x| m.max(x));
    let thr = 1e-14 * lmax;

    // descending eigenvalue order
    let order: Vec<usize> = (0..n).rev().collect();
    let cands: Vec<Vector> = order.iter().map(|&i| eig.vectors.column(i).into_owned()).collect();
    let lams: Vec<f64> = order.iter().map(|&i| eig.values[i]).collect();
    let n_active = lams.iter().filter(|&&l| l > thr).count();

    let mut used = vec![false; n];
    let mut basis: Vec<Vector> = Vec::with_capacity(n);
    let mut vs = Vec::with_capacity(nu);
    let mut ws = Vec::with_capacity(nu);
    let mut omega = Vec::with_capacity(nu);

    let active_mask: Vec<bool> = lams.iter().map(|&l| l <= thr).collect();
    while basis.len() < n_active && vs.len() < nu {
        let mask: Vec<bool> = used.iter().zip(&active_mask).map(|(u, k)| *u || *k).collect();
        let Some((i, v)) = best_candidate(&cands, &mask, &basis) else { break };
        used[i] = true;
        let xv = &xi * &v;
        let om = xv.norm();
        if om * om <= thr {
            break;
        }
        basis.push(v.clone());
        let w = project_out(&(-xv / om), &basis);
        let w = &w / w.norm();
        basis.push(w.clone());
        vs.push(v);
        ws.push(w);
        omega.push(om);
    }
    while vs.len() < nu {
        let Some((i, v)) = best_candidate(&cands, &used, &basis) else { break };
        used[i] = true;
        basis.push(v.clone());
        let Some((k, w)) = best_candidate(&cands, &used, &basis) else { break };
        used[k] = true;
        basis.push(w.clone());
        vs.push(v);
        ws.push(w);
        omega.push(0.0);
    }
    if vs.len() != nu {
        return Err(Error::Numerical("block diagonalization lost orthogonality".into()));
    }

    let mut u = Matrix::zeros(n, n);
    for k in 0..nu {
        u.set_column(k, &vs[k]);
        u.set_column(nu + k, &ws[k]);
    }
    let omega = Vector::from_vec(omega);
    let d = block_form(&omega);
    let residual = (&xi * &u - &u * &d).amax();
    if residual > BLOCK_RESIDUAL_TOL * xi.amax().max(1.0) {
        return Err(Error::Numerical(format!(
            "block diagonalization residual {residual:e} exceeds tolerance"
        )));
    }
    Ok(SpectralFactorization { u_tilde: u.clone(), u, omega })
}

/// J ⊗ diag(ω).
pub fn block_form(omega: &Vector) -> Matrix {
    let nu = omega.len();
    let mut d = Matrix::zeros(2 * nu, 2 * nu);
    for k in 0..nu {
        d[(k, nu + k)] = omega[k];
        d[(nu + k, k)] = -omega[k];
    }
    d
}

/// Factorization of Ξ for the state (Σ, Θ), with Ũ = Σ^{-1/2}U.
pub fn spectral_factorization(sigma: &Matrix, theta: &Matrix) -> Result<SpectralFactorization> {
    let xi = xi_matrix(sigma, theta)?;
    let mut f = block_diagonalize_antisymmetric(&xi)?;
    f.u_tilde = linalg::sym_inv_sqrt(&linalg::symmetrize(sigma))? * &f.u;
    Ok(f)
}

fn check_shapes(gamma: &Matrix, sigma: &Matrix, theta: &Matrix) -> Result<usize> {
    let n = sigma.nrows();
    if gamma.shape() != (n, n) || sigma.shape() != (n, n) || theta.shape() != (n, n) {
        return Err(Error::Dimension("Gamma, Sigma and Theta must be square of equal size".into()));
    }
    Ok(n)
}

/// K⁻¹(Γ) through the block diagonalization of Ξ.
pub fn k_inverse_spectral(gamma: &Matrix, sigma: &Matrix, theta: &Matrix) -> Result<Matrix> {
    let n = check_shapes(gamma, sigma, theta)?;
    if n % 2 != 0 {
        return Err(Error::Dimension(format!("dimension {n} is odd")));
    }
    let nu = n / 2;
    let f = spectral_factorization(sigma, theta)?;
    if let Some(w) = f.omega.iter().find(|&&w| 1.0 - w * w <= 1e-12) {
        return Err(Error::Admissibility(format!(
            "quantum covariance is not positive definite (symplectic contraction {w})"
        )));
    }
    let g = f.u_tilde.transpose() * linalg::symmetrize(gamma) * &f.u_tilde;
    let j = linalg::symplectic(nu);
    let jgj = &j * &g * &j;
    let y = Matrix::from_fn(n, n, |a, b| {
        let (wa, wb) = (f.omega[a % nu], f.omega[b % nu]);
        let m = wa * wb;
        (g[(a, b)] - m * jgj[(a, b)]) / (1.0 - m * m)
    });
    Ok(linalg::symmetrize(&(&f.u_tilde * y * f.u_tilde.transpose())))
}

/// K⁻¹(Γ) from the dense matrix of K on the symmetric matrices.
pub fn k_inverse_direct(gamma: &Matrix, sigma: &Matrix, theta: &Matrix) -> Result<Matrix> {
    let n = check_shapes(gamma, sigma, theta)?;
    let k = linalg::sym_operator_matrix(n, |r| k_apply(r, sigma, theta));
    let rhs = linalg::sym_to_coords(&linalg::symmetrize(gamma));
    let x = linalg::lu_solve(&k, &rhs)
        .ok_or_else(|| Error::Admissibility("the operator K is singular".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Admissibility("the operator K is singular".into()));
    }
    Ok(linalg::sym_from_coords(&x, n))
}

/// Theorem-2 fit: β = Σ⁻¹ε, R = K⁻¹(Γ), α = −⟨Σ, R⟩/2.
pub fn optimal_quadratic_gaussian(h: &OperatorPolynomial, state: &GaussianState) -> Result<QuadraticModel> {
    state.require_strictly_admissible()?;
    let hm = moments::hamiltonian_moments(h, state)?;
    let sigma = state.sigma();
    let beta = linalg::sym_inverse(sigma)? * &hm.epsilon;
    let r = k_inverse_spectral(&hm.gamma, sigma, state.ccr().theta())?;
    let alpha = -0.5 * linalg::frobenius_inner(sigma, &r);
    Ok(QuadraticModel { alpha, beta, r })
}

/// Theorem-1 fit for general moment data, through the Schur complement
/// G = Ψ − Σ⟨Σ,·⟩ − T†Σ⁻¹T on the symmetric matrices.
pub fn optimal_quadratic_general(md: &MomentData) -> Result<QuadraticModel> {
    let n = md.dim();
    let sigma = &md.sigma;
    let min = linalg::min_eigenvalue(sigma)?;
    if min <= SIGMA_PD_TOL {
        return Err(Error::Admissibility(format!(
            "covariance is not positive definite (min eigenvalue {min:e})"
        )));
    }
    let sinv = linalg::sym_inverse(sigma)?;
    let g_op = |r: &Matrix| {
        let tr = md.tau.apply(r);
        md.psi.apply(r) - sigma * linalg::frobenius_inner(sigma, r) - md.tau.adjoint_apply(&(&sinv * tr))
    };
    let g = linalg::symmetrize(&linalg::sym_operator_matrix(n, g_op));
    let gmin = linalg::min_eigenvalue(&g)?;
    if gmin <= SCHUR_DEGENERACY_TOL {
        return Err(Error::Degeneracy(format!(
            "Schur complement of the normal equations is not positive definite (min eigenvalue {gmin:e})"
        )));
    }
    let rhs = &md.gamma - md.tau.adjoint_apply(&(&sinv * &md.epsilon));
    let x = linalg::lu_solve(&g, &(linalg::sym_to_coords(&rhs) * 2.0))
        .ok_or_else(|| Error::Degeneracy("Schur complement is singular".into()))?;
    let r = linalg::sym_from_coords(&x, n);
    let beta = &sinv * (&md.epsilon - md.tau.apply(&r) * 0.5);
    let alpha = -0.5 * linalg::frobenius_inner(sigma, &r);
    Ok(QuadraticModel { alpha, beta, r })
}

/// Residuals of the three normal equations at a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalResiduals {
    /// |2α + ⟨Σ, R⟩|
    pub alpha: f64,
    /// max |2Σβ + T(R) − 2ε|
    pub beta: f64,
    /// max |Ψ(R)/2 + T†β + αΣ − Γ|
    pub r: f64,
}

impl NormalResiduals {
    pub fn max(&self) -> f64 {
        self.alpha.max(self.beta).max(self.r)
    }
}

pub fn normal_equation_residuals(model: &QuadraticModel, md: &MomentData) -> NormalResiduals {
    let sigma = &md.sigma;
    let ra = 2.0 * model.alpha + linalg::frobenius_inner(sigma, &model.r);
    let rb = sigma * &model.beta * 2.0 + md.tau.apply(&model.r) - &md.epsilon * 2.0;
    let rr = md.psi.apply(&model.r) * 0.5 + md.tau.adjoint_apply(&model.beta) + sigma * model.alpha - &md.gamma;
    NormalResiduals { alpha: ra.abs(), beta: rb.amax(), r: rr.amax() }
}

/// Q = E(η²) − 2(εᵀβ + ⟨Γ, R⟩/2) + ⟨ζ, Π(ζ)⟩ for ζ = (α, β, R).
pub fn q_from_moments(model: &QuadraticModel, md: &MomentData, mean_square: f64) -> f64 {
    let (a, b, r) = (model.alpha, &model.beta, &model.r);
    let sigma = &md.sigma;
    let sr = linalg::frobenius_inner(sigma, r);
    let quad = a * (a + 0.5 * sr)
        + b.dot(&(sigma * b + md.tau.apply(r) * 0.5))
        + linalg::frobenius_inner(r, &(sigma * (0.5 * a) + md.tau.adjoint_apply(b) * 0.5 + md.psi.apply(r) * 0.25));
    mean_square - 2.0 * (md.epsilon.dot(b) + 0.5 * linalg::frobenius_inner(&md.gamma, r)) + quad
}

/// E((η − h_{α,β,R})²) in the Gaussian state.
pub fn evaluate_q(model: &QuadraticModel, h: &OperatorPolynomial, state: &GaussianState) -> Result<f64> {
    if model.dim() != state.dim() {
        return Err(Error::Dimension("model and state dimensions differ".into()));
    }
    let eta = moments::centered_hamiltonian(h, state)?;
    let mean_square = moments::expectation(&eta.multiply(&eta)?, state)?.re;
    let hm = moments::hamiltonian_moments(h, state)?;
    let md = MomentData {
        epsilon: hm.epsilon,
        gamma: hm.gamma,
        sigma: state.sigma().clone(),
        tau: crate::tensor::Tensor3::zeros(state.dim()),
        psi: moments::gaussian_psi(state),
    };
    Ok(q_from_moments(model, &md, mean_square))
}
