//! Gaussian reference states and their mixed moments.
//!
//! In a Gaussian state with quantum covariance S = Σ + iΘ/2, the moment of an
//! ordered product of centered observables ξ_{i_1}⋯ξ_{i_2r} is the sum, over
//! the (2r−1)!! ways of splitting the positions 1..2r into pairs (a, b) with
//! a < b, of the products of s_{i_a i_b}. Odd-order moments vanish. Position
//! order matters because s_jk = conj(s_kj) differs from s_kj when θ_jk ≠ 0.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::{CcrStructure, OperatorPolynomial};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector, ADMISSIBILITY_TOL};
use crate::tensor::{Tensor3, Tensor4};

/// Longest product whose moment is evaluated; 15!! ≈ 2·10⁶ pairings.
pub const MAX_MOMENT_ORDER: usize = 16;

const SYMMETRY_TOL: f64 = 1e-12;
const GAMMA_ASYMMETRY_TOL: f64 = 1e-10;
const PHI_REVERSAL_TOL: f64 = 1e-10;

/// Mean μ and real covariance Σ of a Gaussian state over a CCR structure.
#[derive(Debug, Clone)]
pub struct GaussianState {
    mu: Vector,
    sigma: Matrix,
    ccr: Arc<CcrStructure>,
    s: DMatrix<Complex64>,
}

impl GaussianState {
    /// Requires Σ symmetric within 1e-12 (then symmetrized exactly) and
    /// Σ + iΘ/2 ⪰ 0 in the sense that its real embedding has smallest
    /// eigenvalue at least −1e-10.
    pub fn new(mu: Vector, sigma: Matrix, ccr: Arc<CcrStructure>) -> Result<Self> {
        let n = ccr.dim();
        if mu.len() != n || sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::Dimension(format!(
                "state dimensions (mu: {}, sigma: {}x{}) do not match n = {n}",
                mu.len(),
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        let asym = linalg::asymmetry(&sigma);
        if asym > SYMMETRY_TOL {
            return Err(Error::Validation(format!(
                "covariance is not symmetric (max deviation {asym:e})"
            )));
        }
        let sigma = linalg::symmetrize(&sigma);
        let margin = linalg::admissibility_margin(&sigma, ccr.theta())?;
        if margin < -ADMISSIBILITY_TOL {
            return Err(Error::Admissibility(format!(
                "sigma + i*theta/2 is not positive semi-definite (min eigenvalue {margin:e})"
            )));
        }
        let theta = ccr.theta();
        let s = DMatrix::from_fn(n, n, |j, k| Complex64::new(sigma[(j, k)], 0.5 * theta[(j, k)]));
        Ok(Self { mu, sigma, ccr, s })
    }

    pub fn mu(&self) -> &Vector {
        &self.mu
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn ccr(&self) -> &Arc<CcrStructure> {
        &self.ccr
    }

    pub fn dim(&self) -> usize {
        self.ccr.dim()
    }

    /// S = Σ + iΘ/2.
    pub fn quantum_covariance(&self) -> &DMatrix<Complex64> {
        &self.s
    }

    pub fn s(&self, j: usize, k: usize) -> Complex64 {
        self.s[(j, k)]
    }

    /// Smallest eigenvalue of the real embedding of S.
    pub fn admissibility_margin(&self) -> Result<f64> {
        linalg::admissibility_margin(&self.sigma, self.ccr.theta())
    }

    /// S ≻ 0 with margin above 1e-10.
    pub fn require_strictly_admissible(&self) -> Result<()> {
        let margin = self.admissibility_margin()?;
        if margin > ADMISSIBILITY_TOL {
            Ok(())
        } else {
            Err(Error::Admissibility(format!(
                "quantum covariance is singular or indefinite (min eigenvalue {margin:e}); \
                 sigma = {:?}, mu = {:?}",
                self.sigma.as_slice(),
                self.mu.as_slice()
            )))
        }
    }

    fn check_polynomial(&self, p: &OperatorPolynomial) -> Result<()> {
        if p.ccr().as_ref() == self.ccr.as_ref() {
            Ok(())
        } else {
            Err(Error::Structure(
                "polynomial and state use different CCR structures".into(),
            ))
        }
    }
}

fn check_indices(indices: &[usize], n: usize) -> Result<()> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(Error::Dimension(format!("index {bad} out of range for n = {n}")));
    }
    if indices.len() > MAX_MOMENT_ORDER {
        return Err(Error::Validation(format!(
            "moment of order {} exceeds the supported maximum {MAX_MOMENT_ORDER}",
            indices.len()
        )));
    }
    Ok(())
}

/// Sum over regular pairings, enumerated with a mixed-radix counter: the
/// l-th pair joins the first still-unpaired position with one of the
/// 2r − 2l − 1 later unpaired positions.
fn regular_pairing_sum(seq: &[usize], s: &DMatrix<Complex64>) -> Complex64 {
    let m = seq.len();
    if m % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    if m == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let r = m / 2;
    let radix: Vec<usize> = (0..r).map(|l| m - 2 * l - 1).collect();
    let mut counter = vec![0usize; r];
    let mut remaining = Vec::with_capacity(m);
    let mut total = Complex64::new(0.0, 0.0);
    loop {
        remaining.clear();
        remaining.extend(0..m);
        let mut prod = Complex64::new(1.0, 0.0);
        for &choice in &counter {
            let first = remaining.remove(0);
            let second = remaining.remove(choice);
            prod *= s[(seq[first], seq[second])];
        }
        total += prod;

        let mut level = r;
        loop {
            if level == 0 {
                return total;
            }
            level -= 1;
            counter[level] += 1;
            if counter[level] < radix[level] {
                break;
            }
            counter[level] = 0;
        }
    }
}

/// E(ξ_{i_1}⋯ξ_{i_m}) in the Gaussian state by Wick's theorem.
pub fn wick_moment(indices: &[usize], state: &GaussianState) -> Result<Complex64> {
    check_indices(indices, state.dim())?;
    Ok(regular_pairing_sum(indices, &state.s))
}

fn pairing_recursion(seq: &[usize], s: &DMatrix<Complex64>) -> Complex64 {
    match seq.len() {
        0 => Complex64::new(1.0, 0.0),
        m if m % 2 == 1 => Complex64::new(0.0, 0.0),
        m => {
            let mut total = Complex64::new(0.0, 0.0);
            let mut rest = Vec::with_capacity(m - 2);
            for k in 1..m {
                rest.clear();
                rest.extend(seq[1..k].iter().chain(&seq[k + 1..]).copied());
                total += s[(seq[0], seq[k])] * pairing_recursion(&rest, s);
            }
            total
        }
    }
}

/// Same moment as [`wick_moment`], by the recursion
/// E(ζ_1⋯ζ_m) = Σ_{k≥2} s_{1k} E(product without positions 1 and k).
pub fn wick_moment_recursive(indices: &[usize], state: &GaussianState) -> Result<Complex64> {
    check_indices(indices, state.dim())?;
    Ok(pairing_recursion(indices, &state.s))
}

/// s_jk s_lm + s_jl s_km + s_jm s_kl.
pub fn fourth_moment_closed(j: usize, k: usize, l: usize, m: usize, state: &GaussianState) -> Complex64 {
    let s = |a, b| state.s(a, b);
    s(j, k) * s(l, m) + s(j, l) * s(k, m) + s(j, m) * s(k, l)
}

/// E(p) for a polynomial already written in centered variables ξ.
pub fn expectation(p_centered: &OperatorPolynomial, state: &GaussianState) -> Result<Complex64> {
    state.check_polynomial(p_centered)?;
    let mut total = Complex64::new(0.0, 0.0);
    for (seq, c) in p_centered.terms() {
        total += c * wick_moment(seq, state)?;
    }
    Ok(total)
}

/// η = center(h, μ) − E(center(h, μ)), the centered Hamiltonian.
pub fn centered_hamiltonian(h: &OperatorPolynomial, state: &GaussianState) -> Result<OperatorPolynomial> {
    state.check_polynomial(h)?;
    let hc = h.center(&state.mu)?;
    let mean = expectation(&hc, state)?;
    hc.sub(&OperatorPolynomial::constant(hc.ccr().clone(), mean))
}

/// ε, Γ and E(H) for the mean-square fit of a self-adjoint Hamiltonian.
#[derive(Debug, Clone)]
pub struct HamiltonianMoments {
    pub epsilon: Vector,
    pub gamma: Matrix,
    /// E(H) = E(center(h, μ)); real up to rounding for self-adjoint h.
    pub mean: Complex64,
}

/// Computes ε_j = Re E(ηξ_j) and γ_jk = Re E(ηξ_jξ_k) in one pass over the
/// centered monomials.
pub fn hamiltonian_moments(h: &OperatorPolynomial, state: &GaussianState) -> Result<HamiltonianMoments> {
    state.check_polynomial(h)?;
    h.require_self_adjoint("Hamiltonian")?;
    let n = state.dim();
    let hc = h.center(&state.mu)?;

    let mut mean = Complex64::new(0.0, 0.0);
    let mut eps = vec![Complex64::new(0.0, 0.0); n];
    let mut gam = DMatrix::<Complex64>::zeros(n, n);
    let mut seq = Vec::with_capacity(hc.degree() + 2);
    for (mono, c) in hc.terms() {
        check_indices(mono, n)?;
        if mono.len() + 2 > MAX_MOMENT_ORDER {
            return Err(Error::Validation(format!(
                "Hamiltonian degree {} is too high for moment evaluation",
                mono.len()
            )));
        }
        mean += c * regular_pairing_sum(mono, &state.s);
        seq.clear();
        seq.extend_from_slice(mono);
        if mono.len() % 2 == 1 {
            for (j, e) in eps.iter_mut().enumerate() {
                seq.push(j);
                *e += c * regular_pairing_sum(&seq, &state.s);
                seq.pop();
            }
        } else {
            for j in 0..n {
                seq.push(j);
                for k in 0..n {
                    seq.push(k);
                    gam[(j, k)] += c * regular_pairing_sum(&seq, &state.s);
                    seq.pop();
                }
                seq.pop();
            }
        }
    }

    let epsilon = Vector::from_iterator(n, eps.iter().map(|e| e.re));
    let gamma = Matrix::from_fn(n, n, |j, k| (gam[(j, k)] - mean * state.s(j, k)).re);
    let asym = linalg::asymmetry(&gamma);
    if asym > GAMMA_ASYMMETRY_TOL * gamma.amax().max(1.0) {
        return Err(Error::Consistency(format!(
            "Re E(eta xi xi^T) is not symmetric (max deviation {asym:e})"
        )));
    }
    Ok(HamiltonianMoments { epsilon, gamma: linalg::symmetrize(&gamma), mean })
}

pub fn epsilon_vector(h: &OperatorPolynomial, state: &GaussianState) -> Result<Vector> {
    Ok(hamiltonian_moments(h, state)?.epsilon)
}

pub fn gamma_matrix(h: &OperatorPolynomial, state: &GaussianState) -> Result<Matrix> {
    Ok(hamiltonian_moments(h, state)?.gamma)
}

/// φ_jklm = Re E(ξ_jξ_kξ_lξ_m) in the Gaussian state, written out as
/// σσ-terms minus θθ-terms over four.
pub fn gaussian_phi(state: &GaussianState) -> Tensor4 {
    let sg = &state.sigma;
    let th = state.ccr.theta();
    Tensor4::from_fn(state.dim(), |j, k, l, m| {
        sg[(j, k)] * sg[(l, m)] + sg[(j, l)] * sg[(k, m)] + sg[(j, m)] * sg[(k, l)]
            - 0.25 * (th[(j, k)] * th[(l, m)] + th[(j, l)] * th[(k, m)] + th[(j, m)] * th[(k, l)])
    })
}

/// Partial symmetrization Ψ of Φ over the eight index permutations that
/// swap within (j,k), within (l,m), and the two pairs.
pub fn psi_from_phi(phi: &Tensor4) -> Result<Tensor4> {
    let n = phi.dim();
    let scale = phi.max_abs().max(1.0);
    for j in 0..n {
        for k in 0..n {
            for l in 0..n {
                for m in 0..n {
                    let d = (phi.get(j, k, l, m) - phi.get(m, l, k, j)).abs();
                    if d > PHI_REVERSAL_TOL * scale {
                        return Err(Error::Validation(format!(
                            "fourth-moment tensor lacks reversal symmetry at ({j},{k},{l},{m}): {d:e}"
                        )));
                    }
                }
            }
        }
    }
    Ok(Tensor4::from_fn(n, |j, k, l, m| {
        (phi.get(j, k, l, m)
            + phi.get(j, k, m, l)
            + phi.get(k, j, l, m)
            + phi.get(k, j, m, l)
            + phi.get(l, m, j, k)
            + phi.get(m, l, j, k)
            + phi.get(l, m, k, j)
            + phi.get(m, l, k, j))
            / 8.0
    }))
}

/// Ψ(R) = Σ⟨Σ, R⟩ + 2(ΣRΣ + ΘRΘ/4) as a tensor symmetric in (j,k), (l,m)
/// and under pair exchange.
pub fn gaussian_psi(state: &GaussianState) -> Tensor4 {
    let sg = &state.sigma;
    let th = state.ccr.theta();
    Tensor4::from_fn(state.dim(), |j, k, l, m| {
        sg[(j, k)] * sg[(l, m)] + sg[(j, l)] * sg[(k, m)] + sg[(j, m)] * sg[(k, l)]
            - 0.25 * (th[(j, l)] * th[(k, m)] + th[(j, m)] * th[(k, l)])
    })
}

/// Moment inputs to the general quadratic fit.
#[derive(Debug, Clone)]
pub struct MomentData {
    pub epsilon: Vector,
    pub gamma: Matrix,
    pub sigma: Matrix,
    pub tau: Tensor3,
    pub psi: Tensor4,
}

impl MomentData {
    /// Validates dimensions and the symmetries the fit relies on: Γ and Σ
    /// symmetric, τ totally symmetric, Ψ symmetric in each index pair and
    /// under pair exchange.
    pub fn new(epsilon: Vector, gamma: Matrix, sigma: Matrix, tau: Tensor3, psi: Tensor4) -> Result<Self> {
        let n = sigma.nrows();
        if epsilon.len() != n
            || gamma.shape() != (n, n)
            || sigma.ncols() != n
            || tau.dim() != n
            || psi.dim() != n
        {
            return Err(Error::Dimension("moment data components have inconsistent sizes".into()));
        }
        for (name, m) in [("gamma", &gamma), ("sigma", &sigma)] {
            let a = linalg::asymmetry(m);
            if a > SYMMETRY_TOL * m.amax().max(1.0) {
                return Err(Error::Validation(format!("{name} is not symmetric ({a:e})")));
            }
        }
        let tscale = tau.max_abs().max(1.0);
        let pscale = psi.max_abs().max(1.0);
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let t = tau.get(j, k, l);
                    let perms = [tau.get(j, l, k), tau.get(k, j, l), tau.get(k, l, j), tau.get(l, j, k), tau.get(l, k, j)];
                    if perms.iter().any(|p| (p - t).abs() > SYMMETRY_TOL * tscale) {
                        return Err(Error::Validation("tau is not totally symmetric".into()));
                    }
                    for m in 0..n {
                        let p = psi.get(j, k, l, m);
                        let others = [psi.get(k, j, l, m), psi.get(j, k, m, l), psi.get(l, m, j, k)];
                        if others.iter().any(|o| (o - p).abs() > SYMMETRY_TOL * pscale) {
                            return Err(Error::Validation("psi lacks the pair symmetries".into()));
                        }
                    }
                }
            }
        }
        Ok(Self {
            epsilon,
            gamma: linalg::symmetrize(&gamma),
            sigma: linalg::symmetrize(&sigma),
            tau,
            psi,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }
}

/// ε, Γ, Σ with τ = 0 and Ψ from the Gaussian closed form. Needs S ≻ 0.
pub fn gaussian_moment_tensors(h: &OperatorPolynomial, state: &GaussianState) -> Result<MomentData> {
    state.require_strictly_admissible()?;
    let hm = hamiltonian_moments(h, state)?;
    let n = state.dim();
    Ok(MomentData {
        epsilon: hm.epsilon,
        gamma: hm.gamma,
        sigma: state.sigma.clone(),
        tau: Tensor3::zeros(n),
        psi: gaussian_psi(state),
    })
}
