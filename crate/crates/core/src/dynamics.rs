//! Self-consistent Gaussian moment dynamics of an open quantum system.
//!
//! The system obeys dX = i[H, X]dt − BJBᵀΘ⁻¹X dt/2 + B dW. Replacing H by
//! its Gaussian-optimal quadratic fit at the current (μ, Σ) closes the first
//! two moment equations:
//!
//!   dμ/dt = Θβ − BJBᵀΘ⁻¹μ/2,   dΣ/dt = AΣ + ΣAᵀ + BBᵀ,
//!
//! with drift A = ΘR − BJBᵀΘ⁻¹/2.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::{CcrStructure, OperatorPolynomial};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::moments::{self, GaussianState};
use crate::quadfit::{optimal_quadratic_gaussian, QuadraticModel};

const DET_THETA_TOL: f64 = 1e-12;
const HURWITZ_2X2_TOL: f64 = 1e-12;
const HURWITZ_RESIDUAL_TOL: f64 = 1e-10;
const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-11;

/// An open system: Hamiltonian h over a nonsingular CCR structure, driven by
/// m vacuum noise channels through the n×m coupling matrix B.
#[derive(Debug, Clone)]
pub struct OpenSystemModel {
    ccr: Arc<CcrStructure>,
    h: OperatorPolynomial,
    b: Matrix,
    j_w: Matrix,
    bjb: Matrix,
    bbt: Matrix,
    theta_inv: Matrix,
    /// BJBᵀΘ⁻¹/2
    damping: Matrix,
}

impl OpenSystemModel {
    pub fn new(h: OperatorPolynomial, b: Matrix) -> Result<Self> {
        let ccr = h.ccr().clone();
        let n = ccr.dim();
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B has {} rows, expected n = {n}", b.nrows())));
        }
        let m = b.ncols();
        if !m.is_multiple_of(2) {
            return Err(Error::Validation(format!("number of noise channels must be even, got {m}")));
        }
        h.require_self_adjoint("Hamiltonian")?;
        let theta = ccr.theta();
        let det = theta.determinant();
        if det.abs() <= DET_THETA_TOL {
            return Err(Error::Structure(format!("CCR matrix is singular (det = {det:e})")));
        }
        let theta_inv = theta
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Structure("CCR matrix is singular".into()))?;
        let j_w = linalg::symplectic(m / 2);
        let bjb = linalg::antisymmetrize(&(&b * &j_w * b.transpose()));
        let bbt = linalg::symmetrize(&(&b * b.transpose()));
        let damping = &bjb * &theta_inv * 0.5;
        Ok(Self { ccr, h, b, j_w, bjb, bbt, theta_inv, damping })
    }

    pub fn ccr(&self) -> &Arc<CcrStructure> {
        &self.ccr
    }

    pub fn hamiltonian(&self) -> &OperatorPolynomial {
        &self.h
    }

    pub fn coupling(&self) -> &Matrix {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.ccr.dim()
    }

    /// J ⊗ I_{m/2}, the CCR matrix of the noise.
    pub fn noise_ccr(&self) -> &Matrix {
        &self.j_w
    }

    /// Ω = I_m + iJ_w/2, the Ito matrix of the noise.
    pub fn omega_w(&self) -> DMatrix<Complex64> {
        let m = self.j_w.nrows();
        DMatrix::from_fn(m, m, |j, k| {
            Complex64::new(if j == k { 1.0 } else { 0.0 }, 0.5 * self.j_w[(j, k)])
        })
    }

    pub fn bjb(&self) -> &Matrix {
        &self.bjb
    }

    pub fn bbt(&self) -> &Matrix {
        &self.bbt
    }

    pub fn theta_inv(&self) -> &Matrix {
        &self.theta_inv
    }

    /// Condition number of Θ in the 2-norm.
    pub fn theta_condition(&self) -> f64 {
        let sv = self.ccr.theta().singular_values();
        sv.max() / sv.min()
    }

    fn mean_drift(&self, beta: &Vector, mu: &Vector) -> Vector {
        self.ccr.theta() * beta - &self.damping * mu
    }
}

/// A = ΘR − BJBᵀΘ⁻¹/2.
pub fn drift_matrix(r: &Matrix, model: &OpenSystemModel) -> Matrix {
    model.ccr.theta() * r - &model.damping
}

/// ‖AΘ + ΘAᵀ + BJBᵀ‖_F.
pub fn pr_residual(a: &Matrix, model: &OpenSystemModel) -> f64 {
    let theta = model.ccr.theta();
    (a * theta + theta * a.transpose() + &model.bjb).norm()
}

/// Moment derivatives at (μ, Σ) together with the fit that produced them.
#[derive(Debug, Clone)]
pub struct MomentRhs {
    pub dmu: Vector,
    pub dsigma: Matrix,
    pub a: Matrix,
    pub fit: QuadraticModel,
}

pub fn moment_rhs(mu: &Vector, sigma: &Matrix, model: &OpenSystemModel) -> Result<MomentRhs> {
    let state = GaussianState::new(mu.clone(), sigma.clone(), model.ccr.clone())?;
    let fit = optimal_quadratic_gaussian(&model.h, &state)?;
    let a = drift_matrix(&fit.r, model);
    let dmu = model.mean_drift(&fit.beta, mu);
    let sigma = state.sigma();
    let dsigma = linalg::symmetrize(&(&a * sigma + sigma * a.transpose() + &model.bbt));
    Ok(MomentRhs { dmu, dsigma, a, fit })
}

fn lyapunov_operator(a: &Matrix) -> Matrix {
    linalg::sym_operator_matrix(a.nrows(), |x| a * x + x * a.transpose())
}

/// Solves AX + XAᵀ + Q = 0 on the symmetric matrices without a stability
/// check; `None` when the operator is singular.
fn lyapunov_dense(a: &Matrix, q: &Matrix) -> Option<Matrix> {
    let n = a.nrows();
    let op = lyapunov_operator(a);
    let lu = op.clone().lu();
    let rhs = -linalg::sym_to_coords(q);
    let mut x = lu.solve(&rhs)?;
    // one step of iterative refinement
    let corr = lu.solve(&(&rhs - &op * &x))?;
    x += corr;
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(linalg::sym_from_coords(&x, n))
}

fn lyapunov_residual(a: &Matrix, x: &Matrix, q: &Matrix) -> f64 {
    (a * x + x * a.transpose() + q).norm()
}

/// Whether every eigenvalue of A has negative real part.
pub fn is_hurwitz(a: &Matrix) -> bool {
    let n = a.nrows();
    if a.ncols() != n || n == 0 || a.iter().any(|v| !v.is_finite()) {
        return false;
    }
    if n == 2 {
        let tr = a[(0, 0)] + a[(1, 1)];
        let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
        return tr < -HURWITZ_2X2_TOL && det > HURWITZ_2X2_TOL;
    }
    let q = Matrix::identity(n, n);
    let Some(x) = lyapunov_dense(a, &q) else { return false };
    if lyapunov_residual(a, &x, &q) > HURWITZ_RESIDUAL_TOL * x.norm().max(1.0) {
        return false;
    }
    matches!(linalg::min_eigenvalue(&x), Ok(m) if m > 0.0)
}

/// X with AX + XAᵀ + Q = 0 for Hurwitz A.
pub fn lyapunov_solve(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(Error::Dimension("Lyapunov operands must be square of equal size".into()));
    }
    if !is_hurwitz(a) {
        return Err(Error::Stability(format!("drift matrix is not Hurwitz: {:?}", a.as_slice())));
    }
    let q = linalg::symmetrize(q);
    let x = lyapunov_dense(a, &q).ok_or_else(|| Error::Numerical("Lyapunov operator is singular".into()))?;
    let res = lyapunov_residual(a, &x, &q);
    let qn = q.norm();
    if res > LYAPUNOV_RESIDUAL_TOL * qn.max(f64::MIN_POSITIVE) && res > f64::EPSILON {
        return Err(Error::Numerical(format!("Lyapunov residual {res:e} too large (|Q| = {qn:e})")));
    }
    Ok(x)
}

#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub mu: Vector,
    pub sigma: Matrix,
    pub a: Matrix,
    pub model: QuadraticModel,
}

/// Integration failure, with the last point that was successfully emitted.
#[derive(Debug, Clone)]
pub struct IntegrationError {
    pub error: Error,
    pub last: Option<TrajectoryPoint>,
}

impl std::fmt::Display for IntegrationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.last {
            Some(p) => write!(f, "{} (last valid point at t = {})", self.error, p.t),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for IntegrationError {}

fn rk4_from(mu: &Vector, sigma: &Matrix, k1: &MomentRhs, dt: f64, model: &OpenSystemModel) -> Result<(Vector, Matrix)> {
    let stage = |c: f64, k: &MomentRhs| (mu + &k.dmu * (c * dt), linalg::symmetrize(&(sigma + &k.dsigma * (c * dt))));
    let (m2, s2) = stage(0.5, k1);
    let k2 = moment_rhs(&m2, &s2, model)?;
    let (m3, s3) = stage(0.5, &k2);
    let k3 = moment_rhs(&m3, &s3, model)?;
    let (m4, s4) = stage(1.0, &k3);
    let k4 = moment_rhs(&m4, &s4, model)?;
    let h = dt / 6.0;
    let mu_next = mu + (&k1.dmu + &k2.dmu * 2.0 + &k3.dmu * 2.0 + &k4.dmu) * h;
    let sigma_next = sigma + (&k1.dsigma + &k2.dsigma * 2.0 + &k3.dsigma * 2.0 + &k4.dsigma) * h;
    Ok((mu_next, linalg::symmetrize(&sigma_next)))
}

/// One classical RK4 step of size `dt` (which may be negative).
pub fn rk4_step(mu: &Vector, sigma: &Matrix, dt: f64, model: &OpenSystemModel) -> Result<(Vector, Matrix)> {
    let k1 = moment_rhs(mu, sigma, model)?;
    rk4_from(mu, sigma, &k1, dt, model)
}

/// Fixed-step RK4 from (μ₀, Σ₀) to `t_final`, passing every step's point
/// (including t = 0) to `observer`. Returns the final point. A final partial
/// step lands exactly on `t_final`.
pub fn integrate_observed(
    model: &OpenSystemModel,
    mu0: &Vector,
    sigma0: &Matrix,
    dt: f64,
    t_final: f64,
    mut observer: impl FnMut(&TrajectoryPoint),
) -> std::result::Result<TrajectoryPoint, IntegrationError> {
    let fail = |error, last: &Option<TrajectoryPoint>| IntegrationError { error, last: last.clone() };
    let mut last: Option<TrajectoryPoint> = None;
    if !(dt.is_finite() && dt > 0.0 && t_final.is_finite() && t_final > 0.0) {
        return Err(fail(Error::Validation(format!("need dt > 0 and t_final > 0, got {dt}, {t_final}")), &last));
    }
    let start = GaussianState::new(mu0.clone(), sigma0.clone(), model.ccr.clone()).map_err(|e| fail(e, &last))?;
    start.require_strictly_admissible().map_err(|e| fail(e, &last))?;

    let steps = ((t_final / dt) - 1e-9).ceil().max(1.0) as u64;
    let mut mu = mu0.clone();
    let mut sigma = start.sigma().clone();
    for step in 0..=steps {
        let t = if step == steps { t_final } else { step as f64 * dt };
        let k1 = moment_rhs(&mu, &sigma, model).map_err(|e| fail(e, &last))?;
        let point = TrajectoryPoint { t, mu: mu.clone(), sigma: sigma.clone(), a: k1.a.clone(), model: k1.fit.clone() };
        observer(&point);
        last = Some(point);
        if step == steps {
            break;
        }
        let h = if step + 1 == steps { t_final - t } else { dt };
        let (m, s) = rk4_from(&mu, &sigma, &k1, h, model).map_err(|e| fail(e, &last))?;
        mu = m;
        sigma = s;
    }
    Ok(last.expect("at least one point is emitted"))
}

/// Like [`integrate_observed`], collecting every point.
pub fn integrate(
    model: &OpenSystemModel,
    mu0: &Vector,
    sigma0: &Matrix,
    dt: f64,
    t_final: f64,
) -> std::result::Result<Vec<TrajectoryPoint>, IntegrationError> {
    let mut out = Vec::new();
    integrate_observed(model, mu0, sigma0, dt, t_final, |p| out.push(p.clone()))?;
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct SteadyStateOptions {
    /// Weight d ∈ (0, 1] of the new iterate.
    pub damping: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self { damping: 0.5, max_iter: 1000, tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyStateResult {
    pub mu: Vector,
    pub sigma: Matrix,
    pub a: Matrix,
    pub hurwitz: bool,
    /// (‖Θβ − BJBᵀΘ⁻¹μ/2‖, ‖AΣ + ΣAᵀ + BBᵀ‖_F)
    pub residuals: (f64, f64),
    pub iterations: usize,
    pub fit: QuadraticModel,
}

fn fitted_beta(mu: &Vector, sigma: &Matrix, model: &OpenSystemModel) -> Result<Vector> {
    let state = GaussianState::new(mu.clone(), sigma.clone(), model.ccr.clone())?;
    let eps = moments::epsilon_vector(&model.h, &state)?;
    Ok(linalg::sym_inverse(state.sigma())? * eps)
}

/// Newton update for the mean equation at frozen Σ, using a central
/// difference Jacobian of β (exact when β is affine in μ). Falls back to a
/// plain residual step if the Jacobian is singular.
fn mean_update(mu: &Vector, sigma: &Matrix, g: &Vector, model: &OpenSystemModel) -> Result<Vector> {
    let n = mu.len();
    let theta = model.ccr.theta();
    let mut jac = Matrix::zeros(n, n);
    for k in 0..n {
        let h = 1e-4 * mu[k].abs().max(1.0);
        let mut up = mu.clone();
        let mut dn = mu.clone();
        up[k] += h;
        dn[k] -= h;
        let db = (fitted_beta(&up, sigma, model)? - fitted_beta(&dn, sigma, model)?) / (2.0 * h);
        jac.set_column(k, &(theta * db));
    }
    jac -= &model.damping;
    Ok(match linalg::lu_solve(&jac, g) {
        Some(step) if step.iter().all(|v| v.is_finite()) => mu - step,
        _ => mu + g,
    })
}

/// Damped fixed-point iteration for the stationary moment equations.
pub fn steady_state(
    model: &OpenSystemModel,
    mu0: &Vector,
    sigma0: &Matrix,
    opts: &SteadyStateOptions,
) -> Result<SteadyStateResult> {
    let d = opts.damping;
    if !(d > 0.0 && d <= 1.0) {
        return Err(Error::Validation(format!("damping must lie in (0, 1], got {d}")));
    }
    let mut mu = mu0.clone();
    let mut sigma = linalg::symmetrize(sigma0);
    let mut residuals = (f64::INFINITY, f64::INFINITY);
    for iter in 0..=opts.max_iter {
        let rhs = moment_rhs(&mu, &sigma, model)?;
        if !is_hurwitz(&rhs.a) {
            return Err(Error::Stability(format!(
                "drift matrix is not Hurwitz at iteration {iter} (mu = {:?}, sigma = {:?})",
                mu.as_slice(),
                sigma.as_slice()
            )));
        }
        residuals = (rhs.dmu.norm(), rhs.dsigma.norm());
        if residuals.0 <= opts.tol && residuals.1 <= opts.tol {
            return Ok(SteadyStateResult {
                mu,
                sigma,
                a: rhs.a,
                hurwitz: true,
                residuals,
                iterations: iter,
                fit: rhs.fit,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        let mu_new = mean_update(&mu, &sigma, &rhs.dmu, model)?;
        let sigma_new = lyapunov_solve(&rhs.a, &model.bbt)?;
        mu = &mu * (1.0 - d) + mu_new * d;
        sigma = linalg::symmetrize(&(&sigma * (1.0 - d) + sigma_new * d));
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        mean_residual: residuals.0,
        lyapunov_residual: residuals.1,
    })
}

/// μ = 0 and Σ solving the Lyapunov equation for the drift of the
/// quadratic part of h alone.
pub fn default_initial_iterate(model: &OpenSystemModel) -> Result<(Vector, Matrix)> {
    let r0 = model.h.quadratic_form_matrix();
    let a0 = drift_matrix(&r0, model);
    let sigma0 = lyapunov_solve(&a0, &model.bbt)?;
    Ok((Vector::zeros(model.dim()), sigma0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::build_quadratic;

    fn oscillator(b: Matrix) -> OpenSystemModel {
        let ccr = Arc::new(CcrStructure::canonical(1));
        let h = build_quadratic(0.0, &Vector::zeros(2), &Matrix::identity(2, 2), ccr).unwrap();
        OpenSystemModel::new(h, b).unwrap()
    }

    #[test]
    fn trivial_drift() {
        let m = oscillator(Matrix::zeros(2, 2));
        assert_eq!(drift_matrix(&Matrix::zeros(2, 2), &m), Matrix::zeros(2, 2));
    }

    #[test]
    fn pr_residual_hand_example() {
        let m = oscillator(Matrix::zeros(2, 2));
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 2.0]));
        assert!((pr_residual(&a, &m) - 3.0 * 2f64.sqrt()).abs() < 1e-14);
        let r = Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
        assert!(pr_residual(&(linalg::j2() * r), &m) < 1e-15);
    }

    #[test]
    fn hurwitz_examples() {
        assert!(is_hurwitz(&(-Matrix::identity(2, 2))));
        assert!(is_hurwitz(&(-Matrix::identity(4, 4))));
        assert!(!is_hurwitz(&linalg::j2()));
        assert!(!is_hurwitz(&linalg::symplectic(2)));
        assert!(!is_hurwitz(&Matrix::identity(3, 3)));
    }

    #[test]
    fn lyapunov_examples() {
        let x = lyapunov_solve(&(-Matrix::identity(3, 3)), &(Matrix::identity(3, 3) * 2.0)).unwrap();
        assert!((x - Matrix::identity(3, 3)).amax() < 1e-14);
        assert!(matches!(
            lyapunov_solve(&linalg::j2(), &Matrix::identity(2, 2)),
            Err(Error::Stability(_))
        ));
    }

    #[test]
    fn model_rejects_odd_channels_and_singular_theta() {
        let ccr = Arc::new(CcrStructure::canonical(1));
        let h = OperatorPolynomial::zero(ccr);
        assert!(OpenSystemModel::new(h.clone(), Matrix::zeros(2, 3)).is_err());
        let sing = Arc::new(CcrStructure::new(Matrix::zeros(2, 2)).unwrap());
        let h = OperatorPolynomial::zero(sing);
        assert!(matches!(OpenSystemModel::new(h, Matrix::zeros(2, 2)), Err(Error::Structure(_))));
    }

    #[test]
    fn damped_oscillator_steady_state_is_thermal_vacuum() {
        // B = I gives BJBᵀ = J, A = J − J J⁻¹/2 = J − I/2 for R = I
        let m = oscillator(Matrix::identity(2, 2));
        let (mu0, s0) = default_initial_iterate(&m).unwrap();
        let res = steady_state(&m, &mu0, &s0, &SteadyStateOptions::default()).unwrap();
        assert!(res.hurwitz);
        assert!((res.sigma - Matrix::identity(2, 2)).amax() < 1e-12);
        assert!(res.mu.amax() < 1e-12);
    }
}
