//! Closed-form Gaussian linearization of the quantum Duffing oscillator
//! H = ω₀²q²/2 + fq⁴ + p²/2 with [q, p] = i.
//!
//! For one degree of freedom BJBᵀ is always a multiple φJ of J, and at the
//! steady state (κ = E q = 0, E p = 0) the covariance follows from a scalar
//! quadratic equation in σ₁₁.

use std::sync::Arc;

use num_complex::Complex64;

use crate::algebra::{CcrStructure, Monomial, OperatorPolynomial};
use crate::dynamics::is_hurwitz;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

const PHI_PROPORTIONALITY_TOL: f64 = 1e-9;
const LYAPUNOV_CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DuffingParams {
    pub omega0: f64,
    pub f: f64,
    pub b: Matrix,
    pub phi: f64,
    /// BBᵀ
    pub c: Matrix,
}

impl DuffingParams {
    pub fn new(omega0: f64, f: f64, b: Matrix) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::Validation(format!("omega0 must be positive, got {omega0}")));
        }
        if !f.is_finite() {
            return Err(Error::Validation(format!("anharmonicity must be finite, got {f}")));
        }
        if f < 0.0 {
            return Err(Error::OutOfScope(format!(
                "f = {f} < 0 (double-well regime) is not covered by this linearization"
            )));
        }
        let phi = extract_phi(&b)?;
        let c = linalg::symmetrize(&(&b * b.transpose()));
        Ok(Self { omega0, f, b, phi, c })
    }

    /// Same coupling with a different anharmonicity.
    pub fn with_f(&self, f: f64) -> Result<Self> {
        Self::new(self.omega0, f, self.b.clone())
    }
}

fn qp() -> Arc<CcrStructure> {
    Arc::new(CcrStructure::canonical(1))
}

/// ω₀²q²/2 + fq⁴ + p²/2 with q = x₁, p = x₂.
pub fn duffing_hamiltonian(omega0: f64, f: f64) -> OperatorPolynomial {
    let c = |v: f64| Complex64::new(v, 0.0);
    OperatorPolynomial::from_monomials(
        qp(),
        [
            Monomial::new(c(0.5 * omega0 * omega0), vec![0, 0]),
            Monomial::new(c(f), vec![0, 0, 0, 0]),
            Monomial::new(c(0.5), vec![1, 1]),
        ],
    )
    .expect("indices are within range")
}

/// φ with B(J⊗I_{m/2})Bᵀ = φJ.
pub fn extract_phi(b: &Matrix) -> Result<f64> {
    if b.nrows() != 2 {
        return Err(Error::Dimension(format!("B must have 2 rows, got {}", b.nrows())));
    }
    let m = b.ncols();
    if m == 0 || !m.is_multiple_of(2) {
        return Err(Error::Validation(format!("number of noise channels must be even and positive, got {m}")));
    }
    let d = b * linalg::symplectic(m / 2) * b.transpose();
    let phi = d[(0, 1)];
    let defect = (&d - linalg::j2() * phi).norm();
    if defect > PHI_PROPORTIONALITY_TOL {
        return Err(Error::Validation(format!("BJB^T is not proportional to J (defect {defect:e})")));
    }
    Ok(phi)
}

/// Optimal (β, R) for the Duffing Hamiltonian at mean (κ, E p) and
/// position variance σ₁₁.
pub fn duffing_quadratic_params(kappa: f64, mean_p: f64, sigma11: f64, params: &DuffingParams) -> Result<(Vector, Matrix)> {
    if !(sigma11 > 0.0) {
        return Err(Error::Validation(format!("sigma11 must be positive, got {sigma11}")));
    }
    let (w2, f) = (params.omega0 * params.omega0, params.f);
    let beta = Vector::from_vec(vec![(w2 + 4.0 * f * (kappa * kappa + 3.0 * sigma11)) * kappa, mean_p]);
    let r = Matrix::from_diagonal(&Vector::from_vec(vec![w2 + 12.0 * f * (kappa * kappa + sigma11), 1.0]));
    Ok((beta, r))
}

/// Drift A = [[−φ/2, 1], [−ω₀² − 12f(κ² + σ₁₁), −φ/2]].
pub fn duffing_drift(kappa: f64, sigma11: f64, params: &DuffingParams) -> Matrix {
    let k = params.omega0 * params.omega0 + 12.0 * params.f * (kappa * kappa + sigma11);
    Matrix::from_row_slice(2, 2, &[-0.5 * params.phi, 1.0, -k, -0.5 * params.phi])
}

/// Coefficients (a, b, c) of aσ² + bσ + c = 0 satisfied by the steady σ₁₁.
pub fn sigma11_polynomial(params: &DuffingParams) -> (f64, f64, f64) {
    let (w2, f, phi, c) = (params.omega0 * params.omega0, params.f, params.phi, &params.c);
    let a = 24.0 * f;
    let b = 2.0 * w2 + 0.5 * phi * phi - 12.0 * f * c[(0, 0)] / phi;
    let free = -((w2 + 0.5 * phi * phi) * c[(0, 0)] + c[(1, 1)] + phi * c[(0, 1)]) / phi;
    (a, b, free)
}

/// |aσ² + bσ + c| relative to |a|σ² + |b|σ + |c|.
pub fn poly_residual(params: &DuffingParams, sigma11: f64) -> f64 {
    let (a, b, c) = sigma11_polynomial(params);
    let s = sigma11;
    let scale = a.abs() * s * s + b.abs() * s.abs() + c.abs();
    (a * s * s + b * s + c).abs() / scale.max(f64::MIN_POSITIVE)
}

/// The positive root of the σ₁₁ equation.
pub fn steady_sigma11(params: &DuffingParams) -> Result<f64> {
    if params.f < 0.0 {
        return Err(Error::OutOfScope(format!("f = {} < 0 is not covered", params.f)));
    }
    if !(params.phi > 0.0) {
        return Err(Error::Stability(format!("no damping: phi = {} is not positive", params.phi)));
    }
    let (a, b, c) = sigma11_polynomial(params);
    if !(c < 0.0) {
        return Err(Error::Validation(format!(
            "noise covariance gives a nonnegative free term {c:e}; C + i phi J/2 is not positive definite"
        )));
    }
    let root = if a == 0.0 {
        -c / b
    } else {
        let disc = b * b - 4.0 * a * c;
        if !(disc > 0.0) {
            return Err(Error::Numerical(format!("discriminant {disc:e} is not positive")));
        }
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        if b >= 0.0 { c / q } else { q / a }
    };
    if !(root > 0.0 && root.is_finite()) {
        return Err(Error::Numerical(format!("steady sigma11 = {root} is not positive")));
    }
    Ok(root)
}

#[derive(Debug, Clone)]
pub struct DuffingSteady {
    pub sigma: Matrix,
    pub a: Matrix,
    pub hurwitz: bool,
}

/// Residuals of the (1,1), (1,2) and (2,2) entries of AΣ + ΣAᵀ + C.
pub fn ric_residuals(params: &DuffingParams, sigma: &Matrix) -> [f64; 3] {
    let a = duffing_drift(0.0, sigma[(0, 0)], params);
    let e = &a * sigma + sigma * a.transpose() + &params.c;
    [e[(0, 0)].abs(), e[(0, 1)].abs(), e[(1, 1)].abs()]
}

/// Steady covariance, drift and stability flag at κ = E p = 0.
pub fn steady_sigma(params: &DuffingParams) -> Result<DuffingSteady> {
    let s11 = steady_sigma11(params)?;
    let (w2, f, phi, c) = (params.omega0 * params.omega0, params.f, params.phi, &params.c);
    let s12 = 0.5 * (phi * s11 - c[(0, 0)]);
    let s22 = ((w2 + 12.0 * f * s11) * (c[(0, 0)] - phi * s11) + c[(1, 1)]) / phi;
    let sigma = Matrix::from_row_slice(2, 2, &[s11, s12, s12, s22]);
    let a = duffing_drift(0.0, s11, params);
    let res = (&a * &sigma + &sigma * a.transpose() + c).amax();
    if res > LYAPUNOV_CHECK_TOL * c.amax().max(1.0) {
        return Err(Error::Consistency(format!("closed-form covariance misses the Lyapunov equation by {res:e}")));
    }
    let det = sigma.determinant();
    if !(det > 0.25) {
        return Err(Error::Consistency(format!("closed-form covariance has det {det} <= 1/4")));
    }
    Ok(DuffingSteady { sigma, hurwitz: is_hurwitz(&a), a })
}

/// 0, 0.01, ..., 1.
pub fn default_f_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub f: f64,
    pub result: Result<DuffingSteady>,
}

/// One closed-form steady state per grid point; failures stay in their row.
pub fn sweep_f(base: &DuffingParams, f_grid: &[f64]) -> Result<Vec<SweepRow>> {
    if f_grid.is_empty() {
        return Err(Error::Validation("anharmonicity grid is empty".into()));
    }
    Ok(f_grid
        .iter()
        .map(|&f| SweepRow { f, result: base.with_f(f).and_then(|p| steady_sigma(&p)) })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_b() -> Matrix {
        Matrix::from_row_slice(2, 4, &[0.4853, -0.1497, -0.0793, -0.6065, -0.5955, -0.4348, 1.5352, -1.3474])
    }

    #[test]
    fn phi_examples() {
        assert!((extract_phi(&paper_b()).unwrap() - 0.6357).abs() < 5e-4);
        assert_eq!(extract_phi(&Matrix::identity(2, 2)).unwrap(), 1.0);
        let phi = extract_phi(&paper_b()).unwrap();
        assert!((extract_phi(&(paper_b() * 3.0)).unwrap() - 9.0 * phi).abs() < 1e-12);
        assert!(extract_phi(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn hamiltonian_shape() {
        let h = duffing_hamiltonian(0.9, 0.0);
        assert_eq!(h.degree(), 2);
        let r = h.quadratic_form_matrix();
        assert!((r - Matrix::from_diagonal(&Vector::from_vec(vec![0.81, 1.0]))).amax() < 1e-15);
        let h = duffing_hamiltonian(0.9, 0.3);
        assert_eq!(h.degree(), 4);
        assert_eq!(h.coefficient(&[0, 0, 0, 0]), Complex64::new(0.3, 0.0));
    }

    #[test]
    fn harmonic_params() {
        let p = DuffingParams::new(0.9026, 0.0, paper_b()).unwrap();
        let (beta, r) = duffing_quadratic_params(0.3, -0.2, 1.0, &p).unwrap();
        let w2 = 0.9026f64 * 0.9026;
        assert!((beta[0] - w2 * 0.3).abs() < 1e-15 && beta[1] == -0.2);
        assert_eq!(r, Matrix::from_diagonal(&Vector::from_vec(vec![w2, 1.0])));
    }

    #[test]
    fn negative_anharmonicity_is_out_of_scope() {
        assert!(matches!(DuffingParams::new(1.0, -0.1, paper_b()), Err(Error::OutOfScope(_))));
    }

    #[test]
    fn reference_steady_states() {
        let want = [
            (0.0, 4.8592302, 1.22874266, 4.26844599),
            (0.25, 1.31756936, 0.10283276, 5.87520525),
            (0.5, 1.05044739, 0.01791349, 7.01626324),
            (1.0, 0.8546315, -0.04433727, 8.96125677),
        ];
        for (f, s11, s12, s22) in want {
            let p = DuffingParams::new(0.9026, f, paper_b()).unwrap();
            let st = steady_sigma(&p).unwrap();
            assert!(st.hurwitz);
            assert!((st.sigma[(0, 0)] - s11).abs() < 1e-6, "f = {f}");
            assert!((st.sigma[(0, 1)] - s12).abs() < 1e-6, "f = {f}");
            assert!((st.sigma[(1, 1)] - s22).abs() < 1e-6, "f = {f}");
            assert!(poly_residual(&p, st.sigma[(0, 0)]) < 1e-12);
            assert!(ric_residuals(&p, &st.sigma).iter().all(|&r| r < 1e-10));
        }
    }

    #[test]
    fn sweep_keeps_failed_rows() {
        let p = DuffingParams::new(0.9026, 0.0, paper_b()).unwrap();
        let rows = sweep_f(&p, &[0.0, -1.0, 0.5]).unwrap();
        assert!(rows[0].result.is_ok() && rows[2].result.is_ok());
        assert!(matches!(rows[1].result, Err(Error::OutOfScope(_))));
        assert!(sweep_f(&p, &[]).is_err());
    }
}
