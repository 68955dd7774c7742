use std::sync::Arc;

use qglin::algebra::{build_quadratic, CcrStructure};
use qglin::duffing::{duffing_hamiltonian, steady_sigma, DuffingParams};
use qglin::dynamics::{
    default_initial_iterate, drift_matrix, integrate, integrate_observed, is_hurwitz, lyapunov_solve, moment_rhs,
    rk4_step, steady_state, OpenSystemModel, SteadyStateOptions,
};
use qglin::linalg::{self, Matrix, Vector};
use qglin::sampling;
use qglin::Error;

const OMEGA0: f64 = 0.9026;

fn paper_b() -> Matrix {
    Matrix::from_row_slice(2, 4, &[0.4853, -0.1497, -0.0793, -0.6065, -0.5955, -0.4348, 1.5352, -1.3474])
}

fn duffing_model(f: f64) -> OpenSystemModel {
    OpenSystemModel::new(duffing_hamiltonian(OMEGA0, f), paper_b()).unwrap()
}

fn harmonic_oracle(model: &OpenSystemModel) -> Matrix {
    let r = Matrix::from_diagonal(&Vector::from_vec(vec![OMEGA0 * OMEGA0, 1.0]));
    lyapunov_solve(&drift_matrix(&r, model), model.bbt()).unwrap()
}

#[test]
fn harmonic_case_relaxes_to_lyapunov_solution() {
    let model = duffing_model(0.0);
    let target = harmonic_oracle(&model);
    let sigma0 = Matrix::from_row_slice(2, 2, &[0.8, 0.1, 0.1, 2.0]);
    let mut worst_sym = 0.0f64;
    let last = integrate_observed(&model, &Vector::from_vec(vec![1.0, -0.5]), &sigma0, 1e-3, 80.0, |p| {
        worst_sym = worst_sym.max(linalg::asymmetry(&p.sigma));
    })
    .unwrap();
    assert_eq!(worst_sym, 0.0);
    assert!((last.sigma - &target).amax() <= 1e-6);
    assert!(last.mu.amax() <= 1e-6);
}

#[test]
fn long_integration_agrees_with_steady_state() {
    for f in [0.0, 0.25, 0.5, 1.0] {
        let model = duffing_model(f);
        let (mu0, s0) = default_initial_iterate(&model).unwrap();
        let st = steady_state(&model, &mu0, &s0, &SteadyStateOptions::default()).unwrap();
        let last = integrate_observed(&model, &Vector::from_vec(vec![0.2, 0.0]), &s0, 1e-2, 100.0, |_| {}).unwrap();
        let d = (&last.sigma - &st.sigma).amax().max((&last.mu - &st.mu).amax());
        assert!(d <= 1e-6, "f = {f}: {d:e}");
    }
}

#[test]
fn rk4_is_fourth_order() {
    let model = duffing_model(0.0);
    let mu0 = Vector::from_vec(vec![1.0, 0.0]);
    let s0 = Matrix::from_row_slice(2, 2, &[1.5, 0.2, 0.2, 0.9]);
    let t = 4.0;
    let end = |dt: f64| {
        let p = integrate_observed(&model, &mu0, &s0, dt, t, |_| {}).unwrap();
        (p.mu, p.sigma)
    };
    let dt = 0.2;
    let (mr, sr) = end(dt / 8.0);
    let err = |(m, s): (Vector, Matrix)| (m - &mr).amax().max((s - &sr).amax());
    let e1 = err(end(dt));
    let e2 = err(end(dt / 2.0));
    let ratio = e1 / e2;
    assert!((12.0..=20.0).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn closed_system_mean_follows_linear_flow() {
    let ccr = Arc::new(CcrStructure::canonical(1));
    let b = Vector::from_vec(vec![0.3, -0.7]);
    let r = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
    let h = build_quadratic(0.0, &b, &r, ccr.clone()).unwrap();
    let model = OpenSystemModel::new(h, Matrix::zeros(2, 2)).unwrap();
    let mu0 = Vector::from_vec(vec![0.5, 0.25]);
    let traj = integrate(&model, &mu0, &Matrix::identity(2, 2), 1e-2, 1.0).unwrap();
    let last = traj.last().unwrap();
    // μ(t) = e^{Mt}(μ₀ + M⁻¹c) − M⁻¹c with M = ΘR, c = Θb
    let theta = ccr.theta();
    let m = theta * &r;
    let c = theta * &b;
    let minv_c = m.clone().try_inverse().unwrap() * c;
    let want = (&m * last.t).exp() * (&mu0 + &minv_c) - minv_c;
    assert!((&last.mu - want).amax() <= 1e-8);
    assert_eq!(traj.len(), 101);
}

#[test]
fn step_then_reverse_step_returns() {
    let model = duffing_model(0.5);
    let mu = Vector::from_vec(vec![0.4, -0.1]);
    let s = Matrix::from_row_slice(2, 2, &[1.2, 0.1, 0.1, 3.0]);
    let (m1, s1) = rk4_step(&mu, &s, 1e-3, &model).unwrap();
    let (m2, s2) = rk4_step(&m1, &s1, -1e-3, &model).unwrap();
    assert!((m2 - &mu).amax() <= 1e-10);
    assert!((s2 - &s).amax() <= 1e-10);
}

#[test]
fn equilibrium_of_quadratic_system_is_a_fixed_point() {
    let model = duffing_model(0.0);
    let sigma = harmonic_oracle(&model);
    let rhs = moment_rhs(&Vector::zeros(2), &sigma, &model).unwrap();
    assert!(rhs.dmu.amax() <= 1e-14);
    assert!(rhs.dsigma.amax() <= 1e-12);
}

#[test]
fn harmonic_rhs_is_the_lyapunov_map() {
    let model = duffing_model(0.0);
    let params = DuffingParams::new(OMEGA0, 0.0, paper_b()).unwrap();
    let a_hat = Matrix::from_row_slice(2, 2, &[-params.phi / 2.0, 1.0, -OMEGA0 * OMEGA0, -params.phi / 2.0]);
    let mut rng = sampling::seeded(11);
    for _ in 0..10 {
        let sigma = sampling::random_admissible_sigma(&mut rng, &linalg::j2(), 0.05);
        let rhs = moment_rhs(&Vector::zeros(2), &sigma, &model).unwrap();
        let want = &a_hat * &sigma + &sigma * a_hat.transpose() + &params.c;
        assert!((rhs.dsigma - want).amax() <= 1e-12);
        assert!((&rhs.a - &a_hat).amax() <= 1e-12);
    }
}

#[test]
fn steady_state_harmonic_matches_oracle() {
    let model = duffing_model(0.0);
    let (mu0, s0) = default_initial_iterate(&model).unwrap();
    let st = steady_state(&model, &Vector::from_vec(vec![0.3, 0.3]), &(s0 * 1.5), &SteadyStateOptions::default()).unwrap();
    assert!(st.mu.amax() <= 1e-10);
    assert!((&st.sigma - harmonic_oracle(&model)).amax() <= 1e-10);
    assert!(st.hurwitz && st.residuals.0 <= 1e-10 && st.residuals.1 <= 1e-10);
    assert!(mu0.amax() == 0.0);
}

#[test]
fn steady_state_matches_closed_form_for_several_dampings() {
    for d in [1.0, 0.5, 0.2] {
        let model = duffing_model(0.5);
        let (mu0, s0) = default_initial_iterate(&model).unwrap();
        let opts = SteadyStateOptions { damping: d, ..Default::default() };
        let st = steady_state(&model, &mu0, &s0, &opts).unwrap();
        let closed = steady_sigma(&DuffingParams::new(OMEGA0, 0.5, paper_b()).unwrap()).unwrap();
        assert!((&st.sigma - &closed.sigma).amax() <= 1e-8, "damping {d}");
    }
}

#[test]
fn iteration_budget_exhaustion_reports_residuals() {
    let model = duffing_model(1.0);
    let (mu0, s0) = default_initial_iterate(&model).unwrap();
    let opts = SteadyStateOptions { max_iter: 2, ..Default::default() };
    match steady_state(&model, &mu0, &s0, &opts) {
        Err(Error::NonConvergence { iterations, mean_residual, lyapunov_residual }) => {
            assert_eq!(iterations, 2);
            assert!(mean_residual.is_finite() && lyapunov_residual > 1e-10);
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
    assert!(steady_state(&model, &mu0, &s0, &SteadyStateOptions { damping: 0.0, ..Default::default() }).is_err());
}

#[test]
fn undamped_system_is_not_hurwitz() {
    let ccr = Arc::new(CcrStructure::canonical(1));
    let h = build_quadratic(0.0, &Vector::zeros(2), &Matrix::identity(2, 2), ccr).unwrap();
    let model = OpenSystemModel::new(h, Matrix::zeros(2, 2)).unwrap();
    assert!(!is_hurwitz(&drift_matrix(&Matrix::identity(2, 2), &model)));
    assert!(matches!(default_initial_iterate(&model), Err(Error::Stability(_))));
}

#[test]
fn inadmissible_start_is_rejected_without_a_point() {
    let model = duffing_model(0.5);
    let err = integrate(&model, &Vector::zeros(2), &(Matrix::identity(2, 2) * 0.5), 1e-2, 1.0).unwrap_err();
    assert!(matches!(err.error, Error::Admissibility(_)));
    assert!(err.last.is_none());
}

#[test]
fn blow_up_keeps_the_last_valid_point() {
    // a huge step destabilizes RK4 and drives the covariance out of the
    // admissible set
    let model = duffing_model(1.0);
    let err = integrate(&model, &Vector::from_vec(vec![2.0, 0.0]), &Matrix::identity(2, 2), 5.0, 1000.0).unwrap_err();
    let last = err.last.expect("at least the initial point was valid");
    assert!(last.t >= 0.0);
    assert!(linalg::admissibility_margin(&last.sigma, &linalg::j2()).unwrap() > 0.0);
}
