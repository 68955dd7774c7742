use qglin::duffing::{default_f_grid, duffing_hamiltonian, steady_sigma, sweep_f, DuffingParams};
use qglin::dynamics::{default_initial_iterate, drift_matrix, lyapunov_solve, steady_state, OpenSystemModel, SteadyStateOptions};
use qglin::linalg::{Matrix, Vector};
use qglin::Error;

const OMEGA0: f64 = 0.9026;

fn paper_b() -> Matrix {
    Matrix::from_row_slice(2, 4, &[0.4853, -0.1497, -0.0793, -0.6065, -0.5955, -0.4348, 1.5352, -1.3474])
}

#[test]
fn sweep_matches_generic_steady_state() {
    let base = DuffingParams::new(OMEGA0, 0.0, paper_b()).unwrap();
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    for row in sweep_f(&base, &grid).unwrap() {
        let closed = row.result.unwrap();
        let model = OpenSystemModel::new(duffing_hamiltonian(OMEGA0, row.f), paper_b()).unwrap();
        let (mu0, s0) = default_initial_iterate(&model).unwrap();
        let st = steady_state(&model, &mu0, &s0, &SteadyStateOptions::default()).unwrap();
        let d = (&st.sigma - &closed.sigma).amax();
        assert!(d <= 1e-8, "f = {}: {d:e}", row.f);
        assert!(closed.hurwitz);
    }
}

#[test]
fn default_grid_is_monotone() {
    let base = DuffingParams::new(OMEGA0, 0.0, paper_b()).unwrap();
    let rows = sweep_f(&base, &default_f_grid()).unwrap();
    assert_eq!(rows.len(), 101);
    let s: Vec<Matrix> = rows.into_iter().map(|r| r.result.unwrap().sigma).collect();
    for w in s.windows(2) {
        assert!(w[1][(0, 0)] < w[0][(0, 0)]);
        assert!(w[1][(1, 1)] > w[0][(1, 1)]);
    }
}

#[test]
fn tiny_anharmonicity_is_continuous_with_harmonic_case() {
    let p0 = DuffingParams::new(OMEGA0, 0.0, paper_b()).unwrap();
    let s0 = steady_sigma(&p0).unwrap().sigma;
    let model = OpenSystemModel::new(duffing_hamiltonian(OMEGA0, 0.0), paper_b()).unwrap();
    let r = Matrix::from_diagonal(&Vector::from_vec(vec![OMEGA0 * OMEGA0, 1.0]));
    let lyap = lyapunov_solve(&drift_matrix(&r, &model), model.bbt()).unwrap();
    assert!((&s0 - &lyap).amax() <= 1e-12);
    let mut prev = s0[(0, 0)];
    for f in [1e-14, 1e-10, 1e-6] {
        let s = steady_sigma(&p0.with_f(f).unwrap()).unwrap().sigma;
        assert!(s[(0, 0)] <= prev && (s[(0, 0)] - s0[(0, 0)]).abs() <= 100.0 * f * s0[(0, 0)].powi(2));
        prev = s[(0, 0)];
    }
}

#[test]
fn negative_anharmonicity_is_out_of_scope() {
    assert!(matches!(DuffingParams::new(OMEGA0, -0.5, paper_b()), Err(Error::OutOfScope(_))));
    let base = DuffingParams::new(OMEGA0, 0.0, paper_b()).unwrap();
    let rows = sweep_f(&base, &[-0.1, 0.2]).unwrap();
    assert!(matches!(rows[0].result, Err(Error::OutOfScope(_))));
    assert!(rows[1].result.is_ok());
}
