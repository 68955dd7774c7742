//! Built-in oracle-equivalence suites run by `qglin selftest`.

use crate::duffing::{duffing_hamiltonian, duffing_quadratic_params, steady_sigma, DuffingParams};
use crate::dynamics::{default_initial_iterate, steady_state, OpenSystemModel, SteadyStateOptions};
use crate::linalg::{Matrix, Vector};
use crate::moments::{gaussian_moment_tensors, wick_moment, wick_moment_recursive, GaussianState};
use crate::quadfit::{k_apply, k_inverse_direct, k_inverse_spectral, normal_equation_residuals, optimal_quadratic_gaussian};
use crate::sampling::{self, uniform};

#[derive(Debug, Clone, Default)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
    /// One line per failed case.
    pub failures: Vec<String>,
}

impl SuiteResult {
    fn new(name: &'static str) -> Self {
        Self { name, ..Default::default() }
    }

    fn record(&mut self, case: usize, outcome: std::result::Result<(), String>) {
        match outcome {
            Ok(()) => self.passed += 1,
            Err(why) => {
                self.failed += 1;
                self.failures.push(format!("case {case}: {why}"));
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn total_failed(&self) -> usize {
        self.suites.iter().map(|s| s.failed).sum()
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn wick_suite(seed: u64) -> SuiteResult {
    let mut rng = sampling::seeded(seed);
    let mut out = SuiteResult::new("wick");
    for case in 0..100 {
        let n = if case % 2 == 0 { 2 } else { 4 };
        let outcome = (|| {
            let ccr = sampling::random_ccr(&mut rng, n);
            let sigma = sampling::random_admissible_sigma(&mut rng, ccr.theta(), 0.0);
            let state = GaussianState::new(Vector::zeros(n), sigma, ccr).map_err(|e| e.to_string())?;
            let idx = sampling::random_indices(&mut rng, n, 2 + 2 * (case % 4));
            let a = wick_moment(&idx, &state).map_err(|e| e.to_string())?;
            let b = wick_moment_recursive(&idx, &state).map_err(|e| e.to_string())?;
            let rel = (a - b).norm() / a.norm().max(b.norm()).max(1.0);
            check(rel <= 1e-12, || format!("{idx:?}: {a} vs {b}"))
        })();
        out.record(case, outcome);
    }
    out
}

fn k_inverse_suite(seed: u64) -> SuiteResult {
    let mut rng = sampling::seeded(seed);
    let mut out = SuiteResult::new("k-inverse");
    for case in 0..60 {
        let n = [2, 4, 6][case % 3];
        let outcome = (|| {
            let ccr = sampling::random_ccr(&mut rng, n);
            let theta = ccr.theta();
            let sigma = sampling::random_admissible_sigma(&mut rng, theta, 0.02);
            let gamma = sampling::random_symmetric(&mut rng, n);
            let ks = k_inverse_spectral(&gamma, &sigma, theta).map_err(|e| e.to_string())?;
            let kd = k_inverse_direct(&gamma, &sigma, theta).map_err(|e| e.to_string())?;
            let rel = (&ks - &kd).amax() / kd.amax().max(f64::MIN_POSITIVE);
            check(rel <= 1e-10, || format!("spectral vs direct rel diff {rel:e}"))?;
            let rt = (k_apply(&ks, &sigma, theta) - &gamma).amax() / gamma.amax();
            check(rt <= 1e-10, || format!("round trip error {rt:e}"))
        })();
        out.record(case, outcome);
    }
    out
}

fn paper_b() -> Matrix {
    Matrix::from_row_slice(2, 4, &[0.4853, -0.1497, -0.0793, -0.6065, -0.5955, -0.4348, 1.5352, -1.3474])
}

fn duffing_suite(seed: u64) -> SuiteResult {
    let mut rng = sampling::seeded(seed);
    let mut out = SuiteResult::new("duffing");
    let omega0 = 0.9026;
    for (case, f) in [0.0, 0.25, 0.5, 1.0].into_iter().enumerate() {
        let outcome = (|| {
            let model = OpenSystemModel::new(duffing_hamiltonian(omega0, f), paper_b()).map_err(|e| e.to_string())?;
            let (mu0, s0) = default_initial_iterate(&model).map_err(|e| e.to_string())?;
            let generic = steady_state(&model, &mu0, &s0, &SteadyStateOptions::default()).map_err(|e| e.to_string())?;
            let params = DuffingParams::new(omega0, f, paper_b()).map_err(|e| e.to_string())?;
            let closed = steady_sigma(&params).map_err(|e| e.to_string())?;
            let d = (&generic.sigma - &closed.sigma).amax();
            check(d <= 1e-8, || format!("f = {f}: steady states differ by {d:e}"))
        })();
        out.record(case, outcome);
    }
    for case in 4..24 {
        let outcome = (|| {
            let f = uniform(&mut rng, 0.0, 1.0);
            let params = DuffingParams::new(omega0, f, paper_b()).map_err(|e| e.to_string())?;
            let h = duffing_hamiltonian(omega0, f);
            let ccr = h.ccr().clone();
            let mu = sampling::random_vector(&mut rng, 2);
            let sigma = sampling::random_admissible_sigma(&mut rng, ccr.theta(), 0.05);
            let state = GaussianState::new(mu.clone(), sigma.clone(), ccr).map_err(|e| e.to_string())?;
            let fit = optimal_quadratic_gaussian(&h, &state).map_err(|e| e.to_string())?;
            let (beta, r) = duffing_quadratic_params(mu[0], mu[1], sigma[(0, 0)], &params).map_err(|e| e.to_string())?;
            let d = (&fit.beta - beta).amax().max((&fit.r - r).amax());
            check(d <= 1e-10, || format!("generic fit differs from closed form by {d:e}"))
        })();
        out.record(case, outcome);
    }
    out
}

fn normal_equation_suite(seed: u64) -> SuiteResult {
    let mut rng = sampling::seeded(seed);
    let mut out = SuiteResult::new("normal-equations");
    for case in 0..20 {
        let n = if case % 2 == 0 { 2 } else { 4 };
        let outcome = (|| {
            let ccr = sampling::random_ccr(&mut rng, n);
            let sigma = sampling::random_admissible_sigma(&mut rng, ccr.theta(), 0.05);
            let mu = sampling::random_vector(&mut rng, n);
            let state = GaussianState::new(mu, sigma, ccr.clone()).map_err(|e| e.to_string())?;
            let h = sampling::random_self_adjoint(&mut rng, ccr, 4, 4);
            let md = gaussian_moment_tensors(&h, &state).map_err(|e| e.to_string())?;
            let fit = optimal_quadratic_gaussian(&h, &state).map_err(|e| e.to_string())?;
            let res = normal_equation_residuals(&fit, &md).max();
            let scale = md.gamma.amax().max(md.epsilon.amax()).max(1.0);
            check(res <= 1e-10 * scale, || format!("residual {res:e}"))
        })();
        out.record(case, outcome);
    }
    out
}

/// Runs every suite; each derives its own stream from `seed`.
pub fn run_selftest(seed: u64) -> SelftestReport {
    let suites = vec![
        wick_suite(seed),
        k_inverse_suite(seed.wrapping_add(1)),
        duffing_suite(seed.wrapping_add(2)),
        normal_equation_suite(seed.wrapping_add(3)),
    ];
    SelftestReport { seed, suites }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        let report = run_selftest(2024);
        for s in &report.suites {
            assert_eq!(s.failed, 0, "{}: {:?}", s.name, s.failures);
            assert!(s.passed > 0);
        }
    }
}
