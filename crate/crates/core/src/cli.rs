//! Batch driver behind the `qglin` binary.
//!
//! A job is a JSON file; matrices are flat row-major lists and Hamiltonian
//! monomials use one-based indices. Every output begins with `#` comment
//! lines holding the tool version and the SHA-256 of the normalized config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algebra::{CcrStructure, Monomial, OperatorPolynomial};
use crate::duffing::{self, DuffingParams};
use crate::dynamics::{self, OpenSystemModel, SteadyStateOptions};
use crate::error::Error;
use crate::linalg::{self, Matrix, Vector};
use crate::moments::{self, GaussianState};
use crate::quadfit;
use crate::selftest;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const DEFAULT_SEED: u64 = 20240607;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Linearize,
    Simulate,
    Steady,
    DuffingSteady,
    DuffingSweep,
    Selftest,
}

impl Mode {
    fn default_format(self) -> Format {
        match self {
            Mode::Simulate | Mode::DuffingSweep | Mode::Selftest => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state0: Option<StateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrate: Option<IntegrateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duffing: Option<DuffingConfig>,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub n: usize,
    pub theta: Vec<f64>,
    pub hamiltonian: Vec<TermConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub coeff_re: f64,
    #[serde(default)]
    pub coeff_im: f64,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateConfig {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "one")]
    pub output_every: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DuffingConfig {
    pub omega0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    /// Lowest admissible real-embedding eigenvalue accepted along simulated
    /// trajectories, as −admissibility_tol.
    #[serde(default = "default_admissibility_tol")]
    pub admissibility_tol: f64,
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_admissibility_tol() -> f64 {
    1e-8
}
fn default_residual_tol() -> f64 {
    1e-10
}
fn default_damping() -> f64 {
    0.5
}
fn default_max_iter() -> usize {
    1000
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            admissibility_tol: default_admissibility_tol(),
            residual_tol: default_residual_tol(),
            damping: default_damping(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Debug, Parser)]
#[command(name = "qglin", version, about = "Gaussian linearization of open quantum systems")]
pub struct Cli {
    pub mode: Mode,
    /// Job description (JSON). Optional only for selftest.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; defaults to output.path in the config, then stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for the random instances of selftest.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the normalized config and exit.
    #[arg(long)]
    pub dump_config: bool,
}

/// Why a run stopped; carries the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    /// Output produced before the failure; still written to the target.
    pub partial: Option<String>,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: format!("config error: {}", message.into()), partial: None }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self { code: 2, message: format!("cannot access {}: {e}", path.display()), partial: None }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Structure(_) | Error::Dimension(_) | Error::Validation(_) | Error::OutOfScope(_) => 2,
        Error::Admissibility(_) | Error::Stability(_) | Error::Degeneracy(_) => 3,
        Error::NonConvergence { .. } => 4,
        Error::Consistency(_) | Error::Numerical(_) => 5,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self { code: exit_code(&e), message: e.to_string(), partial: None }
    }
}

type Run<T> = std::result::Result<T, Failure>;

pub fn parse_config(text: &str) -> Run<JobConfig> {
    serde_json::from_str(text).map_err(|e| Failure::config(e.to_string()))
}

/// The config with the command-line mode filled in, rejecting a conflicting
/// `mode` field.
pub fn normalize(mut cfg: JobConfig, mode: Mode) -> Run<JobConfig> {
    match cfg.mode {
        Some(m) if m != mode => {
            return Err(Failure::config(format!("config mode {m:?} conflicts with command-line mode {mode:?}")))
        }
        _ => cfg.mode = Some(mode),
    }
    Ok(cfg)
}

pub fn canonical_json(cfg: &JobConfig) -> String {
    serde_json::to_string(cfg).expect("config serializes")
}

pub fn config_digest(cfg: &JobConfig) -> String {
    Sha256::digest(canonical_json(cfg).as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Seventeen significant digits, lowercase exponent.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn matrix(data: &[f64], rows: usize, cols: usize, what: &str) -> Run<Matrix> {
    if data.len() != rows * cols {
        return Err(Failure::config(format!("{what} has {} entries, expected {rows}x{cols}", data.len())));
    }
    Ok(Matrix::from_row_slice(rows, cols, data))
}

fn build_hamiltonian(sys: &SystemConfig, ccr: Arc<CcrStructure>) -> Run<OperatorPolynomial> {
    let mut monos = Vec::with_capacity(sys.hamiltonian.len());
    for (t, term) in sys.hamiltonian.iter().enumerate() {
        let mut idx = Vec::with_capacity(term.indices.len());
        for &i in &term.indices {
            if i == 0 || i > sys.n {
                return Err(Failure::config(format!(
                    "system.hamiltonian[{t}]: index {i} outside 1..={}",
                    sys.n
                )));
            }
            idx.push(i - 1);
        }
        monos.push(Monomial::new(Complex64::new(term.coeff_re, term.coeff_im), idx));
    }
    Ok(OperatorPolynomial::from_monomials(ccr, monos)?)
}

struct System {
    ccr: Arc<CcrStructure>,
    h: OperatorPolynomial,
    b: Option<Matrix>,
}

fn build_system(cfg: &JobConfig) -> Run<System> {
    let sys = cfg.system.as_ref().ok_or_else(|| Failure::config("missing section `system`"))?;
    let theta = matrix(&sys.theta, sys.n, sys.n, "system.theta")?;
    let ccr = Arc::new(CcrStructure::new(theta)?);
    let h = build_hamiltonian(sys, ccr.clone())?;
    h.require_self_adjoint("system.hamiltonian")?;
    let b = match &sys.b {
        None => None,
        Some(data) => {
            let m = match sys.m {
                Some(m) => m,
                None if sys.n > 0 && data.len() % sys.n == 0 => data.len() / sys.n,
                None => return Err(Failure::config("system.b length is not a multiple of n")),
            };
            Some(matrix(data, sys.n, m, "system.b")?)
        }
    };
    Ok(System { ccr, h, b })
}

fn build_state(cfg: &JobConfig, ccr: &Arc<CcrStructure>) -> Run<Option<GaussianState>> {
    let Some(st) = &cfg.state0 else { return Ok(None) };
    let n = ccr.dim();
    if st.mu.len() != n {
        return Err(Failure::config(format!("state0.mu has {} entries, expected {n}", st.mu.len())));
    }
    let sigma = matrix(&st.sigma, n, n, "state0.sigma")?;
    Ok(Some(GaussianState::new(Vector::from_column_slice(&st.mu), sigma, ccr.clone())?))
}

fn open_model(sys: System) -> Run<OpenSystemModel> {
    let b = sys.b.ok_or_else(|| Failure::config("system.b is required for this mode"))?;
    Ok(OpenSystemModel::new(sys.h, b)?)
}

fn duffing_params(cfg: &JobConfig) -> Run<(DuffingConfig, DuffingParams)> {
    let d = cfg.duffing.clone().ok_or_else(|| Failure::config("missing section `duffing`"))?;
    let m = match d.m {
        Some(m) => m,
        None if d.b.len() % 2 == 0 => d.b.len() / 2,
        None => return Err(Failure::config("duffing.b length is odd")),
    };
    let b = matrix(&d.b, 2, m, "duffing.b")?;
    let f = d.f.unwrap_or(0.0);
    let p = DuffingParams::new(d.omega0, f, b)?;
    Ok((d, p))
}

/// Minimal ordered JSON writer with fixed float formatting.
struct JsonReport {
    fields: Vec<(String, String)>,
}

fn json_num(x: f64) -> String {
    if x.is_finite() { fmt_f64(x) } else { "null".into() }
}

fn json_vec(v: &Vector) -> String {
    format!("[{}]", v.iter().map(|&x| json_num(x)).collect::<Vec<_>>().join(", "))
}

fn json_mat(m: &Matrix) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| format!("[{}]", (0..m.ncols()).map(|j| json_num(m[(i, j)])).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("[{}]", rows.join(", "))
}

impl JsonReport {
    fn new() -> Self {
        Self { fields: Vec::new() }
    }

    fn raw(&mut self, key: &str, value: String) -> &mut Self {
        self.fields.push((key.to_string(), value));
        self
    }

    fn num(&mut self, key: &str, x: f64) -> &mut Self {
        self.raw(key, json_num(x))
    }

    fn vec(&mut self, key: &str, v: &Vector) -> &mut Self {
        self.raw(key, json_vec(v))
    }

    fn mat(&mut self, key: &str, m: &Matrix) -> &mut Self {
        self.raw(key, json_mat(m))
    }

    fn render(&self) -> String {
        let body: Vec<String> = self
            .fields
            .iter()
            .map(|(k, v)| format!("  {}: {v}", serde_json::to_string(k).expect("string")))
            .collect();
        format!("{{\n{}\n}}\n", body.join(",\n"))
    }
}

fn header(cfg: &JobConfig, extra: &[String]) -> String {
    let mut s = format!("# qglin {VERSION}\n# config-sha256 {}\n", config_digest(cfg));
    for line in extra {
        let _ = writeln!(s, "# {line}");
    }
    s
}

fn run_linearize(cfg: &JobConfig) -> Run<String> {
    let sys = build_system(cfg)?;
    let state = build_state(cfg, &sys.ccr)?.ok_or_else(|| Failure::config("missing section `state0`"))?;
    let fit = quadfit::optimal_quadratic_gaussian(&sys.h, &state)?;
    let md = moments::gaussian_moment_tensors(&sys.h, &state)?;
    let mean = moments::hamiltonian_moments(&sys.h, &state)?.mean.re;
    let q = quadfit::evaluate_q(&fit, &sys.h, &state)?;
    let (a, b, r) = fit.uncentered(state.mu(), mean);
    let mut rep = JsonReport::new();
    rep.raw("mode", "\"linearize\"".into())
        .num("alpha", fit.alpha)
        .vec("beta", &fit.beta)
        .mat("r", &fit.r)
        .num("a", a)
        .vec("b", &b)
        .mat("r_uncentered", &r)
        .num("mean_energy", mean)
        .num("q_residual", q)
        .num("normal_equation_residual", quadfit::normal_equation_residuals(&fit, &md).max());
    Ok(header(cfg, &[]) + &rep.render())
}

fn sigma_label(j: usize, k: usize, n: usize) -> String {
    if n < 10 { format!("sigma_{j}{k}") } else { format!("sigma_{j}_{k}") }
}

fn run_simulate(cfg: &JobConfig) -> Run<String> {
    let sys = build_system(cfg)?;
    let state = build_state(cfg, &sys.ccr)?.ok_or_else(|| Failure::config("missing section `state0`"))?;
    let ig = cfg.integrate.clone().ok_or_else(|| Failure::config("missing section `integrate`"))?;
    if ig.output_every == 0 {
        return Err(Failure::config("integrate.output_every must be at least 1"));
    }
    let model = open_model(sys)?;
    let n = model.dim();
    let theta = model.ccr().theta().clone();
    let tol = cfg.numerics.admissibility_tol;

    let mut out = header(cfg, &[]);
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|j| format!("mu_{j}")));
    for j in 1..=n {
        for k in j..=n {
            cols.push(sigma_label(j, k, n));
        }
    }
    out.push_str(&cols.join(","));
    out.push('\n');

    let mut index = 0usize;
    let mut violation: Option<String> = None;
    let row = |p: &dynamics::TrajectoryPoint, out: &mut String| {
        let mut fields = vec![fmt_f64(p.t)];
        fields.extend(p.mu.iter().map(|&x| fmt_f64(x)));
        for j in 0..n {
            for k in j..n {
                fields.push(fmt_f64(p.sigma[(j, k)]));
            }
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    };
    let result = dynamics::integrate_observed(
        &model,
        state.mu(),
        state.sigma(),
        ig.dt,
        ig.t_final,
        |p| {
            if violation.is_none() {
                match linalg::admissibility_margin(&p.sigma, &theta) {
                    Ok(m) if m >= -tol => {}
                    Ok(m) => violation = Some(format!("admissibility lost at t = {}: margin {m:e}", p.t)),
                    Err(e) => violation = Some(e.to_string()),
                }
            }
            if index.is_multiple_of(ig.output_every) {
                row(p, &mut out);
            }
            index += 1;
        },
    );
    match result {
        Ok(last) => {
            if !(index - 1).is_multiple_of(ig.output_every) {
                row(&last, &mut out);
            }
            if let Some(v) = violation {
                return Err(Failure { code: 3, message: v, partial: Some(out) });
            }
            Ok(out)
        }
        Err(e) => {
            let at = e.last.as_ref().map(|p| fmt_f64(p.t)).unwrap_or_else(|| "start".into());
            if let Some(p) = &e.last {
                if !(index - 1).is_multiple_of(ig.output_every) {
                    row(p, &mut out);
                }
            }
            Err(Failure {
                code: exit_code(&e.error),
                message: format!("{} (last valid point t = {at})", e.error),
                partial: Some(out),
            })
        }
    }
}

fn run_steady(cfg: &JobConfig) -> Run<String> {
    let sys = build_system(cfg)?;
    let state = build_state(cfg, &sys.ccr)?;
    let model = open_model(sys)?;
    let (mu0, sigma0) = match state {
        Some(s) => (s.mu().clone(), s.sigma().clone()),
        None => dynamics::default_initial_iterate(&model)?,
    };
    let opts = SteadyStateOptions {
        damping: cfg.numerics.damping,
        max_iter: cfg.numerics.max_iter,
        tol: cfg.numerics.residual_tol,
    };
    let res = dynamics::steady_state(&model, &mu0, &sigma0, &opts)?;
    let mut rep = JsonReport::new();
    rep.raw("mode", "\"steady\"".into())
        .vec("mu", &res.mu)
        .mat("sigma", &res.sigma)
        .mat("a", &res.a)
        .raw("hurwitz", res.hurwitz.to_string())
        .num("mean_residual", res.residuals.0)
        .num("lyapunov_residual", res.residuals.1)
        .num("pr_residual", dynamics::pr_residual(&res.a, &model))
        .raw("iterations", res.iterations.to_string())
        .vec("initial_mu", &mu0)
        .mat("initial_sigma", &sigma0);
    Ok(header(cfg, &[]) + &rep.render())
}

fn run_duffing_steady(cfg: &JobConfig) -> Run<String> {
    let (_, p) = duffing_params(cfg)?;
    let st = duffing::steady_sigma(&p)?;
    let s11 = st.sigma[(0, 0)];
    let (beta, r) = duffing::duffing_quadratic_params(0.0, 0.0, s11, &p)?;
    let ric = duffing::ric_residuals(&p, &st.sigma);
    let mut rep = JsonReport::new();
    rep.raw("mode", "\"duffing-steady\"".into())
        .num("omega0", p.omega0)
        .num("f", p.f)
        .num("phi", p.phi)
        .num("sigma11", s11)
        .num("sigma12", st.sigma[(0, 1)])
        .num("sigma22", st.sigma[(1, 1)])
        .mat("a", &st.a)
        .raw("hurwitz", st.hurwitz.to_string())
        .vec("beta", &beta)
        .mat("r", &r)
        .num("poly_residual", duffing::poly_residual(&p, s11))
        .vec("ric_residuals", &Vector::from_column_slice(&ric))
        .num("det_sigma", st.sigma.determinant());
    Ok(header(cfg, &[]) + &rep.render())
}

fn run_duffing_sweep(cfg: &JobConfig) -> Run<String> {
    let (d, p) = duffing_params(cfg)?;
    let grid = match (&d.f_grid, d.f) {
        (Some(g), _) => g.clone(),
        (None, Some(f)) => vec![f],
        (None, None) => duffing::default_f_grid(),
    };
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Failure::config("duffing.f_grid must be strictly ascending"));
    }
    let rows = duffing::sweep_f(&p, &grid)?;
    let mut out = header(cfg, &[format!("phi {}", fmt_f64(p.phi))]);
    out.push_str("f,sigma11,sigma12,sigma22,hurwitz\n");
    let mut failures = 0;
    for row in &rows {
        match &row.result {
            Ok(st) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    fmt_f64(row.f),
                    fmt_f64(st.sigma[(0, 0)]),
                    fmt_f64(st.sigma[(0, 1)]),
                    fmt_f64(st.sigma[(1, 1)]),
                    st.hurwitz
                );
            }
            Err(e) => {
                failures += 1;
                let _ = writeln!(out, "# f = {}: {e}", fmt_f64(row.f));
                let _ = writeln!(out, "{},nan,nan,nan,false", fmt_f64(row.f));
            }
        }
    }
    if failures > 0 {
        let _ = writeln!(out, "# {failures} of {} rows failed", rows.len());
    }
    Ok(out)
}

fn run_selftest(cfg: &JobConfig, seed: u64) -> Run<String> {
    let report = selftest::run_selftest(seed);
    let mut out = header(cfg, &[format!("seed {seed}")]);
    out.push_str("suite,passed,failed\n");
    for s in &report.suites {
        let _ = writeln!(out, "{},{},{}", s.name, s.passed, s.failed);
    }
    for s in &report.suites {
        for f in &s.failures {
            let _ = writeln!(out, "# {}: {f}", s.name);
        }
    }
    let failed = report.total_failed();
    if failed > 0 {
        return Err(Failure { code: 5, message: format!("selftest: {failed} cases failed"), partial: Some(out) });
    }
    Ok(out)
}

/// Runs a normalized job and returns the output text.
pub fn execute(cfg: &JobConfig, seed: Option<u64>) -> Run<String> {
    match cfg.mode.expect("normalized config has a mode") {
        Mode::Linearize => run_linearize(cfg),
        Mode::Simulate => run_simulate(cfg),
        Mode::Steady => run_steady(cfg),
        Mode::DuffingSteady => run_duffing_steady(cfg),
        Mode::DuffingSweep => run_duffing_sweep(cfg),
        Mode::Selftest => run_selftest(cfg, seed.unwrap_or(DEFAULT_SEED)),
    }
}

fn output_path(cli: &Cli, cfg: &JobConfig) -> Option<PathBuf> {
    cli.out.clone().or_else(|| cfg.output.as_ref().and_then(|o| o.path.as_ref().map(PathBuf::from)))
}

fn check_format(cfg: &JobConfig, mode: Mode) -> Run<()> {
    match cfg.output.as_ref().and_then(|o| o.format) {
        Some(f) if f != mode.default_format() => {
            Err(Failure::config(format!("mode {mode:?} writes {:?}, not {f:?}", mode.default_format())))
        }
        _ => Ok(()),
    }
}

/// Parses arguments, runs the job and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match run_inner(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("qglin: {}", f.message);
            f.code
        }
    }
}

fn run_inner(cli: &Cli) -> Run<()> {
    let cfg = match &cli.config {
        Some(path) => parse_config(&std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?)?,
        None if cli.mode == Mode::Selftest => JobConfig::default(),
        None => return Err(Failure::config("--config is required for this mode")),
    };
    let cfg = normalize(cfg, cli.mode)?;
    if cli.dump_config {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return Ok(());
    }
    check_format(&cfg, cli.mode)?;
    match execute(&cfg, cli.seed) {
        Ok(text) => emit(cli, &cfg, &text),
        Err(mut f) => {
            if let Some(text) = f.partial.take() {
                emit(cli, &cfg, &text)?;
            }
            Err(f)
        }
    }
}

fn emit(cli: &Cli, cfg: &JobConfig, text: &str) -> Run<()> {
    match output_path(cli, cfg) {
        Some(path) => std::fs::write(&path, text).map_err(|e| Failure::io(&path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_seventeen_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(-0.000125), "-1.2500000000000000e-4");
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(parse_config(r#"{"bogus": 1}"#).is_err());
        assert!(parse_config(r#"{"duffing": {"omega0": 1, "b": [1,0,0,1], "x": 2}}"#).is_err());
        let err = parse_config("{\n\"mode\": 3}").unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("line 2"));
    }

    #[test]
    fn mode_conflict_is_a_config_error() {
        let cfg = parse_config(r#"{"mode": "simulate"}"#).unwrap();
        assert_eq!(normalize(cfg, Mode::Steady).unwrap_err().code, 2);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Admissibility(String::new())), 3);
        assert_eq!(exit_code(&Error::NonConvergence { iterations: 1, mean_residual: 0.0, lyapunov_residual: 0.0 }), 4);
        assert_eq!(exit_code(&Error::Consistency(String::new())), 5);
        assert_eq!(exit_code(&Error::OutOfScope(String::new())), 2);
    }

    #[test]
    fn digest_is_stable_under_reformatting() {
        let a = parse_config(r#"{"duffing": {"omega0": 1.0, "b": [1, 0, 0, 1]}}"#).unwrap();
        let b = parse_config("{ \"duffing\" : { \"b\" : [1.0,0,0,1.0],\n \"omega0\": 1 } }").unwrap();
        assert_eq!(config_digest(&a), config_digest(&b));
    }

    #[test]
    fn hamiltonian_indices_are_one_based() {
        let cfg = parse_config(
            r#"{"system": {"n": 2, "theta": [0, 1, -1, 0],
                "hamiltonian": [{"coeff_re": 0.5, "indices": [1, 1]}, {"coeff_re": 0.5, "indices": [2, 2]}]}}"#,
        )
        .unwrap();
        let sys = build_system(&cfg).ok().unwrap();
        assert_eq!(sys.h.coefficient(&[1, 1]), Complex64::new(0.5, 0.0));
        let bad = parse_config(
            r#"{"system": {"n": 2, "theta": [0, 1, -1, 0], "hamiltonian": [{"coeff_re": 1, "indices": [0]}]}}"#,
        )
        .unwrap();
        assert_eq!(build_system(&bad).err().unwrap().code, 2);
    }
}
