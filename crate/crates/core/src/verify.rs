//! Self-check suite: structural invariants of the channel construction and
//! the protocol, evaluated for a list of receiver counts.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::Execution;
use crate::gaussian::{gaussian_fidelity, VACUUM_VARIANCE};
use crate::linalg;
use crate::montecarlo::{run_teleclone_mc, McConfig};
use crate::mqc::{build_mqc, closed_form_covariance, equal_squeezing_db, mqc_circuit, theta_bounds, MqcSpec};
use crate::optimizer::{evaluate_genome, genetic_search, recipe_genome, SearchConfig};
use crate::protocol::{
    clone_fidelity, optimal_excess_noise, optimal_fidelity, verify_output_symmetry_with, InputSpec,
    TelecloneSetup,
};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub receivers: Vec<usize>,
    /// Tolerance of every deterministic check.
    pub tolerance: f64,
    pub mc_trials: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            receivers: vec![2, 3, 4, 5],
            tolerance: DEFAULT_TOLERANCE,
            mc_trials: 20_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    #[serde(rename = "M")]
    pub receivers: Option<usize>,
    pub passed: bool,
    /// Worst observed deviation.
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    #[serde(rename = "M")]
    pub receivers: usize,
    pub fidelity: f64,
    pub optimal_fidelity: f64,
    pub lambda: f64,
    pub squeezing_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub table: Vec<TableRow>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Checks {
    out: Vec<CheckResult>,
}

impl Checks {
    fn push(&mut self, name: &str, m: Option<usize>, value: f64, tolerance: f64) {
        self.out.push(CheckResult {
            name: name.to_string(),
            receivers: m,
            passed: value.is_finite() && value <= tolerance,
            value,
            tolerance,
        });
    }

    fn flag(&mut self, name: &str, m: Option<usize>, ok: bool) {
        self.push(name, m, if ok { 0.0 } else { 1.0 }, 0.5);
    }
}

fn interior_thetas(m: usize) -> Vec<f64> {
    let (lo, hi) = theta_bounds(m);
    (1..=5).map(|k| lo + (hi - lo) * k as f64 / 6.0).collect()
}

fn per_m(c: &mut Checks, m: usize, opts: &VerifyOptions, table: &mut Vec<TableRow>) -> Result<()> {
    let tol = opts.tolerance;
    let spec = MqcSpec::symmetric(m, 0.0)?;
    let state = build_mqc(&spec)?;

    c.push("symplectic identity", Some(m), mqc_circuit(&spec)?.symplectic_deviation(), tol);

    let nu = state.symplectic_eigenvalues()?;
    let lowest = nu.iter().copied().fold(f64::INFINITY, f64::min);
    c.push("physicality", Some(m), (VACUUM_VARIANCE - lowest).max(0.0), tol);
    let purity = nu.iter().map(|v| (v - VACUUM_VARIANCE).abs()).fold(0.0, f64::max);
    c.push("purity", Some(m), purity, tol);

    let mut worst = 0.0_f64;
    for s in [-0.5, 0.0, 0.5] {
        for theta in interior_thetas(m) {
            let spec = MqcSpec::new(m, theta, s)?;
            let a = build_mqc(&spec)?;
            let b = closed_form_covariance(&spec)?;
            worst = worst.max(linalg::max_abs_diff(a.cov(), b.cov()));
        }
    }
    c.push("circuit vs closed form", Some(m), worst, tol);

    let setup = TelecloneSetup::new(state, 0)?;
    let ens = setup.ensemble()?;
    let input = InputSpec::coherent(0.3, -0.2);
    let joint = ens.joint_output_cov(&input.state()?);
    c.push("output symmetry", Some(m), verify_output_symmetry_with(&joint, tol).max_deviation, tol);

    let lam = optimal_excess_noise(m);
    let noise_dev = ens
        .clone_noise
        .iter()
        .map(|n| (n[0][0] - lam).abs().max((n[1][1] - lam).abs()).max(n[0][1].abs()))
        .fold(0.0, f64::max);
    c.push("excess noise", Some(m), noise_dev, tol);

    let report = setup.analytic(&input)?;
    let best = optimal_fidelity(m)?;
    c.push("optimal fidelity", Some(m), (report.fidelity_per_clone - best).abs(), tol);

    let (lx, lp) = report.excess_noise;
    let closed = clone_fidelity(lx, lp, 0.0)?;
    let overlap = gaussian_fidelity(&input.state()?, &ens.clone_output(0, &input.state()?)?)?;
    c.push("fidelity path agreement", Some(m), (closed - overlap).abs(), tol);

    let (_, residual) = evaluate_genome(&recipe_genome(m)?, m)?;
    c.push("recipe genome feasible", Some(m), residual, tol.max(1e-12) * 10.0);

    // Monte Carlo: statistical agreement with the analytic channel.
    let mc = run_teleclone_mc(&setup, &input, &McConfig::new(opts.mc_trials, opts.seed))?;
    let se = mc.standard_errors.expect("Monte Carlo report carries errors");
    let mc_dev = (mc.excess_noise.0 - lx).abs().max((mc.excess_noise.1 - lp).abs());
    c.push("Monte Carlo noise", Some(m), mc_dev, 5.0 / (opts.mc_trials as f64).sqrt());
    c.push(
        "Monte Carlo fidelity",
        Some(m),
        (mc.fidelity_per_clone - best).abs(),
        4.0 * se.fidelity.max(1e-12),
    );

    table.push(TableRow {
        receivers: m,
        fidelity: report.fidelity_per_clone,
        optimal_fidelity: best,
        lambda: lx,
        squeezing_db: equal_squeezing_db(m)?,
    });
    Ok(())
}

fn determinism(c: &mut Checks, opts: &VerifyOptions) -> Result<()> {
    let setup = TelecloneSetup::new(build_mqc(&MqcSpec::symmetric(2, 0.0)?)?, 0)?;
    let input = InputSpec::coherent(0.1, 0.4);
    let trials = opts.mc_trials.clamp(2, 5000);
    let seq = McConfig::new(trials, opts.seed).with_execution(Execution::Sequential);
    let par = McConfig::new(trials, opts.seed).with_execution(Execution::Parallel);
    let a = run_teleclone_mc(&setup, &input, &seq)?;
    let b = run_teleclone_mc(&setup, &input, &par)?;
    let c2 = run_teleclone_mc(&setup, &input, &seq)?;
    c.flag("Monte Carlo determinism", None, a == b && a == c2);

    let cfg = SearchConfig {
        population: 8,
        generations: 3,
        seed: opts.seed,
        ..SearchConfig::default()
    };
    let g1 = genetic_search(2, &cfg)?;
    let g2 = genetic_search(2, &SearchConfig { execution: Execution::Sequential, ..cfg.clone() })?;
    c.flag("search determinism", None, g1.best_genome == g2.best_genome && g1.history == g2.history);
    Ok(())
}

/// Runs every check. Errors from the library become failed checks.
pub fn run_verification(opts: &VerifyOptions) -> VerifyReport {
    let mut c = Checks { out: Vec::new() };
    let mut table = Vec::new();
    for &m in &opts.receivers {
        if let Err(e) = per_m(&mut c, m, opts, &mut table) {
            c.out.push(CheckResult {
                name: format!("evaluation error: {e}"),
                receivers: Some(m),
                passed: false,
                value: f64::NAN,
                tolerance: opts.tolerance,
            });
        }
    }
    if let Err(e) = determinism(&mut c, opts) {
        c.out.push(CheckResult {
            name: format!("evaluation error: {e}"),
            receivers: None,
            passed: false,
            value: f64::NAN,
            tolerance: opts.tolerance,
        });
    }
    VerifyReport { checks: c.out, table }
}
