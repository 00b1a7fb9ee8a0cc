use std::f64::consts::FRAC_PI_4;
use std::path::{Path, PathBuf};

use serde::Serialize;

use teleclone_core::gaussian::StateDoc;
use teleclone_core::montecarlo::{run_teleclone_mc, McConfig};
use teleclone_core::mqc::{
    build_mqc, build_symmetric_mqc, equal_squeezing_db, squeezing_db, MqcSpec, SymmetricMqcSpec,
};
use teleclone_core::optimizer::{
    analyze_solution, genetic_search, history_csv, recipe_genome, SearchConfig, SearchResult,
    SolutionAnalysis, Target,
};
use teleclone_core::protocol::{rotated_bell_mixer, InputSpec, TelecloneReport};
use teleclone_core::verify::{run_verification, VerifyOptions, DEFAULT_TOLERANCE};
use teleclone_core::{GaussianState, TelecloneSetup};

use crate::output::{num, read_json, to_json, write_outputs, CliError, CliResult, RunManifest};
use crate::{MethodArg, MqcArgs, OptimizeArgs, SweepArgs, TargetArg, TelecloneArgs, VerifyArgs};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Signed dB of a squeezer: `10 log₁₀ e^{−2|r|}`.
fn signed_db(r: f64) -> f64 {
    0.0 - squeezing_db(r)
}

fn input_for(s_in: f64, x0: f64, p0: f64) -> InputSpec {
    if s_in == 0.0 {
        InputSpec::coherent(x0, p0)
    } else {
        InputSpec::squeezed(x0, p0, s_in)
    }
}

pub fn mqc(a: &MqcArgs) -> CliResult<()> {
    let mut spec = match &a.spec {
        Some(path) => read_json::<MqcSpec>(path)?,
        None => MqcSpec {
            receivers: a.m.ok_or_else(|| usage("either --M or --spec is required"))?,
            theta0: FRAC_PI_4,
            s: 0.0,
        },
    };
    if let Some(m) = a.m {
        spec.receivers = m;
    }
    if let Some(t) = a.theta0 {
        spec.theta0 = t;
    }
    if let Some(s) = a.s {
        spec.s = s;
    }
    spec.validate()?;
    let (r1, r2) = spec.squeezing()?;
    let state = build_mqc(&spec)?;

    println!("M = {}, theta0 = {}, s = {}", spec.receivers, num(spec.theta0), num(spec.s));
    println!("r1 = {}, r2 = {}", num(r1), num(r2));
    let n = spec.receivers + 1;
    for k in 0..n {
        let r = match k {
            0 => r1 + spec.s,
            1 => spec.s - r2,
            _ => spec.s,
        };
        println!("mode {k}: squeezing {:.2} dB (r = {})", squeezing_db(r), num(r));
    }
    let total: f64 = (0..n)
        .map(|k| match k {
            0 => squeezing_db(r1 + spec.s),
            1 => squeezing_db(spec.s - r2),
            _ => squeezing_db(spec.s),
        })
        .sum();
    println!("total squeezing: {:.2} dB", total);
    println!(
        "equal-squeezing reference 10log10((sqrt(M)-1)/(sqrt(M)+1)) = {:.2} dB",
        equal_squeezing_db(spec.receivers)?
    );

    if let Some(out) = &a.out {
        let mut manifest = RunManifest::new("mqc");
        manifest.param("M", spec.receivers).param("theta0", spec.theta0).param("s", spec.s);
        write_outputs(&mut manifest, &[(out.as_path(), to_json(&state.to_json_doc())?)])?;
    }
    Ok(())
}

fn build_setup(a: &TelecloneArgs) -> CliResult<(TelecloneSetup, RunManifest)> {
    let mut manifest = RunManifest::new("teleclone");
    let (state, receivers) = if let Some(path) = &a.state_file {
        let doc: StateDoc = read_json(path)?;
        let state = GaussianState::from_json_doc(&doc)?;
        manifest.param("state_file", path.display().to_string());
        let receivers = (0..state.num_modes()).filter(|&k| k != a.port).collect();
        (state, receivers)
    } else {
        let m = a.m.ok_or_else(|| usage("either --M or --state-file is required"))?;
        manifest.param("M", m).param("s", a.s);
        if let Some(r) = a.epr_r {
            let spec = SymmetricMqcSpec::new(m, r, a.s)?;
            if a.port >= m {
                return Err(usage(format!("port must be one of the left modes 0..{m}")));
            }
            manifest.param("epr_r", r);
            (build_symmetric_mqc(&spec)?, spec.right_modes())
        } else {
            let theta0 = a.theta0.unwrap_or(FRAC_PI_4);
            manifest.param("theta0", theta0);
            let receivers = (0..=m).filter(|&k| k != a.port).collect();
            (build_mqc(&MqcSpec::new(m, theta0, a.s)?)?, receivers)
        }
    };
    let u2 = match a.u2.as_deref() {
        None => [0.0; 4],
        Some(&[ta, pa, tb, pb]) => [ta, pa, tb, pb],
        Some(_) => return Err(usage("--u2 takes exactly four angles")),
    };
    manifest.param("port", a.port).param("u2", u2);
    let setup = TelecloneSetup::with_pre_bell(state, a.port, receivers, rotated_bell_mixer(u2)?)?;
    Ok((setup, manifest))
}

fn run_protocol(setup: &TelecloneSetup, input: &InputSpec, method: MethodArg, trials: usize, seed: u64, clone: usize) -> CliResult<TelecloneReport> {
    Ok(match method {
        MethodArg::Analytic => setup.analytic(input)?,
        MethodArg::Mc => {
            let mut cfg = McConfig::new(trials, seed);
            cfg.clone_index = clone;
            run_teleclone_mc(setup, input, &cfg)?
        }
    })
}

pub fn teleclone(a: &TelecloneArgs) -> CliResult<()> {
    let (setup, mut manifest) = build_setup(a)?;
    let input = input_for(a.s_in, a.x0, a.p0);
    let seed = a.seed.resolve();
    let report = run_protocol(&setup, &input, a.method, a.trials, seed, a.clone)?;
    manifest.param("input", input).param("method", format!("{:?}", a.method).to_lowercase());
    if a.method == MethodArg::Mc {
        manifest.param("trials", a.trials).param("clone", a.clone);
        manifest.seed = Some(seed);
    }
    let text = to_json(&report)?;
    match &a.out {
        Some(out) => {
            write_outputs(&mut manifest, &[(out.as_path(), text)])?;
            println!(
                "fidelity per clone: {} (optimal {})",
                num(report.fidelity_per_clone),
                num(report.optimal_fidelity)
            );
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_linspace(text: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || usage(format!("range `{text}` must look like start:stop:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(usage(format!("range `{text}` is empty")));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    Ok((0..count)
        .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
        .collect())
}

fn parse_int_range(text: &str) -> CliResult<Vec<usize>> {
    let bad = || usage(format!("range `{text}` must look like lo:hi"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(usage(format!("range `{text}` is empty")));
    }
    Ok((lo..=hi).collect())
}

struct SweepPoint {
    m: usize,
    theta0: f64,
    s: f64,
    epr_r: Option<f64>,
}

pub const SWEEP_HEADER: &str =
    "M,theta0,s,lambda_x,lambda_p,fidelity,optimal_fidelity,method,r1_db,r2_db,epr_r";

pub fn sweep(a: &SweepArgs) -> CliResult<()> {
    let theta0 = a.theta0.unwrap_or(FRAC_PI_4);
    let point = |m, theta0, s| SweepPoint { m, theta0, s, epr_r: None };
    let (name, points): (&str, Vec<SweepPoint>) = if let Some(r) = &a.m_range {
        ("M", parse_int_range(r)?.into_iter().map(|m| point(m, theta0, a.s)).collect())
    } else if let Some(r) = &a.theta0_range {
        ("theta0", parse_linspace(r)?.into_iter().map(|t| point(a.m, t, a.s)).collect())
    } else if let Some(r) = &a.s_range {
        ("s", parse_linspace(r)?.into_iter().map(|s| point(a.m, theta0, s)).collect())
    } else if let Some(r) = &a.r_range {
        let rs = parse_linspace(r)?;
        ("r", rs.into_iter().map(|r| SweepPoint { epr_r: Some(r), ..point(a.m, FRAC_PI_4, a.s) }).collect())
    } else {
        return Err(usage("one of --m-range, --theta0-range, --s-range, --r-range is required"));
    };

    let seed = a.seed.resolve();
    let method = match a.method {
        MethodArg::Analytic => "analytic",
        MethodArg::Mc => "mc",
    };
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for p in &points {
        let input = input_for(p.s, 0.0, 0.0);
        let (setup, r1_db, r2_db) = match p.epr_r {
            Some(r) => {
                let spec = SymmetricMqcSpec::new(p.m, r, p.s)?;
                let setup = TelecloneSetup::with_receivers(build_symmetric_mqc(&spec)?, 0, spec.right_modes())?;
                (setup, signed_db(r), signed_db(r))
            }
            None => {
                let spec = MqcSpec::new(p.m, p.theta0, p.s)?;
                let (r1, r2) = spec.squeezing()?;
                (TelecloneSetup::new(build_mqc(&spec)?, 0)?, signed_db(r1), signed_db(r2))
            }
        };
        let report = run_protocol(&setup, &input, a.method, a.trials, seed, 0)?;
        let (lx, lp) = report.excess_noise;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            p.m,
            num(p.theta0),
            num(p.s),
            num(lx),
            num(lp),
            num(report.fidelity_per_clone),
            num(report.optimal_fidelity),
            method,
            num(r1_db),
            num(r2_db),
            p.epr_r.map(num).unwrap_or_default()
        ));
    }
    match &a.out {
        Some(out) => {
            let mut manifest = RunManifest::new("sweep");
            manifest
                .param("parameter", name)
                .param("points", points.len())
                .param("M", a.m)
                .param("theta0", theta0)
                .param("s", a.s)
                .param("method", method);
            if a.method == MethodArg::Mc {
                manifest.param("trials", a.trials);
                manifest.seed = Some(seed);
            }
            write_outputs(&mut manifest, &[(out.as_path(), csv)])?;
            println!("{} rows written to {}", points.len(), out.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct OptimizeOutput<'a> {
    #[serde(flatten)]
    result: &'a SearchResult,
    analysis: &'a SolutionAnalysis,
}

fn history_path(out: &Path) -> PathBuf {
    out.with_extension("history.csv")
}

pub fn optimize(a: &OptimizeArgs) -> CliResult<()> {
    let m = a.m;
    let mut cfg: SearchConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => SearchConfig::default(),
    };
    if let Some(v) = a.population {
        cfg.population = v;
    }
    if let Some(v) = a.generations {
        cfg.generations = v;
    }
    if let Some(v) = a.mutation_sigma {
        cfg.mutation_sigma = v;
    }
    if let Some(v) = a.crossover_rate {
        cfg.crossover_rate = v;
    }
    if let Some(v) = a.penalty_weight {
        cfg.penalty_weight = v;
    }
    if let Some(v) = a.tolerance {
        cfg.tolerance = v;
    }
    let current_s = match cfg.target {
        Target::SymmetricNoise { s } | Target::Fidelity { s } => s,
    };
    let s = a.target_s.unwrap_or(current_s);
    cfg.target = match (a.target, cfg.target) {
        (Some(TargetArg::SymmetricNoise), _) | (None, Target::SymmetricNoise { .. }) => Target::SymmetricNoise { s },
        (Some(TargetArg::Fidelity), _) | (None, Target::Fidelity { .. }) => Target::Fidelity { s },
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed.resolve();
    }
    if a.seed_recipe {
        cfg.seeds.push(recipe_genome(m)?);
    }
    cfg.validate(m)?;

    let result = genetic_search(m, &cfg)?;
    let analysis = analyze_solution(&result, m);
    let reference = 2.0 * equal_squeezing_db(m)?.abs();
    println!(
        "M = {m}, generations run: {}, feasible: {} (residual {:e})",
        result.generations_run,
        if result.feasible { "yes" } else { "no" },
        result.constraint_residual
    );
    println!(
        "total squeezing: {:.4} dB (two-squeezer reference {:.4} dB, {:+.2}%)",
        result.total_squeezing_db,
        reference,
        100.0 * (result.total_squeezing_db / reference - 1.0)
    );
    let sorted: Vec<String> = analysis.sorted_db.iter().map(|d| format!("{d:.4}")).collect();
    println!("per-mode squeezing (dB, ascending): {}", sorted.join(", "));
    println!(
        "near-vacuum modes (< {} dB): {} of {}; only a pair squeezed: {}",
        analysis.vacuum_threshold_db,
        analysis.near_vacuum_modes,
        m + 1,
        if analysis.only_pair_squeezed { "yes" } else { "no" }
    );
    println!(
        "pair split: {:.1}% / {:.1}%",
        100.0 * analysis.pair_split,
        100.0 * (1.0 - analysis.pair_split)
    );

    if let Some(out) = &a.out {
        let hist = a.history.clone().unwrap_or_else(|| history_path(out));
        let mut manifest = RunManifest::new("optimize");
        manifest.param("M", m).param("config", &cfg);
        manifest.seed = Some(cfg.seed);
        let json = to_json(&OptimizeOutput { result: &result, analysis: &analysis })?;
        write_outputs(&mut manifest, &[(out.as_path(), json), (hist.as_path(), history_csv(&result.history))])?;
    }
    Ok(())
}

fn tolerance_override() -> CliResult<Option<f64>> {
    match std::env::var("TELECLONE_TOL") {
        Ok(v) => {
            let t: f64 = v
                .trim()
                .parse()
                .map_err(|_| usage(format!("TELECLONE_TOL=`{v}` is not a number")))?;
            if !(t > 0.0) {
                return Err(usage("TELECLONE_TOL must be positive"));
            }
            Ok(Some(t))
        }
        Err(_) => Ok(None),
    }
}

pub fn verify(a: &VerifyArgs) -> CliResult<()> {
    if a.m.is_empty() {
        return Err(usage("--M needs at least one value"));
    }
    let tol_override = tolerance_override()?;
    let opts = VerifyOptions {
        receivers: a.m.clone(),
        tolerance: tol_override.unwrap_or(DEFAULT_TOLERANCE),
        mc_trials: a.trials,
        seed: a.seed.resolve(),
    };
    if let Some(t) = tol_override {
        println!("tolerance override from TELECLONE_TOL: {t:e}");
    }
    let report = run_verification(&opts);

    println!("{:>3}  {:>18}  {:>18}  {:>18}  {:>14}", "M", "fidelity", "optimal", "lambda", "squeezing_dB");
    for row in &report.table {
        println!(
            "{:>3}  {:>18.15}  {:>18.15}  {:>18.15}  {:>14.4}",
            row.receivers, row.fidelity, row.optimal_fidelity, row.lambda, row.squeezing_db
        );
    }
    println!();
    for c in &report.checks {
        let m = c.receivers.map(|m| format!(" (M={m})")).unwrap_or_default();
        println!(
            "{}  {}{}  value={:e} tol={:e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            m,
            c.value,
            c.tolerance
        );
    }

    if let Some(out) = &a.out {
        let mut manifest = RunManifest::new("verify");
        manifest
            .param("M", &a.m)
            .param("trials", a.trials)
            .param("tolerance", opts.tolerance)
            .param("tolerance_override", tol_override);
        manifest.seed = Some(opts.seed);
        write_outputs(&mut manifest, &[(out.as_path(), to_json(&report)?)])?;
    }

    let failed: Vec<String> = report
        .failures()
        .map(|c| match c.receivers {
            Some(m) => format!("{} (M={m})", c.name),
            None => c.name.clone(),
        })
        .collect();
    if failed.is_empty() {
        println!("all {} checks passed", report.checks.len());
        Ok(())
    } else {
        Err(CliError::Verification(failed.join(", ")))
    }
}
