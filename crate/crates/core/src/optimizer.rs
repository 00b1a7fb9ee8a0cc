//! Genetic search over general Gaussian telecloning circuits.
//!
//! A candidate channel is `M+1` single-mode squeezers acting on vacua,
//! followed by a triangular beam-splitter mesh on all `M+1` modes; mode 0 is
//! the port. A further two-mode unitary mixes the input and the port ahead
//! of the Bell mixer. The cost is the total squeezing in dB, and the unit-gain
//! clone noise is pushed onto its optimal value by a penalty.
//!
//! Besides the usual selection, crossover and mutation, offspring pass
//! through a feasibility repair: a few damped Gauss-Newton steps on the
//! constraint residuals with finite-difference Jacobians. Squeezing genes
//! that are exactly zero stay fixed during repair.

use std::f64::consts::{LN_10, TAU};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gaussian::{overlap_2x2, GaussianState};
use crate::interferometer::{reck_decompose, reck_interferometer, ReckParams};
use crate::mqc::{self, MqcSpec};
use crate::protocol::{
    derive_ensemble_channel, optimal_excess_noise, optimal_fidelity, rotated_bell_mixer, solve_unit_gain,
    GaussianChannel,
};
use crate::symplectic::{beam_splitter_unitary, m_splitter_unitary, SymplecticTransform};

/// Squeezing cap, about 26 dB.
pub const XI_MAX: f64 = 3.0;

/// Per-mode threshold below which a mode counts as vacuum.
pub const VACUUM_THRESHOLD_DB: f64 = 0.1;

/// Residual assigned to genomes whose port cannot be read out at unit gain.
pub const DEGENERATE_RESIDUAL: f64 = 1e3;

/// Number of genes for `m` receivers: `M² + 3M + 6`.
pub fn genome_len(m: usize) -> usize {
    m * m + 3 * m + 6
}

/// Flat layout: `xi (M+1) | (θ, φ) pairs (M(M+1)/2) | β (M+1) | u2 (4)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitGenome {
    pub xi: Vec<f64>,
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    pub betas: Vec<f64>,
    /// `(θ_a, φ_a, θ_b, φ_b)` of two beam splitters placed before the Bell
    /// mixer. All zeros gives the plain Bell mixer.
    pub u2: [f64; 4],
}

fn reduce_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl CircuitGenome {
    pub fn zeros(m: usize) -> Self {
        let pairs = m * (m + 1) / 2;
        Self {
            xi: vec![0.0; m + 1],
            thetas: vec![0.0; pairs],
            phis: vec![0.0; pairs],
            betas: vec![0.0; m + 1],
            u2: [0.0; 4],
        }
    }

    pub fn receivers(&self) -> usize {
        self.xi.len().saturating_sub(1)
    }

    pub fn len(&self) -> usize {
        self.xi.len() + self.thetas.len() + self.phis.len() + self.betas.len() + 4
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!("M = {m} is degenerate (need M >= 2)")));
        }
        let pairs = m * (m + 1) / 2;
        if self.xi.len() != m + 1
            || self.thetas.len() != pairs
            || self.phis.len() != pairs
            || self.betas.len() != m + 1
        {
            return Err(Error::DimensionMismatch {
                expected: genome_len(m),
                found: self.len(),
            });
        }
        if self.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("genome has non-finite genes".into()));
        }
        Ok(())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.xi);
        for (t, p) in self.thetas.iter().zip(&self.phis) {
            v.push(*t);
            v.push(*p);
        }
        v.extend_from_slice(&self.betas);
        v.extend_from_slice(&self.u2);
        v
    }

    pub fn from_flat(m: usize, genes: &[f64]) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!("M = {m} is degenerate (need M >= 2)")));
        }
        if genes.len() != genome_len(m) {
            return Err(Error::DimensionMismatch {
                expected: genome_len(m),
                found: genes.len(),
            });
        }
        let n = m + 1;
        let pairs = m * n / 2;
        let mesh = &genes[n..n + 2 * pairs];
        let tail = &genes[n + 2 * pairs..];
        Ok(Self {
            xi: genes[..n].to_vec(),
            thetas: mesh.iter().step_by(2).copied().collect(),
            phis: mesh.iter().skip(1).step_by(2).copied().collect(),
            betas: tail[..n].to_vec(),
            u2: [tail[n], tail[n + 1], tail[n + 2], tail[n + 3]],
        })
    }

    /// Clamps `|ξ| ≤ 3` and reduces every angle into `[0, 2π)`.
    pub fn normalized(&self) -> Self {
        let mut g = self.clone();
        normalize_flat(&mut g.xi, usize::MAX);
        for a in g.thetas.iter_mut().chain(g.phis.iter_mut()).chain(g.betas.iter_mut()).chain(g.u2.iter_mut()) {
            *a = reduce_angle(*a);
        }
        g
    }

    /// Squeezing magnitude of each mode in dB.
    pub fn per_mode_db(&self) -> Vec<f64> {
        self.xi.iter().map(|&x| mqc::squeezing_db(x)).collect()
    }

    pub fn total_db(&self) -> f64 {
        self.xi.iter().map(|x| x.abs()).sum::<f64>() * 20.0 / LN_10
    }

    fn reck(&self) -> ReckParams {
        ReckParams {
            thetas: self.thetas.clone(),
            phis: self.phis.clone(),
            betas: self.betas.clone(),
        }
    }
}

/// Clamps the squeezing genes (the first `xi_count`) and reduces the rest.
fn normalize_flat(genes: &mut [f64], xi_count: usize) {
    for (i, g) in genes.iter_mut().enumerate() {
        if i < xi_count {
            *g = g.clamp(-XI_MAX, XI_MAX);
        } else {
            *g = reduce_angle(*g);
        }
    }
}

/// The genome that reproduces the two-squeezer channel at `θ₀ = π/4`.
pub fn recipe_genome(m: usize) -> Result<CircuitGenome> {
    let spec = MqcSpec::symmetric(m, 0.0)?;
    let (r1, r2) = spec.squeezing()?;
    let n = m + 1;
    let split = m_splitter_unitary(m)?;
    let mut embedded = DMatrix::identity(n, n);
    embedded.view_mut((1, 1), (m, m)).copy_from(&split);
    let mut first = DMatrix::identity(n, n);
    first.view_mut((0, 0), (2, 2)).copy_from(&beam_splitter_unitary(spec.theta0, 0.0));
    let params = reck_decompose(&(embedded * first))?;
    let mut xi = vec![0.0; n];
    xi[0] = r1;
    xi[1] = -r2;
    Ok(CircuitGenome {
        xi,
        thetas: params.thetas,
        phis: params.phis,
        betas: params.betas,
        u2: [0.0; 4],
    }
    .normalized())
}

/// Channel state (mode 0 = port) and the two-mode transform applied to
/// `(input, port)` before homodyne detection.
pub fn genome_to_scheme(genome: &CircuitGenome, m: usize) -> Result<(GaussianState, SymplecticTransform)> {
    genome.validate(m)?;
    let n = m + 1;
    let mut s = reck_interferometer(n, &genome.reck())?.matrix().clone();
    for (k, &x) in genome.xi.iter().enumerate() {
        let (up, down) = (x.exp(), (-x).exp());
        s.column_mut(2 * k).scale_mut(up);
        s.column_mut(2 * k + 1).scale_mut(down);
    }
    let circuit = SymplecticTransform::from_matrix_unchecked(s);
    let state = GaussianState::vacuum(n)?.apply_symplectic(&circuit)?;

    Ok((state, rotated_bell_mixer(genome.u2)?))
}

/// What the search drives the clone channel towards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    /// Clone noise `diag(e^{2s} λ, e^{−2s} λ)` with `λ = (M−1)/2M`.
    SymmetricNoise {
        #[serde(default)]
        s: f64,
    },
    /// Every clone reaches `M/(2M−1)` for the input squeezed by `s`.
    Fidelity {
        #[serde(default)]
        s: f64,
    },
}

impl Default for Target {
    fn default() -> Self {
        Target::SymmetricNoise { s: 0.0 }
    }
}

impl Target {
    fn residuals(&self, channels: &[GaussianChannel], m: usize) -> Result<Vec<f64>> {
        match *self {
            Target::SymmetricNoise { s } => {
                let lam = optimal_excess_noise(m);
                let (tx, tp) = ((2.0 * s).exp() * lam, (-2.0 * s).exp() * lam);
                Ok(channels
                    .iter()
                    .flat_map(|c| [c.noise[0][0] - tx, c.noise[1][1] - tp, c.noise[0][1]])
                    .collect())
            }
            Target::Fidelity { s } => {
                let best = optimal_fidelity(m)?;
                let vin = DMatrix::from_diagonal(&DVector::from_vec(vec![
                    0.25 * (2.0 * s).exp(),
                    0.25 * (-2.0 * s).exp(),
                ]));
                Ok(channels
                    .iter()
                    .map(|c| {
                        let out = &vin + DMatrix::from_row_slice(2, 2, &c.noise.concat());
                        overlap_2x2(&vin, &out, 0.0, 0.0) - best
                    })
                    .collect())
            }
        }
    }
}

/// Fitness of one genome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub objective: f64,
    pub residual: f64,
    pub total_db: f64,
    /// Channel of clone 0; `None` when the port is degenerate.
    pub channel: Option<GaussianChannel>,
}

/// Constraint residuals of a genome, or `None` for a degenerate port.
fn residual_vector(genome: &CircuitGenome, m: usize, target: &Target) -> Result<Option<Vec<f64>>> {
    let (state, pre_bell) = genome_to_scheme(genome, m)?;
    let channels = match unit_gain_channels(&state, &pre_bell, m) {
        Some(c) => c,
        None => return Ok(None),
    };
    let r = target.residuals(&channels, m)?;
    Ok(r.iter().all(|v| v.is_finite()).then_some(r))
}

fn unit_gain_channels(state: &GaussianState, pre_bell: &SymplecticTransform, m: usize) -> Option<Vec<GaussianChannel>> {
    let ff = solve_unit_gain(state, 0, pre_bell).ok()?;
    let receivers: Vec<usize> = (1..=m).collect();
    let ens = derive_ensemble_channel(state, 0, &receivers, pre_bell, &ff).ok()?;
    if !ens.channel(0).is_unit_gain(1e-8) {
        return None;
    }
    Some((0..m).map(|j| ens.channel(j)).collect())
}

/// Objective and residual under an explicit target and penalty weight.
pub fn evaluate_genome_with(genome: &CircuitGenome, m: usize, target: &Target, penalty_weight: f64) -> Result<Evaluation> {
    genome.validate(m)?;
    let total_db = genome.total_db();
    let (state, pre_bell) = genome_to_scheme(genome, m)?;
    let (residual, channel) = match unit_gain_channels(&state, &pre_bell, m) {
        Some(channels) => {
            let r = target.residuals(&channels, m)?;
            let worst = r.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if worst.is_finite() {
                (worst, Some(channels[0]))
            } else {
                (DEGENERATE_RESIDUAL, None)
            }
        }
        None => (DEGENERATE_RESIDUAL, None),
    };
    Ok(Evaluation {
        objective: total_db + penalty_weight * residual,
        residual,
        total_db,
        channel,
    })
}

/// `(objective, residual)` with the default symmetric-noise target.
pub fn evaluate_genome(genome: &CircuitGenome, m: usize) -> Result<(f64, f64)> {
    let cfg = SearchConfig::default();
    let e = evaluate_genome_with(genome, m, &cfg.target, cfg.penalty_weight)?;
    Ok((e.objective, e.residual))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub population: usize,
    pub generations: usize,
    /// Initial mutation scale; decays by `sigma_decay` each generation.
    pub mutation_sigma: f64,
    pub sigma_decay: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub penalty_weight: f64,
    pub target: Target,
    /// Residual below which a genome counts as feasible.
    pub tolerance: f64,
    pub seed: u64,
    pub tournament: usize,
    pub elitism: usize,
    /// Probability that a child has one squeezing gene set to zero.
    pub snap_rate: f64,
    /// Gauss-Newton steps per child; 0 disables repair.
    pub repair_steps: usize,
    /// Stop once the best objective has improved by less than
    /// `stall_tolerance` over this many generations. 0 runs every generation.
    pub stall_generations: usize,
    pub stall_tolerance: f64,
    /// Gauss-Newton steps spent pushing the final best genome onto the
    /// constraint surface. 0 disables the polish.
    pub polish_steps: usize,
    pub execution: Execution,
    /// Genomes placed in the initial population.
    pub seeds: Vec<CircuitGenome>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            population: 64,
            generations: 1000,
            mutation_sigma: 0.5,
            sigma_decay: 0.995,
            mutation_rate: 0.15,
            crossover_rate: 0.7,
            penalty_weight: 1e4,
            target: Target::default(),
            tolerance: 1e-6,
            seed: 0,
            tournament: 3,
            elitism: 2,
            snap_rate: 0.2,
            repair_steps: 6,
            stall_generations: 100,
            stall_tolerance: 1e-3,
            polish_steps: 60,
            execution: Execution::default(),
            seeds: Vec::new(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self, m: usize) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.population < 4 {
            return bad("population must be at least 4");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate)
            || !(0.0..=1.0).contains(&self.mutation_rate)
            || !(0.0..=1.0).contains(&self.snap_rate)
        {
            return bad("rates must lie in [0, 1]");
        }
        if !(self.mutation_sigma >= 0.0 && self.mutation_sigma.is_finite()) {
            return bad("mutation_sigma must be a finite non-negative number");
        }
        if !(self.sigma_decay > 0.0 && self.sigma_decay <= 1.0) {
            return bad("sigma_decay must lie in (0, 1]");
        }
        if !(self.penalty_weight >= 0.0 && self.penalty_weight.is_finite()) {
            return bad("penalty_weight must be finite and non-negative");
        }
        if self.tournament == 0 || self.tournament > self.population {
            return bad("tournament size must be between 1 and the population");
        }
        if self.elitism >= self.population {
            return bad("elitism must be smaller than the population");
        }
        if !(self.stall_tolerance >= 0.0) {
            return bad("stall_tolerance must be non-negative");
        }
        if self.seeds.len() > self.population {
            return bad("more seed genomes than population slots");
        }
        for g in &self.seeds {
            g.validate(m)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub generation: usize,
    pub best_objective: f64,
    pub best_total_db: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    #[serde(rename = "M")]
    pub receivers: usize,
    pub best_genome: CircuitGenome,
    pub objective: f64,
    pub total_squeezing_db: f64,
    /// Squeezing of each mode in dB, in mode order.
    pub per_mode_db: Vec<f64>,
    pub channel: Option<GaussianChannel>,
    pub constraint_residual: f64,
    pub feasible: bool,
    pub generations_run: usize,
    /// Whether the reported genome comes from the final polish rather than
    /// directly from the population.
    pub polished: bool,
    pub history: Vec<HistoryEntry>,
    pub config: SearchConfig,
}

const REPAIR_STOP: f64 = 1e-13;

/// Damped Gauss-Newton steps on the constraint residuals. Returns the
/// input unchanged when it cannot be improved.
fn repair(genes: &[f64], m: usize, config: &SearchConfig, steps: usize, stop: f64) -> Vec<f64> {
    let xi_count = m + 1;
    let eval = |g: &[f64]| -> Option<Vec<f64>> {
        let genome = CircuitGenome::from_flat(m, g).ok()?;
        residual_vector(&genome, m, &config.target).ok().flatten()
    };
    let norm = |r: &[f64]| r.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut x = genes.to_vec();
    let Some(mut r) = eval(&x) else { return x };
    let free: Vec<usize> = (0..x.len()).filter(|&i| !(i < xi_count && x[i] == 0.0)).collect();
    const H: f64 = 1e-7;
    for _ in 0..steps {
        let r_norm = norm(&r);
        if r_norm < stop {
            break;
        }
        let mut jac = DMatrix::zeros(r.len(), free.len());
        for (c, &i) in free.iter().enumerate() {
            let mut xp = x.clone();
            xp[i] += H;
            let Some(rp) = eval(&xp) else { return x };
            for (k, (a, b)) in rp.iter().zip(&r).enumerate() {
                jac[(k, c)] = (a - b) / H;
            }
        }
        let rv = DVector::from_column_slice(&r);
        let svd = jac.svd(true, true);
        let (Some(u), Some(vt)) = (svd.u.as_ref(), svd.v_t.as_ref()) else { return x };
        let sigma_max = svd.singular_values.max();
        if !(sigma_max > 0.0) {
            break;
        }
        let coeffs = u.transpose() * &rv;
        let mut accepted = false;
        // Truncated pseudo-inverse; larger cutoffs discard directions the
        // finite differences cannot resolve.
        'cutoffs: for cutoff in [1e-9, 1e-6, 1e-4, 1e-2] {
            let mut step = DVector::zeros(free.len());
            for (k, &sv) in svd.singular_values.iter().enumerate() {
                if sv > cutoff * sigma_max {
                    step -= vt.row(k).transpose() * (coeffs[k] / sv);
                }
            }
            // Near the optimum the residual is quadratic in the distance to
            // the feasible set, where a doubled step is the exact correction.
            let try_step = |alpha: f64| -> Option<(Vec<f64>, Vec<f64>)> {
                let mut cand = x.clone();
                for (c, &i) in free.iter().enumerate() {
                    cand[i] += alpha * step[c];
                }
                normalize_flat(&mut cand, xi_count);
                eval(&cand).map(|rc| (cand, rc))
            };
            let mut best: Option<(Vec<f64>, Vec<f64>)> = None;
            for alpha in [2.0, 1.0, 0.5, 0.25] {
                if let Some((cand, rc)) = try_step(alpha) {
                    if norm(&rc) < best.as_ref().map_or(r_norm, |b| norm(&b.1)) {
                        best = Some((cand, rc));
                    }
                }
                if alpha <= 1.0 && best.is_some() {
                    break;
                }
            }
            if let Some((cand, rc)) = best {
                x = cand;
                r = rc;
                accepted = true;
                break 'cutoffs;
            }
        }
        if !accepted {
            break;
        }
    }
    x
}

#[derive(Debug, Clone)]
struct Member {
    genes: Vec<f64>,
    eval: Evaluation,
}

fn random_genes(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let xi_count = m + 1;
    (0..genome_len(m))
        .map(|i| {
            if i < xi_count {
                rng.random_range(-0.5 * XI_MAX..0.5 * XI_MAX)
            } else {
                rng.random_range(0.0..TAU)
            }
        })
        .collect()
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(rand_distr::StandardNormal)
}

fn tournament<'a>(pop: &'a [Member], size: usize, rng: &mut ChaCha8Rng) -> &'a Member {
    let mut best = &pop[rng.random_range(0..pop.len())];
    for _ in 1..size {
        let c = &pop[rng.random_range(0..pop.len())];
        if c.eval.objective < best.eval.objective {
            best = c;
        }
    }
    best
}

fn make_child(pop: &[Member], m: usize, sigma: f64, config: &SearchConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let xi_count = m + 1;
    let a = tournament(pop, config.tournament, rng);
    let b = tournament(pop, config.tournament, rng);
    let mut child = if rng.random_bool(config.crossover_rate) {
        a.genes
            .iter()
            .zip(&b.genes)
            .map(|(x, y)| if rng.random_bool(0.5) { *x } else { *y })
            .collect()
    } else {
        a.genes.clone()
    };
    // Mutation scale is log-uniform over three decades below sigma.
    let scale = sigma * 10f64.powf(-3.0 * rng.random::<f64>());
    let mut mutated = false;
    for g in child.iter_mut() {
        if rng.random_bool(config.mutation_rate) {
            *g += scale * standard_normal(rng);
            mutated = true;
        }
    }
    if !mutated {
        let i = rng.random_range(0..child.len());
        child[i] += scale * standard_normal(rng);
    }
    if rng.random_bool(config.snap_rate) {
        let nonzero: Vec<usize> = (0..xi_count).filter(|&i| child[i] != 0.0).collect();
        if !nonzero.is_empty() {
            let i = if rng.random_bool(0.5) {
                nonzero[rng.random_range(0..nonzero.len())]
            } else {
                *nonzero
                    .iter()
                    .min_by(|&&p, &&q| child[p].abs().total_cmp(&child[q].abs()))
                    .expect("non-empty")
            };
            child[i] = 0.0;
        }
    }
    normalize_flat(&mut child, xi_count);
    child
}

fn develop(genes: Vec<f64>, m: usize, config: &SearchConfig) -> Member {
    let genes = if config.repair_steps > 0 {
        repair(&genes, m, config, config.repair_steps, REPAIR_STOP)
    } else {
        genes
    };
    let genome = CircuitGenome::from_flat(m, &genes).expect("genome length is fixed");
    let eval = evaluate_genome_with(&genome, m, &config.target, config.penalty_weight).unwrap_or(Evaluation {
        objective: genome.total_db() + config.penalty_weight * DEGENERATE_RESIDUAL,
        residual: DEGENERATE_RESIDUAL,
        total_db: genome.total_db(),
        channel: None,
    });
    Member { genes, eval }
}

fn sort_population(pop: &mut [Member]) {
    pop.sort_by(|a, b| a.eval.objective.total_cmp(&b.eval.objective));
}

/// Runs the genetic search. The result depends only on `m` and `config`.
pub fn genetic_search(m: usize, config: &SearchConfig) -> Result<SearchResult> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("M = {m} is degenerate (need M >= 2)")));
    }
    config.validate(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut initial: Vec<Vec<f64>> = config.seeds.iter().map(|g| g.normalized().to_flat()).collect();
    let seeded = initial.len();
    while initial.len() < config.population {
        initial.push(random_genes(m, &mut rng));
    }
    // Seed genomes enter as given; only random ones are repaired.
    let mut pop: Vec<Member> = config.execution.map_range(initial.len(), |i| {
        if i < seeded {
            develop(initial[i].clone(), m, &SearchConfig { repair_steps: 0, ..config.clone() })
        } else {
            develop(initial[i].clone(), m, config)
        }
    });
    sort_population(&mut pop);

    let mut history = Vec::with_capacity(config.generations + 1);
    let record = |gen: usize, best: &Member| HistoryEntry {
        generation: gen,
        best_objective: best.eval.objective,
        best_total_db: best.eval.total_db,
        residual: best.eval.residual,
    };
    history.push(record(0, &pop[0]));
    let mut sigma = config.mutation_sigma;
    let mut last_improvement = 0;
    let mut reference = pop[0].eval.objective;
    let mut generations_run = 0;
    for gen in 1..=config.generations {
        let children: Vec<Vec<f64>> = (config.elitism..config.population)
            .map(|_| make_child(&pop, m, sigma, config, &mut rng))
            .collect();
        let developed = config.execution.map(&children, |c| develop(c.clone(), m, config));
        pop.truncate(config.elitism);
        pop.extend(developed);
        sort_population(&mut pop);
        sigma *= config.sigma_decay;
        generations_run = gen;
        history.push(record(gen, &pop[0]));
        if pop[0].eval.objective < reference - config.stall_tolerance {
            reference = pop[0].eval.objective;
            last_improvement = gen;
        }
        if config.stall_generations > 0 && gen - last_improvement >= config.stall_generations {
            break;
        }
    }

    // The penalty optimum sits slightly off the constraint surface; finish
    // with a feasibility polish and keep it when it satisfies the tolerance.
    let mut best = pop.swap_remove(0);
    let mut polished = false;
    if config.polish_steps > 0 && best.eval.residual >= 0.01 * config.tolerance {
        let genes = repair(&best.genes, m, config, config.polish_steps, 0.01 * config.tolerance);
        let candidate = develop(genes, m, &SearchConfig { repair_steps: 0, ..config.clone() });
        if candidate.eval.residual < config.tolerance && candidate.eval.residual < best.eval.residual {
            best = candidate;
            polished = true;
        }
    }
    let genome = CircuitGenome::from_flat(m, &best.genes)?;
    Ok(SearchResult {
        receivers: m,
        per_mode_db: genome.per_mode_db(),
        best_genome: genome,
        objective: best.eval.objective,
        total_squeezing_db: best.eval.total_db,
        channel: best.eval.channel,
        constraint_residual: best.eval.residual,
        feasible: best.eval.residual < config.tolerance,
        generations_run,
        polished,
        history,
        config: config.clone(),
    })
}

/// Squeezing distribution of a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionAnalysis {
    /// Per-mode dB, ascending.
    pub sorted_db: Vec<f64>,
    pub vacuum_threshold_db: f64,
    pub near_vacuum_modes: usize,
    /// Exactly `M−1` modes are within the vacuum threshold.
    pub only_pair_squeezed: bool,
    /// The two most squeezed modes, larger first.
    pub pair_db: [f64; 2],
    /// Share of the pair's squeezing carried by the larger one.
    pub pair_split: f64,
    pub total_db: f64,
    pub constraint_residual: f64,
}

pub fn analyze_genome(genome: &CircuitGenome, m: usize, residual: f64) -> SolutionAnalysis {
    let mut sorted_db = genome.per_mode_db();
    sorted_db.sort_by(f64::total_cmp);
    let near = sorted_db.iter().filter(|&&d| d < VACUUM_THRESHOLD_DB).count();
    let k = sorted_db.len();
    let pair_db = if k >= 2 { [sorted_db[k - 1], sorted_db[k - 2]] } else { [sorted_db[0], 0.0] };
    let pair_sum = pair_db[0] + pair_db[1];
    SolutionAnalysis {
        total_db: sorted_db.iter().sum(),
        near_vacuum_modes: near,
        only_pair_squeezed: near + 1 == m,
        pair_split: if pair_sum > 0.0 { pair_db[0] / pair_sum } else { 0.5 },
        pair_db,
        sorted_db,
        vacuum_threshold_db: VACUUM_THRESHOLD_DB,
        constraint_residual: residual,
    }
}

pub fn analyze_solution(result: &SearchResult, m: usize) -> SolutionAnalysis {
    analyze_genome(&result.best_genome, m, result.constraint_residual)
}

/// History as CSV: `generation,best_objective,best_total_db,residual`.
pub fn history_csv(history: &[HistoryEntry]) -> String {
    let mut out = String::from("generation,best_objective,best_total_db,residual\n");
    for h in history {
        out.push_str(&format!("{},{:?},{:?},{:?}\n", h.generation, h.best_objective, h.best_total_db, h.residual));
    }
    out
}
