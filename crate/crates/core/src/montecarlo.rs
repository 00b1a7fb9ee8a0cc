//! Monte Carlo telecloning: sampled Bell records, feedforward, and sampled
//! clone quadratures.
//!
//! Trial `t` draws from its own ChaCha stream `(seed, t)`. Trials are grouped
//! into fixed contiguous blocks whose sums are combined in block order, so
//! the result does not depend on the execution strategy. The blocks double
//! as jackknife groups for the standard errors.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gaussian::{overlap_2x2, GaussianState, Quadrature, Readout};
use crate::protocol::{
    mat2_mul, mat2_transpose, optimal_fidelity, GaussianChannel, InputSpec, Mat2, McErrors, Method,
    TelecloneReport, TelecloneSetup,
};

pub const DEFAULT_TRIALS: usize = 100_000;
pub const JACKKNIFE_BLOCKS: usize = 100;

/// First and second moment sums of clone samples, centred on the input mean.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    n: f64,
    sx: f64,
    sp: f64,
    sxx: f64,
    sxp: f64,
    spp: f64,
}

impl Moments {
    fn push(&mut self, x: f64, p: f64) {
        self.n += 1.0;
        self.sx += x;
        self.sp += p;
        self.sxx += x * x;
        self.sxp += x * p;
        self.spp += p * p;
    }

    fn add(&mut self, o: &Moments) {
        self.n += o.n;
        self.sx += o.sx;
        self.sp += o.sp;
        self.sxx += o.sxx;
        self.sxp += o.sxp;
        self.spp += o.spp;
    }

    fn sub(&self, o: &Moments) -> Moments {
        Moments {
            n: self.n - o.n,
            sx: self.sx - o.sx,
            sp: self.sp - o.sp,
            sxx: self.sxx - o.sxx,
            sxp: self.sxp - o.sxp,
            spp: self.spp - o.spp,
        }
    }

    /// Sample mean offset and Bessel-corrected covariance.
    fn estimate(&self) -> ([f64; 2], Mat2) {
        let n = self.n;
        let (mx, mp) = (self.sx / n, self.sp / n);
        let k = 1.0 / (n - 1.0);
        let cxx = (self.sxx - n * mx * mx) * k;
        let cxp = (self.sxp - n * mx * mp) * k;
        let cpp = (self.spp - n * mp * mp) * k;
        ([mx, mp], [[cxx, cxp], [cxp, cpp]])
    }
}

/// One telecloning run: returns the phase-space point of the tracked clone.
fn single_trial(
    prepared: &GaussianState,
    setup: &TelecloneSetup,
    clone_index: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    // Register: mode 0 = u (input slot), mode 1 + k = channel mode k.
    let (xu, after_u) = prepared.homodyne(0, Quadrature::X, Readout::Sample(rng))?;
    // Removing mode 0 shifts every channel mode down by one: v sits at `port`.
    let (pv, after_v) = after_u.homodyne(setup.port, Quadrature::P, Readout::Sample(rng))?;
    let (dx, dp) = setup.feedforward.displacement(xu.value, pv.value);
    let receiver = setup.receivers[clone_index];
    let slot = if receiver > setup.port { receiver - 1 } else { receiver };
    let clone = after_v.partial_trace(&[slot])?.displace(0, dx, dp)?;
    let point = clone.sample_point(rng)?;
    Ok((point[0], point[1]))
}

#[derive(Debug, Clone)]
pub struct McConfig {
    pub trials: usize,
    pub seed: u64,
    pub clone_index: usize,
    pub execution: Execution,
}

impl McConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            clone_index: 0,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

fn fidelity_from(input: &GaussianState, offset: [f64; 2], cov: &Mat2) -> f64 {
    let out = nalgebra::DMatrix::from_row_slice(2, 2, &[cov[0][0], cov[0][1], cov[1][0], cov[1][1]]);
    overlap_2x2(input.cov(), &out, offset[0], offset[1])
}

/// Estimates the clone channel and fidelity from sampled trials.
pub fn run_teleclone_mc(setup: &TelecloneSetup, input: &InputSpec, config: &McConfig) -> Result<TelecloneReport> {
    if config.trials < 2 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least 2 trials".into()));
    }
    if config.clone_index >= setup.receivers.len() {
        return Err(Error::InvalidArgument(format!("clone index {} out of range", config.clone_index)));
    }
    let input_state = input.state()?;
    let prepared = {
        let joint = input_state.tensor(&setup.state);
        let n = joint.num_modes();
        let mixer = setup.pre_bell.embed(n, &[0, 1 + setup.port])?;
        joint.apply_symplectic(&mixer)?
    };
    let ensemble_gain = setup.ensemble()?.gain;
    let centre = [input.x0, input.p0];

    let blocks = JACKKNIFE_BLOCKS.min(config.trials);
    let bounds = |b: usize| (b * config.trials / blocks, (b + 1) * config.trials / blocks);
    let block_sums: Vec<Result<Moments>> = config.execution.map_range(blocks, |b| {
        let (start, end) = bounds(b);
        let mut acc = Moments::default();
        for t in start..end {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let (x, p) = single_trial(&prepared, setup, config.clone_index, &mut rng)?;
            acc.push(x - centre[0], p - centre[1]);
        }
        Ok(acc)
    });
    let block_sums: Vec<Moments> = block_sums.into_iter().collect::<Result<_>>()?;
    let mut total = Moments::default();
    for b in &block_sums {
        total.add(b);
    }

    let signal = {
        let v = input_state.cov();
        let vin: Mat2 = [[v[(0, 0)], v[(0, 1)]], [v[(1, 0)], v[(1, 1)]]];
        mat2_mul(&mat2_mul(&ensemble_gain, &vin), &mat2_transpose(&ensemble_gain))
    };
    let noise_of = |cov: &Mat2| -> Mat2 {
        [
            [cov[0][0] - signal[0][0], cov[0][1] - signal[0][1]],
            [cov[1][0] - signal[1][0], cov[1][1] - signal[1][1]],
        ]
    };

    let (offset, cov) = total.estimate();
    let fidelity = fidelity_from(&input_state, offset, &cov);
    let noise = noise_of(&cov);

    // Delete-one-block jackknife.
    let bf = blocks as f64;
    let loo: Vec<([f64; 2], Mat2, f64)> = block_sums
        .iter()
        .map(|b| {
            let (o, c) = total.sub(b).estimate();
            (o, c, fidelity_from(&input_state, o, &c))
        })
        .collect();
    let jk = |f: &dyn Fn(&([f64; 2], Mat2, f64)) -> f64| -> f64 {
        let vals: Vec<f64> = loo.iter().map(f).collect();
        let mean = vals.iter().sum::<f64>() / bf;
        ((bf - 1.0) / bf * vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt()
    };
    let errors = McErrors {
        fidelity: jk(&|e| e.2),
        noise: [
            [jk(&|e| e.1[0][0]), jk(&|e| e.1[0][1])],
            [jk(&|e| e.1[1][0]), jk(&|e| e.1[1][1])],
        ],
        mean: [jk(&|e| e.0[0]), jk(&|e| e.0[1])],
        blocks,
    };

    let channel = GaussianChannel {
        gain: ensemble_gain,
        noise,
        clone_count: setup.receivers.len(),
    };
    let mean = DVector::from_vec(vec![centre[0] + offset[0], centre[1] + offset[1]]);
    Ok(TelecloneReport {
        receivers: setup.receivers.len(),
        channel,
        fidelity_per_clone: fidelity,
        optimal_fidelity: optimal_fidelity(setup.receivers.len())?,
        excess_noise: channel.excess_noise(),
        feedforward_gain: setup.feedforward.x_gain(),
        feedforward: setup.feedforward,
        method: Method::MonteCarlo,
        trials: Some(config.trials),
        seed: Some(config.seed),
        clone_mean: Some([mean[0], mean[1]]),
        standard_errors: Some(errors),
        input: *input,
        version: crate::VERSION.to_string(),
    })
}
