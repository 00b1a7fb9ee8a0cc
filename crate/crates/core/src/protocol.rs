//! Telecloning: Bell detection on (input, port), classical feedforward and
//! displacement of every receiver.
//!
//! Measurement plus displacement is linear in the quadratures, so the
//! ensemble map from input to each clone is exactly affine. The analytic
//! path here propagates the channel state's covariance through that linear
//! map (Heisenberg picture); the Monte Carlo path in [`crate::montecarlo`]
//! samples measurement records instead.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{gaussian_fidelity, GaussianState};
use crate::linalg;
use crate::symplectic::{beam_splitter_unitary, SymplecticTransform};

pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY2: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub(crate) fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub(crate) fn mat2_transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn mat2_max_diff(a: &Mat2, b: &Mat2) -> f64 {
    (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| (a[i][j] - b[i][j]).abs())
        .fold(0.0, f64::max)
}

fn to_dmatrix(a: &Mat2) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
}

/// Affine single-clone channel: `μ → gain·μ`, `V → gain·V·gainᵀ + noise`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianChannel {
    pub gain: Mat2,
    pub noise: Mat2,
    pub clone_count: usize,
}

impl GaussianChannel {
    pub fn excess_noise(&self) -> (f64, f64) {
        (self.noise[0][0], self.noise[1][1])
    }

    pub fn is_unit_gain(&self, tol: f64) -> bool {
        mat2_max_diff(&self.gain, &IDENTITY2) <= tol
    }

    /// Smallest eigenvalue of the noise matrix.
    pub fn noise_min_eigenvalue(&self) -> f64 {
        let n = &self.noise;
        let tr = n[0][0] + n[1][1];
        let det = n[0][0] * n[1][1] - n[0][1] * n[1][0];
        0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt())
    }

    pub fn apply(&self, input: &GaussianState) -> Result<GaussianState> {
        if input.num_modes() != 1 {
            return Err(Error::InvalidArgument("channel acts on a single mode".into()));
        }
        let g = to_dmatrix(&self.gain);
        let mean = &g * input.mean();
        let mut cov = &g * input.cov() * g.transpose() + to_dmatrix(&self.noise);
        linalg::symmetrize(&mut cov);
        GaussianState::from_parts(mean, cov)
    }
}

/// Measure-and-resend benchmark: unit gain plus two vacuum units of noise.
pub fn classical_channel() -> GaussianChannel {
    GaussianChannel {
        gain: IDENTITY2,
        noise: [[0.5, 0.0], [0.0, 0.5]],
        clone_count: 1,
    }
}

/// Linear feedforward from the Bell record `(x_u, p_v)` to the displacement
/// `(dx, dp)` applied to every receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feedforward {
    pub matrix: Mat2,
}

impl Feedforward {
    pub fn diagonal(gx: f64, gp: f64) -> Self {
        Self {
            matrix: [[gx, 0.0], [0.0, gp]],
        }
    }

    pub fn displacement(&self, xu: f64, pv: f64) -> (f64, f64) {
        let m = &self.matrix;
        (m[0][0] * xu + m[0][1] * pv, m[1][0] * xu + m[1][1] * pv)
    }

    /// The x-quadrature gain, i.e. the protocol constant in the diagonal case.
    pub fn x_gain(&self) -> f64 {
        self.matrix[0][0]
    }
}

/// The Bell-detection mixer on (input, port): outputs
/// `u = (in − port)/√2`, `v = (in + port)/√2`.
pub fn bell_mixer() -> SymplecticTransform {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let u = DMatrix::from_row_slice(
        2,
        2,
        &[h, -h, h, h].map(|v| nalgebra::Complex::new(v, 0.0)),
    );
    SymplecticTransform::from_unitary(&u).expect("mixer is unitary")
}

/// Bell mixer preceded by the two-mode unitary `B(θa, φa) B(θb, φb)`;
/// all-zero angles give the plain mixer.
pub fn rotated_bell_mixer(u2: [f64; 4]) -> Result<SymplecticTransform> {
    let [ta, pa, tb, pb] = u2;
    let mix = beam_splitter_unitary(ta, pa) * beam_splitter_unitary(tb, pb);
    Ok(&bell_mixer() * &SymplecticTransform::from_unitary(&mix)?)
}

/// Rows of `pre_bell` that give the measured `x_u` and `p_v`, split into
/// the input columns and the port columns.
fn measured_rows(pre_bell: &SymplecticTransform) -> Result<(Mat2, Mat2)> {
    if pre_bell.num_modes() != 2 {
        return Err(Error::InvalidArgument("pre-Bell transform must act on two modes".into()));
    }
    let dev = pre_bell.symplectic_deviation();
    if dev > 1e-9 {
        return Err(Error::NotSymplectic(dev));
    }
    let s = pre_bell.matrix();
    let input = [[s[(0, 0)], s[(0, 1)]], [s[(3, 0)], s[(3, 1)]]];
    let port = [[s[(0, 2)], s[(0, 3)]], [s[(3, 2)], s[(3, 3)]]];
    Ok((input, port))
}

fn check_layout(state: &GaussianState, port: usize, receivers: &[usize]) -> Result<()> {
    let n = state.num_modes();
    if port >= n {
        return Err(Error::InvalidArgument(format!("port {port} out of range for {n} modes")));
    }
    if receivers.is_empty() {
        return Err(Error::InvalidArgument("at least one receiver is required".into()));
    }
    for (i, &r) in receivers.iter().enumerate() {
        if r >= n || r == port || receivers[..i].contains(&r) {
            return Err(Error::InvalidArgument(format!("invalid receiver mode {r}")));
        }
    }
    Ok(())
}

/// Feedforward that makes the ensemble channel unit-gain: `G = C⁻¹` where
/// `C` holds the input coefficients of the measured quadratures.
pub fn solve_unit_gain(
    state: &GaussianState,
    port: usize,
    pre_bell: &SymplecticTransform,
) -> Result<Feedforward> {
    if port >= state.num_modes() {
        return Err(Error::InvalidArgument(format!("port {port} out of range")));
    }
    let (c, _) = measured_rows(pre_bell)?;
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let scale = c.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
    if det.abs() <= 1e-9 * scale.max(1e-300).powi(2) || scale < 1e-12 {
        return Err(Error::DegeneratePort(format!(
            "measured quadratures carry no invertible copy of the input (det {det:e})"
        )));
    }
    Ok(Feedforward {
        matrix: [
            [c[1][1] / det, -c[0][1] / det],
            [-c[1][0] / det, c[0][0] / det],
        ],
    })
}

/// Exact ensemble map from input to every receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleChannel {
    /// Common input-to-clone gain.
    pub gain: Mat2,
    /// Noise of each clone, in receiver order.
    pub clone_noise: Vec<Mat2>,
    /// Mean each clone picks up from the channel state itself.
    pub clone_offset: Vec<[f64; 2]>,
    /// Joint `2M x 2M` noise of all receivers.
    pub joint_noise: DMatrix<f64>,
}

impl EnsembleChannel {
    pub fn clone_count(&self) -> usize {
        self.clone_noise.len()
    }

    pub fn channel(&self, clone: usize) -> GaussianChannel {
        GaussianChannel {
            gain: self.gain,
            noise: self.clone_noise[clone],
            clone_count: self.clone_count(),
        }
    }

    /// Single-clone output for `input`, including the channel-state offset.
    pub fn clone_output(&self, clone: usize, input: &GaussianState) -> Result<GaussianState> {
        let out = self.channel(clone).apply(input)?;
        let off = self.clone_offset[clone];
        out.displace(0, off[0], off[1])
    }

    /// Joint covariance of all `M` outputs for a single-mode `input`.
    pub fn joint_output_cov(&self, input: &GaussianState) -> DMatrix<f64> {
        let g = to_dmatrix(&self.gain);
        let signal = &g * input.cov() * g.transpose();
        let m = self.clone_count();
        let mut cov = self.joint_noise.clone();
        for a in 0..m {
            for b in 0..m {
                let mut blk = cov.view_mut((2 * a, 2 * b), (2, 2));
                blk += &signal;
            }
        }
        cov
    }
}

/// Heisenberg-picture propagation. Clone `j` ends up with
/// `q_j + G (C q_in + D q_port)`, so its noise is `L V Lᵀ` with `L` picking
/// `q_j + G D q_port` from the channel state.
pub fn derive_ensemble_channel(
    state: &GaussianState,
    port: usize,
    receivers: &[usize],
    pre_bell: &SymplecticTransform,
    feedforward: &Feedforward,
) -> Result<EnsembleChannel> {
    check_layout(state, port, receivers)?;
    let (c, d) = measured_rows(pre_bell)?;
    let g = &feedforward.matrix;
    let gain = mat2_mul(g, &c);
    let gd = mat2_mul(g, &d);

    let n2 = 2 * state.num_modes();
    let m = receivers.len();
    let mut l = DMatrix::zeros(2 * m, n2);
    for (j, &r) in receivers.iter().enumerate() {
        l[(2 * j, 2 * r)] = 1.0;
        l[(2 * j + 1, 2 * r + 1)] = 1.0;
        for a in 0..2 {
            for b in 0..2 {
                l[(2 * j + a, 2 * port + b)] += gd[a][b];
            }
        }
    }
    let mut joint_noise = &l * state.cov() * l.transpose();
    linalg::symmetrize(&mut joint_noise);
    let offsets: DVector<f64> = &l * state.mean();
    if joint_noise.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalDegeneracy("non-finite channel noise".into()));
    }
    let clone_noise = (0..m)
        .map(|j| {
            [
                [joint_noise[(2 * j, 2 * j)], joint_noise[(2 * j, 2 * j + 1)]],
                [joint_noise[(2 * j + 1, 2 * j)], joint_noise[(2 * j + 1, 2 * j + 1)]],
            ]
        })
        .collect();
    let clone_offset = (0..m).map(|j| [offsets[2 * j], offsets[2 * j + 1]]).collect();
    Ok(EnsembleChannel {
        gain,
        clone_noise,
        clone_offset,
        joint_noise,
    })
}

/// `F = 2 / √((4λ_x e^{−4s} + 2e^{−2s})(4λ_p e^{4s} + 2e^{2s}))` for a
/// squeezed input with parameter `s_in` through unit-gain additive noise.
pub fn clone_fidelity(lambda_x: f64, lambda_p: f64, s_in: f64) -> Result<f64> {
    if !(lambda_x >= 0.0 && lambda_p >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "excess noise must be non-negative, got ({lambda_x}, {lambda_p})"
        )));
    }
    let a = 4.0 * lambda_x * (-4.0 * s_in).exp() + 2.0 * (-2.0 * s_in).exp();
    let b = 4.0 * lambda_p * (4.0 * s_in).exp() + 2.0 * (2.0 * s_in).exp();
    Ok(2.0 / (a * b).sqrt())
}

/// Optimal symmetric `1 → M` coherent-state cloning fidelity `M/(2M−1)`.
pub fn optimal_fidelity(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    let mf = m as f64;
    Ok(mf / (2.0 * mf - 1.0))
}

/// Excess noise `(M−1)/(2M)` of the optimal symmetric cloner.
pub fn optimal_excess_noise(m: usize) -> f64 {
    let mf = m as f64;
    (mf - 1.0) / (2.0 * mf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryCheck {
    pub symmetric: bool,
    pub max_deviation: f64,
}

pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Checks every transposition of two clone modes in an `M`-mode covariance.
pub fn verify_output_symmetry(joint_cov: &DMatrix<f64>) -> SymmetryCheck {
    verify_output_symmetry_with(joint_cov, SYMMETRY_TOLERANCE)
}

pub fn verify_output_symmetry_with(joint_cov: &DMatrix<f64>, tol: f64) -> SymmetryCheck {
    let m = joint_cov.nrows() / 2;
    let mut worst = 0.0_f64;
    for a in 0..m {
        for b in (a + 1)..m {
            let perm: Vec<usize> = (0..m)
                .map(|k| if k == a { b } else if k == b { a } else { k })
                .collect();
            for i in 0..2 * m {
                for j in 0..2 * m {
                    let pi = 2 * perm[i / 2] + i % 2;
                    let pj = 2 * perm[j / 2] + j % 2;
                    worst = worst.max((joint_cov[(pi, pj)] - joint_cov[(i, j)]).abs());
                }
            }
        }
    }
    SymmetryCheck {
        symmetric: worst <= tol,
        max_deviation: worst,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Coherent,
    Squeezed,
}

/// Pure Gaussian input with covariance `diag(e^{2s}, e^{−2s})/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub kind: InputKind,
    pub x0: f64,
    pub p0: f64,
    pub s_in: f64,
}

impl InputSpec {
    pub fn coherent(x0: f64, p0: f64) -> Self {
        Self {
            kind: InputKind::Coherent,
            x0,
            p0,
            s_in: 0.0,
        }
    }

    pub fn squeezed(x0: f64, p0: f64, s_in: f64) -> Self {
        Self {
            kind: InputKind::Squeezed,
            x0,
            p0,
            s_in,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x0.is_finite() && self.p0.is_finite() && self.s_in.is_finite()) {
            return Err(Error::InvalidArgument("input parameters must be finite".into()));
        }
        if self.kind == InputKind::Coherent && self.s_in != 0.0 {
            return Err(Error::InvalidArgument("coherent input must have s_in = 0".into()));
        }
        Ok(())
    }

    pub fn state(&self) -> Result<GaussianState> {
        self.validate()?;
        GaussianState::squeezed(self.x0, self.p0, self.s_in)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    MonteCarlo,
}

/// Jackknife standard errors of Monte Carlo estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McErrors {
    pub fidelity: f64,
    pub noise: Mat2,
    pub mean: [f64; 2],
    pub blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelecloneReport {
    #[serde(rename = "M")]
    pub receivers: usize,
    pub channel: GaussianChannel,
    pub fidelity_per_clone: f64,
    pub optimal_fidelity: f64,
    pub excess_noise: (f64, f64),
    pub feedforward_gain: f64,
    pub feedforward: Feedforward,
    pub method: Method,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    /// Clone mean estimated from samples (Monte Carlo only).
    pub clone_mean: Option<[f64; 2]>,
    pub standard_errors: Option<McErrors>,
    pub input: InputSpec,
    pub version: String,
}

/// A channel state wired up for telecloning.
#[derive(Debug, Clone)]
pub struct TelecloneSetup {
    pub state: GaussianState,
    pub port: usize,
    pub receivers: Vec<usize>,
    pub pre_bell: SymplecticTransform,
    pub feedforward: Feedforward,
}

impl TelecloneSetup {
    /// Standard Bell mixer, all non-port modes as receivers, unit-gain
    /// feedforward.
    pub fn new(state: GaussianState, port: usize) -> Result<Self> {
        let receivers = (0..state.num_modes()).filter(|&k| k != port).collect();
        Self::with_receivers(state, port, receivers)
    }

    pub fn with_receivers(state: GaussianState, port: usize, receivers: Vec<usize>) -> Result<Self> {
        Self::with_pre_bell(state, port, receivers, bell_mixer())
    }

    /// Arbitrary two-mode transform on (input, port) before detection.
    pub fn with_pre_bell(
        state: GaussianState,
        port: usize,
        receivers: Vec<usize>,
        pre_bell: SymplecticTransform,
    ) -> Result<Self> {
        if pre_bell.num_modes() != 2 {
            return Err(Error::InvalidArgument("pre-detection transform must act on two modes".into()));
        }
        check_layout(&state, port, &receivers)?;
        let feedforward = solve_unit_gain(&state, port, &pre_bell)?;
        Ok(Self {
            state,
            port,
            receivers,
            pre_bell,
            feedforward,
        })
    }

    pub fn ensemble(&self) -> Result<EnsembleChannel> {
        derive_ensemble_channel(
            &self.state,
            self.port,
            &self.receivers,
            &self.pre_bell,
            &self.feedforward,
        )
    }

    /// Closed-form report for clone 0.
    pub fn analytic(&self, input: &InputSpec) -> Result<TelecloneReport> {
        let ens = self.ensemble()?;
        let input_state = input.state()?;
        let out = ens.clone_output(0, &input_state)?;
        let fidelity = gaussian_fidelity(&input_state, &out)?;
        let channel = ens.channel(0);
        Ok(TelecloneReport {
            receivers: self.receivers.len(),
            channel,
            fidelity_per_clone: fidelity,
            optimal_fidelity: optimal_fidelity(self.receivers.len())?,
            excess_noise: channel.excess_noise(),
            feedforward_gain: self.feedforward.x_gain(),
            feedforward: self.feedforward,
            method: Method::Analytic,
            trials: None,
            seed: None,
            clone_mean: None,
            standard_errors: None,
            input: *input,
            version: crate::VERSION.to_string(),
        })
    }
}
