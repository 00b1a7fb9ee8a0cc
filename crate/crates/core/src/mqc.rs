//! Multiuser quantum channel states.
//!
//! The `(M+1)`-mode channel is built from two squeezed vacua mixed on a
//! phase-free beam splitter at angle `θ₀`; one output is kept as the port
//! (mode 0), the other is spread over the `M` receivers (modes `1..=M`) by
//! an M-splitter together with `M−1` ancillas. An independent closed form
//! assembles the same covariance from the quadratic form of its Wigner
//! function.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::linalg;
use crate::symplectic::{beam_splitter, m_splitter, squeezer, SymplecticTransform};

/// Distance kept from the endpoints of the admissible `θ₀` interval.
pub const THETA_MARGIN: f64 = 1e-6;

/// Parameters of the `(M+1)`-mode channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MqcSpec {
    #[serde(rename = "M")]
    pub receivers: usize,
    #[serde(default = "default_theta0")]
    pub theta0: f64,
    #[serde(default)]
    pub s: f64,
}

fn default_theta0() -> f64 {
    std::f64::consts::FRAC_PI_4
}

/// Open interval of admissible `θ₀` for `m` receivers, before the margin.
pub fn theta_bounds(m: usize) -> (f64, f64) {
    let mf = m as f64;
    ((1.0 / (mf + 1.0).sqrt()).asin(), (mf / (mf + 1.0)).sqrt().asin())
}

impl MqcSpec {
    pub fn new(receivers: usize, theta0: f64, s: f64) -> Result<Self> {
        let spec = Self { receivers, theta0, s };
        spec.validate()?;
        Ok(spec)
    }

    /// Symmetric point `θ₀ = π/4`.
    pub fn symmetric(receivers: usize, s: f64) -> Result<Self> {
        Self::new(receivers, default_theta0(), s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.receivers < 2 {
            return Err(Error::InvalidArgument(format!(
                "M = {} is degenerate: the channel needs at least 2 receivers",
                self.receivers
            )));
        }
        if !self.s.is_finite() {
            return Err(Error::InvalidArgument("s must be finite".into()));
        }
        solve_squeezing(self.receivers, self.theta0).map(|_| ())
    }

    /// `(r₁, r₂)` for this spec.
    pub fn squeezing(&self) -> Result<(f64, f64)> {
        solve_squeezing(self.receivers, self.theta0)
    }
}

/// `e^{−2r₁} = (√M sinθ₀ − cosθ₀)/(√M sinθ₀ + cosθ₀)`,
/// `e^{−2r₂} = (√M cosθ₀ − sinθ₀)/(√M cosθ₀ + sinθ₀)`.
pub fn solve_squeezing(m: usize, theta0: f64) -> Result<(f64, f64)> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("M = {m} is degenerate (need M >= 2)")));
    }
    if !theta0.is_finite() {
        return Err(Error::Domain("theta0 must be finite".into()));
    }
    let (lo, hi) = theta_bounds(m);
    if theta0 <= lo + THETA_MARGIN {
        return Err(Error::Domain(format!(
            "theta0 = {theta0} violates the lower bound sin(theta0) > 1/sqrt(M+1) (theta0 > {lo:.9})"
        )));
    }
    if theta0 >= hi - THETA_MARGIN {
        return Err(Error::Domain(format!(
            "theta0 = {theta0} violates the upper bound sin(theta0) < sqrt(M/(M+1)) (theta0 < {hi:.9})"
        )));
    }
    let sm = (m as f64).sqrt();
    let (s, c) = theta0.sin_cos();
    let r1 = -0.5 * ((sm * s - c) / (sm * s + c)).ln();
    let r2 = -0.5 * ((sm * c - s) / (sm * c + s)).ln();
    if !(r1.is_finite() && r2.is_finite() && r1 > 0.0 && r2 > 0.0) {
        return Err(Error::Domain(format!("theta0 = {theta0} gives r1 = {r1}, r2 = {r2}")));
    }
    Ok((r1, r2))
}

/// Squeezing (dB) of each of the two equal squeezers at `θ₀ = π/4`:
/// `10 log₁₀((√M − 1)/(√M + 1))`, negative.
pub fn equal_squeezing_db(m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("M = {m} is degenerate (need M >= 2)")));
    }
    let sm = (m as f64).sqrt();
    Ok(10.0 * ((sm - 1.0) / (sm + 1.0)).log10())
}

/// Magnitude in dB of a squeezer with parameter `r`: `|10 log₁₀ e^{−2|r|}|`.
pub fn squeezing_db(r: f64) -> f64 {
    20.0 * r.abs() / std::f64::consts::LN_10
}

/// Circuit that maps `M+1` vacua onto the channel state.
pub fn mqc_circuit(spec: &MqcSpec) -> Result<SymplecticTransform> {
    spec.validate()?;
    let (r1, r2) = spec.squeezing()?;
    let m = spec.receivers;
    let n = m + 1;
    // Input A: p squeezed by r₁+s. Input B: x squeezed by r₂−s.
    let mut circuit = &squeezer(n, 1, spec.s - r2)? * &squeezer(n, 0, r1 + spec.s)?;
    for k in 2..n {
        circuit = &squeezer(n, k, spec.s)? * &circuit;
    }
    circuit = &beam_splitter(n, 0, 1, spec.theta0, 0.0)? * &circuit;
    let receivers: Vec<usize> = (1..n).collect();
    circuit = &m_splitter(m)?.embed(n, &receivers)? * &circuit;
    Ok(circuit)
}

/// Builds the channel state from its optical recipe. Mode 0 is the port.
pub fn build_mqc(spec: &MqcSpec) -> Result<GaussianState> {
    let circuit = mqc_circuit(spec)?;
    GaussianState::vacuum(spec.receivers + 1)?.apply_symplectic(&circuit)
}

/// Covariance read off the Wigner exponent directly.
///
/// The exponent is `−(xᵀ K_x x + pᵀ K_p p)` with `K` assembled from the two
/// weighted squared combinations and the receiver pair-sum (over ordered
/// pairs); the covariance is `V = ½ K⁻¹` per quadrature block.
pub fn closed_form_covariance(spec: &MqcSpec) -> Result<GaussianState> {
    spec.validate()?;
    let (r1, r2) = spec.squeezing()?;
    let m = spec.receivers;
    let n = m + 1;
    let sm = (m as f64).sqrt();
    let (sn, cs) = spec.theta0.sin_cos();
    let mut a = DVector::from_element(n, cs / sm);
    a[0] = sn;
    let mut b = DVector::from_element(n, -sn / sm);
    b[0] = cs;

    // Σ_{i,j} (x_i − x_j)² = 2M Σ x_i² − 2 (Σ x_i)² over receivers.
    let mut pair = DMatrix::zeros(n, n);
    for i in 1..n {
        for j in 1..n {
            pair[(i, j)] = if i == j { 2.0 * m as f64 - 2.0 } else { -2.0 };
        }
    }

    let block = |sign: f64| -> Result<DMatrix<f64>> {
        let k = &a * a.transpose() * (2.0 * (-sign * 2.0 * (spec.s + r1)).exp())
            + &b * b.transpose() * (2.0 * (-sign * 2.0 * (spec.s - r2)).exp())
            + &pair * ((-sign * 2.0 * spec.s).exp() / m as f64);
        linalg::inverse(&k)
            .map(|inv| inv * 0.5)
            .map_err(|e| Error::Internal(format!("quadratic form is singular: {e}")))
    };
    let vx = block(1.0)?;
    let vp = block(-1.0)?;
    let mut cov = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            cov[(2 * i, 2 * j)] = vx[(i, j)];
            cov[(2 * i + 1, 2 * j + 1)] = vp[(i, j)];
        }
    }
    linalg::symmetrize(&mut cov);
    GaussianState::from_parts(DVector::zeros(2 * n), cov)
}

/// `2M`-mode channel built from a finite-squeezing EPR pair whose halves
/// each pass through their own M-splitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMqcSpec {
    #[serde(rename = "M")]
    pub receivers: usize,
    pub r: f64,
    #[serde(default)]
    pub s: f64,
}

impl SymmetricMqcSpec {
    pub fn new(receivers: usize, r: f64, s: f64) -> Result<Self> {
        let spec = Self { receivers, r, s };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.receivers == 0 {
            return Err(Error::InvalidArgument("M must be at least 1".into()));
        }
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "EPR squeezing r = {} must be finite and non-negative",
                self.r
            )));
        }
        if !self.s.is_finite() {
            return Err(Error::InvalidArgument("s must be finite".into()));
        }
        Ok(())
    }

    pub fn left_modes(&self) -> Vec<usize> {
        (0..self.receivers).collect()
    }

    pub fn right_modes(&self) -> Vec<usize> {
        (self.receivers..2 * self.receivers).collect()
    }
}

/// Left modes are `0..M`, right modes `M..2M`. The EPR pair has
/// `x_L ≈ x_R` and `p_L ≈ −p_R` for large `r`.
pub fn build_symmetric_mqc(spec: &SymmetricMqcSpec) -> Result<GaussianState> {
    spec.validate()?;
    let m = spec.receivers;
    let n = 2 * m;
    let mut circuit = &squeezer(n, m, -spec.r)? * &squeezer(n, 0, spec.r)?;
    for k in (1..m).chain(m + 1..n) {
        circuit = &squeezer(n, k, spec.s)? * &circuit;
    }
    circuit = &beam_splitter(n, 0, m, std::f64::consts::FRAC_PI_4, 0.0)? * &circuit;
    let split = m_splitter(m)?;
    circuit = &split.embed(n, &spec.left_modes())? * &circuit;
    circuit = &split.embed(n, &spec.right_modes())? * &circuit;
    GaussianState::vacuum(n)?.apply_symplectic(&circuit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn interior_thetas(m: usize) -> Vec<f64> {
        let (lo, hi) = theta_bounds(m);
        (1..=5).map(|k| lo + (hi - lo) * k as f64 / 6.0).collect()
    }

    #[test]
    fn symmetric_point_squeezing() {
        let (r1, r2) = solve_squeezing(2, FRAC_PI_4).unwrap();
        let expected = -0.5 * ((2f64.sqrt() - 1.0) / (2f64.sqrt() + 1.0)).ln();
        assert!((r1 - expected).abs() < 1e-14 && (r2 - expected).abs() < 1e-14);
        assert!((r1 - 0.881373587019543).abs() < 1e-12);
        let (r1, _) = solve_squeezing(4, FRAC_PI_4).unwrap();
        assert!(((-2.0 * r1).exp() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn endpoint_and_outside_rejected() {
        let (lo, hi) = theta_bounds(3);
        for t in [lo, hi, lo - 0.1, hi + 0.1, lo + 1e-7] {
            let err = solve_squeezing(3, t).unwrap_err();
            assert!(matches!(err, Error::Domain(_)));
        }
        assert!(solve_squeezing(3, lo).unwrap_err().to_string().contains("lower bound"));
        assert!(solve_squeezing(3, hi).unwrap_err().to_string().contains("upper bound"));
        assert!(MqcSpec::new(1, FRAC_PI_4, 0.0).is_err());
    }

    #[test]
    fn db_budget() {
        assert!((equal_squeezing_db(2).unwrap() + 7.655513706).abs() < 1e-8);
        assert!((equal_squeezing_db(4).unwrap() - 10.0 * (1.0f64 / 3.0).log10()).abs() < 1e-14);
        assert!(equal_squeezing_db(1_000_000).unwrap().abs() < 0.01);
        assert!(equal_squeezing_db(1).is_err());
        for m in 2..9 {
            let (r1, r2) = solve_squeezing(m, FRAC_PI_4).unwrap();
            let db = equal_squeezing_db(m).unwrap();
            assert!((squeezing_db(r1) + db).abs() < 1e-12);
            assert!((squeezing_db(r2) + db).abs() < 1e-12);
        }
    }

    #[test]
    fn circuit_matches_closed_form() {
        for m in 2..=6 {
            for s in [-0.5, 0.0, 0.5] {
                for theta0 in interior_thetas(m) {
                    let spec = MqcSpec::new(m, theta0, s).unwrap();
                    let a = build_mqc(&spec).unwrap();
                    let b = closed_form_covariance(&spec).unwrap();
                    let d = linalg::max_abs_diff(a.cov(), b.cov());
                    assert!(d < 1e-10, "M={m} s={s} theta0={theta0}: {d:e}");
                }
            }
        }
        let spec = MqcSpec::new(3, 0.9, 0.3).unwrap();
        let d = linalg::max_abs_diff(build_mqc(&spec).unwrap().cov(), closed_form_covariance(&spec).unwrap().cov());
        assert!(d < 1e-10);
    }

    #[test]
    fn state_is_pure_and_receiver_symmetric() {
        let spec = MqcSpec::new(4, 0.7, 0.2).unwrap();
        let st = build_mqc(&spec).unwrap();
        assert!(st.is_pure(1e-9));
        // Swap receivers 1 and 3.
        let perm = st.partial_trace(&[0, 3, 2, 1, 4]).unwrap();
        assert!(linalg::max_abs_diff(perm.cov(), st.cov()) < 1e-12);
        // No x–p cross terms.
        for i in 0..5 {
            for j in 0..5 {
                assert!(st.cov()[(2 * i, 2 * j + 1)].abs() < 1e-12);
            }
        }
        // Port marginal agrees between the two constructions.
        let cf = closed_form_covariance(&spec).unwrap();
        assert!((st.cov()[(0, 0)] - cf.cov()[(0, 0)]).abs() < 1e-12);
    }

    #[test]
    fn receivers_are_entangled_with_port() {
        for m in 2..=5 {
            let st = build_mqc(&MqcSpec::symmetric(m, 0.0).unwrap()).unwrap();
            let rec: Vec<usize> = (1..=m).collect();
            let nu = st.partial_trace(&rec).unwrap().symplectic_eigenvalues().unwrap();
            assert!(nu.last().unwrap() > &(0.25 + 1e-3));
        }
    }

    #[test]
    fn symmetric_variant() {
        let s = build_symmetric_mqc(&SymmetricMqcSpec::new(1, 0.0, 0.0).unwrap()).unwrap();
        assert!(linalg::max_abs_diff(s.cov(), GaussianState::vacuum(2).unwrap().cov()) < 1e-15);
        let st = build_symmetric_mqc(&SymmetricMqcSpec::new(2, 1.2, 0.0).unwrap()).unwrap();
        assert!(st.is_pure(1e-9));
        for perm in [[1, 0, 2, 3], [0, 1, 3, 2], [1, 0, 3, 2]] {
            let p = st.partial_trace(&perm).unwrap();
            assert!(linalg::max_abs_diff(p.cov(), st.cov()) < 1e-12);
        }
        assert!(SymmetricMqcSpec::new(2, f64::INFINITY, 0.0).is_err());
        assert!(SymmetricMqcSpec::new(2, -0.1, 0.0).is_err());
    }

    #[test]
    fn spec_json_document() {
        let spec: MqcSpec = serde_json::from_str(r#"{"M": 3, "theta0": 0.9, "s": 0.3}"#).unwrap();
        assert_eq!(spec, MqcSpec::new(3, 0.9, 0.3).unwrap());
        let spec: MqcSpec = serde_json::from_str(r#"{"M": 2}"#).unwrap();
        assert_eq!(spec.theta0, FRAC_PI_4);
    }
}
