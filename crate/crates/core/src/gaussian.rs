//! Gaussian states of an `N`-mode bosonic register in phase space.
//!
//! Quadratures are interleaved as `(x₁, p₁, …, x_N, p_N)` with
//! `[x, p] = i/2`, so the vacuum covariance is `I/4` and every physical
//! state has symplectic eigenvalues `≥ 1/4`.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::symplectic::SymplecticTransform;

/// Vacuum variance of a single quadrature.
pub const VACUUM_VARIANCE: f64 = 0.25;

/// Absolute tolerance on covariance symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Slack allowed below `1/4` for symplectic eigenvalues.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Homodyne variances below this are treated as degenerate.
pub const DEGENERACY_GUARD: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    X,
    P,
}

impl Quadrature {
    fn offset(self) -> usize {
        match self {
            Quadrature::X => 0,
            Quadrature::P => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneOutcome {
    pub measured_quadrature: Quadrature,
    pub mode: usize,
    pub value: f64,
}

/// Where a homodyne outcome comes from.
pub enum Readout<'a> {
    /// Condition on a given value (post-selection).
    Fixed(f64),
    /// Draw the value from the Gaussian marginal.
    Sample(&'a mut dyn RngCore),
}

impl GaussianState {
    /// Builds a state after checking symmetry and physicality.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let state = Self::from_parts(mean, cov)?;
        let nu = state.symplectic_eigenvalues()?;
        if let Some(&low) = nu.first() {
            if low < VACUUM_VARIANCE - PHYSICALITY_TOL {
                return Err(Error::InvalidArgument(format!(
                    "unphysical covariance: symplectic eigenvalue {low} < 1/4"
                )));
            }
        }
        Ok(state)
    }

    /// Shape and symmetry checks only.
    pub(crate) fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n2 = mean.len();
        if n2 == 0 || n2 % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "mean length {n2} is not a positive even number"
            )));
        }
        if cov.nrows() != n2 || cov.ncols() != n2 {
            return Err(Error::DimensionMismatch {
                expected: n2,
                found: cov.nrows().max(cov.ncols()),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite moments".into()));
        }
        let asym = linalg::asymmetry(&cov);
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self { mean, cov })
    }

    pub fn vacuum(modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidArgument("vacuum needs at least one mode".into()));
        }
        Ok(Self {
            mean: DVector::zeros(2 * modes),
            cov: DMatrix::identity(2 * modes, 2 * modes) * VACUUM_VARIANCE,
        })
    }

    /// Single-mode squeezed vacuum. With `squeeze_p` the covariance is
    /// `diag(e^{2r}, e^{-2r})/4`, otherwise `diag(e^{-2r}, e^{2r})/4`.
    pub fn squeezed_vacuum(r: f64, squeeze_p: bool) -> Result<Self> {
        if !r.is_finite() {
            return Err(Error::InvalidArgument(format!("squeezing {r} is not finite")));
        }
        let signed = if squeeze_p { r } else { -r };
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![
            VACUUM_VARIANCE * (2.0 * signed).exp(),
            VACUUM_VARIANCE * (-2.0 * signed).exp(),
        ]));
        Ok(Self {
            mean: DVector::zeros(2),
            cov,
        })
    }

    pub fn coherent(x0: f64, p0: f64) -> Result<Self> {
        Self::squeezed(x0, p0, 0.0)
    }

    /// Displaced squeezed state with covariance `diag(e^{2s}, e^{-2s})/4`.
    pub fn squeezed(x0: f64, p0: f64, s: f64) -> Result<Self> {
        if !(x0.is_finite() && p0.is_finite()) {
            return Err(Error::InvalidArgument("non-finite displacement".into()));
        }
        let mut state = Self::squeezed_vacuum(s, true)?;
        state.mean[0] = x0;
        state.mean[1] = p0;
        Ok(state)
    }

    pub fn num_modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Mode order: `self` first, then `other`.
    pub fn tensor(&self, other: &GaussianState) -> GaussianState {
        let (na, nb) = (self.mean.len(), other.mean.len());
        let mut mean = DVector::zeros(na + nb);
        mean.rows_mut(0, na).copy_from(&self.mean);
        mean.rows_mut(na, nb).copy_from(&other.mean);
        let mut cov = DMatrix::zeros(na + nb, na + nb);
        cov.view_mut((0, 0), (na, na)).copy_from(&self.cov);
        cov.view_mut((na, na), (nb, nb)).copy_from(&other.cov);
        GaussianState { mean, cov }
    }

    /// `mean → S·mean`, `cov → S·cov·Sᵀ`.
    pub fn apply_symplectic(&self, s: &SymplecticTransform) -> Result<GaussianState> {
        let m = s.matrix();
        if m.nrows() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: m.nrows(),
            });
        }
        let mean = m * &self.mean;
        let mut cov = m * &self.cov * m.transpose();
        linalg::symmetrize(&mut cov);
        Ok(GaussianState { mean, cov })
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.num_modes() {
            return Err(Error::InvalidArgument(format!(
                "mode {mode} out of range for {} modes",
                self.num_modes()
            )));
        }
        Ok(())
    }

    pub fn displace(&self, mode: usize, dx: f64, dp: f64) -> Result<GaussianState> {
        self.check_mode(mode)?;
        let mut out = self.clone();
        out.mean[2 * mode] += dx;
        out.mean[2 * mode + 1] += dp;
        Ok(out)
    }

    /// Reduced state on `keep`, in the order given. Indices must be distinct.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<GaussianState> {
        if keep.is_empty() {
            return Err(Error::InvalidArgument("partial trace must keep at least one mode".into()));
        }
        for (i, &k) in keep.iter().enumerate() {
            self.check_mode(k)?;
            if keep[..i].contains(&k) {
                return Err(Error::InvalidArgument(format!("mode {k} listed twice")));
            }
        }
        let rows: Vec<usize> = keep.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect();
        let mean = DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.mean[r]));
        let cov = DMatrix::from_fn(rows.len(), rows.len(), |i, j| self.cov[(rows[i], rows[j])]);
        Ok(GaussianState { mean, cov })
    }

    /// Single-quadrature homodyne detection on `mode`.
    ///
    /// The measured mode is removed. With `v` the measured variance and `c`
    /// the cross-covariance of the remaining quadratures with the measured
    /// one, the remaining moments update as `μ += c (m − μ_q)/v` and
    /// `V −= c cᵀ/v`.
    pub fn homodyne(
        &self,
        mode: usize,
        quadrature: Quadrature,
        readout: Readout<'_>,
    ) -> Result<(HomodyneOutcome, GaussianState)> {
        self.check_mode(mode)?;
        if self.num_modes() < 2 {
            return Err(Error::InvalidArgument(
                "cannot measure the only mode of a register".into(),
            ));
        }
        let q = 2 * mode + quadrature.offset();
        let v = self.cov[(q, q)];
        if v < DEGENERACY_GUARD {
            return Err(Error::NumericalDegeneracy(format!(
                "measured quadrature variance {v:e} is not positive"
            )));
        }
        let mu = self.mean[q];
        let value = match readout {
            Readout::Fixed(value) => value,
            Readout::Sample(rng) => {
                let z: f64 = StandardNormal.sample(rng);
                mu + v.sqrt() * z
            }
        };
        if !value.is_finite() {
            return Err(Error::InvalidArgument("homodyne outcome is not finite".into()));
        }

        let rows: Vec<usize> = (0..self.mean.len())
            .filter(|&r| r / 2 != mode)
            .collect();
        let n = rows.len();
        let shift = (value - mu) / v;
        let c: Vec<f64> = rows.iter().map(|&r| self.cov[(r, q)]).collect();
        let mean = DVector::from_fn(n, |i, _| self.mean[rows[i]] + c[i] * shift);
        let mut cov = DMatrix::from_fn(n, n, |i, j| {
            self.cov[(rows[i], rows[j])] - c[i] * c[j] / v
        });
        linalg::symmetrize(&mut cov);
        Ok((
            HomodyneOutcome {
                measured_quadrature: quadrature,
                mode,
                value,
            },
            GaussianState { mean, cov },
        ))
    }

    /// Symplectic eigenvalues, ascending, one per mode.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        let asym = linalg::asymmetry(&self.cov);
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        linalg::symplectic_spectrum(&self.cov)
    }

    /// True when every symplectic eigenvalue is `1/4` within `tol`.
    pub fn is_pure(&self, tol: f64) -> bool {
        self.symplectic_eigenvalues()
            .map(|nu| nu.iter().all(|v| (v - VACUUM_VARIANCE).abs() <= tol))
            .unwrap_or(false)
    }

    /// Draws one phase-space point from the Wigner distribution.
    pub fn sample_point(&self, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        let chol = self
            .cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NumericalDegeneracy("covariance is not positive definite".into()))?;
        let z = DVector::from_fn(self.mean.len(), |_, _| StandardNormal.sample(&mut *rng));
        Ok(&self.mean + chol.l() * z)
    }

    pub fn to_json_doc(&self) -> StateDoc {
        StateDoc {
            modes: self.num_modes(),
            mean: self.mean.iter().cloned().collect(),
            cov: (0..self.cov.nrows())
                .map(|i| self.cov.row(i).iter().cloned().collect())
                .collect(),
        }
    }

    pub fn from_json_doc(doc: &StateDoc) -> Result<Self> {
        let n2 = 2 * doc.modes;
        if doc.mean.len() != n2 {
            return Err(Error::DimensionMismatch {
                expected: n2,
                found: doc.mean.len(),
            });
        }
        if doc.cov.len() != n2 || doc.cov.iter().any(|row| row.len() != n2) {
            return Err(Error::InvalidArgument(format!("cov must be {n2}x{n2}")));
        }
        let cov = DMatrix::from_fn(n2, n2, |i, j| doc.cov[i][j]);
        Self::new(DVector::from_vec(doc.mean.clone()), cov)
    }
}

/// On-disk layout of a state: full row-major covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDoc {
    pub modes: usize,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl Serialize for GaussianState {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_doc().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GaussianState {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = StateDoc::deserialize(deserializer)?;
        GaussianState::from_json_doc(&doc).map_err(serde::de::Error::custom)
    }
}

/// Overlap `π ∫ W_in W_out` of a pure single-mode input with any
/// single-mode output: `exp(−½ δμᵀ (V₁+V₂)⁻¹ δμ) / (2 √det(V₁+V₂))`.
pub fn gaussian_fidelity(pure_input: &GaussianState, output: &GaussianState) -> Result<f64> {
    if pure_input.num_modes() != 1 || output.num_modes() != 1 {
        return Err(Error::InvalidArgument(
            "fidelity is defined here for single-mode states".into(),
        ));
    }
    let nu = pure_input.symplectic_eigenvalues()?[0];
    if (nu - VACUUM_VARIANCE).abs() > PHYSICALITY_TOL {
        return Err(Error::NotPure(nu));
    }
    Ok(overlap_2x2(
        pure_input.cov(),
        output.cov(),
        output.mean[0] - pure_input.mean[0],
        output.mean[1] - pure_input.mean[1],
    ))
}

pub(crate) fn overlap_2x2(a: &DMatrix<f64>, b: &DMatrix<f64>, dx: f64, dp: f64) -> f64 {
    let (s00, s01, s11) = (
        a[(0, 0)] + b[(0, 0)],
        0.5 * (a[(0, 1)] + a[(1, 0)] + b[(0, 1)] + b[(1, 0)]),
        a[(1, 1)] + b[(1, 1)],
    );
    let det = s00 * s11 - s01 * s01;
    let quad = (s11 * dx * dx - 2.0 * s01 * dx * dp + s00 * dp * dp) / det;
    (-0.5 * quad).exp() / (2.0 * det.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const FRAC_PI_4: f64 = std::f64::consts::FRAC_PI_4;

    fn two_mode_squeezed(r: f64) -> GaussianState {
        let s = GaussianState::squeezed_vacuum(r, true)
            .unwrap()
            .tensor(&GaussianState::squeezed_vacuum(r, false).unwrap());
        s.apply_symplectic(&symplectic::beam_splitter(2, 0, 1, FRAC_PI_4, 0.0).unwrap())
            .unwrap()
    }

    #[test]
    fn vacuum_moments() {
        let v = GaussianState::vacuum(1).unwrap();
        assert_eq!(v.mean().as_slice(), &[0.0, 0.0]);
        assert_eq!(v.cov()[(0, 0)], 0.25);
        assert_eq!(v.cov()[(1, 1)], 0.25);
        assert_eq!(v.cov()[(0, 1)], 0.0);
        let v3 = GaussianState::vacuum(3).unwrap();
        assert_eq!(v3.cov(), &(DMatrix::identity(6, 6) * 0.25));
        let nu = GaussianState::vacuum(2).unwrap().symplectic_eigenvalues().unwrap();
        assert!(nu.iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert!(GaussianState::vacuum(0).is_err());
    }

    #[test]
    fn squeezed_vacuum_variances() {
        assert_eq!(
            GaussianState::squeezed_vacuum(0.0, true).unwrap(),
            GaussianState::vacuum(1).unwrap()
        );
        let r = 0.37;
        let s = GaussianState::squeezed_vacuum(r, true).unwrap();
        assert!((s.cov()[(1, 1)] - (-2.0 * r).exp() / 4.0).abs() < 1e-15);
        assert!((s.cov()[(0, 0)] - (2.0 * r).exp() / 4.0).abs() < 1e-15);
        // e^{-2r} = (√2−1)/(√2+1)
        let ratio = (2f64.sqrt() - 1.0) / (2f64.sqrt() + 1.0);
        let r = -0.5 * ratio.ln();
        let s = GaussianState::squeezed_vacuum(r, true).unwrap();
        assert!((s.cov()[(1, 1)] - 0.042893218813452).abs() < 1e-12);
        assert!(GaussianState::squeezed_vacuum(f64::NAN, true).is_err());
        assert!(GaussianState::squeezed_vacuum(f64::INFINITY, false).is_err());
    }

    #[test]
    fn tensor_layout() {
        let v = GaussianState::vacuum(1).unwrap();
        assert_eq!(v.tensor(&v), GaussianState::vacuum(2).unwrap());
        let t = GaussianState::coherent(1.0, 0.0)
            .unwrap()
            .tensor(&GaussianState::squeezed_vacuum(0.4, true).unwrap());
        assert_eq!(t.mean().as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        let nu = t.symplectic_eigenvalues().unwrap();
        assert!(nu.iter().all(|v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn new_rejects_asymmetric_and_unphysical() {
        let mut cov = DMatrix::identity(2, 2) * 0.25;
        cov[(0, 1)] = 1e-6;
        assert!(matches!(
            GaussianState::new(DVector::zeros(2), cov),
            Err(Error::NotSymmetric(_))
        ));
        let cov = DMatrix::identity(2, 2) * 0.2;
        assert!(GaussianState::new(DVector::zeros(2), cov).is_err());
    }

    #[test]
    fn displacement() {
        let v = GaussianState::vacuum(1).unwrap();
        let d = v.displace(0, 1.0, 2.0).unwrap();
        assert_eq!(d.mean().as_slice(), &[1.0, 2.0]);
        assert_eq!(d.cov(), v.cov());
        let dd = d.displace(0, -0.5, 0.25).unwrap();
        assert_eq!(dd.mean().as_slice(), &[0.5, 2.25]);
        assert!(v.displace(1, 0.0, 0.0).is_err());

        let tm = two_mode_squeezed(0.6);
        let a = tm.displace(1, 0.3, -0.2).unwrap().partial_trace(&[0]).unwrap();
        let b = tm.partial_trace(&[0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn partial_trace_cases() {
        let v3 = GaussianState::vacuum(3).unwrap();
        assert_eq!(v3.partial_trace(&[0]).unwrap(), GaussianState::vacuum(1).unwrap());
        let tm = two_mode_squeezed(0.5);
        assert_eq!(tm.partial_trace(&[0, 1]).unwrap(), tm);
        assert!(tm.partial_trace(&[]).is_err());
        assert!(tm.partial_trace(&[1, 1]).is_err());
        let half = tm.partial_trace(&[1]).unwrap();
        let nu = half.symplectic_eigenvalues().unwrap();
        assert!(nu[0] > 0.25 + 1e-3);
    }

    #[test]
    fn epr_half_spectrum_matches_cosh() {
        for r in [0.1, 0.8, 1.7] {
            let half = two_mode_squeezed(r).partial_trace(&[0]).unwrap();
            let nu = half.symplectic_eigenvalues().unwrap()[0];
            let direct = linalg::determinant(half.cov()).sqrt();
            assert!((nu - (2.0 * r).cosh() / 4.0).abs() < 1e-12);
            assert!((nu - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn homodyne_on_product_state_leaves_vacuum() {
        let v = GaussianState::vacuum(2).unwrap();
        for value in [-3.0, 0.0, 1.7] {
            let (o, rest) = v.homodyne(0, Quadrature::X, Readout::Fixed(value)).unwrap();
            assert_eq!(o.value, value);
            assert_eq!(rest, GaussianState::vacuum(1).unwrap());
        }
    }

    /// Conditioning a bivariate normal (x₁, x₂) on x₁: var = σ₂² − σ₁₂²/σ₁².
    fn bivariate_conditional_variance(s11: f64, s12: f64, s22: f64) -> f64 {
        s22 - s12 * s12 / s11
    }

    #[test]
    fn homodyne_on_two_mode_squeezed_state() {
        for r in [0.3, 1.0, 2.0] {
            let tm = two_mode_squeezed(r);
            let c = tm.cov();
            let oracle = bivariate_conditional_variance(c[(0, 0)], c[(0, 2)], c[(2, 2)]);
            let (_, rest) = tm.homodyne(0, Quadrature::X, Readout::Fixed(0.4)).unwrap();
            assert!((rest.cov()[(0, 0)] - oracle).abs() < 1e-12);
            assert!((rest.cov()[(0, 0)] - 0.25 / (2.0 * r).cosh()).abs() < 1e-12);
        }
    }

    #[test]
    fn homodyne_degenerate_variance() {
        let mut cov = DMatrix::identity(4, 4) * 0.25;
        cov[(0, 0)] = 0.0;
        let s = GaussianState::from_parts(DVector::zeros(4), cov).unwrap();
        assert!(matches!(
            s.homodyne(0, Quadrature::X, Readout::Fixed(0.0)),
            Err(Error::NumericalDegeneracy(_))
        ));
    }

    #[test]
    fn homodyne_sampling_is_seeded() {
        let tm = two_mode_squeezed(0.7);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5)
                .map(|_| tm.homodyne(1, Quadrature::P, Readout::Sample(&mut rng)).unwrap().0.value)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn law_of_total_variance() {
        // Three modes, mixed correlations; measure p of mode 1.
        let base = two_mode_squeezed(0.8).tensor(&GaussianState::squeezed_vacuum(0.3, false).unwrap());
        let s = base
            .apply_symplectic(&symplectic::beam_splitter(3, 1, 2, 0.6, 0.4).unwrap())
            .unwrap()
            .displace(0, 0.5, -1.0)
            .unwrap();
        let marginal = s.partial_trace(&[0, 2]).unwrap();
        let trials = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut first = DVector::<f64>::zeros(4);
        let mut second = DMatrix::<f64>::zeros(4, 4);
        for _ in 0..trials {
            let (_, cond) = s.homodyne(1, Quadrature::P, Readout::Sample(&mut rng)).unwrap();
            first += cond.mean();
            second += cond.cov() + cond.mean() * cond.mean().transpose();
        }
        first /= trials as f64;
        second /= trials as f64;
        let total = second - &first * first.transpose();
        assert!(linalg::max_abs_diff(&total, marginal.cov()) < 0.02);
        assert!((&first - marginal.mean()).amax() < 0.02);
    }

    #[test]
    fn coherent_overlap() {
        let a = GaussianState::coherent(0.0, 0.0).unwrap();
        assert!((gaussian_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let b = GaussianState::coherent(0.3, -0.4).unwrap();
        let f = gaussian_fidelity(&a, &b).unwrap();
        assert!((f - (-(0.09 + 0.16f64)).exp()).abs() < 1e-14);
        let mixed = GaussianState::new(DVector::zeros(2), DMatrix::identity(2, 2) * 0.5).unwrap();
        assert!(matches!(gaussian_fidelity(&mixed, &a), Err(Error::NotPure(_))));
    }

    /// π ∫ W₁ W₂ on a truncated grid with the midpoint rule.
    fn grid_overlap(a: &GaussianState, b: &GaussianState) -> f64 {
        let wigner = |s: &GaussianState, x: f64, p: f64| {
            let c = s.cov();
            let det = c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)];
            let (dx, dp) = (x - s.mean()[0], p - s.mean()[1]);
            let q = (c[(1, 1)] * dx * dx - 2.0 * c[(0, 1)] * dx * dp + c[(0, 0)] * dp * dp) / det;
            (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
        };
        let (lo, hi, n) = (-6.0, 6.0, 1200);
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let x = lo + (i as f64 + 0.5) * h;
            for j in 0..n {
                let p = lo + (j as f64 + 0.5) * h;
                acc += wigner(a, x, p) * wigner(b, x, p);
            }
        }
        std::f64::consts::PI * acc * h * h
    }

    #[test]
    fn fidelity_matches_grid_quadrature() {
        let input = GaussianState::squeezed(0.2, -0.1, 0.3)
            .unwrap()
            .apply_symplectic(&symplectic::phase_shift(1, 0, 0.7).unwrap())
            .unwrap();
        let out = GaussianState::new(
            DVector::from_vec(vec![0.5, 0.1]),
            DMatrix::from_row_slice(2, 2, &[0.6, 0.12, 0.12, 0.45]),
        )
        .unwrap();
        let f = gaussian_fidelity(&input, &out).unwrap();
        assert!((f - grid_overlap(&input, &out)).abs() < 1e-6, "{f}");
    }

    #[test]
    fn json_layout_round_trip() {
        let s = two_mode_squeezed(0.4).displace(1, 0.1, 0.2).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["modes"], 2);
        assert_eq!(value["cov"].as_array().unwrap().len(), 4);
        let back: GaussianState = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<GaussianState>(r#"{"modes":1,"mean":[0],"cov":[[1]]}"#).is_err());
    }
}
