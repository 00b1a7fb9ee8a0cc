//! Triangular (Reck) beam-splitter meshes.
//!
//! The mesh is `U = (G_n ⋯ G_2 · D)⁻¹` with `G_l = B_{l−1,l} ⋯ B_{1,l}`
//! (1-based modes) and `D = diag(e^{iβ_1}, …, e^{iβ_n})`. Beam splitter
//! parameters are stored in the order the factors appear in that product,
//! left to right.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symplectic::{beam_splitter_unitary, SymplecticTransform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReckParams {
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    pub betas: Vec<f64>,
}

/// Zero-based `(k, l)` pairs in product order.
pub fn mesh_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for l in (1..n).rev() {
        for k in (0..l).rev() {
            pairs.push((k, l));
        }
    }
    pairs
}

fn apply_left(target: &mut DMatrix<Complex<f64>>, k: usize, l: usize, b: &DMatrix<Complex<f64>>) {
    for col in 0..target.ncols() {
        let (tk, tl) = (target[(k, col)], target[(l, col)]);
        target[(k, col)] = b[(0, 0)] * tk + b[(0, 1)] * tl;
        target[(l, col)] = b[(1, 0)] * tk + b[(1, 1)] * tl;
    }
}

/// The complex unitary described by `params`.
pub fn reck_unitary(n: usize, params: &ReckParams) -> Result<DMatrix<Complex<f64>>> {
    let pairs = mesh_pairs(n);
    if params.thetas.len() != pairs.len() || params.phis.len() != pairs.len() {
        return Err(Error::InvalidArgument(format!(
            "{n}-mode mesh needs {} beam splitters, got {} thetas and {} phis",
            pairs.len(),
            params.thetas.len(),
            params.phis.len()
        )));
    }
    if params.betas.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{n}-mode mesh needs {n} phases, got {}",
            params.betas.len()
        )));
    }
    // Build the product right to left: start from D, then multiply each
    // factor onto the left.
    let mut product = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex::from_polar(1.0, params.betas[i])
        } else {
            Complex::new(0.0, 0.0)
        }
    });
    for (idx, &(k, l)) in pairs.iter().enumerate().rev() {
        let b = beam_splitter_unitary(params.thetas[idx], params.phis[idx]);
        apply_left(&mut product, k, l, &b);
    }
    Ok(product.adjoint())
}

pub fn reck_interferometer(n: usize, params: &ReckParams) -> Result<SymplecticTransform> {
    SymplecticTransform::from_unitary(&reck_unitary(n, params)?)
}

/// Recovers mesh parameters for a given unitary.
///
/// Works on `W = U†`: for each column `l` from the last down, left-multiplies
/// by `B_{k,l}⁻¹` for `k = l−1, …, 1`, choosing each splitter so that entry
/// `(k, l)` vanishes. What is left is the diagonal phase matrix `D`.
pub fn reck_decompose(u: &DMatrix<Complex<f64>>) -> Result<ReckParams> {
    let n = u.nrows();
    if !u.is_square() || n == 0 {
        return Err(Error::InvalidArgument("unitary must be square and non-empty".into()));
    }
    let mut w = u.adjoint();
    let mut found = Vec::new();
    for l in (1..n).rev() {
        for k in (0..l).rev() {
            let (wk, wl) = (w[(k, l)], w[(l, l)]);
            let (theta, phi) = if wk.norm() < 1e-300 {
                // Only c·w_l must vanish.
                (std::f64::consts::FRAC_PI_2, 0.0)
            } else if wl.norm() < 1e-300 {
                (0.0, 0.0)
            } else {
                // e^{−iφ} sinθ w_k + cosθ w_l = 0
                let theta = wl.norm().atan2(wk.norm());
                let phase = -(wl / wk) / (wl / wk).norm();
                (theta, -phase.arg())
            };
            let inv_b = beam_splitter_unitary(theta, phi).adjoint();
            apply_left(&mut w, k, l, &inv_b);
            found.push((theta, phi));
        }
    }
    let off_diag = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| w[(i, j)].norm())
        .fold(0.0, f64::max);
    if off_diag > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "input is not unitary (residual off-diagonal {off_diag:e})"
        )));
    }
    Ok(ReckParams {
        thetas: found.iter().map(|p| p.0).collect(),
        phis: found.iter().map(|p| p.1).collect(),
        betas: (0..n).map(|i| w[(i, i)].arg()).collect(),
    })
}
