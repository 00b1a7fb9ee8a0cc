//! Small dense helpers shared by the phase-space code.
//!
//! Every matrix here is at most a few dozen rows, so all routines favour
//! plain LU with partial pivoting and explicit checks over speed.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Condition numbers above this are logged as suspicious.
pub const CONDITION_WARNING: f64 = 1e12;

/// The symplectic form for `modes` modes in interleaved `(x, p)` order.
pub fn omega(modes: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        w[(2 * k, 2 * k + 1)] = 1.0;
        w[(2 * k + 1, 2 * k)] = -1.0;
    }
    w
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Largest `|m_ij - m_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

fn norm_1(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse via LU with partial pivoting.
///
/// Singular input is an error; a 1-norm condition estimate above
/// [`CONDITION_WARNING`] is logged but still returned.
pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::NumericalDegeneracy("singular matrix".into()))?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalDegeneracy("non-finite inverse".into()));
    }
    let cond = norm_1(m) * norm_1(&inv);
    if cond > CONDITION_WARNING {
        log::warn!("ill-conditioned inverse (cond_1 ~ {cond:.3e})");
    }
    Ok(inv)
}

pub fn determinant(m: &DMatrix<f64>) -> f64 {
    m.clone().lu().determinant()
}

/// Principal square root of a symmetric positive semidefinite matrix.
pub fn sym_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-12 * (1.0 + max_abs(m)) {
        return Err(Error::NumericalDegeneracy(format!(
            "matrix is not positive semidefinite (eigenvalue {min:e})"
        )));
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&roots) * q.transpose())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Symplectic spectrum of a positive definite `2n x 2n` matrix, ascending.
///
/// Uses `A = V^{1/2} Ω V^{1/2}` (real antisymmetric, same spectrum as `Ω V`):
/// the eigenvalues of `AᵀA` are the squared symplectic eigenvalues, each
/// appearing twice.
pub fn symplectic_spectrum(cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n2 = cov.nrows();
    if n2 % 2 != 0 || !cov.is_square() {
        return Err(Error::InvalidArgument(format!(
            "covariance must be 2n x 2n, got {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let root = sym_sqrt(cov)?;
    let a = &root * omega(n2 / 2) * &root;
    let ata = a.transpose() * &a;
    let mut ev: Vec<f64> = SymmetricEigen::new(ata)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev.chunks(2).map(|pair| 0.5 * (pair[0] + pair[1])).collect())
}
