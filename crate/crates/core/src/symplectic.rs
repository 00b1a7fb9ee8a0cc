//! Symplectic transforms: lossless Gaussian optics acting on quadratures.

use std::ops::Mul;

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::linalg;

/// Construction tolerance for `S Ω Sᵀ = Ω`, relative to `max(1, ‖S‖²_max)`.
const CHECK_TOL: f64 = 1e-10;

/// A real `2N x 2N` matrix with `S Ω Sᵀ = Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticTransform {
    matrix: DMatrix<f64>,
}

impl SymplecticTransform {
    /// Validates the symplectic condition before wrapping `matrix`.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() % 2 != 0 || matrix.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "symplectic matrix must be 2n x 2n, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let t = Self { matrix };
        let dev = t.symplectic_deviation();
        let scale = linalg::max_abs(&t.matrix).powi(2).max(1.0);
        if !(dev <= CHECK_TOL * scale) {
            return Err(Error::NotSymplectic(dev));
        }
        Ok(t)
    }

    pub fn identity(modes: usize) -> Self {
        Self {
            matrix: DMatrix::identity(2 * modes, 2 * modes),
        }
    }

    pub fn num_modes(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `‖S Ω Sᵀ − Ω‖_max`.
    pub fn symplectic_deviation(&self) -> f64 {
        let w = linalg::omega(self.num_modes());
        linalg::max_abs_diff(&(&self.matrix * &w * self.matrix.transpose()), &w)
    }

    /// `S⁻¹ = −Ω Sᵀ Ω`, exact for symplectic matrices.
    pub fn inverse(&self) -> Self {
        let w = linalg::omega(self.num_modes());
        Self {
            matrix: -(&w * self.matrix.transpose() * &w),
        }
    }

    /// Real image of a passive unitary acting on annihilation operators:
    /// each entry `U_jk` becomes the block `[[Re, −Im], [Im, Re]]`.
    pub fn from_unitary(u: &DMatrix<Complex<f64>>) -> Result<Self> {
        if !u.is_square() || u.nrows() == 0 {
            return Err(Error::InvalidArgument("unitary must be square and non-empty".into()));
        }
        let n = u.nrows();
        let gram = u.adjoint() * u;
        let dev = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| {
                let target = if i == j { 1.0 } else { 0.0 };
                (gram[(i, j)] - Complex::new(target, 0.0)).norm()
            })
            .fold(0.0, f64::max);
        if dev > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "matrix is not unitary (deviation {dev:e})"
            )));
        }
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            for k in 0..n {
                let z = u[(j, k)];
                m[(2 * j, 2 * k)] = z.re;
                m[(2 * j, 2 * k + 1)] = -z.im;
                m[(2 * j + 1, 2 * k)] = z.im;
                m[(2 * j + 1, 2 * k + 1)] = z.re;
            }
        }
        Ok(Self { matrix: m })
    }

    /// Places this transform on `modes` of an `n`-mode register, identity
    /// elsewhere. `modes[i]` receives this transform's mode `i`.
    pub fn embed(&self, n: usize, modes: &[usize]) -> Result<Self> {
        if modes.len() != self.num_modes() {
            return Err(Error::DimensionMismatch {
                expected: self.num_modes(),
                found: modes.len(),
            });
        }
        for (i, &m) in modes.iter().enumerate() {
            if m >= n || modes[..i].contains(&m) {
                return Err(Error::InvalidArgument(format!("bad target mode {m} for {n} modes")));
            }
        }
        let mut out = DMatrix::identity(2 * n, 2 * n);
        for (a, &ma) in modes.iter().enumerate() {
            for (b, &mb) in modes.iter().enumerate() {
                for (da, db) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    out[(2 * ma + da, 2 * mb + db)] = self.matrix[(2 * a + da, 2 * b + db)];
                }
            }
        }
        Ok(Self { matrix: out })
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }
}

/// Matrix product: `a * b` applies `b` first.
impl Mul for &SymplecticTransform {
    type Output = SymplecticTransform;

    fn mul(self, rhs: &SymplecticTransform) -> SymplecticTransform {
        assert_eq!(self.matrix.nrows(), rhs.matrix.nrows(), "mode count mismatch");
        SymplecticTransform {
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

impl Mul for SymplecticTransform {
    type Output = SymplecticTransform;

    fn mul(self, rhs: SymplecticTransform) -> SymplecticTransform {
        &self * &rhs
    }
}

fn check_mode(n: usize, k: usize) -> Result<()> {
    if k >= n {
        return Err(Error::InvalidArgument(format!("mode {k} out of range for {n} modes")));
    }
    Ok(())
}

/// The 2x2 unitary `[[e^{iφ} sinθ, e^{iφ} cosθ], [cosθ, −sinθ]]`.
///
/// At `φ = 0` this is `c_k → c_k sinθ + c_l cosθ`, `c_l → c_k cosθ − c_l sinθ`.
pub fn beam_splitter_unitary(theta: f64, phi: f64) -> DMatrix<Complex<f64>> {
    let (s, c) = theta.sin_cos();
    let e = Complex::from_polar(1.0, phi);
    DMatrix::from_row_slice(
        2,
        2,
        &[e * s, e * c, Complex::new(c, 0.0), Complex::new(-s, 0.0)],
    )
}

pub fn beam_splitter(n: usize, k: usize, l: usize, theta: f64, phi: f64) -> Result<SymplecticTransform> {
    check_mode(n, k)?;
    check_mode(n, l)?;
    if k == l {
        return Err(Error::InvalidArgument("beam splitter needs two distinct modes".into()));
    }
    if !(theta.is_finite() && phi.is_finite()) {
        return Err(Error::InvalidArgument("non-finite beam splitter angle".into()));
    }
    SymplecticTransform::from_unitary(&beam_splitter_unitary(theta, phi))?.embed(n, &[k, l])
}

/// `x → e^{r} x`, `p → e^{−r} p` on mode `k`.
pub fn squeezer(n: usize, k: usize, r: f64) -> Result<SymplecticTransform> {
    check_mode(n, k)?;
    if !r.is_finite() {
        return Err(Error::InvalidArgument("non-finite squeezing".into()));
    }
    let mut m = DMatrix::identity(2 * n, 2 * n);
    m[(2 * k, 2 * k)] = r.exp();
    m[(2 * k + 1, 2 * k + 1)] = (-r).exp();
    Ok(SymplecticTransform::from_matrix_unchecked(m))
}

/// Rotation by `beta` in the `(x_k, p_k)` plane (`a → e^{iβ} a`).
pub fn phase_shift(n: usize, k: usize, beta: f64) -> Result<SymplecticTransform> {
    check_mode(n, k)?;
    let (s, c) = beta.sin_cos();
    let mut m = DMatrix::identity(2 * n, 2 * n);
    m[(2 * k, 2 * k)] = c;
    m[(2 * k, 2 * k + 1)] = -s;
    m[(2 * k + 1, 2 * k)] = s;
    m[(2 * k + 1, 2 * k + 1)] = c;
    Ok(SymplecticTransform::from_matrix_unchecked(m))
}

/// Unitary of the M-splitter cascade
/// `B_{M−1,M}(sin⁻¹ 1/√2) ⋯ B_{2,3}(sin⁻¹ 1/√(M−1)) B_{1,2}(sin⁻¹ 1/√M)`,
/// all phase-free; `B_{1,2}` acts first.
pub fn m_splitter_unitary(m: usize) -> Result<DMatrix<Complex<f64>>> {
    if m == 0 {
        return Err(Error::InvalidArgument("M-splitter needs at least one mode".into()));
    }
    let mut u = DMatrix::<Complex<f64>>::identity(m, m);
    for k in 0..m.saturating_sub(1) {
        let theta = (1.0 / ((m - k) as f64).sqrt()).asin();
        let b = beam_splitter_unitary(theta, 0.0);
        let mut full = DMatrix::<Complex<f64>>::identity(m, m);
        for (a, ia) in [k, k + 1].iter().enumerate() {
            for (bb, ib) in [k, k + 1].iter().enumerate() {
                full[(*ia, *ib)] = b[(a, bb)];
            }
        }
        u = full * u;
    }
    Ok(u)
}

pub fn m_splitter(m: usize) -> Result<SymplecticTransform> {
    SymplecticTransform::from_unitary(&m_splitter_unitary(m)?)
}
