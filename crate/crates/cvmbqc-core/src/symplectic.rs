//! Symplectic matrices of Gaussian unitaries in xxpp ordering.
//!
//! A quadrature vector on `n` modes is `(x_1..x_n, p_1..p_n)`. Mode indices
//! are zero-based throughout the crate.

use alloc::vec::Vec;
use core::ops::Mul;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default entrywise tolerance for [`check_symplectic`].
pub const DEFAULT_TOL: f64 = 1e-10;

/// Elementary Gaussian operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum Gaussian {
    Identity,
    /// Phase rotation by an angle in radians.
    Rotation(f64),
    /// Squeezer `diag(1/s, s)`; `s` must be nonzero.
    Squeeze(f64),
    /// Shear `p -> p + g x`.
    Shear(f64),
    /// Controlled-Z of weight `g` between two modes.
    Cz(f64),
    /// Balanced beam splitter.
    BeamSplitter,
}

impl Gaussian {
    pub fn n_modes(&self) -> usize {
        match self {
            Gaussian::Cz(_) | Gaussian::BeamSplitter => 2,
            _ => 1,
        }
    }
}

/// A real `2n x 2n` matrix acting on xxpp quadratures.
///
/// The symplectic condition is checked by the validating constructor and by
/// [`check_symplectic`]; products of symplectic matrices stay symplectic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymplecticMatrix(#[serde(with = "crate::matrix_serde")] DMatrix<f64>);

impl SymplecticMatrix {
    /// Wraps `m` after checking the symplectic condition at `tol`.
    pub fn new(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        if !check_symplectic(&m, tol)? {
            return Err(Error::InvalidParameter("matrix is not symplectic".into()));
        }
        Ok(Self(m))
    }

    /// Wraps `m` without checking. The caller vouches for the invariant.
    pub fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn identity(n_modes: usize) -> Self {
        Self(DMatrix::identity(2 * n_modes, 2 * n_modes))
    }

    pub fn n_modes(&self) -> usize {
        self.0.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Inverse via `-Ω Sᵀ Ω`, exact for symplectic input.
    pub fn inverse(&self) -> Self {
        let om = omega(self.n_modes());
        Self(-(&om * self.0.transpose() * &om))
    }

    pub fn is_symplectic(&self, tol: f64) -> bool {
        check_symplectic(&self.0, tol).unwrap_or(false)
    }

    /// Direct sum `self ⊕ other`, with `self` on the leading modes.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let (a, b) = (self.n_modes(), other.n_modes());
        let n = a + b;
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        let place = |out: &mut DMatrix<f64>, m: &DMatrix<f64>, k: usize, off: usize| {
            for i in 0..2 * k {
                for j in 0..2 * k {
                    let oi = if i < k { off + i } else { n + off + i - k };
                    let oj = if j < k { off + j } else { n + off + j - k };
                    out[(oi, oj)] = m[(i, j)];
                }
            }
        };
        place(&mut out, &self.0, a, 0);
        place(&mut out, &other.0, b, a);
        Self(out)
    }

    /// Entrywise 1-norm distance `Σ |a_ij - b_ij|`.
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        if self.0.shape() != other.0.shape() {
            return Err(Error::Dimension { expected: self.0.nrows(), found: other.0.nrows() });
        }
        Ok(self.0.iter().zip(other.0.iter()).map(|(a, b)| libm::fabs(a - b)).sum())
    }
}

impl Mul for &SymplecticMatrix {
    type Output = SymplecticMatrix;

    fn mul(self, rhs: Self) -> SymplecticMatrix {
        SymplecticMatrix(&self.0 * &rhs.0)
    }
}

/// The symplectic form `[[0, I], [-I, 0]]` on `n` modes.
pub fn omega(n: usize) -> DMatrix<f64> {
    let mut om = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        om[(i, n + i)] = 1.0;
        om[(n + i, i)] = -1.0;
    }
    om
}

/// Builds the matrix of an elementary operation.
pub fn gaussian_unitary(kind: Gaussian) -> Result<SymplecticMatrix> {
    let m = match kind {
        Gaussian::Identity => DMatrix::identity(2, 2),
        Gaussian::Rotation(theta) => {
            let (s, c) = (libm::sin(theta), libm::cos(theta));
            DMatrix::from_row_slice(2, 2, &[c, s, -s, c])
        }
        Gaussian::Squeeze(s) => {
            if s == 0.0 || !s.is_finite() {
                return Err(Error::InvalidParameter("squeeze parameter must be finite and nonzero".into()));
            }
            DMatrix::from_row_slice(2, 2, &[1.0 / s, 0.0, 0.0, s])
        }
        Gaussian::Shear(g) => DMatrix::from_row_slice(2, 2, &[1.0, 0.0, g, 1.0]),
        Gaussian::Cz(g) => {
            let mut m = DMatrix::identity(4, 4);
            m[(2, 1)] = g;
            m[(3, 0)] = g;
            m
        }
        Gaussian::BeamSplitter => {
            let h = core::f64::consts::FRAC_1_SQRT_2;
            #[rustfmt::skip]
            let m = DMatrix::from_row_slice(4, 4, &[
                h, -h, 0.0, 0.0,
                h, h, 0.0, 0.0,
                0.0, 0.0, h, -h,
                0.0, 0.0, h, h,
            ]);
            m
        }
    };
    Ok(SymplecticMatrix(m))
}

/// Places `small` on `target_modes` of an `n_total`-mode identity.
///
/// `target_modes[k]` receives the k-th mode of `small`.
pub fn embed(small: &SymplecticMatrix, target_modes: &[usize], n_total: usize) -> Result<SymplecticMatrix> {
    let k = small.n_modes();
    if target_modes.len() != k {
        return Err(Error::Dimension { expected: k, found: target_modes.len() });
    }
    check_modes(target_modes, n_total)?;
    let mut out = DMatrix::identity(2 * n_total, 2 * n_total);
    let pos = |i: usize| {
        if i < k {
            target_modes[i]
        } else {
            n_total + target_modes[i - k]
        }
    };
    for i in 0..2 * k {
        for j in 0..2 * k {
            out[(pos(i), pos(j))] = small.0[(i, j)];
        }
    }
    Ok(SymplecticMatrix(out))
}

pub(crate) fn check_modes(modes: &[usize], n_modes: usize) -> Result<()> {
    for (i, &m) in modes.iter().enumerate() {
        if m >= n_modes {
            return Err(Error::IndexOutOfRange { index: m, n_modes });
        }
        if modes[..i].contains(&m) {
            return Err(Error::DuplicateMode(m));
        }
    }
    Ok(())
}

/// Product of `factors` where the first listed acts first.
pub fn compose(factors: &[SymplecticMatrix]) -> Result<SymplecticMatrix> {
    let first = factors
        .first()
        .ok_or_else(|| Error::InvalidParameter("compose needs at least one factor".into()))?;
    let dim = first.0.nrows();
    let mut acc = first.0.clone();
    for f in &factors[1..] {
        if f.0.nrows() != dim {
            return Err(Error::Dimension { expected: dim, found: f.0.nrows() });
        }
        acc = &f.0 * acc;
    }
    Ok(SymplecticMatrix(acc))
}

/// True when `max |S Ω Sᵀ - Ω| <= tol`.
pub fn check_symplectic(m: &DMatrix<f64>, tol: f64) -> Result<bool> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let (r, c) = m.shape();
    if r != c {
        return Err(Error::Dimension { expected: r, found: c });
    }
    if r % 2 != 0 {
        return Err(Error::Dimension { expected: r + 1, found: r });
    }
    let om = omega(r / 2);
    let d = m * &om * m.transpose() - om;
    Ok(d.iter().all(|v| libm::fabs(*v) <= tol))
}

/// `a ⊕ b` for two single-mode gates.
pub fn two_mode(a: &SymplecticMatrix, b: &SymplecticMatrix) -> SymplecticMatrix {
    a.direct_sum(b)
}

/// Row-major entries, handy for tests and reports.
pub fn entries(m: &SymplecticMatrix) -> Vec<f64> {
    let d = &m.0;
    (0..d.nrows()).flat_map(|i| (0..d.ncols()).map(move |j| d[(i, j)])).collect()
}
