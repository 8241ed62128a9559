//! Dense complex matrices and the handful of primitives the rest of the
//! crate is built on: 2x2 determinants, permanents, unitarity checks,
//! Hermitian exponentials and a phase-insensitive overlap between unitaries.

use std::fmt;
use std::ops::{Index, Mul};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest dimension accepted by [`permanent`].
pub const MAX_PERMANENT_DIM: usize = 12;

/// Absolute tolerance for the Hermiticity check in [`herm_exp`].
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Square matrix of finite complex amplitudes.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn new(inner: DMatrix<C64>) -> Result<Self> {
        if inner.nrows() != inner.ncols() {
            return Err(Error::Dimension { expected: inner.nrows(), got: inner.ncols() });
        }
        if inner.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::validation("matrix has non-finite entries"));
        }
        Ok(Self(inner))
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(Error::Dimension { expected: n, got: row.len() });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    /// Builds a matrix from an entry function. Entries must be finite.
    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        let m = DMatrix::from_fn(n, n, f);
        debug_assert!(m.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, |r, c| if r == c { entries[r] } else { C64::new(0.0, 0.0) })
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn set(&mut self, r: usize, c: usize, value: C64) {
        self.0[(r, c)] = value;
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "max_abs_diff on matrices of different size");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|r| (r..n).all(|c| (self.0[(r, c)] - self.0[(c, r)].conj()).norm() <= tol))
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.0.clone().svd(false, false).singular_values.max()
    }

    /// Moduli squared, `|m_rc|^2`, row-major.
    pub fn abs_sqr(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|r| (0..n).map(|c| self.0[(r, c)].norm_sqr()).collect()).collect()
    }

    /// The 2x2 (or k x k) matrix made of the given rows and columns.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        assert_eq!(rows.len(), cols.len(), "select needs a square selection");
        Self::from_fn(rows.len(), |r, c| self.0[(rows[r], cols[c])])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim(), rhs.dim(), "matrix product of different sizes");
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Mul for ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        &self * &rhs
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim(), self.dim())?;
        for r in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|c| {
                    let z = self.0[(r, c)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

pub fn determinant2(m: &ComplexMatrix) -> Result<C64> {
    if m.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: m.dim() });
    }
    Ok(m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)])
}

/// Permanent by direct permutation sum (dim <= 4) or Ryser's formula with
/// Gray-code column updates (5 <= dim <= 12).
pub fn permanent(m: &ComplexMatrix) -> Result<C64> {
    let n = m.dim();
    if n > MAX_PERMANENT_DIM {
        return Err(Error::Size { got: n, max: MAX_PERMANENT_DIM });
    }
    Ok(if n <= 4 { permanent_direct(m) } else { permanent_ryser(m) })
}

fn permanent_direct(m: &ComplexMatrix) -> C64 {
    fn go(m: &ComplexMatrix, row: usize, used: &mut [bool]) -> C64 {
        let n = m.dim();
        if row == n {
            return C64::new(1.0, 0.0);
        }
        let mut acc = C64::new(0.0, 0.0);
        for c in 0..n {
            if !used[c] {
                used[c] = true;
                acc += m[(row, c)] * go(m, row + 1, used);
                used[c] = false;
            }
        }
        acc
    }
    go(m, 0, &mut vec![false; m.dim()])
}

fn permanent_ryser(m: &ComplexMatrix) -> C64 {
    let n = m.dim();
    let mut row_sums = vec![C64::new(0.0, 0.0); n];
    let mut total = C64::new(0.0, 0.0);
    let mut subset: u32 = 0;
    for k in 1u32..(1u32 << n) {
        // Gray code: flip the lowest set bit of k.
        let col = k.trailing_zeros() as usize;
        let bit = 1u32 << col;
        let sign = if subset & bit == 0 { 1.0 } else { -1.0 };
        subset ^= bit;
        for (r, s) in row_sums.iter_mut().enumerate() {
            *s += m[(r, col)] * sign;
        }
        let prod: C64 = row_sums.iter().product();
        let parity = if (n - subset.count_ones() as usize).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += prod * parity;
    }
    total
}

/// True iff `max |(m^dagger m - I)_rc| <= tol`.
pub fn is_unitary(m: &ComplexMatrix, tol: f64) -> bool {
    let gram = &m.dagger() * m;
    gram.max_abs_diff(&ComplexMatrix::identity(m.dim())) <= tol
}

/// `exp(-i t h)` for Hermitian `h`, via the spectral decomposition.
pub fn herm_exp(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    if !h.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::validation("herm_exp requires a Hermitian matrix"));
    }
    let n = h.dim();
    if n == 0 {
        return Ok(ComplexMatrix::identity(0));
    }
    let eig = h.inner().clone().symmetric_eigen();
    let vecs = &eig.eigenvectors;
    let phases: Vec<C64> = eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -t * l)).collect();
    let scaled = DMatrix::from_fn(n, n, |r, c| vecs[(r, c)] * phases[c]);
    Ok(ComplexMatrix(scaled * vecs.adjoint()))
}

/// `|Tr(u^dagger v)| / dim`: one for identical unitaries, blind to a global phase.
pub fn unitary_fidelity(u: &ComplexMatrix, v: &ComplexMatrix) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::Dimension { expected: u.dim(), got: v.dim() });
    }
    if u.dim() == 0 {
        return Ok(1.0);
    }
    let tr: C64 = (0..u.dim())
        .flat_map(|r| (0..u.dim()).map(move |c| (r, c)))
        .map(|(r, c)| u[(r, c)].conj() * v[(r, c)])
        .sum();
    Ok((tr.norm() / u.dim() as f64).min(1.0))
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // Fix the phases of R's diagonal so the distribution is Haar.
    let fixed = DMatrix::from_fn(n, n, |row, col| {
        let d = r[(col, col)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        q[(row, col)] * ph
    });
    ComplexMatrix(fixed)
}

/// Hermitian matrix with independent Gaussian entries, for tests and sweeps.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    ComplexMatrix((&g + g.adjoint()) * C64::new(0.5, 0.0))
}
