//! Dense complex matrices and the Hermitian / unitary newtypes built on them.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Relative asymmetry accepted when a matrix is declared Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-13;
/// Unitarity defect bound per unit `sqrt(dim)`.
pub const UNITARY_TOL: f64 = 1e-12;

/// JSON literal form `{"rows":N,"cols":M,"re":[...],"im":[...]}`, row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixLiteral {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// Dense row-major complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixLiteral", into = "MatrixLiteral")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl TryFrom<MatrixLiteral> for ComplexMatrix {
    type Error = Error;

    fn try_from(lit: MatrixLiteral) -> Result<Self> {
        let n = lit.rows * lit.cols;
        if lit.re.len() != n || lit.im.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "matrix literal {}x{} needs {} re/im values, got {}/{}",
                lit.rows,
                lit.cols,
                n,
                lit.re.len(),
                lit.im.len()
            )));
        }
        let data = lit
            .re
            .iter()
            .zip(&lit.im)
            .map(|(&re, &im)| C64::new(re, im))
            .collect();
        ComplexMatrix::new(lit.rows, lit.cols, data)
    }
}

impl From<ComplexMatrix> for MatrixLiteral {
    fn from(m: ComplexMatrix) -> Self {
        MatrixLiteral {
            rows: m.rows,
            cols: m.cols,
            re: m.data.iter().map(|z| z.re).collect(),
            im: m.data.iter().map(|z| z.im).collect(),
        }
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_raw(rows, cols, vec![ZERO; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![ONE; n])
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diag(&d)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_raw(rows, cols, data)
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<C64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::ShapeMismatch("columns of unequal length".into()));
        }
        let m = Self::from_fn(rows, cols, |i, j| columns[j][i]);
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn require_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(Error::NonSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    pub fn require_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )))
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self::from_raw(
            self.rows,
            self.cols,
            self.data.iter().map(|&z| f(z)).collect(),
        )
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Largest Euclidean norm over the columns, i.e. `max_j |M e_j|`.
    pub fn max_column_norm(&self) -> f64 {
        (0..self.cols)
            .map(|j| {
                (0..self.rows)
                    .map(|i| self[(i, j)].norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(self.mul_unchecked(rhs))
    }

    fn mul_unchecked(&self, rhs: &Self) -> Self {
        let (n, k, m) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![ZERO; n * m];
        for i in 0..n {
            let row = &mut out[i * m..(i + 1) * m];
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[l * m..(l + 1) * m];
                for (o, b) in row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Self::from_raw(n, m, out)
    }

    /// `self * self^*`, returned as an exactly Hermitian matrix.
    pub fn gram_outer(&self) -> HermitianMatrix {
        HermitianMatrix::hermitian_part(&(self * &self.adjoint()))
    }

    /// `self^* * self`, returned as an exactly Hermitian matrix.
    pub fn gram_inner(&self) -> HermitianMatrix {
        HermitianMatrix::hermitian_part(&(&self.adjoint() * self))
    }

    /// Frobenius distance `|self - other|_F`.
    pub fn distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest off-diagonal modulus.
    pub fn max_off_diagonal(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i != j {
                    worst = worst.max(self[(i, j)].norm());
                }
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Panics on incompatible shapes; use [`ComplexMatrix::try_mul`] for checked products.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "cannot multiply {}x{} by {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        self.mul_unchecked(rhs)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape());
        ComplexMatrix::from_raw(
            self.rows,
            self.cols,
            self.data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape());
        ComplexMatrix::from_raw(
            self.rows,
            self.cols,
            self.data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn neg(self) -> ComplexMatrix {
        self.map(|z| -z)
    }
}

/// Square matrix equal to its conjugate transpose, bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct HermitianMatrix(ComplexMatrix);

impl TryFrom<ComplexMatrix> for HermitianMatrix {
    type Error = Error;

    fn try_from(m: ComplexMatrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<HermitianMatrix> for ComplexMatrix {
    fn from(h: HermitianMatrix) -> Self {
        h.0
    }
}

impl HermitianMatrix {
    /// Accepts `m` if its relative asymmetry is within [`HERMITIAN_TOL`], then
    /// symmetrizes it so that the stored matrix is exactly Hermitian.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let asym = relative_asymmetry(&m)?;
        if asym > HERMITIAN_TOL {
            return Err(Error::NotHermitian(asym));
        }
        Ok(Self::hermitian_part(&m))
    }

    /// `(M + M^*) / 2` for any square `M`.
    pub fn hermitian_part(m: &ComplexMatrix) -> Self {
        assert!(m.is_square(), "Hermitian part of a non-square matrix");
        let n = m.rows();
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = C64::new(m[(i, i)].re, 0.0);
            for j in i + 1..n {
                let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                out[(i, j)] = v;
                out[(j, i)] = v.conj();
            }
        }
        Self(out)
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        Self(ComplexMatrix::from_real_diag(diag))
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(ComplexMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale_real(s))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    /// `s * I - self`.
    pub fn shift_negate(&self, s: f64) -> Self {
        let mut m = -&self.0;
        for i in 0..self.dim() {
            m[(i, i)] += s;
        }
        Self(m)
    }

    /// Linear interpolation `(1 - w) self + w other`, re-symmetrized.
    pub fn lerp(&self, other: &Self, w: f64) -> Self {
        Self::hermitian_part(&(&self.0.scale_real(1.0 - w) + &other.0.scale_real(w)))
    }
}

/// `|M - M^*|_F / |M|_F` (absolute when `M = 0`).
pub fn relative_asymmetry(m: &ComplexMatrix) -> Result<f64> {
    m.require_square()?;
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let norm = m.frobenius_norm();
    let diff = m.distance(&m.adjoint());
    Ok(if norm > 0.0 { diff / norm } else { diff })
}

/// Square matrix with `|U^*U - I|_F <= 1e-12 sqrt(dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct UnitaryMatrix(ComplexMatrix);

impl TryFrom<ComplexMatrix> for UnitaryMatrix {
    type Error = Error;

    fn try_from(m: ComplexMatrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<UnitaryMatrix> for ComplexMatrix {
    fn from(u: UnitaryMatrix) -> Self {
        u.0
    }
}

impl UnitaryMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let n = m.require_square()?;
        let defect = unitarity_defect(&m);
        if defect > UNITARY_TOL * (n as f64).sqrt() {
            return Err(Error::InvalidInput(format!(
                "matrix is not unitary (defect {defect:e})"
            )));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix known to be unitary by construction.
    pub(crate) fn from_raw(m: ComplexMatrix) -> Self {
        debug_assert!(m.is_square());
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0)
    }

    pub fn defect(&self) -> f64 {
        unitarity_defect(&self.0)
    }
}

/// `|U^*U - I|_F` for a square matrix.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let g = &u.adjoint() * u;
    g.distance(&ComplexMatrix::identity(g.rows()))
}

/// `|Q^*Q - I|_F` for a matrix whose columns should be orthonormal.
pub fn orthonormality_defect(q: &ComplexMatrix) -> f64 {
    unitarity_defect(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_roundtrip_is_row_major() {
        let json = r#"{"rows":2,"cols":3,"re":[1,2,3,4,5,6],"im":[0,0,0,0,0,-1]}"#;
        let m: ComplexMatrix = serde_json::from_str(json).unwrap();
        assert_eq!(m[(0, 2)], C64::new(3.0, 0.0));
        assert_eq!(m[(1, 2)], C64::new(6.0, -1.0));
        let back = serde_json::to_string(&m).unwrap();
        assert_eq!(
            back,
            r#"{"rows":2,"cols":3,"re":[1.0,2.0,3.0,4.0,5.0,6.0],"im":[0.0,0.0,0.0,0.0,0.0,-1.0]}"#
        );
    }

    #[test]
    fn literal_rejects_wrong_length() {
        let json = r#"{"rows":2,"cols":2,"re":[1,2,3],"im":[0,0,0,0]}"#;
        assert!(serde_json::from_str::<ComplexMatrix>(json).is_err());
    }

    #[test]
    fn non_finite_entries_rejected() {
        let err = ComplexMatrix::new(1, 1, vec![C64::new(f64::NAN, 0.0)]).unwrap_err();
        assert_eq!(err, Error::NonFinite);
    }

    #[test]
    fn hermitian_part_is_exact() {
        let m = ComplexMatrix::new(
            2,
            2,
            vec![
                C64::new(1.0, 0.3),
                C64::new(0.1, 0.2),
                C64::new(0.1 + 1e-15, -0.2),
                C64::new(2.0, 0.0),
            ],
        )
        .unwrap();
        let h = HermitianMatrix::hermitian_part(&m);
        assert_eq!(h.as_matrix(), &h.as_matrix().adjoint());
        assert_eq!(h.as_matrix()[(0, 0)].im, 0.0);
    }

    #[test]
    fn hermitian_rejects_asymmetric() {
        let m = ComplexMatrix::new(2, 2, vec![ONE, ONE, ZERO, ONE]).unwrap();
        assert!(matches!(
            HermitianMatrix::new(m),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn unitary_rejects_non_unitary() {
        assert!(UnitaryMatrix::new(ComplexMatrix::from_real_diag(&[1.0, 2.0])).is_err());
        assert!(UnitaryMatrix::new(ComplexMatrix::from_diag(&[I, -ONE])).is_ok());
    }

    #[test]
    fn product_shapes() {
        let a = ComplexMatrix::zeros(2, 3);
        let b = ComplexMatrix::zeros(2, 3);
        assert!(matches!(a.try_mul(&b), Err(Error::ShapeMismatch(_))));
        assert_eq!(a.try_mul(&b.adjoint()).unwrap().shape(), (2, 2));
    }
}
