//! Dense complex linear algebra: Hermitian spectral calculus, the polar
//! decomposition, unitary exponentials and the metric / symplectic pairings on
//! the space of operators.

mod eigen;
mod matrix;

pub use eigen::{hermitian_eigendecompose, HermitianEigen};
pub use matrix::{
    orthonormality_defect, relative_asymmetry, unitarity_defect, ComplexMatrix, HermitianMatrix,
    MatrixLiteral, UnitaryMatrix, C64, HERMITIAN_TOL, I, ONE, UNITARY_TOL, ZERO,
};

use crate::error::{Error, Result};

/// Default relative floor for inversions.
pub const DEFAULT_PD_FLOOR: f64 = 1e-12;

/// Eigenvalues below `-NOT_PSD_TOL * max` are treated as genuinely negative.
const NOT_PSD_TOL: f64 = 1e-10;

/// Unique positive semidefinite square root.
pub fn psd_sqrt(m: &HermitianMatrix) -> Result<HermitianMatrix> {
    let eig = hermitian_eigendecompose(m)?;
    psd_sqrt_from(&eig)
}

fn psd_sqrt_from(eig: &HermitianEigen) -> Result<HermitianMatrix> {
    let (min, max) = (eig.min(), eig.max());
    if min < -NOT_PSD_TOL * max.max(0.0) {
        return Err(Error::NotPsd { min, max });
    }
    Ok(eig.apply_real(|l| l.max(0.0).sqrt()))
}

/// Inverse of a positive definite matrix. Fails with `NearSingular` unless
/// `min eigenvalue > floor * max eigenvalue`.
pub fn psd_inverse(m: &HermitianMatrix, floor: f64) -> Result<HermitianMatrix> {
    let eig = hermitian_eigendecompose(m)?;
    check_floor(&eig, floor)?;
    Ok(eig.apply_real(|l| 1.0 / l))
}

fn check_floor(eig: &HermitianEigen, floor: f64) -> Result<()> {
    let (min, max) = (eig.min(), eig.max());
    if max <= 0.0 || min <= floor * max {
        return Err(Error::NearSingular {
            ratio: if max > 0.0 { min / max } else { 0.0 },
            floor,
            last_good_t: None,
        });
    }
    Ok(())
}

/// Polar factors `K = R U` with `R = sqrt(K K^*)` positive definite and `U` unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarFactors {
    pub radial: HermitianMatrix,
    pub unitary: UnitaryMatrix,
}

impl PolarFactors {
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.radial.as_matrix() * self.unitary.as_matrix()
    }
}

/// Left polar decomposition of a square full-rank matrix. Requires the
/// smallest singular value to exceed `1e-12` times the largest.
pub fn polar_decompose(k: &ComplexMatrix) -> Result<PolarFactors> {
    polar_decompose_with_floor(k, DEFAULT_PD_FLOOR)
}

/// As [`polar_decompose`], with `floor` bounding the singular value ratio.
pub fn polar_decompose_with_floor(k: &ComplexMatrix, floor: f64) -> Result<PolarFactors> {
    k.require_square()?;
    if !k.is_finite() {
        return Err(Error::NonFinite);
    }
    let eig = hermitian_eigendecompose(&k.gram_outer())?;
    // Singular values are square roots of the eigenvalues of K K^*.
    check_floor(&eig, floor * floor)?;
    let radial = eig.apply_real(f64::sqrt);
    let radial_inv = eig.apply_real(|l| 1.0 / l.sqrt());
    let unitary = UnitaryMatrix::from_raw(radial_inv.as_matrix() * k);
    Ok(PolarFactors { radial, unitary })
}

/// `exp(i * scale * A)` through the spectral decomposition of `A`.
pub fn unitary_exponential(a: &HermitianMatrix, scale: f64) -> Result<UnitaryMatrix> {
    if !scale.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(hermitian_eigendecompose(a)?.exp_i(scale))
}

/// The Hermitian metric `<L|N> = tr(L N^*)` with its real (Riemannian) and
/// imaginary (symplectic) parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pairing {
    pub hermitian: C64,
    pub riemannian: f64,
    pub symplectic: f64,
}

pub fn pairing(l: &ComplexMatrix, n: &ComplexMatrix) -> Result<Pairing> {
    l.require_same_shape(n)?;
    let mut re = 0.0;
    let mut im = 0.0;
    for (a, b) in l.data().iter().zip(n.data()) {
        // a * conj(b), expanded so that swapping the arguments negates the
        // imaginary part exactly.
        re += a.re * b.re + a.im * b.im;
        im += a.im * b.re - a.re * b.im;
    }
    Ok(Pairing {
        hermitian: C64::new(re, im),
        riemannian: re,
        symplectic: im,
    })
}

/// `(K^*)^{-1} = (K K^*)^{-1} K`, routed through [`psd_inverse`]. `floor`
/// bounds the singular value ratio of `K`.
pub fn inverse_adjoint(k: &ComplexMatrix, floor: f64) -> Result<ComplexMatrix> {
    k.require_square()?;
    let inv = psd_inverse(&k.gram_outer(), floor * floor)?;
    Ok(inv.as_matrix() * k)
}
