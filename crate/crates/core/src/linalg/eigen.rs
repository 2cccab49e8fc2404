//! Cyclic complex Jacobi eigensolver for Hermitian matrices.
//!
//! Each rotation first removes the phase of the pivot `a_pq`, then applies the
//! classical real Jacobi rotation. Sweeps stop once the off-diagonal Frobenius
//! mass drops below `1e-14 |M|_F`.

use std::cmp::Ordering;

use super::matrix::{ComplexMatrix, HermitianMatrix, UnitaryMatrix, C64, ZERO};
use crate::error::{Error, Result};

const OFF_DIAGONAL_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 100;
/// Eigenvalues closer than this (relative to the spectral radius) are
/// treated as degenerate when ordering eigenvectors.
const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns, in the order of `values`.
    pub vectors: UnitaryMatrix,
}

impl HermitianEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `Q diag(f(lambda)) Q^*`.
    pub fn apply(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let q = self.vectors.as_matrix();
        let n = self.dim();
        let weights: Vec<C64> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for (k, w) in weights.iter().enumerate() {
                    acc += q[(i, k)] * w * q[(j, k)].conj();
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// `Q diag(f(lambda)) Q^*` for a real function, returned exactly Hermitian.
    pub fn apply_real(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        HermitianMatrix::hermitian_part(&self.apply(|l| C64::new(f(l), 0.0)))
    }

    /// `exp(i * scale * M)`.
    pub fn exp_i(&self, scale: f64) -> UnitaryMatrix {
        if scale == 0.0 {
            return UnitaryMatrix::identity(self.dim());
        }
        UnitaryMatrix::from_raw(self.apply(|l| C64::from_polar(1.0, scale * l)))
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply(|l| C64::new(l, 0.0))
    }
}

/// Eigen-decomposes a Hermitian matrix: `M = Q diag(lambda) Q^*` with `lambda`
/// ascending. Output is a deterministic function of the input.
pub fn hermitian_eigendecompose(m: &HermitianMatrix) -> Result<HermitianEigen> {
    let a = m.as_matrix();
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = m.dim();
    let mut work: Vec<C64> = a.data().to_vec();
    let mut vecs: Vec<C64> = ComplexMatrix::identity(n).data().to_vec();
    jacobi_sweeps(&mut work, &mut vecs, n, a.frobenius_norm());

    let values: Vec<f64> = (0..n).map(|i| work[i * n + i].re).collect();
    let mut columns: Vec<Vec<C64>> = (0..n)
        .map(|j| (0..n).map(|i| vecs[i * n + j]).collect())
        .collect();
    for c in &mut columns {
        normalize_phase(c);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| values[x].total_cmp(&values[y]));
    let scale = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tie = DEGENERACY_TOL * scale.max(f64::MIN_POSITIVE);
    // Within each cluster of (numerically) equal eigenvalues, order the
    // eigenvectors lexicographically so the frame is reproducible.
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] - values[order[end - 1]] <= tie {
            end += 1;
        }
        order[start..end].sort_by(|&x, &y| lexicographic(&columns[x], &columns[y]));
        start = end;
    }

    let sorted_values = order.iter().map(|&k| values[k]).collect();
    let sorted_columns: Vec<Vec<C64>> = order.iter().map(|&k| columns[k].clone()).collect();
    let q = ComplexMatrix::from_columns(&sorted_columns)?;
    Ok(HermitianEigen {
        values: sorted_values,
        vectors: UnitaryMatrix::from_raw(q),
    })
}

fn jacobi_sweeps(a: &mut [C64], v: &mut [C64], n: usize, norm: f64) {
    if n < 2 || norm == 0.0 {
        return;
    }
    let tol = OFF_DIAGONAL_TOL * norm;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_mass(a, n) <= tol {
            return;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(a, v, n, p, q);
            }
        }
    }
    log::warn!("Jacobi eigensolver hit the sweep limit without meeting tolerance");
}

fn off_diagonal_mass(a: &[C64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Annihilates `a[p][q]` with `A <- J^* A J`, `V <- V J`, where
/// `J = [[c, s e], [-s conj(e), c]]` on the `(p, q)` plane and `e = a_pq / |a_pq|`.
fn rotate(a: &mut [C64], v: &mut [C64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    let g = apq.norm();
    if g == 0.0 {
        return;
    }
    let e = apq / g;
    let app = a[p * n + p].re;
    let aqq = a[q * n + q].re;
    let theta = (aqq - app) / (2.0 * g);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let se = e * s;
    let sec = se.conj();

    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = akp * c - akq * sec;
        a[k * n + q] = akp * se + akq * c;
    }
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = apk * c - aqk * se;
        a[q * n + k] = apk * sec + aqk * c;
    }
    a[p * n + q] = ZERO;
    a[q * n + p] = ZERO;
    a[p * n + p] = C64::new(a[p * n + p].re, 0.0);
    a[q * n + q] = C64::new(a[q * n + q].re, 0.0);

    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = vkp * c - vkq * sec;
        v[k * n + q] = vkp * se + vkq * c;
    }
}

/// Rotates a unit vector so its first non-negligible entry is real positive.
fn normalize_phase(c: &mut [C64]) {
    let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let Some(lead) = c.iter().position(|z| z.norm() > 1e-10 * norm) else {
        return;
    };
    let modulus = c[lead].norm();
    let phase = c[lead].conj() / modulus;
    for z in c.iter_mut() {
        *z *= phase;
    }
    c[lead] = C64::new(modulus, 0.0);
}

fn lexicographic(x: &[C64], y: &[C64]) -> Ordering {
    for (a, b) in x.iter().zip(y) {
        let o = a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}
