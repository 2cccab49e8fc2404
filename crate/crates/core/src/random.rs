//! Seeded generators for test matrices and scenarios.
//!
//! Everything is driven by a [`ChaCha8Rng`], so a seed reproduces the same
//! draws on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{hermitian_eigendecompose, ComplexMatrix, HermitianMatrix, UnitaryMatrix, C64};
use crate::scenario::{FieldProfile, HermitianProfile, ScenarioConfig};

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit_complex(rng: &mut impl Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Dense matrix with real and imaginary parts uniform in `[-1, 1)`.
pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| unit_complex(rng))
}

/// `(X + X*) / 2` for a uniform `X`.
pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> HermitianMatrix {
    HermitianMatrix::hermitian_part(&random_matrix(rng, n, n))
}

/// `exp(iπX)` for a random Hermitian `X`; spreads phases over the circle.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> UnitaryMatrix {
    let x = random_hermitian(rng, n);
    hermitian_eigendecompose(&x)
        .expect("finite random matrix")
        .exp_i(std::f64::consts::PI)
}

/// `rows × cols` matrix with orthonormal columns (modified Gram–Schmidt on a
/// uniform draw, repeated until well conditioned).
pub fn random_orthonormal(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    assert!(
        cols <= rows,
        "cannot fit {cols} orthonormal columns in dimension {rows}"
    );
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(cols);
    while basis.len() < cols {
        let mut v: Vec<C64> = (0..rows).map(|_| unit_complex(rng)).collect();
        for _ in 0..2 {
            for q in &basis {
                let dot: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= dot * qi;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-3 {
            basis.push(v.into_iter().map(|z| z / norm).collect());
        }
    }
    ComplexMatrix::from_columns(&basis).expect("columns share a length")
}

/// Hermitian with spectrum drawn uniformly from `[lo, hi]`.
pub fn random_positive_definite(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> HermitianMatrix {
    let q = random_unitary(rng, n);
    let eig: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    let d = ComplexMatrix::from_real_diag(&eig);
    HermitianMatrix::hermitian_part(&(&(q.as_matrix() * &d) * &q.adjoint().into_matrix()))
}

/// `U diag(s) V` with singular values `s` uniform in `[lo, hi]`.
pub fn random_invertible(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> ComplexMatrix {
    let u = random_unitary(rng, n);
    let v = random_unitary(rng, n);
    let s: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    &(u.as_matrix() * &ComplexMatrix::from_real_diag(&s)) * v.as_matrix()
}

/// Sinusoidal field with a positive offset, so `B` never vanishes.
pub fn random_sinusoid(rng: &mut impl Rng) -> FieldProfile {
    FieldProfile::Sinusoid {
        amplitude: rng.gen_range(0.1..0.5),
        frequency: rng.gen_range(0.2..1.0),
        phase: rng.gen_range(0.0..std::f64::consts::TAU),
        offset: rng.gen_range(0.5..1.0),
    }
}

/// Time-dependent scenario on `[0, t_end]`: `H` ramps linearly from one
/// positive definite matrix towards another, `B` is sinusoidal, and `K₀` has
/// singular values in `[0.5, 1.5]`.
pub fn random_scenario(rng: &mut impl Rng, n: usize, t_end: f64, dt: f64) -> ScenarioConfig {
    let h0 = random_positive_definite(rng, n, 0.5, 2.0);
    let target = random_positive_definite(rng, n, 0.5, 2.0);
    let h1 = h0.scale(0.8).add(&target.scale(0.2));
    ScenarioConfig {
        hbar: 1.0,
        hamiltonian: HermitianProfile::ramp(h0, h1, 0.0, t_end),
        field: random_sinusoid(rng),
        initial_k: random_invertible(rng, n, 0.5, 1.5),
        t_end,
        dt,
        output_stride: 1,
        pd_floor: crate::linalg::DEFAULT_PD_FLOOR,
    }
}

/// Constant-coefficient counterpart of [`random_scenario`].
pub fn random_constant_scenario(
    rng: &mut impl Rng,
    n: usize,
    t_end: f64,
    dt: f64,
) -> ScenarioConfig {
    ScenarioConfig {
        hbar: 1.0,
        hamiltonian: HermitianProfile::constant(random_positive_definite(rng, n, 0.5, 2.0)),
        field: FieldProfile::constant(rng.gen_range(0.5..1.5)),
        initial_k: random_invertible(rng, n, 0.5, 1.5),
        t_end,
        dt,
        output_stride: 1,
        pd_floor: crate::linalg::DEFAULT_PD_FLOOR,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_defect;
    use crate::scenario::validate_scenario;

    #[test]
    fn same_seed_same_draw() {
        let a = random_matrix(&mut rng_from_seed(7), 3, 2);
        let b = random_matrix(&mut rng_from_seed(7), 3, 2);
        assert_eq!(a, b);
    }

    #[test]
    fn generators_meet_their_contracts() {
        let mut rng = rng_from_seed(1);
        for n in 1..=5 {
            assert!(random_unitary(&mut rng, n).defect() < 1e-12);
            assert!(orthonormality_defect(&random_orthonormal(&mut rng, 8, n.min(8))) < 1e-12);
            let pd =
                hermitian_eigendecompose(&random_positive_definite(&mut rng, n, 0.5, 2.0)).unwrap();
            assert!(pd.min() > 0.5 - 1e-12 && pd.max() < 2.0 + 1e-12);
            let cfg = random_scenario(&mut rng, n, 1.0, 1e-2);
            assert!(validate_scenario(&cfg).is_runnable());
        }
    }
}
