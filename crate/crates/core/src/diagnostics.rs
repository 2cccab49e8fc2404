//! Conserved quantities, energy bookkeeping and closed-form special solutions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::{polar_init, EvolutionState, Trajectory};
use crate::linalg::{
    hermitian_eigendecompose, inverse_adjoint, pairing, psd_inverse, psd_sqrt, unitarity_defect,
    ComplexMatrix, HermitianMatrix, UnitaryMatrix, C64, DEFAULT_PD_FLOOR,
};
use crate::scenario::{FieldProfile, HermitianProfile, ScenarioConfig};

/// Step used for centered directional derivatives of `Ξ`.
pub const FD_EPSILON: f64 = 1e-5;

/// Weights `w` with `f'(x) ≈ Σ wᵢ f(tᵢ)`, from the quadratic through three
/// distinct abscissae. Exact for quadratics, second order otherwise; works
/// at the ends of a window and on uneven spacing.
pub fn three_point_weights(t: [f64; 3], x: f64) -> [f64; 3] {
    let [t0, t1, t2] = t;
    [
        ((x - t1) + (x - t2)) / ((t0 - t1) * (t0 - t2)),
        ((x - t0) + (x - t2)) / ((t1 - t0) * (t1 - t2)),
        ((x - t0) + (x - t1)) / ((t2 - t0) * (t2 - t1)),
    ]
}

/// Index of the first sample of the 3-point window used at `i`: centered in
/// the interior, one-sided at either end.
pub fn window_start(i: usize, len: usize) -> usize {
    i.saturating_sub(1).min(len - 3)
}

/// `G = K H + B² (K*)⁻¹`, the generator appearing in the equation of motion.
pub fn generator(k: &ComplexMatrix, h: &HermitianMatrix, b: f64) -> Result<ComplexMatrix> {
    let inv = inverse_adjoint(k, DEFAULT_PD_FLOOR)?;
    Ok(&(k * h.as_matrix()) + &inv.scale_real(b * b))
}

/// `Σ log λᵢ(KK*)`, i.e. `log det(KK*)` without forming the determinant.
pub fn log_det_gram(k: &ComplexMatrix) -> Result<f64> {
    k.require_square()?;
    let eig = hermitian_eigendecompose(&k.gram_outer())?;
    let floor = DEFAULT_PD_FLOOR * DEFAULT_PD_FLOOR;
    if eig.max() <= 0.0 || eig.min() <= floor * eig.max() {
        return Err(Error::NearSingular {
            ratio: (eig.min() / eig.max()).max(0.0).sqrt(),
            floor: DEFAULT_PD_FLOOR,
            last_good_t: None,
        });
    }
    Ok(eig.values.iter().map(|l| l.ln()).sum())
}

/// `Ξ(K) = tr(K H K*) + B² log det(KK*)`.
pub fn total_hamiltonian(k: &ComplexMatrix, h: &HermitianMatrix, b: f64) -> Result<f64> {
    let n = k.require_square()?;
    if h.dim() != n {
        return Err(Error::ShapeMismatch(format!(
            "K is {n}x{n} but H is {0}x{0}",
            h.dim()
        )));
    }
    let kinetic = (&(k * h.as_matrix()) * &k.adjoint()).trace().re;
    Ok(kinetic + b * b * log_det_gram(k)?)
}

/// Both sides of the first-variation identity for `Ξ` along `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferentialCheck {
    /// Centered difference `(Ξ(K+εL) - Ξ(K-εL)) / 2ε`.
    pub lhs: f64,
    /// `2 Re tr(G L*)` with `G = KH + B²(K*)⁻¹`.
    pub rhs: f64,
    /// The same quantity written as `ω(2iG, L)`.
    pub rhs_symplectic: f64,
}

impl DifferentialCheck {
    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs).abs() / (1.0 + self.rhs.abs())
    }
}

/// Compares a finite-difference directional derivative of `Ξ` with the
/// pairing formula. Both the kinetic and the log-det term are quadratic
/// forms in `K` to first order, so the derivative carries a factor 2.
pub fn differential_check(
    k: &ComplexMatrix,
    h: &HermitianMatrix,
    b: f64,
    l: &ComplexMatrix,
) -> Result<DifferentialCheck> {
    k.require_same_shape(l)?;
    let g = generator(k, h, b)?;
    let plus = total_hamiltonian(&(k + &l.scale_real(FD_EPSILON)), h, b)?;
    let minus = total_hamiltonian(&(k - &l.scale_real(FD_EPSILON)), h, b)?;
    let lhs = (plus - minus) / (2.0 * FD_EPSILON);
    let rhs = 2.0 * pairing(&g, l)?.riemannian;
    let rhs_symplectic = pairing(&g.scale(C64::new(0.0, 2.0)), l)?.symplectic;
    Ok(DifferentialCheck {
        lhs,
        rhs,
        rhs_symplectic,
    })
}

/// Energy rate at one sample: the explicit-time-dependence formula versus a
/// finite difference of `Ξ` along the trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCheck {
    pub t: f64,
    /// `tr(K Ḣ K*) + 2 B Ḃ log det(KK*)`, with `Ḣ`, `Ḃ` by finite differences.
    pub predicted: f64,
    pub observed: f64,
}

/// Energy-rate identity at sample `index` of a trajectory.
pub fn hamiltonian_rate(
    states: &[EvolutionState],
    index: usize,
    hamiltonian: &HermitianProfile,
    field: &FieldProfile,
) -> Result<RateCheck> {
    if states.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: states.len(),
        });
    }
    if index >= states.len() {
        return Err(Error::InvalidInput(format!(
            "sample index {index} out of range for {} states",
            states.len()
        )));
    }
    let start = window_start(index, states.len());
    let window = &states[start..start + 3];
    let ts = [window[0].t, window[1].t, window[2].t];
    let t = states[index].t;
    let w = three_point_weights(ts, t);

    let mut observed = 0.0;
    let mut h_dot = HermitianMatrix::zeros(hamiltonian.dim());
    let mut b_dot = 0.0;
    for (s, wi) in window.iter().zip(w) {
        let h = hamiltonian.sample(s.t)?;
        let b = field.sample(s.t)?;
        observed += wi * total_hamiltonian(&s.k, &h, b)?;
        h_dot = h_dot.add(&h.scale(wi));
        b_dot += wi * b;
    }

    let k = &states[index].k;
    let b = field.sample(t)?;
    let explicit = (&(k * h_dot.as_matrix()) * &k.adjoint()).trace().re;
    let predicted = explicit + 2.0 * b * b_dot * log_det_gram(k)?;
    Ok(RateCheck {
        t,
        predicted,
        observed,
    })
}

/// One row of an invariant report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub xi: f64,
    /// Absent when the trajectory has fewer than three samples.
    pub xi_rate_predicted: Option<f64>,
    pub xi_rate_observed: Option<f64>,
    /// `‖KK* - K₀K₀*‖ / ‖K₀K₀*‖`.
    pub kk_star_drift: f64,
    /// `|tr(KHK*) - tr(K₀HK₀*)| / |tr(K₀HK₀*)|`, constant-`H` scenarios only.
    pub trace_khk_drift: Option<f64>,
    /// Unitarity defect of `R₀⁻¹ K(t)`.
    pub unitarity_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub records: Vec<DiagnosticsRecord>,
}

impl DiagnosticsReport {
    pub fn max_kk_star_drift(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.kk_star_drift)
            .fold(0.0, f64::max)
    }

    pub fn max_trace_khk_drift(&self) -> Option<f64> {
        self.records
            .iter()
            .map(|r| r.trace_khk_drift)
            .try_fold(0.0, |acc, d| d.map(|d| f64::max(acc, d)))
    }

    pub fn max_unitarity_defect(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.unitarity_defect)
            .fold(0.0, f64::max)
    }

    /// Largest `|predicted - observed|` energy rate over the report.
    pub fn max_rate_gap(&self) -> Option<f64> {
        self.records
            .iter()
            .map(|r| Some((r.xi_rate_predicted? - r.xi_rate_observed?).abs()))
            .try_fold(0.0, |acc, d| d.map(|d| f64::max(acc, d)))
    }
}

/// Per-sample conservation drifts and energy bookkeeping for a trajectory.
pub fn invariant_report(traj: &Trajectory, cfg: &ScenarioConfig) -> Result<DiagnosticsReport> {
    let k0 = &traj.first().k;
    let gram0 = k0.gram_outer();
    let gram0_norm = gram0.as_matrix().frobenius_norm();
    let cache = polar_init(k0, cfg.pd_floor)?;
    let radial_inv = psd_inverse(&cache.radial, cfg.pd_floor)?;

    let h_const = if cfg.hamiltonian.is_constant() {
        Some(cfg.hamiltonian.sample(0.0)?)
    } else {
        None
    };
    let khk =
        |k: &ComplexMatrix, h: &HermitianMatrix| (&(k * h.as_matrix()) * &k.adjoint()).trace().re;
    let khk0 = h_const.as_ref().map(|h| khk(k0, h));

    let mut records = Vec::with_capacity(traj.states.len());
    for (i, s) in traj.states.iter().enumerate() {
        let h = cfg.hamiltonian.sample(s.t)?;
        let b = cfg.field.sample(s.t)?;
        let (pred, obs) = if traj.states.len() >= 3 {
            let r = hamiltonian_rate(&traj.states, i, &cfg.hamiltonian, &cfg.field)?;
            (Some(r.predicted), Some(r.observed))
        } else {
            (None, None)
        };
        let trace_khk_drift = match (&h_const, khk0) {
            (Some(h), Some(base)) => {
                Some((khk(&s.k, h) - base).abs() / base.abs().max(f64::MIN_POSITIVE))
            }
            _ => None,
        };
        records.push(DiagnosticsRecord {
            t: s.t,
            xi: total_hamiltonian(&s.k, &h, b)?,
            xi_rate_predicted: pred,
            xi_rate_observed: obs,
            kk_star_drift: s.k.gram_outer().as_matrix().distance(gram0.as_matrix()) / gram0_norm,
            trace_khk_drift,
            unitarity_defect: unitarity_defect(&(radial_inv.as_matrix() * &s.k)),
        });
    }
    Ok(DiagnosticsReport { records })
}

/// Data for the closed-form critical point `K_ν = U B (ν - H)^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPointSpec {
    pub nu: f64,
    pub unitary: UnitaryMatrix,
    pub hamiltonian: HermitianMatrix,
    pub b: f64,
}

/// `K_ν = U B (νI - H)^{-1/2}`. `ν` must lie strictly above the spectrum of
/// `H`; `B = 0` would give the zero operator and is rejected.
pub fn critical_point(spec: &CriticalPointSpec) -> Result<ComplexMatrix> {
    let n = spec.hamiltonian.dim();
    if spec.unitary.dim() != n {
        return Err(Error::ShapeMismatch(format!(
            "U is {0}x{0} but H is {n}x{n}",
            spec.unitary.dim()
        )));
    }
    if !(spec.nu.is_finite() && spec.b.is_finite()) {
        return Err(Error::NonFinite);
    }
    if spec.b == 0.0 {
        return Err(Error::InvalidInput(
            "critical point needs a nonzero field; B = 0 gives K = 0".into(),
        ));
    }
    let max_eigenvalue = hermitian_eigendecompose(&spec.hamiltonian)?.max();
    if spec.nu <= max_eigenvalue {
        return Err(Error::NuDoesNotDominate {
            nu: spec.nu,
            max_eigenvalue,
        });
    }
    let gap = spec.hamiltonian.shift_negate(spec.nu);
    let inv_root = psd_inverse(&psd_sqrt(&gap)?, DEFAULT_PD_FLOOR)?;
    Ok((spec.unitary.as_matrix() * inv_root.as_matrix()).scale_real(spec.b))
}

/// `‖K H + B² (K*)⁻¹ - ν K‖_F`.
pub fn euler_lagrange_residual(
    k: &ComplexMatrix,
    h: &HermitianMatrix,
    b: f64,
    nu: f64,
) -> Result<f64> {
    let g = generator(k, h, b)?;
    Ok(g.distance(&k.scale_real(nu)))
}

/// Diagonal solution `K(t) = diag(rₙ exp(iφₙ(t)))` with
/// `φₙ(t) = (Eₙ + B²/rₙ²) t/ħ + φ₀ₙ`, for constant `B` and diagonal `H`.
pub fn special_diagonal_solution(
    h: &HermitianMatrix,
    b: f64,
    r0: &[f64],
    phi0: &[f64],
    t: f64,
    hbar: f64,
) -> Result<ComplexMatrix> {
    let n = h.dim();
    if r0.len() != n || phi0.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "H is {n}x{n} but r0 has {} and phi0 has {} entries",
            r0.len(),
            phi0.len()
        )));
    }
    let off = h.as_matrix().max_off_diagonal();
    if off > 0.0 {
        return Err(Error::NotDiagonal(off));
    }
    if let Some(r) = r0.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "radii must be positive, got {r}"
        )));
    }
    if hbar.is_nan() || hbar <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "hbar must be positive, got {hbar}"
        )));
    }
    let entries: Vec<C64> = (0..n)
        .map(|j| {
            let e = h.as_matrix()[(j, j)].re;
            let phase = (e + b * b / (r0[j] * r0[j])) * t / hbar + phi0[j];
            C64::from_polar(r0[j], phase)
        })
        .collect();
    Ok(ComplexMatrix::from_diag(&entries))
}

/// Coherent state and total flux for [`flux_distribution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FluxInputLiteral", into = "FluxInputLiteral")]
pub struct FluxInput {
    pub upsilon: Vec<C64>,
    pub total_flux: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VectorLiteral {
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FluxInputLiteral {
    upsilon: VectorLiteral,
    total_flux: f64,
}

impl TryFrom<FluxInputLiteral> for FluxInput {
    type Error = Error;

    fn try_from(lit: FluxInputLiteral) -> Result<Self> {
        if lit.upsilon.re.len() != lit.upsilon.im.len() {
            return Err(Error::ShapeMismatch(format!(
                "upsilon has {} real and {} imaginary parts",
                lit.upsilon.re.len(),
                lit.upsilon.im.len()
            )));
        }
        Ok(FluxInput {
            upsilon: lit
                .upsilon
                .re
                .iter()
                .zip(&lit.upsilon.im)
                .map(|(&re, &im)| C64::new(re, im))
                .collect(),
            total_flux: lit.total_flux,
        })
    }
}

impl From<FluxInput> for FluxInputLiteral {
    fn from(f: FluxInput) -> Self {
        FluxInputLiteral {
            upsilon: VectorLiteral {
                re: f.upsilon.iter().map(|z| z.re).collect(),
                im: f.upsilon.iter().map(|z| z.im).collect(),
            },
            total_flux: f.total_flux,
        }
    }
}

/// `vᵢ = Φ |(KΥ)ᵢ|² / ‖KΥ‖²`, so the entries are nonnegative and sum to `Φ`.
pub fn flux_distribution(k: &ComplexMatrix, input: &FluxInput) -> Result<Vec<f64>> {
    if !(input.total_flux.is_finite() && input.total_flux >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "total flux must be finite and nonnegative, got {}",
            input.total_flux
        )));
    }
    if input
        .upsilon
        .iter()
        .any(|z| !(z.re.is_finite() && z.im.is_finite()))
    {
        return Err(Error::NonFinite);
    }
    if input.upsilon.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Err(Error::InvalidInput("coherent state must be nonzero".into()));
    }
    let image = k.mul_vec(&input.upsilon)?;
    let weights: Vec<f64> = image.iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroImage);
    }
    Ok(weights
        .iter()
        .map(|w| input.total_flux * w / total)
        .collect())
}
