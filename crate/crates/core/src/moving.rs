//! Solutions whose domain moves inside a larger ambient space.
//!
//! The operator has rank `N` and factors as `K(t) = Φ₀ A′(t) Ψ(t)*`, where
//!
//! * `Φ₀` (`dim_h2 × N`, orthonormal columns) spans the image, which stays
//!   fixed;
//! * `Ψ(t)` (`M × N`, orthonormal columns) spans the domain. Columns are
//!   kets obeying `iħ d|ψ⟩/dt = H|ψ⟩`, which is the conjugate of the bra
//!   equation `iħ d⟨ψ|/dt = -⟨ψ|H`;
//! * `A′(t)` (`N × N`) carries the field-driven dynamics,
//!   `iħ dA′/dt = -B² (A′*)⁻¹`.
//!
//! The ambient dimension `M` is a finite stand-in for the domain of an
//! unbounded Hamiltonian.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{three_point_weights, window_start};
use crate::error::{Error, Result};
use crate::fixed::EvolutionState;
use crate::linalg::{
    hermitian_eigendecompose, inverse_adjoint, orthonormality_defect, psd_inverse, psd_sqrt,
    relative_asymmetry, ComplexMatrix, HermitianMatrix, C64,
};
use crate::scenario::{
    json_digest, CumulativeIntegral, FieldProfile, HermitianProfile, HermitianSample, TimeGrid,
};

/// Tolerance on `Q*Q - I` for frame columns.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct AmbientSpace {
    /// Ambient domain dimension `M`.
    pub dim_h1: usize,
    /// Ambient image dimension.
    pub dim_h2: usize,
    /// Rank `N` of the operator.
    pub n: usize,
    pub ambient_hamiltonian: HermitianProfile,
}

impl AmbientSpace {
    pub fn new(
        dim_h1: usize,
        dim_h2: usize,
        n: usize,
        ambient_hamiltonian: HermitianProfile,
    ) -> Result<Self> {
        if n == 0 || dim_h1 < n || dim_h2 < n {
            return Err(Error::InvalidInput(format!(
                "need 1 <= N <= min(M, dim_h2), got N={n}, M={dim_h1}, dim_h2={dim_h2}"
            )));
        }
        if ambient_hamiltonian.dim() != dim_h1 {
            return Err(Error::ShapeMismatch(format!(
                "ambient Hamiltonian is {0}x{0}, expected {dim_h1}x{dim_h1}",
                ambient_hamiltonian.dim()
            )));
        }
        Ok(Self {
            dim_h1,
            dim_h2,
            n,
            ambient_hamiltonian,
        })
    }
}

/// Domain frame `Ψ(t)` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSample {
    pub t: f64,
    pub psi: ComplexMatrix,
}

fn require_orthonormal(q: &ComplexMatrix, rows: usize, cols: usize, what: &str) -> Result<()> {
    if q.shape() != (rows, cols) {
        return Err(Error::ShapeMismatch(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            q.rows(),
            q.cols()
        )));
    }
    let defect = orthonormality_defect(q);
    if defect > ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal(defect));
    }
    Ok(())
}

/// Evolves the domain frame by `Ψ(t + h) = exp(-i H(t + h/2) h / ħ) Ψ(t)`;
/// for constant `H` the exact propagator `exp(-iHt/ħ)` is applied to `Ψ₀`.
pub fn evolve_frame_schrodinger(
    space: &AmbientSpace,
    psi0: &ComplexMatrix,
    hbar: f64,
    grid: &TimeGrid,
) -> Result<Vec<FrameSample>> {
    require_orthonormal(psi0, space.dim_h1, space.n, "psi0")?;
    let h = &space.ambient_hamiltonian;
    if h.is_constant() {
        let eig = hermitian_eigendecompose(&h.sample(0.0)?)?;
        return Ok(grid
            .output_times()
            .into_iter()
            .map(|t| FrameSample {
                t,
                psi: eig.exp_i(-t / hbar).as_matrix() * psi0,
            })
            .collect());
    }
    let mut psi = psi0.clone();
    let mut out = vec![FrameSample {
        t: 0.0,
        psi: psi.clone(),
    }];
    for k in 0..grid.steps() {
        let (t0, t1) = (grid.time(k), grid.time(k + 1));
        let step = t1 - t0;
        let mid = h.sample(t0 + 0.5 * step)?;
        psi = hermitian_eigendecompose(&mid)?
            .exp_i(-step / hbar)
            .as_matrix()
            * &psi;
        if grid.is_output(k + 1) {
            out.push(FrameSample {
                t: t1,
                psi: psi.clone(),
            });
        }
    }
    Ok(out)
}

/// Which closed form to use for the coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtimeForm {
    /// `√(A₀A₀*) exp((i/ħ)∫B² (A₀A₀*)⁻¹) U_{A₀}`, with `U_{A₀}` the polar
    /// unitary of `A₀`. Starts at `A₀`.
    #[default]
    PolarCorrected,
    /// The same without `U_{A₀}`. Only starts at `A₀` when `A₀` is positive
    /// definite.
    Literal,
}

/// Coefficient matrix `A′(t)` at the given nondecreasing times `≥ 0`.
pub fn coefficient_matrix_evolution(
    a0: &ComplexMatrix,
    field: &FieldProfile,
    hbar: f64,
    times: &[f64],
    form: AtimeForm,
    pd_floor: f64,
) -> Result<Vec<(f64, ComplexMatrix)>> {
    a0.require_square()?;
    let gram = a0.gram_outer();
    let radial = psd_sqrt(&gram)?;
    let generator = psd_inverse(&gram, pd_floor * pd_floor)?;
    let eig = hermitian_eigendecompose(&generator)?;
    let tail = match form {
        AtimeForm::PolarCorrected => Some(psd_inverse(&radial, pd_floor)?.as_matrix() * a0),
        AtimeForm::Literal => None,
    };
    let mut integral = CumulativeIntegral::new(field, 0.0);
    times
        .iter()
        .map(|&t| {
            let phase = integral.advance_to(t)?;
            let mut a = radial.as_matrix() * eig.exp_i(phase / hbar).as_matrix();
            if let Some(u) = &tail {
                a = &a * u;
            }
            Ok((t, a))
        })
        .collect()
}

/// `K(t) = Φ₀ A′(t) Ψ(t)*` at each shared sample time.
pub fn assemble_moving_solution(
    space: &AmbientSpace,
    phi0: &ComplexMatrix,
    frame: &[FrameSample],
    a_prime: &[(f64, ComplexMatrix)],
) -> Result<Vec<EvolutionState>> {
    require_orthonormal(phi0, space.dim_h2, space.n, "phi0")?;
    if frame.len() != a_prime.len() {
        return Err(Error::ShapeMismatch(format!(
            "frame has {} samples but A′ has {}",
            frame.len(),
            a_prime.len()
        )));
    }
    frame
        .iter()
        .zip(a_prime)
        .map(|(f, (t, a))| {
            if (f.t - t).abs() > 1e-12 * t.abs().max(1.0) {
                return Err(Error::ShapeMismatch(format!(
                    "frame time {} does not match coefficient time {t}",
                    f.t
                )));
            }
            if f.psi.shape() != (space.dim_h1, space.n) || a.shape() != (space.n, space.n) {
                return Err(Error::ShapeMismatch(
                    "frame or coefficient sample has the wrong shape".into(),
                ));
            }
            Ok(EvolutionState {
                t: *t,
                k: &(phi0 * a) * &f.psi.adjoint(),
            })
        })
        .collect()
}

/// Spectral data of `KK*` for a rank-`N` operator.
struct ImageSplit {
    /// Orthonormal basis of the image (top `N` eigenvectors of `KK*`).
    basis: ComplexMatrix,
    /// `(KK*)⁺`, the pseudo-inverse on the image.
    gram_pinv: ComplexMatrix,
}

/// Eigenvalues of `KK*` (squared singular values) above `pd_floor` times the
/// largest count towards the rank, which must equal `n`.
fn image_split(k: &ComplexMatrix, n: usize, pd_floor: f64) -> Result<ImageSplit> {
    let eig = hermitian_eigendecompose(&k.gram_outer())?;
    let dim = eig.dim();
    let top = eig.max();
    let kept: Vec<usize> = (0..dim)
        .filter(|&i| top > 0.0 && eig.values[i] > pd_floor * top)
        .collect();
    if kept.len() != n {
        return Err(Error::RankDeficient {
            expected: n,
            found: kept.len(),
        });
    }
    let q = eig.vectors.as_matrix();
    let columns: Vec<Vec<C64>> = kept.iter().map(|&i| q.column(i)).collect();
    let basis = ComplexMatrix::from_columns(&columns)?;
    let inv_diag: Vec<f64> = kept.iter().map(|&i| 1.0 / eig.values[i]).collect();
    let gram_pinv = &(&basis * &ComplexMatrix::from_real_diag(&inv_diag)) * &basis.adjoint();
    Ok(ImageSplit { basis, gram_pinv })
}

/// Zero-extended inverse of `K*`: `(KK*)⁺ K`, which equals `U Σ⁻¹ V*` for
/// `K = U Σ V*`.
pub fn pseudo_inverse_adjoint(k: &ComplexMatrix, n: usize, pd_floor: f64) -> Result<ComplexMatrix> {
    Ok(&image_split(k, n, pd_floor)?.gram_pinv * k)
}

/// Orthogonal projector onto `Im K`.
pub fn image_projector(k: &ComplexMatrix, n: usize, pd_floor: f64) -> Result<ComplexMatrix> {
    let basis = image_split(k, n, pd_floor)?.basis;
    Ok(&basis * &basis.adjoint())
}

/// Residual diagnostics of an assembled solution at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualRecord {
    pub t: f64,
    /// `max_j ‖(iħK̇ + KH + B² (K*)⁺) e_j‖` over the ambient basis.
    pub weak_residual: f64,
    /// `‖P(t) - P(0)‖_F` for the image projector `P`.
    pub image_drift: f64,
    /// `‖K(t)K(t)* - K(0)K(0)*‖_F`.
    pub radial_drift: f64,
}

/// Weak-form residual, image drift and radial drift at every sample.
/// `K̇` comes from the three-point derivative on neighbouring samples, so the
/// residual of an exact solution is a second-order discretization artifact.
pub fn weak_residual(
    samples: &[EvolutionState],
    space: &AmbientSpace,
    field: &FieldProfile,
    hbar: f64,
    pd_floor: f64,
) -> Result<Vec<ResidualRecord>> {
    if samples.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: samples.len(),
        });
    }
    let k0 = &samples[0].k;
    let p0 = image_projector(k0, space.n, pd_floor)?;
    let gram0 = k0.gram_outer();
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if s.k.shape() != (space.dim_h2, space.dim_h1) {
                return Err(Error::ShapeMismatch(format!(
                    "sample at t={} is {}x{}, expected {}x{}",
                    s.t,
                    s.k.rows(),
                    s.k.cols(),
                    space.dim_h2,
                    space.dim_h1
                )));
            }
            let start = window_start(i, samples.len());
            let window = &samples[start..start + 3];
            let w = three_point_weights([window[0].t, window[1].t, window[2].t], s.t);
            let mut k_dot = ComplexMatrix::zeros(space.dim_h2, space.dim_h1);
            for (ws, wi) in window.iter().zip(w) {
                k_dot = &k_dot + &ws.k.scale_real(wi);
            }
            let split = image_split(&s.k, space.n, pd_floor)?;
            let h = space.ambient_hamiltonian.sample(s.t)?;
            let b = field.sample(s.t)?;
            let residual = &(&k_dot.scale(C64::new(0.0, hbar)) + &(&s.k * h.as_matrix()))
                + &(&split.gram_pinv * &s.k).scale_real(b * b);
            let projector = &split.basis * &split.basis.adjoint();
            Ok(ResidualRecord {
                t: s.t,
                weak_residual: residual.max_column_norm(),
                image_drift: projector.distance(&p0),
                radial_drift: s.k.gram_outer().as_matrix().distance(gram0.as_matrix()),
            })
        })
        .collect()
}

/// Hermitian gauge generators `C′(t)`, `C″(t)` (`N × N`) for the image and
/// domain frames.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeFunctions {
    pub c_prime: HermitianProfile,
    pub c_double_prime: HermitianProfile,
}

/// Accepts `m` as a gauge generator if it is Hermitian to working precision.
pub fn hermitian_gauge(m: &ComplexMatrix) -> Result<HermitianMatrix> {
    let asym = relative_asymmetry(m)?;
    if asym > crate::linalg::HERMITIAN_TOL {
        return Err(Error::NotHermitianGauge(asym));
    }
    Ok(HermitianMatrix::hermitian_part(m))
}

impl GaugeFunctions {
    /// The trivial gauge `C′ = C″ = 0`.
    pub fn zero(n: usize) -> Self {
        Self {
            c_prime: HermitianProfile::constant(HermitianMatrix::zeros(n)),
            c_double_prime: HermitianProfile::constant(HermitianMatrix::zeros(n)),
        }
    }

    pub fn constant(c_prime: &ComplexMatrix, c_double_prime: &ComplexMatrix) -> Result<Self> {
        Ok(Self {
            c_prime: HermitianProfile::constant(hermitian_gauge(c_prime)?),
            c_double_prime: HermitianProfile::constant(hermitian_gauge(c_double_prime)?),
        })
    }

    /// Piecewise-linear gauges through `(t, C′, C″)` samples.
    pub fn from_samples(samples: &[(f64, ComplexMatrix, ComplexMatrix)]) -> Result<Self> {
        let mut c1 = Vec::with_capacity(samples.len());
        let mut c2 = Vec::with_capacity(samples.len());
        for (t, a, b) in samples {
            c1.push(HermitianSample {
                t: *t,
                matrix: hermitian_gauge(a)?,
            });
            c2.push(HermitianSample {
                t: *t,
                matrix: hermitian_gauge(b)?,
            });
        }
        let out = Self {
            c_prime: HermitianProfile::InterpolatedSequence { samples: c1 },
            c_double_prime: HermitianProfile::InterpolatedSequence { samples: c2 },
        };
        let defects: Vec<String> = out
            .c_prime
            .defects()
            .into_iter()
            .chain(out.c_double_prime.defects())
            .collect();
        if !defects.is_empty() {
            return Err(Error::InvalidInput(defects.join("; ")));
        }
        Ok(out)
    }
}

/// State of the gauged (un-primed) description at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugedSample {
    pub t: f64,
    /// Image frame `Φ(t)`, `dim_h2 × N`.
    pub phi: ComplexMatrix,
    /// Domain frame `Ψ(t)` (kets), `M × N`.
    pub psi: ComplexMatrix,
    /// Coefficients `A(t)`, `N × N`.
    pub a: ComplexMatrix,
}

impl GaugedSample {
    pub fn assemble(&self) -> ComplexMatrix {
        &(&self.phi * &self.a) * &self.psi.adjoint()
    }
}

#[derive(Clone)]
struct GaugedState {
    phi: ComplexMatrix,
    psi: ComplexMatrix,
    a: ComplexMatrix,
}

impl GaugedState {
    fn axpy(&self, h: f64, d: &GaugedState) -> GaugedState {
        GaugedState {
            phi: &self.phi + &d.phi.scale_real(h),
            psi: &self.psi + &d.psi.scale_real(h),
            a: &self.a + &d.a.scale_real(h),
        }
    }
}

/// Problem data shared by the primed and gauged constructions.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingProblem {
    pub space: AmbientSpace,
    pub field: FieldProfile,
    pub hbar: f64,
    pub phi0: ComplexMatrix,
    pub psi0: ComplexMatrix,
    pub a0: ComplexMatrix,
    pub grid: TimeGrid,
    pub pd_floor: f64,
}

/// Time-stamped pieces of an assembled solution.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingSolution {
    pub phi0: ComplexMatrix,
    pub frame: Vec<FrameSample>,
    pub a_prime: Vec<(f64, ComplexMatrix)>,
    pub a0: ComplexMatrix,
    pub states: Vec<EvolutionState>,
}

impl MovingProblem {
    /// Builds the solution in the primed frame: Schrödinger-evolved domain,
    /// frozen image basis, closed-form coefficients.
    pub fn solve(&self, form: AtimeForm) -> Result<MovingSolution> {
        let frame = evolve_frame_schrodinger(&self.space, &self.psi0, self.hbar, &self.grid)?;
        let times: Vec<f64> = frame.iter().map(|f| f.t).collect();
        let a_prime = coefficient_matrix_evolution(
            &self.a0,
            &self.field,
            self.hbar,
            &times,
            form,
            self.pd_floor,
        )?;
        let states = assemble_moving_solution(&self.space, &self.phi0, &frame, &a_prime)?;
        Ok(MovingSolution {
            phi0: self.phi0.clone(),
            frame,
            a_prime,
            a0: self.a0.clone(),
            states,
        })
    }

    /// Integrates the gauged description with RK4 on the scenario grid:
    ///
    /// ```text
    /// iħ Φ' = Φ C′
    /// iħ Ψ' = H Ψ - Ψ C″
    /// iħ A' = -C′ A - A C″ - B² (A*)⁻¹
    /// ```
    ///
    /// `Φ A Ψ*` then solves the same operator equation as the primed form.
    pub fn evolve_gauged(&self, gauge: &GaugeFunctions) -> Result<Vec<GaugedSample>> {
        let n = self.space.n;
        if gauge.c_prime.dim() != n || gauge.c_double_prime.dim() != n {
            return Err(Error::ShapeMismatch(format!(
                "gauge generators must be {n}x{n}"
            )));
        }
        let minus_i = C64::new(0.0, -1.0 / self.hbar);
        let rhs = |t: f64, s: &GaugedState| -> Result<GaugedState> {
            let c1 = gauge.c_prime.sample(t)?;
            let c2 = gauge.c_double_prime.sample(t)?;
            let h = self.space.ambient_hamiltonian.sample(t)?;
            let b = self.field.sample(t)?;
            let inv = inverse_adjoint(&s.a, self.pd_floor)?;
            let a_drive =
                &(&(c1.as_matrix() * &s.a) + &(&s.a * c2.as_matrix())) + &inv.scale_real(b * b);
            Ok(GaugedState {
                phi: (&s.phi * c1.as_matrix()).scale(minus_i),
                psi: (&(h.as_matrix() * &s.psi) - &(&s.psi * c2.as_matrix())).scale(minus_i),
                a: a_drive.scale(-minus_i),
            })
        };
        let mut state = GaugedState {
            phi: self.phi0.clone(),
            psi: self.psi0.clone(),
            a: self.a0.clone(),
        };
        let sample = |t: f64, s: &GaugedState| GaugedSample {
            t,
            phi: s.phi.clone(),
            psi: s.psi.clone(),
            a: s.a.clone(),
        };
        let mut out = vec![sample(0.0, &state)];
        for k in 0..self.grid.steps() {
            let (t0, t1) = (self.grid.time(k), self.grid.time(k + 1));
            let h = t1 - t0;
            let k1 = rhs(t0, &state)?;
            let k2 = rhs(t0 + 0.5 * h, &state.axpy(0.5 * h, &k1))?;
            let k3 = rhs(t0 + 0.5 * h, &state.axpy(0.5 * h, &k2))?;
            let k4 = rhs(t1, &state.axpy(h, &k3))?;
            state = state
                .axpy(h / 6.0, &k1)
                .axpy(h / 3.0, &k2)
                .axpy(h / 3.0, &k3)
                .axpy(h / 6.0, &k4);
            if self.grid.is_output(k + 1) {
                out.push(sample(t1, &state));
            }
        }
        Ok(out)
    }
}

/// Frame transformations `Γ′` (`iħΓ̇′ = Γ′C′`) and `Γ″` (`iħΓ̇″ = -Γ″C″`) by
/// midpoint-exponential products, both starting at the identity. They map the
/// primed description onto the gauged one: `Φ = Φ₀Γ′`, `Ψ = Ψ′Γ″`,
/// `A = Γ′* A′ Γ″`.
pub fn gauge_transformations(
    gauge: &GaugeFunctions,
    hbar: f64,
    grid: &TimeGrid,
) -> Result<Vec<(f64, ComplexMatrix, ComplexMatrix)>> {
    let n = gauge.c_prime.dim();
    let mut g1 = ComplexMatrix::identity(n);
    let mut g2 = ComplexMatrix::identity(n);
    let mut out = vec![(0.0, g1.clone(), g2.clone())];
    for k in 0..grid.steps() {
        let (t0, t1) = (grid.time(k), grid.time(k + 1));
        let h = t1 - t0;
        let mid = t0 + 0.5 * h;
        g1 = &g1
            * hermitian_eigendecompose(&gauge.c_prime.sample(mid)?)?
                .exp_i(-h / hbar)
                .as_matrix();
        g2 = &g2
            * hermitian_eigendecompose(&gauge.c_double_prime.sample(mid)?)?
                .exp_i(h / hbar)
                .as_matrix();
        if grid.is_output(k + 1) {
            out.push((t1, g1.clone(), g2.clone()));
        }
    }
    Ok(out)
}

/// Comparison of a gauged solution against the primed one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaugeReport {
    /// `max_t ‖Φ A Ψ* - Φ₀ A′ Ψ′*‖_F`.
    pub k_distance: f64,
    /// `max_t ‖Φ - Φ₀Γ′‖_F`; limited by the second-order midpoint products.
    pub image_frame_distance: f64,
    /// `max_t ‖Ψ - Ψ′Γ″‖_F`; same caveat.
    pub domain_frame_distance: f64,
    /// Last time covered by the comparison.
    pub verified_until: f64,
}

/// Evolves the gauged description and checks that it assembles to the same
/// operator as the primed construction.
pub fn gauge_equivalence_check(
    problem: &MovingProblem,
    gauge: &GaugeFunctions,
) -> Result<GaugeReport> {
    let primed = problem.solve(AtimeForm::PolarCorrected)?;
    let gauged = problem.evolve_gauged(gauge)?;
    let gammas = gauge_transformations(gauge, problem.hbar, &problem.grid)?;
    let mut report = GaugeReport {
        k_distance: 0.0,
        image_frame_distance: 0.0,
        domain_frame_distance: 0.0,
        verified_until: 0.0,
    };
    for ((p, (f, g)), (_, g1, g2)) in primed
        .states
        .iter()
        .zip(primed.frame.iter().zip(&gauged))
        .zip(&gammas)
    {
        report.k_distance = report.k_distance.max(p.k.distance(&g.assemble()));
        report.image_frame_distance = report
            .image_frame_distance
            .max(g.phi.distance(&(&problem.phi0 * g1)));
        report.domain_frame_distance = report
            .domain_frame_distance
            .max(g.psi.distance(&(&f.psi * g2)));
        report.verified_until = p.t;
    }
    Ok(report)
}

/// Largest distance between two gauged solutions of the same initial data.
pub fn gauge_uniqueness_distance(
    problem: &MovingProblem,
    a: &GaugeFunctions,
    b: &GaugeFunctions,
) -> Result<f64> {
    let ga = problem.evolve_gauged(a)?;
    let gb = problem.evolve_gauged(b)?;
    Ok(ga
        .iter()
        .zip(&gb)
        .map(|(x, y)| x.assemble().distance(&y.assemble()))
        .fold(0.0, f64::max))
}

fn default_hbar() -> f64 {
    1.0
}

fn default_stride() -> usize {
    1
}

fn default_pd_floor() -> f64 {
    crate::linalg::DEFAULT_PD_FLOOR
}

/// Moving-domain scenario file: the fixed-domain keys (with `hamiltonian`
/// acting on the ambient space) plus the frame and coefficient data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingScenario {
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    pub hamiltonian: HermitianProfile,
    pub field: FieldProfile,
    /// Optional; when present it must equal `phi0 · coeff_a0 · psi0*`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_k: Option<ComplexMatrix>,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    #[serde(default = "default_pd_floor")]
    pub pd_floor: f64,
    pub ambient_dim: usize,
    pub rank: usize,
    pub psi0: ComplexMatrix,
    pub phi0: ComplexMatrix,
    pub coeff_a0: ComplexMatrix,
}

impl MovingScenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn digest(&self) -> String {
        json_digest(self)
    }

    /// Checks the scenario and converts it to a [`MovingProblem`].
    pub fn problem(&self) -> Result<MovingProblem> {
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(Error::InvalidInput(format!(
                "hbar must be positive, got {}",
                self.hbar
            )));
        }
        if !(self.pd_floor.is_finite() && (0.0..1.0).contains(&self.pd_floor)) {
            return Err(Error::InvalidInput(format!(
                "pd_floor must lie in [0, 1), got {}",
                self.pd_floor
            )));
        }
        if self.dt.is_nan() || self.t_end.is_nan() || self.dt >= self.t_end {
            return Err(Error::InvalidInput(format!(
                "dt must be smaller than t_end, got dt={}, t_end={}",
                self.dt, self.t_end
            )));
        }
        let grid = TimeGrid::new(self.dt, self.t_end, self.output_stride)?;
        let defects: Vec<String> = self
            .field
            .defects()
            .into_iter()
            .chain(self.hamiltonian.defects())
            .collect();
        if !defects.is_empty() {
            return Err(Error::InvalidInput(defects.join("; ")));
        }
        for t in [0.0, self.t_end] {
            self.field.sample(t)?;
            let h = self.hamiltonian.sample(t)?;
            let min = hermitian_eigendecompose(&h)?.min();
            if min.is_nan() || min <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "ambient Hamiltonian must be positive definite, min eigenvalue {min} at t={t}"
                )));
            }
        }
        let space = AmbientSpace::new(
            self.ambient_dim,
            self.phi0.rows(),
            self.rank,
            self.hamiltonian.clone(),
        )?;
        require_orthonormal(&self.psi0, space.dim_h1, space.n, "psi0")?;
        require_orthonormal(&self.phi0, space.dim_h2, space.n, "phi0")?;
        if self.coeff_a0.shape() != (space.n, space.n) {
            return Err(Error::ShapeMismatch(format!(
                "coeff_a0 must be {0}x{0}",
                space.n
            )));
        }
        // Rank check on A₀ through the same floor the solver uses.
        psd_inverse(&self.coeff_a0.gram_outer(), self.pd_floor * self.pd_floor)?;
        let problem = MovingProblem {
            space,
            field: self.field.clone(),
            hbar: self.hbar,
            phi0: self.phi0.clone(),
            psi0: self.psi0.clone(),
            a0: self.coeff_a0.clone(),
            grid,
            pd_floor: self.pd_floor,
        };
        if let Some(k) = &self.initial_k {
            let assembled = &(&problem.phi0 * &problem.a0) * &problem.psi0.adjoint();
            k.require_same_shape(&assembled)?;
            let gap = k.distance(&assembled);
            if gap > 1e-10 * assembled.frobenius_norm().max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "initial_k differs from phi0 * coeff_a0 * psi0^* by {gap:e}"
                )));
            }
        }
        Ok(problem)
    }
}
