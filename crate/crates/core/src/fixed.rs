//! Fixed-domain solvers for `iħ K' = -K H - B² (K*)⁻¹`.
//!
//! Three independent routes produce a [`Trajectory`]:
//!
//! * [`evolve_factorized`]: `K(t) = R V(t) W(t)` with `R = sqrt(K₀K₀*)` frozen,
//!   `V(t) = exp((i/ħ) ∫B² (K₀K₀*)⁻¹)` and `iħ W' = -W H`, `W(0) = R⁻¹K₀`.
//! * [`evolve_direct`]: classical RK4 on the nonlinear equation itself.
//! * [`evolve_series`]: the binomial power series of the unitary part, for
//!   constant `H` and `B` only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigendecompose, inverse_adjoint, psd_inverse, psd_sqrt, ComplexMatrix,
    HermitianMatrix, UnitaryMatrix, C64,
};
use crate::scenario::{validate_scenario, CumulativeIntegral, ScenarioConfig, TimeGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    pub t: f64,
    pub k: ComplexMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverTag {
    Direct,
    Factorized,
    Series,
}

impl SolverTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverTag::Direct => "direct",
            SolverTag::Factorized => "factorized",
            SolverTag::Series => "series",
        }
    }
}

impl std::str::FromStr for SolverTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(SolverTag::Direct),
            "factorized" => Ok(SolverTag::Factorized),
            "series" => Ok(SolverTag::Series),
            other => Err(Error::InvalidInput(format!("unknown solver '{other}'"))),
        }
    }
}

/// Time-ordered samples of `K(t)`, starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<EvolutionState>,
    pub solver_tag: SolverTag,
    pub scenario_digest: String,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn first(&self) -> &EvolutionState {
        &self.states[0]
    }

    pub fn last(&self) -> &EvolutionState {
        &self.states[self.states.len() - 1]
    }

    /// Largest Frobenius distance between two trajectories on a shared grid.
    pub fn max_distance(&self, other: &Trajectory) -> Result<f64> {
        if self.states.len() != other.states.len() {
            return Err(Error::ShapeMismatch(format!(
                "trajectories have {} and {} samples",
                self.states.len(),
                other.states.len()
            )));
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.states.iter().zip(&other.states) {
            if (a.t - b.t).abs() > 1e-12 * a.t.abs().max(1.0) {
                return Err(Error::ShapeMismatch(format!(
                    "sample times differ: {} vs {}",
                    a.t, b.t
                )));
            }
            a.k.require_same_shape(&b.k)?;
            worst = worst.max(a.k.distance(&b.k));
        }
        Ok(worst)
    }
}

/// Time-independent data of the factorized solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedCache {
    /// `R = sqrt(K₀K₀*)`.
    pub radial: HermitianMatrix,
    /// `U₀ = R⁻¹K₀`.
    pub u0: UnitaryMatrix,
    /// `(K₀K₀*)⁻¹`; the magnetic Hamiltonian is `B(t)²` times this.
    pub h_b_base: HermitianMatrix,
}

/// Splits `K₀` into its conserved radial part and the initial unitary part.
/// `floor` bounds the singular-value ratio of `K₀`.
pub fn polar_init(k0: &ComplexMatrix, floor: f64) -> Result<FactorizedCache> {
    k0.require_square()?;
    let radial = psd_sqrt(&k0.gram_outer())?;
    let radial_inv = psd_inverse(&radial, floor)?;
    let u0 = UnitaryMatrix::from_raw(radial_inv.as_matrix() * k0);
    let radial_sq = HermitianMatrix::hermitian_part(&(radial.as_matrix() * radial.as_matrix()));
    let h_b_base = psd_inverse(&radial_sq, floor * floor)?;
    Ok(FactorizedCache {
        radial,
        u0,
        h_b_base,
    })
}

fn require_valid(cfg: &ScenarioConfig) -> Result<TimeGrid> {
    validate_scenario(cfg).solver_blocking().into_result()?;
    cfg.grid()
}

/// Schrödinger factor `iħ W' = -W H(t)`, `W(0) = U₀`, at the output times.
///
/// Constant `H` gives `W(t) = U₀ exp(iHt/ħ)` exactly. Otherwise the
/// time-ordered exponential is built as the midpoint product
/// `W(t + h) = W(t) exp(i H(t + h/2) h / ħ)` (second order, exactly unitary).
pub fn evolve_w(
    cache: &FactorizedCache,
    cfg: &ScenarioConfig,
) -> Result<Vec<(f64, UnitaryMatrix)>> {
    let grid = require_valid(cfg)?;
    let hbar = cfg.hbar;
    let u0 = &cache.u0;
    if cfg.hamiltonian.is_constant() {
        let eig = hermitian_eigendecompose(&cfg.hamiltonian.sample(0.0)?)?;
        return Ok(grid
            .output_times()
            .into_iter()
            .map(|t| (t, u0.compose(&eig.exp_i(t / hbar))))
            .collect());
    }
    let mut out = vec![(0.0, u0.clone())];
    let mut w = u0.clone();
    for k in 0..grid.steps() {
        let (t0, t1) = (grid.time(k), grid.time(k + 1));
        let h = t1 - t0;
        let mid = cfg.hamiltonian.sample(t0 + 0.5 * h)?;
        w = w.compose(&hermitian_eigendecompose(&mid)?.exp_i(h / hbar));
        if grid.is_output(k + 1) {
            out.push((t1, w.clone()));
        }
    }
    Ok(out)
}

/// Field factor `V(t) = exp((i/ħ) ∫₀ᵗ B² dt' (K₀K₀*)⁻¹)` at the output times.
pub fn evolve_v(
    cache: &FactorizedCache,
    cfg: &ScenarioConfig,
) -> Result<Vec<(f64, UnitaryMatrix)>> {
    let grid = require_valid(cfg)?;
    let eig = hermitian_eigendecompose(&cache.h_b_base)?;
    let mut integral = CumulativeIntegral::new(&cfg.field, 0.0);
    grid.output_times()
        .into_iter()
        .map(|t| {
            let phase = integral.advance_to(t)?;
            Ok((t, eig.exp_i(phase / cfg.hbar)))
        })
        .collect()
}

/// `K(t) = R V(t) W(t)` on the output grid.
pub fn evolve_factorized(cfg: &ScenarioConfig) -> Result<Trajectory> {
    require_valid(cfg)?;
    let cache = polar_init(&cfg.initial_k, cfg.pd_floor)?;
    let vs = evolve_v(&cache, cfg)?;
    let ws = evolve_w(&cache, cfg)?;
    let r = cache.radial.as_matrix();
    let states = vs
        .iter()
        .zip(&ws)
        .map(|((t, v), (_, w))| EvolutionState {
            t: *t,
            k: &(r * v.as_matrix()) * w.as_matrix(),
        })
        .collect();
    Ok(Trajectory {
        states,
        solver_tag: SolverTag::Factorized,
        scenario_digest: cfg.digest(),
    })
}

/// Outcome of a direct integration that may stop early at a rank loss.
#[derive(Debug, Clone)]
pub struct DirectRun {
    /// Emitted states; on failure the last good state is appended if it was
    /// not already on the output grid.
    pub trajectory: Trajectory,
    pub failure: Option<Error>,
}

/// `K' = (i/ħ)(K H + B² (K*)⁻¹)`.
fn direct_rhs(
    k: &ComplexMatrix,
    h: &HermitianMatrix,
    b: f64,
    hbar: f64,
    floor: f64,
) -> Result<ComplexMatrix> {
    let drive = &(k * h.as_matrix()) + &inverse_adjoint(k, floor)?.scale_real(b * b);
    Ok(drive.scale(C64::new(0.0, 1.0 / hbar)))
}

/// Fixed-step classical RK4 on the nonlinear equation, keeping partial
/// results when the operator loses rank mid-flight.
pub fn integrate_direct(cfg: &ScenarioConfig) -> Result<DirectRun> {
    let grid = require_valid(cfg)?;
    let (hbar, floor) = (cfg.hbar, cfg.pd_floor);
    let stage = |t: f64, k: &ComplexMatrix| -> Result<ComplexMatrix> {
        let h = cfg.hamiltonian.sample(t)?;
        let b = cfg.field.sample(t)?;
        direct_rhs(k, &h, b, hbar, floor)
    };

    let mut k = cfg.initial_k.clone();
    let mut states = vec![EvolutionState {
        t: 0.0,
        k: k.clone(),
    }];
    let mut failure = None;
    for step in 0..grid.steps() {
        let (t0, t1) = (grid.time(step), grid.time(step + 1));
        let h = t1 - t0;
        let next = (|| -> Result<ComplexMatrix> {
            let k1 = stage(t0, &k)?;
            let k2 = stage(t0 + 0.5 * h, &(&k + &k1.scale_real(0.5 * h)))?;
            let k3 = stage(t0 + 0.5 * h, &(&k + &k2.scale_real(0.5 * h)))?;
            let k4 = stage(t1, &(&k + &k3.scale_real(h)))?;
            let incr = &(&k1 + &k2.scale_real(2.0)) + &(&k3.scale_real(2.0) + &k4);
            let next = &k + &incr.scale_real(h / 6.0);
            // The endpoint must stay full rank too.
            inverse_adjoint(&next, floor)?;
            Ok(next)
        })();
        match next {
            Ok(next) => {
                k = next;
                if grid.is_output(step + 1) {
                    states.push(EvolutionState {
                        t: t1,
                        k: k.clone(),
                    });
                }
            }
            Err(e) => {
                if states.last().map(|s| s.t) != Some(t0) {
                    states.push(EvolutionState {
                        t: t0,
                        k: k.clone(),
                    });
                }
                failure = Some(e.at_time(t0));
                break;
            }
        }
    }
    Ok(DirectRun {
        trajectory: Trajectory {
            states,
            solver_tag: SolverTag::Direct,
            scenario_digest: cfg.digest(),
        },
        failure,
    })
}

/// As [`integrate_direct`], turning an early stop into `NearSingular`.
pub fn evolve_direct(cfg: &ScenarioConfig) -> Result<Trajectory> {
    let run = integrate_direct(cfg)?;
    match run.failure {
        Some(e) => Err(e),
        None => Ok(run.trajectory),
    }
}

/// Truncated power series of the unitary part and the size of its last term.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSum {
    pub u: ComplexMatrix,
    pub last_term_norm: f64,
}

/// `U(t) = Σ_{k<terms} (it/ħ)^k / k! Σ_j C(k,j) H_Bʲ U₀ H^{k-j}`.
///
/// The inner binomial sums obey `T_k = H_B T_{k-1} + T_{k-1} H`, which is how
/// the terms are accumulated.
pub fn series_unitary(
    u0: &ComplexMatrix,
    h: &HermitianMatrix,
    h_b: &HermitianMatrix,
    t: f64,
    hbar: f64,
    terms: usize,
) -> Result<SeriesSum> {
    if terms == 0 {
        return Err(Error::InvalidInput("series needs at least one term".into()));
    }
    let n = u0.require_square()?;
    if h.dim() != n || h_b.dim() != n {
        return Err(Error::ShapeMismatch(
            "series operands differ in dimension".into(),
        ));
    }
    let mut term = u0.clone();
    let mut sum = term.clone();
    for k in 1..terms {
        let next = &(h_b.as_matrix() * &term) + &(&term * h.as_matrix());
        term = next.scale(C64::new(0.0, t / (hbar * k as f64)));
        sum = &sum + &term;
    }
    Ok(SeriesSum {
        last_term_norm: term.frobenius_norm(),
        u: sum,
    })
}

/// Radius beyond which the series is flagged as slowly convergent.
const SERIES_RADIUS_WARN: f64 = 10.0;
const SERIES_TRUNCATION_TOL: f64 = 1e-10;

/// Power-series solution for constant `H` and `B`: `K(t) = R U(t)`.
pub fn evolve_series(cfg: &ScenarioConfig, terms: usize) -> Result<Trajectory> {
    let grid = require_valid(cfg)?;
    if !cfg.has_constant_coefficients() {
        return Err(Error::RequiresConstantCoefficients);
    }
    if terms == 0 {
        return Err(Error::InvalidInput("series needs at least one term".into()));
    }
    let cache = polar_init(&cfg.initial_k, cfg.pd_floor)?;
    let h = cfg.hamiltonian.sample(0.0)?;
    let b = cfg.field.sample(0.0)?;
    let h_b = cache.h_b_base.scale(b * b);
    let generator_norm = h.add(&h_b).as_matrix().frobenius_norm();
    let radius = generator_norm * grid.t_end() / cfg.hbar;
    if radius > SERIES_RADIUS_WARN {
        log::warn!("power series radius |H + H_B| t / hbar = {radius:.3} exceeds {SERIES_RADIUS_WARN}; convergence will be slow");
    }

    let mut states = Vec::new();
    for t in grid.output_times() {
        let s = series_unitary(cache.u0.as_matrix(), &h, &h_b, t, cfg.hbar, terms)?;
        let bound = SERIES_TRUNCATION_TOL * s.u.frobenius_norm();
        if t > 0.0 && s.last_term_norm > bound {
            return Err(Error::TruncationDominates {
                last_term: s.last_term_norm,
                bound,
            });
        }
        states.push(EvolutionState {
            t,
            k: cache.radial.as_matrix() * &s.u,
        });
    }
    Ok(Trajectory {
        states,
        solver_tag: SolverTag::Series,
        scenario_digest: cfg.digest(),
    })
}

/// Dispatches on the solver tag; `terms` only matters for the series.
pub fn evolve(cfg: &ScenarioConfig, solver: SolverTag, terms: usize) -> Result<Trajectory> {
    match solver {
        SolverTag::Direct => evolve_direct(cfg),
        SolverTag::Factorized => evolve_factorized(cfg),
        SolverTag::Series => evolve_series(cfg, terms),
    }
}
