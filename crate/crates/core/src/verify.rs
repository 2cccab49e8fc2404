//! Seeded property suite over the whole library.
//!
//! Every check draws from its own ChaCha stream (the check's index), so the
//! checks are independent of each other and of the order they run in.

use rand::Rng;
use serde::Serialize;

use crate::diagnostics::{
    critical_point, differential_check, euler_lagrange_residual, flux_distribution,
    hamiltonian_rate, invariant_report, special_diagonal_solution, CriticalPointSpec, FluxInput,
};
use crate::error::Result;
use crate::fixed::{evolve_direct, evolve_factorized, evolve_series, evolve_v, polar_init};
use crate::linalg::{ComplexMatrix, HermitianMatrix, C64};
use crate::moving::{
    gauge_equivalence_check, gauge_uniqueness_distance, weak_residual, AmbientSpace, AtimeForm,
    GaugeFunctions, MovingProblem,
};
use crate::random::{
    random_constant_scenario, random_hermitian, random_invertible, random_matrix,
    random_orthonormal, random_positive_definite, random_scenario, random_unitary, rng_from_seed,
    SeededRng,
};
use crate::scenario::{FieldProfile, HermitianProfile, ScenarioConfig, TimeGrid};

pub const DEFAULT_SEED: u64 = 42;

/// Which side of the threshold passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub bound: Bound,
    pub passed: bool,
    /// Set when the check raised instead of producing a value.
    pub error: Option<String>,
}

pub struct Check {
    pub name: &'static str,
    pub threshold: f64,
    pub bound: Bound,
    run: fn(&mut SeededRng) -> Result<f64>,
}

impl Check {
    pub fn evaluate(&self, seed: u64, stream: u64) -> CheckOutcome {
        let mut rng = rng_from_seed(seed);
        rng.set_stream(stream);
        let (value, error) = match (self.run)(&mut rng) {
            Ok(v) => (v, None),
            Err(e) => (f64::NAN, Some(e.to_string())),
        };
        let passed = error.is_none()
            && match self.bound {
                Bound::AtMost => value <= self.threshold,
                Bound::AtLeast => value >= self.threshold,
            };
        CheckOutcome {
            name: self.name,
            value,
            threshold: self.threshold,
            bound: self.bound,
            passed,
            error,
        }
    }
}

const RANDOM_SCENARIOS: usize = 50;

fn scenario_batch(rng: &mut SeededRng) -> Vec<ScenarioConfig> {
    (0..RANDOM_SCENARIOS)
        .map(|i| random_scenario(rng, 2 + i % 4, 1.0, 1e-3))
        .collect()
}

fn kk_drift_factorized(rng: &mut SeededRng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for cfg in scenario_batch(rng) {
        let traj = evolve_factorized(&cfg)?;
        worst = worst.max(invariant_report(&traj, &cfg)?.max_kk_star_drift());
    }
    Ok(worst)
}

fn kk_drift_direct(rng: &mut SeededRng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for mut cfg in scenario_batch(rng) {
        cfg.output_stride = 100;
        let traj = evolve_direct(&cfg)?;
        worst = worst.max(invariant_report(&traj, &cfg)?.max_kk_star_drift());
    }
    Ok(worst)
}

fn cross_solver(rng: &mut SeededRng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for mut cfg in scenario_batch(rng) {
        cfg.output_stride = 1000;
        let d = evolve_direct(&cfg)?;
        let f = evolve_factorized(&cfg)?;
        worst = worst.max(d.last().k.distance(&f.last().k));
    }
    Ok(worst)
}

fn series_agreement(rng: &mut SeededRng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let mut cfg = random_constant_scenario(rng, 2 + i % 4, 0.5, 1e-3);
        cfg.output_stride = 50;
        let s = evolve_series(&cfg, 30)?;
        let f = evolve_factorized(&cfg)?;
        let d = evolve_direct(&cfg)?;
        worst = worst.max(s.max_distance(&f)?).max(s.max_distance(&d)?);
    }
    Ok(worst)
}

fn v_commutes(rng: &mut SeededRng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for cfg in scenario_batch(rng).into_iter().take(10) {
        let cache = polar_init(&cfg.initial_k, cfg.pd_floor)?;
        let base = cache.h_b_base.as_matrix();
        for (_, v) in evolve_v(&cache, &cfg)?.iter().step_by(100) {
            let v = v.as_matrix();
            worst = worst.max((v * base).distance(&(base * v)));
        }
    }
    Ok(worst)
}

fn diagonal_closed_form(rng: &mut SeededRng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let n = 1 + i % 4;
        let energies: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let r0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.8..1.5)).collect();
        let phi0: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        let b = rng.gen_range(0.5..1.0);
        let h = HermitianMatrix::from_real_diag(&energies);
        let cfg = ScenarioConfig {
            hbar: 1.0,
            hamiltonian: HermitianProfile::constant(h.clone()),
            field: FieldProfile::constant(b),
            initial_k: special_diagonal_solution(&h, b, &r0, &phi0, 0.0, 1.0)?,
            t_end: 1.0,
            dt: 1e-3,
            output_stride: 10,
            pd_floor: crate::linalg::DEFAULT_PD_FLOOR,
        };
        for traj in [evolve_direct(&cfg)?, evolve_factorized(&cfg)?] {
            for s in &traj.states {
                let exact = special_diagonal_solution(&h, b, &r0, &phi0, s.t, 1.0)?;
                worst = worst.max(s.k.distance(&exact));
            }
        }
    }
    Ok(worst)
}

fn critical_spec(rng: &mut SeededRng, n: usize) -> CriticalPointSpec {
    let h = random_positive_definite(rng, n, 0.5, 2.0);
    let top = crate::linalg::hermitian_eigendecompose(&h)
        .expect("finite")
        .max();
    CriticalPointSpec {
        nu: top + 0.5,
        unitary: random_unitary(rng, n),
        hamiltonian: h,
        b: rng.gen_range(0.5..1.5),
    }
}

fn critical_residual(rng: &mut SeededRng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for n in 1..=5 {
        let spec = critical_spec(rng, n);
        let k = critical_point(&spec)?;
        let r = euler_lagrange_residual(&k, &spec.hamiltonian, spec.b, spec.nu)?;
        worst = worst.max(r / k.frobenius_norm());
    }
    Ok(worst)
}

fn critical_phase(rng: &mut SeededRng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for n in 1..=4 {
        let spec = critical_spec(rng, n);
        let k0 = critical_point(&spec)?;
        let cfg = ScenarioConfig {
            hbar: 1.0,
            hamiltonian: HermitianProfile::constant(spec.hamiltonian.clone()),
            field: FieldProfile::constant(spec.b),
            initial_k: k0.clone(),
            t_end: 1.0,
            dt: 1e-3,
            output_stride: 1000,
            pd_floor: crate::linalg::DEFAULT_PD_FLOOR,
        };
        let end = evolve_direct(&cfg)?;
        let last = end.last();
        let rotated = k0.scale(C64::from_polar(1.0, spec.nu * last.t));
        worst = worst.max(last.k.distance(&rotated));
    }
    Ok(worst)
}

fn differential_identity(rng: &mut SeededRng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let n = 2 + i % 4;
        let k = random_invertible(rng, n, 0.5, 1.5);
        let h = random_positive_definite(rng, n, 0.5, 2.0);
        let b = rng.gen_range(0.0..1.5);
        let l = random_matrix(rng, n, n);
        worst = worst.max(differential_check(&k, &h, b, &l)?.relative_gap());
    }
    Ok(worst)
}

/// Observed convergence order of the energy-rate identity, the smaller of the
/// two successive halvings over `dt = 1e-2, 5e-3, 2.5e-3`.
pub fn energy_rate_order(cfg: &ScenarioConfig, at: f64) -> Result<f64> {
    let mut gaps = Vec::new();
    for dt in [1e-2, 5e-3, 2.5e-3] {
        let mut c = cfg.clone();
        c.dt = dt;
        c.output_stride = 1;
        let traj = evolve_direct(&c)?;
        let index = (at / dt).round() as usize;
        let r = hamiltonian_rate(&traj.states, index, &c.hamiltonian, &c.field)?;
        gaps.push((r.predicted - r.observed).abs());
    }
    Ok((gaps[0] / gaps[1]).log2().min((gaps[1] / gaps[2]).log2()))
}

fn energy_rate(rng: &mut SeededRng) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for n in 2..=4 {
        let cfg = random_scenario(rng, n, 1.0, 1e-2);
        worst = worst.min(energy_rate_order(&cfg, 0.5)?);
    }
    Ok(worst)
}

fn trace_khk(rng: &mut SeededRng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for n in 2..=5 {
        let mut cfg = random_constant_scenario(rng, n, 1.0, 1e-3);
        cfg.output_stride = 50;
        let traj = evolve_direct(&cfg)?;
        let drift = invariant_report(&traj, &cfg)?.max_trace_khk_drift();
        worst = worst.max(drift.unwrap_or(f64::NAN));
    }
    Ok(worst)
}

/// Moving-domain problem with ambient dimension `m`, image dimension `m2`
/// and rank `n`, with mild frequencies so that centered differences at
/// `dt = 1e-3` are accurate.
pub fn random_moving_problem(
    rng: &mut SeededRng,
    m: usize,
    m2: usize,
    n: usize,
    dt: f64,
    time_dependent_h: bool,
) -> Result<MovingProblem> {
    let h0 = random_positive_definite(rng, m, 0.2, 1.0);
    let hamiltonian = if time_dependent_h {
        let h1 = random_positive_definite(rng, m, 0.2, 1.0);
        HermitianProfile::ramp(h0.clone(), h0.scale(0.8).add(&h1.scale(0.2)), 0.0, 1.0)
    } else {
        HermitianProfile::constant(h0)
    };
    let field = FieldProfile::Sinusoid {
        amplitude: rng.gen_range(0.1..0.2),
        frequency: rng.gen_range(0.2..0.5),
        phase: rng.gen_range(0.0..std::f64::consts::TAU),
        offset: rng.gen_range(0.4..0.6),
    };
    Ok(MovingProblem {
        space: AmbientSpace::new(m, m2, n, hamiltonian)?,
        field,
        hbar: 1.0,
        phi0: random_orthonormal(rng, m2, n),
        psi0: random_orthonormal(rng, m, n),
        a0: random_invertible(rng, n, 0.8, 1.2),
        grid: TimeGrid::new(dt, 1.0, 1)?,
        pd_floor: crate::linalg::DEFAULT_PD_FLOOR,
    })
}

fn moving_records(rng: &mut SeededRng, dt: f64) -> Result<Vec<crate::moving::ResidualRecord>> {
    let p = random_moving_problem(rng, 8, 5, 3, dt, true)?;
    let sol = p.solve(AtimeForm::PolarCorrected)?;
    weak_residual(&sol.states, &p.space, &p.field, p.hbar, p.pd_floor)
}

fn moving_image_drift(rng: &mut SeededRng) -> Result<f64> {
    Ok(moving_records(rng, 1e-3)?
        .iter()
        .map(|r| r.image_drift)
        .fold(0.0, f64::max))
}

fn moving_radial_drift(rng: &mut SeededRng) -> Result<f64> {
    Ok(moving_records(rng, 1e-3)?
        .iter()
        .map(|r| r.radial_drift)
        .fold(0.0, f64::max))
}

/// Observed order of the weak residual over `dt = 4e-3, 2e-3, 1e-3`.
pub fn weak_residual_order(problem: &MovingProblem) -> Result<f64> {
    let mut maxima = Vec::new();
    for dt in [4e-3, 2e-3, 1e-3] {
        let mut p = problem.clone();
        p.grid = TimeGrid::new(dt, p.grid.t_end(), 1)?;
        let sol = p.solve(AtimeForm::PolarCorrected)?;
        let recs = weak_residual(&sol.states, &p.space, &p.field, p.hbar, p.pd_floor)?;
        maxima.push(recs.iter().map(|r| r.weak_residual).fold(0.0, f64::max));
    }
    Ok((maxima[0] / maxima[1])
        .log2()
        .min((maxima[1] / maxima[2]).log2()))
}

fn moving_residual_order(rng: &mut SeededRng) -> Result<f64> {
    let p = random_moving_problem(rng, 8, 5, 3, 1e-3, true)?;
    weak_residual_order(&p)
}

fn rank_one_closed_form(rng: &mut SeededRng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let r0 = rng.gen_range(0.5..1.5);
        let phase0 = rng.gen_range(0.0..std::f64::consts::TAU);
        let b = rng.gen_range(0.5..1.5);
        let m = 4;
        let phi = random_orthonormal(rng, 3, 1);
        let psi = random_orthonormal(rng, m, 1);
        let a0 = ComplexMatrix::from_diag(&[C64::from_polar(r0, phase0)]);
        let problem = MovingProblem {
            space: AmbientSpace::new(
                m,
                3,
                1,
                HermitianProfile::constant(HermitianMatrix::zeros(m)),
            )?,
            field: FieldProfile::constant(b),
            hbar: 1.0,
            phi0: phi.clone(),
            psi0: psi.clone(),
            a0,
            grid: TimeGrid::new(1e-2, 1.0, 1)?,
            pd_floor: crate::linalg::DEFAULT_PD_FLOOR,
        };
        let outer = &phi * &psi.adjoint();
        for s in problem.solve(AtimeForm::PolarCorrected)?.states {
            let coeff = C64::from_polar(r0, phase0 + b * b * s.t / (r0 * r0));
            worst = worst.max(s.k.distance(&outer.scale(coeff)));
        }
    }
    Ok(worst)
}

fn random_gauge(rng: &mut SeededRng, n: usize) -> Result<GaugeFunctions> {
    GaugeFunctions::from_samples(&[
        (
            0.0,
            random_hermitian(rng, n).into_matrix(),
            random_hermitian(rng, n).into_matrix(),
        ),
        (
            1.0,
            random_hermitian(rng, n).into_matrix(),
            random_hermitian(rng, n).into_matrix(),
        ),
    ])
}

fn gauge_invariance(rng: &mut SeededRng) -> Result<f64> {
    let p = random_moving_problem(rng, 8, 5, 3, 1e-3, false)?;
    let g = random_gauge(rng, 3)?;
    Ok(gauge_equivalence_check(&p, &g)?.k_distance)
}

fn gauge_uniqueness(rng: &mut SeededRng) -> Result<f64> {
    let p = random_moving_problem(rng, 8, 5, 3, 1e-3, false)?;
    let a = random_gauge(rng, 3)?;
    let b = random_gauge(rng, 3)?;
    gauge_uniqueness_distance(&p, &a, &b)
}

fn flux_normalization(rng: &mut SeededRng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for n in 1..=6 {
        let k = random_matrix(rng, n, n);
        let upsilon: Vec<C64> = random_matrix(rng, n, 1).data().to_vec();
        let total_flux = rng.gen_range(0.1..10.0);
        let v = flux_distribution(
            &k,
            &FluxInput {
                upsilon,
                total_flux,
            },
        )?;
        if v.iter().any(|x| *x < 0.0) {
            return Ok(f64::INFINITY);
        }
        worst = worst.max((v.iter().sum::<f64>() - total_flux).abs() / total_flux);
    }
    Ok(worst)
}

/// The full suite, in reporting order.
pub fn suite() -> Vec<Check> {
    use Bound::*;
    let check = |name, threshold, bound, run| Check {
        name,
        threshold,
        bound,
        run,
    };
    vec![
        check(
            "kk_conservation_factorized",
            1e-10,
            AtMost,
            kk_drift_factorized,
        ),
        check("kk_conservation_direct", 1e-8, AtMost, kk_drift_direct),
        check("cross_solver_direct_factorized", 1e-6, AtMost, cross_solver),
        check("series_agreement", 1e-9, AtMost, series_agreement),
        check("v_commutes_with_h_b", 1e-12, AtMost, v_commutes),
        check("diagonal_closed_form", 1e-8, AtMost, diagonal_closed_form),
        check("critical_point_residual", 1e-11, AtMost, critical_residual),
        check(
            "critical_point_phase_rotation",
            1e-8,
            AtMost,
            critical_phase,
        ),
        check(
            "energy_differential_identity",
            1e-6,
            AtMost,
            differential_identity,
        ),
        check("energy_rate_order", 1.9, AtLeast, energy_rate),
        check("trace_khk_invariant", 1e-8, AtMost, trace_khk),
        check("moving_image_drift", 1e-10, AtMost, moving_image_drift),
        check("moving_radial_drift", 1e-9, AtMost, moving_radial_drift),
        check(
            "moving_weak_residual_order",
            1.9,
            AtLeast,
            moving_residual_order,
        ),
        check(
            "moving_rank_one_closed_form",
            1e-10,
            AtMost,
            rank_one_closed_form,
        ),
        check("gauge_equivalence", 1e-8, AtMost, gauge_invariance),
        check("gauge_uniqueness", 1e-8, AtMost, gauge_uniqueness),
        check("flux_normalization", 1e-12, AtMost, flux_normalization),
    ]
}

/// Runs the suite sequentially.
pub fn run_suite(seed: u64) -> Vec<CheckOutcome> {
    suite()
        .iter()
        .enumerate()
        .map(|(i, c)| c.evaluate(seed, i as u64))
        .collect()
}
