use std::f64::consts::PI;

use mesodyn::fixed::{
    evolve_direct, evolve_factorized, evolve_series, evolve_v, evolve_w, integrate_direct,
    polar_init, series_unitary, SolverTag,
};
use mesodyn::linalg::{ComplexMatrix, HermitianMatrix, UnitaryMatrix, C64};
use mesodyn::random::{
    random_constant_scenario, random_invertible, random_positive_definite, random_scenario,
    rng_from_seed,
};
use mesodyn::scenario::{FieldProfile, HermitianProfile, ScenarioConfig};
use mesodyn::Error;
use proptest::prelude::*;

fn scenario(
    h: HermitianMatrix,
    field: FieldProfile,
    k0: ComplexMatrix,
    t_end: f64,
    dt: f64,
) -> ScenarioConfig {
    ScenarioConfig {
        hbar: 1.0,
        hamiltonian: HermitianProfile::constant(h),
        field,
        initial_k: k0,
        t_end,
        dt,
        output_stride: 1,
        pd_floor: 1e-12,
    }
}

fn scalar(z: C64) -> ComplexMatrix {
    ComplexMatrix::from_diag(&[z])
}

fn cis(theta: f64) -> C64 {
    C64::new(theta.cos(), theta.sin())
}

#[test]
fn polar_init_examples() {
    let c = polar_init(&ComplexMatrix::from_real_diag(&[2.0, 3.0]), 1e-12).unwrap();
    assert!(
        c.radial
            .as_matrix()
            .distance(&ComplexMatrix::from_real_diag(&[2.0, 3.0]))
            < 1e-14
    );
    assert!(c.u0.as_matrix().distance(&ComplexMatrix::identity(2)) < 1e-14);
    assert!(
        c.h_b_base
            .as_matrix()
            .distance(&ComplexMatrix::from_real_diag(&[0.25, 1.0 / 9.0]))
            < 1e-14
    );

    let c = polar_init(&scalar(C64::new(0.0, 1.0)), 1e-12).unwrap();
    assert!((c.radial.as_matrix()[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
    assert!((c.u0.as_matrix()[(0, 0)] - C64::new(0.0, 1.0)).norm() < 1e-15);
    assert!((c.h_b_base.as_matrix()[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);

    let k0 = random_invertible(&mut rng_from_seed(3), 4, 0.3, 2.0);
    let c = polar_init(&k0, 1e-12).unwrap();
    let rebuilt = c.radial.as_matrix() * c.u0.as_matrix();
    assert!(rebuilt.distance(&k0) <= 1e-12 * k0.frobenius_norm());
    let r2 = c.radial.as_matrix() * c.radial.as_matrix();
    assert!(r2.distance(k0.gram_outer().as_matrix()) <= 1e-11 * r2.frobenius_norm());
}

#[test]
fn polar_init_rejects_singular() {
    let k0 = ComplexMatrix::from_real_diag(&[1.0, 0.0]);
    assert!(matches!(
        polar_init(&k0, 1e-12),
        Err(Error::NearSingular { .. })
    ));
}

#[test]
fn w_diagonal_and_trivial_cases() {
    let (e1, e2) = (0.7, 1.9);
    let cfg = scenario(
        HermitianMatrix::from_real_diag(&[e1, e2]),
        FieldProfile::constant(0.0),
        ComplexMatrix::identity(2),
        1.0,
        0.1,
    );
    let cache = polar_init(&cfg.initial_k, 1e-12).unwrap();
    for (t, w) in evolve_w(&cache, &cfg).unwrap() {
        let expected = ComplexMatrix::from_diag(&[cis(e1 * t), cis(e2 * t)]);
        assert!(w.as_matrix().distance(&expected) < 1e-13, "t={t}");
    }

    let k0 = random_invertible(&mut rng_from_seed(4), 3, 0.5, 1.5);
    let cfg = scenario(
        HermitianMatrix::zeros(3),
        FieldProfile::constant(1.0),
        k0,
        1.0,
        0.25,
    );
    let cache = polar_init(&cfg.initial_k, 1e-12).unwrap();
    for (_, w) in evolve_w(&cache, &cfg).unwrap() {
        assert!(w.as_matrix().distance(cache.u0.as_matrix()) < 1e-14);
    }
}

#[test]
fn w_midpoint_product_is_second_order() {
    let mut rng = rng_from_seed(11);
    let h0 = random_positive_definite(&mut rng, 3, 0.5, 2.0);
    let h1 = random_positive_definite(&mut rng, 3, 0.5, 2.0);
    let k0 = random_invertible(&mut rng, 3, 0.5, 1.5);
    let w_end = |dt: f64| {
        let mut cfg = scenario(h0.clone(), FieldProfile::constant(1.0), k0.clone(), 1.0, dt);
        cfg.hamiltonian = HermitianProfile::ramp(h0.clone(), h1.clone(), 0.0, 1.0);
        let cache = polar_init(&cfg.initial_k, 1e-12).unwrap();
        evolve_w(&cache, &cfg)
            .unwrap()
            .pop()
            .unwrap()
            .1
            .into_matrix()
    };
    let fine = w_end(0.0025);
    let half_fine = w_end(0.005);
    // Richardson extrapolation for a second-order method.
    let reference = &fine + &(&fine - &half_fine).scale_real(1.0 / 3.0);
    let e1 = w_end(0.02).distance(&reference);
    let e2 = w_end(0.01).distance(&reference);
    let ratio = e1 / e2;
    assert!((3.5..4.5).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn v_examples() {
    let k0 = random_invertible(&mut rng_from_seed(5), 2, 0.5, 1.5);
    let cfg = scenario(
        HermitianMatrix::identity(2),
        FieldProfile::constant(0.0),
        k0,
        1.0,
        0.5,
    );
    let cache = polar_init(&cfg.initial_k, 1e-12).unwrap();
    for (_, v) in evolve_v(&cache, &cfg).unwrap() {
        assert!(v.as_matrix().distance(&ComplexMatrix::identity(2)) < 1e-15);
    }

    // K₀K₀* = diag(1, 4), B = 1, t = π.
    let cfg = scenario(
        HermitianMatrix::identity(2),
        FieldProfile::constant(1.0),
        ComplexMatrix::from_real_diag(&[1.0, 2.0]),
        PI,
        PI / 4.0,
    );
    let cache = polar_init(&cfg.initial_k, 1e-12).unwrap();
    let (t, v) = evolve_v(&cache, &cfg).unwrap().pop().unwrap();
    assert_eq!(t, PI);
    let expected = ComplexMatrix::from_diag(&[C64::new(-1.0, 0.0), cis(PI / 4.0)]);
    assert!(v.as_matrix().distance(&expected) < 1e-13);

    // B = sin t on [0, π]: ∫ sin² = π/2, so V = exp(iπ/2) = i.
    let sine = FieldProfile::Sinusoid {
        amplitude: 1.0,
        frequency: 1.0 / (2.0 * PI),
        phase: 0.0,
        offset: 0.0,
    };
    let cfg = scenario(
        HermitianMatrix::identity(1),
        sine,
        ComplexMatrix::identity(1),
        PI,
        PI / 10.0,
    );
    let cache = polar_init(&cfg.initial_k, 1e-12).unwrap();
    let (_, v) = evolve_v(&cache, &cfg).unwrap().pop().unwrap();
    assert!((v.as_matrix()[(0, 0)] - C64::new(0.0, 1.0)).norm() < 1e-10);
}

#[test]
fn scalar_closed_form_is_e_to_2it() {
    let cfg = scenario(
        HermitianMatrix::identity(1),
        FieldProfile::constant(1.0),
        ComplexMatrix::identity(1),
        1.0,
        1e-3,
    );
    for traj in [
        evolve_factorized(&cfg).unwrap(),
        evolve_direct(&cfg).unwrap(),
        evolve_series(&cfg, 40).unwrap(),
    ] {
        for s in &traj.states {
            assert!(
                (s.k[(0, 0)] - cis(2.0 * s.t)).norm() < 1e-10,
                "{:?} at t={}",
                traj.solver_tag,
                s.t
            );
        }
    }
}

#[test]
fn zero_coefficients_freeze_k() {
    let k0 = random_invertible(&mut rng_from_seed(6), 3, 0.5, 1.5);
    let cfg = scenario(
        HermitianMatrix::zeros(3),
        FieldProfile::constant(0.0),
        k0.clone(),
        1.0,
        0.1,
    );
    for traj in [
        evolve_factorized(&cfg).unwrap(),
        evolve_direct(&cfg).unwrap(),
    ] {
        for s in &traj.states {
            assert!(s.k.distance(&k0) < 1e-14);
        }
    }
}

#[test]
fn grid_and_metadata() {
    let mut cfg = random_scenario(&mut rng_from_seed(7), 2, 1.0, 0.03);
    cfg.output_stride = 10;
    let traj = evolve_factorized(&cfg).unwrap();
    assert_eq!(traj.solver_tag, SolverTag::Factorized);
    assert_eq!(traj.scenario_digest, cfg.digest());
    let times = traj.times();
    assert_eq!(times[0], 0.0);
    assert_eq!(*times.last().unwrap(), 1.0);
    assert!(times.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(times, evolve_direct(&cfg).unwrap().times());
    assert!(traj.first().k.distance(&cfg.initial_k) <= 1e-12 * cfg.initial_k.frobenius_norm());
}

#[test]
fn random_3x3_cross_solver() {
    let cfg = random_scenario(&mut rng_from_seed(8), 3, 1.0, 1e-3);
    let d = evolve_direct(&cfg).unwrap();
    let f = evolve_factorized(&cfg).unwrap();
    assert!(d.last().k.distance(&f.last().k) <= 1e-7);
}

#[test]
fn direct_conserves_kk_star() {
    let cfg = random_scenario(&mut rng_from_seed(9), 4, 1.0, 1e-3);
    let traj = evolve_direct(&cfg).unwrap();
    let g0 = cfg.initial_k.gram_outer();
    for s in &traj.states {
        assert!(s.k.gram_outer().as_matrix().distance(g0.as_matrix()) <= 1e-8);
    }
}

#[test]
fn direct_is_fourth_order() {
    let cfg = random_scenario(&mut rng_from_seed(10), 3, 1.0, 0.05);
    let end = |dt: f64| {
        let mut c = cfg.clone();
        c.dt = dt;
        evolve_direct(&c).unwrap().last().k.clone()
    };
    let (k1, k2, k3) = (end(0.05), end(0.025), end(0.0125));
    let order = (k1.distance(&k2) / k2.distance(&k3)).log2();
    assert!(order > 3.7 && order < 4.3, "observed order {order}");
}

#[test]
fn direct_stops_with_last_good_state() {
    // A step far outside RK4's stability region destroys the conserved
    // spectrum of KK* and trips the rank floor.
    let cfg = ScenarioConfig {
        pd_floor: 0.5,
        ..scenario(
            HermitianMatrix::zeros(2),
            FieldProfile::constant(3.0),
            ComplexMatrix::from_real_diag(&[1.0, 0.6]),
            5.0,
            0.5,
        )
    };
    let run = integrate_direct(&cfg).unwrap();
    let Some(Error::NearSingular {
        last_good_t: Some(t),
        ..
    }) = run.failure
    else {
        panic!("expected a mid-flight NearSingular, got {:?}", run.failure);
    };
    assert_eq!(run.trajectory.last().t, t);
    assert!(t < 5.0);
    assert!(matches!(
        evolve_direct(&cfg),
        Err(Error::NearSingular { .. })
    ));
}

#[test]
fn series_first_order_term() {
    let mut rng = rng_from_seed(12);
    let h = random_positive_definite(&mut rng, 2, 0.5, 2.0);
    let k0 = random_invertible(&mut rng, 2, 0.5, 1.5);
    let b = 0.8;
    let cache = polar_init(&k0, 1e-12).unwrap();
    let h_b = cache.h_b_base.scale(b * b);
    let u0 = cache.u0.as_matrix();
    let first_order = |dt: f64| {
        let drift = &(u0 * h.as_matrix()) + &(h_b.as_matrix() * u0);
        u0 + &drift.scale(C64::new(0.0, dt))
    };
    let gap = |dt: f64| {
        let s = series_unitary(u0, &h, &h_b, dt, 1.0, 2).unwrap();
        s.u.distance(&first_order(dt))
    };
    assert!(gap(1e-3) < 1e-14);
    // Against the full propagator the two-term truncation is O(dt²).
    let full = |dt: f64| series_unitary(u0, &h, &h_b, dt, 1.0, 40).unwrap().u;
    let e1 = full(1e-2).distance(&first_order(1e-2));
    let e2 = full(5e-3).distance(&first_order(5e-3));
    assert!((e1 / e2 - 4.0).abs() < 0.2, "ratio {}", e1 / e2);
}

#[test]
fn series_at_zero_is_u0() {
    let mut rng = rng_from_seed(13);
    let h = random_positive_definite(&mut rng, 3, 0.5, 2.0);
    let u0 = UnitaryMatrix::identity(3);
    for terms in [1, 2, 7] {
        let s = series_unitary(u0.as_matrix(), &h, &h, 0.0, 1.0, terms).unwrap();
        assert_eq!(&s.u, u0.as_matrix());
    }
}

#[test]
fn series_matches_factorized() {
    let mut cfg = random_constant_scenario(&mut rng_from_seed(14), 2, 0.5, 1e-3);
    cfg.output_stride = 100;
    let s = evolve_series(&cfg, 30).unwrap();
    let f = evolve_factorized(&cfg).unwrap();
    assert!(s.max_distance(&f).unwrap() <= 1e-9);
    assert_eq!(s.solver_tag, SolverTag::Series);
}

#[test]
fn series_errors() {
    let cfg = random_scenario(&mut rng_from_seed(15), 2, 1.0, 0.1);
    assert_eq!(
        evolve_series(&cfg, 30),
        Err(Error::RequiresConstantCoefficients)
    );
    let cfg = random_constant_scenario(&mut rng_from_seed(15), 2, 1.0, 0.1);
    assert!(matches!(
        evolve_series(&cfg, 3),
        Err(Error::TruncationDominates { .. })
    ));
    assert!(matches!(
        evolve_series(&cfg, 0),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn invalid_scenarios_are_refused() {
    let mut cfg = random_scenario(&mut rng_from_seed(16), 2, 1.0, 0.1);
    cfg.dt = 2.0;
    assert!(evolve_factorized(&cfg).is_err());
    assert!(evolve_direct(&cfg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn factorized_conserves_kk_star(seed in any::<u64>(), n in 1usize..=4) {
        let cfg = random_scenario(&mut rng_from_seed(seed), n, 1.0, 0.01);
        let traj = evolve_factorized(&cfg).unwrap();
        let g0 = cfg.initial_k.gram_outer();
        let scale = g0.as_matrix().frobenius_norm();
        for s in &traj.states {
            prop_assert!(s.k.gram_outer().as_matrix().distance(g0.as_matrix()) <= 1e-10 * scale);
        }
    }

    #[test]
    fn v_commutes_with_its_generator(seed in any::<u64>(), n in 1usize..=4) {
        let cfg = random_scenario(&mut rng_from_seed(seed), n, 1.0, 0.05);
        let cache = polar_init(&cfg.initial_k, 1e-12).unwrap();
        let base = cache.h_b_base.as_matrix();
        for (_, v) in evolve_v(&cache, &cfg).unwrap() {
            let v = v.as_matrix();
            prop_assert!((v * base).distance(&(base * v)) <= 1e-12);
        }
    }

    #[test]
    fn direct_halving_converges_at_fourth_order(seed in any::<u64>()) {
        let cfg = random_scenario(&mut rng_from_seed(seed), 2, 0.5, 0.02);
        let end = |dt: f64| {
            let mut c = cfg.clone();
            c.dt = dt;
            evolve_direct(&c).unwrap().last().k.clone()
        };
        let (a, b, c) = (end(0.02), end(0.01), end(0.005));
        let order = (a.distance(&b) / b.distance(&c)).log2();
        prop_assert!(order > 3.5, "order {}", order);
    }
}
