use barkley_core::model_core::DEFAULT_UB_TOL;
use barkley_core::pde_sim::{
    build_initial_profile, growth_rate_probe, level_crossings, measure_wave_speed, run, settle, step_field,
    translation_mode_growth, SETTLE_TOL,
};
use barkley_core::{
    compute_equilibria, solve_loop_at_zeta, solve_singular_parameters, BarkleyError, Boundary, EquilibriumSet, Field1D,
    ModelParams, ProfileKind, ShootConfig, SimConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ZETA: f64 = 0.05;

struct FrontSetup {
    params: ModelParams,
    eqs: EquilibriumSet,
    c: f64,
}

fn front_setup() -> FrontSetup {
    let lp = solve_singular_parameters(0.7).unwrap();
    let sol = solve_loop_at_zeta(0.7, 1e-3, ZETA, (lp.d0, lp.mu0), 1e-8, 10, &ShootConfig::default()).unwrap();
    FrontSetup {
        params: ModelParams::new(0.7, sol.d_hat, ZETA, 1e-3, 0.0).unwrap(),
        eqs: lp.eqs,
        c: -sol.mu_hat - ZETA,
    }
}

fn speed_run(s: &FrontSetup, kind: ProfileKind, n: usize, level: f64) -> f64 {
    let f = build_initial_profile(&kind, &s.eqs, &s.params, 40.0, n, Boundary::Outflow).unwrap();
    let cfg = SimConfig { frame_speed: s.c, ..SimConfig::new(s.params, 40.0) };
    measure_wave_speed(&f, &cfg, level).unwrap().c
}

fn l1(v: &[f64], dx: f64) -> f64 {
    v.iter().sum::<f64>() * dx
}

#[test]
fn uniform_states_are_discrete_fixed_points() {
    let params = ModelParams::new(0.7, 0.9, ZETA, 1e-3, 0.0).unwrap();
    let eqs = compute_equilibria(0.7, DEFAULT_UB_TOL).unwrap();
    let cfg = SimConfig::new(params, 1.0);
    for kind in [ProfileKind::UniformLaminar, ProfileKind::UniformTurbulent] {
        let f = build_initial_profile(&kind, &eqs, &params, 10.0, 64, Boundary::Periodic).unwrap();
        let g = step_field(&f, &cfg).unwrap();
        for i in 0..f.n {
            assert!((g.q[i] - f.q[i]).abs() <= 1e-12 && (g.u[i] - f.u[i]).abs() <= 1e-12, "{kind:?}");
        }
    }
    let lam = build_initial_profile(&ProfileKind::UniformLaminar, &eqs, &params, 10.0, 64, Boundary::Periodic).unwrap();
    assert!(lam.q.iter().all(|&q| q == 0.0) && lam.u.iter().all(|&u| u == 2.0));
}

#[test]
fn transport_conserves_mass_on_a_ring() {
    let params = ModelParams::new(0.7, 0.6, 0.3, 1e-2, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut f = Field1D::uniform(10.0, 200, 0.0, 1.6, Boundary::Periodic).unwrap();
    for q in f.q.iter_mut() {
        *q = 0.5 + 0.4 * rng.gen::<f64>();
    }
    let cfg = SimConfig { reactions: false, frame_speed: 0.2, ..SimConfig::new(params, 1.0) };
    let mass = l1(&f.q, f.dx);
    for _ in 0..50 {
        let g = step_field(&f, &cfg).unwrap();
        assert!((l1(&g.q, g.dx) - l1(&f.q, f.dx)).abs() <= 1e-12 * mass);
        f = g;
    }
    for u in f.u.iter_mut() {
        *u = 1.2 + 0.8 * rng.gen::<f64>();
    }
    let before = l1(&f.u, f.dx);
    for _ in 0..50 {
        let g = step_field(&f, &cfg).unwrap();
        assert!((l1(&g.u, g.dx) - l1(&f.u, f.dx)).abs() <= 1e-12 * before);
        f = g;
    }
}

fn smooth_field() -> Field1D {
    let mut f = Field1D::uniform(10.0, 100, 0.0, 2.0, Boundary::Periodic).unwrap();
    for i in 0..f.n {
        let x = f.x(i) * std::f64::consts::TAU / 10.0;
        f.q[i] = 1.0 + 0.3 * x.sin();
        f.u[i] = 1.6 + 0.1 * x.cos();
    }
    f
}

fn advance(f: &Field1D, params: ModelParams, dt: f64, steps: usize) -> Field1D {
    let cfg = SimConfig { dt: Some(dt), ..SimConfig::new(params, 1.0) };
    let mut g = f.clone();
    for _ in 0..steps {
        g = step_field(&g, &cfg).unwrap();
    }
    g
}

#[test]
fn time_step_refinement_reduces_the_defect() {
    let params = ModelParams::new(0.9, 0.5, 0.1, 0.1, 0.0).unwrap();
    let f = smooth_field();
    let dt = 0.004;
    let reference = advance(&f, params, dt / 64.0, 64);
    let defect = |g: &Field1D| {
        g.q.iter().zip(&reference.q).chain(g.u.iter().zip(&reference.u)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let one = defect(&advance(&f, params, dt, 1));
    let two = defect(&advance(&f, params, dt / 2.0, 2));
    assert!(one > 0.0);
    assert!(two <= 0.5 * one, "{two} vs {one}");
}

#[test]
fn explicit_step_above_the_cfl_limit_is_rejected() {
    let params = ModelParams::new(0.9, 0.5, 0.1, 0.1, 0.0).unwrap();
    let cfg = SimConfig { dt: Some(1.0), ..SimConfig::new(params, 1.0) };
    assert!(matches!(step_field(&smooth_field(), &cfg), Err(BarkleyError::CflViolation { .. })));
}

#[test]
fn small_perturbations_of_either_uniform_state_decay() {
    let eps = 1e-2;
    let params = ModelParams::new(0.7, 0.9, ZETA, eps, 0.0).unwrap();
    let eqs = compute_equilibria(0.7, DEFAULT_UB_TOL).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (q0, u0) in [(0.0, 2.0), (eqs.q_b_plus, eqs.u_b)] {
        let mut f = Field1D::uniform(20.0, 100, q0, u0, Boundary::Periodic).unwrap();
        for i in 0..f.n {
            f.q[i] += 1e-3 * rng.gen::<f64>();
            f.u[i] += 1e-3 * (2.0 * rng.gen::<f64>() - 1.0);
        }
        let cfg = SimConfig { sample_every: 100.0, ..SimConfig::new(params, 50.0 / eps) };
        run(&mut f, &cfg, cfg.t_end, |_| Ok(())).unwrap();
        let dev = f.q.iter().map(|q| (q - q0).abs()).chain(f.u.iter().map(|u| (u - u0).abs())).fold(0.0, f64::max);
        assert!(dev < 1e-8, "state ({q0}, {u0}): deviation {dev}");
    }
}

#[test]
fn n_front_crosses_the_mid_level_2n_plus_1_times() {
    let s = front_setup();
    let kind = ProfileKind::NFront { n: 2, x0: 8.0, spacings: vec![5.0; 4] };
    let f = build_initial_profile(&kind, &s.eqs, &s.params, 40.0, 1000, Boundary::Outflow).unwrap();
    assert_eq!(level_crossings(&f, 0.5 * s.eqs.q_b_plus).len(), 5);
    let bad = ProfileKind::NFront { n: 2, x0: 8.0, spacings: vec![5.0; 3] };
    assert!(build_initial_profile(&bad, &s.eqs, &s.params, 40.0, 1000, Boundary::Outflow).is_err());
    let coarse = build_initial_profile(&ProfileKind::SimpleFront { x0: 8.0 }, &s.eqs, &s.params, 40.0, 800, Boundary::Outflow);
    assert!(matches!(coarse, Err(BarkleyError::GridTooCoarse { .. })));
}

#[test]
fn front_speed_matches_the_shooting_speed_and_converges_in_dx() {
    let s = front_setup();
    let level = 0.5 * s.eqs.q_f_plus;
    let coarse = speed_run(&s, ProfileKind::SimpleFront { x0: 12.0 }, 1000, level);
    assert!((coarse - s.c).abs() <= 0.05 * s.c, "measured {coarse}, expected {}", s.c);
    let fine = speed_run(&s, ProfileKind::SimpleFront { x0: 12.0 }, 2000, level);
    assert!((fine - coarse).abs() < 0.01 * fine.abs(), "{coarse} -> {fine}");
    assert!((fine - s.c).abs() < (coarse - s.c).abs());
}

#[test]
fn back_travels_with_the_front() {
    let s = front_setup();
    let back = speed_run(&s, ProfileKind::SimpleBack { x0: 12.0 }, 1000, 0.5 * s.eqs.q_b_plus);
    assert!((back - s.c).abs() <= 0.05 * s.c, "back speed {back}, expected {}", s.c);
}

#[test]
fn laminar_field_has_no_front() {
    let s = front_setup();
    let f = Field1D::uniform(40.0, 1000, 0.0, 2.0, Boundary::Outflow).unwrap();
    let cfg = SimConfig::new(s.params, 5.0);
    assert!(matches!(measure_wave_speed(&f, &cfg, 0.5), Err(BarkleyError::LostFront(_))));
}

#[test]
fn settled_front_is_linearly_stable() {
    let s = front_setup();
    let f = build_initial_profile(&ProfileKind::SimpleFront { x0: 12.0 }, &s.eqs, &s.params, 40.0, 1000, Boundary::Outflow)
        .unwrap();
    let cfg = SimConfig { frame_speed: s.c, ..SimConfig::new(s.params, 40.0) };
    assert!(matches!(growth_rate_probe(&f, &cfg, 5.0, 1), Err(BarkleyError::NotSettled { .. })));
    let settled = settle(&f, &cfg, SETTLE_TOL, 200.0).unwrap();
    assert!((settled.frame_speed - s.c).abs() <= 0.05 * s.c);
    let cfg = SimConfig { frame_speed: settled.frame_speed, ..cfg };
    let g = growth_rate_probe(&settled.field, &cfg, 30.0, 7).unwrap();
    assert!(g.rate <= 1e-2, "growth {}", g.rate);
    let t = translation_mode_growth(&settled.field, &cfg, 30.0).unwrap();
    assert!(t.rate.abs() <= 1e-3, "translation growth {}", t.rate);
}

#[test]
fn laminar_ring_decays_under_the_linearization() {
    let params = ModelParams::new(0.7, 0.9, ZETA, 1e-3, 0.0).unwrap();
    let f = Field1D::uniform(40.0, 400, 0.0, 2.0, Boundary::Periodic).unwrap();
    let cfg = SimConfig::new(params, 1.0);
    let g = growth_rate_probe(&f, &cfg, 30.0, 5).unwrap();
    assert!(g.rate < 0.0, "{}", g.rate);
}

#[test]
fn snapshot_round_trip() {
    let f = smooth_field();
    let mut buf = Vec::new();
    f.write_snapshot(&mut buf).unwrap();
    let g = Field1D::read_snapshot(buf.as_slice(), Boundary::Periodic).unwrap();
    assert_eq!(g.n, f.n);
    assert_eq!(g.q, f.q);
    assert_eq!(g.u, f.u);
    assert!(Field1D::read_snapshot("# t=0 n=3 L=1\n0 1\n".as_bytes(), Boundary::Periodic).is_err());
}
