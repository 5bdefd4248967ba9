use barkley_core::model_core::{
    compute_equilibria, compute_ub, middle_equilibrium, reaction_f, reaction_g, tw_vector_field, ModelParams,
    PhasePoint, DEFAULT_UB_TOL,
};
use barkley_core::spectra::{
    classify_hyperbolicity, eigen_decompose_3x3, jacobian_rescaled, jacobian_tw, kinetics_stability, Stability,
    DEFAULT_EIGEN_TOL,
};
use barkley_core::{solve_singular_parameters, BarkleyError};
use proptest::prelude::*;

/// Root of `0.8 + 1.3 (q(u) - 1)^2 - u` located by a dense scan, for `r = 1.2`.
fn scanned_ub_at_1_2() -> f64 {
    let res = |u: f64| {
        let q = (2.0 - u) / (2.0 * (u - 1.0));
        0.8 + 1.3 * (q - 1.0).powi(2) - u
    };
    let (a, b) = (1.2, 4.0 / 3.0);
    let m = 200_000;
    let mut prev = res(a + 1e-12);
    for k in 1..=m {
        let u = a + (b - a) * k as f64 / m as f64;
        let cur = res(u);
        if prev.signum() != cur.signum() {
            let h = (b - a) / m as f64;
            return u - h * cur / (cur - prev);
        }
        prev = cur;
    }
    panic!("no sign change")
}

#[test]
fn ub_matches_independent_scan() {
    let ub = compute_ub(1.2, DEFAULT_UB_TOL).unwrap();
    let scan = scanned_ub_at_1_2();
    assert!((ub - scan).abs() < 1e-8, "{ub} vs {scan}");
    assert!((ub - 1.2401).abs() < 1e-4);
}

#[test]
fn ub_limits() {
    assert!((compute_ub(2.0 / 3.0 + 1e-10, DEFAULT_UB_TOL).unwrap() - 4.0 / 3.0).abs() < 1e-4);
    assert!((compute_ub(1e8, DEFAULT_UB_TOL).unwrap() - 1.2).abs() < 1e-4);
    assert!(matches!(compute_ub(0.6, DEFAULT_UB_TOL), Err(BarkleyError::NoRoot(_))));
}

#[test]
fn ub_decreases_in_r() {
    let mut prev = f64::INFINITY;
    let mut r = 0.67;
    while r <= 100.0 {
        let ub = compute_ub(r, DEFAULT_UB_TOL).unwrap();
        assert!(ub < prev, "u_b not decreasing at r = {r}");
        assert!(ub > 1.2 && ub < 4.0 / 3.0);
        prev = ub;
        r *= 1.1;
    }
}

#[test]
fn equilibria_structure_and_limits() {
    let eqs = compute_equilibria(1e8, DEFAULT_UB_TOL).unwrap();
    assert!((eqs.q_f_plus - 2.0).abs() < 1e-4);
    assert_eq!(eqs.x1, PhasePoint::new(0.0, 0.0, 2.0));
    let near = compute_equilibria(2.0 / 3.0 + 1e-10, DEFAULT_UB_TOL).unwrap();
    assert!((near.x2.q - 1.0).abs() < 1e-3 && (near.x2.u - 4.0 / 3.0).abs() < 1e-4);
    let eqs = compute_equilibria(1.2, DEFAULT_UB_TOL).unwrap();
    assert!(reaction_f(eqs.q_b_plus, eqs.u_b, 1.2).abs() < 1e-10);
    assert!(reaction_g(eqs.x2.q, eqs.x2.u).abs() < 1e-10);
    assert_eq!(eqs.y1, PhasePoint::new(eqs.q_f_plus, 0.0, 2.0));
    assert_eq!(eqs.y2, PhasePoint::new(0.0, 0.0, eqs.u_b));
}

#[test]
fn reaction_examples() {
    assert_eq!(reaction_f(0.0, 1.7, 1.0), 0.0);
    for r in [0.7, 1.0, 3.0] {
        assert_eq!(reaction_f(1.0, 2.0 - r, r), 0.0);
    }
    assert_eq!(reaction_g(0.0, 2.0), 0.0);
    assert_eq!(reaction_g(5.3, 1.0), 1.0);
    assert!(reaction_g(2.0, 1.2).abs() < 1e-15);
}

#[test]
fn vector_field_vanishes_at_equilibria() {
    let eqs = compute_equilibria(0.9, DEFAULT_UB_TOL).unwrap();
    let p = ModelParams::new(0.9, 0.7, 0.1, 1e-3, 0.2).unwrap();
    assert_eq!(tw_vector_field(eqs.x1, &p).unwrap(), [0.0, 0.0, 0.0]);
    let v = tw_vector_field(eqs.x2, &p).unwrap();
    assert!(v.iter().all(|x| x.abs() < 1e-9), "{v:?}");
    let fast = p.with_eps(0.0);
    let v = tw_vector_field(eqs.y1, &fast).unwrap();
    assert!(v.iter().all(|x| x.abs() < 1e-12));
    let v = tw_vector_field(PhasePoint::new(0.4, -0.2, 1.5), &fast).unwrap();
    assert_eq!(v[2], 0.0);
}

#[test]
fn pole_is_reported() {
    let p = ModelParams::new(0.9, 0.7, 0.1, 1e-3, 1.5).unwrap();
    let err = tw_vector_field(PhasePoint::new(0.2, 0.0, 1.5), &p).unwrap_err();
    assert!(matches!(err, BarkleyError::PoleAtWaveSpeed { .. }));
    assert!(jacobian_tw(PhasePoint::new(0.2, 0.0, 1.5 + 1e-10), &p).is_err());
}

#[test]
fn jacobian_entry_at_laminar_state() {
    let p = ModelParams::new(0.8, 1.3, 0.0, 0.0, 0.0).unwrap();
    let j = jacobian_tw(PhasePoint::new(0.0, 0.0, 2.0), &p).unwrap();
    assert!((j[1][0] - 0.1 / 1.3).abs() < 1e-15);
    assert_eq!(j[2], [0.0, 0.0, 0.0]);
}

fn fd_jacobian(p: PhasePoint, params: &ModelParams) -> [[f64; 3]; 3] {
    let h = 1e-6;
    let mut out = [[0.0; 3]; 3];
    for k in 0..3 {
        let mut a = p.to_array();
        let mut b = p.to_array();
        a[k] += h;
        b[k] -= h;
        let fa = tw_vector_field(PhasePoint::from_array(a), params).unwrap();
        let fb = tw_vector_field(PhasePoint::from_array(b), params).unwrap();
        for i in 0..3 {
            out[i][k] = (fa[i] - fb[i]) / (2.0 * h);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn parabola_points_are_zeros_of_f(q in -1.0f64..3.0, r in 0.67f64..50.0) {
        let u = 2.0 - r + (r + 0.1) * (q - 1.0).powi(2);
        prop_assert!(reaction_f(q, u, r).abs() <= 1e-12 * (1.0 + r + u.abs()) * (1.0 + q.abs()));
    }

    #[test]
    fn branch_roots_are_symmetric(r in 0.67f64..1e3) {
        let eqs = compute_equilibria(r, DEFAULT_UB_TOL).unwrap();
        prop_assert!((eqs.q_f_minus - (2.0 - eqs.q_f_plus)).abs() <= 1e-12);
        prop_assert!((eqs.q_b_minus - (2.0 - eqs.q_b_plus)).abs() <= 1e-12);
        prop_assert!(eqs.q_b_plus > 1.0);
        prop_assert!((eqs.q_f_plus - (1.0 + (r / (r + 0.1)).sqrt())).abs() <= 1e-15);
    }

    #[test]
    fn analytic_jacobian_matches_differences(
        q in -0.5f64..2.5, s in -1.0f64..1.0, u in 1.1f64..2.2,
        r in 0.7f64..3.0, d in 0.2f64..2.0, eps in 0.0f64..0.1,
    ) {
        let params = ModelParams::from_mu(r, d, -0.9, eps, 0.3).unwrap();
        let p = PhasePoint::new(q, s, u);
        let a = jacobian_tw(p, &params).unwrap();
        let f = fd_jacobian(p, &params);
        for i in 0..3 {
            for k in 0..3 {
                prop_assert!((a[i][k] - f[i][k]).abs() <= 1e-6 * (1.0 + a[i][k].abs()), "entry ({i},{k})");
            }
        }
    }

    #[test]
    fn eigen_residuals_are_small(m in prop::array::uniform3(prop::array::uniform3(-3.0f64..3.0))) {
        if let Ok(sd) = eigen_decompose_3x3(&m, DEFAULT_EIGEN_TOL) {
            prop_assert!(sd.residual <= 1e-10);
            prop_assert!(sd.lambda[0] <= sd.lambda[1] && sd.lambda[1] <= sd.lambda[2]);
        }
    }
}

#[test]
fn eigen_trivial_matrices() {
    let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let sd = eigen_decompose_3x3(&id, DEFAULT_EIGEN_TOL).unwrap();
    assert_eq!(sd.lambda, [1.0, 1.0, 1.0]);
    assert!(sd.multiple);
    let sd = eigen_decompose_3x3(&[[-1.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, -2.0]], DEFAULT_EIGEN_TOL).unwrap();
    assert_eq!(sd.lambda, [-2.0, -1.0, 3.0]);
    assert_eq!(sd.vectors, [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
    let rot = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 2.0]];
    assert!(matches!(eigen_decompose_3x3(&rot, DEFAULT_EIGEN_TOL), Err(BarkleyError::ComplexSpectrum { .. })));
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Roots of `det(J - lambda I)` by sign scanning and bisection.
fn char_poly_roots(j: &[[f64; 3]; 3]) -> Vec<f64> {
    let p = |l: f64| {
        let mut m = *j;
        for (i, row) in m.iter_mut().enumerate() {
            row[i] -= l;
        }
        det3(&m)
    };
    let mut grid: Vec<f64> = (0..=4000).map(|k| -3.0 + 6.0 * k as f64 / 4000.0).collect();
    grid.extend((1..200).map(|k| -1e-2 + 2e-2 * k as f64 / 200.0));
    grid.sort_by(f64::total_cmp);
    let mut roots = Vec::new();
    for w in grid.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        if p(a) == 0.0 {
            roots.push(a);
            continue;
        }
        if p(a).signum() == p(b).signum() {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if p(a).signum() == p(m).signum() {
                a = m;
            } else {
                b = m;
            }
        }
        roots.push(0.5 * (a + b));
    }
    roots
}

#[test]
fn laminar_spectrum_matches_characteristic_polynomial() {
    let lp = solve_singular_parameters(0.7).unwrap();
    let p = ModelParams::from_mu(0.7, lp.d0, lp.mu0, 1e-3, 0.0).unwrap();
    let j = jacobian_tw(lp.eqs.x1, &p).unwrap();
    let sd = eigen_decompose_3x3(&j, DEFAULT_EIGEN_TOL).unwrap();
    let roots = char_poly_roots(&j);
    assert_eq!(roots.len(), 3);
    for (a, b) in sd.lambda.iter().zip(&roots) {
        assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
    }
    assert!(sd.lambda[0] < 0.0 && sd.lambda[1] < 0.0 && sd.lambda[2] > 0.0);
}

#[test]
fn hyperbolicity_at_singular_parameters() {
    let lp = solve_singular_parameters(0.7).unwrap();
    let p = ModelParams::from_mu(0.7, lp.d0, lp.mu0, 1e-4, 0.0).unwrap();
    let h = classify_hyperbolicity(&lp.eqs, &p).unwrap();
    assert!(h.h0 && h.h1);
    for s in [h.x1.spectral, h.x2.spectral] {
        assert!(s.is_saddle_21());
        assert!(s.beta.unwrap() > 1.0);
    }
    let singular = ModelParams::from_mu(0.7, lp.d0, lp.mu0, 0.0, 0.0).unwrap();
    assert!(matches!(classify_hyperbolicity(&lp.eqs, &singular), Err(BarkleyError::NotHyperbolic { .. })));
}

#[test]
fn principal_eigenvalue_vanishes_with_eps() {
    let lp = solve_singular_parameters(0.7).unwrap();
    let mut prev: Option<[f64; 3]> = None;
    for eps in [1e-2, 1e-3, 1e-4] {
        let p = ModelParams::from_mu(0.7, lp.d0, lp.mu0, eps, 0.0).unwrap();
        let h = classify_hyperbolicity(&lp.eqs, &p).unwrap();
        let l = h.x2.spectral.lambda;
        if let Some(q) = prev {
            assert!(l[1].abs() < q[1].abs());
        }
        assert!(l[0] < -0.1 && l[2] > 0.1);
        prev = Some(l);
    }
}

#[test]
fn rescaled_spectrum_is_scaled() {
    let lp = solve_singular_parameters(0.8).unwrap();
    let eps = 2e-3;
    let p = ModelParams::from_mu(0.8, lp.d0, lp.mu0, eps, 0.0).unwrap();
    let a = eigen_decompose_3x3(&jacobian_tw(lp.eqs.x2, &p).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
    let b = eigen_decompose_3x3(&jacobian_rescaled(lp.eqs.x2, &p).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
    for (x, y) in a.lambda.iter().zip(&b.lambda) {
        assert!((x / eps - y).abs() < 1e-9 * y.abs());
    }
}

#[test]
fn wave_speed_above_ub_is_rejected() {
    let eqs = compute_equilibria(0.9, DEFAULT_UB_TOL).unwrap();
    let p = ModelParams::new(0.9, 1.0, 0.0, 1e-3, eqs.u_b + 0.01).unwrap();
    assert!(matches!(classify_hyperbolicity(&eqs, &p), Err(BarkleyError::InvalidInput(_))));
}

#[test]
fn kinetics_bistability() {
    let eqs = compute_equilibria(1.0, DEFAULT_UB_TOL).unwrap();
    assert_eq!(kinetics_stability(0.0, 2.0, 1.0, 0.1).unwrap(), Stability::Stable);
    assert_eq!(kinetics_stability(eqs.q_b_plus, eqs.u_b, 1.0, 0.1).unwrap(), Stability::Stable);
    let (q, u) = middle_equilibrium(1.0, DEFAULT_UB_TOL).unwrap();
    assert!(q < 1.0);
    assert_eq!(kinetics_stability(q, u, 1.0, 0.1).unwrap(), Stability::Unstable);
    assert!(matches!(kinetics_stability(0.5, 1.5, 1.0, 0.1), Err(BarkleyError::NotAnEquilibrium { .. })));
}
