//! Heteroclinic front and back of the perturbed system (`eps > 0`).
//!
//! A connection is found by matching two pieces in the section `q = q_{j,+}/2`:
//! the one-dimensional unstable manifold of the source equilibrium, integrated
//! forward, and the stable fast fiber of the target slow manifold, integrated
//! backward from a base point `u*`. The base point is tuned by a secant
//! iteration so that both pieces hit the section at the same `u`; the remaining
//! mismatch in `s` is the splitting function driven to zero by Newton's method
//! in `(D, mu)`.
//!
//! A converged orbit is stored as five pieces: a linear tail at the source, the
//! numerical unstable segment (`xi <= 0`), the numerical fiber segment, a slow
//! segment parametrised by the first-order slow manifold plus a fast decay kept
//! in logarithmic form, and a linear tail at the target.

use serde::Serialize;

use crate::error::{ensure_finite, BarkleyError, Result};
use crate::model_core::{
    compute_equilibria, reaction_f_dq, reaction_g, tw_vector_field, EquilibriumSet,
    ModelParams, PhasePoint, DEFAULT_UB_TOL,
};
use crate::ode::{integrate, integrate_plain, Crossing, OdeConfig, Solution};
use crate::signed_log::SignedLog;
use crate::singular_loop::{solve_singular_parameters, Side};
use crate::spectra::{dot, eigen_decompose_3x3, jacobian_tw, left_eigenvectors, norm, SpectralData, DEFAULT_EIGEN_TOL};

/// Shooting parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootConfig {
    /// Offset of the unstable-manifold seed along `e3`.
    pub delta_source: f64,
    /// Offset of the fiber start from the slow manifold.
    pub delta_fiber: f64,
    pub ode: OdeConfig,
    /// Newton stops once the mismatch norm is below this.
    pub newton_tol: f64,
    /// Convergence is reported when the final mismatch is below this.
    pub miss_tol: f64,
    /// Central difference step in `(D, mu)`.
    pub fd_step: f64,
    pub max_newton: usize,
    pub max_secant: usize,
    /// Slow segment span cap in units of `1 / |lambda2(target)|`.
    pub span_factor: f64,
    /// Maximum integration time for the fast pieces.
    pub fast_span: f64,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self {
            delta_source: 1e-7,
            delta_fiber: 1e-6,
            ode: OdeConfig::default(),
            newton_tol: 1e-11,
            miss_tol: 1e-8,
            fd_step: 1e-6,
            max_newton: 25,
            max_secant: 40,
            span_factor: 50.0,
            fast_span: 2000.0,
        }
    }
}

/// Distance from the target below which the slow segment ends.
pub const SLOW_END_DISTANCE: f64 = 1e-10;

fn source_target(side: Side, eqs: &EquilibriumSet) -> (PhasePoint, PhasePoint, f64) {
    match side {
        Side::Front => (eqs.x1, eqs.x2, 0.5 * eqs.q_f_plus),
        Side::Back => (eqs.x2, eqs.x1, 0.5 * eqs.q_b_plus),
    }
}

fn forward_crossing(side: Side) -> Crossing {
    match side {
        Side::Front => Crossing::Rising,
        Side::Back => Crossing::Falling,
    }
}

fn field(params: &ModelParams) -> impl Fn(f64, &[f64; 3]) -> Result<[f64; 3]> + '_ {
    move |_t, y| tw_vector_field(PhasePoint::from_array(*y), params)
}

/// Trajectory of the traveling-wave system from `seed` over `xi in [0, span]` (negative spans run backward).
pub fn integrate_orbit(seed: PhasePoint, params: &ModelParams, span: f64, cfg: &OdeConfig) -> Result<Vec<(f64, PhasePoint)>> {
    if !seed.is_finite() {
        return Err(BarkleyError::InvalidInput("seed must be finite".into()));
    }
    let sol = integrate_plain(field(params), 0.0, seed.to_array(), span, cfg)?;
    Ok(sol.t.iter().zip(&sol.y).map(|(&t, y)| (t, PhasePoint::from_array(*y))).collect())
}

/// Fast stable eigenvalue of the layer problem at `(q, u)`.
fn fast_stable_rate(q: f64, u: f64, params: &ModelParams) -> f64 {
    let a = (u + params.mu()) / params.d;
    let b = -reaction_f_dq(q, u, params.r) / params.d;
    0.5 * (a - (a * a + 4.0 * b).sqrt())
}

/// First-order slow manifold through the target equilibrium.
#[derive(Debug, Clone, Copy)]
struct SlowManifold {
    side: Side,
    params: ModelParams,
}

impl SlowManifold {
    fn point(&self, u: f64) -> [f64; 3] {
        match self.side {
            Side::Back => [0.0, 0.0, u],
            Side::Front => {
                let p = &self.params;
                let rp = p.r + 0.1;
                let arg = (p.r + u - 2.0).max(0.0);
                let q0 = 1.0 + (arg / rp).sqrt();
                let dq0 = 0.5 / (arg * rp).sqrt();
                let s1 = dq0 * p.eps * reaction_g(q0, u) / (u - p.c);
                let fq = reaction_f_dq(q0, u, p.r);
                [q0 + (u + p.mu()) * s1 / fq, s1, u]
            }
        }
    }

    /// Fast fiber direction pointing away from the manifold toward the section.
    fn fiber_direction(&self, u: f64) -> [f64; 3] {
        let q = self.point(u)[0];
        let l1 = fast_stable_rate(q, u, &self.params);
        match self.side {
            Side::Front => [-1.0, -l1, 0.0],
            Side::Back => [1.0, l1, 0.0],
        }
    }

    fn u_rate(&self, u: f64) -> f64 {
        let h = self.point(u);
        self.params.eps * reaction_g(h[0], u) / (u - self.params.c)
    }

    fn s_slope(&self, u: f64) -> f64 {
        let h = 1e-6 * u.abs().max(1.0);
        (self.point(u + h)[1] - self.point(u - h)[1]) / (2.0 * h)
    }
}

/// Section data of one splitting evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mismatch {
    /// `s` of the stable fiber minus `s` of the unstable manifold at the section.
    pub miss: f64,
    /// Base point of the matched fiber on the slow manifold.
    pub u_star: f64,
    pub unstable_point: PhasePoint,
    pub fiber_point: PhasePoint,
    /// Residual `u` mismatch left by the secant iteration.
    pub u_residual: f64,
}

struct Pieces {
    mismatch: Mismatch,
    unstable: Solution<3>,
    fiber: Solution<3>,
    e3: [f64; 3],
    lambda3: f64,
}

fn unstable_direction(side: Side, source: PhasePoint, params: &ModelParams) -> Result<(f64, [f64; 3])> {
    let spec = eigen_decompose_3x3(&jacobian_tw(source, params)?, DEFAULT_EIGEN_TOL)?;
    let mut v = spec.vectors[2];
    let want_positive_q = side == Side::Front;
    if (v[0] > 0.0) != want_positive_q {
        v = [-v[0], -v[1], -v[2]];
    }
    Ok((spec.lambda[2], v))
}

fn fiber_to_section(
    side: Side,
    manifold: &SlowManifold,
    u_star: f64,
    q_section: f64,
    cfg: &ShootConfig,
) -> Result<Solution<3>> {
    let h = manifold.point(u_star);
    let w = manifold.fiber_direction(u_star);
    let start = [h[0] + cfg.delta_fiber * w[0], h[1] + cfg.delta_fiber * w[1], h[2]];
    let sol = integrate(
        field(&manifold.params),
        0.0,
        start,
        -cfg.fast_span,
        &cfg.ode,
        Some((move |_t: f64, y: &[f64; 3]| y[0] - q_section, Crossing::Either)),
    )?;
    if sol.event.is_none() {
        return Err(BarkleyError::NoConvergence(format!("{} fiber from u* = {u_star} missed the section", side.name())));
    }
    Ok(sol)
}

fn compute_pieces(side: Side, eqs: &EquilibriumSet, params: &ModelParams, cfg: &ShootConfig) -> Result<Pieces> {
    let (source, _target, q_section) = source_target(side, eqs);
    let (lambda3, e3) = unstable_direction(side, source, params)?;
    let seed = [
        source.q + cfg.delta_source * e3[0],
        source.s + cfg.delta_source * e3[1],
        source.u + cfg.delta_source * e3[2],
    ];
    let unstable = integrate(
        field(params),
        0.0,
        seed,
        cfg.fast_span,
        &cfg.ode,
        Some((move |_t: f64, y: &[f64; 3]| y[0] - q_section, forward_crossing(side))),
    )?;
    let (_, p) = unstable
        .event
        .ok_or_else(|| BarkleyError::NoConvergence(format!("{} unstable manifold missed the section", side.name())))?;

    let manifold = SlowManifold { side, params: *params };
    let u_at = |u_star: f64| -> Result<(Solution<3>, f64)> {
        let sol = fiber_to_section(side, &manifold, u_star, q_section, cfg)?;
        let y = sol.event.unwrap().1;
        Ok((sol, y[2] - p[2]))
    };
    let mut u0 = p[2];
    let (mut best, mut f0) = u_at(u0)?;
    let mut u1 = u0 - f0;
    let mut best_u = u0;
    let mut best_f = f0;
    for _ in 0..cfg.max_secant {
        if best_f.abs() < 1e-15 {
            break;
        }
        let (sol, f1) = u_at(u1)?;
        if f1.abs() < best_f.abs() {
            best = sol;
            best_u = u1;
            best_f = f1;
        }
        if f1.abs() < 1e-15 || f1 == f0 {
            break;
        }
        let next = u1 - f1 * (u1 - u0) / (f1 - f0);
        u0 = u1;
        f0 = f1;
        u1 = next;
    }
    if best_f.abs() > 1e-9 {
        return Err(BarkleyError::NoConvergence(format!(
            "{} fiber base point search stalled with u mismatch {best_f:e}",
            side.name()
        )));
    }
    let fy = best.event.unwrap().1;
    Ok(Pieces {
        mismatch: Mismatch {
            miss: fy[1] - p[1],
            u_star: best_u,
            unstable_point: PhasePoint::from_array(p),
            fiber_point: PhasePoint::from_array(fy),
            u_residual: best_f,
        },
        unstable,
        fiber: best,
        e3,
        lambda3,
    })
}

/// Splitting of one side at the given parameters.
pub fn section_mismatch(side: Side, eqs: &EquilibriumSet, params: &ModelParams, cfg: &ShootConfig) -> Result<Mismatch> {
    Ok(compute_pieces(side, eqs, params, cfg)?.mismatch)
}

#[derive(Debug, Clone, Copy)]
struct SourceTail {
    xi_start: f64,
    lambda3: f64,
    delta: f64,
    e3: [f64; 3],
    point: PhasePoint,
}

#[derive(Debug, Clone, Copy)]
struct TargetTail {
    xi_start: f64,
    lambda1: f64,
    lambda2: f64,
    e1: [f64; 3],
    e2: [f64; 3],
    /// Coefficient of the fast decay along `e1`.
    fast: SignedLog,
    /// Coefficient of the slow decay along `e2`.
    slow: f64,
    point: PhasePoint,
}

/// A numerically computed heteroclinic connection with `xi = 0` on the section `q = q_{j,+}/2`.
#[derive(Debug, Clone)]
pub struct OrbitSolution {
    pub side: Side,
    pub eps: f64,
    pub d_hat: f64,
    pub mu_hat: f64,
    pub params: ModelParams,
    /// Samples `(xi, state)` from the source neighbourhood to the target neighbourhood.
    pub trajectory: Vec<(f64, PhasePoint)>,
    /// `|s_fiber - s_unstable|` at the section.
    pub miss_norm: f64,
    pub mismatch: Mismatch,
    /// True when the slow segment stopped at the span cap instead of reaching the target.
    pub span_capped: bool,
    unstable: Solution<3>,
    unstable_time: f64,
    fiber: Solution<3>,
    fiber_time: f64,
    slow: Solution<2>,
    u_target: f64,
    manifold: SlowManifold,
    delta_fiber: f64,
    source: SourceTail,
    target: TargetTail,
}

impl OrbitSolution {
    /// Range `[xi_min, xi_max]` covered by numerical data; tails extend beyond.
    pub fn numeric_range(&self) -> (f64, f64) {
        (self.source.xi_start, self.target.xi_start)
    }

    fn slow_state(&self, xi: f64) -> ([f64; 3], SignedLog, f64) {
        let y = self.slow.eval(xi - self.fiber_time).unwrap_or_else(|| self.slow.last().1);
        let u = y[0] + self.u_target;
        let h = self.manifold.point(u);
        let w = self.manifold.fiber_direction(u);
        let amp = SignedLog::new(1, self.delta_fiber.ln() + y[1]);
        (h, amp, w[1])
    }

    /// Approximate state at any `xi`.
    pub fn eval(&self, xi: f64) -> Result<PhasePoint> {
        let (lo, hi) = self.numeric_range();
        if xi < lo {
            let s = &self.source;
            let a = s.delta * (s.lambda3 * (xi - lo)).exp();
            return Ok(PhasePoint::new(s.point.q + a * s.e3[0], s.point.s + a * s.e3[1], s.point.u + a * s.e3[2]));
        }
        if xi <= 0.0 {
            return self.unstable.eval(xi + self.unstable_time).map(PhasePoint::from_array).ok_or_else(|| {
                BarkleyError::InvalidInput(format!("xi = {xi} outside the unstable segment"))
            });
        }
        if xi <= self.fiber_time {
            return self
                .fiber
                .eval(xi - self.fiber_time)
                .map(PhasePoint::from_array)
                .ok_or_else(|| BarkleyError::InvalidInput(format!("xi = {xi} outside the fiber segment")));
        }
        if xi <= hi {
            let (h, amp, _) = self.slow_state(xi);
            let w = self.manifold.fiber_direction(h[2]);
            let a = amp.to_f64();
            return Ok(PhasePoint::new(h[0] + a * w[0], h[1] + a * w[1], h[2]));
        }
        let t = &self.target;
        let tau = xi - hi;
        let slow = t.slow * (t.lambda2 * tau).exp();
        let fast = t.fast.scale_exp(t.lambda1 * tau).to_f64();
        Ok(PhasePoint::new(
            t.point.q + slow * t.e2[0] + fast * t.e1[0],
            t.point.s + slow * t.e2[1] + fast * t.e1[1],
            t.point.u + slow * t.e2[2] + fast * t.e1[2],
        ))
    }

    /// `(s, ds/dxi)` at any `xi`, in logarithmic form so tails never underflow.
    pub fn eval_log(&self, xi: f64) -> Result<(SignedLog, SignedLog)> {
        let (lo, hi) = self.numeric_range();
        if xi < lo {
            let s = &self.source;
            let val = SignedLog::from_f64(s.delta * s.e3[1]).scale_exp(s.lambda3 * (xi - lo));
            return Ok((val, val * SignedLog::from_f64(s.lambda3)));
        }
        if xi <= self.fiber_time {
            let p = self.eval(xi)?;
            let d = tw_vector_field(p, &self.params)?;
            return Ok((SignedLog::from_f64(p.s), SignedLog::from_f64(d[1])));
        }
        if xi <= hi {
            let (h, amp, ws) = self.slow_state(xi);
            let u = h[2];
            let udot = self.manifold.u_rate(u);
            let l1 = fast_stable_rate(h[0], u, &self.params);
            let fast_s = amp * SignedLog::from_f64(ws);
            let s = SignedLog::from_f64(h[1]).add(fast_s);
            let sdot = SignedLog::from_f64(self.manifold.s_slope(u) * udot).add(fast_s * SignedLog::from_f64(l1));
            return Ok((s, sdot));
        }
        let t = &self.target;
        let tau = xi - hi;
        let slow = SignedLog::from_f64(t.slow * t.e2[1]).scale_exp(t.lambda2 * tau);
        let fast = (t.fast * SignedLog::from_f64(t.e1[1])).scale_exp(t.lambda1 * tau);
        let s = slow.add(fast);
        let sdot = (slow * SignedLog::from_f64(t.lambda2)).add(fast * SignedLog::from_f64(t.lambda1));
        Ok((s, sdot))
    }

    /// Final state of the numerical part.
    pub fn end_point(&self) -> PhasePoint {
        self.trajectory.last().unwrap().1
    }
}

fn assemble(side: Side, eqs: &EquilibriumSet, params: &ModelParams, cfg: &ShootConfig) -> Result<OrbitSolution> {
    let pieces = compute_pieces(side, eqs, params, cfg)?;
    let (source, target, _) = source_target(side, eqs);
    let unstable_time = pieces.unstable.event.unwrap().0;
    let fiber_time = -pieces.fiber.event.unwrap().0;
    let manifold = SlowManifold { side, params: *params };
    let u_target = target.u;

    let target_spec = eigen_decompose_3x3(&jacobian_tw(target, params)?, DEFAULT_EIGEN_TOL)?;
    let span = cfg.span_factor / target_spec.lambda[1].abs();
    let m = manifold;
    let slow = integrate(
        move |_t: f64, y: &[f64; 2]| {
            let u = y[0] + u_target;
            let h = m.point(u);
            Ok([m.u_rate(u), fast_stable_rate(h[0], u, &m.params)])
        },
        0.0,
        [pieces.mismatch.u_star - u_target, 0.0],
        span,
        &cfg.ode,
        Some((|_t: f64, y: &[f64; 2]| y[0].abs() - SLOW_END_DISTANCE, Crossing::Falling)),
    )?;
    let span_capped = slow.event.is_none();
    let (slow_t_end, slow_end_y) = slow.last();
    let slow_end = fiber_time + slow_t_end;

    let left = left_eigenvectors(&jacobian_tw(target, params)?, DEFAULT_EIGEN_TOL)?;
    let (e1, e2) = (target_spec.vectors[0], target_spec.vectors[1]);
    let u_end = slow_end_y[0] + u_target;
    let h_end = manifold.point(u_end);
    let disp = [h_end[0] - target.q, h_end[1] - target.s, h_end[2] - target.u];
    let slow_coef = dot(&left[1], &disp) / dot(&left[1], &e2);
    let w_end = manifold.fiber_direction(u_end);
    let fast_coef = SignedLog::from_f64(dot(&left[0], &w_end) / dot(&left[0], &e1))
        * SignedLog::new(1, cfg.delta_fiber.ln() + slow_end_y[1]);

    let mut trajectory: Vec<(f64, PhasePoint)> = Vec::new();
    for (t, y) in pieces.unstable.t.iter().zip(&pieces.unstable.y) {
        trajectory.push((t - unstable_time, PhasePoint::from_array(*y)));
    }
    for (t, y) in pieces.fiber.t.iter().zip(&pieces.fiber.y).rev().skip(1) {
        trajectory.push((t + fiber_time, PhasePoint::from_array(*y)));
    }

    let mut orbit = OrbitSolution {
        side,
        eps: params.eps,
        d_hat: params.d,
        mu_hat: params.mu(),
        params: *params,
        trajectory,
        miss_norm: pieces.mismatch.miss.abs(),
        mismatch: pieces.mismatch,
        span_capped,
        unstable: pieces.unstable,
        unstable_time,
        fiber: pieces.fiber,
        fiber_time,
        slow,
        u_target,
        manifold,
        delta_fiber: cfg.delta_fiber,
        source: SourceTail {
            xi_start: -unstable_time,
            lambda3: pieces.lambda3,
            delta: cfg.delta_source,
            e3: pieces.e3,
            point: source,
        },
        target: TargetTail {
            xi_start: slow_end,
            lambda1: target_spec.lambda[0],
            lambda2: target_spec.lambda[1],
            e1,
            e2,
            fast: fast_coef,
            slow: slow_coef,
            point: target,
        },
    };
    let slow_samples: Vec<f64> = orbit.slow.t.iter().skip(1).map(|t| t + fiber_time).collect();
    for xi in slow_samples {
        let p = orbit.eval(xi)?;
        orbit.trajectory.push((xi, p));
    }
    Ok(orbit)
}

/// Orbit of one side at fixed `(D, mu)` without solving for the connection.
pub fn build_orbit(side: Side, params: &ModelParams, cfg: &ShootConfig) -> Result<OrbitSolution> {
    let eqs = compute_equilibria(params.r, DEFAULT_UB_TOL)?;
    assemble(side, &eqs, params, cfg)
}

fn check_shoot_inputs(r: f64, eps: f64, c: f64) -> Result<EquilibriumSet> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(BarkleyError::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let eqs = compute_equilibria(r, DEFAULT_UB_TOL)?;
    if c >= eqs.u_b {
        return Err(BarkleyError::InvalidInput(format!("c = {c} must stay below u_b = {}", eqs.u_b)));
    }
    Ok(eqs)
}

/// Single connection: solves the splitting of one side for `mu` at the fixed `D` of the guess.
pub fn shoot_connection(side: Side, r: f64, eps: f64, guess: (f64, f64), cfg: &ShootConfig) -> Result<OrbitSolution> {
    let eqs = check_shoot_inputs(r, eps, 0.0)?;
    let (d, mut mu) = guess;
    let miss = |mu: f64| -> Result<f64> {
        let p = ModelParams::from_mu(r, d, mu, eps, 0.0)?;
        Ok(section_mismatch(side, &eqs, &p, cfg)?.miss)
    };
    let mut m = miss(mu)?;
    for _ in 0..cfg.max_newton {
        if m.abs() <= cfg.newton_tol {
            break;
        }
        let h = cfg.fd_step;
        let slope = (miss(mu + h)? - miss(mu - h)?) / (2.0 * h);
        if slope == 0.0 || !slope.is_finite() {
            return Err(BarkleyError::NewtonDiverged(format!("flat splitting in mu at mu = {mu}")));
        }
        let step = -m / slope;
        let mut alpha = 1.0;
        loop {
            let trial = mu + alpha * step;
            match miss(trial) {
                Ok(mt) if mt.abs() <= (1.0 - 1e-4 * alpha) * m.abs() => {
                    mu = trial;
                    m = mt;
                    break;
                }
                _ if alpha > 1e-3 => alpha *= 0.5,
                _ => {
                    mu = trial;
                    m = miss(mu)?;
                    break;
                }
            }
        }
    }
    if m.abs() > cfg.miss_tol {
        return Err(BarkleyError::NewtonDiverged(format!("{} splitting stuck at {m:e}", side.name())));
    }
    let params = ModelParams::from_mu(r, d, mu, eps, 0.0)?;
    assemble(side, &eqs, &params, cfg)
}

/// Simultaneous front and back connection at shared `(D, mu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopSolution {
    pub r: f64,
    pub eps: f64,
    pub c: f64,
    pub d_hat: f64,
    pub mu_hat: f64,
    pub front: Mismatch,
    pub back: Mismatch,
    pub miss_norm: f64,
    pub iterations: usize,
    /// Condition number of the final finite-difference Jacobian.
    pub jacobian_condition: f64,
}

impl LoopSolution {
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::from_mu(self.r, self.d_hat, self.mu_hat, self.eps, self.c)
    }
}

fn condition_2x2(j: &[[f64; 2]; 2]) -> f64 {
    let a = j[0][0] * j[0][0] + j[1][0] * j[1][0];
    let b = j[0][0] * j[0][1] + j[1][0] * j[1][1];
    let d = j[0][1] * j[0][1] + j[1][1] * j[1][1];
    let tr = a + d;
    let disc = ((a - d) * (a - d) + 4.0 * b * b).sqrt();
    let (smax, smin) = ((0.5 * (tr + disc)).sqrt(), (0.5 * (tr - disc)).max(0.0).sqrt());
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Two-parameter Newton on `(D, mu)` for both splittings at once.
pub fn solve_loop(r: f64, eps: f64, c: f64, guess: (f64, f64), cfg: &ShootConfig) -> Result<LoopSolution> {
    let eqs = check_shoot_inputs(r, eps, c)?;
    let eval = |d: f64, mu: f64| -> Result<(Mismatch, Mismatch)> {
        let p = ModelParams::from_mu(r, d, mu, eps, c)?;
        Ok((section_mismatch(Side::Front, &eqs, &p, cfg)?, section_mismatch(Side::Back, &eqs, &p, cfg)?))
    };
    let vec_of = |m: &(Mismatch, Mismatch)| [m.0.miss, m.1.miss];
    let nrm = |v: [f64; 2]| v[0].hypot(v[1]);
    let (mut d, mut mu) = guess;
    let mut cur = eval(d, mu)?;
    let mut jac = [[0.0; 2]; 2];
    let mut iterations = 0;
    while nrm(vec_of(&cur)) > cfg.newton_tol && iterations < cfg.max_newton {
        iterations += 1;
        let h = cfg.fd_step;
        for (col, (dd, dm)) in [(h, 0.0), (0.0, h)].into_iter().enumerate() {
            let plus = vec_of(&eval(d + dd, mu + dm)?);
            let minus = vec_of(&eval(d - dd, mu - dm)?);
            for row in 0..2 {
                jac[row][col] = (plus[row] - minus[row]) / (2.0 * h);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(BarkleyError::NewtonDiverged(format!("singular shooting Jacobian at D = {d}, mu = {mu}")));
        }
        let f = vec_of(&cur);
        let step = [
            -(jac[1][1] * f[0] - jac[0][1] * f[1]) / det,
            -(-jac[1][0] * f[0] + jac[0][0] * f[1]) / det,
        ];
        let base = nrm(f);
        let mut alpha = 1.0;
        loop {
            let trial = (d + alpha * step[0], mu + alpha * step[1]);
            match eval(trial.0, trial.1) {
                Ok(m) if nrm(vec_of(&m)) <= (1.0 - 1e-4 * alpha) * base => {
                    d = trial.0;
                    mu = trial.1;
                    cur = m;
                    break;
                }
                _ if alpha > 1e-3 => alpha *= 0.5,
                Ok(m) => {
                    d = trial.0;
                    mu = trial.1;
                    cur = m;
                    break;
                }
                Err(e) => return Err(BarkleyError::NewtonDiverged(format!("line search failed: {e}"))),
            }
        }
    }
    let miss_norm = nrm(vec_of(&cur));
    if miss_norm > cfg.miss_tol {
        return Err(BarkleyError::NewtonDiverged(format!(
            "mismatch {miss_norm:e} after {iterations} iterations at eps = {eps}"
        )));
    }
    Ok(LoopSolution {
        r,
        eps,
        c,
        d_hat: d,
        mu_hat: mu,
        front: cur.0,
        back: cur.1,
        miss_norm,
        iterations,
        jacobian_condition: if iterations > 0 { condition_2x2(&jac) } else { f64::NAN },
    })
}

/// Front and back orbits of a solved loop.
pub fn loop_orbits(sol: &LoopSolution, cfg: &ShootConfig) -> Result<(OrbitSolution, OrbitSolution)> {
    let eqs = compute_equilibria(sol.r, DEFAULT_UB_TOL)?;
    let p = sol.params()?;
    Ok((assemble(Side::Front, &eqs, &p, cfg)?, assemble(Side::Back, &eqs, &p, cfg)?))
}

/// Loop at a prescribed pipe advection `zeta`: iterates `c = -mu_hat - zeta` until `c` settles to `tol`.
///
/// The returned solution's `params()` carry `zeta` up to the final `c` update.
pub fn solve_loop_at_zeta(
    r: f64,
    eps: f64,
    zeta: f64,
    guess: (f64, f64),
    tol: f64,
    max_iter: usize,
    cfg: &ShootConfig,
) -> Result<LoopSolution> {
    ensure_finite("zeta", zeta)?;
    let mut c = -guess.1 - zeta;
    let mut guess = guess;
    for _ in 0..max_iter.max(1) {
        let sol = solve_loop(r, eps, c, guess, cfg)?;
        let next = -sol.mu_hat - zeta;
        if (next - c).abs() <= tol {
            return Ok(sol);
        }
        c = next;
        guess = (sol.d_hat, sol.mu_hat);
    }
    Err(BarkleyError::NoConvergence(format!("wave speed did not settle at zeta = {zeta}")))
}

/// Result of an `eps` continuation; rows stop at the first failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationTable {
    pub r: f64,
    pub rows: Vec<LoopSolution>,
    /// Error message of the grid point that aborted the sweep.
    pub aborted: Option<String>,
}

impl ContinuationTable {
    /// Polynomial extrapolation of `(D_hat, mu_hat)` to `eps = 0` through the last three rows.
    pub fn extrapolate(&self) -> Option<(f64, f64)> {
        let n = self.rows.len();
        if n < 2 {
            return None;
        }
        let pts = &self.rows[n.saturating_sub(3)..];
        let mut d = 0.0;
        let mut mu = 0.0;
        for (i, pi) in pts.iter().enumerate() {
            let mut w = 1.0;
            for (j, pj) in pts.iter().enumerate() {
                if i != j {
                    w *= pj.eps / (pj.eps - pi.eps);
                }
            }
            d += w * pi.d_hat;
            mu += w * pi.mu_hat;
        }
        Some((d, mu))
    }
}

/// Warm-started continuation of the loop along a descending `eps` grid, starting from `(D0, mu0)`.
pub fn continue_loop(r: f64, eps_grid: &[f64], cfg: &ShootConfig) -> Result<ContinuationTable> {
    if eps_grid.is_empty() {
        return Err(BarkleyError::InvalidInput("empty eps grid".into()));
    }
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(BarkleyError::InvalidInput("eps grid must be strictly descending".into()));
    }
    let lp = solve_singular_parameters(r)?;
    let mut guess = (lp.d0, lp.mu0);
    let mut rows: Vec<LoopSolution> = Vec::new();
    for &eps in eps_grid {
        if rows.len() >= 2 {
            let (a, b) = (&rows[rows.len() - 2], &rows[rows.len() - 1]);
            let t = (eps - b.eps) / (b.eps - a.eps);
            guess = (b.d_hat + t * (b.d_hat - a.d_hat), b.mu_hat + t * (b.mu_hat - a.mu_hat));
        }
        match solve_loop(r, eps, 0.0, guess, cfg) {
            Ok(row) => {
                guess = (row.d_hat, row.mu_hat);
                rows.push(row);
            }
            Err(e) if e.is_input_error() => return Err(e),
            Err(e) => return Ok(ContinuationTable { r, rows, aborted: Some(format!("eps = {eps}: {e}")) }),
        }
    }
    Ok(ContinuationTable { r, rows, aborted: None })
}

/// Which end of the orbit a tangency check looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrbitEnd {
    /// Approach to the target along `e2(target)` as `xi -> +inf`.
    Incoming,
    /// Departure from the source along `e3(source)` as `xi -> -inf`.
    Outgoing,
}

/// Angles between the orbit's displacement from an equilibrium and an eigendirection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangencyReport {
    pub end: OrbitEnd,
    /// Angles in degrees, ordered toward the equilibrium.
    pub angles_deg: Vec<f64>,
    pub final_angle_deg: f64,
    pub passed: bool,
}

/// Checks that the orbit meets its equilibrium along the principal direction.
///
/// `spectral` must belong to the equilibrium at the chosen end.
pub fn tangency_check(orbit: &OrbitSolution, spectral: &SpectralData, end: OrbitEnd) -> Result<TangencyReport> {
    let eqs = compute_equilibria(orbit.params.r, DEFAULT_UB_TOL)?;
    let (source, target, _) = source_target(orbit.side, &eqs);
    let (point, dir, samples): (PhasePoint, [f64; 3], Vec<PhasePoint>) = match end {
        OrbitEnd::Incoming => {
            let n = orbit.trajectory.len();
            (target, spectral.vectors[1], orbit.trajectory[n.saturating_sub(10)..].iter().map(|s| s.1).collect())
        }
        OrbitEnd::Outgoing => {
            (source, spectral.vectors[2], orbit.trajectory.iter().take(10).rev().map(|s| s.1).collect())
        }
    };
    let mut angles = Vec::with_capacity(samples.len());
    let mut last_dist = f64::INFINITY;
    for p in &samples {
        let v = [p.q - point.q, p.s - point.s, p.u - point.u];
        let n = norm(&v);
        last_dist = n;
        if n == 0.0 {
            continue;
        }
        let cosang = (dot(&v, &dir).abs() / (n * norm(&dir))).min(1.0);
        angles.push(cosang.acos().to_degrees());
    }
    if last_dist > 1e-3 || angles.is_empty() {
        return Err(BarkleyError::Inconclusive(format!("orbit ends {last_dist:e} away from the equilibrium")));
    }
    let final_angle = *angles.last().unwrap();
    let decreasing = final_angle <= angles[0] + 1e-9;
    Ok(TangencyReport { end, final_angle_deg: final_angle, passed: decreasing && final_angle < 5.0, angles_deg: angles })
}

/// Splitting derivative check helper: central differences of one side's mismatch.
pub fn mismatch_gradient(side: Side, params: &ModelParams, cfg: &ShootConfig) -> Result<(f64, f64)> {
    let eqs = compute_equilibria(params.r, DEFAULT_UB_TOL)?;
    let h = cfg.fd_step;
    let at = |d: f64, mu: f64| -> Result<f64> {
        Ok(section_mismatch(side, &eqs, &params.with_d_mu(d, mu), cfg)?.miss)
    };
    let (d, mu) = (params.d, params.mu());
    Ok(((at(d + h, mu)? - at(d - h, mu)?) / (2.0 * h), (at(d, mu + h)? - at(d, mu - h)?) / (2.0 * h)))
}
