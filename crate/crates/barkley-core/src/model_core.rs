//! Barkley reaction terms, the traveling-wave vector field and its equilibria.
//!
//! The traveling-wave ansatz `(q, u)(x - c t)` turns the PDE into the
//! three-dimensional system
//!
//! ```text
//! q' = s
//! s' = ((u + mu) s - f(q, u; r)) / D
//! u' = eps g(q, u) / (u - c)
//! ```
//!
//! with `mu = -(zeta + c)`. The reaction `f` uses the square on `(q - 1)` only,
//! the form under which the critical manifold is the line `q = 0` together
//! with the parabola `u = 2 - r + (r + 0.1)(q - 1)^2`.

use serde::Serialize;

use crate::error::{ensure_finite, BarkleyError, Result};

/// Threshold value of `r` above which the turbulent equilibrium exists.
pub const R_CRITICAL: f64 = 2.0 / 3.0;
/// Default bisection tolerance for `u_b(r)`.
pub const DEFAULT_UB_TOL: f64 = 1e-12;
/// Default minimum admissible `|u - c|`.
pub const DEFAULT_POLE_THRESHOLD: f64 = 1e-8;

/// Parameters of the traveling-wave problem.
///
/// `zeta` is exposed as a free parameter; no upper bound is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    /// Model Reynolds number.
    pub r: f64,
    /// Diffusion rate `D > 0`.
    pub d: f64,
    /// Advection offset.
    pub zeta: f64,
    /// Time-scale ratio `eps >= 0`.
    pub eps: f64,
    /// Wave speed.
    pub c: f64,
    /// Minimum admissible `|u - c|` in the slow equation.
    pub pole_threshold: f64,
}

impl ModelParams {
    /// Builds validated parameters from `(r, D, zeta, eps, c)`.
    pub fn new(r: f64, d: f64, zeta: f64, eps: f64, c: f64) -> Result<Self> {
        for (name, v) in [("r", r), ("D", d), ("zeta", zeta), ("eps", eps), ("c", c)] {
            ensure_finite(name, v)?;
        }
        if d <= 0.0 {
            return Err(BarkleyError::InvalidInput(format!("D must be positive, got {d}")));
        }
        if eps < 0.0 {
            return Err(BarkleyError::InvalidInput(format!("eps must be non-negative, got {eps}")));
        }
        Ok(Self { r, d, zeta, eps, c, pole_threshold: DEFAULT_POLE_THRESHOLD })
    }

    /// Builds parameters from `(r, D, mu, eps, c)`, setting `zeta = -mu - c`.
    pub fn from_mu(r: f64, d: f64, mu: f64, eps: f64, c: f64) -> Result<Self> {
        ensure_finite("mu", mu)?;
        Self::new(r, d, -mu - c, eps, c)
    }

    /// The combined advection coefficient `mu = -(zeta + c)`.
    pub fn mu(&self) -> f64 {
        -(self.zeta + self.c)
    }

    /// Copy with new `(D, mu)` at unchanged `c`, `eps` and `r`.
    pub fn with_d_mu(&self, d: f64, mu: f64) -> Self {
        Self { d, zeta: -mu - self.c, ..*self }
    }

    /// Copy with a new `eps`.
    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..*self }
    }

    /// Copy with a new pole threshold.
    pub fn with_pole_threshold(&self, pole_threshold: f64) -> Self {
        Self { pole_threshold, ..*self }
    }
}

/// A point `(q, s, u)` of the traveling-wave phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    /// Turbulence level.
    pub q: f64,
    /// Derivative `dq/dxi`.
    pub s: f64,
    /// Centerline velocity.
    pub u: f64,
}

impl PhasePoint {
    /// Creates a phase point.
    pub const fn new(q: f64, s: f64, u: f64) -> Self {
        Self { q, s, u }
    }

    /// Components as an array `[q, s, u]`.
    pub fn to_array(self) -> [f64; 3] {
        [self.q, self.s, self.u]
    }

    /// Point from an array `[q, s, u]`.
    pub fn from_array(a: [f64; 3]) -> Self {
        Self { q: a[0], s: a[1], u: a[2] }
    }

    /// True when every component is finite.
    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.s.is_finite() && self.u.is_finite()
    }
}

/// Equilibria of the traveling-wave system and the branch roots of the critical manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumSet {
    /// Model Reynolds number these values belong to.
    pub r: f64,
    /// Laminar state `(0, 0, 2)`.
    pub x1: PhasePoint,
    /// Turbulent state `(q_b+, 0, u_b)`.
    pub x2: PhasePoint,
    /// Layer saddle `(q_f+, 0, 2)` reached by the singular front.
    pub y1: PhasePoint,
    /// Layer saddle `(0, 0, u_b)` reached by the singular back.
    pub y2: PhasePoint,
    /// Velocity of the turbulent state.
    pub u_b: f64,
    /// Upper root of the parabola in the layer `u = 2`.
    pub q_f_plus: f64,
    /// Lower root of the parabola in the layer `u = 2`.
    pub q_f_minus: f64,
    /// Upper root of the parabola in the layer `u = u_b`.
    pub q_b_plus: f64,
    /// Lower root of the parabola in the layer `u = u_b`.
    pub q_b_minus: f64,
}

/// Reaction term `f(q, u; r) = q (r + u - 2 - (r + 0.1)(q - 1)^2)`.
pub fn reaction_f(q: f64, u: f64, r: f64) -> f64 {
    let dq = q - 1.0;
    q * (r + u - 2.0 - (r + 0.1) * dq * dq)
}

/// Reaction term `g(q, u) = 2 - u + 2 q (1 - u)`.
pub fn reaction_g(q: f64, u: f64) -> f64 {
    2.0 - u + 2.0 * q * (1.0 - u)
}

/// Partial derivative of `f` with respect to `q`.
pub fn reaction_f_dq(q: f64, u: f64, r: f64) -> f64 {
    let dq = q - 1.0;
    r + u - 2.0 - (r + 0.1) * dq * dq - 2.0 * (r + 0.1) * q * dq
}

/// Partial derivative of `f` with respect to `u`.
pub fn reaction_f_du(q: f64) -> f64 {
    q
}

/// Partial derivative of `g` with respect to `q`.
pub fn reaction_g_dq(u: f64) -> f64 {
    2.0 * (1.0 - u)
}

/// Partial derivative of `g` with respect to `u`.
pub fn reaction_g_du(q: f64) -> f64 {
    -1.0 - 2.0 * q
}

pub(crate) fn check_pole(u: f64, params: &ModelParams) -> Result<f64> {
    let gap = u - params.c;
    if gap.abs() < params.pole_threshold || !gap.is_finite() {
        return Err(BarkleyError::PoleAtWaveSpeed { gap: gap.abs() });
    }
    Ok(gap)
}

/// Traveling-wave vector field; with `eps = 0` this is the fast subsystem.
pub fn tw_vector_field(p: PhasePoint, params: &ModelParams) -> Result<[f64; 3]> {
    let gap = check_pole(p.u, params)?;
    let f = reaction_f(p.q, p.u, params.r);
    let ds = ((p.u + params.mu()) * p.s - f) / params.d;
    let du = if params.eps == 0.0 { 0.0 } else { params.eps * reaction_g(p.q, p.u) / gap };
    Ok([p.s, ds, du])
}

/// `q` on the hyperbola `g = 0`, branch `q > 1`.
fn hyperbola_q(u: f64) -> f64 {
    (2.0 - u) / (2.0 * (u - 1.0))
}

/// Residual whose zero on `[6/5, 4/3]` is `u_b(r)`.
fn ub_residual(u: f64, r: f64) -> f64 {
    let dq = hyperbola_q(u) - 1.0;
    2.0 - r + (r + 0.1) * dq * dq - u
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Velocity `u_b(r)` of the turbulent state, by bisection on `[6/5, 4/3]`.
pub fn compute_ub(r: f64, tol: f64) -> Result<f64> {
    ensure_finite("r", r)?;
    if !(tol > 0.0) {
        return Err(BarkleyError::InvalidInput(format!("tol must be positive, got {tol}")));
    }
    let (lo, hi) = (1.2, 4.0 / 3.0);
    let (flo, fhi) = (ub_residual(lo, r), ub_residual(hi, r));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 || (flo > 0.0) == (fhi > 0.0) {
        return Err(BarkleyError::NoRoot(format!(
            "u_b residual keeps its sign on [6/5, 4/3] for r = {r} (requires r > 2/3)"
        )));
    }
    Ok(bisect(|u| ub_residual(u, r), lo, hi, tol))
}

/// Equilibria and branch roots for `r > 2/3`.
pub fn compute_equilibria(r: f64, tol: f64) -> Result<EquilibriumSet> {
    let u_b = compute_ub(r, tol)?;
    let q_b_plus = 1.0 + ((r + u_b - 2.0).max(0.0) / (r + 0.1)).sqrt();
    let q_f_plus = 1.0 + (r / (r + 0.1)).sqrt();
    Ok(EquilibriumSet {
        r,
        x1: PhasePoint::new(0.0, 0.0, 2.0),
        x2: PhasePoint::new(q_b_plus, 0.0, u_b),
        y1: PhasePoint::new(q_f_plus, 0.0, 2.0),
        y2: PhasePoint::new(0.0, 0.0, u_b),
        u_b,
        q_f_plus,
        q_f_minus: 2.0 - q_f_plus,
        q_b_plus,
        q_b_minus: 2.0 - q_b_plus,
    })
}

/// The third zero of `(f, g)`, lying on the lower half `q < 1` of the parabola.
///
/// This is the saddle of the reaction kinetics separating the two stable states.
pub fn middle_equilibrium(r: f64, tol: f64) -> Result<(f64, f64)> {
    ensure_finite("r", r)?;
    let (lo, hi) = (4.0 / 3.0, 2.0);
    let (flo, fhi) = (ub_residual(lo, r), ub_residual(hi, r));
    if (flo > 0.0) == (fhi > 0.0) {
        return Err(BarkleyError::NoRoot(format!("no middle equilibrium for r = {r}")));
    }
    let u = bisect(|u| ub_residual(u, r), lo, hi, tol);
    Ok((hyperbola_q(u), u))
}
