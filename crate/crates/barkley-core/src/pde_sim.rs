//! Method-of-lines simulation of the Barkley PDE
//!
//! ```text
//! q_t = D q_xx + (zeta - u) q_x + f(q, u; r)
//! u_t = -u u_x + eps g(q, u)
//! ```
//!
//! in a frame moving with speed `frame_speed`. Space is discretised with
//! central diffusion, first-order upwinding for the `q` transport and a local
//! Lax-Friedrichs flux for the Burgers term; time stepping is Heun's method.

use std::io::{self, BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{BarkleyError, Result};
use crate::model_core::{reaction_f, reaction_g, EquilibriumSet, ModelParams};
use crate::singular_loop::phi_eval;

/// Largest admissible CFL number.
pub const CFL_LIMIT: f64 = 0.9;
/// Negative `q` values are clamped to zero after each step.
pub const Q_FLOOR: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    /// Zero-gradient extrapolation at both ends.
    Outflow,
}

/// Discrete `(q, u)` state on a uniform grid `x_i = i dx`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Field1D {
    pub l: f64,
    pub n: usize,
    pub dx: f64,
    pub q: Vec<f64>,
    pub u: Vec<f64>,
    pub t: f64,
    pub bc: Boundary,
}

impl Field1D {
    /// Constant state on `n` points of a domain of length `l`.
    pub fn uniform(l: f64, n: usize, q: f64, u: f64, bc: Boundary) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() || n < 3 {
            return Err(BarkleyError::InvalidInput(format!("bad grid: L = {l}, n = {n}")));
        }
        Ok(Self { l, n, dx: l / n as f64, q: vec![q; n], u: vec![u; n], t: 0.0, bc })
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.u).all(|v| v.is_finite())
    }

    /// Writes the plain-text snapshot: a `# t=.. n=.. L=..` header and one `x q u` row per point.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# t={} n={} L={}", self.t, self.n, self.l)?;
        for i in 0..self.n {
            writeln!(w, "{} {} {}", self.x(i), self.q[i], self.u[i])?;
        }
        Ok(())
    }

    /// Parses a snapshot written by [`Field1D::write_snapshot`].
    pub fn read_snapshot<R: BufRead>(reader: R, bc: Boundary) -> Result<Self> {
        let bad = |m: &str| BarkleyError::InvalidInput(format!("malformed snapshot: {m}"));
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| bad("empty"))?.map_err(|e| bad(&e.to_string()))?;
        let mut t = None;
        let mut n = None;
        let mut l = None;
        for tok in header.trim_start_matches('#').split_whitespace() {
            match tok.split_once('=') {
                Some(("t", v)) => t = v.parse::<f64>().ok(),
                Some(("n", v)) => n = v.parse::<usize>().ok(),
                Some(("L", v)) => l = v.parse::<f64>().ok(),
                _ => {}
            }
        }
        let (t, n, l) = (t.ok_or_else(|| bad("t"))?, n.ok_or_else(|| bad("n"))?, l.ok_or_else(|| bad("L"))?);
        let mut f = Field1D::uniform(l, n, 0.0, 0.0, bc)?;
        f.t = t;
        for i in 0..n {
            let line = lines.next().ok_or_else(|| bad("missing rows"))?.map_err(|e| bad(&e.to_string()))?;
            let vals: Vec<f64> = line.split_whitespace().filter_map(|v| v.parse().ok()).collect();
            if vals.len() != 3 {
                return Err(bad(&format!("row {i}")));
            }
            f.q[i] = vals[1];
            f.u[i] = vals[2];
        }
        Ok(f)
    }
}

/// Time-stepping configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub params: ModelParams,
    /// Target CFL number when `dt` is chosen automatically.
    pub cfl: f64,
    /// Fixed time step; `None` selects one from `cfl`.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Time between recorded samples.
    pub sample_every: f64,
    /// Speed of the computational frame.
    pub frame_speed: f64,
    /// When false, `f` and `g` are switched off.
    pub reactions: bool,
}

impl SimConfig {
    pub fn new(params: ModelParams, t_end: f64) -> Self {
        Self { params, cfl: CFL_LIMIT, dt: None, t_end, sample_every: 0.5, frame_speed: 0.0, reactions: true }
    }

    fn velocity_bound(&self, f: &Field1D) -> f64 {
        let z = self.params.zeta;
        f.u.iter()
            .map(|&u| (z - u + self.frame_speed).abs().max((u - self.frame_speed).abs()))
            .fold(0.0, f64::max)
    }

    /// CFL number `dt max(|zeta - u|, |u|) / dx + 2 D dt / dx^2` of a step `dt`.
    pub fn cfl_number(&self, f: &Field1D, dt: f64) -> f64 {
        dt * self.velocity_bound(f) / f.dx + 2.0 * self.params.d * dt / (f.dx * f.dx)
    }

    /// Time step for the current field.
    pub fn time_step(&self, f: &Field1D) -> Result<f64> {
        match self.dt {
            Some(dt) => {
                let cfl = self.cfl_number(f, dt);
                if cfl > CFL_LIMIT * (1.0 + 1e-12) || !(dt > 0.0) {
                    return Err(BarkleyError::CflViolation { cfl, limit: CFL_LIMIT });
                }
                Ok(dt)
            }
            None => {
                if !(self.cfl > 0.0 && self.cfl <= CFL_LIMIT) {
                    return Err(BarkleyError::CflViolation { cfl: self.cfl, limit: CFL_LIMIT });
                }
                Ok(self.cfl / (self.velocity_bound(f) / f.dx + 2.0 * self.params.d / (f.dx * f.dx)))
            }
        }
    }
}

#[inline]
fn neighbours(i: usize, n: usize, bc: Boundary) -> (usize, usize) {
    match bc {
        Boundary::Periodic => ((i + n - 1) % n, (i + 1) % n),
        Boundary::Outflow => (i.saturating_sub(1), (i + 1).min(n - 1)),
    }
}

/// Semi-discrete right-hand side `(dq/dt, du/dt)`.
pub fn rhs(q: &[f64], u: &[f64], dx: f64, bc: Boundary, cfg: &SimConfig, dq: &mut [f64], du: &mut [f64]) {
    let n = q.len();
    let p = &cfg.params;
    let cf = cfg.frame_speed;
    let inv_dx = 1.0 / dx;
    let diff = p.d * inv_dx * inv_dx;
    let flux = |v: f64| 0.5 * v * v - cf * v;
    let interface = |ul: f64, ur: f64| {
        let a = (ul - cf).abs().max((ur - cf).abs());
        0.5 * (flux(ul) + flux(ur)) - 0.5 * a * (ur - ul)
    };
    for i in 0..n {
        let (im, ip) = neighbours(i, n, bc);
        let v = u[i] - p.zeta - cf;
        let grad = if v > 0.0 { (q[i] - q[im]) * inv_dx } else { (q[ip] - q[i]) * inv_dx };
        let mut qt = diff * (q[ip] - 2.0 * q[i] + q[im]) - v * grad;
        let mut ut = -(interface(u[i], u[ip]) - interface(u[im], u[i])) * inv_dx;
        if cfg.reactions {
            qt += reaction_f(q[i], u[i], p.r);
            ut += p.eps * reaction_g(q[i], u[i]);
        }
        dq[i] = qt;
        du[i] = ut;
    }
}

/// Reusable buffers for Heun steps.
#[derive(Debug, Clone)]
struct Workspace {
    k1q: Vec<f64>,
    k1u: Vec<f64>,
    k2q: Vec<f64>,
    k2u: Vec<f64>,
    sq: Vec<f64>,
    su: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            k1q: vec![0.0; n],
            k1u: vec![0.0; n],
            k2q: vec![0.0; n],
            k2u: vec![0.0; n],
            sq: vec![0.0; n],
            su: vec![0.0; n],
        }
    }
}

fn heun_in_place(f: &mut Field1D, cfg: &SimConfig, dt: f64, ws: &mut Workspace) -> Result<()> {
    rhs(&f.q, &f.u, f.dx, f.bc, cfg, &mut ws.k1q, &mut ws.k1u);
    for i in 0..f.n {
        ws.sq[i] = f.q[i] + dt * ws.k1q[i];
        ws.su[i] = f.u[i] + dt * ws.k1u[i];
    }
    rhs(&ws.sq, &ws.su, f.dx, f.bc, cfg, &mut ws.k2q, &mut ws.k2u);
    let mut finite = true;
    for i in 0..f.n {
        let q = f.q[i] + 0.5 * dt * (ws.k1q[i] + ws.k2q[i]);
        f.q[i] = if q < Q_FLOOR { 0.0 } else { q };
        f.u[i] += 0.5 * dt * (ws.k1u[i] + ws.k2u[i]);
        finite &= f.q[i].is_finite() && f.u[i].is_finite();
    }
    f.t += dt;
    if !finite {
        return Err(BarkleyError::NonFinite { t: f.t });
    }
    Ok(())
}

/// One explicit Heun step with the configured time step.
pub fn step_field(f: &Field1D, cfg: &SimConfig) -> Result<Field1D> {
    let dt = cfg.time_step(f)?;
    let mut next = f.clone();
    heun_in_place(&mut next, cfg, dt, &mut Workspace::new(f.n))?;
    Ok(next)
}

/// Advances `f` to `t0 + duration` with a fixed step, calling `sample` every `cfg.sample_every`.
pub fn run<S: FnMut(&Field1D) -> Result<()>>(f: &mut Field1D, cfg: &SimConfig, duration: f64, mut sample: S) -> Result<()> {
    let dt_max = cfg.time_step(f)?;
    let steps_per_sample = (cfg.sample_every / dt_max).ceil().max(1.0) as usize;
    let dt = cfg.sample_every / steps_per_sample as f64;
    let samples = (duration / cfg.sample_every).round() as usize;
    let mut ws = Workspace::new(f.n);
    sample(f)?;
    for _ in 0..samples {
        for _ in 0..steps_per_sample {
            heun_in_place(f, cfg, dt, &mut ws)?;
        }
        sample(f)?;
    }
    Ok(())
}

/// Initial conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ProfileKind {
    UniformLaminar,
    UniformTurbulent,
    /// Laminar on the left, turbulent on the right, interface at `x0`.
    SimpleFront { x0: f64 },
    /// Turbulent on the left, laminar on the right, interface at `x0`.
    SimpleBack { x0: f64 },
    /// `2N + 1` alternating interfaces starting with a front at `x0`; `spacings` holds the `2N` gaps.
    NFront { n: usize, x0: f64, spacings: Vec<f64> },
}

/// Upper branch `1 + sqrt((r + u - 2)/(r + 0.1))` of the parabola.
fn upper_branch(u: f64, r: f64) -> f64 {
    1.0 + ((r + u - 2.0).max(0.0) / (r + 0.1)).sqrt()
}

/// Builds an initial field on `n` points of `[0, l)`.
///
/// Interfaces use the logistic fast profile; `u` follows the turbulence indicator
/// through a first-order lag of width `dx / eps`.
pub fn build_initial_profile(
    kind: &ProfileKind,
    eqs: &EquilibriumSet,
    params: &ModelParams,
    l: f64,
    n: usize,
    bc: Boundary,
) -> Result<Field1D> {
    let mut f = Field1D::uniform(l, n, 0.0, 2.0, bc)?;
    let r = params.r;
    let interfaces: Vec<(f64, bool)> = match kind {
        ProfileKind::UniformLaminar => return Ok(f),
        ProfileKind::UniformTurbulent => {
            f.q.fill(eqs.q_b_plus);
            f.u.fill(eqs.u_b);
            return Ok(f);
        }
        ProfileKind::SimpleFront { x0 } => vec![(*x0, true)],
        ProfileKind::SimpleBack { x0 } => vec![(*x0, false)],
        ProfileKind::NFront { n: count, x0, spacings } => {
            if *count < 1 || spacings.len() != 2 * count || spacings.iter().any(|s| !(*s > 0.0)) {
                return Err(BarkleyError::InvalidInput(format!(
                    "an N-front with N = {count} needs {} positive spacings",
                    2 * count
                )));
            }
            let mut pos = *x0;
            let mut out = vec![(pos, true)];
            for (k, s) in spacings.iter().enumerate() {
                pos += s;
                out.push((pos, k % 2 == 1));
            }
            out
        }
    };
    let limit = 0.1 * params.d.sqrt() / eqs.q_f_plus;
    if f.dx > limit {
        return Err(BarkleyError::GridTooCoarse { dx: f.dx, limit });
    }
    let rate = |q_plus: f64| q_plus * ((r + 0.1) / params.d).sqrt();
    let (a_front, a_back) = (rate(eqs.q_f_plus), rate(eqs.q_b_plus));
    let indicator = |x: f64| -> f64 {
        let mut level: f64 = if interfaces[0].1 { 0.0 } else { 1.0 };
        for &(xi, is_front) in &interfaces {
            let s = if is_front { phi_eval(a_front * (x - xi)).0 } else { phi_eval(-a_back * (x - xi)).0 };
            level = if is_front { level.max(s) } else { level.min(s) };
        }
        level
    };
    let chi: Vec<f64> = (0..n).map(|i| indicator(f.x(i))).collect();
    let width = if params.eps > 0.0 { f.dx / params.eps } else { f64::INFINITY };
    let target = |c: f64| 2.0 - (2.0 - eqs.u_b) * c;
    let mut u = target(chi[0]);
    for i in 0..n {
        if i > 0 {
            u += (target(chi[i]) - u) * (1.0 - (-f.dx / width).exp());
        }
        f.u[i] = u;
        f.q[i] = upper_branch(u, r) * chi[i];
    }
    Ok(f)
}

/// Positions where `q` crosses `level`, by linear interpolation.
pub fn level_crossings(f: &Field1D, level: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..f.n - 1 {
        let (a, b) = (f.q[i] - level, f.q[i + 1] - level);
        if (a < 0.0 && b >= 0.0) || (a >= 0.0 && b < 0.0) {
            out.push(f.x(i) + f.dx * a / (a - b));
        }
    }
    out
}

/// Least-squares slope and RMS residual of `(t, x)` pairs.
pub fn fit_line(t: &[f64], x: &[f64]) -> (f64, f64, f64) {
    let m = t.len() as f64;
    let (tm, xm) = (t.iter().sum::<f64>() / m, x.iter().sum::<f64>() / m);
    let sxx: f64 = t.iter().map(|a| (a - tm).powi(2)).sum();
    let sxy: f64 = t.iter().zip(x).map(|(a, b)| (a - tm) * (b - xm)).sum();
    let slope = sxy / sxx;
    let icept = xm - slope * tm;
    let rss: f64 = t.iter().zip(x).map(|(a, b)| (b - icept - slope * a).powi(2)).sum();
    (slope, icept, (rss / m).sqrt())
}

/// Measured propagation speed of a single interface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedFit {
    /// Lab-frame speed: frame speed plus the fitted drift.
    pub c: f64,
    pub fit_residual: f64,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
}

/// Runs `cfg.t_end` time units and fits the interface position over the second half.
pub fn measure_wave_speed(f0: &Field1D, cfg: &SimConfig, level: f64) -> Result<SpeedFit> {
    let mut f = f0.clone();
    let mut times = Vec::new();
    let mut positions = Vec::new();
    let edge = 2.0 * f.dx;
    run(&mut f, cfg, cfg.t_end, |fld| {
        let c = level_crossings(fld, level);
        if c.len() != 1 {
            return Err(BarkleyError::LostFront(format!("{} level crossings at t = {}", c.len(), fld.t)));
        }
        if c[0] < edge || c[0] > fld.l - edge {
            return Err(BarkleyError::LostFront(format!("interface reached the boundary at t = {}", fld.t)));
        }
        times.push(fld.t - f0.t);
        positions.push(c[0]);
        Ok(())
    })?;
    let half = times.len() / 2;
    if times.len() - half < 2 {
        return Err(BarkleyError::InvalidInput("run too short for a speed fit".into()));
    }
    let (slope, _, res) = fit_line(&times[half..], &positions[half..]);
    Ok(SpeedFit { c: cfg.frame_speed + slope, fit_residual: res, times, positions })
}

fn stacked_gradient(f: &Field1D) -> Vec<f64> {
    let n = f.n;
    let mut g = vec![0.0; 2 * n];
    for i in 0..n {
        let (im, ip) = neighbours(i, n, f.bc);
        let h = (ip as f64 - im as f64).abs().max(1.0);
        let h = if f.bc == Boundary::Periodic { 2.0 } else { h };
        g[i] = (f.q[ip] - f.q[im]) / (h * f.dx);
        g[n + i] = (f.u[ip] - f.u[im]) / (h * f.dx);
    }
    g
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Shape change of a profile in a co-moving frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeResidual {
    /// Drift speed that best explains the time derivative.
    pub drift: f64,
    /// Max norm of the time derivative after removing the drift.
    pub rate: f64,
}

/// Projects the time derivative onto the translation mode.
pub fn shape_residual(f: &Field1D, cfg: &SimConfig) -> ShapeResidual {
    let n = f.n;
    let (mut dq, mut du) = (vec![0.0; n], vec![0.0; n]);
    rhs(&f.q, &f.u, f.dx, f.bc, cfg, &mut dq, &mut du);
    let grad = stacked_gradient(f);
    let gg = dot(&grad, &grad);
    let r: Vec<f64> = dq.into_iter().chain(du).collect();
    let coef = if gg > 0.0 { dot(&r, &grad) / gg } else { 0.0 };
    let rate = r.iter().zip(&grad).map(|(a, b)| (a - coef * b).abs()).fold(0.0, f64::max);
    ShapeResidual { drift: -coef, rate }
}

/// A profile that is stationary in the frame `cfg.frame_speed`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettledProfile {
    pub field: Field1D,
    pub frame_speed: f64,
    pub residual: ShapeResidual,
    pub elapsed: f64,
}

/// Evolves `f` and retunes the frame speed until the shape change rate drops below `tol`.
pub fn settle(f: &Field1D, cfg: &SimConfig, tol: f64, max_time: f64) -> Result<SettledProfile> {
    let mut field = f.clone();
    let mut c = *cfg;
    let chunk = cfg.sample_every.max(0.5);
    let mut elapsed = 0.0;
    loop {
        let res = shape_residual(&field, &c);
        if res.rate <= tol {
            return Ok(SettledProfile { field, frame_speed: c.frame_speed, residual: res, elapsed });
        }
        if elapsed >= max_time {
            return Err(BarkleyError::NotSettled { rate: res.rate });
        }
        c.frame_speed += res.drift;
        run(&mut field, &c, chunk, |_| Ok(()))?;
        elapsed += chunk;
    }
}

/// Log-growth estimate of perturbations of a stationary profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub rate: f64,
    pub fit_residual: f64,
    pub times: Vec<f64>,
    pub log_norms: Vec<f64>,
}

/// Maximum settled-shape change rate accepted by the growth probe.
pub const SETTLE_TOL: f64 = 1e-6;

/// Jacobian of the semi-discrete right-hand side in coordinate form.
///
/// Unknowns are ordered `(q_0 .. q_{n-1}, u_0 .. u_{n-1})`. The stencil couples each
/// point to its two neighbours only, so the matrix is assembled from a handful of
/// colored finite-difference products.
#[derive(Debug, Clone)]
pub struct SparseJacobian {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseJacobian {
    pub fn assemble(base: &Field1D, cfg: &SimConfig) -> Self {
        let n = base.n;
        let colors = match base.bc {
            Boundary::Outflow => 3,
            Boundary::Periodic => (3..=n).find(|m| n % m == 0).unwrap_or(n),
        };
        let h = 1e-7;
        let (mut qp, mut up) = (base.q.clone(), base.u.clone());
        let (mut qm, mut um) = (base.q.clone(), base.u.clone());
        let (mut dqp, mut dup) = (vec![0.0; n], vec![0.0; n]);
        let (mut dqm, mut dum) = (vec![0.0; n], vec![0.0; n]);
        let mut entries = Vec::with_capacity(12 * n);
        for field in 0..2 {
            for color in 0..colors {
                qp.copy_from_slice(&base.q);
                up.copy_from_slice(&base.u);
                qm.copy_from_slice(&base.q);
                um.copy_from_slice(&base.u);
                for j in (color..n).step_by(colors) {
                    if field == 0 {
                        qp[j] += h;
                        qm[j] -= h;
                    } else {
                        up[j] += h;
                        um[j] -= h;
                    }
                }
                rhs(&qp, &up, base.dx, base.bc, cfg, &mut dqp, &mut dup);
                rhs(&qm, &um, base.dx, base.bc, cfg, &mut dqm, &mut dum);
                for i in 0..n {
                    let (im, ip) = neighbours(i, n, base.bc);
                    let Some(j) = [im, i, ip].into_iter().find(|j| j % colors == color) else {
                        continue;
                    };
                    let col = field * n + j;
                    let dq = (dqp[i] - dqm[i]) / (2.0 * h);
                    let du = (dup[i] - dum[i]) / (2.0 * h);
                    if dq != 0.0 {
                        entries.push((i, col, dq));
                    }
                    if du != 0.0 {
                        entries.push((n + i, col, du));
                    }
                }
            }
        }
        Self { dim: 2 * n, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for &(r, c, a) in &self.entries {
            out[r] += a * v[c];
        }
    }

    pub fn apply_transpose(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for &(r, c, a) in &self.entries {
            out[c] += a * v[r];
        }
    }
}

/// Spectral projector onto the complement of the translation mode.
struct TranslationProjector {
    mode: Vec<f64>,
    /// Left null vector scaled so that `left . mode = 1`.
    left: Vec<f64>,
}

impl TranslationProjector {
    fn apply(&self, v: &mut [f64]) {
        let c = dot(&self.left, v);
        v.iter_mut().zip(&self.mode).for_each(|(a, b)| *a -= c * b);
    }
}

/// Largest left-eigenvalue drift accepted for the translation mode.
pub const LEFT_MODE_TOL: f64 = 1e-3;

fn heun_linear<F: FnMut(&[f64], &mut [f64])>(
    mut op: F,
    v: &mut [f64],
    dt: f64,
    steps: usize,
    k1: &mut [f64],
    k2: &mut [f64],
    stage: &mut [f64],
) {
    for _ in 0..steps {
        op(v, k1);
        for i in 0..v.len() {
            stage[i] = v[i] + dt * k1[i];
        }
        op(stage, k2);
        for i in 0..v.len() {
            v[i] += 0.5 * dt * (k1[i] + k2[i]);
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|a| *a /= n);
    }
    n
}

/// Banded LU factorisation with partial pivoting.
struct BandedLu {
    dim: usize,
    kl: usize,
    width: usize,
    /// Row `i` holds columns `i - kl .. i - kl + width`.
    rows: Vec<Vec<f64>>,
    pivots: Vec<usize>,
}

impl BandedLu {
    fn factor(dim: usize, kl: usize, ku: usize, entries: impl Iterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let width = 2 * kl + ku + 1;
        let mut rows = vec![vec![0.0; width]; dim];
        for (i, j, a) in entries {
            let off = j + kl - i;
            if off >= kl + ku + 1 {
                return Err(BarkleyError::InvalidInput(format!("entry ({i}, {j}) outside the band")));
            }
            rows[i][off] += a;
        }
        let mut lu = Self { dim, kl, width, rows, pivots: vec![0; dim] };
        for k in 0..dim {
            let last = (k + kl).min(dim - 1);
            let p = (k..=last)
                .max_by(|&a, &b| lu.get(a, k).abs().total_cmp(&lu.get(b, k).abs()))
                .unwrap();
            lu.pivots[k] = p;
            if p != k {
                for j in k..(k + kl + ku + 1).min(dim) {
                    let (a, b) = (lu.get(k, j), lu.get(p, j));
                    lu.set(k, j, b);
                    lu.set(p, j, a);
                }
            }
            let piv = lu.get(k, k);
            if piv == 0.0 {
                return Err(BarkleyError::Inconclusive("singular linearization".into()));
            }
            for i in k + 1..=last {
                let m = lu.get(i, k) / piv;
                if m == 0.0 {
                    continue;
                }
                lu.set(i, k, m);
                for j in k + 1..(k + kl + ku + 1).min(dim) {
                    let v = lu.get(i, j) - m * lu.get(k, j);
                    lu.set(i, j, v);
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        let off = j + self.kl;
        if off < i || off - i >= self.width {
            0.0
        } else {
            self.rows[i][off - i]
        }
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let off = j + self.kl - i;
        self.rows[i][off] = v;
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.dim;
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            let last = (k + self.kl).min(n - 1);
            for i in k + 1..=last {
                b[i] -= self.get(i, k) * b[k];
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..(i + self.width - self.kl).min(n) {
                acc -= self.get(i, j) * b[j];
            }
            b[i] = acc / self.get(i, i);
        }
    }
}

/// Position of grid point `i` in the folded ordering `0, n-1, 1, n-2, ..`.
fn folded(i: usize, n: usize) -> usize {
    if 2 * i < n {
        2 * i
    } else {
        2 * (n - 1 - i) + 1
    }
}

/// Left null vector of the Jacobian by inverse iteration on `J^T`.
fn translation_projector(jac: &SparseJacobian, mode: Vec<f64>) -> Result<TranslationProjector> {
    let m = jac.dim();
    let n = m / 2;
    let perm = |k: usize| 2 * folded(k % n, n) + k / n;
    let transposed = jac.entries.iter().map(|&(r, c, a)| (perm(c), perm(r), a));
    let lu = BandedLu::factor(m, 5, 5, transposed)?;
    let mut psi = vec![0.0; m];
    for k in 0..m {
        psi[perm(k)] = mode[k];
    }
    normalize(&mut psi);
    for _ in 0..4 {
        lu.solve(&mut psi);
        if normalize(&mut psi) == 0.0 || !psi.iter().all(|x| x.is_finite()) {
            return Err(BarkleyError::Inconclusive("inverse iteration broke down".into()));
        }
    }
    let mut left = vec![0.0; m];
    for k in 0..m {
        left[k] = psi[perm(k)];
    }
    let mut image = vec![0.0; m];
    jac.apply_transpose(&left, &mut image);
    let eigen = dot(&image, &left);
    let residual = image.iter().zip(&left).map(|(a, b)| (a - eigen * b).powi(2)).sum::<f64>().sqrt();
    let overlap = dot(&left, &mode);
    if eigen.abs() > LEFT_MODE_TOL || residual > LEFT_MODE_TOL || overlap.abs() < 1e-12 * dot(&mode, &mode).sqrt() {
        return Err(BarkleyError::Inconclusive(format!(
            "translation mode not isolated: left eigenvalue {eigen:e}, residual {residual:e}"
        )));
    }
    left.iter_mut().for_each(|a| *a /= overlap);
    Ok(TranslationProjector { mode, left })
}

fn evolve_linear(
    jac: &SparseJacobian,
    cfg: &SimConfig,
    dt_max: f64,
    mut v: Vec<f64>,
    horizon: f64,
    project: Option<&TranslationProjector>,
) -> Result<GrowthReport> {
    let sample = cfg.sample_every;
    let per = (sample / dt_max).ceil().max(1.0) as usize;
    let dt = sample / per as f64;
    let samples = (horizon / sample).round() as usize;
    let m = v.len();
    let (mut k1, mut k2, mut stage) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    if let Some(p) = project {
        p.apply(&mut v);
    }
    if normalize(&mut v) == 0.0 {
        return Err(BarkleyError::InvalidInput("perturbation vanishes after projection".into()));
    }
    let mut log_acc = 0.0;
    let mut times = vec![0.0];
    let mut logs = vec![0.0];
    for s in 1..=samples {
        heun_linear(|x, y| jac.apply(x, y), &mut v, dt, per, &mut k1, &mut k2, &mut stage);
        if let Some(p) = project {
            p.apply(&mut v);
        }
        let nv = normalize(&mut v);
        if !nv.is_finite() {
            return Err(BarkleyError::NonFinite { t: s as f64 * sample });
        }
        if nv == 0.0 {
            return Ok(GrowthReport { rate: f64::NEG_INFINITY, fit_residual: 0.0, times, log_norms: logs });
        }
        log_acc += nv.ln();
        times.push(s as f64 * sample);
        logs.push(log_acc);
    }
    let half = times.len() / 2;
    if times.len() - half < 2 {
        return Err(BarkleyError::InvalidInput("horizon too short for a growth fit".into()));
    }
    let (rate, _, res) = fit_line(&times[half..], &logs[half..]);
    Ok(GrowthReport { rate, fit_residual: res, times, log_norms: logs })
}

fn check_settled(base: &Field1D, cfg: &SimConfig) -> Result<Vec<f64>> {
    let res = shape_residual(base, cfg);
    if res.rate > SETTLE_TOL {
        return Err(BarkleyError::NotSettled { rate: res.rate });
    }
    Ok(stacked_gradient(base))
}

/// Growth rate of a random perturbation with the translation mode projected out.
///
/// The projection is spectral: its kernel direction is the discrete derivative of the
/// profile and its functional is the left null vector of the linearization.
pub fn growth_rate_probe(base: &Field1D, cfg: &SimConfig, horizon: f64, seed: u64) -> Result<GrowthReport> {
    let grad = check_settled(base, cfg)?;
    let jac = SparseJacobian::assemble(base, cfg);
    let dt_max = cfg.time_step(base)?;
    let proj = if dot(&grad, &grad) > 0.0 {
        Some(translation_projector(&jac, grad)?)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..2 * base.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    evolve_linear(&jac, cfg, dt_max, v, horizon, proj.as_ref())
}

/// Growth rate of the translation mode itself.
pub fn translation_mode_growth(base: &Field1D, cfg: &SimConfig, horizon: f64) -> Result<GrowthReport> {
    let grad = check_settled(base, cfg)?;
    let jac = SparseJacobian::assemble(base, cfg);
    evolve_linear(&jac, cfg, cfg.time_step(base)?, grad, horizon, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_core::{compute_equilibria, DEFAULT_UB_TOL};

    fn params() -> ModelParams {
        ModelParams::new(1.0, 0.5, 0.2, 0.1, 0.0).unwrap()
    }

    #[test]
    fn laminar_is_exact_fixed_point() {
        let eqs = compute_equilibria(1.0, DEFAULT_UB_TOL).unwrap();
        let f = build_initial_profile(&ProfileKind::UniformLaminar, &eqs, &params(), 10.0, 100, Boundary::Periodic).unwrap();
        let cfg = SimConfig::new(params(), 1.0);
        let g = step_field(&f, &cfg).unwrap();
        assert_eq!(g.q, f.q);
        assert_eq!(g.u, f.u);
    }

    #[test]
    fn explicit_dt_over_limit_is_rejected() {
        let f = Field1D::uniform(10.0, 100, 0.0, 2.0, Boundary::Periodic).unwrap();
        let mut cfg = SimConfig::new(params(), 1.0);
        cfg.dt = Some(1.0);
        assert!(matches!(step_field(&f, &cfg), Err(BarkleyError::CflViolation { .. })));
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let eqs = compute_equilibria(1.0, DEFAULT_UB_TOL).unwrap();
        let err = build_initial_profile(&ProfileKind::SimpleFront { x0: 5.0 }, &eqs, &params(), 10.0, 20, Boundary::Outflow)
            .unwrap_err();
        assert!(matches!(err, BarkleyError::GridTooCoarse { .. }));
    }

    #[test]
    fn snapshot_round_trip() {
        let mut f = Field1D::uniform(3.0, 5, 0.25, 1.7, Boundary::Outflow).unwrap();
        f.q[2] = 0.1 + 0.2;
        f.t = 1.0 / 3.0;
        let mut buf = Vec::new();
        f.write_snapshot(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# t=0.3333333333333333 n=5 L=3\n"));
        let g = Field1D::read_snapshot(io::Cursor::new(buf), Boundary::Outflow).unwrap();
        assert_eq!(g, f);
    }

    #[test]
    fn line_fit_recovers_slope() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let x: Vec<f64> = t.iter().map(|t| 3.0 - 0.5 * t).collect();
        let (s, i, r) = fit_line(&t, &x);
        assert!((s + 0.5).abs() < 1e-14 && (i - 3.0).abs() < 1e-13 && r < 1e-13);
    }

    #[test]
    fn laminar_field_has_no_front() {
        let f = Field1D::uniform(10.0, 100, 0.0, 2.0, Boundary::Outflow).unwrap();
        let cfg = SimConfig::new(params(), 1.0);
        assert!(matches!(measure_wave_speed(&f, &cfg, 0.5), Err(BarkleyError::LostFront(_))));
    }
}
