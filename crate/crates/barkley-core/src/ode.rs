//! Dormand-Prince 5(4) integrator with dense output and event location.

use crate::error::{BarkleyError, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const A7: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const DENSE: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Integrator tolerances and limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude; `0` picks one automatically.
    pub h_init: f64,
    /// Largest step magnitude.
    pub h_max: f64,
    pub max_steps: usize,
    /// Euclidean norm beyond which the solution is declared to blow up.
    pub blowup: f64,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, h_init: 0.0, h_max: f64::INFINITY, max_steps: 2_000_000, blowup: 1e6 }
    }
}

/// Sign change required for an event to fire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Rising,
    Falling,
    Either,
}

/// Continuous extension of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    coeffs: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
        y
    }

    fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.h > 0.0 { (self.t0, self.t1()) } else { (self.t1(), self.t0) };
        t >= lo && t <= hi
    }
}

/// Accepted steps of one integration, in integration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<const N: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; N]>,
    pub steps: Vec<DenseStep<N>>,
    /// Location of the first event, if one fired; the solution stops there.
    pub event: Option<(f64, [f64; N])>,
}

impl<const N: usize> Solution<N> {
    pub fn last(&self) -> (f64, [f64; N]) {
        (*self.t.last().unwrap(), *self.y.last().unwrap())
    }

    /// Dense evaluation anywhere inside the integrated range.
    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        if self.steps.is_empty() {
            return (t == self.t[0]).then(|| self.y[0]);
        }
        let forward = self.steps[0].h > 0.0;
        let idx = self.steps.partition_point(|s| if forward { s.t1() < t } else { s.t1() > t });
        let step = self.steps.get(idx)?;
        step.contains(t).then(|| step.eval(t))
    }
}

fn norm<const N: usize>(y: &[f64; N]) -> f64 {
    y.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (coef, k) in terms {
        if *coef != 0.0 {
            for i in 0..N {
                out[i] += h * coef * k[i];
            }
        }
    }
    out
}

fn locate_event<const N: usize, G: Fn(f64, &[f64; N]) -> f64>(
    step: &DenseStep<N>,
    g: &G,
    mut ga: f64,
    mut gb: f64,
) -> (f64, [f64; N]) {
    let (mut a, mut b) = (step.t0, step.t1());
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
            break;
        }
        let mut t = (a * gb - b * ga) / (gb - ga);
        if !t.is_finite() || (t - a) * (t - b) >= 0.0 {
            t = 0.5 * (a + b);
        }
        let gt = g(t, &step.eval(t));
        if gt == 0.0 {
            return (t, step.eval(t));
        }
        if (gt > 0.0) == (gb > 0.0) {
            b = t;
            gb = gt;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = t;
            ga = gt;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
    }
    let t = if ga.abs() < gb.abs() { a } else { b };
    (t, step.eval(t))
}

fn fires(ga: f64, gb: f64, dir: Crossing) -> bool {
    match dir {
        Crossing::Rising => ga < 0.0 && gb >= 0.0,
        Crossing::Falling => ga > 0.0 && gb <= 0.0,
        Crossing::Either => (ga < 0.0 && gb >= 0.0) || (ga > 0.0 && gb <= 0.0),
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (either direction).
///
/// When `event` is given, integration stops at the first zero of `g` crossed in the
/// requested direction.
pub fn integrate<const N: usize, F, G>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    cfg: &OdeConfig,
    event: Option<(G, Crossing)>,
) -> Result<Solution<N>>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
    G: Fn(f64, &[f64; N]) -> f64,
{
    if y0.iter().any(|x| !x.is_finite()) || !t0.is_finite() || !t_end.is_finite() {
        return Err(BarkleyError::InvalidInput("non-finite integration request".into()));
    }
    let mut sol = Solution { t: vec![t0], y: vec![y0], steps: Vec::new(), event: None };
    if t0 == t_end {
        return Ok(sol);
    }
    let dir = (t_end - t0).signum();
    let span = (t_end - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y)?;
    let mut h = if cfg.h_init > 0.0 {
        cfg.h_init
    } else {
        let sc = norm(&y) * cfg.rtol + cfg.atol;
        let d = norm(&k1);
        if d > 0.0 { (0.01 * (sc / cfg.rtol.max(1e-300)).max(1e-6) / d).min(1e-2) } else { 1e-2 }
    };
    h = h.min(span).min(cfg.h_max) * dir;
    let mut g_prev = event.as_ref().map(|(g, _)| g(t, &y));

    for _ in 0..cfg.max_steps {
        if (t_end - t) * dir <= 0.0 {
            return Ok(sol);
        }
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        let k2 = f(t + C[1] * h, &axpy(&y, h, &[(A2[0], &k1)]))?;
        let k3 = f(t + C[2] * h, &axpy(&y, h, &[(A3[0], &k1), (A3[1], &k2)]))?;
        let k4 = f(t + C[3] * h, &axpy(&y, h, &[(A4[0], &k1), (A4[1], &k2), (A4[2], &k3)]))?;
        let k5 = f(t + C[4] * h, &axpy(&y, h, &[(A5[0], &k1), (A5[1], &k2), (A5[2], &k3), (A5[3], &k4)]))?;
        let k6 = f(
            t + C[5] * h,
            &axpy(&y, h, &[(A6[0], &k1), (A6[1], &k2), (A6[2], &k3), (A6[3], &k4), (A6[4], &k5)]),
        )?;
        let y1 = axpy(&y, h, &[(A7[0], &k1), (A7[2], &k3), (A7[3], &k4), (A7[4], &k5), (A7[5], &k6)]);
        let k7 = f(t + h, &y1)?;

        let ks = [&k1, &k2, &k3, &k4, &k5, &k6, &k7];
        let mut err = 0.0;
        for i in 0..N {
            let e: f64 = (0..7).map(|j| E[j] * ks[j][i]).sum::<f64>() * h;
            let sc = cfg.atol + cfg.rtol * y[i].abs().max(y1[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            if h.abs() < 1e-14 * t.abs().max(1.0) {
                return Err(BarkleyError::StepSizeUnderflow { xi: t });
            }
            continue;
        }
        let factor = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
        if err > 1.0 {
            h *= factor.min(1.0);
            if h.abs() < 1e-14 * t.abs().max(1.0) {
                return Err(BarkleyError::StepSizeUnderflow { xi: t });
            }
            continue;
        }

        let mut coeffs = [[0.0; N]; 5];
        for i in 0..N {
            let ydiff = y1[i] - y[i];
            let bspl = h * k1[i] - ydiff;
            coeffs[0][i] = y[i];
            coeffs[1][i] = ydiff;
            coeffs[2][i] = bspl;
            coeffs[3][i] = ydiff - h * k7[i] - bspl;
            coeffs[4][i] = h * (0..7).map(|j| DENSE[j] * ks[j][i]).sum::<f64>();
        }
        let step = DenseStep { t0: t, h, coeffs };
        let t_new = t + h;
        if norm(&y1) > cfg.blowup || y1.iter().any(|x| !x.is_finite()) {
            return Err(BarkleyError::BlowUp { xi: t_new });
        }
        if let (Some((g, cross)), Some(ga)) = (event.as_ref(), g_prev) {
            let gb = g(t_new, &y1);
            if fires(ga, gb, *cross) {
                let (te, ye) = locate_event(&step, g, ga, gb);
                sol.steps.push(step);
                sol.t.push(te);
                sol.y.push(ye);
                sol.event = Some((te, ye));
                return Ok(sol);
            }
            g_prev = Some(gb);
        }
        sol.steps.push(step);
        sol.t.push(t_new);
        sol.y.push(y1);
        t = t_new;
        y = y1;
        k1 = k7;
        h *= factor;
        if h.abs() > cfg.h_max {
            h = cfg.h_max * dir;
        }
    }
    Err(BarkleyError::NoConvergence(format!("step budget of {} exhausted at t = {t}", cfg.max_steps)))
}

/// Integration without events.
pub fn integrate_plain<const N: usize, F>(f: F, t0: f64, y0: [f64; N], t_end: f64, cfg: &OdeConfig) -> Result<Solution<N>>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    integrate(f, t0, y0, t_end, cfg, None::<(fn(f64, &[f64; N]) -> f64, Crossing)>)
}
