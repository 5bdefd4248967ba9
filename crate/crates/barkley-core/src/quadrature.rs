//! Adaptive Simpson quadrature on finite intervals and on the real line.

use serde::Serialize;

use crate::error::{BarkleyError, Result};

/// Default absolute tolerance for Melnikov kernels.
pub const DEFAULT_QUAD_TOL: f64 = 1e-11;

const MAX_DEPTH: u32 = 48;
const MAX_EVALS: usize = 20_000_000;
const TRUNCATION_RATIO: f64 = 1e-15;
const START_HALF_WIDTH: f64 = 8.0;
const MAX_HALF_WIDTH: f64 = 1_048_576.0;

/// Value of an integral together with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

impl Quadrature {
    fn add(self, other: Quadrature) -> Quadrature {
        Quadrature { value: self.value + other.value, error: self.error + other.error }
    }
}

struct Segment {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate_interval<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<Quadrature> {
    if !(tol > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(BarkleyError::InvalidInput(format!("bad quadrature request [{a}, {b}] tol {tol}")));
    }
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0 });
    }
    if a > b {
        let q = integrate_interval(f, b, a, tol)?;
        return Ok(Quadrature { value: -q.value, error: q.error });
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let mut evals = 3usize;
    let mut stack = vec![Segment { a, b, fa, fm, fb, whole: simpson(a, b, fa, fm, fb), tol, depth: 0 }];
    let mut total = Quadrature { value: 0.0, error: 0.0 };
    while let Some(seg) = stack.pop() {
        let m = 0.5 * (seg.a + seg.b);
        let lm = 0.5 * (seg.a + m);
        let rm = 0.5 * (m + seg.b);
        let (flm, frm) = (f(lm), f(rm));
        evals += 2;
        if !flm.is_finite() || !frm.is_finite() {
            return Err(BarkleyError::NoConvergence(format!("non-finite integrand near x = {m}")));
        }
        let left = simpson(seg.a, m, seg.fa, flm, seg.fm);
        let right = simpson(m, seg.b, seg.fm, frm, seg.fb);
        let delta = left + right - seg.whole;
        if delta.abs() <= 15.0 * seg.tol || seg.depth >= MAX_DEPTH || m <= seg.a || m >= seg.b {
            if seg.depth >= MAX_DEPTH && delta.abs() > 15.0 * seg.tol {
                return Err(BarkleyError::NoConvergence(format!(
                    "subdivision limit reached on [{}, {}]",
                    seg.a, seg.b
                )));
            }
            total = total.add(Quadrature { value: left + right + delta / 15.0, error: delta.abs() / 15.0 });
            continue;
        }
        if evals > MAX_EVALS {
            return Err(BarkleyError::NoConvergence(format!("evaluation budget exhausted on [{a}, {b}]")));
        }
        let half = 0.5 * seg.tol;
        let depth = seg.depth + 1;
        stack.push(Segment { a: m, b: seg.b, fa: seg.fm, fm: frm, fb: seg.fb, whole: right, tol: half, depth });
        stack.push(Segment { a: seg.a, b: m, fa: seg.fa, fm: flm, fb: seg.fm, whole: left, tol: half, depth });
    }
    Ok(total)
}

/// Half-width `T` such that `|f(+-T)|` is negligible against the integrand scale.
pub fn truncation_half_width<F: Fn(f64) -> f64>(f: &F) -> Result<f64> {
    let scale = [-5.0, 0.0, 5.0].iter().map(|&x| f(x).abs()).fold(0.0_f64, f64::max);
    if !scale.is_finite() {
        return Err(BarkleyError::NoConvergence("integrand scale is not finite".into()));
    }
    if scale == 0.0 {
        return Ok(START_HALF_WIDTH);
    }
    let mut t = START_HALF_WIDTH;
    loop {
        if f(t).abs() < TRUNCATION_RATIO * scale && f(-t).abs() < TRUNCATION_RATIO * scale {
            return Ok(t);
        }
        if t >= MAX_HALF_WIDTH {
            return Err(BarkleyError::NonDecaying { limit: MAX_HALF_WIDTH });
        }
        t *= 2.0;
    }
}

/// Integral of an exponentially decaying `f` over the whole real line.
///
/// The truncated interval `[-T, T]` is split into geometric panels
/// `[0, 1], [1, 2], [2, 4], ...` and their mirror images.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: &F, tol: f64) -> Result<Quadrature> {
    let t = truncation_half_width(f)?;
    let mut edges = vec![0.0, 1.0];
    while *edges.last().unwrap() < t {
        let next = 2.0 * edges.last().unwrap();
        edges.push(next.min(t));
    }
    let panels = 2 * (edges.len() - 1);
    let local_tol = tol / panels as f64;
    let mut total = Quadrature { value: 0.0, error: 0.0 };
    for w in edges.windows(2) {
        total = total.add(integrate_interval(f, w[0], w[1], local_tol)?);
        total = total.add(integrate_interval(f, -w[1], -w[0], local_tol)?);
    }
    Ok(total)
}
