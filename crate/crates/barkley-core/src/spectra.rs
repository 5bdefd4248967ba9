//! Linearization of the traveling-wave system and small dense eigenproblems.
//!
//! Eigenvalues of 3x3 matrices come from the characteristic cubic in closed
//! form followed by one Newton polish per root. Eigenvectors are taken from
//! cross products of the rows of `A - lambda I`.

use serde::Serialize;

use crate::error::{BarkleyError, Result};
use crate::model_core::{
    check_pole, reaction_f_dq, reaction_f_du, reaction_g, reaction_g_dq, reaction_g_du,
    reaction_f, EquilibriumSet, ModelParams, PhasePoint,
};

/// Row-major 3x3 matrix.
pub type Mat3 = [[f64; 3]; 3];

/// Relative separation below which two eigenvalues count as one repeated root.
pub const MULTIPLICITY_TOL: f64 = 1e-9;

/// Eigen-decomposition of a real 3x3 matrix with a real spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralData {
    /// Eigenvalues in ascending order.
    pub lambda: [f64; 3],
    /// Unit eigenvectors; `vectors[i]` belongs to `lambda[i]`.
    pub vectors: [[f64; 3]; 3],
    /// True when two eigenvalues coincide within [`MULTIPLICITY_TOL`].
    pub multiple: bool,
    /// Largest residual `||A v - lambda v||_inf` over the returned pairs.
    pub residual: f64,
    /// Principal ratio `lambda3 / (-lambda2)` when `lambda2 < 0 < lambda3`.
    pub beta: Option<f64>,
}

impl SpectralData {
    /// True when the signature is `lambda1 < lambda2 < 0 < lambda3`.
    pub fn is_saddle_21(&self) -> bool {
        let [l1, l2, l3] = self.lambda;
        l1 < l2 && l2 < 0.0 && 0.0 < l3
    }
}

/// Analytic Jacobian of the traveling-wave vector field.
pub fn jacobian_tw(p: PhasePoint, params: &ModelParams) -> Result<Mat3> {
    let gap = check_pole(p.u, params)?;
    let d = params.d;
    let row2 = [
        -reaction_f_dq(p.q, p.u, params.r) / d,
        (p.u + params.mu()) / d,
        (p.s - reaction_f_du(p.q)) / d,
    ];
    let eps = params.eps;
    let row3 = if eps == 0.0 {
        [0.0, 0.0, 0.0]
    } else {
        let g = reaction_g(p.q, p.u);
        [
            eps * reaction_g_dq(p.u) / gap,
            0.0,
            eps * (reaction_g_du(p.q) * gap - g) / (gap * gap),
        ]
    };
    Ok([[0.0, 1.0, 0.0], row2, row3])
}

/// Jacobian of the system in the stretched variable `eps * xi`, which equals `J / eps`.
pub fn jacobian_rescaled(p: PhasePoint, params: &ModelParams) -> Result<Mat3> {
    if !(params.eps > 0.0) {
        return Err(BarkleyError::InvalidInput("rescaling requires eps > 0".into()));
    }
    let j = jacobian_tw(p, params)?;
    Ok(j.map(|row| row.map(|x| x / params.eps)))
}

pub(crate) fn mat_vec(m: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub(crate) fn transpose(m: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = m[j][i];
        }
    }
    t
}

pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = norm(&a);
    [a[0] / n, a[1] / n, a[2] / n]
}

fn orient(v: [f64; 3]) -> [f64; 3] {
    for &x in &v {
        if x.abs() > 1e-12 {
            return if x < 0.0 { [-v[0], -v[1], -v[2]] } else { v };
        }
    }
    v
}

fn mat_norm(m: &Mat3) -> f64 {
    m.iter().flat_map(|r| r.iter()).fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Real roots of `x^3 + a x^2 + b x + c`, or the imaginary part of a complex pair.
fn cubic_roots(a: f64, b: f64, c: f64, tol: f64) -> Result<[f64; 3]> {
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let half_q = 0.5 * q;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;
    let mut roots = if p == 0.0 && q == 0.0 {
        [shift; 3]
    } else if disc > 0.0 {
        let big = -half_q.signum() * (half_q.abs() + disc.sqrt()).cbrt();
        let small = if big != 0.0 { -third_p / big } else { 0.0 };
        let real = big + small + shift;
        let re_pair = -0.5 * (big + small) + shift;
        let im_pair = 0.5 * 3f64.sqrt() * (big - small).abs();
        let scale = 1.0 + real.abs().max(re_pair.abs());
        if im_pair > tol * scale {
            return Err(BarkleyError::ComplexSpectrum { imag: im_pair });
        }
        [real, re_pair, re_pair]
    } else {
        let m = 2.0 * (-third_p).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let two_pi_3 = 2.0 * std::f64::consts::PI / 3.0;
        [
            m * theta.cos() + shift,
            m * (theta - two_pi_3).cos() + shift,
            m * (theta - 2.0 * two_pi_3).cos() + shift,
        ]
    };
    let poly = |x: f64| ((x + a) * x + b) * x + c;
    let dpoly = |x: f64| (3.0 * x + 2.0 * a) * x + b;
    for x in roots.iter_mut() {
        let d = dpoly(*x);
        if d != 0.0 {
            let candidate = *x - poly(*x) / d;
            if candidate.is_finite() && poly(candidate).abs() <= poly(*x).abs() {
                *x = candidate;
            }
        }
    }
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(roots)
}

/// Null-space basis of `A - lambda I`, best conditioned direction first.
fn null_vectors(m: &Mat3, lambda: f64) -> Vec<[f64; 3]> {
    let mut s = *m;
    for (i, row) in s.iter_mut().enumerate() {
        row[i] -= lambda;
    }
    let scale = mat_norm(m).max(lambda.abs()).max(1e-300);
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let mut best = [0.0; 3];
    let mut best_norm = 0.0;
    for (i, j) in pairs {
        let c = cross(&s[i], &s[j]);
        let n = norm(&c);
        if n > best_norm {
            best_norm = n;
            best = c;
        }
    }
    if best_norm > 1e-10 * scale * scale {
        return vec![normalize(best)];
    }
    let mut row = [0.0; 3];
    let mut row_norm = 0.0;
    for r in &s {
        let n = norm(r);
        if n > row_norm {
            row_norm = n;
            row = *r;
        }
    }
    if row_norm > 1e-10 * scale {
        let axis = (0..3)
            .min_by(|&i, &j| row[i].abs().partial_cmp(&row[j].abs()).unwrap())
            .unwrap();
        let mut e = [0.0; 3];
        e[axis] = 1.0;
        let v1 = normalize(cross(&row, &e));
        let v2 = normalize(cross(&row, &v1));
        return vec![v1, v2];
    }
    vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

/// Eigenvalues (ascending) and unit eigenvectors of a real 3x3 matrix.
///
/// Eigenvectors follow the convention that their first nonzero component is positive.
pub fn eigen_decompose_3x3(m: &Mat3, tol: f64) -> Result<SpectralData> {
    if m.iter().flat_map(|r| r.iter()).any(|x| !x.is_finite()) {
        return Err(BarkleyError::InvalidInput("matrix has non-finite entries".into()));
    }
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let lambda = cubic_roots(-tr, minors, -det, tol)?;
    let close = |a: f64, b: f64| (a - b).abs() <= MULTIPLICITY_TOL * a.abs().max(b.abs()).max(1.0);
    let multiple = close(lambda[0], lambda[1]) || close(lambda[1], lambda[2]);

    let mut vectors = [[0.0; 3]; 3];
    let mut i = 0;
    while i < 3 {
        let mut j = i + 1;
        while j < 3 && close(lambda[i], lambda[j]) {
            j += 1;
        }
        let group = j - i;
        let basis = if group == 1 {
            null_vectors(m, lambda[i])
        } else {
            let mean = lambda[i..j].iter().sum::<f64>() / group as f64;
            null_vectors(m, mean)
        };
        for k in 0..group {
            vectors[i + k] = orient(basis[k.min(basis.len() - 1)]);
        }
        i = j;
    }

    let mut residual: f64 = 0.0;
    for k in 0..3 {
        let av = mat_vec(m, &vectors[k]);
        for c in 0..3 {
            residual = residual.max((av[c] - lambda[k] * vectors[k][c]).abs());
        }
    }
    let beta = if lambda[1] < 0.0 && lambda[2] > 0.0 { Some(lambda[2] / -lambda[1]) } else { None };
    Ok(SpectralData { lambda, vectors, multiple, residual, beta })
}

/// Left eigenvectors matched to the ordering of `eigen_decompose_3x3(m)`.
pub(crate) fn left_eigenvectors(m: &Mat3, tol: f64) -> Result<[[f64; 3]; 3]> {
    Ok(eigen_decompose_3x3(&transpose(m), tol)?.vectors)
}

/// Spectrum of one equilibrium together with its location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumSpectrum {
    /// Location of the equilibrium.
    pub point: PhasePoint,
    /// Eigen-decomposition of the Jacobian there.
    pub spectral: SpectralData,
}

/// Hyperbolicity classification of `X1` and `X2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperbolicityReport {
    /// Spectrum at the laminar state.
    pub x1: EquilibriumSpectrum,
    /// Spectrum at the turbulent state.
    pub x2: EquilibriumSpectrum,
    /// Both equilibria satisfy `lambda1 < lambda2 < 0 < lambda3`.
    pub h0: bool,
    /// Eigenvalues simple and `-lambda2 < lambda3` at both equilibria.
    pub h1: bool,
}

/// Default eigen tolerance used by the classification.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-10;

/// Spectra and H0/H1 verdict at `X1` and `X2` for the given parameters.
pub fn classify_hyperbolicity(eqs: &EquilibriumSet, params: &ModelParams) -> Result<HyperbolicityReport> {
    if params.c >= eqs.u_b {
        return Err(BarkleyError::InvalidInput(format!(
            "wave speed c = {} must stay below u_b = {}",
            params.c, eqs.u_b
        )));
    }
    let mut out = Vec::with_capacity(2);
    for point in [eqs.x1, eqs.x2] {
        let j = jacobian_tw(point, params)?;
        let spectral = eigen_decompose_3x3(&j, DEFAULT_EIGEN_TOL)?;
        let zero_tol = 1e-12 * mat_norm(&j).max(1.0);
        if let Some(&l) = spectral.lambda.iter().find(|l| l.abs() <= zero_tol) {
            return Err(BarkleyError::NotHyperbolic { value: l });
        }
        out.push(EquilibriumSpectrum { point, spectral });
    }
    let ok0 = |s: &SpectralData| s.is_saddle_21();
    let ok1 = |s: &SpectralData| !s.multiple && -s.lambda[1] < s.lambda[2];
    let (x1, x2) = (out[0], out[1]);
    Ok(HyperbolicityReport {
        x1,
        x2,
        h0: ok0(&x1.spectral) && ok0(&x2.spectral),
        h1: ok1(&x1.spectral) && ok1(&x2.spectral),
    })
}

/// Linear stability of a zero of the reaction kinetics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stability {
    /// Both eigenvalues have negative real part.
    Stable,
    /// Otherwise.
    Unstable,
}

/// Stability of `(q, u)` under the kinetics `q_t = f`, `u_t = eps g`.
pub fn kinetics_stability(q: f64, u: f64, r: f64, eps: f64) -> Result<Stability> {
    let (f, g) = (reaction_f(q, u, r), reaction_g(q, u));
    if f.abs() > 1e-8 || g.abs() > 1e-8 {
        return Err(BarkleyError::NotAnEquilibrium { q, u });
    }
    let a = reaction_f_dq(q, u, r);
    let b = reaction_f_du(q);
    let c = eps * reaction_g_dq(u);
    let d = eps * reaction_g_du(q);
    let tr = a + d;
    let det = a * d - b * c;
    Ok(if tr < 0.0 && det > 0.0 { Stability::Stable } else { Stability::Unstable })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_core::{compute_equilibria, middle_equilibrium, DEFAULT_UB_TOL};

    #[test]
    fn identity_is_flagged_multiple() {
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let s = eigen_decompose_3x3(&id, 1e-10).unwrap();
        assert_eq!(s.lambda, [1.0, 1.0, 1.0]);
        assert!(s.multiple);
        assert!(s.residual < 1e-14);
    }

    #[test]
    fn diagonal_matrix() {
        let m = [[3.0, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, -1.0]];
        let s = eigen_decompose_3x3(&m, 1e-10).unwrap();
        assert!((s.lambda[0] + 2.0).abs() < 1e-14);
        assert!((s.lambda[1] + 1.0).abs() < 1e-14);
        assert!((s.lambda[2] - 3.0).abs() < 1e-14);
        assert_eq!(s.vectors[0], [0.0, 1.0, 0.0]);
        assert_eq!(s.vectors[1], [0.0, 0.0, 1.0]);
        assert_eq!(s.vectors[2], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn rotation_is_complex() {
        let m = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 2.0]];
        assert!(matches!(eigen_decompose_3x3(&m, 1e-10), Err(BarkleyError::ComplexSpectrum { .. })));
    }

    #[test]
    fn jacobian_at_laminar_state() {
        let p = ModelParams::new(0.8, 1.3, 0.2, 0.0, 0.0).unwrap();
        let j = jacobian_tw(PhasePoint::new(0.0, 0.0, 2.0), &p).unwrap();
        assert!((j[1][0] - 0.1 / 1.3).abs() < 1e-15);
        assert_eq!(j[2], [0.0, 0.0, 0.0]);
    }

    #[test]
    fn kinetics_examples() {
        let eq = compute_equilibria(1.0, DEFAULT_UB_TOL).unwrap();
        assert_eq!(kinetics_stability(0.0, 2.0, 1.0, 0.1).unwrap(), Stability::Stable);
        assert_eq!(kinetics_stability(eq.q_b_plus, eq.u_b, 1.0, 0.1).unwrap(), Stability::Stable);
        let (q, u) = middle_equilibrium(1.0, 1e-14).unwrap();
        assert_eq!(kinetics_stability(q, u, 1.0, 0.1).unwrap(), Stability::Unstable);
        assert!(matches!(
            kinetics_stability(0.5, 1.5, 1.0, 0.1),
            Err(BarkleyError::NotAnEquilibrium { .. })
        ));
    }
}
