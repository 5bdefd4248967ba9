//! Melnikov integrals along the singular front and back.
//!
//! Every closed-form quantity is assembled from four kernel integrals per side,
//!
//! ```text
//! I   = int exp(-k chi) phi'(chi)^2       dchi
//! J_n = int exp(-k chi) phi'(chi) phi^n   dchi,   n = 1, 2, 3
//! ```
//!
//! with `k = sqrt(2) (1/2 - q_{j,-} / q_{j,+})`.

use serde::Serialize;

use crate::error::{BarkleyError, Result};
use crate::quadrature::{integrate_real_line, Quadrature};
use crate::singular_loop::{ln_phi_prime, solve_singular_parameters, Side, SingularLoopData, PHI_RATE};

pub use crate::quadrature::DEFAULT_QUAD_TOL;

/// `ln phi(chi)` without overflow.
fn ln_phi(chi: f64) -> f64 {
    if chi >= 0.0 {
        -(-PHI_RATE * chi).exp().ln_1p()
    } else {
        PHI_RATE * chi - (PHI_RATE * chi).exp().ln_1p()
    }
}

/// The four kernel integrals of one side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelIntegrals {
    /// Exponential weight rate `k`.
    pub k: f64,
    pub i: f64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    /// Sum of the quadrature error estimates.
    pub error: f64,
}

/// Kernel integrals for the weight rate `k`.
pub fn kernel_integrals(k: f64, tol: f64) -> Result<KernelIntegrals> {
    let i = integrate_real_line(&|x: f64| (-k * x + 2.0 * ln_phi_prime(x)).exp(), tol)?;
    let jn = |n: f64| -> Result<Quadrature> {
        integrate_real_line(&|x: f64| (-k * x + ln_phi_prime(x) + n * ln_phi(x)).exp(), tol)
    };
    let (j1, j2, j3) = (jn(1.0)?, jn(2.0)?, jn(3.0)?);
    Ok(KernelIntegrals {
        k,
        i: i.value,
        j1: j1.value,
        j2: j2.value,
        j3: j3.value,
        error: i.error + j1.error + j2.error + j3.error,
    })
}

/// Weight rate `sqrt(2) (1/2 - q_- / q_+)` of a side.
pub fn kernel_rate(lp: &SingularLoopData, side: Side) -> f64 {
    let (qp, qm) = match side {
        Side::Front => (lp.eqs.q_f_plus, lp.eqs.q_f_minus),
        Side::Back => (lp.eqs.q_b_plus, lp.eqs.q_b_minus),
    };
    std::f64::consts::SQRT_2 * (0.5 - qm / qp)
}

/// All Melnikov quantities of the singular loop at one `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MelnikovReport {
    pub r: f64,
    pub d0: f64,
    pub mu0: f64,
    /// Derivative of the front splitting with respect to `mu`, up to a positive factor.
    pub mhat_f: f64,
    /// Derivative of the front splitting with respect to `D`, up to the same factor.
    pub m_f: f64,
    pub mhat_b: f64,
    pub m_b: f64,
    /// Front splitting derivative with respect to the layer velocity, up to a positive factor.
    pub mtilde_f: f64,
    /// `m_b / mhat_b - m_f / mhat_f`; nonzero means the loop persists.
    pub mhat: f64,
    pub dqf_dmu: f64,
    pub dqb_dmu: f64,
    pub dqf_dd: f64,
    pub dqb_dd: f64,
    pub dqf_du: f64,
    pub dqb_du: f64,
    /// Determinant of the `(D, mu)` gradients of both splittings.
    pub grad_det: f64,
    pub front_kernels: KernelIntegrals,
    pub back_kernels: KernelIntegrals,
    /// Largest quadrature error estimate that entered the report.
    pub quad_err: f64,
}

/// Evaluates every Melnikov quantity at `r`.
pub fn eval_melnikov_suite(r: f64, tol: f64) -> Result<MelnikovReport> {
    let lp = solve_singular_parameters(r)?;
    melnikov_suite_for(&lp, tol)
}

/// [`eval_melnikov_suite`] for an already solved loop.
pub fn melnikov_suite_for(lp: &SingularLoopData, tol: f64) -> Result<MelnikovReport> {
    let r = lp.r;
    let e = &lp.eqs;
    let (d0, mu0) = (lp.d0, lp.mu0);
    let kf = kernel_integrals(kernel_rate(lp, Side::Front), tol)?;
    let kb = kernel_integrals(kernel_rate(lp, Side::Back), tol)?;
    let sqrt2 = std::f64::consts::SQRT_2;
    let rp = r + 0.1;

    let (qf, qb) = (e.q_f_plus, e.q_b_plus);
    let a_f = qf - 2.0 * e.q_f_minus;
    let a_b = qb - 2.0 * e.q_b_minus;

    let mhat_f = -qf * (d0 / rp).sqrt() * kf.i;
    let mhat_b = -qb * (d0 / rp).sqrt() * kb.i;
    let m_f = 0.5 * qf * sqrt2 * a_f * kf.i + 0.1 / rp * kf.j1 - 2.0 * qf * kf.j2 + qf * qf * kf.j3;
    let m_b = -0.5 * qb * sqrt2 * a_b * kb.i + (e.u_b - 2.1) / rp * kb.j1 + 2.0 * qb * kb.j2 - qb * qb * kb.j3;
    let mtilde_f = mtilde_from_kernels(lp, &kf);

    let pf = qf * qf * rp / (d0 * d0);
    let pb = qb * qb * rp / (d0 * d0);
    let dqb_du_quad = back_velocity_derivative(lp, tol)?;

    let (dqf_dmu, dqb_dmu) = (pf * mhat_f, pb * mhat_b);
    let (dqf_dd, dqb_dd) = (pf * m_f, pb * m_b);
    Ok(MelnikovReport {
        r,
        d0,
        mu0,
        mhat_f,
        m_f,
        mhat_b,
        m_b,
        mtilde_f,
        mhat: m_b / mhat_b - m_f / mhat_f,
        dqf_dmu,
        dqb_dmu,
        dqf_dd,
        dqb_dd,
        dqf_du: qf * qf / d0 * mtilde_f,
        dqb_du: dqb_du_quad.value,
        grad_det: dqf_dd * dqb_dmu - dqf_dmu * dqb_dd,
        front_kernels: kf,
        back_kernels: kb,
        quad_err: kf.error.max(kb.error).max(dqb_du_quad.error),
    })
}

/// `-(1/D0) int exp(-(mu0 + u_b) xi / D0) s_b (s_b - q_b) dxi` along the singular back.
///
/// Integrated in the profile variable `chi = -rate xi` with the integrand scaled to order one.
pub fn back_velocity_derivative(lp: &SingularLoopData, tol: f64) -> Result<Quadrature> {
    let rate = lp.weight_rate(Side::Back);
    let back = lp.back;
    let a = back.rate;
    let norm = back.q_plus * back.q_plus * a * a;
    let q = integrate_real_line(
        &|chi: f64| {
            let xi = -chi / a;
            let p = back.eval(xi);
            let (s, _) = back.eval_log(xi);
            s.scale_exp(-rate * xi).to_f64() * (p.s - p.q) / norm
        },
        tol,
    )?;
    let scale = norm / (a * lp.d0);
    Ok(Quadrature { value: -q.value * scale, error: q.error * scale })
}

/// Direct Melnikov integral `int <psi_j, B gamma_j'> dxi` with `B = diag(0, 1, 0)` scaled by `-1/D0`.
///
/// Because the adjoint has no `u` component this equals
/// `-(1/D0) int exp(-(mu0 + u_j) xi / D0) s_j^2 dxi`.
pub fn melnikov_direct_b(side: Side, lp: &SingularLoopData, tol: f64) -> Result<f64> {
    let rate = lp.weight_rate(side);
    let prof = *lp.profile(side);
    let q = integrate_real_line(
        &|xi: f64| {
            let (s, _) = prof.eval_log(xi);
            (s * s).scale_exp(-rate * xi).to_f64()
        },
        tol,
    )?;
    Ok(-q.value / lp.d0)
}

fn mtilde_from_kernels(lp: &SingularLoopData, kf: &KernelIntegrals) -> f64 {
    -lp.eqs.q_f_plus * ((lp.r + 0.1) / lp.d0).sqrt() * kf.i + kf.j1
}

/// `mtilde_f` alone; needs only the front kernels, so it stays defined as `r` approaches `2/3`.
pub fn mtilde_front(r: f64, tol: f64) -> Result<f64> {
    let lp = solve_singular_parameters(r)?;
    let kf = kernel_integrals(kernel_rate(&lp, Side::Front), tol)?;
    Ok(mtilde_from_kernels(&lp, &kf))
}

/// Root of `r -> mtilde_f(r)` in `(2/3, 1)`, the edge of the double-twist regime.
pub fn find_beta(tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(BarkleyError::InvalidInput(format!("tol must be positive, got {tol}")));
    }
    let mt = |r: f64| mtilde_front(r, DEFAULT_QUAD_TOL);
    let (mut lo, mut hi) = (2.0 / 3.0 + 1e-8, 1.0);
    let (flo, fhi) = (mt(lo)?, mt(hi)?);
    if (flo > 0.0) == (fhi > 0.0) {
        return Err(BarkleyError::NoRoot("mtilde_f keeps its sign on (2/3, 1)".into()));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (mt(mid)? > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Smallest grid value beyond which `mhat` stays positive on the sampled reports.
///
/// An empirical estimate only; `None` when the last sample is not positive.
pub fn estimate_mhat_threshold(reports: &[MelnikovReport]) -> Option<f64> {
    let mut threshold = None;
    for rep in reports.iter().rev() {
        if rep.mhat > 0.0 {
            threshold = Some(rep.r);
        } else {
            break;
        }
    }
    threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_phi_matches_direct() {
        for chi in [-30.0, -2.0, 0.0, 1.5, 50.0] {
            let direct = crate::singular_loop::phi_eval(chi).0.ln();
            assert!((ln_phi(chi) - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn report_sign_structure_at_07() {
        let rep = eval_melnikov_suite(0.7, DEFAULT_QUAD_TOL).unwrap();
        assert!(rep.mhat_f < 0.0 && rep.mhat_b < 0.0);
        assert!(rep.mhat > 0.0);
        assert!(rep.mtilde_f > 0.0);
        assert!(rep.dqb_du < 0.0);
        assert!(rep.quad_err < 1e-9);
    }

    #[test]
    fn ratio_identities() {
        for r in [0.7, 1.3] {
            let rep = eval_melnikov_suite(r, DEFAULT_QUAD_TOL).unwrap();
            let ub = solve_singular_parameters(r).unwrap().eqs.u_b;
            assert!((rep.m_f / rep.mhat_f + (rep.mu0 + 2.0) / (2.0 * rep.d0)).abs() < 1e-8);
            assert!((rep.m_b / rep.mhat_b + (rep.mu0 + ub) / (2.0 * rep.d0)).abs() < 1e-8);
            assert!((rep.mhat - (2.0 - ub) / (2.0 * rep.d0)).abs() < 1e-8);
        }
    }

    #[test]
    fn threshold_estimate() {
        let mut a = eval_melnikov_suite(0.7, DEFAULT_QUAD_TOL).unwrap();
        let mut b = a;
        a.r = 1.0;
        b.r = 2.0;
        assert_eq!(estimate_mhat_threshold(&[a, b]), Some(1.0));
        b.mhat = -1.0;
        assert_eq!(estimate_mhat_threshold(&[a, b]), None);
    }
}
