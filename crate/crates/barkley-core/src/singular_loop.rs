//! Explicit fast-subsystem front and back, the parameters at which they close into a
//! singular loop, their adjoint solutions and the asymptotic sign probes of the
//! scalar products between them.

use serde::Serialize;

use crate::error::{ensure_finite, BarkleyError, Result};
use crate::model_core::{compute_equilibria, EquilibriumSet, DEFAULT_UB_TOL};
use crate::orbits::OrbitSolution;
use crate::signed_log::SignedLog;

/// Steepness `sqrt(2)/2` of the logistic profile.
pub const PHI_RATE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Logistic profile `phi(chi) = 1 / (1 + exp(-chi / sqrt(2)))` and its derivative.
pub fn phi_eval(chi: f64) -> (f64, f64) {
    let e = (-PHI_RATE * chi.abs()).exp();
    let denom = 1.0 + e;
    let phi = if chi >= 0.0 { 1.0 / denom } else { e / denom };
    (phi, PHI_RATE * e / (denom * denom))
}

/// `ln phi'(chi)`, finite for every finite `chi`.
pub fn ln_phi_prime(chi: f64) -> f64 {
    let a = PHI_RATE * chi.abs();
    PHI_RATE.ln() - a - 2.0 * (-a).exp().ln_1p()
}

/// `phi''(chi) / phi'(chi) = -tanh(chi / (2 sqrt(2)))` times the rate.
fn phi_curvature_ratio(chi: f64) -> f64 {
    -PHI_RATE * (0.5 * PHI_RATE * chi).tanh()
}

/// Which connection of the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Laminar to turbulent, in the layer `u = 2`.
    Front,
    /// Turbulent to laminar, in the layer `u = u_b`.
    Back,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Front => "front",
            Side::Back => "back",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = BarkleyError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "front" | "f" => Ok(Side::Front),
            "back" | "b" => Ok(Side::Back),
            other => Err(BarkleyError::InvalidInput(format!("unknown side '{other}'"))),
        }
    }
}

/// Values of a fast-subsystem connection at one `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileSample {
    pub q: f64,
    pub s: f64,
    pub sdot: f64,
    pub u: f64,
}

/// Closed-form heteroclinic connection of the fast subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileEvaluator {
    pub side: Side,
    /// Upper saddle value `q_{j,+}`.
    pub q_plus: f64,
    /// Argument scale `q_{j,+} sqrt((r + 0.1) / D)` of the logistic profile.
    pub rate: f64,
    /// Constant layer velocity.
    pub u: f64,
}

impl ProfileEvaluator {
    pub fn new(side: Side, eqs: &EquilibriumSet, d: f64) -> Self {
        let q_plus = match side {
            Side::Front => eqs.q_f_plus,
            Side::Back => eqs.q_b_plus,
        };
        let u = match side {
            Side::Front => 2.0,
            Side::Back => eqs.u_b,
        };
        Self { side, q_plus, rate: q_plus * ((eqs.r + 0.1) / d).sqrt(), u }
    }

    fn chi(&self, xi: f64) -> f64 {
        match self.side {
            Side::Front => self.rate * xi,
            Side::Back => -self.rate * xi,
        }
    }

    fn s_sign(&self) -> f64 {
        match self.side {
            Side::Front => 1.0,
            Side::Back => -1.0,
        }
    }

    pub fn eval(&self, xi: f64) -> ProfileSample {
        let (phi, dphi) = phi_eval(self.chi(xi));
        let s = self.s_sign() * self.q_plus * self.rate * dphi;
        let sdot = s * self.rate * phi_curvature_ratio(self.rate * xi);
        ProfileSample { q: self.q_plus * phi, s, sdot, u: self.u }
    }

    /// `(s, sdot)` in logarithmic form, exact far into both tails.
    pub fn eval_log(&self, xi: f64) -> (SignedLog, SignedLog) {
        let ln_s = (self.q_plus * self.rate).ln() + ln_phi_prime(self.chi(xi));
        let s = SignedLog::new(self.s_sign() as i8, ln_s);
        let ratio = SignedLog::from_f64(self.rate * phi_curvature_ratio(self.rate * xi));
        (s, s * ratio)
    }
}

/// Front/back profile at `(xi, r, D)`.
pub fn singular_profile(side: Side, xi: f64, r: f64, d: f64) -> Result<ProfileSample> {
    ensure_finite("xi", xi)?;
    if !(d > 0.0) {
        return Err(BarkleyError::InvalidInput(format!("D must be positive, got {d}")));
    }
    let eqs = compute_equilibria(r, DEFAULT_UB_TOL)?;
    Ok(ProfileEvaluator::new(side, &eqs, d).eval(xi))
}

/// Parameters `(D0, mu0)` of the singular loop and both of its fast connections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularLoopData {
    pub r: f64,
    pub d0: f64,
    pub mu0: f64,
    pub eqs: EquilibriumSet,
    pub front: ProfileEvaluator,
    pub back: ProfileEvaluator,
}

impl SingularLoopData {
    pub fn profile(&self, side: Side) -> &ProfileEvaluator {
        match side {
            Side::Front => &self.front,
            Side::Back => &self.back,
        }
    }

    /// Layer velocity of the connection.
    pub fn layer_u(&self, side: Side) -> f64 {
        self.profile(side).u
    }

    /// Exponent `(mu0 + u_j) / D0` of the adjoint weight.
    pub fn weight_rate(&self, side: Side) -> f64 {
        (self.mu0 + self.layer_u(side)) / self.d0
    }

    /// Residuals of the front and back matching conditions.
    pub fn matching_residuals(&self) -> (f64, f64) {
        let e = &self.eqs;
        let w = (2.0 * self.d0 * (self.r + 0.1)).sqrt();
        let front = (2.0 + self.mu0) - 0.5 * w * (e.q_f_plus - 2.0 * e.q_f_minus);
        let back = (e.u_b + self.mu0) + 0.5 * w * (e.q_b_plus - 2.0 * e.q_b_minus);
        (front, back)
    }
}

/// Closed-form solution of the two matching conditions for `(D0, mu0)`.
pub fn solve_singular_parameters(r: f64) -> Result<SingularLoopData> {
    let eqs = compute_equilibria(r, DEFAULT_UB_TOL)?;
    let a_front = eqs.q_f_plus - 2.0 * eqs.q_f_minus;
    let a_back = eqs.q_b_plus - 2.0 * eqs.q_b_minus;
    let w = 2.0 * (2.0 - eqs.u_b) / (a_front + a_back);
    let d0 = w * w / (2.0 * (r + 0.1));
    let mu0 = 0.5 * w * a_front - 2.0;
    Ok(SingularLoopData {
        r,
        d0,
        mu0,
        eqs,
        front: ProfileEvaluator::new(Side::Front, &eqs, d0),
        back: ProfileEvaluator::new(Side::Back, &eqs, d0),
    })
}

/// Bounded solution `exp(-(mu0 + u_j) xi / D0) (sdot_j, -s_j, 0)` of the layer adjoint equation.
pub fn adjoint_psi(side: Side, xi: f64, lp: &SingularLoopData) -> [f64; 3] {
    let (s, sdot) = lp.profile(side).eval_log(xi);
    let t = -lp.weight_rate(side) * xi;
    [sdot.scale_exp(t).to_f64(), (-s).scale_exp(t).to_f64(), 0.0]
}

/// The four scalar products whose asymptotic signs are probed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ProbeKind {
    /// Singular front at `+xi` against the back at `-xi`.
    BackMinus,
    /// Back at `-xi` against the perturbed front at `+xi`.
    BackPlus,
    /// Back at `+xi` against the front at `-xi`.
    FrontMinus,
    /// Front at `-xi` against the perturbed back at `+xi`.
    FrontPlus,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 4] =
        [ProbeKind::BackMinus, ProbeKind::FrontMinus, ProbeKind::BackPlus, ProbeKind::FrontPlus];

    pub fn label(self) -> &'static str {
        match self {
            ProbeKind::BackMinus => "b-",
            ProbeKind::BackPlus => "b+",
            ProbeKind::FrontMinus => "f-",
            ProbeKind::FrontPlus => "f+",
        }
    }

    /// Side of the orbit this probe consumes, and whether it is mandatory.
    pub fn orbit_side(self) -> (Side, bool) {
        match self {
            ProbeKind::BackMinus => (Side::Back, false),
            ProbeKind::FrontMinus => (Side::Front, false),
            ProbeKind::BackPlus => (Side::Front, true),
            ProbeKind::FrontPlus => (Side::Back, true),
        }
    }
}

/// Base spacing of the geometric probe grid.
pub const PROBE_XI_BASE: f64 = 0.5;
/// Number of doublings spanned by the probe grid.
pub const PROBE_DOUBLINGS: u32 = 20;
/// Grid points per doubling.
pub const PROBE_STEPS_PER_DOUBLING: u32 = 4;
/// Magnitudes below this are treated as underflow.
pub const PROBE_FLOOR: f64 = 1e-280;
/// Number of trailing samples that must agree in sign.
pub const PROBE_STABLE_SAMPLES: usize = 8;

/// Outcome of one asymptotic sign probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignReport {
    pub kind: ProbeKind,
    /// Whether an orbit of the perturbed system was used.
    pub used_orbit: bool,
    /// `(xi, sign, log10 |d|)` for each grid point.
    pub samples: Vec<(f64, i8, f64)>,
    /// Sign shared by the trailing samples above the floor.
    pub eventual_sign: i8,
    /// True when `|d|` shrinks by at least six decades across the samples.
    pub decays: bool,
    /// Eventual sign positive and decaying.
    pub passed: bool,
}

fn probe_value(kind: ProbeKind, xi: f64, lp: &SingularLoopData, orbit: Option<&OrbitSolution>) -> Result<SignedLog> {
    let front = |x: f64| -> Result<(SignedLog, SignedLog)> {
        match orbit {
            Some(o) if o.side == Side::Front => o.eval_log(x),
            _ => Ok(lp.front.eval_log(x)),
        }
    };
    let back = |x: f64| -> Result<(SignedLog, SignedLog)> {
        match orbit {
            Some(o) if o.side == Side::Back => o.eval_log(x),
            _ => Ok(lp.back.eval_log(x)),
        }
    };
    let d = match kind {
        ProbeKind::BackMinus => {
            let (sf, dsf) = lp.front.eval_log(xi);
            let (sb, dsb) = back(-xi)?;
            (dsf * sb).sub(sf * dsb)
        }
        ProbeKind::FrontMinus => {
            let (sb, dsb) = lp.back.eval_log(xi);
            let (sf, dsf) = front(-xi)?;
            (dsb * sf).sub(sb * dsf)
        }
        ProbeKind::BackPlus => {
            let (sb, dsb) = lp.back.eval_log(-xi);
            let (sf, dsf) = front(xi)?;
            (dsb * sf).sub(sb * dsf)
        }
        ProbeKind::FrontPlus => {
            let (sf, dsf) = lp.front.eval_log(-xi);
            let (sb, dsb) = back(xi)?;
            (dsf * sb).sub(sf * dsb)
        }
    };
    Ok(d)
}

/// Eventual sign of the scalar-product function `d(xi)` on a geometric grid toward `+inf`.
///
/// `BackPlus` and `FrontPlus` need an orbit of the perturbed system on the side given by
/// [`ProbeKind::orbit_side`]; the other two use one when supplied.
pub fn scalar_product_sign_probe(
    kind: ProbeKind,
    lp: &SingularLoopData,
    orbit: Option<&OrbitSolution>,
) -> Result<SignReport> {
    let (side, required) = kind.orbit_side();
    let orbit = match orbit {
        Some(o) if o.side != side => {
            return Err(BarkleyError::InvalidInput(format!(
                "probe {} needs a {} orbit, got {}",
                kind.label(),
                side.name(),
                o.side.name()
            )))
        }
        None if required => {
            return Err(BarkleyError::InvalidInput(format!("probe {} requires an orbit", kind.label())))
        }
        other => other,
    };
    let floor = PROBE_FLOOR.ln();
    let count = PROBE_DOUBLINGS * PROBE_STEPS_PER_DOUBLING;
    let mut samples = Vec::with_capacity(count as usize + 1);
    let mut kept: Vec<SignedLog> = Vec::new();
    for k in 0..=count {
        let xi = PROBE_XI_BASE * 2f64.powf(f64::from(k) / f64::from(PROBE_STEPS_PER_DOUBLING));
        let d = probe_value(kind, xi, lp, orbit)?;
        samples.push((xi, d.sign, d.ln_abs / std::f64::consts::LN_10));
        if !d.is_zero() && d.ln_abs > floor {
            kept.push(d);
        }
    }
    if kept.len() < PROBE_STABLE_SAMPLES {
        return Err(BarkleyError::Inconclusive(format!(
            "probe {}: only {} samples above the floor",
            kind.label(),
            kept.len()
        )));
    }
    let tail = &kept[kept.len() - PROBE_STABLE_SAMPLES..];
    let eventual_sign = tail[0].sign;
    if tail.iter().any(|d| d.sign != eventual_sign) {
        return Err(BarkleyError::Inconclusive(format!("probe {}: sign does not settle", kind.label())));
    }
    let decays = kept.last().unwrap().ln_abs < kept[0].ln_abs - 6.0 * std::f64::consts::LN_10
        || samples.iter().any(|&(_, s, l)| s == 0 || l * std::f64::consts::LN_10 <= floor);
    Ok(SignReport {
        kind,
        used_orbit: orbit.is_some(),
        samples,
        eventual_sign,
        decays,
        passed: eventual_sign > 0 && decays,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_symmetry_and_limits() {
        let (p, dp) = phi_eval(0.0);
        assert_eq!(p, 0.5);
        assert!((dp - 2f64.sqrt() / 8.0).abs() < 1e-15);
        let (p, dp) = phi_eval(1e4);
        assert_eq!(p, 1.0);
        assert_eq!(dp, 0.0);
        let (p, _) = phi_eval(-1e4);
        assert_eq!(p, 0.0);
        for chi in [-3.0, -0.2, 1.7, 40.0] {
            let (p1, d1) = phi_eval(chi);
            let (p2, d2) = phi_eval(-chi);
            assert!((p1 + p2 - 1.0).abs() < 1e-15);
            assert!((d1 - d2).abs() < 1e-17);
            assert!((ln_phi_prime(chi) - d1.ln()).abs() < 1e-13);
        }
    }

    #[test]
    fn phi_derivative_matches_difference_quotient() {
        for chi in [-4.0, -1.0, 0.0, 0.3, 2.5] {
            let h = 1e-6;
            let fd = (phi_eval(chi + h).0 - phi_eval(chi - h).0) / (2.0 * h);
            assert!((fd - phi_eval(chi).1).abs() < 1e-9);
        }
    }

    #[test]
    fn profile_midpoints_and_ends() {
        let f = singular_profile(Side::Front, 0.0, 0.9, 1.1).unwrap();
        let eqs = compute_equilibria(0.9, DEFAULT_UB_TOL).unwrap();
        assert!((f.q - eqs.q_f_plus / 2.0).abs() < 1e-15);
        let far = singular_profile(Side::Front, 200.0, 0.9, 1.1).unwrap();
        assert!((far.q - eqs.q_f_plus).abs() < 1e-12);
        let b = singular_profile(Side::Back, 200.0, 0.9, 1.1).unwrap();
        assert!(b.q.abs() < 1e-12);
        assert_eq!(b.u, eqs.u_b);
    }

    #[test]
    fn log_evaluation_agrees_with_direct() {
        let lp = solve_singular_parameters(0.75).unwrap();
        for side in [Side::Front, Side::Back] {
            for xi in [-6.0, -0.4, 0.0, 1.3, 9.0] {
                let p = lp.profile(side).eval(xi);
                let (s, sd) = lp.profile(side).eval_log(xi);
                assert!((s.to_f64() - p.s).abs() < 1e-14);
                assert!((sd.to_f64() - p.sdot).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn loop_limits_near_threshold() {
        let lp = solve_singular_parameters(2.0 / 3.0 + 1e-10).unwrap();
        let sqrt115 = 115f64.sqrt();
        assert!((lp.d0 - 10.0 / 363.0 * (34.0 + 3.0 * sqrt115)).abs() < 1e-5);
        assert!((lp.mu0 - (3.0 * sqrt115 - 65.0) / 66.0).abs() < 1e-5);
    }

    #[test]
    fn loop_limits_large_r() {
        let lp = solve_singular_parameters(1e6).unwrap();
        assert!(lp.d0 > 0.0 && lp.d0 < 1e-2);
        assert!((lp.mu0 + 1.6).abs() < 1e-2);
    }

    #[test]
    fn adjoint_at_origin_is_minus_tangent_rotation() {
        let lp = solve_singular_parameters(0.7).unwrap();
        for side in [Side::Front, Side::Back] {
            let p = lp.profile(side).eval(0.0);
            let psi = adjoint_psi(side, 0.0, &lp);
            assert!((psi[0] - p.sdot).abs() < 1e-15);
            assert!((psi[1] + p.s).abs() < 1e-15);
            assert_eq!(psi[2], 0.0);
        }
    }

    #[test]
    fn probe_requires_orbit_for_plus_variants() {
        let lp = solve_singular_parameters(0.7).unwrap();
        assert!(scalar_product_sign_probe(ProbeKind::BackPlus, &lp, None).is_err());
        assert!(scalar_product_sign_probe(ProbeKind::FrontPlus, &lp, None).is_err());
    }

    #[test]
    fn side_parsing() {
        assert_eq!("front".parse::<Side>().unwrap(), Side::Front);
        assert_eq!("b".parse::<Side>().unwrap(), Side::Back);
        assert!("sideways".parse::<Side>().is_err());
    }
}
