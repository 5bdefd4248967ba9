//! Per-parameter verdict on the eight hypotheses behind the existence and
//! stability of N-front waves.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{BarkleyError, Result};
use crate::melnikov::{eval_melnikov_suite, melnikov_direct_b, DEFAULT_QUAD_TOL};
use crate::model_core::{compute_equilibria, ModelParams, DEFAULT_UB_TOL, R_CRITICAL};
use crate::orbits::{loop_orbits, solve_loop, ShootConfig};
use crate::singular_loop::{scalar_product_sign_probe, solve_singular_parameters, ProbeKind, Side};
use crate::spectra::classify_hyperbolicity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum HypothesisId {
    H0,
    H1,
    H2,
    H3,
    H4,
    H5,
    H6,
    H7,
}

impl HypothesisId {
    pub const ALL: [HypothesisId; 8] = [
        HypothesisId::H0,
        HypothesisId::H1,
        HypothesisId::H2,
        HypothesisId::H3,
        HypothesisId::H4,
        HypothesisId::H5,
        HypothesisId::H6,
        HypothesisId::H7,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisStatus {
    Pass,
    Fail,
    ProxyPass,
    NotComputable,
}

impl HypothesisStatus {
    pub fn is_ok(self) -> bool {
        matches!(self, HypothesisStatus::Pass | HypothesisStatus::ProxyPass)
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            HypothesisStatus::Pass
        } else {
            HypothesisStatus::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisEntry {
    pub id: HypothesisId,
    pub status: HypothesisStatus,
    /// Named scalar witnesses.
    pub evidence: BTreeMap<String, f64>,
    /// Reason when the entry could not be computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisVerdict {
    pub r: f64,
    pub eps: f64,
    pub c: f64,
    pub hypotheses: Vec<HypothesisEntry>,
    pub overall: bool,
}

impl HypothesisVerdict {
    pub fn get(&self, id: HypothesisId) -> &HypothesisEntry {
        self.hypotheses.iter().find(|e| e.id == id).expect("every id is present")
    }
}

/// Thresholds used by the verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Magnitudes at or below this count as zero.
    pub zero_tol: f64,
    pub quad_tol: f64,
    pub shoot: ShootConfig,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { zero_tol: 1e-12, quad_tol: DEFAULT_QUAD_TOL, shoot: ShootConfig::default() }
    }
}

fn entry(id: HypothesisId, status: HypothesisStatus, evidence: &[(&str, f64)]) -> HypothesisEntry {
    HypothesisEntry {
        id,
        status,
        evidence: evidence.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        note: None,
    }
}

fn not_computable(id: HypothesisId, err: &BarkleyError) -> HypothesisEntry {
    HypothesisEntry { id, status: HypothesisStatus::NotComputable, evidence: BTreeMap::new(), note: Some(err.to_string()) }
}

/// Evaluates H0 to H7 at `(r, eps, c)` with the singular-loop parameters `(D0, mu0)`.
///
/// Failures inside a component are reported as not computable rather than returned.
pub fn verify_hypotheses(r: f64, eps: f64, c: f64, tol: &Tolerances) -> Result<HypothesisVerdict> {
    if !r.is_finite() || r <= R_CRITICAL {
        return Err(BarkleyError::InvalidInput(format!("r must exceed 2/3, got {r}")));
    }
    if !(eps >= 0.0) || !eps.is_finite() || !c.is_finite() {
        return Err(BarkleyError::InvalidInput(format!("invalid eps = {eps} or c = {c}")));
    }
    let eqs = compute_equilibria(r, DEFAULT_UB_TOL)?;
    if c >= eqs.u_b {
        return Err(BarkleyError::InvalidInput(format!("c = {c} must stay below u_b = {}", eqs.u_b)));
    }
    let lp = solve_singular_parameters(r)?;
    let z = tol.zero_tol;
    let mut out = Vec::with_capacity(8);

    match ModelParams::from_mu(r, lp.d0, lp.mu0, eps, c).and_then(|p| classify_hyperbolicity(&eqs, &p)) {
        Ok(h) => {
            let (s1, s2) = (h.x1.spectral, h.x2.spectral);
            out.push(entry(
                HypothesisId::H0,
                HypothesisStatus::from_bool(h.h0),
                &[
                    ("lambda1_x1", s1.lambda[0]),
                    ("lambda2_x1", s1.lambda[1]),
                    ("lambda3_x1", s1.lambda[2]),
                    ("lambda1_x2", s2.lambda[0]),
                    ("lambda2_x2", s2.lambda[1]),
                    ("lambda3_x2", s2.lambda[2]),
                ],
            ));
            out.push(entry(
                HypothesisId::H1,
                HypothesisStatus::from_bool(h.h1),
                &[("beta1", s1.beta.unwrap_or(f64::NAN)), ("beta2", s2.beta.unwrap_or(f64::NAN))],
            ));
        }
        Err(e) => {
            out.push(not_computable(HypothesisId::H0, &e));
            out.push(not_computable(HypothesisId::H1, &e));
        }
    }

    match eval_melnikov_suite(r, tol.quad_tol) {
        Ok(m) => {
            out.push(entry(HypothesisId::H2, HypothesisStatus::from_bool(m.mhat.abs() > z), &[("Mhat", m.mhat)]));
            let h3 = m.mtilde_f > z && m.dqf_du.abs() > z && m.dqb_du.abs() > z;
            out.push(entry(
                HypothesisId::H3,
                if h3 { HypothesisStatus::ProxyPass } else { HypothesisStatus::Fail },
                &[("Mtilde_f", m.mtilde_f), ("dQf_du", m.dqf_du), ("dQb_du", m.dqb_du)],
            ));
            let decay = lp.mu0 + eqs.u_b;
            out.push(entry(
                HypothesisId::H4,
                HypothesisStatus::from_bool(m.grad_det.abs() > z && decay > 0.0),
                &[("grad_det", m.grad_det), ("mu0_plus_ub", decay)],
            ));
            out.push(entry(
                HypothesisId::H5,
                HypothesisStatus::from_bool(m.dqf_du > z && m.dqb_du < -z),
                &[("dQf_du", m.dqf_du), ("dQb_du", m.dqb_du)],
            ));
        }
        Err(e) => {
            for id in [HypothesisId::H2, HypothesisId::H3, HypothesisId::H4, HypothesisId::H5] {
                out.push(not_computable(id, &e));
            }
        }
    }

    out.push(h6_entry(r, eps, c, &lp, tol));

    let direct = melnikov_direct_b(Side::Front, &lp, tol.quad_tol)
        .and_then(|f| Ok((f, melnikov_direct_b(Side::Back, &lp, tol.quad_tol)?)));
    match direct {
        Ok((mf, mb)) => out.push(entry(
            HypothesisId::H7,
            HypothesisStatus::from_bool(mf < -z && mb < -z),
            &[("M_front", mf), ("M_back", mb)],
        )),
        Err(e) => out.push(not_computable(HypothesisId::H7, &e)),
    }

    let overall = out.iter().all(|e| e.status.is_ok());
    Ok(HypothesisVerdict { r, eps, c, hypotheses: out, overall })
}

fn h6_entry(r: f64, eps: f64, c: f64, lp: &crate::singular_loop::SingularLoopData, tol: &Tolerances) -> HypothesisEntry {
    let orbits = if eps > 0.0 {
        match solve_loop(r, eps, c, (lp.d0, lp.mu0), &tol.shoot).and_then(|s| loop_orbits(&s, &tol.shoot)) {
            Ok(o) => Some(o),
            Err(e) => return not_computable(HypothesisId::H6, &e),
        }
    } else {
        None
    };
    let mut evidence = BTreeMap::new();
    let mut all = true;
    let mut note = Vec::new();
    for kind in ProbeKind::ALL {
        let (side, required) = kind.orbit_side();
        let orbit = orbits.as_ref().map(|(f, b)| if side == Side::Front { f } else { b });
        if required && orbit.is_none() {
            return not_computable(
                HypothesisId::H6,
                &BarkleyError::InvalidInput("perturbed probes need eps > 0".into()),
            );
        }
        match scalar_product_sign_probe(kind, lp, orbit) {
            Ok(rep) => {
                evidence.insert(format!("sign_{}", kind.label()), f64::from(rep.eventual_sign));
                if !rep.passed {
                    all = false;
                    note.push(format!("{} settles to sign {}", kind.label(), rep.eventual_sign));
                }
            }
            Err(e) => {
                all = false;
                evidence.insert(format!("sign_{}", kind.label()), 0.0);
                note.push(format!("{}: {e}", kind.label()));
            }
        }
    }
    HypothesisEntry {
        id: HypothesisId::H6,
        status: HypothesisStatus::from_bool(all),
        evidence,
        note: (!note.is_empty()).then(|| note.join("; ")),
    }
}
