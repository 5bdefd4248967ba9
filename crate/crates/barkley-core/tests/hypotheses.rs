use barkley_core::{verify_hypotheses, BarkleyError, HypothesisId, HypothesisStatus, Tolerances};

#[test]
fn double_twist_regime() {
    let tol = Tolerances::default();
    for r in [0.68, 0.70, 0.72] {
        let v = verify_hypotheses(r, 1e-3, 0.0, &tol).unwrap();
        assert_eq!(v.hypotheses.len(), 8);
        for id in [HypothesisId::H0, HypothesisId::H1, HypothesisId::H2, HypothesisId::H4, HypothesisId::H5, HypothesisId::H7] {
            assert_eq!(v.get(id).status, HypothesisStatus::Pass, "r = {r}, {id:?}");
        }
        assert_eq!(v.get(HypothesisId::H3).status, HypothesisStatus::ProxyPass, "r = {r}");
        let h6 = &v.get(HypothesisId::H6).evidence;
        for probe in ["sign_b-", "sign_f-", "sign_b+"] {
            assert_eq!(h6[probe], 1.0, "r = {r}, {probe}");
        }
        let h7 = &v.get(HypothesisId::H7).evidence;
        assert!(h7["M_front"] < 0.0 && h7["M_back"] < 0.0);
        let h1 = &v.get(HypothesisId::H1).evidence;
        assert!(h1["beta1"] > 1.0 && h1["beta2"] > 1.0);
        assert_eq!(v.overall, v.hypotheses.iter().all(|e| e.status.is_ok()));
    }
}

#[test]
fn single_twist_regime() {
    let v = verify_hypotheses(1.5, 1e-3, 0.0, &Tolerances::default()).unwrap();
    let h5 = v.get(HypothesisId::H5);
    assert_eq!(h5.status, HypothesisStatus::Fail);
    assert!(h5.evidence["dQf_du"] < 0.0 && h5.evidence["dQb_du"] < 0.0);
    assert_eq!(v.get(HypothesisId::H3).status, HypothesisStatus::Fail);
    assert!(v.get(HypothesisId::H4).evidence["mu0_plus_ub"] < 0.0);
    assert_eq!(v.get(HypothesisId::H2).status, HypothesisStatus::Pass);
    assert!(!v.overall);
}

#[test]
fn verdict_serializes_with_kebab_case_statuses() {
    let v = verify_hypotheses(0.7, 0.0, 0.0, &Tolerances::default()).unwrap();
    let json = serde_json::to_value(&v).unwrap();
    let statuses: Vec<&str> = json["hypotheses"].as_array().unwrap().iter().map(|e| e["status"].as_str().unwrap()).collect();
    assert_eq!(statuses.len(), 8);
    assert!(statuses.contains(&"proxy-pass"));
    assert!(statuses.contains(&"not-computable"));
}

#[test]
fn invalid_parameters() {
    let tol = Tolerances::default();
    assert!(matches!(verify_hypotheses(2.0 / 3.0, 1e-3, 0.0, &tol), Err(BarkleyError::InvalidInput(_))));
    assert!(matches!(verify_hypotheses(0.7, -1.0, 0.0, &tol), Err(BarkleyError::InvalidInput(_))));
    assert!(matches!(verify_hypotheses(0.7, 1e-3, f64::NAN, &tol), Err(BarkleyError::InvalidInput(_))));
}
