//! Return times and small-eigenvalue predictions for N-fronts and N-backs.

use serde::Serialize;

use crate::error::{BarkleyError, Result};
use crate::spectra::SpectralData;

/// Index bookkeeping of an N-front built from principal eigenvalue ratios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NFrontTimes {
    pub n: usize,
    pub rho: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// `eta_0 .. eta_{N-1}` followed by the convention `eta_N = 0`.
    pub eta: Vec<f64>,
    /// `tau_0 .. tau_{2N-1}`: even entries near the turbulent state, odd entries near the laminar state.
    pub tau: Vec<f64>,
    /// `sigma_{2k+1}` for `k = 0 .. N-1`.
    pub sigma: Vec<f64>,
}

impl NFrontTimes {
    pub fn tau_odd(&self) -> impl Iterator<Item = f64> + '_ {
        self.tau.iter().skip(1).step_by(2).copied()
    }

    pub fn tau_even(&self) -> impl Iterator<Item = f64> + '_ {
        self.tau.iter().step_by(2).copied()
    }
}

fn check_ratios(beta1: f64, beta2: f64) -> Result<()> {
    if !(beta1 > 1.0 && beta2 > 1.0) || !beta1.is_finite() || !beta2.is_finite() {
        return Err(BarkleyError::InvalidRatios { beta1, beta2 });
    }
    Ok(())
}

/// `eta_{N-1} = beta1 beta2 - 1`, `eta_k = beta1 eta_{k+1} + eta_{N-1}`, plus `eta_N = 0`.
pub fn eta_sequence(n: usize, beta1: f64, beta2: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(BarkleyError::InvalidInput(format!("N must exceed 1, got {n}")));
    }
    check_ratios(beta1, beta2)?;
    let base = beta1 * beta2 - 1.0;
    let mut eta = vec![0.0; n + 1];
    eta[n - 1] = base;
    for k in (0..n - 1).rev() {
        eta[k] = beta1 * eta[k + 1] + base;
    }
    Ok(eta)
}

/// Return times from `rho` and the principal eigenvalues at both equilibria.
pub fn return_times(rho: f64, n: usize, spec1: &SpectralData, spec2: &SpectralData) -> Result<NFrontTimes> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(BarkleyError::InvalidRho(rho));
    }
    let (l2_x1, l2_x2, l3_x2) = (spec1.lambda[1], spec2.lambda[1], spec2.lambda[2]);
    for s in [spec1, spec2] {
        if !s.is_saddle_21() || s.multiple {
            return Err(BarkleyError::InvalidInput("spectra must be simple with signature (2, 1)".into()));
        }
    }
    let beta1 = spec1.lambda[2] / -l2_x1;
    let beta2 = l3_x2 / -l2_x2;
    let eta = eta_sequence(n, beta1, beta2)?;
    let ln_rho = rho.ln();
    let mut tau = Vec::with_capacity(2 * n);
    let mut sigma = Vec::with_capacity(n);
    for k in 0..n {
        tau.push(ln_rho / l2_x2);
        tau.push((beta2 + eta[k + 1]) * ln_rho / l2_x1);
        sigma.push((-l3_x2 + eta[k + 1] * l2_x2) / l2_x1);
    }
    Ok(NFrontTimes { n, rho, beta1, beta2, eta, tau, sigma })
}

/// Spectra with prescribed principal ratios, for exercising the combinatorics directly.
pub fn synthetic_spectra(beta1: f64, beta2: f64, lambda2_x1: f64, lambda2_x2: f64) -> Result<(SpectralData, SpectralData)> {
    check_ratios(beta1, beta2)?;
    if !(lambda2_x1 < 0.0 && lambda2_x2 < 0.0) {
        return Err(BarkleyError::InvalidInput("principal stable eigenvalues must be negative".into()));
    }
    let make = |l2: f64, beta: f64| {
        let l3 = -beta * l2;
        let l1 = 2.0 * l2 - 1.0;
        SpectralData {
            lambda: [l1, l2, l3],
            vectors: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            multiple: false,
            residual: 0.0,
            beta: Some(beta),
        }
    };
    Ok((make(lambda2_x1, beta1), make(lambda2_x2, beta2)))
}

/// One of the `2N + 1` small eigenvalues of an N-front.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallEigenvalue {
    /// One-based index.
    pub index: usize,
    /// Exponent `p` in `lambda ~ a rho^p`; `None` for the translation eigenvalue.
    pub exponent: Option<f64>,
    /// `-1`, `0` or `1`.
    pub sign: i8,
}

fn sign_of(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Scaling and sign of each small eigenvalue: odd indices follow the back integral,
/// even indices the front integral, and the last one is the translation zero.
pub fn predict_small_eigenvalues(times: &NFrontTimes, m_front: f64, m_back: f64) -> Vec<SmallEigenvalue> {
    let n = times.n;
    let mut out = Vec::with_capacity(2 * n + 1);
    for k in 1..=n {
        out.push(SmallEigenvalue { index: 2 * k - 1, exponent: Some(1.0), sign: sign_of(m_back) });
        out.push(SmallEigenvalue { index: 2 * k, exponent: Some(times.beta2 + times.eta[k]), sign: sign_of(m_front) });
    }
    out.push(SmallEigenvalue { index: 2 * n + 1, exponent: None, sign: 0 });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_front_eta() {
        let (b1, b2) = (1.7, 2.9);
        let eta = eta_sequence(2, b1, b2).unwrap();
        let base = b1 * b2 - 1.0;
        assert!((eta[1] - base).abs() < 1e-15);
        assert!((eta[0] - (b1 + 1.0) * base).abs() < 1e-14);
        assert_eq!(eta[2], 0.0);
    }

    #[test]
    fn equal_ratios_base_case() {
        for n in 2..8 {
            assert_eq!(eta_sequence(n, 2.0, 2.0).unwrap()[n - 1], 3.0);
        }
    }

    #[test]
    fn eta_strictly_decreasing() {
        let eta = eta_sequence(10, 1.5, 2.3).unwrap();
        assert!(eta.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(eta_sequence(3, 1.0, 2.0), Err(BarkleyError::InvalidRatios { .. })));
        assert!(eta_sequence(1, 2.0, 2.0).is_err());
        let (s1, s2) = synthetic_spectra(1.5, 1.5, -0.01, -0.02).unwrap();
        assert!(matches!(return_times(1.0, 3, &s1, &s2), Err(BarkleyError::InvalidRho(_))));
        assert!(matches!(return_times(0.0, 3, &s1, &s2), Err(BarkleyError::InvalidRho(_))));
    }

    #[test]
    fn sigma_is_time_ratio() {
        let (s1, s2) = synthetic_spectra(1.8, 2.6, -0.013, -0.021).unwrap();
        let t = return_times(0.01, 5, &s1, &s2).unwrap();
        for k in 0..5 {
            let ratio = t.tau[2 * k + 1] / t.tau[2 * k];
            assert!((ratio - t.sigma[k]).abs() < 1e-12 * ratio.abs());
        }
        let even: Vec<f64> = t.tau_even().collect();
        assert!(even.iter().all(|&x| x == even[0]));
    }

    #[test]
    fn predictions_with_negative_integrals() {
        let (s1, s2) = synthetic_spectra(1.2, 1.4, -0.1, -0.2).unwrap();
        let t = return_times(0.05, 3, &s1, &s2).unwrap();
        let p = predict_small_eigenvalues(&t, -1.0, -2.0);
        assert_eq!(p.len(), 7);
        assert_eq!(p.iter().filter(|e| e.sign < 0).count(), 6);
        assert_eq!(p.iter().filter(|e| e.sign == 0 && e.exponent.is_none()).count(), 1);
        assert!(p.iter().filter_map(|e| e.exponent).all(|x| x >= 1.0));
    }
}
