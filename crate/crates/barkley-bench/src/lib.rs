//! Shared fixtures for the criterion benchmarks.

use barkley_core::model_core::DEFAULT_UB_TOL;
use barkley_core::pde_sim::build_initial_profile;
use barkley_core::{
    compute_equilibria, solve_singular_parameters, Boundary, Field1D, ModelParams, ProfileKind, SimConfig,
    SingularLoopData,
};

pub const R: f64 = 0.7;
pub const EPS: f64 = 1e-3;
pub const ZETA: f64 = 0.05;

pub fn singular_loop() -> SingularLoopData {
    solve_singular_parameters(R).expect("singular loop at r = 0.7")
}

/// A simple front on `n` points of `[0, 40)` with its time-stepping config.
pub fn front_field(n: usize) -> (Field1D, SimConfig) {
    let lp = singular_loop();
    let eqs = compute_equilibria(R, DEFAULT_UB_TOL).unwrap();
    let params = ModelParams::new(R, lp.d0, ZETA, EPS, 0.0).unwrap();
    let field = build_initial_profile(&ProfileKind::SimpleFront { x0: 12.0 }, &eqs, &params, 40.0, n, Boundary::Outflow)
        .unwrap();
    (field, SimConfig::new(params, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        let (f, cfg) = front_field(1000);
        assert_eq!(f.n, 1000);
        assert!(cfg.time_step(&f).unwrap() > 0.0);
        assert!(singular_loop().d0 > 0.0);
    }
}
