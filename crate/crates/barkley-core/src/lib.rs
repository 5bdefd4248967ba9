//! Traveling waves of the Barkley pipe-flow model.
//!
//! The crate covers the whole chain from the reaction kinetics to the dynamics:
//! equilibria and their spectra, the singular heteroclinic loop of the fast
//! subsystem, Melnikov integrals and the hypothesis checks built on them,
//! numerical front and back connections for `eps > 0`, N-front return times,
//! and a method-of-lines simulator of the PDE itself.

pub mod error;
pub mod hypotheses;
pub mod melnikov;
pub mod model_core;
pub mod nfront;
pub mod ode;
pub mod orbits;
pub mod pde_sim;
pub mod quadrature;
pub mod signed_log;
pub mod singular_loop;
pub mod spectra;

pub use error::{BarkleyError, Result};
pub use hypotheses::{verify_hypotheses, HypothesisEntry, HypothesisId, HypothesisStatus, HypothesisVerdict, Tolerances};
pub use melnikov::{eval_melnikov_suite, find_beta, melnikov_direct_b, MelnikovReport};
pub use model_core::{compute_equilibria, compute_ub, EquilibriumSet, ModelParams, PhasePoint};
pub use nfront::{eta_sequence, predict_small_eigenvalues, return_times, NFrontTimes};
pub use orbits::{continue_loop, shoot_connection, solve_loop, solve_loop_at_zeta, LoopSolution, OrbitSolution, ShootConfig};
pub use pde_sim::{step_field, Boundary, Field1D, ProfileKind, SimConfig};
pub use singular_loop::{solve_singular_parameters, Side, SingularLoopData};
pub use spectra::{classify_hyperbolicity, eigen_decompose_3x3, SpectralData};
