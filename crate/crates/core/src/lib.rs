//! Stochastic saddle-point (SSP) problems with high-probability solution
//! guarantees.
//!
//! The crate is organised around an in-expectation SSP oracle abstraction:
//! any procedure that returns a point whose (weak) duality gap is small in
//! expectation can be boosted into a procedure whose duality gap is small
//! with probability `1 - p`, at an overhead that is logarithmic in `1/p`
//! and polylogarithmic in the condition number.
//!
//! Modules:
//! - [`problem`]: the problem abstraction, solution types and exact gap
//!   evaluators.
//! - [`perturb`]: proximal perturbation wrappers and convex-concave
//!   regularization.
//! - [`robust`]: majority-ball extraction and robust gradient / function-gap
//!   selection.
//! - [`oracles`]: concrete oracles (sample-average approximation with a
//!   deterministic extragradient inner solver, stochastic proximal
//!   extragradient on simplices, multistage optimistic gradient descent
//!   ascent).
//! - [`boost`]: schedule calculators and the confidence-boosting drivers.
//! - [`problems`]: benchmark problems (synthetic quadratic, average-reward
//!   MDP, stochastic matrix game) with closed-form gap evaluators.

pub mod boost;
pub mod constants;
pub mod domain;
pub mod error;
pub mod oracles;
pub mod perturb;
pub mod problem;
pub mod problems;
pub mod rng;
pub mod robust;

pub use constants::ProblemConstants;
pub use error::SspError;
pub use problem::{eval_gap, eval_weak_gap, GapReport, PrimalDualPair, SspProblem};
pub use rng::SspRng;

/// Dense column vector used for all primal/dual iterates.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used for problem data.
pub type Matrix = nalgebra::DMatrix<f64>;
