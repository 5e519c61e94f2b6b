//! Laboratory for adaptive mutation-strength control in the (1+1)-RLS_k
//! optimizer: benchmarks, exact drift oracles, baseline policies, a
//! declarative world-model language with greedy/MCTS planners, trajectory
//! collection, a DQN baseline, and a matched-seed evaluation harness.

pub mod cli;
pub mod combinatorics;
pub mod data;
pub mod dqn;
pub mod error;
pub mod eval;
pub mod num;
pub mod optimizer;
pub mod planner;
pub mod policy;
pub mod problem;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod wmdl;

pub use error::{Error, Result};

/// Concrete scalar used across the harness (fitness, probabilities, scores).
pub type Real = f64;

/// Exact scalar for the drift core where tests demand exact zeros/ratios.
pub type Rational = num_rational::BigRational;

/// Fast drift profile used by planners and policies.
pub type Drift = combinatorics::DriftProfile<Real>;

/// Exact drift profile for no-tolerance checks.
pub type ExactDrift = combinatorics::DriftProfile<Rational>;
