//! Feedback Stackelberg–Nash equilibria of constrained linear-quadratic
//! difference games.
//!
//! Two players interact in each period: a leader and a follower choose
//! sequential controls that drive the state, then both pick simultaneous
//! decisions subject to coupled linear constraints. The solver sweeps the
//! sequential layer backward, folds every stage's complementarity conditions
//! into one LCP, solves it with Lemke's method and verifies the result.

pub mod assembly;
pub mod cli;
pub mod duopoly;
pub mod error;
pub mod game;
pub mod lcp;
pub mod linalg;
pub mod oracle;
pub mod recursion;
pub mod solver;
pub mod stage;

pub use error::{AssumptionCheck, FsnError, GameError, LcpError, Player, SweepError};
pub use game::{validate, Dimensions, GameSpec};
pub use solver::{solve_fsn, FsnOutcome, SolveOptions, VerificationReport};
