use std::fmt;

use thiserror::Error;

/// Structural assumption checked by [`crate::game::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionCheck {
    /// Entries are finite.
    Finite,
    /// State-cost matrices are symmetric.
    Symmetry,
    /// `D_k + D_kᵀ` is positive definite for the joint simultaneous block.
    PositiveDefinite,
    /// Each player's own-column constraint block has full row rank.
    FullRowRank,
}

impl fmt::Display for AssumptionCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AssumptionCheck::Finite => "finite entries",
            AssumptionCheck::Symmetry => "symmetric state costs",
            AssumptionCheck::PositiveDefinite => {
                "simultaneous-layer convexity: D_k + D_k' must be positive definite"
            }
            AssumptionCheck::FullRowRank => {
                "constraint qualification: own constraint block must have full row rank"
            }
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: String,
        expected: String,
        found: String,
    },
    #[error("{what} is not symmetric (asymmetry {asymmetry:.3e})")]
    Asymmetric { what: String, asymmetry: f64 },
    #[error("assumption violated at stage {stage}: {check}")]
    AssumptionViolated { check: AssumptionCheck, stage: usize },
    #[error("discount factor must lie in (0, 1], got {0}")]
    InvalidDiscount(f64),
    #[error("invalid game description: {0}")]
    Invalid(String),
}

impl GameError {
    pub(crate) fn shape(what: impl Into<String>, expected: (usize, usize), found: (usize, usize)) -> Self {
        GameError::ShapeMismatch {
            what: what.into(),
            expected: format!("{}x{}", expected.0, expected.1),
            found: format!("{}x{}", found.0, found.1),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LcpError {
    #[error("LCP shape mismatch: M is {rows}x{cols}, q has {q_len} entries")]
    ShapeMismatch { rows: usize, cols: usize, q_len: usize },
    #[error("LCP data contains non-finite entries")]
    NonFinite,
    #[error("pivot breakdown after {pivots} pivots (pivot magnitude {pivot:.3e})")]
    PivotBreakdown { pivots: usize, pivot: f64 },
    #[error("exceeded {limit} pivots")]
    MaxPivotsExceeded { limit: usize },
    #[error("dimension {dim} exceeds enumeration cap {cap}")]
    DimTooLarge { dim: usize, cap: usize },
    #[error("terminal basis is inaccurate (complementarity {complementarity:.3e}, feasibility {feasibility:.3e})")]
    Inaccurate { complementarity: f64, feasibility: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("stage {stage}: {which} curvature matrix is not positive definite")]
    IndefiniteUpsilon { stage: usize, which: Player },
    #[error("stage {stage}: singular matrix in {what}")]
    SingularInverse { stage: usize, what: &'static str },
    #[error("stage {stage}: value matrix of player {player} lost symmetry ({asymmetry:.3e})")]
    Asymmetric { stage: usize, player: usize, asymmetry: f64 },
    #[error("parameter stack shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Leader (player 1) or follower (player 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Player {
    Leader,
    Follower,
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::Leader => f.write_str("leader"),
            Player::Follower => f.write_str("follower"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FsnError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Lcp(#[from] LcpError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("stage {stage}: the simultaneous-decision constraint set is empty")]
    StageInfeasible { stage: usize },
    #[error("stage index {stage} outside 0..={horizon}")]
    IndexOutOfRange { stage: usize, horizon: usize },
    #[error("global LCP has no solution (secondary ray after {pivots} pivots)")]
    NoEquilibrium { pivots: usize },
    #[error("grid search needs about {evaluations} evaluations (cap {cap})")]
    GridTooLarge { evaluations: u64, cap: u64 },
    #[error("brute-force oracle: {0}")]
    Oracle(String),
    #[error("serialization: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for FsnError {
    fn from(e: serde_json::Error) -> Self {
        FsnError::Serde(e.to_string())
    }
}
