//! Simultaneous layer: one stage's constrained Nash game written as an LCP.
//!
//! Player `i` minimizes `½vᵀDⁱv + xᵀLⁱv + dⁱᵀv` over its own block `vⁱ ≥ 0`
//! subject to `Mⁱx + Nⁱv + rⁱ ≥ 0`. Stacking both KKT systems gives
//!
//! ```text
//! [ D   -N̄ᵀ ] [v]   [ L̄ᵀx + d̄ ]
//! [ N    0  ] [θ] + [ M̄x + r̄  ]  ⊥  (v, θ) ≥ 0
//! ```
//!
//! where `D` holds each player's own rows of its `D` block, `N̄` the own
//! columns of each player's `N`, and `N` all constraint rows.

use crate::error::FsnError;
use crate::game::{Dimensions, GameSpec, StageData};
use crate::lcp::{self, LcpProblem, LcpResidual, LemkeOptions, LemkeOutcome};
use crate::linalg::{self, Mat, Vector};

/// Stacked stage blocks shared by the stage and global problems.
#[derive(Debug, Clone, PartialEq)]
pub struct StageBlocks {
    /// Joint simultaneous matrix (s×s).
    pub d: Mat,
    /// Block diagonal of own constraint columns (c×s).
    pub n_own: Mat,
    /// All constraint rows `[N¹; N²]` (c×s).
    pub n_full: Mat,
    /// `[[L¹]_1 [L²]_2]` (n×s).
    pub l: Mat,
    /// `([d¹]_1; [d²]_2)`.
    pub d_lin: Vector,
    /// `[M¹; M²]` (c×n).
    pub m: Mat,
    /// `(r¹; r²)`.
    pub r: Vector,
}

impl StageBlocks {
    pub fn new(dims: &Dimensions, st: &StageData) -> Self {
        let [p1, p2] = &st.players;
        StageBlocks {
            d: st.joint_d(dims),
            n_own: linalg::block_diag(&[st.own_n(dims, 0), st.own_n(dims, 1)]),
            n_full: linalg::vstack(&[&p1.n, &p2.n]),
            l: linalg::hstack(&[&st.own_l(dims, 0), &st.own_l(dims, 1)]),
            d_lin: linalg::vconcat(&[&st.own_d_lin(dims, 0), &st.own_d_lin(dims, 1)]),
            m: linalg::vstack(&[&p1.m, &p2.m]),
            r: linalg::vconcat(&[&p1.r_con, &p2.r_con]),
        }
    }

    /// Constant LCP matrix of the stage game.
    pub fn lcp_matrix(&self) -> Mat {
        let s = self.d.nrows();
        let c = self.m.nrows();
        let mut out = linalg::zeros(s + c, s + c);
        out.view_mut((0, 0), (s, s)).copy_from(&self.d);
        out.view_mut((0, s), (s, c)).copy_from(&(-self.n_own.transpose()));
        out.view_mut((s, 0), (c, s)).copy_from(&self.n_full);
        out
    }

    pub fn lcp_vector(&self, x: &Vector) -> Vector {
        let top = self.l.transpose() * x + &self.d_lin;
        let bottom = &self.m * x + &self.r;
        linalg::vconcat(&[&top, &bottom])
    }

    /// Constraint values `Mx + Nv + r`.
    pub fn constraint_slack(&self, x: &Vector, v: &Vector) -> Vector {
        &self.m * x + &self.n_full * v + &self.r
    }
}

pub fn build_stage_lcp(spec: &GameSpec, k: usize, x: &Vector) -> Result<LcpProblem, FsnError> {
    let st = spec
        .stages
        .get(k)
        .ok_or(FsnError::IndexOutOfRange { stage: k, horizon: spec.horizon() })?;
    let b = StageBlocks::new(&spec.dims, st);
    Ok(LcpProblem::new(b.lcp_matrix(), b.lcp_vector(x))?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution {
    pub stage: usize,
    /// Simultaneous decisions `(v¹, v²)`.
    pub v: Vector,
    /// Multipliers `(θ¹, θ²)`.
    pub theta: Vector,
    /// Constraint values `Mx + Nv + r`.
    pub slack: Vector,
    pub residual: LcpResidual,
    pub pivots: usize,
}

/// Solves the stage game at state `x`. An empty constraint set shows up as a
/// secondary ray and is reported as [`FsnError::StageInfeasible`].
pub fn solve_stage_game(
    spec: &GameSpec,
    k: usize,
    x: &Vector,
    opts: &LemkeOptions,
) -> Result<StageSolution, FsnError> {
    let p = build_stage_lcp(spec, k, x)?;
    let sol = match lcp::lemke_solve(&p, opts)? {
        LemkeOutcome::Solved(s) => s,
        LemkeOutcome::Infeasible(_) => return Err(FsnError::StageInfeasible { stage: k }),
    };
    Ok(split(spec, k, x, &sol.z, sol.residual, sol.pivots))
}

/// All stage equilibria by basis enumeration (small stages only).
pub fn enumerate_stage_game(
    spec: &GameSpec,
    k: usize,
    x: &Vector,
    cap: usize,
) -> Result<Vec<StageSolution>, FsnError> {
    let p = build_stage_lcp(spec, k, x)?;
    let e = lcp::enumerate_solutions(&p, cap)?;
    Ok(e.solutions.iter().map(|s| split(spec, k, x, &s.z, s.residual, 0)).collect())
}

fn split(
    spec: &GameSpec,
    k: usize,
    x: &Vector,
    z: &Vector,
    residual: LcpResidual,
    pivots: usize,
) -> StageSolution {
    let s = spec.dims.s_total();
    let c = spec.dims.c_total();
    let v = z.rows(0, s).into_owned();
    let theta = z.rows(s, c).into_owned();
    let slack = StageBlocks::new(&spec.dims, &spec.stages[k]).constraint_slack(x, &v);
    StageSolution { stage: k, v, theta, slack, residual, pivots }
}
