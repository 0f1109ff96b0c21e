//! State elimination and the global LCP over stages `1..=K`.
//!
//! Along the parametric feedback solution the realized state is affine in
//! the stacked parameters:
//!
//! ```text
//! x = Φ₀x₀ + Φ₁p + Φ₂w + Φ₃θ      (x, p, w, θ stacked over k = 1..K)
//! ```
//!
//! Substituting it into the stage complementarity conditions yields one LCP
//! in `z = (w_1..w_K, θ_1..θ_K)`. Stage 0 is solved on its own at `x₀`.

use crate::error::FsnError;
use crate::game::GameSpec;
use crate::lcp::LcpProblem;
use crate::linalg::{self, Mat, Vector};
use crate::recursion::{ParamStack, RecursionTape};
use crate::stage::StageBlocks;

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTables {
    /// `phi[ρ][k] = Ā_{k-1}···Ā_ρ` for `ρ ≤ k ≤ K` (identity when equal).
    pub phi: Vec<Vec<Mat>>,
    /// `varphi[k][τ] = H_{k+1}···H_τ` for `1 ≤ k ≤ τ ≤ K`, where `H_{j+1}`
    /// is the `H` computed at stage `j`.
    pub varphi: Vec<Vec<Mat>>,
}

impl TransitionTables {
    pub fn forward(&self, rho: usize, k: usize) -> &Mat {
        &self.phi[rho][k - rho]
    }

    pub fn backward(&self, k: usize, tau: usize) -> &Mat {
        &self.varphi[k][tau - k]
    }
}

pub fn compute_transitions(spec: &GameSpec, tape: &RecursionTape) -> TransitionTables {
    let n = spec.dims.n;
    let big_k = spec.horizon();
    let mut phi = Vec::with_capacity(big_k + 1);
    for rho in 0..=big_k {
        let mut row = vec![linalg::eye(n)];
        for k in (rho + 1)..=big_k {
            let next = &tape.gains[k - 1].a_bar * row.last().unwrap();
            row.push(next);
        }
        phi.push(row);
    }
    let mut varphi = vec![Vec::new(); big_k + 1];
    for k in 0..=big_k {
        let mut row = vec![linalg::eye(2 * n)];
        for tau in (k + 1)..=big_k {
            // φ(k,τ) = φ(k,τ-1)·H_τ with H_τ built at stage τ-1
            let next = row.last().unwrap() * &tape.gains[tau - 1].h;
            row.push(next);
        }
        varphi[k] = row;
    }
    TransitionTables { phi, varphi }
}

/// Blocks of the compact trajectory map over `k, τ = 1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiBlocks {
    /// `(nK) × n`.
    pub phi0: Mat,
    /// `(nK) × (2nK)`.
    pub phi1: Mat,
    /// `(nK) × (sK)`.
    pub phi2: Mat,
    /// `(nK) × (cK)`.
    pub phi3: Mat,
}

/// `𝖫_τ = [L¹_τ; L²_τ]` (2n × s).
fn stacked_l(spec: &GameSpec, tau: usize) -> Mat {
    let [p1, p2] = &spec.stages[tau].players;
    linalg::vstack(&[&p1.l, &p2.l])
}

/// `𝖬_τᵀ = diag(M¹ᵀ, M²ᵀ)` (2n × c).
fn stacked_mt(spec: &GameSpec, tau: usize) -> Mat {
    let [p1, p2] = &spec.stages[tau].players;
    linalg::block_diag(&[p1.m.transpose(), p2.m.transpose()])
}

pub fn phi_blocks(spec: &GameSpec, tape: &RecursionTape, tt: &TransitionTables) -> PhiBlocks {
    let n = spec.dims.n;
    let (s, c) = (spec.dims.s_total(), spec.dims.c_total());
    let big_k = spec.horizon();
    let mut phi0 = linalg::zeros(n * big_k, n);
    let mut phi1 = linalg::zeros(n * big_k, 2 * n * big_k);
    let mut phi2 = linalg::zeros(n * big_k, s * big_k);
    let mut phi3 = linalg::zeros(n * big_k, c * big_k);
    // B̄_ρ = [B¹ B²]_ρ G_{ρ+1}
    let b_bar: Vec<Mat> = tape.gains.iter().map(|g| &g.b * &g.g).collect();
    for k in 1..=big_k {
        let r = (k - 1) * n;
        phi0.view_mut((r, 0), (n, n)).copy_from(tt.forward(0, k));
        for tau in 1..=big_k {
            let mut blk = linalg::zeros(n, 2 * n);
            for rho in 1..=k.min(tau) {
                blk += tt.forward(rho, k) * &b_bar[rho - 1] * tt.backward(rho, tau);
            }
            phi2.view_mut((r, (tau - 1) * s), (n, s)).copy_from(&(&blk * stacked_l(spec, tau)));
            phi3.view_mut((r, (tau - 1) * c), (n, c))
                .copy_from(&(-(&blk * stacked_mt(spec, tau))));
            phi1.view_mut((r, (tau - 1) * 2 * n), (n, 2 * n)).copy_from(&blk);
        }
    }
    PhiBlocks { phi0, phi1, phi2, phi3 }
}

/// Stacked `(p¹_k; p²_k)` over `k = 1..=K`.
pub fn stacked_p(spec: &GameSpec) -> Vector {
    let parts: Vec<Vector> = (1..=spec.horizon())
        .map(|k| {
            let [p1, p2] = &spec.stages[k].players;
            linalg::vconcat(&[&p1.p, &p2.p])
        })
        .collect();
    linalg::vconcat(&parts.iter().collect::<Vec<_>>())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalLcp {
    pub problem: LcpProblem,
    pub phi: PhiBlocks,
}

pub fn assemble_global_lcp(
    spec: &GameSpec,
    tape: &RecursionTape,
    x0: &Vector,
) -> Result<GlobalLcp, FsnError> {
    let tt = compute_transitions(spec, tape);
    let phi = phi_blocks(spec, tape, &tt);
    let dims = &spec.dims;
    let (n, s, c) = (dims.n, dims.s_total(), dims.c_total());
    let big_k = spec.horizon();
    let blocks: Vec<StageBlocks> =
        (1..=big_k).map(|k| StageBlocks::new(dims, &spec.stages[k])).collect();

    let d_agg = linalg::block_diag(&blocks.iter().map(|b| b.d.clone()).collect::<Vec<_>>());
    let nbar_agg = linalg::block_diag(&blocks.iter().map(|b| b.n_own.clone()).collect::<Vec<_>>());
    let n_agg = linalg::block_diag(&blocks.iter().map(|b| b.n_full.clone()).collect::<Vec<_>>());
    // L̄ᵀ and M̄ act on the stacked states
    let lt_agg = linalg::block_diag(&blocks.iter().map(|b| b.l.transpose()).collect::<Vec<_>>());
    let m_agg = linalg::block_diag(&blocks.iter().map(|b| b.m.clone()).collect::<Vec<_>>());
    let d_vec = linalg::vconcat(&blocks.iter().map(|b| &b.d_lin).collect::<Vec<_>>());
    let r_vec = linalg::vconcat(&blocks.iter().map(|b| &b.r).collect::<Vec<_>>());
    debug_assert_eq!(lt_agg.ncols(), n * big_k);

    let (ws, cs) = (s * big_k, c * big_k);
    let mut m = linalg::zeros(ws + cs, ws + cs);
    m.view_mut((0, 0), (ws, ws)).copy_from(&(&d_agg + &lt_agg * &phi.phi2));
    m.view_mut((0, ws), (ws, cs)).copy_from(&(-nbar_agg.transpose() + &lt_agg * &phi.phi3));
    m.view_mut((ws, 0), (cs, ws)).copy_from(&(&n_agg + &m_agg * &phi.phi2));
    m.view_mut((ws, ws), (cs, cs)).copy_from(&(&m_agg * &phi.phi3));

    let x_free = &phi.phi1 * stacked_p(spec) + &phi.phi0 * x0;
    let q_top = &d_vec + &lt_agg * &x_free;
    let q_bot = &r_vec + &m_agg * &x_free;
    let q = linalg::vconcat(&[&q_top, &q_bot]);
    Ok(GlobalLcp { problem: LcpProblem::new(m, q)?, phi })
}

/// Splits a global solution `z` into per-stage `(w_k, θ_k)` for `k = 1..=K`,
/// leaving stage 0 to the caller.
pub fn split_solution(spec: &GameSpec, z: &Vector, stage0: (Vector, Vector)) -> ParamStack {
    let (s, c) = (spec.dims.s_total(), spec.dims.c_total());
    let big_k = spec.horizon();
    let mut params = ParamStack::zeros(spec);
    params.w[0] = stage0.0;
    params.theta[0] = stage0.1;
    for k in 1..=big_k {
        params.w[k] = z.rows((k - 1) * s, s).into_owned();
        params.theta[k] = z.rows(big_k * s + (k - 1) * c, c).into_owned();
    }
    params
}

/// Inverse of [`split_solution`] for stages `1..=K`.
pub fn join_params(spec: &GameSpec, params: &ParamStack) -> Vector {
    let big_k = spec.horizon();
    let mut parts: Vec<&Vector> = params.w[1..=big_k].iter().collect();
    parts.extend(params.theta[1..=big_k].iter());
    linalg::vconcat(&parts)
}

/// States `x_1..x_K` stacked, from the compact trajectory map.
pub fn trajectory_map(spec: &GameSpec, phi: &PhiBlocks, x0: &Vector, params: &ParamStack) -> Vector {
    let big_k = spec.horizon();
    let w = linalg::vconcat(&params.w[1..=big_k].iter().collect::<Vec<_>>());
    let th = linalg::vconcat(&params.theta[1..=big_k].iter().collect::<Vec<_>>());
    &phi.phi0 * x0 + &phi.phi1 * stacked_p(spec) + &phi.phi2 * w + &phi.phi3 * th
}
