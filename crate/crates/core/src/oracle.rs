//! Brute-force reference solver for tiny games.
//!
//! Works without the Riccati sweep and without the assembled global LCP.
//! For fixed simultaneous-layer parameters `p = (w, θ)` the sequential layer
//! is solved by nested grid search: the leader searches its control, the
//! follower searches its reply for every leader candidate, and continuation
//! costs come from recursively solving the remaining stages the same way.
//!
//! The searched objectives are convex quadratics whose linear terms depend
//! linearly on `p`, so the visited states are affine in `p`. The oracle
//! measures that map from `1 + dim p` plays, substitutes it into the stage
//! complementarity conditions, and enumerates every complementary basis of
//! the resulting small LCP. Each solution is a parameter stack that
//! reproduces itself along its own play.
//!
//! Each one-dimensional search is a discrete golden-section search over the
//! grid, followed by a parabolic fit through the best grid point and its
//! neighbours, which recovers the exact minimizer up to round-off.

use crate::error::FsnError;
use crate::game::{check_assumptions, GameSpec};
use crate::lcp::{enumerate_solutions, LcpProblem};
use crate::linalg::{self, Vector};
use crate::recursion::ParamStack;
use crate::solver::stage_cost;
use crate::stage::StageBlocks;

/// Evaluation budget for one sweep of the nested search.
pub const MAX_EVALUATIONS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridAxis {
    pub fn symmetric(half_width: f64, step: f64) -> Self {
        GridAxis { lo: -half_width, hi: half_width, step }
    }

    fn points(&self) -> usize {
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }

    fn at(&self, i: usize) -> f64 {
        self.lo + self.step * i as f64
    }

    /// Evaluations of one search: the golden-section bracket plus the fit.
    fn evaluations(&self) -> u64 {
        let n = self.points() as f64;
        (n.ln() / 1.618_033_988_75f64.ln()).ceil() as u64 + 6
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Leader and follower control grids.
    pub grid: [GridAxis; 2],
    /// Largest admissible departure of a probe play from the affine fit.
    pub affinity_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { grid: [GridAxis::symmetric(20.0, 1e-3); 2], affinity_tol: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    /// First-stage controls `[u¹_0, u²_0]`.
    pub u0: [Vector; 2],
    /// First-stage simultaneous decisions.
    pub v0: Vector,
    pub theta0: Vector,
    pub params: ParamStack,
    pub x: Vec<Vector>,
    pub costs: [f64; 2],
    /// Number of self-consistent parameter stacks found; the one with the
    /// lowest leader cost is reported.
    pub solutions: usize,
}

/// Reference solution for `K ≤ 2`, `n ≤ 2`, at most one control, decision
/// and constraint per player.
pub fn brute_force_fsn(spec: &GameSpec, opts: &OracleOptions) -> Result<OracleOutcome, FsnError> {
    let d = &spec.dims;
    if d.horizon > 2 || d.n > 2 || d.m.iter().chain(&d.s).chain(&d.c).any(|&v| v > 1) {
        return Err(FsnError::Oracle("instance too large for the brute-force oracle".into()));
    }
    check_assumptions(spec)?;
    // one stage solve nests a leader and a follower search
    let per_stage = opts.grid[0].evaluations() * opts.grid[1].evaluations();
    let evaluations = per_stage.saturating_pow(d.horizon as u32);
    if evaluations > MAX_EVALUATIONS {
        return Err(FsnError::GridTooLarge { evaluations, cap: MAX_EVALUATIONS });
    }

    // affine map p -> (x_0, .., x_K), probed along unit directions
    let zero = ParamStack::zeros(spec);
    let dim = flatten(&zero).len();
    let base = stacked_states(spec, &zero, opts.grid)?;
    let mut slope = linalg::zeros(base.len(), dim);
    for j in 0..dim {
        let mut e = linalg::vzeros(dim);
        e[j] = 1.0;
        let xj = stacked_states(spec, &unflatten(&zero, &e), opts.grid)?;
        slope.set_column(j, &(xj - &base));
    }
    // one more probe off the axes guards the affine model
    let probe = Vector::from_fn(dim, |j, _| 0.37 + 0.11 * j as f64);
    let predicted = &base + &slope * &probe;
    let actual = stacked_states(spec, &unflatten(&zero, &probe), opts.grid)?;
    let departure = linalg::vmax_abs(&(actual - predicted));
    if departure > opts.affinity_tol {
        return Err(FsnError::Oracle(format!("play is not affine in the parameters ({departure:.2e})")));
    }

    // stage conditions 0 ≤ z_k ⊥ M_k z_k + q_k(x_k) ≥ 0 with x_k = x̄_k + X_k p
    let mut m = linalg::zeros(dim, dim);
    let mut q = linalg::vzeros(dim);
    let (mut row, n) = (0, d.n);
    for k in 0..=d.horizon {
        let blocks = StageBlocks::new(d, &spec.stages[k]);
        let mk = blocks.lcp_matrix();
        let q0 = blocks.lcp_vector(&linalg::vzeros(n));
        let mut ck = linalg::zeros(mk.nrows(), n);
        for c in 0..n {
            let mut e = linalg::vzeros(n);
            e[c] = 1.0;
            ck.set_column(c, &(blocks.lcp_vector(&e) - &q0));
        }
        let len = mk.nrows();
        let xk_slope = slope.rows(k * n, n);
        let block = &ck * xk_slope;
        m.view_mut((row, 0), (len, dim)).copy_from(&block);
        let mut diag = m.view_mut((row, row), (len, len));
        diag += &mk;
        let qk = &q0 + &ck * base.rows(k * n, n);
        q.rows_mut(row, len).copy_from(&qk);
        row += len;
    }
    let problem = LcpProblem::new(m, q)?;
    let found = enumerate_solutions(&problem, 12)?;
    if found.solutions.is_empty() {
        return Err(FsnError::Oracle("no self-consistent parameters".into()));
    }
    let mut best: Option<OracleOutcome> = None;
    for sol in &found.solutions {
        let out = finish(spec, unflatten(&zero, &sol.z), opts.grid, found.solutions.len())?;
        if best.as_ref().is_none_or(|b| out.costs[0] < b.costs[0]) {
            best = Some(out);
        }
    }
    Ok(best.expect("at least one solution"))
}

/// Parameters stage by stage, `w_k` before `θ_k`, matching the layout of
/// the stage complementarity problems.
fn flatten(p: &ParamStack) -> Vector {
    let parts: Vec<&Vector> = p.w.iter().zip(&p.theta).flat_map(|(w, t)| [w, t]).collect();
    linalg::vconcat(&parts)
}

fn unflatten(like: &ParamStack, v: &Vector) -> ParamStack {
    let mut out = like.clone();
    let mut at = 0;
    for k in 0..out.w.len() {
        for x in [&mut out.w[k], &mut out.theta[k]] {
            let len = x.len();
            x.copy_from(&v.rows(at, len));
            at += len;
        }
    }
    out
}

fn states(spec: &GameSpec, params: &ParamStack, grid: [GridAxis; 2]) -> Result<(Vec<Vector>, Vec<V2>), FsnError> {
    let (x, u) = Search::new(spec, params, grid).play(&spec.x0)?;
    Ok((x.iter().map(|v| Vector::from_column_slice(&v[..spec.dims.n])).collect(), u))
}

fn stacked_states(spec: &GameSpec, params: &ParamStack, grid: [GridAxis; 2]) -> Result<Vector, FsnError> {
    let (x, _) = states(spec, params, grid)?;
    let parts: Vec<&Vector> = x.iter().collect();
    Ok(linalg::vconcat(&parts))
}

/// Replays under the final parameters and evaluates the true costs.
fn finish(
    spec: &GameSpec,
    params: ParamStack,
    grid: [GridAxis; 2],
    solutions: usize,
) -> Result<OracleOutcome, FsnError> {
    let d = &spec.dims;
    let (x, u) = states(spec, &params, grid)?;
    let u: Vec<[Vector; 2]> = u.iter().map(|uk| [control(uk[0], d.m[0]), control(uk[1], d.m[1])]).collect();
    let mut costs = [0.0; 2];
    for (i, c) in costs.iter_mut().enumerate() {
        for k in 0..=d.horizon {
            let uk = (k < d.horizon).then(|| [&u[k][0], &u[k][1]]);
            *c += stage_cost(spec, i, k, &x[k], uk, &params.w[k]);
        }
    }
    Ok(OracleOutcome {
        u0: u[0].clone(),
        v0: params.w[0].clone(),
        theta0: params.theta[0].clone(),
        params,
        x,
        costs,
        solutions,
    })
}

type V2 = [f64; 2];

/// Dense copy of one stage padded to two states, with the parametric
/// simultaneous-layer terms folded into a linear part and a constant.
#[derive(Clone, Copy, Default)]
struct SmallStage {
    a: [V2; 2],
    /// Input column of each player (zero without a control).
    b: [V2; 2],
    q: [[V2; 2]; 2],
    /// `pⁱ + Lⁱw - Mⁱᵀθⁱ`.
    lin: [V2; 2],
    /// `½wᵀDⁱw + dⁱᵀw - θⁱᵀ(Nⁱw + rⁱ)`.
    cst: [f64; 2],
    /// `r[i][j]`: weight of player `j`'s control in player `i`'s cost.
    r: [V2; 2],
}

fn control(u: f64, m: usize) -> Vector {
    Vector::from_iterator(m, std::iter::once(u))
}

struct Search {
    stages: Vec<SmallStage>,
    has_control: [bool; 2],
    grid: [GridAxis; 2],
}

fn pad(v: &Vector) -> V2 {
    let mut o = [0.0; 2];
    for (i, x) in v.iter().enumerate() {
        o[i] = *x;
    }
    o
}

impl Search {
    fn new(spec: &GameSpec, params: &ParamStack, grid: [GridAxis; 2]) -> Self {
        let d = &spec.dims;
        let stages = (0..=d.horizon)
            .map(|k| {
                let st = &spec.stages[k];
                let mut s = SmallStage::default();
                if let Some(dy) = &st.dynamics {
                    for r in 0..d.n {
                        for c in 0..d.n {
                            s.a[r][c] = dy.a[(r, c)];
                        }
                        for i in 0..2 {
                            if d.m[i] == 1 {
                                s.b[i][r] = dy.b[i][(r, 0)];
                            }
                        }
                    }
                }
                let w = &params.w[k];
                for i in 0..2 {
                    let pl = &st.players[i];
                    let c = d.own_c(i);
                    let th = params.theta[k].rows(c.start, c.len()).into_owned();
                    s.lin[i] = pad(&(&pl.p + &pl.l * w - pl.m.transpose() * &th));
                    s.cst[i] = 0.5 * w.dot(&(&pl.d_quad * w)) + pl.d_lin.dot(w)
                        - th.dot(&(&pl.n * w + &pl.r_con));
                    for r in 0..d.n {
                        for c in 0..d.n {
                            s.q[i][r][c] = pl.q[(r, c)];
                        }
                    }
                    if let Some(rr) = &pl.r {
                        for j in 0..2 {
                            if d.m[j] == 1 {
                                s.r[i][j] = rr[j][(0, 0)];
                            }
                        }
                    }
                }
                s
            })
            .collect();
        Search { stages, has_control: [d.m[0] == 1, d.m[1] == 1], grid }
    }

    fn horizon(&self) -> usize {
        self.stages.len() - 1
    }

    /// Plays the searched strategies from `x0`.
    fn play(&self, x0: &Vector) -> Result<(Vec<V2>, Vec<V2>), FsnError> {
        let mut x = vec![pad(x0)];
        let mut u = Vec::new();
        for k in 0..self.horizon() {
            let (u1, u2) = self.decide(k, x[k])?;
            x.push(self.next_state(k, x[k], u1, u2));
            u.push([u1, u2]);
        }
        Ok((x, u))
    }

    fn next_state(&self, k: usize, x: V2, u1: f64, u2: f64) -> V2 {
        let s = &self.stages[k];
        let mut o = [0.0; 2];
        for r in 0..2 {
            o[r] = s.a[r][0] * x[0] + s.a[r][1] * x[1] + s.b[0][r] * u1 + s.b[1][r] * u2;
        }
        o
    }

    /// Parametric cost of stage `k` without the controls.
    fn stage_part(&self, i: usize, k: usize, x: V2) -> f64 {
        let s = &self.stages[k];
        let q = &s.q[i];
        let quad = q[0][0] * x[0] * x[0] + (q[0][1] + q[1][0]) * x[0] * x[1] + q[1][1] * x[1] * x[1];
        0.5 * quad + s.lin[i][0] * x[0] + s.lin[i][1] * x[1] + s.cst[i]
    }

    fn control_cost(&self, i: usize, k: usize, u1: f64, u2: f64) -> f64 {
        let r = &self.stages[k].r[i];
        0.5 * (r[0] * u1 * u1 + r[1] * u2 * u2)
    }

    /// Both players' parametric costs from stage `k` on.
    fn tail(&self, k: usize, x: V2) -> Result<[f64; 2], FsnError> {
        let mut out = [self.stage_part(0, k, x), self.stage_part(1, k, x)];
        if k == self.horizon() {
            return Ok(out);
        }
        let (u1, u2) = self.decide(k, x)?;
        let cont = self.tail(k + 1, self.next_state(k, x, u1, u2))?;
        for i in 0..2 {
            out[i] += self.control_cost(i, k, u1, u2) + cont[i];
        }
        Ok(out)
    }

    fn decide(&self, k: usize, x: V2) -> Result<(f64, f64), FsnError> {
        let leader_obj = |u1: f64| -> Result<f64, FsnError> {
            let u2 = self.reply(k, x, u1)?;
            let cont = self.tail(k + 1, self.next_state(k, x, u1, u2))?;
            Ok(self.control_cost(0, k, u1, u2) + cont[0])
        };
        let u1 = minimize(self.has_control[0], &self.grid[0], leader_obj)?;
        let u2 = self.reply(k, x, u1)?;
        Ok((u1, u2))
    }

    fn reply(&self, k: usize, x: V2, u1: f64) -> Result<f64, FsnError> {
        minimize(self.has_control[1], &self.grid[1], |u2: f64| {
            let cont = self.tail(k + 1, self.next_state(k, x, u1, u2))?;
            Ok(self.control_cost(1, k, u1, u2) + cont[1])
        })
    }
}

/// Minimizes over a scalar control; without a control the answer is zero.
fn minimize<F>(active: bool, axis: &GridAxis, f: F) -> Result<f64, FsnError>
where
    F: Fn(f64) -> Result<f64, FsnError>,
{
    if !active {
        return Ok(0.0);
    }
    let g = |i: usize| f(axis.at(i));
    let best = golden_index(axis.points(), &g)?;
    if best == 0 || best + 1 == axis.points() {
        return Err(FsnError::Oracle(format!(
            "minimizer at the grid boundary {:.3}; widen the grid",
            axis.at(best)
        )));
    }
    // A wide stencil is still exact on a quadratic but damps the round-off
    // that nested searches leave in `f`.
    let span = FIT_SPAN.min(best).min(axis.points() - 1 - best);
    let (fm, f0, fp) = (g(best - span)?, g(best)?, g(best + span)?);
    let curv = fm - 2.0 * f0 + fp;
    let shift = if curv > 0.0 { 0.5 * (fm - fp) / curv * span as f64 } else { 0.0 };
    Ok(axis.at(best) + axis.step * shift.clamp(-1.0, 1.0))
}

/// Half-width of the parabolic fit stencil, in grid steps.
const FIT_SPAN: usize = 200;

/// Discrete golden-section search for the minimum of a unimodal sequence.
fn golden_index<G>(n: usize, g: &G) -> Result<usize, FsnError>
where
    G: Fn(usize) -> Result<f64, FsnError>,
{
    let mut cache: Vec<(usize, f64)> = Vec::new();
    let mut eval = |i: usize| -> Result<f64, FsnError> {
        if let Some(&(_, v)) = cache.iter().find(|(j, _)| *j == i) {
            return Ok(v);
        }
        let v = g(i)?;
        cache.push((i, v));
        Ok(v)
    };
    let inv_phi = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (0usize, n - 1);
    while b - a > 4 {
        let span = (b - a) as f64;
        let c = b - (span * inv_phi).round() as usize;
        let d = a + (span * inv_phi).round() as usize;
        debug_assert!(a < c && c < d && d < b);
        if eval(c)? <= eval(d)? {
            b = d;
        } else {
            a = c;
        }
    }
    let mut best = a;
    let mut best_val = eval(a)?;
    for i in (a + 1)..=b {
        let v = eval(i)?;
        if v < best_val {
            best = i;
            best_val = v;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_search_finds_discrete_minimum() {
        let f = |i: usize| Ok(((i as f64) - 737.3).powi(2));
        assert_eq!(golden_index(2001, &f).unwrap(), 737);
        let f = |i: usize| Ok(i as f64);
        assert_eq!(golden_index(50, &f).unwrap(), 0);
    }

    #[test]
    fn parabolic_fit_is_exact_on_quadratics() {
        let axis = GridAxis::symmetric(5.0, 1e-3);
        let u = minimize(true, &axis, |u| Ok(3.0 * (u - 1.234_567_89).powi(2) + 2.0)).unwrap();
        assert!((u - 1.234_567_89).abs() < 1e-9);
    }

    #[test]
    fn boundary_minimizer_is_an_error() {
        let axis = GridAxis::symmetric(1.0, 1e-2);
        assert!(matches!(
            minimize(true, &axis, |u| Ok((u - 3.0).powi(2))),
            Err(FsnError::Oracle(_))
        ));
    }
}
