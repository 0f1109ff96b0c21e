//! End-to-end solve: sweep, global LCP, recovery of strategies and play, and
//! verification of the equilibrium conditions.

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_global_lcp, join_params, split_solution, GlobalLcp};
use crate::error::FsnError;
use crate::game::{check_assumptions, GameSpec};
use crate::lcp::{self, LcpResidual, LemkeOptions, LemkeOutcome};
use crate::linalg::{self, Mat, Vector};
use crate::recursion::{
    backward_sweep, eval_affine_parts, foc_residuals_at, AffineParts, ParamStack, RecursionTape,
};
use crate::stage::{build_stage_lcp, solve_stage_game, StageBlocks};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Global LCP complementarity, scaled by `1 + |q|∞`.
    pub lcp_complementarity_tol: f64,
    pub lcp_feasibility_tol: f64,
    pub fixed_point_tol: f64,
    /// First-order residuals, scaled by `1 + |x_k|∞`.
    pub foc_tol: f64,
    /// Value identity, scaled by `1 + |J|`.
    pub value_tol: f64,
    /// Largest admissible cost decrease under a deviation.
    pub deviation_tol: f64,
    pub deviation_steps: Vec<f64>,
    /// Gains, trajectory and stored costs against their recomputation.
    pub consistency_tol: f64,
    /// Sign violations of decisions, multipliers and constraint values.
    pub feasibility_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            lcp_complementarity_tol: 1e-8,
            lcp_feasibility_tol: 1e-9,
            fixed_point_tol: 1e-6,
            foc_tol: 1e-8,
            value_tol: 1e-6,
            deviation_tol: 1e-8,
            deviation_steps: vec![0.1, -0.1, 0.01, -0.01],
            consistency_tol: 1e-9,
            feasibility_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveOptions {
    pub lemke: LemkeOptions,
    pub verify: VerifyOptions,
    /// Skip verification (the report is then empty and passes).
    pub skip_verification: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `x_0..x_K`.
    pub x: Vec<Vector>,
    /// `[u¹_k, u²_k]`, `k = 0..K`.
    pub u: Vec<[Vector; 2]>,
    /// Constraint values `Mx_k + Nv_k + r`, `k = 0..=K`.
    pub slack: Vec<Vector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcpStats {
    pub dim: usize,
    pub pivots: usize,
    pub complementarity: f64,
    pub feasibility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FsnOutcome {
    /// `[E¹_k, E²_k]`, `k = 0..K`.
    pub e: Vec<[Mat; 2]>,
    /// `[F¹_k, F²_k]`, `k = 0..K`.
    pub f: Vec<[Vector; 2]>,
    /// Simultaneous decisions (`w`) and multipliers (`theta`), `k = 0..=K`.
    pub params: ParamStack,
    pub trajectory: Trajectory,
    pub costs: [f64; 2],
    /// `[m¹_k, m²_k]`.
    pub value_offsets: Vec<[f64; 2]>,
    pub lcp: LcpStats,
    pub report: VerificationReport,
    pub warnings: Vec<String>,
}

impl FsnOutcome {
    pub fn v_star(&self) -> &[Vector] {
        &self.params.w
    }

    pub fn mu_star(&self) -> &[Vector] {
        &self.params.theta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub stage: Option<usize>,
    pub player: Option<usize>,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.name)?;
        if let Some(k) = self.stage {
            write!(f, " at stage {k}")?;
        }
        if let Some(i) = self.player {
            write!(f, " (player {i})")?;
        }
        write!(f, ": {:.3e} vs threshold {:.3e}", self.value, self.threshold)
    }
}

/// Named checks with their measured values and thresholds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
}

pub mod check {
    pub const LCP_COMPLEMENTARITY: &str = "global_lcp_complementarity";
    pub const LCP_FEASIBILITY: &str = "global_lcp_feasibility";
    pub const STAGE_FIXED_POINT: &str = "stage_fixed_point";
    pub const FEASIBILITY: &str = "feasibility";
    pub const GAINS: &str = "strategy_gains";
    pub const TRAJECTORY: &str = "trajectory";
    pub const COSTS: &str = "stored_costs";
    pub const FOC_LEADER: &str = "foc_leader";
    pub const FOC_FOLLOWER: &str = "foc_follower";
    pub const VALUE_IDENTITY: &str = "value_identity";
    pub const VALUE_RECURSION: &str = "value_recursion";
    pub const DEVIATION_LEADER: &str = "deviation_leader";
    pub const DEVIATION_FOLLOWER: &str = "deviation_follower";
    pub const DEVIATION_SIMULTANEOUS: &str = "deviation_simultaneous";
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Largest measured value among checks with this name.
    pub fn worst(&self, name: &str) -> Option<f64> {
        self.checks
            .iter()
            .filter(|c| c.name == name)
            .map(|c| c.value)
            .reduce(f64::max)
    }

    pub fn passed_named(&self, name: &str) -> bool {
        self.checks.iter().filter(|c| c.name == name).all(|c| c.passed)
    }

    fn push(&mut self, name: &str, stage: Option<usize>, player: Option<usize>, value: f64, threshold: f64) {
        self.checks.push(CheckResult {
            name: name.to_string(),
            stage,
            player,
            value,
            threshold,
            // NaN fails
            passed: value <= threshold,
        });
    }
}

/// Solves the game and verifies the result.
pub fn solve_fsn(spec: &GameSpec, opts: &SolveOptions) -> Result<FsnOutcome, FsnError> {
    check_assumptions(spec)?;
    let tape = backward_sweep(spec)?;
    let glcp = assemble_global_lcp(spec, &tape, &spec.x0)?;
    let sol = match lcp::lemke_solve(&glcp.problem, &opts.lemke)? {
        LemkeOutcome::Solved(s) => s,
        LemkeOutcome::Infeasible(ray) => return Err(FsnError::NoEquilibrium { pivots: ray.pivots }),
    };
    build_outcome(spec, &tape, &glcp, &sol.z, sol.pivots, opts)
}

/// All equilibria reachable by enumerating the global LCP (dimension ≤ `cap`),
/// in admissible order.
pub fn solve_fsn_all(spec: &GameSpec, opts: &SolveOptions, cap: usize) -> Result<Vec<FsnOutcome>, FsnError> {
    check_assumptions(spec)?;
    let tape = backward_sweep(spec)?;
    let glcp = assemble_global_lcp(spec, &tape, &spec.x0)?;
    let en = lcp::enumerate_solutions(&glcp.problem, cap)?;
    if en.solutions.is_empty() {
        return Err(FsnError::NoEquilibrium { pivots: 0 });
    }
    let mut outs = Vec::with_capacity(en.solutions.len());
    for s in &en.solutions {
        outs.push(build_outcome(spec, &tape, &glcp, &s.z, 0, opts)?);
    }
    Ok(admissible_ordering(outs))
}

fn build_outcome(
    spec: &GameSpec,
    tape: &RecursionTape,
    glcp: &GlobalLcp,
    z: &Vector,
    pivots: usize,
    opts: &SolveOptions,
) -> Result<FsnOutcome, FsnError> {
    let stage0 = solve_stage_game(spec, 0, &spec.x0, &opts.lemke)?;
    let params = split_solution(spec, z, (stage0.v.clone(), stage0.theta.clone()));
    let parts = eval_affine_parts(spec, tape, &params)?;
    let e: Vec<[Mat; 2]> = tape.gains.iter().map(|g| g.e.clone()).collect();
    let f = parts.f.clone();
    let (x, u) = simulate(spec, &e, &f, &spec.x0);
    let slack = constraint_values(spec, &x, &params);
    let trajectory = Trajectory { x, u, slack };
    let costs = evaluate_costs(spec, &trajectory, &params);
    let residual = glcp.problem.residual(z);
    let mut out = FsnOutcome {
        e,
        f,
        params,
        trajectory,
        costs,
        value_offsets: parts.m.clone(),
        lcp: LcpStats {
            dim: glcp.problem.dim(),
            pivots,
            complementarity: residual.complementarity,
            feasibility: residual.feasibility,
        },
        report: VerificationReport::default(),
        warnings: tape.warnings.clone(),
    };
    if !opts.skip_verification {
        out.report = verify_equilibrium(spec, &out, &opts.verify)?;
    }
    Ok(out)
}

/// Sorts ascending by leader cost, then follower cost, then `v*`.
pub fn admissible_ordering(mut outcomes: Vec<FsnOutcome>) -> Vec<FsnOutcome> {
    outcomes.sort_by(|a, b| {
        a.costs[0]
            .total_cmp(&b.costs[0])
            .then(a.costs[1].total_cmp(&b.costs[1]))
            .then_with(|| {
                let fa = a.params.w.iter().flat_map(|v| v.iter());
                let fb = b.params.w.iter().flat_map(|v| v.iter());
                for (x, y) in fa.zip(fb) {
                    match x.total_cmp(y) {
                        std::cmp::Ordering::Equal => continue,
                        o => return o,
                    }
                }
                std::cmp::Ordering::Equal
            })
    });
    outcomes
}

/// Plays the affine strategies `uⁱ_k = Eⁱ_k x_k + Fⁱ_k` from `x0`.
pub fn simulate(
    spec: &GameSpec,
    e: &[[Mat; 2]],
    f: &[[Vector; 2]],
    x0: &Vector,
) -> (Vec<Vector>, Vec<[Vector; 2]>) {
    let mut xs = vec![x0.clone()];
    let mut us = Vec::with_capacity(spec.horizon());
    for k in 0..spec.horizon() {
        let x = xs.last().unwrap();
        let u1 = &e[k][0] * x + &f[k][0];
        let u2 = &e[k][1] * x + &f[k][1];
        xs.push(step(spec, k, x, &u1, &u2));
        us.push([u1, u2]);
    }
    (xs, us)
}

fn step(spec: &GameSpec, k: usize, x: &Vector, u1: &Vector, u2: &Vector) -> Vector {
    let dy = spec.stages[k].dynamics.as_ref().expect("sequential stage");
    &dy.a * x + &dy.b[0] * u1 + &dy.b[1] * u2
}

fn constraint_values(spec: &GameSpec, x: &[Vector], params: &ParamStack) -> Vec<Vector> {
    (0..=spec.horizon())
        .map(|k| StageBlocks::new(&spec.dims, &spec.stages[k]).constraint_slack(&x[k], &params.w[k]))
        .collect()
}

/// Stage cost of player `i` with simultaneous decisions `v`; `u` is `None`
/// at the terminal stage.
pub fn stage_cost(spec: &GameSpec, i: usize, k: usize, x: &Vector, u: Option<[&Vector; 2]>, v: &Vector) -> f64 {
    let pl = &spec.stages[k].players[i];
    let mut c = 0.5 * x.dot(&(&pl.q * x)) + pl.p.dot(x);
    if let (Some(u), Some(r)) = (u, pl.r.as_ref()) {
        for j in 0..2 {
            c += 0.5 * u[j].dot(&(&r[j] * u[j]));
        }
    }
    c + simultaneous_cost(spec, i, k, x, v)
}

/// `½vᵀDⁱv + xᵀLⁱv + dⁱᵀv`.
pub fn simultaneous_cost(spec: &GameSpec, i: usize, k: usize, x: &Vector, v: &Vector) -> f64 {
    let pl = &spec.stages[k].players[i];
    0.5 * v.dot(&(&pl.d_quad * v)) + x.dot(&(&pl.l * v)) + pl.d_lin.dot(v)
}

/// Direct sum of actual stage costs along the play.
pub fn evaluate_costs(spec: &GameSpec, traj: &Trajectory, params: &ParamStack) -> [f64; 2] {
    let big_k = spec.horizon();
    let mut j = [0.0; 2];
    for (i, ji) in j.iter_mut().enumerate() {
        for k in 0..=big_k {
            let u = (k < big_k).then(|| [&traj.u[k][0], &traj.u[k][1]]);
            *ji += stage_cost(spec, i, k, &traj.x[k], u, &params.w[k]);
        }
    }
    j
}

fn own_theta(spec: &GameSpec, i: usize, theta: &Vector) -> Vector {
    theta.rows(spec.dims.own_c(i).start, spec.dims.c[i]).into_owned()
}

/// Parametric stage cost: the actual cost with `v = w_k` plus the
/// Lagrangian term `-θⁱᵀ(Mⁱx + Nⁱw + rⁱ)`.
fn parametric_stage_cost(
    spec: &GameSpec,
    i: usize,
    k: usize,
    x: &Vector,
    u: Option<[&Vector; 2]>,
    params: &ParamStack,
) -> f64 {
    let pl = &spec.stages[k].players[i];
    let th = own_theta(spec, i, &params.theta[k]);
    let w = &params.w[k];
    stage_cost(spec, i, k, x, u, w) - th.dot(&(&pl.m * x + &pl.n * w + &pl.r_con))
}

/// Parametric cost of player `i` from stage `k` on, when `(u¹, u²)` is
/// played at `k` and the given affine strategies afterwards. The stage-`k`
/// simultaneous terms are left out since they do not depend on `u`.
fn parametric_cost_to_go(
    spec: &GameSpec,
    e: &[[Mat; 2]],
    f: &[[Vector; 2]],
    params: &ParamStack,
    i: usize,
    k: usize,
    x: &Vector,
    u: [&Vector; 2],
) -> f64 {
    let r = spec.stages[k].players[i].r.as_ref().expect("sequential stage");
    let mut c = 0.5 * u[0].dot(&(&r[0] * u[0])) + 0.5 * u[1].dot(&(&r[1] * u[1]));
    let mut xt = step(spec, k, x, u[0], u[1]);
    for t in (k + 1)..=spec.horizon() {
        if t < spec.horizon() {
            let u1 = &e[t][0] * &xt + &f[t][0];
            let u2 = &e[t][1] * &xt + &f[t][1];
            c += parametric_stage_cost(spec, i, t, &xt, Some([&u1, &u2]), params);
            xt = step(spec, t, &xt, &u1, &u2);
        } else {
            c += parametric_stage_cost(spec, i, t, &xt, None, params);
        }
    }
    c
}

/// Value-function prediction of each player's total cost from stage `k`:
/// `½xᵀS_k x + s_kᵀx + m_k` plus the simultaneous-layer constants.
fn value_prediction(
    spec: &GameSpec,
    tape: &RecursionTape,
    parts: &AffineParts,
    params: &ParamStack,
    k: usize,
    x: &Vector,
) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (i, o) in out.iter_mut().enumerate() {
        let mut v = 0.5 * x.dot(&(&tape.s[k][i] * x)) + parts.s[k][i].dot(x) + parts.m[k][i];
        for t in k..=spec.horizon() {
            let pl = &spec.stages[t].players[i];
            let w = &params.w[t];
            let th = own_theta(spec, i, &params.theta[t]);
            v += 0.5 * w.dot(&(&pl.d_quad * w)) + pl.d_lin.dot(w) - th.dot(&(&pl.n * w + &pl.r_con));
        }
        *o = v;
    }
    out
}

/// Re-derives everything from `spec` and checks the stored outcome against it.
pub fn verify_equilibrium(
    spec: &GameSpec,
    out: &FsnOutcome,
    opts: &VerifyOptions,
) -> Result<VerificationReport, FsnError> {
    let big_k = spec.horizon();
    check_outcome_shapes(spec, out)?;
    let tape = backward_sweep(spec)?;
    let parts = eval_affine_parts(spec, &tape, &out.params)?;
    let mut rep = VerificationReport::default();
    let x = &out.trajectory.x;
    let tol = opts.consistency_tol;

    // gains
    for k in 0..big_k {
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let de = (&out.e[k][i] - &tape.gains[k].e[i]).amax_or0() / (1.0 + tape.gains[k].e[i].amax_or0());
            let df = (&out.f[k][i] - &parts.f[k][i]).amax_or0() / (1.0 + parts.f[k][i].amax_or0());
            err = err.max(de).max(df);
        }
        rep.push(check::GAINS, Some(k), None, err, tol);
    }

    // play: stored controls follow the strategies and stored states follow the dynamics
    let mut traj_err: f64 = (&x[0] - &spec.x0).amax_or0();
    for k in 0..big_k {
        for i in 0..2 {
            let u = &out.e[k][i] * &x[k] + &out.f[k][i];
            traj_err = traj_err.max((&u - &out.trajectory.u[k][i]).amax_or0() / (1.0 + u.amax_or0()));
        }
        let xn = step(spec, k, &x[k], &out.trajectory.u[k][0], &out.trajectory.u[k][1]);
        traj_err = traj_err.max((&xn - &x[k + 1]).amax_or0() / (1.0 + xn.amax_or0()));
    }
    rep.push(check::TRAJECTORY, None, None, traj_err, tol);

    // global LCP at the stored parameters
    let glcp = assemble_global_lcp(spec, &tape, &spec.x0)?;
    let z = join_params(spec, &out.params);
    let res: LcpResidual = glcp.problem.residual(&z);
    let q_scale = 1.0 + glcp.problem.q.amax_or0();
    rep.push(check::LCP_COMPLEMENTARITY, None, None, res.complementarity, opts.lcp_complementarity_tol * q_scale);
    rep.push(check::LCP_FEASIBILITY, None, None, res.feasibility, opts.lcp_feasibility_tol);

    // stage fixed point and feasibility along the play
    let lemke = LemkeOptions::default();
    for k in 0..=big_k {
        // Multipliers need not be unique when constraints are degenerate, so
        // the stored pair is checked as a stage solution and only the
        // decisions are compared with a fresh solve.
        let err = match (solve_stage_game(spec, k, &x[k], &lemke), build_stage_lcp(spec, k, &x[k])) {
            (Ok(s), Ok(p)) => {
                let z = linalg::vconcat(&[&out.params.w[k], &out.params.theta[k]]);
                (&s.v - &out.params.w[k]).amax_or0().max(p.residual(&z).max())
            }
            _ => f64::INFINITY,
        };
        rep.push(check::STAGE_FIXED_POINT, Some(k), None, err, opts.fixed_point_tol);
        let blocks = StageBlocks::new(&spec.dims, &spec.stages[k]);
        let slack = blocks.constraint_slack(&x[k], &out.params.w[k]);
        let viol = [slack.min_or0(), out.params.w[k].min_or0(), out.params.theta[k].min_or0()]
            .iter()
            .fold(0.0f64, |a, &b| a.max(-b));
        rep.push(check::FEASIBILITY, Some(k), None, viol, opts.feasibility_tol);
    }

    // first-order conditions at the announced strategies
    for k in 0..big_k {
        let u1 = &out.e[k][0] * &x[k] + &out.f[k][0];
        let u2 = &out.e[k][1] * &x[k] + &out.f[k][1];
        let [l, f] = foc_residuals_at(spec, &tape, &parts, k, &x[k], &u1, &u2);
        let thr = opts.foc_tol * (1.0 + x[k].amax_or0());
        rep.push(check::FOC_LEADER, Some(k), Some(1), l, thr);
        rep.push(check::FOC_FOLLOWER, Some(k), Some(2), f, thr);
    }

    // value identity: direct tail sums against the value functions
    let actual = evaluate_costs(spec, &out.trajectory, &out.params);
    for i in 0..2 {
        let d = (actual[i] - out.costs[i]).abs() / (1.0 + actual[i].abs());
        rep.push(check::COSTS, None, Some(i + 1), d, tol);
    }
    for k in 0..=big_k {
        let pred = value_prediction(spec, &tape, &parts, &out.params, k, &x[k]);
        for i in 0..2 {
            let mut tail = 0.0;
            for t in k..=big_k {
                let u = (t < big_k).then(|| [&out.trajectory.u[t][0], &out.trajectory.u[t][1]]);
                tail += stage_cost(spec, i, t, &x[t], u, &out.params.w[t]);
            }
            let thr = opts.value_tol * (1.0 + tail.abs());
            rep.push(check::VALUE_IDENTITY, Some(k), Some(i + 1), (tail - pred[i]).abs(), thr);
        }
    }

    // value matrices against their closed-loop definition
    for k in 0..big_k {
        let dy = spec.stages[k].dynamics.as_ref().expect("sequential stage");
        let a_bar = &dy.a + &dy.b[0] * &out.e[k][0] + &dy.b[1] * &out.e[k][1];
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let pl = &spec.stages[k].players[i];
            let r = pl.r.as_ref().expect("sequential stage");
            let s = &pl.q
                + out.e[k][0].transpose() * &r[0] * &out.e[k][0]
                + out.e[k][1].transpose() * &r[1] * &out.e[k][1]
                + a_bar.transpose() * &tape.s[k + 1][i] * &a_bar;
            err = err.max((&s - &tape.s[k][i]).amax_or0() / (1.0 + s.amax_or0()));
        }
        rep.push(check::VALUE_RECURSION, Some(k), None, err, 1e-10);
    }

    deviation_checks(spec, &tape, &parts, out, opts, &mut rep);
    Ok(rep)
}

fn deviation_checks(
    spec: &GameSpec,
    tape: &RecursionTape,
    parts: &AffineParts,
    out: &FsnOutcome,
    opts: &VerifyOptions,
    rep: &mut VerificationReport,
) {
    let big_k = spec.horizon();
    let x = &out.trajectory.x;
    let (e, f, params) = (&out.e, &out.f, &out.params);
    for k in 0..big_k {
        let u1 = &e[k][0] * &x[k] + &f[k][0];
        let u2 = &e[k][1] * &x[k] + &f[k][1];

        // leader deviates; follower re-optimizes through its reaction
        let react = |u1d: &Vector| follower_reaction(spec, tape, parts, k, &x[k], u1d);
        let u2r = react(&u1);
        let base = parametric_cost_to_go(spec, e, f, params, 0, k, &x[k], [&u1, &u2r]);
        let mut worst = f64::NEG_INFINITY;
        for j in 0..u1.len() {
            for &d in &opts.deviation_steps {
                let mut u1d = u1.clone();
                u1d[j] += d;
                let c = parametric_cost_to_go(spec, e, f, params, 0, k, &x[k], [&u1d, &react(&u1d)]);
                worst = worst.max(base - c);
            }
        }
        if worst > f64::NEG_INFINITY {
            rep.push(check::DEVIATION_LEADER, Some(k), Some(1), worst, opts.deviation_tol);
        }

        // follower deviates with the leader fixed
        let base = parametric_cost_to_go(spec, e, f, params, 1, k, &x[k], [&u1, &u2]);
        let mut worst = f64::NEG_INFINITY;
        for j in 0..u2.len() {
            for &d in &opts.deviation_steps {
                let mut u2d = u2.clone();
                u2d[j] += d;
                let c = parametric_cost_to_go(spec, e, f, params, 1, k, &x[k], [&u1, &u2d]);
                worst = worst.max(base - c);
            }
        }
        if worst > f64::NEG_INFINITY {
            rep.push(check::DEVIATION_FOLLOWER, Some(k), Some(2), worst, opts.deviation_tol);
        }
    }

    // simultaneous layer: own-coordinate moves, shortened to stay feasible
    for k in 0..=big_k {
        let w = &params.w[k];
        for i in 0..2 {
            let pl = &spec.stages[k].players[i];
            let base = simultaneous_cost(spec, i, k, &x[k], w);
            let mut worst = f64::NEG_INFINITY;
            for j in spec.dims.own_v(i) {
                for &d in &opts.deviation_steps {
                    let mut dir = linalg::vzeros(w.len());
                    dir[j] = d;
                    let t = feasible_step(&(&pl.m * &x[k] + &pl.n * w + &pl.r_con), &(&pl.n * &dir), w[j], d);
                    if t <= 0.0 {
                        continue;
                    }
                    let wd = w + dir * t;
                    worst = worst.max(base - simultaneous_cost(spec, i, k, &x[k], &wd));
                }
            }
            if worst > f64::NEG_INFINITY {
                rep.push(check::DEVIATION_SIMULTANEOUS, Some(k), Some(i + 1), worst, opts.deviation_tol);
            }
        }
    }
}

/// Largest `t ∈ [0, 1]` keeping `g + t·dg ≥ 0` and `v_j + t·d ≥ 0`.
fn feasible_step(g: &Vector, dg: &Vector, vj: f64, d: f64) -> f64 {
    let mut t: f64 = 1.0;
    for r in 0..g.len() {
        if dg[r] < 0.0 {
            t = t.min(g[r].max(0.0) / -dg[r]);
        }
    }
    if d < 0.0 {
        t = t.min(vj.max(0.0) / -d);
    }
    t
}

/// Follower's best response to `u¹` under the parametric continuation.
fn follower_reaction(
    spec: &GameSpec,
    tape: &RecursionTape,
    parts: &AffineParts,
    k: usize,
    x: &Vector,
    u1: &Vector,
) -> Vector {
    let dy = spec.stages[k].dynamics.as_ref().expect("sequential stage");
    let r22 = &spec.stages[k].players[1].r.as_ref().expect("sequential stage")[1];
    let b2 = &dy.b[1];
    let s2 = &tape.s[k + 1][1];
    let y = &dy.a * x + &dy.b[0] * u1;
    let curv = r22 + b2.transpose() * s2 * b2;
    let rhs = -(b2.transpose() * (s2 * y + &parts.s[k + 1][1]));
    linalg::solve(&curv, &rhs).unwrap_or_else(|| linalg::vzeros(b2.ncols()))
}

fn check_outcome_shapes(spec: &GameSpec, out: &FsnOutcome) -> Result<(), FsnError> {
    let d = &spec.dims;
    let k = d.horizon;
    let bad = |what: &str| Err(FsnError::Serde(format!("outcome does not match the game: {what}")));
    if out.e.len() != k || out.f.len() != k {
        return bad("gain count");
    }
    for t in 0..k {
        for i in 0..2 {
            if out.e[t][i].shape() != (d.m[i], d.n) || out.f[t][i].len() != d.m[i] {
                return bad("gain shape");
            }
        }
    }
    let tr = &out.trajectory;
    if tr.x.len() != k + 1 || tr.u.len() != k || tr.x.iter().any(|x| x.len() != d.n) {
        return bad("trajectory length");
    }
    if tr.u.iter().any(|u| u[0].len() != d.m[0] || u[1].len() != d.m[1]) {
        return bad("control length");
    }
    if out.params.w.len() != k + 1
        || out.params.theta.len() != k + 1
        || out.params.w.iter().any(|w| w.len() != d.s_total())
        || out.params.theta.iter().any(|t| t.len() != d.c_total())
    {
        return bad("decision stack");
    }
    Ok(())
}

/// Zero-size tolerant reductions.
trait Reduce {
    fn amax_or0(&self) -> f64;
    fn min_or0(&self) -> f64;
}

impl Reduce for Mat {
    fn amax_or0(&self) -> f64 {
        linalg::max_abs(self)
    }
    fn min_or0(&self) -> f64 {
        self.iter().fold(0.0f64, |a, &b| a.min(b))
    }
}

impl Reduce for Vector {
    fn amax_or0(&self) -> f64 {
        linalg::vmax_abs(self)
    }
    fn min_or0(&self) -> f64 {
        self.iter().fold(0.0f64, |a, &b| a.min(b))
    }
}

// ---------------------------------------------------------------------------
// Serialization

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutcomeDoc {
    horizon: usize,
    gains: Vec<GainDoc>,
    v_star: Vec<Vec<f64>>,
    mu_star: Vec<Vec<f64>>,
    trajectory: TrajectoryDoc,
    costs: [f64; 2],
    value_offsets: Vec<[f64; 2]>,
    lcp: LcpStats,
    warnings: Vec<String>,
    report: VerificationReport,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainDoc {
    stage: usize,
    #[serde(rename = "E")]
    e: [Vec<Vec<f64>>; 2],
    #[serde(rename = "F")]
    f: [Vec<f64>; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryDoc {
    x: Vec<Vec<f64>>,
    u1: Vec<Vec<f64>>,
    u2: Vec<Vec<f64>>,
    slack: Vec<Vec<f64>>,
}

fn vecs(v: &[Vector]) -> Vec<Vec<f64>> {
    v.iter().map(|x| x.iter().copied().collect()).collect()
}

fn unvecs(v: Vec<Vec<f64>>) -> Vec<Vector> {
    v.into_iter().map(Vector::from_vec).collect()
}

impl FsnOutcome {
    pub fn to_json_string(&self) -> String {
        let doc = OutcomeDoc {
            horizon: self.e.len(),
            gains: (0..self.e.len())
                .map(|k| GainDoc {
                    stage: k,
                    e: [linalg::to_rows(&self.e[k][0]), linalg::to_rows(&self.e[k][1])],
                    f: [self.f[k][0].iter().copied().collect(), self.f[k][1].iter().copied().collect()],
                })
                .collect(),
            v_star: vecs(&self.params.w),
            mu_star: vecs(&self.params.theta),
            trajectory: TrajectoryDoc {
                x: vecs(&self.trajectory.x),
                u1: self.trajectory.u.iter().map(|u| u[0].iter().copied().collect()).collect(),
                u2: self.trajectory.u.iter().map(|u| u[1].iter().copied().collect()).collect(),
                slack: vecs(&self.trajectory.slack),
            },
            costs: self.costs,
            value_offsets: self.value_offsets.clone(),
            lcp: self.lcp,
            warnings: self.warnings.clone(),
            report: self.report.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("outcome serializes")
    }

    /// Parses an outcome document. Matrix widths come from the rows; shapes
    /// are checked against a game by [`verify_equilibrium`].
    pub fn from_json_str(s: &str) -> Result<Self, FsnError> {
        let doc: OutcomeDoc = serde_json::from_str(s)?;
        if doc.gains.len() != doc.horizon || doc.trajectory.u1.len() != doc.horizon {
            return Err(FsnError::Serde("gain or control count differs from horizon".into()));
        }
        let mut e = Vec::with_capacity(doc.horizon);
        let mut f = Vec::with_capacity(doc.horizon);
        for (k, g) in doc.gains.into_iter().enumerate() {
            if g.stage != k {
                return Err(FsnError::Serde(format!("gain entries out of order at {k}")));
            }
            let mat = |rows: &Vec<Vec<f64>>| {
                let c = rows.first().map_or(0, |r| r.len());
                linalg::from_rows(rows, rows.len(), c)
                    .ok_or_else(|| FsnError::Serde(format!("ragged gain matrix at stage {k}")))
            };
            e.push([mat(&g.e[0])?, mat(&g.e[1])?]);
            let [f1, f2] = g.f;
            f.push([Vector::from_vec(f1), Vector::from_vec(f2)]);
        }
        let u = doc
            .trajectory
            .u1
            .into_iter()
            .zip(doc.trajectory.u2)
            .map(|(a, b)| [Vector::from_vec(a), Vector::from_vec(b)])
            .collect();
        Ok(FsnOutcome {
            e,
            f,
            params: ParamStack { w: unvecs(doc.v_star), theta: unvecs(doc.mu_star) },
            trajectory: Trajectory {
                x: unvecs(doc.trajectory.x),
                u,
                slack: unvecs(doc.trajectory.slack),
            },
            costs: doc.costs,
            value_offsets: doc.value_offsets,
            lcp: doc.lcp,
            report: doc.report,
            warnings: doc.warnings,
        })
    }

    /// Time series with columns `k, x, u¹, u², v¹, v², μ¹, μ², slack`; the
    /// terminal row leaves the control columns empty.
    pub fn trajectory_csv(&self, spec: &GameSpec) -> String {
        let d = &spec.dims;
        let mut header = vec!["k".to_string()];
        let cols = |prefix: &str, n: usize, h: &mut Vec<String>| {
            for j in 0..n {
                h.push(format!("{prefix}_{}", j + 1));
            }
        };
        cols("x", d.n, &mut header);
        cols("u1", d.m[0], &mut header);
        cols("u2", d.m[1], &mut header);
        cols("v1", d.s[0], &mut header);
        cols("v2", d.s[1], &mut header);
        cols("mu1", d.c[0], &mut header);
        cols("mu2", d.c[1], &mut header);
        cols("slack1", d.c[0], &mut header);
        cols("slack2", d.c[1], &mut header);
        let mut s = header.join(",");
        s.push('\n');
        for k in 0..=d.horizon {
            let mut row = vec![k.to_string()];
            let mut put = |v: &[f64]| row.extend(v.iter().map(|x| format!("{x:.10}")));
            put(self.trajectory.x[k].as_slice());
            if k < d.horizon {
                put(self.trajectory.u[k][0].as_slice());
                put(self.trajectory.u[k][1].as_slice());
            } else {
                row.extend(std::iter::repeat_n(String::new(), d.m_total()));
            }
            let w = &self.params.w[k];
            let th = &self.params.theta[k];
            let sl = &self.trajectory.slack[k];
            let mut put = |v: &[f64]| row.extend(v.iter().map(|x| format!("{x:.10}")));
            put(&w.as_slice()[..d.s[0]]);
            put(&w.as_slice()[d.s[0]..]);
            put(&th.as_slice()[..d.c[0]]);
            put(&th.as_slice()[d.c[0]..]);
            put(&sl.as_slice()[..d.c[0]]);
            put(&sl.as_slice()[d.c[0]..]);
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}
