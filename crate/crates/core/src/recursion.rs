//! Backward sweep of the parametric feedback Stackelberg game.
//!
//! With the simultaneous layer frozen at parameters `(w_k, θ_k)`, each player
//! faces an unconstrained LQ problem whose value is
//! `½xᵀS_k x + s_kᵀx + m_k`. The quadratic parts `S` and the feedback gains
//! `E` do not depend on the parameters; the affine parts `s`, `F`, `m` do,
//! linearly through the matrices `G` and `H`.

use crate::error::{Player, SweepError};
use crate::game::GameSpec;
use crate::linalg::{self, Mat, Vector};

/// Asymmetry of a value matrix tolerated before the sweep fails.
pub const VALUE_SYMMETRY_TOL: f64 = 1e-9;
/// Condition numbers above this produce a warning on the tape.
pub const CONDITION_WARN: f64 = 1e12;

/// Parameter-independent quantities of one sequential stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageGains {
    /// `[Υ¹, Υ²]`, the inverted leader and follower curvature matrices.
    pub upsilon: [Mat; 2],
    /// `Δ = I - B²Υ²B²ᵀS²_{k+1}`.
    pub delta: Mat,
    /// `W = S²B²Υ²R¹²Υ²B²ᵀS² + ΔᵀS¹Δ`, the leader's effective continuation curvature.
    pub w: Mat,
    /// Feedback gains `[E¹, E²]`.
    pub e: [Mat; 2],
    /// Closed-loop matrix `A + B¹E¹ + B²E²`.
    pub a_bar: Mat,
    /// `[B¹ B²]`.
    pub b: Mat,
    /// Maps `(s¹_{k+1}; s²_{k+1})` to `(F¹_k; F²_k)`.
    pub g: Mat,
    /// Maps `(s¹_{k+1}; s²_{k+1})` to its contribution to `(s¹_k; s²_k)`.
    pub h: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecursionTape {
    /// Stages `0..K`.
    pub gains: Vec<StageGains>,
    /// `[S¹_k, S²_k]` for `k = 0..=K`.
    pub s: Vec<[Mat; 2]>,
    /// Ill-conditioning notes; the sweep still succeeds.
    pub warnings: Vec<String>,
}

/// Runs the backward sweep. Fails if a curvature matrix is not positive
/// definite, which means the stage problem of that player is not convex.
pub fn backward_sweep(spec: &GameSpec) -> Result<RecursionTape, SweepError> {
    spec.check_shapes().map_err(|e| SweepError::ShapeMismatch(e.to_string()))?;
    let dims = &spec.dims;
    let n = dims.n;
    let big_k = dims.horizon;
    let mut s_next = [
        spec.stages[big_k].players[0].q.clone(),
        spec.stages[big_k].players[1].q.clone(),
    ];
    let mut s_rev = vec![s_next.clone()];
    let mut gains_rev = Vec::with_capacity(big_k);
    let mut warnings = Vec::new();

    for k in (0..big_k).rev() {
        let st = &spec.stages[k];
        let dy = st.dynamics.as_ref().expect("checked shapes");
        let (a, b1, b2) = (&dy.a, &dy.b[0], &dy.b[1]);
        let r1 = st.players[0].r.as_ref().expect("checked shapes");
        let r2 = st.players[1].r.as_ref().expect("checked shapes");
        let (r11, r12) = (&r1[0], &r1[1]);
        let (r21, r22) = (&r2[0], &r2[1]);
        let [s1, s2] = &s_next;

        // follower
        let curv2 = linalg::symmetrize(&(r22 + b2.transpose() * s2 * b2));
        let ups2 = invert_pd(&curv2, k, Player::Follower, &mut warnings)?;
        let delta = linalg::eye(n) - b2 * &ups2 * b2.transpose() * s2;

        // leader
        let p2 = b2 * &ups2 * b2.transpose();
        let w = linalg::symmetrize(
            &(s2 * b2 * &ups2 * r12 * &ups2 * b2.transpose() * s2
                + delta.transpose() * s1 * &delta),
        );
        let curv1 = linalg::symmetrize(&(r11 + b1.transpose() * &w * b1));
        let ups1 = invert_pd(&curv1, k, Player::Leader, &mut warnings)?;

        let e1 = -(&ups1 * b1.transpose() * &w * a);
        let e2 = -(&ups2 * b2.transpose() * s2 * (a + b1 * &e1));
        let a_bar = a + b1 * &e1 + b2 * &e2;

        // affine maps
        let g11 = -(&ups1 * b1.transpose() * delta.transpose());
        let g12 = -(&ups1
            * b1.transpose()
            * (s2 * b2 * &ups2 * r12 * &ups2 * b2.transpose() - delta.transpose() * s1 * &p2));
        let g21 = -(&ups2 * b2.transpose() * s2 * b1 * &g11);
        let g22 = -(&ups2 * b2.transpose() * (linalg::eye(n) + s2 * b1 * &g12));
        let g = linalg::vstack(&[&linalg::hstack(&[&g11, &g12]), &linalg::hstack(&[&g21, &g22])]);

        // Υ^{ij} = E^jᵀR^{ij} + ĀᵀS^iB^j
        let y11 = e1.transpose() * r11 + a_bar.transpose() * s1 * b1;
        let y12 = e2.transpose() * r12 + a_bar.transpose() * s1 * b2;
        let y21 = e1.transpose() * r21 + a_bar.transpose() * s2 * b1;
        let y22 = e2.transpose() * r22 + a_bar.transpose() * s2 * b2;
        let at = a_bar.transpose();
        let h11 = &y11 * &g11 + &at + &y12 * &g21;
        let h12 = &y11 * &g12 + &y12 * &g22;
        let h21 = &y21 * &g11 + &y22 * &g21;
        let h22 = &y22 * &g22 + &at + &y21 * &g12;
        let h = linalg::vstack(&[&linalg::hstack(&[&h11, &h12]), &linalg::hstack(&[&h21, &h22])]);

        let mut s_k: [Mat; 2] = [linalg::zeros(n, n), linalg::zeros(n, n)];
        for i in 0..2 {
            let pl = &st.players[i];
            let r = pl.r.as_ref().expect("checked shapes");
            let raw = &pl.q
                + e1.transpose() * &r[0] * &e1
                + e2.transpose() * &r[1] * &e2
                + a_bar.transpose() * &s_next[i] * &a_bar;
            let asym = linalg::asymmetry(&raw);
            let scale = 1.0 + linalg::max_abs(&raw);
            if asym > VALUE_SYMMETRY_TOL * scale {
                return Err(SweepError::Asymmetric { stage: k, player: i + 1, asymmetry: asym });
            }
            s_k[i] = linalg::symmetrize(&raw);
        }

        gains_rev.push(StageGains {
            upsilon: [ups1, ups2],
            delta,
            w,
            e: [e1, e2],
            a_bar,
            b: linalg::hstack(&[b1, b2]),
            g,
            h,
        });
        s_rev.push(s_k.clone());
        s_next = s_k;
    }
    gains_rev.reverse();
    s_rev.reverse();
    Ok(RecursionTape { gains: gains_rev, s: s_rev, warnings })
}

fn invert_pd(
    m: &Mat,
    k: usize,
    which: Player,
    warnings: &mut Vec<String>,
) -> Result<Mat, SweepError> {
    if !linalg::is_positive_definite(m, 0.0) {
        return Err(SweepError::IndefiniteUpsilon { stage: k, which });
    }
    let cond = linalg::sym_condition(m);
    if cond > CONDITION_WARN {
        warnings.push(format!("stage {k}: {which} curvature matrix has condition number {cond:.3e}"));
    }
    let inv = linalg::inverse(m).ok_or(SweepError::SingularInverse { stage: k, what: "curvature" })?;
    Ok(linalg::symmetrize(&inv))
}

/// Simultaneous-layer parameters `(w_k, θ_k)` for `k = 0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStack {
    pub w: Vec<Vector>,
    pub theta: Vec<Vector>,
}

impl ParamStack {
    pub fn zeros(spec: &GameSpec) -> Self {
        let k = spec.horizon() + 1;
        ParamStack {
            w: vec![linalg::vzeros(spec.dims.s_total()); k],
            theta: vec![linalg::vzeros(spec.dims.c_total()); k],
        }
    }

    fn check(&self, spec: &GameSpec) -> Result<(), SweepError> {
        let k = spec.horizon() + 1;
        if self.w.len() != k || self.theta.len() != k {
            return Err(SweepError::ShapeMismatch(format!(
                "expected {k} stages, got {} w and {} θ",
                self.w.len(),
                self.theta.len()
            )));
        }
        for t in 0..k {
            if self.w[t].len() != spec.dims.s_total() || self.theta[t].len() != spec.dims.c_total() {
                return Err(SweepError::ShapeMismatch(format!("stage {t} has wrong lengths")));
            }
        }
        Ok(())
    }
}

/// Parameter-dependent parts of the value functions and strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineParts {
    /// `[s¹_k, s²_k]`, `k = 0..=K`.
    pub s: Vec<[Vector; 2]>,
    /// `[F¹_k, F²_k]`, `k = 0..K`.
    pub f: Vec<[Vector; 2]>,
    /// `[m¹_k, m²_k]`, `k = 0..=K`; excludes the simultaneous-layer constants.
    pub m: Vec<[f64; 2]>,
}

/// Direct linear term of stage `k` in the players' parametric costs:
/// `(p¹ + L¹w - M¹ᵀθ¹; p² + L²w - M²ᵀθ²)`.
pub fn stage_linear_term(spec: &GameSpec, k: usize, w: &Vector, theta: &Vector) -> [Vector; 2] {
    let st = &spec.stages[k];
    let mut out = [linalg::vzeros(spec.dims.n), linalg::vzeros(spec.dims.n)];
    for i in 0..2 {
        let pl = &st.players[i];
        let th = theta.rows(spec.dims.own_c(i).start, spec.dims.c[i]).into_owned();
        out[i] = &pl.p + &pl.l * w - pl.m.transpose() * th;
    }
    out
}

/// Evaluates `s`, `F` and `m` for a given parameter stack.
pub fn eval_affine_parts(
    spec: &GameSpec,
    tape: &RecursionTape,
    params: &ParamStack,
) -> Result<AffineParts, SweepError> {
    params.check(spec)?;
    let n = spec.dims.n;
    let (m1, _) = (spec.dims.m[0], spec.dims.m[1]);
    let big_k = spec.horizon();
    let mut s = vec![[linalg::vzeros(n), linalg::vzeros(n)]; big_k + 1];
    let mut f = vec![[linalg::vzeros(0), linalg::vzeros(0)]; big_k];
    let mut m = vec![[0.0, 0.0]; big_k + 1];
    s[big_k] = stage_linear_term(spec, big_k, &params.w[big_k], &params.theta[big_k]);
    for k in (0..big_k).rev() {
        let gk = &tape.gains[k];
        let s_next = linalg::vconcat(&[&s[k + 1][0], &s[k + 1][1]]);
        let f_all = &gk.g * &s_next;
        let f1 = f_all.rows(0, m1).into_owned();
        let f2 = f_all.rows(m1, f_all.len() - m1).into_owned();
        let contrib = &gk.h * &s_next;
        let direct = stage_linear_term(spec, k, &params.w[k], &params.theta[k]);
        let bf = &gk.b * &f_all;
        for i in 0..2 {
            s[k][i] = &direct[i] + contrib.rows(i * n, n);
            let r = spec.stages[k].players[i].r.as_ref().expect("checked shapes");
            let quad_u = 0.5 * (f1.dot(&(&r[0] * &f1)) + f2.dot(&(&r[1] * &f2)));
            let sn = &tape.s[k + 1][i];
            m[k][i] = m[k + 1][i] + quad_u + 0.5 * bf.dot(&(sn * &bf)) + bf.dot(&s[k + 1][i]);
        }
        f[k] = [f1, f2];
    }
    Ok(AffineParts { s, f, m })
}

/// Stage-wise first-order residuals `[leader, follower]` at `(x, u¹, u²)`.
///
/// The follower residual is the gradient of its stage objective in `u²`.
/// The leader residual is the gradient in `u¹` of its objective with the
/// follower's affine reaction substituted. Both are computed from the
/// continuation values directly and do not use the gains.
pub fn foc_residuals_at(
    spec: &GameSpec,
    tape: &RecursionTape,
    parts: &AffineParts,
    k: usize,
    x: &Vector,
    u1: &Vector,
    u2: &Vector,
) -> [f64; 2] {
    let st = &spec.stages[k];
    let dy = st.dynamics.as_ref().expect("sequential stage");
    let (a, b1, b2) = (&dy.a, &dy.b[0], &dy.b[1]);
    let r11 = &st.players[0].r.as_ref().expect("sequential stage")[0];
    let r12 = &st.players[0].r.as_ref().expect("sequential stage")[1];
    let r22 = &st.players[1].r.as_ref().expect("sequential stage")[1];
    let [s1, s2] = &tape.s[k + 1];
    let [ls1, ls2] = &parts.s[k + 1];

    let x_next = a * x + b1 * u1 + b2 * u2;
    let follower = r22 * u2 + b2.transpose() * (s2 * &x_next + ls2);

    // follower reaction to u¹ and its derivative
    let curv2 = r22 + b2.transpose() * s2 * b2;
    let y = a * x + b1 * u1;
    let rhs = -(b2.transpose() * (s2 * &y + ls2));
    let u2r = linalg::solve(&curv2, &rhs).unwrap_or_else(|| linalg::vzeros(b2.ncols()));
    let du2 = match linalg::inverse(&curv2) {
        Some(inv) => -(inv * b2.transpose() * s2 * b1),
        None => linalg::zeros(b2.ncols(), b1.ncols()),
    };
    let xr = &y + b2 * &u2r;
    let dx = b1 + b2 * &du2;
    let leader = r11 * u1 + du2.transpose() * (r12 * &u2r) + dx.transpose() * (s1 * &xr + ls1);
    [linalg::vmax_abs(&leader), linalg::vmax_abs(&follower)]
}

/// [`foc_residuals_at`] with the strategies `u = E x + F` of the tape.
pub fn foc_residuals(
    spec: &GameSpec,
    tape: &RecursionTape,
    parts: &AffineParts,
    k: usize,
    x: &Vector,
) -> [f64; 2] {
    let g = &tape.gains[k];
    let u1 = &g.e[0] * x + &parts.f[k][0];
    let u2 = &g.e[1] * x + &parts.f[k][1];
    foc_residuals_at(spec, tape, parts, k, x, &u1, &u2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Dimensions, Dynamics, PlayerStage, StageData};

    fn scalar(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    /// One state, one control each, no simultaneous layer.
    fn scalar_game(a: f64, b: [f64; 2], q: [f64; 2], r: [[f64; 2]; 2], qk: [f64; 2], k: usize) -> GameSpec {
        let dims = Dimensions { n: 1, m: [1, 1], s: [0, 0], c: [0, 0], horizon: k };
        let player = |i: usize, terminal: bool| PlayerStage {
            q: scalar(if terminal { qk[i] } else { q[i] }),
            p: linalg::vzeros(1),
            r: if terminal { None } else { Some([scalar(r[i][0]), scalar(r[i][1])]) },
            d_quad: linalg::zeros(0, 0),
            l: linalg::zeros(1, 0),
            d_lin: linalg::vzeros(0),
            m: linalg::zeros(0, 1),
            n: linalg::zeros(0, 0),
            r_con: linalg::vzeros(0),
        };
        let stages = (0..=k)
            .map(|t| {
                let term = t == k;
                StageData {
                    dynamics: if term {
                        None
                    } else {
                        Some(Dynamics { a: scalar(a), b: [scalar(b[0]), scalar(b[1])] })
                    },
                    players: [player(0, term), player(1, term)],
                }
            })
            .collect();
        GameSpec::new(dims, stages, Vector::from_element(1, 1.0)).unwrap()
    }

    #[test]
    fn scalar_stackelberg_closed_form() {
        // Derived by hand for n = m = 1, K = 1, zero cross costs:
        //   follower: u2 = -b2 s2 (a x + b1 u1) / (r22 + b2² s2)
        //   leader:   E1 = -b1 W a / (r11 + b1² W),  W = s1 (1 - b2² s2 Υ2)²
        let (a, b1, b2) = (0.9, 1.0, 0.5);
        let (r11, r22) = (1.0, 2.0);
        let (s1, s2) = (3.0, 1.5);
        let spec = scalar_game(a, [b1, b2], [0.0, 0.0], [[r11, 0.0], [0.0, r22]], [s1, s2], 1);
        let tape = backward_sweep(&spec).unwrap();
        let ups2 = 1.0 / (r22 + b2 * b2 * s2);
        let delta = 1.0 - b2 * b2 * s2 * ups2;
        let w = s1 * delta * delta;
        let e1 = -b1 * w * a / (r11 + b1 * b1 * w);
        let e2 = -ups2 * b2 * s2 * (a + b1 * e1);
        let g = &tape.gains[0];
        assert!((g.e[0][(0, 0)] - e1).abs() < 1e-14);
        assert!((g.e[1][(0, 0)] - e2).abs() < 1e-14);
        let abar = a + b1 * e1 + b2 * e2;
        let s1_0 = r11 * e1 * e1 + abar * abar * s1;
        let s2_0 = r22 * e2 * e2 + abar * abar * s2;
        assert!((tape.s[0][0][(0, 0)] - s1_0).abs() < 1e-13);
        assert!((tape.s[0][1][(0, 0)] - s2_0).abs() < 1e-13);
    }

    #[test]
    fn zero_input_gives_zero_gains() {
        let spec = scalar_game(0.7, [0.0, 0.0], [1.0, 2.0], [[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0], 3);
        let tape = backward_sweep(&spec).unwrap();
        for g in &tape.gains {
            assert_eq!(g.e[0][(0, 0)], 0.0);
            assert_eq!(g.e[1][(0, 0)], 0.0);
            assert!((g.a_bar[(0, 0)] - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn non_convex_follower_is_rejected() {
        let spec = scalar_game(1.0, [1.0, 1.0], [0.0, 0.0], [[1.0, 0.0], [0.0, -1.0]], [0.0, 0.0], 1);
        assert_eq!(
            backward_sweep(&spec).unwrap_err(),
            SweepError::IndefiniteUpsilon { stage: 0, which: Player::Follower }
        );
    }

    #[test]
    fn affine_parts_vanish_without_linear_terms() {
        let spec = scalar_game(0.9, [1.0, 0.5], [1.0, 1.0], [[1.0, 0.2], [0.3, 1.0]], [2.0, 1.0], 4);
        let tape = backward_sweep(&spec).unwrap();
        let parts = eval_affine_parts(&spec, &tape, &ParamStack::zeros(&spec)).unwrap();
        for k in 0..=4 {
            assert_eq!(parts.s[k][0][0], 0.0);
            assert_eq!(parts.m[k][1], 0.0);
        }
    }

    #[test]
    fn gains_satisfy_first_order_conditions() {
        let mut spec =
            scalar_game(1.1, [1.0, -0.4], [0.5, 0.2], [[1.0, 0.6], [0.4, 2.0]], [1.0, 3.0], 3);
        for st in spec.stages.iter_mut() {
            st.players[0].p[0] = 0.3;
            st.players[1].p[0] = -0.7;
        }
        let tape = backward_sweep(&spec).unwrap();
        let parts = eval_affine_parts(&spec, &tape, &ParamStack::zeros(&spec)).unwrap();
        for k in 0..3 {
            for x in [-2.0, 0.5, 4.0] {
                let [l, f] = foc_residuals(&spec, &tape, &parts, k, &Vector::from_element(1, x));
                assert!(l < 1e-12 && f < 1e-12, "stage {k}: {l} {f}");
            }
        }
    }

    #[test]
    fn parameter_stack_shape_is_checked() {
        let spec = scalar_game(1.0, [1.0, 1.0], [0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], 2);
        let tape = backward_sweep(&spec).unwrap();
        let mut params = ParamStack::zeros(&spec);
        params.w.pop();
        assert!(matches!(
            eval_affine_parts(&spec, &tape, &params),
            Err(SweepError::ShapeMismatch(_))
        ));
    }
}
