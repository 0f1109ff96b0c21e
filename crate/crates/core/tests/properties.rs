mod common;

use fsn_core::game::{Dimensions, GameSpec};
use fsn_core::lcp::LemkeOptions;
use fsn_core::linalg::{self, Vector};
use fsn_core::recursion::{backward_sweep, eval_affine_parts, ParamStack};
use fsn_core::solver::{simultaneous_cost, solve_fsn, SolveOptions};
use fsn_core::stage::{enumerate_stage_game, solve_stage_game, StageBlocks};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dims_strategy() -> impl Strategy<Value = Dimensions> {
    (1usize..=3, 1usize..=2, 1usize..=2, 1usize..=2, 1usize..=2, 1usize..=4).prop_flat_map(|(n, m1, m2, s1, s2, k)| {
        (1usize..=s1, 1usize..=s2)
            .prop_map(move |(c1, c2)| Dimensions { n, m: [m1, m2], s: [s1, s2], c: [c1, c2], horizon: k })
    })
}

fn random_params(spec: &GameSpec, rng: &mut ChaCha8Rng) -> ParamStack {
    let mut p = ParamStack::zeros(spec);
    for v in p.w.iter_mut().chain(p.theta.iter_mut()) {
        for x in v.iter_mut() {
            *x = rng.random_range(-2.0..2.0);
        }
    }
    p
}

fn combine(a: &ParamStack, b: &ParamStack, alpha: f64) -> ParamStack {
    let mix = |x: &[Vector], y: &[Vector]| -> Vec<Vector> {
        x.iter().zip(y).map(|(u, v)| u * alpha + v * (1.0 - alpha)).collect()
    };
    ParamStack { w: mix(&a.w, &b.w), theta: mix(&a.theta, &b.theta) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// `s` and `F` are affine in the parameter stack.
    #[test]
    fn affine_parts_are_affine(dims in dims_strategy(), seed in 0u64..1_000_000, alpha in -1.5f64..2.5) {
        let spec = common::random_game(seed, dims);
        let tape = match backward_sweep(&spec) {
            Ok(t) => t,
            Err(_) => return Ok(()),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5);
        let (a, b) = (random_params(&spec, &mut rng), random_params(&spec, &mut rng));
        let pa = eval_affine_parts(&spec, &tape, &a).unwrap();
        let pb = eval_affine_parts(&spec, &tape, &b).unwrap();
        let pc = eval_affine_parts(&spec, &tape, &combine(&a, &b, alpha)).unwrap();
        for k in 0..=spec.horizon() {
            for i in 0..2 {
                let expect = &pa.s[k][i] * alpha + &pb.s[k][i] * (1.0 - alpha);
                let scale = 1.0 + linalg::vmax_abs(&expect);
                prop_assert!(linalg::vmax_abs(&(&pc.s[k][i] - &expect)) <= 1e-10 * scale);
                if k < spec.horizon() {
                    let expect = &pa.f[k][i] * alpha + &pb.f[k][i] * (1.0 - alpha);
                    let scale = 1.0 + linalg::vmax_abs(&expect);
                    prop_assert!(linalg::vmax_abs(&(&pc.f[k][i] - &expect)) <= 1e-10 * scale);
                }
            }
        }
    }

    /// Without state coupling (`L = 0`, `M = 0`) the simultaneous layer
    /// does not move the sequential strategies and its decisions do not
    /// depend on the state.
    #[test]
    fn layers_decouple_without_state_coupling(dims in dims_strategy(), seed in 0u64..1_000_000) {
        let mut spec = common::random_game(seed, dims);
        for st in &mut spec.stages {
            for pl in &mut st.players {
                pl.l.fill(0.0);
                pl.m.fill(0.0);
            }
        }
        let Ok(out) = solve_fsn(&spec, &SolveOptions::default()) else { return Ok(()) };
        prop_assert!(out.report.passed());
        let tape = backward_sweep(&spec).unwrap();
        let free = eval_affine_parts(&spec, &tape, &ParamStack::zeros(&spec)).unwrap();
        for k in 0..spec.horizon() {
            for i in 0..2 {
                prop_assert!(linalg::vmax_abs(&(&out.f[k][i] - &free.f[k][i])) <= 1e-9);
            }
        }
        let lemke = LemkeOptions::default();
        let far = Vector::from_element(spec.dims.n, 3.0);
        for k in 0..=spec.horizon() {
            let here = solve_stage_game(&spec, k, &out.trajectory.x[k], &lemke).unwrap();
            let there = solve_stage_game(&spec, k, &far, &lemke).unwrap();
            prop_assert!(linalg::vmax_abs(&(&here.v - &there.v)) <= 1e-9);
        }
    }

    /// The stage game has exactly one equilibrium decision, and Lemke finds it.
    #[test]
    fn stage_decision_is_unique(dims in dims_strategy(), seed in 0u64..1_000_000) {
        let spec = common::random_game(seed, dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Vector::from_fn(spec.dims.n, |_, _| rng.random_range(-3.0..3.0));
        let k = rng.random_range(0..=spec.horizon());
        let all = enumerate_stage_game(&spec, k, &x, 12).unwrap();
        prop_assert!(!all.is_empty());
        let lemke = solve_stage_game(&spec, k, &x, &LemkeOptions::default()).unwrap();
        for s in &all {
            prop_assert!(linalg::vmax_abs(&(&s.v - &lemke.v)) <= 1e-8);
        }
    }

    /// No feasible unilateral change of a player's own decision lowers its
    /// stage cost.
    #[test]
    fn stage_decisions_are_best_responses(dims in dims_strategy(), seed in 0u64..1_000_000) {
        let spec = common::random_game(seed, dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31));
        let x = Vector::from_fn(spec.dims.n, |_, _| rng.random_range(-3.0..3.0));
        let k = rng.random_range(0..=spec.horizon());
        let sol = solve_stage_game(&spec, k, &x, &LemkeOptions::default()).unwrap();
        let blocks = StageBlocks::new(&spec.dims, &spec.stages[k]);
        for i in 0..2 {
            let own = spec.dims.own_v(i);
            let rows = spec.dims.own_c(i);
            let base = simultaneous_cost(&spec, i, k, &x, &sol.v);
            for _ in 0..200 {
                let mut v = sol.v.clone();
                let scale = [1.0, 0.1, 1e-3][rng.random_range(0..3)];
                for t in own.clone() {
                    v[t] = (v[t] + scale * rng.random_range(-1.0..1.0)).max(0.0);
                }
                let slack = blocks.constraint_slack(&x, &v);
                if rows.clone().any(|r| slack[r] < 0.0) {
                    continue;
                }
                let c = simultaneous_cost(&spec, i, k, &x, &v);
                prop_assert!(c >= base - 1e-9 * (1.0 + base.abs()), "player {i} gains {:.3e}", base - c);
            }
        }
    }
}
