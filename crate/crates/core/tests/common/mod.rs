//! Seeded random games for integration tests.
#![allow(dead_code)]

use fsn_core::game::{Dimensions, Dynamics, GameSpec, PlayerStage, StageData};
use fsn_core::linalg::{Mat, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mat(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(lo..hi))
}

fn vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

/// Random game meeting the structural assumptions by construction:
/// symmetric PSD state costs, `D + Dᵀ` positive definite through a dominant
/// diagonal, own constraint blocks close to the identity, and own
/// constraint coefficients positive so every stage stays feasible.
/// Requires `c[i] <= s[i]`.
pub fn random_game(seed: u64, dims: Dimensions) -> GameSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, s) = (dims.n, dims.s_total());
    let mut stages = Vec::new();
    for k in 0..=dims.horizon {
        let terminal = k == dims.horizon;
        let dynamics = (!terminal).then(|| Dynamics {
            a: mat(&mut rng, n, n, -0.8, 0.8),
            b: [mat(&mut rng, n, dims.m[0], -1.0, 1.0), mat(&mut rng, n, dims.m[1], -1.0, 1.0)],
        });
        let mut players = Vec::new();
        for i in 0..2 {
            let g = mat(&mut rng, n, n, -0.7, 0.7);
            let q = &g * g.transpose();
            let r = (!terminal).then(|| {
                let mut r = [Mat::zeros(dims.m[0], dims.m[0]), Mat::zeros(dims.m[1], dims.m[1])];
                for j in 0..2 {
                    let h = mat(&mut rng, dims.m[j], dims.m[j], -0.3, 0.3);
                    let mut blk = &h * h.transpose();
                    if i == j {
                        for t in 0..dims.m[j] {
                            blk[(t, t)] += rng.random_range(0.5..2.0);
                        }
                    }
                    r[j] = blk;
                }
                r
            });
            let own = dims.own_v(i);
            let mut d_quad = mat(&mut rng, s, s, -0.3, 0.3);
            d_quad = (&d_quad + d_quad.transpose()) * 0.5;
            for t in own.clone() {
                d_quad[(t, t)] = rng.random_range(1.0..2.0) + 0.6 * s as f64;
            }
            let mut nmat = mat(&mut rng, dims.c[i], s, -0.3, 0.3);
            for (row, t) in own.clone().take(dims.c[i]).enumerate() {
                nmat[(row, t)] = rng.random_range(0.5..1.5);
            }
            players.push(PlayerStage {
                q,
                p: vec(&mut rng, n, -0.5, 0.5),
                r,
                d_quad,
                l: mat(&mut rng, n, s, -0.5, 0.5),
                d_lin: vec(&mut rng, s, -1.0, 1.0),
                m: mat(&mut rng, dims.c[i], n, -0.5, 0.5),
                n: nmat,
                r_con: vec(&mut rng, dims.c[i], -0.5, 1.0),
            });
        }
        let p2 = players.pop().unwrap();
        let p1 = players.pop().unwrap();
        stages.push(StageData { dynamics, players: [p1, p2] });
    }
    let x0 = vec(&mut rng, n, -2.0, 2.0);
    GameSpec::new(dims, stages, x0).unwrap()
}

pub fn small_dims(n: usize, horizon: usize) -> Dimensions {
    Dimensions { n, m: [1, 1], s: [1, 1], c: [1, 1], horizon }
}
