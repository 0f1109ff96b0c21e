//! Dynamic Cournot duopoly with R&D spillovers and capacity limits.
//!
//! State `x = (X¹, X², Y¹, Y²)` holds knowledge stocks and capacities. Each
//! firm invests `uⁱ = (Rⁱ, Iⁱ)` sequentially (firm 1 leads) and then both
//! choose outputs `vⁱ ∈ [0, Yⁱ]` simultaneously.

use serde::{Deserialize, Serialize};

use crate::error::{FsnError, GameError};
use crate::game::{fold_discount, Dimensions, Dynamics, GameSpec, PlayerStage, StageData};
use crate::linalg::{self, Mat, Vector};
use crate::solver::{solve_fsn, SolveOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuopolyParams {
    pub horizon: usize,
    /// Initial demand intercept.
    pub a0: f64,
    /// Initial demand slope.
    pub b0: f64,
    /// Demand growth rate.
    pub eps: f64,
    pub beta: f64,
    /// Spillover `λⁱ`: share of firm `i`'s R&D that reaches its rival.
    pub lambda: [f64; 2],
    /// Knowledge retention.
    pub mu: [f64; 2],
    /// Capacity retention.
    pub delta: [f64; 2],
    /// Cost learning.
    pub gamma: [f64; 2],
    /// R&D cost coefficients.
    pub a: [f64; 2],
    /// Capacity investment cost coefficients.
    pub b: [f64; 2],
    /// Base unit costs.
    pub c: [f64; 2],
    pub alpha_x: [f64; 2],
    pub alpha_y: [f64; 2],
    pub x0: [f64; 2],
    pub y0: [f64; 2],
}

impl Default for DuopolyParams {
    fn default() -> Self {
        DuopolyParams {
            horizon: 14,
            a0: 3.5,
            b0: 0.5,
            eps: 0.015,
            beta: 0.9,
            lambda: [0.1, 0.1],
            mu: [0.8, 0.8],
            delta: [0.85, 0.85],
            gamma: [0.2, 0.2],
            a: [1.0, 1.0],
            b: [1.0, 1.0],
            c: [0.5, 0.5],
            alpha_x: [-0.2, -0.2],
            alpha_y: [-0.25, -0.25],
            x0: [5.0, 5.0],
            y0: [4.0, 4.0],
        }
    }
}

impl DuopolyParams {
    pub fn with_lambda(lambda: f64) -> Self {
        DuopolyParams { lambda: [lambda, lambda], ..Default::default() }
    }

    pub fn demand_intercept(&self, k: usize) -> f64 {
        self.a0 * (1.0 + self.eps).powi(k as i32)
    }

    pub fn demand_slope(&self, k: usize) -> f64 {
        self.b0 / (1.0 + self.eps).powi(k as i32)
    }

    fn check(&self) -> Result<(), GameError> {
        let bad = |msg: &str| Err(GameError::Invalid(format!("duopoly: {msg}")));
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(GameError::InvalidDiscount(self.beta));
        }
        if !(self.b0 > 0.0) {
            return bad("demand slope must be positive");
        }
        for i in 0..2 {
            if !(0.0..1.0).contains(&self.lambda[i]) {
                return bad("spillover must lie in [0, 1)");
            }
            if !(self.mu[i] > 0.0 && self.mu[i] < 1.0) || !(self.delta[i] > 0.0 && self.delta[i] < 1.0) {
                return bad("retention rates must lie in (0, 1)");
            }
        }
        Ok(())
    }
}

pub fn build_duopoly_spec(p: &DuopolyParams) -> Result<GameSpec, GameError> {
    p.check()?;
    let big_k = p.horizon;
    let dims = Dimensions { n: 4, m: [2, 2], s: [1, 1], c: [1, 1], horizon: big_k };
    let a = Mat::from_diagonal(&Vector::from_column_slice(&[p.mu[0], p.mu[1], p.delta[0], p.delta[1]]));
    // X^i gains R^i fully and λ^i of the rival's R^j
    #[rustfmt::skip]
    let b1 = Mat::from_row_slice(4, 2, &[
        1.0, 0.0,
        p.lambda[1], 0.0,
        0.0, 1.0,
        0.0, 0.0,
    ]);
    #[rustfmt::skip]
    let b2 = Mat::from_row_slice(4, 2, &[
        p.lambda[0], 0.0,
        1.0, 0.0,
        0.0, 0.0,
        0.0, 1.0,
    ]);

    let mut stages = Vec::with_capacity(big_k + 1);
    for k in 0..=big_k {
        let terminal = k == big_k;
        let (ab, bb) = (p.demand_intercept(k), p.demand_slope(k));
        let player = |i: usize| {
            let j = 1 - i;
            // cost −P·vⁱ + (cⁱ − γⁱXⁱ)vⁱ
            let mut d_quad = linalg::zeros(2, 2);
            d_quad[(i, i)] = 2.0 * bb;
            d_quad[(i, j)] = bb;
            d_quad[(j, i)] = bb;
            let mut l = linalg::zeros(4, 2);
            l[(i, i)] = -p.gamma[i];
            let mut d_lin = linalg::vzeros(2);
            d_lin[i] = p.c[i] - ab;
            // Yⁱ − vⁱ ≥ 0
            let mut m = linalg::zeros(1, 4);
            m[(0, 2 + i)] = 1.0;
            let mut n = linalg::zeros(1, 2);
            n[(0, i)] = -1.0;
            let mut q = linalg::zeros(4, 4);
            if terminal {
                q[(i, i)] = p.alpha_x[i];
                q[(2 + i, 2 + i)] = p.alpha_y[i];
            }
            let r = if terminal {
                None
            } else {
                let own = Mat::from_diagonal(&Vector::from_column_slice(&[p.a[i], p.b[i]]));
                let mut r = [linalg::zeros(2, 2), linalg::zeros(2, 2)];
                r[i] = own;
                Some(r)
            };
            PlayerStage {
                q,
                p: linalg::vzeros(4),
                r,
                d_quad,
                l,
                d_lin,
                m,
                n,
                r_con: linalg::vzeros(1),
            }
        };
        stages.push(StageData {
            dynamics: if terminal {
                None
            } else {
                Some(Dynamics { a: a.clone(), b: [b1.clone(), b2.clone()] })
            },
            players: [player(0), player(1)],
        });
    }
    let x0 = Vector::from_column_slice(&[p.x0[0], p.x0[1], p.y0[0], p.y0[1]]);
    let spec = GameSpec::new(dims, stages, x0)?;
    fold_discount(&spec, p.beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub j1: f64,
    pub j2: f64,
    /// `ok`, `verification_failed` or an error description.
    pub status: String,
}

/// Solves the preset for each `λ¹ = λ² = λ`, one thread per value.
pub fn table2_sweep(base: &DuopolyParams, lambdas: &[f64], opts: &SolveOptions) -> Vec<SweepRow> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = lambdas
            .iter()
            .map(|&lambda| {
                scope.spawn(move || {
                    let params = DuopolyParams { lambda: [lambda, lambda], ..base.clone() };
                    match sweep_one(&params, opts) {
                        Ok((j, ok)) => SweepRow {
                            lambda,
                            j1: j[0],
                            j2: j[1],
                            status: if ok { "ok".into() } else { "verification_failed".into() },
                        },
                        Err(e) => SweepRow {
                            lambda,
                            j1: f64::NAN,
                            j2: f64::NAN,
                            status: format!("error: {e}"),
                        },
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    })
}

fn sweep_one(params: &DuopolyParams, opts: &SolveOptions) -> Result<([f64; 2], bool), FsnError> {
    let spec = build_duopoly_spec(params)?;
    let out = solve_fsn(&spec, opts)?;
    Ok((out.costs, out.report.passed()))
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("lambda,J1,J2,status\n");
    for r in rows {
        let status = r.status.replace([',', '\n'], ";");
        s.push_str(&format!("{:.6},{:.6},{:.6},{}\n", r.lambda, r.j1, r.j2, status));
    }
    s
}

/// Parses `lo:hi:step` into an inclusive grid, robust to rounding of `step`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected lo:hi:step, got `{text}`"));
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"));
    let (lo, hi, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if !(step > 0.0) || hi < lo || !lo.is_finite() || !hi.is_finite() {
        return Err(format!("invalid grid `{text}`"));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| lo + step * i as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::validate;

    #[test]
    fn preset_shapes_and_blocks() {
        let spec = build_duopoly_spec(&DuopolyParams::default()).unwrap();
        assert_eq!(spec.stages.len(), 15);
        assert!(validate(&spec).unwrap().passed());
        // terminal salvage, discounted by β^K
        let f = 0.9f64.powi(14);
        let q = &spec.stages[14].players[0].q;
        assert!((q[(0, 0)] + 0.2 * f).abs() < 1e-15);
        assert!((q[(2, 2)] + 0.25 * f).abs() < 1e-15);
        assert_eq!(q[(1, 1)], 0.0);
        // stage 0: D¹ own row (2B̄, B̄)
        let d = &spec.stages[0].players[0].d_quad;
        assert_eq!((d[(0, 0)], d[(0, 1)]), (1.0, 0.5));
        assert_eq!(spec.stages[0].players[0].d_lin[0], 0.5 - 3.5);
    }

    #[test]
    fn pure_demand_game_has_no_coupling() {
        let p = DuopolyParams {
            gamma: [0.0, 0.0],
            c: [0.0, 0.0],
            alpha_x: [0.0, 0.0],
            alpha_y: [0.0, 0.0],
            ..Default::default()
        };
        let spec = build_duopoly_spec(&p).unwrap();
        for st in &spec.stages {
            for pl in &st.players {
                assert_eq!(pl.l.amax(), 0.0);
                assert_eq!(pl.q.amax(), 0.0);
            }
        }
    }

    #[test]
    fn parameter_checks() {
        assert!(build_duopoly_spec(&DuopolyParams { beta: 0.0, ..Default::default() }).is_err());
        assert!(build_duopoly_spec(&DuopolyParams::with_lambda(1.0)).is_err());
        assert!(build_duopoly_spec(&DuopolyParams { b0: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0.10:0.40:0.05").unwrap();
        assert_eq!(g.len(), 7);
        assert!((g[6] - 0.40).abs() < 1e-12);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn csv_formatting() {
        let rows = vec![SweepRow { lambda: 0.1, j1: -35.2466, j2: -31.482, status: "ok".into() }];
        assert_eq!(sweep_csv(&rows), "lambda,J1,J2,status\n0.100000,-35.246600,-31.482000,ok\n");
    }
}
