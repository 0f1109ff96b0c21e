//! Linear complementarity problems: find `z ≥ 0` with `w = Mz + q ≥ 0` and
//! `zᵀw = 0`.
//!
//! [`lemke_solve`] runs Lemke's complementary pivoting on a dense tableau with
//! a lexicographic ratio test. [`enumerate_solutions`] tries every
//! complementary basis and is only meant for small problems.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::LcpError;
use crate::linalg::{self, Mat, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct LcpProblem {
    pub m: Mat,
    pub q: Vector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcpResidual {
    /// `max_i |z_i w_i|`.
    pub complementarity: f64,
    /// Largest violation of `z ≥ 0` or `w ≥ 0`.
    pub feasibility: f64,
}

impl LcpResidual {
    pub fn max(&self) -> f64 {
        self.complementarity.max(self.feasibility)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcpSolution {
    pub z: Vector,
    pub w: Vector,
    pub pivots: usize,
    pub residual: LcpResidual,
}

/// Evidence that Lemke's method ended on a secondary ray.
#[derive(Debug, Clone, PartialEq)]
pub struct RayCertificate {
    pub pivots: usize,
    /// Value of the artificial variable when the ray was met.
    pub z0: f64,
    /// Direction of `z` along the ray.
    pub z_direction: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LemkeOutcome {
    Solved(LcpSolution),
    Infeasible(RayCertificate),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemkeOptions {
    /// Pivot cap; `None` means `50 · dim`.
    pub max_pivots: Option<usize>,
    /// Column entries at or below this are not eligible in the ratio test.
    pub pivot_tol: f64,
    /// Acceptance threshold on complementarity, scaled by `1 + |q|∞`.
    pub complementarity_tol: f64,
    /// Acceptance threshold on sign violations.
    pub feasibility_tol: f64,
}

impl Default for LemkeOptions {
    fn default() -> Self {
        LemkeOptions {
            max_pivots: None,
            pivot_tol: 1e-10,
            complementarity_tol: 1e-8,
            feasibility_tol: 1e-9,
        }
    }
}

impl LcpProblem {
    pub fn new(m: Mat, q: Vector) -> Result<Self, LcpError> {
        let p = LcpProblem { m, q };
        p.check()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    fn check(&self) -> Result<(), LcpError> {
        let (r, c) = self.m.shape();
        if r != c || r != self.q.len() {
            return Err(LcpError::ShapeMismatch { rows: r, cols: c, q_len: self.q.len() });
        }
        if !linalg::all_finite(&self.m) || !linalg::vall_finite(&self.q) {
            return Err(LcpError::NonFinite);
        }
        Ok(())
    }

    pub fn residual(&self, z: &Vector) -> LcpResidual {
        let w = &self.m * z + &self.q;
        residual_of(z, &w)
    }

    pub fn to_json_string(&self) -> String {
        let doc = LcpDoc { m: linalg::to_rows(&self.m), q: self.q.iter().copied().collect() };
        serde_json::to_string_pretty(&doc).expect("lcp serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self, String> {
        let doc: LcpDoc = serde_json::from_str(s).map_err(|e| e.to_string())?;
        let d = doc.q.len();
        let m = linalg::from_rows(&doc.m, d, d)
            .ok_or_else(|| format!("M must be {d}x{d} to match q"))?;
        LcpProblem::new(m, Vector::from_vec(doc.q)).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text =
            std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json_str(&text)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LcpDoc {
    #[serde(rename = "M")]
    m: Vec<Vec<f64>>,
    q: Vec<f64>,
}

pub fn residual_of(z: &Vector, w: &Vector) -> LcpResidual {
    let mut comp: f64 = 0.0;
    let mut feas: f64 = 0.0;
    for i in 0..z.len() {
        comp = comp.max((z[i] * w[i]).abs());
        feas = feas.max(-z[i]).max(-w[i]);
    }
    LcpResidual { complementarity: comp, feasibility: feas }
}

/// Solves the LCP with Lemke's method and covering vector `e = 1`.
///
/// A terminal basis is polished by re-solving `M_αα z_α = -q_α` on its
/// support. Termination on a secondary ray yields
/// [`LemkeOutcome::Infeasible`].
pub fn lemke_solve(p: &LcpProblem, opts: &LemkeOptions) -> Result<LemkeOutcome, LcpError> {
    p.check()?;
    let d = p.dim();
    let q_scale = 1.0 + linalg::vmax_abs(&p.q);
    let accept = |r: &LcpResidual| {
        r.complementarity <= opts.complementarity_tol * q_scale
            && r.feasibility <= opts.feasibility_tol
    };

    if p.q.iter().all(|&v| v >= 0.0) {
        let z = linalg::vzeros(d);
        let w = p.q.clone();
        let residual = residual_of(&z, &w);
        return Ok(LemkeOutcome::Solved(LcpSolution { z, w, pivots: 0, residual }));
    }

    // Columns: w_0..w_{d-1}, z_0..z_{d-1}, artificial, rhs. The first d
    // columns double as B⁻¹, which drives the lexicographic tie-break.
    let art = 2 * d;
    let rhs = 2 * d + 1;
    let mut t = linalg::zeros(d, 2 * d + 2);
    for i in 0..d {
        t[(i, i)] = 1.0;
        for j in 0..d {
            t[(i, d + j)] = -p.m[(i, j)];
        }
        t[(i, art)] = -1.0;
        t[(i, rhs)] = p.q[i];
    }
    let mut basis: Vec<usize> = (0..d).collect();
    let max_pivots = opts.max_pivots.unwrap_or(50 * d.max(1));

    // Initial pivot: artificial enters at the lexicographically most negative row.
    let mut row = 0;
    for i in 1..d {
        if lex_less_initial(&t, i, row, rhs, d) {
            row = i;
        }
    }
    pivot(&mut t, row, art);
    let mut leaving = basis[row];
    basis[row] = art;
    let mut pivots = 1;

    loop {
        let entering = complement(leaving, d);
        let Some(r) = ratio_test(&t, &basis, entering, rhs, d, art, opts.pivot_tol) else {
            let mut dir = linalg::vzeros(d);
            if entering >= d && entering < art {
                dir[entering - d] = 1.0;
            }
            let mut z0 = 0.0;
            for (i, &b) in basis.iter().enumerate() {
                if b >= d && b < art {
                    dir[b - d] = -t[(i, entering)];
                }
                if b == art {
                    z0 = t[(i, rhs)];
                }
            }
            return Ok(LemkeOutcome::Infeasible(RayCertificate { pivots, z0, z_direction: dir }));
        };
        if pivots >= max_pivots {
            return Err(LcpError::MaxPivotsExceeded { limit: max_pivots });
        }
        let piv = t[(r, entering)];
        if !piv.is_finite() || piv.abs() <= opts.pivot_tol {
            return Err(LcpError::PivotBreakdown { pivots, pivot: piv });
        }
        pivot(&mut t, r, entering);
        leaving = basis[r];
        basis[r] = entering;
        pivots += 1;
        if leaving == art {
            break;
        }
    }

    let mut z = linalg::vzeros(d);
    for (i, &b) in basis.iter().enumerate() {
        if b >= d && b < art {
            z[b - d] = t[(i, rhs)];
        }
    }
    let support: Vec<usize> = basis.iter().filter(|&&b| b >= d && b < art).map(|&b| b - d).collect();
    let raw = finish(p, z);
    let best = match polish(p, &support) {
        Some(pz) => {
            let pol = finish(p, pz);
            if pol.1.max() <= raw.1.max() {
                pol
            } else {
                raw
            }
        }
        None => raw,
    };
    let (z, residual, w) = (best.0, best.1, best.2);
    if !accept(&residual) {
        return Err(LcpError::Inaccurate {
            complementarity: residual.complementarity,
            feasibility: residual.feasibility,
        });
    }
    Ok(LemkeOutcome::Solved(LcpSolution { z, w, pivots, residual }))
}

/// Clamps round-off negatives of `z` to zero and evaluates `w`.
fn finish(p: &LcpProblem, mut z: Vector) -> (Vector, LcpResidual, Vector) {
    for v in z.iter_mut() {
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }
    let w = &p.m * &z + &p.q;
    let r = residual_of(&z, &w);
    (z, r, w)
}

fn polish(p: &LcpProblem, support: &[usize]) -> Option<Vector> {
    let d = p.dim();
    let k = support.len();
    let mut a = linalg::zeros(k, k);
    let mut b = linalg::vzeros(k);
    for (i, &si) in support.iter().enumerate() {
        for (j, &sj) in support.iter().enumerate() {
            a[(i, j)] = p.m[(si, sj)];
        }
        b[i] = -p.q[si];
    }
    let za = linalg::solve(&a, &b)?;
    let mut z = linalg::vzeros(d);
    for (i, &si) in support.iter().enumerate() {
        z[si] = za[i];
    }
    Some(z)
}

fn complement(var: usize, d: usize) -> usize {
    if var < d {
        var + d
    } else {
        var - d
    }
}

/// Row order for the first pivot: smallest `q_i`, ties broken by the rows of
/// `B⁻¹ = I` scaled by the (unit) column entry.
fn lex_less_initial(t: &Mat, a: usize, b: usize, rhs: usize, d: usize) -> bool {
    if t[(a, rhs)] != t[(b, rhs)] {
        return t[(a, rhs)] < t[(b, rhs)];
    }
    for j in 0..d {
        if t[(a, j)] != t[(b, j)] {
            // rows are negated by the artificial column (-1)
            return -t[(a, j)] < -t[(b, j)];
        }
    }
    false
}

fn ratio_test(
    t: &Mat,
    basis: &[usize],
    col: usize,
    rhs: usize,
    d: usize,
    art: usize,
    tol: f64,
) -> Option<usize> {
    let cand: Vec<usize> = (0..t.nrows()).filter(|&i| t[(i, col)] > tol).collect();
    if cand.is_empty() {
        return None;
    }
    let min_ratio = cand
        .iter()
        .map(|&i| t[(i, rhs)] / t[(i, col)])
        .fold(f64::INFINITY, f64::min);
    let scale = 1.0 + min_ratio.abs();
    let mut ties: Vec<usize> = cand
        .into_iter()
        .filter(|&i| t[(i, rhs)] / t[(i, col)] <= min_ratio + 1e-12 * scale)
        .collect();
    if let Some(&i) = ties.iter().find(|&&i| basis[i] == art) {
        return Some(i);
    }
    // lexicographic tie-break on the rows of B⁻¹
    let mut j = 0;
    while ties.len() > 1 && j < d {
        let best = ties
            .iter()
            .map(|&i| t[(i, j)] / t[(i, col)])
            .fold(f64::INFINITY, f64::min);
        ties.retain(|&i| t[(i, j)] / t[(i, col)] <= best + 1e-14);
        j += 1;
    }
    ties.first().copied()
}

fn pivot(t: &mut Mat, r: usize, c: usize) {
    let piv = t[(r, c)];
    let ncols = t.ncols();
    for j in 0..ncols {
        t[(r, j)] /= piv;
    }
    for i in 0..t.nrows() {
        if i == r {
            continue;
        }
        let f = t[(i, c)];
        if f == 0.0 {
            continue;
        }
        for j in 0..ncols {
            t[(i, j)] -= f * t[(r, j)];
        }
        t[(i, c)] = 0.0;
    }
}

/// All solutions found by basis enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    /// Distinct solutions in lexicographic order of `z`.
    pub solutions: Vec<LcpSolution>,
    /// Set when a singular but consistent basis was met; the solution set may
    /// then contain a continuum represented only by minimum-norm points.
    pub degenerate: bool,
}

pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// Enumerates all `2^d` complementary bases. Refuses dimensions above `cap`.
pub fn enumerate_solutions(p: &LcpProblem, cap: usize) -> Result<Enumeration, LcpError> {
    p.check()?;
    let d = p.dim();
    if d > cap {
        return Err(LcpError::DimTooLarge { dim: d, cap });
    }
    let tol = 1e-9;
    let mut solutions: Vec<LcpSolution> = Vec::new();
    let mut degenerate = false;
    for mask in 0u64..(1u64 << d) {
        let support: Vec<usize> = (0..d).filter(|&i| mask >> i & 1 == 1).collect();
        let k = support.len();
        let mut a = linalg::zeros(k, k);
        let mut b = linalg::vzeros(k);
        for (i, &si) in support.iter().enumerate() {
            for (j, &sj) in support.iter().enumerate() {
                a[(i, j)] = p.m[(si, sj)];
            }
            b[i] = -p.q[si];
        }
        let za = match linalg::solve(&a, &b) {
            Some(x) if (&a * &x - &b).amax() <= 1e-10 * (1.0 + b.amax()) => x,
            _ => {
                // singular: accept the least-squares point only if consistent
                if k == 0 {
                    linalg::vzeros(0)
                } else {
                    let svd = a.clone().svd(true, true);
                    let Ok(x) = svd.solve(&b, 1e-12) else { continue };
                    if (&a * &x - &b).amax() > 1e-9 * (1.0 + b.amax()) {
                        continue;
                    }
                    degenerate = true;
                    x
                }
            }
        };
        let mut z = linalg::vzeros(d);
        for (i, &si) in support.iter().enumerate() {
            z[si] = za[i];
        }
        let w = &p.m * &z + &p.q;
        if z.iter().any(|&v| v < -tol) || w.iter().any(|&v| v < -tol) {
            continue;
        }
        let z = z.map(|v| v.max(0.0));
        let w = &p.m * &z + &p.q;
        let residual = residual_of(&z, &w);
        if residual.complementarity > 1e-8 * (1.0 + p.q.amax()) {
            continue;
        }
        if solutions.iter().any(|s| (&s.z - &z).amax() <= 1e-7 * (1.0 + z.amax())) {
            continue;
        }
        solutions.push(LcpSolution { z, w, pivots: 0, residual });
    }
    solutions.sort_by(|a, b| {
        for i in 0..d {
            match a.z[i].total_cmp(&b.z[i]) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        std::cmp::Ordering::Equal
    });
    Ok(Enumeration { solutions, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(m: &[f64], q: &[f64]) -> LcpProblem {
        let d = q.len();
        LcpProblem::new(Mat::from_row_slice(d, d, m), Vector::from_column_slice(q)).unwrap()
    }

    fn solved(p: &LcpProblem) -> LcpSolution {
        match lemke_solve(p, &LemkeOptions::default()).unwrap() {
            LemkeOutcome::Solved(s) => s,
            other => panic!("expected a solution, got {other:?}"),
        }
    }

    #[test]
    fn nonnegative_q_needs_no_pivots() {
        let s = solved(&problem(&[2.0, 1.0, 1.0, 2.0], &[1.0, 0.0]));
        assert_eq!(s.pivots, 0);
        assert_eq!(s.z, Vector::from_column_slice(&[0.0, 0.0]));
    }

    #[test]
    fn textbook_example() {
        // M = [[2,1],[1,2]], q = (-5,-6): interior solution z = (4/3, 7/3).
        let s = solved(&problem(&[2.0, 1.0, 1.0, 2.0], &[-5.0, -6.0]));
        assert!((s.z[0] - 4.0 / 3.0).abs() < 1e-12);
        assert!((s.z[1] - 7.0 / 3.0).abs() < 1e-12);
        assert!(s.residual.max() < 1e-12);
    }

    #[test]
    fn ray_on_infeasible_problem() {
        // w = -z - 1 can never be nonnegative.
        let p = problem(&[-1.0], &[-1.0]);
        assert!(matches!(
            lemke_solve(&p, &LemkeOptions::default()).unwrap(),
            LemkeOutcome::Infeasible(_)
        ));
        assert!(enumerate_solutions(&p, 20).unwrap().solutions.is_empty());
    }

    #[test]
    fn degenerate_q_terminates() {
        // ties in the initial ratio test
        let s = solved(&problem(&[1.0, 0.0, 0.0, 1.0], &[-1.0, -1.0]));
        assert!((s.z[0] - 1.0).abs() < 1e-12 && (s.z[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_finds_all_solutions() {
        // M = [[1,2],[2,1]], q = (-1,-1) has three solutions.
        let p = problem(&[1.0, 2.0, 2.0, 1.0], &[-1.0, -1.0]);
        let e = enumerate_solutions(&p, 20).unwrap();
        // (1,0), (0,1), (1/3,1/3)
        assert_eq!(e.solutions.len(), 3);
        assert!(!e.degenerate);
        let z0 = &e.solutions[0].z;
        assert!(z0[0].abs() < 1e-12 && (z0[1] - 1.0).abs() < 1e-12);
        let s = solved(&p);
        assert!(e.solutions.iter().any(|e| (&e.z - &s.z).amax() < 1e-9));
    }

    #[test]
    fn enumeration_cap() {
        let p = LcpProblem::new(linalg::eye(21), linalg::vzeros(21)).unwrap();
        assert_eq!(
            enumerate_solutions(&p, 20).unwrap_err(),
            LcpError::DimTooLarge { dim: 21, cap: 20 }
        );
    }

    #[test]
    fn json_round_trip() {
        let p = problem(&[2.0, 1.0, 1.0, 2.0], &[-5.0, -6.0]);
        let back = LcpProblem::from_json_str(&p.to_json_string()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn shape_and_finiteness_errors() {
        assert!(matches!(
            LcpProblem::new(linalg::zeros(2, 3), linalg::vzeros(2)),
            Err(LcpError::ShapeMismatch { .. })
        ));
        let mut m = linalg::eye(1);
        m[(0, 0)] = f64::NAN;
        assert_eq!(LcpProblem::new(m, linalg::vzeros(1)).unwrap_err(), LcpError::NonFinite);
    }
}
