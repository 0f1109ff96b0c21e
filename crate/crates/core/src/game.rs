//! Constrained linear-quadratic difference game data.
//!
//! Stage costs for player `i` follow the template
//!
//! ```text
//! g_k^i = ½ xᵀQx + pᵀx + ½ Σ_j u_jᵀ R^{ij} u_j + ½ vᵀDv + xᵀLv + dᵀv
//! ```
//!
//! with dynamics `x_{k+1} = A x + B¹u¹ + B²u²` and per-player constraints
//! `M x + N v + r ≥ 0`, `vⁱ ≥ 0`. The terminal stage carries no dynamics and
//! no sequential-control costs.

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AssumptionCheck, GameError};
use crate::linalg::{self, Mat, Vector};

/// Asymmetry tolerated (and removed) when loading quadratic-form blocks.
pub const LOAD_SYMMETRY_TOL: f64 = 1e-9;
/// Asymmetry tolerated by [`validate`].
pub const VALIDATE_SYMMETRY_TOL: f64 = 1e-12;
/// Cholesky pivot tolerance for the positive-definiteness check.
pub const PD_PIVOT_TOL: f64 = 1e-10;
/// Smallest admissible singular value of an own-constraint block.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    /// State dimension.
    pub n: usize,
    /// Sequential-control dimension per player.
    pub m: [usize; 2],
    /// Simultaneous-decision dimension per player.
    pub s: [usize; 2],
    /// Constraint rows per player.
    pub c: [usize; 2],
    /// Number of sequential stages; simultaneous stages run `0..=horizon`.
    pub horizon: usize,
}

impl Dimensions {
    pub fn s_total(&self) -> usize {
        self.s[0] + self.s[1]
    }

    pub fn c_total(&self) -> usize {
        self.c[0] + self.c[1]
    }

    pub fn m_total(&self) -> usize {
        self.m[0] + self.m[1]
    }

    /// Coordinates of player `i`'s own simultaneous decisions inside `v`.
    pub fn own_v(&self, i: usize) -> Range<usize> {
        if i == 0 {
            0..self.s[0]
        } else {
            self.s[0]..self.s_total()
        }
    }

    /// Rows of player `i`'s constraints inside the stacked constraint vector.
    pub fn own_c(&self, i: usize) -> Range<usize> {
        if i == 0 {
            0..self.c[0]
        } else {
            self.c[0]..self.c_total()
        }
    }

    /// Dimension of one stage's complementarity problem.
    pub fn stage_lcp_dim(&self) -> usize {
        self.s_total() + self.c_total()
    }

    fn check(&self) -> Result<(), GameError> {
        if self.horizon == 0 {
            return Err(GameError::Invalid("horizon must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dynamics {
    pub a: Mat,
    pub b: [Mat; 2],
}

/// One player's cost and constraint blocks at a stage.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerStage {
    pub q: Mat,
    pub p: Vector,
    /// `[R^{i1}, R^{i2}]`; absent at the terminal stage.
    pub r: Option<[Mat; 2]>,
    /// Quadratic simultaneous-decision cost `D` (s×s).
    pub d_quad: Mat,
    /// State/decision coupling `L` (n×s).
    pub l: Mat,
    /// Linear simultaneous-decision cost `d` (s).
    pub d_lin: Vector,
    /// Constraint rows `M x + N v + r ≥ 0`.
    pub m: Mat,
    pub n: Mat,
    pub r_con: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageData {
    /// `None` at the terminal stage.
    pub dynamics: Option<Dynamics>,
    pub players: [PlayerStage; 2],
}

impl StageData {
    /// Joint simultaneous-layer matrix: player 1's own rows of `D¹` over
    /// player 2's own rows of `D²`.
    pub fn joint_d(&self, dims: &Dimensions) -> Mat {
        let s = dims.s_total();
        let mut out = linalg::zeros(s, s);
        for i in 0..2 {
            let rows = dims.own_v(i);
            out.view_mut((rows.start, 0), (rows.len(), s))
                .copy_from(&self.players[i].d_quad.rows(rows.start, rows.len()));
        }
        out
    }

    /// `[Nⁱ]_i`: columns of player `i`'s constraint rows that act on its own decisions.
    pub fn own_n(&self, dims: &Dimensions, i: usize) -> Mat {
        let cols = dims.own_v(i);
        self.players[i].n.columns(cols.start, cols.len()).into_owned()
    }

    /// `[Lⁱ]_i` (n × s_i).
    pub fn own_l(&self, dims: &Dimensions, i: usize) -> Mat {
        let cols = dims.own_v(i);
        self.players[i].l.columns(cols.start, cols.len()).into_owned()
    }

    /// `[dⁱ]_i` (s_i).
    pub fn own_d_lin(&self, dims: &Dimensions, i: usize) -> Vector {
        let rows = dims.own_v(i);
        self.players[i].d_lin.rows(rows.start, rows.len()).into_owned()
    }

    /// `B = [B¹ B²]`.
    pub fn b_joint(&self) -> Option<Mat> {
        self.dynamics.as_ref().map(|d| linalg::hstack(&[&d.b[0], &d.b[1]]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub dims: Dimensions,
    /// `horizon + 1` stages; the last one has no dynamics.
    pub stages: Vec<StageData>,
    pub x0: Vector,
}

impl GameSpec {
    /// Builds a spec after checking every block shape against `dims`.
    pub fn new(dims: Dimensions, stages: Vec<StageData>, x0: Vector) -> Result<Self, GameError> {
        let spec = GameSpec { dims, stages, x0 };
        spec.check_shapes()?;
        Ok(spec)
    }

    pub fn horizon(&self) -> usize {
        self.dims.horizon
    }

    pub fn check_shapes(&self) -> Result<(), GameError> {
        let d = &self.dims;
        d.check()?;
        if self.stages.len() != d.horizon + 1 {
            return Err(GameError::ShapeMismatch {
                what: "stage count".into(),
                expected: (d.horizon + 1).to_string(),
                found: self.stages.len().to_string(),
            });
        }
        if self.x0.len() != d.n {
            return Err(GameError::shape("x0", (d.n, 1), (self.x0.len(), 1)));
        }
        let (n, s) = (d.n, d.s_total());
        for (k, st) in self.stages.iter().enumerate() {
            let terminal = k == d.horizon;
            match (&st.dynamics, terminal) {
                (Some(_), true) => {
                    return Err(GameError::Invalid(format!("terminal stage {k} carries dynamics")))
                }
                (None, false) => {
                    return Err(GameError::Invalid(format!("stage {k} is missing dynamics")))
                }
                (Some(dy), false) => {
                    expect(format!("A[{k}]"), &dy.a, (n, n))?;
                    for i in 0..2 {
                        expect(format!("B{}[{k}]", i + 1), &dy.b[i], (n, d.m[i]))?;
                    }
                }
                (None, true) => {}
            }
            for (i, pl) in st.players.iter().enumerate() {
                let tag = |name: &str| format!("{name}{}[{k}]", i + 1);
                expect(tag("Q"), &pl.q, (n, n))?;
                expect_v(tag("p"), &pl.p, n)?;
                match (&pl.r, terminal) {
                    (Some(_), true) => {
                        return Err(GameError::Invalid(format!(
                            "terminal stage {k} carries control costs"
                        )))
                    }
                    (None, false) => {
                        return Err(GameError::Invalid(format!(
                            "stage {k} is missing control costs of player {}",
                            i + 1
                        )))
                    }
                    (Some(r), false) => {
                        for j in 0..2 {
                            expect(format!("R{}{}[{k}]", i + 1, j + 1), &r[j], (d.m[j], d.m[j]))?;
                        }
                    }
                    (None, true) => {}
                }
                expect(tag("D"), &pl.d_quad, (s, s))?;
                expect(tag("L"), &pl.l, (n, s))?;
                expect_v(tag("d"), &pl.d_lin, s)?;
                expect(tag("M"), &pl.m, (d.c[i], n))?;
                expect(tag("N"), &pl.n, (d.c[i], s))?;
                expect_v(tag("r"), &pl.r_con, d.c[i])?;
            }
        }
        Ok(())
    }

    /// Subgame starting at stage `k` from state `x`: stages `k..=K` re-indexed from zero.
    pub fn subgame(&self, k: usize, x: Vector) -> Result<GameSpec, GameError> {
        if k >= self.dims.horizon {
            return Err(GameError::Invalid(format!(
                "subgame start {k} must be below the horizon {}",
                self.dims.horizon
            )));
        }
        let mut dims = self.dims;
        dims.horizon -= k;
        GameSpec::new(dims, self.stages[k..].to_vec(), x)
    }

    pub fn from_json_str(s: &str) -> Result<Self, GameError> {
        let doc: GameDoc =
            serde_json::from_str(s).map_err(|e| GameError::Invalid(e.to_string()))?;
        doc.into_spec()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&GameDoc::from_spec(self)).expect("game spec serializes")
    }

    pub fn load(path: &Path) -> Result<Self, GameError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GameError::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json_string())
    }
}

fn expect(what: String, m: &Mat, shape: (usize, usize)) -> Result<(), GameError> {
    if m.shape() != shape {
        return Err(GameError::shape(what, shape, m.shape()));
    }
    Ok(())
}

fn expect_v(what: String, v: &Vector, len: usize) -> Result<(), GameError> {
    if v.len() != len {
        return Err(GameError::shape(what, (len, 1), (v.len(), 1)));
    }
    Ok(())
}

/// Outcome of one structural check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: AssumptionCheck,
    pub stage: usize,
    pub player: Option<usize>,
    pub passed: bool,
    /// Measured quantity: asymmetry, smallest Cholesky pivot or smallest singular value.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn ensure(&self) -> Result<(), GameError> {
        match self.first_failure() {
            Some(c) => Err(GameError::AssumptionViolated { check: c.check, stage: c.stage }),
            None => Ok(()),
        }
    }
}

/// Checks the structural assumptions the solver relies on. Shape problems
/// are errors; assumption failures are reported per check.
///
/// Non-emptiness of the feasible simultaneous set depends on the state and
/// is detected at solve time instead.
pub fn validate(spec: &GameSpec) -> Result<ValidationReport, GameError> {
    spec.check_shapes()?;
    let dims = &spec.dims;
    let mut checks = Vec::new();
    for (k, st) in spec.stages.iter().enumerate() {
        let finite = stage_finite(st) && linalg::vall_finite(&spec.x0);
        checks.push(CheckOutcome {
            check: AssumptionCheck::Finite,
            stage: k,
            player: None,
            passed: finite,
            value: if finite { 0.0 } else { f64::NAN },
        });
        for i in 0..2 {
            let asym = linalg::asymmetry(&st.players[i].q);
            checks.push(CheckOutcome {
                check: AssumptionCheck::Symmetry,
                stage: k,
                player: Some(i + 1),
                passed: asym <= VALIDATE_SYMMETRY_TOL,
                value: asym,
            });
        }
        let jd = st.joint_d(dims);
        let pivot = linalg::cholesky_min_pivot(&(&jd + jd.transpose()), PD_PIVOT_TOL);
        checks.push(CheckOutcome {
            check: AssumptionCheck::PositiveDefinite,
            stage: k,
            player: None,
            passed: finite && pivot > PD_PIVOT_TOL,
            value: pivot,
        });
        for i in 0..2 {
            let sv = linalg::min_singular_value(&st.own_n(dims, i));
            checks.push(CheckOutcome {
                check: AssumptionCheck::FullRowRank,
                stage: k,
                player: Some(i + 1),
                passed: finite && sv > RANK_TOL,
                value: sv,
            });
        }
    }
    Ok(ValidationReport { checks })
}

/// [`validate`] followed by [`ValidationReport::ensure`].
pub fn check_assumptions(spec: &GameSpec) -> Result<(), GameError> {
    validate(spec)?.ensure()
}

fn stage_finite(st: &StageData) -> bool {
    let dyn_ok = st
        .dynamics
        .as_ref()
        .map_or(true, |d| linalg::all_finite(&d.a) && d.b.iter().all(linalg::all_finite));
    dyn_ok
        && st.players.iter().all(|p| {
            linalg::all_finite(&p.q)
                && linalg::vall_finite(&p.p)
                && p.r.as_ref().map_or(true, |r| r.iter().all(linalg::all_finite))
                && linalg::all_finite(&p.d_quad)
                && linalg::all_finite(&p.l)
                && linalg::vall_finite(&p.d_lin)
                && linalg::all_finite(&p.m)
                && linalg::all_finite(&p.n)
                && linalg::vall_finite(&p.r_con)
        })
}

/// Scales the stage-`k` cost blocks (Q, p, R, D, L, d) by `beta^k`.
/// Dynamics and constraints are untouched.
pub fn fold_discount(spec: &GameSpec, beta: f64) -> Result<GameSpec, GameError> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(GameError::InvalidDiscount(beta));
    }
    let mut out = spec.clone();
    for (k, st) in out.stages.iter_mut().enumerate() {
        let f = beta.powi(k as i32);
        for pl in st.players.iter_mut() {
            pl.q *= f;
            pl.p *= f;
            if let Some(r) = pl.r.as_mut() {
                r[0] *= f;
                r[1] *= f;
            }
            pl.d_quad *= f;
            pl.l *= f;
            pl.d_lin *= f;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// JSON document

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameDoc {
    dims: Dimensions,
    x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stages: Option<Vec<StageDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constant_stage: Option<StageDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    overrides: Vec<OverrideDoc>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageDoc {
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    a: Option<Rows>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    b: Option<[Rows; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    players: Option<[PlayerDoc; 2]>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlayerDoc {
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    q: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<Vec<f64>>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    r: Option<[Rows; 2]>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    d_quad: Option<Rows>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    l: Option<Rows>,
    #[serde(rename = "d", default, skip_serializing_if = "Option::is_none")]
    d_lin: Option<Vec<f64>>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    m: Option<Rows>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    n: Option<Rows>,
    #[serde(rename = "r", default, skip_serializing_if = "Option::is_none")]
    r_con: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideDoc {
    stage: usize,
    #[serde(rename = "A", default)]
    a: Option<Rows>,
    #[serde(rename = "B", default)]
    b: Option<[Rows; 2]>,
    #[serde(default)]
    players: Option<[PlayerDoc; 2]>,
}

impl PlayerDoc {
    fn merged(&self, over: &PlayerDoc) -> PlayerDoc {
        PlayerDoc {
            q: over.q.clone().or_else(|| self.q.clone()),
            p: over.p.clone().or_else(|| self.p.clone()),
            r: over.r.clone().or_else(|| self.r.clone()),
            d_quad: over.d_quad.clone().or_else(|| self.d_quad.clone()),
            l: over.l.clone().or_else(|| self.l.clone()),
            d_lin: over.d_lin.clone().or_else(|| self.d_lin.clone()),
            m: over.m.clone().or_else(|| self.m.clone()),
            n: over.n.clone().or_else(|| self.n.clone()),
            r_con: over.r_con.clone().or_else(|| self.r_con.clone()),
        }
    }
}

fn mat_or_zero(rows: &Option<Rows>, shape: (usize, usize), what: String) -> Result<Mat, GameError> {
    match rows {
        None => Ok(linalg::zeros(shape.0, shape.1)),
        Some(r) => {
            let found = (r.len(), r.first().map_or(shape.1, |x| x.len()));
            linalg::from_rows(r, shape.0, shape.1).ok_or_else(|| GameError::shape(what, shape, found))
        }
    }
}

fn vec_or_zero(v: &Option<Vec<f64>>, len: usize, what: String) -> Result<Vector, GameError> {
    match v {
        None => Ok(linalg::vzeros(len)),
        Some(x) if x.len() == len => Ok(Vector::from_column_slice(x)),
        Some(x) => Err(GameError::shape(what, (len, 1), (x.len(), 1))),
    }
}

/// Symmetrizes a quadratic-form block, rejecting it when the asymmetry is
/// larger than serialization round-off.
fn symmetric_block(m: Mat, what: String) -> Result<Mat, GameError> {
    let asym = linalg::asymmetry(&m);
    let scale = 1.0f64.max(linalg::max_abs(&m));
    if asym > LOAD_SYMMETRY_TOL * scale {
        return Err(GameError::Asymmetric { what, asymmetry: asym });
    }
    Ok(linalg::symmetrize(&m))
}

impl StageDoc {
    fn to_stage(&self, dims: &Dimensions, k: usize) -> Result<StageData, GameError> {
        let terminal = k == dims.horizon;
        let (n, s) = (dims.n, dims.s_total());
        let dynamics = if terminal {
            None
        } else {
            let a = self
                .a
                .as_ref()
                .ok_or_else(|| GameError::Invalid(format!("stage {k}: missing A")))?;
            let b = self
                .b
                .as_ref()
                .ok_or_else(|| GameError::Invalid(format!("stage {k}: missing B")))?;
            Some(Dynamics {
                a: mat_or_zero(&Some(a.clone()), (n, n), format!("A[{k}]"))?,
                b: [
                    mat_or_zero(&Some(b[0].clone()), (n, dims.m[0]), format!("B1[{k}]"))?,
                    mat_or_zero(&Some(b[1].clone()), (n, dims.m[1]), format!("B2[{k}]"))?,
                ],
            })
        };
        let empty = [PlayerDoc::default(), PlayerDoc::default()];
        let docs = self.players.as_ref().unwrap_or(&empty);
        let mut players = Vec::with_capacity(2);
        for (i, pd) in docs.iter().enumerate() {
            let tag = |name: &str| format!("{name}{}[{k}]", i + 1);
            let q = symmetric_block(mat_or_zero(&pd.q, (n, n), tag("Q"))?, tag("Q"))?;
            let r = if terminal {
                None
            } else {
                let blocks = pd.r.clone().map(|[a, b]| [Some(a), Some(b)]).unwrap_or([None, None]);
                let mut out = Vec::with_capacity(2);
                for (j, blk) in blocks.iter().enumerate() {
                    let what = format!("R{}{}[{k}]", i + 1, j + 1);
                    let m = mat_or_zero(blk, (dims.m[j], dims.m[j]), what.clone())?;
                    out.push(symmetric_block(m, what)?);
                }
                let r1 = out.pop().unwrap();
                let r0 = out.pop().unwrap();
                Some([r0, r1])
            };
            players.push(PlayerStage {
                q,
                p: vec_or_zero(&pd.p, n, tag("p"))?,
                r,
                d_quad: symmetric_block(mat_or_zero(&pd.d_quad, (s, s), tag("D"))?, tag("D"))?,
                l: mat_or_zero(&pd.l, (n, s), tag("L"))?,
                d_lin: vec_or_zero(&pd.d_lin, s, tag("d"))?,
                m: mat_or_zero(&pd.m, (dims.c[i], n), tag("M"))?,
                n: mat_or_zero(&pd.n, (dims.c[i], s), tag("N"))?,
                r_con: vec_or_zero(&pd.r_con, dims.c[i], tag("r"))?,
            });
        }
        let p1 = players.pop().unwrap();
        let p0 = players.pop().unwrap();
        Ok(StageData { dynamics, players: [p0, p1] })
    }

    fn from_stage(st: &StageData) -> StageDoc {
        let rows = |m: &Mat| Some(linalg::to_rows(m));
        let vecs = |v: &Vector| Some(v.iter().copied().collect::<Vec<f64>>());
        let player = |p: &PlayerStage| PlayerDoc {
            q: rows(&p.q),
            p: vecs(&p.p),
            r: p.r.as_ref().map(|r| [linalg::to_rows(&r[0]), linalg::to_rows(&r[1])]),
            d_quad: rows(&p.d_quad),
            l: rows(&p.l),
            d_lin: vecs(&p.d_lin),
            m: rows(&p.m),
            n: rows(&p.n),
            r_con: vecs(&p.r_con),
        };
        StageDoc {
            a: st.dynamics.as_ref().map(|d| linalg::to_rows(&d.a)),
            b: st
                .dynamics
                .as_ref()
                .map(|d| [linalg::to_rows(&d.b[0]), linalg::to_rows(&d.b[1])]),
            players: Some([player(&st.players[0]), player(&st.players[1])]),
        }
    }
}

impl GameDoc {
    fn into_spec(self) -> Result<GameSpec, GameError> {
        let dims = self.dims;
        dims.check()?;
        let docs: Vec<StageDoc> = match (self.stages, self.constant_stage) {
            (Some(_), Some(_)) => {
                return Err(GameError::Invalid(
                    "give either `stages` or `constant_stage`, not both".into(),
                ))
            }
            (None, None) => {
                return Err(GameError::Invalid("missing `stages` or `constant_stage`".into()))
            }
            (Some(stages), None) => {
                if !self.overrides.is_empty() {
                    return Err(GameError::Invalid(
                        "`overrides` only apply together with `constant_stage`".into(),
                    ));
                }
                stages
            }
            (None, Some(base)) => {
                let mut docs = vec![base; dims.horizon + 1];
                for ov in &self.overrides {
                    let slot = docs.get_mut(ov.stage).ok_or_else(|| {
                        GameError::Invalid(format!("override for stage {} beyond horizon", ov.stage))
                    })?;
                    if ov.a.is_some() {
                        slot.a = ov.a.clone();
                    }
                    if ov.b.is_some() {
                        slot.b = ov.b.clone();
                    }
                    if let Some(pl) = &ov.players {
                        let base_pl = slot.players.clone().unwrap_or_default();
                        slot.players =
                            Some([base_pl[0].merged(&pl[0]), base_pl[1].merged(&pl[1])]);
                    }
                }
                docs
            }
        };
        if docs.len() != dims.horizon + 1 {
            return Err(GameError::ShapeMismatch {
                what: "stage count".into(),
                expected: (dims.horizon + 1).to_string(),
                found: docs.len().to_string(),
            });
        }
        let stages = docs
            .iter()
            .enumerate()
            .map(|(k, d)| d.to_stage(&dims, k))
            .collect::<Result<Vec<_>, _>>()?;
        GameSpec::new(dims, stages, Vector::from_vec(self.x0))
    }

    fn from_spec(spec: &GameSpec) -> GameDoc {
        GameDoc {
            dims: spec.dims,
            x0: spec.x0.iter().copied().collect(),
            stages: Some(spec.stages.iter().map(StageDoc::from_stage).collect()),
            constant_stage: None,
            overrides: Vec::new(),
        }
    }
}
