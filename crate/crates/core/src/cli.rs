//! Command-line front end. `fsn --help` lists the subcommands.
//!
//! Exit status: 0 when every verification check passes, 1 when one fails,
//! 2 when no equilibrium can be computed, 3 for malformed input or a
//! violated structural assumption.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::duopoly::{build_duopoly_spec, parse_grid, sweep_csv, table2_sweep, DuopolyParams};
use crate::error::FsnError;
use crate::game::{validate, GameSpec};
use crate::lcp::{self, LcpProblem, LemkeOptions, LemkeOutcome};
use crate::linalg::{self, Mat, Vector};
use crate::recursion::backward_sweep;
use crate::solver::{solve_fsn, verify_equilibrium, FsnOutcome, SolveOptions, VerificationReport, VerifyOptions};
use crate::stage::solve_stage_game;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fsn", version, about = "Feedback Stackelberg-Nash equilibria of constrained LQ difference games")]
pub struct Cli {
    /// Directory for written artifacts.
    #[arg(long, global = true, env = "FSN_OUTPUT_DIR", default_value = ".")]
    pub output_dir: PathBuf,
    #[command(flatten)]
    pub tol: Tolerances,
    #[command(subcommand)]
    pub command: Command,
}

/// Solver and verification tolerances; defaults match the library.
#[derive(Debug, Clone, Args)]
pub struct Tolerances {
    /// Global LCP complementarity, relative to 1 + |q|∞.
    #[arg(long, global = true, default_value_t = 1e-8, value_parser = positive)]
    pub lcp_tol: f64,
    /// Global LCP sign feasibility.
    #[arg(long, global = true, default_value_t = 1e-9, value_parser = positive)]
    pub lcp_feas_tol: f64,
    /// Stage fixed-point error.
    #[arg(long, global = true, default_value_t = 1e-6, value_parser = positive)]
    pub fixed_point_tol: f64,
    /// First-order residuals, relative to 1 + |x_k|∞.
    #[arg(long, global = true, default_value_t = 1e-8, value_parser = positive)]
    pub foc_tol: f64,
    /// Value identity, relative to 1 + |J|.
    #[arg(long, global = true, default_value_t = 1e-6, value_parser = positive)]
    pub value_tol: f64,
    /// Largest admissible gain from a unilateral deviation.
    #[arg(long, global = true, default_value_t = 1e-8, value_parser = positive)]
    pub deviation_tol: f64,
    /// Consistency of stored gains, play and costs with their recomputation.
    #[arg(long, global = true, default_value_t = 1e-9, value_parser = positive)]
    pub consistency_tol: f64,
    /// Smallest admissible Lemke pivot.
    #[arg(long, global = true, default_value_t = 1e-10, value_parser = positive)]
    pub pivot_tol: f64,
    /// Pivot budget (default 50 times the LCP dimension).
    #[arg(long, global = true)]
    pub max_pivots: Option<usize>,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("tolerance must be positive, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

impl Tolerances {
    pub fn solve_options(&self) -> SolveOptions {
        let lemke = LemkeOptions {
            max_pivots: self.max_pivots,
            pivot_tol: self.pivot_tol,
            complementarity_tol: self.lcp_tol,
            feasibility_tol: self.lcp_feas_tol,
        };
        let verify = VerifyOptions {
            lcp_complementarity_tol: self.lcp_tol,
            lcp_feasibility_tol: self.lcp_feas_tol,
            fixed_point_tol: self.fixed_point_tol,
            foc_tol: self.foc_tol,
            value_tol: self.value_tol,
            deviation_tol: self.deviation_tol,
            consistency_tol: self.consistency_tol,
            ..VerifyOptions::default()
        };
        SolveOptions { lemke, verify, skip_verification: false }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a game and write outcome.json, report.txt and trajectory.csv.
    Solve {
        spec: PathBuf,
        /// Skip the verification suite.
        #[arg(long)]
        no_verify: bool,
    },
    /// Re-check a stored outcome against its game.
    Verify { spec: PathBuf, outcome: PathBuf },
    /// Solve one stage game at a given state.
    StageSolve {
        spec: PathBuf,
        #[arg(long)]
        stage: usize,
        /// State as comma-separated values (defaults to x0).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
    },
    /// Dump the backward sweep with spectral summaries.
    Sweep { spec: PathBuf },
    /// Run the duopoly preset.
    Duopoly {
        /// Common spillover rate.
        #[arg(long, conflicts_with = "sweep")]
        lambda: Option<f64>,
        /// Spillover grid `lo:hi:step`; writes table.csv.
        #[arg(long)]
        sweep: Option<String>,
        /// JSON file overriding preset parameters.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Also write the preset game as game.json.
        #[arg(long)]
        write_spec: bool,
    },
    /// Run Lemke on a stored or random LCP and print the pivot outcome.
    LcpDebug {
        /// LCP file `{"M": [[..]], "q": [..]}`.
        #[arg(required_unless_present = "random")]
        lcp: Option<PathBuf>,
        /// Generate a random LCP of this dimension with M + Mᵀ positive definite.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also enumerate complementary bases (dimension ≤ 20).
        #[arg(long)]
        enumerate: bool,
    },
}

/// Failure carrying its exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<FsnError> for CliError {
    fn from(e: FsnError) -> Self {
        let code = match &e {
            FsnError::Game(_) | FsnError::Sweep(_) | FsnError::Serde(_) | FsnError::IndexOutOfRange { .. } => {
                EXIT_INPUT
            }
            _ => EXIT_INFEASIBLE,
        };
        CliError { code, message: e.to_string() }
    }
}

/// Parses `args` and runs the command; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32, CliError> {
    let opts = cli.tol.solve_options();
    let out_dir = &cli.output_dir;
    match &cli.command {
        Command::Solve { spec, no_verify } => {
            let spec = load_spec(spec)?;
            let opts = SolveOptions { skip_verification: *no_verify, ..opts };
            let out = solve_fsn(&spec, &opts)?;
            write_outcome(out_dir, &spec, &out)?;
            println!("J1 = {:.10}", out.costs[0]);
            println!("J2 = {:.10}", out.costs[1]);
            println!("lcp: dim {} pivots {}", out.lcp.dim, out.lcp.pivots);
            Ok(report_status(&out.report))
        }
        Command::Verify { spec, outcome } => {
            let spec = load_spec(spec)?;
            let text = read(outcome)?;
            let out = FsnOutcome::from_json_str(&text)?;
            let rep = verify_equilibrium(&spec, &out, &opts.verify)?;
            print!("{}", report_text(&rep));
            Ok(report_status(&rep))
        }
        Command::StageSolve { spec, stage, x } => {
            let spec = load_spec(spec)?;
            let x = match x {
                Some(v) if v.len() != spec.dims.n => {
                    return Err(CliError::input(format!("--x has {} entries, state dimension is {}", v.len(), spec.dims.n)))
                }
                Some(v) => Vector::from_column_slice(v),
                None => spec.x0.clone(),
            };
            let sol = solve_stage_game(&spec, *stage, &x, &opts.lemke)?;
            println!("stage {}", sol.stage);
            println!("v = {}", fmt_vec(&sol.v));
            println!("theta = {}", fmt_vec(&sol.theta));
            println!("slack = {}", fmt_vec(&sol.slack));
            println!("pivots = {}", sol.pivots);
            println!("residual = {:.3e}", sol.residual.max() + 0.0);
            Ok(EXIT_OK)
        }
        Command::Sweep { spec } => {
            let spec = load_spec(spec)?;
            print!("{}", tape_dump(&spec)?);
            Ok(EXIT_OK)
        }
        Command::Duopoly { lambda, sweep, params, write_spec } => {
            let mut base = match params {
                Some(p) => serde_json::from_str::<DuopolyParams>(&read(p)?)
                    .map_err(|e| CliError::input(format!("{}: {e}", p.display())))?,
                None => DuopolyParams::default(),
            };
            if let Some(grid) = sweep {
                let lambdas = parse_grid(grid).map_err(CliError::input)?;
                for &l in &lambdas {
                    if !(0.0..1.0).contains(&l) {
                        return Err(CliError::input(format!("spillover {l} outside [0, 1)")));
                    }
                }
                let rows = table2_sweep(&base, &lambdas, &opts);
                let csv = sweep_csv(&rows);
                write(out_dir, "table.csv", &csv)?;
                print!("{csv}");
                let bad: Vec<_> = rows.iter().filter(|r| r.status != "ok").collect();
                return Ok(match bad.iter().find(|r| r.status.starts_with("error")) {
                    Some(_) => EXIT_INFEASIBLE,
                    None if bad.is_empty() => EXIT_OK,
                    None => EXIT_VERIFICATION,
                });
            }
            if let Some(l) = lambda {
                base.lambda = [*l, *l];
            }
            let spec = build_duopoly_spec(&base).map_err(FsnError::from)?;
            if *write_spec {
                write(out_dir, "game.json", &spec.to_json_string())?;
            }
            let out = solve_fsn(&spec, &opts)?;
            write_outcome(out_dir, &spec, &out)?;
            for (name, body) in duopoly_panels(&spec, &out) {
                write(out_dir, name, &body)?;
            }
            println!("lambda = {:.6}", base.lambda[0]);
            println!("J1 = {:.10}", out.costs[0]);
            println!("J2 = {:.10}", out.costs[1]);
            Ok(report_status(&out.report))
        }
        Command::LcpDebug { lcp, random, seed, enumerate } => {
            let p = match (lcp, random) {
                (_, Some(d)) => random_lcp(*d, *seed),
                (Some(path), None) => LcpProblem::load(path).map_err(CliError::input)?,
                (None, None) => unreachable!("clap requires one source"),
            };
            print!("{}", lcp_debug_text(&p, &opts.lemke, *enumerate)?);
            Ok(EXIT_OK)
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Loads a game and runs the structural checks; a failed check exits 3.
fn load_spec(path: &Path) -> Result<GameSpec, CliError> {
    let spec = GameSpec::from_json_str(&read(path)?)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let rep = validate(&spec).map_err(FsnError::from)?;
    rep.ensure().map_err(FsnError::from)?;
    Ok(spec)
}

fn write_outcome(dir: &Path, spec: &GameSpec, out: &FsnOutcome) -> Result<(), CliError> {
    write(dir, "outcome.json", &out.to_json_string())?;
    write(dir, "report.txt", &report_text(&out.report))?;
    write(dir, "trajectory.csv", &out.trajectory_csv(spec))
}

fn report_status(rep: &VerificationReport) -> i32 {
    if rep.passed() {
        EXIT_OK
    } else {
        for f in rep.failures() {
            eprintln!("check failed: {f}");
        }
        EXIT_VERIFICATION
    }
}

/// One line per check name with its worst value; failures listed in full.
pub fn report_text(rep: &VerificationReport) -> String {
    let mut names: Vec<&str> = Vec::new();
    for c in &rep.checks {
        if !names.contains(&c.name.as_str()) {
            names.push(&c.name);
        }
    }
    let mut s = String::new();
    for name in names {
        let group: Vec<_> = rep.checks.iter().filter(|c| c.name == name).collect();
        let worst = group.iter().map(|c| c.value / c.threshold).fold(0.0f64, f64::max);
        let ok = group.iter().all(|c| c.passed);
        let _ = writeln!(
            s,
            "{:<28} {:>4} checks  worst/threshold {:.3e}  {}",
            name,
            group.len(),
            worst,
            if ok { "pass" } else { "FAIL" }
        );
    }
    for f in rep.failures() {
        let _ = writeln!(s, "FAILED {f}");
    }
    let _ = writeln!(s, "overall: {}", if rep.passed() { "pass" } else { "FAIL" });
    s
}

fn fmt_vec(v: &Vector) -> String {
    // adding 0.0 turns -0.0 into 0.0
    let parts: Vec<String> = v.iter().map(|x| format!("{:.10}", x + 0.0)).collect();
    format!("[{}]", parts.join(", "))
}

fn spectrum(values: &[f64]) -> String {
    if values.is_empty() {
        return "[]".into();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    format!("[{lo:.6e}, {hi:.6e}]")
}

fn moduli(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).collect()
}

/// Structured text: per stage, eigenvalue ranges of `S`, `Υ`, `Δ` and
/// the closed loop, plus gain norms.
pub fn tape_dump(spec: &GameSpec) -> Result<String, FsnError> {
    let tape = backward_sweep(spec)?;
    let mut s = String::new();
    let _ = writeln!(s, "horizon {}", spec.horizon());
    let k_last = spec.horizon();
    for k in (0..=k_last).rev() {
        let _ = writeln!(s, "stage {k}");
        for i in 0..2 {
            let _ = writeln!(s, "  S{} eig {}", i + 1, spectrum(&linalg::sym_eigenvalues(&tape.s[k][i])));
        }
        if k < k_last {
            let g = &tape.gains[k];
            for i in 0..2 {
                let _ = writeln!(s, "  Upsilon{} eig {}", i + 1, spectrum(&linalg::sym_eigenvalues(&g.upsilon[i])));
            }
            let _ = writeln!(s, "  Delta |eig| {}", spectrum(&moduli(&g.delta)));
            let _ = writeln!(s, "  closed-loop |eig| {}", spectrum(&moduli(&g.a_bar)));
            for i in 0..2 {
                let _ = writeln!(s, "  |E{}|max {:.6e}", i + 1, linalg::max_abs(&g.e[i]));
            }
        }
    }
    for w in &tape.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    Ok(s)
}

/// Plot-ready series for the duopoly: capacities with outputs, knowledge
/// stocks, and investments.
pub fn duopoly_panels(spec: &GameSpec, out: &FsnOutcome) -> Vec<(&'static str, String)> {
    let big_k = spec.horizon();
    let x = &out.trajectory.x;
    let v = out.v_star();
    let mut cap = String::from("k,Y1,Y2,v1,v2\n");
    let mut know = String::from("k,X1,X2\n");
    let mut inv = String::from("k,R1,R2,I1,I2\n");
    for k in 0..=big_k {
        let _ = writeln!(cap, "{k},{:.10},{:.10},{:.10},{:.10}", x[k][2], x[k][3], v[k][0], v[k][1]);
        let _ = writeln!(know, "{k},{:.10},{:.10}", x[k][0], x[k][1]);
        if k < big_k {
            let [u1, u2] = &out.trajectory.u[k];
            let _ = writeln!(inv, "{k},{:.10},{:.10},{:.10},{:.10}", u1[0], u2[0], u1[1], u2[1]);
        }
    }
    vec![("capacities_outputs.csv", cap), ("knowledge.csv", know), ("investments.csv", inv)]
}

/// `M = AAᵀ + S + δI` with `S` skew, so `M + Mᵀ` is positive definite.
pub fn random_lcp(d: usize, seed: u64) -> LcpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Mat::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let b = Mat::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let m = &a * a.transpose() + (&b - b.transpose()) + linalg::eye(d) * 0.1;
    let q = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
    LcpProblem::new(m, q).expect("square and finite")
}

fn lcp_debug_text(p: &LcpProblem, opts: &LemkeOptions, enumerate: bool) -> Result<String, FsnError> {
    let mut s = String::new();
    let _ = writeln!(s, "dim {}", p.dim());
    match lcp::lemke_solve(p, opts)? {
        LemkeOutcome::Solved(sol) => {
            let _ = writeln!(s, "status solved");
            let _ = writeln!(s, "pivots {}", sol.pivots);
            let _ = writeln!(s, "z = {}", fmt_vec(&sol.z));
            let _ = writeln!(s, "w = {}", fmt_vec(&sol.w));
            let _ = writeln!(
                s,
                "complementarity {:.3e} feasibility {:.3e}",
                sol.residual.complementarity + 0.0,
                sol.residual.feasibility + 0.0
            );
        }
        LemkeOutcome::Infeasible(ray) => {
            let _ = writeln!(s, "status secondary ray");
            let _ = writeln!(s, "pivots {}", ray.pivots);
            let _ = writeln!(s, "z0 {:.6e}", ray.z0);
            let _ = writeln!(s, "direction = {}", fmt_vec(&ray.z_direction));
        }
    }
    if enumerate {
        let e = lcp::enumerate_solutions(p, lcp::DEFAULT_ENUMERATION_CAP)?;
        let _ = writeln!(s, "enumeration: {} solution(s){}", e.solutions.len(), if e.degenerate { ", degenerate" } else { "" });
        for sol in &e.solutions {
            let _ = writeln!(s, "  z = {}", fmt_vec(&sol.z));
        }
    }
    Ok(s)
}
