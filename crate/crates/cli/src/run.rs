//! Command dispatch, reports and CSV output.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use stackgov_core::bilevel::{check_local_se, solve_lse, TraceEntry};
use stackgov_core::equilibrium::{
    solve_mixed_commitment_se, solve_nash_support_enum, solve_pure_se, verify_se,
};
use stackgov_core::game::DEFAULT_BR_TOL;
use stackgov_core::governance::{select_setting, solve_governance, GovernanceReport, SolveMode};
use stackgov_core::incentive::{solve_incentive_se, IncentiveGame};
use stackgov_core::smdp::{bellman_residual, solve_stackelberg_mdp};
use stackgov_core::{BimatrixGame, StrategyProfile, TieBreakMode};

use crate::scenario::{governance_config, parse_scenario, BilevelSetup, MixedClaim, ParseError, Payload, ScenarioFile};

pub const TOOL: &str = "stackgov";

const DEFAULT_VERIFY_GRID: usize = 100;
const DEFAULT_TRANSFER_GRID: usize = 11;
const BELLMAN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolveSe,
    SolveNe,
    SolveLse,
    SolveIncentive,
    SolveSmdp,
    SolveGovernance,
    Verify,
}

impl Command {
    /// Payload kind the command accepts; `None` accepts every kind.
    fn payload(self) -> Option<&'static str> {
        match self {
            Command::SolveSe | Command::SolveNe => Some("bimatrix"),
            Command::SolveLse => Some("bilevel"),
            Command::SolveIncentive => Some("incentive"),
            Command::SolveSmdp => Some("smdp"),
            Command::SolveGovernance => Some("governance"),
            Command::Verify => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::SolveSe => "solve-se",
            Command::SolveNe => "solve-ne",
            Command::SolveLse => "solve-lse",
            Command::SolveIncentive => "solve-incentive",
            Command::SolveSmdp => "solve-smdp",
            Command::SolveGovernance => "solve-governance",
            Command::Verify => "verify",
        }
    }
}

/// Command-line settings that take precedence over the scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub grid: Option<usize>,
    pub tie: Option<TieBreakMode>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid setting: {0}")]
    Validation(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_OUTPUT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;
pub const EXIT_SOLVER: i32 = 5;
pub const EXIT_VERIFICATION: i32 = 6;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Parse(ParseError::Invariant { .. }) => EXIT_VALIDATION,
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Output(_) => EXIT_OUTPUT,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Parse(p) => p.kind(),
            CliError::Validation(_) => "validation",
            CliError::Solver(_) => "solver",
            CliError::Output(_) => "output",
        }
    }
}

fn solver_err(e: stackgov_core::Error) -> CliError {
    match e {
        stackgov_core::Error::InvalidArgument(m) => CliError::Validation(m),
        other => CliError::Solver(other.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Command,
    pub source: String,
    pub input_digest: String,
    pub payload_kind: &'static str,
    pub solver: &'static str,
    /// Outcome of the check for `verify`; absent for solve commands.
    pub verified: Option<bool>,
    pub result: Value,
    pub csv: Option<String>,
    pub timing_ms: f64,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.verified == Some(false) {
            EXIT_VERIFICATION
        } else {
            EXIT_OK
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Header plus rows, written with the `csv` crate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    fn new(header: impl IntoIterator<Item = String>) -> Self {
        Self {
            header: header.into_iter().collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let err = |e: &dyn std::fmt::Display| CliError::Output(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(|e| err(&e))?;
        w.write_record(&self.header).map_err(|e| err(&e))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| err(&e))?;
        }
        w.flush().map_err(|e| err(&e))
    }
}

fn cols(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}_{i}"))
}

fn num(v: f64) -> String {
    v.to_string()
}

fn nums(v: &[f64]) -> Vec<String> {
    v.iter().map(|&x| num(x)).collect()
}

struct Outcome {
    solver: &'static str,
    result: Value,
    verified: Option<bool>,
    csv: Option<CsvTable>,
}

/// Loads `path`, runs `command` on it and writes any CSV output.
pub fn run(command: Command, path: &Path, overrides: &Overrides) -> Result<RunReport, CliError> {
    run_with_csv_dir(command, path, overrides, false)
}

/// As [`run`]; with `out_is_dir` the CSV goes to `<out>/<stem>.csv`.
pub fn run_with_csv_dir(command: Command, path: &Path, overrides: &Overrides, out_is_dir: bool) -> Result<RunReport, CliError> {
    let scenario = parse_scenario(path)?;
    if let Some(kind) = command.payload() {
        if scenario.payload.kind() != kind {
            return Err(CliError::Usage(format!(
                "{} expects a {kind} scenario, {} has a {} payload",
                command.name(),
                path.display(),
                scenario.payload.kind()
            )));
        }
    }
    if overrides.grid == Some(0) {
        return Err(CliError::Validation("--grid must be at least 1".into()));
    }
    let start = Instant::now();
    let outcome = dispatch(command, &scenario, overrides)?;
    let timing_ms = start.elapsed().as_secs_f64() * 1e3;

    let csv_path = match (&overrides.out, out_is_dir) {
        (Some(dir), true) => {
            let stem = path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned());
            Some(dir.join(format!("{stem}.csv")))
        }
        (Some(p), false) => Some(p.clone()),
        (None, _) => scenario.csv.clone(),
    };
    let written = match (&outcome.csv, csv_path) {
        (Some(table), Some(p)) => {
            table.write(&p)?;
            Some(p.display().to_string())
        }
        _ => None,
    };

    Ok(RunReport {
        tool: TOOL,
        version: env!("CARGO_PKG_VERSION"),
        command,
        source: path.display().to_string(),
        input_digest: scenario.digest.clone(),
        payload_kind: scenario.payload.kind(),
        solver: outcome.solver,
        verified: outcome.verified,
        result: outcome.result,
        csv: written,
        timing_ms,
    })
}

fn dispatch(command: Command, s: &ScenarioFile, o: &Overrides) -> Result<Outcome, CliError> {
    let tie = o.tie.unwrap_or(s.solver.tie);
    let grid = o.grid.or(s.solver.grid);
    let seed = o.seed.unwrap_or(s.solver.seed);
    match (command, &s.payload) {
        (Command::SolveSe, Payload::Bimatrix(g)) => solve_se(g, tie),
        (Command::SolveNe, Payload::Bimatrix(g)) => solve_ne(g, s.solver.tol),
        (Command::SolveIncentive, Payload::Incentive(g)) => solve_incentive(g, tie, grid),
        (Command::SolveLse, Payload::Bilevel(b)) => solve_bilevel(b, s, seed),
        (Command::SolveSmdp, Payload::Smdp(f)) => solve_smdp(f, tie),
        (Command::SolveGovernance, Payload::Governance(g)) => solve_gov(g, s, grid, seed),
        (Command::Verify, p) => verify(p, s, tie, grid, seed),
        _ => unreachable!("payload kind checked before dispatch"),
    }
}

fn profile_json(p: &StrategyProfile) -> Value {
    json!({
        "leader_strategy": p.leader.probabilities(),
        "follower_action": p.follower,
        "leader_value": p.leader_value,
        "follower_value": p.follower_value,
    })
}

fn profile_row(label: &str, p: &StrategyProfile) -> Vec<String> {
    let mut row = vec![label.to_string(), p.follower.to_string(), num(p.leader_value), num(p.follower_value)];
    row.extend(nums(p.leader.probabilities()));
    row
}

fn solve_se(g: &BimatrixGame, tie: TieBreakMode) -> Result<Outcome, CliError> {
    let mixed = solve_mixed_commitment_se(g).map_err(solver_err)?;
    let pure = solve_pure_se(g, tie).map_err(solver_err)?;
    let (mp, pp) = (mixed.profile().expect("mixed SE profile"), pure.profile().expect("pure SE profile"));
    let mut csv = CsvTable::new(
        ["solution", "follower_action", "leader_value", "follower_value"]
            .map(String::from)
            .into_iter()
            .chain(cols("p", g.leader_actions())),
    );
    csv.push(profile_row("mixed_se", mp));
    csv.push(profile_row("pure_se", pp));
    Ok(Outcome {
        solver: "multiple_lps",
        result: json!({
            "leader_actions": g.leader_actions(),
            "follower_actions": g.follower_actions(),
            "mixed_se": profile_json(mp),
            "lp_statuses": mixed.diagnostics.lp_statuses,
            "lp_pivots": mixed.diagnostics.lp_pivots,
            "pure_se": { "tie": pure_tie(&pure), "profile": profile_json(pp) },
        }),
        verified: None,
        csv: Some(csv),
    })
}

fn pure_tie(r: &stackgov_core::equilibrium::EquilibriumReport) -> Value {
    match &r.equilibrium {
        stackgov_core::equilibrium::Equilibrium::PureSe { mode, .. } => json!(mode),
        _ => Value::Null,
    }
}

fn solve_ne(g: &BimatrixGame, tol: f64) -> Result<Outcome, CliError> {
    let r = solve_nash_support_enum(g, tol).map_err(solver_err)?;
    let (n, m) = (g.leader_actions(), g.follower_actions());
    let mut csv = CsvTable::new(
        ["equilibrium", "leader_value", "follower_value"]
            .map(String::from)
            .into_iter()
            .chain(cols("x", n))
            .chain(cols("y", m)),
    );
    for (k, e) in r.nash().iter().enumerate() {
        let mut row = vec![k.to_string(), num(e.leader_value), num(e.follower_value)];
        row.extend(nums(e.leader.probabilities()));
        row.extend(nums(e.follower.probabilities()));
        csv.push(row);
    }
    let equilibria: Vec<Value> = r
        .nash()
        .iter()
        .map(|e| {
            json!({
                "leader_strategy": e.leader.probabilities(),
                "follower_strategy": e.follower.probabilities(),
                "leader_value": e.leader_value,
                "follower_value": e.follower_value,
            })
        })
        .collect();
    Ok(Outcome {
        solver: "support_enumeration",
        result: json!({ "equilibria": equilibria, "support_pairs": r.diagnostics.candidates }),
        verified: None,
        csv: Some(csv),
    })
}

fn transfer_grid(grid: Option<usize>) -> Result<usize, CliError> {
    let g = grid.unwrap_or(DEFAULT_TRANSFER_GRID);
    if g < 2 {
        return Err(CliError::Validation(format!("transfer grid must be at least 2, got {g}")));
    }
    Ok(g)
}

fn solve_incentive(g: &BimatrixGame, tie: TieBreakMode, grid: Option<usize>) -> Result<Outcome, CliError> {
    let ig = IncentiveGame::new(g, transfer_grid(grid)?).map_err(solver_err)?;
    let sol = solve_incentive_se(&ig, tie).map_err(solver_err)?;
    let base = solve_pure_se(ig.base(), tie).map_err(solver_err)?;
    let base_value = base.profile().expect("pure SE profile").leader_value;
    let mut csv = CsvTable::new(
        ["base_action", "follower_response", "leader_value", "follower_value"]
            .map(String::from)
            .into_iter()
            .chain(cols("t", g.follower_actions())),
    );
    let mut row = vec![
        sol.best.base_action.to_string(),
        sol.follower_response.to_string(),
        num(sol.leader_value),
        num(sol.follower_value),
    ];
    row.extend(nums(&sol.best.transfers));
    csv.push(row);
    Ok(Outcome {
        solver: "transfer_grid_search",
        result: json!({
            "tie": tie,
            "transfer_grid": ig.transfer_grid(),
            "base_action": sol.best.base_action,
            "transfers": sol.best.transfers,
            "follower_response": sol.follower_response,
            "leader_value": sol.leader_value,
            "follower_value": sol.follower_value,
            "candidates": sol.candidates,
            "base_game_value": base_value,
            "gain": sol.leader_value - base_value,
        }),
        verified: None,
        csv: Some(csv),
    })
}

fn trace_csv(trace: &[TraceEntry]) -> CsvTable {
    let (dt, dw) = trace.first().map_or((0, 0), |t| (t.theta.len(), t.omega.len()));
    let mut csv = CsvTable::new(
        std::iter::once("iteration".to_string())
            .chain(cols("leader", dt))
            .chain(cols("follower", dw))
            .chain(["leader_value", "follower_value", "grad_norm"].map(String::from)),
    );
    for t in trace {
        let mut row = vec![t.iteration.to_string()];
        row.extend(nums(&t.theta));
        row.extend(nums(&t.omega));
        row.extend([num(t.leader_value), num(t.follower_value), num(t.grad_norm)]);
        csv.push(row);
    }
    csv
}

struct LseRun {
    result: Value,
    passed: bool,
    csv: CsvTable,
}

fn lse_run(b: &BilevelSetup, s: &ScenarioFile, seed: u64) -> Result<LseRun, CliError> {
    let cfg = &s.solver.lse;
    let pt = solve_lse(&b.problem, &b.theta0, cfg).map_err(solver_err)?;
    let check = check_local_se(&b.problem, &pt, s.solver.check_radius, s.solver.check_samples, s.solver.check_tol, seed, cfg)
        .map_err(solver_err)?;
    let result = json!({
        "theta": pt.theta,
        "omega": pt.omega,
        "leader_value": pt.leader_value,
        "follower_value": pt.follower_value,
        "converged": pt.converged,
        "iterations": pt.iterations,
        "hypergradient": cfg.hypergradient,
        "follower_multimodal": pt.follower_multimodal,
        "local_check": {
            "passed": check,
            "radius": s.solver.check_radius,
            "samples": s.solver.check_samples,
            "tol": s.solver.check_tol,
            "seed": seed,
        },
        "trace_len": pt.trace.len(),
    });
    Ok(LseRun {
        result,
        passed: pt.converged && check,
        csv: trace_csv(&pt.trace),
    })
}

fn solve_bilevel(b: &BilevelSetup, s: &ScenarioFile, seed: u64) -> Result<Outcome, CliError> {
    let r = lse_run(b, s, seed)?;
    Ok(Outcome {
        solver: "projected_hypergradient",
        result: r.result,
        verified: None,
        csv: Some(r.csv),
    })
}

fn solve_smdp(f: &stackgov_core::smdp::StackelbergMdpFamily, tie: TieBreakMode) -> Result<Outcome, CliError> {
    let sol = solve_stackelberg_mdp(f, tie).map_err(solver_err)?;
    let mut csv = CsvTable::new(
        ["leader_action", "step", "state", "follower_action", "follower_value", "leader_value"].map(String::from),
    );
    for (i, dp) in sol.solutions.iter().enumerate() {
        for (h, by_state) in dp.policy.0.iter().enumerate() {
            for (st, &a) in by_state.iter().enumerate() {
                csv.push(vec![
                    i.to_string(),
                    h.to_string(),
                    st.to_string(),
                    a.to_string(),
                    num(dp.follower_values[h][st]),
                    num(dp.leader_values[h][st]),
                ]);
            }
        }
    }
    let per_action: Vec<Value> = sol
        .per_action
        .iter()
        .enumerate()
        .map(|(i, (l, fv))| json!({ "leader_action": i, "leader_value": l, "follower_value": fv }))
        .collect();
    Ok(Outcome {
        solver: "backward_induction",
        result: json!({
            "tie": tie,
            "leader_action": sol.leader_action,
            "leader_value": sol.leader_value,
            "follower_value": sol.follower_value,
            "policy": sol.policy.0,
            "per_action": per_action,
        }),
        verified: None,
        csv: Some(csv),
    })
}

fn governance_report(
    g: &stackgov_core::governance::GovernanceScenario,
    s: &ScenarioFile,
    grid: Option<usize>,
    seed: u64,
) -> Result<GovernanceReport, CliError> {
    let mut scenario = g.clone();
    scenario.solver = governance_config(&s.solver, grid);
    scenario.solver.seed = seed;
    let assignment = select_setting(&scenario, None).map_err(solver_err)?;
    solve_governance(&scenario, &assignment).map_err(solver_err)
}

fn governance_json(r: &GovernanceReport) -> Value {
    json!({
        "assignment": r.assignment,
        "leader": r.leader,
        "pi": r.pi,
        "omega": r.omega,
        "capability": r.capability.0,
        "firm_return": r.firm_return,
        "regulator_loss": r.regulator_loss,
        "leader_objective": r.leader_objective(),
        "local_check": r.local_check,
        "diagnostics": r.diagnostics,
        "trace_len": r.trace.len(),
    })
}

fn governance_solver(r: &GovernanceReport) -> &'static str {
    match r.diagnostics.mode {
        SolveMode::Continuous => "projected_hypergradient",
        SolveMode::Finite => "finite_grid_commitment",
    }
}

fn solve_gov(
    g: &stackgov_core::governance::GovernanceScenario,
    s: &ScenarioFile,
    grid: Option<usize>,
    seed: u64,
) -> Result<Outcome, CliError> {
    let r = governance_report(g, s, grid, seed)?;
    Ok(Outcome {
        solver: governance_solver(&r),
        result: governance_json(&r),
        verified: None,
        csv: Some(trace_csv(&r.trace)),
    })
}

fn claimed_profile(g: &BimatrixGame, c: &MixedClaim) -> Result<StrategyProfile, CliError> {
    let (leader_value, follower_value) = g.expected_payoffs(&c.leader, c.follower_action).map_err(solver_err)?;
    Ok(StrategyProfile {
        leader: c.leader.clone(),
        follower: c.follower_action,
        leader_value,
        follower_value,
    })
}

fn verify(p: &Payload, s: &ScenarioFile, tie: TieBreakMode, grid: Option<usize>, seed: u64) -> Result<Outcome, CliError> {
    match p {
        Payload::Bimatrix(g) => {
            let grid = grid.unwrap_or(DEFAULT_VERIFY_GRID);
            let tol = s.solver.verify_tol;
            let (target, profile, mode) = match &s.claim {
                Some(c) => ("claim", claimed_profile(g, c)?, tie),
                None => {
                    let r = solve_mixed_commitment_se(g).map_err(solver_err)?;
                    ("mixed_se", r.profile().expect("mixed SE profile").clone(), TieBreakMode::Optimistic)
                }
            };
            let passed = verify_se(g, &profile, mode, grid, tol).map_err(solver_err)?;
            let pure = solve_pure_se(g, tie).map_err(solver_err)?;
            let pure_passed = verify_se(g, pure.profile().expect("pure SE profile"), tie, 1, DEFAULT_BR_TOL)
                .map_err(solver_err)?;
            Ok(Outcome {
                solver: "grid_verification",
                result: json!({
                    "target": target,
                    "tie": mode,
                    "grid": grid,
                    "tol": tol,
                    "profile": profile_json(&profile),
                    "passed": passed,
                    "pure_se_passed": pure_passed,
                }),
                verified: Some(passed && pure_passed),
                csv: None,
            })
        }
        Payload::Incentive(g) => {
            let ig = IncentiveGame::new(g, transfer_grid(grid)?).map_err(solver_err)?;
            let sol = solve_incentive_se(&ig, tie).map_err(solver_err)?;
            let replay = ig.respond(&sol.best, tie).map_err(solver_err)?;
            let base = solve_pure_se(ig.base(), tie).map_err(solver_err)?;
            let gain = sol.leader_value - base.profile().expect("pure SE profile").leader_value;
            let consistent = replay == (sol.follower_response, sol.leader_value, sol.follower_value);
            Ok(Outcome {
                solver: "incentive_replay",
                result: json!({ "tie": tie, "replay_consistent": consistent, "gain": gain }),
                verified: Some(consistent && gain >= -1e-9),
                csv: None,
            })
        }
        Payload::Bilevel(b) => {
            let r = lse_run(b, s, seed)?;
            Ok(Outcome {
                solver: "local_se_check",
                result: r.result,
                verified: Some(r.passed),
                csv: None,
            })
        }
        Payload::Governance(g) => {
            let r = governance_report(g, s, grid, seed)?;
            let passed = r.diagnostics.converged && r.local_check.unwrap_or(true);
            Ok(Outcome {
                solver: "local_se_check",
                result: governance_json(&r),
                verified: Some(passed),
                csv: None,
            })
        }
        Payload::Smdp(f) => {
            let sol = solve_stackelberg_mdp(f, tie).map_err(solver_err)?;
            let residuals: Vec<f64> = f.mdps.iter().zip(&sol.solutions).map(|(m, dp)| bellman_residual(m, dp)).collect();
            let passed = residuals.iter().all(|&r| r <= BELLMAN_TOL);
            Ok(Outcome {
                solver: "bellman_replay",
                result: json!({ "tie": tie, "bellman_residuals": residuals, "tol": BELLMAN_TOL }),
                verified: Some(passed),
                csv: None,
            })
        }
    }
}

/// One batch entry: a report or the error that stopped it.
pub fn batch_entry(path: &Path, r: &Result<RunReport, CliError>) -> Value {
    match r {
        Ok(rep) => serde_json::to_value(rep).expect("reports serialize"),
        Err(e) => json!({
            "source": path.display().to_string(),
            "error": { "kind": e.kind(), "message": e.to_string() },
            "exit_code": e.exit_code(),
        }),
    }
}

/// Runs every path on its own thread; results come back in input order.
pub fn run_batch(command: Command, paths: &[PathBuf], overrides: &Overrides) -> Vec<Result<RunReport, CliError>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = paths
            .iter()
            .map(|p| scope.spawn(move || run_with_csv_dir(command, p, overrides, true)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Solver("worker thread panicked".into()))))
            .collect()
    })
}

/// Exit status of a batch: the first failure in input order, else success.
pub fn batch_exit_code(results: &[Result<RunReport, CliError>]) -> i32 {
    results
        .iter()
        .map(|r| match r {
            Ok(rep) => rep.exit_code(),
            Err(e) => e.exit_code(),
        })
        .find(|&c| c != EXIT_OK)
        .unwrap_or(EXIT_OK)
}
