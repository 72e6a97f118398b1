//! Scenario files: TOML with a schema version, exactly one payload table, an
//! optional `[solver]` block and an optional `[output]` block.
//!
//! Loading happens in three passes so that failures are told apart: the file
//! is read, parsed as plain TOML, then deserialized against the schema and
//! finally checked against each payload's own invariants.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use stackgov_core::bilevel::{BilevelProblem, BoxBounds, LseConfig, QuadraticObjective};
use stackgov_core::governance::{
    Domain, FirmModel, GovernanceScenario, GovernanceSolverConfig, RegulatorModel, ScoreRule, SolveMode,
    CAPABILITY_DIMS,
};
use stackgov_core::smdp::{EpisodicMdp, StackelbergMdpFamily};
use stackgov_core::{BimatrixGame, MixedStrategy, Sense, TieBreakMode};

pub const SUPPORTED_VERSIONS: &[u32] = &[1];

const PAYLOAD_KINDS: [&str; 5] = ["bimatrix", "incentive", "bilevel", "governance", "smdp"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{path}: cannot read scenario file: {reason}")]
    Missing { path: String, reason: String },

    #[error("{path}:{line}:{column}: syntax error: {message}")]
    Syntax {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}{}: schema error: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Schema {
        path: String,
        line: Option<usize>,
        message: String,
    },

    #[error("{path}: invalid `{field}`: {message}")]
    Invariant {
        path: String,
        field: String,
        message: String,
    },
}

impl ParseError {
    pub fn kind(&self) -> &'static str {
        match self {
            ParseError::Missing { .. } => "missing",
            ParseError::Syntax { .. } => "syntax",
            ParseError::Schema { .. } => "schema",
            ParseError::Invariant { .. } => "invariant",
        }
    }
}

fn max() -> Sense {
    Sense::Maximize
}

fn min() -> Sense {
    Sense::Minimize
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    version: u32,
    bimatrix: Option<GamePayload>,
    incentive: Option<GamePayload>,
    bilevel: Option<BilevelPayload>,
    governance: Option<GovernancePayload>,
    smdp: Option<SmdpPayload>,
    #[serde(default)]
    solver: SolverBlock,
    #[serde(default)]
    output: OutputBlock,
    claim: Option<Claim>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GamePayload {
    leader_payoffs: Vec<Vec<f64>>,
    follower_payoffs: Vec<Vec<f64>>,
    #[serde(default = "max")]
    leader_sense: Sense,
    #[serde(default = "max")]
    follower_sense: Sense,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadraticPayload {
    hessian: Vec<Vec<f64>>,
    linear: Vec<f64>,
    #[serde(default)]
    constant: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BilevelPayload {
    #[serde(default = "min")]
    leader_sense: Sense,
    #[serde(default = "min")]
    follower_sense: Sense,
    leader_box: Vec<(f64, f64)>,
    follower_box: Vec<(f64, f64)>,
    theta0: Option<Vec<f64>>,
    leader: QuadraticPayload,
    follower: QuadraticPayload,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GovernancePayload {
    firm: FirmModel,
    regulator: RegulatorModel,
    domain: Domain,
    threshold: f64,
    #[serde(default)]
    score_rule: ScoreRule,
    reference_strategy: Option<Vec<f64>>,
    stringency_box: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SmdpPayload {
    mdps: Vec<EpisodicMdp>,
}

/// Solver settings shared by all commands; each command reads the fields it
/// needs.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub tie: TieBreakMode,
    /// Verification grid, transfer grid or governance finite grid, depending
    /// on the command. Each command has its own default.
    pub grid: Option<usize>,
    /// Nash support-enumeration tolerance.
    pub tol: f64,
    pub verify_tol: f64,
    pub seed: u64,
    pub lse: LseConfig,
    pub mode: SolveMode,
    pub check_radius: f64,
    pub check_samples: usize,
    pub check_tol: f64,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let g = GovernanceSolverConfig::default();
        Self {
            tie: TieBreakMode::Optimistic,
            grid: None,
            tol: 1e-9,
            verify_tol: 1e-6,
            seed: g.seed,
            lse: g.lse,
            mode: g.mode,
            check_radius: g.check_radius,
            check_samples: g.check_samples,
            check_tol: g.check_tol,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// CSV destination, relative to the scenario file's directory.
    pub csv: Option<PathBuf>,
}

/// A profile to check with `verify` instead of the solver's own answer.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Claim {
    pub leader_strategy: Vec<f64>,
    pub follower_action: usize,
}

#[derive(Debug, Clone)]
pub struct BilevelSetup {
    pub problem: BilevelProblem,
    pub theta0: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum Payload {
    Bimatrix(BimatrixGame),
    Incentive(BimatrixGame),
    Bilevel(BilevelSetup),
    Governance(GovernanceScenario),
    Smdp(StackelbergMdpFamily),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Bimatrix(_) => "bimatrix",
            Payload::Incentive(_) => "incentive",
            Payload::Bilevel(_) => "bilevel",
            Payload::Governance(_) => "governance",
            Payload::Smdp(_) => "smdp",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub source: PathBuf,
    /// `sha256:` followed by the hex digest of the file bytes.
    pub digest: String,
    pub version: u32,
    pub payload: Payload,
    pub solver: SolverBlock,
    /// Resolved against the scenario's directory.
    pub csv: Option<PathBuf>,
    pub claim: Option<MixedClaim>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedClaim {
    pub leader: MixedStrategy,
    pub follower_action: usize,
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioFile, ParseError> {
    let shown = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| ParseError::Missing {
        path: shown.clone(),
        reason: e.to_string(),
    })?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| ParseError::Syntax {
        path: shown.clone(),
        line: 1,
        column: 1,
        message: format!("file is not UTF-8: {e}"),
    })?;
    let mut file = parse_str(&text, &shown)?;
    file.source = path.to_path_buf();
    file.digest = digest(&bytes);
    file.csv = file.csv.map(|p| match path.parent() {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    });
    Ok(file)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parses scenario text; `origin` names it in errors. The returned file has
/// no source path and its CSV path is left unresolved.
pub fn parse_str(text: &str, origin: &str) -> Result<ScenarioFile, ParseError> {
    if let Err(e) = toml::from_str::<toml::Table>(text) {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        return Err(ParseError::Syntax {
            path: origin.into(),
            line,
            column,
            message: e.message().trim().to_string(),
        });
    }
    let raw: RawScenario = toml::from_str(text).map_err(|e| ParseError::Schema {
        path: origin.into(),
        line: e.span().map(|s| line_col(text, s.start).0),
        message: e.message().trim().to_string(),
    })?;
    let schema = |message: String| ParseError::Schema {
        path: origin.into(),
        line: None,
        message,
    };
    if !SUPPORTED_VERSIONS.contains(&raw.version) {
        return Err(schema(format!(
            "unsupported `version` {}, supported: {SUPPORTED_VERSIONS:?}",
            raw.version
        )));
    }
    let present: Vec<&str> = [
        raw.bimatrix.is_some(),
        raw.incentive.is_some(),
        raw.bilevel.is_some(),
        raw.governance.is_some(),
        raw.smdp.is_some(),
    ]
    .iter()
    .zip(PAYLOAD_KINDS)
    .filter_map(|(p, k)| p.then_some(k))
    .collect();
    if present.len() != 1 {
        return Err(schema(format!(
            "expected exactly one payload table among {PAYLOAD_KINDS:?}, found {present:?}"
        )));
    }

    let invariant = |field: &str, message: String| ParseError::Invariant {
        path: origin.into(),
        field: field.into(),
        message,
    };
    validate_solver(&raw.solver).map_err(|(f, m)| invariant(f, m))?;

    let payload = if let Some(g) = raw.bimatrix {
        Payload::Bimatrix(build_game(g).map_err(|m| invariant("bimatrix", m))?)
    } else if let Some(g) = raw.incentive {
        Payload::Incentive(build_game(g).map_err(|m| invariant("incentive", m))?)
    } else if let Some(b) = raw.bilevel {
        Payload::Bilevel(build_bilevel(b).map_err(|(f, m)| invariant(&f, m))?)
    } else if let Some(g) = raw.governance {
        Payload::Governance(build_governance(g, &raw.solver).map_err(|m| invariant("governance", m))?)
    } else if let Some(s) = raw.smdp {
        Payload::Smdp(build_smdp(s).map_err(|(f, m)| invariant(&f, m))?)
    } else {
        unreachable!("exactly one payload is present")
    };

    let claim = match raw.claim {
        None => None,
        Some(c) => {
            let Payload::Bimatrix(game) = &payload else {
                return Err(invariant("claim", "a claim is only meaningful with a bimatrix payload".into()));
            };
            Some(build_claim(c, game).map_err(|m| invariant("claim", m))?)
        }
    };

    Ok(ScenarioFile {
        source: PathBuf::new(),
        digest: digest(text.as_bytes()),
        version: raw.version,
        payload,
        solver: raw.solver,
        csv: raw.output.csv,
        claim,
    })
}

fn validate_solver(s: &SolverBlock) -> Result<(), (&'static str, String)> {
    s.lse.validate().map_err(|e| ("solver.lse", e.to_string()))?;
    if !(s.tol > 0.0 && s.tol.is_finite()) {
        return Err(("solver.tol", format!("must be positive, got {}", s.tol)));
    }
    if !(s.verify_tol >= 0.0 && s.verify_tol.is_finite()) {
        return Err(("solver.verify_tol", format!("must be non-negative, got {}", s.verify_tol)));
    }
    if !(s.check_radius > 0.0 && s.check_radius.is_finite()) {
        return Err(("solver.check_radius", format!("must be positive, got {}", s.check_radius)));
    }
    if s.check_samples == 0 {
        return Err(("solver.check_samples", "must be at least 1".into()));
    }
    if !(s.check_tol >= 0.0 && s.check_tol.is_finite()) {
        return Err(("solver.check_tol", format!("must be non-negative, got {}", s.check_tol)));
    }
    if s.grid == Some(0) {
        return Err(("solver.grid", "must be at least 1".into()));
    }
    Ok(())
}

fn build_game(g: GamePayload) -> Result<BimatrixGame, String> {
    BimatrixGame::new(g.leader_payoffs, g.follower_payoffs, g.leader_sense, g.follower_sense).map_err(|e| e.to_string())
}

fn build_claim(c: Claim, game: &BimatrixGame) -> Result<MixedClaim, String> {
    if c.leader_strategy.len() != game.leader_actions() {
        return Err(format!(
            "leader_strategy has {} entries for {} leader actions",
            c.leader_strategy.len(),
            game.leader_actions()
        ));
    }
    if c.follower_action >= game.follower_actions() {
        return Err(format!("follower_action {} out of range", c.follower_action));
    }
    let leader = MixedStrategy::new(c.leader_strategy).map_err(|e| e.to_string())?;
    Ok(MixedClaim {
        leader,
        follower_action: c.follower_action,
    })
}

fn build_bilevel(b: BilevelPayload) -> Result<BilevelSetup, (String, String)> {
    let field = |f: &str| format!("bilevel.{f}");
    let leader_box = BoxBounds::new(b.leader_box).map_err(|e| (field("leader_box"), e.to_string()))?;
    let follower_box = BoxBounds::new(b.follower_box).map_err(|e| (field("follower_box"), e.to_string()))?;
    let (dt, dw) = (leader_box.dim(), follower_box.dim());
    let quadratic = |name: &str, q: QuadraticPayload| {
        if q.linear.len() != dt + dw {
            return Err((
                field(name),
                format!("expected {} variables ({dt} leader + {dw} follower), got {}", dt + dw, q.linear.len()),
            ));
        }
        QuadraticObjective::new(dt, q.hessian, q.linear, q.constant).map_err(|e| (field(name), e.to_string()))
    };
    let leader = quadratic("leader", b.leader)?;
    let follower = quadratic("follower", b.follower)?;
    let theta0 = b.theta0.unwrap_or_else(|| leader_box.center());
    if !leader_box.contains(&theta0) {
        return Err((field("theta0"), format!("{theta0:?} lies outside leader_box")));
    }
    let problem = BilevelProblem::new(
        Arc::new(leader),
        Arc::new(follower),
        leader_box,
        follower_box,
        b.leader_sense,
        b.follower_sense,
    )
    .map_err(|e| (field("leader"), e.to_string()))?;
    Ok(BilevelSetup { problem, theta0 })
}

fn build_governance(g: GovernancePayload, solver: &SolverBlock) -> Result<GovernanceScenario, String> {
    let scenario = GovernanceScenario {
        firm: g.firm,
        regulator: g.regulator,
        domain: g.domain,
        threshold: g.threshold,
        score_rule: g.score_rule,
        reference_strategy: g.reference_strategy,
        stringency_box: g.stringency_box.unwrap_or_else(|| vec![(0.0, 1.0); CAPABILITY_DIMS]),
        solver: governance_config(solver, None),
    };
    scenario.validate().map_err(|e| e.to_string())?;
    Ok(scenario)
}

/// Governance solver settings from the shared block; `grid` overrides the
/// finite-mode grid.
pub fn governance_config(s: &SolverBlock, grid: Option<usize>) -> GovernanceSolverConfig {
    let defaults = GovernanceSolverConfig::default();
    GovernanceSolverConfig {
        mode: s.mode,
        lse: s.lse.clone(),
        finite_grid: grid.or(s.grid).unwrap_or(defaults.finite_grid),
        check_radius: s.check_radius,
        check_samples: s.check_samples,
        check_tol: s.check_tol,
        seed: s.seed,
    }
}

fn build_smdp(s: SmdpPayload) -> Result<StackelbergMdpFamily, (String, String)> {
    if s.mdps.is_empty() {
        return Err(("smdp.mdps".into(), "at least one MDP (leader action) is required".into()));
    }
    for (i, m) in s.mdps.iter().enumerate() {
        let violations = m.validate();
        if !violations.is_empty() {
            let listed: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err((format!("smdp.mdps[{i}]"), listed.join("; ")));
        }
    }
    StackelbergMdpFamily::new(s.mdps).map_err(|e| ("smdp.mdps".into(), e.to_string()))
}
