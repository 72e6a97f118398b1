//! Firm/regulator governance model.
//!
//! The firm picks a strategy `pi` in `[0, 1]^d`; its capability profile is an
//! affine map of `pi` clamped to `[0, 1]^6`. The regulator picks one
//! stringency level per capability dimension. The firm maximizes
//!
//! ```text
//! J = sum_i alpha_i mu_i - sum_i kappa_i omega_i mu_i - beta |pi|^2
//! ```
//!
//! and the regulator minimizes residual risk plus an innovation-drag penalty
//!
//! ```text
//! L = sum_i gamma_i mu_i^p_i (1 - omega_i) + eta sum_i omega_i
//! ```
//!
//! Which player leads is decided by the domain and a capability threshold.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bilevel::{
    check_local_se, solve_lse, BilevelProblem, BoxBounds, HypergradientMode, LseConfig, Objective, TraceEntry,
};
use crate::equilibrium::solve_pure_se;
use crate::error::{invalid, Error, Result};
use crate::game::{BimatrixGame, Sense, TieBreakMode};

pub const CAPABILITY_DIMS: usize = 6;

pub const CAPABILITY_NAMES: [&str; CAPABILITY_DIMS] =
    ["performance", "robustness", "explainability", "fairness", "privacy", "security"];

/// Largest payoff table the finite mode will build.
pub const FINITE_CELL_BUDGET: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapabilityProfile(pub [f64; CAPABILITY_DIMS]);

impl CapabilityProfile {
    pub fn performance(&self) -> f64 {
        self.0[0]
    }

    pub fn robustness(&self) -> f64 {
        self.0[1]
    }

    pub fn explainability(&self) -> f64 {
        self.0[2]
    }

    pub fn fairness(&self) -> f64 {
        self.0[3]
    }

    pub fn privacy(&self) -> f64 {
        self.0[4]
    }

    pub fn security(&self) -> f64 {
        self.0[5]
    }

    pub fn score(&self, rule: ScoreRule) -> f64 {
        match rule {
            ScoreRule::Max => self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ScoreRule::Mean => self.0.iter().sum::<f64>() / CAPABILITY_DIMS as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirmModel {
    /// Six rows (one per capability), `d` columns.
    pub capability_matrix: Vec<Vec<f64>>,
    pub capability_offset: [f64; CAPABILITY_DIMS],
    pub revenue_weights: [f64; CAPABILITY_DIMS],
    pub effort_cost: f64,
}

impl FirmModel {
    pub fn dim(&self) -> usize {
        self.capability_matrix.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.capability_matrix.len() != CAPABILITY_DIMS || d == 0 {
            return Err(invalid(format!("capability_matrix must have {CAPABILITY_DIMS} non-empty rows")));
        }
        if self.capability_matrix.iter().any(|r| r.len() != d) {
            return Err(invalid("capability_matrix rows differ in length"));
        }
        let all = self
            .capability_matrix
            .iter()
            .flatten()
            .chain(&self.capability_offset)
            .chain(&self.revenue_weights)
            .chain(std::iter::once(&self.effort_cost));
        if all.clone().any(|v| !v.is_finite()) {
            return Err(invalid("firm model has non-finite coefficients"));
        }
        if self.revenue_weights.iter().any(|&a| a < 0.0) || self.effort_cost < 0.0 {
            return Err(invalid("revenue weights and effort cost must be non-negative"));
        }
        Ok(())
    }

    fn capability_unchecked(&self, pi: &[f64]) -> [f64; CAPABILITY_DIMS] {
        let mut mu = self.capability_offset;
        for (m, row) in mu.iter_mut().zip(&self.capability_matrix) {
            *m += row.iter().zip(pi).map(|(a, p)| a * p).sum::<f64>();
            *m = m.clamp(0.0, 1.0);
        }
        mu
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegulatorModel {
    pub risk_weights: [f64; CAPABILITY_DIMS],
    pub risk_exponents: [f64; CAPABILITY_DIMS],
    pub compliance_costs: [f64; CAPABILITY_DIMS],
    pub innovation_drag: f64,
}

impl RegulatorModel {
    fn validate(&self) -> Result<()> {
        let coeffs = self
            .risk_weights
            .iter()
            .chain(&self.risk_exponents)
            .chain(&self.compliance_costs)
            .chain(std::iter::once(&self.innovation_drag));
        if coeffs.clone().any(|v| !v.is_finite()) {
            return Err(invalid("regulator model has non-finite coefficients"));
        }
        if self.risk_weights.iter().chain(&self.compliance_costs).any(|&v| v < 0.0) || self.innovation_drag < 0.0 {
            return Err(invalid("risk weights, compliance costs and innovation drag must be non-negative"));
        }
        if self.risk_exponents.iter().any(|&p| p < 1.0) {
            return Err(invalid("risk exponents must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Civil,
    SafetyCritical,
    Military,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreRule {
    #[default]
    Max,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Firm,
    Regulator,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::Firm => Role::Regulator,
            Role::Regulator => Role::Firm,
        }
    }
}

/// The domain x capability combination behind a leader assignment.
/// "Restricted" covers the safety-critical and military domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rationale {
    CivilBelowThreshold,
    CivilAboveThreshold,
    RestrictedBelowThreshold,
    RestrictedAboveThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingAssignment {
    pub leader: Role,
    pub rationale: Rationale,
    pub capability_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    #[default]
    Continuous,
    Finite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GovernanceSolverConfig {
    pub mode: SolveMode,
    pub lse: LseConfig,
    /// Points per free axis in finite mode.
    pub finite_grid: usize,
    pub check_radius: f64,
    pub check_samples: usize,
    pub check_tol: f64,
    pub seed: u64,
}

impl Default for GovernanceSolverConfig {
    fn default() -> Self {
        Self {
            mode: SolveMode::Continuous,
            lse: LseConfig::default(),
            finite_grid: 101,
            check_radius: 0.05,
            check_samples: 200,
            check_tol: 1e-6,
            seed: 0,
        }
    }
}

fn unit_stringency() -> Vec<(f64, f64)> {
    vec![(0.0, 1.0); CAPABILITY_DIMS]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GovernanceScenario {
    pub firm: FirmModel,
    pub regulator: RegulatorModel,
    pub domain: Domain,
    pub threshold: f64,
    #[serde(default)]
    pub score_rule: ScoreRule,
    /// Strategy used for the threshold comparison; box center when absent.
    #[serde(default)]
    pub reference_strategy: Option<Vec<f64>>,
    /// Per-coordinate stringency range, a sub-box of `[0, 1]^6`. Degenerate
    /// intervals fix a coordinate.
    #[serde(default = "unit_stringency")]
    pub stringency_box: Vec<(f64, f64)>,
    #[serde(default)]
    pub solver: GovernanceSolverConfig,
}

impl GovernanceScenario {
    pub fn validate(&self) -> Result<()> {
        self.firm.validate()?;
        self.regulator.validate()?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(invalid(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if self.stringency_box.len() != CAPABILITY_DIMS {
            return Err(invalid(format!("stringency_box needs {CAPABILITY_DIMS} intervals")));
        }
        if self.stringency_box.iter().any(|&(lo, hi)| !(0.0 <= lo && lo <= hi && hi <= 1.0)) {
            return Err(invalid("stringency_box intervals must lie in [0, 1]"));
        }
        if let Some(r) = &self.reference_strategy {
            check_unit_point(r, self.firm.dim(), "reference strategy")?;
        }
        self.solver.lse.validate()?;
        if self.solver.finite_grid < 2 {
            return Err(invalid("finite_grid must be at least 2"));
        }
        if !(self.solver.check_radius > 0.0) || self.solver.check_samples == 0 || !(self.solver.check_tol >= 0.0) {
            return Err(invalid("local check needs a positive radius, samples and a non-negative tolerance"));
        }
        Ok(())
    }

    pub fn strategy_box(&self) -> BoxBounds {
        BoxBounds::unit(self.firm.dim())
    }

    pub fn stringency_bounds(&self) -> BoxBounds {
        BoxBounds::new(self.stringency_box.clone()).expect("validated stringency box")
    }
}

fn check_unit_point(x: &[f64], dim: usize, what: &str) -> Result<()> {
    if x.len() != dim {
        return Err(invalid(format!("{what} has {} coordinates, expected {dim}", x.len())));
    }
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(invalid(format!("{what} {x:?} outside the unit box")));
    }
    Ok(())
}

/// `clamp(M pi + mu0, [0, 1])` per coordinate.
pub fn capability(firm: &FirmModel, pi: &[f64]) -> Result<CapabilityProfile> {
    check_unit_point(pi, firm.dim(), "strategy")?;
    Ok(CapabilityProfile(firm.capability_unchecked(pi)))
}

/// `sum_i kappa_i omega_i mu_i`.
pub fn compliance_cost(reg: &RegulatorModel, mu: &CapabilityProfile, omega: &[f64]) -> Result<f64> {
    check_unit_point(omega, CAPABILITY_DIMS, "stringency")?;
    Ok(cost_unchecked(reg, &mu.0, omega))
}

fn cost_unchecked(reg: &RegulatorModel, mu: &[f64; CAPABILITY_DIMS], omega: &[f64]) -> f64 {
    (0..CAPABILITY_DIMS).map(|i| reg.compliance_costs[i] * omega[i] * mu[i]).sum()
}

fn return_unchecked(firm: &FirmModel, reg: &RegulatorModel, pi: &[f64], omega: &[f64]) -> f64 {
    let mu = firm.capability_unchecked(pi);
    let revenue: f64 = firm.revenue_weights.iter().zip(&mu).map(|(a, m)| a * m).sum();
    let effort: f64 = pi.iter().map(|p| p * p).sum();
    revenue - cost_unchecked(reg, &mu, omega) - firm.effort_cost * effort
}

/// `d mu_i / d pi`, zero on coordinates clamped away from the raw value.
fn capability_jacobian(firm: &FirmModel, pi: &[f64]) -> Vec<Vec<f64>> {
    firm.capability_matrix
        .iter()
        .zip(&firm.capability_offset)
        .map(|(row, m0)| {
            let raw = m0 + row.iter().zip(pi).map(|(a, p)| a * p).sum::<f64>();
            if (0.0..=1.0).contains(&raw) {
                row.clone()
            } else {
                vec![0.0; row.len()]
            }
        })
        .collect()
}

/// `(dJ/dpi, dJ/domega)`.
fn return_gradient(firm: &FirmModel, reg: &RegulatorModel, pi: &[f64], omega: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mu = firm.capability_unchecked(pi);
    let jac = capability_jacobian(firm, pi);
    let d_pi = (0..pi.len())
        .map(|k| {
            (0..CAPABILITY_DIMS)
                .map(|i| (firm.revenue_weights[i] - reg.compliance_costs[i] * omega[i]) * jac[i][k])
                .sum::<f64>()
                - 2.0 * firm.effort_cost * pi[k]
        })
        .collect();
    let d_omega = (0..CAPABILITY_DIMS).map(|i| -reg.compliance_costs[i] * mu[i]).collect();
    (d_pi, d_omega)
}

/// `(dL/dpi, dL/domega)`.
fn loss_gradient(firm: &FirmModel, reg: &RegulatorModel, pi: &[f64], omega: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mu = firm.capability_unchecked(pi);
    let jac = capability_jacobian(firm, pi);
    let slope: Vec<f64> = (0..CAPABILITY_DIMS)
        .map(|i| {
            let p = reg.risk_exponents[i];
            let base = if mu[i] > 0.0 { p * mu[i].powf(p - 1.0) } else if p == 1.0 { 1.0 } else { 0.0 };
            reg.risk_weights[i] * base * (1.0 - omega[i])
        })
        .collect();
    let d_pi = (0..pi.len()).map(|k| (0..CAPABILITY_DIMS).map(|i| slope[i] * jac[i][k]).sum()).collect();
    let d_omega = (0..CAPABILITY_DIMS)
        .map(|i| -reg.risk_weights[i] * mu[i].powf(reg.risk_exponents[i]) + reg.innovation_drag)
        .collect();
    (d_pi, d_omega)
}

fn loss_unchecked(firm: &FirmModel, reg: &RegulatorModel, pi: &[f64], omega: &[f64]) -> f64 {
    let mu = firm.capability_unchecked(pi);
    let risk: f64 = (0..CAPABILITY_DIMS)
        .map(|i| reg.risk_weights[i] * mu[i].powf(reg.risk_exponents[i]) * (1.0 - omega[i]))
        .sum();
    risk + reg.innovation_drag * omega.iter().sum::<f64>()
}

/// Firm return `J(pi, omega)`.
pub fn firm_return(scenario: &GovernanceScenario, pi: &[f64], omega: &[f64]) -> Result<f64> {
    check_unit_point(pi, scenario.firm.dim(), "strategy")?;
    check_unit_point(omega, CAPABILITY_DIMS, "stringency")?;
    Ok(return_unchecked(&scenario.firm, &scenario.regulator, pi, omega))
}

/// Regulator loss `L(pi, omega)`.
pub fn regulator_loss(scenario: &GovernanceScenario, pi: &[f64], omega: &[f64]) -> Result<f64> {
    check_unit_point(pi, scenario.firm.dim(), "strategy")?;
    check_unit_point(omega, CAPABILITY_DIMS, "stringency")?;
    Ok(loss_unchecked(&scenario.firm, &scenario.regulator, pi, omega))
}

/// Firm leads only in the civil domain below the capability threshold.
pub fn select_setting(scenario: &GovernanceScenario, reference: Option<&[f64]>) -> Result<SettingAssignment> {
    let center = scenario.strategy_box().center();
    let pi = reference.or(scenario.reference_strategy.as_deref()).unwrap_or(&center);
    let score = capability(&scenario.firm, pi)?.score(scenario.score_rule);
    let above = score >= scenario.threshold;
    let (leader, rationale) = match (scenario.domain, above) {
        (Domain::Civil, false) => (Role::Firm, Rationale::CivilBelowThreshold),
        (Domain::Civil, true) => (Role::Regulator, Rationale::CivilAboveThreshold),
        (_, false) => (Role::Regulator, Rationale::RestrictedBelowThreshold),
        (_, true) => (Role::Regulator, Rationale::RestrictedAboveThreshold),
    };
    Ok(SettingAssignment {
        leader,
        rationale,
        capability_score: score,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GovernanceDiagnostics {
    pub mode: SolveMode,
    pub converged: bool,
    pub iterations: usize,
    pub hypergradient: Option<HypergradientMode>,
    /// The implicit hypergradient hit a singular follower Hessian and the
    /// solve was rerun with finite differences.
    pub fell_back_to_finite_difference: bool,
    pub follower_multimodal: bool,
    pub finite_grid: Option<usize>,
    pub leader_points: usize,
    pub follower_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernanceReport {
    pub assignment: SettingAssignment,
    pub leader: Role,
    pub pi: Vec<f64>,
    pub omega: Vec<f64>,
    pub capability: CapabilityProfile,
    pub firm_return: f64,
    pub regulator_loss: f64,
    /// Local Stackelberg check of the continuous solution.
    pub local_check: Option<bool>,
    pub diagnostics: GovernanceDiagnostics,
    pub trace: Vec<TraceEntry>,
}

impl GovernanceReport {
    /// The leader's own objective at the equilibrium.
    pub fn leader_objective(&self) -> f64 {
        match self.leader {
            Role::Firm => self.firm_return,
            Role::Regulator => self.regulator_loss,
        }
    }
}

struct FirmReturn {
    firm: FirmModel,
    regulator: RegulatorModel,
    firm_leads: bool,
}

impl Objective for FirmReturn {
    fn value(&self, theta: &[f64], omega: &[f64]) -> f64 {
        let (pi, w) = if self.firm_leads { (theta, omega) } else { (omega, theta) };
        return_unchecked(&self.firm, &self.regulator, pi, w)
    }

    fn grad_theta(&self, theta: &[f64], omega: &[f64]) -> Vec<f64> {
        split_gradient(self.firm_leads, theta, omega, |pi, w| return_gradient(&self.firm, &self.regulator, pi, w)).0
    }

    fn grad_omega(&self, theta: &[f64], omega: &[f64]) -> Vec<f64> {
        split_gradient(self.firm_leads, theta, omega, |pi, w| return_gradient(&self.firm, &self.regulator, pi, w)).1
    }
}

/// Reorders `(d/dpi, d/domega)` into `(d/dtheta, d/d follower variable)`.
fn split_gradient(
    firm_leads: bool,
    theta: &[f64],
    omega: &[f64],
    grad: impl Fn(&[f64], &[f64]) -> (Vec<f64>, Vec<f64>),
) -> (Vec<f64>, Vec<f64>) {
    if firm_leads {
        grad(theta, omega)
    } else {
        let (d_pi, d_w) = grad(omega, theta);
        (d_w, d_pi)
    }
}

struct RegulatorLoss {
    firm: FirmModel,
    regulator: RegulatorModel,
    firm_leads: bool,
}

impl Objective for RegulatorLoss {
    fn value(&self, theta: &[f64], omega: &[f64]) -> f64 {
        let (pi, w) = if self.firm_leads { (theta, omega) } else { (omega, theta) };
        loss_unchecked(&self.firm, &self.regulator, pi, w)
    }

    fn grad_theta(&self, theta: &[f64], omega: &[f64]) -> Vec<f64> {
        split_gradient(self.firm_leads, theta, omega, |pi, w| loss_gradient(&self.firm, &self.regulator, pi, w)).0
    }

    fn grad_omega(&self, theta: &[f64], omega: &[f64]) -> Vec<f64> {
        split_gradient(self.firm_leads, theta, omega, |pi, w| loss_gradient(&self.firm, &self.regulator, pi, w)).1
    }
}

/// Bi-level problem with `leader` choosing the outer variables: the firm's
/// strategy when the firm leads, the stringency vector otherwise.
pub fn bilevel_problem(scenario: &GovernanceScenario, leader: Role) -> Result<BilevelProblem> {
    scenario.validate()?;
    let firm_leads = leader == Role::Firm;
    let j: Arc<dyn Objective> = Arc::new(FirmReturn {
        firm: scenario.firm.clone(),
        regulator: scenario.regulator.clone(),
        firm_leads,
    });
    let l: Arc<dyn Objective> = Arc::new(RegulatorLoss {
        firm: scenario.firm.clone(),
        regulator: scenario.regulator.clone(),
        firm_leads,
    });
    let (pi_box, omega_box) = (scenario.strategy_box(), scenario.stringency_bounds());
    if firm_leads {
        BilevelProblem::new(j, l, pi_box, omega_box, Sense::Maximize, Sense::Minimize)
    } else {
        BilevelProblem::new(l, j, omega_box, pi_box, Sense::Minimize, Sense::Maximize)
    }
}

/// Solves the scenario with the assigned leader.
pub fn solve_governance(scenario: &GovernanceScenario, assignment: &SettingAssignment) -> Result<GovernanceReport> {
    solve_with_leader(scenario, assignment, assignment.leader)
}

/// Solves with an explicit leader, which may differ from the assignment's.
pub fn solve_with_leader(scenario: &GovernanceScenario, assignment: &SettingAssignment, leader: Role) -> Result<GovernanceReport> {
    let problem = bilevel_problem(scenario, leader)?;
    let (theta, omega, diagnostics, local_check, trace) = match scenario.solver.mode {
        SolveMode::Continuous => solve_continuous(scenario, &problem)?,
        SolveMode::Finite => solve_finite(scenario, &problem)?,
    };
    let (pi, omega) = match leader {
        Role::Firm => (theta, omega),
        Role::Regulator => (omega, theta),
    };
    Ok(GovernanceReport {
        assignment: *assignment,
        leader,
        capability: capability(&scenario.firm, &pi)?,
        firm_return: return_unchecked(&scenario.firm, &scenario.regulator, &pi, &omega),
        regulator_loss: loss_unchecked(&scenario.firm, &scenario.regulator, &pi, &omega),
        pi,
        omega,
        local_check,
        diagnostics,
        trace,
    })
}

type Solved = (Vec<f64>, Vec<f64>, GovernanceDiagnostics, Option<bool>, Vec<TraceEntry>);

fn solve_continuous(scenario: &GovernanceScenario, problem: &BilevelProblem) -> Result<Solved> {
    let s = &scenario.solver;
    let theta0 = problem.leader_box.center();
    let mut cfg = s.lse.clone();
    let mut fell_back = false;
    let point = match solve_lse(problem, &theta0, &cfg) {
        Err(Error::SingularHessian { .. }) if cfg.hypergradient == HypergradientMode::Implicit => {
            fell_back = true;
            cfg.hypergradient = HypergradientMode::FiniteDifference;
            solve_lse(problem, &theta0, &cfg)?
        }
        other => other?,
    };
    let check = check_local_se(problem, &point, s.check_radius, s.check_samples, s.check_tol, s.seed, &cfg)?;
    let diagnostics = GovernanceDiagnostics {
        mode: SolveMode::Continuous,
        converged: point.converged,
        iterations: point.iterations,
        hypergradient: Some(cfg.hypergradient),
        fell_back_to_finite_difference: fell_back,
        follower_multimodal: point.follower_multimodal,
        ..Default::default()
    };
    Ok((point.theta, point.omega, diagnostics, Some(check), point.trace))
}

/// Every point of `bounds` on `grid` levels per free coordinate, first
/// coordinate most significant.
/// Number of points [`grid_points`] would produce, saturating.
pub fn grid_point_count(bounds: &BoxBounds, grid: usize) -> usize {
    bounds
        .intervals()
        .iter()
        .filter(|(lo, hi)| hi > lo)
        .fold(1usize, |acc, _| acc.saturating_mul(grid))
}

pub fn grid_points(bounds: &BoxBounds, grid: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = bounds
        .intervals()
        .iter()
        .map(|&(lo, hi)| {
            if hi > lo {
                (0..grid).map(|k| lo + (hi - lo) * k as f64 / (grid - 1) as f64).collect()
            } else {
                vec![lo]
            }
        })
        .collect();
    let mut points = vec![Vec::new()];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    points
}

fn solve_finite(scenario: &GovernanceScenario, problem: &BilevelProblem) -> Result<Solved> {
    let grid = scenario.solver.finite_grid;
    let cells = grid_point_count(&problem.leader_box, grid).saturating_mul(grid_point_count(&problem.follower_box, grid));
    if cells > FINITE_CELL_BUDGET {
        return Err(Error::UnsupportedSize(format!(
            "finite mode needs {cells} payoff cells, budget is {FINITE_CELL_BUDGET}"
        )));
    }
    let leader_pts = grid_points(&problem.leader_box, grid);
    let follower_pts = grid_points(&problem.follower_box, grid);
    let table = |obj: &Arc<dyn Objective>| -> Vec<Vec<f64>> {
        leader_pts
            .iter()
            .map(|t| follower_pts.iter().map(|w| obj.value(t, w)).collect())
            .collect()
    };
    let game = BimatrixGame::new(
        table(&problem.leader),
        table(&problem.follower),
        problem.leader_sense,
        problem.follower_sense,
    )?;
    let report = solve_pure_se(&game, TieBreakMode::Optimistic)?;
    let profile = report.profile().expect("pure SE has a profile");
    let i = profile.leader.as_pure().expect("pure commitment");
    let diagnostics = GovernanceDiagnostics {
        mode: SolveMode::Finite,
        converged: true,
        finite_grid: Some(grid),
        leader_points: leader_pts.len(),
        follower_points: follower_pts.len(),
        ..Default::default()
    };
    Ok((leader_pts[i].clone(), follower_pts[profile.follower].clone(), diagnostics, None, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bilevel::finite_diff_gradient;

    fn scenario() -> GovernanceScenario {
        let mut matrix = vec![vec![0.0]; CAPABILITY_DIMS];
        matrix[0][0] = 1.0;
        GovernanceScenario {
            firm: FirmModel {
                capability_matrix: matrix,
                capability_offset: [0.0, 0.3, 0.3, 0.3, 0.3, 0.3],
                revenue_weights: [0.8, 0.0, 0.0, 0.0, 0.0, 0.0],
                effort_cost: 1.0,
            },
            regulator: RegulatorModel {
                risk_weights: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                risk_exponents: [2.0; CAPABILITY_DIMS],
                compliance_costs: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                innovation_drag: 0.3,
            },
            domain: Domain::Civil,
            threshold: 0.7,
            score_rule: ScoreRule::Max,
            reference_strategy: None,
            stringency_box: vec![(0.0, 1.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)],
            solver: GovernanceSolverConfig::default(),
        }
    }

    fn identity_firm() -> FirmModel {
        FirmModel {
            capability_matrix: (0..6).map(|i| (0..6).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
            capability_offset: [0.0; 6],
            revenue_weights: [1.0; 6],
            effort_cost: 0.0,
        }
    }

    #[test]
    fn capability_examples() {
        let zero = FirmModel {
            capability_matrix: vec![vec![0.0, 0.0]; 6],
            capability_offset: [0.5; 6],
            revenue_weights: [0.0; 6],
            effort_cost: 0.0,
        };
        assert_eq!(capability(&zero, &[0.2, 0.9]).unwrap().0, [0.5; 6]);
        let pi = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        assert_eq!(capability(&identity_firm(), &pi).unwrap().0, pi);
        assert!(capability(&identity_firm(), &[0.5]).is_err());
        assert!(capability(&identity_firm(), &[1.5; 6]).is_err());
        let mut big = identity_firm();
        big.capability_offset = [0.9; 6];
        assert_eq!(capability(&big, &[0.5; 6]).unwrap().0, [1.0; 6]);
    }

    #[test]
    fn compliance_cost_examples() {
        let reg = scenario().regulator;
        let ones = RegulatorModel {
            compliance_costs: [1.0; 6],
            ..reg.clone()
        };
        assert_eq!(compliance_cost(&reg, &CapabilityProfile([0.7; 6]), &[0.0; 6]).unwrap(), 0.0);
        assert_eq!(compliance_cost(&ones, &CapabilityProfile([1.0; 6]), &[1.0; 6]).unwrap(), 6.0);
        assert!(compliance_cost(&ones, &CapabilityProfile([1.0; 6]), &[1.1; 6]).is_err());
    }

    #[test]
    fn firm_return_vanishes_without_terms() {
        let mut s = scenario();
        s.firm.revenue_weights = [0.0; 6];
        s.firm.effort_cost = 0.0;
        for pi in [0.0, 0.3, 1.0] {
            assert_eq!(firm_return(&s, &[pi], &[0.0; 6]).unwrap(), 0.0);
        }
    }

    #[test]
    fn regulator_loss_examples() {
        let mut s = scenario();
        s.firm.capability_offset = [0.0; 6];
        // pi = 0 gives zero capability: loss is pure drag.
        assert!((regulator_loss(&s, &[0.0], &[0.5, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap() - 0.15).abs() < 1e-15);
        s.regulator.innovation_drag = 0.0;
        let low = regulator_loss(&s, &[0.8], &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let high = regulator_loss(&s, &[0.8], &[0.0; 6]).unwrap();
        assert!(low < high);
        assert!(regulator_loss(&s, &[0.8], &[0.0; 5]).is_err());
    }

    #[test]
    fn setting_rules() {
        let mut s = scenario();
        let a = select_setting(&s, None).unwrap();
        assert_eq!((a.leader, a.rationale), (Role::Firm, Rationale::CivilBelowThreshold));
        assert_eq!(a.capability_score, 0.5);
        s.threshold = 0.5;
        let a = select_setting(&s, None).unwrap();
        assert_eq!((a.leader, a.rationale), (Role::Regulator, Rationale::CivilAboveThreshold));
        s.domain = Domain::Military;
        s.threshold = 1.0;
        let a = select_setting(&s, Some(&[0.0])).unwrap();
        assert_eq!((a.leader, a.rationale), (Role::Regulator, Rationale::RestrictedBelowThreshold));
        s.domain = Domain::SafetyCritical;
        s.threshold = 0.0;
        assert_eq!(select_setting(&s, None).unwrap().rationale, Rationale::RestrictedAboveThreshold);
        s.score_rule = ScoreRule::Mean;
        s.threshold = 0.4;
        // mean of (0.5, 0.3 x 5) = 1/3
        assert_eq!(select_setting(&s, None).unwrap().rationale, Rationale::RestrictedBelowThreshold);
    }

    #[test]
    fn validation_failures() {
        let mut s = scenario();
        s.threshold = 1.5;
        assert!(s.validate().is_err());
        let mut s = scenario();
        s.regulator.risk_exponents[2] = 0.5;
        assert!(s.validate().is_err());
        let mut s = scenario();
        s.firm.capability_matrix.pop();
        assert!(s.validate().is_err());
        let mut s = scenario();
        s.stringency_box[0] = (0.5, 0.2);
        assert!(s.validate().is_err());
        let mut s = scenario();
        s.reference_strategy = Some(vec![0.1, 0.2]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn analytic_gradients_match_differences() {
        let mut s = scenario();
        s.firm = identity_firm();
        s.regulator.risk_exponents = [1.5; CAPABILITY_DIMS];
        s.stringency_box = unit_stringency();
        let pi = [0.3, 0.6, 0.2, 0.45, 0.7, 0.1];
        let omega = [0.2, 0.5, 0.9, 0.1, 0.4, 0.6];
        for leader in [Role::Firm, Role::Regulator] {
            let p = bilevel_problem(&s, leader).unwrap();
            let (t, w): (&[f64], &[f64]) = if leader == Role::Firm { (&pi, &omega) } else { (&omega, &pi) };
            for obj in [&p.leader, &p.follower] {
                let gt = finite_diff_gradient(|x| obj.value(x, w), t, 1e-6).unwrap();
                let gw = finite_diff_gradient(|x| obj.value(t, x), w, 1e-6).unwrap();
                for (a, b) in obj.grad_theta(t, w).iter().zip(&gt).chain(obj.grad_omega(t, w).iter().zip(&gw)) {
                    assert!((a - b).abs() < 1e-7, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn grid_points_skip_fixed_axes() {
        let b = BoxBounds::new(vec![(0.0, 1.0), (0.2, 0.2), (0.0, 0.5)]).unwrap();
        let pts = grid_points(&b, 3);
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], vec![0.0, 0.2, 0.0]);
        assert_eq!(pts[8], vec![1.0, 0.2, 0.5]);
    }

    #[test]
    fn firm_leader_stays_unregulated() {
        let s = scenario();
        let a = select_setting(&s, None).unwrap();
        let r = solve_governance(&s, &a).unwrap();
        assert!(r.diagnostics.converged);
        assert!((r.pi[0] - 0.4).abs() < 1e-6, "{:?}", r.pi);
        assert_eq!(r.omega[0], 0.0);
        assert!((r.firm_return - 0.16).abs() < 1e-9);
        assert_eq!(r.local_check, Some(true));
    }

    #[test]
    fn regulator_leader_interior_stringency() {
        let s = scenario();
        let a = select_setting(&s, None).unwrap();
        let r = solve_with_leader(&s, &a, Role::Regulator).unwrap();
        assert!(r.diagnostics.converged);
        assert!(r.omega[0] > 0.1 && r.omega[0] < 0.5, "{:?}", r.omega);
        assert!((r.pi[0] - (0.8 - r.omega[0]) / 2.0).abs() < 1e-6);
        assert_eq!(r.local_check, Some(true));
    }

    #[test]
    fn finite_mode_runs() {
        let mut s = scenario();
        s.solver.mode = SolveMode::Finite;
        s.solver.finite_grid = 11;
        let a = select_setting(&s, None).unwrap();
        let r = solve_governance(&s, &a).unwrap();
        assert_eq!(r.diagnostics.leader_points, 11);
        assert_eq!(r.diagnostics.follower_points, 11);
        assert!((r.pi[0] - 0.4).abs() < 1e-12);
        assert_eq!(r.omega[0], 0.0);
        assert!(r.local_check.is_none());
    }

    #[test]
    fn finite_mode_budget() {
        let mut s = scenario();
        s.stringency_box = unit_stringency();
        s.solver.mode = SolveMode::Finite;
        let a = select_setting(&s, None).unwrap();
        assert!(matches!(solve_governance(&s, &a), Err(Error::UnsupportedSize(_))));
    }
}
