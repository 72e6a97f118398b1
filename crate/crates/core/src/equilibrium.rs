//! Nash and Stackelberg equilibria of finite games.
//!
//! Mixed-commitment (strong) Stackelberg equilibria use the multiple-LPs
//! method: one linear program per follower action, each maximizing the
//! leader's value over the leader strategies that make that action a follower
//! best response. Nash equilibria come from support enumeration and serve as
//! a comparison oracle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::game::{BimatrixGame, MixedStrategy, StrategyProfile, TieBreakMode, DEFAULT_BR_TOL};
use crate::lp::{solve_lp, LinearProgram, LpStatus};

/// Largest action count per player accepted by [`solve_nash_support_enum`].
pub const SUPPORT_ENUM_LIMIT: usize = 8;

/// Largest number of simplex grid points [`verify_se`] will visit.
pub const VERIFY_GRID_BUDGET: u128 = 50_000_000;

const LP_TOL: f64 = 1e-9;
const VALUE_TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    Nash,
    PureSe,
    MixedSe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashProfile {
    pub leader: MixedStrategy,
    pub follower: MixedStrategy,
    pub leader_value: f64,
    pub follower_value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    /// Status of each per-follower-action LP, in follower-action order.
    pub lp_statuses: Vec<LpStatus>,
    pub lp_pivots: usize,
    /// Leader candidates (pure actions) or support pairs examined.
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Equilibrium {
    Nash { equilibria: Vec<NashProfile> },
    PureSe { mode: TieBreakMode, profile: StrategyProfile },
    MixedSe { profile: StrategyProfile },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub equilibrium: Equilibrium,
    pub diagnostics: SolverDiagnostics,
}

impl EquilibriumReport {
    pub fn kind(&self) -> EquilibriumKind {
        match self.equilibrium {
            Equilibrium::Nash { .. } => EquilibriumKind::Nash,
            Equilibrium::PureSe { .. } => EquilibriumKind::PureSe,
            Equilibrium::MixedSe { .. } => EquilibriumKind::MixedSe,
        }
    }

    /// The committed profile for Stackelberg reports.
    pub fn profile(&self) -> Option<&StrategyProfile> {
        match &self.equilibrium {
            Equilibrium::PureSe { profile, .. } | Equilibrium::MixedSe { profile } => Some(profile),
            Equilibrium::Nash { .. } => None,
        }
    }

    pub fn nash(&self) -> &[NashProfile] {
        match &self.equilibrium {
            Equilibrium::Nash { equilibria } => equilibria,
            _ => &[],
        }
    }
}

/// Enumerates leader pure commitments; the follower best-responds with the
/// given tie-breaking. Ties in leader value go to the lowest leader action.
pub fn solve_pure_se(game: &BimatrixGame, mode: TieBreakMode) -> Result<EquilibriumReport> {
    let n = game.leader_actions();
    let mut best: Option<StrategyProfile> = None;
    for i in 0..n {
        let candidate = game.respond(&MixedStrategy::pure(n, i), mode, DEFAULT_BR_TOL)?;
        let better = match &best {
            None => true,
            Some(b) => game.leader_sense().better(candidate.leader_value, b.leader_value),
        };
        if better {
            best = Some(candidate);
        }
    }
    Ok(EquilibriumReport {
        equilibrium: Equilibrium::PureSe {
            mode,
            profile: best.expect("games have at least one leader action"),
        },
        diagnostics: SolverDiagnostics {
            candidates: n,
            ..Default::default()
        },
    })
}

/// The per-follower-action programs of the multiple-LPs method, on the
/// canonical (both-maximize) form of `game`. Entry `j` maximizes the leader's
/// expected payoff subject to follower action `j` being a best response.
pub fn commitment_lps(game: &BimatrixGame) -> Vec<LinearProgram> {
    let c = game.canonicalize();
    let (n, m) = (c.leader_actions(), c.follower_actions());
    (0..m)
        .map(|j| {
            let mut lp = LinearProgram::nonnegative((0..n).map(|i| c.leader_payoff(i, j)).collect());
            for other in (0..m).filter(|&k| k != j) {
                let row = (0..n).map(|i| c.follower_payoff(i, other) - c.follower_payoff(i, j)).collect();
                lp.inequalities.push((row, 0.0));
            }
            lp.equalities.push((vec![1.0; n], 1.0));
            lp
        })
        .collect()
}

/// Strong Stackelberg equilibrium: the leader commits to a mixed strategy and
/// the follower breaks ties in the leader's favor.
pub fn solve_mixed_commitment_se(game: &BimatrixGame) -> Result<EquilibriumReport> {
    let sign = game.leader_sense().sign();
    let mut diagnostics = SolverDiagnostics::default();
    let mut best: Option<(f64, StrategyProfile)> = None;
    for (j, lp) in commitment_lps(game).iter().enumerate() {
        let sol = solve_lp(lp, LP_TOL)?;
        diagnostics.lp_statuses.push(sol.status);
        diagnostics.lp_pivots += sol.pivots;
        diagnostics.candidates += 1;
        let Some(objective) = sol.objective else {
            continue;
        };
        if best.as_ref().is_some_and(|(v, _)| objective <= *v + VALUE_TIE) {
            continue;
        }
        let leader = MixedStrategy::from_noisy(&sol.x)?;
        let (leader_value, follower_value) = game.expected_payoffs(&leader, j)?;
        debug_assert!((sign * leader_value - objective).abs() < 1e-6);
        best = Some((
            objective,
            StrategyProfile {
                leader,
                follower: j,
                leader_value,
                follower_value,
            },
        ));
    }
    let (_, profile) = best.ok_or_else(|| Error::NumericalFailure {
        point: Vec::new(),
        reason: "no multiple-LPs program was feasible".into(),
    })?;
    Ok(EquilibriumReport {
        equilibrium: Equilibrium::MixedSe { profile },
        diagnostics,
    })
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Solves for weights on `support` (summing to one) that make the opponent
/// indifferent across `targets`. `payoff(s, t)` is the opponent's payoff when
/// the mixing player uses `s` and the opponent uses `t`.
fn indifference(support: &[usize], targets: &[usize], payoff: impl Fn(usize, usize) -> f64) -> Option<Vec<f64>> {
    let k = support.len();
    let mut a = DMatrix::zeros(k + 1, k + 1);
    let mut b = DVector::zeros(k + 1);
    for (r, &t) in targets.iter().enumerate() {
        for (c, &s) in support.iter().enumerate() {
            a[(r, c)] = payoff(s, t);
        }
        a[(r, k)] = -1.0;
    }
    for c in 0..k {
        a[(k, c)] = 1.0;
    }
    b[k] = 1.0;
    let sol = a.lu().solve(&b)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(sol.iter().take(k).copied().collect())
}

fn expand(n: usize, support: &[usize], weights: &[f64]) -> Vec<f64> {
    let mut full = vec![0.0; n];
    for (&i, &w) in support.iter().zip(weights) {
        full[i] = w;
    }
    full
}

/// Checks Definition-1 style stability: neither player can gain more than
/// `tol` by a unilateral pure deviation.
pub fn verify_ne(game: &BimatrixGame, profile: &NashProfile, tol: f64) -> Result<bool> {
    let c = game.canonicalize();
    let (n, m) = (c.leader_actions(), c.follower_actions());
    if profile.leader.len() != n || profile.follower.len() != m {
        return Err(invalid("profile dimensions do not match the game"));
    }
    let x = profile.leader.probabilities();
    let y = profile.follower.probabilities();
    let row_values: Vec<f64> = (0..n).map(|i| (0..m).map(|j| c.leader_payoff(i, j) * y[j]).sum()).collect();
    let col_values: Vec<f64> = (0..m).map(|j| (0..n).map(|i| c.follower_payoff(i, j) * x[i]).sum()).collect();
    let u: f64 = x.iter().zip(&row_values).map(|(p, v)| p * v).sum();
    let v: f64 = y.iter().zip(&col_values).map(|(p, v)| p * v).sum();
    Ok(row_values.iter().all(|&r| r <= u + tol) && col_values.iter().all(|&c| c <= v + tol))
}

/// All Nash equilibria reachable by equal-size support enumeration. Exact
/// for nondegenerate games; degenerate games may have equilibria (or
/// continua of them) that this misses.
pub fn solve_nash_support_enum(game: &BimatrixGame, tol: f64) -> Result<EquilibriumReport> {
    let (n, m) = (game.leader_actions(), game.follower_actions());
    if n > SUPPORT_ENUM_LIMIT || m > SUPPORT_ENUM_LIMIT {
        return Err(Error::UnsupportedSize(format!(
            "support enumeration is limited to {SUPPORT_ENUM_LIMIT}x{SUPPORT_ENUM_LIMIT}, game is {n}x{m}"
        )));
    }
    let c = game.canonicalize();
    let mut found: Vec<NashProfile> = Vec::new();
    let mut pairs = 0;
    for k in 1..=n.min(m) {
        let rows = subsets(n, k);
        let cols = subsets(m, k);
        for i_sup in &rows {
            for j_sup in &cols {
                pairs += 1;
                let Some(x) = indifference(i_sup, j_sup, |i, j| c.follower_payoff(i, j)) else {
                    continue;
                };
                let Some(y) = indifference(j_sup, i_sup, |j, i| c.leader_payoff(i, j)) else {
                    continue;
                };
                if x.iter().chain(&y).any(|&p| p < -tol) {
                    continue;
                }
                let leader = MixedStrategy::from_noisy(&expand(n, i_sup, &x))?;
                let follower = MixedStrategy::from_noisy(&expand(m, j_sup, &y))?;
                let mut candidate = NashProfile {
                    leader,
                    follower,
                    leader_value: 0.0,
                    follower_value: 0.0,
                };
                if !verify_ne(game, &candidate, tol)? {
                    continue;
                }
                let duplicate = found.iter().any(|f| {
                    let close = |a: &MixedStrategy, b: &MixedStrategy| {
                        a.probabilities().iter().zip(b.probabilities()).all(|(p, q)| (p - q).abs() <= 1e-6)
                    };
                    close(&f.leader, &candidate.leader) && close(&f.follower, &candidate.follower)
                });
                if duplicate {
                    continue;
                }
                let (lv, fv) = mixed_values(game, &candidate.leader, &candidate.follower);
                candidate.leader_value = lv;
                candidate.follower_value = fv;
                found.push(candidate);
            }
        }
    }
    Ok(EquilibriumReport {
        equilibrium: Equilibrium::Nash { equilibria: found },
        diagnostics: SolverDiagnostics {
            candidates: pairs,
            ..Default::default()
        },
    })
}

/// Expected payoffs in each player's own sense when both mix.
pub fn mixed_values(game: &BimatrixGame, leader: &MixedStrategy, follower: &MixedStrategy) -> (f64, f64) {
    let mut lv = 0.0;
    let mut fv = 0.0;
    for (i, p) in leader.probabilities().iter().enumerate() {
        for (j, q) in follower.probabilities().iter().enumerate() {
            lv += p * q * game.leader_payoff(i, j);
            fv += p * q * game.follower_payoff(i, j);
        }
    }
    (lv, fv)
}

/// Visits every point of the simplex with coordinates `k / grid`.
fn for_each_grid_point(n: usize, grid: usize, mut visit: impl FnMut(&[f64]) -> bool) {
    fn rec(idx: usize, remaining: usize, grid: usize, counts: &mut [usize], probs: &mut [f64], visit: &mut dyn FnMut(&[f64]) -> bool) -> bool {
        let n = counts.len();
        if idx == n - 1 {
            counts[idx] = remaining;
            probs[idx] = remaining as f64 / grid as f64;
            return visit(probs);
        }
        for c in 0..=remaining {
            counts[idx] = c;
            probs[idx] = c as f64 / grid as f64;
            if !rec(idx + 1, remaining - c, grid, counts, probs, visit) {
                return false;
            }
        }
        true
    }
    let mut counts = vec![0; n];
    let mut probs = vec![0.0; n];
    rec(0, grid, grid, &mut counts, &mut probs, &mut visit);
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Grid surrogate for Definition 2: true iff the profile's follower action is
/// a best response (within `tol`) and no leader strategy on the simplex grid
/// of resolution `grid`, met by a tie-broken follower response, improves the
/// leader's value by more than `tol`.
pub fn verify_se(game: &BimatrixGame, profile: &StrategyProfile, mode: TieBreakMode, grid: usize, tol: f64) -> Result<bool> {
    if grid == 0 {
        return Err(invalid("verification grid must be positive"));
    }
    let n = game.leader_actions();
    if profile.leader.len() != n || profile.follower >= game.follower_actions() {
        return Err(invalid("profile dimensions do not match the game"));
    }
    let points = binomial((grid + n - 1) as u128, (n - 1) as u128);
    if points > VERIFY_GRID_BUDGET {
        return Err(Error::UnsupportedSize(format!(
            "verification grid has {points} points, budget is {VERIFY_GRID_BUDGET}"
        )));
    }
    let br = game.follower_best_response_set(&profile.leader, tol)?;
    if !br.contains(&profile.follower) {
        return Ok(false);
    }
    let (claimed, _) = game.expected_payoffs(&profile.leader, profile.follower)?;
    let sign = game.leader_sense().sign();
    let mut ok = true;
    let mut failure = None;
    for_each_grid_point(n, grid, |probs| {
        // Grid points are exact multiples of 1/grid and may not sum to one
        // bit-exactly; the strategy is rebuilt through the noisy path.
        let result = MixedStrategy::from_noisy(probs).and_then(|x| game.respond(&x, mode, DEFAULT_BR_TOL));
        match result {
            Ok(resp) => {
                if sign * (resp.leader_value - claimed) > tol {
                    ok = false;
                }
            }
            Err(e) => failure = Some(e),
        }
        ok && failure.is_none()
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(ok),
    }
}
