//! Finite two-player games: payoff tables, mixed strategies, follower best
//! responses and tie-breaking.
//!
//! Payoff tables are indexed `(leader action, follower action)`. Each player
//! carries its own optimization sense; solvers work on the canonical form
//! where both players maximize (see [`BimatrixGame::canonicalize`]).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Default absolute tolerance for best-response membership.
pub const DEFAULT_BR_TOL: f64 = 1e-9;

/// Tolerance on the simplex sum of a [`MixedStrategy`].
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Maximize,
    Minimize,
}

impl Sense {
    /// `+1` for maximize, `-1` for minimize. Multiplying a value by this sign
    /// turns it into a quantity to maximize.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        }
    }

    /// True if `a` is strictly better than `b` under this sense.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Maximize => a > b,
            Sense::Minimize => a < b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreakMode {
    /// Follower breaks ties in favor of the leader.
    Optimistic,
    /// Follower breaks ties against the leader.
    Pessimistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(invalid("mixed strategy must have at least one action"));
        }
        if let Some(p) = probabilities.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(invalid(format!("mixed strategy has invalid probability {p}")));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(invalid(format!("mixed strategy sums to {total}, expected 1")));
        }
        Ok(Self(probabilities))
    }

    pub fn pure(n: usize, action: usize) -> Self {
        assert!(action < n, "pure action {action} out of range for {n} actions");
        let mut p = vec![0.0; n];
        p[action] = 1.0;
        Self(p)
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0);
        Self(vec![1.0 / n as f64; n])
    }

    /// Projects a nearly-feasible vector (e.g. an LP solution carrying
    /// rounding noise) onto the simplex by clipping negatives and
    /// renormalizing.
    pub fn from_noisy(raw: &[f64]) -> Result<Self> {
        let clipped: Vec<f64> = raw.iter().map(|p| p.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(invalid(format!("cannot normalize strategy {raw:?}")));
        }
        Self::new(clipped.into_iter().map(|p| p / total).collect())
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the single action played with probability one, if any.
    pub fn as_pure(&self) -> Option<usize> {
        let mut support = self.0.iter().enumerate().filter(|(_, p)| **p > 0.0);
        match (support.next(), support.next()) {
            (Some((i, _)), None) => Some(i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub leader: MixedStrategy,
    pub follower: usize,
    pub leader_value: f64,
    pub follower_value: f64,
}

/// Two-player finite game. Payoffs are stored row-major with one row per
/// leader action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGame", into = "RawGame")]
pub struct BimatrixGame {
    rows: usize,
    cols: usize,
    leader: Vec<f64>,
    follower: Vec<f64>,
    leader_sense: Sense,
    follower_sense: Sense,
}

#[derive(Serialize, Deserialize)]
struct RawGame {
    leader_payoffs: Vec<Vec<f64>>,
    follower_payoffs: Vec<Vec<f64>>,
    leader_sense: Sense,
    follower_sense: Sense,
}

impl TryFrom<RawGame> for BimatrixGame {
    type Error = crate::Error;

    fn try_from(raw: RawGame) -> Result<Self> {
        BimatrixGame::new(
            raw.leader_payoffs,
            raw.follower_payoffs,
            raw.leader_sense,
            raw.follower_sense,
        )
    }
}

impl From<BimatrixGame> for RawGame {
    fn from(g: BimatrixGame) -> Self {
        RawGame {
            leader_payoffs: g.leader_rows(),
            follower_payoffs: g.follower_rows(),
            leader_sense: g.leader_sense,
            follower_sense: g.follower_sense,
        }
    }
}

fn flatten(table: &[Vec<f64>], name: &str) -> Result<(usize, usize, Vec<f64>)> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(invalid(format!("{name} payoff table is empty")));
    }
    let mut flat = Vec::with_capacity(rows * cols);
    for (i, row) in table.iter().enumerate() {
        if row.len() != cols {
            return Err(invalid(format!(
                "{name} payoff row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(invalid(format!("{name} payoff ({i}, {j}) is not finite")));
            }
        }
        flat.extend_from_slice(row);
    }
    Ok((rows, cols, flat))
}

impl BimatrixGame {
    pub fn new(
        leader_payoffs: Vec<Vec<f64>>,
        follower_payoffs: Vec<Vec<f64>>,
        leader_sense: Sense,
        follower_sense: Sense,
    ) -> Result<Self> {
        let (rows, cols, leader) = flatten(&leader_payoffs, "leader")?;
        let (frows, fcols, follower) = flatten(&follower_payoffs, "follower")?;
        if (rows, cols) != (frows, fcols) {
            return Err(invalid(format!(
                "payoff tables differ in shape: leader {rows}x{cols}, follower {frows}x{fcols}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            leader,
            follower,
            leader_sense,
            follower_sense,
        })
    }

    /// Both players maximize.
    pub fn maximizing(leader_payoffs: Vec<Vec<f64>>, follower_payoffs: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(leader_payoffs, follower_payoffs, Sense::Maximize, Sense::Maximize)
    }

    /// Zero-sum game where the follower receives the negated leader payoff.
    pub fn zero_sum(leader_payoffs: Vec<Vec<f64>>) -> Result<Self> {
        let follower = leader_payoffs
            .iter()
            .map(|r| r.iter().map(|v| -v).collect())
            .collect();
        Self::maximizing(leader_payoffs, follower)
    }

    pub fn leader_actions(&self) -> usize {
        self.rows
    }

    pub fn follower_actions(&self) -> usize {
        self.cols
    }

    pub fn leader_sense(&self) -> Sense {
        self.leader_sense
    }

    pub fn follower_sense(&self) -> Sense {
        self.follower_sense
    }

    pub fn leader_payoff(&self, i: usize, j: usize) -> f64 {
        self.leader[i * self.cols + j]
    }

    pub fn follower_payoff(&self, i: usize, j: usize) -> f64 {
        self.follower[i * self.cols + j]
    }

    pub fn leader_rows(&self) -> Vec<Vec<f64>> {
        self.leader.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn follower_rows(&self) -> Vec<Vec<f64>> {
        self.follower.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn is_canonical(&self) -> bool {
        self.leader_sense == Sense::Maximize && self.follower_sense == Sense::Maximize
    }

    /// Equivalent game in which both players maximize; minimizing tables are
    /// negated.
    pub fn canonicalize(&self) -> BimatrixGame {
        let negate_if = |table: &[f64], sense: Sense| -> Vec<f64> {
            table.iter().map(|v| v * sense.sign()).collect()
        };
        BimatrixGame {
            rows: self.rows,
            cols: self.cols,
            leader: negate_if(&self.leader, self.leader_sense),
            follower: negate_if(&self.follower, self.follower_sense),
            leader_sense: Sense::Maximize,
            follower_sense: Sense::Maximize,
        }
    }

    fn check_leader(&self, leader: &MixedStrategy) -> Result<()> {
        if leader.len() != self.rows {
            return Err(invalid(format!(
                "leader strategy has {} entries, game has {} leader actions",
                leader.len(),
                self.rows
            )));
        }
        Ok(())
    }

    fn column_expectation(&self, table: &[f64], leader: &MixedStrategy, j: usize) -> f64 {
        leader
            .probabilities()
            .iter()
            .enumerate()
            .map(|(i, p)| p * table[i * self.cols + j])
            .sum()
    }

    /// Expected leader and follower payoffs when the leader mixes and the
    /// follower plays `follower_action`. Values are in each player's own
    /// sense, not canonicalized.
    pub fn expected_payoffs(&self, leader: &MixedStrategy, follower_action: usize) -> Result<(f64, f64)> {
        self.check_leader(leader)?;
        if follower_action >= self.cols {
            return Err(invalid(format!(
                "follower action {follower_action} out of range for {} actions",
                self.cols
            )));
        }
        Ok((
            self.column_expectation(&self.leader, leader, follower_action),
            self.column_expectation(&self.follower, leader, follower_action),
        ))
    }

    /// All follower actions whose expected payoff is within `tol` of the
    /// follower-optimal value. Sorted ascending; never empty.
    pub fn follower_best_response_set(&self, leader: &MixedStrategy, tol: f64) -> Result<Vec<usize>> {
        self.check_leader(leader)?;
        if !(tol >= 0.0) {
            return Err(invalid(format!("tolerance must be non-negative, got {tol}")));
        }
        let sign = self.follower_sense.sign();
        let values: Vec<f64> = (0..self.cols)
            .map(|j| sign * self.column_expectation(&self.follower, leader, j))
            .collect();
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((0..self.cols).filter(|&j| values[j] >= best - tol).collect())
    }

    /// Picks one follower action from `br_set`: the leader-best under
    /// optimistic tie-breaking, the leader-worst under pessimistic. Residual
    /// ties go to the lowest index.
    pub fn tie_break(&self, leader: &MixedStrategy, br_set: &[usize], mode: TieBreakMode) -> Result<usize> {
        self.check_leader(leader)?;
        if br_set.is_empty() {
            return Err(invalid("best-response set is empty"));
        }
        let mut ordered = br_set.to_vec();
        ordered.sort_unstable();
        ordered.dedup();
        if let Some(&j) = ordered.iter().find(|&&j| j >= self.cols) {
            return Err(invalid(format!("best-response action {j} out of range")));
        }
        let preference = match mode {
            TieBreakMode::Optimistic => self.leader_sense.sign(),
            TieBreakMode::Pessimistic => -self.leader_sense.sign(),
        };
        let mut chosen = ordered[0];
        let mut chosen_score = preference * self.column_expectation(&self.leader, leader, chosen);
        for &j in &ordered[1..] {
            let score = preference * self.column_expectation(&self.leader, leader, j);
            if score > chosen_score {
                chosen = j;
                chosen_score = score;
            }
        }
        Ok(chosen)
    }

    /// Best-response set followed by tie-breaking, packaged as a profile.
    pub fn respond(&self, leader: &MixedStrategy, mode: TieBreakMode, tol: f64) -> Result<StrategyProfile> {
        let br = self.follower_best_response_set(leader, tol)?;
        let follower = self.tie_break(leader, &br, mode)?;
        let (leader_value, follower_value) = self.expected_payoffs(leader, follower)?;
        Ok(StrategyProfile {
            leader: leader.clone(),
            follower,
            leader_value,
            follower_value,
        })
    }
}
