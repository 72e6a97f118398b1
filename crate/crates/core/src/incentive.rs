//! Incentive games: the leader picks a base action together with a vector of
//! transfers in `[0, 1]`, one per follower action. A transfer is paid by the
//! leader to the follower only on the follower action actually taken.

use serde::{Deserialize, Serialize};

use crate::equilibrium::solve_pure_se;
use crate::error::{invalid, Error, Result};
use crate::game::{BimatrixGame, TieBreakMode, DEFAULT_BR_TOL};

/// Largest number of (base action, transfer vector) candidates searched.
pub const CANDIDATE_BUDGET: u128 = 10_000_000;

const VALUE_TIE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncentiveAction {
    pub base_action: usize,
    pub transfers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncentiveGame {
    base: BimatrixGame,
    transfer_grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncentiveSolution {
    pub best: IncentiveAction,
    pub follower_response: usize,
    pub leader_value: f64,
    pub follower_value: f64,
    pub candidates: u64,
}

impl IncentiveGame {
    /// `base` is canonicalized so that both players maximize. `transfer_grid`
    /// is the number of evenly spaced transfer levels including 0 and 1.
    pub fn new(base: &BimatrixGame, transfer_grid: usize) -> Result<Self> {
        if transfer_grid < 2 {
            return Err(invalid(format!("transfer grid must be at least 2, got {transfer_grid}")));
        }
        Ok(Self {
            base: base.canonicalize(),
            transfer_grid,
        })
    }

    pub fn base(&self) -> &BimatrixGame {
        &self.base
    }

    pub fn transfer_grid(&self) -> usize {
        self.transfer_grid
    }

    pub fn transfer_levels(&self) -> Vec<f64> {
        let steps = (self.transfer_grid - 1) as f64;
        (0..self.transfer_grid).map(|k| k as f64 / steps).collect()
    }

    pub fn candidate_count(&self) -> u128 {
        (self.transfer_grid as u128)
            .checked_pow(self.base.follower_actions() as u32)
            .and_then(|v| v.checked_mul(self.base.leader_actions() as u128))
            .unwrap_or(u128::MAX)
    }

    fn check_action(&self, act: &IncentiveAction) -> Result<()> {
        if act.base_action >= self.base.leader_actions() {
            return Err(invalid(format!("base action {} out of range", act.base_action)));
        }
        if act.transfers.len() != self.base.follower_actions() {
            return Err(invalid(format!(
                "{} transfers for {} follower actions",
                act.transfers.len(),
                self.base.follower_actions()
            )));
        }
        if let Some(v) = act.transfers.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("transfer {v} outside [0, 1]")));
        }
        Ok(())
    }

    /// Payoffs with the transfer on `follower_action` moved from the leader
    /// to the follower.
    pub fn incentive_payoffs(&self, act: &IncentiveAction, follower_action: usize) -> Result<(f64, f64)> {
        self.check_action(act)?;
        if follower_action >= self.base.follower_actions() {
            return Err(invalid(format!("follower action {follower_action} out of range")));
        }
        let v = act.transfers[follower_action];
        Ok((
            self.base.leader_payoff(act.base_action, follower_action) - v,
            self.base.follower_payoff(act.base_action, follower_action) + v,
        ))
    }

    /// Follower best response to `act` with tie-breaking on the augmented
    /// payoffs. Returns `(follower action, leader value, follower value)`.
    pub fn respond(&self, act: &IncentiveAction, mode: TieBreakMode) -> Result<(usize, f64, f64)> {
        self.check_action(act)?;
        Ok(self.respond_unchecked(act.base_action, &act.transfers, mode))
    }

    fn respond_unchecked(&self, a: usize, transfers: &[f64], mode: TieBreakMode) -> (usize, f64, f64) {
        let m = self.base.follower_actions();
        let follower: Vec<f64> = (0..m).map(|j| self.base.follower_payoff(a, j) + transfers[j]).collect();
        let best = follower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pref = match mode {
            TieBreakMode::Optimistic => 1.0,
            TieBreakMode::Pessimistic => -1.0,
        };
        let mut chosen: Option<(usize, f64)> = None;
        for j in (0..m).filter(|&j| follower[j] >= best - DEFAULT_BR_TOL) {
            let lv = self.base.leader_payoff(a, j) - transfers[j];
            if chosen.is_none_or(|(_, c)| pref * lv > pref * c) {
                chosen = Some((j, lv));
            }
        }
        let (j, lv) = chosen.expect("best-response set is never empty");
        (j, lv, follower[j])
    }
}

/// Exhaustive search over base actions and grid transfer vectors. Ties go to
/// the lower base action, then the lexicographically smaller transfers.
pub fn solve_incentive_se(g: &IncentiveGame, mode: TieBreakMode) -> Result<IncentiveSolution> {
    let count = g.candidate_count();
    if count > CANDIDATE_BUDGET {
        return Err(Error::UnsupportedSize(format!(
            "{count} incentive candidates exceed the budget of {CANDIDATE_BUDGET}"
        )));
    }
    let levels = g.transfer_levels();
    let m = g.base.follower_actions();
    let mut best: Option<IncentiveSolution> = None;
    let mut visited = 0u64;
    for a in 0..g.base.leader_actions() {
        // Odometer over transfer indices, first coordinate most significant.
        let mut idx = vec![0usize; m];
        let mut transfers = vec![0.0; m];
        loop {
            for (t, &k) in transfers.iter_mut().zip(&idx) {
                *t = levels[k];
            }
            visited += 1;
            let (j, lv, fv) = g.respond_unchecked(a, &transfers, mode);
            if best.as_ref().is_none_or(|b| lv > b.leader_value + VALUE_TIE) {
                best = Some(IncentiveSolution {
                    best: IncentiveAction {
                        base_action: a,
                        transfers: transfers.clone(),
                    },
                    follower_response: j,
                    leader_value: lv,
                    follower_value: fv,
                    candidates: 0,
                });
            }
            let mut pos = m;
            let exhausted = loop {
                if pos == 0 {
                    break true;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < levels.len() {
                    break false;
                }
                idx[pos] = 0;
            };
            if exhausted {
                break;
            }
        }
    }
    let mut sol = best.expect("at least one candidate exists");
    sol.candidates = visited;
    Ok(sol)
}

/// Leader value with incentives minus the pure-commitment value of the base
/// game under the same tie-breaking.
pub fn incentive_gain(g: &IncentiveGame, mode: TieBreakMode) -> Result<f64> {
    let with = solve_incentive_se(g, mode)?.leader_value;
    let base = solve_pure_se(&g.base, mode)?;
    let without = base.profile().expect("pure SE has a profile").leader_value;
    Ok(with - without)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Sense;

    fn shipped() -> IncentiveGame {
        let base = BimatrixGame::maximizing(vec![vec![5.0, 0.0], vec![0.0, 1.0]], vec![vec![0.0, 1.0], vec![1.0, 0.0]])
            .unwrap();
        IncentiveGame::new(&base, 11).unwrap()
    }

    #[test]
    fn payoffs_move_transfer() {
        let g = shipped();
        let zero = IncentiveAction {
            base_action: 0,
            transfers: vec![0.0, 0.0],
        };
        assert_eq!(g.incentive_payoffs(&zero, 0).unwrap(), (5.0, 0.0));
        let act = IncentiveAction {
            base_action: 0,
            transfers: vec![1.0, 0.0],
        };
        assert_eq!(g.incentive_payoffs(&act, 0).unwrap(), (4.0, 1.0));
        let bad = IncentiveAction {
            base_action: 0,
            transfers: vec![1.5, 0.0],
        };
        assert!(g.incentive_payoffs(&bad, 0).is_err());
        let short = IncentiveAction {
            base_action: 0,
            transfers: vec![0.0],
        };
        assert!(g.incentive_payoffs(&short, 0).is_err());
    }

    #[test]
    fn shipped_example_optimum() {
        for grid in [2, 11] {
            let base = shipped().base().clone();
            let g = IncentiveGame::new(&base, grid).unwrap();
            let sol = solve_incentive_se(&g, TieBreakMode::Optimistic).unwrap();
            assert_eq!(sol.best.base_action, 0);
            assert_eq!(sol.best.transfers, vec![1.0, 0.0]);
            assert_eq!(sol.follower_response, 0);
            assert_eq!(sol.leader_value, 4.0);
            assert_eq!(incentive_gain(&g, TieBreakMode::Optimistic).unwrap(), 4.0);
        }
    }

    #[test]
    fn zero_transfers_when_follower_already_complies() {
        // Follower strictly prefers column 0, which the leader also wants.
        let base = BimatrixGame::maximizing(vec![vec![3.0, 1.0], vec![2.0, 0.0]], vec![vec![2.0, 0.0], vec![2.0, 0.0]])
            .unwrap();
        let g = IncentiveGame::new(&base, 5).unwrap();
        let sol = solve_incentive_se(&g, TieBreakMode::Optimistic).unwrap();
        assert_eq!(sol.best.transfers, vec![0.0, 0.0]);
        assert_eq!(incentive_gain(&g, TieBreakMode::Optimistic).unwrap(), 0.0);
    }

    #[test]
    fn candidate_order_and_count() {
        let g = shipped();
        let sol = solve_incentive_se(&g, TieBreakMode::Pessimistic).unwrap();
        assert_eq!(sol.candidates, 2 * 11 * 11);
        // Nothing beats 0 pessimistically except a transfer above one, so the
        // first candidate stands.
        assert_eq!(sol.best.base_action, 0);
        assert_eq!(sol.leader_value, 0.0);
    }

    #[test]
    fn grid_and_budget_limits() {
        let base = shipped().base().clone();
        assert!(IncentiveGame::new(&base, 1).is_err());
        let wide = BimatrixGame::maximizing(vec![vec![0.0; 8]], vec![vec![0.0; 8]]).unwrap();
        let g = IncentiveGame::new(&wide, 11).unwrap();
        assert!(matches!(solve_incentive_se(&g, TieBreakMode::Optimistic), Err(Error::UnsupportedSize(_))));
    }

    #[test]
    fn minimizing_base_is_canonicalized() {
        let base = BimatrixGame::new(
            vec![vec![-5.0, 0.0], vec![0.0, -1.0]],
            vec![vec![0.0, -1.0], vec![-1.0, 0.0]],
            Sense::Minimize,
            Sense::Minimize,
        )
        .unwrap();
        let g = IncentiveGame::new(&base, 2).unwrap();
        assert_eq!(solve_incentive_se(&g, TieBreakMode::Optimistic).unwrap().leader_value, 4.0);
    }
}
