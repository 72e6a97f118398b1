//! Stackelberg MDPs: each committed leader action induces an episodic MDP
//! that the follower solves optimally by backward induction. The leader
//! accrues its own rewards along the follower's trajectory and commits to the
//! action with the best expected cumulative value.
//!
//! Steps and states are zero-based throughout.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::TieBreakMode;

/// Tolerance for transition-row sums and follower-value ties.
pub const PROB_TOL: f64 = 1e-9;

const VALUE_TIE: f64 = 1e-12;

fn default_discount() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodicMdp {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    /// `[step][state][action]`
    pub leader_rewards: Vec<Vec<Vec<f64>>>,
    /// `[step][state][action]`
    pub follower_rewards: Vec<Vec<Vec<f64>>>,
    /// `[step][state][action][next state]`
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    pub initial: Vec<f64>,
    #[serde(default = "default_discount")]
    pub discount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Shape { field: String, detail: String },
    NonFinite { field: String, step: usize, state: usize, action: usize },
    NegativeProbability { step: usize, state: usize, action: usize, next: usize, value: f64 },
    RowSum { step: usize, state: usize, action: usize, sum: f64 },
    Initial { detail: String },
    Discount { value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape { field, detail } => write!(f, "{field}: {detail}"),
            Violation::NonFinite { field, step, state, action } => {
                write!(f, "{field} at (h={step}, s={state}, a={action}) is not finite")
            }
            Violation::NegativeProbability { step, state, action, next, value } => write!(
                f,
                "transition (h={step}, s={state}, a={action}) -> {next} has negative probability {value}"
            ),
            Violation::RowSum { step, state, action, sum } => {
                write!(f, "transition row (h={step}, s={state}, a={action}) sums to {sum}")
            }
            Violation::Initial { detail } => write!(f, "initial distribution: {detail}"),
            Violation::Discount { value } => write!(f, "discount {value} outside (0, 1]"),
        }
    }
}

impl EpisodicMdp {
    /// Every violated invariant; empty iff the MDP is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let (h_n, s_n, a_n) = (self.horizon, self.states, self.actions);
        let shape = |field: &str, detail: String| Violation::Shape {
            field: field.into(),
            detail,
        };
        if h_n == 0 || s_n == 0 || a_n == 0 {
            out.push(shape("dimensions", format!("horizon {h_n}, states {s_n}, actions {a_n} must all be positive")));
            return out;
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            out.push(Violation::Discount { value: self.discount });
        }
        for (field, table) in [("leader_rewards", &self.leader_rewards), ("follower_rewards", &self.follower_rewards)] {
            if table.len() != h_n || table.iter().any(|s| s.len() != s_n || s.iter().any(|a| a.len() != a_n)) {
                out.push(shape(field, format!("expected shape [{h_n}][{s_n}][{a_n}]")));
                continue;
            }
            for (h, by_s) in table.iter().enumerate() {
                for (s, by_a) in by_s.iter().enumerate() {
                    for (a, r) in by_a.iter().enumerate() {
                        if !r.is_finite() {
                            out.push(Violation::NonFinite {
                                field: field.into(),
                                step: h,
                                state: s,
                                action: a,
                            });
                        }
                    }
                }
            }
        }
        let p = &self.transitions;
        if p.len() != h_n
            || p.iter().any(|s| s.len() != s_n || s.iter().any(|a| a.len() != a_n || a.iter().any(|row| row.len() != s_n)))
        {
            out.push(shape("transitions", format!("expected shape [{h_n}][{s_n}][{a_n}][{s_n}]")));
        } else {
            for (h, by_s) in p.iter().enumerate() {
                for (s, by_a) in by_s.iter().enumerate() {
                    for (a, row) in by_a.iter().enumerate() {
                        for (next, &v) in row.iter().enumerate() {
                            if !v.is_finite() {
                                out.push(Violation::NonFinite {
                                    field: "transitions".into(),
                                    step: h,
                                    state: s,
                                    action: a,
                                });
                            } else if v < 0.0 {
                                out.push(Violation::NegativeProbability {
                                    step: h,
                                    state: s,
                                    action: a,
                                    next,
                                    value: v,
                                });
                            }
                        }
                        let sum: f64 = row.iter().sum();
                        if !((sum - 1.0).abs() <= PROB_TOL) {
                            out.push(Violation::RowSum {
                                step: h,
                                state: s,
                                action: a,
                                sum,
                            });
                        }
                    }
                }
            }
        }
        if self.initial.len() != s_n {
            out.push(Violation::Initial {
                detail: format!("{} entries for {s_n} states", self.initial.len()),
            });
        } else {
            if self.initial.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                out.push(Violation::Initial {
                    detail: "entries must be finite and non-negative".into(),
                });
            }
            let sum: f64 = self.initial.iter().sum();
            if !((sum - 1.0).abs() <= PROB_TOL) {
                out.push(Violation::Initial {
                    detail: format!("sums to {sum}"),
                });
            }
        }
        out
    }

    fn expect(&self, h: usize, s: usize, a: usize, values: &[f64]) -> f64 {
        self.transitions[h][s][a].iter().zip(values).map(|(p, v)| p * v).sum()
    }

    /// Follower and leader action values at `(h, s, a)` given next-step
    /// value vectors.
    pub fn q_values(&self, h: usize, s: usize, a: usize, next_follower: &[f64], next_leader: &[f64]) -> (f64, f64) {
        (
            self.follower_rewards[h][s][a] + self.discount * self.expect(h, s, a, next_follower),
            self.leader_rewards[h][s][a] + self.discount * self.expect(h, s, a, next_leader),
        )
    }
}

/// Deterministic follower action per `(step, state)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowerPolicy(pub Vec<Vec<usize>>);

impl FollowerPolicy {
    pub fn action(&self, step: usize, state: usize) -> usize {
        self.0[step][state]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpSolution {
    pub policy: FollowerPolicy,
    /// `[step][state]` for steps `0..=horizon`; the last row is zero.
    pub follower_values: Vec<Vec<f64>>,
    /// Leader values under the selected policy, same layout.
    pub leader_values: Vec<Vec<f64>>,
}

impl DpSolution {
    /// Expected values `(leader, follower)` from the initial distribution.
    pub fn initial_values(&self, m: &EpisodicMdp) -> (f64, f64) {
        let dot = |v: &[f64]| m.initial.iter().zip(v).map(|(p, x)| p * x).sum::<f64>();
        (dot(&self.leader_values[0]), dot(&self.follower_values[0]))
    }
}

/// Backward induction for the follower. At each `(step, state)` the follower
/// keeps the actions within `PROB_TOL` of its best value and `mode` picks the
/// one with the highest (optimistic) or lowest (pessimistic) leader
/// continuation value; residual ties go to the lowest action.
pub fn follower_dp(m: &EpisodicMdp, mode: TieBreakMode) -> Result<DpSolution> {
    let violations = m.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidMdp {
            leader_action: None,
            violations,
        });
    }
    let (h_n, s_n) = (m.horizon, m.states);
    let pref = match mode {
        TieBreakMode::Optimistic => 1.0,
        TieBreakMode::Pessimistic => -1.0,
    };
    let mut vf = vec![vec![0.0; s_n]; h_n + 1];
    let mut vl = vec![vec![0.0; s_n]; h_n + 1];
    let mut policy = vec![vec![0; s_n]; h_n];
    for h in (0..h_n).rev() {
        let (done, todo) = (vf.split_at_mut(h + 1), vl.split_at_mut(h + 1));
        let (next_f, next_l) = (&done.1[0], &todo.1[0]);
        for s in 0..s_n {
            let q: Vec<(f64, f64)> = (0..m.actions).map(|a| m.q_values(h, s, a, next_f, next_l)).collect();
            let best = q.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
            let mut chosen: Option<usize> = None;
            for a in (0..m.actions).filter(|&a| q[a].0 >= best - PROB_TOL) {
                if chosen.map_or(true, |c| pref * q[a].1 > pref * q[c].1) {
                    chosen = Some(a);
                }
            }
            let a = chosen.expect("some action attains the maximum");
            policy[h][s] = a;
            done.0[h][s] = q[a].0;
            todo.0[h][s] = q[a].1;
        }
    }
    Ok(DpSolution {
        policy: FollowerPolicy(policy),
        follower_values: vf,
        leader_values: vl,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackelbergMdpFamily {
    pub mdps: Vec<EpisodicMdp>,
}

impl StackelbergMdpFamily {
    pub fn new(mdps: Vec<EpisodicMdp>) -> Result<Self> {
        let fam = Self { mdps };
        fam.validate()?;
        Ok(fam)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mdps.is_empty() {
            return Err(Error::InvalidArgument("family needs at least one leader action".into()));
        }
        for (i, m) in self.mdps.iter().enumerate() {
            let violations = m.validate();
            if !violations.is_empty() {
                return Err(Error::InvalidMdp {
                    leader_action: Some(i),
                    violations,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmdpSolution {
    pub leader_action: usize,
    pub policy: FollowerPolicy,
    pub leader_value: f64,
    pub follower_value: f64,
    /// `(leader value, follower value)` for every leader action.
    pub per_action: Vec<(f64, f64)>,
    /// Follower solutions, one per leader action.
    pub solutions: Vec<DpSolution>,
}

/// Runs [`follower_dp`] for every leader action and commits to the one with
/// the highest leader value; ties go to the lowest action.
pub fn solve_stackelberg_mdp(fam: &StackelbergMdpFamily, mode: TieBreakMode) -> Result<SmdpSolution> {
    fam.validate()?;
    let mut solutions = Vec::with_capacity(fam.mdps.len());
    let mut per_action: Vec<(f64, f64)> = Vec::with_capacity(fam.mdps.len());
    let mut best = 0;
    for (i, m) in fam.mdps.iter().enumerate() {
        let dp = follower_dp(m, mode).map_err(|e| match e {
            Error::InvalidMdp { violations, .. } => Error::InvalidMdp {
                leader_action: Some(i),
                violations,
            },
            other => other,
        })?;
        let values = dp.initial_values(m);
        if i > 0 && values.0 > per_action[best].0 + VALUE_TIE {
            best = i;
        }
        per_action.push(values);
        solutions.push(dp);
    }
    let (leader_value, follower_value) = per_action[best];
    Ok(SmdpSolution {
        leader_action: best,
        policy: solutions[best].policy.clone(),
        leader_value,
        follower_value,
        per_action,
        solutions,
    })
}

/// Largest gap between reported values and a one-step Bellman backup under
/// the reported policy, over every `(step, state)`.
pub fn bellman_residual(m: &EpisodicMdp, dp: &DpSolution) -> f64 {
    let mut worst: f64 = 0.0;
    for h in 0..m.horizon {
        for s in 0..m.states {
            let a = dp.policy.action(h, s);
            let (qf, ql) = m.q_values(h, s, a, &dp.follower_values[h + 1], &dp.leader_values[h + 1]);
            worst = worst.max((qf - dp.follower_values[h][s]).abs()).max((ql - dp.leader_values[h][s]).abs());
            // The chosen action must also be follower-optimal.
            for b in 0..m.actions {
                let (qb, _) = m.q_values(h, s, b, &dp.follower_values[h + 1], &dp.leader_values[h + 1]);
                worst = worst.max(qb - dp.follower_values[h][s] - PROB_TOL);
            }
        }
    }
    worst.max(0.0)
}
