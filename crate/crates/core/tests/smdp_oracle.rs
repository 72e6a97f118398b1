//! Backward induction against exhaustive enumeration of deterministic
//! follower policies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stackgov_core::smdp::{bellman_residual, follower_dp, solve_stackelberg_mdp, EpisodicMdp, StackelbergMdpFamily};
use stackgov_core::TieBreakMode;

const MODES: [TieBreakMode; 2] = [TieBreakMode::Optimistic, TieBreakMode::Pessimistic];

/// With `dyadic`, rewards are small integers and transition probabilities
/// multiples of 1/4, so follower ties are exact.
fn random_mdp(rng: &mut ChaCha8Rng, states: usize, actions: usize, horizon: usize, dyadic: bool) -> EpisodicMdp {
    let reward = |rng: &mut ChaCha8Rng| {
        if dyadic {
            f64::from(rng.gen_range(0i32..=2))
        } else {
            rng.gen_range(-1.0..1.0)
        }
    };
    let rewards = |rng: &mut ChaCha8Rng| -> Vec<Vec<Vec<f64>>> {
        (0..horizon).map(|_| (0..states).map(|_| (0..actions).map(|_| reward(rng)).collect()).collect()).collect()
    };
    let leader_rewards = rewards(rng);
    let follower_rewards = rewards(rng);
    let row = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        if dyadic {
            let mut quarters = vec![0u32; states];
            for _ in 0..4 {
                quarters[rng.gen_range(0..states)] += 1;
            }
            quarters.iter().map(|&q| f64::from(q) / 4.0).collect()
        } else {
            let w: Vec<f64> = (0..states).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.iter().map(|v| v / total).collect()
        }
    };
    let transitions = (0..horizon)
        .map(|_| (0..states).map(|_| (0..actions).map(|_| row(rng)).collect()).collect())
        .collect();
    let mut initial = vec![0.0; states];
    initial[0] = 0.5;
    initial[rng.gen_range(0..states)] += 0.5;
    EpisodicMdp {
        states,
        actions,
        horizon,
        leader_rewards,
        follower_rewards,
        transitions,
        initial,
        discount: 1.0,
    }
}

/// `(leader, follower)` value of a deterministic policy, by forward
/// propagation of the state distribution.
fn evaluate(m: &EpisodicMdp, policy: &[Vec<usize>]) -> (f64, f64) {
    let mut dist = m.initial.clone();
    let (mut lv, mut fv, mut scale) = (0.0, 0.0, 1.0);
    for h in 0..m.horizon {
        let mut next = vec![0.0; m.states];
        for s in 0..m.states {
            let a = policy[h][s];
            lv += scale * dist[s] * m.leader_rewards[h][s][a];
            fv += scale * dist[s] * m.follower_rewards[h][s][a];
            for (t, p) in m.transitions[h][s][a].iter().enumerate() {
                next[t] += dist[s] * p;
            }
        }
        dist = next;
        scale *= m.discount;
    }
    (lv, fv)
}

fn all_policies(m: &EpisodicMdp) -> Vec<Vec<Vec<usize>>> {
    let cells = m.horizon * m.states;
    let total = m.actions.pow(cells as u32);
    (0..total)
        .map(|mut code| {
            let mut p = vec![vec![0; m.states]; m.horizon];
            for h in 0..m.horizon {
                for s in 0..m.states {
                    p[h][s] = code % m.actions;
                    code /= m.actions;
                }
            }
            p
        })
        .collect()
}

/// Leader value when the follower plays a follower-optimal policy chosen in
/// the leader's favour (optimistic) or against it (pessimistic).
fn oracle_value(m: &EpisodicMdp, mode: TieBreakMode) -> (f64, f64) {
    let values: Vec<(f64, f64)> = all_policies(m).iter().map(|p| evaluate(m, p)).collect();
    let best_f = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let optimal = values.iter().filter(|v| v.1 >= best_f - 1e-9).map(|v| v.0);
    let lv = match mode {
        TieBreakMode::Optimistic => optimal.fold(f64::NEG_INFINITY, f64::max),
        TieBreakMode::Pessimistic => optimal.fold(f64::INFINITY, f64::min),
    };
    (lv, best_f)
}

#[test]
fn families_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for case in 0..25 {
        let leader_actions = rng.gen_range(1..=2);
        let dyadic = case % 2 == 0;
        let fam = StackelbergMdpFamily::new((0..leader_actions).map(|_| random_mdp(&mut rng, 3, 2, 3, dyadic)).collect())
            .unwrap();
        for mode in MODES {
            let sol = solve_stackelberg_mdp(&fam, mode).unwrap();
            let oracle: Vec<(f64, f64)> = fam.mdps.iter().map(|m| oracle_value(m, mode)).collect();
            for (got, want) in sol.per_action.iter().zip(&oracle) {
                assert!((got.0 - want.0).abs() <= 1e-9 && (got.1 - want.1).abs() <= 1e-9, "case {case}: {got:?} vs {want:?}");
            }
            let best = oracle.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
            assert!((sol.leader_value - best).abs() <= 1e-9, "case {case}");
            let (lv, fv) = evaluate(&fam.mdps[sol.leader_action], &sol.policy.0);
            assert!((lv - sol.leader_value).abs() <= 1e-9 && (fv - sol.follower_value).abs() <= 1e-9);
        }
    }
}

#[test]
fn optimistic_never_below_pessimistic() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..50 {
        let m = random_mdp(&mut rng, 3, 3, 4, case % 2 == 0);
        let opt = follower_dp(&m, TieBreakMode::Optimistic).unwrap().initial_values(&m);
        let pes = follower_dp(&m, TieBreakMode::Pessimistic).unwrap().initial_values(&m);
        assert!(opt.0 >= pes.0 - 1e-12, "case {case}");
        assert!((opt.1 - pes.1).abs() <= 1e-9, "case {case}");
    }
}

#[test]
fn reported_values_replay_bellman_backups() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for case in 0..30 {
        let mut m = random_mdp(&mut rng, 4, 3, 5, case % 2 == 0);
        if case % 3 == 0 {
            m.discount = 0.9;
        }
        for mode in MODES {
            let dp = follower_dp(&m, mode).unwrap();
            assert!(bellman_residual(&m, &dp) <= 1e-9, "case {case}");
            for h in 0..m.horizon {
                for s in 0..m.states {
                    let q = |a: usize, v: &[Vec<f64>], r: &[Vec<Vec<f64>>]| {
                        r[h][s][a]
                            + m.discount * m.transitions[h][s][a].iter().zip(&v[h + 1]).map(|(p, x)| p * x).sum::<f64>()
                    };
                    let best = (0..m.actions).map(|a| q(a, &dp.follower_values, &m.follower_rewards)).fold(f64::NEG_INFINITY, f64::max);
                    let a = dp.policy.action(h, s);
                    assert!((dp.follower_values[h][s] - best).abs() <= 1e-9, "case {case}");
                    assert!((dp.leader_values[h][s] - q(a, &dp.leader_values, &m.leader_rewards)).abs() <= 1e-9);
                }
            }
            assert!(dp.follower_values[m.horizon].iter().chain(&dp.leader_values[m.horizon]).all(|&v| v == 0.0));
        }
    }
}

#[test]
fn stepwise_reward_shift_keeps_policy() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for case in 0..30 {
        let m = random_mdp(&mut rng, 3, 3, 4, case % 2 == 0);
        let h = rng.gen_range(0..m.horizon);
        // Dyadic shifts keep exact ties exact.
        let shift = f64::from(rng.gen_range(-8i32..=8)) / 4.0;
        let mut shifted = m.clone();
        for row in shifted.follower_rewards[h].iter_mut() {
            for r in row.iter_mut() {
                *r += shift;
            }
        }
        for mode in MODES {
            let a = follower_dp(&m, mode).unwrap();
            let b = follower_dp(&shifted, mode).unwrap();
            assert_eq!(a.policy, b.policy, "case {case}");
        }
    }
}
