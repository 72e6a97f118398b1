mod common;

use stackgov_core::equilibrium::{
    commitment_lps, solve_mixed_commitment_se, solve_nash_support_enum, solve_pure_se, verify_ne, verify_se,
};
use stackgov_core::game::DEFAULT_BR_TOL;
use stackgov_core::lp::{solve_lp, LpStatus};
use stackgov_core::{BimatrixGame, MixedStrategy, TieBreakMode};

fn sse_value(g: &BimatrixGame) -> f64 {
    solve_mixed_commitment_se(g).unwrap().profile().unwrap().leader_value
}

/// Optimistic leader value maximized over `p` on a uniform grid, two leader
/// actions only.
fn grid_sse_two_rows(g: &BimatrixGame, steps: usize) -> f64 {
    (0..=steps)
        .map(|k| {
            let p = k as f64 / steps as f64;
            let x = MixedStrategy::from_noisy(&[p, 1.0 - p]).unwrap();
            g.respond(&x, TieBreakMode::Optimistic, DEFAULT_BR_TOL).unwrap().leader_value
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn commitment_example_against_grid() {
    let g = BimatrixGame::maximizing(vec![vec![1.0, 3.0], vec![0.0, 2.0]], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let sse = solve_mixed_commitment_se(&g).unwrap();
    let p = sse.profile().unwrap();
    assert!((p.leader_value - 2.5).abs() < 1e-9);
    assert!((grid_sse_two_rows(&g, 10_000) - 2.5).abs() < 1e-6);
    assert!(verify_se(&g, p, TieBreakMode::Optimistic, 200, 1e-6).unwrap());
    let ne = solve_nash_support_enum(&g, 1e-9).unwrap();
    assert_eq!(ne.nash().len(), 1);
    assert!((ne.nash()[0].leader_value - 1.0).abs() < 1e-9);
}

#[test]
fn zero_sum_values_coincide() {
    let mut rng = common::rng(11);
    for case in 0..100 {
        let g = common::zero_sum(&mut rng, 4);
        let ne = solve_nash_support_enum(&g, 1e-9).unwrap();
        assert!(!ne.nash().is_empty(), "case {case}");
        let sse = sse_value(&g);
        for eq in ne.nash() {
            assert!((sse - eq.leader_value).abs() <= 1e-6, "case {case}: {sse} vs {}", eq.leader_value);
        }
    }
}

#[test]
fn commitment_dominates_every_nash() {
    let mut rng = common::rng(12);
    for case in 0..100 {
        let g = common::general_sum(&mut rng, 4);
        let ne = solve_nash_support_enum(&g, 1e-9).unwrap();
        assert!(!ne.nash().is_empty(), "case {case}");
        let sse = sse_value(&g);
        for eq in ne.nash() {
            assert!(verify_ne(&g, eq, 1e-7).unwrap(), "case {case}");
            assert!(sse >= eq.leader_value - 1e-6, "case {case}: {sse} < {}", eq.leader_value);
        }
    }
}

#[test]
fn commitment_value_ordering() {
    let mut rng = common::rng(13);
    for case in 0..200 {
        let g = if case % 2 == 0 { common::general_sum(&mut rng, 4) } else { common::integer_game(&mut rng, 4) };
        let mixed = sse_value(&g);
        let opt = solve_pure_se(&g, TieBreakMode::Optimistic).unwrap().profile().unwrap().leader_value;
        let pes = solve_pure_se(&g, TieBreakMode::Pessimistic).unwrap().profile().unwrap().leader_value;
        assert!(mixed >= opt - 1e-9, "case {case}: {mixed} < {opt}");
        assert!(opt >= pes - 1e-9, "case {case}: {opt} < {pes}");
    }
}

#[test]
fn optimal_lps_replay_within_tolerance() {
    let mut rng = common::rng(14);
    for case in 0..100 {
        let g = common::general_sum(&mut rng, 4);
        for (j, lp) in commitment_lps(&g).iter().enumerate() {
            let sol = solve_lp(lp, 1e-9).unwrap();
            if sol.status == LpStatus::Optimal {
                assert!(lp.max_violation(&sol.x) <= 1e-6, "case {case}, lp {j}");
                let x = MixedStrategy::from_noisy(&sol.x).unwrap();
                let br = g.follower_best_response_set(&x, 1e-6).unwrap();
                assert!(br.contains(&j), "case {case}, lp {j}");
            }
        }
    }
}

#[test]
fn two_row_commitment_matches_grid() {
    let mut rng = common::rng(15);
    for case in 0..50 {
        let m = 2 + case % 3;
        let g = BimatrixGame::maximizing(common::table(&mut rng, 2, m), common::table(&mut rng, 2, m)).unwrap();
        let sse = sse_value(&g);
        let grid = grid_sse_two_rows(&g, 10_000);
        // The supremum may sit on a breakpoint between grid points; leader
        // payoffs are 10-Lipschitz in p here.
        assert!(sse >= grid - 1e-9, "case {case}");
        assert!(sse - grid <= 10.0 * 1e-4 + 1e-9, "case {case}: {sse} vs {grid}");
    }
}

#[test]
fn solved_profiles_pass_grid_verification() {
    let mut rng = common::rng(16);
    for case in 0..30 {
        let g = common::general_sum(&mut rng, 3);
        let sse = solve_mixed_commitment_se(&g).unwrap();
        assert!(verify_se(&g, sse.profile().unwrap(), TieBreakMode::Optimistic, 40, 1e-6).unwrap(), "case {case}");
        for mode in [TieBreakMode::Optimistic, TieBreakMode::Pessimistic] {
            let pure = solve_pure_se(&g, mode).unwrap();
            let p = pure.profile().unwrap();
            // Pure commitments are optimal among pure strategies only.
            assert!(verify_se(&g, p, mode, 1, 1e-9).unwrap(), "case {case}");
        }
    }
}
