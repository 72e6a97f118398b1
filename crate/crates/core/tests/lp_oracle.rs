//! Simplex against brute-force vertex enumeration on small bounded LPs.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stackgov_core::lp::{solve_lp, LinearProgram, LpStatus};

const VARS: usize = 5;
const ROWS: usize = 8;
const CAP: f64 = 10.0;

fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let mut lp = LinearProgram::nonnegative((0..VARS).map(|_| rng.gen_range(-3.0..3.0)).collect());
    for _ in 0..ROWS {
        let a: Vec<f64> = (0..VARS).map(|_| rng.gen_range(-2.0..2.0)).collect();
        lp.inequalities.push((a, rng.gen_range(-3.0..8.0)));
    }
    for k in 0..VARS {
        let mut e = vec![0.0; VARS];
        e[k] = 1.0;
        lp.inequalities.push((e, CAP));
    }
    lp
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Best objective over all basic feasible points, or `None` if infeasible.
fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let mut rows: Vec<(Vec<f64>, f64)> = lp.inequalities.clone();
    for k in 0..VARS {
        let mut e = vec![0.0; VARS];
        e[k] = -1.0;
        rows.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    for active in combinations(rows.len(), VARS) {
        let a = DMatrix::from_fn(VARS, VARS, |i, j| rows[active[i]].0[j]);
        let b = DVector::from_iterator(VARS, active.iter().map(|&r| rows[r].1));
        let Some(x) = a.lu().solve(&b) else { continue };
        let feasible = rows.iter().all(|(r, rhs)| r.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() <= rhs + 1e-9);
        if feasible {
            let v: f64 = lp.objective.iter().zip(x.iter()).map(|(c, q)| c * q).sum();
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best
}

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut optimal, mut infeasible) = (0, 0);
    for case in 0..30 {
        let lp = random_lp(&mut rng);
        let sol = solve_lp(&lp, 1e-9).unwrap();
        match vertex_oracle(&lp) {
            Some(v) => {
                assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
                let got = sol.objective.unwrap();
                assert!((got - v).abs() <= 1e-6 * (1.0 + v.abs()), "case {case}: {got} vs {v}");
                assert!(lp.max_violation(&sol.x) <= 1e-7, "case {case}");
                optimal += 1;
            }
            None => {
                assert_eq!(sol.status, LpStatus::Infeasible, "case {case}");
                infeasible += 1;
            }
        }
    }
    assert!(optimal > 10 && infeasible > 0, "{optimal} optimal, {infeasible} infeasible");
}
