//! Continuous Stackelberg games as nested optimization over boxes.
//!
//! The follower solves `opt_{w in W} L(theta, w)` by projected gradient; the
//! leader descends its reduced objective `J(theta, w*(theta))` using either
//! the implicit-function hypergradient or central differences through the
//! inner solve. Internally both players are turned into minimizers by the
//! sign of their [`Sense`].
//!
//! Objective evaluators are shared through `Arc` and may be called from
//! several threads at once, so implementations must be `Send + Sync` and free
//! of interior mutation that would make results order-dependent.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::game::Sense;

/// Step for central-difference first derivatives in [`Objective`] defaults.
pub const GRAD_STEP: f64 = 1e-6;
/// Step for second differences in [`Objective`] defaults.
pub const HESS_STEP: f64 = 1e-4;
/// Follower Hessians with a larger condition number are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// A smooth objective of leader variables `theta` and follower variables
/// `omega`. Only [`Objective::value`] is required; derivatives default to
/// finite differences and may be overridden with exact forms.
pub trait Objective: Send + Sync {
    fn value(&self, theta: &[f64], omega: &[f64]) -> f64;

    fn grad_theta(&self, theta: &[f64], omega: &[f64]) -> Vec<f64> {
        central_diff(|t| self.value(t, omega), theta, GRAD_STEP)
    }

    fn grad_omega(&self, theta: &[f64], omega: &[f64]) -> Vec<f64> {
        central_diff(|w| self.value(theta, w), omega, GRAD_STEP)
    }

    /// `d^2 / d omega^2`, `omega.len()` square.
    fn hess_omega_omega(&self, theta: &[f64], omega: &[f64]) -> DMatrix<f64> {
        let n = omega.len();
        let f = |w: &[f64]| self.value(theta, w);
        let h = HESS_STEP;
        let f0 = f(omega);
        let mut out = DMatrix::zeros(n, n);
        let mut w = omega.to_vec();
        for i in 0..n {
            w[i] = omega[i] + h;
            let fp = f(&w);
            w[i] = omega[i] - h;
            let fm = f(&w);
            w[i] = omega[i];
            out[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
            for j in 0..i {
                let mut corner = |si: f64, sj: f64| {
                    w[i] = omega[i] + si * h;
                    w[j] = omega[j] + sj * h;
                    let v = f(&w);
                    w[i] = omega[i];
                    w[j] = omega[j];
                    v
                };
                let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * h * h);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    /// `d^2 / d omega d theta`, `omega.len()` rows by `theta.len()` columns.
    fn hess_omega_theta(&self, theta: &[f64], omega: &[f64]) -> DMatrix<f64> {
        let h = HESS_STEP;
        let mut out = DMatrix::zeros(omega.len(), theta.len());
        let mut t = theta.to_vec();
        let mut w = omega.to_vec();
        for i in 0..omega.len() {
            for j in 0..theta.len() {
                let mut corner = |si: f64, sj: f64| {
                    w[i] = omega[i] + si * h;
                    t[j] = theta[j] + sj * h;
                    let v = self.value(&t, &w);
                    w[i] = omega[i];
                    t[j] = theta[j];
                    v
                };
                out[(i, j)] = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * h * h);
            }
        }
        out
    }
}

impl<F> Objective for F
where
    F: Fn(&[f64], &[f64]) -> f64 + Send + Sync,
{
    fn value(&self, theta: &[f64], omega: &[f64]) -> f64 {
        self(theta, omega)
    }
}

fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let fp = f(&p);
            p[i] = x[i] - h;
            let fm = f(&p);
            p[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Central-difference gradient of `f` at `x`.
pub fn finite_diff_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let mut p = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let mut eval = |v: f64| {
            p[i] = v;
            let y = f(&p);
            p[i] = x[i];
            if y.is_finite() {
                Ok(y)
            } else {
                let mut point = x.to_vec();
                point[i] = v;
                Err(Error::NumericalFailure {
                    point,
                    reason: "non-finite function value".into(),
                })
            }
        };
        let fp = eval(x[i] + h)?;
        let fm = eval(x[i] - h)?;
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

/// `0.5 z'Qz + c'z + k` with `z = (theta, omega)`; derivatives are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    theta_dim: usize,
    /// Symmetrized `Q`.
    hessian: DMatrix<f64>,
    linear: Vec<f64>,
    constant: f64,
}

impl QuadraticObjective {
    pub fn new(theta_dim: usize, hessian: Vec<Vec<f64>>, linear: Vec<f64>, constant: f64) -> Result<Self> {
        let n = linear.len();
        if theta_dim > n {
            return Err(invalid(format!("theta dimension {theta_dim} exceeds variable count {n}")));
        }
        if hessian.len() != n || hessian.iter().any(|r| r.len() != n) {
            return Err(invalid(format!("quadratic form must be {n}x{n}")));
        }
        if !constant.is_finite() || linear.iter().chain(hessian.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(invalid("quadratic objective has non-finite coefficients"));
        }
        let q = DMatrix::from_fn(n, n, |i, j| 0.5 * (hessian[i][j] + hessian[j][i]));
        Ok(Self {
            theta_dim,
            hessian: q,
            linear,
            constant,
        })
    }

    fn joined(&self, theta: &[f64], omega: &[f64]) -> Vec<f64> {
        theta.iter().chain(omega).copied().collect()
    }

    fn gradient(&self, theta: &[f64], omega: &[f64]) -> Vec<f64> {
        let z = self.joined(theta, omega);
        (0..z.len())
            .map(|i| self.linear[i] + (0..z.len()).map(|j| self.hessian[(i, j)] * z[j]).sum::<f64>())
            .collect()
    }
}

impl Objective for QuadraticObjective {
    fn value(&self, theta: &[f64], omega: &[f64]) -> f64 {
        let z = self.joined(theta, omega);
        let mut v = self.constant;
        for i in 0..z.len() {
            v += self.linear[i] * z[i];
            for j in 0..z.len() {
                v += 0.5 * z[i] * self.hessian[(i, j)] * z[j];
            }
        }
        v
    }

    fn grad_theta(&self, theta: &[f64], omega: &[f64]) -> Vec<f64> {
        self.gradient(theta, omega)[..self.theta_dim].to_vec()
    }

    fn grad_omega(&self, theta: &[f64], omega: &[f64]) -> Vec<f64> {
        self.gradient(theta, omega)[self.theta_dim..].to_vec()
    }

    fn hess_omega_omega(&self, _theta: &[f64], omega: &[f64]) -> DMatrix<f64> {
        let t = self.theta_dim;
        self.hessian.view((t, t), (omega.len(), omega.len())).into_owned()
    }

    fn hess_omega_theta(&self, theta: &[f64], omega: &[f64]) -> DMatrix<f64> {
        self.hessian.view((self.theta_dim, 0), (omega.len(), theta.len())).into_owned()
    }
}

/// Product of closed intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds(Vec<(f64, f64)>);

impl BoxBounds {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(invalid("box must have at least one coordinate"));
        }
        for (k, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(invalid(format!("box coordinate {k} has invalid interval [{lo}, {hi}]")));
            }
        }
        Ok(Self(bounds))
    }

    pub fn unit(dim: usize) -> Self {
        Self(vec![(0.0, 1.0); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn center(&self) -> Vec<f64> {
        self.0.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.0).map(|(v, &(lo, hi))| v.clamp(lo, hi)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.0).all(|(v, &(lo, hi))| *v >= lo && *v <= hi)
    }

    /// Intersection with the sup-norm ball of `radius` around `center`.
    pub fn around(&self, center: &[f64], radius: f64) -> Self {
        Self(
            self.0
                .iter()
                .zip(center)
                .map(|(&(lo, hi), c)| ((c - radius).max(lo), (c + radius).min(hi)))
                .collect(),
        )
    }
}

#[derive(Clone)]
pub struct BilevelProblem {
    pub leader: Arc<dyn Objective>,
    pub follower: Arc<dyn Objective>,
    pub leader_box: BoxBounds,
    pub follower_box: BoxBounds,
    pub leader_sense: Sense,
    pub follower_sense: Sense,
}

impl std::fmt::Debug for BilevelProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BilevelProblem")
            .field("leader_box", &self.leader_box)
            .field("follower_box", &self.follower_box)
            .field("leader_sense", &self.leader_sense)
            .field("follower_sense", &self.follower_sense)
            .finish_non_exhaustive()
    }
}

impl BilevelProblem {
    pub fn new(
        leader: Arc<dyn Objective>,
        follower: Arc<dyn Objective>,
        leader_box: BoxBounds,
        follower_box: BoxBounds,
        leader_sense: Sense,
        follower_sense: Sense,
    ) -> Result<Self> {
        let p = Self {
            leader,
            follower,
            leader_box,
            follower_box,
            leader_sense,
            follower_sense,
        };
        let (t, w) = (p.leader_box.center(), p.follower_box.center());
        if !p.leader.value(&t, &w).is_finite() || !p.follower.value(&t, &w).is_finite() {
            return Err(invalid("objectives are not finite at the box centers"));
        }
        Ok(p)
    }

    fn with_boxes(&self, leader_box: BoxBounds, follower_box: BoxBounds) -> Self {
        Self {
            leader_box,
            follower_box,
            ..self.clone()
        }
    }

    /// Leader objective turned into a quantity to minimize.
    pub fn leader_cost(&self, theta: &[f64], omega: &[f64]) -> f64 {
        -self.leader_sense.sign() * self.leader.value(theta, omega)
    }

    pub fn follower_cost(&self, theta: &[f64], omega: &[f64]) -> f64 {
        -self.follower_sense.sign() * self.follower.value(theta, omega)
    }

    fn follower_cost_grad(&self, theta: &[f64], omega: &[f64]) -> Vec<f64> {
        let s = -self.follower_sense.sign();
        self.follower.grad_omega(theta, omega).into_iter().map(|g| s * g).collect()
    }

    /// Norm of the unit-step projected gradient of the follower cost at
    /// `omega`; zero exactly at first-order stationary points of the box
    /// constrained inner problem.
    pub fn follower_residual(&self, theta: &[f64], omega: &[f64]) -> f64 {
        let g = self.follower_cost_grad(theta, omega);
        projected_step_norm(&self.follower_box, omega, &g)
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if !self.leader_box.contains(theta) {
            return Err(invalid(format!("leader point {theta:?} outside its box")));
        }
        Ok(())
    }
}

fn projected_step_norm(bounds: &BoxBounds, x: &[f64], g: &[f64]) -> f64 {
    let stepped: Vec<f64> = x.iter().zip(g).map(|(x, g)| x - g).collect();
    bounds
        .clamp(&stepped)
        .iter()
        .zip(x)
        .map(|(p, x)| (x - p) * (x - p))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypergradientMode {
    Implicit,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LseConfig {
    pub inner_iterations: usize,
    pub inner_step: f64,
    pub inner_tol: f64,
    pub outer_iterations: usize,
    pub outer_step: f64,
    pub outer_tol: f64,
    pub hypergradient: HypergradientMode,
    pub fd_step: f64,
}

impl Default for LseConfig {
    fn default() -> Self {
        Self {
            inner_iterations: 20_000,
            inner_step: 0.1,
            inner_tol: 1e-11,
            outer_iterations: 5_000,
            outer_step: 0.1,
            outer_tol: 1e-7,
            hypergradient: HypergradientMode::Implicit,
            fd_step: 1e-5,
        }
    }
}

impl LseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inner_iterations == 0 || self.outer_iterations == 0 {
            return Err(invalid("iteration counts must be at least 1"));
        }
        for (name, v) in [
            ("inner_step", self.inner_step),
            ("inner_tol", self.inner_tol),
            ("outer_step", self.outer_step),
            ("outer_tol", self.outer_tol),
            ("fd_step", self.fd_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
    pub leader_value: f64,
    pub follower_value: f64,
    /// Projected hypergradient norm at this iterate.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsePoint {
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
    pub leader_value: f64,
    pub follower_value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Set when another inner start at the final leader point reached a
    /// strictly better follower optimum than the warm-started one.
    pub follower_multimodal: bool,
    pub trace: Vec<TraceEntry>,
}

/// Projected gradient with fixed step on the follower's problem at `theta`,
/// started from `init`. Stops when the projected-gradient norm is at most
/// `cfg.inner_tol`.
pub fn solve_follower(problem: &BilevelProblem, theta: &[f64], init: &[f64], cfg: &LseConfig) -> Result<Vec<f64>> {
    problem.check_theta(theta)?;
    if !problem.follower_box.contains(init) {
        return Err(invalid(format!("follower start {init:?} outside its box")));
    }
    let mut omega = init.to_vec();
    for it in 0..=cfg.inner_iterations {
        let g = problem.follower_cost_grad(theta, &omega);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure {
                point: omega,
                reason: "non-finite follower gradient".into(),
            });
        }
        let residual = projected_step_norm(&problem.follower_box, &omega, &g);
        if residual <= cfg.inner_tol {
            return Ok(omega);
        }
        if it == cfg.inner_iterations {
            return Err(Error::NotConverged {
                theta: theta.to_vec(),
                residual,
                iterations: it,
            });
        }
        let next: Vec<f64> = omega.iter().zip(&g).map(|(w, g)| w - cfg.inner_step * g).collect();
        omega = problem.follower_box.clamp(&next);
        if !problem.follower.value(theta, &omega).is_finite() {
            return Err(Error::NumericalFailure {
                point: omega,
                reason: "non-finite follower objective".into(),
            });
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// Gradient of `theta -> J(theta, w*(theta))` in the leader's own sense.
pub fn hypergradient(problem: &BilevelProblem, theta: &[f64], omega: &[f64], cfg: &LseConfig) -> Result<Vec<f64>> {
    problem.check_theta(theta)?;
    match cfg.hypergradient {
        HypergradientMode::Implicit => implicit_hypergradient(problem, theta, omega, cfg),
        HypergradientMode::FiniteDifference => fd_hypergradient(problem, theta, omega, cfg),
    }
}

fn implicit_hypergradient(problem: &BilevelProblem, theta: &[f64], omega: &[f64], cfg: &LseConfig) -> Result<Vec<f64>> {
    let mut grad = problem.leader.grad_theta(theta, omega);
    let cost_grad = problem.follower_cost_grad(theta, omega);
    // Coordinates pinned at a bound by the follower's gradient do not move
    // with theta; only the free block enters the implicit derivative.
    let free: Vec<usize> = problem
        .follower_box
        .intervals()
        .iter()
        .enumerate()
        .filter(|&(k, &(lo, hi))| {
            let scale = 1e-9 * (hi - lo).max(1.0);
            let at_lo = omega[k] - lo <= scale;
            let at_hi = hi - omega[k] <= scale;
            let pinned = (at_lo && at_hi) || (at_lo && cost_grad[k] > cfg.inner_tol) || (at_hi && cost_grad[k] < -cfg.inner_tol);
            !pinned
        })
        .map(|(k, _)| k)
        .collect();
    if free.is_empty() {
        return Ok(grad);
    }
    let h = problem.follower.hess_omega_omega(theta, omega);
    let b = problem.follower.hess_omega_theta(theta, omega);
    let hf = DMatrix::from_fn(free.len(), free.len(), |i, j| h[(free[i], free[j])]);
    let bf = DMatrix::from_fn(free.len(), theta.len(), |i, j| b[(free[i], j)]);
    let singular = |condition| Error::SingularHessian {
        theta: theta.to_vec(),
        omega: omega.to_vec(),
        condition,
    };
    let sv = hf.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 0.0) || !(smax / smin <= MAX_CONDITION) {
        return Err(singular(if smin > 0.0 { smax / smin } else { f64::INFINITY }));
    }
    let sensitivity = hf.lu().solve(&bf).ok_or_else(|| singular(f64::INFINITY))?;
    let jw = problem.leader.grad_omega(theta, omega);
    for (j, g) in grad.iter_mut().enumerate() {
        let correction: f64 = free.iter().enumerate().map(|(i, &k)| jw[k] * sensitivity[(i, j)]).sum();
        *g -= correction;
    }
    Ok(grad)
}

fn fd_hypergradient(problem: &BilevelProblem, theta: &[f64], omega: &[f64], cfg: &LseConfig) -> Result<Vec<f64>> {
    let h = cfg.fd_step;
    let mut grad = Vec::with_capacity(theta.len());
    for (j, &(lo, hi)) in problem.leader_box.intervals().iter().enumerate() {
        let plus = (theta[j] + h).min(hi);
        let minus = (theta[j] - h).max(lo);
        if plus <= minus {
            grad.push(0.0);
            continue;
        }
        let reduced = |v: f64| -> Result<f64> {
            let mut t = theta.to_vec();
            t[j] = v;
            let w = solve_follower(problem, &t, omega, cfg)?;
            Ok(problem.leader.value(&t, &w))
        };
        grad.push((reduced(plus)? - reduced(minus)?) / (plus - minus));
    }
    Ok(grad)
}

/// Projected hypergradient descent on the leader's reduced objective,
/// warm-starting each inner solve from the previous follower point.
pub fn solve_lse(problem: &BilevelProblem, theta0: &[f64], cfg: &LseConfig) -> Result<LsePoint> {
    cfg.validate()?;
    problem.check_theta(theta0)?;
    let sign = -problem.leader_sense.sign();
    let mut theta = theta0.to_vec();
    let mut omega = solve_follower(problem, &theta, &problem.follower_box.center(), cfg)?;
    let mut trace = Vec::new();
    let mut converged = false;
    for k in 0..=cfg.outer_iterations {
        let cost_grad: Vec<f64> = hypergradient(problem, &theta, &omega, cfg)?.into_iter().map(|g| sign * g).collect();
        let grad_norm = projected_step_norm(&problem.leader_box, &theta, &cost_grad);
        trace.push(TraceEntry {
            iteration: k,
            theta: theta.clone(),
            omega: omega.clone(),
            leader_value: problem.leader.value(&theta, &omega),
            follower_value: problem.follower.value(&theta, &omega),
            grad_norm,
        });
        if grad_norm <= cfg.outer_tol {
            converged = true;
            break;
        }
        if k == cfg.outer_iterations {
            break;
        }
        let next: Vec<f64> = theta.iter().zip(&cost_grad).map(|(t, g)| t - cfg.outer_step * g).collect();
        theta = problem.leader_box.clamp(&next);
        omega = solve_follower(problem, &theta, &omega, cfg)?;
    }
    let follower_multimodal = probe_multimodal(problem, &theta, &omega, cfg);
    Ok(LsePoint {
        leader_value: problem.leader.value(&theta, &omega),
        follower_value: problem.follower.value(&theta, &omega),
        iterations: trace.len() - 1,
        theta,
        omega,
        converged,
        follower_multimodal,
        trace,
    })
}

fn probe_multimodal(problem: &BilevelProblem, theta: &[f64], omega: &[f64], cfg: &LseConfig) -> bool {
    let found = problem.follower_cost(theta, omega);
    let fb = problem.follower_box.intervals();
    let starts = [
        problem.follower_box.center(),
        fb.iter().map(|b| b.0).collect(),
        fb.iter().map(|b| b.1).collect(),
    ];
    starts.iter().any(|start| match solve_follower(problem, theta, start, cfg) {
        Ok(w) => problem.follower_cost(theta, &w) < found - 1e-9 * (1.0 + found.abs()),
        Err(_) => false,
    })
}

/// Sampled check of local Stackelberg optimality. Neighborhoods are
/// sup-norm balls of `radius` intersected with the boxes; the follower's
/// restricted response is a local inner solve warm-started at the point's
/// follower strategy. Returns false if some sampled leader point improves the
/// leader's value by more than `tol`.
pub fn check_local_se(
    problem: &BilevelProblem,
    point: &LsePoint,
    radius: f64,
    samples: usize,
    tol: f64,
    seed: u64,
    cfg: &LseConfig,
) -> Result<bool> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid(format!("neighborhood radius must be positive, got {radius}")));
    }
    if samples == 0 {
        return Err(invalid("at least one sample is required"));
    }
    problem.check_theta(&point.theta)?;
    let leader_nbhd = problem.leader_box.around(&point.theta, radius);
    let follower_nbhd = problem.follower_box.around(&point.omega, radius);
    let local = problem.with_boxes(problem.leader_box.clone(), follower_nbhd);
    let anchor = local.follower_box.clamp(&point.omega);
    let reference = solve_follower(&local, &point.theta, &anchor, cfg)?;
    let reference_cost = problem.leader_cost(&point.theta, &reference);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let theta: Vec<f64> = leader_nbhd
            .intervals()
            .iter()
            .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
            .collect();
        let omega = solve_follower(&local, &theta, &anchor, cfg)?;
        if problem.leader_cost(&theta, &omega) < reference_cost - tol {
            return Ok(false);
        }
    }
    Ok(true)
}
