//! Solution of `F_h[w] = 0` (and of the truncated equations) on the
//! interior points with `w = g` on the discrete boundary.
//!
//! The main loop is a Hoffman-Karp iteration: freeze the maximizing
//! branch at every point, solve the remaining min-type problem by Howard
//! iteration on the minimizing branch, and repeat. Each frozen policy gives
//! an M-matrix system, solved by a banded LU factorization. If the outer
//! residual stops decreasing, the solver switches to explicit monotone
//! pseudo-time marching and periodically retries policy iteration.

use std::io::Write;
use std::time::Instant;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::operators::{AlphaBranch, BetaBranch, PointOp, PucciParams, Scheme, Truncation, TruncationLevel};
use crate::problem::IsaacsProblem;

const PSEUDO_BLOCK: usize = 500;
const STAGNATION_LIMIT: usize = 3;
const MAX_INNER_ITERS: usize = 100;
const MAX_REFINEMENTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub residual_tol: f64,
    pub max_policy_iters: usize,
    pub max_pseudo_steps: usize,
    pub pseudo_step_safety: f64,
    pub linear_tol: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-9,
            max_policy_iters: 200,
            max_pseudo_steps: 2_000_000,
            pseudo_step_safety: 0.9,
            linear_tol: 1e-12,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("solver.{name}"), format!("{v} must be positive")))
            }
        };
        positive("residual_tol", self.residual_tol)?;
        positive("linear_tol", self.linear_tol)?;
        positive("pseudo_step_safety", self.pseudo_step_safety)?;
        if self.pseudo_step_safety > 1.0 {
            return Err(Error::invalid(
                "solver.pseudo_step_safety",
                format!("{} must be at most 1", self.pseudo_step_safety),
            ));
        }
        if self.max_policy_iters == 0 && self.max_pseudo_steps == 0 {
            return Err(Error::invalid(
                "solver.max_pseudo_steps",
                "at least one of max_policy_iters and max_pseudo_steps must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PolicyIteration,
    PseudoTime,
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub method_used: Method,
    pub wall_time: f64,
}

/// Frozen branch of the maximizing player at one point.
#[derive(Debug, Clone, PartialEq)]
enum AlphaChoice {
    Control(usize),
    /// Frozen `P_h − K` operator.
    Pucci(PointOp),
}

#[derive(Debug, Clone, PartialEq)]
enum BetaChoice {
    Control(usize),
    /// Frozen `−P_h[−·] + K` operator.
    Pucci(PointOp),
}

fn tie_slack(v: f64) -> f64 {
    1e-13 * v.abs().max(1.0)
}

/// Iteration state shared by the policy and pseudo-time phases.
struct Solver<'s, 'a> {
    scheme: &'s Scheme<'a>,
    truncation: Truncation,
    config: SolveConfig,
    kl: usize,
    ku: usize,
}

impl<'s, 'a> Solver<'s, 'a> {
    fn new(scheme: &'s Scheme<'a>, truncation: Truncation, config: SolveConfig) -> Self {
        let (kl, ku) = policy_bandwidth(scheme.grid());
        Self {
            scheme,
            truncation,
            config,
            kl,
            ku,
        }
    }

    fn center(&self, ord: usize) -> usize {
        self.scheme.grid().interior_ids()[ord] as usize
    }

    fn residual(&self, u: &[f64]) -> f64 {
        self.scheme.residual(u, self.truncation)
    }

    /// Value of `α` at `u` after minimizing over the second player.
    fn alpha_value(&self, u: &[f64], ord: usize, alpha: &AlphaChoice) -> f64 {
        match alpha {
            AlphaChoice::Control(a) => self.best_beta(u, ord, *a, None).0,
            AlphaChoice::Pucci(op) => op.apply(u, self.center(ord)),
        }
    }

    /// Minimizing branch for fixed control `alpha`; `current` is kept
    /// unless another branch is strictly better.
    fn best_beta(&self, u: &[f64], ord: usize, alpha: usize, current: Option<&BetaChoice>) -> (f64, BetaChoice) {
        let (mut best, b) = self.scheme.inner_min(u, ord, alpha);
        let mut choice = BetaChoice::Control(b);
        if let Truncation::Lower(k) = self.truncation {
            let (v, mut op) = self.scheme.pucci_op(u, ord, -1.0);
            let v = v + k.value();
            if v < best {
                best = v;
                op.f = k.value();
                choice = BetaChoice::Pucci(op);
            }
        }
        if let Some(BetaChoice::Control(cb)) = current {
            let v = self.scheme.pair_op(ord, alpha, *cb).apply(u, self.center(ord));
            if v <= best + tie_slack(best) {
                return (v, BetaChoice::Control(*cb));
            }
        }
        (best, choice)
    }

    /// Improved maximizing branch at `u`, keeping `current` on ties.
    fn best_alpha(&self, u: &[f64], ord: usize, current: Option<&AlphaChoice>) -> AlphaChoice {
        let mut best = f64::NEG_INFINITY;
        let mut choice = AlphaChoice::Control(0);
        for a in 0..self.scheme.n_alpha() {
            let v = self.scheme.inner_min(u, ord, a).0;
            let v = match self.truncation {
                Truncation::Lower(k) => v.min(self.scheme.pucci_op(u, ord, -1.0).0 + k.value()),
                _ => v,
            };
            if v > best {
                best = v;
                choice = AlphaChoice::Control(a);
            }
        }
        if let Truncation::Upper(k) = self.truncation {
            let (v, mut op) = self.scheme.pucci_op(u, ord, 1.0);
            let v = v - k.value();
            if v > best {
                best = v;
                op.f = -k.value();
                choice = AlphaChoice::Pucci(op);
            }
        }
        if let Some(AlphaChoice::Control(ca)) = current {
            let v = self.alpha_value(u, ord, &AlphaChoice::Control(*ca));
            if v >= best - tie_slack(best) {
                return AlphaChoice::Control(*ca);
            }
        }
        choice
    }

    fn row(&self, ord: usize, alpha: &AlphaChoice, beta: &BetaChoice) -> PointOp {
        match (alpha, beta) {
            (AlphaChoice::Pucci(op), _) => op.clone(),
            (AlphaChoice::Control(_), BetaChoice::Pucci(op)) => op.clone(),
            (AlphaChoice::Control(a), BetaChoice::Control(b)) => self.scheme.pair_op(ord, *a, *b).clone(),
        }
    }

    /// Solves the affine system `row_i(u) = 0` on the interior in place.
    fn solve_linear(&self, rows: &[PointOp], u: &mut [f64]) -> Result<()> {
        let lu = assemble_policy_matrix(self.scheme.grid(), rows, self.kl, self.ku).factor()?;
        let mut last = f64::INFINITY;
        for _ in 0..MAX_REFINEMENTS {
            let mut r: Vec<f64> = rows
                .par_iter()
                .enumerate()
                .map(|(ord, row)| row.apply(u, self.center(ord)))
                .collect();
            let norm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if norm <= self.config.linear_tol || norm >= 0.5 * last {
                break;
            }
            last = norm;
            lu.solve_in_place(&mut r);
            for (ord, d) in r.into_iter().enumerate() {
                u[self.center(ord)] += d;
            }
        }
        Ok(())
    }

    /// Howard iteration on the minimizing player for frozen `alphas`.
    fn inner_solve(&self, alphas: &[AlphaChoice], betas: &mut Vec<BetaChoice>, u: &mut [f64]) -> Result<()> {
        let ni = alphas.len();
        for it in 0..MAX_INNER_ITERS {
            let updated: Vec<(f64, BetaChoice)> = (0..ni)
                .into_par_iter()
                .map(|ord| match &alphas[ord] {
                    AlphaChoice::Control(a) => self.best_beta(u, ord, *a, Some(&betas[ord])),
                    AlphaChoice::Pucci(op) => (op.apply(u, self.center(ord)), betas[ord].clone()),
                })
                .collect();
            let inner_res = updated.iter().fold(0.0f64, |m, (v, _)| m.max(v.abs()));
            let changed = updated.iter().zip(betas.iter()).any(|((_, n), o)| match (n, o) {
                (BetaChoice::Control(x), BetaChoice::Control(y)) => x != y,
                (BetaChoice::Pucci(_), BetaChoice::Pucci(_)) => false,
                _ => true,
            });
            let continuous = updated.iter().any(|(_, b)| matches!(b, BetaChoice::Pucci(_)));
            if it > 0 && (inner_res <= 0.1 * self.config.residual_tol || (!changed && !continuous)) {
                break;
            }
            *betas = updated.into_iter().map(|(_, b)| b).collect();
            let rows: Vec<PointOp> = (0..ni).map(|ord| self.row(ord, &alphas[ord], &betas[ord])).collect();
            self.solve_linear(&rows, u)?;
        }
        Ok(())
    }

    /// One explicit step `u ← u + τ·scheme[u]`; returns the residual of the
    /// input state.
    fn pseudo_step(&self, u: &mut [f64], tau: f64) -> f64 {
        let vals: Vec<f64> = (0..self.scheme.grid().n_interior())
            .into_par_iter()
            .map(|ord| self.scheme.eval_at(u, ord, self.truncation).value)
            .collect();
        let mut res = 0.0f64;
        for (ord, v) in vals.into_iter().enumerate() {
            res = res.max(v.abs());
            u[self.center(ord)] += tau * v;
        }
        res
    }

    fn run(&self, u: &mut [f64]) -> Result<(usize, f64, Method)> {
        let cfg = self.config;
        let ni = self.scheme.grid().n_interior();
        let tau = cfg.pseudo_step_safety / self.scheme.max_diagonal(!matches!(self.truncation, Truncation::None));
        let mut policy_iters = 0;
        let mut pseudo_steps = 0;
        let mut used_policy = false;
        let mut used_pseudo = false;
        let mut alphas: Vec<AlphaChoice> = Vec::new();
        let mut betas: Vec<BetaChoice> = Vec::new();
        let mut residual = self.residual(u);
        let method = |p: bool, q: bool| match (p, q) {
            (_, false) => Method::PolicyIteration,
            (false, true) => Method::PseudoTime,
            (true, true) => Method::Hybrid,
        };

        loop {
            if residual <= cfg.residual_tol {
                return Ok((policy_iters + pseudo_steps, residual, method(used_policy, used_pseudo)));
            }
            // policy phase
            let mut stagnation = 0;
            while policy_iters < cfg.max_policy_iters && stagnation < STAGNATION_LIMIT {
                used_policy = true;
                policy_iters += 1;
                let u_ref: &[f64] = u;
                alphas = (0..ni)
                    .into_par_iter()
                    .map(|ord| self.best_alpha(u_ref, ord, alphas.get(ord)))
                    .collect();
                if betas.len() != ni {
                    betas = vec![BetaChoice::Control(0); ni];
                }
                self.inner_solve(&alphas, &mut betas, u)?;
                let r = self.residual(u);
                debug!("policy iteration {policy_iters}: residual {r:e}");
                if r < residual {
                    stagnation = 0;
                } else {
                    stagnation += 1;
                }
                residual = r;
                if residual <= cfg.residual_tol {
                    return Ok((policy_iters + pseudo_steps, residual, method(used_policy, used_pseudo)));
                }
            }
            if pseudo_steps >= cfg.max_pseudo_steps {
                break;
            }
            // pseudo-time phase
            if used_policy {
                info!("policy iteration stalled at residual {residual:e}; switching to pseudo-time marching");
            }
            used_pseudo = true;
            let budget = if policy_iters < cfg.max_policy_iters {
                PSEUDO_BLOCK.min(cfg.max_pseudo_steps - pseudo_steps)
            } else {
                cfg.max_pseudo_steps - pseudo_steps
            };
            for _ in 0..budget {
                let r = self.pseudo_step(u, tau);
                pseudo_steps += 1;
                if r <= cfg.residual_tol {
                    // the step was taken from a converged state; undoing it
                    // is unnecessary since it moves by at most τ·r
                    break;
                }
            }
            residual = self.residual(u);
            if residual > cfg.residual_tol && policy_iters >= cfg.max_policy_iters && pseudo_steps >= cfg.max_pseudo_steps {
                break;
            }
        }
        Err(Error::NoConvergence {
            iterations: policy_iters + pseudo_steps,
            residual,
            tolerance: cfg.residual_tol,
        })
    }
}

/// Matrix of the linearization `−∂row/∂u` restricted to interior unknowns:
/// diagonal `Σ w + c`, off-diagonal `−w` for interior neighbors.
pub fn assemble_policy_matrix(grid: &Grid, rows: &[PointOp], kl: usize, ku: usize) -> BandMatrix {
    let mut m = BandMatrix::zeros(rows.len(), kl, ku);
    for (ord, row) in rows.iter().enumerate() {
        m.add(ord, ord, row.diagonal());
        for &(id, w) in &row.weights {
            if let Some(o) = grid.ordinal(id as usize) {
                m.add(ord, o, -w);
            }
        }
    }
    m
}

/// Rows of the frozen control-pair policy `(α_i, β_i)` per interior ordinal.
pub fn policy_rows(scheme: &Scheme<'_>, policy: &[(usize, usize)]) -> Vec<PointOp> {
    policy
        .iter()
        .enumerate()
        .map(|(ord, &(a, b))| scheme.pair_op(ord, a, b).clone())
        .collect()
}

/// Half-bandwidths `(kl, ku)` of policy matrices on `grid`.
pub fn policy_bandwidth(grid: &Grid) -> (usize, usize) {
    let n = grid.stencil().len();
    let (mut kl, mut ku) = (0, 0);
    for ord in 0..grid.n_interior() {
        for k in 0..n {
            for fwd in [true, false] {
                if let Some(o) = grid.ordinal(grid.neighbor(ord, k, fwd)) {
                    if o < ord {
                        kl = kl.max(ord - o);
                    } else {
                        ku = ku.max(o - ord);
                    }
                }
            }
        }
    }
    (kl, ku)
}

/// Solves the (possibly truncated) scheme starting from `g` on every grid
/// point.
pub fn solve_scheme<'g>(
    scheme: &Scheme<'_>,
    grid: &'g Grid,
    truncation: Truncation,
    config: &SolveConfig,
) -> Result<(GridFunction<'g>, SolveReport)> {
    config.validate()?;
    let start = Instant::now();
    let g = &scheme.problem().g;
    let mut u = GridFunction::from_fn(grid, |x| g.value(x));
    let solver = Solver::new(scheme, truncation, *config);
    let (iterations, final_residual, method_used) = solver.run(u.values_mut())?;
    let report = SolveReport {
        iterations,
        final_residual,
        method_used,
        wall_time: start.elapsed().as_secs_f64(),
    };
    info!(
        "solved {} interior points: {} iterations, residual {:e}",
        grid.n_interior(),
        iterations,
        final_residual
    );
    Ok((u, report))
}

/// `w` with `F_h[w] = 0` on the interior and `w = g` on the boundary.
pub fn solve_isaacs<'g>(
    problem: &IsaacsProblem,
    grid: &'g Grid,
    config: &SolveConfig,
) -> Result<(GridFunction<'g>, SolveReport)> {
    let scheme = Scheme::new(problem, grid, PucciParams::default_for(&problem.bounds), 0.0)?;
    solve_scheme(&scheme, grid, Truncation::None, config)
}

/// Solutions `u_K` of `max(F_h, P_h − K) = 0` and `v_K` of
/// `min(F_h, −P_h[−·] + K) = 0`.
pub struct TruncatedPair<'g> {
    pub u: GridFunction<'g>,
    pub v: GridFunction<'g>,
    pub report_u: SolveReport,
    pub report_v: SolveReport,
}

pub fn solve_truncated_pair<'g>(
    problem: &IsaacsProblem,
    grid: &'g Grid,
    k: TruncationLevel,
    config: &SolveConfig,
) -> Result<TruncatedPair<'g>> {
    let scheme = Scheme::new(problem, grid, PucciParams::default_for(&problem.bounds), 0.0)?;
    solve_truncated_pair_with(&scheme, grid, k, config)
}

pub fn solve_truncated_pair_with<'g>(
    scheme: &Scheme<'_>,
    grid: &'g Grid,
    k: TruncationLevel,
    config: &SolveConfig,
) -> Result<TruncatedPair<'g>> {
    let (u, report_u) = solve_scheme(scheme, grid, Truncation::Upper(k), config)?;
    let (v, report_v) = solve_scheme(scheme, grid, Truncation::Lower(k), config)?;
    Ok(TruncatedPair {
        u,
        v,
        report_u,
        report_v,
    })
}

/// Solution dump: `i,j,x,y,value,residual,branch,alpha,beta`, one row per
/// grid point in lexicographic order. Boundary rows carry `boundary` and
/// empty control columns.
pub fn write_solution_csv<W: Write>(scheme: &Scheme<'_>, u: &GridFunction<'_>, truncation: Truncation, mut w: W) -> Result<()> {
    let grid = scheme.grid();
    let problem = scheme.problem();
    let evals: Vec<_> = (0..grid.n_interior())
        .into_par_iter()
        .map(|ord| scheme.eval_at(u.values(), ord, truncation))
        .collect();
    writeln!(w, "i,j,x,y,value,residual,branch,alpha,beta")?;
    for id in 0..grid.len() {
        let [i, j] = grid.lattice(id);
        let x = grid.point(id);
        match grid.ordinal(id) {
            Some(ord) => {
                let e = &evals[ord];
                let alpha = match e.alpha {
                    AlphaBranch::Control(a) => problem.controls_a.labels()[a].clone(),
                    AlphaBranch::Pucci => "P".into(),
                };
                let beta = match e.beta {
                    BetaBranch::Control(b) => problem.controls_b.labels()[b].clone(),
                    BetaBranch::Pucci => "P".into(),
                    BetaBranch::None => String::new(),
                };
                writeln!(
                    w,
                    "{i},{j},{:?},{:?},{:?},{:?},{},{alpha},{beta}",
                    x[0],
                    x[1],
                    u.get(id),
                    e.value,
                    e.active_branch()
                )?;
            }
            None => writeln!(w, "{i},{j},{:?},{:?},{:?},0.0,boundary,,", x[0], x[1], u.get(id))?,
        }
    }
    Ok(())
}
