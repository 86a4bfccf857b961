//! Rate studies: grid convergence of manufactured cases and the decay of
//! the gap between the truncated solutions.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, Stencil};
use crate::harness::manufactured::ManufacturedCase;
use crate::operators::{PucciParams, Scheme, TruncationLevel};
use crate::problem::IsaacsProblem;
use crate::solver::{solve_isaacs, solve_scheme, solve_truncated_pair_with, SolveConfig, SolveReport};

/// Errors below `DROP_FACTOR · residual_tol` are excluded from fits.
pub const DROP_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Abscissa {
    H,
    K,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub abscissa: Abscissa,
    pub abscissae: Vec<f64>,
    pub errors: Vec<f64>,
    /// Whether each point entered the fit.
    pub used_in_fit: Vec<bool>,
    /// Convergence exponent: `η̂` with `error ~ h^η̂`, or `ξ̂` with
    /// `error ~ K^{−ξ̂}`. `NaN` when fewer than two points remain.
    pub fitted_exponent: f64,
    /// Root-mean-square residual of the fit in log space.
    pub fit_residual: f64,
    pub drop_threshold: f64,
}

/// Least-squares line through `(ln x, ln y)`: `(slope, intercept, rms)`.
pub fn fit_log_log(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    Some((slope, intercept, rms))
}

impl RateReport {
    pub fn fit(abscissa: Abscissa, abscissae: Vec<f64>, errors: Vec<f64>, residual_tol: f64) -> Self {
        let drop_threshold = DROP_FACTOR * residual_tol;
        let used_in_fit: Vec<bool> = errors.iter().map(|e| *e >= drop_threshold).collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = abscissae
            .iter()
            .zip(&errors)
            .zip(&used_in_fit)
            .filter(|(_, u)| **u)
            .map(|((x, e), _)| (*x, *e))
            .unzip();
        let (fitted_exponent, fit_residual) = match fit_log_log(&xs, &ys) {
            Some((slope, _, rms)) => (
                match abscissa {
                    Abscissa::H => slope,
                    Abscissa::K => -slope,
                },
                rms,
            ),
            None => (f64::NAN, f64::NAN),
        };
        Self {
            abscissa,
            abscissae,
            errors,
            used_in_fit,
            fitted_exponent,
            fit_residual,
            drop_threshold,
        }
    }

    /// `abscissa,error,used_in_fit`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let name = match self.abscissa {
            Abscissa::H => "h",
            Abscissa::K => "K",
        };
        writeln!(w, "{name},error,used_in_fit")?;
        for ((x, e), u) in self.abscissae.iter().zip(&self.errors).zip(&self.used_in_fit) {
            writeln!(w, "{x:?},{e:?},{u}")?;
        }
        Ok(())
    }
}

/// Per-`h` data of a grid study.
#[derive(Debug, Clone, Serialize)]
pub struct GridRun {
    pub h: f64,
    pub n_interior: usize,
    pub error: f64,
    pub report: SolveReport,
}

pub struct GridRateStudy {
    pub report: RateReport,
    pub runs: Vec<GridRun>,
}

/// Solves the manufactured case for every `h` and fits `sup |w_h − u*|`
/// over all grid points against `h`.
pub fn run_grid_rate(case: &ManufacturedCase, stencil: &Stencil, hs: &[f64], config: &SolveConfig) -> Result<GridRateStudy> {
    if hs.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::invalid("study.h", "h values must be strictly decreasing"));
    }
    let runs: Vec<Result<GridRun>> = hs
        .par_iter()
        .map(|&h| {
            let grid = Grid::build(&case.problem.domain, stencil, h)?;
            let (w, report) = solve_isaacs(&case.problem, &grid, config)?;
            let error = (0..grid.len())
                .map(|id| (w.get(id) - case.exact.value(&grid.point(id))).abs())
                .fold(0.0, f64::max);
            Ok(GridRun {
                h,
                n_interior: grid.n_interior(),
                error,
                report,
            })
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let report = RateReport::fit(
        Abscissa::H,
        hs.to_vec(),
        runs.iter().map(|r| r.error).collect(),
        config.residual_tol,
    );
    Ok(GridRateStudy { report, runs })
}

/// Solutions of one truncation level.
pub struct SandwichLevel<'g> {
    pub k: f64,
    pub u: GridFunction<'g>,
    pub v: GridFunction<'g>,
    pub gap: f64,
    pub upper_error: f64,
    pub reports: [SolveReport; 2],
}

pub struct SandwichStudy<'g> {
    /// `sup |u_K − v_K|` against `K`.
    pub report: RateReport,
    pub reference: GridFunction<'g>,
    pub reference_report: SolveReport,
    pub levels: Vec<SandwichLevel<'g>>,
}

impl SandwichStudy<'_> {
    /// `sup |u_K − w|` per level.
    pub fn upper_errors(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.upper_error).collect()
    }

    /// Largest violation of `u_{K_i} ≥ u_{K_{i+1}}` and
    /// `v_{K_i} ≤ v_{K_{i+1}}` over consecutive levels.
    pub fn k_monotonicity_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for pair in self.levels.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            for id in 0..a.u.values().len() {
                worst = worst.max(b.u.get(id) - a.u.get(id));
                worst = worst.max(a.v.get(id) - b.v.get(id));
            }
        }
        worst
    }

    /// `k,gap,upper_error,used_in_fit`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "K,gap,upper_error,used_in_fit")?;
        for (l, used) in self.levels.iter().zip(&self.report.used_in_fit) {
            writeln!(w, "{:?},{:?},{:?},{used}", l.k, l.gap, l.upper_error)?;
        }
        Ok(())
    }
}

/// Solves the truncated pair for every `K` and the untruncated reference
/// `w` on the same grid, checks `v_K ≤ w ≤ u_K` within `10·residual_tol`,
/// and fits `sup |u_K − v_K|` against `K`.
pub fn run_sandwich<'g>(
    problem: &IsaacsProblem,
    grid: &'g Grid,
    ks: &[f64],
    params: PucciParams,
    config: &SolveConfig,
) -> Result<SandwichStudy<'g>> {
    if ks.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::invalid("study.k", "K values must be strictly increasing"));
    }
    let levels: Vec<TruncationLevel> = ks.iter().map(|&k| TruncationLevel::new(k)).collect::<Result<_>>()?;
    let scheme = Scheme::new(problem, grid, params, 0.0)?;
    let (w, reference_report) = solve_scheme(&scheme, grid, crate::operators::Truncation::None, config)?;
    let tol = 10.0 * config.residual_tol;
    let solved: Vec<Result<SandwichLevel<'g>>> = levels
        .par_iter()
        .map(|&k| {
            let pair = solve_truncated_pair_with(&scheme, grid, k, config)?;
            let mut gap = 0.0f64;
            let mut upper_error = 0.0f64;
            for id in 0..grid.len() {
                let (u, v, r) = (pair.u.get(id), pair.v.get(id), w.get(id));
                let violation = (v - r).max(r - u);
                if violation > tol {
                    let x = grid.point(id);
                    return Err(Error::OrderingViolation {
                        k: k.value(),
                        x: x[0],
                        y: x[1],
                        amount: violation,
                    });
                }
                gap = gap.max((u - v).abs());
                upper_error = upper_error.max((u - r).abs());
            }
            Ok(SandwichLevel {
                k: k.value(),
                u: pair.u,
                v: pair.v,
                gap,
                upper_error,
                reports: [pair.report_u, pair.report_v],
            })
        })
        .collect();
    let levels = solved.into_iter().collect::<Result<Vec<_>>>()?;
    let report = RateReport::fit(
        Abscissa::K,
        ks.to_vec(),
        levels.iter().map(|l| l.gap).collect(),
        config.residual_tol,
    );
    Ok(SandwichStudy {
        report,
        reference: w,
        reference_report,
        levels,
    })
}

/// Smallest `N` with `|u − g| + |v − g| ≤ N ρ` at every interior point
/// (boundary values equal `g`).
pub fn boundary_constant(u: &GridFunction<'_>, v: &GridFunction<'_>, g: &crate::problem::SmoothTestFunction) -> f64 {
    let grid = u.grid();
    grid.interior_ids()
        .iter()
        .map(|&id| {
            let id = id as usize;
            let gx = g.value(&grid.point(id));
            ((u.get(id) - gx).abs() + (v.get(id) - gx).abs()) / grid.rho(id)
        })
        .fold(0.0, f64::max)
}
