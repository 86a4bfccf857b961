//! Executes one configured mode and writes its artifacts.
//!
//! Data artifacts (CSV and the JSON summaries) depend only on the
//! configuration; wall-clock times go to `timing.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::Serialize;
use serde_json::json;

use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::harness::barrier::auto_tune;
use crate::harness::decomposition_check::check_random_decompositions;
use crate::harness::rates::{boundary_constant, run_grid_rate, run_sandwich};
use crate::io::write_atomic;
use crate::operators::{Scheme, Truncation};
use crate::solver::{solve_scheme, write_solution_csv, Method, SolveReport};

/// Solve statistics without the wall time.
#[derive(Debug, Clone, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub final_residual: f64,
    pub method_used: Method,
}

impl From<&SolveReport> for SolveStats {
    fn from(r: &SolveReport) -> Self {
        Self {
            iterations: r.iterations,
            final_residual: r.final_residual,
            method_used: r.method_used,
        }
    }
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub mode: Mode,
    pub artifacts: Vec<PathBuf>,
    /// One-line result for the terminal.
    pub headline: String,
}

struct Writer<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.dir.join(name);
        write_atomic(&p, bytes)?;
        self.written.push(p);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.bytes(name, s.as_bytes())
    }
}

fn envelope(config: &RunConfig, mode: Mode, result: serde_json::Value) -> Result<serde_json::Value> {
    Ok(json!({
        "version": env!("CARGO_PKG_VERSION"),
        "mode": mode.name(),
        "config": serde_json::to_value(config)?,
        "result": result,
    }))
}

/// Validates the configuration, builds the problem, runs `mode` (or the
/// mode in the file) and writes artifacts into `out_dir` (or the
/// configured directory).
pub fn run(config: &RunConfig, mode: Option<Mode>, out_dir: Option<&Path>) -> Result<RunOutcome> {
    let mode = config.resolve_mode(mode)?;
    config.validate(mode)?;
    let dir = out_dir.unwrap_or(&config.output.dir);
    let mut out = Writer {
        dir,
        written: Vec::new(),
    };
    let start = Instant::now();
    info!("mode {} -> {}", mode.name(), dir.display());
    let (headline, timing) = match mode {
        Mode::Solve => solve(config, &mut out)?,
        Mode::Rates => rates(config, &mut out)?,
        Mode::Sandwich => sandwich(config, &mut out)?,
        Mode::CheckDecomposition => check_decomposition(config, &mut out)?,
        Mode::VerifyBarrier => verify_barrier(config, &mut out)?,
    };
    out.json(
        "timing.json",
        &json!({ "total_seconds": start.elapsed().as_secs_f64(), "solves": timing }),
    )?;
    Ok(RunOutcome {
        mode,
        artifacts: out.written,
        headline,
    })
}

type ModeResult = Result<(String, Vec<f64>)>;

fn solve(config: &RunConfig, out: &mut Writer<'_>) -> ModeResult {
    let built = config.build_problem()?;
    let problem = &built.problem;
    let grid = Grid::build(&problem.domain, &config.stencil(), config.study.h[0])?;
    let scheme = Scheme::new(problem, &grid, config.pucci_params(&problem.bounds)?, 0.0)?;
    let (u, report) = solve_scheme(&scheme, &grid, Truncation::None, &config.solver)?;
    let mut csv = Vec::new();
    write_solution_csv(&scheme, &u, Truncation::None, &mut csv)?;
    out.bytes("solution.csv", &csv)?;
    let max_error = built.case.as_ref().map(|c| {
        (0..grid.len())
            .map(|id| (u.get(id) - c.exact.value(&grid.point(id))).abs())
            .fold(0.0, f64::max)
    });
    let result = json!({
        "h": grid.h(),
        "n_points": grid.len(),
        "n_interior": grid.n_interior(),
        "solve": SolveStats::from(&report),
        "max_error": max_error,
    });
    out.json("solve_report.json", &envelope(config, Mode::Solve, result)?)?;
    let headline = format!(
        "solved {} interior points in {} iterations, residual {:e}",
        grid.n_interior(),
        report.iterations,
        report.final_residual
    );
    Ok((headline, vec![report.wall_time]))
}

fn rates(config: &RunConfig, out: &mut Writer<'_>) -> ModeResult {
    let built = config.build_problem()?;
    let case = built
        .case
        .ok_or_else(|| Error::Config("problem.coefficients: rates needs a manufactured family".into()))?;
    let study = run_grid_rate(&case, &config.stencil(), &config.study.h, &config.solver)?;
    let mut csv = Vec::new();
    study.report.write_csv(&mut csv)?;
    out.bytes("rates.csv", &csv)?;
    let runs: Vec<_> = study
        .runs
        .iter()
        .map(|r| json!({ "h": r.h, "n_interior": r.n_interior, "error": r.error, "solve": SolveStats::from(&r.report) }))
        .collect();
    let rep = &study.report;
    let result = json!({
        "fitted_exponent": rep.fitted_exponent,
        "fit_residual": rep.fit_residual,
        "drop_threshold": rep.drop_threshold,
        "used_in_fit": rep.used_in_fit,
        "runs": runs,
    });
    out.json("rates_summary.json", &envelope(config, Mode::Rates, result)?)?;
    let headline = format!(
        "fitted exponent {:.4} (fit residual {:.4})",
        rep.fitted_exponent, rep.fit_residual
    );
    Ok((headline, study.runs.iter().map(|r| r.report.wall_time).collect()))
}

fn sandwich(config: &RunConfig, out: &mut Writer<'_>) -> ModeResult {
    let built = config.build_problem()?;
    let problem = &built.problem;
    let grid = Grid::build(&problem.domain, &config.stencil(), config.study.h[0])?;
    let params = config.pucci_params(&problem.bounds)?;
    let study = run_sandwich(problem, &grid, &config.study.k, params, &config.solver)?;
    let mut csv = Vec::new();
    study.write_csv(&mut csv)?;
    out.bytes("sandwich.csv", &csv)?;
    let gaps: Vec<f64> = study.levels.iter().map(|l| l.gap).collect();
    // relative growth of the gap from one K to the next
    let max_gap_increase = gaps
        .windows(2)
        .map(|p| if p[0] > 0.0 { (p[1] - p[0]) / p[0] } else if p[1] > 0.0 { f64::INFINITY } else { 0.0 })
        .fold(0.0, f64::max);
    let levels: Vec<_> = study
        .levels
        .iter()
        .map(|l| {
            json!({
                "k": l.k,
                "gap": l.gap,
                "upper_error": l.upper_error,
                "boundary_constant": boundary_constant(&l.u, &l.v, &problem.g),
                "upper": SolveStats::from(&l.reports[0]),
                "lower": SolveStats::from(&l.reports[1]),
            })
        })
        .collect();
    let rep = &study.report;
    let violation = study.k_monotonicity_violation();
    let result = json!({
        "h": grid.h(),
        "n_interior": grid.n_interior(),
        "fitted_exponent": rep.fitted_exponent,
        "fit_residual": rep.fit_residual,
        "used_in_fit": rep.used_in_fit,
        "max_gap_increase": max_gap_increase,
        "k_monotonicity_violation": violation,
        "reference": SolveStats::from(&study.reference_report),
        "levels": levels,
        "note": "gaps and K-monotonicity are measured on a single grid",
    });
    out.json("sandwich_summary.json", &envelope(config, Mode::Sandwich, result)?)?;
    let mut timing = vec![study.reference_report.wall_time];
    for l in &study.levels {
        timing.extend(l.reports.iter().map(|r| r.wall_time));
    }
    let headline = format!(
        "fitted exponent {:.4}, max gap increase {:.3e}, K-monotonicity violation {:.3e}",
        rep.fitted_exponent, max_gap_increase, violation
    );
    Ok((headline, timing))
}

fn check_decomposition(config: &RunConfig, out: &mut Writer<'_>) -> ModeResult {
    let delta = match config.study.delta {
        Some(d) => d,
        None => config.bounds()?.delta,
    };
    let stencil = config.stencil();
    let check = check_random_decompositions(delta, &stencil, config.study.samples, config.seed)?;
    let mut csv = Vec::new();
    check.write_csv(&stencil, &mut csv)?;
    out.bytes("decomposition.csv", &csv)?;
    out.json(
        "decomposition_summary.json",
        &envelope(config, Mode::CheckDecomposition, serde_json::to_value(&check.summary)?)?,
    )?;
    if let Some(e) = check.first_infeasible() {
        return Err(e);
    }
    let s = &check.summary;
    let headline = format!(
        "{} matrices decomposed, max residual {:.3e}, min coefficient {:.4} (floor {:.4})",
        s.samples, s.max_residual, s.min_coefficient, s.floor
    );
    Ok((headline, Vec::new()))
}

fn verify_barrier(config: &RunConfig, out: &mut Writer<'_>) -> ModeResult {
    let bounds = config.bounds()?;
    let delta = config.study.delta.unwrap_or(bounds.delta);
    let k1 = config.pucci_params(&bounds)?.k1;
    let (barrier, slack) = auto_tune(&config.problem.domain, delta, k1, config.study.samples, config.seed)?;
    let result = json!({
        "delta": delta,
        "k1": k1,
        "samples": config.study.samples,
        "mu": barrier.mu,
        "radius": barrier.radius,
        "max_slack": slack,
        "value_bound": barrier.value_bound(&config.problem.domain),
    });
    out.json("barrier.json", &envelope(config, Mode::VerifyBarrier, result)?)?;
    let headline = format!("barrier mu = {}, R = {}, max slack {:.6}", barrier.mu, barrier.radius, slack);
    Ok((headline, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_solve_writes_zero_solution() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig::from_toml("mode = \"solve\"\n[study]\nh = [0.125]").unwrap();
        let o = run(&c, None, Some(dir.path())).unwrap();
        assert_eq!(o.artifacts.len(), 3);
        let csv = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
        for line in csv.lines().skip(1) {
            let v: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn infeasible_decomposition_still_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let text = "mode = \"check-decomposition\"\nseed = 3\n[scheme]\nstencil = \"axis\"\n[study]\nsamples = 10\ndelta = 0.2";
        let err = run(&RunConfig::from_toml(text).unwrap(), None, Some(dir.path())).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(dir.path().join("decomposition_summary.json").exists());
    }

    #[test]
    fn mode_must_fit_the_study() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig::from_toml("[study]\nh = [0.1, 0.05]").unwrap();
        let err = run(&c, Some(Mode::Rates), Some(dir.path())).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
