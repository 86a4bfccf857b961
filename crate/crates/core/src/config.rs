//! TOML run configuration: problem, scheme, solver and study settings.
//!
//! ```toml
//! mode = "rates"
//! seed = 7
//!
//! [problem]
//! domain = { kind = "disk", center = [0.0, 0.0], radius = 1.0 }
//! coefficients = { kind = "manufactured-bellman" }
//!
//! [scheme]
//! stencil = "default-four"
//!
//! [study]
//! h = [0.125, 0.0625, 0.03125, 0.015625]
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Domain, Stencil};
use crate::harness::benchmarks::{
    bellman_benchmark, rough_benchmark, saddle_benchmark, unit_disk, BELLMAN_BOUNDS, ROUGH_BOUNDS, SADDLE_BOUNDS,
};
use crate::harness::manufactured::{sample_domain, ManufacturedCase};
use crate::operators::PucciParams;
use crate::problem::{
    gamma_for_chi, CoefficientField, ControlSet, EllipticityBounds, IsaacsProblem, Mat2, Point, SmoothTestFunction,
};
use crate::solver::SolveConfig;

const VALIDATION_PROBES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Solve,
    Rates,
    Sandwich,
    CheckDecomposition,
    VerifyBarrier,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Rates => "rates",
            Mode::Sandwich => "sandwich",
            Mode::CheckDecomposition => "check-decomposition",
            Mode::VerifyBarrier => "verify-barrier",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    /// Seed of every randomized probe set.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(default)]
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(default)]
    pub study: StudySpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default = "unit_disk")]
    pub domain: Domain,
    #[serde(default)]
    pub coefficients: CoefficientSpec,
    /// Ellipticity constant; families supply a default.
    pub delta: Option<f64>,
    /// Bound `K₀`; families supply a default.
    pub k0: Option<f64>,
    /// Hölder exponent of `a`; must equal `(4 − 3χ)/(8 − 4χ)` when set.
    pub gamma: Option<f64>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Ignored by the manufactured families, whose boundary data is the
    /// exact solution.
    #[serde(default)]
    pub boundary: BoundarySpec,
}

fn default_tau() -> f64 {
    0.5
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            domain: unit_disk(),
            coefficients: CoefficientSpec::default(),
            delta: None,
            k0: None,
            gamma: None,
            tau: default_tau(),
            boundary: BoundarySpec::default(),
        }
    }
}

/// Named coefficient families.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientSpec {
    /// `a = I`, `b = 0`, `c = 0`, `f = 0`, one control per player.
    #[default]
    Zero,
    /// Constant coefficients per control pair.
    Constant {
        controls_a: Vec<String>,
        controls_b: Vec<String>,
        pairs: Vec<PairSpec>,
    },
    /// `a = I + A·(periodic symmetric perturbation)`, `b = A·(cos, sin)`,
    /// `c = 0`, `f = source`, one control per player.
    SmoothPeriodic {
        amplitude: f64,
        period: f64,
        #[serde(default = "one")]
        source: f64,
    },
    /// Two-player problem with fractional-power perturbations.
    HolderRough,
    /// Single-control manufactured case with exact solution
    /// `sin(πx)sin(πy)`.
    ManufacturedBellman,
    /// 2×2 manufactured case with exact solution `exp(x + y)`.
    ManufacturedSaddle,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub alpha: String,
    pub beta: String,
    pub a: [[f64; 2]; 2],
    #[serde(default)]
    pub b: [f64; 2],
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub f: f64,
}

/// Boundary data `g(x) = ½ xᵀMx + pᵀx + k`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    #[serde(default)]
    pub m: [[f64; 2]; 2],
    #[serde(default)]
    pub p: [f64; 2],
    #[serde(default)]
    pub k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StencilChoice {
    Axis,
    #[default]
    DefaultFour,
    ExtendedEight,
}

impl StencilChoice {
    pub fn stencil(self) -> Stencil {
        match self {
            StencilChoice::Axis => Stencil::axis(),
            StencilChoice::DefaultFour => Stencil::default_four(),
            StencilChoice::ExtendedEight => Stencil::extended_eight(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    #[serde(default)]
    pub stencil: StencilChoice,
    pub delta_hat: Option<f64>,
    pub k1: Option<f64>,
    #[serde(default = "default_chi")]
    pub chi: f64,
}

fn default_chi() -> f64 {
    0.1
}

impl Default for SchemeSpec {
    fn default() -> Self {
        Self {
            stencil: StencilChoice::default(),
            delta_hat: None,
            k1: None,
            chi: default_chi(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    /// Mesh sizes: one for `solve`/`sandwich`, a decreasing sequence for
    /// `rates`.
    #[serde(default = "default_h")]
    pub h: Vec<f64>,
    /// Increasing truncation levels for `sandwich`.
    #[serde(default)]
    pub k: Vec<f64>,
    /// Sample count for `check-decomposition` and `verify-barrier`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Ellipticity constant of the sampled matrices in
    /// `check-decomposition` and of the barrier class; defaults to the
    /// problem's.
    pub delta: Option<f64>,
}

fn default_h() -> Vec<f64> {
    vec![1.0 / 32.0]
}

fn default_samples() -> usize {
    1000
}

impl Default for StudySpec {
    fn default() -> Self {
        Self {
            h: default_h(),
            k: Vec::new(),
            samples: default_samples(),
            delta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

fn mat(m: [[f64; 2]; 2]) -> Mat2 {
    Mat2::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

fn config_err(field: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {reason}"))
}

/// Problem built from a configuration, with its manufactured exact
/// solution when the family has one.
pub struct BuiltProblem {
    pub problem: IsaacsProblem,
    pub case: Option<ManufacturedCase>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Mode from the command line, else from the file.
    pub fn resolve_mode(&self, requested: Option<Mode>) -> Result<Mode> {
        requested
            .or(self.mode)
            .ok_or_else(|| config_err("mode", "missing; set it in the file or pass a subcommand"))
    }

    pub fn stencil(&self) -> Stencil {
        self.scheme.stencil.stencil()
    }

    /// Range checks that do not need the problem to be built.
    pub fn validate(&self, mode: Mode) -> Result<()> {
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.problem.domain.validate().map_err(|e| Error::Config(format!("problem.domain: {e}")))?;
        if !(self.scheme.chi > 0.0 && self.scheme.chi < 1.0) {
            return Err(config_err("scheme.chi", format!("{} not in (0, 1)", self.scheme.chi)));
        }
        if !(self.problem.tau > 0.0 && self.problem.tau < 1.0) {
            return Err(config_err("problem.tau", format!("{} not in (0, 1)", self.problem.tau)));
        }
        if let Some(g) = self.problem.gamma {
            let expected = gamma_for_chi(self.scheme.chi);
            if (g - expected).abs() > 1e-12 {
                return Err(config_err(
                    "problem.gamma",
                    format!("{g} differs from (4 - 3 chi)/(8 - 4 chi) = {expected} for chi = {}", self.scheme.chi),
                ));
            }
        }
        if self.study.h.is_empty() || self.study.h.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(config_err("study.h", "needs positive finite mesh sizes"));
        }
        match mode {
            Mode::Solve | Mode::Sandwich if self.study.h.len() != 1 => {
                return Err(config_err("study.h", format!("mode {} takes exactly one mesh size", mode.name())));
            }
            Mode::Rates if self.study.h.len() < 2 || self.study.h.windows(2).any(|p| p[1] >= p[0]) => {
                return Err(config_err("study.h", "rates needs at least two strictly decreasing mesh sizes"));
            }
            Mode::Sandwich if self.study.k.is_empty() || self.study.k.windows(2).any(|p| p[1] <= p[0]) => {
                return Err(config_err("study.k", "sandwich needs strictly increasing truncation levels"));
            }
            Mode::Sandwich if self.study.k[0] < 1.0 => {
                return Err(config_err("study.k", "truncation levels must be at least 1"));
            }
            Mode::Rates
                if !matches!(
                    self.problem.coefficients,
                    CoefficientSpec::ManufacturedBellman | CoefficientSpec::ManufacturedSaddle
                ) =>
            {
                return Err(config_err("problem.coefficients", "rates needs a manufactured family"));
            }
            Mode::CheckDecomposition | Mode::VerifyBarrier if self.study.samples == 0 => {
                return Err(config_err("study.samples", "must be positive"));
            }
            _ => {}
        }
        Ok(())
    }

    fn bounds_with(&self, delta: f64, k0: f64) -> Result<EllipticityBounds> {
        let delta = self.problem.delta.unwrap_or(delta);
        let k0 = self.problem.k0.unwrap_or(k0);
        EllipticityBounds::new(delta, k0).map_err(|e| Error::Config(format!("problem: {e}")))
    }

    /// Ellipticity bounds of the configured problem.
    pub fn bounds(&self) -> Result<EllipticityBounds> {
        let (d, k) = match self.problem.coefficients {
            CoefficientSpec::HolderRough => ROUGH_BOUNDS,
            CoefficientSpec::ManufacturedBellman => BELLMAN_BOUNDS,
            CoefficientSpec::ManufacturedSaddle => SADDLE_BOUNDS,
            _ => (0.5, 4.0),
        };
        self.bounds_with(d, k)
    }

    pub fn pucci_params(&self, bounds: &EllipticityBounds) -> Result<PucciParams> {
        let d = PucciParams::default_for(bounds);
        PucciParams::new(
            self.scheme.delta_hat.unwrap_or(d.delta_hat),
            self.scheme.k1.unwrap_or(d.k1),
            bounds,
        )
        .map_err(|e| Error::Config(format!("scheme: {e}")))
    }

    fn boundary(&self) -> SmoothTestFunction {
        let b = &self.problem.boundary;
        SmoothTestFunction::quadratic(mat(b.m), Point::new(b.p[0], b.p[1]), b.k)
    }

    /// Builds the problem and spot-checks its assumptions on probe points
    /// drawn with the configured seed.
    pub fn build_problem(&self) -> Result<BuiltProblem> {
        let domain = self.problem.domain.clone();
        let bounds = self.bounds()?;
        let gamma = gamma_for_chi(self.scheme.chi);
        let tau = self.problem.tau;
        let mut case = None;
        let problem = match &self.problem.coefficients {
            CoefficientSpec::Zero => IsaacsProblem::new(
                domain,
                ControlSet::indexed(1)?,
                ControlSet::indexed(1)?,
                CoefficientField::constant(Mat2::identity(), Point::zeros(), 0.0),
                self.boundary(),
                bounds,
            ),
            CoefficientSpec::Constant {
                controls_a,
                controls_b,
                pairs,
            } => {
                let ca = ControlSet::new(controls_a.clone()).map_err(|e| Error::Config(format!("controls_a: {e}")))?;
                let cb = ControlSet::new(controls_b.clone()).map_err(|e| Error::Config(format!("controls_b: {e}")))?;
                let mut table: Vec<Option<(Mat2, Point, f64, f64)>> = vec![None; ca.len() * cb.len()];
                for (n, p) in pairs.iter().enumerate() {
                    let a = ca.index_of(&p.alpha).ok_or_else(|| Error::UnknownControl {
                        player: 'A',
                        label: p.alpha.clone(),
                    })?;
                    let b = cb.index_of(&p.beta).ok_or_else(|| Error::UnknownControl {
                        player: 'B',
                        label: p.beta.clone(),
                    })?;
                    let slot = &mut table[a * cb.len() + b];
                    if slot.is_some() {
                        return Err(config_err(&format!("problem.coefficients.pairs[{n}]"), "duplicate control pair"));
                    }
                    *slot = Some((mat(p.a), Point::new(p.b[0], p.b[1]), p.c, p.f));
                }
                let table: Vec<(Mat2, Point, f64, f64)> = table
                    .into_iter()
                    .enumerate()
                    .map(|(i, t)| {
                        t.ok_or_else(|| {
                            config_err(
                                "problem.coefficients.pairs",
                                format!(
                                    "missing pair ({}, {})",
                                    ca.labels()[i / cb.len()],
                                    cb.labels()[i % cb.len()]
                                ),
                            )
                        })
                    })
                    .collect::<Result<_>>()?;
                let table = Arc::new(table);
                let nb = cb.len();
                let (t1, t2, t3, t4) = (table.clone(), table.clone(), table.clone(), table);
                let coeffs = CoefficientField::new(
                    Arc::new(move |a, b, _| t1[a * nb + b].0),
                    Arc::new(move |a, b, _| t2[a * nb + b].1),
                    Arc::new(move |a, b, _| t3[a * nb + b].2),
                    Arc::new(move |a, b, _| t4[a * nb + b].3),
                    gamma,
                    tau,
                );
                IsaacsProblem::new(domain, ca, cb, coeffs, self.boundary(), bounds)
            }
            CoefficientSpec::SmoothPeriodic {
                amplitude,
                period,
                source,
            } => {
                if !(*period > 0.0) {
                    return Err(config_err("problem.coefficients.period", "must be positive"));
                }
                let (amp, w, src) = (*amplitude, 2.0 * PI / period, *source);
                let coeffs = CoefficientField::new(
                    Arc::new(move |_, _, x: &Point| {
                        let off = 0.5 * amp * (w * x[0]).sin() * (w * x[1]).sin();
                        Mat2::new(1.0 + amp * (w * x[0]).cos(), off, off, 1.0 + amp * (w * x[1]).sin())
                    }),
                    Arc::new(move |_, _, x: &Point| Point::new((w * x[1]).cos(), (w * x[0]).sin()) * amp),
                    Arc::new(|_, _, _| 0.0),
                    Arc::new(move |_, _, _| src),
                    gamma,
                    tau,
                );
                IsaacsProblem::new(
                    domain,
                    ControlSet::indexed(1)?,
                    ControlSet::indexed(1)?,
                    coeffs,
                    self.boundary(),
                    bounds,
                )
            }
            CoefficientSpec::HolderRough => {
                let mut p = rough_benchmark(domain, self.scheme.chi, tau)?;
                p.bounds = bounds;
                p
            }
            CoefficientSpec::ManufacturedBellman | CoefficientSpec::ManufacturedSaddle => {
                let mut c = if matches!(self.problem.coefficients, CoefficientSpec::ManufacturedBellman) {
                    bellman_benchmark(domain)?
                } else {
                    saddle_benchmark(domain)?
                };
                c.problem.bounds = bounds;
                let p = c.problem.clone();
                case = Some(c);
                p
            }
        };
        let probes = sample_domain(&problem.domain, VALIDATION_PROBES, self.seed);
        problem
            .validate(&probes)
            .map_err(|e| Error::Config(format!("problem: {e}")))?;
        Ok(BuiltProblem { problem, case })
    }
}
