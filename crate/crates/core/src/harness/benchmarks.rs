//! Shipped benchmark problems, meant for the unit disk.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::Result;
use crate::grid::Domain;
use crate::harness::manufactured::{alpha_minus_beta, make_bellman_case, make_isaacs_saddle_case, ManufacturedCase};
use crate::problem::{
    gamma_for_chi, CoefficientField, ControlSet, EllipticityBounds, IsaacsProblem, Mat2, MatrixFn, Point, ScalarFn,
    SmoothTestFunction, VectorFn,
};

/// `sin(πx)sin(πy)`.
pub fn sine_product() -> SmoothTestFunction {
    SmoothTestFunction::new(
        |x| (PI * x[0]).sin() * (PI * x[1]).sin(),
        |x| {
            Point::new(
                PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
            )
        },
        |x| {
            let (s0, c0) = (PI * x[0]).sin_cos();
            let (s1, c1) = (PI * x[1]).sin_cos();
            let p2 = PI * PI;
            Mat2::new(-p2 * s0 * s1, p2 * c0 * c1, p2 * c0 * c1, -p2 * s0 * s1)
        },
    )
}

/// `exp(x + y)`.
pub fn exp_sum() -> SmoothTestFunction {
    SmoothTestFunction::new(
        |x| (x[0] + x[1]).exp(),
        |x| Point::new(1.0, 1.0) * (x[0] + x[1]).exp(),
        |x| Mat2::from_element((x[0] + x[1]).exp()),
    )
}

/// `(δ, K₀)` of the Bellman benchmark (`a = I`).
pub const BELLMAN_BOUNDS: (f64, f64) = (0.95, 25.0);
/// `(δ, K₀)` of the saddle benchmark.
pub const SADDLE_BOUNDS: (f64, f64) = (0.6, 25.0);
/// `(δ, K₀)` of the rough benchmark.
pub const ROUGH_BOUNDS: (f64, f64) = (0.5, 4.0);

pub fn unit_disk() -> Domain {
    Domain::disk(Point::zeros(), 1.0)
}

/// `a = I, b = 0, c = 0`, exact solution `sin(πx)sin(πy)`.
pub fn bellman_benchmark(domain: Domain) -> Result<ManufacturedCase> {
    make_bellman_case(
        sine_product(),
        domain,
        CoefficientField::constant(Mat2::identity(), Point::zeros(), 0.0),
        EllipticityBounds::new(BELLMAN_BOUNDS.0, BELLMAN_BOUNDS.1)?,
    )
}

/// Per-pair diffusion matrices representable on the default four-vector
/// stencil.
fn saddle_matrices() -> [[Mat2; 2]; 2] {
    [
        [Mat2::new(1.0, 0.2, 0.2, 0.8), Mat2::new(0.9, -0.1, -0.1, 1.2)],
        [Mat2::new(1.3, 0.3, 0.3, 1.0), Mat2::identity()],
    ]
}

/// 2×2 controls with drift and reaction, table `α − β`, exact solution
/// `exp(x + y)`.
pub fn saddle_benchmark(domain: Domain) -> Result<ManufacturedCase> {
    let mats = saddle_matrices();
    let coeffs = CoefficientField::new(
        Arc::new(move |a, b, _| mats[a][b]),
        Arc::new(|a, b, _| Point::new(0.4 - 0.8 * a as f64, 0.3 * b as f64)),
        Arc::new(|a, _, _| 0.5 * a as f64),
        Arc::new(|_, _, _| 0.0),
        0.45,
        0.5,
    );
    let (ca, cb, table) = alpha_minus_beta();
    make_isaacs_saddle_case(exp_sum(), domain, coeffs, ca, cb, table, EllipticityBounds::new(SADDLE_BOUNDS.0, SADDLE_BOUNDS.1)?)
}

/// Two-player problem whose coefficients carry fractional-power radial
/// perturbations: `|x − x_{αβ}|^γ` in `a` with `γ = (4 − 3χ)/(8 − 4χ)`,
/// and `|x − y_{αβ}|^τ` in `b, c, f`.
pub fn rough_benchmark(domain: Domain, chi: f64, tau: f64) -> Result<IsaacsProblem> {
    let gamma = gamma_for_chi(chi);
    let base = saddle_matrices();
    let centers = [
        [Point::new(0.2, 0.1), Point::new(-0.3, 0.25)],
        [Point::new(0.1, -0.35), Point::new(-0.15, -0.1)],
    ];
    let a: MatrixFn = Arc::new(move |al, be, x: &Point| {
        let r = (x - centers[al][be]).norm().powf(gamma);
        let s = if (al + be) % 2 == 0 { 0.2 } else { -0.2 };
        base[al][be] + Mat2::new(s * r, 0.0, 0.0, -s * r)
    });
    let b: VectorFn = Arc::new(move |al, be, x: &Point| {
        let r = (x - centers[be][al]).norm().powf(tau);
        Point::new(0.5 - al as f64, 0.5 * be as f64 - 0.25) * (1.0 + r)
    });
    let c: ScalarFn = Arc::new(move |al, be, x: &Point| 0.25 * (al + be) as f64 * x.norm().powf(tau));
    let f: ScalarFn = Arc::new(move |al, be, x: &Point| {
        let table = [[1.0, -0.5], [0.3, 0.8]];
        table[al][be] * (1.0 + (x - centers[al][be]).norm().powf(tau)) - 0.4 * (x[0] + 0.5).abs().powf(tau)
    });
    let g = SmoothTestFunction::quadratic(Mat2::new(0.6, 0.2, 0.2, -0.6), Point::new(0.2, 0.0), 0.1);
    Ok(IsaacsProblem::new(
        domain,
        ControlSet::indexed(2)?,
        ControlSet::indexed(2)?,
        CoefficientField::new(a, b, c, f, gamma, tau),
        g,
        EllipticityBounds::new(ROUGH_BOUNDS.0, ROUGH_BOUNDS.1)?,
    ))
}
