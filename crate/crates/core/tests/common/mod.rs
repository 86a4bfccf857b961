//! Random problem instances shared by the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use isaacs_core::grid::{Domain, Grid, Stencil};
use isaacs_core::harness::decomposition_check::random_elliptic;
use isaacs_core::problem::{CoefficientField, ControlSet, EllipticityBounds, IsaacsProblem, Mat2, Point, SmoothTestFunction};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Isaacs problem on the unit disk with `n_a × n_b` controls whose
/// coefficients vary smoothly in `x`; every `a` lies in `S_0.6`.
pub fn random_problem(rng: &mut ChaCha8Rng, n_a: usize, n_b: usize) -> IsaacsProblem {
    let n = n_a * n_b;
    let mats = random_elliptic(0.8, n, rng.gen());
    let drifts: Vec<Point> = (0..n).map(|_| Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let reactions: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let sources: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let phase: f64 = rng.gen_range(0.0..6.0);
    let coeffs = CoefficientField::new(
        Arc::new(move |a, b, x: &Point| mats[a * n_b + b] + Mat2::identity() * (0.05 * (x[0] + phase).sin())),
        Arc::new(move |a, b, x: &Point| drifts[a * n_b + b] * (1.0 + 0.2 * x[1])),
        Arc::new(move |a, b, x: &Point| reactions[a * n_b + b] * (1.0 + 0.1 * x[0] * x[0])),
        Arc::new(move |a, b, x: &Point| sources[a * n_b + b] + (x[0] - x[1] + phase).cos()),
        0.45,
        0.5,
    );
    IsaacsProblem::new(
        Domain::disk(Point::zeros(), 1.0),
        ControlSet::indexed(n_a).unwrap(),
        ControlSet::indexed(n_b).unwrap(),
        coeffs,
        SmoothTestFunction::constant(0.0),
        EllipticityBounds::new(0.6, 4.0).unwrap(),
    )
}

pub fn random_grid(rng: &mut ChaCha8Rng) -> Grid {
    let h = [0.125, 0.1, 1.0 / 12.0][rng.gen_range(0..3)];
    Grid::build(&Domain::disk(Point::zeros(), 1.0), &Stencil::default_four(), h).unwrap()
}

pub fn random_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}
