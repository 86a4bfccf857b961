//! Manufactured solutions: problems whose source term is built so that a
//! given smooth function solves the continuous equation exactly.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Domain;
use crate::problem::{CoefficientField, ControlSet, EllipticityBounds, IsaacsProblem, Point, SmoothTestFunction};

const PROBES: usize = 100;
const CHECK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManufacturedFamily {
    BellmanSingle,
    IsaacsSaddle,
}

/// `problem` has boundary data `g = exact` and satisfies `F[exact] = 0`.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub exact: SmoothTestFunction,
    pub problem: IsaacsProblem,
    pub family: ManufacturedFamily,
}

impl ManufacturedCase {
    /// Largest `|F[exact]|` over `n` points drawn uniformly from the domain.
    pub fn construction_error(&self, n: usize, seed: u64) -> f64 {
        sample_domain(&self.problem.domain, n, seed)
            .iter()
            .map(|x| self.problem.eval_f(&self.exact, x).abs())
            .fold(0.0, f64::max)
    }

    fn checked(self) -> Result<Self> {
        let err = self.construction_error(PROBES, 0x5eed);
        if err > CHECK_TOL {
            return Err(Error::invalid(
                "manufactured case",
                format!("construction check failed: |F[u*]| = {err:e}"),
            ));
        }
        Ok(self)
    }
}

/// Uniform samples of the domain by rejection from its bounding box.
pub fn sample_domain(domain: &Domain, n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = domain.bounding_box();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = Point::new(rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1]));
        if domain.inside(&x) {
            out.push(x);
        }
    }
    out
}

fn operator_without_source(coeffs: &CoefficientField, exact: &SmoothTestFunction, alpha: usize, beta: usize, x: &Point) -> f64 {
    let a = (coeffs.a)(alpha, beta, x);
    let b = (coeffs.b)(alpha, beta, x);
    let c = (coeffs.c)(alpha, beta, x);
    a.component_mul(&exact.hessian(x)).sum() + b.dot(&exact.gradient(x)) - c * exact.value(x)
}

/// Single-control case with `f = −(a_ij D_ij u* + b_i D_i u* − c u*)`.
/// The `f` of `coeffs` is ignored.
pub fn make_bellman_case(
    exact: SmoothTestFunction,
    domain: Domain,
    coeffs: CoefficientField,
    bounds: EllipticityBounds,
) -> Result<ManufacturedCase> {
    let base = coeffs.clone();
    let ex = exact.clone();
    let coeffs = coeffs.with_source(Arc::new(move |_, _, x: &Point| -operator_without_source(&base, &ex, 0, 0, x)));
    let problem = IsaacsProblem::new(
        domain,
        ControlSet::indexed(1)?,
        ControlSet::indexed(1)?,
        coeffs,
        exact.clone(),
        bounds,
    );
    ManufacturedCase {
        exact,
        problem,
        family: ManufacturedFamily::BellmanSingle,
    }
    .checked()
}

/// `sup_α inf_β table[α][β]`.
pub fn saddle_value(table: &[Vec<f64>]) -> f64 {
    table
        .iter()
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Table `α − β` over `A = B = {−1, +1}`, with sup-inf value 0.
pub fn alpha_minus_beta() -> (ControlSet, ControlSet, Vec<Vec<f64>>) {
    let signs = [-1.0, 1.0];
    let table = signs.iter().map(|a| signs.iter().map(|b| a - b).collect()).collect();
    (
        ControlSet::new(["-1", "+1"]).expect("static labels"),
        ControlSet::new(["-1", "+1"]).expect("static labels"),
        table,
    )
}

/// Two-player case with `f^{αβ} = −L^{αβ}u* + table[α][β]`, so that
/// `F[u*] = sup_α inf_β table[α][β] = 0`. The `f` of `coeffs` is ignored.
pub fn make_isaacs_saddle_case(
    exact: SmoothTestFunction,
    domain: Domain,
    coeffs: CoefficientField,
    controls_a: ControlSet,
    controls_b: ControlSet,
    table: Vec<Vec<f64>>,
    bounds: EllipticityBounds,
) -> Result<ManufacturedCase> {
    if table.len() != controls_a.len() || table.iter().any(|r| r.len() != controls_b.len()) {
        return Err(Error::invalid(
            "saddle table",
            format!("expected a {}x{} table", controls_a.len(), controls_b.len()),
        ));
    }
    let value = saddle_value(&table);
    if value != 0.0 {
        // the table does not depend on x, so any point witnesses the failure
        let x = domain.bounding_box().0;
        return Err(Error::SaddleValueNonzero { value, x: x[0], y: x[1] });
    }
    let base = coeffs.clone();
    let ex = exact.clone();
    let coeffs = coeffs.with_source(Arc::new(move |alpha, beta, x: &Point| {
        -operator_without_source(&base, &ex, alpha, beta, x) + table[alpha][beta]
    }));
    let problem = IsaacsProblem::new(domain, controls_a, controls_b, coeffs, exact.clone(), bounds);
    ManufacturedCase {
        exact,
        problem,
        family: ManufacturedFamily::IsaacsSaddle,
    }
    .checked()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Mat2;
    use std::f64::consts::PI;

    fn sine() -> SmoothTestFunction {
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

    fn bounds() -> EllipticityBounds {
        EllipticityBounds::new(0.5, 25.0).unwrap()
    }

    #[test]
    fn zero_solution_gives_zero_source() {
        let case = make_bellman_case(
            SmoothTestFunction::constant(0.0),
            Domain::disk(Point::zeros(), 1.0),
            CoefficientField::constant(Mat2::identity(), Point::new(0.3, 0.1), 0.5),
            bounds(),
        )
        .unwrap();
        for x in sample_domain(&case.problem.domain, 20, 1) {
            assert_eq!((case.problem.coeffs.f)(0, 0, &x), 0.0);
        }
    }

    #[test]
    fn sine_source_is_two_pi_squared_times_solution() {
        let case = make_bellman_case(
            sine(),
            Domain::disk(Point::zeros(), 1.0),
            CoefficientField::constant(Mat2::identity(), Point::zeros(), 0.0),
            bounds(),
        )
        .unwrap();
        for x in sample_domain(&case.problem.domain, 50, 2) {
            let oracle = 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin();
            assert!(((case.problem.coeffs.f)(0, 0, &x) - oracle).abs() < 1e-12);
        }
        assert!(case.construction_error(100, 9) <= 1e-12);
    }

    #[test]
    fn saddle_tables() {
        let (_, _, t) = alpha_minus_beta();
        assert_eq!(saddle_value(&t), 0.0);
        let product = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        assert_eq!(saddle_value(&product), -1.0);

        let (a, b, _) = alpha_minus_beta();
        let err = make_isaacs_saddle_case(
            sine(),
            Domain::disk(Point::zeros(), 1.0),
            CoefficientField::constant(Mat2::identity(), Point::zeros(), 0.0),
            a,
            b,
            product,
            bounds(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::SaddleValueNonzero { value, .. } if value == -1.0));
    }

    #[test]
    fn exponential_saddle_case_passes_construction_check() {
        let exact = SmoothTestFunction::new(
            |x| (x[0] + x[1]).exp(),
            |x| Point::new(1.0, 1.0) * (x[0] + x[1]).exp(),
            |x| Mat2::from_element((x[0] + x[1]).exp()),
        );
        let mats = [
            [Mat2::new(1.0, 0.2, 0.2, 0.8), Mat2::new(0.9, -0.1, -0.1, 1.2)],
            [Mat2::new(1.3, 0.3, 0.3, 1.0), Mat2::identity()],
        ];
        let coeffs = CoefficientField::new(
            Arc::new(move |a, b, _| mats[a][b]),
            Arc::new(|a, b, _| Point::new(0.4 - 0.8 * a as f64, 0.3 * b as f64)),
            Arc::new(|a, _, _| 0.5 * a as f64),
            Arc::new(|_, _, _| 0.0),
            0.4,
            0.5,
        );
        let (ca, cb, table) = alpha_minus_beta();
        let case = make_isaacs_saddle_case(
            exact.clone(),
            Domain::disk(Point::zeros(), 1.0),
            coeffs,
            ca,
            cb,
            table,
            bounds(),
        )
        .unwrap();
        assert_eq!(case.family, ManufacturedFamily::IsaacsSaddle);
        // independent evaluation of the sup-inf at probes
        for x in sample_domain(&case.problem.domain, 100, 3) {
            let mut sup = f64::NEG_INFINITY;
            for a in 0..2 {
                let mut inf = f64::INFINITY;
                for b in 0..2 {
                    let l = case.problem.eval_l(a, b, &exact, &x).unwrap() + (case.problem.coeffs.f)(a, b, &x);
                    inf = inf.min(l);
                }
                sup = sup.max(inf);
            }
            assert!(sup.abs() <= 1e-12);
        }
    }
}
