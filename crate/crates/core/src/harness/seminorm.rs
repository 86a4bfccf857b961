//! Discrete interior `C^{1+χ}` seminorm of a grid function over
//! `G_ε = {x : dist(x, ∂G) > ε}`.

use rayon::prelude::*;
use serde::Serialize;

use crate::grid::GridFunction;
use crate::problem::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeminormRow {
    pub eps: f64,
    pub n_points: usize,
    /// `max |∇_h w(x) − ∇_h w(y)| / |x − y|^χ` over pairs in `G_ε`.
    pub seminorm: f64,
    /// `seminorm · ε^{1+χ}`.
    pub scaled: f64,
}

/// Central-difference gradient at every interior point with `ρ > ε`.
fn gradients(w: &GridFunction<'_>, eps: f64) -> Vec<(Point, Point)> {
    let grid = w.grid();
    let h = grid.h();
    let st = grid.stencil();
    let (k0, k1) = (st.basis_index(0), st.basis_index(1));
    grid.interior_ids()
        .iter()
        .enumerate()
        .filter(|(_, &id)| grid.rho(id as usize) > eps)
        .map(|(ord, &id)| {
            let d = |k: usize| (w.get(grid.neighbor(ord, k, true)) - w.get(grid.neighbor(ord, k, false))) / (2.0 * h);
            (grid.point(id as usize), Point::new(d(k0), d(k1)))
        })
        .collect()
}

/// One row per `ε`; reported, not asserted, since the constant is unknown.
pub fn interior_seminorm_diagnostic(w: &GridFunction<'_>, epsilons: &[f64], chi: f64) -> Vec<SeminormRow> {
    epsilons
        .iter()
        .map(|&eps| {
            let pts = gradients(w, eps);
            let seminorm = (0..pts.len())
                .into_par_iter()
                .map(|i| {
                    let (x, gx) = pts[i];
                    pts[i + 1..]
                        .iter()
                        .map(|(y, gy)| (gx - gy).norm() / (x - y).norm().powf(chi))
                        .fold(0.0, f64::max)
                })
                .reduce(|| 0.0, f64::max);
            SeminormRow {
                eps,
                n_points: pts.len(),
                seminorm,
                scaled: seminorm * eps.powf(1.0 + chi),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Domain, Grid, Stencil};

    fn disk_grid(h: f64) -> Grid {
        Grid::build(&Domain::disk(Point::zeros(), 1.0), &Stencil::default_four(), h).unwrap()
    }

    #[test]
    fn affine_functions_have_zero_seminorm() {
        let g = disk_grid(1.0 / 16.0);
        let w = GridFunction::from_fn(&g, |x| 0.4 * x[0] - 2.0 * x[1] + 1.0);
        for row in interior_seminorm_diagnostic(&w, &[0.4, 0.2, 0.1], 0.1) {
            assert!(row.seminorm < 1e-12);
            assert!(row.n_points > 0);
        }
    }

    #[test]
    fn smooth_function_is_bounded_by_its_hessian() {
        // |∇u(x) − ∇u(y)| ≤ sup‖D²u‖ |x − y| ≤ sup‖D²u‖ diam^{1−χ} |x − y|^χ
        let g = disk_grid(1.0 / 32.0);
        let w = GridFunction::from_fn(&g, |x| (x[0] + 0.5 * x[1]).sin());
        let chi = 0.1;
        let hess_bound = 1.25; // ‖(1, ½)(1, ½)ᵀ‖ = 1 + ¼
        let bound = hess_bound * 2f64.powf(1.0 - chi) * 1.01;
        for row in interior_seminorm_diagnostic(&w, &[0.4, 0.2, 0.1], chi) {
            assert!(row.seminorm <= bound, "{row:?}");
        }
    }

    #[test]
    fn boundary_blow_up_is_detected() {
        // w = ρ^{1/2} has |∇w| ~ ρ^{−1/2}, so the seminorm over G_ε grows
        // like ε^{−1/2−χ} while the scaled column shrinks like ε^{1/2};
        // w = ρ^{−1/2} has |∇w| ~ ρ^{−3/2} and a growing scaled column
        let g = disk_grid(1.0 / 32.0);
        let eps = [0.2, 0.1, 0.05];
        let sqrt = GridFunction::from_fn(&g, |x| (1.0 - x.norm()).sqrt());
        let rows = interior_seminorm_diagnostic(&sqrt, &eps, 0.1);
        assert!(rows.windows(2).all(|r| r[1].seminorm > r[0].seminorm));
        let inv = GridFunction::from_fn(&g, |x| (1.0 - x.norm()).powf(-0.5));
        let rows = interior_seminorm_diagnostic(&inv, &eps, 0.1);
        assert!(rows.windows(2).all(|r| r[1].scaled > r[0].scaled), "{rows:?}");
    }
}
