//! Mollification `u^{(ε)} = u ∗ ζ_ε` of lattice-sampled functions with the
//! bump `ζ(x) = exp(−1/(1 − |x|²))` on `|x| < 1`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problem::Point;

/// Unnormalized radial bump.
pub fn bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

/// Values of a function on the lattice points `(i h, j h)` with
/// `i ∈ [i0, i0 + ni)`, `j ∈ [j0, j0 + nj)`.
#[derive(Debug, Clone)]
pub struct LatticeSamples {
    h: f64,
    i0: i64,
    j0: i64,
    ni: usize,
    nj: usize,
    values: Vec<f64>,
}

impl LatticeSamples {
    /// Samples `f` on the lattice points of the box `[lo, hi]`.
    pub fn from_fn(lo: Point, hi: Point, h: f64, f: impl Fn(&Point) -> f64 + Sync) -> Result<Self> {
        if !(h > 0.0) || !(hi[0] > lo[0] && hi[1] > lo[1]) {
            return Err(Error::invalid("samples", "need h > 0 and a nonempty box"));
        }
        let i0 = (lo[0] / h).ceil() as i64;
        let j0 = (lo[1] / h).ceil() as i64;
        let ni = ((hi[0] / h).floor() as i64 - i0 + 1) as usize;
        let nj = ((hi[1] / h).floor() as i64 - j0 + 1) as usize;
        let values = (0..ni * nj)
            .into_par_iter()
            .map(|k| {
                let (i, j) = ((k / nj) as i64 + i0, (k % nj) as i64 + j0);
                f(&Point::new(i as f64 * h, j as f64 * h))
            })
            .collect();
        Ok(Self {
            h,
            i0,
            j0,
            ni,
            nj,
            values,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn get(&self, i: i64, j: i64) -> Option<f64> {
        let (a, b) = (i - self.i0, j - self.j0);
        if a < 0 || b < 0 || a >= self.ni as i64 || b >= self.nj as i64 {
            return None;
        }
        Some(self.values[a as usize * self.nj + b as usize])
    }

    /// Indices of the lattice point at `x`, if `x` is one.
    pub fn lattice_index(&self, x: &Point) -> Option<(i64, i64)> {
        let (i, j) = ((x[0] / self.h).round() as i64, (x[1] / self.h).round() as i64);
        let off = (x[0] - i as f64 * self.h).abs().max((x[1] - j as f64 * self.h).abs());
        (off <= 1e-9 * self.h).then_some((i, j))
    }

    /// `Σ_y u(y) ζ((y − x)/ε) / Σ_y ζ((y − x)/ε)` over lattice points `y`
    /// around the lattice point `x = (i h, j h)`: the quadrature of
    /// `u ∗ ζ_ε` with discrete weights normalized to 1. The weights are
    /// symmetric about `x`, so constants and affine functions are
    /// reproduced up to rounding.
    pub fn mollify_at(&self, i: i64, j: i64, eps: f64) -> Result<f64> {
        let h = self.h;
        let (x, y) = (i as f64 * h, j as f64 * h);
        if !(eps > 0.0) {
            return Err(Error::invalid("eps", format!("{eps} must be positive")));
        }
        let m = (eps / h).ceil() as i64;
        let escapes = i - m < self.i0
            || j - m < self.j0
            || i + m >= self.i0 + self.ni as i64
            || j + m >= self.j0 + self.nj as i64;
        if escapes {
            return Err(Error::SupportEscapesRegion { x, y, eps });
        }
        let inv = (h / eps).powi(2);
        let mut num = 0.0;
        let mut den = 0.0;
        for a in -m..=m {
            let row = (i + a - self.i0) as usize * self.nj;
            for b in -m..=m {
                let w = bump(((a * a + b * b) as f64) * inv);
                if w > 0.0 {
                    num += w * self.values[row + (j + b - self.j0) as usize];
                    den += w;
                }
            }
        }
        Ok(num / den)
    }
}

/// `u^{(ε)}` at every point of `points`, which must be sample lattice
/// points.
pub fn mollify(samples: &LatticeSamples, eps: f64, points: &[Point]) -> Result<Vec<f64>> {
    points
        .par_iter()
        .map(|x| {
            let (i, j) = samples
                .lattice_index(x)
                .ok_or_else(|| Error::invalid("points", format!("({}, {}) is not a sample lattice point", x[0], x[1])))?;
            samples.mollify_at(i, j, eps)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_and_affine_functions_are_preserved() {
        let lo = Point::new(-1.0, -1.0);
        let hi = Point::new(1.0, 1.0);
        let h = 0.01;
        let c = LatticeSamples::from_fn(lo, hi, h, |_| 2.5).unwrap();
        let a = LatticeSamples::from_fn(lo, hi, h, |x| 0.3 * x[0] - 1.7 * x[1] + 0.2).unwrap();
        let pts = [Point::new(0.0, 0.0), Point::new(0.37, -0.21), Point::new(-0.5, 0.73)];
        for eps in [0.05, 0.2] {
            for (x, v) in pts.iter().zip(mollify(&c, eps, &pts).unwrap()) {
                assert!((v - 2.5).abs() < 1e-10, "{x:?}");
            }
            for (x, v) in pts.iter().zip(mollify(&a, eps, &pts).unwrap()) {
                let exact = 0.3 * x[0] - 1.7 * x[1] + 0.2;
                assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
            }
        }
        assert!(mollify(&c, 0.1, &[Point::new(0.123, 0.0)]).is_err());
    }

    #[test]
    fn support_must_stay_inside_the_samples() {
        let s = LatticeSamples::from_fn(Point::new(0.0, 0.0), Point::new(1.0, 1.0), 0.01, |_| 1.0).unwrap();
        assert!(s.mollify_at(50, 50, 0.2).is_ok());
        assert!(matches!(
            s.mollify_at(5, 50, 0.1),
            Err(Error::SupportEscapesRegion { .. })
        ));
    }

    #[test]
    fn mollified_quadratic_gains_second_moment() {
        // (|x|²) ∗ ζ_ε at 0 equals ε² ∫|y|²ζ / ∫ζ, a fixed fraction of ε²
        let s = LatticeSamples::from_fn(Point::new(-0.5, -0.5), Point::new(0.5, 0.5), 0.0025, |x| x.norm_squared()).unwrap();
        let m1 = s.mollify_at(0, 0, 0.2).unwrap();
        let m2 = s.mollify_at(0, 0, 0.1).unwrap();
        assert!((m1 / m2 - 4.0).abs() < 1e-3);
    }
}
