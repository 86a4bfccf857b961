//! Radial barrier `ψ(x) = cosh(μR) − cosh(μ|x|)` with
//! `a_ij D_ij ψ + b_i D_i ψ ≤ −1` for all `a ∈ S_δ`, `|b| ≤ K₁`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Domain;
use crate::harness::manufactured::sample_domain;
use crate::problem::{rotated_diag, Mat2, Point};

/// Required upper bound `−1` on the barrier operator, up to this slack.
pub const BARRIER_SLACK: f64 = 1e-9;
const MAX_DOUBLINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Barrier {
    pub mu: f64,
    pub radius: f64,
}

impl Barrier {
    pub fn new(mu: f64, radius: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid("barrier.mu", format!("{mu} must be positive")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("barrier.radius", format!("{radius} must be positive")));
        }
        Ok(Self { mu, radius })
    }

    pub fn value(&self, x: &Point) -> f64 {
        (self.mu * self.radius).cosh() - (self.mu * x.norm()).cosh()
    }

    pub fn gradient(&self, x: &Point) -> Point {
        let r = x.norm();
        if r == 0.0 {
            return Point::zeros();
        }
        -x * (self.mu * (self.mu * r).sinh() / r)
    }

    pub fn hessian(&self, x: &Point) -> Mat2 {
        let mu = self.mu;
        let r = x.norm();
        if r == 0.0 {
            return -Mat2::identity() * (mu * mu);
        }
        let n = x / r;
        let nn = n * n.transpose();
        let radial = -mu * mu * (mu * r).cosh();
        let tangential = -mu * (mu * r).sinh() / r;
        nn * radial + (Mat2::identity() - nn) * tangential
    }

    /// `min ψ` over the closure of the domain, attained at `|x| = max|x|`.
    pub fn value_bound(&self, domain: &Domain) -> f64 {
        (self.mu * self.radius).cosh() - (self.mu * domain.max_norm()).cosh()
    }

    /// `a_ij D_ij ψ + b_i D_i ψ` at `x`.
    pub fn operator(&self, a: &Mat2, b: &Point, x: &Point) -> f64 {
        a.component_mul(&self.hessian(x)).sum() + b.dot(&self.gradient(x))
    }

    /// Closed-form supremum of the operator at `x` over `a ∈ S_δ`,
    /// `|b| ≤ K₁`: both Hessian eigenvalues are negative, so `a = δI`, and
    /// `b` points along `x`.
    pub fn worst_case(&self, x: &Point, delta: f64, k1: f64) -> f64 {
        let mu = self.mu;
        let r = x.norm();
        let (radial, tangential, slope) = if r == 0.0 {
            (-mu * mu, -mu * mu, 0.0)
        } else {
            (-mu * mu * (mu * r).cosh(), -mu * (mu * r).sinh() / r, mu * (mu * r).sinh())
        };
        delta * (radial + tangential) + k1 * slope
    }
}

/// Largest sampled `a_ij D_ij ψ + b_i D_i ψ` over points of the domain,
/// `a` rotated extreme matrices of `S_δ` (eigenvalues in `{δ, 1/δ}`) and
/// `b` on the sphere of radius `K₁`.
pub fn max_sampled_operator(barrier: &Barrier, domain: &Domain, delta: f64, k1: f64, samples: usize, seed: u64) -> f64 {
    let points = sample_domain(domain, samples, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut worst = f64::NEG_INFINITY;
    for x in points {
        let (l1, l2) = match rng.gen_range(0..3) {
            0 => (delta, delta),
            1 => (delta, 1.0 / delta),
            _ => (1.0 / delta, 1.0 / delta),
        };
        let a = rotated_diag(l1, l2, rng.gen_range(0.0..PI));
        let t = rng.gen_range(0.0..2.0 * PI);
        let b = Point::new(t.cos(), t.sin()) * k1;
        worst = worst.max(barrier.operator(&a, &b, &x));
    }
    worst
}

/// Sampled maximum and the closed-form worst case over the same points;
/// fails with `BarrierInvalid` if either exceeds `−1 + 1e−9`.
pub fn verify_barrier(barrier: &Barrier, domain: &Domain, delta: f64, k1: f64, samples: usize, seed: u64) -> Result<f64> {
    let sampled = max_sampled_operator(barrier, domain, delta, k1, samples, seed);
    let certified = sample_domain(domain, samples, seed)
        .iter()
        .map(|x| barrier.worst_case(x, delta, k1))
        .fold(f64::NEG_INFINITY, f64::max);
    let slack = sampled.max(certified);
    if slack > -1.0 + BARRIER_SLACK {
        return Err(Error::BarrierInvalid {
            slack,
            mu: barrier.mu,
            radius: barrier.radius,
        });
    }
    if barrier.value_bound(domain) < 1.0 {
        return Err(Error::BarrierInvalid {
            slack,
            mu: barrier.mu,
            radius: barrier.radius,
        });
    }
    Ok(sampled)
}

/// `R = 2(1 + max|x|)` and `μ = 1, 2, 4, …` until verification passes.
pub fn auto_tune(domain: &Domain, delta: f64, k1: f64, samples: usize, seed: u64) -> Result<(Barrier, f64)> {
    let radius = 2.0 * (1.0 + domain.max_norm());
    let mut mu = 1.0;
    let mut last = None;
    for _ in 0..MAX_DOUBLINGS {
        let barrier = Barrier::new(mu, radius)?;
        match verify_barrier(&barrier, domain, delta, k1, samples, seed) {
            Ok(slack) => return Ok((barrier, slack)),
            Err(e) => last = Some(e),
        }
        mu *= 2.0;
    }
    Err(last.expect("at least one attempt"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_value_is_minus_mu_squared_trace() {
        let b = Barrier::new(3.0, 4.0).unwrap();
        let a = Mat2::new(0.7, 0.1, 0.1, 0.4);
        let v = b.operator(&a, &Point::new(1.0, -2.0), &Point::zeros());
        assert!((v + 9.0 * 1.1).abs() < 1e-12);
        // μ² ≥ 1/(2δ) makes −μ² tr(δI) ≤ −1
        let delta: f64 = 0.2;
        let mu = (1.0 / (2.0 * delta)).sqrt();
        let b = Barrier::new(mu, 4.0).unwrap();
        assert!(b.operator(&(Mat2::identity() * delta), &Point::zeros(), &Point::zeros()) <= -1.0 + 1e-12);
    }

    #[test]
    fn derivatives_match_hand_formula_at_half_radius() {
        let (mu, radius, delta, k1) = (2.5, 4.0, 0.2, 2.0);
        let b = Barrier::new(mu, radius).unwrap();
        let x = Point::new(1.2, 1.6); // |x| = 2 = R/2
        let r = x.norm();
        let mut oracle = 0.0;
        let a = Mat2::identity() * delta;
        for i in 0..2 {
            for j in 0..2 {
                let kron = if i == j { 1.0 } else { 0.0 };
                let dij = -mu * mu * (x[i] * x[j] / (r * r)) * (mu * r).cosh()
                    - mu * (kron / r - x[i] * x[j] / r.powi(3)) * (mu * r).sinh();
                oracle += a[(i, j)] * dij;
            }
        }
        let bvec = x / r * k1;
        oracle += bvec.dot(&(-x / r * (mu * (mu * r).sinh())));
        assert!((b.operator(&a, &bvec, &x) - oracle).abs() < 1e-10 * oracle.abs().max(1.0));
        let inward = b.operator(&a, &(-bvec), &x);
        assert!((b.worst_case(&x, delta, k1) - inward).abs() < 1e-10 * inward.abs().max(1.0));
    }

    #[test]
    fn doubling_mu_does_not_raise_slack() {
        let d = Domain::disk(Point::zeros(), 1.0);
        let mut prev = f64::INFINITY;
        for mu in [8.0, 16.0, 32.0] {
            let s = max_sampled_operator(&Barrier::new(mu, 4.0).unwrap(), &d, 0.2, 2.0, 2000, 7);
            assert!(s <= prev);
            prev = s;
        }
    }

    #[test]
    fn auto_tuned_barrier_passes_and_small_mu_fails() {
        let d = Domain::disk(Point::zeros(), 1.0);
        let (b, slack) = auto_tune(&d, 0.2, 2.0, 2000, 1).unwrap();
        assert!(slack <= -1.0 + BARRIER_SLACK);
        assert_eq!(b.radius, 4.0);
        assert!(b.value_bound(&d) >= 1.0);
        let weak = Barrier::new(1.0, 4.0).unwrap();
        assert!(matches!(verify_barrier(&weak, &d, 0.2, 2.0, 2000, 1), Err(Error::BarrierInvalid { .. })));
    }
}
