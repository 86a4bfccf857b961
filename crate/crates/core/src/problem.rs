//! Continuous problem data: control sets, coefficient fields, boundary data,
//! and the operators `L^{αβ}φ` and `F[φ]` evaluated on analytic test functions.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::grid::Domain;

pub type Point = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

pub type MatrixFn = Arc<dyn Fn(usize, usize, &Point) -> Mat2 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(usize, usize, &Point) -> Point + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(usize, usize, &Point) -> f64 + Send + Sync>;

/// Ellipticity constant `δ` and the global bound `K₀` on the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticityBounds {
    pub delta: f64,
    pub k0: f64,
}

impl EllipticityBounds {
    pub fn new(delta: f64, k0: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid("delta", format!("{delta} not in (0, 1)")));
        }
        if !(k0 >= 0.0) || !k0.is_finite() {
            return Err(Error::invalid("k0", format!("{k0} must be finite and >= 0")));
        }
        Ok(Self { delta, k0 })
    }

    /// Whether `a` lies in `S_δ`: eigenvalues in `[δ, 1/δ]`, up to `slack`.
    pub fn contains(&self, a: &Mat2, slack: f64) -> bool {
        let (lo, hi) = sym_eigenvalues(a);
        lo >= self.delta - slack && hi <= 1.0 / self.delta + slack
    }
}

/// Finite ordered control set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlSet {
    labels: Vec<String>,
}

impl ControlSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::invalid("controls", "control set is empty"));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::invalid("controls", format!("duplicate label `{l}`")));
            }
        }
        Ok(Self { labels })
    }

    /// Controls labelled `0, 1, …, n-1`.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Coefficient fields `a, b, c, f` indexed by control pair and position,
/// together with the declared Hölder exponents.
#[derive(Clone)]
pub struct CoefficientField {
    pub a: MatrixFn,
    pub b: VectorFn,
    pub c: ScalarFn,
    pub f: ScalarFn,
    /// Hölder exponent of `a`.
    pub gamma: f64,
    /// Hölder exponent of `b, c, f` (`ω(t) = t^τ`).
    pub tau: f64,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("gamma", &self.gamma)
            .field("tau", &self.tau)
            .finish_non_exhaustive()
    }
}

impl CoefficientField {
    pub fn new(a: MatrixFn, b: VectorFn, c: ScalarFn, f: ScalarFn, gamma: f64, tau: f64) -> Self {
        Self {
            a,
            b,
            c,
            f,
            gamma,
            tau,
        }
    }

    /// Same `a, b, c` everywhere and for all controls, with `f = 0`.
    pub fn constant(a: Mat2, b: Point, c: f64) -> Self {
        Self {
            a: Arc::new(move |_, _, _| a),
            b: Arc::new(move |_, _, _| b),
            c: Arc::new(move |_, _, _| c),
            f: Arc::new(|_, _, _| 0.0),
            gamma: 0.49,
            tau: 0.5,
        }
    }

    pub fn with_source(mut self, f: ScalarFn) -> Self {
        self.f = f;
        self
    }
}

/// Hölder exponent of the diffusion coefficients tied to the interior
/// regularity exponent `χ`: `γ = (4 − 3χ)/(8 − 4χ)`.
pub fn gamma_for_chi(chi: f64) -> f64 {
    (4.0 - 3.0 * chi) / (8.0 - 4.0 * chi)
}

type ValueFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
type HessFn = Arc<dyn Fn(&Point) -> Mat2 + Send + Sync>;

/// A function with analytically supplied gradient and Hessian.
#[derive(Clone)]
pub struct SmoothTestFunction {
    pub value: ValueFn,
    pub gradient: GradFn,
    pub hessian: HessFn,
}

impl fmt::Debug for SmoothTestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SmoothTestFunction { .. }")
    }
}

impl SmoothTestFunction {
    pub fn new(
        value: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Point) -> Point + Send + Sync + 'static,
        hessian: impl Fn(&Point) -> Mat2 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
        }
    }

    pub fn constant(k: f64) -> Self {
        Self::new(move |_| k, |_| Point::zeros(), |_| Mat2::zeros())
    }

    pub fn affine(p: Point, k: f64) -> Self {
        Self::new(move |x| p.dot(x) + k, move |_| p, |_| Mat2::zeros())
    }

    /// `½ xᵀMx + pᵀx + k` with `M` symmetrized.
    pub fn quadratic(m: Mat2, p: Point, k: f64) -> Self {
        let m = (m + m.transpose()) * 0.5;
        Self::new(
            move |x| 0.5 * x.dot(&(m * x)) + p.dot(x) + k,
            move |x| m * x + p,
            move |_| m,
        )
    }

    pub fn value(&self, x: &Point) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &Point) -> Point {
        (self.gradient)(x)
    }

    pub fn hessian(&self, x: &Point) -> Mat2 {
        (self.hessian)(x)
    }

    /// Largest deviation between the supplied derivatives and central
    /// differences with the given step, over the probe points.
    pub fn consistency_error(&self, probes: &[Point], step: f64) -> f64 {
        let mut worst = 0.0_f64;
        let e = [Point::new(step, 0.0), Point::new(0.0, step)];
        for x in probes {
            let g = self.gradient(x);
            let hm = self.hessian(x);
            for i in 0..2 {
                let fd = (self.value(&(x + e[i])) - self.value(&(x - e[i]))) / (2.0 * step);
                worst = worst.max((fd - g[i]).abs());
                let gd = (self.gradient(&(x + e[i])) - self.gradient(&(x - e[i]))) / (2.0 * step);
                for j in 0..2 {
                    worst = worst.max((gd[j] - hm[(j, i)]).abs());
                }
            }
        }
        worst
    }
}

/// Dirichlet problem for `sup_α inf_β [L^{αβ}u + f^{αβ}] = 0` in `G`, `u = g` on `∂G`.
#[derive(Debug, Clone)]
pub struct IsaacsProblem {
    pub domain: Domain,
    pub controls_a: ControlSet,
    pub controls_b: ControlSet,
    pub coeffs: CoefficientField,
    pub g: SmoothTestFunction,
    pub bounds: EllipticityBounds,
}

impl IsaacsProblem {
    pub fn new(
        domain: Domain,
        controls_a: ControlSet,
        controls_b: ControlSet,
        coeffs: CoefficientField,
        g: SmoothTestFunction,
        bounds: EllipticityBounds,
    ) -> Self {
        Self {
            domain,
            controls_a,
            controls_b,
            coeffs,
            g,
            bounds,
        }
    }

    pub fn n_alpha(&self) -> usize {
        self.controls_a.len()
    }

    pub fn n_beta(&self) -> usize {
        self.controls_b.len()
    }

    fn check_pair(&self, alpha: usize, beta: usize) -> Result<()> {
        if alpha >= self.n_alpha() {
            return Err(Error::UnknownControl {
                player: 'A',
                label: alpha.to_string(),
            });
        }
        if beta >= self.n_beta() {
            return Err(Error::UnknownControl {
                player: 'B',
                label: beta.to_string(),
            });
        }
        Ok(())
    }

    /// `a_ij D_ijφ + b_i D_iφ − cφ` at `x` for the pair `(α, β)`.
    pub fn eval_l(&self, alpha: usize, beta: usize, phi: &SmoothTestFunction, x: &Point) -> Result<f64> {
        self.check_pair(alpha, beta)?;
        Ok(self.l_unchecked(alpha, beta, phi, x))
    }

    /// Label-addressed variant of [`eval_l`](Self::eval_l).
    pub fn eval_l_labels(&self, alpha: &str, beta: &str, phi: &SmoothTestFunction, x: &Point) -> Result<f64> {
        let a = self.controls_a.index_of(alpha).ok_or_else(|| Error::UnknownControl {
            player: 'A',
            label: alpha.to_string(),
        })?;
        let b = self.controls_b.index_of(beta).ok_or_else(|| Error::UnknownControl {
            player: 'B',
            label: beta.to_string(),
        })?;
        Ok(self.l_unchecked(a, b, phi, x))
    }

    fn l_unchecked(&self, alpha: usize, beta: usize, phi: &SmoothTestFunction, x: &Point) -> f64 {
        let a = (self.coeffs.a)(alpha, beta, x);
        let b = (self.coeffs.b)(alpha, beta, x);
        let c = (self.coeffs.c)(alpha, beta, x);
        let hess = phi.hessian(x);
        a.component_mul(&hess).sum() + b.dot(&phi.gradient(x)) - c * phi.value(x)
    }

    /// `max_α min_β [L^{αβ}φ + f^{αβ}](x)`.
    pub fn eval_f(&self, phi: &SmoothTestFunction, x: &Point) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for alpha in 0..self.n_alpha() {
            let mut inner = f64::INFINITY;
            for beta in 0..self.n_beta() {
                let v = self.l_unchecked(alpha, beta, phi, x) + (self.coeffs.f)(alpha, beta, x);
                inner = inner.min(v);
            }
            best = best.max(inner);
        }
        best
    }

    /// Spot-check the structural assumptions on the supplied probe points:
    /// `a ∈ S_δ`, `‖a‖, |b|, c, |f| ≤ K₀`, `c ≥ 0`, the Hölder quotient of
    /// `a` on consecutive probe pairs, and `‖g‖_{C^{1,1}} ≤ K₀`.
    pub fn validate(&self, probes: &[Point]) -> Result<()> {
        let k0 = self.bounds.k0;
        let slack = 1e-12;
        let fmt_pt = |x: &Point| format!("({}, {})", x[0], x[1]);
        for x in probes {
            for alpha in 0..self.n_alpha() {
                for beta in 0..self.n_beta() {
                    let a = (self.coeffs.a)(alpha, beta, x);
                    if (a[(0, 1)] - a[(1, 0)]).abs() > 1e-12 {
                        return Err(Error::invalid("coefficients.a", format!("not symmetric at {}", fmt_pt(x))));
                    }
                    if !self.bounds.contains(&a, slack) {
                        let (lo, hi) = sym_eigenvalues(&a);
                        return Err(Error::invalid(
                            "coefficients.a",
                            format!("eigenvalues [{lo}, {hi}] outside S_delta at {} for pair ({alpha}, {beta})", fmt_pt(x)),
                        ));
                    }
                    if a.norm() > k0 + slack {
                        return Err(Error::invalid("coefficients.a", format!("|a| > k0 at {}", fmt_pt(x))));
                    }
                    let b = (self.coeffs.b)(alpha, beta, x);
                    let c = (self.coeffs.c)(alpha, beta, x);
                    let f = (self.coeffs.f)(alpha, beta, x);
                    if b.norm() > k0 + slack {
                        return Err(Error::invalid("coefficients.b", format!("|b| = {} > k0 at {}", b.norm(), fmt_pt(x))));
                    }
                    if c < 0.0 || c > k0 + slack {
                        return Err(Error::invalid("coefficients.c", format!("c = {c} outside [0, k0] at {}", fmt_pt(x))));
                    }
                    if f.abs() > k0 + slack {
                        return Err(Error::invalid("coefficients.f", format!("|f| = {} > k0 at {}", f.abs(), fmt_pt(x))));
                    }
                }
            }
        }
        for pair in probes.windows(2) {
            let (x, y) = (&pair[0], &pair[1]);
            let dist = (x - y).norm();
            if dist == 0.0 {
                continue;
            }
            for alpha in 0..self.n_alpha() {
                for beta in 0..self.n_beta() {
                    let q = ((self.coeffs.a)(alpha, beta, x) - (self.coeffs.a)(alpha, beta, y)).norm()
                        / dist.powf(self.coeffs.gamma);
                    if q > k0 + slack {
                        return Err(Error::invalid(
                            "coefficients.a",
                            format!("Hoelder quotient {q} > k0 between {} and {}", fmt_pt(x), fmt_pt(y)),
                        ));
                    }
                }
            }
            let gq = (self.g.gradient(x) - self.g.gradient(y)).norm() / dist;
            if gq > k0 + slack {
                return Err(Error::invalid("boundary", format!("gradient difference quotient {gq} > k0")));
            }
        }
        for x in probes {
            if self.g.value(x).abs() > k0 + slack || self.g.gradient(x).norm() > k0 + slack {
                return Err(Error::invalid("boundary", format!("|g| or |Dg| exceeds k0 at {}", fmt_pt(x))));
            }
        }
        Ok(())
    }
}

/// Eigenvalues `(λ_min, λ_max)` of a symmetric 2×2 matrix.
pub fn sym_eigenvalues(m: &Mat2) -> (f64, f64) {
    let tr = m[(0, 0)] + m[(1, 1)];
    let half_diff = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let r = half_diff.hypot(off);
    (0.5 * tr - r, 0.5 * tr + r)
}

/// Rotation of `diag(l1, l2)` by angle `theta`.
pub fn rotated_diag(l1: f64, l2: f64, theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    let off = c * s * (l1 - l2);
    Mat2::new(c * c * l1 + s * s * l2, off, off, s * s * l1 + c * c * l2)
}
