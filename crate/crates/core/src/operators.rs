//! Finite-difference operators on grid functions: difference quotients,
//! the discrete Isaacs operator `F_h`, the Pucci-type operators `P` and
//! `P_h`, and the truncated operators `max(F_h, P_h − K)` and
//! `min(F_h, −P_h[−·] + K)`.
//!
//! Every linear piece is stored in monotone form
//! `Σ_j w_j (u(y_j) − u(x)) − c u(x) + f` with `w_j ≥ 0`, `c ≥ 0`.
//! Drift terms are upwinded: `b̄_k⁺ δ_{h,l_k} + b̄_k⁻ δ_{h,−l_k}`
//! with `b̄⁻ = max(−b̄, 0)`.

use std::io::Write;

use rayon::prelude::*;
use smallvec::SmallVec;

use crate::decomposition::{decomposition_floor, DirectionalDecomposition};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::problem::{sym_eigenvalues, EllipticityBounds, IsaacsProblem, Mat2, Point};

/// Constants `(δ̂, K₁)` of the Pucci-type operator `P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PucciParams {
    pub delta_hat: f64,
    pub k1: f64,
}

impl PucciParams {
    pub fn new(delta_hat: f64, k1: f64, bounds: &EllipticityBounds) -> Result<Self> {
        if !(delta_hat > 0.0 && delta_hat < bounds.delta) {
            return Err(Error::invalid(
                "delta_hat",
                format!("{delta_hat} not in (0, delta = {})", bounds.delta),
            ));
        }
        if !(k1 >= bounds.k0) || !k1.is_finite() || k1 <= 0.0 {
            return Err(Error::invalid("k1", format!("{k1} must be positive and >= k0 = {}", bounds.k0)));
        }
        Ok(Self { delta_hat, k1 })
    }

    /// `δ̂ = 0.9 δ`, `K₁ = max(K₀, 1) + 1`. A `δ̂` close to `δ` keeps the
    /// certified coefficient floor of the discrete operator positive on
    /// coarse stencils.
    pub fn default_for(bounds: &EllipticityBounds) -> Self {
        Self {
            delta_hat: 0.9 * bounds.delta,
            k1: bounds.k0.max(1.0) + 1.0,
        }
    }
}

/// Truncation level `K ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TruncationLevel(f64);

impl TruncationLevel {
    pub fn new(k: f64) -> Result<Self> {
        if !(k >= 1.0) {
            return Err(Error::invalid("K", format!("{k} must be >= 1")));
        }
        Ok(Self(k))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Which equation the scheme discretizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// `F_h[u] = 0`.
    None,
    /// `max(F_h[u], P_h[u] − K) = 0`.
    Upper(TruncationLevel),
    /// `min(F_h[v], −P_h[−v] + K) = 0`.
    Lower(TruncationLevel),
}

fn forward_offset(l: [i64; 2], sign: i64) -> [i64; 2] {
    [sign * l[0], sign * l[1]]
}

fn require_point(u: &GridFunction<'_>, x: &Point) -> Result<usize> {
    u.grid().locate(x).ok_or(Error::UnclassifiedPoint { x: x[0], y: x[1] })
}

fn neighbor_value(u: &GridFunction<'_>, id: usize, v: [i64; 2]) -> Result<f64> {
    let grid = u.grid();
    match grid.offset(id, v) {
        Some(nb) => Ok(u.get(nb)),
        None => {
            let [i, j] = grid.lattice(id);
            Err(Error::MissingNeighbor {
                x: (i + v[0]) as f64 * grid.h(),
                y: (j + v[1]) as f64 * grid.h(),
            })
        }
    }
}

/// `δ_{h,l}u(x) = (u(x + hl) − u(x))/h`.
pub fn delta_h(u: &GridFunction<'_>, x: &Point, l: [i64; 2]) -> Result<f64> {
    let id = require_point(u, x)?;
    let h = u.grid().h();
    Ok((neighbor_value(u, id, l)? - u.get(id)) / h)
}

/// `Δ_{h,l}u(x) = (u(x + hl) − 2u(x) + u(x − hl))/h²`.
pub fn delta2_h(u: &GridFunction<'_>, x: &Point, l: [i64; 2]) -> Result<f64> {
    let id = require_point(u, x)?;
    let h = u.grid().h();
    let plus = neighbor_value(u, id, l)?;
    let minus = neighbor_value(u, id, forward_offset(l, -1))?;
    Ok((plus - 2.0 * u.get(id) + minus) / (h * h))
}

/// `sup_{a ∈ S_δ̂} tr(aM) + K₁|p| − K₁u`.
pub fn eval_p(m: &Mat2, p: &Point, u: f64, params: &PucciParams) -> f64 {
    let (l0, l1) = sym_eigenvalues(m);
    let pucci = |l: f64| if l > 0.0 { l / params.delta_hat } else { l * params.delta_hat };
    pucci(l0) + pucci(l1) + params.k1 * p.norm() - params.k1 * u
}

/// Linear monotone operator at one interior point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointOp {
    /// `(point id, weight ≥ 0)`.
    pub weights: SmallVec<[(u32, f64); 16]>,
    pub c: f64,
    pub f: f64,
}

impl PointOp {
    /// `Σ w (u(y) − u(x)) − c u(x) + f`.
    #[inline]
    pub fn apply(&self, u: &[f64], center: usize) -> f64 {
        let uc = u[center];
        let mut s = 0.0;
        for &(id, w) in &self.weights {
            s += w * (u[id as usize] - uc);
        }
        s - self.c * uc + self.f
    }

    /// `Σ w + c`, the diagonal entry of the linearized row.
    pub fn diagonal(&self) -> f64 {
        self.weights.iter().map(|(_, w)| w).sum::<f64>() + self.c
    }
}

/// Value of `F_h` at a point with the optimal control pair
/// (first index attaining the extremum in control-set order).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FhEval {
    pub value: f64,
    pub alpha: usize,
    pub beta: usize,
}

/// Branch chosen by the maximizing player.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaBranch {
    Control(usize),
    /// `P_h[u] − K` option of the upper truncated equation.
    Pucci,
}

/// Branch chosen by the minimizing player.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaBranch {
    Control(usize),
    /// `−P_h[−v] + K` option of the lower truncated equation.
    Pucci,
    /// No choice left: the maximizing player took the Pucci branch.
    None,
}

impl AlphaBranch {
    pub fn label(&self) -> String {
        match self {
            AlphaBranch::Control(a) => a.to_string(),
            AlphaBranch::Pucci => "P".into(),
        }
    }
}

impl BetaBranch {
    pub fn label(&self) -> String {
        match self {
            BetaBranch::Control(b) => b.to_string(),
            BetaBranch::Pucci => "P".into(),
            BetaBranch::None => "-".into(),
        }
    }
}

/// Full evaluation of the (possibly truncated) scheme at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeEval {
    pub value: f64,
    pub alpha: AlphaBranch,
    pub beta: BetaBranch,
}

impl SchemeEval {
    /// `"F"` when a control pair is active, `"P"` for the Pucci branch.
    pub fn active_branch(&self) -> &'static str {
        match (self.alpha, self.beta) {
            (AlphaBranch::Pucci, _) | (_, BetaBranch::Pucci) => "P",
            _ => "F",
        }
    }
}

/// Coefficient box `[lower, upper]` per direction for the discrete Pucci
/// operator, plus the first- and zeroth-order constant `K₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretePucci {
    pub lower: f64,
    pub upper: f64,
    pub k1: f64,
}

impl DiscretePucci {
    /// `lower` is the certified decomposition floor of `S_δ̂` on the
    /// stencil, `upper = 1/δ̂`.
    pub fn new(params: &PucciParams, grid: &Grid) -> Self {
        Self {
            lower: decomposition_floor(params.delta_hat, grid.stencil()),
            upper: 1.0 / params.delta_hat,
            k1: params.k1,
        }
    }
}

/// Discretized problem on a grid: the monotone linear operators for every
/// interior point and control pair, built once from cached decompositions.
pub struct Scheme<'a> {
    problem: &'a IsaacsProblem,
    grid: &'a Grid,
    n_alpha: usize,
    n_beta: usize,
    decomps: Vec<DirectionalDecomposition>,
    ops: Vec<PointOp>,
    pucci: DiscretePucci,
    pucci_params: PucciParams,
}

impl<'a> Scheme<'a> {
    /// `floor` is the required lower bound `δ₁` on the directional
    /// coefficients.
    pub fn new(problem: &'a IsaacsProblem, grid: &'a Grid, params: PucciParams, floor: f64) -> Result<Self> {
        let na = problem.n_alpha();
        let nb = problem.n_beta();
        let h = grid.h();
        let stencil = grid.stencil();
        let n = stencil.len();
        let built: Vec<Result<(DirectionalDecomposition, PointOp)>> = grid
            .interior_ids()
            .par_iter()
            .enumerate()
            .flat_map_iter(|(ord, &id)| {
                let x = grid.point(id as usize);
                (0..na).flat_map(move |alpha| (0..nb).map(move |beta| (ord, alpha, beta, x)))
            })
            .map(|(ord, alpha, beta, x)| {
                let c = &problem.coeffs;
                let a = (c.a)(alpha, beta, &x);
                let b = (c.b)(alpha, beta, &x);
                let decomp = DirectionalDecomposition::new(&a, &b, stencil, floor).map_err(|e| match e {
                    Error::DecompositionInfeasible {
                        matrix, floor, best, ..
                    } => Error::DecompositionInfeasible {
                        matrix,
                        floor,
                        best,
                        location: Some(format!("x = ({}, {}), alpha = {alpha}, beta = {beta}", x[0], x[1])),
                    },
                    e => e,
                })?;
                let mut op = PointOp {
                    weights: SmallVec::new(),
                    c: (c.c)(alpha, beta, &x),
                    f: (c.f)(alpha, beta, &x),
                };
                for k in 0..n {
                    let second = decomp.a[k] / (h * h);
                    let bk = decomp.b[k];
                    op.weights.push((grid.neighbor(ord, k, true) as u32, second + bk.max(0.0) / h));
                    op.weights.push((grid.neighbor(ord, k, false) as u32, second + (-bk).max(0.0) / h));
                }
                Ok((decomp, op))
            })
            .collect();
        let mut decomps = Vec::with_capacity(built.len());
        let mut ops = Vec::with_capacity(built.len());
        for r in built {
            let (d, o) = r?;
            decomps.push(d);
            ops.push(o);
        }
        Ok(Self {
            problem,
            grid,
            n_alpha: na,
            n_beta: nb,
            decomps,
            ops,
            pucci: DiscretePucci::new(&params, grid),
            pucci_params: params,
        })
    }

    pub fn problem(&self) -> &'a IsaacsProblem {
        self.problem
    }

    pub fn grid(&self) -> &'a Grid {
        self.grid
    }

    pub fn n_alpha(&self) -> usize {
        self.n_alpha
    }

    pub fn n_beta(&self) -> usize {
        self.n_beta
    }

    pub fn pucci(&self) -> &DiscretePucci {
        &self.pucci
    }

    pub fn pucci_params(&self) -> &PucciParams {
        &self.pucci_params
    }

    fn slot(&self, ord: usize, alpha: usize, beta: usize) -> usize {
        (ord * self.n_alpha + alpha) * self.n_beta + beta
    }

    pub fn decomposition(&self, ord: usize, alpha: usize, beta: usize) -> &DirectionalDecomposition {
        &self.decomps[self.slot(ord, alpha, beta)]
    }

    pub fn pair_op(&self, ord: usize, alpha: usize, beta: usize) -> &PointOp {
        &self.ops[self.slot(ord, alpha, beta)]
    }

    /// Smallest directional coefficient over all points and pairs.
    pub fn achieved_floor(&self) -> f64 {
        self.decomps.iter().map(|d| d.floor).fold(f64::INFINITY, f64::min)
    }

    /// `max_x max_{α,β} (Σ_j w_j + c)`, including the Pucci branch when
    /// `with_pucci` is set.
    pub fn max_diagonal(&self, with_pucci: bool) -> f64 {
        let h = self.grid.h();
        let mut m = self.ops.iter().map(PointOp::diagonal).fold(0.0, f64::max);
        if with_pucci {
            let n = self.grid.stencil().len() as f64;
            let p = 2.0 * n * self.pucci.upper / (h * h) + 2.0 * self.pucci.k1 / h + self.pucci.k1;
            m = m.max(p);
        }
        m
    }

    /// `min_β [L_h^{αβ}u + f^{αβ}]` and the minimizing `β`.
    #[inline]
    pub fn inner_min(&self, u: &[f64], ord: usize, alpha: usize) -> (f64, usize) {
        let center = self.grid.interior_ids()[ord] as usize;
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for beta in 0..self.n_beta {
            let v = self.pair_op(ord, alpha, beta).apply(u, center);
            if v < best {
                best = v;
                arg = beta;
            }
        }
        (best, arg)
    }

    /// `F_h[u]` at the interior point with ordinal `ord`.
    pub fn eval_fh_at(&self, u: &[f64], ord: usize) -> FhEval {
        let mut out = FhEval {
            value: f64::NEG_INFINITY,
            alpha: 0,
            beta: 0,
        };
        for alpha in 0..self.n_alpha {
            let (v, beta) = self.inner_min(u, ord, alpha);
            if v > out.value {
                out = FhEval { value: v, alpha, beta };
            }
        }
        out
    }

    /// `F_h[u](x)` for an interior point `x`.
    pub fn eval_fh(&self, u: &GridFunction<'_>, x: &Point) -> Result<FhEval> {
        let ord = self.interior_ordinal(x)?;
        Ok(self.eval_fh_at(u.values(), ord))
    }

    fn interior_ordinal(&self, x: &Point) -> Result<usize> {
        let id = self.grid.locate(x).ok_or(Error::UnclassifiedPoint { x: x[0], y: x[1] })?;
        self.grid.ordinal(id).ok_or_else(|| {
            // a boundary point lacks some stencil neighbor in general
            Error::MissingNeighbor { x: x[0], y: x[1] }
        })
    }

    /// Optimal operator of `sign · sup_θ L_θ(sign · u)` at `ord`, where
    /// `L_θ` ranges over `Σ q_k Δ_{h,l_k} + (upwinded drift with |b| ≤ K₁)
    /// − K₁` with `q_k ∈ [lower, upper]`. `sign = 1` gives `P_h[u]`, `sign
    /// = −1` gives `−P_h[−u]`. Returns the value and the frozen operator.
    pub fn pucci_op(&self, u: &[f64], ord: usize, sign: f64) -> (f64, PointOp) {
        let grid = self.grid;
        let h = grid.h();
        let center = grid.interior_ids()[ord] as usize;
        let uc = sign * u[center];
        let stencil = grid.stencil();
        let mut op = PointOp {
            weights: SmallVec::new(),
            c: self.pucci.k1,
            f: 0.0,
        };
        let mut value = -self.pucci.k1 * uc;
        for k in 0..stencil.len() {
            let p = grid.neighbor(ord, k, true);
            let m = grid.neighbor(ord, k, false);
            let d2 = (sign * u[p] - uc) + (sign * u[m] - uc);
            let q = if d2 > 0.0 { self.pucci.upper } else { self.pucci.lower };
            let w = q / (h * h);
            value += w * d2;
            op.weights.push((p as u32, w));
            op.weights.push((m as u32, w));
        }
        // sup over |b| ≤ K₁ of the upwinded drift: K₁ |m| with
        // m_i = max(δ_{h,e_i}, δ_{h,−e_i}, 0)
        let mut picks = [(0usize, 0.0f64); 2];
        let mut norm2 = 0.0;
        for (i, pick) in picks.iter_mut().enumerate() {
            let k = stencil.basis_index(i);
            let p = grid.neighbor(ord, k, true);
            let m = grid.neighbor(ord, k, false);
            let fwd = (sign * u[p] - uc) / h;
            let bwd = (sign * u[m] - uc) / h;
            *pick = if fwd >= bwd { (p, fwd.max(0.0)) } else { (m, bwd.max(0.0)) };
            norm2 += pick.1 * pick.1;
        }
        let norm = norm2.sqrt();
        if norm > 0.0 {
            value += self.pucci.k1 * norm;
            for (id, mi) in picks {
                if mi > 0.0 {
                    op.weights.push((id as u32, self.pucci.k1 * mi / norm / h));
                }
            }
        }
        (sign * value, op)
    }

    /// `P_h[u](x)`.
    pub fn eval_ph(&self, u: &GridFunction<'_>, x: &Point) -> Result<f64> {
        let ord = self.interior_ordinal(x)?;
        Ok(self.pucci_op(u.values(), ord, 1.0).0)
    }

    /// `max(F_h[u], P_h[u] − K)(x)`.
    pub fn eval_truncated_upper(&self, u: &GridFunction<'_>, x: &Point, k: TruncationLevel) -> Result<f64> {
        let ord = self.interior_ordinal(x)?;
        Ok(self.eval_at(u.values(), ord, Truncation::Upper(k)).value)
    }

    /// `min(F_h[v], −P_h[−v] + K)(x)`.
    pub fn eval_truncated_lower(&self, v: &GridFunction<'_>, x: &Point, k: TruncationLevel) -> Result<f64> {
        let ord = self.interior_ordinal(x)?;
        Ok(self.eval_at(v.values(), ord, Truncation::Lower(k)).value)
    }

    /// Value of the possibly truncated scheme at `ord`, with the active
    /// branches.
    pub fn eval_at(&self, u: &[f64], ord: usize, truncation: Truncation) -> SchemeEval {
        let fh = self.eval_fh_at(u, ord);
        let plain = SchemeEval {
            value: fh.value,
            alpha: AlphaBranch::Control(fh.alpha),
            beta: BetaBranch::Control(fh.beta),
        };
        match truncation {
            Truncation::None => plain,
            Truncation::Upper(k) => {
                let p = self.pucci_op(u, ord, 1.0).0 - k.value();
                if p > fh.value {
                    SchemeEval {
                        value: p,
                        alpha: AlphaBranch::Pucci,
                        beta: BetaBranch::None,
                    }
                } else {
                    plain
                }
            }
            Truncation::Lower(k) => {
                // min(sup_α inf_β X, Y) = sup_α min(inf_β X, Y)
                let p = self.pucci_op(u, ord, -1.0).0 + k.value();
                if p < fh.value {
                    SchemeEval {
                        value: p,
                        alpha: AlphaBranch::Control(fh.alpha),
                        beta: BetaBranch::Pucci,
                    }
                } else {
                    plain
                }
            }
        }
    }

    /// `sup_x |scheme[u](x)|` over interior points.
    pub fn residual(&self, u: &[f64], truncation: Truncation) -> f64 {
        (0..self.grid.n_interior())
            .into_par_iter()
            .map(|ord| self.eval_at(u, ord, truncation).value.abs())
            .reduce(|| 0.0, f64::max)
    }

    /// Operator residual dump: `x,y,fh,ph,branch,alpha,beta`.
    pub fn write_residual_csv<W: Write>(&self, u: &[f64], truncation: Truncation, mut w: W) -> Result<()> {
        writeln!(w, "x,y,fh,ph,branch,alpha,beta")?;
        for (ord, &id) in self.grid.interior_ids().iter().enumerate() {
            let x = self.grid.point(id as usize);
            let fh = self.eval_fh_at(u, ord).value;
            let ph = self.pucci_op(u, ord, 1.0).0;
            let e = self.eval_at(u, ord, truncation);
            writeln!(
                w,
                "{:?},{:?},{:?},{:?},{},{},{}",
                x[0],
                x[1],
                fh,
                ph,
                e.active_branch(),
                e.alpha.label(),
                e.beta.label()
            )?;
        }
        Ok(())
    }

    /// Decomposition audit: `x,y,alpha,beta,a_0..a_{n-1},residual,floor`.
    pub fn write_decomposition_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.grid.stencil().len();
        let cols: Vec<String> = (0..n).map(|k| format!("a_{k}")).collect();
        writeln!(w, "x,y,alpha,beta,{},residual,floor", cols.join(","))?;
        for (ord, &id) in self.grid.interior_ids().iter().enumerate() {
            let x = self.grid.point(id as usize);
            for alpha in 0..self.n_alpha {
                for beta in 0..self.n_beta {
                    let d = self.decomposition(ord, alpha, beta);
                    let a = (self.problem.coeffs.a)(alpha, beta, &x);
                    let res = crate::decomposition::reconstruction_residual(&d.a, self.grid.stencil(), &a);
                    let coeffs: Vec<String> = d.a.iter().map(|v| format!("{v:?}")).collect();
                    writeln!(
                        w,
                        "{:?},{:?},{alpha},{beta},{},{:?},{:?}",
                        x[0],
                        x[1],
                        coeffs.join(","),
                        res,
                        d.floor
                    )?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Domain, Stencil};
    use crate::problem::{CoefficientField, ControlSet, SmoothTestFunction};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn constant_problem(a: Mat2, b: Point, c: f64) -> IsaacsProblem {
        IsaacsProblem::new(
            Domain::disk(Point::zeros(), 1.0),
            ControlSet::indexed(1).unwrap(),
            ControlSet::indexed(1).unwrap(),
            CoefficientField::constant(a, b, c),
            SmoothTestFunction::constant(0.0),
            EllipticityBounds::new(0.5, 4.0).unwrap(),
        )
    }

    #[test]
    fn difference_quotients_on_polynomials() {
        let grid = Grid::build(&Domain::disk(Point::zeros(), 1.0), &Stencil::default_four(), 0.1).unwrap();
        let p = Point::new(0.7, -1.3);
        let affine = GridFunction::from_fn(&grid, |x| p.dot(x) + 0.25);
        let x = Point::new(0.2, 0.0);
        for l in [[1, 0], [0, 1], [1, 1], [1, -1]] {
            let lv = Point::new(l[0] as f64, l[1] as f64);
            assert!((delta_h(&affine, &x, l).unwrap() - p.dot(&lv)).abs() < 1e-12);
            assert!(delta2_h(&affine, &x, l).unwrap().abs() < 1e-10);
        }
        let constant = GridFunction::from_fn(&grid, |_| 3.0);
        assert_eq!(delta_h(&constant, &x, [1, 1]).unwrap(), 0.0);

        let sq = GridFunction::from_fn(&grid, |x| x.norm_squared());
        // ((0.3)² − (0.2)²)/0.1 = 0.5
        assert!((delta_h(&sq, &x, [1, 0]).unwrap() - 0.5).abs() < 1e-12);
        let m = Mat2::new(2.0, 0.6, 0.6, -1.0);
        let quad = GridFunction::from_fn(&grid, |x| 0.5 * x.dot(&(m * x)));
        for l in [[1, 0], [1, 1], [1, -1]] {
            let lv = Point::new(l[0] as f64, l[1] as f64);
            assert!((delta2_h(&quad, &x, l).unwrap() - lv.dot(&(m * lv))).abs() < 1e-10);
        }
    }

    #[test]
    fn second_difference_of_sine() {
        let h = 0.01;
        let grid = Grid::build(&Domain::disk(Point::zeros(), 3.0), &Stencil::axis(), h).unwrap();
        let u = GridFunction::from_fn(&grid, |x| x[0].sin());
        assert!(delta2_h(&u, &Point::zeros(), [1, 0]).unwrap().abs() < 1e-12);
        let at = Point::new(157.0 * h, 0.0);
        let exact = -at[0].sin();
        // |error| ≤ h²/12 · max|u⁗|
        let bound = h * h / 12.0 + 1e-9;
        assert!((delta2_h(&u, &at, [1, 0]).unwrap() - exact).abs() <= bound);
        assert!((delta2_h(&u, &at, [1, 0]).unwrap() + 1.0).abs() < 1e-3);
    }

    #[test]
    fn missing_neighbor_is_reported() {
        let grid = Grid::build(&Domain::disk(Point::zeros(), 1.0), &Stencil::axis(), 0.25).unwrap();
        let u = GridFunction::zeros(&grid);
        let edge = Point::new(0.75, 0.0);
        assert!(matches!(delta_h(&u, &edge, [1, 0]), Err(Error::MissingNeighbor { .. })));
        assert!(matches!(delta2_h(&u, &edge, [1, 0]), Err(Error::MissingNeighbor { .. })));
        assert!(matches!(delta_h(&u, &Point::new(0.1, 0.0), [1, 0]), Err(Error::UnclassifiedPoint { .. })));
    }

    #[test]
    fn pucci_closed_form_examples() {
        let params = PucciParams {
            delta_hat: 0.5,
            k1: 2.0,
        };
        assert_eq!(eval_p(&Mat2::zeros(), &Point::zeros(), 0.0, &params), 0.0);
        assert!((eval_p(&Mat2::identity(), &Point::zeros(), 0.0, &params) - 4.0).abs() < 1e-15);
        // eigenvalues 3 and −1: 3/0.5 − 0.5
        let m = Mat2::new(1.0, 2.0, 2.0, 1.0);
        assert!((eval_p(&m, &Point::new(3.0, 4.0), 0.5, &params) - (5.5 + 10.0 - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn fh_on_quadratic_matches_decomposition_sum() {
        let prob = constant_problem(Mat2::identity(), Point::zeros(), 0.0);
        let grid = Grid::build(&prob.domain, &Stencil::default_four(), 0.1).unwrap();
        let scheme = Scheme::new(&prob, &grid, PucciParams::default_for(&prob.bounds), 0.0).unwrap();
        let u = GridFunction::from_fn(&grid, |x| x.norm_squared());
        let x = Point::new(0.3, -0.2);
        let ord = grid.ordinal(grid.locate(&x).unwrap()).unwrap();
        let d = scheme.decomposition(ord, 0, 0);
        let oracle: f64 = (0..4).map(|k| d.a[k] * 2.0 * grid.stencil().vector(k).norm_squared()).sum();
        let got = scheme.eval_fh(&u, &x).unwrap().value;
        assert!((got - oracle).abs() < 1e-10);
        assert!((got - 4.0).abs() < 1e-10);
    }

    #[test]
    fn fh_on_affine_is_drift_plus_source() {
        let b = Point::new(0.4, -0.9);
        let mut prob = constant_problem(Mat2::identity(), b, 0.0);
        prob.coeffs = prob.coeffs.clone().with_source(Arc::new(|_, _, x: &Point| x[0]));
        let grid = Grid::build(&prob.domain, &Stencil::default_four(), 0.1).unwrap();
        let scheme = Scheme::new(&prob, &grid, PucciParams::default_for(&prob.bounds), 0.0).unwrap();
        let p = Point::new(1.5, 0.5);
        let u = GridFunction::from_fn(&grid, |x| p.dot(x));
        let x = Point::new(0.2, 0.1);
        assert!((scheme.eval_fh(&u, &x).unwrap().value - (b.dot(&p) + 0.2)).abs() < 1e-10);
    }

    #[test]
    fn pucci_of_constant() {
        let prob = constant_problem(Mat2::identity(), Point::zeros(), 0.0);
        let grid = Grid::build(&prob.domain, &Stencil::default_four(), 0.1).unwrap();
        let params = PucciParams::default_for(&prob.bounds);
        let scheme = Scheme::new(&prob, &grid, params, 0.0).unwrap();
        let u = GridFunction::from_fn(&grid, |_| 0.7);
        let v = scheme.eval_ph(&u, &Point::zeros()).unwrap();
        assert!((v + params.k1 * 0.7).abs() < 1e-14);
    }

    #[test]
    fn pucci_second_order_part_matches_corner_enumeration() {
        let prob = constant_problem(Mat2::identity(), Point::zeros(), 0.0);
        let grid = Grid::build(&prob.domain, &Stencil::default_four(), 0.1).unwrap();
        let params = PucciParams {
            delta_hat: 0.25,
            k1: 5.0,
        };
        let scheme = Scheme::new(&prob, &grid, params, 0.0).unwrap();
        let pucci = *scheme.pucci();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let values: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = GridFunction::from_values(&grid, values).unwrap();
        for &x in &[Point::zeros(), Point::new(0.3, 0.4)] {
            let d2: Vec<f64> = [[1, 0], [0, 1], [1, 1], [1, -1]]
                .iter()
                .map(|l| delta2_h(&u, &x, *l).unwrap())
                .collect();
            let mut best = f64::NEG_INFINITY;
            let mut worst = f64::INFINITY;
            for corner in 0..16u32 {
                let s: f64 = (0..4)
                    .map(|k| if corner & (1 << k) != 0 { pucci.upper } else { pucci.lower } * d2[k])
                    .sum();
                best = best.max(s);
                worst = worst.min(s);
            }
            let p1 = delta_h(&u, &x, [1, 0]).unwrap().max(-delta_h(&u, &x, [-1, 0]).unwrap().min(0.0)).max(0.0);
            let fwd = |l: [i64; 2]| delta_h(&u, &x, l).unwrap();
            let m0 = fwd([1, 0]).max(fwd([-1, 0])).max(0.0);
            let m1 = fwd([0, 1]).max(fwd([0, -1])).max(0.0);
            let _ = p1;
            let uc = u.at(&x).unwrap();
            let oracle = best + params.k1 * m0.hypot(m1) - params.k1 * uc;
            assert!((scheme.eval_ph(&u, &x).unwrap() - oracle).abs() < 1e-10);

            // −P_h[−u]: the second-order part becomes the minimum over corners
            let ord = grid.ordinal(grid.locate(&x).unwrap()).unwrap();
            let n0 = (-fwd([1, 0])).max(-fwd([-1, 0])).max(0.0);
            let n1 = (-fwd([0, 1])).max(-fwd([0, -1])).max(0.0);
            let lower = scheme.pucci_op(u.values(), ord, -1.0).0;
            assert!((lower - (worst - params.k1 * n0.hypot(n1) - params.k1 * uc)).abs() < 1e-10);
        }
    }

    #[test]
    fn pucci_op_reproduces_value() {
        let prob = constant_problem(Mat2::identity(), Point::zeros(), 0.0);
        let grid = Grid::build(&prob.domain, &Stencil::default_four(), 0.1).unwrap();
        let scheme = Scheme::new(&prob, &grid, PucciParams::default_for(&prob.bounds), 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for ord in 0..grid.n_interior() {
            let center = grid.interior_ids()[ord] as usize;
            for sign in [1.0, -1.0] {
                let (v, op) = scheme.pucci_op(&u, ord, sign);
                assert!((op.apply(&u, center) - v).abs() < 1e-9 * v.abs().max(1.0));
                assert!(op.weights.iter().all(|(_, w)| *w >= 0.0));
            }
        }
    }

    #[test]
    fn truncation_examples() {
        let prob = constant_problem(Mat2::identity(), Point::zeros(), 0.0);
        let grid = Grid::build(&prob.domain, &Stencil::default_four(), 0.1).unwrap();
        let scheme = Scheme::new(&prob, &grid, PucciParams::default_for(&prob.bounds), 0.0).unwrap();
        let zero = GridFunction::zeros(&grid);
        let k = TruncationLevel::new(3.0).unwrap();
        let x = Point::new(0.1, 0.1);
        assert_eq!(scheme.eval_truncated_upper(&zero, &x, k).unwrap(), 0.0);
        assert_eq!(scheme.eval_truncated_lower(&zero, &x, k).unwrap(), 0.0);

        let u = GridFunction::from_fn(&grid, |x| (3.0 * x[0]).sin() * x[1].exp());
        let fh = scheme.eval_fh(&u, &x).unwrap().value;
        let ph = scheme.eval_ph(&u, &x).unwrap();
        let big = TruncationLevel::new(ph.abs() + fh.abs() + 1.0).unwrap();
        assert_eq!(scheme.eval_truncated_upper(&u, &x, big).unwrap(), fh);
        assert!(TruncationLevel::new(0.5).is_err());
    }
}
