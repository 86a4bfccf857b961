//! Pure directional-derivative form of the operator.
//!
//! Writes `a = Σ_k a_k l_k l_kᵀ` with `a_k ≥ δ₁` over the stencil and
//! `b = Σ_k b̄_k l_k`. The diffusion coefficients solve
//!
//! ```text
//! maximize t   subject to   a_k ≥ t,  Σ_k a_k l_k l_kᵀ = a
//! ```
//!
//! by enumerating the vertices of the feasible polyhedron (three equality
//! constraints in two dimensions). When the optimum is not unique the
//! minimal-norm optimizer is selected by enumerating active sets.

use smallvec::SmallVec;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::grid::Stencil;
use crate::problem::{rotated_diag, Mat2, Point};

pub type Coeffs = SmallVec<[f64; 8]>;

/// Coefficients of the operator along the stencil directions at one point
/// and control pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalDecomposition {
    /// Second-order coefficients `a_k ≥ floor`.
    pub a: Coeffs,
    /// Drift coefficients `b̄_k`.
    pub b: Coeffs,
    /// `min_k a_k`.
    pub floor: f64,
}

impl DirectionalDecomposition {
    pub fn new(a: &Mat2, b: &Point, stencil: &Stencil, floor: f64) -> Result<Self> {
        let (coeffs, achieved) = decompose_matrix(a, stencil, floor)?;
        Ok(Self {
            a: coeffs,
            b: decompose_drift(b, stencil),
            floor: achieved,
        })
    }
}

fn column(v: &[i64; 2]) -> Vector3<f64> {
    let (x, y) = (v[0] as f64, v[1] as f64);
    Vector3::new(x * x, x * y, y * y)
}

fn target(a: &Mat2) -> Vector3<f64> {
    Vector3::new(a[(0, 0)], 0.5 * (a[(0, 1)] + a[(1, 0)]), a[(1, 1)])
}

fn scale_of(a: &Mat2) -> f64 {
    a.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
}

/// Least-squares solve of `cols · x = rhs` for up to three columns.
/// `None` when the columns are dependent or the system is inconsistent.
fn solve_columns(cols: &[Vector3<f64>], rhs: &Vector3<f64>, tol: f64) -> Option<SmallVec<[f64; 3]>> {
    let m = cols.len();
    let mut gram = [[0.0; 3]; 3];
    let mut proj = [0.0; 3];
    for i in 0..m {
        for j in 0..m {
            gram[i][j] = cols[i].dot(&cols[j]);
        }
        proj[i] = cols[i].dot(rhs);
    }
    let x: SmallVec<[f64; 3]> = match m {
        1 => {
            if gram[0][0] <= 1e-14 {
                return None;
            }
            SmallVec::from_slice(&[proj[0] / gram[0][0]])
        }
        2 => {
            let det = gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0];
            if det.abs() <= 1e-12 * gram[0][0] * gram[1][1] {
                return None;
            }
            SmallVec::from_slice(&[
                (proj[0] * gram[1][1] - proj[1] * gram[0][1]) / det,
                (gram[0][0] * proj[1] - gram[1][0] * proj[0]) / det,
            ])
        }
        3 => {
            let mat = Matrix3::from_columns(&[cols[0], cols[1], cols[2]]);
            let lu = mat.lu();
            let scale = mat.abs().max();
            if lu.determinant().abs() <= 1e-12 * scale * scale * scale {
                return None;
            }
            let sol = lu.solve(rhs)?;
            SmallVec::from_slice(sol.as_slice())
        }
        _ => return None,
    };
    let mut recon = Vector3::zeros();
    for (c, xi) in cols.iter().zip(&x) {
        recon += c * *xi;
    }
    if (recon - rhs).amax() > tol {
        return None;
    }
    Some(x)
}

/// Vertices `(t, a_1..a_n)` of the max-min program, all of them with
/// at most two stencil coefficients above `t`.
fn lp_vertices(a: &Mat2, stencil: &Stencil) -> Vec<(f64, Coeffs)> {
    let cols: Vec<Vector3<f64>> = stencil.vectors().iter().map(column).collect();
    let total: Vector3<f64> = cols.iter().sum();
    let rhs = target(a);
    let scale = scale_of(a);
    let tol = 1e-11 * scale;
    let n = cols.len();
    let mut out = Vec::new();
    let mut push = |subset: &[usize]| {
        let mut system = vec![total];
        system.extend(subset.iter().map(|&k| cols[k]));
        if let Some(x) = solve_columns(&system, &rhs, tol) {
            if x[1..].iter().all(|&s| s >= -tol) {
                let t = x[0];
                let mut coeffs: Coeffs = SmallVec::from_elem(t, n);
                for (i, &k) in subset.iter().enumerate() {
                    coeffs[k] = t + x[i + 1].max(0.0);
                }
                out.push((t, coeffs));
            }
        }
    };
    push(&[]);
    for i in 0..n {
        push(&[i]);
    }
    for i in 0..n {
        for j in i + 1..n {
            push(&[i, j]);
        }
    }
    out
}

/// Optimal value `max_t` of the max-min program, or `None` when `a` is not
/// in the span reachable with nonnegative weights plus a common shift.
pub fn max_min_value(a: &Mat2, stencil: &Stencil) -> Option<f64> {
    lp_vertices(a, stencil).into_iter().map(|(t, _)| t).reduce(f64::max)
}

/// Among `{x : x_k ≥ t, Σ x_k L_k = rhs}` the point of least Euclidean norm.
fn min_norm_optimizer(cols: &[Vector3<f64>], rhs: &Vector3<f64>, t: f64, tol: f64) -> Option<Coeffs> {
    let n = cols.len();
    let mut best: Option<(f64, Coeffs)> = None;
    for mask in 0u32..(1 << n) {
        // mask bit set = coefficient free (above t); clear = fixed at t
        let mut r = *rhs;
        let mut gram = Matrix3::zeros();
        for k in 0..n {
            if mask & (1 << k) == 0 {
                r -= cols[k] * t;
            } else {
                gram += cols[k] * cols[k].transpose();
            }
        }
        let eig = SymmetricEigen::new(gram);
        let cutoff = 1e-12 * eig.eigenvalues.amax().max(1e-300);
        let mut y = Vector3::zeros();
        for i in 0..3 {
            let lam = eig.eigenvalues[i];
            if lam > cutoff {
                let v = eig.eigenvectors.column(i);
                y += v * (v.dot(&r) / lam);
            }
        }
        let mut x: Coeffs = SmallVec::from_elem(t, n);
        let mut recon = Vector3::zeros();
        let mut ok = true;
        for k in 0..n {
            if mask & (1 << k) != 0 {
                let v = cols[k].dot(&y);
                if v < t - tol {
                    ok = false;
                    break;
                }
                x[k] = v.max(t);
            }
            recon += cols[k] * x[k];
        }
        if !ok || (recon - rhs).amax() > tol {
            continue;
        }
        let norm: f64 = x.iter().map(|v| v * v).sum();
        if best.as_ref().is_none_or(|(bn, _)| norm < *bn - 1e-15 * bn.abs()) {
            best = Some((norm, x));
        }
    }
    best.map(|(_, x)| x)
}

/// Nonnegative coefficients `a_k ≥ floor` with `Σ a_k l_k l_kᵀ = a` that
/// maximize `min_k a_k`, ties broken by least Euclidean norm. Returns the
/// coefficients and the achieved `min_k a_k`.
pub fn decompose_matrix(a: &Mat2, stencil: &Stencil, floor: f64) -> Result<(Coeffs, f64)> {
    if !(floor >= 0.0) {
        return Err(Error::invalid("floor", format!("{floor} must be >= 0")));
    }
    let infeasible = |best: f64| Error::DecompositionInfeasible {
        matrix: [a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]],
        floor,
        best,
        location: None,
    };
    let scale = scale_of(a);
    let tol = 1e-11 * scale;
    let vertices = lp_vertices(a, stencil);
    let t_star = match vertices.iter().map(|(t, _)| *t).reduce(f64::max) {
        Some(t) => t,
        None => return Err(infeasible(f64::NEG_INFINITY)),
    };
    if t_star < floor - tol {
        return Err(infeasible(t_star));
    }

    let optimal: Vec<&Coeffs> = vertices
        .iter()
        .filter(|(t, _)| *t >= t_star - tol)
        .map(|(_, c)| c)
        .collect();
    let unique = optimal
        .iter()
        .all(|c| c.iter().zip(optimal[0].iter()).all(|(x, y)| (x - y).abs() <= tol));
    let mut coeffs = if unique {
        optimal[0].clone()
    } else {
        let cols: Vec<Vector3<f64>> = stencil.vectors().iter().map(column).collect();
        min_norm_optimizer(&cols, &target(a), t_star, tol).unwrap_or_else(|| optimal[0].clone())
    };
    for c in coeffs.iter_mut() {
        *c = c.max(floor);
    }
    let achieved = coeffs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((coeffs, achieved))
}

/// Drift expansion on the basis vectors: `b̄_k = b^i` for `l_k = e_i`,
/// zero on every other direction.
pub fn decompose_drift(b: &Point, stencil: &Stencil) -> Coeffs {
    let mut out: Coeffs = SmallVec::from_elem(0.0, stencil.len());
    out[stencil.basis_index(0)] = b[0];
    out[stencil.basis_index(1)] = b[1];
    out
}

/// Largest entrywise deviation of `Σ a_k l_k l_kᵀ` from `a`.
pub fn reconstruction_residual(coeffs: &[f64], stencil: &Stencil, a: &Mat2) -> f64 {
    let mut sum = Mat2::zeros();
    for (k, c) in coeffs.iter().enumerate() {
        let l = stencil.vector(k);
        sum += l * l.transpose() * *c;
    }
    (sum - a).amax()
}

/// Probe matrices for a certified floor: `diag(δ, 1/δ)` rotated by
/// `πj/64`, `j = 0..63`. For `δ = 1` this is the single matrix `I`.
pub fn extreme_probes(delta: f64) -> Vec<Mat2> {
    if delta >= 1.0 {
        return vec![Mat2::identity()];
    }
    (0..64)
        .map(|j| rotated_diag(delta, 1.0 / delta, std::f64::consts::PI * j as f64 / 64.0))
        .collect()
}

/// Smallest max-min value over the extreme probes of `S_δ`, or 0 if some
/// probe has no nonnegative decomposition on the stencil.
pub fn decomposition_floor(delta: f64, stencil: &Stencil) -> f64 {
    let mut worst = f64::INFINITY;
    for m in extreme_probes(delta) {
        match max_min_value(&m, stencil) {
            Some(t) if t >= 0.0 => worst = worst.min(t),
            _ => return 0.0,
        }
    }
    worst
}
