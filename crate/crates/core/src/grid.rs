//! Domains, stencils, and the lattice point classes of `hℤ²`.
//!
//! A lattice point `x ∈ hℤ²` inside `G` belongs to the grid. It is an
//! interior point when the closed ball of radius `h·max_k |l_k|` around it
//! lies in `G`, which guarantees that every `x ± h l_k` is again a grid
//! point. The remaining points of `G ∩ hℤ²` form the discrete boundary,
//! where the Dirichlet data is imposed.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Point;

/// Bounded planar domain described by a signed distance function
/// (positive inside, equal to `dist(x, Gᶜ)` there).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Domain {
    Disk { center: [f64; 2], radius: f64 },
    Ellipse { center: [f64; 2], semi_axes: [f64; 2] },
    /// Axis-aligned box. Its corners are not C², so it sits outside the
    /// smooth-domain setting and is meant for small tests.
    Box { lo: [f64; 2], hi: [f64; 2] },
    /// Box with circular corners of the given radius.
    RoundedBox { lo: [f64; 2], hi: [f64; 2], corner_radius: f64 },
}

impl Domain {
    pub fn disk(center: Point, radius: f64) -> Self {
        Domain::Disk {
            center: [center[0], center[1]],
            radius,
        }
    }

    pub fn ellipse(center: Point, a: f64, b: f64) -> Self {
        Domain::Ellipse {
            center: [center[0], center[1]],
            semi_axes: [a, b],
        }
    }

    pub fn axis_box(lo: Point, hi: Point) -> Self {
        Domain::Box {
            lo: [lo[0], lo[1]],
            hi: [hi[0], hi[1]],
        }
    }

    pub fn rounded_box(lo: Point, hi: Point, corner_radius: f64) -> Self {
        Domain::RoundedBox {
            lo: [lo[0], lo[1]],
            hi: [hi[0], hi[1]],
            corner_radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Domain::Disk { radius, .. } => *radius > 0.0,
            Domain::Ellipse { semi_axes, .. } => semi_axes[0] > 0.0 && semi_axes[1] > 0.0,
            Domain::Box { lo, hi } => hi[0] > lo[0] && hi[1] > lo[1],
            Domain::RoundedBox { lo, hi, corner_radius } => {
                let half = 0.5 * (hi[0] - lo[0]).min(hi[1] - lo[1]);
                hi[0] > lo[0] && hi[1] > lo[1] && *corner_radius >= 0.0 && *corner_radius <= half
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("domain", format!("degenerate domain {self:?}")))
        }
    }

    /// `dist(x, Gᶜ)` inside, `−dist(x, G)` outside.
    pub fn signed_distance(&self, x: &Point) -> f64 {
        match self {
            Domain::Disk { center, radius } => radius - (x - Point::from(*center)).norm(),
            Domain::Ellipse { center, semi_axes } => {
                let y = x - Point::from(*center);
                let (a, b) = (semi_axes[0], semi_axes[1]);
                let (e0, e1, y0, y1) = if a >= b {
                    (a, b, y[0].abs(), y[1].abs())
                } else {
                    (b, a, y[1].abs(), y[0].abs())
                };
                let d = ellipse_distance(e0, e1, y0, y1);
                let level = (y0 / e0).powi(2) + (y1 / e1).powi(2);
                if level < 1.0 {
                    d
                } else {
                    -d
                }
            }
            Domain::Box { lo, hi } => -rounded_box_sdf(x, lo, hi, 0.0),
            Domain::RoundedBox { lo, hi, corner_radius } => -rounded_box_sdf(x, lo, hi, *corner_radius),
        }
    }

    pub fn inside(&self, x: &Point) -> bool {
        self.signed_distance(x) > 0.0
    }

    /// Axis-aligned box containing the closure.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            Domain::Disk { center, radius } => {
                let c = Point::from(*center);
                (c - Point::repeat(*radius), c + Point::repeat(*radius))
            }
            Domain::Ellipse { center, semi_axes } => {
                let c = Point::from(*center);
                let s = Point::from(*semi_axes);
                (c - s, c + s)
            }
            Domain::Box { lo, hi } | Domain::RoundedBox { lo, hi, .. } => (Point::from(*lo), Point::from(*hi)),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Disk { radius, .. } => 2.0 * radius,
            Domain::Ellipse { semi_axes, .. } => 2.0 * semi_axes[0].max(semi_axes[1]),
            Domain::Box { lo, hi } => (Point::from(*hi) - Point::from(*lo)).norm(),
            Domain::RoundedBox { lo, hi, corner_radius } => {
                let diag = (Point::from(*hi) - Point::from(*lo)).norm();
                diag - 2.0 * corner_radius * (std::f64::consts::SQRT_2 - 1.0)
            }
        }
    }

    /// Largest `|x|` over the closure.
    pub fn max_norm(&self) -> f64 {
        match self {
            Domain::Disk { center, radius } => Point::from(*center).norm() + radius,
            Domain::Ellipse { center, semi_axes } => Point::from(*center).norm() + semi_axes[0].max(semi_axes[1]),
            Domain::Box { lo, hi } | Domain::RoundedBox { lo, hi, .. } => {
                let (lo, hi) = (Point::from(*lo), Point::from(*hi));
                [lo, hi, Point::new(lo[0], hi[1]), Point::new(hi[0], lo[1])]
                    .iter()
                    .map(|p| p.norm())
                    .fold(0.0, f64::max)
            }
        }
    }

    pub fn translated(&self, v: &Point) -> Self {
        let sh = |p: &[f64; 2]| [p[0] + v[0], p[1] + v[1]];
        match self {
            Domain::Disk { center, radius } => Domain::Disk {
                center: sh(center),
                radius: *radius,
            },
            Domain::Ellipse { center, semi_axes } => Domain::Ellipse {
                center: sh(center),
                semi_axes: *semi_axes,
            },
            Domain::Box { lo, hi } => Domain::Box { lo: sh(lo), hi: sh(hi) },
            Domain::RoundedBox { lo, hi, corner_radius } => Domain::RoundedBox {
                lo: sh(lo),
                hi: sh(hi),
                corner_radius: *corner_radius,
            },
        }
    }
}

fn rounded_box_sdf(x: &Point, lo: &[f64; 2], hi: &[f64; 2], r: f64) -> f64 {
    let c = 0.5 * (Point::from(*lo) + Point::from(*hi));
    let half = 0.5 * (Point::from(*hi) - Point::from(*lo));
    let q = (x - c).abs() - (half - Point::repeat(r));
    let outside = Point::new(q[0].max(0.0), q[1].max(0.0)).norm();
    let inside = q[0].max(q[1]).min(0.0);
    outside + inside - r
}

/// Distance from `(y0, y1)` (first quadrant) to the ellipse with semi-axes
/// `e0 ≥ e1`, by bisection on the Lagrange multiplier.
fn ellipse_distance(e0: f64, e1: f64, y0: f64, y1: f64) -> f64 {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return 0.0;
            }
            let r0 = (e0 / e1) * (e0 / e1);
            let s = ellipse_root(r0, z0, z1, g);
            let x0 = r0 * y0 / (s + r0);
            let x1 = y1 / (s + 1.0);
            (x0 - y0).hypot(x1 - y1)
        } else {
            (y1 - e1).abs()
        }
    } else {
        let numer0 = e0 * y0;
        let denom0 = e0 * e0 - e1 * e1;
        if numer0 < denom0 {
            let xde0 = numer0 / denom0;
            let x0 = e0 * xde0;
            let x1 = e1 * (1.0 - xde0 * xde0).sqrt();
            (x0 - y0).hypot(x1)
        } else {
            (y0 - e0).abs()
        }
    }
}

fn ellipse_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
    let mut s = 0.0;
    for _ in 0..1100 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let ratio0 = n0 / (s + r0);
        let ratio1 = z1 / (s + 1.0);
        let v = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if v > 0.0 {
            s0 = s;
        } else if v < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

/// Finite set of integer lattice directions `Λ` containing `e₁, e₂`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stencil {
    vectors: Vec<[i64; 2]>,
}

impl Stencil {
    pub fn new(vectors: Vec<[i64; 2]>) -> Result<Self> {
        for (i, v) in vectors.iter().enumerate() {
            if *v == [0, 0] {
                return Err(Error::invalid("stencil", "zero vector"));
            }
            if vectors[..i].contains(v) {
                return Err(Error::invalid("stencil", format!("duplicate vector {v:?}")));
            }
        }
        if !vectors.contains(&[1, 0]) || !vectors.contains(&[0, 1]) {
            return Err(Error::invalid("stencil", "must contain e1 and e2"));
        }
        Ok(Self { vectors })
    }

    /// `{e₁, e₂}`.
    pub fn axis() -> Self {
        Self {
            vectors: vec![[1, 0], [0, 1]],
        }
    }

    /// `{e₁, e₂, e₁+e₂, e₁−e₂}`.
    pub fn default_four() -> Self {
        Self {
            vectors: vec![[1, 0], [0, 1], [1, 1], [1, -1]],
        }
    }

    /// The four-point stencil plus `(2,±1)` and `(1,±2)`.
    pub fn extended_eight() -> Self {
        Self {
            vectors: vec![[1, 0], [0, 1], [1, 1], [1, -1], [2, 1], [1, 2], [2, -1], [1, -2]],
        }
    }

    pub fn vectors(&self) -> &[[i64; 2]] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, k: usize) -> Point {
        let v = self.vectors[k];
        Point::new(v[0] as f64, v[1] as f64)
    }

    /// Radius of the closed ball centred at the origin containing `Λ`.
    pub fn ball_radius(&self) -> f64 {
        self.vectors
            .iter()
            .map(|v| ((v[0] * v[0] + v[1] * v[1]) as f64).sqrt())
            .fold(0.0, f64::max)
    }

    /// Index of the stencil vector equal to `e_i`.
    pub fn basis_index(&self, i: usize) -> usize {
        let target = if i == 0 { [1, 0] } else { [0, 1] };
        self.vectors.iter().position(|v| *v == target).expect("stencil contains basis vectors")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointClass {
    Interior,
    Boundary,
}

const NONE: u32 = u32::MAX;

/// Classified points of `G ∩ hℤ²`, enumerated lexicographically in the
/// integer coordinates `(i, j)`.
#[derive(Debug, Clone)]
pub struct Grid {
    h: f64,
    stencil: Stencil,
    domain: Domain,
    i0: i64,
    j0: i64,
    ni: usize,
    nj: usize,
    lookup: Vec<u32>,
    coords: Vec<[i64; 2]>,
    class: Vec<PointClass>,
    rho: Vec<f64>,
    interior: Vec<u32>,
    boundary: Vec<u32>,
    ordinal: Vec<u32>,
    /// Per interior ordinal, `2·|Λ|` point ids: `x + h l_k` then `x − h l_k`.
    neighbors: Vec<u32>,
}

impl Grid {
    pub fn build(domain: &Domain, stencil: &Stencil, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid("h", format!("{h} must be positive")));
        }
        domain.validate()?;
        let radius = stencil.ball_radius();
        let (lo, hi) = domain.bounding_box();
        let i0 = (lo[0] / h).floor() as i64;
        let j0 = (lo[1] / h).floor() as i64;
        let i1 = (hi[0] / h).ceil() as i64;
        let j1 = (hi[1] / h).ceil() as i64;
        let ni = (i1 - i0 + 1) as usize;
        let nj = (j1 - j0 + 1) as usize;

        let mut lookup = vec![NONE; ni * nj];
        let mut coords = Vec::new();
        let mut class = Vec::new();
        let mut rho = Vec::new();
        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        let mut ordinal = Vec::new();
        for i in i0..=i1 {
            for j in j0..=j1 {
                let x = Point::new(i as f64 * h, j as f64 * h);
                let sd = domain.signed_distance(&x);
                if sd <= 0.0 {
                    continue;
                }
                let id = coords.len() as u32;
                lookup[(i - i0) as usize * nj + (j - j0) as usize] = id;
                coords.push([i, j]);
                rho.push(sd);
                // the relative margin keeps lattice points that sit on the
                // boundary up to rounding out of the neighbor sets
                if sd > h * radius * (1.0 + 1e-9) {
                    class.push(PointClass::Interior);
                    ordinal.push(interior.len() as u32);
                    interior.push(id);
                } else {
                    class.push(PointClass::Boundary);
                    ordinal.push(NONE);
                    boundary.push(id);
                }
            }
        }
        if interior.is_empty() {
            return Err(Error::EmptyInterior { h, radius });
        }

        let mut grid = Grid {
            h,
            stencil: stencil.clone(),
            domain: domain.clone(),
            i0,
            j0,
            ni,
            nj,
            lookup,
            coords,
            class,
            rho,
            interior,
            boundary,
            ordinal,
            neighbors: Vec::new(),
        };
        let n = stencil.len();
        let mut neighbors = Vec::with_capacity(grid.interior.len() * 2 * n);
        for &id in &grid.interior {
            let [i, j] = grid.coords[id as usize];
            for sign in [1, -1] {
                for v in stencil.vectors() {
                    let (a, b) = (i + sign * v[0], j + sign * v[1]);
                    match grid.id_of(a, b) {
                        Some(nb) => neighbors.push(nb as u32),
                        None => {
                            return Err(Error::MissingNeighbor {
                                x: a as f64 * h,
                                y: b as f64 * h,
                            })
                        }
                    }
                }
            }
        }
        grid.neighbors = neighbors;
        Ok(grid)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Number of classified points.
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    /// Point ids of `G°_(h)` in lexicographic order.
    pub fn interior_ids(&self) -> &[u32] {
        &self.interior
    }

    /// Point ids of `∂_hG` in lexicographic order.
    pub fn boundary_ids(&self) -> &[u32] {
        &self.boundary
    }

    pub fn id_of(&self, i: i64, j: i64) -> Option<usize> {
        if i < self.i0 || j < self.j0 {
            return None;
        }
        let (a, b) = ((i - self.i0) as usize, (j - self.j0) as usize);
        if a >= self.ni || b >= self.nj {
            return None;
        }
        match self.lookup[a * self.nj + b] {
            NONE => None,
            id => Some(id as usize),
        }
    }

    /// Id of the grid point at position `x`, if `x` is (within rounding) a
    /// classified lattice point.
    pub fn locate(&self, x: &Point) -> Option<usize> {
        let i = (x[0] / self.h).round();
        let j = (x[1] / self.h).round();
        let snapped = Point::new(i * self.h, j * self.h);
        if (snapped - x).norm() > 1e-9 * self.h.max(1.0) {
            return None;
        }
        self.id_of(i as i64, j as i64)
    }

    pub fn lattice(&self, id: usize) -> [i64; 2] {
        self.coords[id]
    }

    pub fn point(&self, id: usize) -> Point {
        let [i, j] = self.coords[id];
        Point::new(i as f64 * self.h, j as f64 * self.h)
    }

    pub fn class(&self, id: usize) -> PointClass {
        self.class[id]
    }

    pub fn is_interior(&self, id: usize) -> bool {
        self.class[id] == PointClass::Interior
    }

    /// `ρ(x) = dist(x, Gᶜ)` at a point id.
    pub fn rho(&self, id: usize) -> f64 {
        self.rho[id]
    }

    /// Interior ordinal of a point id.
    pub fn ordinal(&self, id: usize) -> Option<usize> {
        match self.ordinal[id] {
            NONE => None,
            o => Some(o as usize),
        }
    }

    /// Point id of `x ± h l_k` for the interior point with the given ordinal.
    pub fn neighbor(&self, ordinal: usize, k: usize, forward: bool) -> usize {
        let n = self.stencil.len();
        let off = if forward { 0 } else { n };
        self.neighbors[ordinal * 2 * n + off + k] as usize
    }

    /// Point id of `x + h v` for any lattice offset `v`.
    pub fn offset(&self, id: usize, v: [i64; 2]) -> Option<usize> {
        let [i, j] = self.coords[id];
        self.id_of(i + v[0], j + v[1])
    }

    /// CSV dump with columns `i,j,x,y,class,rho`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j,x,y,class,rho")?;
        for id in 0..self.len() {
            let [i, j] = self.coords[id];
            let x = self.point(id);
            let class = match self.class[id] {
                PointClass::Interior => "interior",
                PointClass::Boundary => "boundary",
            };
            writeln!(w, "{i},{j},{:?},{:?},{class},{:?}", x[0], x[1], self.rho[id])?;
        }
        Ok(())
    }
}

/// Signed distance of a classified grid point to the complement of `G`.
pub fn distance_to_boundary(grid: &Grid, x: &Point) -> Result<f64> {
    grid.locate(x)
        .map(|id| grid.rho(id))
        .ok_or(Error::UnclassifiedPoint { x: x[0], y: x[1] })
}

/// Values over all classified points of a grid.
#[derive(Debug, Clone)]
pub struct GridFunction<'g> {
    grid: &'g Grid,
    values: Vec<f64>,
}

impl<'g> GridFunction<'g> {
    pub fn zeros(grid: &'g Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: &'g Grid, f: impl Fn(&Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|id| f(&grid.point(id))).collect();
        Self { grid, values }
    }

    pub fn from_values(grid: &'g Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(
                "values",
                format!("expected {} values, got {}", grid.len(), values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            let x = grid.point(i);
            return Err(Error::invalid("values", format!("non-finite value at ({}, {})", x[0], x[1])));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &'g Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, id: usize) -> f64 {
        self.values[id]
    }

    pub fn at(&self, x: &Point) -> Result<f64> {
        self.grid
            .locate(x)
            .map(|id| self.values[id])
            .ok_or(Error::UnclassifiedPoint { x: x[0], y: x[1] })
    }

    /// `−u`.
    pub fn negated(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    /// `max |u − v|` over all classified points.
    pub fn sup_distance(&self, other: &GridFunction<'_>) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
