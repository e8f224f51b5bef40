//! Carnot-group geometry on the first Heisenberg group ℍ¹ and on abelian ℝⁿ:
//! group law, graded dilations, homogeneous gauge quasi-distance, ball
//! measures by cell counting, and horizontal finite-difference derivatives.
//!
//! Coordinates on ℍ¹ are exponential: a point is `(x, y, t)` with group law
//! `(x,y,t)·(x',y',t') = (x+x', y+y', t+t'+(xy'−yx')/2)` and horizontal
//! fields `X₁ = ∂x − (y/2)∂t`, `X₂ = ∂y + (x/2)∂t`, so `[X₁,X₂] = ∂t`.
//! The distance is the Korányi gauge `N(x,y,t) = ((x²+y²)² + 16t²)^{1/4}`,
//! which is homogeneous of degree 1 under the dilations `δ_ε(x,y,t) =
//! (εx, εy, ε²t)` and left invariant by construction.

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{GridDomain, GridFunction, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: usize,
}

impl Point {
    pub fn new(coords: &[f64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "point dimension must be 1..={MAX_DIM}, got {}",
                coords.len()
            )));
        }
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Self {
            coords: c,
            dim: coords.len(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn from_cell(dom: &GridDomain, idx: usize) -> Self {
        let c = dom.center_coords(idx);
        Self {
            coords: c,
            dim: dom.ndim(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Heisenberg1,
    Euclidean(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarnotGroup {
    kind: GroupKind,
    layer_dims: Vec<usize>,
    q: u32,
    quasi_constant: f64,
}

impl CarnotGroup {
    pub fn heisenberg1() -> Self {
        Self {
            kind: GroupKind::Heisenberg1,
            layer_dims: vec![2, 1],
            q: 4,
            // The gauge with constant 16 is the Cygan metric, so K = 1.
            quasi_constant: 1.0,
        }
    }

    pub fn euclidean(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "euclidean dimension must be 1..={MAX_DIM}, got {n}"
            )));
        }
        Ok(Self {
            kind: GroupKind::Euclidean(n),
            layer_dims: vec![n],
            q: n as u32,
            quasi_constant: 1.0,
        })
    }

    /// Group from its CLI id: `"h1"`, `"r1"`, `"r2"`, `"r3"`.
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "h1" => Ok(Self::heisenberg1()),
            "r1" => Self::euclidean(1),
            "r2" => Self::euclidean(2),
            "r3" => Self::euclidean(3),
            other => Err(Error::InvalidArgument(format!("unknown group id {other:?}"))),
        }
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// Homogeneous dimension `Q = Σ k·n_k`.
    pub fn homogeneous_dimension(&self) -> u32 {
        self.q
    }

    /// Quasi-triangle constant recorded for the gauge distance.
    pub fn quasi_metric_constant(&self) -> f64 {
        self.quasi_constant
    }

    /// Topological dimension (coordinate length).
    pub fn dim(&self) -> usize {
        self.layer_dims.iter().sum()
    }

    /// Number of horizontal (layer-1) directions.
    pub fn horizontal_dim(&self) -> usize {
        self.layer_dims[0]
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.dim(),
            });
        }
        Ok(())
    }

    pub fn identity(&self) -> Point {
        Point::new(&vec![0.0; self.dim()]).unwrap()
    }

    pub fn multiply(&self, a: &Point, b: &Point) -> Result<Point> {
        self.check_point(a)?;
        self.check_point(b)?;
        match self.kind {
            GroupKind::Heisenberg1 => {
                let [x, y, t] = [a.coords[0], a.coords[1], a.coords[2]];
                let [u, v, s] = [b.coords[0], b.coords[1], b.coords[2]];
                Point::new(&[x + u, y + v, t + s + 0.5 * (x * v - y * u)])
            }
            GroupKind::Euclidean(n) => {
                let c: Vec<f64> = (0..n).map(|i| a.coords[i] + b.coords[i]).collect();
                Point::new(&c)
            }
        }
    }

    /// Inverse is coordinate negation in exponential coordinates.
    pub fn inverse(&self, a: &Point) -> Result<Point> {
        self.check_point(a)?;
        let c: Vec<f64> = a.coords().iter().map(|v| -v).collect();
        Point::new(&c)
    }

    pub fn dilate(&self, a: &Point, eps: f64) -> Result<Point> {
        self.check_point(a)?;
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dilation parameter must be positive, got {eps}"
            )));
        }
        match self.kind {
            GroupKind::Heisenberg1 => {
                Point::new(&[eps * a.coords[0], eps * a.coords[1], eps * eps * a.coords[2]])
            }
            GroupKind::Euclidean(n) => {
                let c: Vec<f64> = (0..n).map(|i| eps * a.coords[i]).collect();
                Point::new(&c)
            }
        }
    }

    /// Homogeneous gauge `N(a)`: Korányi gauge on ℍ¹, Euclidean norm on ℝⁿ.
    pub fn gauge(&self, a: &Point) -> Result<f64> {
        self.check_point(a)?;
        Ok(match self.kind {
            GroupKind::Heisenberg1 => {
                let r2 = a.coords[0] * a.coords[0] + a.coords[1] * a.coords[1];
                let t = a.coords[2];
                (r2 * r2 + 16.0 * t * t).sqrt().sqrt()
            }
            GroupKind::Euclidean(n) => (0..n)
                .map(|i| a.coords[i] * a.coords[i])
                .sum::<f64>()
                .sqrt(),
        })
    }

    /// Homogeneous quasi-distance `d(a,b) = N(a⁻¹·b)`.
    pub fn distance(&self, a: &Point, b: &Point) -> Result<f64> {
        let inv = self.inverse(a)?;
        let diff = self.multiply(&inv, b)?;
        self.gauge(&diff)
    }

    fn distance_to_coords(&self, a: &Point, b: &[f64; MAX_DIM]) -> f64 {
        // Hot-loop variant of `distance` without allocation or dim checks.
        match self.kind {
            GroupKind::Heisenberg1 => {
                let dx = b[0] - a.coords[0];
                let dy = b[1] - a.coords[1];
                let dt = b[2] - a.coords[2] + 0.5 * (-a.coords[0] * b[1] + a.coords[1] * b[0]);
                let r2 = dx * dx + dy * dy;
                (r2 * r2 + 16.0 * dt * dt).sqrt().sqrt()
            }
            GroupKind::Euclidean(n) => (0..n)
                .map(|i| (b[i] - a.coords[i]).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Gauge distance from `a` to the center of cell `idx`.
    pub fn distance_to_cell(&self, a: &Point, dom: &GridDomain, idx: usize) -> f64 {
        self.distance_to_coords(a, &dom.center_coords(idx))
    }

    /// Gauge diameter of the domain box (distance between extreme corners,
    /// padded by the quasi-triangle constant).
    pub fn domain_diameter(&self, dom: &GridDomain) -> f64 {
        let lo: Vec<f64> = dom.bounds().iter().map(|b| b[0]).collect();
        let hi: Vec<f64> = dom.bounds().iter().map(|b| b[1]).collect();
        let a = Point::new(&lo).unwrap();
        let b = Point::new(&hi).unwrap();
        let d = self.distance(&a, &b).unwrap().max(self.distance(&b, &a).unwrap());
        2.0 * self.quasi_constant * d
    }

    /// Gauge distance between centers of adjacent cells along each axis; the
    /// minimum is the finest resolvable ball radius.
    pub fn min_neighbor_distance(&self, dom: &GridDomain) -> f64 {
        let origin = self.identity();
        (0..dom.ndim())
            .map(|a| {
                let mut c = [0.0; MAX_DIM];
                c[a] = dom.spacing(a);
                self.distance_to_coords(&origin, &c)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Coordinate half-extent of a gauge ball of radius `r` along `axis`.
    /// From `N⁴ = (x²+y²)² + 16t²`: `|x|,|y| ≤ N` and `|t| ≤ N²/4`.
    fn coord_extent(&self, axis: usize, r: f64) -> f64 {
        match self.kind {
            GroupKind::Heisenberg1 if axis == 2 => r * r / 4.0,
            _ => r,
        }
    }

    /// True when the gauge ball `B(center, r)` is contained in the box.
    pub fn ball_inside_domain(&self, center: &Point, r: f64, dom: &GridDomain) -> bool {
        (0..dom.ndim()).all(|a| {
            let [lo, hi] = dom.bounds()[a];
            let e = self.coord_extent(a, r);
            center.coords[a] - e >= lo && center.coords[a] + e <= hi
        })
    }

    /// Linear indices of the cells whose centers lie strictly inside
    /// `B(center, r)`, scanning only the coordinate bounding box.
    pub fn ball_cells(&self, center: &Point, r: f64, dom: &GridDomain) -> Vec<usize> {
        let ndim = dom.ndim();
        let mut ranges = [0usize..0usize, 0..0, 0..0];
        for a in 0..ndim {
            let [lo, _] = dom.bounds()[a];
            let h = dom.spacing(a);
            let e = self.coord_extent(a, r);
            let first = (((center.coords[a] - e - lo) / h - 0.5).floor().max(0.0)) as usize;
            let last =
                ((((center.coords[a] + e - lo) / h - 0.5).ceil()) as isize + 1).max(0) as usize;
            ranges[a] = first.min(dom.resolution()[a])..last.min(dom.resolution()[a]);
        }
        for a in ndim..MAX_DIM {
            ranges[a] = 0..1;
        }
        let mut out = Vec::new();
        let mut m = [0usize; MAX_DIM];
        for i0 in ranges[0].clone() {
            m[0] = i0;
            for i1 in ranges[1].clone() {
                m[1] = i1;
                for i2 in ranges[2].clone() {
                    m[2] = i2;
                    let idx = dom.linear_index(&m[..ndim]);
                    if self.distance_to_cell(center, dom, idx) < r {
                        out.push(idx);
                    }
                }
            }
        }
        out
    }
}

/// Lebesgue measure of a gauge ball restricted to the domain, by cell
/// counting (a cell counts when its center lies strictly inside the ball).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallMeasure {
    pub value: f64,
    /// Set when no cell center fell inside (radius below the cell scale).
    pub degenerate: bool,
}

pub fn ball_measure(center: &Point, r: f64, g: &CarnotGroup, dom: &GridDomain) -> Result<BallMeasure> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ball radius must be positive, got {r}"
        )));
    }
    let count = g.ball_cells(center, r, dom).len();
    Ok(BallMeasure {
        value: count as f64 * dom.cell_measure(),
        degenerate: count == 0,
    })
}

/// One-dimensional finite difference along `axis`: central in the interior,
/// one-sided first order at the two faces.
pub fn axis_derivative(f: &GridFunction, axis: usize) -> Result<GridFunction> {
    let dom = &f.domain;
    if dom.resolution()[axis] < 3 {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} has fewer than 3 cells; cannot differentiate"
        )));
    }
    let h = dom.spacing(axis);
    let n = dom.cell_count();
    let res = dom.resolution()[axis];
    let stride = axis_stride(dom, axis);
    let values = exec::map_indexed(n, |i| {
        let m = dom.multi_index(i);
        let ia = m[axis];
        if ia == 0 {
            (f.values[i + stride] - f.values[i]) / h
        } else if ia == res - 1 {
            (f.values[i] - f.values[i - stride]) / h
        } else {
            (f.values[i + stride] - f.values[i - stride]) / (2.0 * h)
        }
    });
    GridFunction::new(dom.clone(), values)
}

pub(crate) fn axis_stride(dom: &GridDomain, axis: usize) -> usize {
    dom.resolution()[axis + 1..].iter().product()
}

/// Coefficient of `∂/∂(axis)` in the k-th horizontal field at `coords`.
pub(crate) fn horizontal_coefficient(
    g: &CarnotGroup,
    k: usize,
    axis: usize,
    coords: &[f64],
) -> f64 {
    match g.kind() {
        GroupKind::Euclidean(_) => {
            if k == axis {
                1.0
            } else {
                0.0
            }
        }
        GroupKind::Heisenberg1 => match (k, axis) {
            (0, 0) => 1.0,
            (0, 2) => -coords[1] / 2.0,
            (1, 1) => 1.0,
            (1, 2) => coords[0] / 2.0,
            _ => 0.0,
        },
    }
}

/// Horizontal gradient `Xf = (X₁f, …, X_{n₁}f)` by finite differences.
pub fn horizontal_gradient(f: &GridFunction, g: &CarnotGroup) -> Result<Vec<GridFunction>> {
    let dom = &f.domain;
    if dom.ndim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: dom.ndim(),
        });
    }
    let derivs: Vec<GridFunction> = (0..dom.ndim())
        .map(|a| axis_derivative(f, a))
        .collect::<Result<_>>()?;
    let n = dom.cell_count();
    (0..g.horizontal_dim())
        .map(|k| {
            let values = exec::map_indexed(n, |i| {
                let c = dom.center_coords(i);
                (0..dom.ndim())
                    .map(|a| horizontal_coefficient(g, k, a, &c[..dom.ndim()]) * derivs[a].values[i])
                    .sum()
            });
            GridFunction::new(dom.clone(), values)
        })
        .collect()
}

/// Pointwise Euclidean norm `|Xf|` of the horizontal gradient.
pub fn horizontal_gradient_norm(f: &GridFunction, g: &CarnotGroup) -> Result<GridFunction> {
    let comps = horizontal_gradient(f, g)?;
    gradient_norm(&comps)
}

fn gradient_norm(comps: &[GridFunction]) -> Result<GridFunction> {
    let dom = comps[0].domain.clone();
    let n = dom.cell_count();
    let values = exec::map_indexed(n, |i| {
        comps
            .iter()
            .map(|c| c.values[i] * c.values[i])
            .sum::<f64>()
            .sqrt()
    });
    GridFunction::new(dom, values)
}

/// `|X^m f|` for m ∈ {1,2}: the norm over all homogeneous-degree-m words in
/// the stratified basis. On ℍ¹ with m = 2 the words are X₁², X₁X₂, X₂X₁,
/// X₂² and the layer-2 field T = ∂t.
pub fn higher_order_gradient(f: &GridFunction, m: u32, g: &CarnotGroup) -> Result<GridFunction> {
    match m {
        1 => horizontal_gradient_norm(f, g),
        2 => {
            let first = horizontal_gradient(f, g)?;
            let mut comps = Vec::new();
            for fj in &first {
                comps.extend(horizontal_gradient(fj, g)?);
            }
            if let GroupKind::Heisenberg1 = g.kind() {
                comps.push(axis_derivative(f, 2)?);
            }
            gradient_norm(&comps)
        }
        other => Err(Error::UnsupportedOrder(other)),
    }
}
