//! Rectangular lattices over bounded boxes and real-valued cell samples.
//!
//! A [`GridDomain`] is a product of closed intervals split into equal cells;
//! all integrals elsewhere in the crate are cell-center sums weighted by
//! [`GridDomain::cell_measure`]. Grids are at most three-dimensional, which
//! covers ℝ¹, ℝ², ℝ³ and the first Heisenberg group.

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    bounds: Vec<[f64; 2]>,
    res: Vec<usize>,
}

impl GridDomain {
    pub fn new(bounds: &[[f64; 2]], res: &[usize]) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "grid dimension must be 1..={MAX_DIM}, got {}",
                bounds.len()
            )));
        }
        if bounds.len() != res.len() {
            return Err(Error::DimensionMismatch {
                expected: bounds.len(),
                got: res.len(),
            });
        }
        for (a, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::InvalidArgument(format!(
                    "axis {a}: bounds [{lo}, {hi}] are not a proper interval"
                )));
            }
            if res[a] == 0 {
                return Err(Error::InvalidArgument(format!("axis {a}: zero cells")));
            }
        }
        Ok(Self {
            bounds: bounds.to_vec(),
            res: res.to_vec(),
        })
    }

    /// Unit box `[0,1]^d` at the given per-axis resolution.
    pub fn unit_box(res: &[usize]) -> Result<Self> {
        let bounds: Vec<[f64; 2]> = res.iter().map(|_| [0.0, 1.0]).collect();
        Self::new(&bounds, res)
    }

    pub fn ndim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn resolution(&self) -> &[usize] {
        &self.res
    }

    pub fn cell_count(&self) -> usize {
        self.res.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let [lo, hi] = self.bounds[axis];
        (hi - lo) / self.res[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.ndim())
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn cell_measure(&self) -> f64 {
        (0..self.ndim()).map(|a| self.spacing(a)).product()
    }

    pub fn total_measure(&self) -> f64 {
        self.bounds.iter().map(|[lo, hi]| hi - lo).product()
    }

    /// Multi-index of a linear cell index (row-major, axis 0 slowest).
    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut m = [0usize; MAX_DIM];
        for a in (0..self.ndim()).rev() {
            m[a] = idx % self.res[a];
            idx /= self.res[a];
        }
        m
    }

    pub fn linear_index(&self, m: &[usize]) -> usize {
        let mut idx = 0;
        for a in 0..self.ndim() {
            idx = idx * self.res[a] + m[a];
        }
        idx
    }

    /// Coordinates of the cell center.
    pub fn center_coords(&self, idx: usize) -> [f64; MAX_DIM] {
        let m = self.multi_index(idx);
        let mut c = [0.0; MAX_DIM];
        for a in 0..self.ndim() {
            c[a] = self.bounds[a][0] + (m[a] as f64 + 0.5) * self.spacing(a);
        }
        c
    }

    /// True when the cell touches the domain boundary (one-cell layer).
    pub fn is_boundary(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        (0..self.ndim()).any(|a| m[a] == 0 || m[a] == self.res[a] - 1)
    }

    /// Same box with every axis resolution multiplied by `factor`.
    pub fn refine(&self, factor: usize) -> Self {
        let res: Vec<usize> = self.res.iter().map(|r| r * factor).collect();
        Self {
            bounds: self.bounds.clone(),
            res,
        }
    }

    /// Euclidean diameter of the box.
    pub fn euclidean_diameter(&self) -> f64 {
        self.bounds
            .iter()
            .map(|[lo, hi]| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub domain: GridDomain,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: GridDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.cell_count() {
            return Err(Error::DimensionMismatch {
                expected: domain.cell_count(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at cell {i}"
            )));
        }
        Ok(Self { domain, values })
    }

    pub fn constant(domain: GridDomain, c: f64) -> Self {
        let n = domain.cell_count();
        Self {
            domain,
            values: vec![c; n],
        }
    }

    pub fn zeros(domain: GridDomain) -> Self {
        Self::constant(domain, 0.0)
    }

    /// Sample `f` at the cell centers.
    pub fn from_fn<F: Fn(&[f64]) -> f64 + Sync>(domain: GridDomain, f: F) -> Self {
        let n = domain.cell_count();
        let ndim = domain.ndim();
        let values = crate::exec::map_indexed(n, |i| {
            let c = domain.center_coords(i);
            f(&c[..ndim])
        });
        Self { domain, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> Self {
        let values = crate::exec::map_indexed(self.len(), |i| f(self.values[i]));
        Self {
            domain: self.domain.clone(),
            values,
        }
    }

    pub fn zip_with<F: Fn(f64, f64) -> f64 + Sync>(&self, other: &Self, f: F) -> Result<Self> {
        self.check_same_domain(other)?;
        let values =
            crate::exec::map_indexed(self.len(), |i| f(self.values[i], other.values[i]));
        Ok(Self {
            domain: self.domain.clone(),
            values,
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    /// Cell sum of `f` against the Lebesgue measure.
    pub fn integral(&self) -> f64 {
        let cell = self.domain.cell_measure();
        crate::exec::sum_indexed(self.len(), |i| self.values[i]) * cell
    }

    pub fn sup_norm(&self) -> f64 {
        crate::exec::argmax_indexed(self.len(), |i| self.values[i].abs())
            .map(|(_, v)| v)
            .unwrap_or(0.0)
    }

    /// Zeroes the one-cell boundary layer in place.
    pub fn zero_boundary(&mut self) {
        for i in 0..self.len() {
            if self.domain.is_boundary(i) {
                self.values[i] = 0.0;
            }
        }
    }

    pub fn is_zero_on_boundary(&self) -> bool {
        (0..self.len()).all(|i| !self.domain.is_boundary(i) || self.values[i] == 0.0)
    }

    pub fn check_same_domain(&self, other: &Self) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::InvalidArgument(
                "grid functions live on different domains".into(),
            ));
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at cell {i}"
            )));
        }
        Ok(())
    }
}
