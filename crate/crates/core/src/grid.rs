//! Tensor-product node grids over a rectangle and fields sampled on them.

use crate::error::{invalid, Error, Result};
use crate::geom::Vec2;

/// Uniform node grid over `[x_min, x_max] × [y_min, y_max]`.
///
/// Nodes are indexed `(j, k)` with `j ∈ 0..n1` along x₁ and `k ∈ 0..n2`
/// along x₂; node `(j, k)` sits at `(x_min + j Δx₁, y_min + k Δx₂)`. Flat
/// storage is row-major with x₁ varying fastest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    n1: usize,
    n2: usize,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl GridSpec {
    pub fn new(n1: usize, n2: usize, x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        if n1 < 3 || n2 < 3 {
            return Err(invalid(format!("grid needs at least 3 nodes per axis, got {n1}×{n2}")));
        }
        if !(x_min < x_max) || !(y_min < y_max) || ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
            return Err(invalid(format!(
                "grid bounds must satisfy a < b and c < d, got [{x_min}, {x_max}] × [{y_min}, {y_max}]"
            )));
        }
        Ok(GridSpec { n1, n2, x_min, x_max, y_min, y_max })
    }

    /// Square grid with `n` nodes per side over `[lo, hi]²`.
    pub fn square(n: usize, lo: f64, hi: f64) -> Result<Self> {
        GridSpec::new(n, n, lo, hi, lo, hi)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        (self.x_min, self.x_max, self.y_min, self.y_max)
    }

    pub fn dx1(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n1 - 1) as f64
    }

    pub fn dx2(&self) -> f64 {
        (self.y_max - self.y_min) / (self.n2 - 1) as f64
    }

    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        k * self.n1 + j
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.n1, idx / self.n1)
    }

    #[inline]
    pub fn node(&self, j: usize, k: usize) -> Vec2 {
        Vec2::new(self.x_min + j as f64 * self.dx1(), self.y_min + k as f64 * self.dx2())
    }

    #[inline]
    pub fn node_at(&self, idx: usize) -> Vec2 {
        let (j, k) = self.coords(idx);
        self.node(j, k)
    }

    pub fn is_edge(&self, j: usize, k: usize) -> bool {
        j == 0 || k == 0 || j + 1 == self.n1 || k + 1 == self.n2
    }

    /// Nearest node to `p`, clamped to the grid.
    pub fn nearest(&self, p: Vec2) -> (usize, usize) {
        let fj = ((p.x - self.x_min) / self.dx1()).round();
        let fk = ((p.y - self.y_min) / self.dx2()).round();
        let j = fj.clamp(0.0, (self.n1 - 1) as f64) as usize;
        let k = fk.clamp(0.0, (self.n2 - 1) as f64) as usize;
        (j, k)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec2> + '_ {
        (0..self.len()).map(move |i| self.node_at(i))
    }

    pub(crate) fn check_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{what}: {self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Scalar values on every node of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        ScalarField { grid, values: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(Vec2) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        ScalarField { grid, values }
    }

    #[inline]
    pub fn at(&self, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(j, k)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Bilinear interpolation at `p` (clamped to the grid).
    pub fn interpolate(&self, p: Vec2) -> f64 {
        let g = &self.grid;
        let (x0, _, y0, _) = g.bounds();
        let fx = ((p.x - x0) / g.dx1()).clamp(0.0, (g.n1() - 1) as f64);
        let fy = ((p.y - y0) / g.dx2()).clamp(0.0, (g.n2() - 1) as f64);
        let j = (fx.floor() as usize).min(g.n1() - 2);
        let k = (fy.floor() as usize).min(g.n2() - 2);
        let (tx, ty) = (fx - j as f64, fy - k as f64);
        let v00 = self.at(j, k);
        let v10 = self.at(j + 1, k);
        let v01 = self.at(j, k + 1);
        let v11 = self.at(j + 1, k + 1);
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
    }
}

/// Unit axis per node, plus a flag for nodes whose direction is ambiguous
/// (equidistant features with different axes, degenerate raster windows).
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionField {
    pub grid: GridSpec,
    pub values: Vec<Vec2>,
    pub flagged: Vec<bool>,
}

impl DirectionField {
    pub fn uniform(grid: GridSpec, dir: Vec2) -> Self {
        DirectionField { grid, values: vec![dir; grid.len()], flagged: vec![false; grid.len()] }
    }

    #[inline]
    pub fn at(&self, j: usize, k: usize) -> Vec2 {
        self.values[self.grid.index(j, k)]
    }

    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().filter(|f| **f).count()
    }
}
