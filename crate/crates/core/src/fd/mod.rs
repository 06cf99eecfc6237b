//! Finite-difference solvers for `𝔻 : ∇⊗∇ T = -1`.
//!
//! [`assemble_2d`] builds the nine-point scheme on a rectangular grid with
//! Dirichlet data; [`radial_solve`] handles disks and annuli through the
//! reduced radial equation.

mod radial;
mod solver;

pub use radial::{radial_moments, radial_solve, radial_solve_with_source, RadialSolution};
pub use solver::{bicgstab, solve_system, SolveMethod, SolveOptions, DIRECT_LIMIT};

use rayon::prelude::*;

use crate::env::TensorField;
use crate::error::{invalid, Result};
use crate::geom::Vec2;
use crate::grid::{GridSpec, ScalarField};

/// Nodes with prescribed values. All edge nodes must be fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct Dirichlet {
    grid: GridSpec,
    fixed: Vec<bool>,
    values: Vec<f64>,
}

impl Dirichlet {
    /// `T = 0` on all four edges.
    pub fn zero_edges(grid: GridSpec) -> Self {
        Dirichlet::edges_from_fn(grid, |_| 0.0)
    }

    /// `T = f` on all four edges.
    pub fn edges_from_fn(grid: GridSpec, f: impl Fn(Vec2) -> f64) -> Self {
        let mut fixed = vec![false; grid.len()];
        let mut values = vec![0.0; grid.len()];
        for idx in 0..grid.len() {
            let (j, k) = grid.coords(idx);
            if grid.is_edge(j, k) {
                fixed[idx] = true;
                values[idx] = f(grid.node_at(idx));
            }
        }
        Dirichlet { grid, fixed, values }
    }

    /// Additionally pins every node outside `inside` to 0. Curved
    /// boundaries embedded this way are only first-order accurate.
    pub fn mask_outside(mut self, inside: impl Fn(Vec2) -> bool) -> Self {
        for idx in 0..self.grid.len() {
            if !inside(self.grid.node_at(idx)) {
                self.fixed[idx] = true;
                self.values[idx] = 0.0;
            }
        }
        self
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn is_fixed(&self, idx: usize) -> bool {
        self.fixed[idx]
    }
}

/// Sparse system over the free nodes, rows in compressed layout.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub grid: GridSpec,
    /// Grid index of each unknown.
    pub unknowns: Vec<usize>,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Values at fixed nodes (zero at free nodes).
    pub boundary: Vec<f64>,
}

impl LinearSystem {
    pub fn len(&self) -> usize {
        self.unknowns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unknowns.is_empty()
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p]];
            }
            *o = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1]).find(|&p| self.col_idx[p] == i).map_or(0.0, |p| self.values[p])
            })
            .collect()
    }

    /// `‖A x - b‖∞ / ‖b‖∞` (absolute when `b = 0`).
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.len()];
        self.apply(x, &mut ax);
        let r = ax.iter().zip(&self.rhs).map(|(a, b)| (a - b).abs()).fold(0.0_f64, |m, v| if v > m || v.is_nan() { v } else { m });
        let b = self.rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if b > 0.0 {
            r / b
        } else {
            r
        }
    }

    /// Scatters a solution vector back onto the grid.
    pub fn to_field(&self, x: &[f64]) -> ScalarField {
        let mut values = self.boundary.clone();
        for (u, &idx) in self.unknowns.iter().enumerate() {
            values[idx] = x[u];
        }
        ScalarField { grid: self.grid, values }
    }
}

/// Nine-point scheme for `𝔻 : ∇⊗∇ T = -1` with Dirichlet rows eliminated.
pub fn assemble_2d(tensor: &TensorField, bc: &Dirichlet) -> Result<LinearSystem> {
    let ones = vec![1.0; tensor.grid.len()];
    assemble_2d_with_source(tensor, bc, &ones)
}

/// Same scheme for `𝔻 : ∇⊗∇ T = -s` with a per-node source `s`.
pub fn assemble_2d_with_source(tensor: &TensorField, bc: &Dirichlet, source: &[f64]) -> Result<LinearSystem> {
    let grid = tensor.grid;
    grid.check_same(&bc.grid, "tensor vs boundary data")?;
    if source.len() != grid.len() {
        return Err(invalid(format!("source has {} values for {} nodes", source.len(), grid.len())));
    }
    for idx in 0..grid.len() {
        let (j, k) = grid.coords(idx);
        if grid.is_edge(j, k) && !bc.fixed[idx] {
            return Err(invalid("every edge node needs a Dirichlet value"));
        }
    }
    let mut unknown_of = vec![usize::MAX; grid.len()];
    let unknowns: Vec<usize> = (0..grid.len()).filter(|&i| !bc.fixed[i]).collect();
    for (u, &idx) in unknowns.iter().enumerate() {
        unknown_of[idx] = u;
    }
    let (h1, h2) = (grid.dx1(), grid.dx2());
    let n1 = grid.n1();

    let rows: Vec<(Vec<(usize, f64)>, f64)> = unknowns
        .par_iter()
        .map(|&idx| {
            let t = tensor.at(idx);
            let a = t.xx / (h1 * h1);
            let c = t.yy / (h2 * h2);
            let b = t.xy / (2.0 * h1 * h2);
            // (offset in j, offset in k, coefficient), centre first
            let stencil = [
                (0, 0, -2.0 * a - 2.0 * c),
                (-1, -1, b),
                (0, -1, c),
                (1, -1, -b),
                (-1, 0, a),
                (1, 0, a),
                (-1, 1, -b),
                (0, 1, c),
                (1, 1, b),
            ];
            let mut row = Vec::with_capacity(9);
            let mut rhs = -source[idx];
            for (dj, dk, coef) in stencil {
                if coef == 0.0 && (dj, dk) != (0, 0) {
                    continue;
                }
                let nb = (idx as isize + dk * n1 as isize + dj) as usize;
                if bc.fixed[nb] {
                    rhs -= coef * bc.values[nb];
                } else {
                    row.push((unknown_of[nb], coef));
                }
            }
            row.sort_unstable_by_key(|e| e.0);
            (row, rhs)
        })
        .collect();

    let mut row_ptr = Vec::with_capacity(unknowns.len() + 1);
    let mut col_idx = Vec::with_capacity(9 * unknowns.len());
    let mut values = Vec::with_capacity(9 * unknowns.len());
    let mut rhs = Vec::with_capacity(unknowns.len());
    row_ptr.push(0);
    for (row, b) in rows {
        for (c, v) in row {
            col_idx.push(c);
            values.push(v);
        }
        row_ptr.push(col_idx.len());
        rhs.push(b);
    }
    let boundary = (0..grid.len()).map(|i| if bc.fixed[i] { bc.values[i] } else { 0.0 }).collect();
    Ok(LinearSystem { grid, unknowns, row_ptr, col_idx, values, rhs, boundary })
}

/// `T_aniso - T_iso` node by node.
pub fn difference_map(aniso: &ScalarField, iso: &ScalarField) -> Result<ScalarField> {
    aniso.grid.check_same(&iso.grid, "difference map")?;
    Ok(ScalarField { grid: aniso.grid, values: aniso.values.iter().zip(&iso.values).map(|(a, b)| a - b).collect() })
}
