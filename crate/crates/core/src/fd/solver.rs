use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use super::LinearSystem;
use crate::error::{Error, Result};
use crate::grid::ScalarField;

/// Grids with at most this many nodes are factorized directly under
/// [`SolveMethod::Auto`].
pub const DIRECT_LIMIT: usize = 512 * 512;

const MAX_ITERATIONS: usize = 10_000;
const RESTART: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    Auto,
    Direct,
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub method: SolveMethod,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, method: SolveMethod::Auto }
    }
}

/// Solves the system and returns the full grid field. The relative residual
/// `‖Ax - b‖∞/‖b‖∞` is checked against `tol` on every path.
pub fn solve_system(sys: &LinearSystem, opts: &SolveOptions) -> Result<ScalarField> {
    if sys.is_empty() {
        return Ok(sys.to_field(&[]));
    }
    let direct = match opts.method {
        SolveMethod::Auto => sys.grid.len() <= DIRECT_LIMIT,
        SolveMethod::Direct => true,
        SolveMethod::Iterative => false,
    };
    let x = if direct { direct_solve(sys, opts.tol)? } else { bicgstab(sys, opts.tol, None)? };
    Ok(sys.to_field(&x))
}

fn direct_solve(sys: &LinearSystem, tol: f64) -> Result<Vec<f64>> {
    faer::set_global_parallelism(faer::Par::Seq);
    let n = sys.len();
    let mut trips = Vec::with_capacity(sys.values.len());
    for i in 0..n {
        for p in sys.row_ptr[i]..sys.row_ptr[i + 1] {
            trips.push(Triplet::new(i, sys.col_idx[p], sys.values[p]));
        }
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips).map_err(|e| Error::Solver(format!("{e:?}")))?;
    let lu = a.sp_lu().map_err(|e| Error::Solver(format!("{e:?}")))?;
    let b = Mat::<f64>::from_fn(n, 1, |i, _| sys.rhs[i]);
    let sol = lu.solve(&b);
    let mut x: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
    // a couple of refinement sweeps if rounding left the residual above tol
    let mut res = sys.relative_residual(&x);
    for _ in 0..3 {
        if res <= tol {
            break;
        }
        let mut ax = vec![0.0; n];
        sys.apply(&x, &mut ax);
        let r = Mat::<f64>::from_fn(n, 1, |i, _| sys.rhs[i] - ax[i]);
        let dx = lu.solve(&r);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += dx[(i, 0)];
        }
        res = sys.relative_residual(&x);
    }
    if !(res <= tol) {
        return Err(Error::NoConvergence { iterations: 0, residual: res });
    }
    Ok(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Max-norm that propagates NaN.
fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| if v.abs() > m || v.is_nan() { v.abs() } else { m })
}

/// Jacobi-preconditioned BiCGSTAB. Every [`RESTART`] iterations the true
/// residual is recomputed and the shadow vector reset.
pub fn bicgstab(sys: &LinearSystem, tol: f64, x0: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = sys.len();
    let inv_diag: Vec<f64> = sys.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let bnorm = norm_inf(&sys.rhs);
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    let (mut p, mut v, mut s, mut t) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut ph, mut sh) = (vec![0.0; n], vec![0.0; n]);
    let mut r_hat = Vec::new();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut last = f64::INFINITY;

    for it in 0..MAX_ITERATIONS {
        if it % RESTART == 0 {
            sys.apply(&x, &mut r);
            for (ri, bi) in r.iter_mut().zip(&sys.rhs) {
                *ri = bi - *ri;
            }
            last = norm_inf(&r) / scale;
            if last <= tol {
                return Ok(x);
            }
            r_hat = r.clone();
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            ph[i] = inv_diag[i] * p[i];
        }
        sys.apply(&ph, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            break;
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm_inf(&s) / scale <= tol {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            last = sys.relative_residual(&x);
            if last <= tol {
                return Ok(x);
            }
            continue;
        }
        for i in 0..n {
            sh[i] = inv_diag[i] * s[i];
        }
        sys.apply(&sh, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
        last = norm_inf(&r) / scale;
        if last <= tol {
            let true_res = sys.relative_residual(&x);
            if true_res <= tol {
                return Ok(x);
            }
            last = true_res;
        }
    }
    Err(Error::NoConvergence { iterations: MAX_ITERATIONS, residual: last })
}
