use crate::analytic::{Exit, Geometry, RadialProblem};
use crate::error::{invalid, Result};

/// `T` sampled on the uniform radial mesh of a [`radial_solve`].
#[derive(Clone, Debug, PartialEq)]
pub struct RadialSolution {
    pub r: Vec<f64>,
    pub t: Vec<f64>,
}

impl RadialSolution {
    /// Linear interpolation; clamps outside the mesh.
    pub fn interpolate(&self, r: f64) -> f64 {
        let n = self.r.len();
        let h = self.r[1] - self.r[0];
        let x = ((r - self.r[0]) / h).clamp(0.0, (n - 1) as f64);
        let i = (x.floor() as usize).min(n - 2);
        let w = x - i as f64;
        (1.0 - w) * self.t[i] + w * self.t[i + 1]
    }
}

/// Radial MFPT on `n` uniformly spaced nodes.
pub fn radial_solve(problem: &RadialProblem, n: usize) -> Result<RadialSolution> {
    radial_solve_with_source(problem, n, &|_| 1.0)
}

/// Solves `(1+α)T'' + (1-α)T'/r = -s(r)/D`, the radial form of
/// `𝔻 : ∇⊗∇ T = -s`, with the problem's boundary conditions.
pub fn radial_solve_with_source(problem: &RadialProblem, n: usize, source: &dyn Fn(usize) -> f64) -> Result<RadialSolution> {
    if n < 16 {
        return Err(invalid(format!("radial solves need at least 16 nodes, got {n}")));
    }
    let d = problem.d();
    let alpha = problem.alpha();
    let (lo, hi) = problem.geometry().bounds();
    let h = (hi - lo) / (n - 1) as f64;
    let r: Vec<f64> = (0..n).map(|i| if i == n - 1 { hi } else { lo + i as f64 * h }).collect();

    // rows a_i T_{i-1} + b_i T_i + c_i T_{i+1} = f_i
    let (mut a, mut b, mut c, mut f) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 1..n - 1 {
        let al = alpha.at(r[i]);
        let diff = (1.0 + al) / (h * h);
        let adv = (1.0 - al) / (2.0 * h * r[i]);
        a[i] = diff - adv;
        b[i] = -2.0 * diff;
        c[i] = diff + adv;
        f[i] = -source(i) / d;
    }

    let (inner_absorbs, outer_absorbs) = match (problem.geometry(), problem.exit()) {
        (Geometry::Disk { .. }, _) => (false, true),
        (_, Exit::Inner) => (true, false),
        (_, Exit::Outer) => (false, true),
        (_, Exit::Both) => (true, true),
    };

    if inner_absorbs {
        b[0] = 1.0;
    } else if matches!(problem.geometry(), Geometry::Disk { .. }) {
        // symmetry at the origin: 2T''(0) = -s/D with a mirrored ghost node
        b[0] = -4.0 / (h * h);
        c[0] = 4.0 / (h * h);
        f[0] = -source(0) / d;
    } else {
        // (-3T₀ + 4T₁ - T₂)/(2h) = 0 with T₂ eliminated through row 1
        b[0] = -3.0 + a[1] / c[1];
        c[0] = 4.0 + b[1] / c[1];
        f[0] = f[1] / c[1];
    }
    let m = n - 1;
    if outer_absorbs {
        b[m] = 1.0;
    } else {
        // (3T_m - 4T_{m-1} + T_{m-2})/(2h) = 0 with T_{m-2} eliminated
        a[m] = -4.0 - b[m - 1] / a[m - 1];
        b[m] = 3.0 - c[m - 1] / a[m - 1];
        f[m] = -f[m - 1] / a[m - 1];
    }
    let t = thomas(&a, &b, &c, &f);
    Ok(RadialSolution { r, t })
}

/// Moments `T_1 … T_M` of the exit time from
/// `𝔻 : ∇⊗∇ T_m = -m T_{m-1}` with `T_0 = 1`.
pub fn radial_moments(problem: &RadialProblem, n: usize, order: u32) -> Result<Vec<RadialSolution>> {
    let mut out: Vec<RadialSolution> = Vec::with_capacity(order as usize);
    for m in 1..=order {
        let sol = match out.last() {
            None => radial_solve(problem, n)?,
            Some(prev) => {
                let prev = prev.t.clone();
                radial_solve_with_source(problem, n, &|i| m as f64 * prev[i])?
            }
        };
        out.push(sol);
    }
    Ok(out)
}

fn thomas(a: &[f64], b: &[f64], c: &[f64], f: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut fp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    fp[0] = f[0] / b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        fp[i] = (f[i] - a[i] * fp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = fp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = fp[i] - cp[i] * x[i + 1];
    }
    x
}
