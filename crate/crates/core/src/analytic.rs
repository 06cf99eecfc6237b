//! Closed-form radial MFPTs on disks and annuli, their limiting regimes, and
//! a quadrature route for radially varying anisotropy.
//!
//! The reduced equation is
//! `(1+α)/(2r) (r T')' - (α/r) T' = -1/(2D)`, with constant-α solutions
//! `T = -r²/(4D) + H₁ + H₂ r^β` and `β = 2α/(1+α)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::quad::integrate;

/// Below this `|α|` the closed forms switch to their logarithmic limits.
pub const ALPHA_LOG_THRESHOLD: f64 = 1e-8;

const QUAD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Inner,
    Outer,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimitMode {
    /// `α → 1`
    Radial,
    /// `α = 0`
    Isotropic,
    /// `α → -1`
    Circular,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Geometry {
    Disk { radius: f64 },
    Annulus { inner: f64, outer: f64 },
}

impl Geometry {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Geometry::Disk { radius } => (0.0, radius),
            Geometry::Annulus { inner, outer } => (inner, outer),
        }
    }
}

/// Radial anisotropy profile `α(r)`.
#[derive(Clone)]
pub enum Alpha {
    Constant(f64),
    /// `values[i]` on `[breaks[i-1], breaks[i])`, with `values.len() == breaks.len() + 1`.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
    Profile(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Constant(a) => write!(f, "Constant({a})"),
            Alpha::Piecewise { breaks, values } => write!(f, "Piecewise {{ breaks: {breaks:?}, values: {values:?} }}"),
            Alpha::Profile(_) => f.write_str("Profile(..)"),
        }
    }
}

impl Alpha {
    pub fn piecewise(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breaks.len() + 1 || breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("piecewise α needs increasing breaks and one more value than breaks"));
        }
        values.iter().try_for_each(|&a| check_alpha(a))?;
        Ok(Alpha::Piecewise { breaks, values })
    }

    pub fn profile(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Alpha::Profile(Arc::new(f))
    }

    #[inline]
    pub fn at(&self, r: f64) -> f64 {
        match self {
            Alpha::Constant(a) => *a,
            Alpha::Piecewise { breaks, values } => values[breaks.partition_point(|&b| b <= r)],
            Alpha::Profile(f) => f(r),
        }
    }

    pub fn constant(&self) -> Option<f64> {
        match self {
            Alpha::Constant(a) => Some(*a),
            _ => None,
        }
    }

    /// Points in `(a, b)` where the profile may jump.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let (lo, hi) = (a.min(b), a.max(b));
        match self {
            Alpha::Piecewise { breaks, .. } => breaks.iter().copied().filter(|&x| x > lo && x < hi).collect(),
            _ => Vec::new(),
        }
    }
}

fn check_alpha(a: f64) -> Result<()> {
    if !(a > -1.0 && a < 1.0) {
        return Err(invalid(format!("α must lie in (-1, 1), got {a}")));
    }
    Ok(())
}

fn check_d(d: f64) -> Result<()> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(invalid(format!("D must be positive, got {d}")));
    }
    Ok(())
}

fn check_annulus(r: f64, rho: f64, r0: f64, d: f64) -> Result<()> {
    check_d(d)?;
    if !(rho > 0.0 && rho < r0) || !r0.is_finite() {
        return Err(Error::InvalidDomain(format!("annulus needs 0 < ρ < R₀, got ρ = {rho}, R₀ = {r0}")));
    }
    if !(r >= rho && r <= r0) {
        return Err(Error::OutsideDomain(format!("r = {r} (annulus [{rho}, {r0}])")));
    }
    Ok(())
}

/// `β = 2α/(1+α)`.
#[inline]
pub fn beta(alpha: f64) -> f64 {
    2.0 * alpha / (1.0 + alpha)
}

/// Radial MFPT problem on a disk or annulus.
#[derive(Clone, Debug)]
pub struct RadialProblem {
    geometry: Geometry,
    exit: Exit,
    d: f64,
    alpha: Alpha,
}

impl RadialProblem {
    pub fn new(geometry: Geometry, exit: Exit, d: f64, alpha: Alpha) -> Result<Self> {
        check_d(d)?;
        match geometry {
            Geometry::Disk { radius } => {
                if !(radius > 0.0) || !radius.is_finite() {
                    return Err(Error::InvalidDomain(format!("disk radius must be positive, got {radius}")));
                }
                if exit != Exit::Outer {
                    return Err(invalid(format!("a disk has no inner boundary; exit {exit:?} is not available")));
                }
            }
            Geometry::Annulus { inner, outer } => {
                if !(inner > 0.0 && inner < outer) || !outer.is_finite() {
                    return Err(Error::InvalidDomain(format!("annulus needs 0 < ρ < R₀, got ρ = {inner}, R₀ = {outer}")));
                }
            }
        }
        match &alpha {
            Alpha::Constant(a) => check_alpha(*a)?,
            Alpha::Piecewise { values, .. } => values.iter().try_for_each(|&a| check_alpha(a))?,
            Alpha::Profile(_) => {}
        }
        Ok(RadialProblem { geometry, exit, d, alpha })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn exit(&self) -> Exit {
        self.exit
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn alpha(&self) -> &Alpha {
        &self.alpha
    }

    /// Closed-form MFPT; constant α only.
    pub fn closed_form(&self, r: f64) -> Result<f64> {
        let a = self.alpha.constant().ok_or_else(|| invalid("closed forms need a constant α"))?;
        match self.geometry {
            Geometry::Disk { radius } => disk_exit_time(r, radius, self.d),
            Geometry::Annulus { inner, outer } => annulus_mfpt(r, inner, outer, self.d, a, self.exit),
        }
    }

    /// Boundary conditions implied by the geometry and exit configuration.
    pub fn boundary_conditions(&self) -> [RadialBc; 2] {
        match (self.geometry, self.exit) {
            (Geometry::Disk { radius }, _) => [RadialBc::ZeroDerivative(0.0), RadialBc::Value(radius, 0.0)],
            (Geometry::Annulus { inner, outer }, Exit::Inner) => {
                [RadialBc::Value(inner, 0.0), RadialBc::ZeroDerivative(outer)]
            }
            (Geometry::Annulus { inner, outer }, Exit::Outer) => {
                [RadialBc::ZeroDerivative(inner), RadialBc::Value(outer, 0.0)]
            }
            (Geometry::Annulus { inner, outer }, Exit::Both) => [RadialBc::Value(inner, 0.0), RadialBc::Value(outer, 0.0)],
        }
    }

    /// Quadrature solution with the integrals' lower limit at `ρ` (annulus)
    /// or `R₀/2` (disk).
    pub fn quadrature(&self) -> Result<QuadratureSolution> {
        let lower = match self.geometry {
            Geometry::Disk { radius } => 0.5 * radius,
            Geometry::Annulus { inner, .. } => inner,
        };
        general_alpha_quadrature(self.alpha.clone(), self.d, self.boundary_conditions(), lower)
    }
}

/// Disk MFPT through the outer circle, `(R₀² - r²)/(4D)`, for every α.
pub fn disk_exit_time(r: f64, r0: f64, d: f64) -> Result<f64> {
    check_d(d)?;
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(Error::InvalidDomain(format!("disk radius must be positive, got {r0}")));
    }
    if !(r >= 0.0 && r <= r0) {
        return Err(Error::OutsideDomain(format!("r = {r} (disk of radius {r0})")));
    }
    Ok((r0 * r0 - r * r) / (4.0 * d))
}

/// `(e^{βx} - e^{βy})/β`, stable for small `|β|` and for large exponents of
/// either sign.
fn pow_diff_over_beta(x: f64, y: f64, b: f64) -> f64 {
    let diff = if b * x >= b * y { -(b * x).exp() * (b * (y - x)).exp_m1() } else { (b * y).exp() * (b * (x - y)).exp_m1() };
    diff / b
}

/// Annulus MFPT at constant anisotropy `α ∈ (-1, 1)`.
///
/// `Inner` absorbs at `ρ` and reflects at `R₀`, `Outer` the reverse, `Both`
/// absorbs at both circles. For `|α| <` [`ALPHA_LOG_THRESHOLD`] the
/// logarithmic `α = 0` forms are used.
pub fn annulus_mfpt(r: f64, rho: f64, r0: f64, d: f64, alpha: f64, exit: Exit) -> Result<f64> {
    check_annulus(r, rho, r0, d)?;
    check_alpha(alpha)?;
    let iso = alpha.abs() < ALPHA_LOG_THRESHOLD;
    let b = beta(alpha);
    let t = match exit {
        Exit::Inner => {
            let s = if iso { (r / rho).ln() } else { pow_diff_over_beta((r / r0).ln(), (rho / r0).ln(), b) };
            (rho * rho - r * r) / (4.0 * d) + r0 * r0 / (2.0 * d) * s
        }
        Exit::Outer => {
            let s = if iso { (r / r0).ln() } else { pow_diff_over_beta((r / rho).ln(), (r0 / rho).ln(), b) };
            (r0 * r0 - r * r) / (4.0 * d) + rho * rho / (2.0 * d) * s
        }
        Exit::Both => {
            let (x, y) = ((r / rho).ln(), (r0 / rho).ln());
            let q = if iso {
                x / y
            } else if b > 0.0 {
                (b * (x - y)).exp() * (-b * x).exp_m1() / (-b * y).exp_m1()
            } else {
                (b * x).exp_m1() / (b * y).exp_m1()
            };
            (rho * rho - r * r) / (4.0 * d) + (r0 * r0 - rho * rho) / (4.0 * d) * q
        }
    };
    Ok(t)
}

/// Natural log of [`annulus_mfpt`], finite where the value itself
/// overflows (inner exit as `α → -1`).
pub fn annulus_mfpt_ln(r: f64, rho: f64, r0: f64, d: f64, alpha: f64, exit: Exit) -> Result<f64> {
    let t = annulus_mfpt(r, rho, r0, d, alpha, exit)?;
    if t.is_finite() || exit != Exit::Inner {
        return Ok(t.ln());
    }
    // inner exit with β ≪ 0: the power term dominates
    let b = beta(alpha);
    let (x, y) = ((r / r0).ln(), (rho / r0).ln());
    let ln_big = (r0 * r0 / (2.0 * d * b.abs())).ln() + b * y + (-(b * (x - y)).exp_m1()).ln();
    let small = (rho * rho - r * r) / (4.0 * d);
    Ok(ln_add(ln_big, small))
}

/// `ln(e^{ln_big} + small)` for `e^{ln_big} + small > 0`.
fn ln_add(ln_big: f64, small: f64) -> f64 {
    if ln_big < 700.0 {
        (ln_big.exp() + small).ln()
    } else {
        ln_big + (small * (-ln_big).exp()).ln_1p()
    }
}

/// Limiting MFPTs: radial (`α → 1`), isotropic (`α = 0`) and circular
/// (`α → -1`). Circular inner exit is `+∞` for `r > ρ`.
pub fn annulus_limit(r: f64, rho: f64, r0: f64, d: f64, mode: LimitMode, exit: Exit) -> Result<f64> {
    check_annulus(r, rho, r0, d)?;
    let q4 = 4.0 * d;
    let t = match (mode, exit) {
        (LimitMode::Radial, Exit::Inner) => (rho * rho - r * r) / q4 + r0 * (r - rho) / (2.0 * d),
        (LimitMode::Radial, Exit::Outer) => (r0 * r0 - r * r) / q4 + rho * (r - r0) / (2.0 * d),
        (LimitMode::Radial, Exit::Both) => (r - rho) * (r0 - r) / q4,
        (LimitMode::Isotropic, _) => annulus_mfpt(r, rho, r0, d, 0.0, exit)?,
        (LimitMode::Circular, Exit::Inner) => {
            if r > rho {
                f64::INFINITY
            } else {
                0.0
            }
        }
        (LimitMode::Circular, Exit::Outer) => (r0 * r0 - r * r) / q4,
        (LimitMode::Circular, Exit::Both) => {
            if r > rho {
                (r0 * r0 - r * r) / q4
            } else {
                0.0
            }
        }
    };
    Ok(t)
}

/// Radial boundary condition at a given radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadialBc {
    /// `T(r) = value`
    Value(f64, f64),
    /// `T'(r) = 0`
    ZeroDerivative(f64),
}

/// `T(r) = -r²/(4D) + H₁ + H₂ ∫_L^r g`, with
/// `g(η) = exp(-∫_L^η (1-α)/((1+α)s) ds)`.
#[derive(Clone, Debug)]
pub struct QuadratureSolution {
    alpha: Alpha,
    d: f64,
    lower: f64,
    h1: f64,
    h2: f64,
}

impl QuadratureSolution {
    pub fn constants(&self) -> (f64, f64) {
        (self.h1, self.h2)
    }

    pub fn value(&self, r: f64) -> f64 {
        let mut t = -r * r / (4.0 * self.d) + self.h1;
        if self.h2 != 0.0 {
            t += self.h2 * big_g(&self.alpha, self.lower, r);
        }
        t
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let mut dt = -r / (2.0 * self.d);
        if self.h2 != 0.0 {
            dt += self.h2 * g(&self.alpha, self.lower, r);
        }
        dt
    }
}

/// Integrates over `[a, b]` piece by piece between the profile's jumps.
fn integrate_split(alpha: &Alpha, f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let mut pts = vec![a];
    let mut inner = alpha.breakpoints(a, b);
    if a > b {
        inner.reverse();
    }
    pts.extend(inner);
    pts.push(b);
    let n = (pts.len() - 1) as f64;
    pts.windows(2).map(|w| integrate(f, w[0], w[1], tol / n)).sum()
}

fn phi(alpha: &Alpha, lower: f64, eta: f64) -> f64 {
    let c = |s: f64| {
        let a = alpha.at(s);
        (1.0 - a) / ((1.0 + a) * s)
    };
    integrate_split(alpha, &c, lower, eta, 1e-3 * QUAD_TOL)
}

fn g(alpha: &Alpha, lower: f64, eta: f64) -> f64 {
    (-phi(alpha, lower, eta)).exp()
}

fn big_g(alpha: &Alpha, lower: f64, r: f64) -> f64 {
    integrate_split(alpha, &|eta| g(alpha, lower, eta), lower, r, QUAD_TOL)
}

/// Solves for `H₁, H₂` from two boundary conditions; `lower` is the common
/// lower limit of both integrals. A zero-derivative condition at `r = 0`
/// forces `H₂ = 0`.
pub fn general_alpha_quadrature(alpha: Alpha, d: f64, bcs: [RadialBc; 2], lower: f64) -> Result<QuadratureSolution> {
    check_d(d)?;
    if !(lower > 0.0) {
        return Err(invalid(format!("quadrature lower limit must be positive, got {lower}")));
    }
    let mut m = [[0.0; 2]; 2];
    let mut rhs = [0.0; 2];
    for (i, bc) in bcs.iter().enumerate() {
        match *bc {
            RadialBc::Value(r, v) => {
                m[i] = [1.0, big_g(&alpha, lower, r)];
                rhs[i] = v + r * r / (4.0 * d);
            }
            RadialBc::ZeroDerivative(r) if r == 0.0 => {
                m[i] = [0.0, 1.0];
                rhs[i] = 0.0;
            }
            RadialBc::ZeroDerivative(r) => {
                m[i] = [0.0, g(&alpha, lower, r)];
                rhs[i] = r / (2.0 * d);
            }
        }
    }
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if !(det.abs() > 1e-14 * scale * scale) {
        return Err(Error::SingularBoundarySystem(det));
    }
    let h1 = (rhs[0] * m[1][1] - rhs[1] * m[0][1]) / det;
    let h2 = (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det;
    Ok(QuadratureSolution { alpha, d, lower, h1, h2 })
}

/// Log of the inner-exit annulus MFPT by quadrature,
/// `T = (ρ² - r²)/(4D) + R₀/(2D) ∫_ρ^r e^{Φ(η)} dη` with
/// `Φ(η) = ∫_η^{R₀} (1-α)/((1+α)s) ds`, evaluated in log space.
pub fn inner_exit_quadrature_ln(r: f64, rho: f64, r0: f64, d: f64, alpha: &Alpha) -> Result<f64> {
    check_annulus(r, rho, r0, d)?;
    if r == rho {
        return Ok(f64::NEG_INFINITY);
    }
    // Φ(ρ) is the largest exponent; integrate e^{Φ(η) - Φ(ρ)}
    let peak = -phi(alpha, r0, rho);
    let f = |eta: f64| (-phi(alpha, rho, eta)).exp();
    let rough = integrate_split(alpha, &f, rho, r, 1e-6 * (r - rho));
    let i = integrate_split(alpha, &f, rho, r, 1e-11 * rough);
    let ln_big = (r0 / (2.0 * d)).ln() + peak + i.ln();
    Ok(ln_add(ln_big, (rho * rho - r * r) / (4.0 * d)))
}
