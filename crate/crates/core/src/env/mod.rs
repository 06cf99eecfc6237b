//! Spatial environment: domains, linear features, distance and direction
//! fields, anisotropy fields and the diffusion tensor field built from them.

mod domain;
mod raster;

pub use domain::{BoundaryPiece, BoundaryRole, Domain, Shape};
pub use raster::{fields_from_raster, rasterize_segments, GrayImage, DEFAULT_WINDOW};

use rayon::prelude::*;

use crate::dist::alpha_of_k;
use crate::error::{invalid, Error, Result};
use crate::geom::{Sym2, Vec2};
use crate::grid::{DirectionField, GridSpec, ScalarField};

/// Straight linear feature between two distinct finite endpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(invalid("segment endpoints must be finite"));
        }
        if a == b {
            return Err(invalid(format!("segment endpoints coincide at ({}, {})", a.x, a.y)));
        }
        Ok(Segment { a, b })
    }

    /// Euclidean distance from `p` to the closed segment.
    #[inline]
    pub fn distance(&self, p: Vec2) -> f64 {
        let ab = self.b - self.a;
        let t = ((p - self.a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
        (p - (self.a + ab * t)).norm()
    }

    /// Unit axis of the segment in canonical sign.
    pub fn axis(&self) -> Vec2 {
        // endpoints are distinct, so the difference normalizes
        (self.b - self.a).normalized().unwrap_or(Vec2::E1).axis_canonical()
    }
}

/// Non-empty-by-construction list of linear features.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SegmentSet {
    segments: Vec<Segment>,
}

impl SegmentSet {
    pub fn new(segments: Vec<Segment>) -> Self {
        SegmentSet { segments }
    }

    pub fn from_endpoints(list: &[[f64; 4]]) -> Result<Self> {
        list.iter()
            .map(|s| Segment::new(Vec2::new(s[0], s[1]), Vec2::new(s[2], s[3])))
            .collect::<Result<Vec<_>>>()
            .map(SegmentSet::new)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Nearest segment to `p`: `(index, distance)`. Ties go to the lowest
    /// index.
    #[inline]
    pub fn nearest(&self, p: Vec2) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in self.segments.iter().enumerate() {
            let d = s.distance(p);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    }
}

/// Distance to the nearest segment and that segment's axis at every node.
///
/// Nodes where a different-axis segment is equally close (within 1e-12
/// relative) keep the lowest-index segment's axis and are flagged.
pub fn distance_direction_from_segments(grid: &GridSpec, segs: &SegmentSet) -> Result<(ScalarField, DirectionField)> {
    if segs.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    let axes: Vec<Vec2> = segs.segments().iter().map(Segment::axis).collect();
    let per_node: Vec<(f64, Vec2, bool)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let p = grid.node_at(idx);
            let (best, d) = segs.nearest(p).expect("non-empty");
            let tol = 1e-12 * (1.0 + d);
            let tie = segs.segments().iter().enumerate().any(|(i, s)| {
                i != best && (s.distance(p) - d).abs() <= tol && {
                    let c = axes[i].x * axes[best].y - axes[i].y * axes[best].x;
                    c.abs() > 1e-12
                }
            });
            (d, axes[best], tie)
        })
        .collect();
    let distance = ScalarField { grid: *grid, values: per_node.iter().map(|v| v.0).collect() };
    let direction = DirectionField {
        grid: *grid,
        values: per_node.iter().map(|v| v.1).collect(),
        flagged: per_node.iter().map(|v| v.2).collect(),
    };
    Ok((distance, direction))
}

/// Whether the preferred axis is the field's own axis (`+1`, radial for the
/// `x̂` field) or perpendicular to it (`-1`, circular).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrientationSign {
    Radial,
    Circular,
}

impl OrientationSign {
    pub fn value(self) -> f64 {
        match self {
            OrientationSign::Radial => 1.0,
            OrientationSign::Circular => -1.0,
        }
    }
}

/// Per-node concentration, anisotropy indicator and preferred axis.
///
/// A zero `gamma` marks a node with no defined axis (the origin of a radial
/// field); such nodes are treated as isotropic.
#[derive(Clone, Debug, PartialEq)]
pub struct AnisotropyField {
    pub grid: GridSpec,
    pub distance: Vec<f64>,
    pub k: Vec<f64>,
    pub alpha: Vec<f64>,
    pub gamma: Vec<Vec2>,
    pub flagged: Vec<bool>,
    pub k0: f64,
    pub d0: f64,
}

impl AnisotropyField {
    /// `k ≡ 0` everywhere.
    pub fn isotropic(grid: GridSpec) -> Self {
        let n = grid.len();
        AnisotropyField {
            grid,
            distance: vec![f64::INFINITY; n],
            k: vec![0.0; n],
            alpha: vec![0.0; n],
            gamma: vec![Vec2::E1; n],
            flagged: vec![false; n],
            k0: 0.0,
            d0: 0.0,
        }
    }

    /// Uniform concentration `k` with `γ = x̂` (undefined at the origin).
    pub fn radial(grid: GridSpec, k: f64) -> Result<Self> {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(invalid(format!("concentration must be non-negative, got {k}")));
        }
        let n = grid.len();
        let alpha = alpha_of_k(k);
        Ok(AnisotropyField {
            grid,
            distance: vec![0.0; n],
            k: vec![k; n],
            alpha: vec![alpha; n],
            gamma: grid.nodes().map(|p| p.normalized().unwrap_or(Vec2::ZERO)).collect(),
            flagged: vec![false; n],
            k0: k,
            d0: f64::INFINITY,
        })
    }
}

/// Distance-gated concentration: `k = k₀` where `d < d₀`, else 0, and
/// `α = I₂(k)/I₀(k)`.
pub fn anisotropy_from_distance(distance: &ScalarField, direction: &DirectionField, k0: f64, d0: f64) -> Result<AnisotropyField> {
    if !(k0 >= 0.0) || !k0.is_finite() {
        return Err(invalid(format!("k₀ must be finite and non-negative, got {k0}")));
    }
    if !(d0 >= 0.0) {
        return Err(invalid(format!("d₀ must be non-negative, got {d0}")));
    }
    distance.grid.check_same(&direction.grid, "distance vs direction field")?;
    let alpha0 = alpha_of_k(k0);
    let inside: Vec<bool> = distance.values.iter().map(|&d| d < d0).collect();
    Ok(AnisotropyField {
        grid: distance.grid,
        distance: distance.values.clone(),
        k: inside.iter().map(|&i| if i { k0 } else { 0.0 }).collect(),
        alpha: inside.iter().map(|&i| if i { alpha0 } else { 0.0 }).collect(),
        gamma: direction.values.clone(),
        flagged: direction.flagged.clone(),
        k0,
        d0,
    })
}

/// Diffusion tensor components on every node of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    pub grid: GridSpec,
    pub d11: Vec<f64>,
    pub d12: Vec<f64>,
    pub d22: Vec<f64>,
}

impl TensorField {
    pub fn constant(grid: GridSpec, t: Sym2) -> Self {
        let n = grid.len();
        TensorField { grid, d11: vec![t.xx; n], d12: vec![t.xy; n], d22: vec![t.yy; n] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(Vec2) -> Sym2) -> Self {
        let ts: Vec<Sym2> = grid.nodes().map(f).collect();
        TensorField {
            grid,
            d11: ts.iter().map(|t| t.xx).collect(),
            d12: ts.iter().map(|t| t.xy).collect(),
            d22: ts.iter().map(|t| t.yy).collect(),
        }
    }

    #[inline]
    pub fn at(&self, idx: usize) -> Sym2 {
        Sym2::new(self.d11[idx], self.d12[idx], self.d22[idx])
    }
}

/// `𝔻 = (σ²/μ) [½(1 - a) 𝕀 + a γγᵀ]` for signed anisotropy `a`; isotropic
/// `(σ²/2μ) 𝕀` where `γ` is undefined.
#[inline]
pub fn diffusion_tensor(a: f64, gamma: Vec2, sigma: f64, mu: f64) -> Sym2 {
    let scale = sigma * sigma / mu;
    if gamma == Vec2::ZERO {
        return Sym2::identity(0.5 * scale);
    }
    Sym2::identity(0.5 * (1.0 - a)).add(&Sym2::outer(gamma).scale(a)).scale(scale)
}

/// Diffusion tensor field for turning rate `mu` and speed `sigma`, with
/// `a = sign · I₂(k)/I₀(k)` per node.
pub fn tensor_field(aniso: &AnisotropyField, sigma: f64, mu: f64, sign: OrientationSign) -> Result<TensorField> {
    if !(sigma > 0.0) || !(mu > 0.0) || !sigma.is_finite() || !mu.is_finite() {
        return Err(invalid(format!("σ and μ must be positive, got σ = {sigma}, μ = {mu}")));
    }
    let s = sign.value();
    let ts: Vec<Sym2> = (0..aniso.grid.len())
        .into_par_iter()
        .map(|i| diffusion_tensor(s * aniso.alpha[i], aniso.gamma[i], sigma, mu))
        .collect();
    Ok(TensorField {
        grid: aniso.grid,
        d11: ts.iter().map(|t| t.xx).collect(),
        d12: ts.iter().map(|t| t.xy).collect(),
        d22: ts.iter().map(|t| t.yy).collect(),
    })
}
