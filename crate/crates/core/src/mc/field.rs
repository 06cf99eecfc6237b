use rand_chacha::ChaCha8Rng;

use crate::dist::DirectionalKernel;
use crate::env::{AnisotropyField, OrientationSign, SegmentSet};
use crate::error::{invalid, Result};
use crate::geom::Vec2;

/// Per-walker random stream.
pub type WalkerRng = ChaCha8Rng;

/// Turning kernel as a function of position: the direction drawn at a turn
/// depends only on where the turn happens.
pub trait KernelField: Sync {
    fn sample(&self, x: Vec2, rng: &mut WalkerRng) -> Vec2;
}

impl KernelField for DirectionalKernel {
    #[inline]
    fn sample(&self, _x: Vec2, rng: &mut WalkerRng) -> Vec2 {
        self.sample_unit(rng)
    }
}

/// A kernel aimed along `x̂` (radial) or `x̂⊥` (circular) at every point.
/// At the origin, where the axis is undefined, directions are uniform.
#[derive(Clone, Debug)]
pub struct OrientedKernel {
    kernel: DirectionalKernel,
    uniform: DirectionalKernel,
    sign: OrientationSign,
}

impl OrientedKernel {
    /// `kernel` supplies the shape; its own direction is ignored.
    pub fn new(kernel: DirectionalKernel, sign: OrientationSign) -> Result<Self> {
        Ok(OrientedKernel { kernel, uniform: DirectionalKernel::uniform(kernel.speed())?, sign })
    }
}

impl KernelField for OrientedKernel {
    #[inline]
    fn sample(&self, x: Vec2, rng: &mut WalkerRng) -> Vec2 {
        let n2 = x.norm_sq();
        if n2 == 0.0 {
            return self.uniform.sample_unit(rng);
        }
        let radial = x * (1.0 / n2.sqrt());
        let gamma = match self.sign {
            OrientationSign::Radial => radial,
            OrientationSign::Circular => radial.perp(),
        };
        self.kernel.with_direction(gamma).sample_unit(rng)
    }
}

/// Bimodal von Mises of concentration `k₀` along the nearest segment when
/// it is closer than `d₀`, uniform elsewhere.
#[derive(Clone, Debug)]
pub struct FeatureKernel {
    segments: SegmentSet,
    axes: Vec<Vec2>,
    d0: f64,
    aligned: DirectionalKernel,
    uniform: DirectionalKernel,
}

impl FeatureKernel {
    pub fn new(segments: SegmentSet, k0: f64, d0: f64, speed: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(crate::error::Error::EmptyFeatureSet);
        }
        if !(d0 >= 0.0) {
            return Err(invalid(format!("d₀ must be non-negative, got {d0}")));
        }
        let axes = segments.segments().iter().map(|s| s.axis()).collect();
        Ok(FeatureKernel {
            segments,
            axes,
            d0,
            aligned: DirectionalKernel::bimodal_von_mises(k0, Vec2::E1, speed)?,
            uniform: DirectionalKernel::uniform(speed)?,
        })
    }

    pub fn segments(&self) -> &SegmentSet {
        &self.segments
    }
}

impl KernelField for FeatureKernel {
    #[inline]
    fn sample(&self, x: Vec2, rng: &mut WalkerRng) -> Vec2 {
        match self.segments.nearest(x) {
            Some((i, d)) if d < self.d0 => self.aligned.with_direction(self.axes[i]).sample_unit(rng),
            _ => self.uniform.sample_unit(rng),
        }
    }
}

/// Kernel read off the nearest node of a gridded anisotropy field.
#[derive(Clone, Debug)]
pub struct GriddedKernel {
    field: AnisotropyField,
    /// Distinct concentrations and their bimodal kernels.
    kernels: Vec<DirectionalKernel>,
    /// Per-node index into `kernels`.
    which: Vec<usize>,
    gamma: Vec<Vec2>,
    uniform: DirectionalKernel,
}

impl GriddedKernel {
    pub fn new(field: AnisotropyField, speed: f64, sign: OrientationSign) -> Result<Self> {
        let mut ks: Vec<f64> = Vec::new();
        let mut kernels = Vec::new();
        let mut which = Vec::with_capacity(field.k.len());
        for &k in &field.k {
            let i = match ks.iter().position(|&v| v == k) {
                Some(i) => i,
                None => {
                    ks.push(k);
                    kernels.push(if k == 0.0 {
                        DirectionalKernel::uniform(speed)?
                    } else {
                        DirectionalKernel::bimodal_von_mises(k, Vec2::E1, speed)?
                    });
                    ks.len() - 1
                }
            };
            which.push(i);
        }
        let gamma = field
            .gamma
            .iter()
            .map(|&g| match sign {
                OrientationSign::Radial => g,
                OrientationSign::Circular => g.perp(),
            })
            .collect();
        Ok(GriddedKernel { field, kernels, which, gamma, uniform: DirectionalKernel::uniform(speed)? })
    }

    pub fn field(&self) -> &AnisotropyField {
        &self.field
    }
}

impl KernelField for GriddedKernel {
    #[inline]
    fn sample(&self, x: Vec2, rng: &mut WalkerRng) -> Vec2 {
        let (j, k) = self.field.grid.nearest(x);
        let idx = self.field.grid.index(j, k);
        let g = self.gamma[idx];
        if g == Vec2::ZERO {
            return self.uniform.sample_unit(rng);
        }
        self.kernels[self.which[idx]].with_direction(g).sample_unit(rng)
    }
}
