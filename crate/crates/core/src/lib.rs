//! Mean first passage times (MFPTs) for anisotropic velocity-jump processes.
//!
//! Three independent routes to the same quantity live side by side:
//!
//! * [`analytic`]: closed-form radial MFPTs on disks and annuli,
//! * [`fd`]: finite-difference solves of `𝔻 : ∇⊗∇ T = -1` on rectangles and
//!   of the reduced radial ODE,
//! * [`mc`]: event-driven Monte Carlo of the underlying run-and-tumble process.
//!
//! [`env`] builds domains, feature geometry and diffusion tensor fields, and
//! [`dist`] holds the turning kernels and the Bessel functions they need.

pub mod analytic;
pub mod dist;
pub mod env;
pub mod error;
pub mod fd;
pub mod geom;
pub mod grid;
pub mod io;
pub mod mc;
pub mod quad;

pub use error::{Error, Result};
pub use geom::Vec2;
pub use grid::{DirectionField, GridSpec, ScalarField};
