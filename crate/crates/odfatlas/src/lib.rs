//! Population atlas estimation for orientation distribution function (ODF) fields.
//!
//! An ODF is a probability density on the unit sphere describing the local
//! distribution of axonal directions in diffusion MRI. In the square-root
//! parameterization these densities live on the positive orthant of a unit
//! Hilbert sphere, where the Fisher-Rao geometry has closed-form geodesics,
//! exponential and logarithm maps. This crate combines that manifold with
//! large-deformation diffeomorphic metric mapping (LDDMM) to estimate a
//! population template ("atlas") from a cohort of subject ODF fields:
//!
//! * [`sphere`] — discrete unit-sphere domains (icosphere grids with
//!   Voronoi quadrature weights, spherical interpolation);
//! * [`manifold`] — square-root ODFs, tangent vectors, exp/log maps,
//!   tangent-space Gaussian sampling and the weighted Karcher mean;
//! * [`diffeo`] — vector/momentum fields on a 3-D lattice, Gaussian
//!   smoothing kernels, flow integration, geodesic shooting and Jacobians;
//! * [`transport`] — the diffeomorphic group action on ODF fields
//!   (spatial warp, per-voxel reorientation, density rescaling);
//! * [`registration`] — LDDMM-ODF matching by gradient descent on the
//!   initial momentum, with an exact discrete adjoint gradient;
//! * [`atlas`] — the EM loop alternating per-subject registration,
//!   weighted Karcher averaging, variance update and atlas re-estimation;
//! * [`synth`] — synthetic cohort generation realizing the generative
//!   model (planted atlas, random momenta, tangent-space ODF noise);
//! * [`io`] — binary field containers (OFV/MOMV), run configuration,
//!   CSV diagnostics and SVG plots.
//!
//! All operations are deterministic: random sampling is seeded, and
//! parallel reductions use fixed-order summation so results do not depend
//! on the worker count.

pub mod atlas;
pub mod diffeo;
pub mod error;
pub mod io;
pub mod manifold;
mod parallel;
pub mod registration;
pub mod sphere;
pub mod synth;
pub mod transport;

pub use error::{Error, Result};
pub use sphere::SphereGrid;
