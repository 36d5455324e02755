//! Stationary Gaussian-process kernels on compact Lie groups and their
//! homogeneous spaces.
//!
//! The crate is organised bottom-up:
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`repr`] | signatures, root systems, Weyl dimensions, Laplace–Beltrami eigenvalues |
//! | [`groups`] | `SU(n)` / `SO(n)` elements, torus coordinates, Weyl characters, Haar sampling |
//! | [`spaces`] | spheres, projective spaces, quotients `G/H`, zonal functions, periodic summation |
//! | [`kernels`] | heat and Matérn spectral kernels |
//! | [`sampling`] | random-phase Fourier features, pathwise posteriors, Karhunen–Loève bases |
//! | [`gp`] | exact GP regression, marginal likelihood, hyperparameter fitting |
//!
//! ```
//! use liekernels::kernels::{build_kernel, SpectralDensity};
//! use liekernels::spaces::SpaceId;
//!
//! let space: SpaceId = "S2".parse().unwrap();
//! let k = build_kernel(&space, &SpectralDensity::heat(0.5, 1.0).unwrap(), 10).unwrap();
//! let x = liekernels::spaces::SpacePoint::vector(vec![0.0, 0.0, 1.0]);
//! assert!((k.value(&x, &x).unwrap() - 1.0).abs() < 1e-12);
//! ```

pub mod error;
pub mod gp;
pub mod groups;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod optimize;
pub mod repr;
pub mod rng;
pub mod sampling;
pub mod spaces;

pub use error::{Error, Result};
