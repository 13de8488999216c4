//! Quantiles, depth contours and trimming for directional data on the unit
//! sphere.
//!
//! Rotationally symmetric data are handled with projection quantiles
//! `c_tau` of `X . mu` and the angular Mahalanobis depth. Elliptically
//! symmetric data are first mapped to rotational symmetry by the spherical
//! Mahalanobis transformation
//!
//! ```text
//! G(y) = Exp_mu( Sigma*^{-1/2} Log_mu(y) )
//! ```
//!
//! built from the tangent-space covariance at the Fisher spherical median;
//! quantiles and depths of the transformed data give elliptical contours,
//! their intrinsic semi-axes and the elliptical Mahalanobis depth.

pub mod cli;
pub mod depth;
pub mod distributions;
pub mod error;
pub mod estimation;
pub mod hypothesis;
pub mod io;
pub mod linalg;
pub mod quadrature;
pub mod replication;
pub mod rng;
pub mod sample;
pub mod sphere;

pub use error::{Error, Result};
pub use sample::DirectionalSample;
pub use sphere::{TangentBasis, TangentVector, UnitVector};
