//! Eigenvalue curves of Dirac operators on bounded domains with the
//! one-parameter family of boundary conditions
//! `phi = i (sinh tau - cosh tau beta)(alpha.nu) phi`, which is the MIT bag
//! condition at tau = 0.
//!
//! The ball is solved exactly channel by channel ([`ball_spectrum`]); smooth
//! star-shaped surfaces go through boundary layer operators ([`layerops`]),
//! Hardy projections ([`hardy`]) and a smallest-singular-value detector
//! ([`bie_spectrum`]). [`rayleigh`] measures the first-order coefficient of the
//! first eigenvalue near the spectral gap edge.
//!
//! Special functions and the ball solver are generic over [`Real`]; the
//! surface solvers work in `f64` and [`faer::c64`].

pub mod ball_spectrum;
pub mod bie_spectrum;
pub mod cli;
pub mod error;
pub mod halfint_bessel;
pub mod hardy;
pub mod layerops;
pub mod quadrature;
pub mod rayleigh;
pub mod real;
pub mod sphspinor;
pub mod surface;

pub use error::{Error, Result};
pub use real::Real;

/// Scalar of the surface solvers.
pub type Float = f64;
pub type Complex = faer::c64;
pub type Ball = ball_spectrum::BallModel<f64>;
pub type CurveSample = ball_spectrum::EigenCurveSample<f64>;
pub type HarmonicTable = sphspinor::RealHarmonics<f64>;
