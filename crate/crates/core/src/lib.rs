//! Polarimetric SVBRDF modelling and sparse-ellipsometry inverse rendering.
//!
//! The crate is organised bottom-up:
//!
//! * [`polar`] holds Stokes/Mueller algebra, Fresnel terms and the local
//!   polarization frames every other module builds on.
//! * [`pbrdf`] evaluates the diffuse, specular and single-scattering Mueller
//!   lobes, both as explicit rotation/Fresnel chains and in closed form, plus
//!   the near-coaxial simplification.
//! * [`forward`] renders four-channel linear-polarization observations of a
//!   scene lit by a polarized flash mounted next to the camera.
//! * [`observe`] turns those channels into the diffuse/specular observables
//!   consumed by the optimizer.
//! * [`inverse`] recovers per-vertex material parameters and shading normals,
//!   including cluster-based specular augmentation.
//! * [`io`] provides scene documents, observation bundles, float rasters,
//!   CSV reports and visualizations.
//! * [`validation`] runs the closed-loop acceptance checks.

pub mod error;
pub mod exec;
pub mod forward;
pub mod inverse;
pub mod io;
pub mod observe;
pub mod pbrdf;
pub mod polar;
pub mod real;
pub mod sampling;
pub mod validation;

pub use error::{Error, Result};
pub use pbrdf::PbrdfParams;
pub use polar::{MuellerMatrix, StokesVector, Vec3};
