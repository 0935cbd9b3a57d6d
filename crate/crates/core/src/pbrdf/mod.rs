//! Polarimetric BRDF: diffuse, specular and single-scattering lobes.

pub mod lobes;
pub mod microfacet;
pub mod params;
pub mod physical;

pub use lobes::{
    coaxial_pbrdf, diffuse_lobe, pbrdf_eval, single_scattering_practical, specular_lobe, RgbMueller,
};
pub use microfacet::{ggx_ndf, smith_g};
pub use params::{PbrdfParams, PhysicalSsParams};
pub use physical::{single_scattering_physical, PhysicalSsOutput};
