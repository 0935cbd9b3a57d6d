//! Near-coaxial polarimetric flash renderer.

pub mod raster;
pub mod render;
pub mod scene;

pub use raster::{channel_images, Image};
pub use render::{
    apply_flash, render_views, shade_vertex, stokes_to_filter_channels, FilterChannels, ModelKind, NoiseSpec,
    ObservationSet, RenderConfig, VertexObservation, Visibility,
};
pub use scene::{make_synthetic_sphere, make_synthetic_sphere_with, Intrinsics, Scene, Vertex, ViewLayout, ViewPose};
