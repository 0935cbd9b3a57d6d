//! File formats, run configuration and visualizations.

pub mod bundle;
pub mod config;
pub mod pfm;
pub mod scene_doc;
pub mod tables;
pub mod visualize;

pub use bundle::{decode_bundle, encode_bundle, read_bundle, write_bundle, BUNDLE_VERSION};
pub use config::{read_run_config, RunConfig, Seeds};
pub use pfm::{decode_pfm, encode_pfm, read_pfm, write_pfm};
pub use scene_doc::{read_scene_document, write_scene_document, SceneDocument, SphereGenerator, SCENE_SCHEMA_VERSION};
pub use tables::{decode_params, encode_params, read_iteration_log, read_params, write_iteration_log, write_params, write_truth_report};
