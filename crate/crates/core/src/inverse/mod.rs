//! Multiview recovery of per-vertex materials and shading normals.

pub mod cluster;
pub mod data;
pub mod kmeans;
pub mod lm;
pub mod losses;
pub mod optimize;
pub mod pipeline;
pub mod report;
pub mod types;

pub use cluster::{cluster_vertices, generate_virtuals, regress_cluster, ClusterModel};
pub use data::{intensity_scale, Sample, Thresholds, VertexData};
pub use losses::{loss_azimuth, loss_diffuse, loss_psi, loss_specular, solve_rho_d, VirtualObservation};
pub use optimize::{optimize_vertex, VertexOptions};
pub use pipeline::{run_pipeline, FrozenPositions, GeometryHook, InverseConfig, IterationLog, PipelineOutput};
pub use report::{truth_report, TruthReport, TruthSummary};
pub use types::{initial_params, Bounds, LossBreakdown, LossWeights, VertexEstimate, VertexFlags};
