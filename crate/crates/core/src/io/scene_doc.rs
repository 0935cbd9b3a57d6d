//! JSON scene documents.
//!
//! A document either lists vertices and views explicitly or carries a
//! `generator` block from which a synthetic sphere is rebuilt. Vertex
//! materials are given inline (`params`) or by index into `materials`.

use std::path::Path;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::forward::scene::{make_synthetic_sphere_with, DEFAULT_LIGHT_OFFSET};
use crate::forward::{Intrinsics, Scene, Vertex, ViewLayout, ViewPose};
use crate::pbrdf::PbrdfParams;
use crate::polar::Vec3;
use crate::{Error, Result};

pub const SCENE_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<SphereGenerator>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub materials: Vec<PbrdfParams>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vertices: Vec<VertexDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub views: Vec<ViewDoc>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereGenerator {
    pub radius: f64,
    pub vertices: usize,
    pub views: usize,
    pub view_distance: f64,
    #[serde(default)]
    pub layout: ViewLayout,
    pub seed: u64,
    pub material: PbrdfParams,
    #[serde(default = "default_offset")]
    pub flash_offset: [f64; 3],
    #[serde(default)]
    pub polarizer_angle: f64,
}

fn default_offset() -> [f64; 3] {
    DEFAULT_LIGHT_OFFSET
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexDoc {
    pub position: [f64; 3],
    pub normal: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<PbrdfParams>,
    /// Index into the document's `materials`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewDoc {
    /// Camera-to-world rotation, row major.
    pub rotation: [[f64; 3]; 3],
    pub position: [f64; 3],
    pub intrinsics: Intrinsics,
    /// Flash position in camera coordinates.
    pub flash_offset: [f64; 3],
    /// Flash polarizer angle in the image plane, radians.
    pub polarizer_angle: f64,
}

impl SceneDocument {
    pub fn from_generator(g: SphereGenerator) -> Self {
        SceneDocument { schema_version: SCENE_SCHEMA_VERSION, generator: Some(g), materials: vec![], vertices: vec![], views: vec![] }
    }

    /// Explicit document of `scene`, with one inline material per vertex.
    pub fn from_scene(scene: &Scene) -> Self {
        let vertices = scene
            .vertices
            .iter()
            .map(|v| VertexDoc { position: v.position.into(), normal: v.normal.into(), params: Some(v.params), material: None })
            .collect();
        let views = scene
            .views
            .iter()
            .map(|v| {
                let m = v.rotation;
                ViewDoc {
                    rotation: std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])),
                    position: v.translation.into(),
                    intrinsics: v.intrinsics,
                    flash_offset: scene.light_offset.into(),
                    polarizer_angle: scene.light_pol_angle,
                }
            })
            .collect();
        SceneDocument { schema_version: SCENE_SCHEMA_VERSION, generator: None, materials: vec![], vertices, views }
    }

    pub fn to_scene(&self) -> Result<Scene> {
        if self.schema_version != SCENE_SCHEMA_VERSION {
            return Err(Error::VersionMismatch { expected: SCENE_SCHEMA_VERSION, found: self.schema_version });
        }
        let scene = match (&self.generator, self.vertices.is_empty() && self.views.is_empty()) {
            (Some(g), true) => {
                let mut s = make_synthetic_sphere_with(g.radius, g.vertices, &|_| g.material, g.views, g.view_distance, g.layout, g.seed)?;
                s.light_offset = Vec3::from(g.flash_offset);
                s.light_pol_angle = g.polarizer_angle;
                s
            }
            (None, true) => return Err(Error::Config("scene document has neither vertices nor a generator".into())),
            _ => self.explicit_scene()?,
        };
        scene.validate()?;
        Ok(scene)
    }

    fn explicit_scene(&self) -> Result<Scene> {
        let vertices = self
            .vertices
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let params = match (v.params, v.material) {
                    (Some(p), None) => p,
                    (None, Some(k)) => *self.materials.get(k).ok_or_else(|| {
                        Error::Config(format!("vertices[{i}]: material {k} out of range ({} materials)", self.materials.len()))
                    })?,
                    _ => return Err(Error::Config(format!("vertices[{i}]: give exactly one of `params` and `material`"))),
                };
                Ok(Vertex { position: v.position.into(), normal: v.normal.into(), params })
            })
            .collect::<Result<Vec<_>>>()?;
        let first = self.views.first().ok_or_else(|| Error::Config("scene document has no views".into()))?;
        // The flash is rigidly mounted on the camera.
        if let Some(i) = self
            .views
            .iter()
            .position(|v| v.flash_offset != first.flash_offset || v.polarizer_angle != first.polarizer_angle)
        {
            return Err(Error::Config(format!("views[{i}]: flash offset and polarizer angle must match views[0]")));
        }
        let views = self
            .views
            .iter()
            .map(|v| ViewPose {
                rotation: Matrix3::from_fn(|r, c| v.rotation[r][c]),
                translation: v.position.into(),
                intrinsics: v.intrinsics,
            })
            .collect();
        Ok(Scene { vertices, views, light_offset: first.flash_offset.into(), light_pol_angle: first.polarizer_angle })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn read_scene_document(path: &Path) -> Result<SceneDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format("scene document", format!("{}: {e}", path.display())))
}

pub fn write_scene_document(path: &Path, doc: &SceneDocument) -> Result<()> {
    std::fs::write(path, doc.to_json()?).map_err(|e| Error::io(path, e))
}
