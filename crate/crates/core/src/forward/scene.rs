use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pbrdf::PbrdfParams;
use crate::polar::Vec3;

/// Pinhole intrinsics, used only when emitting rasters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for Intrinsics {
    fn default() -> Self {
        Intrinsics::square(128, 40f64.to_radians())
    }
}

impl Intrinsics {
    pub fn square(size: u32, fov: f64) -> Self {
        let f = 0.5 * size as f64 / (0.5 * fov).tan();
        let c = 0.5 * size as f64;
        Intrinsics { fx: f, fy: f, cx: c, cy: c, width: size, height: size }
    }
}

/// Camera pose. `rotation` maps camera to world coordinates; the camera looks
/// along its local −z with +y up and +x right.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    pub intrinsics: Intrinsics,
}

impl ViewPose {
    pub fn look_at(eye: Vec3, target: Vec3, world_up: Vec3, intrinsics: Intrinsics) -> Result<Self> {
        let back = (eye - target).normalize();
        let right = world_up.cross(&back);
        if right.norm() < 1e-8 {
            return Err(Error::DegenerateFrame);
        }
        let right = right.normalize();
        let up = back.cross(&right);
        Ok(ViewPose {
            rotation: Matrix3::from_columns(&[right, up, back]),
            translation: eye,
            intrinsics,
        })
    }

    pub fn center(&self) -> Vec3 {
        self.translation
    }

    pub fn up(&self) -> Vec3 {
        self.rotation.column(1).into()
    }

    pub fn forward(&self) -> Vec3 {
        -Vec3::from(self.rotation.column(2))
    }

    pub fn to_world(&self, p_cam: &Vec3) -> Vec3 {
        self.rotation * p_cam + self.translation
    }

    pub fn to_camera(&self, p_world: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p_world - self.translation)
    }

    /// Pixel coordinates (column, row from the top) and depth along the
    /// viewing axis; `None` behind the camera.
    pub fn project(&self, p_world: &Vec3) -> Option<(f64, f64, f64)> {
        let c = self.to_camera(p_world);
        let depth = -c.z;
        if depth <= 1e-9 {
            return None;
        }
        let k = &self.intrinsics;
        Some((k.cx + k.fx * c.x / depth, k.cy - k.fy * c.y / depth, depth))
    }

    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax()
    }

    /// Same pose rotated about its viewing axis by `angle` (counter-clockwise
    /// as seen by the camera).
    pub fn rolled(&self, angle: f64) -> Self {
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::z()), angle);
        ViewPose { rotation: self.rotation * r.matrix(), ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vertex {
    pub position: Vec3,
    pub normal: Vec3,
    pub params: PbrdfParams,
}

/// Flash-to-camera offset used by default: 5 cm below the lens.
pub const DEFAULT_LIGHT_OFFSET: [f64; 3] = [0.0, -0.05, 0.0];

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub vertices: Vec<Vertex>,
    pub views: Vec<ViewPose>,
    /// Flash position in camera coordinates.
    pub light_offset: Vec3,
    /// Orientation of the flash polarizer's transmission axis in the camera
    /// image plane; 0 is horizontal.
    pub light_pol_angle: f64,
}

impl Scene {
    pub fn light_position(&self, view: &ViewPose) -> Vec3 {
        view.to_world(&self.light_offset)
    }

    /// World direction orthogonal to the flash polarizer's transmission axis.
    pub fn light_up(&self, view: &ViewPose) -> Vec3 {
        let (s, c) = self.light_pol_angle.sin_cos();
        view.rotation * Vec3::new(-s, c, 0.0)
    }

    /// Radius of the bounding sphere around the vertex centroid.
    pub fn extent(&self) -> f64 {
        let n = self.vertices.len().max(1) as f64;
        let c = self.vertices.iter().fold(Vec3::zeros(), |a, v| a + v.position) / n;
        self.vertices.iter().map(|v| (v.position - c).norm()).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        for v in &self.vertices {
            if !v.position.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite("vertex position"));
            }
            if (v.normal.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter { name: "normal length", value: v.normal.norm() });
            }
            v.params.validate()?;
        }
        for view in &self.views {
            let e = view.orthonormality_error();
            if !(e < 1e-10) {
                return Err(Error::InvalidParameter { name: "view rotation orthonormality", value: e });
            }
        }
        if !self.light_offset.iter().all(|x| x.is_finite()) || !self.light_pol_angle.is_finite() {
            return Err(Error::NonFinite("light"));
        }
        Ok(())
    }
}

/// Distribution of camera positions around the object.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewLayout {
    /// Fibonacci lattice over the full sphere, randomly rotated by the seed.
    #[default]
    Sphere,
    /// Same lattice restricted to the upper (+z) hemisphere.
    Hemisphere,
}

/// `n` nearly uniform unit vectors.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

pub fn random_rotation(rng: &mut impl Rng) -> Rotation3<f64> {
    let axis = crate::sampling::random_unit(rng);
    Rotation3::from_axis_angle(&Unit::new_normalize(axis), rng.random_range(0.0..2.0 * PI))
}

/// Camera poses on a sphere of radius `distance` around the origin.
pub fn make_views(n_views: usize, distance: f64, layout: ViewLayout, seed: u64) -> Vec<ViewPose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_u64);
    let dirs: Vec<Vec3> = match layout {
        ViewLayout::Sphere => {
            let rot = random_rotation(&mut rng);
            fibonacci_sphere(n_views).into_iter().map(|d| rot * d).collect()
        }
        ViewLayout::Hemisphere => {
            let spin = rng.random_range(0.0..2.0 * PI);
            let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), spin);
            fibonacci_sphere(2 * n_views).into_iter().take(n_views).map(|d| rot * d).collect()
        }
    };
    dirs.into_iter()
        .map(|d| {
            let up = if d.z.abs() > 0.99 { Vec3::x() } else { Vec3::z() };
            ViewPose::look_at(d * distance, Vec3::zeros(), up, Intrinsics::default())
                .expect("up vector chosen away from the viewing direction")
        })
        .collect()
}

/// Sphere of radius `radius` centered at the origin with Fibonacci-distributed
/// vertices and `n_views` cameras at `view_distance`.
pub fn make_synthetic_sphere(
    radius: f64,
    n_vertices: usize,
    params_fn: &dyn Fn(&Vec3) -> PbrdfParams,
    n_views: usize,
    view_distance: f64,
    seed: u64,
) -> Result<Scene> {
    make_synthetic_sphere_with(radius, n_vertices, params_fn, n_views, view_distance, ViewLayout::Sphere, seed)
}

pub fn make_synthetic_sphere_with(
    radius: f64,
    n_vertices: usize,
    params_fn: &dyn Fn(&Vec3) -> PbrdfParams,
    n_views: usize,
    view_distance: f64,
    layout: ViewLayout,
    seed: u64,
) -> Result<Scene> {
    if n_vertices < 100 {
        return Err(Error::Config(format!("sphere needs at least 100 vertices, got {n_vertices}")));
    }
    if n_views < 3 {
        return Err(Error::Config(format!("sphere needs at least 3 views, got {n_views}")));
    }
    if !(radius > 0.0) || !(view_distance > radius) {
        return Err(Error::Config(format!(
            "view distance {view_distance} must exceed radius {radius} > 0"
        )));
    }
    let vertices = fibonacci_sphere(n_vertices)
        .into_iter()
        .map(|n| Vertex { position: n * radius, normal: n, params: params_fn(&n) })
        .collect();
    Ok(Scene {
        vertices,
        views: make_views(n_views, view_distance, layout, seed),
        light_offset: Vec3::from(DEFAULT_LIGHT_OFFSET),
        light_pol_angle: 0.0,
    })
}
