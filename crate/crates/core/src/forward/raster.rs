//! Point-splatting rasterizer for per-view images.

use crate::forward::render::{FilterChannels, ObservationSet};
use crate::forward::scene::{Scene, ViewPose};
use crate::polar::Vec3;

/// Float image, rows stored top to bottom.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// 1 (gray) or 3 (RGB).
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Image { width, height, channels, data: vec![0.0; width * height * channels] }
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Paste `other` with its top-left corner at `(x0, y0)`.
    pub fn blit(&mut self, other: &Image, x0: usize, y0: usize) {
        assert_eq!(self.channels, other.channels);
        for y in 0..other.height {
            for x in 0..other.width {
                self.pixel_mut(x0 + x, y0 + y).copy_from_slice(other.pixel(x, y));
            }
        }
    }
}

/// Radius, in vertex spacings, of the patch treated as the same surface.
const NEIGHBORHOOD: f64 = 4.0;

/// Per-pixel nearest depth plus the id of the vertex that wrote it.
#[derive(Clone, Debug)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub owner: Vec<u32>,
    pub radius: i64,
    /// Mean vertex spacing in world units.
    pub spacing: f64,
}

impl DepthMap {
    /// A point is visible when its pixel holds no nearer splat (beyond `tol`),
    /// or when the nearer splat belongs to a vertex within a few spacings of
    /// it. The second clause accounts for overlapping splats of the same
    /// surface patch, whose depth differences grow steeply near silhouettes.
    pub fn visible(&self, view: &ViewPose, p: &Vec3, tol: f64, positions: &[Vec3]) -> bool {
        match view.project(p) {
            Some((u, v, d)) => {
                let (x, y) = (u.floor() as i64, v.floor() as i64);
                if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
                    return false;
                }
                let i = y as usize * self.width + x as usize;
                d <= self.depth[i] + tol
                    || positions
                        .get(self.owner[i] as usize)
                        .is_some_and(|q| (q - p).norm() <= NEIGHBORHOOD * self.spacing)
            }
            None => false,
        }
    }
}

fn vertex_spacing(scene: &Scene) -> f64 {
    let n = scene.vertices.len().max(1) as f64;
    scene.extent() * (4.0 * std::f64::consts::PI / n).sqrt()
}

/// Splat radius in pixels for a vertex at `depth`.
fn splat_radius(spacing: f64, view: &ViewPose, depth: f64) -> i64 {
    let px = view.intrinsics.fx * spacing / depth;
    (0.6 * px).ceil().max(1.0) as i64
}

fn splat(view: &ViewPose, scene: &Scene, items: impl Iterator<Item = (u32, Vec3)>) -> DepthMap {
    let k = &view.intrinsics;
    let (w, h) = (k.width as usize, k.height as usize);
    let spacing = vertex_spacing(scene);
    let mut map = DepthMap {
        width: w,
        height: h,
        depth: vec![f64::INFINITY; w * h],
        owner: vec![u32::MAX; w * h],
        radius: 1,
        spacing,
    };
    for (id, p) in items {
        let Some((u, v, d)) = view.project(&p) else { continue };
        let r = splat_radius(spacing, view, d);
        map.radius = map.radius.max(r);
        let (cx, cy) = (u.floor() as i64, v.floor() as i64);
        for y in (cy - r + 1).max(0)..(cy + r).min(h as i64) {
            for x in (cx - r + 1).max(0)..(cx + r).min(w as i64) {
                let i = y as usize * w + x as usize;
                if d < map.depth[i] {
                    map.depth[i] = d;
                    map.owner[i] = id;
                }
            }
        }
    }
    map
}

/// Depth buffer of every vertex facing view `view_id`.
pub fn depth_buffer(scene: &Scene, view_id: usize) -> DepthMap {
    let view = &scene.views[view_id];
    let c = view.center();
    let items = scene
        .vertices
        .iter()
        .enumerate()
        .filter(|(_, v)| v.normal.dot(&(c - v.position)) > 0.0)
        .map(|(i, v)| (i as u32, v.position));
    splat(view, scene, items)
}

/// Rasterize a per-observation RGB (or gray) quantity for one view.
pub fn rasterize(scene: &Scene, obs: &ObservationSet, view_id: usize, channels: usize, value: impl Fn(usize) -> Vec<f32>) -> Image {
    let view = &scene.views[view_id];
    let list: Vec<(usize, u32)> = obs
        .all()
        .iter()
        .enumerate()
        .filter(|(_, o)| o.view_id as usize == view_id)
        .map(|(i, o)| (i, o.vertex_id))
        .collect();
    let map = splat(view, scene, list.iter().enumerate().map(|(k, &(_, v))| (k as u32, scene.vertices[v as usize].position)));
    let mut img = Image::new(map.width, map.height, channels);
    let cache: Vec<Vec<f32>> = list.iter().map(|&(i, _)| value(i)).collect();
    for (p, &owner) in map.owner.iter().enumerate() {
        if owner != u32::MAX {
            let (x, y) = (p % map.width, p / map.width);
            img.pixel_mut(x, y).copy_from_slice(&cache[owner as usize]);
        }
    }
    img
}

/// The four analyzer-channel images of one view, in 0/45/90/135 order.
pub fn channel_images(scene: &Scene, obs: &ObservationSet, view_id: usize) -> [Image; 4] {
    let all = obs.all();
    let pick = |f: fn(&FilterChannels) -> [f64; 3]| {
        rasterize(scene, obs, view_id, 3, |i| f(&all[i].channels).iter().map(|&v| v as f32).collect())
    };
    [pick(|c| c.i0), pick(|c| c.i45), pick(|c| c.i90), pick(|c| c.i135)]
}
