//! False-color renderings of polarization images, Mueller matrices and
//! recovered parameter maps.

use crate::forward::raster::rasterize;
use crate::forward::{shade_vertex, ModelKind, ObservationSet, Scene};
use crate::forward::Image;
use crate::inverse::VertexEstimate;
use crate::pbrdf::PbrdfParams;
use crate::Result;

/// Display gain of Mueller element `(r, c)`.
pub fn mueller_gain(r: usize, c: usize) -> f32 {
    match (r, c) {
        (0, 0) | (3, 3) => 1.0,
        (1, 1) | (2, 2) => 4.0,
        _ => 10.0,
    }
}

pub const MUELLER_LEGEND: &str = "\
Mueller matrix grid, one panel per element m[r][c] (row r top to bottom,
column c left to right), each panel the rasterized view of that element.
Values are the positive part of the pBRDF Mueller matrix scaled by the
flash shading factor cos(theta_i)/d^2, per RGB channel.
Display gains: m[0][0] and m[3][3] x1, m[1][1] and m[2][2] x4,
all off-diagonal elements x10.
";

/// Per-pixel Stokes images `(s0, s1, s2)` from the analyzer images in
/// 0/45/90/135 order.
pub fn stokes_images(ch: &[Image; 4]) -> [Image; 3] {
    let (w, h, c) = (ch[0].width, ch[0].height, ch[0].channels);
    let mut out = [Image::new(w, h, c), Image::new(w, h, c), Image::new(w, h, c)];
    for i in 0..ch[0].data.len() {
        let (i0, i45, i90, i135) = (ch[0].data[i], ch[1].data[i], ch[2].data[i], ch[3].data[i]);
        out[0].data[i] = i0 + i90;
        out[1].data[i] = i0 - i90;
        out[2].data[i] = i45 - i135;
    }
    out
}

/// Channel-averaged Stokes components of one pixel.
fn mean_stokes(s: &[Image; 3], px: usize) -> [f64; 3] {
    let c = s[0].channels;
    std::array::from_fn(|k| s[k].data[px * c..(px + 1) * c].iter().map(|&v| v as f64).sum::<f64>() / c as f64)
}

/// Degree of linear polarization in `[0, 1]`; zero where nothing is seen.
pub fn dop_image(ch: &[Image; 4]) -> Image {
    let s = stokes_images(ch);
    let mut out = Image::new(s[0].width, s[0].height, 1);
    for (px, v) in out.data.iter_mut().enumerate() {
        let [s0, s1, s2] = mean_stokes(&s, px);
        *v = if s0 > 0.0 { (s1.hypot(s2) / s0).min(1.0) as f32 } else { 0.0 };
    }
    out
}

/// Angle of linear polarization in `[0, π)`, plus a coverage mask.
pub fn aolp_image(ch: &[Image; 4]) -> (Image, Vec<bool>) {
    let s = stokes_images(ch);
    let mut out = Image::new(s[0].width, s[0].height, 1);
    let mut mask = vec![false; out.data.len()];
    for (px, v) in out.data.iter_mut().enumerate() {
        let [s0, s1, s2] = mean_stokes(&s, px);
        if s0 > 0.0 {
            *v = (0.5 * s2.atan2(s1)).rem_euclid(std::f64::consts::PI) as f32;
            mask[px] = true;
        }
    }
    (out, mask)
}

/// Black, red, yellow, white ramp over `[lo, hi]`.
pub fn heat_color(t: f64) -> [f32; 3] {
    let t = t.clamp(0.0, 1.0) as f32;
    [(3.0 * t).min(1.0), (3.0 * t - 1.0).clamp(0.0, 1.0), (3.0 * t - 2.0).clamp(0.0, 1.0)]
}

pub fn heat_map(img: &Image, lo: f64, hi: f64) -> Image {
    assert_eq!(img.channels, 1);
    let mut out = Image::new(img.width, img.height, 3);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    for (px, &v) in img.data.iter().enumerate() {
        out.data[3 * px..3 * px + 3].copy_from_slice(&heat_color((v as f64 - lo) / span));
    }
    out
}

/// Fully saturated color of hue `h` turns (`0` and `1` are red).
pub fn hue_color(h: f64) -> [f32; 3] {
    let h6 = 6.0 * h.rem_euclid(1.0);
    let f = |n: f64| {
        let k = (n + h6) % 6.0;
        (1.0 - (k.min(4.0 - k).clamp(0.0, 1.0))) as f32
    };
    [f(5.0), f(3.0), f(1.0)]
}

/// AoLP as a cyclic hue over `[0, π)`; uncovered pixels stay black.
pub fn aolp_hue_map(aolp: &Image, mask: &[bool]) -> Image {
    let mut out = Image::new(aolp.width, aolp.height, 3);
    for (px, &a) in aolp.data.iter().enumerate() {
        if mask[px] {
            out.data[3 * px..3 * px + 3].copy_from_slice(&hue_color(a as f64 / std::f64::consts::PI));
        }
    }
    out
}

/// 4×4 grid of Mueller element panels of one view. `params` replaces the
/// scene materials when given.
pub fn mueller_grid(
    scene: &Scene,
    obs: &ObservationSet,
    view_id: usize,
    params: Option<&[PbrdfParams]>,
    model: ModelKind,
) -> Result<Image> {
    let view = &scene.views[view_id];
    let all = obs.all();
    let mut cache = Vec::with_capacity(all.len());
    for o in all {
        let m = if o.view_id as usize == view_id {
            let mut vtx = scene.vertices[o.vertex_id as usize];
            if let Some(p) = params {
                vtx.params = p[o.vertex_id as usize];
            }
            shade_vertex(&vtx, view, scene, model)?.map(|s| s.mueller.map(|m| m.scale(s.shading)))
        } else {
            None
        };
        cache.push(m);
    }
    let (w, h) = (view.intrinsics.width as usize, view.intrinsics.height as usize);
    let mut grid = Image::new(4 * w, 4 * h, 3);
    for r in 0..4 {
        for c in 0..4 {
            let gain = mueller_gain(r, c);
            let panel = rasterize(scene, obs, view_id, 3, |i| match &cache[i] {
                Some(m) => m.iter().map(|mm| (mm.get(r, c) as f32 * gain).max(0.0)).collect(),
                None => vec![0.0; 3],
            });
            grid.blit(&panel, c * w, r * h);
        }
    }
    Ok(grid)
}

/// Named false-color maps of recovered parameters in one view.
pub fn parameter_maps(scene: &Scene, obs: &ObservationSet, view_id: usize, est: &[VertexEstimate]) -> Vec<(&'static str, Image)> {
    let all = obs.all();
    let p = |i: usize| &est[all[i].vertex_id as usize].params;
    let scalar = |f: &dyn Fn(&PbrdfParams) -> f64| rasterize(scene, obs, view_id, 1, |i| vec![f(p(i)) as f32]);
    let rgb = |f: &dyn Fn(&PbrdfParams) -> [f64; 3]| rasterize(scene, obs, view_id, 3, |i| f(p(i)).iter().map(|&v| v as f32).collect());
    vec![
        ("eta", heat_map(&scalar(&|p| p.eta), 1.0, 2.0)),
        ("rho_d", rgb(&|p| p.rho_d)),
        ("rho_ss", rgb(&|p| p.rho_ss)),
        ("rho_s", heat_map(&scalar(&|p| p.rho_s), 0.0, 1.0)),
        ("sigma_s", heat_map(&scalar(&|p| p.sigma_s), 0.0, 1.0)),
        ("sigma_ss", heat_map(&scalar(&|p| p.sigma_ss), 0.0, 1.0)),
    ]
}
