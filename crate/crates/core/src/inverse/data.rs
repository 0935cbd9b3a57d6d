//! Per-vertex sample buffers consumed by the losses.

use crate::forward::{ObservationSet, VertexObservation};
use crate::observe::{decompose, mean3, PolarObservables, DARK_THRESHOLD_REL, GAMMA_FLOOR_REL};
use crate::polar::{LocalFrame, Vec3};
use crate::Result;

/// One view of one vertex, in normalized intensity units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub view_id: u32,
    pub omega_i: [f64; 3],
    pub omega_o: [f64; 3],
    pub half: [f64; 3],
    /// Exitant polarization frame axes.
    pub x_o: [f64; 3],
    pub y_o: [f64; 3],
    /// Incident polarization frame axes.
    pub x_i: [f64; 3],
    pub y_i: [f64; 3],
    pub inv_d2: f64,
    /// `cos θd = ωi·h`.
    pub cos_d: f64,
    pub obs: PolarObservables,
    /// View weight `w_v`.
    pub weight: f64,
}

/// Absolute darkness and `Γ` thresholds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub dark: f64,
    pub gamma_floor: f64,
}

impl Thresholds {
    /// Thresholds relative to the brightest mean `I^d` of the capture.
    pub fn relative_to(max_i_d: f64) -> Self {
        Thresholds { dark: DARK_THRESHOLD_REL * max_i_d, gamma_floor: GAMMA_FLOOR_REL * max_i_d }
    }
}

/// Power of two that brings the brightest mean `I^d` into `[0.5, 1)`.
///
/// A power of two keeps normalization exact, so scaling every input by
/// a power of two leaves the normalized problem bit-identical.
pub fn intensity_scale(obs: &ObservationSet) -> f64 {
    let max = obs.all().iter().map(|o| mean3(&decompose(&o.channels).i_d)).fold(0.0, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return 1.0;
    }
    let e = max.log2().floor() as i32 + 1;
    2f64.powi(e)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VertexData {
    pub samples: Vec<Sample>,
}

impl VertexData {
    /// Build the samples of one vertex. `scale` divides every intensity;
    /// `predicted_s`, when given, holds the predicted specular plus single
    /// scattering `I^s` (normalized units) per observation, in input order.
    pub fn new(
        obs: &[VertexObservation],
        scale: f64,
        predicted_s: Option<&[[f64; 3]]>,
        th: Thresholds,
    ) -> Result<Self> {
        let k = obs.len().max(1) as f64;
        let mut samples = Vec::with_capacity(obs.len());
        for (j, o) in obs.iter().enumerate() {
            let exitant = LocalFrame::aligned(&o.omega_o, &o.cam_up)?;
            let incident = LocalFrame::aligned(&-o.omega_i, &o.light_up)?;
            let mut d = decompose(&o.channels.scale(1.0 / scale));
            let i_beta = match predicted_s {
                Some(p) => std::array::from_fn(|c| d.i_s[c] - p[j][c]),
                None => d.i_s,
            };
            for v in d.i_d.iter_mut().chain(d.i_alpha.iter_mut()).chain(d.i_s.iter_mut()) {
                if !v.is_finite() {
                    *v = 0.0;
                }
            }
            let h: Vec3 = (o.omega_i + o.omega_o).normalize();
            samples.push(Sample {
                view_id: o.view_id,
                omega_i: o.omega_i.into(),
                omega_o: o.omega_o.into(),
                half: h.into(),
                x_o: exitant.x.into(),
                y_o: exitant.y.into(),
                x_i: incident.x.into(),
                y_i: incident.y.into(),
                inv_d2: 1.0 / (o.distance * o.distance),
                cos_d: o.omega_i.dot(&h).clamp(0.0, 1.0),
                obs: PolarObservables::with_beta(&d, i_beta, th.dark, th.gamma_floor),
                weight: 1.0 / k,
            });
        }
        // Reduction order follows geometry rather than view numbering.
        samples.sort_by(|a, b| {
            a.omega_o
                .iter()
                .zip(&b.omega_o)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Ok(VertexData { samples })
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn reliable_dop(&self) -> usize {
        self.samples.iter().filter(|s| s.obs.dop_reliable).count()
    }
}
