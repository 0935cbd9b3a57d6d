//! Versioned binary observation bundle.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset  size  field
//!      0     8  magic "PSVBNDL\0"
//!      8     4  version (u32)
//!     12     4  vertex count (u32)
//!     16     4  view count (u32)
//!     20     8  observation count (u64)
//!     28     -  observation records, 209 bytes each:
//!               vertex id u32, view id u32,
//!               I0, I45, I90, I135 as RGB f64 triples (12 f64),
//!               ωi (3 f64), ωo (3 f64), flash distance (f64),
//!               camera up (3 f64), flash up (3 f64), visible (u8)
//! ```
//!
//! Records are written grouped by vertex and sorted by view.

use std::path::Path;

use crate::forward::{FilterChannels, ObservationSet, VertexObservation};
use crate::polar::Vec3;
use crate::{Error, Result};

pub const BUNDLE_MAGIC: [u8; 8] = *b"PSVBNDL\0";
pub const BUNDLE_VERSION: u32 = 1;
const HEADER_LEN: usize = 28;
pub const RECORD_LEN: usize = 4 + 4 + 8 * (12 + 3 + 3 + 1 + 3 + 3) + 1;

fn put_vec(out: &mut Vec<u8>, v: &Vec3) {
    for x in v.iter() {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn encode_bundle(obs: &ObservationSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * obs.len());
    out.extend_from_slice(&BUNDLE_MAGIC);
    out.extend_from_slice(&BUNDLE_VERSION.to_le_bytes());
    out.extend_from_slice(&(obs.n_vertices as u32).to_le_bytes());
    out.extend_from_slice(&(obs.n_views as u32).to_le_bytes());
    out.extend_from_slice(&(obs.len() as u64).to_le_bytes());
    for o in obs.all() {
        out.extend_from_slice(&o.vertex_id.to_le_bytes());
        out.extend_from_slice(&o.view_id.to_le_bytes());
        let c = &o.channels;
        for rgb in [c.i0, c.i45, c.i90, c.i135] {
            for x in rgb {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        put_vec(&mut out, &o.omega_i);
        put_vec(&mut out, &o.omega_o);
        out.extend_from_slice(&o.distance.to_le_bytes());
        put_vec(&mut out, &o.cam_up);
        put_vec(&mut out, &o.light_up);
        out.push(o.visible as u8);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let b = self.bytes[self.at..self.at + N].try_into().unwrap();
        self.at += N;
        b
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }
    fn rgb(&mut self) -> [f64; 3] {
        [self.f64(), self.f64(), self.f64()]
    }
    fn vec3(&mut self) -> Vec3 {
        Vec3::new(self.f64(), self.f64(), self.f64())
    }
}

pub fn decode_bundle(bytes: &[u8]) -> Result<ObservationSet> {
    if bytes.len() < HEADER_LEN || bytes[..8] != BUNDLE_MAGIC {
        return Err(Error::format("observation bundle", "missing magic number"));
    }
    let mut r = Reader { bytes, at: 8 };
    let version = r.u32();
    if version != BUNDLE_VERSION {
        return Err(Error::VersionMismatch { expected: BUNDLE_VERSION, found: version });
    }
    let n_vertices = r.u32() as usize;
    let n_views = r.u32() as usize;
    let n = u64::from_le_bytes(r.take());
    let expected = (n as u128) * RECORD_LEN as u128 + HEADER_LEN as u128;
    if bytes.len() as u128 != expected {
        return Err(Error::format(
            "observation bundle",
            format!("{n} records need {expected} bytes, file has {}", bytes.len()),
        ));
    }
    let mut obs = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let vertex_id = r.u32();
        let view_id = r.u32();
        let channels = FilterChannels { i0: r.rgb(), i45: r.rgb(), i90: r.rgb(), i135: r.rgb() };
        let omega_i = r.vec3();
        let omega_o = r.vec3();
        let distance = r.f64();
        let cam_up = r.vec3();
        let light_up = r.vec3();
        let visible = match r.take::<1>()[0] {
            0 => false,
            1 => true,
            b => return Err(Error::format("observation bundle", format!("visibility byte {b}"))),
        };
        obs.push(VertexObservation { vertex_id, view_id, channels, omega_i, omega_o, distance, cam_up, light_up, visible });
    }
    ObservationSet::new(n_vertices, n_views, obs)
}

pub fn write_bundle(path: &Path, obs: &ObservationSet) -> Result<()> {
    std::fs::write(path, encode_bundle(obs)).map_err(|e| Error::io(path, e))
}

pub fn read_bundle(path: &Path) -> Result<ObservationSet> {
    decode_bundle(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
