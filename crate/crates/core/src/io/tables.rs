//! CSV tables: per-vertex parameters, per-iteration losses and the
//! recovered-versus-truth report.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::inverse::report::{TruthReport, TruthSummary};
use crate::inverse::{IterationLog, VertexEstimate, VertexFlags};
use crate::pbrdf::PbrdfParams;
use crate::polar::Vec3;
use crate::{Error, Result};

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(std::io::BufReader::new(file));
    Ok(r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub vertex: u32,
    pub eta: f64,
    pub rho_d_r: f64,
    pub rho_d_g: f64,
    pub rho_d_b: f64,
    pub rho_s: f64,
    pub sigma_s: f64,
    pub rho_ss_r: f64,
    pub rho_ss_g: f64,
    pub rho_ss_b: f64,
    pub sigma_ss: f64,
    pub normal_x: f64,
    pub normal_y: f64,
    pub normal_z: f64,
    pub flags: u32,
}

impl ParamRow {
    pub fn new(vertex: u32, e: &VertexEstimate) -> Self {
        let p = &e.params;
        ParamRow {
            vertex,
            eta: p.eta,
            rho_d_r: p.rho_d[0],
            rho_d_g: p.rho_d[1],
            rho_d_b: p.rho_d[2],
            rho_s: p.rho_s,
            sigma_s: p.sigma_s,
            rho_ss_r: p.rho_ss[0],
            rho_ss_g: p.rho_ss[1],
            rho_ss_b: p.rho_ss[2],
            sigma_ss: p.sigma_ss,
            normal_x: e.normal.x,
            normal_y: e.normal.y,
            normal_z: e.normal.z,
            flags: e.flags.bits(),
        }
    }

    pub fn params(&self) -> PbrdfParams {
        PbrdfParams {
            eta: self.eta,
            rho_d: [self.rho_d_r, self.rho_d_g, self.rho_d_b],
            rho_s: self.rho_s,
            sigma_s: self.sigma_s,
            rho_ss: [self.rho_ss_r, self.rho_ss_g, self.rho_ss_b],
            sigma_ss: self.sigma_ss,
        }
    }

    /// Estimate with the stored material, normal and flags; residuals are
    /// not part of the table.
    pub fn estimate(&self) -> VertexEstimate {
        // Stored normals are already unit length; keep them bit-exact.
        let mut e = VertexEstimate::new(self.params(), Vec3::z());
        e.normal = Vec3::new(self.normal_x, self.normal_y, self.normal_z);
        e.flags = VertexFlags::from_bits(self.flags);
        e
    }
}

fn param_rows(est: &[VertexEstimate]) -> Vec<ParamRow> {
    est.iter().enumerate().map(|(i, e)| ParamRow::new(i as u32, e)).collect()
}

pub fn write_params(path: &Path, est: &[VertexEstimate]) -> Result<()> {
    write_rows(path, &param_rows(est))
}

/// Parameter table as CSV bytes.
pub fn encode_params(est: &[VertexEstimate]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in param_rows(est) {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::format("parameter table", e.to_string()))
}

pub fn decode_params(bytes: &[u8]) -> Result<Vec<VertexEstimate>> {
    let mut r = csv::Reader::from_reader(bytes);
    let rows = r.deserialize().collect::<std::result::Result<Vec<ParamRow>, _>>()?;
    estimates_from_rows(&rows)
}

/// Read a parameter table; rows must list vertices `0..n` in order.
pub fn read_params(path: &Path) -> Result<Vec<VertexEstimate>> {
    estimates_from_rows(&read_rows(path)?)
}

fn estimates_from_rows(rows: &[ParamRow]) -> Result<Vec<VertexEstimate>> {
    if let Some((i, r)) = rows.iter().enumerate().find(|(i, r)| r.vertex as usize != *i) {
        return Err(Error::format("parameter table", format!("row {i} has vertex id {}", r.vertex)));
    }
    Ok(rows.iter().map(ParamRow::estimate).collect())
}

pub fn write_iteration_log(path: &Path, log: &[IterationLog]) -> Result<()> {
    write_rows(path, log)
}

pub fn read_iteration_log(path: &Path) -> Result<Vec<IterationLog>> {
    read_rows(path)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthCsvRow {
    pub vertex: u32,
    pub eta_true: f64,
    pub eta: f64,
    pub eta_rel_err: f64,
    pub rho_d_r_rel_err: f64,
    pub rho_d_g_rel_err: f64,
    pub rho_d_b_rel_err: f64,
    pub sigma_s_rel_err: f64,
    pub sigma_ss: f64,
    pub normal_err_deg: f64,
    pub flipped: bool,
}

pub fn write_truth_report(csv_path: &Path, summary_path: &Path, r: &TruthReport) -> Result<()> {
    let rows: Vec<TruthCsvRow> = r
        .rows
        .iter()
        .map(|t| TruthCsvRow {
            vertex: t.vertex,
            eta_true: t.eta_true,
            eta: t.eta,
            eta_rel_err: t.eta_rel_err,
            rho_d_r_rel_err: t.rho_d_rel_err[0],
            rho_d_g_rel_err: t.rho_d_rel_err[1],
            rho_d_b_rel_err: t.rho_d_rel_err[2],
            sigma_s_rel_err: t.sigma_s_rel_err,
            sigma_ss: t.sigma_ss,
            normal_err_deg: t.normal_err_deg,
            flipped: t.flipped,
        })
        .collect();
    write_rows(csv_path, &rows)?;
    std::fs::write(summary_path, summary_text(&r.summary)).map_err(|e| Error::io(summary_path, e))
}

pub fn summary_text(s: &TruthSummary) -> String {
    format!(
        "vertices                      {}\n\
         mean eta relative error       {:.4}%\n\
         per-vertex eta error (mean)   {:.4}%\n\
         diffuse albedo error (worst)  {:.4}%\n\
         sigma_s relative error (med)  {:.4}\n\
         sigma_ss (median)             {:.4}\n\
         normal error (median)         {:.3} deg\n\
         flip rate                     {:.2}%\n",
        s.vertices,
        100.0 * s.mean_eta_rel_err,
        100.0 * s.eta_rel_err_mean,
        100.0 * s.rho_d_rel_err_max_channel,
        s.sigma_s_rel_err_median,
        s.sigma_ss_median,
        s.normal_err_median_deg,
        100.0 * s.flip_rate,
    )
}
