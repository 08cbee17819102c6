//! CSV and metadata files written by a run.
//!
//! Floats are printed with 17 significant digits, so reading a file back
//! reproduces the in-memory values bit for bit.

use std::io::{BufRead, Write};

use crate::config::render;
use crate::error::{Error, Result};
use crate::lure::{Nonlinearity, ScalarNonlinearity, SimulationConfig, StepRecord, Trajectory, DIVERGENCE_BOUND};
use crate::numerics::Vector;
use crate::stability::{StabilityReport, SECTOR_TOL, ZETA1_TOL};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const STABILITY_FILE: &str = "stability.csv";
pub const META_FILE: &str = "run.meta";

const STABILITY_HEADER: &str =
    "k,alpha_cc,beta_cc,cc_pass,zeta1,zeta2,zeta3_min_eig,alpha_tc,beta_tc,tc_pass";

fn float(x: f64) -> String {
    format!("{:.16e}", x)
}

fn io_err(e: std::io::Error) -> Error {
    Error::InvalidArgument(format!("i/o: {e}"))
}

pub fn trajectory_header(outputs: usize, inputs: usize) -> String {
    let mut cols = vec!["k".to_string()];
    cols.extend((1..=outputs).map(|i| format!("y_{i}")));
    for name in ["u_req", "u", "v"] {
        cols.extend((1..=inputs).map(|i| format!("{name}_{i}")));
    }
    cols.push("theta_norm".into());
    cols.push("beta".into());
    cols.join(",")
}

pub fn write_trajectory<W: Write>(mut w: W, traj: &Trajectory) -> std::io::Result<()> {
    writeln!(w, "{}", trajectory_header(traj.outputs, traj.inputs))?;
    for r in &traj.records {
        let mut line = r.k.to_string();
        for v in [&r.y, &r.u_req, &r.u, &r.v] {
            for x in v.iter() {
                line.push(',');
                line.push_str(&float(*x));
            }
        }
        line.push(',');
        line.push_str(&float(r.theta_norm));
        line.push(',');
        line.push_str(&float(r.beta));
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("line {line}: bad number `{field}`")))
}

fn parse_usize(field: &str, line: usize) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("line {line}: bad integer `{field}`")))
}

fn parse_bool(field: &str, line: usize) -> Result<bool> {
    match field.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::InvalidArgument(format!("line {line}: bad flag `{field}`"))),
    }
}

/// Reads a trajectory file. `diverged_at` is not stored in the CSV and is
/// returned as `None`.
pub fn read_trajectory<R: BufRead>(r: R) -> Result<Trajectory> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty trajectory file".into()))?
        .map_err(io_err)?;
    let cols: Vec<&str> = header.split(',').collect();
    let outputs = cols.iter().filter(|c| c.starts_with("y_")).count();
    let inputs = cols.iter().filter(|c| c.starts_with("u_req_")).count();
    if header != trajectory_header(outputs, inputs) {
        return Err(Error::InvalidArgument(format!("unexpected trajectory header `{header}`")));
    }
    let width = cols.len();
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        let lineno = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(Error::InvalidArgument(format!(
                "line {lineno}: expected {width} fields, found {}",
                fields.len()
            )));
        }
        let nums = fields[1..]
            .iter()
            .map(|f| parse_f64(f, lineno))
            .collect::<Result<Vec<_>>>()?;
        let take = |from: usize, n: usize| Vector::from_column_slice(&nums[from..from + n]);
        records.push(StepRecord {
            k: parse_usize(fields[0], lineno)?,
            y: take(0, outputs),
            u_req: take(outputs, inputs),
            u: take(outputs + inputs, inputs),
            v: take(outputs + 2 * inputs, inputs),
            theta_norm: nums[outputs + 3 * inputs],
            beta: nums[outputs + 3 * inputs + 1],
        });
    }
    Ok(Trajectory {
        outputs,
        inputs,
        records,
        diverged_at: None,
    })
}

pub fn write_stability<W: Write>(mut w: W, reports: &[StabilityReport]) -> std::io::Result<()> {
    writeln!(w, "{STABILITY_HEADER}")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.k,
            float(r.alpha_cc),
            float(r.beta_cc),
            r.cc_pass,
            float(r.zeta1),
            r.zeta2,
            float(r.zeta3_min_eig),
            float(r.alpha_tc),
            float(r.beta_tc),
            r.tc_pass
        )?;
    }
    Ok(())
}

/// One row of `stability.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRow {
    pub k: usize,
    pub alpha_cc: f64,
    pub beta_cc: f64,
    pub cc_pass: bool,
    pub zeta1: f64,
    pub zeta2: usize,
    pub zeta3_min_eig: f64,
    pub alpha_tc: f64,
    pub beta_tc: f64,
    pub tc_pass: bool,
}

impl From<&StabilityReport> for StabilityRow {
    fn from(r: &StabilityReport) -> Self {
        StabilityRow {
            k: r.k,
            alpha_cc: r.alpha_cc,
            beta_cc: r.beta_cc,
            cc_pass: r.cc_pass,
            zeta1: r.zeta1,
            zeta2: r.zeta2,
            zeta3_min_eig: r.zeta3_min_eig,
            alpha_tc: r.alpha_tc,
            beta_tc: r.beta_tc,
            tc_pass: r.tc_pass,
        }
    }
}

pub fn read_stability<R: BufRead>(r: R) -> Result<Vec<StabilityRow>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty stability file".into()))?
        .map_err(io_err)?;
    if header != STABILITY_HEADER {
        return Err(Error::InvalidArgument(format!("unexpected stability header `{header}`")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        let n = i + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(Error::InvalidArgument(format!("line {n}: expected 10 fields")));
        }
        rows.push(StabilityRow {
            k: parse_usize(f[0], n)?,
            alpha_cc: parse_f64(f[1], n)?,
            beta_cc: parse_f64(f[2], n)?,
            cc_pass: parse_bool(f[3], n)?,
            zeta1: parse_f64(f[4], n)?,
            zeta2: parse_usize(f[5], n)?,
            zeta3_min_eig: parse_f64(f[6], n)?,
            alpha_tc: parse_f64(f[7], n)?,
            beta_tc: parse_f64(f[8], n)?,
            tc_pass: parse_bool(f[9], n)?,
        });
    }
    Ok(rows)
}

/// Run facts recorded next to the data files.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub mode: String,
    pub source: String,
    pub steps: usize,
    pub diverged_at: Option<usize>,
    /// Number of certificate rows, and how many have flags matching their scalars.
    pub reports: Option<(usize, usize)>,
}

fn piecewise_slopes(n: &Nonlinearity) -> Vec<(f64, f64)> {
    match n {
        Nonlinearity::Diagonal(chs) => chs
            .iter()
            .filter_map(|c| match c {
                ScalarNonlinearity::GaussianPlusPiecewise { s_l, s_h } => Some((*s_l, *s_h)),
                _ => None,
            })
            .collect(),
        Nonlinearity::Zero { .. } => Vec::new(),
    }
}

/// `run.meta`: the resolved configuration followed by a `meta.*` block.
pub fn render_meta(config: &SimulationConfig, summary: &RunSummary) -> String {
    let mut out = String::from("# lure-pcac run metadata\n");
    out.push_str(&render(config));
    if !out.ends_with('\n') {
        out.push('\n');
    }
    let mut kv = |k: &str, v: String| out.push_str(&format!("meta.{k} = {v}\n"));
    kv("version", env!("CARGO_PKG_VERSION").to_string());
    kv("mode", summary.mode.clone());
    kv("source", summary.source.clone());
    kv("k_engage", config.k_engage.to_string());
    kv("grid_size", config.analysis.grid_size.to_string());
    kv("zeta1_tol", format!("{ZETA1_TOL:e}"));
    kv("sector_tol", format!("{SECTOR_TOL:e}"));
    kv("divergence_bound", format!("{DIVERGENCE_BOUND:e}"));
    for (i, (s_l, s_h)) in piecewise_slopes(&config.nonlinearity).iter().enumerate() {
        kv(
            &format!("piecewise_slopes_{}", i + 1),
            format!("{s_l}, {s_h} (branch slopes have no upstream value; configurable)"),
        );
    }
    kv("steps", summary.steps.to_string());
    kv(
        "diverged_at",
        summary.diverged_at.map_or("none".to_string(), |k| k.to_string()),
    );
    if let Some((rows, consistent)) = summary.reports {
        kv("certificate_rows", rows.to_string());
        kv("certificate_flags_consistent", (rows == consistent).to_string());
    }
    out
}
