//! File formats for grids, sinograms, observation sets and risk tables.
//!
//! Numbers are written in Rust's shortest round-trip form, so reading a
//! file back yields bitwise-identical values and identical inputs give
//! identical bytes.

use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{ErtError, Result};
use crate::ert::Ray;
use crate::model::{ImageGrid, Sinogram};
use crate::risk::RiskRow;
use crate::stochastic::{NoiseModel, ObservationSet};

const GRID_MAGIC: &str = "ERTGRID";
const GRID_BINARY_MAGIC: &[u8; 8] = b"ERTGRIDB";
const SINO_MAGIC: &str = "ERTSINO";

fn parse_err(what: &str, detail: impl std::fmt::Display) -> ErtError {
    ErtError::Parse(format!("{what}: {detail}"))
}

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn parse_f64(token: &str, what: &str) -> Result<f64> {
    token.parse::<f64>().map_err(|e| parse_err(what, format!("bad number {token:?}: {e}")))
}

fn write_rows(out: &mut String, values: &[f64], width: usize) {
    for row in values.chunks(width) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
}

/// Text grid: `ERTGRID v1 <n_side>` then one line per row.
pub fn grid_to_text(grid: &ImageGrid) -> String {
    let mut out = format!("{GRID_MAGIC} v1 {}\n", grid.n_side());
    write_rows(&mut out, grid.values(), grid.n_side());
    out
}

/// Binary grid: `ERTGRIDB`, `n_side` as little-endian u64, then the values
/// as little-endian f64.
pub fn grid_to_binary(grid: &ImageGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * grid.values().len());
    out.extend_from_slice(GRID_BINARY_MAGIC);
    out.extend_from_slice(&(grid.n_side() as u64).to_le_bytes());
    for v in grid.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses either grid encoding.
pub fn grid_from_bytes(bytes: &[u8]) -> Result<ImageGrid> {
    if let Some(rest) = bytes.strip_prefix(GRID_BINARY_MAGIC.as_slice()) {
        if rest.len() < 8 {
            return Err(parse_err("binary grid", "truncated header"));
        }
        let n = u64::from_le_bytes(rest[..8].try_into().unwrap()) as usize;
        let body = &rest[8..];
        let count = n.checked_mul(n).ok_or_else(|| parse_err("binary grid", "size overflow"))?;
        if body.len() != 8 * count {
            return Err(parse_err("binary grid", format!("expected {count} values, found {} bytes", body.len())));
        }
        let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        return ImageGrid::new(n, values);
    }
    let text = std::str::from_utf8(bytes).map_err(|e| parse_err("grid", e))?;
    let mut tokens = text.split_ascii_whitespace();
    let header: Vec<&str> = tokens.by_ref().take(3).collect();
    if header.len() != 3 || header[0] != GRID_MAGIC || header[1] != "v1" {
        return Err(parse_err("grid", "missing `ERTGRID v1 <n_side>` header"));
    }
    let n: usize = header[2].parse().map_err(|e| parse_err("grid", format!("bad size: {e}")))?;
    let values = tokens.map(|t| parse_f64(t, "grid")).collect::<Result<Vec<f64>>>()?;
    if values.len() != n * n {
        return Err(parse_err("grid", format!("expected {} values, found {}", n * n, values.len())));
    }
    ImageGrid::new(n, values)
}

pub fn read_grid(path: &Path) -> Result<ImageGrid> {
    grid_from_bytes(&fs::read(path)?)
}

/// Writes the text encoding, or the binary one when `binary` is set.
pub fn write_grid(path: &Path, grid: &ImageGrid, binary: bool) -> Result<()> {
    if binary {
        fs::write(path, grid_to_binary(grid))?;
    } else {
        fs::write(path, grid_to_text(grid))?;
    }
    Ok(())
}

/// `ERTSINO v1 <n_theta> <n_s> <mu>` then one line per angle.
pub fn sinogram_to_text(g: &Sinogram) -> String {
    let mut out = format!("{SINO_MAGIC} v1 {} {} {}\n", g.n_theta(), g.n_s(), fmt_f64(g.mu()));
    write_rows(&mut out, g.values(), g.n_s());
    out
}

pub fn sinogram_from_text(text: &str) -> Result<Sinogram> {
    let mut tokens = text.split_ascii_whitespace();
    let header: Vec<&str> = tokens.by_ref().take(5).collect();
    if header.len() != 5 || header[0] != SINO_MAGIC || header[1] != "v1" {
        return Err(parse_err("sinogram", "missing `ERTSINO v1 <n_theta> <n_s> <mu>` header"));
    }
    let dim = |t: &str| t.parse::<usize>().map_err(|e| parse_err("sinogram", format!("bad size {t:?}: {e}")));
    let (n_theta, n_s) = (dim(header[2])?, dim(header[3])?);
    let mu = parse_f64(header[4], "sinogram")?;
    let values = tokens.map(|t| parse_f64(t, "sinogram")).collect::<Result<Vec<f64>>>()?;
    if values.len() != n_theta * n_s {
        return Err(parse_err("sinogram", format!("expected {} values, found {}", n_theta * n_s, values.len())));
    }
    Sinogram::new(n_theta, n_s, mu, values)
}

pub fn read_sinogram(path: &Path) -> Result<Sinogram> {
    sinogram_from_text(&fs::read_to_string(path)?)
}

pub fn write_sinogram(path: &Path, g: &Sinogram) -> Result<()> {
    fs::write(path, sinogram_to_text(g))?;
    Ok(())
}

/// Long-form CSV with columns `phi,s,value`.
pub fn write_sinogram_csv<W: Write>(g: &Sinogram, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["phi", "s", "value"]).map_err(csv_err)?;
    for j in 0..g.n_theta() {
        for k in 0..g.n_s() {
            w.write_record([fmt_f64(g.phi(j)), fmt_f64(g.s(k)), fmt_f64(g.get(j, k))]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> ErtError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => ErtError::Io(io),
        other => ErtError::Parse(format!("csv: {other:?}")),
    }
}

/// JSON sidecar of an observation CSV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationMeta {
    pub mu: f64,
    pub seed: u64,
    pub noise: NoiseModel,
    pub n: usize,
}

/// Sidecar path for an observation CSV: same stem, `.json` extension.
pub fn sidecar_path(csv_path: &Path) -> Result<PathBuf> {
    if csv_path.extension().is_some_and(|e| e == "json") {
        return Err(ErtError::InvalidArgument(format!(
            "observation file {} would collide with its JSON sidecar",
            csv_path.display()
        )));
    }
    Ok(csv_path.with_extension("json"))
}

pub fn write_observations_csv<W: Write>(obs: &ObservationSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["phi", "s", "y"]).map_err(csv_err)?;
    for (r, y) in obs.rays().iter().zip(obs.y()) {
        w.write_record([fmt_f64(r.phi()), fmt_f64(r.s()), fmt_f64(*y)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn observation_meta(obs: &ObservationSet) -> ObservationMeta {
    ObservationMeta { mu: obs.mu(), seed: obs.seed(), noise: obs.noise(), n: obs.len() }
}

/// Writes `<path>` (CSV) and its sidecar.
pub fn write_observations(path: &Path, obs: &ObservationSet) -> Result<()> {
    let sidecar = sidecar_path(path)?;
    let mut buf = Vec::new();
    write_observations_csv(obs, &mut buf)?;
    fs::write(path, buf)?;
    fs::write(sidecar, to_json_line(&observation_meta(obs))?)?;
    Ok(())
}

pub fn read_observations_csv<R: Read>(input: R, meta: &ObservationMeta) -> Result<ObservationSet> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?;
    if header != vec!["phi", "s", "y"] {
        return Err(parse_err("observations", format!("expected header phi,s,y, found {header:?}")));
    }
    let mut rays = Vec::new();
    let mut y = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 3 {
            return Err(parse_err("observations", format!("expected 3 fields, found {}", rec.len())));
        }
        let field = |i: usize| parse_f64(&rec[i], "observations");
        rays.push(Ray::new(field(0)?, field(1)?)?);
        y.push(field(2)?);
    }
    if rays.len() != meta.n {
        return Err(parse_err("observations", format!("sidecar says n = {}, file has {} rows", meta.n, rays.len())));
    }
    ObservationSet::new(rays, y, meta.mu, meta.seed, NoiseModel::new(meta.noise.kind, meta.noise.sigma)?)
}

pub fn read_observations(path: &Path) -> Result<ObservationSet> {
    let meta: ObservationMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(path)?)?)?;
    read_observations_csv(fs::File::open(path)?, &meta)
}

/// CSV with columns `n,rho,risk,stderr,bias_sq,variance`.
pub fn write_risk_csv<W: Write>(rows: &[RiskRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "rho", "risk", "stderr", "bias_sq", "variance"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            fmt_f64(r.rho_n),
            fmt_f64(r.risk),
            fmt_f64(r.stderr),
            fmt_f64(r.bias_sq),
            fmt_f64(r.variance),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_risk_csv<R: Read>(input: R) -> Result<Vec<RiskRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?;
    if header != vec!["n", "rho", "risk", "stderr", "bias_sq", "variance"] {
        return Err(parse_err("risk table", format!("unexpected header {header:?}")));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != 6 {
                return Err(parse_err("risk table", format!("expected 6 fields, found {}", rec.len())));
            }
            let f = |i: usize| parse_f64(&rec[i], "risk table");
            let n = rec[0].parse().map_err(|e| parse_err("risk table", format!("bad n {:?}: {e}", &rec[0])))?;
            Ok(RiskRow { n, rho_n: f(1)?, risk: f(2)?, stderr: f(3)?, bias_sq: f(4)?, variance: f(5)? })
        })
        .collect()
}

/// Pretty JSON with a trailing newline.
pub fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Short human-readable summary of a grid.
pub fn describe_grid(grid: &ImageGrid) -> String {
    let (lo, hi) = grid.min_max();
    format!("grid {0}x{0}, min {1}, max {2}", grid.n_side(), fmt_f64(lo), fmt_f64(hi))
}
