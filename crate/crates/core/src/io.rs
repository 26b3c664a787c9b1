//! Point-cloud file format.
//!
//! UTF-8 text; first line `# dim=D count=N`, then one point per line, D
//! decimal floats separated by single spaces, emitted with 17 significant
//! digits so a write/read round-trip is lossless.

use crate::sampling::{PointCloud, Provenance};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CloudIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
}

fn io_err(path: &Path, source: io::Error) -> CloudIoError {
    CloudIoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> CloudIoError {
    CloudIoError::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Format a float with 17 significant digits (round-trip exact for f64).
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<(), CloudIoError> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut run = || -> io::Result<()> {
        writeln!(w, "# dim={} count={}", cloud.dim(), cloud.len())?;
        for p in cloud.iter_points() {
            let mut first = true;
            for &c in p {
                if !first {
                    write!(w, " ")?;
                }
                write!(w, "{}", format_f64(c))?;
                first = false;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    run().map_err(|e| io_err(path, e))
}

pub fn read_cloud(path: &Path, provenance: Provenance) -> Result<PointCloud, CloudIoError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let header = header.trim();
    let rest = header
        .strip_prefix('#')
        .ok_or_else(|| parse_err(path, 1, "header must start with '#'"))?
        .trim();
    let mut dim = None;
    let mut count = None;
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("dim=") {
            dim = v.parse::<usize>().ok();
        } else if let Some(v) = tok.strip_prefix("count=") {
            count = v.parse::<usize>().ok();
        }
    }
    let dim = dim.ok_or_else(|| parse_err(path, 1, "missing or invalid dim="))?;
    let count = count.ok_or_else(|| parse_err(path, 1, "missing or invalid count="))?;
    if dim == 0 {
        return Err(parse_err(path, 1, "dim must be >= 1"));
    }
    let mut data = Vec::with_capacity(dim * count);
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = 0usize;
        for tok in line.split(' ') {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, idx + 1, format!("bad float {tok:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(path, idx + 1, "non-finite coordinate"));
            }
            data.push(v);
            fields += 1;
        }
        if fields != dim {
            return Err(parse_err(
                path,
                idx + 1,
                format!("expected {dim} fields, got {fields}"),
            ));
        }
    }
    if data.len() != dim * count {
        return Err(parse_err(
            path,
            1,
            format!("header count={} but file has {} points", count, data.len() / dim),
        ));
    }
    Ok(PointCloud::from_rows(dim, data, provenance, 0))
}
