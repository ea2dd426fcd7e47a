//! Plain-text solution snapshots.
//!
//! Format version 1:
//!
//! ```text
//! tauadapt-snapshot 1
//! mesh <nx> <ny> <x_min> <x_max> <y_min> <y_max> <periodic_x> <periodic_y>
//! time <t>
//! nvar <nvar>
//! layout
//! <N1> <N2>                      one line per element
//! data
//! <q_0> ... <q_{nvar-1}>         one line per node, element by element,
//!                                nodes j-major (i fastest)
//! ```
//!
//! Reals are written with 17 significant digits, so a write/read round
//! trip is bitwise exact.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::dgsem::{ElementData, NodalField};
use crate::error::{Error, Result};
use crate::mesh::Mesh;

const MAGIC: &str = "tauadapt-snapshot";
const VERSION: u32 = 1;

pub fn write_snapshot(path: &Path, mesh: &Mesh, t: f64, field: &NodalField) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    let b = &mesh.bounds;
    writeln!(out, "{MAGIC} {VERSION}")?;
    writeln!(
        out,
        "mesh {} {} {:.16e} {:.16e} {:.16e} {:.16e} {} {}",
        mesh.nx, mesh.ny, b.x_min, b.x_max, b.y_min, b.y_max, mesh.periodic[0], mesh.periodic[1]
    )?;
    writeln!(out, "time {t:.16e}")?;
    writeln!(out, "nvar {}", field.nvar())?;
    writeln!(out, "layout")?;
    for e in field.elements() {
        writeln!(out, "{} {}", e.degree[0], e.degree[1])?;
    }
    writeln!(out, "data")?;
    let nvar = field.nvar();
    for e in field.elements() {
        for node in e.values.chunks(nvar) {
            let line: Vec<String> = node.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a snapshot written for `mesh`; returns the time and the field.
pub fn read_snapshot(path: &Path, mesh: &Mesh) -> Result<(f64, NodalField)> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((k, l)) => Ok((k + 1, l?)),
            None => Err(err(0, format!("unexpected end of file, expected {what}"))),
        }
    };
    let num = |line: usize, s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|e| err(line, format!("`{s}`: {e}")))
    };
    let int = |line: usize, s: &str| -> Result<usize> {
        s.parse::<usize>().map_err(|e| err(line, format!("`{s}`: {e}")))
    };

    let (k, l) = next("header")?;
    if l.trim() != format!("{MAGIC} {VERSION}") {
        return Err(err(k, format!("not a version {VERSION} snapshot: `{l}`")));
    }
    let (k, l) = next("mesh line")?;
    let f: Vec<&str> = l.split_whitespace().collect();
    if f.len() != 9 || f[0] != "mesh" {
        return Err(err(k, "malformed mesh line".into()));
    }
    let b = &mesh.bounds;
    let same = int(k, f[1])? == mesh.nx
        && int(k, f[2])? == mesh.ny
        && num(k, f[3])? == b.x_min
        && num(k, f[4])? == b.x_max
        && num(k, f[5])? == b.y_min
        && num(k, f[6])? == b.y_max
        && f[7] == mesh.periodic[0].to_string()
        && f[8] == mesh.periodic[1].to_string();
    if !same {
        return Err(Error::Mesh(format!(
            "{}: snapshot mesh `{}` does not match the run mesh",
            path.display(),
            l.trim()
        )));
    }
    let (k, l) = next("time")?;
    let t = match l.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["time", v] => num(k, v)?,
        _ => return Err(err(k, "expected `time <t>`".into())),
    };
    let (k, l) = next("nvar")?;
    let nvar = match l.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["nvar", v] => int(k, v)?,
        _ => return Err(err(k, "expected `nvar <n>`".into())),
    };
    if nvar == 0 {
        return Err(err(k, "nvar must be positive".into()));
    }
    let (k, l) = next("layout")?;
    if l.trim() != "layout" {
        return Err(err(k, "expected `layout`".into()));
    }
    let mut degrees = Vec::with_capacity(mesh.len());
    for _ in 0..mesh.len() {
        let (k, l) = next("element degrees")?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 2 {
            return Err(err(k, "expected `<N1> <N2>`".into()));
        }
        let d = [int(k, f[0])?, int(k, f[1])?];
        if d[0] == 0 || d[1] == 0 || d[0] > crate::basis::MAX_DEGREE || d[1] > crate::basis::MAX_DEGREE {
            return Err(err(k, format!("degree {d:?} out of range")));
        }
        degrees.push(d);
    }
    let (k, l) = next("data")?;
    if l.trim() != "data" {
        return Err(err(k, "expected `data`".into()));
    }
    let mut elements = Vec::with_capacity(mesh.len());
    for d in degrees {
        let mut data = ElementData::zeros(d, nvar);
        for node in 0..data.n_nodes() {
            let (k, l) = next("node values")?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != nvar {
                return Err(err(k, format!("expected {nvar} values")));
            }
            for (v, s) in f.iter().enumerate() {
                data.values[node * nvar + v] = num(k, s)?;
            }
        }
        elements.push(data);
    }
    if let Some((k, l)) = lines.next() {
        if !l?.trim().is_empty() {
            return Err(err(k + 1, "trailing data".into()));
        }
    }
    Ok((t, NodalField::from_elements(nvar, elements)))
}
