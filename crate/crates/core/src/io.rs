//! CSV path files.
//!
//! Header `t,v` (scalar) or `t,v1,...,vm` (vector). Rows are sorted by `t`;
//! a repeated `t` encodes a jump, the first row holding the left limit and
//! the second the value. The horizon is the last time in the file.

use std::io::Read;

use crate::error::{Error, Result};
use crate::paths::{merge_sorted, CadlagPath, Knot, VectorCadlagPath};

fn read_rows(reader: impl Read) -> Result<(usize, Vec<(f64, Vec<f64>)>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "t" {
        return Err(Error::Format(format!(
            "expected header `t,v` or `t,v1,...,vm`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let width = headers.len() - 1;
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != width + 1 {
            return Err(Error::Format(format!(
                "row {} has {} fields, expected {}",
                line + 2,
                record.len(),
                width + 1
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Format(format!("row {}: `{s}`: {e}", line + 2)))
        };
        let t = parse(&record[0])?;
        let values = record.iter().skip(1).map(parse).collect::<Result<Vec<_>>>()?;
        rows.push((t, values));
    }
    if rows.is_empty() {
        return Err(Error::Format("no data rows".into()));
    }
    Ok((width, rows))
}

fn component(rows: &[(f64, Vec<f64>)], i: usize) -> Result<CadlagPath> {
    let horizon = rows.last().map(|r| r.0).unwrap_or(0.0);
    CadlagPath::new(rows.iter().map(|(t, v)| Knot::new(*t, v[i])), horizon)
        .map_err(|e| Error::Format(e.to_string()))
}

pub fn read_path(reader: impl Read) -> Result<CadlagPath> {
    let (width, rows) = read_rows(reader)?;
    if width != 1 {
        return Err(Error::Format(format!(
            "expected a scalar path (`t,v`), found {width} value columns"
        )));
    }
    component(&rows, 0)
}

pub fn read_vector_path(reader: impl Read) -> Result<VectorCadlagPath> {
    let (width, rows) = read_rows(reader)?;
    let comps = (0..width)
        .map(|i| component(&rows, i))
        .collect::<Result<Vec<_>>>()?;
    VectorCadlagPath::new(comps)
}

pub fn read_path_file(path: impl AsRef<std::path::Path>) -> Result<CadlagPath> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Format(format!("{}: {e}", path.as_ref().display())))?;
    read_path(file)
}

pub fn read_vector_path_file(path: impl AsRef<std::path::Path>) -> Result<VectorCadlagPath> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Format(format!("{}: {e}", path.as_ref().display())))?;
    read_vector_path(file)
}

/// Serializes to CSV. A final row at the horizon is appended when the last
/// knot sits before it, so reading the text back restores the horizon.
pub fn write_path(path: &CadlagPath) -> String {
    write_components(&[path])
}

pub fn write_vector_path(path: &VectorCadlagPath) -> String {
    let comps: Vec<&CadlagPath> = path.components().iter().collect();
    write_components(&comps)
}

fn write_components(comps: &[&CadlagPath]) -> String {
    let mut out = String::from("t");
    if comps.len() == 1 {
        out.push_str(",v");
    } else {
        for i in 1..=comps.len() {
            out.push_str(&format!(",v{i}"));
        }
    }
    out.push('\n');
    let times = comps
        .iter()
        .fold(Vec::new(), |acc, c| merge_sorted(&acc, &c.knot_times()));
    let jump_times = comps
        .iter()
        .fold(Vec::new(), |acc, c| merge_sorted(&acc, &c.jump_times()));
    let mut row = |t: f64, vals: Vec<f64>| {
        out.push_str(&format!("{t:?}"));
        for v in vals {
            out.push_str(&format!(",{v:?}"));
        }
        out.push('\n');
    };
    for &t in &times {
        if jump_times.binary_search_by(|s| s.total_cmp(&t)).is_ok() {
            row(t, comps.iter().map(|c| c.left_value_at(t)).collect());
        }
        row(t, comps.iter().map(|c| c.value_at(t)).collect());
    }
    let horizon = comps[0].horizon();
    if times.last().copied() != Some(horizon) {
        row(horizon, comps.iter().map(|c| c.value_at(horizon)).collect());
    }
    out
}
