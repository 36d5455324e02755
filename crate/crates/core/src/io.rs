//! CSV readers and writers for points, datasets and matrices.
//!
//! Lines starting with `#` are metadata/comments and are skipped on input.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gp::{Dataset, Noise};
use crate::spaces::{SpaceId, SpacePoint};

/// Numeric rows of a headerless CSV, paired with their 1-based line numbers.
pub fn read_rows<R: Read>(reader: R) -> Result<Vec<(u64, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
            _ => Error::Parse(e.to_string()),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, f)| {
                f.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("row {line}, column {}: cannot parse {f:?} as a number", j + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push((line, row));
    }
    Ok(out)
}

/// One point per row, in the flat layout of [`SpaceId::point_from_flat`].
pub fn read_points<R: Read>(space: &SpaceId, reader: R) -> Result<Vec<SpacePoint>> {
    let width = space.coordinate_len();
    read_rows(reader)?
        .into_iter()
        .map(|(line, row)| {
            if row.len() != width {
                return Err(Error::Parse(format!(
                    "row {line}: expected {width} coordinates for {space}, found {}",
                    row.len()
                )));
            }
            space.point_from_flat(&row).map_err(|e| Error::Parse(format!("row {line}: {e}")))
        })
        .collect()
}

/// Coordinates then target on each row.
pub fn read_dataset<R: Read>(space: &SpaceId, reader: R, noise: Noise) -> Result<Dataset> {
    let width = space.coordinate_len();
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (line, row) in read_rows(reader)? {
        if row.len() != width + 1 {
            return Err(Error::Parse(format!(
                "row {line}: expected {width} coordinates then a target ({} columns), found {}",
                width + 1,
                row.len()
            )));
        }
        inputs.push(space.point_from_flat(&row[..width]).map_err(|e| Error::Parse(format!("row {line}: {e}")))?);
        targets.push(row[width]);
    }
    Dataset::new(inputs, targets, noise)
}

pub fn write_metadata<W: Write>(w: &mut W, meta: &[(&str, String)]) -> Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}: {v}")?;
    }
    Ok(())
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Writes `# key: value` lines, an optional header row, then the rows.
pub fn write_table<W: Write>(
    mut w: W,
    meta: &[(&str, String)],
    header: Option<&[String]>,
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    write_metadata(&mut w, meta)?;
    let mut out = csv_writer(w);
    if let Some(h) = header {
        out.write_record(h).map_err(csv_err)?;
    }
    for row in rows {
        out.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_matrix<W: Write>(w: W, meta: &[(&str, String)], m: &DMatrix<f64>) -> Result<()> {
    write_table(w, meta, None, matrix_rows(m))
}

pub fn write_points<W: Write>(w: W, points: &[SpacePoint]) -> Result<()> {
    write_table(w, &[], None, points.iter().map(SpacePoint::to_flat))
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: serde::Serialize + ?Sized>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}
