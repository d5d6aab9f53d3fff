//! CSV ingestion and the CSV file formats written by the tools.

use std::io::{Read, Write};

use crate::clusterer::ClusterResult;
use crate::diagram::ModeDiagram;
use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::robustfit::RobustFit;
use crate::scalar::Scalar;

/// Reads one point per row. A first row containing any non-numeric field is
/// taken as a header.
pub fn read_points_csv<R: Read>(reader: R) -> Result<PointSet<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut coords = Vec::new();
    let mut dim: Option<usize> = None;
    let mut first = true;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if first => {
                first = false;
                continue;
            }
            Err(_) => {
                let bad = record
                    .iter()
                    .find(|f| f.parse::<f64>().is_err())
                    .unwrap_or("");
                return Err(Error::Parse {
                    line,
                    message: format!("'{bad}' is not a number"),
                });
            }
        };
        first = false;
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line,
                message: format!("non-finite value {bad}"),
            });
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {d} columns, found {}", values.len()),
                })
            }
            _ => {}
        }
        coords.extend(values);
    }
    let d = dim.ok_or_else(|| Error::invalid("no data rows in input"))?;
    PointSet::new(coords, d)
}

/// Writes points with an `x0,x1,…` header.
pub fn write_points_csv<T: Scalar, W: Write>(ps: &PointSet<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((0..ps.dim()).map(|k| format!("x{k}")))?;
    for row in ps.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `index,label`.
pub fn write_truth_csv<W: Write>(labels: &[i64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "label"])?;
    for (i, l) in labels.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `index,label,is_mode`.
pub fn write_labels_csv<T: Scalar, W: Write>(res: &ClusterResult<T>, out: W) -> Result<()> {
    let is_mode = res.is_mode();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "label", "is_mode"])?;
    for (i, l) in res.labels.iter().enumerate() {
        w.write_record([
            i.to_string(),
            l.to_string(),
            u8::from(is_mode[i]).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the `label` column of a labels or truth file, in row order.
pub fn read_labels_csv<R: Read>(reader: R) -> Result<Vec<i64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| Error::invalid("labels file has no 'label' column"))?;
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = record.get(col).unwrap_or("");
        labels.push(field.parse::<i64>().map_err(|_| Error::Parse {
            line,
            message: format!("'{field}' is not an integer label"),
        })?);
    }
    Ok(labels)
}

/// Columns `index,density,delta,log_density,log_delta,residual,is_mode,trimmed`.
/// `residual` stays empty without a fit and for trimmed rows; `is_mode`
/// stays empty until modes are selected.
pub fn write_diagram_csv<T: Scalar, W: Write>(
    dia: &ModeDiagram<T>,
    fit: Option<&RobustFit<T>>,
    modes: Option<&[usize]>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "index",
        "density",
        "delta",
        "log_density",
        "log_delta",
        "residual",
        "is_mode",
        "trimmed",
    ])?;
    for (e, trimmed) in dia.all_entries() {
        let residual = match fit {
            Some(f) if !trimmed => f.residual(e.log_density, e.log_delta).to_string(),
            _ => String::new(),
        };
        let is_mode = modes
            .map(|m| u8::from(m.binary_search(&e.index).is_ok()).to_string())
            .unwrap_or_default();
        w.write_record([
            e.index.to_string(),
            e.density.to_string(),
            e.delta.to_string(),
            e.log_density.to_string(),
            e.log_delta.to_string(),
            residual,
            is_mode,
            u8::from(trimmed).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
