//! File formats: measures as CSV (`x1,...,xn,weight`) or JSON
//! (`{"points": [[...]], "weights": [...]}`), plans as `i,j,mass` triplets and
//! interpolation frames as `t,id,x1,...,xn`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monge::InterpolationFrames;
use crate::ot::{DiscreteMeasure, TransportPlan};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Serialize, Deserialize)]
struct MeasureJson {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Reads a measure; `.json` files use the JSON layout, anything else CSV.
pub fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let text = std::fs::read_to_string(path)?;
        measure_from_json(&text)
    } else {
        let file = File::open(path)?;
        measure_from_csv(file)
    }
}

pub fn measure_from_json(text: &str) -> Result<DiscreteMeasure> {
    let raw: MeasureJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let points = raw.points.into_iter().map(DVector::from_vec).collect();
    DiscreteMeasure::new(points, raw.weights)
}

pub fn measure_from_csv<R: std::io::Read>(reader: R) -> Result<DiscreteMeasure> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let n = headers.len();
    let expected: Vec<String> = (1..n).map(|k| format!("x{k}")).chain(["weight".to_string()]).collect();
    if n < 2 || headers.iter().zip(&expected).any(|(h, e)| h != e) {
        return Err(Error::Parse(format!(
            "measure header must be {}, got {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let values = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("row {}: {e}", line + 1)))?;
        if values.len() != n {
            return Err(Error::Parse(format!(
                "row {} has {} fields, expected {n}",
                line + 1,
                values.len()
            )));
        }
        points.push(DVector::from_column_slice(&values[..n - 1]));
        weights.push(values[n - 1]);
    }
    DiscreteMeasure::new(points, weights)
}

pub fn write_measure(path: &Path, mu: &DiscreteMeasure) -> Result<()> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let raw = MeasureJson {
            points: mu.points().iter().map(|p| p.as_slice().to_vec()).collect(),
            weights: mu.weights().to_vec(),
        };
        let text = serde_json::to_string_pretty(&raw).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        return Ok(());
    }
    let mut out = BufWriter::new(File::create(path)?);
    let header: Vec<String> = (1..=mu.dim())
        .map(|k| format!("x{k}"))
        .chain(["weight".into()])
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (p, w) in mu.points().iter().zip(mu.weights()) {
        let row: Vec<String> = p.iter().chain(std::iter::once(w)).map(|v| format_float(*v)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Nonzero plan entries as `i,j,mass`.
pub fn write_plan_csv(path: &Path, plan: &TransportPlan) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "i,j,mass")?;
    for (i, j, m) in plan.triplets() {
        writeln!(out, "{i},{j},{}", format_float(m))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_frames_csv(path: &Path, frames: &InterpolationFrames) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let dim = frames.clouds.first().and_then(|c| c.first()).map_or(0, |p| p.len());
    let header: Vec<String> = ["t".to_string(), "id".to_string()]
        .into_iter()
        .chain((1..=dim).map(|k| format!("x{k}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (t, cloud) in frames.times.iter().zip(&frames.clouds) {
        for (id, p) in cloud.iter().enumerate() {
            let coords: Vec<String> = p.iter().map(|v| format_float(*v)).collect();
            writeln!(out, "{},{id},{}", format_float(*t), coords.join(","))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Parses `"1,2.5,-3"` into a vector.
pub fn parse_point(text: &str) -> Result<DVector<f64>> {
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Parse(format!("bad point {text:?}: {e}")))?;
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse(format!("bad point {text:?}")));
    }
    Ok(DVector::from_vec(values))
}
