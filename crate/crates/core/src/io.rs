//! Reading and writing measures, plans and kernels.
//!
//! Measures are CSV with a `x1,...,xd[,weight]` header or JSON
//! `{"points": [[...]], "weights": [...]}`. The format is picked from the
//! file extension (`.json` means JSON, anything else CSV).

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, Point};

fn is_json(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Parse a measure from CSV text.
pub fn measure_from_csv(text: &str) -> Result<DiscreteMeasure> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let weight_col = headers.iter().position(|h| h == "weight");
    let coord_cols: Vec<usize> = (0..headers.len()).filter(|&i| Some(i) != weight_col).collect();
    if coord_cols.is_empty() {
        return Err(Error::Parse("measure CSV has no coordinate columns".into()));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let field = |i: usize| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>().map_err(|_| {
                Error::Parse(format!("row {}: cannot parse {raw:?} as a number", line + 1))
            })
        };
        let coords = coord_cols.iter().map(|&i| field(i)).collect::<Result<Vec<_>>>()?;
        points.push(Point::new(coords)?);
        if let Some(w) = weight_col {
            weights.push(field(w)?);
        }
    }
    match weight_col {
        Some(_) => DiscreteMeasure::new(points, weights),
        None => DiscreteMeasure::uniform(points),
    }
}

/// Render a measure as CSV with a weight column.
pub fn measure_to_csv(m: &DiscreteMeasure) -> String {
    let mut out = String::new();
    for k in 1..=m.dim() {
        out.push_str(&format!("x{k},"));
    }
    out.push_str("weight\n");
    for (p, w) in m.iter() {
        for c in p.coords() {
            out.push_str(&format!("{c},"));
        }
        out.push_str(&format!("{w}\n"));
    }
    out
}

pub fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if is_json(path) {
        Ok(serde_json::from_str(&text)?)
    } else {
        measure_from_csv(&text)
    }
}

pub fn write_measure(path: &Path, m: &DiscreteMeasure) -> Result<()> {
    let text = if is_json(path) {
        serde_json::to_string_pretty(m)?
    } else {
        measure_to_csv(m)
    };
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &serde_json::to_string_pretty(value)?)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    f.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        f.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_and_without_weights() {
        let m = measure_from_csv("x1,x2,weight\n0,0,1\n1,1,3\n").unwrap();
        assert_eq!(m.weights(), &[0.25, 0.75]);
        assert_eq!(m.points()[1].coords(), &[1.0, 1.0]);
        let u = measure_from_csv("x1\n0.5\n0.5\n2\n").unwrap();
        assert_eq!(u.len(), 3);
        assert!(u.is_uniform());
        assert!(measure_from_csv("x1\nabc\n").is_err());
        assert!(measure_from_csv("x1\n").is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = DiscreteMeasure::new(
            vec![
                Point::new(vec![0.1, -3.25e-7]).unwrap(),
                Point::new(vec![1.0 / 3.0, 2.0]).unwrap(),
            ],
            vec![0.3, 0.7],
        )
        .unwrap();
        let back = measure_from_csv(&measure_to_csv(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_round_trip_and_uniform_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = DiscreteMeasure::uniform(vec![
            Point::new(vec![0.0]).unwrap(),
            Point::new(vec![1.5]).unwrap(),
        ])
        .unwrap();
        write_measure(&path, &m).unwrap();
        assert_eq!(read_measure(&path).unwrap(), m);

        let parsed: DiscreteMeasure =
            serde_json::from_str(r#"{"points": [[0.0], [1.0]]}"#).unwrap();
        assert_eq!(parsed.weights(), &[0.5, 0.5]);
        assert!(serde_json::from_str::<DiscreteMeasure>(r#"{"points": []}"#).is_err());
    }
}
