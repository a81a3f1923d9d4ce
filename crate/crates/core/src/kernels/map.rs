use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Point, PointKey};

/// Deterministic point maps that can appear in a pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointMap {
    Identity,
    Constant { point: Point },
    Translate { shift: Vec<f64> },
    /// x ↦ A x + b
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// x ↦ x + (sign(x_1), ..., sign(x_d)), with sign(0) = 0.
    OrthantShift,
    /// Exact lookup table; inputs outside the table are rejected.
    Table(PointTable),
    /// (x_1, x_2) ↦ (s·(−1)^⌊x_2/δ⌋, x_2) with s = −1 when flipped.
    Stripes { delta: f64, flipped: bool },
}

fn check_dim(x: &Point, d: usize) -> Result<()> {
    if x.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.dim(),
        });
    }
    Ok(())
}

impl PointMap {
    pub fn apply(&self, x: &Point) -> Result<Point> {
        match self {
            PointMap::Identity => Ok(x.clone()),
            PointMap::Constant { point } => Ok(point.clone()),
            PointMap::Translate { shift } => {
                check_dim(x, shift.len())?;
                Point::new(x.coords().iter().zip(shift).map(|(a, b)| a + b).collect())
            }
            PointMap::Affine { matrix, offset } => {
                let cols = matrix.first().map_or(0, |r| r.len());
                check_dim(x, cols)?;
                Point::new(
                    matrix
                        .iter()
                        .zip(offset)
                        .map(|(row, b)| row.iter().zip(x.coords()).map(|(a, c)| a * c).sum::<f64>() + b)
                        .collect(),
                )
            }
            PointMap::OrthantShift => Point::new(
                x.coords()
                    .iter()
                    .map(|&c| {
                        let s = if c > 0.0 {
                            1.0
                        } else if c < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        c + s
                    })
                    .collect(),
            ),
            PointMap::Table(t) => t.apply(x),
            PointMap::Stripes { delta, flipped } => {
                check_dim(x, 2)?;
                let band = (x[1] / delta).floor() as i64;
                let mut s = if band.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                if *flipped {
                    s = -s;
                }
                Point::new(vec![s, x[1]])
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PointMap::Affine { matrix, offset } => {
                if matrix.len() != offset.len() || matrix.is_empty() {
                    return Err(Error::InvalidParameter("affine map: rows must match offset".into()));
                }
                let cols = matrix[0].len();
                if matrix.iter().any(|r| r.len() != cols) {
                    return Err(Error::InvalidParameter("affine map: ragged matrix".into()));
                }
                Ok(())
            }
            PointMap::Stripes { delta, .. } if !(*delta > 0.0) => {
                Err(Error::InvalidParameter("stripe width must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Image of the map when it is a finite set.
    pub fn finite_image(&self) -> Option<Vec<Point>> {
        match self {
            PointMap::Constant { point } => Some(vec![point.clone()]),
            PointMap::Table(t) => Some(t.outputs.clone()),
            _ => None,
        }
    }
}

/// A finite map given by input/output pairs; the first pair wins when an
/// input appears twice.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct PointTable {
    inputs: Vec<Point>,
    outputs: Vec<Point>,
    index: HashMap<PointKey, usize>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    inputs: Vec<Point>,
    outputs: Vec<Point>,
}

impl TryFrom<TableRepr> for PointTable {
    type Error = Error;
    fn try_from(r: TableRepr) -> Result<Self> {
        PointTable::new(r.inputs, r.outputs)
    }
}

impl From<PointTable> for TableRepr {
    fn from(t: PointTable) -> Self {
        TableRepr {
            inputs: t.inputs,
            outputs: t.outputs,
        }
    }
}

impl PartialEq for PointTable {
    fn eq(&self, other: &Self) -> bool {
        self.inputs == other.inputs && self.outputs == other.outputs
    }
}

impl PointTable {
    pub fn new(inputs: Vec<Point>, outputs: Vec<Point>) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::LengthMismatch(format!(
                "table has {} inputs and {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        if inputs.is_empty() {
            return Err(Error::Empty("map table"));
        }
        let mut index = HashMap::with_capacity(inputs.len());
        for (i, p) in inputs.iter().enumerate() {
            index.entry(p.key()).or_insert(i);
        }
        Ok(PointTable {
            inputs,
            outputs,
            index,
        })
    }

    pub fn inputs(&self) -> &[Point] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Point] {
        &self.outputs
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        self.index
            .get(&x.key())
            .map(|&i| self.outputs[i].clone())
            .ok_or_else(|| Error::Incompatible(format!("point {:?} is not in the map table", x.coords())))
    }
}
