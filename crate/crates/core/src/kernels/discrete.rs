use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Point, PointKey};
use crate::ot::TransportPlan;

/// Row-sum tolerance accepted when building a kernel.
const ROW_TOL: f64 = 1e-9;

/// A row-stochastic kernel from a finite source set to a finite target set.
///
/// Row i is the conditional distribution at `source[i]`. Evaluating the
/// kernel at a point looks the point up by exact coordinates; when several
/// source entries share coordinates their rows are mixed by source mass.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct DiscreteKernel {
    source: Vec<Point>,
    target: Vec<Point>,
    rows: Vec<Vec<(usize, f64)>>,
    source_mass: Vec<f64>,
    flagged: Vec<usize>,
    lookup: HashMap<PointKey, Lookup>,
}

#[derive(Clone, Debug)]
enum Lookup {
    Row(usize),
    Mixed(Vec<(usize, f64)>),
}

#[derive(Serialize, Deserialize)]
struct KernelRepr {
    source: Vec<Point>,
    target: Vec<Point>,
    rows: Vec<Vec<(usize, f64)>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    source_mass: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    flagged: Vec<usize>,
}

impl TryFrom<KernelRepr> for DiscreteKernel {
    type Error = Error;
    fn try_from(r: KernelRepr) -> Result<Self> {
        let mut k = DiscreteKernel::with_mass(r.source, r.target, r.rows, r.source_mass)?;
        k.flagged = r.flagged;
        Ok(k)
    }
}

impl From<DiscreteKernel> for KernelRepr {
    fn from(k: DiscreteKernel) -> Self {
        KernelRepr {
            source: k.source,
            target: k.target,
            rows: k.rows,
            source_mass: k.source_mass,
            flagged: k.flagged,
        }
    }
}

impl PartialEq for DiscreteKernel {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
            && self.target == other.target
            && self.rows == other.rows
            && self.source_mass == other.source_mass
            && self.flagged == other.flagged
    }
}

impl DiscreteKernel {
    /// Build from sparse rows `[(target index, probability)]`; rows must sum
    /// to 1 within 1e-9 and are renormalized when off by more than 1e-12.
    pub fn new(source: Vec<Point>, target: Vec<Point>, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        DiscreteKernel::with_mass(source, target, rows, Vec::new())
    }

    /// As [`DiscreteKernel::new`], with the source masses used to mix rows of
    /// duplicated source points (uniform when empty).
    pub fn with_mass(
        source: Vec<Point>,
        target: Vec<Point>,
        mut rows: Vec<Vec<(usize, f64)>>,
        source_mass: Vec<f64>,
    ) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(Error::Empty("kernel source or target"));
        }
        if rows.len() != source.len() {
            return Err(Error::LengthMismatch(format!(
                "{} rows for {} source points",
                rows.len(),
                source.len()
            )));
        }
        if !source_mass.is_empty() && source_mass.len() != source.len() {
            return Err(Error::LengthMismatch("source mass length".into()));
        }
        let d = target[0].dim();
        if let Some(p) = source.iter().chain(&target).find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.dim(),
            });
        }
        for (i, row) in rows.iter_mut().enumerate() {
            let mut sum = 0.0;
            for &(j, w) in row.iter() {
                if j >= target.len() || !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidParameter(format!("bad kernel entry ({j}, {w}) in row {i}")));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidParameter(format!("kernel row {i} sums to {sum}")));
            }
            row.retain(|e| e.1 > 0.0);
            // rows already normalized up to rounding are kept as given, so
            // that a saved kernel reloads bit for bit
            if (sum - 1.0).abs() > 1e-12 {
                row.iter_mut().for_each(|e| e.1 /= sum);
            }
        }
        let mut k = DiscreteKernel {
            source,
            target,
            rows,
            source_mass,
            flagged: Vec::new(),
            lookup: HashMap::new(),
        };
        k.build_lookup();
        Ok(k)
    }

    fn build_lookup(&mut self) {
        let mut groups: HashMap<PointKey, Vec<usize>> = HashMap::new();
        for (i, p) in self.source.iter().enumerate() {
            groups.entry(p.key()).or_default().push(i);
        }
        for (key, members) in groups {
            let entry = if members.len() == 1 {
                Lookup::Row(members[0])
            } else {
                let mass: Vec<f64> = members
                    .iter()
                    .map(|&i| self.source_mass.get(i).copied().unwrap_or(1.0))
                    .collect();
                let total: f64 = mass.iter().sum();
                let mut mixed: Vec<(usize, f64)> = Vec::new();
                for (&i, &m) in members.iter().zip(&mass) {
                    let share = if total > 0.0 { m / total } else { 1.0 / members.len() as f64 };
                    for &(j, w) in &self.rows[i] {
                        match mixed.iter_mut().find(|e| e.0 == j) {
                            Some(e) => e.1 += share * w,
                            None => mixed.push((j, share * w)),
                        }
                    }
                }
                mixed.sort_by_key(|e| e.0);
                Lookup::Mixed(mixed)
            };
            self.lookup.insert(key, entry);
        }
    }

    pub fn source(&self) -> &[Point] {
        &self.source
    }

    pub fn target(&self) -> &[Point] {
        &self.target
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    /// Rows that were filled uniformly because their source had no mass.
    pub fn flagged_rows(&self) -> &[usize] {
        &self.flagged
    }

    pub fn is_one_hot(&self) -> bool {
        self.rows.iter().all(|r| r.len() == 1)
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.lookup.contains_key(&x.key())
    }

    /// Conditional distribution at `x` as `(target index, probability)`.
    pub fn row_at(&self, x: &Point) -> Result<&[(usize, f64)]> {
        match self.lookup.get(&x.key()) {
            Some(Lookup::Row(i)) => Ok(&self.rows[*i]),
            Some(Lookup::Mixed(row)) => Ok(row),
            None => Err(Error::Incompatible(format!(
                "point {:?} is not in the kernel's source set",
                x.coords()
            ))),
        }
    }
}

/// Disintegrate a plan: row i is the plan's row i divided by its mass.
/// Rows without mass become uniform and are flagged.
pub fn kernel_from_plan(plan: &TransportPlan) -> DiscreteKernel {
    let n = plan.source().len();
    let m = plan.target().len();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(i, j, mass) in plan.entries() {
        rows[i].push((j, mass));
    }
    let mut flagged = Vec::new();
    for (i, row) in rows.iter_mut().enumerate() {
        let sum: f64 = row.iter().map(|e| e.1).sum();
        if sum > 0.0 {
            row.iter_mut().for_each(|e| e.1 /= sum);
        } else {
            *row = (0..m).map(|j| (j, 1.0 / m as f64)).collect();
            flagged.push(i);
        }
    }
    let mut k = DiscreteKernel::with_mass(
        plan.source().points().to_vec(),
        plan.target().points().to_vec(),
        rows,
        plan.source().weights().to_vec(),
    )
    .expect("a feasible plan yields a valid kernel");
    if !flagged.is_empty() {
        log::debug!("{} kernel rows had no mass and were set uniform", flagged.len());
    }
    k.flagged = flagged;
    k
}
