//! Discrete optimal transport: cost matrices, plans and solvers.

mod exact;
mod network_simplex;
mod one_d;
mod rounding;
mod sinkhorn;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{powered_distance, DiscreteMeasure, Point};

pub(crate) use exact::solve_real_costs;
pub use exact::{
    brute_force_ot, exact_ot, exact_ot_with_cap, wasserstein_p, wasserstein_p_with_cap,
    DEFAULT_SUPPORT_CAP,
};
pub use one_d::ot_1d;
pub use rounding::round_plan_to_feasible;
pub use sinkhorn::{sinkhorn, sinkhorn_with, EotSolution, SinkhornOptions};

/// Default marginal tolerance for transport plans.
pub const TOL_FEAS: f64 = 1e-9;

/// Reject exponents outside [1, ∞).
pub fn check_exponent(p: f64) -> Result<()> {
    if !p.is_finite() || p < 1.0 {
        return Err(Error::InvalidParameter(format!("exponent p must be a finite real >= 1, got {p}")));
    }
    Ok(())
}

/// Dense matrix of powered distances ‖x_i − y_j‖^p.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    p: f64,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// Pairwise costs between two point lists.
pub fn cost_matrix(xs: &[Point], ys: &[Point], p: f64) -> Result<CostMatrix> {
    check_exponent(p)?;
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::Empty("cost matrix points"));
    }
    let d = xs[0].dim();
    for q in xs.iter().chain(ys) {
        if q.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: q.dim(),
            });
        }
    }
    let mut data = Vec::with_capacity(xs.len() * ys.len());
    for x in xs {
        for y in ys {
            data.push(powered_distance(x, y, p));
        }
    }
    Ok(CostMatrix {
        rows: xs.len(),
        cols: ys.len(),
        p,
        data,
    })
}

/// A coupling between two discrete measures, stored sparsely.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    /// `(row, col, mass)` sorted by row then column, masses > 0.
    entries: Vec<(usize, usize, f64)>,
    cost_value: f64,
    p: f64,
}

impl TransportPlan {
    /// Assemble a plan from raw entries. Entries are sorted, zero masses
    /// dropped, and the cost is recomputed from the supports.
    pub fn from_entries(
        source: DiscreteMeasure,
        target: DiscreteMeasure,
        mut entries: Vec<(usize, usize, f64)>,
        p: f64,
    ) -> Result<Self> {
        check_exponent(p)?;
        if source.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: source.dim(),
                found: target.dim(),
            });
        }
        for &(i, j, mass) in &entries {
            if i >= source.len() || j >= target.len() {
                return Err(Error::InvalidParameter(format!(
                    "plan entry ({i}, {j}) outside a {}x{} plan",
                    source.len(),
                    target.len()
                )));
            }
            if !mass.is_finite() || mass < 0.0 {
                return Err(Error::InvalidParameter(format!("plan mass {mass} at ({i}, {j})")));
            }
        }
        entries.retain(|e| e.2 > 0.0);
        entries.sort_by_key(|e| (e.0, e.1));
        let cost_value = entries
            .iter()
            .map(|&(i, j, mass)| mass * powered_distance(&source.points()[i], &target.points()[j], p))
            .sum();
        Ok(TransportPlan {
            source,
            target,
            entries,
            cost_value,
            p,
        })
    }

    pub fn source(&self) -> &DiscreteMeasure {
        &self.source
    }

    pub fn target(&self) -> &DiscreteMeasure {
        &self.target
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Σ π_ij ‖x_i − y_j‖^p.
    pub fn cost_value(&self) -> f64 {
        self.cost_value
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.source.len()];
        for &(i, _, mass) in &self.entries {
            r[i] += mass;
        }
        r
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.target.len()];
        for &(_, j, mass) in &self.entries {
            c[j] += mass;
        }
        c
    }

    /// Largest absolute deviation of a row or column sum from its marginal.
    pub fn marginal_violation(&self) -> f64 {
        let rows = self.row_sums().into_iter().zip(self.source.weights());
        let cols = self.col_sums().into_iter().zip(self.target.weights());
        rows.chain(cols).map(|(s, w)| (s - w).abs()).fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.marginal_violation() <= tol && (self.total_mass() - 1.0).abs() <= tol
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.target.len()]; self.source.len()];
        for &(i, j, mass) in &self.entries {
            m[i][j] += mass;
        }
        m
    }

    /// The serializable summary (supports are stored separately).
    pub fn record(&self) -> PlanRecord {
        PlanRecord {
            rows: self.source.len(),
            cols: self.target.len(),
            entries: self.entries.clone(),
            cost_value: self.cost_value,
            p: self.p,
        }
    }
}

/// JSON form of a plan: `{"rows", "cols", "entries": [[i, j, mass]], "cost_value", "p"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
    pub cost_value: f64,
    pub p: f64,
}

impl PlanRecord {
    /// Reattach supports, checking shapes.
    pub fn into_plan(self, source: DiscreteMeasure, target: DiscreteMeasure) -> Result<TransportPlan> {
        if source.len() != self.rows || target.len() != self.cols {
            return Err(Error::LengthMismatch(format!(
                "plan is {}x{} but supports have {} and {} points",
                self.rows,
                self.cols,
                source.len(),
                target.len()
            )));
        }
        TransportPlan::from_entries(source, target, self.entries, self.p)
    }
}
