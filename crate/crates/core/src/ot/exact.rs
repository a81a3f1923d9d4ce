use crate::error::{Error, Result};
use crate::measures::{powered_distance, DiscreteMeasure};

use super::network_simplex::solve_transport;
use super::{check_exponent, TransportPlan};

/// Largest support size accepted by the exact solver on either side.
pub const DEFAULT_SUPPORT_CAP: usize = 5000;

/// Integer cost resolution: costs are mapped to round(c / c_max · 2^40),
/// so the optimal value is exact up to about c_max · 2^-40.
const COST_SCALE: f64 = (1u64 << 40) as f64;

/// Exact optimal plan via network simplex on the complete bipartite graph.
pub fn exact_ot(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<TransportPlan> {
    exact_ot_with_cap(mu, nu, p, DEFAULT_SUPPORT_CAP)
}

pub fn exact_ot_with_cap(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    cap: usize,
) -> Result<TransportPlan> {
    check_exponent(p)?;
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    for size in [mu.len(), nu.len()] {
        if size > cap {
            return Err(Error::SupportCap { size, cap });
        }
    }
    // zero-weight atoms carry no flow; leave them out of the graph
    let rows: Vec<usize> = (0..mu.len()).filter(|&i| mu.weights()[i] > 0.0).collect();
    let cols: Vec<usize> = (0..nu.len()).filter(|&j| nu.weights()[j] > 0.0).collect();
    let (xs, ys) = (mu.points(), nu.points());

    let mut real = Vec::with_capacity(rows.len() * cols.len());
    for &i in &rows {
        for &j in &cols {
            real.push(powered_distance(&xs[i], &ys[j], p));
        }
    }
    let supply: Vec<f64> = rows.iter().map(|&i| mu.weights()[i]).collect();
    let demand: Vec<f64> = cols.iter().map(|&j| nu.weights()[j]).collect();
    let flows = solve_real_costs(&supply, &demand, &real);
    let entries = flows
        .into_iter()
        .map(|(a, b, f)| (rows[a], cols[b], f))
        .collect();
    TransportPlan::from_entries(mu.clone(), nu.clone(), entries, p)
}

/// Min-cost transport for a dense row-major real cost matrix; returns the
/// nonzero flows `(row, col, mass)`.
pub(crate) fn solve_real_costs(supply: &[f64], demand: &[f64], real: &[f64]) -> Vec<(usize, usize, f64)> {
    let c_max = real.iter().copied().fold(0.0, f64::max);
    let scale = if c_max > 0.0 { COST_SCALE / c_max } else { 0.0 };
    let cost: Vec<i64> = real.iter().map(|&c| (c * scale).round() as i64).collect();
    let sol = solve_transport(supply, demand, &cost);
    log::trace!(
        "network simplex {}x{}: {} pivots",
        supply.len(),
        demand.len(),
        sol.pivots
    );
    sol.flows
}

/// W_p(μ, ν) = (optimal cost)^{1/p}.
pub fn wasserstein_p(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    wasserstein_p_with_cap(mu, nu, p, DEFAULT_SUPPORT_CAP)
}

pub fn wasserstein_p_with_cap(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    cap: usize,
) -> Result<f64> {
    let plan = exact_ot_with_cap(mu, nu, p, cap)?;
    Ok(plan.cost_value().max(0.0).powf(1.0 / p))
}

/// Optimal plan by enumerating all bijections. Only for uniform measures
/// with equal support sizes up to 8; used as a test oracle.
pub fn brute_force_ot(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<TransportPlan> {
    check_exponent(p)?;
    let n = mu.len();
    if nu.len() != n {
        return Err(Error::LengthMismatch(format!(
            "brute force needs equal support sizes, got {n} and {}",
            nu.len()
        )));
    }
    if n > 8 {
        return Err(Error::InvalidParameter(format!("brute force limited to n <= 8, got {n}")));
    }
    if !mu.is_uniform() || !nu.is_uniform() {
        return Err(Error::InvalidParameter("brute force needs uniform weights".into()));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    let cost: Vec<Vec<f64>> = mu
        .points()
        .iter()
        .map(|x| nu.points().iter().map(|y| powered_distance(x, y, p)).collect())
        .collect();
    let assignment_cost = |perm: &[usize]| -> f64 { (0..n).map(|i| cost[i][perm[i]]).sum() };

    // Heap's algorithm, iterative form
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = assignment_cost(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let v = assignment_cost(&perm);
            if v < best_cost {
                best_cost = v;
                best.copy_from_slice(&perm);
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let w = 1.0 / n as f64;
    let entries = best.iter().enumerate().map(|(i, &j)| (i, j, w)).collect();
    TransportPlan::from_entries(mu.clone(), nu.clone(), entries, p)
}
