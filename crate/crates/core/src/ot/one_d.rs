use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

use super::{check_exponent, TransportPlan};

/// Atom indices sorted by coordinate, ties broken by index.
pub(crate) fn sorted_order(m: &DiscreteMeasure) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m.len()).collect();
    idx.sort_by(|&a, &b| m.points()[a][0].total_cmp(&m.points()[b][0]).then(a.cmp(&b)));
    idx
}

/// One-dimensional OT by the quantile (north-west corner) coupling of the
/// sorted supports. Returns W_p together with the plan; the plan's
/// `cost_value` is W_p^p.
pub fn ot_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<(f64, TransportPlan)> {
    check_exponent(p)?;
    for m in [mu, nu] {
        if m.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: m.dim(),
            });
        }
    }
    let a = sorted_order(mu);
    let b = sorted_order(nu);
    let (wa, wb) = (mu.weights(), nu.weights());
    let mut entries = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (wa[a[0]], wb[b[0]]);
    while i < a.len() && j < b.len() {
        // on the last atom of either side absorb any rounding residue
        let last_a = i + 1 == a.len();
        let last_b = j + 1 == b.len();
        if (ra <= rb && !last_a) || last_b {
            let t = if last_b { ra } else { ra.min(rb) };
            if t > 0.0 {
                entries.push((a[i], b[j], t));
            }
            rb -= t;
            i += 1;
            if i < a.len() {
                ra = wa[a[i]];
            }
        } else {
            if rb > 0.0 {
                entries.push((a[i], b[j], rb));
            }
            ra -= rb;
            j += 1;
            if j < b.len() {
                rb = wb[b[j]];
            }
        }
    }
    let plan = TransportPlan::from_entries(mu.clone(), nu.clone(), entries, p)?;
    Ok((plan.cost_value().max(0.0).powf(1.0 / p), plan))
}
