use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

use super::TransportPlan;

/// Repair the marginals of an approximately feasible plan.
///
/// Rows are scaled down to at most their source weight, then columns to at
/// most their target weight; the remaining deficits are filled with the
/// outer product of row and column deficits. `raw` is dense row-major with
/// shape `mu.len() × nu.len()`.
pub fn round_plan_to_feasible(
    raw: &[f64],
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
) -> Result<TransportPlan> {
    let (n, m) = (mu.len(), nu.len());
    if raw.len() != n * m {
        return Err(Error::LengthMismatch(format!(
            "raw plan has {} entries, expected {n}x{m}",
            raw.len()
        )));
    }
    if raw.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameter("raw plan must be finite and nonnegative".into()));
    }
    if !(raw.iter().sum::<f64>() > 0.0) {
        return Err(Error::ZeroMass);
    }
    let mut f = raw.to_vec();
    for i in 0..n {
        let row = &mut f[i * m..(i + 1) * m];
        let r: f64 = row.iter().sum();
        if r > mu.weights()[i] {
            let x = mu.weights()[i] / r;
            row.iter_mut().for_each(|v| *v *= x);
        }
    }
    let mut cols = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            cols[j] += f[i * m + j];
        }
    }
    let y: Vec<f64> = (0..m)
        .map(|j| {
            if cols[j] > nu.weights()[j] {
                nu.weights()[j] / cols[j]
            } else {
                1.0
            }
        })
        .collect();
    for i in 0..n {
        for j in 0..m {
            f[i * m + j] *= y[j];
        }
    }
    let mut err_r = vec![0.0; n];
    let mut err_c = nu.weights().to_vec();
    for i in 0..n {
        let row = &f[i * m..(i + 1) * m];
        err_r[i] = (mu.weights()[i] - row.iter().sum::<f64>()).max(0.0);
        for j in 0..m {
            err_c[j] -= row[j];
        }
    }
    err_c.iter_mut().for_each(|v| *v = v.max(0.0));
    let total: f64 = err_r.iter().sum();
    if total > 0.0 {
        for i in 0..n {
            if err_r[i] > 0.0 {
                for j in 0..m {
                    f[i * m + j] += err_r[i] * err_c[j] / total;
                }
            }
        }
    }
    let entries = (0..n * m)
        .filter(|&e| f[e] > 0.0)
        .map(|e| (e / m, e % m, f[e]))
        .collect();
    TransportPlan::from_entries(mu.clone(), nu.clone(), entries, p)
}
