//! Kernels defined on all of ℝ^d from fitted finite data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{powered_distance, DiscreteMeasure, Point};

/// Entropic conditional kernel extended to every x:
/// weight_j(x) ∝ ν_j exp((g_j − ‖x − y_j‖^p)/τ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxKernel {
    pub targets: Vec<Point>,
    pub log_weights: Vec<f64>,
    pub potentials: Vec<f64>,
    pub tau: f64,
    pub p: f64,
}

impl SoftmaxKernel {
    pub fn new(nu: &DiscreteMeasure, potentials: Vec<f64>, tau: f64, p: f64) -> Result<Self> {
        if potentials.len() != nu.len() {
            return Err(Error::LengthMismatch("one potential per target atom".into()));
        }
        let k = SoftmaxKernel {
            targets: nu.points().to_vec(),
            log_weights: nu
                .weights()
                .iter()
                .map(|&w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY })
                .collect(),
            potentials,
            tau,
            p,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        if self.targets.is_empty()
            || self.targets.len() != self.log_weights.len()
            || self.targets.len() != self.potentials.len()
        {
            return Err(Error::InvalidParameter("softmax kernel: inconsistent lengths".into()));
        }
        Ok(())
    }

    /// Conditional distribution at `x` as `(target index, probability)`.
    pub fn row(&self, x: &Point) -> Vec<(usize, f64)> {
        let logits: Vec<f64> = self
            .targets
            .iter()
            .zip(&self.log_weights)
            .zip(&self.potentials)
            .map(|((y, lw), g)| lw + (g - powered_distance(x, y, self.p)) / self.tau)
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter()
            .enumerate()
            .filter(|e| e.1 > 0.0)
            .map(|(j, w)| (j, w / total))
            .collect()
    }
}

/// The one-dimensional quantile kernel G^{-1}∘F̃ of a fitted pair of
/// empirical measures. At an atom of the source, whose CDF jumps over
/// (P_{l-1}, P_l], the output spreads uniformly in quantile space over the
/// target quantile function on that interval. Elsewhere the output is the
/// point mass at G^{-1}(F(x)).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileKernel {
    /// Distinct source atoms, increasing.
    pub source_values: Vec<f64>,
    /// Source CDF at each atom; the last entry is 1.
    pub source_cdf: Vec<f64>,
    pub target_values: Vec<f64>,
    pub target_cdf: Vec<f64>,
}

fn sorted_cdf(m: &DiscreteMeasure) -> (Vec<f64>, Vec<f64>) {
    let mut atoms: Vec<(f64, f64)> = m.iter().map(|(p, w)| (p[0], w)).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut values: Vec<f64> = Vec::new();
    let mut cdf: Vec<f64> = Vec::new();
    let mut acc = 0.0;
    for (v, w) in atoms {
        acc += w;
        if values.last() == Some(&v) {
            *cdf.last_mut().unwrap() = acc;
        } else {
            values.push(v);
            cdf.push(acc);
        }
    }
    // pin the total so both sides end exactly at 1
    *cdf.last_mut().unwrap() = 1.0;
    (values, cdf)
}

impl QuantileKernel {
    pub fn fit(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Self> {
        for m in [mu, nu] {
            if m.dim() != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 1,
                    found: m.dim(),
                });
            }
        }
        let (source_values, source_cdf) = sorted_cdf(mu);
        let (target_values, target_cdf) = sorted_cdf(nu);
        Ok(QuantileKernel {
            source_values,
            source_cdf,
            target_values,
            target_cdf,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: &[f64], c: &[f64]| {
            !v.is_empty() && v.len() == c.len() && v.windows(2).all(|w| w[0] < w[1])
        };
        if !ok(&self.source_values, &self.source_cdf) || !ok(&self.target_values, &self.target_cdf) {
            return Err(Error::InvalidParameter("quantile kernel: malformed CDF tables".into()));
        }
        Ok(())
    }

    /// Smallest target index whose CDF reaches `u`.
    fn quantile_index(&self, u: f64) -> usize {
        self.target_cdf
            .partition_point(|&q| q < u)
            .min(self.target_values.len() - 1)
    }

    /// Conditional distribution at `x` over `target_values` indices.
    pub fn row(&self, x: f64) -> Vec<(usize, f64)> {
        match self.source_values.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(l) => {
                let lo = if l == 0 { 0.0 } else { self.source_cdf[l - 1] };
                let hi = self.source_cdf[l];
                let width = hi - lo;
                let mut row = Vec::new();
                let mut j = self.quantile_index(lo).min(self.target_values.len() - 1);
                // the interval (lo, hi] starts inside target interval j or later
                while j < self.target_values.len() {
                    let q_lo = if j == 0 { 0.0 } else { self.target_cdf[j - 1] };
                    let q_hi = self.target_cdf[j];
                    if q_lo >= hi {
                        break;
                    }
                    let overlap = q_hi.min(hi) - q_lo.max(lo);
                    if overlap > 0.0 {
                        row.push((j, overlap / width));
                    }
                    j += 1;
                }
                let total: f64 = row.iter().map(|e| e.1).sum();
                row.iter_mut().for_each(|e| e.1 /= total);
                row
            }
            Err(pos) => {
                let u = if pos == 0 { 0.0 } else { self.source_cdf[pos - 1] };
                vec![(self.quantile_index(u), 1.0)]
            }
        }
    }

    pub fn target_point(&self, j: usize) -> Point {
        Point::from_vec(vec![self.target_values[j]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::uniform(xs.iter().map(|&x| Point::new(vec![x]).unwrap()).collect()).unwrap()
    }

    #[test]
    fn quantile_rows_on_atoms_and_between() {
        let k = QuantileKernel::fit(&line(&[0.0, 1.0]), &line(&[10.0, 20.0, 30.0, 40.0])).unwrap();
        assert_eq!(k.row(0.0), vec![(0, 0.5), (1, 0.5)]);
        assert_eq!(k.row(1.0), vec![(2, 0.5), (3, 0.5)]);
        // F(0.5) = 1/2 → G^{-1}(1/2) = 20
        assert_eq!(k.row(0.5), vec![(1, 1.0)]);
        assert_eq!(k.row(-3.0), vec![(0, 1.0)]);
        assert_eq!(k.row(7.0), vec![(3, 1.0)]);
    }

    #[test]
    fn equal_measures_give_identity() {
        let m = line(&[0.3, 0.1, 0.2, 0.2]);
        let k = QuantileKernel::fit(&m, &m).unwrap();
        assert_eq!(k.source_values, vec![0.1, 0.2, 0.3]);
        for (l, v) in k.source_values.iter().enumerate() {
            assert_eq!(k.row(*v), vec![(l, 1.0)]);
        }
    }

    #[test]
    fn softmax_rows_normalize() {
        let nu = line(&[0.0, 1.0, 2.0]);
        let k = SoftmaxKernel::new(&nu, vec![0.0, 0.1, -0.2], 0.05, 2.0).unwrap();
        let row = k.row(&Point::new(vec![0.9]).unwrap());
        let s: f64 = row.iter().map(|e| e.1).sum();
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(row.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0, 1);
        assert!(SoftmaxKernel::new(&nu, vec![0.0; 3], 0.0, 2.0).is_err());
    }
}
