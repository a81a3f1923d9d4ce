//! Adversarial sample corruption (TV relocation plus W_p nudging), the
//! outlier-robust Wasserstein distance, and lower-bound instances.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{powered_distance, DiscreteMeasure, Point};
use crate::ot::{check_exponent, solve_real_costs, DEFAULT_SUPPORT_CAP};

/// At most a fraction `eps` of the points may be replaced arbitrarily; the
/// rest may move with average p-th power displacement at most `rho^p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionBudget {
    pub eps: f64,
    pub rho: f64,
    #[serde(default = "one")]
    pub p: f64,
}

fn one() -> f64 {
    1.0
}

impl CorruptionBudget {
    pub fn new(eps: f64, rho: f64, p: f64) -> Result<Self> {
        let b = CorruptionBudget { eps, rho, p };
        b.validate()?;
        Ok(b)
    }

    pub fn clean() -> Self {
        CorruptionBudget { eps: 0.0, rho: 0.0, p: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent(self.p)?;
        if !(0.0..=1.0).contains(&self.eps) {
            return Err(Error::InvalidParameter(format!("eps must lie in [0, 1], got {}", self.eps)));
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidParameter(format!("rho must be nonnegative, got {}", self.rho)));
        }
        Ok(())
    }

    /// Number of points the TV part may replace: ⌊εn⌋.
    pub fn relocation_count(&self, n: usize) -> usize {
        ((self.eps * n as f64 + 1e-9).floor() as usize).min(n)
    }
}

/// Where relocated points are drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutlierModel {
    /// Uniform on the sphere of radius `scale × diameter` around the centroid
    /// of the clean sample (radius `scale` when the sample is a single point).
    Shell { scale: f64 },
    /// Uniform on the axis-aligned box `[lo, hi]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Default for OutlierModel {
    fn default() -> Self {
        OutlierModel::Shell { scale: 10.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryStrategy {
    /// Replace ⌊εn⌋ points, chosen without replacement, by outliers.
    RandomRelocate {
        #[serde(default)]
        outliers: OutlierModel,
    },
    /// Move every point by the same vector of norm ρ; the default direction
    /// is (1, …, 1)/√d.
    DirectedShift {
        #[serde(default)]
        direction: Option<Vec<f64>>,
    },
    /// Shift everything, then relocate ⌊εn⌋ points.
    Composite {
        #[serde(default)]
        outliers: OutlierModel,
        #[serde(default)]
        direction: Option<Vec<f64>>,
    },
}

impl AdversaryStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            AdversaryStrategy::RandomRelocate { .. } => "relocate",
            AdversaryStrategy::DirectedShift { .. } => "shift",
            AdversaryStrategy::Composite { .. } => "composite",
        }
    }

    fn parts(&self) -> (Option<&Option<Vec<f64>>>, Option<&OutlierModel>) {
        match self {
            AdversaryStrategy::RandomRelocate { outliers } => (None, Some(outliers)),
            AdversaryStrategy::DirectedShift { direction } => (Some(direction), None),
            AdversaryStrategy::Composite { outliers, direction } => (Some(direction), Some(outliers)),
        }
    }

    /// Replace the outlier model (no effect on a pure shift).
    pub fn with_outliers(self, model: OutlierModel) -> Self {
        match self {
            AdversaryStrategy::RandomRelocate { .. } => AdversaryStrategy::RandomRelocate { outliers: model },
            AdversaryStrategy::Composite { direction, .. } => AdversaryStrategy::Composite {
                outliers: model,
                direction,
            },
            shift => shift,
        }
    }
}

impl fmt::Display for AdversaryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AdversaryStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relocate" => Ok(AdversaryStrategy::RandomRelocate {
                outliers: OutlierModel::default(),
            }),
            "shift" => Ok(AdversaryStrategy::DirectedShift { direction: None }),
            "composite" => Ok(AdversaryStrategy::Composite {
                outliers: OutlierModel::default(),
                direction: None,
            }),
            _ => Err(Error::InvalidParameter(format!(
                "unknown adversary {s:?}; expected relocate, shift or composite"
            ))),
        }
    }
}

/// Corrupted samples with the bookkeeping needed to check the budget.
#[derive(Clone, Debug, PartialEq)]
pub struct Corruption {
    pub samples: Vec<Point>,
    /// Indices replaced by outliers, ascending.
    pub relocated: Vec<usize>,
    /// The rigid shift applied to every point before relocation.
    pub shift: Vec<f64>,
}

fn unit_direction(direction: &Option<Vec<f64>>, d: usize) -> Result<Vec<f64>> {
    match direction {
        None => Ok(vec![1.0 / (d as f64).sqrt(); d]),
        Some(v) => {
            if v.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: v.len() });
            }
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::InvalidParameter("shift direction must be a nonzero vector".into()));
            }
            Ok(v.iter().map(|c| c / norm).collect())
        }
    }
}

fn draw_outlier<R: Rng + ?Sized>(
    model: &OutlierModel,
    centroid: &[f64],
    diameter: f64,
    rng: &mut R,
) -> Result<Point> {
    let d = centroid.len();
    match model {
        OutlierModel::Shell { scale } => {
            if !(*scale > 0.0) || !scale.is_finite() {
                return Err(Error::InvalidParameter(format!("outlier scale must be positive, got {scale}")));
            }
            let radius = scale * if diameter > 0.0 { diameter } else { 1.0 };
            let mut z: Vec<f64> = vec![0.0; d];
            let norm = loop {
                for c in z.iter_mut() {
                    *c = StandardNormal.sample(rng);
                }
                let norm = z.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    break norm;
                }
            };
            Point::new(centroid.iter().zip(&z).map(|(c, v)| c + radius * v / norm).collect())
        }
        OutlierModel::Box { lo, hi } => {
            if lo.len() != d || hi.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: lo.len().min(hi.len()),
                });
            }
            if lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
                return Err(Error::InvalidParameter("outlier box needs lo ≤ hi".into()));
            }
            Point::new(lo.iter().zip(hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect())
        }
    }
}

/// Apply the strategy within the budget and keep track of what moved.
pub fn corrupt_with_record<R: Rng + ?Sized>(
    samples: &[Point],
    budget: &CorruptionBudget,
    strategy: &AdversaryStrategy,
    rng: &mut R,
) -> Result<Corruption> {
    budget.validate()?;
    let n = samples.len();
    let d = samples.first().ok_or(Error::Empty("samples"))?.dim();
    let (direction, outliers) = strategy.parts();
    let shift = match direction {
        Some(dir) => unit_direction(dir, d)?.into_iter().map(|c| c * budget.rho).collect(),
        None => vec![0.0; d],
    };
    let mut out: Vec<Point> = samples
        .iter()
        .map(|x| Point::new(x.coords().iter().zip(&shift).map(|(a, s)| a + s).collect()))
        .collect::<Result<_>>()?;
    let mut relocated = Vec::new();
    if let Some(model) = outliers {
        let k = budget.relocation_count(n);
        if k == 0 && budget.eps > 0.0 {
            log::warn!("eps = {} relocates no point out of {n}", budget.eps);
        }
        if k > 0 {
            let mut centroid = vec![0.0; d];
            for x in samples {
                for (c, v) in centroid.iter_mut().zip(x.coords()) {
                    *c += v / n as f64;
                }
            }
            let diameter = crate::measures::diameter(samples);
            relocated = index::sample(rng, n, k).into_vec();
            relocated.sort_unstable();
            for &i in &relocated {
                out[i] = draw_outlier(model, &centroid, diameter, rng)?;
            }
        }
    }
    let result = Corruption {
        samples: out,
        relocated,
        shift,
    };
    debug_assert!(verify_budget(samples, &result.samples, budget));
    Ok(result)
}

/// Corrupt `samples` according to `strategy`; the output has the same length.
pub fn corrupt<R: Rng + ?Sized>(
    samples: &[Point],
    budget: &CorruptionBudget,
    strategy: &AdversaryStrategy,
    rng: &mut R,
) -> Result<Vec<Point>> {
    Ok(corrupt_with_record(samples, budget, strategy, rng)?.samples)
}

/// Whether some index set S with |S| ≥ (1−ε)n has
/// (1/n)·Σ_{i∈S} ‖x̃_i − x_i‖^p ≤ ρ^p. Keeping the smallest displacements
/// is optimal, so the check is exact.
pub fn verify_budget(original: &[Point], corrupted: &[Point], budget: &CorruptionBudget) -> bool {
    if original.len() != corrupted.len() {
        return false;
    }
    let n = original.len();
    let mut moves: Vec<f64> = original
        .iter()
        .zip(corrupted)
        .map(|(a, b)| powered_distance(a, b, budget.p))
        .collect();
    moves.sort_by(f64::total_cmp);
    let keep = n - budget.relocation_count(n);
    let total: f64 = moves[..keep].iter().sum();
    total / n.max(1) as f64 <= budget.rho.powf(budget.p) * (1.0 + 1e-9) + 1e-12
}

/// Outlier-robust W_p: min over μ' with TV(μ', μ) ≤ ε of W_p(μ', ν).
///
/// Solved as one transport problem with a dummy atom of mass ε on each side.
/// The source dummy creates mass anywhere on ν at no cost, the target dummy
/// discards mass of μ at no cost, and dummy-to-dummy flow is unused slack.
/// The problem is symmetric in μ and ν.
pub fn robust_wp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, eps: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("eps must lie in [0, 1], got {eps}")));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    for size in [mu.len(), nu.len()] {
        if size > DEFAULT_SUPPORT_CAP {
            return Err(Error::SupportCap {
                size,
                cap: DEFAULT_SUPPORT_CAP,
            });
        }
    }
    if eps >= 1.0 {
        return Ok(0.0);
    }
    let (n, m) = (mu.len(), nu.len());
    let mut supply = mu.weights().to_vec();
    let mut demand = nu.weights().to_vec();
    if eps > 0.0 {
        supply.push(eps);
        demand.push(eps);
    }
    let cols = demand.len();
    let mut cost = vec![0.0; supply.len() * cols];
    for i in 0..n {
        for j in 0..m {
            cost[i * cols + j] = powered_distance(&mu.points()[i], &nu.points()[j], p);
        }
    }
    let flows = solve_real_costs(&supply, &demand, &cost);
    let value: f64 = flows.iter().map(|&(i, j, f)| f * cost[i * cols + j]).sum();
    Ok(value.max(0.0).powf(1.0 / p))
}

/// Two-point target ν = (1−ε)δ_0 + εδ_y, y = (1, …, 1), with the source pair
/// μ1 = ν and μ2 = δ_0 at TV distance ε; either is consistent with the
/// observation ν.
#[derive(Clone, Debug)]
pub struct TvInstance {
    pub nu: DiscreteMeasure,
    pub mu1: DiscreteMeasure,
    pub mu2: DiscreteMeasure,
    pub observed: DiscreteMeasure,
}

pub fn lb_instance_tv(eps: f64, d: usize) -> Result<TvInstance> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let nu = DiscreteMeasure::new(vec![Point::origin(d), Point::new(vec![1.0; d])?], vec![1.0 - eps, eps])?;
    Ok(TvInstance {
        mu1: nu.clone(),
        mu2: DiscreteMeasure::dirac(Point::origin(d)),
        observed: nu.clone(),
        nu,
    })
}

/// ν = ½δ_{−y} + ½δ_y and sources μ_t = (½−t)δ_{−cy} + (½+t)δ_{cy}, with
/// c = t^{1/p} = min(ρ^{1/2}d^{−1/4}/2, ½). μ_0 and μ_t are within W_p ρ.
#[derive(Clone, Debug)]
pub struct WpInstance {
    pub nu: DiscreteMeasure,
    pub mu0: DiscreteMeasure,
    pub mut_: DiscreteMeasure,
    pub c: f64,
    pub t: f64,
}

pub fn lb_instance_wp(rho: f64, d: usize, p: f64) -> Result<WpInstance> {
    check_exponent(p)?;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let c = (rho.sqrt() * (d as f64).powf(-0.25) / 2.0).min(0.5);
    let t = c.powf(p);
    let y = |s: f64| Point::new(vec![s; d]);
    let two_point = |t: f64| DiscreteMeasure::new(vec![y(-c)?, y(c)?], vec![0.5 - t, 0.5 + t]);
    Ok(WpInstance {
        nu: DiscreteMeasure::new(vec![y(-1.0)?, y(1.0)?], vec![0.5, 0.5])?,
        mu0: two_point(0.0)?,
        mut_: two_point(t)?,
        c,
        t,
    })
}
