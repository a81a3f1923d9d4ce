//! Kernel estimators fitted from source and target samples.

mod cdf1d;
mod config;
mod entropic;
mod nn;
mod partition;
mod robust;
mod rounding;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelPipeline, PointMap};
use crate::measures::{DiscreteMeasure, Point};
use crate::ot::{exact_ot, round_plan_to_feasible, sinkhorn, SinkhornOptions, TransportPlan};

pub use cdf1d::cdf_estimator_1d;
pub use config::{EstimatorConfig, EstimatorKind};
pub use entropic::{default_entropic_tau, entropic_estimator};
pub use nn::nn_estimator;
pub use partition::{shell_index, CellId, Partition, ShellPartition};
pub use robust::{fit_robust_conv, robust_conv_estimator, robust_sigma, RobustFit};
pub use rounding::{fit_rounding, rounding_estimator, RoundingFit, RoundingScheme};

/// A fitted estimator: the kernel plus the hyperparameters actually used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedEstimator {
    pub name: String,
    pub pipeline: KernelPipeline,
    pub params: BTreeMap<String, f64>,
    /// Non-fatal conditions met while fitting (solver fallbacks, split rows).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl FittedEstimator {
    fn new(kind: EstimatorKind, pipeline: KernelPipeline) -> Self {
        FittedEstimator {
            name: kind.name().to_string(),
            pipeline,
            params: BTreeMap::new(),
            flags: Vec::new(),
        }
    }

    fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }
}

/// Fit the named estimator on samples `xs ~ μ` and `ys ~ ν`.
pub fn fit(kind: EstimatorKind, xs: &[Point], ys: &[Point], cfg: &EstimatorConfig) -> Result<FittedEstimator> {
    let fitted = match kind {
        EstimatorKind::Entropic => entropic_estimator(xs, ys, cfg)?,
        EstimatorKind::RoundingCubic => rounding_estimator(xs, ys, RoundingScheme::Cubic, cfg)?,
        EstimatorKind::RoundingShell => rounding_estimator(xs, ys, RoundingScheme::Shell, cfg)?,
        EstimatorKind::Nn => nn_estimator(xs, ys)?,
        EstimatorKind::Cdf1d => cdf_estimator_1d(xs, ys, cfg.p)?,
        EstimatorKind::RobustConv => robust_conv_estimator(xs, ys, cfg)?,
        EstimatorKind::Null => {
            let d = xs
                .first()
                .or(ys.first())
                .map(Point::dim)
                .ok_or(Error::Empty("samples"))?;
            null_estimator(d)?
        }
    };
    for flag in &fitted.flags {
        log::warn!("{}: {flag}", fitted.name);
    }
    Ok(fitted)
}

/// The constant kernel x ↦ δ_0.
pub fn null_estimator(d: usize) -> Result<FittedEstimator> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let pipeline = KernelPipeline::map(PointMap::Constant {
        point: Point::origin(d),
    })?;
    Ok(FittedEstimator::new(EstimatorKind::Null, pipeline))
}

fn check_samples(xs: &[Point], ys: &[Point]) -> Result<usize> {
    let d = xs.first().ok_or(Error::Empty("source samples"))?.dim();
    let dy = ys.first().ok_or(Error::Empty("target samples"))?.dim();
    if dy != d {
        return Err(Error::DimensionMismatch { expected: d, found: dy });
    }
    if let Some(bad) = xs.iter().chain(ys).find(|x| x.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.dim(),
        });
    }
    Ok(d)
}

fn in_unit_cube(x: &Point) -> bool {
    x.coords().iter().all(|&c| (-1e-12..=1.0 + 1e-12).contains(&c))
}

/// A plan between `mu` and `nu` with cost within `accuracy` of optimal (up to
/// Sinkhorn's own tolerance): exact when both supports fit under
/// `exact_limit`, else Sinkhorn at τ = accuracy / (2d·log(n+1)) followed by
/// feasibility rounding.
pub(crate) struct PreliminaryPlan {
    pub plan: TransportPlan,
    pub exact: bool,
    pub tau: Option<f64>,
    pub converged: bool,
}

pub(crate) fn preliminary_plan(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    accuracy: f64,
    exact_limit: usize,
) -> Result<PreliminaryPlan> {
    if mu.len() <= exact_limit && nu.len() <= exact_limit {
        return Ok(PreliminaryPlan {
            plan: exact_ot(mu, nu, p)?,
            exact: true,
            tau: None,
            converged: true,
        });
    }
    let n = mu.len().max(nu.len()) as f64;
    let tau = accuracy / (2.0 * mu.dim() as f64 * (n + 1.0).ln());
    let opts = SinkhornOptions::default();
    let sol = sinkhorn(mu, nu, p, tau, opts.tol, opts.max_iter)?;
    let plan = round_plan_to_feasible(&sol.raw_plan(), mu, nu, p)?;
    Ok(PreliminaryPlan {
        plan,
        exact: false,
        tau: Some(tau),
        converged: sol.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error_metric::transportation_error;
    use crate::kernels::MonteCarloConfig;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn null_maps_to_origin() {
        let k = null_estimator(3).unwrap().pipeline;
        let out = k.distribution(&pt(&[0.3, -2.0, 7.0])).unwrap();
        assert_eq!(out, vec![(Point::origin(3), 1.0)]);
        let zero = DiscreteMeasure::dirac(Point::origin(2));
        let null2 = null_estimator(2).unwrap().pipeline;
        let r = transportation_error(&null2, &zero, &zero, 1.0, &MonteCarloConfig::default()).unwrap();
        assert_eq!(r.ep, 0.0);
    }

    #[test]
    fn dispatch_rejects_mismatched_samples() {
        let cfg = EstimatorConfig::default();
        let xs = vec![pt(&[0.1, 0.2])];
        let ys = vec![pt(&[0.1])];
        assert!(fit(EstimatorKind::RoundingCubic, &xs, &ys, &cfg).is_err());
        assert!(fit(EstimatorKind::Nn, &[], &ys, &cfg).is_err());
    }

    #[test]
    fn preliminary_plan_sinkhorn_branch_is_near_optimal() {
        use crate::rng::stream;
        use rand::Rng;
        let mut rng = stream(4, &[]);
        let pts = |rng: &mut crate::rng::StdRng| -> Vec<Point> {
            (0..40).map(|_| pt(&[rng.random(), rng.random()])).collect()
        };
        let mu = DiscreteMeasure::uniform(pts(&mut rng)).unwrap();
        let nu = DiscreteMeasure::uniform(pts(&mut rng)).unwrap();
        let exact = preliminary_plan(&mu, &nu, 1.0, 0.05, 100).unwrap();
        let approx = preliminary_plan(&mu, &nu, 1.0, 0.05, 10).unwrap();
        assert!(exact.exact && !approx.exact);
        assert!(approx.plan.is_feasible(1e-9));
        let gap = approx.plan.cost_value() - exact.plan.cost_value();
        assert!((-1e-12..=0.05).contains(&gap), "gap {gap}");
    }
}
