use crate::error::Result;
use crate::kernels::{kernel_from_plan, KernelPipeline, Stage};
use crate::measures::{DiscreteMeasure, Point};
use crate::ot::{check_exponent, TransportPlan};

use super::{check_samples, preliminary_plan, EstimatorConfig, EstimatorKind, FittedEstimator, Partition};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoundingScheme {
    Cubic,
    Shell,
}

/// Everything produced while fitting a rounding estimator.
#[derive(Clone, Debug)]
pub struct RoundingFit {
    pub partition: Partition,
    /// The source sample pushed onto cell centers, one atom per occupied cell.
    pub rounded: DiscreteMeasure,
    /// Plan from `rounded` to the target sample.
    pub plan: TransportPlan,
    pub exact: bool,
    pub scale: f64,
    pub accuracy: f64,
    pub sinkhorn_tau: Option<f64>,
    pub converged: bool,
    pub pipeline: KernelPipeline,
}

/// Quantize the source sample onto a partition, solve OT from the quantized
/// measure to the target sample, and return the disintegrated plan composed
/// with the rounding map. Points landing in cells with no source sample are
/// sent to the nearest occupied center.
pub fn fit_rounding(xs: &[Point], ys: &[Point], scheme: RoundingScheme, cfg: &EstimatorConfig) -> Result<RoundingFit> {
    let d = check_samples(xs, ys)?;
    check_exponent(cfg.p)?;
    let n = xs.len() as f64;
    let rate = 1.0 / (d as f64 + 2.0 * cfg.p);
    let default_scale = n.powf(-rate);
    let accuracy = cfg.accuracy.unwrap_or(n.powf(-cfg.p * rate));
    let (partition, scale) = match scheme {
        RoundingScheme::Cubic => {
            let side = cfg.side.unwrap_or(default_scale);
            (Partition::cubic(side, d)?, side)
        }
        RoundingScheme::Shell => {
            let delta = cfg.delta.unwrap_or(default_scale);
            (Partition::shell(delta, d)?, delta)
        }
    };
    let centers: Vec<Point> = xs.iter().map(|x| partition.round_point(x)).collect();
    let rounded = DiscreteMeasure::uniform(centers)?.merged();
    let target = DiscreteMeasure::uniform(ys.to_vec())?;
    let pre = preliminary_plan(&rounded, &target, cfg.p, accuracy, cfg.exact_limit)?;
    let kernel = kernel_from_plan(&pre.plan);
    let pipeline = KernelPipeline::new(vec![
        Stage::Round {
            partition: partition.clone(),
        },
        Stage::NearestLookup {
            anchors: rounded.points().to_vec(),
        },
        Stage::Discrete { kernel },
    ])?;
    Ok(RoundingFit {
        partition,
        rounded,
        plan: pre.plan,
        exact: pre.exact,
        scale,
        accuracy,
        sinkhorn_tau: pre.tau,
        converged: pre.converged,
        pipeline,
    })
}

pub fn rounding_estimator(
    xs: &[Point],
    ys: &[Point],
    scheme: RoundingScheme,
    cfg: &EstimatorConfig,
) -> Result<FittedEstimator> {
    let fit = fit_rounding(xs, ys, scheme, cfg)?;
    let (kind, scale_key) = match scheme {
        RoundingScheme::Cubic => (EstimatorKind::RoundingCubic, "side"),
        RoundingScheme::Shell => (EstimatorKind::RoundingShell, "delta"),
    };
    let mut out = FittedEstimator::new(kind, fit.pipeline)
        .param("p", cfg.p)
        .param(scale_key, fit.scale)
        .param("accuracy", fit.accuracy)
        .param("cells", fit.rounded.len() as f64)
        .param("exact_solve", if fit.exact { 1.0 } else { 0.0 });
    if let Some(tau) = fit.sinkhorn_tau {
        out = out.param("sinkhorn_tau", tau);
    }
    if !fit.converged {
        out.flags.push("sinkhorn did not converge; plan was rounded to feasibility".into());
    }
    Ok(out)
}
