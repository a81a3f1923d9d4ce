use crate::error::{Error, Result};
use crate::kernels::{KernelPipeline, SoftmaxKernel, Stage};
use crate::measures::{DiscreteMeasure, Point};
use crate::ot::{check_exponent, sinkhorn, SinkhornOptions};

use super::{check_samples, in_unit_cube, EstimatorConfig, EstimatorKind, FittedEstimator};

/// τ = d^{p/4} · n^{−1/max(2d, 4)} · log n, with log n replaced by log 2 at
/// n = 1 so τ stays positive.
pub fn default_entropic_tau(n: usize, d: usize, p: f64) -> f64 {
    let n = n.max(1) as f64;
    let d = d as f64;
    d.powf(p / 4.0) * n.powf(-1.0 / (2.0 * d).max(4.0)) * n.max(2.0).ln()
}

/// Solve entropic OT between the empirical measures and extend the
/// conditional plan to all of ℝ^d through the target potential:
/// κ_x ∝ ν_j exp((g_j − ‖x − y_j‖^p)/τ).
pub fn entropic_estimator(xs: &[Point], ys: &[Point], cfg: &EstimatorConfig) -> Result<FittedEstimator> {
    let d = check_samples(xs, ys)?;
    check_exponent(cfg.p)?;
    if let Some(x) = xs.iter().chain(ys).find(|x| !in_unit_cube(x)) {
        return Err(Error::InvalidParameter(format!(
            "entropic estimator needs samples in [0,1]^d, got {:?}",
            x.coords()
        )));
    }
    let tau = cfg.tau.unwrap_or_else(|| default_entropic_tau(xs.len(), d, cfg.p));
    let mu = DiscreteMeasure::uniform(xs.to_vec())?;
    let nu = DiscreteMeasure::uniform(ys.to_vec())?;
    let opts = SinkhornOptions::default();
    let sol = sinkhorn(&mu, &nu, cfg.p, tau, opts.tol, opts.max_iter)?;
    let kernel = SoftmaxKernel::new(&nu, sol.g.clone(), tau, cfg.p)?;
    let pipeline = KernelPipeline::new(vec![Stage::Softmax { kernel }])?;
    let mut out = FittedEstimator::new(EstimatorKind::Entropic, pipeline)
        .param("p", cfg.p)
        .param("tau", tau)
        .param("sinkhorn_iterations", sol.iterations as f64);
    if !sol.converged {
        out.flags.push(format!(
            "sinkhorn stopped at marginal error {:.3e}",
            sol.marginal_error
        ));
    }
    Ok(out)
}
