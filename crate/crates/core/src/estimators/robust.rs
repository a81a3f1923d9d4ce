use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{kernel_from_plan, nearest_anchor, KernelPipeline, Stage};
use crate::measures::{DiscreteMeasure, Point};
use crate::ot::TransportPlan;
use crate::rng::{label, stream};

use super::{check_samples, in_unit_cube, preliminary_plan, EstimatorConfig, EstimatorKind, FittedEstimator};

const DRAW_CHUNK: usize = 4096;

/// σ = 3^{d/(2+d)}·(nd)^{−1/(d+2)} + ρ^{1/2}·d^{−1/4}.
pub fn robust_sigma(n: usize, d: usize, rho: f64) -> f64 {
    let (n, d) = (n.max(1) as f64, d as f64);
    3f64.powf(d / (2.0 + d)) * (n * d).powf(-1.0 / (d + 2.0)) + rho.max(0.0).sqrt() * d.powf(-0.25)
}

/// Everything produced while fitting the convolutional robust estimator.
#[derive(Clone, Debug)]
pub struct RobustFit {
    pub pipeline: KernelPipeline,
    pub sigma: f64,
    pub m: usize,
    pub tau_acc: f64,
    /// Distinct source samples S.
    pub support: Vec<Point>,
    /// Empirical measure of the m smoothed, projected draws (atoms in S).
    pub smoothed: DiscreteMeasure,
    /// Uniform measure on the target sample T.
    pub target: DiscreteMeasure,
    /// Plan from `smoothed` to `target` used for the output kernel.
    pub plan: TransportPlan,
    pub exact: bool,
    pub converged: bool,
}

/// Randomized rounding: draw m points from the source sample, add N(0, σ²I)
/// noise, project each back onto the sample, and transport the resulting
/// empirical measure S' to the target sample to within τ_acc of optimal.
/// The returned kernel is κ̄ ∘ proj_S ∘ N(·, σ²I); projections that land on
/// a sample point never hit during fitting are sent to the nearest atom of S'.
pub fn fit_robust_conv(xs: &[Point], ys: &[Point], cfg: &EstimatorConfig) -> Result<RobustFit> {
    let d = check_samples(xs, ys)?;
    if cfg.p != 1.0 {
        return Err(Error::InvalidParameter(format!(
            "the convolutional robust estimator is defined for p = 1 only, got p = {}",
            cfg.p
        )));
    }
    let n = xs.len();
    let m = cfg.m.unwrap_or(n.saturating_mul(n)).max(1);
    let tau_acc = cfg.tau_acc.unwrap_or((n as f64).powf(-1.0 / (d as f64 + 2.0)));
    let sigma = cfg.sigma.unwrap_or_else(|| robust_sigma(n, d, cfg.rho));
    let support: Vec<Point> = DiscreteMeasure::uniform(xs.to_vec())?.merged().points().to_vec();

    let tag = label("robust-conv");
    let chunks = m.div_ceil(DRAW_CHUNK);
    let partial: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(cfg.seed, &[tag, c as u64]);
            let pick = Uniform::new(0, xs.len()).expect("nonempty sample");
            let mut counts = vec![0u64; support.len()];
            let mut buf = vec![0.0; d];
            for _ in 0..DRAW_CHUNK.min(m - c * DRAW_CHUNK) {
                let x = &xs[pick.sample(&mut rng)];
                for (b, &xc) in buf.iter_mut().zip(x.coords()) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *b = xc + sigma * z;
                }
                counts[nearest_anchor(&support, &Point::from_vec(buf.clone()))] += 1;
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; support.len()];
    for part in partial {
        for (c, v) in counts.iter_mut().zip(part) {
            *c += v;
        }
    }
    let (hit_points, hit_weights): (Vec<Point>, Vec<f64>) = support
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(p, &c)| (p.clone(), c as f64 / m as f64))
        .unzip();
    let smoothed = DiscreteMeasure::new(hit_points, hit_weights)?;
    let target = DiscreteMeasure::uniform(ys.to_vec())?;
    let pre = preliminary_plan(&smoothed, &target, 1.0, tau_acc, cfg.exact_limit)?;
    let pipeline = KernelPipeline::new(vec![
        Stage::Gaussian { sigma },
        Stage::NearestLookup {
            anchors: support.clone(),
        },
        Stage::NearestLookup {
            anchors: smoothed.points().to_vec(),
        },
        Stage::Discrete {
            kernel: kernel_from_plan(&pre.plan),
        },
    ])?;
    Ok(RobustFit {
        pipeline,
        sigma,
        m,
        tau_acc,
        support,
        smoothed,
        target,
        plan: pre.plan,
        exact: pre.exact,
        converged: pre.converged,
    })
}

pub fn robust_conv_estimator(xs: &[Point], ys: &[Point], cfg: &EstimatorConfig) -> Result<FittedEstimator> {
    let fit = fit_robust_conv(xs, ys, cfg)?;
    let mut out = FittedEstimator::new(EstimatorKind::RobustConv, fit.pipeline)
        .param("p", 1.0)
        .param("sigma", fit.sigma)
        .param("m", fit.m as f64)
        .param("tau_acc", fit.tau_acc)
        .param("eps", cfg.eps)
        .param("rho", cfg.rho)
        .param("exact_solve", if fit.exact { 1.0 } else { 0.0 });
    if !fit.converged {
        out.flags.push("sinkhorn did not converge; plan was rounded to feasibility".into());
    }
    let outside = ys.iter().filter(|y| !in_unit_cube(y)).count();
    if outside > 0 {
        out.flags.push(format!("{outside} target samples lie outside [0,1]^d"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::evaluate_at;
    use crate::ot::wasserstein_p;
    use rand::Rng;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn cloud(n: usize, d: usize, seed: u64) -> Vec<Point> {
        let mut rng = stream(seed, &[]);
        (0..n)
            .map(|_| pt(&(0..d).map(|_| rng.random::<f64>()).collect::<Vec<_>>()))
            .collect()
    }

    #[test]
    fn sigma_formula() {
        let s = robust_sigma(200, 3, 0.04);
        let want = 3f64.powf(0.6) * 600f64.powf(-0.2) + 0.2 * 3f64.powf(-0.25);
        assert!((s - want).abs() < 1e-12);
    }

    #[test]
    fn plan_meets_accuracy_and_outputs_stay_in_target() {
        let xs = cloud(30, 2, 1);
        let ys = cloud(30, 2, 2);
        let fit = fit_robust_conv(&xs, &ys, &EstimatorConfig::default()).unwrap();
        assert_eq!(fit.m, 900);
        assert!((fit.smoothed.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let w = wasserstein_p(&fit.smoothed, &fit.target, 1.0).unwrap();
        assert!(fit.plan.cost_value() <= w + fit.tau_acc + 1e-12);
        let keys: std::collections::HashSet<_> = ys.iter().map(Point::key).collect();
        let mut rng = stream(3, &[]);
        for _ in 0..300 {
            let x = pt(&[rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>()]);
            assert!(keys.contains(&evaluate_at(&fit.pipeline, &x, &mut rng).unwrap().key()));
        }
    }

    #[test]
    fn sinkhorn_branch_meets_accuracy() {
        let xs = cloud(25, 2, 4);
        let ys = cloud(25, 2, 5);
        let mut cfg = EstimatorConfig::default();
        cfg.exact_limit = 5;
        let fit = fit_robust_conv(&xs, &ys, &cfg).unwrap();
        assert!(!fit.exact);
        let w = wasserstein_p(&fit.smoothed, &fit.target, 1.0).unwrap();
        assert!(fit.plan.cost_value() <= w + fit.tau_acc);
    }

    #[test]
    fn seeded_and_p_restricted() {
        let xs = cloud(20, 3, 6);
        let ys = cloud(20, 3, 7);
        let cfg = EstimatorConfig::default();
        let a = robust_conv_estimator(&xs, &ys, &cfg).unwrap();
        let b = robust_conv_estimator(&xs, &ys, &cfg).unwrap();
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.seed = 1;
        assert_ne!(robust_conv_estimator(&xs, &ys, &other).unwrap(), a);
        assert!(robust_conv_estimator(&xs, &ys, &EstimatorConfig::with_p(2.0)).is_err());
    }

    #[test]
    fn flags_targets_outside_unit_cube() {
        let xs = cloud(5, 2, 8);
        let ys: Vec<Point> = cloud(5, 2, 9).into_iter().map(|y| pt(&[y[0] + 3.0, y[1]])).collect();
        let f = robust_conv_estimator(&xs, &ys, &EstimatorConfig::default()).unwrap();
        assert_eq!(f.flags.len(), 1);
    }
}
