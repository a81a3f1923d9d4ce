//! The transportation error E_p, its Monge-gap variant E'_p, and the L^p
//! distance between deterministic maps.
//!
//! E_p(κ; μ, ν) = [ (∬‖x − y‖^p dκ_x dμ)^{1/p} − W_p(μ, ν) ]_+ + W_p(κ♯μ, ν).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{propagate, KernelPipeline, MonteCarloConfig, Propagation};
use crate::measures::{powered_distance, DiscreteMeasure};
use crate::ot::{check_exponent, ot_1d, wasserstein_p};
use crate::rng::derive_seed;
use crate::stats::mean_and_stderr;

/// Slack below zero tolerated for the Monge gap before it is treated as a
/// solver failure.
const MONGE_GAP_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpReport {
    /// (∬ ‖x − y‖^p dκ_x dμ)^{1/p}
    pub transport_cost: f64,
    pub wp_mu_nu: f64,
    pub optimality_gap: f64,
    pub feasibility_gap: f64,
    pub ep: f64,
    /// Standard error of `ep` across Monte-Carlo replicates; 0 when exact.
    pub mc_stderr: f64,
}

/// W_p between discrete measures; the closed-form quantile coupling is
/// used on the line.
pub fn wasserstein(a: &DiscreteMeasure, b: &DiscreteMeasure, p: f64) -> Result<f64> {
    if a.dim() == 1 && b.dim() == 1 {
        Ok(ot_1d(a, b, p)?.0)
    } else {
        wasserstein_p(a, b, p)
    }
}

/// Scores kernels against a fixed pair (μ, ν); W_p(μ, ν) is solved once.
#[derive(Clone, Debug)]
pub struct ErrorEvaluator {
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    p: f64,
    wp: f64,
}

impl ErrorEvaluator {
    pub fn new(mu: DiscreteMeasure, nu: DiscreteMeasure, p: f64) -> Result<Self> {
        check_exponent(p)?;
        let wp = wasserstein(&mu, &nu, p)?;
        Ok(ErrorEvaluator { mu, nu, p, wp })
    }

    /// Reuse a known value of W_p(μ, ν).
    pub fn with_wp(mu: DiscreteMeasure, nu: DiscreteMeasure, p: f64, wp: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(ErrorEvaluator { mu, nu, p, wp })
    }

    pub fn mu(&self) -> &DiscreteMeasure {
        &self.mu
    }

    pub fn nu(&self) -> &DiscreteMeasure {
        &self.nu
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn wp(&self) -> f64 {
        self.wp
    }

    fn report(&self, transport_cost: f64, feasibility_gap: f64, mc_stderr: f64) -> EpReport {
        let optimality_gap = (transport_cost - self.wp).max(0.0);
        EpReport {
            transport_cost,
            wp_mu_nu: self.wp,
            optimality_gap,
            feasibility_gap,
            ep: optimality_gap + feasibility_gap,
            mc_stderr,
        }
    }

    fn run(&self, k: &KernelPipeline, mc: &MonteCarloConfig) -> Result<(Propagation, f64)> {
        let prop = propagate(k, &self.mu, self.p, mc)?;
        let feas = wasserstein(&prop.pushforward, &self.nu, self.p)?;
        Ok((prop, feas))
    }

    /// E_p of `k`. Pipelines with Gaussian stages are evaluated over
    /// `mc.replicates` independent Monte-Carlo runs; the reported cost and
    /// feasibility gap are replicate averages.
    pub fn evaluate(&self, k: &KernelPipeline, mc: &MonteCarloConfig) -> Result<EpReport> {
        if !k.has_continuous_stage() {
            let (prop, feas) = self.run(k, mc)?;
            let tc = prop.cost_integral.max(0.0).powf(1.0 / self.p);
            return Ok(self.report(tc, feas, 0.0));
        }
        let reps = mc.replicates.max(1);
        let runs: Vec<Result<(f64, f64)>> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let cfg = MonteCarloConfig {
                    seed: derive_seed(mc.seed, &[r as u64]),
                    ..mc.clone()
                };
                let (prop, feas) = self.run(k, &cfg)?;
                Ok((prop.cost_integral.max(0.0), feas))
            })
            .collect();
        let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
        let n = runs.len() as f64;
        let integral = runs.iter().map(|r| r.0).sum::<f64>() / n;
        let feas = runs.iter().map(|r| r.1).sum::<f64>() / n;
        let per_rep: Vec<f64> = runs
            .iter()
            .map(|&(i, f)| (i.powf(1.0 / self.p) - self.wp).max(0.0) + f)
            .collect();
        let (_, stderr) = mean_and_stderr(&per_rep);
        Ok(self.report(integral.powf(1.0 / self.p), feas, stderr))
    }

    /// E'_p = (∬ c dκ dμ − W_p(μ, κ♯μ)^p + W_p(κ♯μ, ν)^p)^{1/p}.
    pub fn monge_gap_error(&self, k: &KernelPipeline, mc: &MonteCarloConfig) -> Result<f64> {
        let p = self.p;
        let prop = propagate(k, &self.mu, p, mc)?;
        let self_w = wasserstein(&self.mu, &prop.pushforward, p)?.powf(p);
        let mut gap = prop.cost_integral - self_w;
        if gap < 0.0 {
            let slack = MONGE_GAP_SLACK * (1.0 + prop.cost_integral) + 3.0 * prop.cost_stderr;
            if gap < -slack {
                return Err(Error::Numerical(format!("negative Monge gap {gap:.3e}")));
            }
            gap = 0.0;
        }
        let feas = wasserstein(&prop.pushforward, &self.nu, p)?.powf(p);
        Ok((gap + feas).powf(1.0 / p))
    }
}

/// E_p(κ; μ, ν) as an [`EpReport`].
pub fn transportation_error(
    k: &KernelPipeline,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    mc: &MonteCarloConfig,
) -> Result<EpReport> {
    ErrorEvaluator::new(mu.clone(), nu.clone(), p)?.evaluate(k, mc)
}

/// E'_p(κ; μ, ν), the Monge-gap form of the error.
pub fn monge_gap_error(
    k: &KernelPipeline,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    mc: &MonteCarloConfig,
) -> Result<f64> {
    ErrorEvaluator::new(mu.clone(), nu.clone(), p)?.monge_gap_error(k, mc)
}

/// (Σ_i μ_i ‖t(x_i) − t*(x_i)‖^p)^{1/p}. Both pipelines must produce a
/// single point at every atom of μ.
pub fn lp_map_distance(
    t: &KernelPipeline,
    t_star: &KernelPipeline,
    mu: &DiscreteMeasure,
    p: f64,
) -> Result<f64> {
    check_exponent(p)?;
    let single = |k: &KernelPipeline, x| -> Result<_> {
        if k.has_continuous_stage() {
            return Err(Error::Stochastic("pipeline has a Gaussian stage".into()));
        }
        let mut out = k.distribution(x)?;
        if out.len() != 1 {
            return Err(Error::Stochastic(format!(
                "pipeline splits mass at {:?}",
                x.coords()
            )));
        }
        Ok(out.pop().unwrap().0)
    };
    let mut total = 0.0;
    for (x, w) in mu.iter() {
        if w > 0.0 {
            total += w * powered_distance(&single(t, x)?, &single(t_star, x)?, p);
        }
    }
    Ok(total.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel_from_plan, PointMap, Stage};
    use crate::measures::Point;
    use crate::ot::exact_ot;
    use crate::rng::stream;
    use rand::Rng;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn random_measure(seed: u64, n: usize, d: usize) -> DiscreteMeasure {
        let mut rng = stream(seed, &[]);
        DiscreteMeasure::new(
            (0..n)
                .map(|_| pt(&(0..d).map(|_| rng.random::<f64>()).collect::<Vec<_>>()))
                .collect(),
            (0..n).map(|_| rng.random::<f64>() + 0.1).collect(),
        )
        .unwrap()
    }

    fn exact() -> MonteCarloConfig {
        MonteCarloConfig::default()
    }

    #[test]
    fn optimal_kernel_has_zero_error() {
        for p in [1.0, 1.5, 2.0] {
            let mu = random_measure(1, 9, 2);
            let nu = random_measure(2, 7, 2);
            let k = kernel_from_plan(&exact_ot(&mu, &nu, p).unwrap()).into();
            let r = transportation_error(&k, &mu, &nu, p, &exact()).unwrap();
            assert!(r.ep <= 1e-9, "{r:?}");
            assert_eq!(r.mc_stderr, 0.0);
            assert!(monge_gap_error(&k, &mu, &nu, p, &exact()).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn null_kernel_on_diracs() {
        let y = pt(&[0.6, 0.8]);
        let mu = DiscreteMeasure::dirac(Point::origin(2));
        let nu = DiscreteMeasure::dirac(y);
        let k = KernelPipeline::map(PointMap::Constant { point: Point::origin(2) }).unwrap();
        let r = transportation_error(&k, &mu, &nu, 2.0, &exact()).unwrap();
        assert_eq!(r.optimality_gap, 0.0);
        assert!((r.feasibility_gap - 1.0).abs() < 1e-12);
        assert!((r.ep - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_decomposes() {
        let mu = random_measure(3, 6, 2);
        let nu = random_measure(4, 6, 2);
        let k = KernelPipeline::map(PointMap::Translate { shift: vec![0.3, -0.2] }).unwrap();
        let r = transportation_error(&k, &mu, &nu, 1.0, &exact()).unwrap();
        assert_eq!(r.ep, r.optimality_gap + r.feasibility_gap);
        assert_eq!(r.optimality_gap, (r.transport_cost - r.wp_mu_nu).max(0.0));
        assert!(r.transport_cost >= 0.0 && r.feasibility_gap >= 0.0);
    }

    #[test]
    fn lp_distance_examples() {
        let mu = random_measure(5, 8, 3);
        let id = KernelPipeline::identity();
        assert_eq!(lp_map_distance(&id, &id, &mu, 2.0).unwrap(), 0.0);
        let v = vec![0.1, -0.2, 0.3];
        let shift = KernelPipeline::map(PointMap::Translate { shift: v.clone() }).unwrap();
        let norm = pt(&v).norm();
        for p in [1.0, 2.0, 3.0] {
            assert!((lp_map_distance(&shift, &id, &mu, p).unwrap() - norm).abs() < 1e-12);
        }
        let noisy = KernelPipeline::new(vec![Stage::Gaussian { sigma: 1.0 }]).unwrap();
        assert!(matches!(lp_map_distance(&noisy, &id, &mu, 1.0), Err(Error::Stochastic(_))));
    }

    #[test]
    fn monte_carlo_reports_carry_standard_errors() {
        let mu = random_measure(6, 10, 2);
        let nu = random_measure(7, 5, 2);
        let k = KernelPipeline::new(vec![
            Stage::Gaussian { sigma: 0.2 },
            Stage::NearestLookup { anchors: nu.points().to_vec() },
        ])
        .unwrap();
        let mc = MonteCarloConfig { samples: 2000, seed: 9, replicates: 5 };
        let a = transportation_error(&k, &mu, &nu, 1.0, &mc).unwrap();
        let b = transportation_error(&k, &mu, &nu, 1.0, &mc).unwrap();
        assert_eq!(a, b);
        assert!(a.mc_stderr > 0.0);
        assert_eq!(a.ep, a.optimality_gap + a.feasibility_gap);
    }
}
