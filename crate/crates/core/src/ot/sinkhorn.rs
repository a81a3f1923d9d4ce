//! Log-domain Sinkhorn iterations for entropically regularized OT.
//!
//! With the plan parametrized as π_ij = μ_i ν_j exp((f_i + g_j − c_ij)/τ),
//! each half step maximizes the dual
//! Σ μ_i f_i + Σ ν_j g_j − τ Σ μ_i ν_j (exp((f_i + g_j − c_ij)/τ) − 1)
//! exactly in one block of potentials, so the dual never decreases.

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

use super::{check_exponent, cost_matrix, round_plan_to_feasible, CostMatrix, TransportPlan};

#[derive(Clone, Debug, PartialEq)]
pub struct SinkhornOptions {
    /// Stop once the L1 row-marginal violation drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Warm start from a large τ, halving down to the target.
    pub tau_scaling: bool,
    /// Keep the dual value after every half step.
    pub record_dual: bool,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        SinkhornOptions {
            tol: 1e-7,
            max_iter: 100_000,
            tau_scaling: false,
            record_dual: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EotSolution {
    /// Feasibility-rounded plan.
    pub plan: TransportPlan,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub tau: f64,
    /// ⟨c, π⟩ + τ·KL(π ‖ μ⊗ν) at the plan before rounding.
    pub primal_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// L1 row-marginal violation before rounding.
    pub marginal_error: f64,
    pub dual_trace: Vec<f64>,
    pub cost: CostMatrix,
}

impl EotSolution {
    /// π_ij before rounding, recomputed from the potentials.
    pub fn raw_plan(&self) -> Vec<f64> {
        let (mu, nu) = (self.plan.source(), self.plan.target());
        gibbs(&self.cost, mu.weights(), nu.weights(), &self.f, &self.g, self.tau)
    }

    /// Σ μ f + Σ ν g − τ Σ π + τ.
    pub fn dual_value(&self) -> f64 {
        let (mu, nu) = (self.plan.source(), self.plan.target());
        dual(&self.cost, mu.weights(), nu.weights(), &self.f, &self.g, self.tau)
    }
}

fn gibbs(cost: &CostMatrix, a: &[f64], b: &[f64], f: &[f64], g: &[f64], tau: f64) -> Vec<f64> {
    let m = cost.cols();
    let mut out = Vec::with_capacity(cost.rows() * m);
    for i in 0..cost.rows() {
        let row = cost.row(i);
        for j in 0..m {
            out.push(a[i] * b[j] * ((f[i] + g[j] - row[j]) / tau).exp());
        }
    }
    out
}

fn dual(cost: &CostMatrix, a: &[f64], b: &[f64], f: &[f64], g: &[f64], tau: f64) -> f64 {
    let lin: f64 = a.iter().zip(f).map(|(w, v)| w * v).sum::<f64>()
        + b.iter().zip(g).map(|(w, v)| w * v).sum::<f64>();
    let mass: f64 = gibbs(cost, a, b, f, g, tau).iter().sum();
    lin - tau * mass + tau
}

fn log_weights(w: &[f64]) -> Vec<f64> {
    w.iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect()
}

/// log Σ_k exp(v_k), stable for large magnitudes and −∞ entries.
fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// f_i = −τ log Σ_j ν_j exp((g_j − c_ij)/τ)
fn update_rows(cost: &CostMatrix, log_b: &[f64], g: &[f64], tau: f64, f: &mut [f64]) {
    for (i, fi) in f.iter_mut().enumerate() {
        let row = cost.row(i);
        *fi = -tau * log_sum_exp((0..row.len()).map(|j| log_b[j] + (g[j] - row[j]) / tau));
    }
}

/// g_j = −τ log Σ_i μ_i exp((f_i − c_ij)/τ)
fn update_cols(cost: &CostMatrix, log_a: &[f64], f: &[f64], tau: f64, g: &mut [f64]) {
    let m = cost.cols();
    let data = cost.as_slice();
    for (j, gj) in g.iter_mut().enumerate() {
        *gj = -tau * log_sum_exp((0..f.len()).map(|i| log_a[i] + (f[i] - data[i * m + j]) / tau));
    }
}

pub fn sinkhorn(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    tau: f64,
    tol: f64,
    max_iter: usize,
) -> Result<EotSolution> {
    let opts = SinkhornOptions {
        tol,
        max_iter,
        ..SinkhornOptions::default()
    };
    sinkhorn_with(mu, nu, p, tau, &opts)
}

pub fn sinkhorn_with(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    tau: f64,
    opts: &SinkhornOptions,
) -> Result<EotSolution> {
    check_exponent(p)?;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("sinkhorn tolerance must be positive".into()));
    }
    let cost = cost_matrix(mu.points(), nu.points(), p)?;
    let (a, b) = (mu.weights(), nu.weights());
    let (log_a, log_b) = (log_weights(a), log_weights(b));
    let mut f = vec![0.0; mu.len()];
    let mut g = vec![0.0; nu.len()];
    let mut dual_trace = Vec::new();

    let mut schedule = Vec::new();
    if opts.tau_scaling {
        let mut t = tau;
        while t < cost.max() {
            t *= 2.0;
            schedule.push(t);
        }
        schedule.reverse();
    }
    // warm-up stages run a bounded number of sweeps at each larger τ
    for &t in &schedule {
        for _ in 0..100 {
            update_rows(&cost, &log_b, &g, t, &mut f);
            update_cols(&cost, &log_a, &f, t, &mut g);
        }
    }

    let mut f_next = vec![0.0; mu.len()];
    let mut iterations = 0;
    let mut converged = false;
    let mut marginal_error = f64::INFINITY;
    update_rows(&cost, &log_b, &g, tau, &mut f);
    update_cols(&cost, &log_a, &f, tau, &mut g);
    if opts.record_dual {
        dual_trace.push(dual(&cost, a, b, &f, &g, tau));
    }
    while iterations < opts.max_iter {
        iterations += 1;
        // columns are exact after the g step; row i currently sums to
        // μ_i exp((f_i − f_next_i)/τ)
        update_rows(&cost, &log_b, &g, tau, &mut f_next);
        marginal_error = (0..f.len())
            .map(|i| (a[i] * (((f[i] - f_next[i]) / tau).exp() - 1.0)).abs())
            .sum();
        if !marginal_error.is_finite() {
            return Err(Error::Numerical("sinkhorn potentials diverged".into()));
        }
        if marginal_error < opts.tol {
            converged = true;
            break;
        }
        std::mem::swap(&mut f, &mut f_next);
        if opts.record_dual {
            dual_trace.push(dual(&cost, a, b, &f, &g, tau));
        }
        update_cols(&cost, &log_a, &f, tau, &mut g);
        if opts.record_dual {
            dual_trace.push(dual(&cost, a, b, &f, &g, tau));
        }
    }
    if !converged {
        log::warn!(
            "sinkhorn stopped after {iterations} iterations with marginal error {marginal_error:.3e}"
        );
    }

    let raw = gibbs(&cost, a, b, &f, &g, tau);
    let mut primal_value = 0.0;
    let mut mass = 0.0;
    let m = nu.len();
    for (e, &v) in raw.iter().enumerate() {
        if v > 0.0 {
            let (i, j) = (e / m, e % m);
            let c = cost.get(i, j);
            // c + τ·log(π/(μν)) = f + g
            primal_value += v * c + v * (f[i] + g[j] - c);
            mass += v;
        }
    }
    primal_value += tau * (1.0 - mass);
    let plan = round_plan_to_feasible(&raw, mu, nu, p)?;
    Ok(EotSolution {
        plan,
        f,
        g,
        tau,
        primal_value,
        iterations,
        converged,
        marginal_error,
        dual_trace,
        cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{powered_distance, Point};
    use crate::ot::exact_ot;
    use crate::rng::stream;
    use rand::Rng;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn random_measure<R: Rng>(n: usize, d: usize, rng: &mut R) -> DiscreteMeasure {
        let pts = (0..n)
            .map(|_| pt(&(0..d).map(|_| rng.random::<f64>()).collect::<Vec<_>>()))
            .collect();
        let w = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
        DiscreteMeasure::new(pts, w).unwrap()
    }

    #[test]
    fn diracs_give_the_unique_plan() {
        let x = pt(&[0.0, 0.0]);
        let y = pt(&[0.3, 0.4]);
        for tau in [1e-3, 1.0, 100.0] {
            let sol = sinkhorn(
                &DiscreteMeasure::dirac(x.clone()),
                &DiscreteMeasure::dirac(y.clone()),
                2.0,
                tau,
                1e-9,
                1000,
            )
            .unwrap();
            assert!(sol.converged);
            assert_eq!(sol.plan.entries().len(), 1);
            assert!((sol.plan.entries()[0].2 - 1.0).abs() < 1e-12);
            assert!((sol.primal_value - powered_distance(&x, &y, 2.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn large_tau_approaches_product() {
        let mu = DiscreteMeasure::new(vec![pt(&[0.0]), pt(&[1.0])], vec![0.3, 0.7]).unwrap();
        let nu = DiscreteMeasure::new(vec![pt(&[0.0]), pt(&[1.0])], vec![0.6, 0.4]).unwrap();
        let sol = sinkhorn(&mu, &nu, 1.0, 1e4, 1e-10, 10_000).unwrap();
        let plan = sol.plan.dense();
        for i in 0..2 {
            for j in 0..2 {
                assert!((plan[i][j] - mu.weights()[i] * nu.weights()[j]).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn gibbs_form_and_feasibility() {
        let mut rng = stream(12, &[]);
        let mu = random_measure(7, 2, &mut rng);
        let nu = random_measure(9, 2, &mut rng);
        let tau = 0.05;
        let sol = sinkhorn(&mu, &nu, 2.0, tau, 1e-10, 100_000).unwrap();
        assert!(sol.converged);
        assert!(sol.plan.is_feasible(1e-9));
        let raw = sol.raw_plan();
        for i in 0..7 {
            for j in 0..9 {
                let lhs = raw[i * 9 + j].ln();
                let rhs = (sol.f[i] + sol.g[j] - sol.cost.get(i, j)) / tau
                    + (mu.weights()[i] * nu.weights()[j]).ln();
                assert!((lhs - rhs).abs() < 1e-6);
            }
        }
        // rounding only moves mass on the order of the stopping tolerance
        let dense = sol.plan.dense().concat();
        let moved: f64 = dense.iter().zip(&raw).map(|(a, b)| (a - b).abs()).sum();
        assert!(moved < 1e-8);
    }

    #[test]
    fn dual_is_monotone() {
        let mut rng = stream(13, &[]);
        let mu = random_measure(10, 3, &mut rng);
        let nu = random_measure(8, 3, &mut rng);
        let opts = SinkhornOptions {
            tol: 1e-12,
            max_iter: 500,
            record_dual: true,
            ..Default::default()
        };
        let sol = sinkhorn_with(&mu, &nu, 1.0, 0.02, &opts).unwrap();
        assert!(sol.dual_trace.len() > 2);
        for w in sol.dual_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-10, "{} -> {}", w[0], w[1]);
        }
        assert!((sol.dual_value() - sol.dual_trace.last().unwrap()).abs() < 1e-10);
    }

    #[test]
    fn rounded_cost_decreases_to_the_optimum() {
        let mut rng = stream(14, &[]);
        for _ in 0..5 {
            let mu = random_measure(8, 2, &mut rng);
            let nu = random_measure(8, 2, &mut rng);
            let opt = exact_ot(&mu, &nu, 1.0).unwrap().cost_value();
            let mut last_gap = f64::INFINITY;
            for tau in [0.1, 0.01, 0.001] {
                let sol = sinkhorn(&mu, &nu, 1.0, tau, 1e-11, 100_000).unwrap();
                let gap = sol.plan.cost_value() - opt;
                assert!(gap >= -1e-9);
                // regularized value dominates the unregularized optimum
                assert!(sol.primal_value >= opt - 1e-9);
                assert!(gap <= last_gap + 1e-9);
                last_gap = gap;
            }
            assert!(last_gap < 1e-2);
        }
    }

    #[test]
    fn tau_scaling_reaches_the_same_solution() {
        let mut rng = stream(15, &[]);
        let mu = random_measure(6, 2, &mut rng);
        let nu = random_measure(6, 2, &mut rng);
        let plain = sinkhorn(&mu, &nu, 2.0, 0.01, 1e-11, 100_000).unwrap();
        let scaled = sinkhorn_with(
            &mu,
            &nu,
            2.0,
            0.01,
            &SinkhornOptions {
                tol: 1e-11,
                tau_scaling: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((plain.plan.cost_value() - scaled.plan.cost_value()).abs() < 1e-8);
        assert!((plain.primal_value - scaled.primal_value).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_tau_and_flags_non_convergence() {
        let mu = DiscreteMeasure::dirac(pt(&[0.0]));
        assert!(sinkhorn(&mu, &mu, 1.0, 0.0, 1e-7, 10).is_err());
        assert!(sinkhorn(&mu, &mu, 1.0, -1.0, 1e-7, 10).is_err());
        let mut rng = stream(16, &[]);
        let a = random_measure(20, 2, &mut rng);
        let b = random_measure(20, 2, &mut rng);
        let sol = sinkhorn(&a, &b, 1.0, 1e-4, 1e-14, 2).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 2);
        assert!(sol.plan.is_feasible(1e-9));
    }
}
