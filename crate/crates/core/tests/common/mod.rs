//! Randomized instance generators and inequality checks shared by the
//! integration and acceptance tests.

#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use rand::Rng;
use stochot_core::error_metric::{lp_map_distance, monge_gap_error, transportation_error, EpReport};
use stochot_core::kernels::{
    pushforward, transport_cost, DiscreteKernel, KernelPipeline, MonteCarloConfig, PointMap, PointTable, Stage,
};
use stochot_core::measures::{diameter, tv_distance, DiscreteMeasure, Point};
use stochot_core::ot::{exact_ot, wasserstein_p};
use stochot_core::rng::{stream, StdRng};

pub const EXPONENTS: [f64; 3] = [1.0, 1.5, 2.0];

/// Outcome of checking one inequality over many random instances.
#[derive(Debug, Default)]
pub struct Tally {
    pub instances: usize,
    pub violations: usize,
    /// Largest amount by which the left side exceeded the right side.
    pub worst_excess: f64,
}

impl Tally {
    /// Record `lhs ≤ rhs` with the given slack.
    pub fn le(&mut self, lhs: f64, rhs: f64, slack: f64) {
        let excess = lhs - rhs;
        self.worst_excess = self.worst_excess.max(excess);
        if !(excess <= slack) {
            self.violations += 1;
        }
    }

    pub fn next(&mut self) {
        self.instances += 1;
    }

    pub fn ok(&self, min_instances: usize) -> bool {
        self.violations == 0 && self.instances >= min_instances
    }
}

pub fn points(rng: &mut StdRng, n: usize, d: usize, scale: f64) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new((0..d).map(|_| scale * rng.random::<f64>()).collect()).unwrap())
        .collect()
}

pub fn weights(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| 0.05 + rng.random::<f64>()).collect()
}

pub fn measure_on(rng: &mut StdRng, pts: Vec<Point>) -> DiscreteMeasure {
    let w = weights(rng, pts.len());
    DiscreteMeasure::new(pts, w).unwrap()
}

pub fn random_measure(rng: &mut StdRng, n: usize, d: usize) -> DiscreteMeasure {
    let pts = points(rng, n, d, 1.0);
    measure_on(rng, pts)
}

/// A row-stochastic kernel from `source` to `target` with random sparse rows.
pub fn random_kernel(rng: &mut StdRng, source: &[Point], target: &[Point]) -> DiscreteKernel {
    let mut rows = Vec::with_capacity(source.len());
    for _ in source {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for j in 0..target.len() {
            if rng.random::<f64>() < 0.6 {
                row.push((j, 0.05 + rng.random::<f64>()));
            }
        }
        if row.is_empty() {
            row.push((rng.random_range(0..target.len()), 1.0));
        }
        let s: f64 = row.iter().map(|e| e.1).sum();
        row.iter_mut().for_each(|e| e.1 /= s);
        rows.push(row);
    }
    DiscreteKernel::new(source.to_vec(), target.to_vec(), rows).unwrap()
}

pub fn random_kernel_to_new(rng: &mut StdRng, source: &[Point], count: usize, d: usize, scale: f64) -> DiscreteKernel {
    let target = points(rng, count, d, scale);
    random_kernel(rng, source, &target)
}

pub fn points_between(rng: &mut StdRng, lo: usize, hi: usize, d: usize, scale: f64) -> Vec<Point> {
    let n = rng.random_range(lo..=hi);
    points(rng, n, d, scale)
}

pub fn random_measure_between(rng: &mut StdRng, lo: usize, hi: usize, d: usize) -> DiscreteMeasure {
    let n = rng.random_range(lo..=hi);
    random_measure(rng, n, d)
}

pub fn pipeline(k: DiscreteKernel) -> KernelPipeline {
    KernelPipeline::from(k)
}

pub fn ep(k: &KernelPipeline, mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> EpReport {
    transportation_error(k, mu, nu, p, &MonteCarloConfig::default()).unwrap()
}

fn cost(k: &KernelPipeline, mu: &DiscreteMeasure, p: f64) -> f64 {
    transport_cost(k, mu, p, &MonteCarloConfig::default()).unwrap().value
}

fn push(k: &KernelPipeline, mu: &DiscreteMeasure) -> DiscreteMeasure {
    pushforward(k, mu, &MonteCarloConfig::default()).unwrap()
}

fn setup(seed: u64, tag: u64, i: usize) -> (StdRng, usize, f64) {
    let mut rng = stream(seed, &[tag, i as u64]);
    let d = rng.random_range(1..=3);
    let p = EXPONENTS[i % 3];
    (rng, d, p)
}

/// |E_p(κ;μ,ν) − E_p(κ;μ,ν')| ≤ 2 W_p(ν,ν') ≤ 2 diam(Y) TV(ν,ν')^{1/p}.
pub fn check_nu_stability(seed: u64, count: usize, slack: f64) -> Tally {
    let mut t = Tally::default();
    for i in 0..count {
        let (mut rng, d, p) = setup(seed, 1, i);
        let mu = random_measure_between(&mut rng, 1, 5, d);
        let ys = points_between(&mut rng, 1, 5, d, 1.0);
        let nu = measure_on(&mut rng, ys.clone());
        let nu2 = measure_on(&mut rng, ys.clone());
        let k = pipeline(random_kernel_to_new(&mut rng, mu.points(), 4, d, 1.0));
        let diff = (ep(&k, &mu, &nu, p).ep - ep(&k, &mu, &nu2, p).ep).abs();
        let w = wasserstein_p(&nu, &nu2, p).unwrap();
        t.le(diff, 2.0 * w, slack);
        t.le(2.0 * w, 2.0 * diameter(&ys) * tv_distance(&nu, &nu2).unwrap().powf(1.0 / p), slack);
        t.next();
    }
    t
}

fn frobenius(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// For an affine map with Lipschitz constant L (bounded by the Frobenius
/// norm): |E_p(T;μ',ν) − E_p(T;μ,ν)| ≤ 2ρ + 2Lρ with ρ = W_p(μ,μ').
pub fn check_wp_stability_affine(seed: u64, count: usize, slack: f64) -> Tally {
    let mut t = Tally::default();
    for i in 0..count {
        let (mut rng, d, p) = setup(seed, 2, i);
        let mu = random_measure_between(&mut rng, 1, 5, d);
        let mu2 = random_measure_between(&mut rng, 1, 5, d);
        let nu = random_measure_between(&mut rng, 1, 5, d);
        let matrix: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect())
            .collect();
        let offset: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let l = frobenius(&matrix);
        let k = KernelPipeline::map(PointMap::Affine { matrix, offset }).unwrap();
        let rho = wasserstein_p(&mu, &mu2, p).unwrap();
        let diff = (ep(&k, &mu2, &nu, p).ep - ep(&k, &mu, &nu, p).ep).abs();
        t.le(diff, 2.0 * rho + 2.0 * l * rho, slack);
        t.next();
    }
    t
}

/// |E_p(κ∘λ;μ,ν) − E_p(κ;λ♯μ,ν)| ≤ 2 (∬‖z − x‖^p dλ_x dμ)^{1/p}.
pub fn check_composition(seed: u64, count: usize, slack: f64) -> Tally {
    let mut t = Tally::default();
    for i in 0..count {
        let (mut rng, d, p) = setup(seed, 3, i);
        let mu = random_measure_between(&mut rng, 1, 5, d);
        let nu = random_measure_between(&mut rng, 1, 5, d);
        let zs = points_between(&mut rng, 1, 4, d, 1.0);
        let lambda = random_kernel(&mut rng, mu.points(), &zs);
        let kappa = random_kernel_to_new(&mut rng, &zs, 4, d, 1.0);
        let lam = pipeline(lambda.clone());
        let both = KernelPipeline::new(vec![Stage::Discrete { kernel: lambda }, Stage::Discrete { kernel: kappa.clone() }])
            .unwrap();
        let mid = push(&lam, &mu);
        let lhs = (ep(&both, &mu, &nu, p).ep - ep(&pipeline(kappa), &mid, &nu, p).ep).abs();
        t.le(lhs, 2.0 * cost(&lam, &mu, p).powf(1.0 / p), slack);
        t.next();
    }
    t
}

/// If ∬‖x − y‖^p dκ dμ ≤ W_p(μ,κ♯μ)^p + τ^p and W_p(κ♯μ,ν) ≤ τ, then
/// E_p(κ;μ',ν) ≤ 3 diam(Y) TV(μ,μ')^{1/p} + 3τ. Kernels mix the optimal
/// kernel with a random one so τ ranges from small to large.
pub fn check_tv_stability_refined(seed: u64, count: usize, slack: f64) -> Tally {
    let mut t = Tally::default();
    for i in 0..count {
        let (mut rng, d, p) = setup(seed, 4, i);
        let xs = points_between(&mut rng, 2, 5, d, 1.0);
        let mu = measure_on(&mut rng, xs.clone());
        // μ' shares the support but moves some mass around, sometimes
        // concentrating it on a subset
        let mut w2 = weights(&mut rng, xs.len());
        for w in w2.iter_mut() {
            if rng.random::<f64>() < 0.3 {
                *w = 0.0;
            }
        }
        if w2.iter().all(|&w| w == 0.0) {
            w2[0] = 1.0;
        }
        let mu2 = DiscreteMeasure::new(xs.clone(), w2).unwrap();
        let nu = random_measure_between(&mut rng, 1, 5, d);
        let opt = stochot_core::kernels::kernel_from_plan(&exact_ot(&mu, &nu, p).unwrap());
        let noise = random_kernel(&mut rng, &xs, nu.points());
        let mix: f64 = if i % 4 == 0 { 0.0 } else { rng.random::<f64>() * 0.5 };
        let rows = opt
            .rows()
            .iter()
            .zip(noise.rows())
            .map(|(a, b)| {
                let mut dense = vec![0.0; nu.len()];
                a.iter().for_each(|&(j, w)| dense[j] += (1.0 - mix) * w);
                b.iter().for_each(|&(j, w)| dense[j] += mix * w);
                dense.into_iter().enumerate().filter(|e| e.1 > 0.0).collect()
            })
            .collect();
        let k = pipeline(DiscreteKernel::new(xs.clone(), nu.points().to_vec(), rows).unwrap());
        let pushed = push(&k, &mu);
        let gap = (cost(&k, &mu, p) - wasserstein_p(&mu, &pushed, p).unwrap().powf(p)).max(0.0);
        let tau = gap.powf(1.0 / p).max(wasserstein_p(&pushed, &nu, p).unwrap());
        let eps = tv_distance(&mu, &mu2).unwrap();
        let diam_y = diameter(nu.points());
        t.le(ep(&k, &mu2, &nu, p).ep, 3.0 * diam_y * eps.powf(1.0 / p) + 3.0 * tau, slack);
        t.next();
    }
    t
}

/// Largest observed C in E_1(κ;μ',ν) ≤ C·E_1(κ;μ,ν) + diam(Y)·TV(μ,μ'),
/// over instances where E_1(κ;μ,ν) > 0. Recorded, not asserted.
pub fn tv_stability_constant_p1(seed: u64, count: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..count {
        let mut rng = stream(seed, &[5, i as u64]);
        let d = rng.random_range(1..=3);
        let xs = points_between(&mut rng, 2, 5, d, 1.0);
        let mu = measure_on(&mut rng, xs.clone());
        let mu2 = measure_on(&mut rng, xs.clone());
        let nu = random_measure_between(&mut rng, 1, 5, d);
        let k = pipeline(random_kernel(&mut rng, &xs, nu.points()));
        let base = ep(&k, &mu, &nu, 1.0).ep;
        if base > 1e-9 {
            let excess = ep(&k, &mu2, &nu, 1.0).ep - diameter(nu.points()) * tv_distance(&mu, &mu2).unwrap();
            worst = worst.max(excess / base);
        }
    }
    worst
}

/// E_p(proj_{supp ν} ∘ κ; μ, ν) ≤ 4 E_p(κ; μ, ν).
pub fn check_codomain_restriction(seed: u64, count: usize, slack: f64) -> Tally {
    let mut t = Tally::default();
    for i in 0..count {
        let (mut rng, d, p) = setup(seed, 6, i);
        let mu = random_measure_between(&mut rng, 1, 5, d);
        let nu = random_measure_between(&mut rng, 1, 5, d);
        let kernel = random_kernel_to_new(&mut rng, mu.points(), 5, d, 1.2);
        let projected = KernelPipeline::new(vec![
            Stage::Discrete { kernel: kernel.clone() },
            Stage::NearestLookup {
                anchors: nu.points().to_vec(),
            },
        ])
        .unwrap();
        t.le(ep(&projected, &mu, &nu, p).ep, 4.0 * ep(&pipeline(kernel), &mu, &nu, p).ep, slack);
        t.next();
    }
    t
}

/// E_p(T;μ,ν) ≤ 2‖T − T*‖_{L^p(μ)} for T* the optimal permutation between
/// uniform measures of equal size and T an arbitrary map on supp μ.
pub fn check_lp_comparison(seed: u64, count: usize, slack: f64) -> Tally {
    let mut t = Tally::default();
    for i in 0..count {
        let (mut rng, d, p) = setup(seed, 7, i);
        let n = rng.random_range(1..=6);
        let xs = points(&mut rng, n, d, 1.0);
        let ys = points(&mut rng, n, d, 1.0);
        let mu = DiscreteMeasure::uniform(xs.clone()).unwrap();
        let nu = DiscreteMeasure::uniform(ys.clone()).unwrap();
        let plan = exact_ot(&mu, &nu, p).unwrap();
        let mut star = vec![0; n];
        let mut best = vec![0.0; n];
        for &(a, b, m) in plan.entries() {
            if m > best[a] {
                best[a] = m;
                star[a] = b;
            }
        }
        let t_star = KernelPipeline::map(PointMap::Table(
            PointTable::new(xs.clone(), star.iter().map(|&j| ys[j].clone()).collect()).unwrap(),
        ))
        .unwrap();
        // half the maps perturb T*, half are arbitrary
        let images: Vec<Point> = if i % 2 == 0 {
            star.iter()
                .map(|&j| {
                    Point::new(ys[j].coords().iter().map(|c| c + 0.3 * (rng.random::<f64>() - 0.5)).collect()).unwrap()
                })
                .collect()
        } else {
            points(&mut rng, n, d, 1.5)
        };
        let map = KernelPipeline::map(PointMap::Table(PointTable::new(xs, images).unwrap())).unwrap();
        let dist = lp_map_distance(&map, &t_star, &mu, p).unwrap();
        t.le(ep(&map, &mu, &nu, p).ep, 2.0 * dist, slack);
        t.next();
    }
    t
}

/// E_p ≤ 4 E'_p always, and E'_1/2 ≤ E_1 ≤ 2 E'_1 when p = 1.
pub fn check_monge_gap(seed: u64, count: usize, slack: f64) -> Tally {
    let mut t = Tally::default();
    let mc = MonteCarloConfig::default();
    for i in 0..count {
        let (mut rng, d, p) = setup(seed, 8, i);
        let mu = random_measure_between(&mut rng, 1, 5, d);
        let nu = random_measure_between(&mut rng, 1, 5, d);
        let k = pipeline(random_kernel_to_new(&mut rng, mu.points(), 4, d, 1.0));
        let e = ep(&k, &mu, &nu, p).ep;
        let e_prime = monge_gap_error(&k, &mu, &nu, p, &mc).unwrap();
        t.le(e, 4.0 * e_prime, slack);
        let e1 = ep(&k, &mu, &nu, 1.0).ep;
        let e1_prime = monge_gap_error(&k, &mu, &nu, 1.0, &mc).unwrap();
        t.le(e1_prime / 2.0, e1, slack);
        t.le(e1, 2.0 * e1_prime, slack);
        t.next();
    }
    t
}
