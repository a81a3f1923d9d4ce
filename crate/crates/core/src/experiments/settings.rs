//! Synthetic ground-truth instances.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{DiscreteKernel, KernelPipeline, PointMap, PointTable, Stage};
use crate::measures::{DiscreteMeasure, Point};
use crate::ot::exact_ot;

/// A ground-truth pair (μ, ν) with optional reference transports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    /// An optimal deterministic map on the support of μ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_star: Option<KernelPipeline>,
    /// A stochastic reference kernel, when the instance has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_star: Option<KernelPipeline>,
}

fn unit_cube_tail<R: Rng + ?Sized>(first: f64, d: usize, rng: &mut R) -> Point {
    let mut c = Vec::with_capacity(d);
    c.push(first);
    c.extend((1..d).map(|_| rng.random::<f64>()));
    Point::from_vec(c)
}

/// Table map along the optimal assignment of an exact plan between two
/// uniform measures of equal size; each row keeps its largest entry.
fn assignment_map(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<KernelPipeline> {
    let plan = exact_ot(mu, nu, p)?;
    let mut best: Vec<(usize, f64)> = vec![(usize::MAX, -1.0); mu.len()];
    for &(i, j, m) in plan.entries() {
        if m > best[i].1 {
            best[i] = (j, m);
        }
    }
    let images = best.iter().map(|&(j, _)| nu.points()[j].clone()).collect();
    KernelPipeline::map(PointMap::Table(PointTable::new(mu.points().to_vec(), images)?))
}

/// μ uniform on N draws from {0}×[0,1]^{d−1}; ν uniform on N draws from the
/// even mixture of {−1}×[0,1]^{d−1} and {+1}×[0,1]^{d−1}; T* follows the
/// optimal permutation between them for exponent p.
pub fn gen_setting_a<R: Rng + ?Sized>(n_atoms: usize, d: usize, p: f64, rng: &mut R) -> Result<Instance> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("setting A needs d ≥ 2, got {d}")));
    }
    if n_atoms == 0 {
        return Err(Error::Empty("ground-truth support"));
    }
    let xs: Vec<Point> = (0..n_atoms).map(|_| unit_cube_tail(0.0, d, rng)).collect();
    let ys: Vec<Point> = (0..n_atoms)
        .map(|_| {
            let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
            unit_cube_tail(side, d, rng)
        })
        .collect();
    let mu = DiscreteMeasure::uniform(xs)?;
    let nu = DiscreteMeasure::uniform(ys)?;
    let t_star = assignment_map(&mu, &nu, p)?;
    Ok(Instance {
        mu,
        nu,
        t_star: Some(t_star),
        kappa_star: None,
    })
}

/// μ uniform on N draws from [−1,1]^d and ν its image under
/// f(x) = x + (sign x_1, …, sign x_d), which pushes each orthant outward.
pub fn gen_setting_b<R: Rng + ?Sized>(n_atoms: usize, d: usize, rng: &mut R) -> Result<Instance> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    if n_atoms == 0 {
        return Err(Error::Empty("ground-truth support"));
    }
    let xs: Vec<Point> = (0..n_atoms)
        .map(|_| Point::from_vec((0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()))
        .collect();
    let f = PointMap::OrthantShift;
    let ys = xs.iter().map(|x| f.apply(x)).collect::<Result<Vec<_>>>()?;
    Ok(Instance {
        mu: DiscreteMeasure::uniform(xs)?,
        nu: DiscreteMeasure::uniform(ys)?,
        t_star: Some(KernelPipeline::map(f)?),
        kappa_star: None,
    })
}

/// Striped instance on the segment {0}×[0,1]: μ uniform on M grid points
/// x_2 = (i + ½)/M, T*(x) = ((−1)^⌊x_2/δ⌋, x_2) and ν = T*♯μ. The reference
/// kernel splits each point evenly between (−1, x_2) and (1, x_2).
pub fn gen_stripes(m: usize, delta: f64) -> Result<Instance> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 grid points, got {m}")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let xs: Vec<Point> = (0..m)
        .map(|i| Point::from_vec(vec![0.0, (i as f64 + 0.5) / m as f64]))
        .collect();
    let t_star = PointMap::Stripes { delta, flipped: false };
    let ys = xs.iter().map(|x| t_star.apply(x)).collect::<Result<Vec<_>>>()?;
    let mut targets = Vec::with_capacity(2 * m);
    for x in &xs {
        targets.push(Point::from_vec(vec![-1.0, x[1]]));
        targets.push(Point::from_vec(vec![1.0, x[1]]));
    }
    let rows = (0..m).map(|i| vec![(2 * i, 0.5), (2 * i + 1, 0.5)]).collect();
    let kappa = DiscreteKernel::new(xs.clone(), targets, rows)?;
    Ok(Instance {
        mu: DiscreteMeasure::uniform(xs)?,
        nu: DiscreteMeasure::uniform(ys)?,
        t_star: Some(KernelPipeline::map(t_star)?),
        kappa_star: Some(KernelPipeline::new(vec![Stage::Discrete { kernel: kappa }])?),
    })
}

/// The deterministic stripe map with the sign flipped: T(x) = −T*(x) in the
/// first coordinate. It is at L¹ distance 2 from T* yet has the same image.
pub fn stripes_flipped_map(delta: f64) -> Result<KernelPipeline> {
    KernelPipeline::map(PointMap::Stripes { delta, flipped: true })
}

/// μ and ν uniform on N draws each from the two colors of a `cells × cells`
/// checkerboard on [0,1]²: μ from cells with (i + j) even, ν from odd ones.
pub fn gen_checkerboard<R: Rng + ?Sized>(cells: usize, n_atoms: usize, rng: &mut R) -> Result<Instance> {
    if cells == 0 || cells % 2 != 0 {
        return Err(Error::InvalidParameter(format!("checkerboard needs an even cell count, got {cells}")));
    }
    if n_atoms == 0 {
        return Err(Error::Empty("ground-truth support"));
    }
    let side = 1.0 / cells as f64;
    let draw = |parity: usize, rng: &mut R| -> Point {
        // cells*cells/2 cells of each color; pick one uniformly
        let k = rng.random_range(0..cells * cells / 2);
        let row = k / (cells / 2);
        let col = 2 * (k % (cells / 2)) + (row + parity) % 2;
        Point::from_vec(vec![
            (col as f64 + rng.random::<f64>()) * side,
            (row as f64 + rng.random::<f64>()) * side,
        ])
    };
    let xs: Vec<Point> = (0..n_atoms).map(|_| draw(0, rng)).collect();
    let ys: Vec<Point> = (0..n_atoms).map(|_| draw(1, rng)).collect();
    Ok(Instance {
        mu: DiscreteMeasure::uniform(xs)?,
        nu: DiscreteMeasure::uniform(ys)?,
        t_star: None,
        kappa_star: None,
    })
}

/// Source δ_0 paired with a target ν: with a point-mass source every kernel
/// is a single distribution, so E_p reduces to estimating ν in W_p.
pub fn lb_instance_sampling(nu: &DiscreteMeasure) -> DiscreteMeasure {
    DiscreteMeasure::dirac(Point::origin(nu.dim()))
}
