//! Markov kernels: stages, pipelines, pushforwards and transport costs.

mod discrete;
mod map;
mod propagate;
mod special;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Partition;
use crate::measures::{squared_distance, Point};

pub use discrete::{kernel_from_plan, DiscreteKernel};
pub use map::{PointMap, PointTable};
pub use propagate::{
    evaluate_at, propagate, pushforward, transport_cost, McEstimate, MonteCarloConfig,
    Propagation,
};
pub use special::{QuantileKernel, SoftmaxKernel};

/// One step of a kernel pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Stage {
    Map { map: PointMap },
    /// Nearest anchor in Euclidean distance, ties to the lowest index.
    NearestLookup { anchors: Vec<Point> },
    /// x ↦ N(x, σ² I).
    Gaussian { sigma: f64 },
    /// Conditional rows looked up by exact source coordinates.
    Discrete { kernel: DiscreteKernel },
    /// Center of the partition cell containing x.
    Round { partition: Partition },
    Softmax { kernel: SoftmaxKernel },
    Quantile { kernel: QuantileKernel },
}

/// Index of the nearest anchor; ties go to the lowest index.
pub fn nearest_anchor(anchors: &[Point], x: &Point) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, a) in anchors.iter().enumerate() {
        let d = squared_distance(a.coords(), x.coords());
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

fn draw_index<R: Rng + ?Sized>(weights: impl Iterator<Item = f64> + Clone, rng: &mut R) -> usize {
    let total: f64 = weights.clone().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = k;
        if u < acc {
            return k;
        }
    }
    last
}

impl Stage {
    pub fn validate(&self) -> Result<()> {
        match self {
            Stage::Map { map } => map.validate(),
            Stage::NearestLookup { anchors } if anchors.is_empty() => {
                Err(Error::InvalidParameter("nearest lookup needs at least one anchor".into()))
            }
            Stage::Gaussian { sigma } if !(*sigma > 0.0) || !sigma.is_finite() => {
                Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")))
            }
            Stage::Round { partition } => partition.validate(),
            Stage::Softmax { kernel } => kernel.validate(),
            Stage::Quantile { kernel } => kernel.validate(),
            _ => Ok(()),
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Stage::Gaussian { .. })
    }

    /// True when every input has a single output.
    pub fn is_deterministic(&self) -> bool {
        match self {
            Stage::Map { .. } | Stage::NearestLookup { .. } | Stage::Round { .. } => true,
            Stage::Discrete { kernel } => kernel.is_one_hot(),
            _ => false,
        }
    }

    /// The stage's image when it is a known finite set.
    pub fn finite_image(&self) -> Option<Vec<Point>> {
        match self {
            Stage::Map { map } => map.finite_image(),
            Stage::NearestLookup { anchors } => Some(anchors.clone()),
            Stage::Discrete { kernel } => Some(kernel.target().to_vec()),
            Stage::Softmax { kernel } => Some(kernel.targets.clone()),
            Stage::Quantile { kernel } => Some(
                (0..kernel.target_values.len())
                    .map(|j| kernel.target_point(j))
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Exact output distribution at `x`; fails for Gaussian stages.
    pub fn distribution(&self, x: &Point) -> Result<Vec<(Point, f64)>> {
        Ok(match self {
            Stage::Map { map } => vec![(map.apply(x)?, 1.0)],
            Stage::NearestLookup { anchors } => vec![(anchors[nearest_anchor(anchors, x)].clone(), 1.0)],
            Stage::Gaussian { .. } => {
                return Err(Error::Stochastic("a Gaussian stage has no finite output".into()))
            }
            Stage::Discrete { kernel } => kernel
                .row_at(x)?
                .iter()
                .map(|&(j, w)| (kernel.target()[j].clone(), w))
                .collect(),
            Stage::Round { partition } => vec![(partition.round_point(x), 1.0)],
            Stage::Softmax { kernel } => kernel
                .row(x)
                .into_iter()
                .map(|(j, w)| (kernel.targets[j].clone(), w))
                .collect(),
            Stage::Quantile { kernel } => {
                if x.dim() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        found: x.dim(),
                    });
                }
                kernel
                    .row(x[0])
                    .into_iter()
                    .map(|(j, w)| (kernel.target_point(j), w))
                    .collect()
            }
        })
    }

    /// One draw from the stage at `x`.
    pub fn sample<R: Rng + ?Sized>(&self, x: &Point, rng: &mut R) -> Result<Point> {
        match self {
            Stage::Gaussian { sigma } => Point::new(
                x.coords()
                    .iter()
                    .map(|c| {
                        let z: f64 = StandardNormal.sample(rng);
                        c + sigma * z
                    })
                    .collect::<Vec<f64>>(),
            ),
            _ => {
                let mut dist = self.distribution(x)?;
                if dist.len() == 1 {
                    return Ok(dist.pop().unwrap().0);
                }
                let k = draw_index(dist.iter().map(|e| e.1), rng);
                Ok(dist.swap_remove(k).0)
            }
        }
    }
}

/// A Markov kernel built from stages applied left to right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Stage>", into = "Vec<Stage>")]
pub struct KernelPipeline {
    stages: Vec<Stage>,
}

impl TryFrom<Vec<Stage>> for KernelPipeline {
    type Error = Error;
    fn try_from(stages: Vec<Stage>) -> Result<Self> {
        KernelPipeline::new(stages)
    }
}

impl From<KernelPipeline> for Vec<Stage> {
    fn from(k: KernelPipeline) -> Self {
        k.stages
    }
}

impl From<DiscreteKernel> for KernelPipeline {
    fn from(kernel: DiscreteKernel) -> Self {
        KernelPipeline {
            stages: vec![Stage::Discrete { kernel }],
        }
    }
}

impl KernelPipeline {
    /// Validate each stage and the finite-image compatibility of every
    /// discrete stage with its predecessor.
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        for s in &stages {
            s.validate()?;
        }
        for w in stages.windows(2) {
            if let (Some(image), Stage::Discrete { kernel }) = (w[0].finite_image(), &w[1]) {
                if let Some(p) = image.iter().find(|p| !kernel.contains(p)) {
                    return Err(Error::Incompatible(format!(
                        "point {:?} reachable by the previous stage is not a kernel source",
                        p.coords()
                    )));
                }
            }
        }
        Ok(KernelPipeline { stages })
    }

    /// The identity kernel x ↦ δ_x.
    pub fn identity() -> Self {
        KernelPipeline { stages: Vec::new() }
    }

    pub fn map(map: PointMap) -> Result<Self> {
        KernelPipeline::new(vec![Stage::Map { map }])
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn has_continuous_stage(&self) -> bool {
        self.stages.iter().any(Stage::is_continuous)
    }

    pub fn is_deterministic(&self) -> bool {
        self.stages.iter().all(Stage::is_deterministic)
    }

    /// Exact output distribution at `x`, atoms merged by coordinates.
    pub fn distribution(&self, x: &Point) -> Result<Vec<(Point, f64)>> {
        let mut dist = vec![(x.clone(), 1.0)];
        for stage in &self.stages {
            dist = step(stage, dist)?;
        }
        Ok(dist)
    }

    /// Output distribution at `x` with every Gaussian stage resolved by a
    /// single draw; exact elsewhere.
    pub fn sampled_distribution<R: Rng + ?Sized>(&self, x: &Point, rng: &mut R) -> Result<Vec<(Point, f64)>> {
        let mut dist = vec![(x.clone(), 1.0)];
        for stage in &self.stages {
            if stage.is_continuous() {
                let k = if dist.len() == 1 {
                    0
                } else {
                    draw_index(dist.iter().map(|e| e.1), rng)
                };
                let z = stage.sample(&dist[k].0, rng)?;
                dist = vec![(z, 1.0)];
            } else {
                dist = step(stage, dist)?;
            }
        }
        Ok(dist)
    }
}

fn step(stage: &Stage, dist: Vec<(Point, f64)>) -> Result<Vec<(Point, f64)>> {
    if dist.len() == 1 {
        let (x, w) = &dist[0];
        let mut out = stage.distribution(x)?;
        if *w != 1.0 {
            out.iter_mut().for_each(|e| e.1 *= w);
        }
        return Ok(out);
    }
    let mut acc = propagate::AtomAccumulator::default();
    for (x, w) in dist {
        for (y, v) in stage.distribution(&x)? {
            acc.add(y, w * v);
        }
    }
    Ok(acc.into_atoms())
}

/// `compose(outer, inner)` is the kernel x ↦ outer applied to inner(x).
pub fn compose(outer: &KernelPipeline, inner: &KernelPipeline) -> Result<KernelPipeline> {
    let mut stages = inner.stages.clone();
    stages.extend(outer.stages.iter().cloned());
    KernelPipeline::new(stages)
}
