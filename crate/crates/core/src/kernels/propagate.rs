//! Pushing measures through pipelines, exactly or by Monte Carlo.
//!
//! Pipelines without a Gaussian stage are propagated exactly: every atom of
//! μ is mapped to its finite output distribution. With a Gaussian stage,
//! `samples` source atoms are drawn from μ; each Gaussian stage is resolved
//! by one noise draw and all other stages stay exact, so the pushforward is
//! the average of the resulting finite distributions. Draws are split into
//! fixed chunks of 1024 with seeds derived from (seed, chunk index), which
//! keeps results identical for any thread count.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{powered_distance, DiscreteMeasure, Point, PointKey};
use crate::rng::stream;
use crate::stats::mean_and_stderr;

use super::KernelPipeline;

const CHUNK: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub samples: usize,
    pub seed: u64,
    /// Independent repetitions used for standard errors of derived
    /// quantities such as E_p.
    pub replicates: usize,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            samples: 10_000,
            seed: 0,
            replicates: 10,
        }
    }
}

impl MonteCarloConfig {
    pub fn with_seed(seed: u64) -> Self {
        MonteCarloConfig {
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidParameter("Monte Carlo needs at least one sample".into()));
        }
        Ok(())
    }
}

/// A value with its Monte-Carlo standard error (0 when computed exactly).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// Output of pushing μ through a kernel.
#[derive(Clone, Debug)]
pub struct Propagation {
    pub pushforward: DiscreteMeasure,
    /// ∬ ‖x − y‖^p dκ_x(y) dμ(x)
    pub cost_integral: f64,
    pub cost_stderr: f64,
    pub exact: bool,
}

/// Collects weighted atoms, merging identical coordinates and keeping
/// first-appearance order.
#[derive(Default)]
pub(crate) struct AtomAccumulator {
    index: HashMap<PointKey, usize>,
    atoms: Vec<(Point, f64)>,
}

impl AtomAccumulator {
    pub(crate) fn add(&mut self, p: Point, w: f64) {
        match self.index.get(&p.key()) {
            Some(&k) => self.atoms[k].1 += w,
            None => {
                self.index.insert(p.key(), self.atoms.len());
                self.atoms.push((p, w));
            }
        }
    }

    pub(crate) fn into_atoms(self) -> Vec<(Point, f64)> {
        self.atoms
    }

    fn into_measure(self) -> Result<DiscreteMeasure> {
        let (points, weights) = self.atoms.into_iter().unzip();
        DiscreteMeasure::new(points, weights)
    }
}

/// Push μ through `k` and integrate the p-th power cost.
pub fn propagate(k: &KernelPipeline, mu: &DiscreteMeasure, p: f64, mc: &MonteCarloConfig) -> Result<Propagation> {
    crate::ot::check_exponent(p)?;
    if !k.has_continuous_stage() {
        let mut acc = AtomAccumulator::default();
        let mut cost = 0.0;
        for (x, w) in mu.iter() {
            if w <= 0.0 {
                continue;
            }
            for (y, v) in k.distribution(x)? {
                cost += w * v * powered_distance(x, &y, p);
                acc.add(y, w * v);
            }
        }
        return Ok(Propagation {
            pushforward: acc.into_measure()?,
            cost_integral: cost,
            cost_stderr: 0.0,
            exact: true,
        });
    }

    mc.validate()?;
    let sampler = WeightedIndex::new(mu.weights())
        .map_err(|e| Error::Numerical(format!("source sampler: {e}")))?;
    let chunks = mc.samples.div_ceil(CHUNK);
    let results: Vec<Result<(Vec<(Point, f64)>, Vec<f64>)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(mc.seed, &[c as u64]);
            let len = CHUNK.min(mc.samples - c * CHUNK);
            let mut acc = AtomAccumulator::default();
            let mut costs = Vec::with_capacity(len);
            for _ in 0..len {
                let x = &mu.points()[sampler.sample(&mut rng)];
                let mut sample_cost = 0.0;
                for (y, v) in k.sampled_distribution(x, &mut rng)? {
                    sample_cost += v * powered_distance(x, &y, p);
                    acc.add(y, v);
                }
                costs.push(sample_cost);
            }
            Ok((acc.into_atoms(), costs))
        })
        .collect();

    let scale = 1.0 / mc.samples as f64;
    let mut acc = AtomAccumulator::default();
    let mut costs = Vec::with_capacity(mc.samples);
    for r in results {
        let (atoms, c) = r?;
        for (y, v) in atoms {
            acc.add(y, v * scale);
        }
        costs.extend(c);
    }
    let (mean, stderr) = mean_and_stderr(&costs);
    Ok(Propagation {
        pushforward: acc.into_measure()?,
        cost_integral: mean,
        cost_stderr: stderr,
        exact: false,
    })
}

/// κ♯μ: exact for finite pipelines, a Monte-Carlo mixture otherwise.
pub fn pushforward(k: &KernelPipeline, mu: &DiscreteMeasure, mc: &MonteCarloConfig) -> Result<DiscreteMeasure> {
    Ok(propagate(k, mu, 1.0, mc)?.pushforward)
}

/// The L^p transport cost (∬ ‖x − y‖^p dκ_x dμ)^{1/p}, with a delta-method
/// standard error when estimated by Monte Carlo.
pub fn transport_cost(k: &KernelPipeline, mu: &DiscreteMeasure, p: f64, mc: &MonteCarloConfig) -> Result<McEstimate> {
    let prop = propagate(k, mu, p, mc)?;
    let integral = prop.cost_integral.max(0.0);
    let value = integral.powf(1.0 / p);
    let stderr = if prop.cost_stderr > 0.0 && integral > 0.0 {
        value / (p * integral) * prop.cost_stderr
    } else {
        0.0
    };
    Ok(McEstimate { value, stderr })
}

/// One draw from κ_x.
pub fn evaluate_at<R: Rng + ?Sized>(k: &KernelPipeline, x: &Point, rng: &mut R) -> Result<Point> {
    let mut current = x.clone();
    for stage in k.stages() {
        current = stage.sample(&current, rng)?;
    }
    Ok(current)
}
