//! Finite weighted point clouds and elementary distances between them.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a stored measure.
pub const MASS_TOL: f64 = 1e-12;

/// A point of ℝ^d with finite coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("point coordinates"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
        Ok(Point(coords))
    }

    /// Construct without validation. Callers guarantee finiteness.
    pub(crate) fn from_vec(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Point(coords)
    }

    pub fn origin(d: usize) -> Self {
        Point(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        squared_distance(&self.0, &other.0).sqrt()
    }

    /// Bit-level identity key used to aggregate atoms.
    pub fn key(&self) -> PointKey {
        PointKey(
            self.0
                .iter()
                .map(|&c| if c == 0.0 { 0u64 } else { c.to_bits() })
                .collect(),
        )
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Exact coordinate identity (with `-0.0 == 0.0`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointKey(Vec<u64>);

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// ‖x − y‖^p. Every cost in the crate goes through this function.
pub fn powered_distance(x: &Point, y: &Point, p: f64) -> f64 {
    let sq = squared_distance(&x.0, &y.0);
    if p == 2.0 {
        sq
    } else if p == 1.0 {
        sq.sqrt()
    } else {
        sq.sqrt().powf(p)
    }
}

/// A finite probability measure Σ w_i δ_{x_i} on ℝ^d.
///
/// Duplicate points are kept as separate atoms; distances aggregate them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct DiscreteMeasure {
    points: Vec<Point>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    points: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
}

impl TryFrom<MeasureRepr> for DiscreteMeasure {
    type Error = Error;
    fn try_from(r: MeasureRepr) -> Result<Self> {
        match r.weights {
            Some(w) => DiscreteMeasure::new(r.points, w),
            None => DiscreteMeasure::uniform(r.points),
        }
    }
}

impl From<DiscreteMeasure> for MeasureRepr {
    fn from(m: DiscreteMeasure) -> Self {
        MeasureRepr {
            points: m.points,
            weights: Some(m.weights),
        }
    }
}

impl DiscreteMeasure {
    /// Build a measure, normalizing the weights to unit mass.
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("measure support"));
        }
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let d = points[0].dim();
        for p in &points {
            if p.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: p.dim(),
                });
            }
        }
        for (index, &weight) in weights.iter().enumerate() {
            if !weight.is_finite() {
                return Err(Error::NonFinite("weights"));
            }
            if weight < 0.0 {
                return Err(Error::NegativeWeight { index, weight });
            }
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::ZeroMass);
        }
        let weights = if (total - 1.0).abs() <= MASS_TOL {
            weights
        } else {
            weights.into_iter().map(|w| w / total).collect()
        };
        Ok(DiscreteMeasure { points, weights })
    }

    /// Uniform weights 1/n on the given points, duplicates preserved.
    pub fn uniform(points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        DiscreteMeasure::new(points, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn dirac(point: Point) -> Self {
        DiscreteMeasure {
            points: vec![point],
            weights: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    pub fn is_uniform(&self) -> bool {
        let w0 = 1.0 / self.len() as f64;
        self.weights.iter().all(|&w| (w - w0).abs() <= 1e-12)
    }

    /// Atoms at identical coordinates merged, in order of first appearance.
    pub fn merged(&self) -> DiscreteMeasure {
        let mut index: std::collections::HashMap<PointKey, usize> = Default::default();
        let mut points = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (p, w) in self.iter() {
            match index.get(&p.key()) {
                Some(&i) => weights[i] += w,
                None => {
                    index.insert(p.key(), points.len());
                    points.push(p.clone());
                    weights.push(w);
                }
            }
        }
        DiscreteMeasure { points, weights }
    }

    /// Largest pairwise distance between support points.
    pub fn diameter(&self) -> f64 {
        diameter(&self.points)
    }

    fn check_same_dim(&self, other: &DiscreteMeasure) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

/// Largest pairwise distance within a point set (0 for fewer than two points).
pub fn diameter(points: &[Point]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(squared_distance(a.coords(), b.coords()));
        }
    }
    best.sqrt()
}

/// `make_discrete`: validated construction with normalization.
pub fn make_discrete(points: Vec<Point>, weights: Vec<f64>) -> Result<DiscreteMeasure> {
    DiscreteMeasure::new(points, weights)
}

/// `n` i.i.d. draws from `m`.
pub fn sample<R: Rng + ?Sized>(m: &DiscreteMeasure, n: usize, rng: &mut R) -> Result<Vec<Point>> {
    Ok(sample_indices(m, n, rng)?
        .into_iter()
        .map(|i| m.points[i].clone())
        .collect())
}

/// Indices of `n` i.i.d. draws from `m`.
pub fn sample_indices<R: Rng + ?Sized>(
    m: &DiscreteMeasure,
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    if m.len() == 1 {
        return Ok(vec![0; n]);
    }
    let dist = WeightedIndex::new(&m.weights)
        .map_err(|e| Error::Numerical(format!("categorical sampler: {e}")))?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}

/// Uniform empirical measure on the given samples.
pub fn empirical(samples: Vec<Point>) -> Result<DiscreteMeasure> {
    DiscreteMeasure::uniform(samples)
}

/// Total variation distance with atoms at identical coordinates aggregated.
pub fn tv_distance(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    a.check_same_dim(b)?;
    let mut mass: BTreeMap<PointKey, (f64, f64)> = BTreeMap::new();
    for (p, w) in a.iter() {
        mass.entry(p.key()).or_default().0 += w;
    }
    for (p, w) in b.iter() {
        mass.entry(p.key()).or_default().1 += w;
    }
    let tv = 0.5 * mass.values().map(|(x, y)| (x - y).abs()).sum::<f64>();
    Ok(tv.clamp(0.0, 1.0))
}

fn sorted_atoms_1d(m: &DiscreteMeasure) -> Vec<(f64, f64)> {
    let mut atoms: Vec<(f64, f64)> = m.iter().map(|(p, w)| (p[0], w)).collect();
    atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
    atoms
}

fn require_1d(m: &DiscreteMeasure) -> Result<()> {
    if m.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: m.dim(),
        });
    }
    Ok(())
}

/// Kolmogorov–Smirnov distance sup_t |F_a(t) − F_b(t)| between 1-D measures.
pub fn ks_distance_1d(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    require_1d(a)?;
    require_1d(b)?;
    let xa = sorted_atoms_1d(a);
    let xb = sorted_atoms_1d(b);
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut sup = 0.0f64;
    while i < xa.len() || j < xb.len() {
        let t = match (xa.get(i), xb.get(j)) {
            (Some(x), Some(y)) => x.0.min(y.0),
            (Some(x), None) => x.0,
            (None, Some(y)) => y.0,
            (None, None) => unreachable!(),
        };
        while i < xa.len() && xa[i].0 == t {
            fa += xa[i].1;
            i += 1;
        }
        while j < xb.len() && xb[j].0 == t {
            fb += xb[j].1;
            j += 1;
        }
        sup = sup.max((fa - fb).abs());
    }
    Ok(sup.min(1.0))
}
