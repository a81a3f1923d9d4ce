//! Space partitions with designated cell centers, used to quantize samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{squared_distance, Point};

/// A partition of ℝ^d together with one center per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Partition {
    /// Half-open cubes `offset + [k·side, (k+1)·side)^d`, centered at midpoints.
    Cubic { side: f64, offset: Point },
    /// Dyadic shells split into Voronoi cells of a scaled covering.
    Shell(ShellPartition),
}

/// Shell 0 is the closed unit ball and shell i ≥ 1 is the annulus
/// `2^{i-1} < ‖x‖ ≤ 2^i`. Inside shell i a point is assigned to the nearest
/// dilated anchor `2^i·a`, where the anchors form a 3δ-covering of the unit
/// ball, so every cell has radius at most `3·2^i·δ` (up to the resolution
/// of the candidate set used to build the covering).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellPartition {
    pub delta: f64,
    pub anchors: Vec<Point>,
}

/// Identifier of a partition cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellId {
    Cube(Vec<i64>),
    Shell { shell: u32, anchor: usize },
}

impl Partition {
    pub fn cubic(side: f64, d: usize) -> Result<Self> {
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::InvalidParameter(format!("cube side must be positive, got {side}")));
        }
        Ok(Partition::Cubic {
            side,
            offset: Point::origin(d),
        })
    }

    pub fn shell(delta: f64, d: usize) -> Result<Self> {
        Ok(Partition::Shell(ShellPartition::new(delta, d)?))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Partition::Cubic { side, .. } if !(*side > 0.0) || !side.is_finite() => Err(
                Error::InvalidParameter(format!("cube side must be positive, got {side}")),
            ),
            Partition::Shell(s) if s.anchors.is_empty() => {
                Err(Error::InvalidParameter("shell partition needs anchors".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn cell(&self, x: &Point) -> CellId {
        match self {
            Partition::Cubic { side, offset } => CellId::Cube(
                x.coords()
                    .iter()
                    .zip(offset.coords())
                    .map(|(c, o)| ((c - o) / side).floor() as i64)
                    .collect(),
            ),
            Partition::Shell(s) => {
                let (shell, anchor) = s.locate(x);
                CellId::Shell { shell, anchor }
            }
        }
    }

    /// Center of the cell containing `x`.
    pub fn round_point(&self, x: &Point) -> Point {
        match self {
            Partition::Cubic { side, offset } => Point::from_vec(
                x.coords()
                    .iter()
                    .zip(offset.coords())
                    .map(|(c, o)| o + (((c - o) / side).floor() + 0.5) * side)
                    .collect(),
            ),
            Partition::Shell(s) => {
                let (shell, anchor) = s.locate(x);
                let scale = (shell as f64).exp2();
                Point::from_vec(s.anchors[anchor].coords().iter().map(|a| a * scale).collect())
            }
        }
    }

    /// Largest distance from a point of the given cell to its center; for
    /// shell partitions this is the covering bound of the cell's shell.
    pub fn cell_radius(&self, cell: &CellId, d: usize) -> f64 {
        match (self, cell) {
            (Partition::Cubic { side, .. }, _) => 0.5 * side * (d as f64).sqrt(),
            (Partition::Shell(s), CellId::Shell { shell, .. }) => {
                3.0 * s.delta * (*shell as f64).exp2()
            }
            (Partition::Shell(s), CellId::Cube(_)) => 3.0 * s.delta,
        }
    }
}

/// Shell index of a point: 0 inside the unit ball, else ⌈log2 ‖x‖⌉.
pub fn shell_index(norm: f64) -> u32 {
    if norm <= 1.0 {
        return 0;
    }
    let mut i = norm.log2().ceil().max(1.0) as u32;
    while (i as f64).exp2() < norm {
        i += 1;
    }
    while i > 1 && ((i - 1) as f64).exp2() >= norm {
        i -= 1;
    }
    i
}

fn nearest_index(anchors: &[Point], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, a) in anchors.iter().enumerate() {
        let dist = squared_distance(a.coords(), x);
        if dist < best_d {
            best_d = dist;
            best = k;
        }
    }
    best
}

impl ShellPartition {
    /// Build the base covering: greedy farthest-point selection from a
    /// Halton point set in the unit ball, starting at the origin and
    /// stopping once every candidate lies within 3δ of an anchor.
    pub fn new(delta: f64, d: usize) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let radius = 3.0 * delta;
        let mut anchors = vec![Point::origin(d)];
        if radius < 1.0 {
            let candidates = ball_candidates(d, covering_candidate_count(delta, d));
            let mut dist: Vec<f64> = candidates
                .iter()
                .map(|c| squared_distance(c, anchors[0].coords()))
                .collect();
            loop {
                let (far, &far_d) = dist
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                    .expect("candidate set is nonempty");
                if far_d.sqrt() <= radius {
                    break;
                }
                let new = candidates[far].clone();
                for (k, c) in candidates.iter().enumerate() {
                    dist[k] = dist[k].min(squared_distance(c, &new));
                }
                anchors.push(Point::from_vec(new));
            }
        }
        let cap = delta.powi(-(d as i32)).floor().max(1.0);
        if anchors.len() as f64 > cap {
            return Err(Error::Numerical(format!(
                "covering has {} anchors, more than the bound {cap}",
                anchors.len()
            )));
        }
        Ok(ShellPartition { delta, anchors })
    }

    fn locate(&self, x: &Point) -> (u32, usize) {
        let shell = shell_index(x.norm());
        let scale = (shell as f64).exp2();
        let scaled: Vec<f64> = x.coords().iter().map(|c| c / scale).collect();
        (shell, nearest_index(&self.anchors, &scaled))
    }
}

/// Enough candidates that their fill distance is well below δ, within a
/// fixed budget.
fn covering_candidate_count(delta: f64, d: usize) -> usize {
    let per_axis = (4.0 / delta).ceil();
    (per_axis.powi(d as i32) as usize).clamp(512, 20_000)
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// Halton points mapped to [−1, 1]^d, keeping those in the unit ball. In
/// more than 16 dimensions the bases cycle, which is still deterministic.
fn ball_candidates(d: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count && i < 50 * count as u64 + 1000 {
        let v: Vec<f64> = (0..d)
            .map(|k| 2.0 * radical_inverse(i, PRIMES[k % PRIMES.len()] as u64) - 1.0)
            .collect();
        if v.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
            out.push(v);
        }
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn cubic_midpoints() {
        let part = Partition::cubic(1.0, 2).unwrap();
        assert_eq!(part.round_point(&pt(&[0.2, 0.7])), pt(&[0.5, 0.5]));
        assert_eq!(part.round_point(&pt(&[-0.2, 1.0])), pt(&[-0.5, 1.5]));
        assert!(Partition::cubic(0.0, 2).is_err());
    }

    #[test]
    fn cubic_rounding_stays_within_half_diagonal() {
        let mut rng = stream(1, &[]);
        for d in 1..=4 {
            let r = rng.random_range(0.01..1.0);
            let part = Partition::cubic(r, d).unwrap();
            for _ in 0..200 {
                let x = pt(&(0..d).map(|_| rng.random_range(-5.0..5.0)).collect::<Vec<_>>());
                let c = part.round_point(&x);
                assert!(x.distance(&c) <= (d as f64).sqrt() * r / 2.0 + 1e-12);
                // the center lies in the same cell
                assert_eq!(part.cell(&c), part.cell(&x));
            }
        }
    }

    #[test]
    fn shell_indices() {
        assert_eq!(shell_index(0.0), 0);
        assert_eq!(shell_index(1.0), 0);
        assert_eq!(shell_index(1.0 + 1e-12), 1);
        assert_eq!(shell_index(2.0), 1);
        assert_eq!(shell_index(2.0001), 2);
        assert_eq!(shell_index(1024.0), 10);
    }

    #[test]
    fn shell_rounding_respects_cell_diameter() {
        let mut rng = stream(2, &[]);
        for (d, delta) in [(1, 0.05), (2, 0.1), (3, 0.2)] {
            let part = Partition::shell(delta, d).unwrap();
            let Partition::Shell(s) = &part else { unreachable!() };
            assert!(s.anchors.len() as f64 <= delta.powi(-(d as i32)));
            for _ in 0..500 {
                let scale = 10f64.powf(rng.random_range(-1.0..2.0));
                let x = pt(&(0..d).map(|_| scale * rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
                let i = shell_index(x.norm());
                let c = part.round_point(&x);
                assert!(x.distance(&c) <= 6.0 * (i as f64).exp2() * delta, "d={d} x={x:?}");
            }
        }
    }

    #[test]
    fn coarse_shell_uses_single_anchor() {
        let s = ShellPartition::new(0.5, 3).unwrap();
        assert_eq!(s.anchors, vec![Point::origin(3)]);
        assert!(ShellPartition::new(0.0, 3).is_err());
    }

    #[test]
    fn partition_json_round_trip() {
        let part = Partition::shell(0.2, 2).unwrap();
        let json = serde_json::to_string(&part).unwrap();
        assert!(json.contains("\"kind\":\"shell\""));
        let back: Partition = serde_json::from_str(&json).unwrap();
        assert_eq!(back, part);
    }
}
