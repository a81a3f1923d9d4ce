use crate::error::{Error, Result};
use crate::kernels::{KernelPipeline, PointMap, PointTable, Stage};
use crate::measures::{DiscreteMeasure, Point};
use crate::ot::exact_ot;

use super::{check_samples, EstimatorKind, FittedEstimator};

/// Nearest-neighbor map: each x goes to the image of its nearest source
/// sample under the optimal W_1 assignment between the two samples.
pub fn nn_estimator(xs: &[Point], ys: &[Point]) -> Result<FittedEstimator> {
    check_samples(xs, ys)?;
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(format!(
            "nn estimator needs equal sample counts, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let mu = DiscreteMeasure::uniform(xs.to_vec())?;
    let nu = DiscreteMeasure::uniform(ys.to_vec())?;
    let plan = exact_ot(&mu, &nu, 1.0)?;
    // Largest-mass column per row; entries are sorted so the first maximum
    // has the lowest column index.
    let mut best: Vec<Option<(usize, f64)>> = vec![None; xs.len()];
    let mut splits = 0;
    for &(i, j, m) in plan.entries() {
        match best[i] {
            Some((_, bm)) => {
                splits += 1;
                if m > bm {
                    best[i] = Some((j, m));
                }
            }
            None => best[i] = Some((j, m)),
        }
    }
    let images: Vec<Point> = best
        .iter()
        .map(|b| ys[b.expect("every row of a feasible plan carries mass").0].clone())
        .collect();
    let table = PointTable::new(xs.to_vec(), images)?;
    let pipeline = KernelPipeline::new(vec![
        Stage::NearestLookup {
            anchors: xs.to_vec(),
        },
        Stage::Map {
            map: PointMap::Table(table),
        },
    ])?;
    let mut out = FittedEstimator::new(EstimatorKind::Nn, pipeline).param("p", 1.0);
    if splits > 0 {
        out.flags
            .push(format!("optimal plan split mass on {splits} entries; kept the largest per row"));
    }
    Ok(out)
}
