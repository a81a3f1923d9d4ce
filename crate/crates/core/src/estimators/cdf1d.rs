use crate::error::{Error, Result};
use crate::kernels::{KernelPipeline, QuantileKernel, Stage};
use crate::measures::{DiscreteMeasure, Point};
use crate::ot::check_exponent;

use super::{check_samples, EstimatorKind, FittedEstimator};

/// One-dimensional quantile kernel: each source atom's CDF jump is spread
/// uniformly over the matching quantile range of the target sample. The
/// kernel is optimal for every p between the two empirical measures.
pub fn cdf_estimator_1d(xs: &[Point], ys: &[Point], p: f64) -> Result<FittedEstimator> {
    let d = check_samples(xs, ys)?;
    check_exponent(p)?;
    if d != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: d });
    }
    let mu = DiscreteMeasure::uniform(xs.to_vec())?;
    let nu = DiscreteMeasure::uniform(ys.to_vec())?;
    let kernel = QuantileKernel::fit(&mu, &nu)?;
    let pipeline = KernelPipeline::new(vec![Stage::Quantile { kernel }])?;
    Ok(FittedEstimator::new(EstimatorKind::Cdf1d, pipeline).param("p", p))
}
