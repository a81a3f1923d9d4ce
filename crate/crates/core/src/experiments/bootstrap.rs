use rand::Rng;

use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

/// Bootstrap quantiles of the mean: draw `b` resamples of `values` with
/// replacement, take each resample's mean, and report the requested
/// empirical quantiles of those means.
pub fn bootstrap_quantiles<R: Rng + ?Sized>(values: &[f64], b: usize, qs: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Empty("bootstrap input"));
    }
    if b == 0 {
        return Err(Error::InvalidParameter("bootstrap needs at least one resample".into()));
    }
    if let Some(q) = qs.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(Error::InvalidParameter(format!("quantile {q} outside [0, 1]")));
    }
    let n = values.len();
    let mut means: Vec<f64> = (0..b)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    Ok(qs.iter().map(|&q| quantile_sorted(&means, q)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn constant_values() {
        let q = bootstrap_quantiles(&[2.5; 7], 100, &[0.1, 0.9], &mut stream(0, &[])).unwrap();
        assert_eq!(q, vec![2.5, 2.5]);
    }

    #[test]
    fn single_resample() {
        let q = bootstrap_quantiles(&[1.0, 2.0, 4.0], 1, &[0.1, 0.9], &mut stream(1, &[])).unwrap();
        assert_eq!(q[0], q[1]);
        assert!((1.0..=4.0).contains(&q[0]));
    }

    #[test]
    fn two_value_sample_brackets_mean() {
        let values: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect();
        let q = bootstrap_quantiles(&values, 2000, &[0.1, 0.9], &mut stream(2, &[])).unwrap();
        assert!(q[0] < 0.5 && q[1] > 0.5);
        // resample means have sd 0.5/√20 ≈ 0.11; the 10% quantile sits near 0.36
        assert!((q[0] - 0.357).abs() < 0.05 && (q[1] - 0.643).abs() < 0.05, "{q:?}");
    }

    #[test]
    fn rejects_bad_input() {
        let mut rng = stream(3, &[]);
        assert!(bootstrap_quantiles(&[], 10, &[0.5], &mut rng).is_err());
        assert!(bootstrap_quantiles(&[1.0], 0, &[0.5], &mut rng).is_err());
        assert!(bootstrap_quantiles(&[1.0], 10, &[1.5], &mut rng).is_err());
    }
}
