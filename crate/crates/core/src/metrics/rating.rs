use super::MetricError;

/// Root mean square error and mean absolute error over (predicted, truth)
/// pairs.
pub fn rmse_mae(pairs: &[(f64, f64)]) -> Result<(f64, f64), MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let n = pairs.len() as f64;
    let (sq, abs) = pairs.iter().fold((0.0, 0.0), |(sq, abs), (p, t)| {
        let e = p - t;
        (sq + e * e, abs + e.abs())
    });
    Ok(((sq / n).sqrt(), abs / n))
}
