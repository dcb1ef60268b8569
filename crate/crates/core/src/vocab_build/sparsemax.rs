use crate::{Error, Result};

/// Euclidean projection onto the probability simplex.
pub fn sparsemax(z: &[f64]) -> Result<Vec<f64>> {
    if z.is_empty() {
        return Err(Error::EmptyInput("sparsemax of an empty vector".into()));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("sparsemax input must be finite".into()));
    }
    let mut sorted = z.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut support = 0;
    let mut support_sum = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumsum += v;
        if 1.0 + (k + 1) as f64 * v > cumsum {
            support = k + 1;
            support_sum = cumsum;
        }
    }
    let tau = (support_sum - 1.0) / support as f64;
    Ok(z.iter().map(|&v| (v - tau).max(0.0)).collect())
}
