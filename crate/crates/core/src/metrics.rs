//! Partition quality and overtriangulation metrics.

use crate::error::{Error, Result};

/// Relative deviation `p_i / (N / k) - 1` of each part from the ideal size.
pub fn ideal_deviation(sizes: &[usize], k: usize) -> Vec<f64> {
    let total: usize = sizes.iter().sum();
    let ideal = total as f64 / k as f64;
    sizes.iter().map(|&p| p as f64 / ideal - 1.0).collect()
}

/// Largest absolute ideal deviation over all parts.
pub fn max_ideal_deviation(sizes: &[usize], k: usize) -> f64 {
    ideal_deviation(sizes, k)
        .into_iter()
        .fold(0.0, |m, d| m.max(d.abs()))
}

/// Sample standard deviation (divisor `k - 1`) over the mean.
pub fn coefficient_of_variation(sizes: &[usize]) -> Result<f64> {
    let k = sizes.len();
    if k < 2 {
        return Err(Error::UndefinedForSinglePart);
    }
    let mean = sizes.iter().sum::<usize>() as f64 / k as f64;
    let var = sizes
        .iter()
        .map(|&p| {
            let d = p as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / (k - 1) as f64;
    Ok(var.sqrt() / mean)
}

/// Points triangulated in total (input, samples, border vertices) per input
/// point.
pub fn overtriangulation(n: usize, sample_sizes: &[usize], border_vertices: &[usize]) -> f64 {
    let extra: usize = sample_sizes.iter().sum::<usize>() + border_vertices.iter().sum::<usize>();
    (n + extra) as f64 / n as f64
}
