//! Small shared helpers.

/// Index of the maximum value, lowest index on ties.
///
/// Ties are broken toward the lowest index so that selection is
/// deterministic and independent of exploration order. Panics on an
/// empty slice; callers guarantee at least one candidate.
pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Splits `total` into `parts` integers that differ by at most one, the
/// larger shares first, summing exactly to `total`.
pub(crate) fn split_budget(total: usize, parts: usize) -> Vec<usize> {
    let base = total / parts;
    let leftover = total - base * parts;
    (0..parts).map(|i| base + usize::from(i < leftover)).collect()
}

/// Sample mean and standard error (sample standard deviation over the
/// square root of the count). A single observation has standard error 0.
pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n >= 1, "mean of an empty sample");
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax_lowest(&[0.1, 0.5, 0.5, 0.2]), 1);
        assert_eq!(argmax_lowest(&[0.5]), 0);
        assert_eq!(argmax_lowest(&[0.0, 0.0, 0.0]), 0);
    }

    #[test]
    fn split_budget_sums_and_balances() {
        assert_eq!(split_budget(10, 3), vec![4, 3, 3]);
        assert_eq!(split_budget(9, 3), vec![3, 3, 3]);
        assert_eq!(split_budget(2, 5), vec![1, 1, 0, 0, 0]);
        assert_eq!(split_budget(0, 4), vec![0, 0, 0, 0]);
    }

    #[test]
    fn stderr_of_single_observation_is_zero() {
        let (m, se) = mean_and_stderr(&[0.25]);
        assert_eq!(m, 0.25);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn stderr_matches_hand_computation() {
        // values 0, 1: mean 1/2, sample var 1/2, se = sqrt(1/4) = 1/2
        let (m, se) = mean_and_stderr(&[0.0, 1.0]);
        assert!((m - 0.5).abs() < 1e-15);
        assert!((se - 0.5).abs() < 1e-15);
    }
}
