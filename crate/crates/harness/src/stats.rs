//! Replication summaries: mean and standard error of the mean.

/// Mean, standard error (`s / sqrt(n)`, sample standard deviation) and count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStat {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    /// True when a single observation made the spread unmeasurable.
    pub degenerate: bool,
}

/// Aggregates replication values. Panics on an empty slice; a singleton
/// yields stderr 0 with the degenerate flag set.
pub fn aggregate(values: &[f64]) -> SummaryStat {
    assert!(!values.is_empty(), "aggregate needs at least one value");
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return SummaryStat { mean, stderr: 0.0, n, degenerate: true };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    SummaryStat { mean, stderr: (var / n as f64).sqrt(), n, degenerate: false }
}

/// Sample variance with the `n - 1` denominator (0 for singletons).
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}
