//! Max-shifted log-sum-exp.

/// `log Σ exp(v)`. Returns `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `τ · log Σ exp(v / τ)`, shifted by the maximum so the largest term is `exp(0)`.
///
/// The result is never below `max(v)`.
pub fn soft_max(values: &[f64], tau: f64) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + tau * values.iter().map(|v| ((v - m) / tau).exp()).sum::<f64>().ln()
}
