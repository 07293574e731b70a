//! Small numeric helpers shared by the engines.

/// Natural log of the gamma function.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln Γ(x + n) - ln Γ(x)` for a nonnegative integer `n`.
///
/// Short rising factorials are summed term by term, which keeps full relative
/// precision for the single-token and few-token cases that dominate the
/// per-token predictives.
#[inline]
pub fn ln_rising(x: f64, n: u64) -> f64 {
    match n {
        0 => 0.0,
        1 => x.ln(),
        2..=8 => (0..n).map(|j| (x + j as f64).ln()).sum(),
        _ => ln_gamma(x + n as f64) - ln_gamma(x),
    }
}

/// Stable `ln Σ exp(v)`. Returns `-inf` for an empty slice or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Turns log weights into a probability vector in place, subtracting the max
/// before exponentiating. Returns the log normalizer.
///
/// All `-inf` input is left as all zeros and `-inf` is returned; callers treat
/// that as "no admissible outcome".
pub fn normalize_log_in_place(values: &mut [f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        values.iter_mut().for_each(|v| *v = 0.0);
        return f64::NEG_INFINITY;
    }
    let mut total = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in values.iter_mut() {
        *v /= total;
    }
    max + total.ln()
}

/// Normalizes nonnegative weights to sum to one. Returns the original sum.
pub fn normalize_in_place(values: &mut [f64]) -> f64 {
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        values.iter_mut().for_each(|v| *v /= total);
    }
    total
}

/// Inverse-CDF categorical draw from a single uniform `u` in `[0, 1)`.
///
/// Zero-weight categories are never returned. `probs` must sum to one up to
/// rounding; the last positive category absorbs any rounding shortfall.
pub fn categorical_from_uniform(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last_positive = k;
        if u < acc {
            return k;
        }
    }
    last_positive
}
