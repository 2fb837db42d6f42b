//! Compensated accumulation in the linear and log domains.

use serde::{Deserialize, Serialize};

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl std::iter::FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Streaming log-sum-exp: holds `max` and `sum exp(x - max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, log_value: f64) {
        if log_value == f64::NEG_INFINITY {
            return;
        }
        if log_value <= self.max {
            self.scaled += (log_value - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - log_value).exp() + 1.0;
            self.max = log_value;
        }
    }

    pub fn merge(&mut self, other: &LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if self.max == f64::NEG_INFINITY {
            *self = *other;
            return;
        }
        if other.max <= self.max {
            self.scaled += other.scaled * (other.max - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        }
    }

    /// Logarithm of the accumulated sum; `-inf` when empty.
    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Relative difference `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Mean and standard error from non-overlapping batch means.
pub fn batch_means(values: &[f64], batches: usize) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().copied().collect::<NeumaierSum>().value() / n as f64;
    let batches = batches.clamp(2, n.max(2));
    let size = n / batches;
    if size == 0 {
        return (mean, f64::NAN);
    }
    let means: Vec<f64> = (0..batches)
        .map(|b| values[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_small_terms() {
        let mut acc = NeumaierSum::new();
        acc.add(1.0);
        acc.add(1e100);
        acc.add(1.0);
        acc.add(-1e100);
        assert_eq!(acc.value(), 2.0);
    }

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let values = [0.1f64, 2.5, 1e-3, 7.0, 0.25];
        let mut lse = LogSumExp::new();
        for v in values {
            lse.add(v.ln());
        }
        let direct: f64 = values.iter().sum();
        assert!(relative_difference(lse.value().exp(), direct) < 1e-14);
        lse.add(f64::NEG_INFINITY);
        assert!(relative_difference(lse.value().exp(), direct) < 1e-14);
    }

    #[test]
    fn merged_accumulators_agree_with_single_pass() {
        let values: Vec<f64> = (1..200).map(|k| 1.0 / k as f64).collect();
        let (a, b) = values.split_at(77);
        let mut left: NeumaierSum = a.iter().copied().collect();
        let right: NeumaierSum = b.iter().copied().collect();
        left.merge(&right);
        let whole: NeumaierSum = values.iter().copied().collect();
        assert!(relative_difference(left.value(), whole.value()) < 1e-15);

        let mut la = LogSumExp::new();
        let mut lb = LogSumExp::new();
        a.iter().for_each(|v| la.add(v.ln()));
        b.iter().for_each(|v| lb.add(v.ln()));
        la.merge(&lb);
        assert!(relative_difference(la.value().exp(), whole.value()) < 1e-13);
        assert_eq!(LogSumExp::new().value(), f64::NEG_INFINITY);
    }

    #[test]
    fn batch_means_of_constant_has_zero_error() {
        let (m, se) = batch_means(&[3.0; 100], 10);
        assert_eq!(m, 3.0);
        assert_eq!(se, 0.0);
    }
}
