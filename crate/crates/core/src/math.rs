//! Scalar helpers that stay finite where the naive formulas overflow.

use std::f64::consts::LN_2;

/// `log(1 + exp(x))`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log(cosh(a))` via `|a| + log1p(exp(-2|a|)) - log 2`, finite for any finite `a`.
#[inline]
pub fn log_cosh(a: f64) -> f64 {
    let abs = a.abs();
    abs + (-2.0 * abs).exp().ln_1p() - LN_2
}

/// `log(1 - exp(-a))` for `a > 0`.
#[inline]
pub fn log1mexp(a: f64) -> f64 {
    if a < LN_2 {
        (-(-a).exp_m1()).ln()
    } else {
        (-(-a).exp()).ln_1p()
    }
}

/// `log(exp(a) - 1)` for `a > 0`.
#[inline]
pub fn log_expm1(a: f64) -> f64 {
    a + log1mexp(a)
}

/// Log-sum-exp of a slice. Returns `-inf` for an empty slice or when every
/// entry is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let mut acc = LogAccumulator::new();
    for &v in values {
        acc.push(v);
    }
    acc.log_sum()
}

/// Streaming log-sum-exp with a running max shift.
#[derive(Debug, Clone, Copy)]
pub struct LogAccumulator {
    max: f64,
    scaled_sum: f64,
    count: usize,
}

impl Default for LogAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl LogAccumulator {
    pub fn new() -> Self {
        Self { max: f64::NEG_INFINITY, scaled_sum: 0.0, count: 0 }
    }

    pub fn push(&mut self, log_value: f64) {
        self.count += 1;
        if log_value == f64::NEG_INFINITY {
            return;
        }
        if log_value > self.max {
            self.scaled_sum = self.scaled_sum * (self.max - log_value).exp() + 1.0;
            self.max = log_value;
        } else {
            self.scaled_sum += (log_value - self.max).exp();
        }
    }

    pub fn merge(&mut self, other: &LogAccumulator) {
        if other.max == f64::NEG_INFINITY {
            self.count += other.count;
            return;
        }
        if other.max > self.max {
            self.scaled_sum = self.scaled_sum * (self.max - other.max).exp() + other.scaled_sum;
            self.max = other.max;
        } else {
            self.scaled_sum += other.scaled_sum * (other.max - self.max).exp();
        }
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `log Σ exp(v)` over everything pushed so far.
    pub fn log_sum(&self) -> f64 {
        if self.scaled_sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled_sum.ln()
        }
    }

    /// `log((1/n) Σ exp(v))`.
    pub fn log_mean(&self) -> f64 {
        self.log_sum() - (self.count as f64).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_cosh_matches_direct_formula_and_survives_large_arguments() {
        for &a in &[0.0, 0.3, -1.7, 5.0, -12.0] {
            let direct = f64::cosh(a).ln();
            assert!((log_cosh(a) - direct).abs() < 1e-14, "a = {a}");
        }
        assert!((log_cosh(1000.0) - (1000.0 - LN_2)).abs() < 1e-12);
        assert!(log_cosh(-1e300).is_finite());
    }

    #[test]
    fn softplus_limits() {
        assert!((softplus(0.0) - LN_2).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
    }

    #[test]
    fn log1mexp_branches_agree_at_switch() {
        let a = LN_2;
        let lo = (-(-a).exp_m1()).ln();
        let hi = (-(-a).exp()).ln_1p();
        assert!((lo - hi).abs() < 1e-15);
        assert!((log_expm1(50.0) - 50.0).abs() < 1e-14);
        assert!((log_expm1(1e-3) - (1e-3f64).exp_m1().ln()).abs() < 1e-12);
    }

    #[test]
    fn accumulator_is_order_insensitive() {
        let xs = [3.0, -700.0, 12.5, 0.0, 699.0, -1.0, 650.0];
        let forward = log_sum_exp(&xs);
        let mut rev = xs;
        rev.reverse();
        assert!((forward - log_sum_exp(&rev)).abs() < 1e-12);

        let mut a = LogAccumulator::new();
        let mut b = LogAccumulator::new();
        for (i, &x) in xs.iter().enumerate() {
            if i % 2 == 0 { a.push(x) } else { b.push(x) }
        }
        a.merge(&b);
        assert!((a.log_sum() - forward).abs() < 1e-12);
        assert_eq!(a.count(), xs.len());
    }

    #[test]
    fn empty_and_neg_inf_inputs() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[f64::NEG_INFINITY, 0.0]) - 0.0).abs() < 1e-15);
    }
}
