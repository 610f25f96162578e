//! Small numerical helpers shared by the analytic code.

/// Neumaier compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Sums `terms` largest-magnitude first with compensation.
pub fn sum_by_magnitude(terms: &mut [f64]) -> f64 {
    terms.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let mut acc = CompensatedSum::new();
    for &t in terms.iter() {
        acc.add(t);
    }
    acc.value()
}

/// `1 - exp(-x)` without cancellation for small `x`.
#[inline]
pub fn one_minus_exp_neg(x: f64) -> f64 {
    -(-x).exp_m1()
}

/// Ceiling that forgives floating-point noise such as `0.7 * 10.0 = 7.000000000000001`.
pub fn robust_ceil(x: f64) -> u64 {
    let slack = 1e-9 * x.abs().max(1.0);
    let c = (x - slack).ceil();
    if c <= 0.0 {
        0
    } else {
        c as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut terms = vec![1e16, 1.0, -1e16, 1.0];
        assert_eq!(sum_by_magnitude(&mut terms), 2.0);
    }

    #[test]
    fn robust_ceil_ignores_representation_noise() {
        assert_eq!(robust_ceil(0.7 * 10.0), 7);
        assert_eq!(robust_ceil((1.0 - 0.7) * 10.0), 3);
        assert_eq!(robust_ceil(5.0), 5);
        assert_eq!(robust_ceil(5.01), 6);
        assert_eq!(robust_ceil(0.0), 0);
    }

    #[test]
    fn one_minus_exp_small_argument() {
        let x = 1e-12;
        assert!((one_minus_exp_neg(x) - x).abs() < 1e-24);
    }
}
