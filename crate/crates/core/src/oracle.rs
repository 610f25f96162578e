//! Reference computations that avoid the closed forms: adaptive quadrature
//! of subset mixtures and binomial gates for Monte Carlo comparisons.

use crate::analytic::GatedExponential;
use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: (estimate, error estimate).
fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Panels are bisected until each one's error estimate is below its share of
/// `abs_tol`. Fails if `max_depth` bisections do not suffice.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_depth: u32,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut stack = vec![(a, b, 0u32)];
    let width = b - a;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, err) = kronrod15(&mut f, lo, hi);
        let share = abs_tol * (hi - lo) / width;
        if err <= share.max(f64::EPSILON * v.abs()) {
            total += v;
        } else if depth >= max_depth {
            return Err(Error::Convergence {
                iterations: depth as usize,
                residual: err,
            });
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Ok(total)
}

const NESTED_TOL: f64 = 1e-11;
const NESTED_DEPTH: u32 = 30;

/// `Pr{X_1 + ... + X_k <= x}` for independent exponentials, by nested
/// quadrature of `int_0^x f_1(t) Pr{X_2 + ... <= x - t} dt`.
pub fn exponential_sum_cdf(rates: &[f64], x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    match rates {
        [] => Ok(1.0),
        [r] => Ok(-(-r * x).exp_m1()),
        [r, rest @ ..] => {
            let mut failure = None;
            let v = integrate(
                |t| match exponential_sum_cdf(rest, x - t) {
                    Ok(p) => r * (-r * t).exp() * p,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                },
                0.0,
                x,
                NESTED_TOL,
                NESTED_DEPTH,
            )?;
            match failure {
                Some(e) => Err(e),
                None => Ok(v),
            }
        }
    }
}

/// Relay-sum CDF as the mixture over decode sets of quadrature sum CDFs.
/// Exponential in `m`; meant for `m <= 4`.
pub fn quadrature_relay_sum_cdf(gates: &[GatedExponential], x: f64) -> Result<f64> {
    let m = gates.len();
    if m == 0 || m > 6 {
        return Err(Error::TooManyRelays {
            relays: m,
            limit: 6,
        });
    }
    let mut total = 0.0;
    for mask in 1u32..(1 << m) {
        let mut weight = 1.0;
        let mut rates = Vec::with_capacity(m);
        for (i, g) in gates.iter().enumerate() {
            if mask & (1 << i) != 0 {
                weight *= 1.0 - g.gate_prob();
                rates.push(g.rate());
            } else {
                weight *= g.gate_prob();
            }
        }
        if weight > 0.0 {
            total += weight * exponential_sum_cdf(&rates, x)?;
        }
    }
    Ok(total)
}

/// `Pr{D + R < gamma | D < gamma}` for exponential `D`, `R` with the given
/// rates: step-2 outage of a single always-decoding relay, by quadrature.
pub fn single_relay_step2(direct_rate: f64, relay_rate: f64, gamma: f64) -> Result<f64> {
    let cond = -(-direct_rate * gamma).exp_m1();
    let joint = integrate(
        |t| direct_rate * (-direct_rate * t).exp() * -(-relay_rate * (gamma - t)).exp_m1(),
        0.0,
        gamma,
        1e-14,
        NESTED_DEPTH,
    )?;
    Ok(joint / cond)
}

/// Comparison of an observed binomial count with a hypothesized probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialCheck {
    pub hits: u64,
    pub trials: u64,
    pub expected: f64,
}

impl BinomialCheck {
    pub fn new(hits: u64, trials: u64, expected: f64) -> Self {
        Self {
            hits,
            trials,
            expected,
        }
    }

    pub fn frequency(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.hits as f64 / self.trials as f64
        }
    }

    /// Standard error under the hypothesized probability.
    pub fn sigma(&self) -> f64 {
        let n = self.trials as f64;
        (self.expected * (1.0 - self.expected) / n).sqrt()
    }

    /// Deviation in units of `sigma`, after a `1/(2n)` continuity correction.
    pub fn z(&self) -> f64 {
        let n = self.trials as f64;
        let dev = ((self.frequency() - self.expected).abs() - 0.5 / n).max(0.0);
        if dev == 0.0 {
            0.0
        } else {
            dev / self.sigma()
        }
    }

    pub fn within(&self, n_sigma: f64) -> bool {
        self.trials > 0 && self.z() <= n_sigma
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Critical value of the two-sample KS statistic at level `alpha`.
pub fn ks_critical(n_a: usize, n_b: usize, alpha: f64) -> f64 {
    let (n, m) = (n_a as f64, n_b as f64);
    (-0.5 * (alpha / 2.0).ln()).sqrt() * ((n + m) / (n * m)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_and_exponentials() {
        let v = integrate(|x| x * x, 0.0, 3.0, 1e-14, 20).unwrap();
        assert!((v - 9.0).abs() < 1e-13);
        let v = integrate(|x| (-x).exp(), 0.0, 40.0, 1e-14, 30).unwrap();
        assert!((v - (1.0 - (-40f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn depth_exhaustion_reported() {
        let r = integrate(|x| 1.0 / x.abs().sqrt().max(1e-300), -1.0, 1.0, 1e-15, 3);
        assert!(matches!(r, Err(Error::Convergence { .. })));
    }

    #[test]
    fn hypoexponential_two_rates() {
        let (a, b, x): (f64, f64, f64) = (1.0, 2.0, 1.3);
        let exact = 1.0 - (b * (-a * x).exp() - a * (-b * x).exp()) / (b - a);
        assert!((exponential_sum_cdf(&[a, b], x).unwrap() - exact).abs() < 1e-13);
    }

    #[test]
    fn erlang_three() {
        let (r, x): (f64, f64) = (0.7, 2.0);
        let t = r * x;
        let exact = 1.0 - (-t).exp() * (1.0 + t + t * t / 2.0);
        assert!((exponential_sum_cdf(&[r, r, r], x).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn mixture_limit_is_nonempty_probability() {
        let g = [
            GatedExponential::new(0.3, 1.0).unwrap(),
            GatedExponential::new(0.6, 2.0).unwrap(),
        ];
        let v = quadrature_relay_sum_cdf(&g, 60.0).unwrap();
        assert!((v - (1.0 - 0.18)).abs() < 1e-12);
    }

    #[test]
    fn single_relay_step2_matches_hypoexponential() {
        let (a, b, g): (f64, f64, f64) = (0.5, 1.5, 1.0);
        let joint = 1.0 - (b * (-a * g).exp() - a * (-b * g).exp()) / (b - a);
        let expect = joint / (1.0 - (-a * g).exp());
        assert!((single_relay_step2(a, b, g).unwrap() - expect).abs() < 1e-13);
    }

    #[test]
    fn binomial_gate() {
        let c = BinomialCheck::new(500, 1000, 0.5);
        assert_eq!(c.z(), 0.0);
        assert!(!BinomialCheck::new(600, 1000, 0.5).within(3.0));
        // zero hits against a tiny probability is consistent
        assert!(BinomialCheck::new(0, 1000, 1e-5).within(3.0));
        assert!(!BinomialCheck::new(0, 0, 0.5).within(3.0));
    }

    #[test]
    fn ks_identical_and_shifted() {
        let a: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(ks_statistic(&a, &a), 0.0);
        let b: Vec<f64> = (50..150).map(f64::from).collect();
        assert!((ks_statistic(&a, &b) - 0.5).abs() < 1e-12);
        assert!(ks_critical(1000, 1000, 0.01) > 0.07 && ks_critical(1000, 1000, 0.01) < 0.08);
    }
}
