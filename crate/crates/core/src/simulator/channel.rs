use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::topology::{Scenario, Source};

/// Seeded ChaCha8 stream. Each simulation block uses its own stream number,
/// so a block's draws depend only on `(seed, stream)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Position in 32-bit words within the stream.
    pub fn word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Unit-mean exponential variate.
    pub fn exp1(&mut self) -> f64 {
        self.rng.sample(Exp1)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Instantaneous SNR of a Rayleigh link with the given mean SNR. An infinite
/// mean (noiseless receiver) gives an infinite sample.
pub fn draw_link_snr(mean_snr: f64, rng: &mut RngStream) -> f64 {
    let e = rng.exp1();
    if mean_snr.is_infinite() {
        f64::INFINITY
    } else {
        mean_snr * e
    }
}

/// Mean SNRs of every link in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMeans {
    pub direct: [f64; 2],
    pub source_relay: [Vec<f64>; 2],
    pub relay_destination: Vec<f64>,
}

impl LinkMeans {
    /// Mean received SNRs at the scenario's transmit power.
    pub fn new(scenario: &Scenario) -> Self {
        Self::with_scale(scenario, scenario.snr)
    }

    /// Mean channel power gains `d^-alpha`, before transmit power and noise.
    pub fn gains(scenario: &Scenario) -> Self {
        Self::with_scale(scenario, 1.0)
    }

    fn with_scale(scenario: &Scenario, scale: f64) -> Self {
        let alpha = scenario.alpha();
        let mean = |d: f64| scale * d.powf(-alpha);
        let d = &scenario.distances;
        let all = |x: &[f64]| x.iter().map(|&v| mean(v)).collect::<Vec<_>>();
        Self {
            direct: [mean(d.s1_d), mean(d.s2_d)],
            source_relay: [all(&d.s1_r), all(&d.s2_r)],
            relay_destination: all(&d.r_d),
        }
    }
}

pub(crate) fn source_index(source: Source) -> usize {
    match source {
        Source::S1 => 0,
        Source::S2 => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{ks_critical, ks_statistic, BinomialCheck};

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        let mut c = RngStream::new(7, 4);
        let xa: Vec<f64> = (0..10).map(|_| a.exp1()).collect();
        let xb: Vec<f64> = (0..10).map(|_| b.exp1()).collect();
        let xc: Vec<f64> = (0..10).map(|_| c.exp1()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
        assert!(a.word_pos() > 0);
    }

    #[test]
    fn mean_and_outage_of_draws() {
        let mut rng = RngStream::new(1, 0);
        let mean = 2.5;
        let n = 1_000_000u64;
        let mut sum = 0.0;
        let mut below = 0u64;
        for _ in 0..n {
            let x = draw_link_snr(mean, &mut rng);
            sum += x;
            below += u64::from(x < 1.0);
        }
        assert!((sum / n as f64 / mean - 1.0).abs() < 0.01);
        let p = 1.0 - (-1.0f64 / mean).exp();
        assert!(BinomialCheck::new(below, n, p).within(3.0));
    }

    #[test]
    fn equal_links_equal_laws() {
        let mut rng = RngStream::new(2, 0);
        let a: Vec<f64> = (0..5000).map(|_| draw_link_snr(3.0, &mut rng)).collect();
        let b: Vec<f64> = (0..5000).map(|_| draw_link_snr(3.0, &mut rng)).collect();
        assert!(ks_statistic(&a, &b) < ks_critical(5000, 5000, 0.01));
    }

    #[test]
    fn noiseless_draw_is_infinite() {
        let mut rng = RngStream::new(0, 0);
        assert_eq!(draw_link_snr(f64::INFINITY, &mut rng), f64::INFINITY);
    }
}
