//! Node geometry, link budgets and the per-link exponential rate parameters.
//!
//! Every link is Rayleigh faded: the received SNR on a link of length `d` is
//! exponential with mean `SNR * d^-alpha`, i.e. rate `d^alpha / SNR`. The
//! dBm quantities in [`SystemConfig`] are converted to a linear SNR exactly
//! once, when a [`Scenario`] is built; everything downstream works in linear
//! units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::robust_ceil;

/// A point in the plane, serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Point::new(p[0], p[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Which source a transmission belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    S1,
    S2,
}

impl Source {
    pub fn label(&self) -> &'static str {
        match self {
            Source::S1 => "S1",
            Source::S2 => "S2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkTopology {
    pub s1: Point,
    pub s2: Point,
    pub destination: Point,
    pub relays: Vec<Point>,
    /// Path-loss exponent.
    pub alpha: f64,
}

impl NetworkTopology {
    pub fn relay_count(&self) -> usize {
        self.relays.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.relays.is_empty() {
            return Err(Error::Config("at least one relay is required".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "path-loss exponent must be positive, got {}",
                self.alpha
            )));
        }
        let all = [self.s1, self.s2, self.destination];
        if all.iter().chain(&self.relays).any(|p| !p.is_finite()) {
            return Err(Error::Config("node coordinates must be finite".into()));
        }
        distances(self).map(|_| ())
    }
}

/// Distances of every link the protocol uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkDistances {
    pub s1_d: f64,
    pub s2_d: f64,
    pub s1_r: Vec<f64>,
    pub s2_r: Vec<f64>,
    pub r_d: Vec<f64>,
}

impl LinkDistances {
    pub fn source_to_destination(&self, source: Source) -> f64 {
        match source {
            Source::S1 => self.s1_d,
            Source::S2 => self.s2_d,
        }
    }

    pub fn source_to_relays(&self, source: Source) -> &[f64] {
        match source {
            Source::S1 => &self.s1_r,
            Source::S2 => &self.s2_r,
        }
    }
}

fn link_distance(a: &Point, b: &Point, what: impl FnOnce() -> String) -> Result<f64> {
    let d = a.distance(b);
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::DegenerateGeometry(format!("{} are coincident", what())))
    }
}

/// Euclidean lengths of all links; fails if a transmitter sits on its receiver.
pub fn distances(topology: &NetworkTopology) -> Result<LinkDistances> {
    let t = topology;
    let s1_d = link_distance(&t.s1, &t.destination, || "S1 and D".into())?;
    let s2_d = link_distance(&t.s2, &t.destination, || "S2 and D".into())?;
    let mut s1_r = Vec::with_capacity(t.relays.len());
    let mut s2_r = Vec::with_capacity(t.relays.len());
    let mut r_d = Vec::with_capacity(t.relays.len());
    for (i, r) in t.relays.iter().enumerate() {
        s1_r.push(link_distance(&t.s1, r, || format!("S1 and R{}", i + 1))?);
        s2_r.push(link_distance(&t.s2, r, || format!("S2 and R{}", i + 1))?);
        r_d.push(link_distance(r, &t.destination, || format!("R{} and D", i + 1))?);
    }
    Ok(LinkDistances {
        s1_d,
        s2_d,
        s1_r,
        s2_r,
        r_d,
    })
}

/// Radio and payload parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Transmit power of every node, dBm.
    pub power_dbm: f64,
    /// Noise power, dBm. `-inf` models a noiseless channel.
    pub noise_dbm: f64,
    /// Target rate in bit/s/Hz.
    pub rate_r0: f64,
    /// Bits per image.
    pub total_bits: f64,
    /// Fraction of the bits that are shared between the two sources.
    pub eta: f64,
    /// Number of bins used to discretize `[0, threshold]`.
    pub granularity: usize,
    pub bandwidth_units: f64,
    pub power_units: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            power_dbm: 10.0,
            noise_dbm: -50.0,
            rate_r0: 1.0,
            total_bits: 10.0,
            eta: 0.5,
            granularity: 1000,
            bandwidth_units: 1.0,
            power_units: 1.0,
        }
    }
}

impl SystemConfig {
    pub fn snr_linear(&self) -> f64 {
        10f64.powf((self.power_dbm - self.noise_dbm) / 10.0)
    }

    /// Decoding threshold `2^R0 - 1`.
    pub fn gamma_th(&self) -> f64 {
        self.rate_r0.exp2() - 1.0
    }

    /// Slots needed for the shared segment.
    pub fn beta_s(&self) -> u32 {
        robust_ceil(self.eta * self.total_bits / self.rate_r0) as u32
    }

    /// Slots needed for each personalized segment.
    pub fn beta_p(&self) -> u32 {
        robust_ceil((1.0 - self.eta) * self.total_bits / self.rate_r0) as u32
    }

    /// Slots needed by a source sending its whole image alone.
    pub fn full_payload_slots(&self) -> u32 {
        robust_ceil(self.total_bits / self.rate_r0) as u32
    }

    pub fn validate(&self) -> Result<()> {
        if self.power_dbm.is_nan() || self.power_dbm == f64::NEG_INFINITY {
            return Err(Error::Config(format!("power_dbm = {}", self.power_dbm)));
        }
        if self.noise_dbm.is_nan() || self.noise_dbm == f64::INFINITY {
            return Err(Error::Config(format!("noise_dbm = {}", self.noise_dbm)));
        }
        if !(self.rate_r0 > 0.0 && self.rate_r0.is_finite()) {
            return Err(Error::Config(format!("rate_r0 must be positive, got {}", self.rate_r0)));
        }
        if !(self.total_bits > 0.0 && self.total_bits.is_finite()) {
            return Err(Error::Config(format!(
                "total_bits must be positive, got {}",
                self.total_bits
            )));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Config(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        if self.granularity == 0 {
            return Err(Error::Config("granularity must be at least 1".into()));
        }
        if !(self.bandwidth_units > 0.0 && self.power_units > 0.0) {
            return Err(Error::Config("bandwidth and power units must be positive".into()));
        }
        if self.total_bits / self.rate_r0 > MAX_PAYLOAD_SLOTS as f64 {
            return Err(Error::Config(format!(
                "payload needs more than {MAX_PAYLOAD_SLOTS} slots"
            )));
        }
        if self.beta_s() + self.beta_p() == 0 {
            return Err(Error::Config("payload needs at least one slot".into()));
        }
        Ok(())
    }
}

/// Upper bound on `total_bits / rate_r0`.
pub const MAX_PAYLOAD_SLOTS: u32 = 1 << 20;

/// Exponential rate of a link's instantaneous SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParam {
    rate_lambda: f64,
}

impl LinkParam {
    pub fn new(rate_lambda: f64) -> Result<Self> {
        if rate_lambda > 0.0 && rate_lambda.is_finite() {
            Ok(Self { rate_lambda })
        } else {
            Err(Error::Domain(format!(
                "link rate must be positive and finite, got {rate_lambda}"
            )))
        }
    }

    /// `d^alpha / snr`.
    pub fn from_distance(distance: f64, alpha: f64, snr: f64) -> Result<Self> {
        Self::new(distance.powf(alpha) / snr)
    }

    pub fn rate(&self) -> f64 {
        self.rate_lambda
    }

    pub fn mean_snr(&self) -> f64 {
        1.0 / self.rate_lambda
    }
}

/// A validated topology plus configuration with all derived quantities
/// resolved once.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub topology: NetworkTopology,
    pub config: SystemConfig,
    pub distances: LinkDistances,
    pub snr: f64,
    pub gamma_th: f64,
    pub beta_s: u32,
    pub beta_p: u32,
}

impl Scenario {
    pub fn new(topology: NetworkTopology, config: SystemConfig) -> Result<Self> {
        topology.validate()?;
        config.validate()?;
        let distances = distances(&topology)?;
        let snr = config.snr_linear();
        Ok(Self {
            gamma_th: config.gamma_th(),
            beta_s: config.beta_s(),
            beta_p: config.beta_p(),
            topology,
            config,
            distances,
            snr,
        })
    }

    pub fn paper_defaults() -> Self {
        let (t, c) = default_paper_setup();
        Self::new(t, c).expect("built-in setup is valid")
    }

    /// Same geometry, different transmit power.
    pub fn with_power_dbm(&self, power_dbm: f64) -> Result<Self> {
        let mut c = self.config.clone();
        c.power_dbm = power_dbm;
        Self::new(self.topology.clone(), c)
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        let mut c = self.config.clone();
        c.eta = eta;
        Self::new(self.topology.clone(), c)
    }

    pub fn with_granularity(&self, granularity: usize) -> Result<Self> {
        let mut c = self.config.clone();
        c.granularity = granularity;
        Self::new(self.topology.clone(), c)
    }

    pub fn relay_count(&self) -> usize {
        self.topology.relay_count()
    }

    pub fn alpha(&self) -> f64 {
        self.topology.alpha
    }

    /// Mean received SNR over a link of the given length; infinite when noiseless.
    pub fn mean_snr(&self, distance: f64) -> f64 {
        self.snr * distance.powf(-self.topology.alpha)
    }

    pub fn link(&self, distance: f64) -> Result<LinkParam> {
        LinkParam::from_distance(distance, self.topology.alpha, self.snr)
    }

    pub fn direct_link(&self, source: Source) -> Result<LinkParam> {
        self.link(self.distances.source_to_destination(source))
    }

    pub fn source_relay_links(&self, source: Source) -> Result<Vec<LinkParam>> {
        self.distances
            .source_to_relays(source)
            .iter()
            .map(|&d| self.link(d))
            .collect()
    }

    pub fn relay_destination_links(&self) -> Result<Vec<LinkParam>> {
        self.distances.r_d.iter().map(|&d| self.link(d)).collect()
    }
}

/// Relay `i` (1-based) of `m` on the vertical line `x = 50`, spaced
/// `100 / m` apart and centred at `y = 5`.
pub fn paper_relay_position(i: usize, m: usize) -> Point {
    let y = 50.0 - 100.0 * (i as f64 - 0.5) / m as f64 + 5.0;
    Point::new(50.0, y)
}

pub fn paper_relay_layout(m: usize) -> Vec<Point> {
    (1..=m).map(|i| paper_relay_position(i, m)).collect()
}

/// Reference geometry: S1 (20,20), S2 (0,20), D (100,0), eight relays,
/// alpha = 3, R0 = 1, 10-bit images, -50 dBm noise. Power defaults to
/// 10 dBm and eta to 0.5.
pub fn default_paper_setup() -> (NetworkTopology, SystemConfig) {
    let topology = NetworkTopology {
        s1: Point::new(20.0, 20.0),
        s2: Point::new(0.0, 20.0),
        destination: Point::new(100.0, 0.0),
        relays: paper_relay_layout(8),
        alpha: 3.0,
    };
    (topology, SystemConfig::default())
}
