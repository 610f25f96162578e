//! Slot-level Monte Carlo of the MDMA protocol and of TDMA, FDMA and NOMA
//! baselines sharing the same decode-and-forward relaying and MRC.
//!
//! Slots are split into fixed-size blocks. Block `b` draws from ChaCha8
//! stream `b` of the run seed and starts at the beginning of a pair cycle, so
//! results do not depend on the number of worker threads.

mod channel;
mod lane;
mod noma;
mod trace;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use channel::{draw_link_snr, LinkMeans, RngStream};
pub use noma::sic_decode;
pub use trace::{write_trace_csv, Outcome, SlotEvent};

use crate::error::{Error, Result};
use crate::markov::phase_plan;
use crate::oracle::BinomialCheck;
use crate::topology::{Scenario, Source};
use lane::{state_labels, Lane, Segment};
use noma::{NomaLane, NomaLink};

/// Largest relay count the simulator's decode-set bitmask can hold.
pub const MAX_SIM_RELAYS: usize = 64;

/// Medium-access scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// MDMA, optionally overriding the configured sharing ratio.
    Mdma(Option<f64>),
    Tdma,
    Fdma,
    Noma,
}

impl Scheme {
    pub fn is_mdma(&self) -> bool {
        matches!(self, Scheme::Mdma(_))
    }

    /// Bandwidth and power units charged per slot: FDMA occupies two bands
    /// at full power each.
    pub fn resource_units(&self, scenario: &Scenario) -> (f64, f64) {
        match self {
            Scheme::Fdma => (2.0, 2.0),
            Scheme::Mdma(_) => (scenario.config.bandwidth_units, scenario.config.power_units),
            Scheme::Tdma | Scheme::Noma => (1.0, 1.0),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Mdma(None) => f.write_str("mdma"),
            Scheme::Mdma(Some(eta)) => write!(f, "mdma:{eta}"),
            Scheme::Tdma => f.write_str("tdma"),
            Scheme::Fdma => f.write_str("fdma"),
            Scheme::Noma => f.write_str("noma"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "mdma" => Ok(Scheme::Mdma(None)),
            "tdma" => Ok(Scheme::Tdma),
            "fdma" => Ok(Scheme::Fdma),
            "noma" => Ok(Scheme::Noma),
            _ => {
                let eta = lower
                    .strip_prefix("mdma:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| (0.0..=1.0).contains(v))
                    .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}")))?;
                Ok(Scheme::Mdma(Some(eta)))
            }
        }
    }
}

impl Serialize for Scheme {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scheme {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    pub seed: u64,
    pub slots: u64,
    /// Slots per independently seeded block.
    pub block_slots: u64,
    /// When false, step 2 is never entered and every scheme is direct-only.
    pub relay_cooperation: bool,
    /// Share of the transmit power given to S1 under NOMA.
    pub noma_power_split: f64,
    /// Number of leading slots recorded as [`SlotEvent`]s.
    pub trace_cap: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            slots: 1_000_000,
            block_slots: 1 << 18,
            relay_cooperation: true,
            noma_power_split: 0.5,
            trace_cap: 0,
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 || self.block_slots == 0 {
            return Err(Error::Config("slots and block_slots must be positive".into()));
        }
        if !(self.noma_power_split > 0.0 && self.noma_power_split < 1.0) {
            return Err(Error::Config(format!(
                "noma_power_split must lie in (0, 1), got {}",
                self.noma_power_split
            )));
        }
        Ok(())
    }
}

/// A binomial frequency with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub hits: u64,
    pub trials: u64,
    pub value: f64,
    pub stderr: f64,
}

impl RateEstimate {
    pub fn new(hits: u64, trials: u64) -> Self {
        let (value, stderr) = if trials == 0 {
            (0.0, 0.0)
        } else {
            let p = hits as f64 / trials as f64;
            (p, (p * (1.0 - p) / trials as f64).sqrt())
        };
        Self {
            hits,
            trials,
            value,
            stderr,
        }
    }

    /// Test against a hypothesized probability.
    pub fn check(&self, expected: f64) -> BinomialCheck {
        BinomialCheck::new(self.hits, self.trials, expected)
    }
}

/// A sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEstimate {
    pub scheme: Scheme,
    pub seed: u64,
    pub slots: u64,
    /// Transmission attempts; exceeds `slots` when lanes run in parallel.
    pub attempts: u64,
    pub overall_op: RateEstimate,
    /// Failure frequency per protocol step, keyed like `pIS1s2`.
    pub step_ops: BTreeMap<String, RateEstimate>,
    /// Frequency of an empty decode set among step-1 slots, per source.
    pub empty_set: BTreeMap<String, RateEstimate>,
    pub states: Vec<String>,
    /// Share of attempts spent in each state.
    pub occupancy: Vec<f64>,
    pub pairs: u64,
    pub slots_per_pair: Option<MeanEstimate>,
    /// Slots per pair over the failure-free minimum.
    pub slot_cost: Option<MeanEstimate>,
    /// Image pairs per slot, bandwidth unit and power unit.
    pub efficiency: Option<MeanEstimate>,
    pub nominal_slots_per_pair: u32,
    pub bandwidth_units: f64,
    pub power_units: f64,
    #[serde(skip)]
    pub trace: Vec<SlotEvent>,
}

/// Raw counts from one block; merged in block order.
#[derive(Debug, Clone, Default)]
pub(crate) struct Tally {
    slots: u64,
    attempts: u64,
    failures: u64,
    visits: Vec<u64>,
    state_failures: Vec<u64>,
    step1: [u64; 2],
    empty: [u64; 2],
    pairs: u64,
    pair_slots: u64,
    pair_slots_sq: u128,
    since_pair: u64,
    trace: Vec<SlotEvent>,
}

impl Tally {
    fn new(states: usize) -> Self {
        Self {
            visits: vec![0; states],
            state_failures: vec![0; states],
            ..Self::default()
        }
    }

    fn record(&mut self, state: usize, failed: bool) {
        self.attempts += 1;
        self.visits[state] += 1;
        if failed {
            self.failures += 1;
            self.state_failures[state] += 1;
        }
    }

    fn tick(&mut self, pair_done: bool) {
        self.slots += 1;
        self.since_pair += 1;
        if pair_done {
            self.pairs += 1;
            self.pair_slots += self.since_pair;
            self.pair_slots_sq += u128::from(self.since_pair) * u128::from(self.since_pair);
            self.since_pair = 0;
        }
    }

    fn merge(&mut self, other: Tally, trace_cap: usize) {
        self.slots += other.slots;
        self.attempts += other.attempts;
        self.failures += other.failures;
        for (a, b) in self.visits.iter_mut().zip(&other.visits) {
            *a += b;
        }
        for (a, b) in self.state_failures.iter_mut().zip(&other.state_failures) {
            *a += b;
        }
        for k in 0..2 {
            self.step1[k] += other.step1[k];
            self.empty[k] += other.empty[k];
        }
        self.pairs += other.pairs;
        self.pair_slots += other.pair_slots;
        self.pair_slots_sq += other.pair_slots_sq;
        let room = trace_cap.saturating_sub(self.trace.len());
        self.trace.extend(other.trace.into_iter().take(room));
    }
}

struct RunSetup {
    scheme: Scheme,
    states: Vec<String>,
    step_keys: Vec<String>,
    source_keys: [&'static str; 2],
    nominal: u32,
    units: (f64, f64),
}

fn run_blocks<F>(opts: &SimOptions, states: usize, block: F) -> Tally
where
    F: Fn(&mut RngStream, u64, u64, &mut Tally) + Sync,
{
    let n_blocks = opts.slots.div_ceil(opts.block_slots);
    let tallies: Vec<Tally> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * opts.block_slots;
            let len = opts.block_slots.min(opts.slots - start);
            let mut rng = RngStream::new(opts.seed, b);
            let mut tally = Tally::new(states);
            block(&mut rng, start, len, &mut tally);
            tally
        })
        .collect();
    let mut total = Tally::new(states);
    for t in tallies {
        total.merge(t, opts.trace_cap);
    }
    total
}

fn trace_slot(opts: &SimOptions, slot: u64) -> bool {
    slot < opts.trace_cap as u64
}

fn finish(setup: RunSetup, opts: &SimOptions, t: Tally) -> SimEstimate {
    let mut step_ops: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for (i, key) in setup.step_keys.iter().enumerate() {
        let e = step_ops.entry(key.clone()).or_default();
        e.0 += t.state_failures[i];
        e.1 += t.visits[i];
    }
    let mut empty_set = BTreeMap::new();
    for k in 0..2 {
        if t.step1[k] > 0 {
            empty_set.insert(
                setup.source_keys[k].to_string(),
                RateEstimate::new(t.empty[k], t.step1[k]),
            );
        }
    }
    let occupancy = t
        .visits
        .iter()
        .map(|&v| v as f64 / t.attempts.max(1) as f64)
        .collect();
    let (bw, pw) = setup.units;
    let slots_per_pair = (t.pairs > 1).then(|| {
        let n = t.pairs as f64;
        let mean = t.pair_slots as f64 / n;
        let var = ((t.pair_slots_sq as f64 / n) - mean * mean).max(0.0) * n / (n - 1.0);
        MeanEstimate {
            value: mean,
            stderr: (var / n).sqrt(),
        }
    });
    let nominal = f64::from(setup.nominal);
    let slot_cost = slots_per_pair.map(|m| MeanEstimate {
        value: m.value / nominal,
        stderr: m.stderr / nominal,
    });
    let efficiency = slots_per_pair.map(|m| {
        let value = 2.0 / (m.value * bw * pw);
        MeanEstimate {
            value,
            stderr: value * m.stderr / m.value,
        }
    });
    SimEstimate {
        scheme: setup.scheme,
        seed: opts.seed,
        slots: t.slots,
        attempts: t.attempts,
        overall_op: RateEstimate::new(t.failures, t.attempts),
        step_ops: step_ops
            .into_iter()
            .map(|(k, (f, n))| (k, RateEstimate::new(f, n)))
            .collect(),
        empty_set,
        states: setup.states,
        occupancy,
        pairs: t.pairs,
        slots_per_pair,
        slot_cost,
        efficiency,
        nominal_slots_per_pair: setup.nominal,
        bandwidth_units: bw,
        power_units: pw,
        trace: t.trace,
    }
}

fn check_inputs(scenario: &Scenario, opts: &SimOptions) -> Result<()> {
    opts.validate()?;
    if scenario.relay_count() > MAX_SIM_RELAYS {
        return Err(Error::TooManyRelays {
            relays: scenario.relay_count(),
            limit: MAX_SIM_RELAYS,
        });
    }
    Ok(())
}

/// Runs cyclic segments on one lane; a pair completes when the cycle wraps.
fn run_cycle(
    scheme: Scheme,
    segments: Vec<Segment>,
    scenario: &Scenario,
    opts: &SimOptions,
) -> SimEstimate {
    let (states, step_keys) = state_labels(&segments);
    let nominal = segments.iter().map(|s| s.reps).sum();
    let links = LinkMeans::new(scenario);
    let gamma = scenario.gamma_th;
    let label = scheme.to_string();
    let tally = run_blocks(opts, states.len(), |rng, start, len, tally| {
        let mut lane = Lane::new(&segments, 0);
        for slot in start..start + len {
            let trace = trace_slot(opts, slot).then_some((label.as_str(), slot));
            let wrapped = lane.run_slot(&links, gamma, opts.relay_cooperation, rng, tally, trace);
            tally.tick(wrapped);
        }
    });
    let setup = RunSetup {
        scheme,
        states,
        step_keys,
        source_keys: ["S1", "S2"],
        nominal,
        units: scheme.resource_units(scenario),
    };
    finish(setup, opts, tally)
}

/// Simulates MDMA with the scenario's sharing ratio.
pub fn run_mdma(scenario: &Scenario, opts: &SimOptions) -> Result<SimEstimate> {
    check_inputs(scenario, opts)?;
    let segments = phase_plan(scenario.beta_s, scenario.beta_p)
        .into_iter()
        .map(|(phase, reps)| Segment {
            label: phase.label().to_string(),
            source: phase.source(),
            reps,
        })
        .collect();
    let scheme = Scheme::Mdma(Some(scenario.config.eta));
    Ok(run_cycle(scheme, segments, scenario, opts))
}

/// Simulates a TDMA, FDMA or NOMA baseline.
pub fn run_baseline(scheme: Scheme, scenario: &Scenario, opts: &SimOptions) -> Result<SimEstimate> {
    check_inputs(scenario, opts)?;
    let k = scenario.config.full_payload_slots();
    match scheme {
        Scheme::Mdma(_) => Err(Error::Config("mdma is not a baseline scheme".into())),
        Scheme::Tdma => {
            let segments = vec![
                Segment {
                    label: "tdmaS1".into(),
                    source: Source::S1,
                    reps: k,
                },
                Segment {
                    label: "tdmaS2".into(),
                    source: Source::S2,
                    reps: k,
                },
            ];
            Ok(run_cycle(scheme, segments, scenario, opts))
        }
        Scheme::Fdma => Ok(run_fdma(k, scenario, opts)),
        Scheme::Noma => Ok(run_noma(k, scenario, opts)),
    }
}

/// Dispatches on the scheme; `mdma:<eta>` overrides the configured ratio.
pub fn simulate(scheme: Scheme, scenario: &Scenario, opts: &SimOptions) -> Result<SimEstimate> {
    match scheme {
        Scheme::Mdma(None) => run_mdma(scenario, opts),
        Scheme::Mdma(Some(eta)) => run_mdma(&scenario.with_eta(eta)?, opts),
        _ => run_baseline(scheme, scenario, opts),
    }
}

/// Each source runs its whole payload on its own band. Slots advance both
/// lanes together; a lane that finishes early idles until the other one
/// does, which completes the pair.
fn run_fdma(k: u32, scenario: &Scenario, opts: &SimOptions) -> SimEstimate {
    let lanes = [
        vec![Segment {
            label: "fdmaS1".into(),
            source: Source::S1,
            reps: k,
        }],
        vec![Segment {
            label: "fdmaS2".into(),
            source: Source::S2,
            reps: k,
        }],
    ];
    let (mut states, mut step_keys) = state_labels(&lanes[0]);
    let (s2, k2) = state_labels(&lanes[1]);
    let offset = states.len();
    states.extend(s2);
    step_keys.extend(k2);
    let links = LinkMeans::new(scenario);
    let gamma = scenario.gamma_th;
    let label = Scheme::Fdma.to_string();
    let tally = run_blocks(opts, states.len(), |rng, start, len, tally| {
        let mut a = Lane::new(&lanes[0], 0);
        let mut b = Lane::new(&lanes[1], offset);
        let mut done = [false; 2];
        for slot in start..start + len {
            let trace = trace_slot(opts, slot).then_some((label.as_str(), slot));
            for (i, lane) in [&mut a, &mut b].into_iter().enumerate() {
                if !done[i] {
                    done[i] =
                        lane.run_slot(&links, gamma, opts.relay_cooperation, rng, tally, trace);
                }
            }
            let pair = done[0] && done[1];
            if pair {
                done = [false; 2];
            }
            tally.tick(pair);
        }
    });
    let setup = RunSetup {
        scheme: Scheme::Fdma,
        states,
        step_keys,
        source_keys: ["S1", "S2"],
        nominal: k,
        units: Scheme::Fdma.resource_units(scenario),
    };
    finish(setup, opts, tally)
}

fn run_noma(k: u32, scenario: &Scenario, opts: &SimOptions) -> SimEstimate {
    let (states, step_keys) = state_labels(&NomaLane::segments(k));
    let gains = LinkMeans::gains(scenario);
    let link = NomaLink {
        gains: &gains,
        n0: 1.0 / scenario.snr,
        snr: scenario.snr,
        split: opts.noma_power_split,
        gamma_th: scenario.gamma_th,
        cooperation: opts.relay_cooperation,
    };
    let label = Scheme::Noma.to_string();
    let tally = run_blocks(opts, states.len(), |rng, start, len, tally| {
        let mut lane = NomaLane::new(k);
        for slot in start..start + len {
            let trace = trace_slot(opts, slot).then_some((label.as_str(), slot));
            let wrapped = lane.run_slot(&link, rng, tally, trace);
            tally.tick(wrapped);
        }
    });
    let setup = RunSetup {
        scheme: Scheme::Noma,
        states,
        step_keys,
        source_keys: ["S1", "S2"],
        nominal: k,
        units: Scheme::Noma.resource_units(scenario),
    };
    finish(setup, opts, tally)
}

/// Frequency of a step-2 failure among `samples` step-2 attempts of
/// `source`, each drawn from a fresh step-1 broadcast that failed on the
/// direct link and reached at least one relay.
///
/// The direct SNR is drawn from its law conditioned on falling below the
/// threshold; decode sets are drawn by rejection.
pub fn sample_step2_outage(
    scenario: &Scenario,
    source: Source,
    samples: u64,
    seed: u64,
    block: u64,
) -> Result<RateEstimate> {
    if samples == 0 || block == 0 {
        return Err(Error::Config("samples and block must be positive".into()));
    }
    let links = LinkMeans::new(scenario);
    let s = channel::source_index(source);
    let gamma = scenario.gamma_th;
    let direct_mean = links.direct[s];
    let p_direct = -(-gamma / direct_mean).exp_m1();
    if !(p_direct > 0.0) {
        return Err(Error::ImpossibleConditioning(
            "direct link never fails".into(),
        ));
    }
    let n_blocks = samples.div_ceil(block);
    let counts: Vec<Result<u64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let len = block.min(samples - b * block);
            let mut rng = RngStream::new(seed, b);
            let mut fails = 0u64;
            for _ in 0..len {
                let mut mask = 0u64;
                let mut tries = 0u32;
                while mask == 0 {
                    tries += 1;
                    if tries > 1_000_000 {
                        return Err(Error::ImpossibleConditioning(
                            "decode set is essentially always empty".into(),
                        ));
                    }
                    for (i, &m) in links.source_relay[s].iter().enumerate() {
                        if draw_link_snr(m, &mut rng) >= gamma {
                            mask |= 1 << i;
                        }
                    }
                }
                let u = rng.uniform();
                let direct = -direct_mean * (-u * p_direct).ln_1p();
                let mut total = direct;
                for (i, &m) in links.relay_destination.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        total += draw_link_snr(m, &mut rng);
                    }
                }
                fails += u64::from(total < gamma);
            }
            Ok(fails)
        })
        .collect();
    let mut fails = 0;
    for c in counts {
        fails += c?;
    }
    Ok(RateEstimate::new(fails, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::default_paper_setup;

    fn small(slots: u64) -> SimOptions {
        SimOptions {
            slots,
            block_slots: 4096,
            ..SimOptions::default()
        }
    }

    fn noiseless() -> Scenario {
        let (t, mut c) = default_paper_setup();
        c.noise_dbm = f64::NEG_INFINITY;
        Scenario::new(t, c).unwrap()
    }

    #[test]
    fn scheme_labels_round_trip() {
        for s in ["mdma", "mdma:0.7", "tdma", "fdma", "noma"] {
            assert_eq!(s.parse::<Scheme>().unwrap().to_string(), s);
        }
        assert_eq!("NOMA".parse::<Scheme>().unwrap(), Scheme::Noma);
        for bad in ["cdma", "mdma:", "mdma:1.5", ""] {
            assert!(matches!(bad.parse::<Scheme>(), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn noiseless_mdma_never_fails() {
        let s = noiseless();
        let e = run_mdma(&s, &small(30_000)).unwrap();
        assert_eq!(e.overall_op.hits, 0);
        assert_eq!(e.slots_per_pair.unwrap().value, 15.0);
        assert_eq!(e.slot_cost.unwrap().value, 1.0);
    }

    #[test]
    fn noiseless_baselines() {
        let s = noiseless();
        let t = run_baseline(Scheme::Tdma, &s, &small(20_000)).unwrap();
        assert_eq!(t.slots_per_pair.unwrap().value, 20.0);
        let f = run_baseline(Scheme::Fdma, &s, &small(20_000)).unwrap();
        assert_eq!(f.slots_per_pair.unwrap().value, 10.0);
        assert!((f.efficiency.unwrap().value - 2.0 / (10.0 * 4.0)).abs() < 1e-15);
        // the stronger stream always clears a unit threshold over the weaker
        let n = run_baseline(Scheme::Noma, &s, &small(20_000)).unwrap();
        assert_eq!(n.slots_per_pair.unwrap().value, 10.0);
        let mut c = s.config.clone();
        c.rate_r0 = 2.0;
        c.total_bits = 20.0;
        let hard = Scenario::new(s.topology.clone(), c).unwrap();
        let n = run_baseline(Scheme::Noma, &hard, &small(20_000)).unwrap();
        assert!(n.overall_op.value > 0.0, "interference-limited without noise");
    }

    #[test]
    fn fdma_efficiency_is_a_quarter_of_unit_resources() {
        let s = Scenario::paper_defaults();
        let f = run_baseline(Scheme::Fdma, &s, &small(50_000)).unwrap();
        let spp = f.slots_per_pair.unwrap().value;
        let unit = 2.0 / spp;
        assert!((f.efficiency.unwrap().value - unit / 4.0).abs() < 1e-15);
    }

    #[test]
    fn mdma_is_not_a_baseline() {
        let s = Scenario::paper_defaults();
        assert!(run_baseline(Scheme::Mdma(None), &s, &small(10)).is_err());
    }

    #[test]
    fn bad_options_rejected() {
        let s = Scenario::paper_defaults();
        assert!(run_mdma(&s, &small(0)).is_err());
        let o = SimOptions {
            noma_power_split: 1.0,
            ..small(10)
        };
        assert!(run_mdma(&s, &o).is_err());
    }

    #[test]
    fn results_independent_of_thread_count() {
        let s = Scenario::paper_defaults();
        let o = small(40_000);
        let a = run_mdma(&s, &o).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_mdma(&s, &o).unwrap());
        assert_eq!(a, b);
        let c = run_mdma(
            &s,
            &SimOptions {
                seed: 2,
                ..o.clone()
            },
        )
        .unwrap();
        assert_ne!(a.overall_op.hits, c.overall_op.hits);
    }

    #[test]
    fn trace_is_capped_and_ordered() {
        let s = Scenario::paper_defaults();
        let o = SimOptions {
            trace_cap: 5000,
            ..small(20_000)
        };
        let e = run_mdma(&s, &o).unwrap();
        assert_eq!(e.trace.len(), 5000);
        for (i, ev) in e.trace.iter().enumerate() {
            assert_eq!(ev.slot, i as u64);
        }
        assert_eq!(e.trace[0].state, "(pIS1s1,1)");
    }

    #[test]
    fn mrc_total_is_retained_plus_relays() {
        let s = Scenario::paper_defaults().with_power_dbm(2.0).unwrap();
        let o = SimOptions {
            trace_cap: 20_000,
            ..small(20_000)
        };
        let e = run_mdma(&s, &o).unwrap();
        let mut seen = 0;
        for w in e.trace.windows(2) {
            let (prev, ev) = (&w[0], &w[1]);
            if ev.state.contains("s2,") {
                seen += 1;
                assert_eq!(ev.snrs[0], prev.snrs[0], "retained direct SNR");
                let sum = ev.snrs.iter().fold(0.0, |a, b| a + b);
                assert_eq!(ev.mrc_total, sum);
                assert_eq!(ev.decode_set, prev.decode_set);
                assert_eq!(ev.snrs.len(), 1 + ev.decode_set.count_ones() as usize);
            } else {
                let gamma = s.gamma_th;
                for (i, x) in ev.snrs[1..].iter().enumerate() {
                    assert_eq!(ev.decode_set & (1 << i) != 0, *x >= gamma);
                }
            }
        }
        assert!(seen > 100);
    }

    #[test]
    fn no_cooperation_means_no_step_two() {
        let s = Scenario::paper_defaults();
        let o = SimOptions {
            relay_cooperation: false,
            ..small(20_000)
        };
        for scheme in [Scheme::Mdma(None), Scheme::Tdma, Scheme::Fdma, Scheme::Noma] {
            let e = simulate(scheme, &s, &o).unwrap();
            for (k, r) in &e.step_ops {
                if k.ends_with("s2") {
                    assert_eq!(r.trials, 0, "{scheme} {k}");
                }
            }
        }
    }
}
