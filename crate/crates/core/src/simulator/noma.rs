//! Power-domain NOMA: both sources superpose one segment each per slot and
//! every receiver runs successive interference cancellation.
//!
//! Powers are kept in channel-gain units with noise `n0 = 1 / snr`, so a
//! noiseless receiver (`n0 = 0`) still sees finite interference-limited
//! SINRs.

use super::channel::{LinkMeans, RngStream};
use super::lane::Segment;
use super::trace::{Outcome, SlotEvent};
use super::Tally;
use crate::markov::Step;
use crate::topology::Source;

/// Decoded flags per stream and the combined SINR of the stream tried first.
///
/// `branches` holds the received power of each stream on every diversity
/// branch. The stronger total is decoded first, treating the other as
/// interference with SINRs added across branches; the weaker is decoded
/// interference-free only if the first succeeded.
pub fn sic_decode(branches: &[[f64; 2]], n0: f64, gamma_th: f64) -> ([bool; 2], f64) {
    let total = branches
        .iter()
        .fold([0.0, 0.0], |acc, b| [acc[0] + b[0], acc[1] + b[1]]);
    let first = usize::from(total[1] > total[0]);
    let other = 1 - first;
    let sinr: f64 = branches
        .iter()
        .filter(|b| b[first] > 0.0)
        .map(|b| b[first] / (b[other] + n0))
        .sum();
    let mut decoded = [false; 2];
    decoded[first] = sinr >= gamma_th;
    let snr_other = if total[other] > 0.0 {
        total[other] / n0
    } else {
        0.0
    };
    decoded[other] = decoded[first] && snr_other >= gamma_th;
    (decoded, sinr)
}

pub(crate) struct NomaLane {
    reps: u32,
    rep: u32,
    step: Step,
    /// Streams the destination still lacks after step 1.
    pending: [bool; 2],
    /// Step-1 direct powers of the pending streams.
    retained: [f64; 2],
    decode_sets: [u64; 2],
}

pub(crate) struct NomaLink<'a> {
    pub gains: &'a LinkMeans,
    pub n0: f64,
    pub snr: f64,
    pub split: f64,
    pub gamma_th: f64,
    pub cooperation: bool,
}

impl NomaLane {
    pub fn new(reps: u32) -> Self {
        Self {
            reps,
            rep: 0,
            step: Step::Direct,
            pending: [false; 2],
            retained: [0.0; 2],
            decode_sets: [0; 2],
        }
    }

    pub fn segments(reps: u32) -> Vec<Segment> {
        vec![Segment {
            label: "noma".into(),
            source: Source::S1,
            reps,
        }]
    }

    pub fn state_index(&self) -> usize {
        2 * self.rep as usize + usize::from(self.step == Step::Relay)
    }

    fn advance(&mut self) -> bool {
        self.step = Step::Direct;
        self.rep += 1;
        if self.rep == self.reps {
            self.rep = 0;
            true
        } else {
            false
        }
    }

    /// Runs one slot; returns whether the slot completed the last segment.
    pub fn run_slot(
        &mut self,
        link: &NomaLink<'_>,
        rng: &mut RngStream,
        tally: &mut Tally,
        trace: Option<(&str, u64)>,
    ) -> bool {
        let state = self.state_index();
        let share = [link.split, 1.0 - link.split];
        let g = link.gains;
        let mut snrs = Vec::new();
        let record = trace.is_some();
        let (failed, wrapped, sinr, union) = match self.step {
            Step::Direct => {
                let direct = [
                    share[0] * g.direct[0] * rng.exp1(),
                    share[1] * g.direct[1] * rng.exp1(),
                ];
                if record {
                    snrs.extend(direct.iter().map(|p| p * link.snr));
                }
                let (at_dest, sinr) = sic_decode(&[direct], link.n0, link.gamma_th);
                let mut sets = [0u64; 2];
                for i in 0..g.relay_destination.len() {
                    let p = [
                        share[0] * g.source_relay[0][i] * rng.exp1(),
                        share[1] * g.source_relay[1][i] * rng.exp1(),
                    ];
                    if record {
                        snrs.extend(p.iter().map(|x| x * link.snr));
                    }
                    let (ok, _) = sic_decode(&[p], link.n0, link.gamma_th);
                    for k in 0..2 {
                        if ok[k] {
                            sets[k] |= 1 << i;
                        }
                    }
                }
                for k in 0..2 {
                    tally.step1[k] += 1;
                    tally.empty[k] += u64::from(sets[k] == 0);
                }
                if at_dest[0] && at_dest[1] {
                    (false, self.advance(), sinr, sets[0] | sets[1])
                } else {
                    let pending = [!at_dest[0], !at_dest[1]];
                    let helped = (0..2).all(|k| !pending[k] || sets[k] != 0);
                    if link.cooperation && helped {
                        self.step = Step::Relay;
                        self.pending = pending;
                        self.decode_sets = sets;
                        for k in 0..2 {
                            self.retained[k] = if pending[k] { direct[k] } else { 0.0 };
                        }
                    }
                    (true, false, sinr, sets[0] | sets[1])
                }
            }
            Step::Relay => {
                let mut branches = Vec::with_capacity(g.relay_destination.len() + 1);
                branches.push(self.retained);
                for (i, &mean) in g.relay_destination.iter().enumerate() {
                    let fwd = [0, 1].map(|k| self.pending[k] && self.decode_sets[k] & (1 << i) != 0);
                    if !fwd[0] && !fwd[1] {
                        continue;
                    }
                    let h = mean * rng.exp1();
                    if record {
                        snrs.push(h * link.snr);
                    }
                    let split = match fwd {
                        [true, true] => share,
                        [true, false] => [1.0, 0.0],
                        _ => [0.0, 1.0],
                    };
                    branches.push([h * split[0], h * split[1]]);
                }
                let (ok, sinr) = sic_decode(&branches, link.n0, link.gamma_th);
                let union = self.decode_sets[0] | self.decode_sets[1];
                if (0..2).all(|k| !self.pending[k] || ok[k]) {
                    (false, self.advance(), sinr, union)
                } else {
                    self.step = Step::Direct;
                    (true, false, sinr, union)
                }
            }
        };
        tally.record(state, failed);
        if let Some((scheme, slot)) = trace {
            tally.trace.push(SlotEvent {
                slot,
                scheme: scheme.to_string(),
                state: format!("(nomas{},{})", state % 2 + 1, state / 2 + 1),
                snrs,
                decode_set: union,
                mrc_total: sinr,
                outcome: if failed { Outcome::Failure } else { Outcome::Success },
            });
        }
        wrapped
    }
}
