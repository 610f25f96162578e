//! Single-source decode-and-forward lane: a cyclic list of segments, each
//! repeated until it has been received the required number of times.

use super::channel::{draw_link_snr, source_index, LinkMeans, RngStream};
use super::trace::{Outcome, SlotEvent};
use super::Tally;
use crate::markov::Step;
use crate::topology::Source;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Segment {
    pub label: String,
    pub source: Source,
    pub reps: u32,
}

/// Labels of every lane state, in the order used by the markov module, and
/// the per-step key each state belongs to.
pub(crate) fn state_labels(segments: &[Segment]) -> (Vec<String>, Vec<String>) {
    let mut labels = Vec::new();
    let mut keys = Vec::new();
    for s in segments {
        for rep in 1..=s.reps {
            for step in [1, 2] {
                labels.push(format!("({}s{},{})", s.label, step, rep));
                keys.push(format!("{}s{}", s.label, step));
            }
        }
    }
    (labels, keys)
}

pub(crate) struct Lane<'a> {
    segments: &'a [Segment],
    offsets: Vec<usize>,
    seg: usize,
    rep: u32,
    step: Step,
    retained: f64,
    decode_set: u64,
}

impl<'a> Lane<'a> {
    /// `state_offset` shifts state indices so that several lanes can share
    /// one tally.
    pub fn new(segments: &'a [Segment], state_offset: usize) -> Self {
        let mut offsets = Vec::with_capacity(segments.len());
        let mut acc = state_offset;
        for s in segments {
            offsets.push(acc);
            acc += 2 * s.reps as usize;
        }
        Self {
            segments,
            offsets,
            seg: 0,
            rep: 0,
            step: Step::Direct,
            retained: 0.0,
            decode_set: 0,
        }
    }

    pub fn state_index(&self) -> usize {
        self.offsets[self.seg] + 2 * self.rep as usize + usize::from(self.step == Step::Relay)
    }

    fn advance(&mut self) -> bool {
        self.step = Step::Direct;
        self.rep += 1;
        if self.rep < self.segments[self.seg].reps {
            return false;
        }
        self.rep = 0;
        self.seg += 1;
        if self.seg < self.segments.len() {
            return false;
        }
        self.seg = 0;
        true
    }

    /// Runs one slot and records it in `tally`. An event is appended when
    /// `trace` names a scheme label and slot number. Returns whether the slot
    /// completed the last repetition of the last segment.
    pub fn run_slot(
        &mut self,
        links: &LinkMeans,
        gamma_th: f64,
        cooperation: bool,
        rng: &mut RngStream,
        tally: &mut Tally,
        trace: Option<(&str, u64)>,
    ) -> bool {
        let state = self.state_index();
        let mut snrs = Vec::new();
        let record = trace.is_some();
        let (failed, wrapped, mrc_total, decode_set) = match self.step {
            Step::Direct => {
                let s = source_index(self.segments[self.seg].source);
                let direct = draw_link_snr(links.direct[s], rng);
                if record {
                    snrs.push(direct);
                }
                let mut mask = 0u64;
                for (i, &mean) in links.source_relay[s].iter().enumerate() {
                    let x = draw_link_snr(mean, rng);
                    if x >= gamma_th {
                        mask |= 1 << i;
                    }
                    if record {
                        snrs.push(x);
                    }
                }
                tally.step1[s] += 1;
                tally.empty[s] += u64::from(mask == 0);
                if direct >= gamma_th {
                    (false, self.advance(), direct, mask)
                } else {
                    if cooperation && mask != 0 {
                        self.step = Step::Relay;
                        self.retained = direct;
                        self.decode_set = mask;
                    }
                    (true, false, direct, mask)
                }
            }
            Step::Relay => {
                let mask = self.decode_set;
                let mut total = self.retained;
                if record {
                    snrs.push(self.retained);
                }
                for (i, &mean) in links.relay_destination.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        let x = draw_link_snr(mean, rng);
                        total += x;
                        if record {
                            snrs.push(x);
                        }
                    }
                }
                if total >= gamma_th {
                    (false, self.advance(), total, mask)
                } else {
                    self.step = Step::Direct;
                    (true, false, total, mask)
                }
            }
        };
        tally.record(state, failed);
        if let Some((scheme, slot)) = trace {
            tally.trace.push(SlotEvent {
                slot,
                scheme: scheme.to_string(),
                state: tally_label(self.segments, &self.offsets, state),
                snrs,
                decode_set,
                mrc_total,
                outcome: if failed { Outcome::Failure } else { Outcome::Success },
            });
        }
        wrapped
    }
}

fn tally_label(segments: &[Segment], offsets: &[usize], state: usize) -> String {
    let seg = offsets.iter().rposition(|&o| o <= state).unwrap_or(0);
    let local = state - offsets[seg];
    format!("({}s{},{})", segments[seg].label, local % 2 + 1, local / 2 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_chain_order() {
        let segs = vec![
            Segment {
                label: "pIS1".into(),
                source: Source::S1,
                reps: 2,
            },
            Segment {
                label: "pIIS2".into(),
                source: Source::S2,
                reps: 1,
            },
        ];
        let (labels, keys) = state_labels(&segs);
        assert_eq!(
            labels,
            ["(pIS1s1,1)", "(pIS1s2,1)", "(pIS1s1,2)", "(pIS1s2,2)", "(pIIS2s1,1)", "(pIIS2s2,1)"]
        );
        assert_eq!(keys[3], "pIS1s2");
        let lane = Lane::new(&segs, 0);
        for (i, l) in labels.iter().enumerate() {
            assert_eq!(&tally_label(&segs, &lane.offsets, i), l);
        }
    }
}
