use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Failure,
}

/// One simulated slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotEvent {
    pub slot: u64,
    pub scheme: String,
    pub state: String,
    /// Every SNR drawn in the slot: direct first, then relays in index order.
    pub snrs: Vec<f64>,
    /// Relays that decoded the broadcast (bit `i` for relay `i`). For NOMA,
    /// the union over both streams.
    pub decode_set: u64,
    /// Combined SNR the destination tested against the threshold. For NOMA,
    /// the combined SINR of the stream decoded first.
    pub mrc_total: f64,
    pub outcome: Outcome,
}

#[derive(Serialize)]
struct TraceRow<'a> {
    slot: u64,
    scheme: &'a str,
    state: &'a str,
    outcome: Outcome,
    mrc_total: f64,
    decode_set_bitmask: u64,
}

/// Writes events as CSV with columns
/// `slot,scheme,state,outcome,mrc_total,decode_set_bitmask`.
pub fn write_trace_csv<W: Write>(events: &[SlotEvent], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in events {
        w.serialize(TraceRow {
            slot: e.slot,
            scheme: &e.scheme,
            state: &e.state,
            outcome: e.outcome,
            mrc_total: e.mrc_total,
            decode_set_bitmask: e.decode_set,
        })?;
    }
    w.flush()?;
    Ok(())
}
