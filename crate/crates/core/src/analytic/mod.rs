//! Closed-form per-step outage probabilities.
//!
//! A step-1 transmission fails when the direct SNR is below the threshold.
//! A step-2 transmission combines (MRC) the retained direct SNR with the
//! SNRs forwarded by every relay that decoded the step-1 broadcast. Each
//! relay path is a [`GatedExponential`]: zero with the relay's decode-failure
//! probability, exponential otherwise. The distribution of the relay sum
//! over non-empty decode sets is expanded in partial fractions
//! ([`relay_sum_cdf`]), binned on `[0, threshold]`, and convolved with the
//! binned conditional direct SNR to obtain the step-2 outage.

mod binned;
mod relay_sum;
mod steps;

pub use binned::{
    bin_conditional_direct, bin_relay_sum, convolve_raw, step2_outage, BinnedPmf,
};
pub use relay_sum::{
    numerical_relay_sum, perturb_ties, relay_sum_cdf, relay_sum_cdf_perturbed, residue_weights,
    theta, DefectiveCdf, NumericalRelaySum, RelaySumCdf, RelaySumMethod, SubsetTerm,
    MAX_CLOSED_FORM_RELAYS, TIE_PERTURBATION, TIE_TOLERANCE,
};
pub use steps::{step_outages, AnalyticOptions, SourceStepOutages, StepOutageSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::one_minus_exp_neg;
use crate::topology::{LinkParam, Scenario, Source};

/// `Pr{gamma < gamma_th}` for an exponential SNR.
pub fn direct_outage(link: LinkParam, gamma_th: f64) -> f64 {
    one_minus_exp_neg(link.rate() * gamma_th)
}

/// Per-relay probability of failing to decode the given source's step-1
/// broadcast.
pub fn decode_gate_probs(scenario: &Scenario, source: Source) -> Result<Vec<f64>> {
    Ok(scenario
        .source_relay_links(source)?
        .into_iter()
        .map(|l| direct_outage(l, scenario.gamma_th))
        .collect())
}

/// Point mass `gate_prob` at zero plus an exponential tail of the given rate
/// carrying the remaining mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatedExponential {
    gate_prob: f64,
    rate: f64,
}

impl GatedExponential {
    pub fn new(gate_prob: f64, rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gate_prob) {
            return Err(Error::Domain(format!("gate probability {gate_prob} outside [0, 1]")));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Domain(format!("rate must be positive, got {rate}")));
        }
        Ok(Self { gate_prob, rate })
    }

    pub fn gate_prob(&self) -> f64 {
        self.gate_prob
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            self.gate_prob + (1.0 - self.gate_prob) * one_minus_exp_neg(self.rate * x)
        }
    }

    /// Laplace transform `E[exp(-s X)]`.
    pub fn mgf(&self, s: f64) -> f64 {
        self.gate_prob + (1.0 - self.gate_prob) * self.rate / (s + self.rate)
    }

    pub fn mean(&self) -> f64 {
        (1.0 - self.gate_prob) / self.rate
    }
}

/// Relay paths for one source: decode-failure gates combined with the
/// relay-to-destination rates.
pub fn relay_paths(scenario: &Scenario, source: Source) -> Result<Vec<GatedExponential>> {
    let gates = decode_gate_probs(scenario, source)?;
    let rd = scenario.relay_destination_links()?;
    gates
        .into_iter()
        .zip(rd)
        .map(|(a, l)| GatedExponential::new(a, l.rate()))
        .collect()
}

/// Probability that no relay decodes.
pub fn empty_set_prob(gates: &[GatedExponential]) -> f64 {
    gates.iter().map(|g| g.gate_prob).product()
}
