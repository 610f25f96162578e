use serde::{Deserialize, Serialize};

use super::{
    bin_conditional_direct, bin_relay_sum, direct_outage, empty_set_prob, numerical_relay_sum,
    relay_paths, relay_sum_cdf, relay_sum_cdf_perturbed, step2_outage, GatedExponential,
    RelaySumCdf, RelaySumMethod, MAX_CLOSED_FORM_RELAYS, TIE_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::topology::{Scenario, Source};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyticOptions {
    pub method: RelaySumMethod,
    /// Grid cells per output bin for the numerical relay-sum fallback.
    pub numerical_oversample: usize,
}

impl Default for AnalyticOptions {
    fn default() -> Self {
        Self {
            method: RelaySumMethod::Auto,
            numerical_oversample: 32,
        }
    }
}

/// Step outages of one source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceStepOutages {
    /// Direct link below threshold.
    pub step1: f64,
    /// MRC of retained direct and relayed SNRs below threshold, given a
    /// failed direct link and a non-empty decode set.
    pub step2: f64,
    /// `prod A_i`: no relay decoded the broadcast.
    pub empty_set: f64,
}

/// The six per-step outage probabilities of the MDMA protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutageSet {
    pub phase1_s1_step1: f64,
    pub phase1_s1_step2: f64,
    pub phase2_s1_step1: f64,
    pub phase2_s1_step2: f64,
    pub phase2_s2_step1: f64,
    pub phase2_s2_step2: f64,
    pub empty_set_prob_s1: f64,
    pub empty_set_prob_s2: f64,
}

impl StepOutageSet {
    /// Phase II S1 repeats the Phase I S1 values.
    pub fn from_sources(s1: SourceStepOutages, s2: SourceStepOutages) -> Self {
        Self {
            phase1_s1_step1: s1.step1,
            phase1_s1_step2: s1.step2,
            phase2_s1_step1: s1.step1,
            phase2_s1_step2: s1.step2,
            phase2_s2_step1: s2.step1,
            phase2_s2_step2: s2.step2,
            empty_set_prob_s1: s1.empty_set,
            empty_set_prob_s2: s2.empty_set,
        }
    }

    pub fn source(&self, source: Source) -> SourceStepOutages {
        match source {
            Source::S1 => SourceStepOutages {
                step1: self.phase1_s1_step1,
                step2: self.phase1_s1_step2,
                empty_set: self.empty_set_prob_s1,
            },
            Source::S2 => SourceStepOutages {
                step1: self.phase2_s2_step1,
                step2: self.phase2_s2_step2,
                empty_set: self.empty_set_prob_s2,
            },
        }
    }

    pub fn values(&self) -> [f64; 8] {
        [
            self.phase1_s1_step1,
            self.phase1_s1_step2,
            self.phase2_s1_step1,
            self.phase2_s1_step2,
            self.phase2_s2_step1,
            self.phase2_s2_step2,
            self.empty_set_prob_s1,
            self.empty_set_prob_s2,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        match self.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            Some(v) => Err(Error::Domain(format!("step probability {v} outside [0, 1]"))),
            None => Ok(()),
        }
    }
}

fn tie_group_sizes(gates: &[GatedExponential]) -> (bool, usize) {
    let mut rates: Vec<f64> = gates.iter().map(|g| g.rate()).collect();
    rates.sort_by(f64::total_cmp);
    let mut largest = 1;
    let mut run = 1;
    for w in rates.windows(2) {
        if (w[1] - w[0]).abs() <= TIE_TOLERANCE * w[1].abs() {
            run += 1;
            largest = largest.max(run);
        } else {
            run = 1;
        }
    }
    (largest > 1, largest)
}

fn relay_cdf(
    gates: &[GatedExponential],
    gamma_th: f64,
    granularity: usize,
    options: &AnalyticOptions,
) -> Result<Box<dyn RelaySumCdf>> {
    let numerical = || -> Result<Box<dyn RelaySumCdf>> {
        let cells = granularity * options.numerical_oversample.max(1);
        Ok(Box::new(numerical_relay_sum(gates, gamma_th, cells.max(2))?))
    };
    match options.method {
        RelaySumMethod::ClosedForm => Ok(Box::new(relay_sum_cdf(gates)?)),
        RelaySumMethod::Perturbed => Ok(Box::new(relay_sum_cdf_perturbed(gates)?)),
        RelaySumMethod::Numerical => numerical(),
        RelaySumMethod::Auto => {
            if gates.len() > MAX_CLOSED_FORM_RELAYS {
                return numerical();
            }
            match tie_group_sizes(gates) {
                (false, _) => Ok(Box::new(relay_sum_cdf(gates)?)),
                (true, 2) => Ok(Box::new(relay_sum_cdf_perturbed(gates)?)),
                _ => numerical(),
            }
        }
    }
}

/// Step outages of one source at the scenario's power.
pub fn source_step_outages(
    scenario: &Scenario,
    source: Source,
    options: &AnalyticOptions,
) -> Result<SourceStepOutages> {
    let direct = scenario.direct_link(source)?;
    let gamma_th = scenario.gamma_th;
    let step1 = direct_outage(direct, gamma_th);
    let gates = relay_paths(scenario, source)?;
    let empty_set = empty_set_prob(&gates);

    // Step 2 is unreachable in both limits; its value never enters the chain
    // weighted by a positive occupancy.
    let step2 = if step1 == 0.0 {
        0.0
    } else if empty_set >= 1.0 {
        1.0
    } else {
        let n = scenario.config.granularity;
        let cdf = relay_cdf(&gates, gamma_th, n, options)?;
        let relay_pmf = bin_relay_sum(cdf.as_ref(), gamma_th, n);
        let direct_pmf = bin_conditional_direct(direct, gamma_th, n)?;
        step2_outage(&relay_pmf, &direct_pmf, &gates)?
    };
    Ok(SourceStepOutages {
        step1,
        step2,
        empty_set,
    })
}

/// All six per-step outages.
pub fn step_outages(scenario: &Scenario, options: &AnalyticOptions) -> Result<StepOutageSet> {
    let s1 = source_step_outages(scenario, Source::S1, options)?;
    let s2 = source_step_outages(scenario, Source::S2, options)?;
    let set = StepOutageSet::from_sources(s1, s2);
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{default_paper_setup, Point};

    #[test]
    fn phase_two_s1_copies_phase_one() {
        let s = Scenario::paper_defaults();
        let o = step_outages(&s, &AnalyticOptions::default()).unwrap();
        assert_eq!(o.phase2_s1_step1, o.phase1_s1_step1);
        assert_eq!(o.phase2_s1_step2, o.phase1_s1_step2);
        assert!(o.phase2_s2_step1 > o.phase1_s1_step1, "S2 is farther from D");
    }

    #[test]
    fn symmetric_geometry_gives_equal_sources() {
        let (mut t, c) = default_paper_setup();
        t.s1 = Point::new(10.0, 30.0);
        t.s2 = Point::new(10.0, -30.0);
        t.destination = Point::new(100.0, 0.0);
        t.relays = vec![
            Point::new(50.0, 12.0),
            Point::new(50.0, -12.0),
            Point::new(60.0, 0.0),
        ];
        // mirror-symmetric relays tie on relay-to-destination distance
        let s = Scenario::new(t, c).unwrap();
        let o = step_outages(&s, &AnalyticOptions::default()).unwrap();
        assert!((o.phase1_s1_step1 - o.phase2_s2_step1).abs() < 1e-15);
        assert!((o.phase1_s1_step2 - o.phase2_s2_step2).abs() < 1e-9);
        assert!((o.empty_set_prob_s1 - o.empty_set_prob_s2).abs() < 1e-15);
    }

    #[test]
    fn high_snr_drives_all_outages_to_zero() {
        let s = Scenario::paper_defaults().with_power_dbm(120.0).unwrap();
        let o = step_outages(&s, &AnalyticOptions::default()).unwrap();
        for v in o.values() {
            assert!(v < 1e-6, "{o:?}");
        }
    }

    #[test]
    fn closed_form_method_rejects_ties_auto_does_not() {
        let (mut t, c) = default_paper_setup();
        t.relays = vec![Point::new(50.0, 10.0), Point::new(50.0, -10.0)];
        let s = Scenario::new(t, c).unwrap();
        let strict = AnalyticOptions {
            method: RelaySumMethod::ClosedForm,
            ..Default::default()
        };
        assert!(matches!(step_outages(&s, &strict), Err(Error::RateTie { .. })));
        assert!(step_outages(&s, &AnalyticOptions::default()).is_ok());
    }

    #[test]
    fn numerical_and_closed_form_pipelines_agree() {
        let s = Scenario::paper_defaults().with_power_dbm(4.0).unwrap();
        let closed = step_outages(&s, &AnalyticOptions::default()).unwrap();
        let num = step_outages(
            &s,
            &AnalyticOptions {
                method: RelaySumMethod::Numerical,
                ..Default::default()
            },
        )
        .unwrap();
        let rel = (closed.phase1_s1_step2 - num.phase1_s1_step2).abs() / closed.phase1_s1_step2;
        assert!(rel < 1e-3, "{closed:?} vs {num:?}");
    }
}
