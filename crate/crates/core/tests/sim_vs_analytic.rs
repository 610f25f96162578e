use mdma_coop::analytic::{step_outages, AnalyticOptions};
use mdma_coop::markov::analyze;
use mdma_coop::simulator::{run_mdma, sample_step2_outage, SimOptions};
use mdma_coop::{Scenario, Source};

fn opts(slots: u64, seed: u64) -> SimOptions {
    SimOptions {
        slots,
        seed,
        ..SimOptions::default()
    }
}

#[test]
fn overall_outage_matches_at_several_powers() {
    for (i, p) in [0.0, 6.0, 10.0, 16.0].into_iter().enumerate() {
        let s = Scenario::paper_defaults().with_power_dbm(p).unwrap();
        let a = analyze(&s, &AnalyticOptions::default()).unwrap();
        let e = run_mdma(&s, &opts(1_000_000, 11 + i as u64)).unwrap();
        let c = e.overall_op.check(a.solution.overall_op);
        assert!(c.within(3.0), "P={p}: sim {} analytic {} z={}", c.frequency(), c.expected, c.z());
    }
}

#[test]
fn per_step_frequencies_match() {
    let s = Scenario::paper_defaults().with_power_dbm(4.0).unwrap();
    let o = step_outages(&s, &AnalyticOptions::default()).unwrap();
    let e = run_mdma(&s, &opts(2_000_000, 5)).unwrap();
    let pairs = [
        ("pIS1s1", o.phase1_s1_step1),
        ("pIS1s2", o.phase1_s1_step2),
        ("pIIS1s1", o.phase2_s1_step1),
        ("pIIS2s1", o.phase2_s2_step1),
        ("pIIS2s2", o.phase2_s2_step2),
    ];
    for (key, expected) in pairs {
        let c = e.step_ops[key].check(expected);
        assert!(c.within(3.0), "{key}: {} vs {expected}, z={}", c.frequency(), c.z());
    }
}

#[test]
fn decode_set_law() {
    let s = Scenario::paper_defaults().with_power_dbm(0.0).unwrap();
    let o = step_outages(&s, &AnalyticOptions::default()).unwrap();
    let e = run_mdma(&s, &opts(1_000_000, 9)).unwrap();
    assert!(e.empty_set["S1"].check(o.empty_set_prob_s1).within(3.0));
    assert!(e.empty_set["S2"].check(o.empty_set_prob_s2).within(3.0));
}

#[test]
fn conditional_step2_sampler_matches_pipeline() {
    for p in [2.0, 6.0] {
        let s = Scenario::paper_defaults().with_power_dbm(p).unwrap();
        let o = step_outages(&s, &AnalyticOptions::default()).unwrap();
        for (src, expected) in [(Source::S1, o.phase1_s1_step2), (Source::S2, o.phase2_s2_step2)] {
            let r = sample_step2_outage(&s, src, 1_000_000, 3, 1 << 16).unwrap();
            let c = r.check(expected);
            assert!(c.within(3.0), "P={p} {src:?}: {} vs {expected}, z={}", c.frequency(), c.z());
        }
    }
}

#[test]
fn occupancy_matches_stationary_distribution() {
    let s = Scenario::paper_defaults();
    let a = analyze(&s, &AnalyticOptions::default()).unwrap();
    let e = run_mdma(&s, &opts(2_000_000, 21)).unwrap();
    let labels: Vec<String> = a.chain.states().iter().map(|x| x.to_string()).collect();
    assert_eq!(labels, e.states);
    let dist = a
        .solution
        .stationary
        .iter()
        .zip(&e.occupancy)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    assert!(dist < 5e-3, "max-norm {dist}");
}

#[test]
fn slot_cost_and_efficiency_match() {
    let s = Scenario::paper_defaults().with_power_dbm(4.0).unwrap();
    let a = analyze(&s, &AnalyticOptions::default()).unwrap();
    let e = run_mdma(&s, &opts(2_000_000, 31)).unwrap();
    let tc = e.slot_cost.unwrap();
    assert!(
        (tc.value - a.solution.slot_cost).abs() <= 3.0 * tc.stderr,
        "{tc:?} vs {}",
        a.solution.slot_cost
    );
    let phi = e.efficiency.unwrap();
    assert!(
        (phi.value - a.solution.efficiency).abs() <= 3.0 * phi.stderr,
        "{phi:?} vs {}",
        a.solution.efficiency
    );
}
