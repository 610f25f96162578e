use mdma_coop::analytic::{
    relay_sum_cdf, step_outages, AnalyticOptions, GatedExponential, RelaySumCdf,
    SourceStepOutages, StepOutageSet,
};
use mdma_coop::experiments::{run_sweep_to_files, ExperimentConfig, SweepSpec, SweptParameter};
use mdma_coop::markov::{build_chain, stationary_distribution};
use mdma_coop::simulator::Scheme;
use mdma_coop::topology::Point;
use mdma_coop::Scenario;
use proptest::prelude::*;

fn gates() -> impl Strategy<Value = Vec<GatedExponential>> {
    prop::collection::vec((0.01f64..0.99, 0.1f64..10.0), 1..=5).prop_filter_map(
        "rates too close",
        |v| {
            let mut rates: Vec<f64> = v.iter().map(|p| p.1).collect();
            rates.sort_by(f64::total_cmp);
            if rates.windows(2).any(|w| w[1] - w[0] < 0.02 * w[1]) {
                return None;
            }
            v.into_iter()
                .map(|(a, r)| GatedExponential::new(a, r).ok())
                .collect()
        },
    )
}

fn source_outages() -> impl Strategy<Value = SourceStepOutages> {
    (0.0f64..0.99, 0.0f64..0.99, 0.0f64..1.0).prop_map(|(step1, step2, empty_set)| {
        SourceStepOutages {
            step1,
            step2,
            empty_set,
        }
    })
}

proptest! {
    #[test]
    fn distance_is_symmetric(ax in -1e3f64..1e3, ay in -1e3f64..1e3, bx in -1e3f64..1e3, by in -1e3f64..1e3) {
        let (a, b) = (Point::new(ax, ay), Point::new(bx, by));
        prop_assert_eq!(a.distance(&b), b.distance(&a));
    }

    #[test]
    fn relay_sum_cdf_is_monotone_with_defective_limit(g in gates(), xs in prop::collection::vec(0.0f64..50.0, 2..20)) {
        let cdf = relay_sum_cdf(&g).unwrap();
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        let values: Vec<f64> = xs.iter().map(|&x| cdf.cdf(x)).collect();
        for w in values.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
        let limit = 1.0 - g.iter().map(|x| x.gate_prob()).product::<f64>();
        prop_assert!((cdf.mass() - limit).abs() < 1e-10);
        let far = 200.0 * g.iter().map(|x| 1.0 / x.rate()).sum::<f64>();
        prop_assert!((cdf.cdf(far) - limit).abs() < 1e-10);
    }

    #[test]
    fn relay_order_does_not_matter(g in gates(), x in 0.0f64..20.0) {
        let mut rev = g.clone();
        rev.reverse();
        let a = relay_sum_cdf(&g).unwrap().cdf(x);
        let b = relay_sum_cdf(&rev).unwrap().cdf(x);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn chain_rows_are_stochastic(s1 in source_outages(), s2 in source_outages(), beta_s in 0u32..12, beta_p in 1u32..12) {
        let o = StepOutageSet::from_sources(s1, s2);
        let chain = build_chain(&o, beta_s, beta_p).unwrap();
        let m = chain.matrix();
        for i in 0..m.dim() {
            prop_assert!((m.row_sum(i) - 1.0).abs() < 1e-12);
        }
        let pi = stationary_distribution(m).unwrap();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(pi.iter().all(|&p| p >= 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn step_outages_fall_with_power(p in 0.0f64..28.0, dp in 0.5f64..6.0) {
        let base = Scenario::paper_defaults();
        let lo = step_outages(&base.with_power_dbm(p).unwrap(), &AnalyticOptions::default()).unwrap();
        let hi = step_outages(&base.with_power_dbm(p + dp).unwrap(), &AnalyticOptions::default()).unwrap();
        for (a, b) in lo.values().iter().zip(hi.values()) {
            prop_assert!(b <= *a + 1e-12, "{a} -> {b}");
        }
    }
}

#[test]
fn sweep_files_are_byte_stable() {
    let spec = SweepSpec {
        parameter: SweptParameter::PowerDbm,
        grid: vec![4.0, 12.0],
        schemes: vec![Scheme::Mdma(None), Scheme::Noma],
        trials: 20_000,
        seed: 9,
    };
    let cfg = ExperimentConfig::default();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_sweep_to_files(&spec, &cfg, a.path(), "s").unwrap();
    run_sweep_to_files(&spec, &cfg, b.path(), "s").unwrap();
    for name in ["s.csv", "s.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}
