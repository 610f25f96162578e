use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::analytic::{
    numerical_relay_sum, relay_paths, relay_sum_cdf, step_outages, AnalyticOptions,
    GatedExponential, RelaySumCdf,
};
use crate::error::Result;
use crate::markov::{analyze, stationary_direct, AnalyticResult};
use crate::oracle::quadrature_relay_sum_cdf;
use crate::simulator::{run_mdma, sample_step2_outage, RngStream, SimEstimate, SimOptions};
use crate::topology::{Scenario, Source};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Measured deviation, in the units of `threshold`.
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub trials: u64,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<28} measured {:<12.4e} limit {:<10.3e} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.threshold,
                c.detail
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateOptions {
    /// Simulated slots, and conditional samples per step-2 check.
    pub trials: u64,
    pub seed: u64,
    pub cdf_instances: usize,
    pub cdf_points: usize,
    pub n_sigma: f64,
    pub occupancy_tolerance: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            trials: 1_000_000,
            seed: 1,
            cdf_instances: 100,
            cdf_points: 20,
            n_sigma: 3.0,
            occupancy_tolerance: 5e-3,
        }
    }
}

/// Random relay-sum instance: one to four relays with decode-failure
/// probabilities in `[0.05, 0.95]` and rates log-uniform in `[0.2, 5]`,
/// pairwise at least 1% apart.
pub fn random_gates(rng: &mut RngStream) -> Vec<GatedExponential> {
    let m = 1 + (rng.uniform() * 4.0) as usize;
    let mut rates: Vec<f64> = Vec::with_capacity(m);
    while rates.len() < m {
        let r = 0.2 * 25f64.powf(rng.uniform());
        if rates.iter().all(|&q| (q - r).abs() > 0.01 * q.max(r)) {
            rates.push(r);
        }
    }
    rates
        .into_iter()
        .map(|r| GatedExponential::new(0.05 + 0.9 * rng.uniform(), r).expect("valid by construction"))
        .collect()
}

/// Largest absolute gap between the closed-form relay-sum CDF and subset
/// quadrature over random instances, with the elapsed time in seconds.
pub fn cdf_vs_quadrature(instances: usize, points: usize, seed: u64) -> Result<(f64, f64)> {
    let start = Instant::now();
    let mut rng = RngStream::new(seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let gates = random_gates(&mut rng);
        let cdf = relay_sum_cdf(&gates)?;
        let span = 3.0 * gates.iter().map(|g| 1.0 / g.rate()).sum::<f64>();
        for k in 1..=points {
            let x = span * k as f64 / points as f64;
            let q = quadrature_relay_sum_cdf(&gates, x)?;
            worst = worst.max((cdf.cdf(x) - q).abs());
        }
    }
    Ok((worst, start.elapsed().as_secs_f64()))
}

fn gate(name: &str, measured: f64, threshold: f64, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: measured <= threshold,
        measured,
        threshold,
        detail,
    }
}

fn failed(name: &str, err: impl fmt::Display) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: false,
        measured: f64::NAN,
        threshold: f64::NAN,
        detail: format!("error: {err}"),
    }
}

fn closed_vs_numerical(scenario: &Scenario) -> Result<f64> {
    let mut worst = 0.0f64;
    for src in [Source::S1, Source::S2] {
        let gates = relay_paths(scenario, src)?;
        let closed = relay_sum_cdf(&gates)?;
        let g = scenario.gamma_th;
        let num = numerical_relay_sum(&gates, g, 64 * scenario.config.granularity.max(100))?;
        for k in 1..=50 {
            let x = g * f64::from(k) / 50.0;
            worst = worst.max((closed.cdf(x) - num.cdf(x)).abs());
        }
    }
    Ok(worst)
}

/// Step-2 outage of S1 at several granularities against a fine reference.
fn self_convergence(scenario: &Scenario, analytic: &AnalyticOptions) -> Result<(Vec<f64>, bool)> {
    let at = |n: usize| -> Result<f64> {
        Ok(step_outages(&scenario.with_granularity(n)?, analytic)?.phase1_s1_step2)
    };
    let reference = at(8000)?;
    let errors = [10, 100, 1000]
        .into_iter()
        .map(|n| at(n).map(|v| (v - reference).abs()))
        .collect::<Result<Vec<f64>>>()?;
    let shrinking = errors.windows(2).all(|w| w[1] < w[0]);
    Ok((errors, shrinking))
}

fn sim_checks(
    a: &AnalyticResult,
    e: &SimEstimate,
    opts: &ValidateOptions,
    out: &mut Vec<CheckResult>,
) {
    let z = opts.n_sigma;
    let o = &a.outages;
    for (key, expected) in [
        ("pIS1s1", o.phase1_s1_step1),
        ("pIIS1s1", o.phase2_s1_step1),
        ("pIIS2s1", o.phase2_s2_step1),
    ] {
        if let Some(r) = e.step_ops.get(key) {
            let c = r.check(expected);
            out.push(gate(
                &format!("step1_outage_{key}"),
                c.z(),
                z,
                format!("sim {:.6} analytic {:.6} n={}", c.frequency(), expected, r.trials),
            ));
        }
    }
    for (key, expected) in [("S1", o.empty_set_prob_s1), ("S2", o.empty_set_prob_s2)] {
        if let Some(r) = e.empty_set.get(key) {
            let c = r.check(expected);
            out.push(gate(
                &format!("decode_set_empty_{key}"),
                c.z(),
                z,
                format!("sim {:.3e} analytic {:.3e}", c.frequency(), expected),
            ));
        }
    }
    let dist = a
        .solution
        .stationary
        .iter()
        .zip(&e.occupancy)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    out.push(gate(
        "stationary_vs_occupancy",
        dist,
        opts.occupancy_tolerance,
        format!("max-norm over {} states", e.states.len()),
    ));
    let c = e.overall_op.check(a.solution.overall_op);
    out.push(gate(
        "overall_outage",
        c.z(),
        z,
        format!("sim {:.6} analytic {:.6}", c.frequency(), c.expected),
    ));
    match (e.slot_cost, e.efficiency) {
        (Some(tc), Some(phi)) => {
            let dev = |v: f64, s: f64, t: f64| if s > 0.0 { (v - t).abs() / s } else if v == t { 0.0 } else { f64::INFINITY };
            out.push(gate(
                "slot_cost",
                dev(tc.value, tc.stderr, a.solution.slot_cost),
                z,
                format!("sim {:.6} analytic {:.6}", tc.value, a.solution.slot_cost),
            ));
            out.push(gate(
                "efficiency",
                dev(phi.value, phi.stderr, a.solution.efficiency),
                z,
                format!("sim {:.6} analytic {:.6}", phi.value, a.solution.efficiency),
            ));
        }
        _ => out.push(failed("slot_cost", "too few completed pairs")),
    }
}

/// Runs every oracle comparison; failures are report content, not errors.
pub fn validate(
    scenario: &Scenario,
    analytic: &AnalyticOptions,
    opts: &ValidateOptions,
) -> ValidationReport {
    let mut checks = Vec::new();
    match cdf_vs_quadrature(opts.cdf_instances, opts.cdf_points, opts.seed) {
        Ok((err, secs)) => checks.push(gate(
            "cdf_vs_quadrature",
            err,
            1e-8,
            format!("{} instances in {secs:.2}s", opts.cdf_instances),
        )),
        Err(e) => checks.push(failed("cdf_vs_quadrature", e)),
    }
    match closed_vs_numerical(scenario) {
        Ok(err) => checks.push(gate("cdf_vs_numerical", err, 1e-6, "scenario relays".into())),
        Err(e) => checks.push(failed("cdf_vs_numerical", e)),
    }
    match self_convergence(scenario, analytic) {
        Ok((errs, shrinking)) => checks.push(CheckResult {
            name: "granularity_convergence".into(),
            passed: shrinking,
            measured: errs[errs.len() - 1],
            threshold: errs[0],
            detail: format!(
                "|error| at N=10,100,1000: {}",
                errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", ")
            ),
        }),
        Err(e) => checks.push(failed("granularity_convergence", e)),
    }

    let a = match analyze(scenario, analytic) {
        Ok(a) => a,
        Err(e) => {
            checks.push(failed("analytic_pipeline", e));
            return ValidationReport {
                trials: opts.trials,
                seed: opts.seed,
                checks,
            };
        }
    };
    let m = a.chain.matrix();
    let rows = (0..m.dim())
        .map(|i| (m.row_sum(i) - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(gate("transition_rows", rows, 1e-12, format!("{} states", m.dim())));
    match stationary_direct(m) {
        Ok(direct) => {
            let d = direct
                .iter()
                .zip(&a.solution.stationary)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            checks.push(gate("power_vs_direct", d, 1e-9, "max-norm".into()));
        }
        Err(e) => checks.push(failed("power_vs_direct", e)),
    }

    for (src, key, expected) in [
        (Source::S1, "step2_outage_S1", a.outages.phase1_s1_step2),
        (Source::S2, "step2_outage_S2", a.outages.phase2_s2_step2),
    ] {
        if a.outages.source(src).step1 == 0.0 {
            continue;
        }
        match sample_step2_outage(scenario, src, opts.trials, opts.seed ^ 0x5eed, 1 << 16) {
            Ok(r) => {
                let c = r.check(expected);
                checks.push(gate(
                    key,
                    c.z(),
                    opts.n_sigma,
                    format!("sim {:.3e} analytic {:.3e} n={}", c.frequency(), expected, r.trials),
                ));
            }
            Err(e) => checks.push(failed(key, e)),
        }
    }

    let sim = SimOptions {
        slots: opts.trials,
        seed: opts.seed,
        ..SimOptions::default()
    };
    match run_mdma(scenario, &sim) {
        Ok(e) => sim_checks(&a, &e, opts, &mut checks),
        Err(e) => checks.push(failed("simulation", e)),
    }
    ValidationReport {
        trials: opts.trials,
        seed: opts.seed,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_instances_are_distinct_and_small() {
        let mut rng = RngStream::new(5, 0);
        for _ in 0..200 {
            let g = random_gates(&mut rng);
            assert!((1..=4).contains(&g.len()));
            for (i, a) in g.iter().enumerate() {
                assert!((0.05..=0.95).contains(&a.gate_prob()));
                for b in &g[i + 1..] {
                    assert!((a.rate() - b.rate()).abs() > 0.005 * a.rate());
                }
            }
        }
    }

    #[test]
    fn small_validation_run() {
        let opts = ValidateOptions {
            trials: 200_000,
            cdf_instances: 5,
            cdf_points: 5,
            ..ValidateOptions::default()
        };
        let r = validate(&Scenario::paper_defaults(), &AnalyticOptions::default(), &opts);
        assert!(r.all_passed(), "{r}");
        assert!(r.check("overall_outage").is_some());
        assert!(r.to_string().starts_with("PASS"));
    }
}
