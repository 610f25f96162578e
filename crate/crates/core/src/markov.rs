//! The MDMA protocol as a finite Markov chain with one transition per slot.
//!
//! States are `(phase, step, repetition)`. Phases run Phase I S1 (shared,
//! `beta_s` repetitions), Phase II S1 and Phase II S2 (personalized, `beta_p`
//! repetitions each), then wrap. From step 1 the chain stays put when the
//! direct link fails and no relay decoded, moves to step 2 when the direct
//! link fails but some relay decoded, and advances otherwise. Step 2 falls
//! back to step 1 of the same repetition on failure and advances on success.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analytic::{step_outages, AnalyticOptions, StepOutageSet};
use crate::error::{Error, Result};
use crate::topology::{Scenario, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// Phase I: S1 sends the shared segment.
    SharedS1,
    /// Phase II, first half: S1 personalized segment.
    PersonalS1,
    /// Phase II, second half: S2 personalized segment.
    PersonalS2,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::SharedS1, Phase::PersonalS1, Phase::PersonalS2];

    pub fn source(&self) -> Source {
        match self {
            Phase::SharedS1 | Phase::PersonalS1 => Source::S1,
            Phase::PersonalS2 => Source::S2,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Phase::SharedS1 => "pIS1",
            Phase::PersonalS1 => "pIIS1",
            Phase::PersonalS2 => "pIIS2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    /// Source broadcast.
    Direct,
    /// Relay forwarding with MRC at the destination.
    Relay,
}

impl Step {
    pub fn number(&self) -> u8 {
        match self {
            Step::Direct => 1,
            Step::Relay => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProtocolState {
    pub phase: Phase,
    pub step: Step,
    /// 1-based.
    pub repetition: u32,
}

impl fmt::Display for ProtocolState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}s{},{})", self.phase.label(), self.step.number(), self.repetition)
    }
}

/// Where a success out of the last repetition of Phase II S1 leads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryRule {
    /// Every phase hands over to the next one: I-S1, II-S1, II-S2, I-S1, ...
    #[default]
    ProtocolCycle,
    /// Step 1 of the last Phase II S1 repetition returns to `(pIIS1s1,1)` on
    /// success, as the printed transition list reads. Other boundaries
    /// follow the protocol cycle.
    Literal,
}

/// Row-stochastic matrix in sparse row form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        for row in &rows {
            for &(j, p) in row {
                if j >= n || !(0.0..=1.0).contains(&p) {
                    return Err(Error::Domain(format!("bad transition entry ({j}, {p})")));
                }
            }
        }
        Ok(Self { rows })
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().filter(|(k, _)| *k == j).map(|(_, p)| p).sum()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|(_, p)| p).sum()
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                m[(i, j)] += p;
            }
        }
        m
    }

    /// `p T`.
    pub fn left_mul(&self, p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let pi = p[i];
            if pi == 0.0 {
                continue;
            }
            for &(j, t) in row {
                out[j] += pi * t;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolChain {
    states: Vec<ProtocolState>,
    matrix: TransitionMatrix,
}

impl ProtocolChain {
    pub fn states(&self) -> &[ProtocolState] {
        &self.states
    }

    pub fn matrix(&self) -> &TransitionMatrix {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &ProtocolState) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }
}

/// Phases with their repetition counts, empty phases dropped.
pub fn phase_plan(beta_s: u32, beta_p: u32) -> Vec<(Phase, u32)> {
    Phase::ALL
        .iter()
        .map(|&p| (p, if p == Phase::SharedS1 { beta_s } else { beta_p }))
        .filter(|&(_, n)| n > 0)
        .collect()
}

/// States in the order `(ph,s1,1), (ph,s2,1), (ph,s1,2), ...` phase by phase.
pub fn enumerate_states(beta_s: u32, beta_p: u32) -> Vec<ProtocolState> {
    let mut out = Vec::new();
    for (phase, reps) in phase_plan(beta_s, beta_p) {
        for repetition in 1..=reps {
            for step in [Step::Direct, Step::Relay] {
                out.push(ProtocolState {
                    phase,
                    step,
                    repetition,
                });
            }
        }
    }
    out
}

pub fn build_chain(outages: &StepOutageSet, beta_s: u32, beta_p: u32) -> Result<ProtocolChain> {
    build_chain_with(outages, beta_s, beta_p, BoundaryRule::ProtocolCycle)
}

pub fn build_chain_with(
    outages: &StepOutageSet,
    beta_s: u32,
    beta_p: u32,
    rule: BoundaryRule,
) -> Result<ProtocolChain> {
    outages.validate()?;
    if beta_s == 0 && beta_p == 0 {
        return Err(Error::Domain("beta_s and beta_p cannot both be zero".into()));
    }
    let plan = phase_plan(beta_s, beta_p);
    let states = enumerate_states(beta_s, beta_p);

    let mut offsets = Vec::with_capacity(plan.len());
    let mut acc = 0usize;
    for &(_, reps) in &plan {
        offsets.push(acc);
        acc += 2 * reps as usize;
    }
    let index = |phase_idx: usize, rep0: u32, step: Step| {
        offsets[phase_idx] + 2 * rep0 as usize + usize::from(step == Step::Relay)
    };

    let mut rows = Vec::with_capacity(states.len());
    for (pi, &(phase, reps)) in plan.iter().enumerate() {
        let src = outages.source(phase.source());
        let (q1, q2, empty) = (src.step1, src.step2, src.empty_set);
        for rep0 in 0..reps {
            let last = rep0 + 1 == reps;
            let next = if !last {
                index(pi, rep0 + 1, Step::Direct)
            } else {
                index((pi + 1) % plan.len(), 0, Step::Direct)
            };
            let next_from_step1 = if last && rule == BoundaryRule::Literal && phase == Phase::PersonalS1
            {
                index(pi, 0, Step::Direct)
            } else {
                next
            };
            let here1 = index(pi, rep0, Step::Direct);
            let here2 = index(pi, rep0, Step::Relay);

            let mut row1 = Vec::with_capacity(3);
            push(&mut row1, here1, q1 * empty);
            push(&mut row1, here2, q1 * (1.0 - empty));
            push(&mut row1, next_from_step1, 1.0 - q1);
            rows.push(row1);

            let mut row2 = Vec::with_capacity(2);
            push(&mut row2, here1, q2);
            push(&mut row2, next, 1.0 - q2);
            rows.push(row2);
        }
    }
    Ok(ProtocolChain {
        states,
        matrix: TransitionMatrix::from_rows(rows)?,
    })
}

fn push(row: &mut Vec<(usize, f64)>, j: usize, p: f64) {
    if p == 0.0 {
        return;
    }
    match row.iter_mut().find(|(k, _)| *k == j) {
        Some(e) => e.1 += p,
        None => row.push((j, p)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerIteration {
    /// Stop once successive iterates differ by less than this in max norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Weight of the identity in `p <- p ((1 - l) T + l I)`; zero is plain
    /// power iteration.
    pub laziness: f64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 1_000_000,
            laziness: 0.0,
        }
    }
}

/// Power iteration from `start`. Returns the vector and the iteration count.
pub fn stationary_power(
    matrix: &TransitionMatrix,
    start: &[f64],
    opts: &PowerIteration,
) -> Result<(Vec<f64>, usize)> {
    let n = matrix.dim();
    if start.len() != n {
        return Err(Error::Domain("start vector has the wrong length".into()));
    }
    let lazy = opts.laziness;
    let mut p = start.to_vec();
    let mut next = vec![0.0; n];
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        matrix.left_mul(&p, &mut next);
        if lazy > 0.0 {
            for (x, &old) in next.iter_mut().zip(&p) {
                *x = (1.0 - lazy) * *x + lazy * old;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        change = p
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut p, &mut next);
        if change < opts.tolerance {
            return Ok((p, it));
        }
    }
    Err(Error::Convergence {
        iterations: opts.max_iterations,
        residual: change,
    })
}

/// Solves `pi (T - I) = 0`, `sum pi = 1` directly.
pub fn stationary_direct(matrix: &TransitionMatrix) -> Result<Vec<f64>> {
    let n = matrix.dim();
    let mut a = matrix.dense().transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Domain("singular balance equations".into()))?;
    Ok(x.iter().map(|v| v.max(0.0)).collect())
}

/// Stationary distribution by power iteration from a point mass on the first
/// state. A chain that is periodic (e.g. failure free) never settles under
/// plain iteration; it is then re-run on the lazy chain `(T + I) / 2`,
/// which has the same stationary vector.
pub fn stationary_distribution(matrix: &TransitionMatrix) -> Result<Vec<f64>> {
    let n = matrix.dim();
    let mut start = vec![0.0; n];
    start[0] = 1.0;
    match stationary_power(matrix, &start, &PowerIteration::default()) {
        Ok((p, _)) => Ok(p),
        Err(Error::Convergence { .. }) => {
            let lazy = PowerIteration {
                laziness: 0.5,
                ..PowerIteration::default()
            };
            stationary_power(matrix, &start, &lazy).map(|(p, _)| p)
        }
        Err(e) => Err(e),
    }
}

/// Occupancy-weighted average of the per-step outages.
pub fn overall_outage(chain: &ProtocolChain, stationary: &[f64], outages: &StepOutageSet) -> f64 {
    chain
        .states()
        .iter()
        .zip(stationary)
        .map(|(s, p)| {
            let src = outages.source(s.phase.source());
            let q = match s.step {
                Step::Direct => src.step1,
                Step::Relay => src.step2,
            };
            p * q
        })
        .sum()
}

/// Expected slots per successful reception.
pub fn slot_cost(op: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&op) {
        return Err(Error::Divergence(op));
    }
    Ok(1.0 / (1.0 - op))
}

/// Images delivered per slot, bandwidth unit and power unit.
pub fn resource_efficiency(
    t_c: f64,
    beta_s: u32,
    beta_p: u32,
    bandwidth_units: f64,
    power_units: f64,
) -> Result<f64> {
    let denom = t_c * f64::from(beta_s + 2 * beta_p) * bandwidth_units * power_units;
    if !(denom > 0.0 && denom.is_finite()) {
        return Err(Error::Domain(format!(
            "efficiency denominator must be positive, got {denom}"
        )));
    }
    Ok(2.0 / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSolution {
    pub stationary: Vec<f64>,
    pub overall_op: f64,
    pub slot_cost: f64,
    pub efficiency: f64,
}

/// Everything the analytic pipeline produces for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticResult {
    pub beta_s: u32,
    pub beta_p: u32,
    pub outages: StepOutageSet,
    pub chain: ProtocolChain,
    pub solution: ChainSolution,
}

impl AnalyticResult {
    /// Expected slots to deliver one image pair.
    pub fn slots_per_pair(&self) -> f64 {
        self.solution.slot_cost * f64::from(self.beta_s + 2 * self.beta_p)
    }
}

pub fn solve_chain(
    outages: &StepOutageSet,
    beta_s: u32,
    beta_p: u32,
    bandwidth_units: f64,
    power_units: f64,
) -> Result<(ProtocolChain, ChainSolution)> {
    let chain = build_chain(outages, beta_s, beta_p)?;
    let stationary = stationary_distribution(chain.matrix())?;
    let overall_op = overall_outage(&chain, &stationary, outages).clamp(0.0, 1.0);
    let t_c = slot_cost(overall_op)?;
    let efficiency = resource_efficiency(t_c, beta_s, beta_p, bandwidth_units, power_units)?;
    Ok((
        chain,
        ChainSolution {
            stationary,
            overall_op,
            slot_cost: t_c,
            efficiency,
        },
    ))
}

/// Step outages, chain and stationary solution for a scenario.
pub fn analyze(scenario: &Scenario, options: &AnalyticOptions) -> Result<AnalyticResult> {
    let outages = step_outages(scenario, options)?;
    let c = &scenario.config;
    let (chain, solution) = solve_chain(
        &outages,
        scenario.beta_s,
        scenario.beta_p,
        c.bandwidth_units,
        c.power_units,
    )?;
    Ok(AnalyticResult {
        beta_s: scenario.beta_s,
        beta_p: scenario.beta_p,
        outages,
        chain,
        solution,
    })
}

/// JSON-friendly snapshot of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDump {
    pub states: Vec<String>,
    /// `(from, to, probability)` for every non-zero entry.
    pub transitions: Vec<(usize, usize, f64)>,
    pub stationary: Vec<f64>,
}

impl ChainDump {
    pub fn new(chain: &ProtocolChain, stationary: &[f64]) -> Self {
        let transitions = (0..chain.len())
            .flat_map(|i| chain.matrix().row(i).iter().map(move |&(j, p)| (i, j, p)))
            .collect();
        Self {
            states: chain.states().iter().map(|s| s.to_string()).collect(),
            transitions,
            stationary: stationary.to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::SourceStepOutages;

    fn uniform(q: f64, empty: f64) -> StepOutageSet {
        let s = SourceStepOutages {
            step1: q,
            step2: q,
            empty_set: empty,
        };
        StepOutageSet::from_sources(s, s)
    }

    fn sample() -> StepOutageSet {
        StepOutageSet::from_sources(
            SourceStepOutages {
                step1: 0.43,
                step2: 0.02,
                empty_set: 0.01,
            },
            SourceStepOutages {
                step1: 0.6,
                step2: 0.05,
                empty_set: 0.03,
            },
        )
    }

    #[test]
    fn state_count() {
        for (bs, bp) in [(5, 5), (7, 3), (0, 10), (10, 0), (1, 1)] {
            let c = build_chain(&sample(), bs, bp).unwrap();
            assert_eq!(c.len() as u32, 2 * bs + 4 * bp);
        }
    }

    #[test]
    fn first_state_labels() {
        let c = build_chain(&sample(), 2, 1).unwrap();
        let labels: Vec<String> = c.states().iter().map(|s| s.to_string()).collect();
        assert_eq!(
            labels,
            [
                "(pIS1s1,1)", "(pIS1s2,1)", "(pIS1s1,2)", "(pIS1s2,2)", "(pIIS1s1,1)",
                "(pIIS1s2,1)", "(pIIS2s1,1)", "(pIIS2s2,1)"
            ]
        );
    }

    #[test]
    fn rows_are_stochastic_and_sparse() {
        let c = build_chain(&sample(), 5, 5).unwrap();
        for i in 0..c.len() {
            assert!((c.matrix().row_sum(i) - 1.0).abs() < 1e-12);
            assert!(c.matrix().row(i).len() <= 3);
        }
    }

    #[test]
    fn transition_values() {
        let o = sample();
        let c = build_chain(&o, 2, 1).unwrap();
        let t = c.matrix();
        // (pIS1s1,1)
        assert!((t.get(0, 0) - 0.43 * 0.01).abs() < 1e-15);
        assert!((t.get(0, 1) - 0.43 * 0.99).abs() < 1e-15);
        assert!((t.get(0, 2) - 0.57).abs() < 1e-15);
        // (pIS1s2,2) success leaves for Phase II S1
        assert!((t.get(3, 4) - 0.98).abs() < 1e-15);
        assert!((t.get(3, 2) - 0.02).abs() < 1e-15);
        // (pIIS2s1,1) success wraps to the start
        assert!((t.get(6, 0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn literal_boundary_rule_loops_phase_two_s1() {
        let c = build_chain_with(&sample(), 2, 2, BoundaryRule::Literal).unwrap();
        let last_p2s1 = c
            .index_of(&ProtocolState {
                phase: Phase::PersonalS1,
                step: Step::Direct,
                repetition: 2,
            })
            .unwrap();
        assert!((c.matrix().get(last_p2s1, 4) - 0.57).abs() < 1e-15);
        for i in 0..c.len() {
            assert!((c.matrix().row_sum(i) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn failure_free_chain_is_a_cycle() {
        let c = build_chain(&uniform(0.0, 0.3), 5, 5).unwrap();
        let t = c.matrix();
        for i in (0..c.len()).step_by(2) {
            assert_eq!(t.row(i).len(), 1);
            assert_eq!(t.row(i)[0].1, 1.0);
        }
        let pi = stationary_distribution(t).unwrap();
        for (i, p) in pi.iter().enumerate() {
            let expect = if i % 2 == 0 { 1.0 / 15.0 } else { 0.0 };
            assert!((p - expect).abs() < 1e-10, "state {i}: {p}");
        }
    }

    #[test]
    fn no_relay_ever_decodes() {
        let c = build_chain(&uniform(0.3, 1.0), 2, 1).unwrap();
        let t = c.matrix();
        assert!((t.get(0, 0) - 0.3).abs() < 1e-15);
        assert_eq!(t.get(0, 1), 0.0);
        assert!((t.get(0, 2) - 0.7).abs() < 1e-15);
        let pi = stationary_distribution(t).unwrap();
        for i in (1..c.len()).step_by(2) {
            assert!(pi[i].abs() < 1e-12);
        }
    }

    #[test]
    fn two_state_symmetric_switch() {
        let t = TransitionMatrix::from_rows(vec![
            vec![(0, 0.5), (1, 0.5)],
            vec![(0, 0.5), (1, 0.5)],
        ])
        .unwrap();
        let pi = stationary_distribution(&t).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-15 && (pi[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn power_and_direct_agree() {
        let c = build_chain(&sample(), 5, 5).unwrap();
        let p = stationary_distribution(c.matrix()).unwrap();
        let d = stationary_direct(c.matrix()).unwrap();
        for (a, b) in p.iter().zip(&d) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn bad_outages_rejected() {
        let mut o = sample();
        o.phase2_s2_step2 = 1.2;
        assert!(matches!(build_chain(&o, 5, 5), Err(Error::Domain(_))));
        assert!(build_chain(&sample(), 0, 0).is_err());
    }

    #[test]
    fn overall_outage_of_constant_steps() {
        let o = uniform(0.37, 0.2);
        let c = build_chain(&o, 4, 3).unwrap();
        let pi = stationary_distribution(c.matrix()).unwrap();
        assert!((overall_outage(&c, &pi, &o) - 0.37).abs() < 1e-12);
        let z = uniform(0.0, 0.2);
        let c = build_chain(&z, 4, 3).unwrap();
        let pi = stationary_distribution(c.matrix()).unwrap();
        assert_eq!(overall_outage(&c, &pi, &z), 0.0);
    }

    #[test]
    fn slot_cost_values() {
        assert_eq!(slot_cost(0.0).unwrap(), 1.0);
        assert_eq!(slot_cost(0.5).unwrap(), 2.0);
        assert!((slot_cost(0.9).unwrap() - 10.0).abs() < 1e-12);
        assert!(matches!(slot_cost(1.0), Err(Error::Divergence(_))));
    }

    #[test]
    fn efficiency_values() {
        assert!((resource_efficiency(1.0, 5, 5, 1.0, 1.0).unwrap() - 2.0 / 15.0).abs() < 1e-15);
        let a = resource_efficiency(1.3, 5, 5, 1.0, 1.0).unwrap();
        let b = resource_efficiency(1.3, 5, 5, 2.0, 1.0).unwrap();
        assert!((a / b - 2.0).abs() < 1e-15);
        assert!((resource_efficiency(1.0, 10, 0, 1.0, 1.0).unwrap() - 0.2).abs() < 1e-15);
        assert!(resource_efficiency(1.0, 0, 0, 1.0, 1.0).is_err());
    }

    #[test]
    fn dump_lists_every_transition() {
        let c = build_chain(&sample(), 2, 2).unwrap();
        let pi = stationary_distribution(c.matrix()).unwrap();
        let dump = ChainDump::new(&c, &pi);
        let nnz: usize = (0..c.len()).map(|i| c.matrix().row(i).len()).sum();
        assert_eq!(dump.transitions.len(), nnz);
        let json = serde_json::to_string(&dump).unwrap();
        let back: ChainDump = serde_json::from_str(&json).unwrap();
        assert_eq!(back, dump);
    }
}
