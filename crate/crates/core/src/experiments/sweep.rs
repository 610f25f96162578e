use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{config_hash, derive_seed, ExperimentConfig};
use crate::error::{Error, Result};
use crate::markov::analyze;
use crate::simulator::{simulate, Scheme, SimEstimate, SimOptions};
use crate::topology::{paper_relay_layout, Scenario};

/// Trials per point below which a sweep is exploratory only.
pub const PUBLISHED_MIN_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParameter {
    PowerDbm,
    Eta,
    Granularity,
    /// Relays placed with the reference layout.
    RelayCount,
}

impl SweptParameter {
    pub fn label(&self) -> &'static str {
        match self {
            SweptParameter::PowerDbm => "power_dbm",
            SweptParameter::Eta => "eta",
            SweptParameter::Granularity => "granularity",
            SweptParameter::RelayCount => "relay_count",
        }
    }

    /// The base configuration with this parameter set to `value`.
    pub fn apply(&self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut c = base.clone();
        let whole = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!(
                    "{} must be a positive integer, got {value}",
                    self.label()
                )))
            }
        };
        match self {
            SweptParameter::PowerDbm => c.system.power_dbm = value,
            SweptParameter::Eta => c.system.eta = value,
            SweptParameter::Granularity => c.system.granularity = whole()?,
            SweptParameter::RelayCount => c.topology.relays = paper_relay_layout(whole()?),
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweptParameter,
    pub grid: Vec<f64>,
    pub schemes: Vec<Scheme>,
    /// Simulated slots per point and scheme; zero skips simulation.
    pub trials: u64,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep grid must be finite".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sweep grid must be strictly increasing".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("sweep needs at least one scheme".into()));
        }
        Ok(())
    }

    /// Whether the trial count is high enough for published figures.
    pub fn is_publishable(&self) -> bool {
        self.trials >= PUBLISHED_MIN_TRIALS
    }
}

/// Power grid from 0 to 30 dBm in 2 dB steps.
pub fn default_power_grid() -> Vec<f64> {
    (0..=15).map(|i| 2.0 * f64::from(i)).collect()
}

/// One scheme at one grid point. Analytic fields are only filled for MDMA;
/// a failure at the point is reported in `error` and leaves the rest empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: String,
    pub parameter: String,
    pub value: f64,
    pub eta: Option<f64>,
    pub analytic_op: Option<f64>,
    pub sim_op: Option<f64>,
    pub sim_op_stderr: Option<f64>,
    pub analytic_tc: Option<f64>,
    pub sim_tc: Option<f64>,
    pub sim_tc_stderr: Option<f64>,
    pub analytic_phi: Option<f64>,
    pub sim_phi: Option<f64>,
    pub sim_phi_stderr: Option<f64>,
    pub sim_slots: Option<u64>,
    pub error: Option<String>,
}

impl ResultRow {
    fn empty(scheme: Scheme, parameter: SweptParameter, value: f64) -> Self {
        Self {
            scheme: scheme.to_string(),
            parameter: parameter.label().to_string(),
            value,
            eta: None,
            analytic_op: None,
            sim_op: None,
            sim_op_stderr: None,
            analytic_tc: None,
            sim_tc: None,
            sim_tc_stderr: None,
            analytic_phi: None,
            sim_phi: None,
            sim_phi_stderr: None,
            sim_slots: None,
            error: None,
        }
    }

    /// `|analytic - simulated|` in simulated standard errors.
    pub fn op_deviation(&self) -> Option<f64> {
        match (self.analytic_op, self.sim_op, self.sim_op_stderr) {
            (Some(a), Some(s), Some(e)) if e > 0.0 => Some((a - s).abs() / e),
            (Some(a), Some(s), Some(_)) => Some(if a == s { 0.0 } else { f64::INFINITY }),
            _ => None,
        }
    }

    fn fill_sim(&mut self, e: &SimEstimate) {
        self.sim_op = Some(e.overall_op.value);
        self.sim_op_stderr = Some(e.overall_op.stderr);
        self.sim_tc = e.slot_cost.map(|m| m.value);
        self.sim_tc_stderr = e.slot_cost.map(|m| m.stderr);
        self.sim_phi = e.efficiency.map(|m| m.value);
        self.sim_phi_stderr = e.efficiency.map(|m| m.stderr);
        self.sim_slots = Some(e.slots);
    }
}

fn run_point(
    spec: &SweepSpec,
    base: &ExperimentConfig,
    point: usize,
    scheme_idx: usize,
) -> Result<ResultRow> {
    let value = spec.grid[point];
    let scheme = spec.schemes[scheme_idx];
    let mut row = ResultRow::empty(scheme, spec.parameter, value);
    let cfg = spec.parameter.apply(base, value)?;
    let mut scenario = Scenario::new(cfg.topology.clone(), cfg.system.clone())?;
    if let Scheme::Mdma(Some(eta)) = scheme {
        scenario = scenario.with_eta(eta)?;
    }
    if scheme.is_mdma() {
        row.eta = Some(scenario.config.eta);
        let a = analyze(&scenario, &cfg.analytic)?;
        row.analytic_op = Some(a.solution.overall_op);
        row.analytic_tc = Some(a.solution.slot_cost);
        row.analytic_phi = Some(a.solution.efficiency);
    }
    if spec.trials > 0 {
        let opts = SimOptions {
            slots: spec.trials,
            seed: derive_seed(spec.seed, point as u64, scheme_idx as u64),
            trace_cap: 0,
            ..cfg.simulation.clone()
        };
        let sim_scheme = if scheme.is_mdma() {
            Scheme::Mdma(None)
        } else {
            scheme
        };
        row.fill_sim(&simulate(sim_scheme, &scenario, &opts)?);
    }
    Ok(row)
}

/// Rows ordered by grid point, then by scheme as listed in the spec.
pub fn run_sweep(spec: &SweepSpec, base: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.grid.len())
        .flat_map(|p| (0..spec.schemes.len()).map(move |s| (p, s)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(p, s)| {
            run_point(spec, base, p, s).unwrap_or_else(|e| {
                let mut row = ResultRow::empty(spec.schemes[s], spec.parameter, spec.grid[p]);
                row.error = Some(e.to_string());
                row
            })
        })
        .collect();
    Ok(rows)
}

pub fn write_rows_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows: std::result::Result<Vec<ResultRow>, csv::Error> = r.deserialize().collect();
    Ok(rows?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub csv: String,
    pub rows: usize,
    pub failed_rows: usize,
    pub publishable: bool,
    pub spec: SweepSpec,
    pub config: ExperimentConfig,
}

/// A sweep file: a `[sweep]` table plus optional configuration tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFile {
    pub sweep: SweepSpec,
    #[serde(flatten)]
    pub config: ExperimentConfig,
}

impl SweepFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Runs the sweep and writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn run_sweep_to_files(
    spec: &SweepSpec,
    config: &ExperimentConfig,
    dir: &Path,
    stem: &str,
) -> Result<(Vec<ResultRow>, SweepManifest)> {
    let rows = run_sweep(spec, config)?;
    std::fs::create_dir_all(dir)?;
    let csv_name = format!("{stem}.csv");
    write_rows_csv(&rows, std::fs::File::create(dir.join(&csv_name))?)?;
    let manifest = SweepManifest {
        tool: "mdma".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: spec.seed,
        config_hash: config_hash(&(spec, config))?,
        csv: csv_name,
        rows: rows.len(),
        failed_rows: rows.iter().filter(|r| r.error.is_some()).count(),
        publishable: spec.is_publishable(),
        spec: spec.clone(),
        config: config.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
    Ok((rows, manifest))
}
