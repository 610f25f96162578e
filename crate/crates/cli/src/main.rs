use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mdma_coop::analytic::RelaySumMethod;
use mdma_coop::experiments::{
    run_sweep_to_files, validate, ExperimentConfig, SweepFile, ValidateOptions,
};
use mdma_coop::markov::{
    analyze, build_chain_with, stationary_distribution, BoundaryRule, ChainDump,
};
use mdma_coop::simulator::{simulate, write_trace_csv, Scheme};
use serde_json::json;

#[derive(Parser)]
#[command(name = "mdma", version, about = "MDMA cooperative relay analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form step outages, stationary occupancy, OP, T_c and phi.
    Analyze(AnalyzeArgs),
    /// Simulate one scheme at one operating point.
    Simulate(SimulateArgs),
    /// Run a sweep file and write CSV plus JSON manifest.
    Sweep(SweepArgs),
    /// Compare every analytic quantity with its oracle.
    Validate(ValidateArgs),
    /// Print the protocol state chain as JSON.
    DumpChain(DumpArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML file with [topology], [system], [simulation], [analytic] tables.
    #[arg(long, conflicts_with = "paper_defaults")]
    config: Option<PathBuf>,
    /// Use the reference setup (the default when no config is given).
    #[arg(long)]
    paper_defaults: bool,
    #[arg(long)]
    power_dbm: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Bins over [0, threshold] for the step-2 outage.
    #[arg(long)]
    granularity: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.power_dbm {
            c.system.power_dbm = v;
        }
        if let Some(v) = self.eta {
            c.system.eta = v;
        }
        if let Some(v) = self.granularity {
            c.system.granularity = v;
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Auto,
    ClosedForm,
    Perturbed,
    Numerical,
}

impl From<Method> for RelaySumMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Auto => RelaySumMethod::Auto,
            Method::ClosedForm => RelaySumMethod::ClosedForm,
            Method::Perturbed => RelaySumMethod::Perturbed,
            Method::Numerical => RelaySumMethod::Numerical,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Relay-sum CDF method.
    #[arg(long, value_enum)]
    method: Option<Method>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// mdma, mdma:<eta>, tdma, fdma or noma.
    #[arg(long, default_value = "mdma")]
    scheme: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Slots to simulate.
    #[arg(long)]
    trials: Option<u64>,
    /// Write a per-slot CSV trace of the first --trace-cap slots here.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    trace_cap: usize,
    /// Disable step-2 relay forwarding.
    #[arg(long)]
    no_cooperation: bool,
    /// Share of the power given to S1 under NOMA.
    #[arg(long)]
    noma_power_split: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep file: a [sweep] table plus optional configuration tables.
    spec: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Base name of the CSV and JSON files; defaults to the spec file stem.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    granularity: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    /// Replace the schemes listed in the file.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<String>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Boundary {
    ProtocolCycle,
    Literal,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "protocol-cycle")]
    boundary: Boundary,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display())),
        None => match writeln!(io::stdout().lock(), "{text}") {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
            r => Ok(r?),
        },
    }
}

fn run_analyze(args: AnalyzeArgs) -> Result<()> {
    let mut cfg = args.common.config()?;
    if let Some(m) = args.method {
        cfg.analytic.method = m.into();
    }
    let s = cfg.scenario()?;
    let a = analyze(&s, &cfg.analytic)?;
    let states: Vec<String> = a.chain.states().iter().map(|x| x.to_string()).collect();
    let value = json!({
        "power_dbm": s.config.power_dbm,
        "eta": s.config.eta,
        "gamma_th": s.gamma_th,
        "beta_s": a.beta_s,
        "beta_p": a.beta_p,
        "step_outages": a.outages,
        "overall_op": a.solution.overall_op,
        "slot_cost": a.solution.slot_cost,
        "efficiency": a.solution.efficiency,
        "states": states,
        "stationary": a.solution.stationary,
    });
    emit(args.common.out.as_deref(), &serde_json::to_string_pretty(&value)?)
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let cfg = args.common.config()?;
    let scheme: Scheme = args.scheme.parse()?;
    let mut opts = cfg.simulation.clone();
    if let Some(v) = args.seed {
        opts.seed = v;
    }
    if let Some(v) = args.trials {
        opts.slots = v;
    }
    if let Some(v) = args.noma_power_split {
        opts.noma_power_split = v;
    }
    if args.no_cooperation {
        opts.relay_cooperation = false;
    }
    opts.trace_cap = if args.trace.is_some() { args.trace_cap } else { 0 };
    let e = simulate(scheme, &cfg.scenario()?, &opts)?;
    if let Some(p) = &args.trace {
        let f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
        write_trace_csv(&e.trace, io::BufWriter::new(f))?;
    }
    emit(args.common.out.as_deref(), &serde_json::to_string_pretty(&e)?)
}

fn run_sweep_cmd(args: SweepArgs) -> Result<()> {
    let mut file = SweepFile::load(&args.spec)
        .with_context(|| format!("reading {}", args.spec.display()))?;
    if let Some(v) = args.seed {
        file.sweep.seed = v;
    }
    if let Some(v) = args.trials {
        file.sweep.trials = v;
    }
    if let Some(v) = args.granularity {
        file.config.system.granularity = v;
    }
    if let Some(v) = args.eta {
        file.config.system.eta = v;
    }
    if !args.scheme.is_empty() {
        file.sweep.schemes = args
            .scheme
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_, _>>()?;
    }
    let stem = match args.name {
        Some(n) => n,
        None => args
            .spec
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("sweep")
            .to_string(),
    };
    let (rows, manifest) = run_sweep_to_files(&file.sweep, &file.config, &args.out, &stem)?;
    eprintln!(
        "{} rows ({} failed) -> {}",
        rows.len(),
        manifest.failed_rows,
        args.out.join(&manifest.csv).display()
    );
    if !manifest.publishable {
        eprintln!("note: fewer than 10^4 trials per point");
    }
    Ok(())
}

fn run_validate(args: ValidateArgs) -> Result<()> {
    let cfg = args.common.config()?;
    let opts = ValidateOptions {
        trials: args.trials,
        seed: args.seed,
        ..ValidateOptions::default()
    };
    let report = validate(&cfg.scenario()?, &cfg.analytic, &opts);
    print!("{report}");
    if let Some(p) = &args.common.out {
        fs::write(p, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    if !report.all_passed() {
        bail!("validation failed");
    }
    Ok(())
}

fn run_dump(args: DumpArgs) -> Result<()> {
    let cfg = args.common.config()?;
    let s = cfg.scenario()?;
    let a = analyze(&s, &cfg.analytic)?;
    let rule = match args.boundary {
        Boundary::ProtocolCycle => BoundaryRule::ProtocolCycle,
        Boundary::Literal => BoundaryRule::Literal,
    };
    let chain = build_chain_with(&a.outages, s.beta_s, s.beta_p, rule)?;
    let pi = stationary_distribution(chain.matrix())?;
    let dump = ChainDump::new(&chain, &pi);
    emit(args.common.out.as_deref(), &serde_json::to_string_pretty(&dump)?)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Analyze(a) => run_analyze(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Sweep(a) => run_sweep_cmd(a),
        Command::Validate(a) => run_validate(a),
        Command::DumpChain(a) => run_dump(a),
    }
}
