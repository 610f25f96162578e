//! Outage probability, slot cost and resource-utilization efficiency of a
//! two-source MDMA network with `m` decode-and-forward relays and maximal
//! ratio combining at the destination, over independent Rayleigh links with
//! distinct mean gains.
//!
//! * [`topology`]: geometry, link budgets, reference setup.
//! * [`analytic`]: closed-form per-step outages.
//! * [`markov`]: protocol state chain, stationary occupancy, overall outage.
//! * [`simulator`]: slot-level Monte Carlo of MDMA and TDMA/FDMA/NOMA baselines.
//! * [`experiments`]: parameter sweeps and theory-vs-simulation validation.
//! * [`oracle`]: quadrature references independent of the closed forms.

pub mod analytic;
pub mod error;
pub mod experiments;
pub mod markov;
pub mod numeric;
pub mod oracle;
pub mod simulator;
pub mod topology;

pub use error::{Error, Result};
pub use topology::{default_paper_setup, NetworkTopology, Scenario, Source, SystemConfig};
