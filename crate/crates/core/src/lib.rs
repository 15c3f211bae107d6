//! Deterministic discrete-event simulator for mobile ad-hoc networks with
//! passive, decentralized load balancing.
//!
//! Each node keeps a score for every one-hop neighbor per destination (a
//! [`routing::NeighborRanking`]). Instead of always sending to the best
//! neighbor, a node spreads packets round-robin over all neighbors whose
//! score is within a factor `lambda` of the best one. No extra signalling is
//! involved; the decision is made in a hook between route lookup and
//! transmission ([`balancer::postrouting_hook`]).
//!
//! Three routing metrics feed the rankings: a transmission-quality metric
//! (receive windows, hop penalty), a geographic link-state metric, and a
//! mobility-predicting path score.
//!
//! ```no_run
//! use manet_lb::{config::ScenarioConfig, sim::simulate};
//!
//! let cfg = ScenarioConfig { sim_time_s: 100.0, ..ScenarioConfig::default() };
//! let report = simulate(&cfg, 42);
//! println!("PDR {:.3}", report.overall_pdr().unwrap_or(0.0));
//! ```

pub mod balancer;
pub mod channel;
pub mod config;
pub mod engine;
pub mod experiment;
pub mod mobility;
pub mod rng;
pub mod routing;
pub mod sim;
pub mod time;
pub mod traffic;

/// Nodes are numbered `0..n` within a run.
pub type NodeId = usize;

pub use balancer::{next_forwarder, postrouting_hook, schedulable_set, ForwardingPolicy, RrState, SchedulableSet};
pub use config::{ConfigError, ScenarioConfig};
pub use experiment::{run_experiment, sweep, write_csv, ResultRow, SweepParam};
pub use routing::{NeighborRanking, Protocol};
pub use sim::{simulate, RunReport, SimOptions, Simulation};
pub use time::SimTime;
