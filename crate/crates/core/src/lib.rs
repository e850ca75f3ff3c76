//! Frame-based uplink scheduling simulator.
//!
//! A base station in each cell grants per-frame uplink capacity to its
//! subscriber stations. Five policies are provided behind one trait:
//! round robin, weighted round robin, earliest deadline first, EDF ordered by
//! subscriber-station proportional fairness (SSBPF-EDF) and the heuristic
//! claim-value EDF (H-EDF). The engine is single-threaded and deterministic;
//! metrics are computed from the event log it produces.
//!
//! The crate is `no_std` and only needs `alloc`. File formats and the command
//! line live in the `uplinksim` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod engine;
pub mod error;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod schedulers;
pub mod time;
pub mod traffic;

pub use engine::{run, simulate, simulate_with, Event, EventKind, EventLog, SimOutput};
pub use error::{ConfigError, SimError};
pub use metrics::{DelayStats, MetricsRecord, StationMetrics};
pub use model::{
    canonical_scenario, Cell, CellId, ClassDeadlines, Grant, Request, RequestId, Scenario, ServiceClass, StationConfig,
    StationId, SubscriberStation,
};
pub use schedulers::{PolicyKind, SchedulerDecision, SchedulerPolicy};
pub use time::SimTime;
pub use traffic::{starvation_scenario, TrafficPattern, TrafficSpec};
