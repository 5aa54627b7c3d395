//! Repairable atomic read/write memory over a simulated asynchronous
//! network: three protocols (replicated, erasure-coded, and replicated with
//! a confirm round), a deterministic discrete-event simulator with crash and
//! repair injection, and post-hoc trace analysis.

pub mod analysis;
pub mod codec;
pub mod config;
pub mod netsim;
pub mod proto;
pub mod trace;
pub mod types;

pub use config::{Condition, ConfigError, DeliveryPolicy, FaultSpec, ScenarioConfig};
pub use netsim::run_scenario;
pub use proto::Protocol;
pub use trace::Trace;
