//! Federated-learning simulator with version-age-based client scheduling.
//!
//! Clients hold label-skewed shards of a dataset; each round the server picks a
//! subset of them, they train locally from the current global model, and the
//! server averages their uploads. The scheduler tracks a per-client version
//! age that grows while a client's last upload has drifted from the global
//! model and prefers clients with large ages.

pub mod aggregator;
pub mod cli_io;
pub mod error;
pub mod fl_core;
pub mod orchestrator;
pub mod partitioner;
pub mod scheduler;
pub mod seed;

pub use error::{Error, Result};
