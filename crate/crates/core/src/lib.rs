//! Lock-free fault-tolerant resource sharing on partitioned multicores.
//!
//! The crate holds the task model, a synthetic workload generator,
//! response-time analyses for LEFT-RS and its comparison protocols, a
//! discrete-event simulator with a worst-case probe, and the experiment
//! harness used by the `leftrs` binary.

pub mod analysis;
pub mod error;
pub mod harness;
pub mod model;
pub mod sim;
pub mod taskgen;

pub use analysis::{analyze, AnalysisResult, OverheadModel, Protocol};
pub use error::{GenError, HarnessError, ModelError, SimError};
pub use model::{ResourceSpec, SystemSpec, TaskSpec};
