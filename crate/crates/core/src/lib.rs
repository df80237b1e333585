//! Core of a surrogate-assisted particle swarm optimizer for traffic signal
//! timing.
//!
//! Everything here is pure computation over `alloc` collections: the queue
//! microsimulator and its scalar objective ([`traffic`]), the integer PSO and
//! its surrogate-assisted variants ([`swarm`]), the feed-forward network
//! surrogate ([`surrogate`]), and the bookkeeping side of per-component
//! energy profiling ([`energy`]). Platform counters, files and the command
//! line live in the `surropt` companion crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod energy;
pub mod stats;
pub mod surrogate;
pub mod swarm;
pub mod traffic;

pub use energy::{ComponentProfile, ComponentTag, ComponentTotals, EnergyError, Profiler};
pub use surrogate::{Dataset, MlpSurrogate, SurrogateModel, TrainConfig};
pub use swarm::{run, PsoConfig, RunResult, Variant};
pub use traffic::{
    build_scenario, DurationBounds, GridSpec, PhasePlan, TrafficMetrics, TrafficObjective,
    TrafficScenario,
};

/// Derives an independent stream seed from a base seed and a stream index.
///
/// SplitMix64 finalizer; consecutive indices give unrelated seeds.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
