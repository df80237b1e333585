//! Integer-encoded particle swarm optimization with optional surrogate
//! assistance.
//!
//! Plain PSO evaluates every particle with the actual fitness function.
//! The pre-training variants train a surrogate once enough actual evaluations
//! have accumulated and predict every particle from then on, with one actual
//! evaluation of the best predicted particle at the end. The retraining
//! variants retrain each generation and actually evaluate the top predicted
//! particles to grow the training set.

mod ops;
mod run;

use alloc::boxed::Box;

pub use ops::{
    inertia_weight, select_retrain_candidates, truncate_velocity, truncate_velocity_with, update_position,
    update_velocity, update_velocity_with,
};
pub use run::{run, FitnessKind, GenerationRecord, Particle, PredictionRecord, RunResult};

use crate::surrogate::Dataset;
use crate::traffic::{DurationBounds, PhasePlan};

pub type BoxError = Box<dyn core::error::Error + Send + Sync + 'static>;

#[derive(Debug, thiserror::Error)]
pub enum SwarmError {
    #[error("invalid config: {key}: {reason}")]
    InvalidConfig { key: &'static str, reason: &'static str },
    #[error("vector dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("particle {0} has no prediction this generation")]
    MissingPrediction(usize),
    #[error("retrain count {requested} exceeds swarm size {available}")]
    TooManyCandidates { requested: usize, available: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum RunFailure {
    #[error(transparent)]
    Swarm(#[from] SwarmError),
    #[error("actual evaluation failed: {0}")]
    Evaluation(BoxError),
    #[error("surrogate failed: {0}")]
    Surrogate(BoxError),
    #[error("profiler failed: {0}")]
    Profiler(#[from] crate::energy::EnergyError),
}

/// A run aborted; carries the fitness-evaluation count and generation at
/// which it happened.
#[derive(Debug, thiserror::Error)]
#[error("run aborted at generation {generation} (FE = {fe}): {source}")]
pub struct RunError {
    pub fe: u64,
    pub generation: u64,
    #[source]
    pub source: RunFailure,
}

/// Which parts of the surrogate-assisted loop are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Variant {
    Plain,
    PretrainSmall,
    PretrainLarge,
    RetrainSmall,
    RetrainLarge,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::Plain, Variant::PretrainSmall, Variant::PretrainLarge, Variant::RetrainSmall, Variant::RetrainLarge];

    pub fn uses_surrogate(self) -> bool {
        self != Variant::Plain
    }

    pub fn retrains(self) -> bool {
        matches!(self, Variant::RetrainSmall | Variant::RetrainLarge)
    }

    pub fn large_training_set(self) -> bool {
        matches!(self, Variant::PretrainLarge | Variant::RetrainLarge)
    }

    /// `plain`, `ps`, `pl`, `rs` or `rl`.
    pub fn short_name(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::PretrainSmall => "ps",
            Variant::PretrainLarge => "pl",
            Variant::RetrainSmall => "rs",
            Variant::RetrainLarge => "rl",
        }
    }

    pub fn from_short_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.short_name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub max_fitness_evals: u64,
    pub phi1: f64,
    pub phi2: f64,
    /// Probability of rounding a velocity component down.
    pub lambda: f64,
    pub w_max: f64,
    pub w_min: f64,
    /// Dataset size that triggers the first training.
    pub n_train: usize,
    /// Particles actually re-evaluated per generation when retraining.
    pub n_reeval: usize,
    pub variant: Variant,
    pub seed: u64,
    /// Keep every predicted plan in [`RunResult::predictions`].
    pub record_predictions: bool,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 20,
            max_fitness_evals: 2000,
            phi1: 2.05,
            phi2: 2.05,
            lambda: 0.5,
            w_max: 0.5,
            w_min: 0.1,
            n_train: 20,
            n_reeval: 5,
            variant: Variant::Plain,
            seed: 0,
            record_predictions: false,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<(), SwarmError> {
        let bad = |key, reason| Err(SwarmError::InvalidConfig { key, reason });
        if self.swarm_size == 0 {
            return bad("swarm_size", "must be at least 1");
        }
        if self.max_fitness_evals < self.swarm_size as u64 {
            return bad("max_fitness_evals", "must be at least the swarm size");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda", "must lie in [0, 1]");
        }
        if !self.phi1.is_finite() || !self.phi2.is_finite() {
            return bad("phi1", "coefficients must be finite");
        }
        if !(self.w_min <= self.w_max) {
            return bad("w_min", "must not exceed w_max");
        }
        if self.n_reeval > self.swarm_size {
            return bad("n_reeval", "must not exceed the swarm size");
        }
        if self.variant.uses_surrogate() && self.n_train < self.swarm_size {
            return bad("n_train", "must be at least the swarm size for surrogate variants");
        }
        Ok(())
    }

    /// Number of loop generations: `ceil((MaxFE - N) / N)`, at least 1.
    pub fn total_generations(&self) -> u64 {
        let n = self.swarm_size as u64;
        self.max_fitness_evals.saturating_sub(n).div_ceil(n).max(1)
    }

    /// Velocity limit per dimension.
    pub fn velocity_limit(bounds: DurationBounds) -> f64 {
        f64::from(bounds.width())
    }
}

/// The actual (expensive) fitness function, minimized.
pub trait Objective {
    type Error: core::error::Error + Send + Sync + 'static;

    fn dim(&self) -> usize;

    fn bounds(&self) -> DurationBounds;

    fn evaluate(&self, plan: &PhasePlan) -> Result<f64, Self::Error>;
}

impl Objective for crate::traffic::TrafficObjective {
    type Error = crate::traffic::TrafficError;

    fn dim(&self) -> usize {
        self.scenario().dim()
    }

    fn bounds(&self) -> DurationBounds {
        self.scenario().bounds
    }

    fn evaluate(&self, plan: &PhasePlan) -> Result<f64, Self::Error> {
        crate::traffic::TrafficObjective::evaluate(self, plan)
    }
}

/// A learned approximation of the fitness function.
pub trait Surrogate {
    type Error: core::error::Error + Send + Sync + 'static;

    fn train(&mut self, data: &Dataset) -> Result<(), Self::Error>;

    fn predict(&self, plan: &PhasePlan) -> Result<f64, Self::Error>;
}

/// Placeholder surrogate for plain PSO; never called.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoSurrogate;

#[derive(Debug, thiserror::Error)]
#[error("plain PSO has no surrogate")]
pub struct NoSurrogateError;

impl Surrogate for NoSurrogate {
    type Error = NoSurrogateError;

    fn train(&mut self, _: &Dataset) -> Result<(), NoSurrogateError> {
        Err(NoSurrogateError)
    }

    fn predict(&self, _: &PhasePlan) -> Result<f64, NoSurrogateError> {
        Err(NoSurrogateError)
    }
}
