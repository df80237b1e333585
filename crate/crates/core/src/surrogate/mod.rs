//! Neural-network fitness surrogate: a small ReLU MLP trained with Adam,
//! plus the MAPE and R² accuracy metrics.

mod metrics;
mod mlp;

use alloc::vec::Vec;

pub use metrics::{mape, r_squared};
pub use mlp::{init_model, train, Layer, SurrogateModel, TrainReport};

use crate::swarm::Surrogate;
use crate::traffic::{DurationBounds, PhasePlan};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SurrogateError {
    #[error("layer dims must list an input size, hidden sizes and a single output, all nonzero")]
    InvalidDims,
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
    #[error("training targets are constant; cannot standardize")]
    DegenerateTargets,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training target {0} is not finite")]
    NonFiniteTarget(f64),
    #[error("{actual} actual values but {predicted} predictions")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),
    #[error("surrogate used before training")]
    NotTrained,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 32, learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SurrogateError> {
        use SurrogateError::InvalidConfig;
        if self.epochs == 0 {
            return Err(InvalidConfig("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(InvalidConfig("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(InvalidConfig("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(InvalidConfig("adam betas must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(InvalidConfig("epsilon must be positive"));
        }
        Ok(())
    }
}

/// Evaluated plans and their actual fitness values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    dim: usize,
    plans: Vec<PhasePlan>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Self { dim, plans: Vec::new(), targets: Vec::new() }
    }

    pub fn push(&mut self, plan: PhasePlan, target: f64) -> Result<(), SurrogateError> {
        if plan.dim() != self.dim {
            return Err(SurrogateError::DimensionMismatch { expected: self.dim, got: plan.dim() });
        }
        if !target.is_finite() {
            return Err(SurrogateError::NonFiniteTarget(target));
        }
        self.plans.push(plan);
        self.targets.push(target);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    pub fn plans(&self) -> &[PhasePlan] {
        &self.plans
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            dim: self.dim,
            plans: indices.iter().map(|&i| self.plans[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}

/// Hidden layer sizes `[1.5·dim, dim]`, rounded; 285-190 at dim 190.
pub fn default_hidden(dim: usize) -> Vec<usize> {
    alloc::vec![(dim * 3).div_ceil(2).max(1), dim.max(1)]
}

/// MLP surrogate re-initialized and trained from scratch on every call to
/// [`Surrogate::train`].
#[derive(Debug, Clone)]
pub struct MlpSurrogate {
    dims: Vec<usize>,
    bounds: DurationBounds,
    config: TrainConfig,
    model: Option<SurrogateModel>,
    trainings: u64,
    last_report: Option<TrainReport>,
}

impl MlpSurrogate {
    pub fn new(dim: usize, hidden: &[usize], bounds: DurationBounds, config: TrainConfig) -> Self {
        let mut dims = alloc::vec![dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        Self { dims, bounds, config, model: None, trainings: 0, last_report: None }
    }

    pub fn model(&self) -> Option<&SurrogateModel> {
        self.model.as_ref()
    }

    pub fn trainings(&self) -> u64 {
        self.trainings
    }

    pub fn last_report(&self) -> Option<&TrainReport> {
        self.last_report.as_ref()
    }
}

impl Surrogate for MlpSurrogate {
    type Error = SurrogateError;

    fn train(&mut self, data: &Dataset) -> Result<(), SurrogateError> {
        let init_seed = crate::derive_seed(self.config.seed, 2 * self.trainings);
        let shuffle_seed = crate::derive_seed(self.config.seed, 2 * self.trainings + 1);
        let fresh = init_model(&self.dims, init_seed)?
            .with_input_range(f64::from(self.bounds.min), f64::from(self.bounds.max));
        let (model, report) = train(&fresh, data, &TrainConfig { seed: shuffle_seed, ..self.config })?;
        self.model = Some(model);
        self.last_report = Some(report);
        self.trainings += 1;
        Ok(())
    }

    fn predict(&self, plan: &PhasePlan) -> Result<f64, SurrogateError> {
        self.model.as_ref().ok_or(SurrogateError::NotTrained)?.forward(&plan.to_features())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_sizes_follow_dimension() {
        assert_eq!(default_hidden(190), alloc::vec![285, 190]);
        assert_eq!(default_hidden(36), alloc::vec![54, 36]);
    }

    #[test]
    fn dataset_rejects_bad_rows() {
        let mut d = Dataset::new(2);
        assert!(d.push(PhasePlan(alloc::vec![5, 6]), 1.0).is_ok());
        assert!(d.push(PhasePlan(alloc::vec![5]), 1.0).is_err());
        assert!(d.push(PhasePlan(alloc::vec![5, 6]), f64::NAN).is_err());
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { epochs: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn constant_targets_are_rejected() {
        let mut d = Dataset::new(1);
        for k in 0..4 {
            d.push(PhasePlan(alloc::vec![5 + k]), 2.0).unwrap();
        }
        let m = init_model(&[1, 2, 1], 0).unwrap();
        assert_eq!(train(&m, &d, &TrainConfig::default()).unwrap_err(), SurrogateError::DegenerateTargets);
    }

    #[test]
    fn untrained_surrogate_refuses_to_predict() {
        let s = MlpSurrogate::new(2, &[3], DurationBounds { min: 5, max: 60 }, TrainConfig::default());
        assert_eq!(s.predict(&PhasePlan(alloc::vec![5, 5])), Err(SurrogateError::NotTrained));
    }
}
