//! JSON configuration: scenario, swarm, surrogate, experiment and energy
//! sections. Every key is optional; missing keys take the defaults below.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use surropt_core::energy::{EnergyBackend, EnergyError, EnergySample, FallbackBackend, VirtualClock};
use surropt_core::surrogate::{default_hidden, TrainConfig};
use surropt_core::swarm::{PsoConfig, Variant};
use surropt_core::traffic::GridSpec;

use crate::rapl::{PowercapBackend, WallClock, POWERCAP_ROOT};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("config error: `{key}` {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scenario: GridSpec,
    pub pso: PsoSection,
    pub surrogate: SurrogateSection,
    pub experiment: ExperimentSection,
    pub energy: EnergySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoSection {
    pub swarm_size: usize,
    pub max_fitness_evals: u64,
    pub phi1: f64,
    pub phi2: f64,
    pub lambda: f64,
    pub w_max: f64,
    pub w_min: f64,
    /// Training-set threshold for `ps` and `rs`.
    pub n_train_small: usize,
    /// Training-set threshold for `pl` and `rl`.
    pub n_train_large: usize,
    pub n_reeval: usize,
}

impl Default for PsoSection {
    fn default() -> Self {
        let d = PsoConfig::default();
        Self {
            swarm_size: d.swarm_size,
            max_fitness_evals: d.max_fitness_evals,
            phi1: d.phi1,
            phi2: d.phi2,
            lambda: d.lambda,
            w_max: d.w_max,
            w_min: d.w_min,
            n_train_small: 20,
            n_train_large: 400,
            n_reeval: d.n_reeval,
        }
    }
}

impl PsoSection {
    pub fn pso_config(&self, variant: Variant, seed: u64) -> PsoConfig {
        PsoConfig {
            swarm_size: self.swarm_size,
            max_fitness_evals: self.max_fitness_evals,
            phi1: self.phi1,
            phi2: self.phi2,
            lambda: self.lambda,
            w_max: self.w_max,
            w_min: self.w_min,
            n_train: if variant.large_training_set() { self.n_train_large } else { self.n_train_small },
            n_reeval: self.n_reeval,
            variant,
            seed,
            record_predictions: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSection {
    /// Hidden layer sizes; `null` picks `[ceil(1.5·dim), dim]`.
    pub hidden: Option<Vec<usize>>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            hidden: None,
            epochs: d.epochs,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            beta1: d.beta1,
            beta2: d.beta2,
            epsilon: d.epsilon,
        }
    }
}

impl SurrogateSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            seed,
        }
    }

    pub fn hidden_for(&self, dim: usize) -> Vec<usize> {
        self.hidden.clone().unwrap_or_else(|| default_hidden(dim))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Run `k` uses seed `seed + k`.
    pub seed: u64,
    pub runs: usize,
    /// Short names among plain, ps, pl, rs, rl.
    pub variants: Vec<String>,
    pub eval_samples: usize,
    pub sweep_sizes: Vec<usize>,
    pub sweep_repeats: usize,
    pub sweep_test_rows: usize,
    pub scatter_samples: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            seed: 1,
            runs: 5,
            variants: Variant::ALL.iter().map(|v| v.short_name().to_string()).collect(),
            eval_samples: 20,
            sweep_sizes: vec![128, 512, 2048],
            sweep_repeats: 5,
            sweep_test_rows: 100,
            scatter_samples: 200,
        }
    }
}

impl ExperimentSection {
    pub fn variants(&self) -> Result<Vec<Variant>, ConfigError> {
        self.variants
            .iter()
            .map(|name| {
                Variant::from_short_name(name)
                    .ok_or_else(|| invalid("experiment.variants", format!("unknown variant {name:?}")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Rapl,
    Fallback,
}

/// Time base of the fallback backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockKind {
    /// Virtual clock charged with reference per-call costs; reproducible.
    Model,
    /// Elapsed wall time.
    Wall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergySection {
    pub backend: BackendKind,
    pub cpu_w: f64,
    pub dram_w: f64,
    pub clock: ClockKind,
    pub powercap_root: PathBuf,
}

impl Default for EnergySection {
    fn default() -> Self {
        Self {
            backend: BackendKind::Fallback,
            cpu_w: 50.0,
            dram_w: 2.6,
            clock: ClockKind::Model,
            powercap_root: PathBuf::from(POWERCAP_ROOT),
        }
    }
}

/// Energy backend selected by configuration.
#[derive(Debug)]
pub enum Backend {
    Rapl(PowercapBackend),
    Modeled(FallbackBackend<Arc<VirtualClock>>),
    Wall(FallbackBackend<WallClock>),
}

impl EnergyBackend for Backend {
    fn read(&self) -> Result<EnergySample, EnergyError> {
        match self {
            Backend::Rapl(b) => b.read(),
            Backend::Modeled(b) => b.read(),
            Backend::Wall(b) => b.read(),
        }
    }

    fn charge(&self, tag: surropt_core::ComponentTag, work: u64) {
        match self {
            Backend::Rapl(b) => b.charge(tag, work),
            Backend::Modeled(b) => b.charge(tag, work),
            Backend::Wall(b) => b.charge(tag, work),
        }
    }
}

impl EnergySection {
    /// Applies `SURROPT_ENERGY_BACKEND`, `SURROPT_FALLBACK_CPU_W`,
    /// `SURROPT_FALLBACK_DRAM_W` and `SURROPT_FALLBACK_CLOCK`.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = var("SURROPT_ENERGY_BACKEND") {
            self.backend = match v.as_str() {
                "rapl" => BackendKind::Rapl,
                "fallback" => BackendKind::Fallback,
                _ => return Err(invalid("SURROPT_ENERGY_BACKEND", "must be rapl or fallback")),
            };
        }
        for (name, slot) in [("SURROPT_FALLBACK_CPU_W", &mut self.cpu_w), ("SURROPT_FALLBACK_DRAM_W", &mut self.dram_w)] {
            if let Some(v) = var(name) {
                *slot = v.trim().parse().map_err(|_| invalid(name, "must be a number of watts"))?;
            }
        }
        if let Some(v) = var("SURROPT_FALLBACK_CLOCK") {
            self.clock = match v.as_str() {
                "model" => ClockKind::Model,
                "wall" => ClockKind::Wall,
                _ => return Err(invalid("SURROPT_FALLBACK_CLOCK", "must be model or wall")),
            };
        }
        Ok(())
    }

    /// A fresh backend; the modeled clock starts at zero each time.
    pub fn make_backend(&self) -> Result<Backend, EnergyError> {
        Ok(match (self.backend, self.clock) {
            (BackendKind::Rapl, _) => Backend::Rapl(PowercapBackend::open(&self.powercap_root)?),
            (BackendKind::Fallback, ClockKind::Model) => Backend::Modeled(FallbackBackend::modeled(self.cpu_w, self.dram_w)),
            (BackendKind::Fallback, ClockKind::Wall) => {
                Backend::Wall(FallbackBackend::new(self.cpu_w, self.dram_w, WallClock::new()))
            }
        })
    }
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.scenario;
        for (key, value) in [
            ("scenario.rows", s.rows),
            ("scenario.cols", s.cols),
            ("scenario.vehicles", s.vehicles),
            ("scenario.horizon_s", s.horizon_s as usize),
            ("scenario.d_min", s.d_min as usize),
            ("scenario.saturation_flow", s.saturation_flow as usize),
            ("scenario.link_travel_time_s", s.link_travel_time_s as usize),
        ] {
            if value == 0 {
                return Err(invalid(key, "must be at least 1"));
            }
        }
        if s.phases < 2 {
            return Err(invalid("scenario.phases", "must be at least 2"));
        }
        if s.d_max < s.d_min {
            return Err(invalid("scenario.d_max", "must not be below d_min"));
        }

        let p = &self.pso;
        if !(0.0..=1.0).contains(&p.lambda) {
            return Err(invalid("pso.lambda", "must lie in [0, 1]"));
        }
        if p.w_min > p.w_max {
            return Err(invalid("pso.w_min", "must not exceed w_max"));
        }
        for (key, n_train) in [("pso.n_train_small", p.n_train_small), ("pso.n_train_large", p.n_train_large)] {
            if n_train < p.swarm_size {
                return Err(invalid(key, "must be at least the swarm size"));
            }
        }
        for variant in Variant::ALL {
            if let Err(surropt_core::swarm::SwarmError::InvalidConfig { key, reason }) =
                p.pso_config(variant, 0).validate()
            {
                return Err(invalid(&format!("pso.{key}"), reason));
            }
        }

        let t = &self.surrogate;
        if t.epochs == 0 {
            return Err(invalid("surrogate.epochs", "must be at least 1"));
        }
        if t.batch_size == 0 {
            return Err(invalid("surrogate.batch_size", "must be at least 1"));
        }
        if !(t.learning_rate > 0.0) {
            return Err(invalid("surrogate.learning_rate", "must be positive"));
        }
        for (key, beta) in [("surrogate.beta1", t.beta1), ("surrogate.beta2", t.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(invalid(key, "must lie in [0, 1)"));
            }
        }
        if !(t.epsilon > 0.0) {
            return Err(invalid("surrogate.epsilon", "must be positive"));
        }
        if t.hidden.as_ref().is_some_and(|h| h.contains(&0)) {
            return Err(invalid("surrogate.hidden", "layer sizes must be at least 1"));
        }

        let e = &self.experiment;
        if e.runs == 0 {
            return Err(invalid("experiment.runs", "must be at least 1"));
        }
        if e.eval_samples < 2 {
            return Err(invalid("experiment.eval_samples", "must be at least 2"));
        }
        if e.sweep_sizes.is_empty() || e.sweep_sizes.contains(&0) {
            return Err(invalid("experiment.sweep_sizes", "must list positive sizes"));
        }
        if e.sweep_repeats == 0 {
            return Err(invalid("experiment.sweep_repeats", "must be at least 1"));
        }
        if e.sweep_test_rows < 2 {
            return Err(invalid("experiment.sweep_test_rows", "must be at least 2"));
        }
        e.variants()?;

        for (key, w) in [("energy.cpu_w", self.energy.cpu_w), ("energy.dram_w", self.energy.dram_w)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(invalid(key, "must be a nonnegative number of watts"));
            }
        }
        Ok(())
    }
}

/// Parses and validates a JSON document. Parse errors carry the path of the
/// offending key.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: Config = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

/// Reads a config file (defaults when `path` is `None`) and applies the
/// energy environment overrides.
pub fn load_config(path: Option<&Path>) -> Result<Config, ConfigError> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.to_path_buf(), source })?;
            parse_config(&text)?
        }
        None => Config::default(),
    };
    config.energy.apply_env(|k| std::env::var(k).ok())?;
    config.validate()?;
    Ok(config)
}
