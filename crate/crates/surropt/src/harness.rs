//! Desk-scale experiments: cost of one evaluation, surrogate accuracy and
//! cost against training-set size, and full optimization runs per variant.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surropt_core::energy::{aggregate, measure, measure_work, ComponentProfiler, EnergyBackend, MeanStd, ReportLine};
use surropt_core::stats::median;
use surropt_core::surrogate::{mape, r_squared, SurrogateError};
use surropt_core::swarm::{run, NoSurrogate, RunError, Surrogate};
use surropt_core::traffic::TrafficError;
use surropt_core::{
    build_scenario, derive_seed, ComponentTag, Dataset, DurationBounds, EnergyError, MlpSurrogate, PhasePlan,
    RunResult, SurrogateModel, TrafficObjective, TrainConfig, Variant,
};

use crate::config::{Config, ConfigError};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Precondition(String),
    #[error("archive has {have} rows but the sweep needs {need}")]
    ArchiveTooSmall { have: usize, need: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("traffic: {0}")]
    Traffic(#[from] TrafficError),
    #[error("energy: {0}")]
    Energy(#[from] EnergyError),
    #[error("surrogate: {0}")]
    Surrogate(#[from] SurrogateError),
    #[error("{0}")]
    Run(#[from] RunError),
}

// seed streams below the experiment seed
const EVAL_COST_STREAM: u64 = 0xE0;
const ARCHIVE_STREAM: u64 = 0xA0;
const SPLIT_STREAM: u64 = 0x50;
const SWEEP_TRAIN_STREAM: u64 = 0x51;
const RUN_TRAIN_STREAM: u64 = 1;

pub fn objective_for(config: &Config) -> Result<TrafficObjective, HarnessError> {
    Ok(TrafficObjective::new(build_scenario(&config.scenario)?)?)
}

pub fn random_plan<R: Rng>(dim: usize, bounds: DurationBounds, rng: &mut R) -> PhasePlan {
    PhasePlan((0..dim).map(|_| rng.gen_range(bounds.min..=bounds.max)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalCost {
    pub samples: usize,
    pub cpu_j: MeanStd,
    pub dram_j: MeanStd,
    pub seconds: MeanStd,
}

/// Measures `n_samples` evaluations of random in-bounds plans, one scope each.
pub fn experiment_eval_cost<B: EnergyBackend>(
    objective: &TrafficObjective,
    backend: &B,
    n_samples: usize,
    seed: u64,
) -> Result<EvalCost, HarnessError> {
    if n_samples < 2 {
        return Err(HarnessError::Precondition(format!("eval cost needs at least 2 samples, got {n_samples}")));
    }
    let scenario = objective.scenario();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, EVAL_COST_STREAM));
    let (mut cpu, mut dram, mut secs) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n_samples {
        let plan = random_plan(scenario.dim(), scenario.bounds, &mut rng);
        let (fitness, p) = measure(backend, ComponentTag::Evaluation, || objective.evaluate(&plan))?;
        fitness?;
        cpu.push(p.cpu_j);
        dram.push(p.dram_j);
        secs.push(p.seconds);
    }
    Ok(EvalCost { samples: n_samples, cpu_j: MeanStd::of(&cpu), dram_j: MeanStd::of(&dram), seconds: MeanStd::of(&secs) })
}

/// `rows` random plans with their actual fitness.
pub fn build_archive(objective: &TrafficObjective, rows: usize, seed: u64) -> Result<Dataset, HarnessError> {
    let scenario = objective.scenario();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, ARCHIVE_STREAM));
    let mut data = Dataset::new(scenario.dim());
    for _ in 0..rows {
        let plan = random_plan(scenario.dim(), scenario.bounds, &mut rng);
        let f = objective.evaluate(&plan)?;
        data.push(plan, f)?;
    }
    Ok(data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub test_rows: usize,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub bounds: DurationBounds,
    pub seed: u64,
}

impl SweepSettings {
    pub fn from_config(config: &Config) -> Self {
        let e = &config.experiment;
        let dim = config.scenario.rows * config.scenario.cols * config.scenario.phases;
        Self {
            sizes: e.sweep_sizes.clone(),
            repeats: e.sweep_repeats,
            test_rows: e.sweep_test_rows,
            hidden: config.surrogate.hidden_for(dim),
            train: config.surrogate.train_config(0),
            bounds: DurationBounds { min: config.scenario.d_min, max: config.scenario.d_max },
            seed: e.seed,
        }
    }

    pub fn archive_rows(&self) -> usize {
        self.sizes.iter().max().copied().unwrap_or(0) + self.test_rows
    }
}

/// Per-size results; training costs are per training, prediction costs are
/// per single prediction, one entry per repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub size: usize,
    pub train_cpu_j: Vec<f64>,
    pub train_dram_j: Vec<f64>,
    pub train_s: Vec<f64>,
    pub pred_cpu_j: Vec<f64>,
    pub pred_dram_j: Vec<f64>,
    pub pred_s: Vec<f64>,
    pub mape: Vec<f64>,
    pub r2: Vec<f64>,
}

impl SweepRow {
    pub fn median_mape(&self) -> f64 {
        median(&self.mape)
    }

    pub fn median_r2(&self) -> f64 {
        median(&self.r2)
    }
}

/// For each repeat the archive is shuffled once; the first `test_rows` rows
/// are the test set and each size trains on the next `size` rows, so sizes
/// within a repeat share the test set and their training sets are nested.
pub fn experiment_surrogate_sweep<B: EnergyBackend>(
    archive: &Dataset,
    settings: &SweepSettings,
    backend: &B,
) -> Result<Vec<SweepRow>, HarnessError> {
    if settings.sizes.is_empty() || settings.repeats == 0 {
        return Err(HarnessError::Precondition("sweep needs at least one size and one repeat".into()));
    }
    let need = settings.archive_rows();
    if archive.len() < need {
        return Err(HarnessError::ArchiveTooSmall { have: archive.len(), need });
    }
    let mut rows: Vec<SweepRow> = settings
        .sizes
        .iter()
        .map(|&size| SweepRow {
            size,
            train_cpu_j: vec![],
            train_dram_j: vec![],
            train_s: vec![],
            pred_cpu_j: vec![],
            pred_dram_j: vec![],
            pred_s: vec![],
            mape: vec![],
            r2: vec![],
        })
        .collect();

    for r in 0..settings.repeats as u64 {
        let mut order: Vec<usize> = (0..archive.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(settings.seed, SPLIT_STREAM), r)));
        let test = archive.subset(&order[..settings.test_rows]);
        let train_seed = derive_seed(derive_seed(settings.seed, SWEEP_TRAIN_STREAM), r);

        for row in &mut rows {
            let train = archive.subset(&order[settings.test_rows..settings.test_rows + row.size]);
            let mut sur = MlpSurrogate::new(
                archive.dim(),
                &settings.hidden,
                settings.bounds,
                TrainConfig { seed: train_seed, ..settings.train },
            );
            let (trained, cost) = measure_work(backend, ComponentTag::Training, row.size as u64, || sur.train(&train))?;
            trained?;
            row.train_cpu_j.push(cost.cpu_j);
            row.train_dram_j.push(cost.dram_j);
            row.train_s.push(cost.seconds);

            let mut predicted = Vec::with_capacity(test.len());
            let (mut cpu, mut dram, mut secs) = (0.0, 0.0, 0.0);
            for plan in test.plans() {
                let (y, cost) = measure(backend, ComponentTag::Prediction, || sur.predict(plan))?;
                predicted.push(y?);
                cpu += cost.cpu_j;
                dram += cost.dram_j;
                secs += cost.seconds;
            }
            let n = test.len() as f64;
            row.pred_cpu_j.push(cpu / n);
            row.pred_dram_j.push(dram / n);
            row.pred_s.push(secs / n);
            row.mape.push(mape(test.targets(), &predicted)?);
            row.r2.push(r_squared(test.targets(), &predicted)?);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterPoint {
    pub fe: u64,
    pub actual: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantRun {
    /// Run result with its prediction log already consumed into `scatter`.
    pub result: RunResult,
    pub scatter: Vec<ScatterPoint>,
    /// Surrogate as last trained.
    pub model: Option<SurrogateModel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantResults {
    pub variant: Variant,
    pub runs: Vec<VariantRun>,
}

impl VariantResults {
    pub fn report(&self) -> Vec<ReportLine> {
        let totals: Vec<_> = self.runs.iter().map(|r| r.result.components).collect();
        aggregate(&totals)
    }
}

/// Indices of at most `k` items out of `len`, one from the middle of each of
/// `k` equal strata.
pub fn stratified_indices(len: usize, k: usize) -> Vec<usize> {
    if len <= k {
        return (0..len).collect();
    }
    (0..k).map(|i| (2 * i + 1) * len / (2 * k)).collect()
}

fn profiled<S: Surrogate>(
    config: &Config,
    objective: &TrafficObjective,
    surrogate: &mut S,
    variant: Variant,
    seed: u64,
) -> Result<RunResult, HarnessError> {
    let mut cfg = config.pso.pso_config(variant, seed);
    cfg.record_predictions = variant.uses_surrogate();
    let mut profiler = ComponentProfiler::new(config.energy.make_backend()?);
    Ok(run(&cfg, objective, surrogate, &mut profiler)?)
}

/// One run of `variant`. Surrogate runs then re-evaluate a stratified
/// sample of their predicted plans with the simulator, outside any scope.
pub fn run_variant(
    config: &Config,
    objective: &TrafficObjective,
    variant: Variant,
    seed: u64,
) -> Result<VariantRun, HarnessError> {
    if !variant.uses_surrogate() {
        let result = profiled(config, objective, &mut NoSurrogate, variant, seed)?;
        return Ok(VariantRun { result, scatter: vec![], model: None });
    }
    let scenario = objective.scenario();
    let mut sur = MlpSurrogate::new(
        scenario.dim(),
        &config.surrogate.hidden_for(scenario.dim()),
        scenario.bounds,
        config.surrogate.train_config(derive_seed(seed, RUN_TRAIN_STREAM)),
    );
    let mut result = profiled(config, objective, &mut sur, variant, seed)?;
    let predictions = std::mem::take(&mut result.predictions);
    let mut scatter = Vec::new();
    for i in stratified_indices(predictions.len(), config.experiment.scatter_samples) {
        let p = &predictions[i];
        scatter.push(ScatterPoint { fe: p.fe, actual: objective.evaluate(&p.plan)?, predicted: p.predicted });
    }
    Ok(VariantRun { result, scatter, model: sur.model().cloned() })
}

/// Runs every variant with seeds `seed, seed + 1, ..`, sequentially: the
/// measurement scope is process-wide.
pub fn experiment_variants(
    config: &Config,
    objective: &TrafficObjective,
    variants: &[Variant],
    seed: u64,
    runs: usize,
) -> Result<Vec<VariantResults>, HarnessError> {
    if runs == 0 {
        return Err(HarnessError::Precondition("at least one run per variant is needed".into()));
    }
    variants
        .iter()
        .map(|&variant| {
            let runs = (0..runs as u64)
                .map(|k| run_variant(config, objective, variant, seed.wrapping_add(k)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(VariantResults { variant, runs })
        })
        .collect()
}

/// Everything one invocation produced; each part is optional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentResults {
    pub eval_cost: Option<EvalCost>,
    pub sweep: Option<Vec<SweepRow>>,
    pub variants: Vec<VariantResults>,
}

impl ExperimentResults {
    pub fn is_empty(&self) -> bool {
        self.eval_cost.is_none() && self.sweep.is_none() && self.variants.iter().all(|v| v.runs.is_empty())
    }
}

pub fn eval_cost_for(config: &Config, objective: &TrafficObjective) -> Result<EvalCost, HarnessError> {
    let backend = config.energy.make_backend()?;
    experiment_eval_cost(objective, &backend, config.experiment.eval_samples, config.experiment.seed)
}

pub fn sweep_for(config: &Config, objective: &TrafficObjective) -> Result<Vec<SweepRow>, HarnessError> {
    let settings = SweepSettings::from_config(config);
    let archive = build_archive(objective, settings.archive_rows(), settings.seed)?;
    let backend = config.energy.make_backend()?;
    experiment_surrogate_sweep(&archive, &settings, &backend)
}

/// Evaluation cost, surrogate sweep and every configured variant.
pub fn experiment_all(config: &Config) -> Result<ExperimentResults, HarnessError> {
    let objective = objective_for(config)?;
    let variants = config.experiment.variants()?;
    Ok(ExperimentResults {
        eval_cost: Some(eval_cost_for(config, &objective)?),
        sweep: Some(sweep_for(config, &objective)?),
        variants: experiment_variants(config, &objective, &variants, config.experiment.seed, config.experiment.runs)?,
    })
}
