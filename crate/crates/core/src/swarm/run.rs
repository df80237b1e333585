use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    inertia_weight, select_retrain_candidates, truncate_velocity, update_position, update_velocity, Objective,
    PsoConfig, RunError, RunFailure, Surrogate, Variant,
};
use crate::energy::{ComponentTag, ComponentTotals, Profiler};
use crate::surrogate::Dataset;
use crate::traffic::PhasePlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitnessKind {
    Actual,
    Predicted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: PhasePlan,
    pub velocity: Vec<f64>,
    pub fitness: f64,
    pub fitness_kind: FitnessKind,
    pub best_position: PhasePlan,
    pub best_fitness: f64,
}

impl Particle {
    fn offer_personal_best(&mut self) {
        if self.fitness < self.best_fitness {
            self.best_fitness = self.fitness;
            self.best_position = self.position.clone();
        }
    }
}

/// State at the end of a generation (generation 0 is the initial swarm).
/// Energy columns are cumulative.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: u64,
    pub fe: u64,
    /// Best fitness among actual evaluations so far.
    pub best_actual_fitness: f64,
    pub actual_evals: u64,
    pub components: ComponentTotals,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    /// FE counter value when the prediction was made (before increment).
    pub fe: u64,
    pub plan: PhasePlan,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub variant: Variant,
    pub seed: u64,
    /// Plan with the best actual fitness found.
    pub best_plan: PhasePlan,
    pub best_actual_fitness: f64,
    pub history: Vec<GenerationRecord>,
    pub actual_evals: u64,
    pub predicted_evals: u64,
    pub trainings: u64,
    pub fe: u64,
    pub generations: u64,
    pub dataset_len: usize,
    pub components: ComponentTotals,
    pub predictions: Vec<PredictionRecord>,
}

/// Parts of the run state reachable from inside a profiler scope.
struct Work<'a, O, S> {
    objective: &'a O,
    surrogate: &'a mut S,
    rng: ChaCha8Rng,
    dataset: Dataset,
}

struct Runner<'a, O, S, P> {
    cfg: &'a PsoConfig,
    profiler: &'a mut P,
    w: Work<'a, O, S>,
    fe: u64,
    generation: u64,
    actual_evals: u64,
    predicted_evals: u64,
    trainings: u64,
    best_actual: Option<(PhasePlan, f64)>,
    history: Vec<GenerationRecord>,
    predictions: Vec<PredictionRecord>,
}

impl<O: Objective, S: Surrogate, P: Profiler> Runner<'_, O, S, P> {
    fn fail(&self, source: impl Into<RunFailure>) -> RunError {
        RunError { fe: self.fe, generation: self.generation, source: source.into() }
    }

    fn scope<R>(
        &mut self,
        tag: ComponentTag,
        work: u64,
        action: impl FnOnce(&mut Work<'_, O, S>) -> R,
    ) -> Result<R, RunError> {
        let w = &mut self.w;
        let result = self.profiler.scope(tag, work, || action(w));
        result.map_err(|e| self.fail(e))
    }

    fn evaluate_actual(&mut self, plan: &PhasePlan) -> Result<f64, RunError> {
        let outcome = self.scope(ComponentTag::Evaluation, 1, |r| r.objective.evaluate(plan))?;
        let fitness = outcome.map_err(|e| self.fail(RunFailure::Evaluation(Box::new(e))))?;
        self.actual_evals += 1;
        if self.best_actual.as_ref().is_none_or(|(_, best)| fitness < *best) {
            self.best_actual = Some((plan.clone(), fitness));
        }
        Ok(fitness)
    }

    fn store(&mut self, plan: &PhasePlan, fitness: f64) -> Result<(), RunError> {
        self.w.dataset.push(plan.clone(), fitness).map_err(|e| self.fail(RunFailure::Surrogate(Box::new(e))))
    }

    fn predict(&mut self, plan: &PhasePlan) -> Result<f64, RunError> {
        let outcome = self.scope(ComponentTag::Prediction, 1, |r| r.surrogate.predict(plan))?;
        let predicted = outcome.map_err(|e| self.fail(RunFailure::Surrogate(Box::new(e))))?;
        self.predicted_evals += 1;
        if self.cfg.record_predictions {
            self.predictions.push(PredictionRecord { fe: self.fe, plan: plan.clone(), predicted });
        }
        Ok(predicted)
    }

    fn train(&mut self) -> Result<(), RunError> {
        let rows = self.w.dataset.len() as u64;
        let outcome = self.scope(ComponentTag::Training, rows, |r| r.surrogate.train(&r.dataset))?;
        outcome.map_err(|e| self.fail(RunFailure::Surrogate(Box::new(e))))?;
        self.trainings += 1;
        Ok(())
    }

    fn record(&mut self) {
        self.history.push(GenerationRecord {
            generation: self.generation,
            fe: self.fe,
            best_actual_fitness: self.best_actual.as_ref().map_or(f64::INFINITY, |b| b.1),
            actual_evals: self.actual_evals,
            components: *self.profiler.totals(),
        });
    }
}

fn argmin_by(particles: &[Particle], key: impl Fn(&Particle) -> f64) -> usize {
    let mut best = 0;
    for (i, p) in particles.iter().enumerate().skip(1) {
        if key(p) < key(&particles[best]) {
            best = i;
        }
    }
    best
}

/// Runs one optimization according to `cfg.variant`.
///
/// FE counts one per particle per generation whether the fitness was actual
/// or predicted; the per-generation re-evaluations of the retraining
/// variants and the closing evaluation of the pre-training variants do not
/// advance it. Every phase is executed inside a profiler scope.
pub fn run<O, S, P>(cfg: &PsoConfig, objective: &O, surrogate: &mut S, profiler: &mut P) -> Result<RunResult, RunError>
where
    O: Objective,
    S: Surrogate,
    P: Profiler,
{
    let config_error = |e| RunError { fe: 0, generation: 0, source: RunFailure::Swarm(e) };
    cfg.validate().map_err(config_error)?;
    let bounds = objective.bounds();
    let dim = objective.dim();
    let n = cfg.swarm_size;
    let uses_surrogate = cfg.variant.uses_surrogate();
    let retraining = cfg.variant.retrains();
    let g_total = cfg.total_generations();
    let v_max = PsoConfig::velocity_limit(bounds);

    let mut r = Runner {
        cfg,
        profiler,
        w: Work { objective, surrogate, rng: ChaCha8Rng::seed_from_u64(cfg.seed), dataset: Dataset::new(dim) },
        fe: 0,
        generation: 0,
        actual_evals: 0,
        predicted_evals: 0,
        trainings: 0,
        best_actual: None,
        history: Vec::new(),
        predictions: Vec::new(),
    };

    let positions: Vec<PhasePlan> = r.scope(ComponentTag::Initialization, 1, |r| {
        (0..n)
            .map(|_| PhasePlan((0..dim).map(|_| r.rng.gen_range(bounds.min..=bounds.max)).collect()))
            .collect()
    })?;
    let mut fitness = Vec::with_capacity(n);
    for plan in &positions {
        let f = r.evaluate_actual(plan)?;
        if uses_surrogate {
            r.store(plan, f)?;
        }
        fitness.push(f);
    }
    let mut particles: Vec<Particle> = r.scope(ComponentTag::Initialization, 0, |_| {
        positions
            .into_iter()
            .zip(fitness)
            .map(|(position, f)| Particle {
                best_position: position.clone(),
                position,
                velocity: alloc::vec![0.0; dim],
                fitness: f,
                fitness_kind: FitnessKind::Actual,
                best_fitness: f,
            })
            .collect()
    })?;
    let mut global_best = {
        let i = argmin_by(&particles, |p| p.best_fitness);
        (particles[i].best_position.clone(), particles[i].best_fitness)
    };
    r.fe = n as u64;
    let mut trained = false;
    r.record();

    while r.fe < cfg.max_fitness_evals {
        if uses_surrogate && r.w.dataset.len() >= cfg.n_train && (!trained || retraining) {
            r.train()?;
            trained = true;
        }
        let w = inertia_weight(r.generation.min(g_total), g_total, cfg.w_max, cfg.w_min).map_err(|e| r.fail(e))?;
        let mut predictions: Vec<Option<f64>> = alloc::vec![None; n];

        for (i, particle) in particles.iter_mut().enumerate() {
            let moved = r.scope(ComponentTag::Update, 1, |r| {
                let v = update_velocity(particle, &global_best.0, w, cfg, v_max, &mut r.rng)?;
                let v_int = truncate_velocity(&v, cfg.lambda, &mut r.rng);
                let x = update_position(&particle.position, &v_int, bounds)?;
                particle.velocity = v_int.iter().map(|&k| k as f64).collect();
                particle.position = x;
                Ok::<_, super::SwarmError>(())
            })?;
            moved.map_err(|e| r.fail(e))?;

            if trained {
                let f = r.predict(&particle.position)?;
                particle.fitness = f;
                particle.fitness_kind = FitnessKind::Predicted;
                predictions[i] = Some(f);
            } else {
                let f = r.evaluate_actual(&particle.position)?;
                if uses_surrogate {
                    r.store(&particle.position, f)?;
                }
                particle.fitness = f;
                particle.fitness_kind = FitnessKind::Actual;
            }
            particle.offer_personal_best();
            r.fe += 1;
        }

        if trained && retraining {
            let chosen = r
                .scope(ComponentTag::Update, 0, |_| select_retrain_candidates(&predictions, cfg.n_reeval))?
                .map_err(|e| r.fail(e))?;
            for i in chosen {
                let plan = particles[i].position.clone();
                let f = r.evaluate_actual(&plan)?;
                r.store(&plan, f)?;
                let p = &mut particles[i];
                p.fitness = f;
                p.fitness_kind = FitnessKind::Actual;
                p.offer_personal_best();
            }
        }

        global_best = r.scope(ComponentTag::Update, 0, |_| {
            let i = argmin_by(&particles, |p| p.best_fitness);
            (particles[i].best_position.clone(), particles[i].best_fitness)
        })?;
        r.generation += 1;
        r.record();
    }

    if uses_surrogate && !retraining {
        let i = argmin_by(&particles, |p| p.fitness);
        let plan = particles[i].position.clone();
        let f = r.evaluate_actual(&plan)?;
        particles[i].fitness = f;
        particles[i].fitness_kind = FitnessKind::Actual;
        // the closing evaluation belongs to the last generation's row
        r.history.pop();
        r.record();
    }

    let (best_plan, best_actual_fitness) = r.best_actual.clone().expect("initial swarm is evaluated");
    Ok(RunResult {
        variant: cfg.variant,
        seed: cfg.seed,
        best_plan,
        best_actual_fitness,
        history: r.history,
        actual_evals: r.actual_evals,
        predicted_evals: r.predicted_evals,
        trainings: r.trainings,
        fe: r.fe,
        generations: r.generation,
        dataset_len: r.w.dataset.len(),
        components: *r.profiler.totals(),
        predictions: r.predictions,
    })
}
