//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use surropt_core::energy::{ComponentTag, Profiler};
use surropt_core::surrogate::{Dataset, SurrogateError, SurrogateModel};
use surropt_core::swarm::{Objective, Surrogate};
use surropt_core::traffic::{DurationBounds, PhasePlan, TrafficError, TrafficMetrics, TrafficScenario};
use surropt_core::Variant;

#[derive(Clone, Copy, PartialEq)]
enum State {
    Waiting { ready_at: u32 },
    Queued { stamp: u64 },
    Arrived,
}

/// Straight-line, single-file version of the queue model: every vehicle is a
/// small state machine and every step scans all of them.
pub fn reference_simulate(s: &TrafficScenario, plan: &PhasePlan) -> TrafficMetrics {
    let d = plan.durations();
    let fs = s.phases;
    let phase_at = |i: usize, t: u32| {
        let cycle: u32 = d[i * fs..(i + 1) * fs].iter().sum();
        let mut offset = t % cycle;
        for j in 0..fs {
            if offset < d[i * fs + j] {
                return j;
            }
            offset -= d[i * fs + j];
        }
        unreachable!()
    };

    let mut state: Vec<State> = s.vehicles.iter().map(|v| State::Waiting { ready_at: v.departure_s }).collect();
    let mut hop = vec![0usize; s.vehicles.len()];
    let mut next_stamp = 0u64;
    let mut m = TrafficMetrics::default();

    for t in 0..s.horizon_s {
        let mut joining: Vec<(u32, usize)> = state
            .iter()
            .enumerate()
            .filter_map(|(v, st)| match *st {
                State::Waiting { ready_at } if ready_at <= t => Some((ready_at, v)),
                _ => None,
            })
            .collect();
        joining.sort();
        for (_, v) in joining {
            state[v] = State::Queued { stamp: next_stamp };
            next_stamp += 1;
        }

        let mut leaving = Vec::new();
        for i in 0..s.intersections {
            let mask = s.green_mask[i * fs + phase_at(i, t)];
            for a in 0..4 {
                if mask & (1 << a) == 0 {
                    continue;
                }
                let mut here: Vec<(u64, usize)> = state
                    .iter()
                    .enumerate()
                    .filter_map(|(v, st)| match *st {
                        State::Queued { stamp }
                            if s.vehicles[v].route[hop[v]] == i && s.vehicles[v].approaches[hop[v]].index() == a =>
                        {
                            Some((stamp, v))
                        }
                        _ => None,
                    })
                    .collect();
                here.sort();
                leaving.extend(here.into_iter().take(s.saturation_flow as usize).map(|(_, v)| v));
            }
        }
        for v in leaving {
            hop[v] += 1;
            if hop[v] == s.vehicles[v].route.len() {
                state[v] = State::Arrived;
                m.arrived += 1;
                m.total_travel_time_s += u64::from(t + 1 - s.vehicles[v].departure_s);
            } else {
                state[v] = State::Waiting { ready_at: t + s.link_travel_time_s };
            }
        }
        m.total_stopped_time_s += state.iter().filter(|st| matches!(st, State::Queued { .. })).count() as u64;
    }
    m.not_arrived = s.vehicles.len() as u32 - m.arrived;
    m
}

/// Evaluation counts `(actual, predicted, trainings)` from a literal walk
/// through the optimization loop with the fitness values abstracted away.
pub fn interpret_counts(
    variant: Variant,
    n: u64,
    max_fe: u64,
    n_train: u64,
    n_reeval: u64,
) -> (u64, u64, u64) {
    let surrogate = variant != Variant::Plain;
    let retrain = matches!(variant, Variant::RetrainSmall | Variant::RetrainLarge);
    let mut actual = 0;
    let mut predicted = 0;
    let mut trainings = 0;
    let mut stored = 0;
    let mut trained = false;

    // initial swarm
    for _ in 0..n {
        actual += 1;
        if surrogate {
            stored += 1;
        }
    }
    let mut fe = n;
    while fe < max_fe {
        if surrogate && stored >= n_train && (!trained || retrain) {
            trainings += 1;
            trained = true;
        }
        for _ in 0..n {
            if trained {
                predicted += 1;
            } else {
                actual += 1;
                if surrogate {
                    stored += 1;
                }
            }
            fe += 1;
        }
        if trained && retrain {
            for _ in 0..n_reeval {
                actual += 1;
                stored += 1;
            }
        }
    }
    if surrogate && !retrain {
        actual += 1;
    }
    (actual, predicted, trainings)
}

/// Cheap objective: sum of durations, counting calls.
pub struct SumObjective {
    pub dim: usize,
    pub bounds: DurationBounds,
    pub calls: std::cell::Cell<u64>,
}

impl SumObjective {
    pub fn new(dim: usize) -> Self {
        Self { dim, bounds: DurationBounds { min: 5, max: 60 }, calls: std::cell::Cell::new(0) }
    }
}

impl Objective for SumObjective {
    type Error = TrafficError;

    fn dim(&self) -> usize {
        self.dim
    }

    fn bounds(&self) -> DurationBounds {
        self.bounds
    }

    fn evaluate(&self, plan: &PhasePlan) -> Result<f64, TrafficError> {
        self.calls.set(self.calls.get() + 1);
        Ok(plan.durations().iter().map(|&d| f64::from(d)).sum())
    }
}

/// Surrogate that predicts the sum of durations plus a constant, counting calls.
#[derive(Default)]
pub struct StubSurrogate {
    pub trainings: u64,
    pub predictions: std::cell::Cell<u64>,
}

impl Surrogate for StubSurrogate {
    type Error = SurrogateError;

    fn train(&mut self, data: &Dataset) -> Result<(), SurrogateError> {
        if data.is_empty() {
            return Err(SurrogateError::EmptyDataset);
        }
        self.trainings += 1;
        Ok(())
    }

    fn predict(&self, plan: &PhasePlan) -> Result<f64, SurrogateError> {
        self.predictions.set(self.predictions.get() + 1);
        Ok(plan.durations().iter().map(|&d| f64::from(d)).sum::<f64>() + 0.5)
    }
}

/// Forward pass written out longhand, returning the output and the sign
/// pattern of every hidden unit.
pub fn reference_forward(model: &SurrogateModel, x: &[f64]) -> (f64, Vec<bool>) {
    let mut a: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let span = model.input_max[k] - model.input_min[k];
            if span > 0.0 {
                (v - model.input_min[k]) / span
            } else {
                0.0
            }
        })
        .collect();
    let mut pattern = Vec::new();
    let last = model.layers.len() - 1;
    for (l, layer) in model.layers.iter().enumerate() {
        let mut z = vec![0.0; layer.outputs];
        for o in 0..layer.outputs {
            let mut acc = layer.biases[o];
            for i in 0..layer.inputs {
                acc += layer.weights[o * layer.inputs + i] * a[i];
            }
            z[o] = acc;
        }
        if l < last {
            pattern.extend(z.iter().map(|&v| v > 0.0));
            a = z.into_iter().map(|v| v.max(0.0)).collect();
        } else {
            a = z;
        }
    }
    (a[0] * model.output_std + model.output_mean, pattern)
}

/// Ordinary least squares with intercept via the normal equations, solved by
/// Gaussian elimination with partial pivoting. Returns `[intercept, coefs...]`.
pub fn least_squares(xs: &[Vec<f64>], ys: &[f64]) -> Vec<f64> {
    let p = xs[0].len() + 1;
    let mut a = vec![vec![0.0; p + 1]; p];
    for (x, &y) in xs.iter().zip(ys) {
        let row: Vec<f64> = std::iter::once(1.0).chain(x.iter().copied()).collect();
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * y;
        }
    }
    for c in 0..p {
        let pivot = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, pivot);
        for r in 0..p {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=p {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    (0..p).map(|i| a[i][p] / a[i][i]).collect()
}

/// Profiler that records the sequence of tags it sees.
#[derive(Default)]
pub struct TraceProfiler {
    pub tags: Vec<(ComponentTag, u64)>,
    totals: surropt_core::ComponentTotals,
}

impl Profiler for TraceProfiler {
    fn scope<R>(&mut self, tag: ComponentTag, work: u64, action: impl FnOnce() -> R) -> Result<R, surropt_core::EnergyError> {
        self.tags.push((tag, work));
        Ok(action())
    }

    fn totals(&self) -> &surropt_core::ComponentTotals {
        &self.totals
    }
}
