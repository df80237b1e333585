//! Signalized-grid traffic model and the scalar signal-timing objective.
//!
//! A [`TrafficScenario`] describes intersections, their phase states and a
//! fixed vehicle demand. A [`PhasePlan`] assigns an integer green duration to
//! every (intersection, phase) pair. [`simulate`] runs the deterministic
//! queue model and [`TrafficObjective`] folds the resulting
//! [`TrafficMetrics`] and the green/red phase ratio into one fitness value,
//! lower being better.

mod scenario;
mod sim;

use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

pub use scenario::{build_scenario, GridSpec};
pub use sim::simulate;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrafficError {
    #[error("invalid scenario spec: {0}")]
    InvalidSpec(&'static str),
    #[error("invalid scenario: {0}")]
    InvalidScenario(&'static str),
    #[error("plan has {got} durations, scenario expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("duration {value} at index {index} outside [{min}, {max}]")]
    OutOfBounds { index: usize, value: u32, min: u32, max: u32 },
    #[error("phase state {index} (intersection-major) has no red signal")]
    ZeroRed { index: usize },
    #[error("no vehicle arrived and the phase ratio is zero; fitness is undefined")]
    DegenerateDenominator,
}

/// Inclusive range of admissible phase durations, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DurationBounds {
    pub min: u32,
    pub max: u32,
}

impl DurationBounds {
    pub fn new(min: u32, max: u32) -> Result<Self, TrafficError> {
        if min < 1 {
            return Err(TrafficError::InvalidSpec("d_min must be at least 1"));
        }
        if max < min {
            return Err(TrafficError::InvalidSpec("d_max must not be below d_min"));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, value: u32) -> bool {
        (self.min..=self.max).contains(&value)
    }

    pub fn clamp(&self, value: i64) -> u32 {
        value.clamp(i64::from(self.min), i64::from(self.max)) as u32
    }

    pub fn width(&self) -> u32 {
        self.max - self.min
    }
}

/// Integer phase durations, flattened intersection-major: index `i * fs + j`
/// is phase `j` of intersection `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct PhasePlan(pub Vec<u32>);

impl PhasePlan {
    pub fn uniform(dim: usize, duration: u32) -> Self {
        Self(alloc::vec![duration; dim])
    }

    pub fn durations(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Durations as reals, the surrogate's input encoding.
    pub fn to_features(&self) -> Vec<f64> {
        self.0.iter().map(|&d| f64::from(d)).collect()
    }

    pub fn check(&self, dim: usize, bounds: DurationBounds) -> Result<(), TrafficError> {
        if self.0.len() != dim {
            return Err(TrafficError::DimensionMismatch { expected: dim, got: self.0.len() });
        }
        for (index, &value) in self.0.iter().enumerate() {
            if !bounds.contains(value) {
                return Err(TrafficError::OutOfBounds {
                    index,
                    value,
                    min: bounds.min,
                    max: bounds.max,
                });
            }
        }
        Ok(())
    }

    /// FNV-1a over the little-endian durations; stable across platforms.
    pub fn stable_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for d in &self.0 {
            for b in d.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Heading of a vehicle as it enters an intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Approach {
    North = 0,
    East = 1,
    South = 2,
    West = 3,
}

impl Approach {
    pub const ALL: [Approach; 4] = [Approach::North, Approach::East, Approach::South, Approach::West];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Green and red signal counts of one phase state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignalCounts {
    pub green: u32,
    pub red: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vehicle {
    pub departure_s: u32,
    /// Intersections crossed in order; the last one is the destination.
    pub route: Vec<usize>,
    /// Approach taken into each intersection of `route`.
    pub approaches: Vec<Approach>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficScenario {
    pub intersections: usize,
    pub phases: usize,
    /// Per (intersection, phase): bit `a` set when approach `a` is green.
    pub green_mask: Vec<u8>,
    /// Per (intersection, phase): counts entering the phase ratio.
    pub signals: Vec<SignalCounts>,
    pub vehicles: Vec<Vehicle>,
    pub link_travel_time_s: u32,
    /// Vehicles discharged per second from the head of a green approach.
    pub saturation_flow: u32,
    pub horizon_s: u32,
    pub bounds: DurationBounds,
}

impl TrafficScenario {
    pub fn dim(&self) -> usize {
        self.intersections * self.phases
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        use TrafficError::InvalidScenario as Bad;
        if self.intersections == 0 || self.phases == 0 {
            return Err(Bad("need at least one intersection and one phase"));
        }
        if self.green_mask.len() != self.dim() || self.signals.len() != self.dim() {
            return Err(Bad("signal tables must have one entry per (intersection, phase)"));
        }
        if self.bounds.min < 1 || self.bounds.max < self.bounds.min {
            return Err(Bad("duration bounds must satisfy 1 <= d_min <= d_max"));
        }
        if self.saturation_flow == 0 || self.link_travel_time_s == 0 || self.horizon_s == 0 {
            return Err(Bad("saturation flow, link travel time and horizon must be positive"));
        }
        for (k, s) in self.signals.iter().enumerate() {
            if s.red == 0 {
                return Err(TrafficError::ZeroRed { index: k });
            }
        }
        for v in &self.vehicles {
            if v.departure_s >= self.horizon_s {
                return Err(Bad("vehicle departs at or after the horizon"));
            }
            if v.route.is_empty() || v.route.len() != v.approaches.len() {
                return Err(Bad("vehicle route and approaches must be nonempty and aligned"));
            }
            if v.route.iter().any(|&i| i >= self.intersections) {
                return Err(Bad("route references a missing intersection"));
            }
        }
        Ok(())
    }

    pub fn phase_ratio(&self, plan: &PhasePlan) -> Result<f64, TrafficError> {
        plan.check(self.dim(), self.bounds)?;
        phase_ratio(&self.signals, plan.durations())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrafficMetrics {
    pub arrived: u32,
    pub not_arrived: u32,
    /// Sum of (arrival - departure) over arrived vehicles, seconds.
    pub total_travel_time_s: u64,
    /// Vehicle-seconds spent standing in a queue, seconds.
    pub total_stopped_time_s: u64,
}

/// `Σ d · g / r` over all phase states.
pub fn phase_ratio(signals: &[SignalCounts], durations: &[u32]) -> Result<f64, TrafficError> {
    if signals.len() != durations.len() {
        return Err(TrafficError::DimensionMismatch {
            expected: signals.len(),
            got: durations.len(),
        });
    }
    let mut p = 0.0;
    for (k, (s, &d)) in signals.iter().zip(durations).enumerate() {
        if s.red == 0 {
            return Err(TrafficError::ZeroRed { index: k });
        }
        p += f64::from(d) * f64::from(s.green) / f64::from(s.red);
    }
    Ok(p)
}

/// `(TT_v + TT_EP + NV_ND · T_S) / (NV_D² + P)`.
pub fn combined_fitness(metrics: &TrafficMetrics, ratio: f64, horizon_s: u32) -> Result<f64, TrafficError> {
    let arrived = f64::from(metrics.arrived);
    let denominator = arrived * arrived + ratio;
    if !(denominator > 0.0) {
        return Err(TrafficError::DegenerateDenominator);
    }
    let numerator = metrics.total_travel_time_s as f64
        + metrics.total_stopped_time_s as f64
        + f64::from(metrics.not_arrived) * f64::from(horizon_s);
    Ok(numerator / denominator)
}

/// Full breakdown of one actual evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub metrics: TrafficMetrics,
    pub ratio: f64,
    pub fitness: f64,
}

/// The actual fitness function bound to one scenario, with a count of the
/// successful evaluations it has served.
#[derive(Debug)]
pub struct TrafficObjective {
    scenario: TrafficScenario,
    evaluations: AtomicU64,
}

impl TrafficObjective {
    pub fn new(scenario: TrafficScenario) -> Result<Self, TrafficError> {
        scenario.validate()?;
        Ok(Self { scenario, evaluations: AtomicU64::new(0) })
    }

    pub fn scenario(&self) -> &TrafficScenario {
        &self.scenario
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn evaluate_detailed(&self, plan: &PhasePlan) -> Result<Evaluation, TrafficError> {
        let metrics = simulate(&self.scenario, plan)?;
        let ratio = phase_ratio(&self.scenario.signals, plan.durations())?;
        let fitness = combined_fitness(&metrics, ratio, self.scenario.horizon_s)?;
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        Ok(Evaluation { metrics, ratio, fitness })
    }

    pub fn evaluate(&self, plan: &PhasePlan) -> Result<f64, TrafficError> {
        self.evaluate_detailed(plan).map(|e| e.fitness)
    }
}
