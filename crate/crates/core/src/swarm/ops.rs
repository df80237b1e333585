use alloc::vec::Vec;

use rand::Rng;

use super::{Particle, PsoConfig, SwarmError};
use crate::traffic::{DurationBounds, PhasePlan};

/// Linearly decreasing inertia weight `w_max − (w_max − w_min)·g / g_total`.
pub fn inertia_weight(g: u64, g_total: u64, w_max: f64, w_min: f64) -> Result<f64, SwarmError> {
    if g_total == 0 {
        return Err(SwarmError::InvalidConfig { key: "g_total", reason: "must be at least 1" });
    }
    if g > g_total {
        return Err(SwarmError::InvalidConfig { key: "generation", reason: "exceeds g_total" });
    }
    Ok(w_max - (w_max - w_min) * g as f64 / g_total as f64)
}

/// Velocity update with explicit uniform draws per dimension, clamped to
/// `[-v_max, v_max]`.
#[allow(clippy::too_many_arguments)]
pub fn update_velocity_with(
    velocity: &[f64],
    position: &[u32],
    personal_best: &[u32],
    global_best: &[u32],
    w: f64,
    phi1: f64,
    phi2: f64,
    u1: &[f64],
    u2: &[f64],
    v_max: f64,
) -> Result<Vec<f64>, SwarmError> {
    let n = velocity.len();
    for len in [position.len(), personal_best.len(), global_best.len(), u1.len(), u2.len()] {
        if len != n {
            return Err(SwarmError::DimensionMismatch(n, len));
        }
    }
    Ok((0..n)
        .map(|d| {
            let x = f64::from(position[d]);
            let v = w * velocity[d]
                + phi1 * u1[d] * (f64::from(personal_best[d]) - x)
                + phi2 * u2[d] * (f64::from(global_best[d]) - x);
            v.clamp(-v_max, v_max)
        })
        .collect())
}

/// Velocity update drawing one `(u1, u2)` pair per dimension from `rng`.
pub fn update_velocity<R: Rng + ?Sized>(
    particle: &Particle,
    global_best: &PhasePlan,
    w: f64,
    cfg: &PsoConfig,
    v_max: f64,
    rng: &mut R,
) -> Result<Vec<f64>, SwarmError> {
    let n = particle.velocity.len();
    let mut u1 = Vec::with_capacity(n);
    let mut u2 = Vec::with_capacity(n);
    for _ in 0..n {
        u1.push(rng.gen::<f64>());
        u2.push(rng.gen::<f64>());
    }
    update_velocity_with(
        &particle.velocity,
        particle.position.durations(),
        particle.best_position.durations(),
        global_best.durations(),
        w,
        cfg.phi1,
        cfg.phi2,
        &u1,
        &u2,
        v_max,
    )
}

/// Stochastic rounding: component `d` is floored when `draws[d] <= lambda`,
/// otherwise ceiled.
pub fn truncate_velocity_with(velocity: &[f64], lambda: f64, draws: &[f64]) -> Vec<i64> {
    velocity
        .iter()
        .zip(draws)
        .map(|(&v, &u)| if u <= lambda { libm::floor(v) as i64 } else { libm::ceil(v) as i64 })
        .collect()
}

/// Stochastic rounding with one draw per dimension.
pub fn truncate_velocity<R: Rng + ?Sized>(velocity: &[f64], lambda: f64, rng: &mut R) -> Vec<i64> {
    let draws: Vec<f64> = velocity.iter().map(|_| rng.gen::<f64>()).collect();
    truncate_velocity_with(velocity, lambda, &draws)
}

/// `x + v`, clamped into the duration bounds.
pub fn update_position(position: &PhasePlan, velocity: &[i64], bounds: DurationBounds) -> Result<PhasePlan, SwarmError> {
    if position.dim() != velocity.len() {
        return Err(SwarmError::DimensionMismatch(position.dim(), velocity.len()));
    }
    Ok(PhasePlan(
        position.durations().iter().zip(velocity).map(|(&x, &v)| bounds.clamp(i64::from(x) + v)).collect(),
    ))
}

/// Indices of the `n_reeval` smallest predictions, ties to the lower index.
pub fn select_retrain_candidates(predictions: &[Option<f64>], n_reeval: usize) -> Result<Vec<usize>, SwarmError> {
    if n_reeval > predictions.len() {
        return Err(SwarmError::TooManyCandidates { requested: n_reeval, available: predictions.len() });
    }
    let mut ranked = Vec::with_capacity(predictions.len());
    for (i, p) in predictions.iter().enumerate() {
        ranked.push((p.ok_or(SwarmError::MissingPrediction(i))?, i));
    }
    // stable: equal predictions keep index order
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(ranked.into_iter().take(n_reeval).map(|(_, i)| i).collect())
}
