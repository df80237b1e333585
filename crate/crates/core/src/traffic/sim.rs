use alloc::collections::{BinaryHeap, VecDeque};
use alloc::vec::Vec;
use core::cmp::Reverse;

use super::{PhasePlan, TrafficError, TrafficMetrics, TrafficScenario};

/// Runs the fixed-increment queue model for `horizon_s` one-second steps.
///
/// Each step, in order:
/// 1. vehicles whose departure or link traversal ends at `t` join the tail
///    of their next approach queue, ordered by vehicle index;
/// 2. every intersection discharges up to `saturation_flow` vehicles from
///    the head of each approach that is green in its current phase. A
///    discharged vehicle either arrives (at `t + 1`) or reaches the next
///    stop line at `t + link_travel_time_s`;
/// 3. every vehicle still queued accrues one second of stopped time.
///
/// Intersections start in phase 0 at `t = 0` and cycle through their phases
/// with the plan's durations.
pub fn simulate(scenario: &TrafficScenario, plan: &PhasePlan) -> Result<TrafficMetrics, TrafficError> {
    scenario.validate()?;
    plan.check(scenario.dim(), scenario.bounds)?;

    let fs = scenario.phases;
    let durations = plan.durations();
    let flow = scenario.saturation_flow as usize;
    let link = scenario.link_travel_time_s;

    let mut queues: Vec<VecDeque<u32>> = (0..scenario.intersections * 4).map(|_| VecDeque::new()).collect();
    let mut queued = 0u64;
    let mut hop = alloc::vec![0usize; scenario.vehicles.len()];
    let mut pending: BinaryHeap<Reverse<(u32, u32)>> = scenario
        .vehicles
        .iter()
        .enumerate()
        .map(|(v, veh)| Reverse((veh.departure_s, v as u32)))
        .collect();

    let mut phase = alloc::vec![0usize; scenario.intersections];
    let mut remaining: Vec<u32> = (0..scenario.intersections).map(|i| durations[i * fs]).collect();

    let mut metrics = TrafficMetrics::default();
    for t in 0..scenario.horizon_s {
        while let Some(&Reverse((at, v))) = pending.peek() {
            if at > t {
                break;
            }
            pending.pop();
            let veh = &scenario.vehicles[v as usize];
            let h = hop[v as usize];
            queues[veh.route[h] * 4 + veh.approaches[h].index()].push_back(v);
            queued += 1;
        }

        for i in 0..scenario.intersections {
            let mask = scenario.green_mask[i * fs + phase[i]];
            for a in 0..4 {
                if mask & (1 << a) == 0 {
                    continue;
                }
                let queue = &mut queues[i * 4 + a];
                for _ in 0..flow {
                    let Some(v) = queue.pop_front() else { break };
                    queued -= 1;
                    let veh = &scenario.vehicles[v as usize];
                    let h = &mut hop[v as usize];
                    *h += 1;
                    if *h == veh.route.len() {
                        metrics.arrived += 1;
                        metrics.total_travel_time_s += u64::from(t + 1 - veh.departure_s);
                    } else {
                        pending.push(Reverse((t + link, v)));
                    }
                }
            }
        }

        metrics.total_stopped_time_s += queued;

        for i in 0..scenario.intersections {
            remaining[i] -= 1;
            if remaining[i] == 0 {
                phase[i] = (phase[i] + 1) % fs;
                remaining[i] = durations[i * fs + phase[i]];
            }
        }
    }

    metrics.not_arrived = scenario.vehicles.len() as u32 - metrics.arrived;
    Ok(metrics)
}
