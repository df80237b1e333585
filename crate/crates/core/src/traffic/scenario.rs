use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Approach, DurationBounds, SignalCounts, TrafficError, TrafficScenario, Vehicle};

/// Parameters of a synthetic rectangular grid scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub phases: usize,
    pub vehicles: usize,
    pub horizon_s: u32,
    pub seed: u64,
    pub d_min: u32,
    pub d_max: u32,
    pub saturation_flow: u32,
    pub link_travel_time_s: u32,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            rows: 3,
            cols: 3,
            phases: 4,
            vehicles: 100,
            horizon_s: 500,
            seed: 1,
            d_min: 5,
            d_max: 60,
            saturation_flow: 1,
            link_travel_time_s: 10,
        }
    }
}

/// Builds a grid scenario.
///
/// Approach `a` (N, E, S, W) is green in phase `a mod fs` and red in every
/// other phase, so each phase state counts four signals in total. With two
/// phases this is the usual north-south / east-west split; beyond four the
/// extra phases are all-red. Vehicles travel a shortest grid path between a
/// uniformly drawn origin and destination, departing uniformly within the
/// first half of the horizon.
pub fn build_scenario(spec: &GridSpec) -> Result<TrafficScenario, TrafficError> {
    use TrafficError::InvalidSpec;
    if spec.rows == 0 || spec.cols == 0 {
        return Err(InvalidSpec("grid needs at least one intersection"));
    }
    if spec.vehicles == 0 {
        return Err(InvalidSpec("vehicle count must be at least 1"));
    }
    if spec.phases < 2 {
        // a single phase would leave every signal green and r = 0
        return Err(InvalidSpec("phases must be at least 2"));
    }
    if spec.horizon_s == 0 {
        return Err(InvalidSpec("horizon must be at least 1 s"));
    }
    if spec.saturation_flow == 0 {
        return Err(InvalidSpec("saturation_flow must be at least 1"));
    }
    if spec.link_travel_time_s == 0 {
        return Err(InvalidSpec("link_travel_time_s must be at least 1"));
    }
    let bounds = DurationBounds::new(spec.d_min, spec.d_max)?;

    let intersections = spec.rows * spec.cols;
    let fs = spec.phases;
    let mut green_mask = Vec::with_capacity(intersections * fs);
    let mut signals = Vec::with_capacity(intersections * fs);
    for _ in 0..intersections {
        for j in 0..fs {
            let mask = Approach::ALL
                .iter()
                .filter(|a| a.index() % fs == j)
                .fold(0u8, |m, a| m | (1 << a.index()));
            let green = mask.count_ones();
            green_mask.push(mask);
            signals.push(SignalCounts { green, red: 4 - green });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let departure_window = (spec.horizon_s / 2).max(1);
    let mut vehicles = Vec::with_capacity(spec.vehicles);
    for _ in 0..spec.vehicles {
        let origin = rng.gen_range(0..intersections);
        let destination = rng.gen_range(0..intersections);
        let columns_first = rng.gen_bool(0.5);
        let entry = Approach::ALL[rng.gen_range(0..4)];
        let departure_s = rng.gen_range(0..departure_window);
        let (route, approaches) = grid_route(spec.cols, origin, destination, columns_first, entry);
        vehicles.push(Vehicle { departure_s, route, approaches });
    }

    let scenario = TrafficScenario {
        intersections,
        phases: fs,
        green_mask,
        signals,
        vehicles,
        link_travel_time_s: spec.link_travel_time_s,
        saturation_flow: spec.saturation_flow,
        horizon_s: spec.horizon_s,
        bounds,
    };
    debug_assert!(scenario.validate().is_ok());
    Ok(scenario)
}

/// L-shaped shortest path. Every intersection is entered with the heading of
/// the move that reaches it; the origin takes the heading of the first move,
/// or `entry` when origin and destination coincide.
fn grid_route(
    cols: usize,
    origin: usize,
    destination: usize,
    columns_first: bool,
    entry: Approach,
) -> (Vec<usize>, Vec<Approach>) {
    let (mut r, mut c) = (origin / cols, origin % cols);
    let (tr, tc) = (destination / cols, destination % cols);
    let mut route = alloc::vec![origin];
    let mut headings = Vec::new();

    let walk_cols = |r: usize, c: &mut usize, route: &mut Vec<usize>, headings: &mut Vec<Approach>| {
        while *c != tc {
            let heading = if tc > *c { Approach::East } else { Approach::West };
            *c = if tc > *c { *c + 1 } else { *c - 1 };
            route.push(r * cols + *c);
            headings.push(heading);
        }
    };
    let walk_rows = |r: &mut usize, c: usize, route: &mut Vec<usize>, headings: &mut Vec<Approach>| {
        while *r != tr {
            // row 0 is the northern edge
            let heading = if tr > *r { Approach::South } else { Approach::North };
            *r = if tr > *r { *r + 1 } else { *r - 1 };
            route.push(*r * cols + c);
            headings.push(heading);
        }
    };
    if columns_first {
        walk_cols(r, &mut c, &mut route, &mut headings);
        walk_rows(&mut r, c, &mut route, &mut headings);
    } else {
        walk_rows(&mut r, c, &mut route, &mut headings);
        walk_cols(r, &mut c, &mut route, &mut headings);
    }

    let first = headings.first().copied().unwrap_or(entry);
    let mut approaches = Vec::with_capacity(route.len());
    approaches.push(first);
    approaches.extend(headings);
    (route, approaches)
}
