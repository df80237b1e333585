//! Acceptance criteria 1 to 9. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{interpret_counts, StubSurrogate, SumObjective};
use surropt::config::Config;
use surropt::harness::{build_archive, experiment_surrogate_sweep, experiment_variants, objective_for, SweepSettings, VariantResults};
use surropt::rapl::WallClock;
use surropt_core::energy::{counter_delta, ComponentProfiler, EnergyBackend, EnergySample, FallbackBackend, NullProfiler};
use surropt_core::surrogate::{init_model, mape, r_squared};
use surropt_core::swarm::{
    inertia_weight, run, select_retrain_candidates, truncate_velocity_with, update_position, update_velocity_with,
    NoSurrogate, PsoConfig, Variant,
};
use surropt_core::traffic::{combined_fitness, phase_ratio, simulate, SignalCounts, TrafficMetrics};
use surropt_core::{build_scenario, ComponentTag, DurationBounds, GridSpec, PhasePlan, TrafficObjective};

type Outcome = Result<String, String>;
type BoxedProfiler = ComponentProfiler<Box<dyn EnergyBackend>>;

fn check(ok: bool, what: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    check(start.elapsed() < limit, format!("took {:.1} s, limit {} s", start.elapsed().as_secs_f64(), limit.as_secs()))
}

fn sc(green: u32, red: u32) -> SignalCounts {
    SignalCounts { green, red }
}

fn metrics(arrived: u32, not_arrived: u32, tt: u64, ep: u64) -> TrafficMetrics {
    TrafficMetrics { arrived, not_arrived, total_travel_time_s: tt, total_stopped_time_s: ep }
}

fn unit_examples() -> Outcome {
    let start = Instant::now();
    check(close(phase_ratio(&[sc(1, 1)], &[30]).unwrap(), 30.0), "P single")?;
    check(close(phase_ratio(&[sc(2, 1), sc(1, 2)], &[10, 20]).unwrap(), 30.0), "P two")?;
    check(phase_ratio(&[sc(0, 4), sc(0, 4)], &[10, 20]).unwrap() == 0.0, "P zero")?;

    check(combined_fitness(&metrics(1, 0, 0, 0), 0.0, 100).unwrap() == 0.0, "F zero")?;
    check(close(combined_fitness(&metrics(2, 1, 10, 5), 1.0, 100).unwrap(), 23.0), "F = 23")?;
    check(combined_fitness(&metrics(0, 3, 0, 0), 0.0, 100).is_err(), "F degenerate")?;

    check(close(inertia_weight(0, 100, 0.5, 0.1).unwrap(), 0.5), "w(0)")?;
    check(close(inertia_weight(100, 100, 0.5, 0.1).unwrap(), 0.1), "w(end)")?;
    check(close(inertia_weight(50, 100, 0.5, 0.1).unwrap(), 0.3), "w(mid)")?;
    check(inertia_weight(0, 0, 0.5, 0.1).is_err(), "w g_total 0")?;

    let v = update_velocity_with(&[0.0, 0.0], &[9, 9], &[9, 9], &[9, 9], 0.5, 2.05, 2.05, &[0.3, 0.7], &[0.1, 0.9], 55.0)
        .unwrap();
    check(v == [0.0, 0.0], "v fixed point")?;
    let v = update_velocity_with(&[1.0], &[10], &[12], &[14], 0.5, 2.05, 2.05, &[0.5], &[0.5], 100.0).unwrap();
    check(close(v[0], 6.65), format!("v = {}", v[0]))?;
    let v = update_velocity_with(&[3.5], &[10], &[40], &[50], 1.0, 2.05, 2.05, &[0.0], &[0.0], 100.0).unwrap();
    check(close(v[0], 3.5), "v identity")?;

    check(truncate_velocity_with(&[2.7], 0.5, &[0.3]) == [2], "floor branch")?;
    check(truncate_velocity_with(&[2.7], 0.5, &[0.9]) == [3], "ceil branch")?;
    check(truncate_velocity_with(&[3.0, 3.0], 0.5, &[0.1, 0.9]) == [3, 3], "integer velocity")?;

    let b = DurationBounds { min: 5, max: 60 };
    check(update_position(&PhasePlan(vec![17, 33]), &[0, 0], b).unwrap() == PhasePlan(vec![17, 33]), "x identity")?;
    check(update_position(&PhasePlan(vec![58]), &[10], b).unwrap() == PhasePlan(vec![60]), "x clamp")?;
    check(update_position(&PhasePlan(vec![10, 20]), &[2, -3], b).unwrap() == PhasePlan(vec![12, 17]), "x step")?;

    check(select_retrain_candidates(&[Some(3.0), Some(1.0), Some(2.0)], 1).unwrap() == [1], "argmin")?;
    check(select_retrain_candidates(&[Some(1.0), Some(1.0), Some(2.0)], 1).unwrap() == [0], "tie")?;

    check(mape(&[3.0, 4.0], &[3.0, 4.0]).unwrap() == 0.0, "mape perfect")?;
    check(close(mape(&[1.0, 2.0], &[1.1, 1.8]).unwrap(), 10.0), "mape = 10")?;
    check(mape(&[0.0, 1.0], &[1.0, 1.0]).is_err(), "mape zero")?;
    check(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() == 1.0, "r2 perfect")?;
    check(r_squared(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap() == 0.0, "r2 mean predictor")?;
    check(close(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), 0.5), "r2 = 0.5")?;

    // pinned desk-scale golden plan, checked against the reference simulator
    let s = build_scenario(&GridSpec::default()).map_err(|e| e.to_string())?;
    let plan = PhasePlan::uniform(s.dim(), s.bounds.min);
    let m = simulate(&s, &plan).unwrap();
    check(m == support::reference_simulate(&s, &plan), "simulator vs reference")?;
    check(m == metrics(100, 0, 4342, 2372), format!("golden metrics {m:?}"))?;
    let f = TrafficObjective::new(s).unwrap().evaluate(&plan).unwrap();
    check(close(f, 6714.0 / 10060.0), format!("golden F {f}"))?;

    within(start, Duration::from_secs(1))?;
    Ok("36 examples".into())
}

fn stub_counts(cfg: &PsoConfig, dim: usize) -> (u64, u64, u64) {
    let obj = SumObjective::new(dim);
    let mut sur = StubSurrogate::default();
    let res = if cfg.variant == Variant::Plain {
        run(cfg, &obj, &mut NoSurrogate, &mut NullProfiler::default()).unwrap()
    } else {
        run(cfg, &obj, &mut sur, &mut NullProfiler::default()).unwrap()
    };
    (res.actual_evals, res.predicted_evals, res.trainings)
}

fn trace_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..50 {
        let n = rng.gen_range(4..=20u64);
        let max_fe = rng.gen_range(n..=400);
        let variant = Variant::ALL[rng.gen_range(0..5)];
        let n_train = n * rng.gen_range(1..=4);
        let n_reeval = rng.gen_range(0..=n);
        let cfg = PsoConfig {
            swarm_size: n as usize,
            max_fitness_evals: max_fe,
            n_train: n_train as usize,
            n_reeval: n_reeval as usize,
            variant,
            seed: case,
            ..PsoConfig::default()
        };
        let (actual, predicted, trainings) = stub_counts(&cfg, 3);
        let want = interpret_counts(variant, n, max_fe, n_train, n_reeval);
        check((actual, predicted, trainings) == want, format!("case {case}: {cfg:?}"))?;
    }
    within(start, Duration::from_secs(30))?;
    Ok("50 configs".into())
}

fn closed_form() -> Outcome {
    let full_scale = |variant, n_train| PsoConfig {
        swarm_size: 100,
        max_fitness_evals: 30_000,
        n_train,
        n_reeval: 10,
        variant,
        ..PsoConfig::default()
    };
    let ps = stub_counts(&full_scale(Variant::PretrainSmall, 100), 4);
    let rs = stub_counts(&full_scale(Variant::RetrainSmall, 100), 4);
    let pl = stub_counts(&full_scale(Variant::PretrainLarge, 8200), 4);
    check((ps.0, ps.1) == (101, 29_900), format!("ps {ps:?}"))?;
    check(rs.0 == 3090, format!("rs {rs:?}"))?;
    check(pl.0 == 8201, format!("pl {pl:?}"))?;
    Ok(format!("ps {}/{}, rs {}, pl {}", ps.0, ps.1, rs.0, pl.0))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 500);
        let dims = [rng.gen_range(1..=4), rng.gen_range(1..=5), rng.gen_range(1..=3), 1];
        let mut model = init_model(&dims, seed).unwrap();
        for l in &mut model.layers {
            l.biases.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
        }
        let inputs: Vec<Vec<f64>> = (0..6).map(|_| (0..dims[0]).map(|_| rng.gen::<f64>()).collect()).collect();
        let targets: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (_, grad) = model.loss_and_gradient(&inputs, &targets);
        let params = model.params();
        let h = 1e-6;
        for _ in 0..10 {
            let k = rng.gen_range(0..params.len());
            let mut probe = model.clone();
            let mut p = params.clone();
            p[k] += h;
            probe.set_params(&p).unwrap();
            let up = probe.loss_and_gradient(&inputs, &targets).0;
            p[k] -= 2.0 * h;
            probe.set_params(&p).unwrap();
            let down = probe.loss_and_gradient(&inputs, &targets).0;
            let numeric = (up - down) / (2.0 * h);
            let scale = grad[k].abs().max(numeric.abs());
            worst = worst.max(if scale < 1e-7 { 0.0 } else { (grad[k] - numeric).abs() / scale });
        }
    }
    check(worst < 1e-4, format!("max relative error {worst:e}"))?;
    within(start, Duration::from_secs(10))?;
    Ok(format!("max relative error {worst:.1e}"))
}

fn accuracy_trend() -> Outcome {
    let start = Instant::now();
    let config = Config::default();
    let obj = objective_for(&config).map_err(|e| e.to_string())?;
    let settings = SweepSettings::from_config(&config);
    check(settings.sizes == [128, 512, 2048] && settings.repeats == 5, "default sweep settings")?;
    let archive = build_archive(&obj, settings.archive_rows(), settings.seed).map_err(|e| e.to_string())?;
    let backend = config.energy.make_backend().map_err(|e| e.to_string())?;
    let rows = experiment_surrogate_sweep(&archive, &settings, &backend).map_err(|e| e.to_string())?;
    let med: Vec<f64> = rows.iter().map(|r| r.median_mape()).collect();
    let summary = format!("median MAPE {med:.3?}");
    check(med.windows(2).all(|w| w[1] <= w[0]), format!("not non-increasing: {summary}"))?;
    check(med[2] <= 0.85 * med[0], format!("MAPE(2048) > 0.85 MAPE(128): {summary}"))?;
    within(start, Duration::from_secs(600))?;
    Ok(summary)
}

fn energy_of(v: &VariantResults, tag: Option<ComponentTag>) -> f64 {
    v.runs
        .iter()
        .map(|r| match tag {
            Some(t) => r.result.components.get(t).cpu_j + r.result.components.get(t).dram_j,
            None => {
                let (c, d, _) = r.result.components.total();
                c + d
            }
        })
        .sum()
}

fn energy_ordering(all: &[VariantResults], elapsed: Duration) -> Outcome {
    let get = |v: Variant| all.iter().find(|r| r.variant == v).unwrap();
    let eval = |v| energy_of(get(v), Some(ComponentTag::Evaluation));
    let (plain, ps, rs) = (eval(Variant::Plain), eval(Variant::PretrainSmall), eval(Variant::RetrainSmall));
    check(ps < rs && rs < plain, format!("evaluation energy ps {ps:.0} J, rs {rs:.0} J, plain {plain:.0} J"))?;
    let plain_total = energy_of(get(Variant::Plain), None);
    for v in &Variant::ALL[1..] {
        let total = energy_of(get(*v), None);
        check(total < plain_total, format!("{} total {total:.0} J >= plain {plain_total:.0} J", v.short_name()))?;
    }
    check(elapsed < Duration::from_secs(600), format!("took {:.0} s", elapsed.as_secs_f64()))?;
    Ok(format!("evaluation J: ps {ps:.0} < rs {rs:.0} < plain {plain:.0}"))
}

fn convergence(all: &[VariantResults], elapsed: Duration) -> Outcome {
    let get = |v: Variant| all.iter().find(|r| r.variant == v).unwrap();
    let (ps, rs) = (get(Variant::PretrainSmall), get(Variant::RetrainSmall));
    for run in &ps.runs {
        let mut values: Vec<f64> = run.result.history.iter().map(|g| g.best_actual_fitness).collect();
        values.dedup();
        check(values.len() <= 2, format!("ps seed {} has {} distinct best values", run.result.seed, values.len()))?;
    }
    let wins = ps
        .runs
        .iter()
        .zip(&rs.runs)
        .filter(|(p, r)| r.result.best_actual_fitness <= p.result.best_actual_fitness)
        .count();
    check(wins >= 4, format!("rs <= ps in {wins}/{} runs", ps.runs.len()))?;
    check(elapsed < Duration::from_secs(600), format!("took {:.0} s", elapsed.as_secs_f64()))?;
    Ok(format!("rs <= ps in {wins}/{} runs", ps.runs.len()))
}

fn profiler() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let max: u64 = rng.gen_range(1..=u64::MAX);
        let (b, a) = (rng.gen::<u64>() % max, rng.gen::<u64>() % max);
        let want = ((u128::from(a) + u128::from(max) - u128::from(b)) % u128::from(max)) as u64;
        let sample = |v| EnergySample { cpu_uj: v, dram_uj: v, timestamp_ns: 0, cpu_max_uj: max, dram_max_uj: max, dram_available: true };
        let (cpu, dram) = counter_delta(&sample(b), &sample(a)).map_err(|e| e.to_string())?;
        check(cpu == want as f64 * 1e-6 && dram == cpu, format!("delta {b} -> {a} mod {max}"))?;
    }

    let cfg = PsoConfig { variant: Variant::RetrainSmall, max_fitness_evals: 400, ..PsoConfig::default() };
    let stub = SumObjective::new(6);
    let traffic = objective_for(&Config::default()).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut additivity = |obj: &dyn Fn(&mut BoxedProfiler) -> Result<surropt_core::RunResult, String>,
                          backend: Box<dyn EnergyBackend>|
     -> Result<(), String> {
        let mut prof = ComponentProfiler::new(backend);
        let before = prof.backend().read().map_err(|e| e.to_string())?;
        let res = obj(&mut prof)?;
        let after = prof.backend().read().map_err(|e| e.to_string())?;
        let (whole_cpu, whole_dram) = counter_delta(&before, &after).map_err(|e| e.to_string())?;
        let (cpu, dram, _) = res.components.total();
        for (part, whole) in [(cpu, whole_cpu), (dram, whole_dram)] {
            worst = worst.max((part - whole).abs() / whole);
        }
        Ok(())
    };
    let on_stub = |prof: &mut BoxedProfiler| {
        run(&cfg, &stub, &mut StubSurrogate::default(), prof).map_err(|e| e.to_string())
    };
    // on the wall clock the scopes need real work, or the counter reads themselves dominate
    let on_traffic = |prof: &mut BoxedProfiler| {
        run(&cfg, &traffic, &mut StubSurrogate::default(), prof).map_err(|e| e.to_string())
    };
    additivity(&on_stub, Box::new(FallbackBackend::modeled(50.0, 2.6)))?;
    additivity(&on_traffic, Box::new(FallbackBackend::new(50.0, 2.6, WallClock::new())))?;
    check(worst <= 0.05, format!("components differ from the whole run by {:.2}%", 100.0 * worst))?;
    within(start, Duration::from_secs(5))?;
    Ok(format!("1000 wrap cases exact; additivity within {:.3}%", 100.0 * worst))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
  "pso": {"max_fitness_evals": 400, "n_train_large": 100},
  "experiment": {"seed": 7, "runs": 2, "eval_samples": 5, "sweep_sizes": [64, 128, 256],
                 "sweep_repeats": 2, "scatter_samples": 50},
  "energy": {"backend": "fallback", "clock": "model"}
}"#,
    )
    .map_err(|e| e.to_string())?;
    let invoke = |out: &Path| -> Result<Vec<String>, String> {
        let o = Command::new(env!("CARGO_BIN_EXE_surropt"))
            .arg("experiment-all")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(out)
            .env_remove("SURROPT_ENERGY_BACKEND")
            .env_remove("SURROPT_FALLBACK_CLOCK")
            .env_remove("SURROPT_FALLBACK_CPU_W")
            .env_remove("SURROPT_FALLBACK_DRAM_W")
            .output()
            .map_err(|e| e.to_string())?;
        check(o.status.success(), format!("exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)))?;
        let stdout = String::from_utf8_lossy(&o.stdout);
        Ok(stdout.lines().map(|l| Path::new(l).file_name().unwrap().to_string_lossy().into_owned()).collect())
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let files = invoke(&a)?;
    check(files == invoke(&b)?, "different file lists")?;
    let csvs: Vec<&String> = files.iter().filter(|f| f.ends_with(".csv")).collect();
    for f in &csvs {
        let (x, y) = (std::fs::read(a.join(f)), std::fs::read(b.join(f)));
        check(x.is_ok() && x.ok() == y.ok(), format!("{f} differs"))?;
    }
    Ok(format!("{} CSVs byte-identical", csvs.len()))
}

fn report(n: usize, name: &str, outcome: std::thread::Result<Outcome>, failures: &mut usize) {
    let line = match outcome {
        Ok(Ok(detail)) => format!("PASS criterion {n} ({name}): {detail}"),
        Ok(Err(reason)) => format!("FAIL criterion {n} ({name}): {reason}"),
        Err(_) => format!("FAIL criterion {n} ({name}): panicked"),
    };
    if line.starts_with("FAIL") {
        *failures += 1;
    }
    println!("{line}");
}

fn main() {
    let mut failures = 0;
    let guarded = |f: fn() -> Outcome| catch_unwind(f);
    report(1, "unit examples", guarded(unit_examples), &mut failures);
    report(2, "algorithm trace oracle", guarded(trace_oracle), &mut failures);
    report(3, "closed-form counts", guarded(closed_form), &mut failures);
    report(4, "gradient check", guarded(gradient_check), &mut failures);
    report(5, "surrogate accuracy trend", guarded(accuracy_trend), &mut failures);

    // criteria 6 and 7 share one set of desk-scale runs
    let start = Instant::now();
    let runs = catch_unwind(|| {
        let config = Config::default();
        let obj = objective_for(&config).unwrap();
        experiment_variants(&config, &obj, &Variant::ALL, config.experiment.seed, config.experiment.runs).unwrap()
    });
    let elapsed = start.elapsed();
    match &runs {
        Ok(all) => {
            report(6, "energy ordering", catch_unwind(AssertUnwindSafe(|| energy_ordering(all, elapsed))), &mut failures);
            report(7, "convergence sanity", catch_unwind(AssertUnwindSafe(|| convergence(all, elapsed))), &mut failures);
        }
        Err(_) => {
            report(6, "energy ordering", Ok(Err("desk-scale runs failed".into())), &mut failures);
            report(7, "convergence sanity", Ok(Err("desk-scale runs failed".into())), &mut failures);
        }
    }
    report(8, "profiler correctness", guarded(profiler), &mut failures);
    report(9, "determinism", guarded(determinism), &mut failures);

    println!("{} of 9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
