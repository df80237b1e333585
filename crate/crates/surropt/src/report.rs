//! CSV artifacts.
//!
//! | file | columns |
//! |---|---|
//! | `eval_cost.csv` | metric, mean, std |
//! | `surrogate_sweep.csv` | size, then mean and std of the training and per-prediction costs, then median, mean and std of mape and r2 |
//! | `run_<variant>_<seed>.csv` | generation, fe, best_actual_fitness, actual_evals_cum, then `<tag>_cpu_j`, `<tag>_dram_j`, `<tag>_s` per component, cumulative |
//! | `components.csv` | variant, component, cpu_j_mean, cpu_j_std, dram_j_mean, dram_j_std, time_s_mean, time_s_std |
//! | `final_fitness.csv` | variant, seed, fitness |
//! | `counts.csv` | variant, seed, actual_evals, predicted_evals, trainings, fe |
//! | `scatter_<variant>_<seed>.csv` | fe, actual, predicted |
//!
//! Surrogate runs also leave `model_<variant>_<seed>.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use surropt_core::energy::{aggregate, MeanStd, ReportLine};
use surropt_core::{ComponentProfile, ComponentTag, ComponentTotals, Variant};

use crate::harness::{EvalCost, ExperimentResults, SweepRow, VariantResults};
use crate::model_io;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("nothing to report")]
    Empty,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error(transparent)]
    Model(#[from] model_io::ModelIoError),
}

pub const RUN_PREFIX_COLUMNS: [&str; 4] = ["generation", "fe", "best_actual_fitness", "actual_evals_cum"];
pub const COMPONENT_COLUMNS: [&str; 8] =
    ["variant", "component", "cpu_j_mean", "cpu_j_std", "dram_j_mean", "dram_j_std", "time_s_mean", "time_s_std"];

pub fn run_columns() -> Vec<String> {
    let mut cols: Vec<String> = RUN_PREFIX_COLUMNS.iter().map(|s| s.to_string()).collect();
    for tag in ComponentTag::ALL {
        cols.extend(["cpu_j", "dram_j", "s"].iter().map(|m| format!("{}_{m}", tag.name())));
    }
    cols
}

pub fn sweep_columns() -> Vec<String> {
    let mut cols = vec!["size".to_string()];
    for m in ["train_cpu_j", "train_dram_j", "train_s", "pred_cpu_j", "pred_dram_j", "pred_s"] {
        cols.push(format!("{m}_mean"));
        cols.push(format!("{m}_std"));
    }
    for m in ["mape", "r2"] {
        cols.extend(["median", "mean", "std"].iter().map(|s| format!("{m}_{s}")));
    }
    cols
}

fn num(x: f64) -> String {
    format!("{x}")
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<std::fs::File>,
}

impl Table {
    fn create(dir: &Path, name: &str, header: &[String]) -> Result<Self, ReportError> {
        let path = dir.join(name);
        let mut writer = csv::Writer::from_path(&path).map_err(|source| ReportError::Csv { path: path.clone(), source })?;
        writer.write_record(header).map_err(|source| ReportError::Csv { path: path.clone(), source })?;
        Ok(Self { path, writer })
    }

    fn row(&mut self, fields: &[String]) -> Result<(), ReportError> {
        self.writer.write_record(fields).map_err(|source| ReportError::Csv { path: self.path.clone(), source })
    }

    fn finish(mut self) -> Result<PathBuf, ReportError> {
        self.writer.flush().map_err(|source| ReportError::Io { path: self.path.clone(), source })?;
        Ok(self.path)
    }
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn write_eval_cost(dir: &Path, cost: &EvalCost) -> Result<PathBuf, ReportError> {
    let mut t = Table::create(dir, "eval_cost.csv", &strings(&["metric", "mean", "std"]))?;
    for (name, m) in [("cpu_j", cost.cpu_j), ("dram_j", cost.dram_j), ("seconds", cost.seconds)] {
        t.row(&[name.to_string(), num(m.mean), num(m.std)])?;
    }
    t.finish()
}

fn write_sweep(dir: &Path, rows: &[SweepRow]) -> Result<PathBuf, ReportError> {
    let mut t = Table::create(dir, "surrogate_sweep.csv", &sweep_columns())?;
    for r in rows {
        let mut fields = vec![r.size.to_string()];
        for xs in [&r.train_cpu_j, &r.train_dram_j, &r.train_s, &r.pred_cpu_j, &r.pred_dram_j, &r.pred_s] {
            let m = MeanStd::of(xs);
            fields.extend([num(m.mean), num(m.std)]);
        }
        for (med, xs) in [(r.median_mape(), &r.mape), (r.median_r2(), &r.r2)] {
            let m = MeanStd::of(xs);
            fields.extend([num(med), num(m.mean), num(m.std)]);
        }
        t.row(&fields)?;
    }
    t.finish()
}

fn component_fields(c: &ComponentTotals) -> Vec<String> {
    c.iter().flat_map(|p| [num(p.cpu_j), num(p.dram_j), num(p.seconds)]).collect()
}

fn write_variant_runs(dir: &Path, v: &VariantResults, out: &mut Vec<PathBuf>) -> Result<(), ReportError> {
    let name = v.variant.short_name();
    for run in &v.runs {
        let r = &run.result;
        let mut t = Table::create(dir, &format!("run_{name}_{}.csv", r.seed), &run_columns())?;
        for g in &r.history {
            let mut fields =
                vec![g.generation.to_string(), g.fe.to_string(), num(g.best_actual_fitness), g.actual_evals.to_string()];
            fields.extend(component_fields(&g.components));
            t.row(&fields)?;
        }
        out.push(t.finish()?);

        if v.variant.uses_surrogate() {
            let mut t = Table::create(dir, &format!("scatter_{name}_{}.csv", r.seed), &strings(&["fe", "actual", "predicted"]))?;
            for p in &run.scatter {
                t.row(&[p.fe.to_string(), num(p.actual), num(p.predicted)])?;
            }
            out.push(t.finish()?);
        }
        if let Some(model) = &run.model {
            let path = dir.join(format!("model_{name}_{}.json", r.seed));
            model_io::save(model, &path)?;
            out.push(path);
        }
    }
    Ok(())
}

fn write_components(dir: &Path, reports: &[(Variant, Vec<ReportLine>)]) -> Result<PathBuf, ReportError> {
    let mut t = Table::create(dir, "components.csv", &strings(&COMPONENT_COLUMNS))?;
    for (variant, lines) in reports {
        for l in lines {
            t.row(&[
                variant.short_name().to_string(),
                l.row.name().to_string(),
                num(l.cpu_j.mean),
                num(l.cpu_j.std),
                num(l.dram_j.mean),
                num(l.dram_j.std),
                num(l.seconds.mean),
                num(l.seconds.std),
            ])?;
        }
    }
    t.finish()
}

fn write_final_fitness(dir: &Path, finals: &[(Variant, u64, f64)]) -> Result<PathBuf, ReportError> {
    let mut t = Table::create(dir, "final_fitness.csv", &strings(&["variant", "seed", "fitness"]))?;
    for (v, seed, f) in finals {
        t.row(&[v.short_name().to_string(), seed.to_string(), num(*f)])?;
    }
    t.finish()
}

fn create_dir(dir: &Path) -> Result<(), ReportError> {
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.to_path_buf(), source })
}

/// Writes every artifact `results` has data for and returns the paths in
/// write order. Existing files are overwritten.
pub fn emit_reports(results: &ExperimentResults, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    if results.is_empty() {
        return Err(ReportError::Empty);
    }
    create_dir(out_dir)?;
    let mut out = Vec::new();
    if let Some(cost) = &results.eval_cost {
        out.push(write_eval_cost(out_dir, cost)?);
    }
    if let Some(rows) = &results.sweep {
        out.push(write_sweep(out_dir, rows)?);
    }
    let variants: Vec<&VariantResults> = results.variants.iter().filter(|v| !v.runs.is_empty()).collect();
    if variants.is_empty() {
        return Ok(out);
    }
    for v in &variants {
        write_variant_runs(out_dir, v, &mut out)?;
    }
    let reports: Vec<_> = variants.iter().map(|v| (v.variant, v.report())).collect();
    out.push(write_components(out_dir, &reports)?);
    let finals: Vec<_> = variants
        .iter()
        .flat_map(|v| v.runs.iter().map(|r| (v.variant, r.result.seed, r.result.best_actual_fitness)))
        .collect();
    out.push(write_final_fitness(out_dir, &finals)?);

    let mut t = Table::create(
        out_dir,
        "counts.csv",
        &strings(&["variant", "seed", "actual_evals", "predicted_evals", "trainings", "fe"]),
    )?;
    for v in &variants {
        for r in &v.runs {
            let r = &r.result;
            t.row(&[
                v.variant.short_name().to_string(),
                r.seed.to_string(),
                r.actual_evals.to_string(),
                r.predicted_evals.to_string(),
                r.trainings.to_string(),
                r.fe.to_string(),
            ])?;
        }
    }
    out.push(t.finish()?);
    Ok(out)
}

/// Last row of a `run_<variant>_<seed>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub variant: Variant,
    pub seed: u64,
    pub best_actual_fitness: f64,
    pub components: ComponentTotals,
}

fn parse_run_name(name: &str) -> Option<(Variant, u64)> {
    let stem = name.strip_prefix("run_")?.strip_suffix(".csv")?;
    let (variant, seed) = stem.rsplit_once('_')?;
    Some((Variant::from_short_name(variant)?, seed.parse().ok()?))
}

pub fn read_run_summary(path: &Path) -> Result<RunSummary, ReportError> {
    let malformed = |reason: String| ReportError::Malformed { path: path.to_path_buf(), reason };
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let (variant, seed) = parse_run_name(name).ok_or_else(|| malformed("not a run_<variant>_<seed>.csv name".into()))?;
    let csv_err = |source| ReportError::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().ne(run_columns().iter().map(String::as_str)) {
        return Err(malformed("unexpected header".into()));
    }
    let mut last = None;
    for record in reader.records() {
        last = Some(record.map_err(csv_err)?);
    }
    let last = last.ok_or_else(|| malformed("no generations".into()))?;
    let field = |k: usize| -> Result<f64, ReportError> {
        last[k].parse().map_err(|_| malformed(format!("column {} is not a number", &header[k])))
    };
    let mut components = ComponentTotals::default();
    for (i, tag) in ComponentTag::ALL.into_iter().enumerate() {
        let k = RUN_PREFIX_COLUMNS.len() + 3 * i;
        components.add(&ComponentProfile {
            tag,
            cpu_j: field(k)?,
            dram_j: field(k + 1)?,
            seconds: field(k + 2)?,
            call_count: 0,
        });
    }
    Ok(RunSummary { variant, seed, best_actual_fitness: field(2)?, components })
}

/// Rebuilds `components.csv` and `final_fitness.csv` from the run series in
/// `dir`.
pub fn summarize_dir(dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let entries = std::fs::read_dir(dir).map_err(|source| ReportError::Io { path: dir.to_path_buf(), source })?;
    let mut runs: BTreeMap<(Variant, u64), RunSummary> = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|source| ReportError::Io { path: dir.to_path_buf(), source })?.path();
        if path.file_name().and_then(|n| n.to_str()).and_then(parse_run_name).is_some() {
            let s = read_run_summary(&path)?;
            runs.insert((s.variant, s.seed), s);
        }
    }
    if runs.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut by_variant: BTreeMap<Variant, Vec<ComponentTotals>> = BTreeMap::new();
    for s in runs.values() {
        by_variant.entry(s.variant).or_default().push(s.components);
    }
    let reports: Vec<_> = by_variant.iter().map(|(v, totals)| (*v, aggregate(totals))).collect();
    let finals: Vec<_> = runs.values().map(|s| (s.variant, s.seed, s.best_actual_fitness)).collect();
    Ok(vec![write_components(dir, &reports)?, write_final_fitness(dir, &finals)?])
}
