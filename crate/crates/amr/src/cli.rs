//! Subcommand implementations behind the `amr` binary.
//!
//! Every command is reproducible under a fixed seed: output files are
//! byte-identical across runs except for wall-clock timing fields.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::ama::{ama_validate, write_validation_csv, DivisorRule};
use crate::baselines::{
    dtree_fit_predict, knn_select_k, linreg_fit_predict, DistanceMetric, TreeConfig,
};
use crate::data::{parse_key_values, write_numeric_csv, Dataset, DatasetConfig};
use crate::eval::{decision_rule, loocv, permutation_test, MetricSet, PermTestResult, Verdict};
use crate::model::{default_alpha_grid, default_delta_grid, grid_search_loocv_full, Aggregation};
use crate::theory::run_all_checks;

/// Neighbor-count cap for the k-NN baseline's LOOCV selection.
const KNN_K_CAP: usize = 25;

pub const KNOWN_ALGORITHMS: [&str; 4] = ["amr", "knn", "lr", "dt"];

/// A full evaluation run: datasets, algorithms, grids, and output location.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Dataset config file paths.
    pub datasets: Vec<PathBuf>,
    pub algorithms: Vec<String>,
    pub alpha_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub n_perm: u64,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Reads a run config (`key = value` lines, lists comma-separated).
    /// Relative paths resolve against the config file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut cfg = RunConfig {
            datasets: Vec::new(),
            algorithms: Vec::new(),
            alpha_grid: default_alpha_grid(),
            delta_grid: default_delta_grid(),
            n_perm: 5000,
            seed: 42,
            output_dir: base.join("out"),
        };
        for (key, value) in parse_key_values(&text) {
            match key.as_str() {
                "datasets" => {
                    cfg.datasets = split_list(&value)
                        .map(|item| {
                            let p = PathBuf::from(item);
                            if p.is_absolute() {
                                p
                            } else {
                                base.join(p)
                            }
                        })
                        .collect()
                }
                "algorithms" => cfg.algorithms = split_list(&value).map(str::to_string).collect(),
                "alpha_grid" => cfg.alpha_grid = parse_float_list(&value)?,
                "delta_grid" => cfg.delta_grid = parse_float_list(&value)?,
                "n_perm" => cfg.n_perm = value.parse().context("n_perm must be an integer")?,
                "seed" => cfg.seed = value.parse().context("seed must be an integer")?,
                "output_dir" => {
                    let p = PathBuf::from(&value);
                    cfg.output_dir = if p.is_absolute() { p } else { base.join(p) };
                }
                other => bail!("unknown run-config key {other:?}"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            bail!("config lists no datasets");
        }
        if self.algorithms.is_empty() {
            bail!("config lists no algorithms");
        }
        for algo in &self.algorithms {
            if !KNOWN_ALGORITHMS.contains(&algo.as_str()) {
                bail!(
                    "unknown algorithm {algo:?} (known: {})",
                    KNOWN_ALGORITHMS.join(", ")
                );
            }
        }
        if self.alpha_grid.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            bail!("alpha grid values must lie in (0, 1]");
        }
        if self.delta_grid.iter().any(|d| !(1.0..=10.0).contains(d)) {
            bail!("delta grid values must lie in [1, 10]");
        }
        Ok(())
    }
}

fn split_list(text: &str) -> impl Iterator<Item = &str> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_float_list(text: &str) -> Result<Vec<f64>> {
    split_list(text)
        .map(|item| {
            item.parse::<f64>()
                .with_context(|| format!("bad number {item:?} in list"))
        })
        .collect()
}

/// Runs the randomized solver validation and writes the record CSV.
pub fn cmd_ama_validate(
    checkpoints: &[usize],
    value_range: (f64, f64),
    seed: u64,
    out: Option<&Path>,
    literal_index_divisor: bool,
) -> Result<()> {
    if checkpoints.is_empty() {
        bail!("at least one checkpoint dimension is required");
    }
    let rule = if literal_index_divisor {
        DivisorRule::PositionIndex
    } else {
        DivisorRule::ActiveCount
    };
    let records = ama_validate(checkpoints, value_range, seed, rule)?;
    match out {
        Some(path) => {
            let file = fs::File::create(path)
                .with_context(|| format!("cannot create {}", path.display()))?;
            write_validation_csv(&records, file)?;
            println!("wrote {} records to {}", records.len(), path.display());
        }
        None => {
            let stdout = std::io::stdout();
            write_validation_csv(&records, stdout.lock())?;
        }
    }
    Ok(())
}

/// Runs the randomized theorem suites and writes a JSON summary.
pub fn cmd_theory_check(trials: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    if trials == 0 {
        bail!("trials must be at least 1");
    }
    let report = run_all_checks(trials, seed)?;
    let json = serde_json::to_string_pretty(&report)?;
    match out {
        Some(path) => {
            fs::write(path, format!("{json}\n"))
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
        None => println!("{json}"),
    }
    for suite in &report.suites {
        println!(
            "{}: {}/{} passed{}",
            suite.name,
            suite.passes,
            suite.trials,
            if suite.violations.is_empty() {
                ""
            } else {
                " [VIOLATIONS]"
            }
        );
    }
    if !report.all_passed {
        bail!("one or more theorem suites reported violations");
    }
    Ok(())
}

fn write_pairs_csv(path: &Path, header: &str, pairs: &[(usize, f64)]) -> Result<()> {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for (i, v) in pairs {
        out.push_str(&format!("{i},{v}\n"));
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn read_pairs_csv(path: &Path) -> Result<Vec<f64>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (index, value) = line
            .split_once(',')
            .with_context(|| format!("{}:{} is not `index,value`", path.display(), lineno + 1))?;
        let index: usize = index.trim().parse()?;
        if index != values.len() {
            bail!(
                "{}: row_index {} out of order at line {}",
                path.display(),
                index,
                lineno + 1
            );
        }
        values.push(value.trim().parse::<f64>()?);
    }
    Ok(values)
}

fn algo_timer<F>(f: F) -> Result<(Vec<f64>, f64)>
where
    F: FnOnce() -> Result<Vec<f64>>,
{
    let start = Instant::now();
    let predictions = f()?;
    Ok((predictions, start.elapsed().as_secs_f64()))
}

/// One algorithm's LOOCV run on one loaded dataset.
fn run_algorithm(
    algo: &str,
    dataset: &Dataset,
    config: &RunConfig,
    aggregation: Aggregation,
    dataset_dir: &Path,
) -> Result<(Vec<f64>, f64)> {
    match algo {
        "amr" => {
            let start = Instant::now();
            let outcome = grid_search_loocv_full(
                dataset,
                &config.alpha_grid,
                &config.delta_grid,
                aggregation,
            )?;
            let et = start.elapsed().as_secs_f64();
            let grid_json = serde_json::to_string_pretty(&outcome.result)?;
            fs::write(dataset_dir.join("amr_grid.json"), format!("{grid_json}\n"))?;
            println!(
                "  amr: mae_op={} alpha_op={} delta_op={} k_op={} (last fold k={})",
                outcome.result.mae_op,
                outcome.result.alpha_op,
                outcome.result.delta_op,
                outcome.result.k_op,
                outcome.result.k_last_fold
            );
            Ok((outcome.predictions, et))
        }
        "knn" => {
            let start = Instant::now();
            let selection =
                knn_select_k(&dataset.x, &dataset.y, KNN_K_CAP, DistanceMetric::Euclidean)?;
            let et = start.elapsed().as_secs_f64();
            fs::write(
                dataset_dir.join("knn_selection.json"),
                format!(
                    "{{\n  \"k\": {},\n  \"mae\": {}\n}}\n",
                    selection.k, selection.mae
                ),
            )?;
            println!("  knn: k={} mae={}", selection.k, selection.mae);
            Ok((selection.predictions, et))
        }
        "lr" => algo_timer(|| {
            let (_, predictions) = loocv(dataset, linreg_fit_predict)?;
            Ok(predictions)
        }),
        "dt" => algo_timer(|| {
            let tree_config = TreeConfig::default();
            let (_, predictions) = loocv(dataset, |x, y, te| {
                dtree_fit_predict(x, y, te, &tree_config)
            })?;
            Ok(predictions)
        }),
        other => bail!("unknown algorithm {other:?}"),
    }
}

/// Evaluates every configured algorithm on every configured dataset under
/// LOOCV, writing per-dataset metric JSONs and prediction CSVs.
///
/// Per-dataset failures are logged and the run continues; the command fails
/// at the end if anything failed.
pub fn cmd_evaluate(config: &RunConfig, literal_sum: bool) -> Result<()> {
    config.validate()?;
    let aggregation = if literal_sum {
        Aggregation::Sum
    } else {
        Aggregation::Mean
    };
    fs::create_dir_all(&config.output_dir)?;
    let mut failures = Vec::new();

    for dataset_cfg_path in &config.datasets {
        let loaded = DatasetConfig::from_file(dataset_cfg_path).and_then(|cfg| {
            let pair = cfg.load()?;
            Ok((cfg.name, pair))
        });
        let (name, (dataset, report)) = match loaded {
            Ok(v) => v,
            Err(e) => {
                eprintln!("dataset {}: {e}", dataset_cfg_path.display());
                failures.push(format!("{}: {e}", dataset_cfg_path.display()));
                continue;
            }
        };
        println!(
            "dataset {name}: n={} m={} ({report})",
            dataset.n_rows(),
            dataset.n_features()
        );
        let dataset_dir = config.output_dir.join(&name);
        fs::create_dir_all(&dataset_dir)?;

        let mut preprocessed = Vec::new();
        write_numeric_csv(&dataset, &mut preprocessed)?;
        fs::write(dataset_dir.join("preprocessed.csv"), preprocessed)?;
        let actuals: Vec<(usize, f64)> = dataset.y.iter().cloned().enumerate().collect();
        write_pairs_csv(
            &dataset_dir.join("actuals.csv"),
            "row_index,actual",
            &actuals,
        )?;

        for algo in &config.algorithms {
            match run_algorithm(algo, &dataset, config, aggregation, &dataset_dir) {
                Ok((predictions, et)) => {
                    let metrics = MetricSet::from_predictions(&dataset.y, &predictions, et)?;
                    let json = serde_json::to_string_pretty(&metrics)?;
                    fs::write(
                        dataset_dir.join(format!("{algo}_metrics.json")),
                        format!("{json}\n"),
                    )?;
                    let rows: Vec<(usize, f64)> = predictions.into_iter().enumerate().collect();
                    write_pairs_csv(
                        &dataset_dir.join(format!("{algo}_predictions.csv")),
                        "row_index,prediction",
                        &rows,
                    )?;
                    println!(
                        "  {algo}: mae={} et={:.3}s",
                        metrics.mae, metrics.et_seconds
                    );
                }
                Err(e) => {
                    eprintln!("dataset {name}, algorithm {algo}: {e}");
                    failures.push(format!("{name}/{algo}: {e}"));
                }
            }
        }
    }

    if !failures.is_empty() {
        bail!(
            "{} evaluation step(s) failed:\n  {}",
            failures.len(),
            failures.join("\n  ")
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct Consistency {
    mse_agrees: Option<bool>,
    rmse_agrees: Option<bool>,
    r2_agrees: Option<bool>,
}

#[derive(Serialize)]
struct ComparisonReport<'a> {
    pair: [&'a str; 2],
    perm: &'a PermTestResult,
    verdict: &'a Verdict,
    metrics_a: &'a MetricSet,
    metrics_b: &'a MetricSet,
    /// Supporting metrics agree when they order the algorithms the same way
    /// MAE does; they annotate the verdict but never override it.
    consistency: Consistency,
}

fn read_et_seconds(dir: &Path, algo: &str) -> f64 {
    let path = dir.join(format!("{algo}_metrics.json"));
    fs::read_to_string(&path)
        .ok()
        .and_then(|text| serde_json::from_str::<Value>(&text).ok())
        .and_then(|v| v.get("et_seconds").and_then(Value::as_f64))
        .unwrap_or(f64::NAN)
}

fn agreement(a: f64, b: f64, mae_sign: f64, higher_is_better: bool) -> Option<bool> {
    if a.is_nan() || b.is_nan() || mae_sign == 0.0 {
        return None;
    }
    let sign = if higher_is_better { b - a } else { a - b };
    Some(sign.signum() == mae_sign.signum())
}

/// Compares two algorithms' stored predictions with the paired permutation
/// test and prints a one-line verdict.
pub fn cmd_compare(
    pred_dir: &Path,
    algo_a: &str,
    algo_b: &str,
    n_perm: u64,
    seed: u64,
    p_threshold: f64,
) -> Result<()> {
    let actuals_path = pred_dir.join("actuals.csv");
    let actuals = read_pairs_csv(&actuals_path)
        .with_context(|| format!("missing actuals at {}", actuals_path.display()))?;
    let mut errors = Vec::new();
    let mut predictions = Vec::new();
    for algo in [algo_a, algo_b] {
        let path = pred_dir.join(format!("{algo}_predictions.csv"));
        if !path.exists() {
            bail!("missing predictions for {algo:?} at {}", path.display());
        }
        let preds = read_pairs_csv(&path)?;
        if preds.len() != actuals.len() {
            bail!(
                "row count mismatch: {} predictions for {} actual rows ({algo})",
                preds.len(),
                actuals.len()
            );
        }
        errors.push(
            actuals
                .iter()
                .zip(&preds)
                .map(|(a, p)| (a - p).abs())
                .collect::<Vec<f64>>(),
        );
        predictions.push(preds);
    }

    let perm = permutation_test(&errors[0], &errors[1], n_perm, seed)?;
    let metrics_a =
        MetricSet::from_predictions(&actuals, &predictions[0], read_et_seconds(pred_dir, algo_a))?;
    let metrics_b =
        MetricSet::from_predictions(&actuals, &predictions[1], read_et_seconds(pred_dir, algo_b))?;
    let verdict = decision_rule(&metrics_a, &metrics_b, &perm, p_threshold);

    let mae_sign = perm.dif_obs;
    let report = ComparisonReport {
        pair: [algo_a, algo_b],
        perm: &perm,
        verdict: &verdict,
        metrics_a: &metrics_a,
        metrics_b: &metrics_b,
        consistency: Consistency {
            mse_agrees: agreement(metrics_a.mse, metrics_b.mse, mae_sign, false),
            rmse_agrees: agreement(metrics_a.rmse, metrics_b.rmse, mae_sign, false),
            r2_agrees: agreement(metrics_a.r2, metrics_b.r2, mae_sign, true),
        },
    };
    let json = serde_json::to_string_pretty(&report)?;
    let out_path = pred_dir.join(format!("compare_{algo_a}_vs_{algo_b}.json"));
    fs::write(&out_path, format!("{json}\n"))?;

    println!(
        "{algo_a} vs {algo_b}: {:?} (dif_obs={}, p={}, n_perms={}{})",
        verdict.decision,
        perm.dif_obs,
        perm.p_value,
        perm.n_perms,
        verdict
            .et_preference
            .map(|p| format!(", faster: {p:?}"))
            .unwrap_or_default()
    );
    Ok(())
}

fn dataset_dirs(out_dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut dirs = Vec::new();
    for entry in
        fs::read_dir(out_dir).with_context(|| format!("cannot list {}", out_dir.display()))?
    {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            dirs.push((
                entry.file_name().to_string_lossy().into_owned(),
                entry.path(),
            ));
        }
    }
    dirs.sort();
    Ok(dirs)
}

fn discover_algorithms(dirs: &[(String, PathBuf)]) -> Result<Vec<String>> {
    let mut algos: Vec<String> = Vec::new();
    for (_, dir) in dirs {
        for entry in fs::read_dir(dir)? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(algo) = name.strip_suffix("_metrics.json") {
                if !algos.iter().any(|a| a == algo) {
                    algos.push(algo.to_string());
                }
            }
        }
    }
    algos.sort();
    // the hybrid goes first: it is the reference column of the pairwise table
    if let Some(pos) = algos.iter().position(|a| a == "amr") {
        let amr = algos.remove(pos);
        algos.insert(0, amr);
    }
    Ok(algos)
}

fn metric_value(dir: &Path, algo: &str, metric: &str) -> Option<f64> {
    let text = fs::read_to_string(dir.join(format!("{algo}_metrics.json"))).ok()?;
    let value: Value = serde_json::from_str(&text).ok()?;
    match value.get(metric) {
        Some(Value::Null) => Some(f64::NAN),
        Some(v) => v.as_f64(),
        None => None,
    }
}

fn format_cell(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_nan() => "nan".to_string(),
        Some(v) => format!("{v}"),
        None => String::new(),
    }
}

/// Aggregates metric JSONs into one CSV per metric (datasets down, algorithms
/// across), a pairwise `dif_obs`/p-value CSV against the reference algorithm,
/// and, when a reference table is supplied, a per-cell deviation report.
pub fn cmd_report(
    out_dir: &Path,
    algorithms: Option<Vec<String>>,
    n_perm: u64,
    seed: u64,
    reference: Option<&Path>,
    reference_metric: &str,
) -> Result<()> {
    let dirs = dataset_dirs(out_dir)?;
    if dirs.is_empty() {
        bail!("no dataset directories under {}", out_dir.display());
    }
    let algos = match algorithms {
        Some(a) if !a.is_empty() => a,
        _ => discover_algorithms(&dirs)?,
    };
    if algos.is_empty() {
        bail!(
            "no algorithm metric files found under {}",
            out_dir.display()
        );
    }

    // one metric table per file, shaped dataset x algorithm
    for metric in ["mae", "mse", "rmse", "r2", "et_seconds"] {
        let mut csv = String::from("dataset");
        for algo in &algos {
            csv.push(',');
            csv.push_str(algo);
        }
        csv.push('\n');
        for (name, dir) in &dirs {
            csv.push_str(name);
            for algo in &algos {
                csv.push(',');
                csv.push_str(&format_cell(metric_value(dir, algo, metric)));
            }
            csv.push('\n');
        }
        let file = if metric == "et_seconds" { "et" } else { metric };
        fs::write(out_dir.join(format!("{file}.csv")), csv)?;
    }

    // pairwise permutation tests against the reference algorithm
    let reference_algo = &algos[0];
    let opponents: Vec<&String> = algos.iter().skip(1).collect();
    let mut csv = String::from("dataset");
    for algo in &opponents {
        csv.push_str(&format!(
            ",{reference_algo}_vs_{algo}_dif_obs,{reference_algo}_vs_{algo}_p_value"
        ));
    }
    csv.push('\n');
    for (name, dir) in &dirs {
        csv.push_str(name);
        let actuals = read_pairs_csv(&dir.join("actuals.csv")).ok();
        let ref_preds = read_pairs_csv(&dir.join(format!("{reference_algo}_predictions.csv"))).ok();
        for algo in &opponents {
            let cell = match (&actuals, &ref_preds) {
                (Some(actuals), Some(ref_preds)) => {
                    match read_pairs_csv(&dir.join(format!("{algo}_predictions.csv"))) {
                        Ok(preds) if preds.len() == actuals.len() => {
                            let err_a: Vec<f64> = actuals
                                .iter()
                                .zip(ref_preds)
                                .map(|(a, p)| (a - p).abs())
                                .collect();
                            let err_b: Vec<f64> = actuals
                                .iter()
                                .zip(&preds)
                                .map(|(a, p)| (a - p).abs())
                                .collect();
                            let perm = permutation_test(&err_a, &err_b, n_perm, seed)?;
                            format!("{},{}", perm.dif_obs, perm.p_value)
                        }
                        _ => ",".to_string(),
                    }
                }
                _ => ",".to_string(),
            };
            csv.push(',');
            csv.push_str(&cell);
        }
        csv.push('\n');
    }
    fs::write(out_dir.join("pairwise.csv"), csv)?;

    // deviation report against an external reference table
    if let Some(reference_path) = reference {
        let text = fs::read_to_string(reference_path)
            .with_context(|| format!("cannot read reference {}", reference_path.display()))?;
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .context("reference table is empty")?
            .split(',')
            .map(str::trim)
            .collect();
        let mut csv =
            String::from("dataset,algorithm,ours,reference,abs_deviation,rel_deviation\n");
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let dataset = cells[0];
            let Some(dir) = dirs
                .iter()
                .find(|(name, _)| name == dataset)
                .map(|(_, d)| d)
            else {
                continue;
            };
            for (algo, cell) in header.iter().skip(1).zip(cells.iter().skip(1)) {
                let Ok(reference_value) = cell.parse::<f64>() else {
                    continue;
                };
                let Some(ours) = metric_value(dir, algo, reference_metric) else {
                    continue;
                };
                let abs_dev = ours - reference_value;
                let rel = if reference_value != 0.0 {
                    format!("{}", abs_dev / reference_value.abs())
                } else {
                    String::new()
                };
                csv.push_str(&format!(
                    "{dataset},{algo},{ours},{reference_value},{abs_dev},{rel}\n"
                ));
            }
        }
        fs::write(out_dir.join("deviation.csv"), csv)?;
    }

    println!(
        "wrote metric tables and pairwise comparisons for {} datasets x {} algorithms to {}",
        dirs.len(),
        algos.len(),
        out_dir.display()
    );
    Ok(())
}
