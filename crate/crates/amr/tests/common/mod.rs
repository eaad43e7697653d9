//! Shared test support: a deterministic synthetic dataset corpus, a no-cache
//! brute-force grid-search oracle, and output-comparison helpers.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use amr::seeding::rng_for;
use rand::Rng;

/// Benchmark shapes `(rows, numeric_features)` spanning small (43 rows) to
/// medium (1178 rows) datasets.
pub const SHAPES: [(usize, usize); 17] = [
    (43, 2),
    (74, 6),
    (194, 16),
    (252, 3),
    (277, 6),
    (297, 6),
    (61, 3),
    (189, 4),
    (276, 5),
    (193, 4),
    (60, 5),
    (137, 4),
    (1063, 2),
    (398, 7),
    (754, 2),
    (1178, 1),
    (625, 2),
];

/// Writes the 17-dataset corpus (CSVs plus per-dataset configs plus a run
/// config listing them) and returns the run-config path and dataset names.
///
/// Some datasets carry a nominal column and a few rows with missing cells so
/// the full preprocessing pipeline is exercised; rows with missing cells are
/// extras, keeping the post-removal row count at the nominal shape.
pub fn write_corpus(dir: &Path, seed: u64, algorithms: &str) -> (PathBuf, Vec<String>) {
    let mut names = Vec::new();
    for (i, &(rows, features)) in SHAPES.iter().enumerate() {
        let name = format!("data-{:02}", i + 1);
        let with_nominal = features >= 2 && i % 3 == 1;
        let missing_extras = if i % 4 == 2 { 2 } else { 0 };
        write_dataset(
            dir,
            &name,
            rows,
            features,
            with_nominal,
            missing_extras,
            seed,
        );
        names.push(name);
    }
    let dataset_list = names
        .iter()
        .map(|n| format!("{n}.conf"))
        .collect::<Vec<_>>()
        .join(",");
    let run_conf = dir.join("run.conf");
    fs::write(
        &run_conf,
        format!(
            "datasets = {dataset_list}\nalgorithms = {algorithms}\nn_perm = 2000\nseed = {seed}\noutput_dir = out\n"
        ),
    )
    .unwrap();
    (run_conf, names)
}

fn write_dataset(
    dir: &Path,
    name: &str,
    rows: usize,
    features: usize,
    with_nominal: bool,
    missing_extras: usize,
    seed: u64,
) {
    let mut rng = rng_for(seed, &format!("synthetic/{name}"));
    let coefficients: Vec<f64> = (0..features).map(|_| rng.random_range(0.5..3.0)).collect();
    let intercept: f64 = rng.random_range(-5.0..5.0);
    let noise_scale: f64 = rng.random_range(0.2..1.5);
    let categories = ["low", "mid", "high"];
    let category_effect: f64 = rng.random_range(0.5..2.0);

    let mut csv = String::new();
    for j in 1..=features {
        csv.push_str(&format!("x{j},"));
    }
    if with_nominal {
        csv.push_str("grade,");
    }
    csv.push_str("y\n");

    let emit_row = |rng: &mut rand_chacha::ChaCha12Rng, missing: bool| {
        let x: Vec<f64> = (0..features).map(|_| rng.random_range(0.5..10.0)).collect();
        let category = rng.random_range(0..categories.len());
        let noise: f64 = rng.random_range(-1.0..1.0) * noise_scale;
        let mut y = intercept + noise;
        for (c, v) in coefficients.iter().zip(&x) {
            y += c * v;
        }
        let mut line = String::new();
        for (j, v) in x.iter().enumerate() {
            if missing && j == 0 {
                line.push_str("?,");
            } else {
                line.push_str(&format!("{v:.6},"));
            }
        }
        if with_nominal {
            y += category_effect * category as f64;
            line.push_str(categories[category]);
            line.push(',');
        }
        line.push_str(&format!("{y:.6}\n"));
        line
    };

    for _ in 0..rows {
        csv.push_str(&emit_row(&mut rng, false));
    }
    for _ in 0..missing_extras {
        csv.push_str(&emit_row(&mut rng, true));
    }
    fs::write(dir.join(format!("{name}.csv")), csv).unwrap();
    fs::write(
        dir.join(format!("{name}.conf")),
        format!("path = {name}.csv\ntarget = y\nmissing_token = ?\ndelimiter = comma\n"),
    )
    .unwrap();
}

/// Winner of the oracle scan.
pub struct OracleOutcome {
    pub mae_op: f64,
    pub mse_op: f64,
    pub rmse_op: f64,
    pub r2_op: f64,
    pub alpha_op: f64,
    pub delta_op: f64,
    pub predictions: Vec<f64>,
    pub neighbor_counts: Vec<usize>,
}

/// Brute-force grid search: rebuilds the fold model from scratch for every
/// `(delta, alpha, fold)` triple, with no caching anywhere. The optimum
/// updates whenever `mae <= mae_op` in delta-major, alpha-minor scan order.
pub fn oracle_grid_search(
    x: &[Vec<f64>],
    y: &[f64],
    alpha_grid: &[f64],
    delta_grid: &[f64],
) -> OracleOutcome {
    let n = x.len();
    let mut mae_op = f64::INFINITY;
    let mut best: Option<OracleOutcome> = None;

    for &delta in delta_grid {
        for &alpha in alpha_grid {
            let beta = 1.0 - alpha;
            let mut predictions = Vec::with_capacity(n);
            let mut neighbor_counts = Vec::with_capacity(n);
            for l in 0..n {
                let mut train_x: Vec<&[f64]> = Vec::with_capacity(n - 1);
                let mut train_y: Vec<f64> = Vec::with_capacity(n - 1);
                for q in 0..n {
                    if q != l {
                        train_x.push(&x[q]);
                        train_y.push(y[q]);
                    }
                }
                // fresh per-instance coefficients
                let coefficients: Vec<Vec<f64>> = train_x
                    .iter()
                    .zip(&train_y)
                    .map(|(row, target)| {
                        let active = row.iter().filter(|v| **v != 0.0).count();
                        row.iter()
                            .map(|&xi| {
                                if xi != 0.0 {
                                    target / (active as f64 * xi)
                                } else {
                                    0.0
                                }
                            })
                            .collect()
                    })
                    .collect();
                // fresh distances
                let distances: Vec<f64> = train_x
                    .iter()
                    .map(|row| {
                        let mut acc = 0.0;
                        for (a, b) in x[l].iter().zip(*row) {
                            acc += (a - b).abs();
                        }
                        acc
                    })
                    .collect();
                let mut dist_min = f64::INFINITY;
                for &d in &distances {
                    if d < dist_min {
                        dist_min = d;
                    }
                }
                let threshold = delta * dist_min;
                let mut sum_ama = 0.0;
                let mut sum_knn = 0.0;
                let mut k = 0usize;
                for (q, &d) in distances.iter().enumerate() {
                    if d <= threshold {
                        let mut rec = 0.0;
                        for (a, b) in coefficients[q].iter().zip(&x[l]) {
                            rec += a * b;
                        }
                        sum_ama += rec;
                        sum_knn += train_y[q];
                        k += 1;
                    }
                }
                let component_ama = sum_ama / k as f64;
                let component_knn = sum_knn / k as f64;
                predictions.push(alpha * component_ama + beta * component_knn);
                neighbor_counts.push(k);
            }

            let mut abs_acc = 0.0;
            let mut sq_acc = 0.0;
            for l in 0..n {
                abs_acc += (y[l] - predictions[l]).abs();
                let d = y[l] - predictions[l];
                sq_acc += d * d;
            }
            let mae = abs_acc / n as f64;
            let mse = sq_acc / n as f64;
            let rmse = mse.sqrt();
            let mut y_sum = 0.0;
            for v in y {
                y_sum += v;
            }
            let mean = y_sum / n as f64;
            let mut ss_res = 0.0;
            let mut ss_tot = 0.0;
            for l in 0..n {
                let r = y[l] - predictions[l];
                ss_res += r * r;
                let t = y[l] - mean;
                ss_tot += t * t;
            }
            let r2 = if ss_tot == 0.0 {
                f64::NAN
            } else {
                1.0 - ss_res / ss_tot
            };

            if mae <= mae_op {
                mae_op = mae;
                best = Some(OracleOutcome {
                    mae_op: mae,
                    mse_op: mse,
                    rmse_op: rmse,
                    r2_op: r2,
                    alpha_op: alpha,
                    delta_op: delta,
                    predictions,
                    neighbor_counts,
                });
            }
        }
    }
    best.expect("nonempty grids")
}

/// Path of the compiled `amr` binary.
pub fn amr_command() -> Command {
    Command::new(env!("CARGO_BIN_EXE_amr"))
}

/// Recursively collects files under `dir`, as paths relative to it.
pub fn collect_files(dir: &Path) -> Vec<PathBuf> {
    fn walk(base: &Path, current: &Path, out: &mut Vec<PathBuf>) {
        for entry in fs::read_dir(current).unwrap() {
            let entry = entry.unwrap();
            let path = entry.path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                out.push(path.strip_prefix(base).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

/// Removes every `et_seconds` field, recursively.
pub fn strip_timing(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.remove("et_seconds");
            for v in map.values_mut() {
                strip_timing(v);
            }
        }
        serde_json::Value::Array(items) => {
            for v in items {
                strip_timing(v);
            }
        }
        _ => {}
    }
}
