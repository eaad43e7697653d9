//! Dataset ingestion and preprocessing: delimited-text loading, missing-row
//! removal, nominal-to-numeric encoding, and correlation-based feature
//! subset selection.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("unknown target column: {0}")]
    UnknownColumn(String),
    #[error("every row contains the missing token")]
    AllRowsRemoved,
    #[error("table needs at least {needed} {what}, has {have}")]
    TooSmall {
        what: &'static str,
        needed: usize,
        have: usize,
    },
    #[error("regressand is constant; feature merit is undefined")]
    ConstantTarget,
    #[error("bad config {path}: {message}")]
    Config { path: PathBuf, message: String },
}

/// Target column selector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelector {
    Last,
    Index(usize),
    Name(String),
}

impl ColumnSelector {
    /// Parses a selector string: integers select by position, anything else
    /// by header name.
    pub fn parse(text: &str) -> Self {
        match text.trim().parse::<usize>() {
            Ok(i) => Self::Index(i),
            Err(_) => Self::Name(text.trim().to_string()),
        }
    }
}

/// Verbatim string table with a resolved target column.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub header: Vec<String>,
    pub cells: Vec<Vec<String>>,
    pub missing_token: String,
    pub target_index: usize,
}

/// Numeric regressor matrix with its regressand column split off.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Regressor rows (n x m).
    pub x: Vec<Vec<f64>>,
    /// Regressand values (n).
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    pub name: String,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    /// Restricts the regressors to the given feature indices.
    pub fn select_features(&self, indices: &[usize]) -> Dataset {
        Dataset {
            x: self
                .x
                .iter()
                .map(|row| indices.iter().map(|&i| row[i]).collect())
                .collect(),
            y: self.y.clone(),
            feature_names: indices
                .iter()
                .map(|&i| self.feature_names[i].clone())
                .collect(),
            name: self.name.clone(),
        }
    }
}

/// Loads a delimited text file with a header row into a verbatim table.
pub fn load_csv(
    path: &Path,
    target: &ColumnSelector,
    missing_token: &str,
    delimiter: u8,
) -> Result<RawTable, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(file);

    let header: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut cells = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        cells.push(record.iter().map(str::to_string).collect());
    }

    let target_index = match target {
        ColumnSelector::Last => header
            .len()
            .checked_sub(1)
            .ok_or_else(|| DataError::UnknownColumn("empty header".to_string()))?,
        ColumnSelector::Index(i) => {
            if *i >= header.len() {
                return Err(DataError::UnknownColumn(format!("index {i}")));
            }
            *i
        }
        ColumnSelector::Name(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::UnknownColumn(name.clone()))?,
    };

    Ok(RawTable {
        header,
        cells,
        missing_token: missing_token.to_string(),
        target_index,
    })
}

fn csv_error(err: csv::Error) -> DataError {
    let line = err.position().map_or(0, csv::Position::line);
    DataError::Parse {
        line,
        message: err.to_string(),
    }
}

/// Removes every row containing the missing token. Returns the cleaned table
/// and the number of rows removed.
pub fn drop_missing(table: &RawTable) -> Result<(RawTable, usize), DataError> {
    let kept: Vec<Vec<String>> = table
        .cells
        .iter()
        .filter(|row| !row.contains(&table.missing_token))
        .cloned()
        .collect();
    if kept.is_empty() && !table.cells.is_empty() {
        return Err(DataError::AllRowsRemoved);
    }
    let removed = table.cells.len() - kept.len();
    Ok((
        RawTable {
            header: table.header.clone(),
            cells: kept,
            missing_token: table.missing_token.clone(),
            target_index: table.target_index,
        },
        removed,
    ))
}

fn parse_finite(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Converts the string table to a numeric dataset.
///
/// A column is nominal iff any cell fails to parse as a finite number;
/// nominal columns are mapped to integer codes in first-appearance order.
pub fn encode_nominal(table: &RawTable, name: &str) -> Result<Dataset, DataError> {
    let n = table.cells.len();
    let cols = table.header.len();
    if n < 2 {
        return Err(DataError::TooSmall {
            what: "rows",
            needed: 2,
            have: n,
        });
    }
    if cols < 2 {
        return Err(DataError::TooSmall {
            what: "columns",
            needed: 2,
            have: cols,
        });
    }

    let mut encoded = vec![vec![0.0; n]; cols];
    for c in 0..cols {
        let numeric = table
            .cells
            .iter()
            .all(|row| parse_finite(&row[c]).is_some());
        if numeric {
            for (r, row) in table.cells.iter().enumerate() {
                encoded[c][r] = parse_finite(&row[c]).expect("checked numeric");
            }
        } else {
            let mut codes: Vec<String> = Vec::new();
            for (r, row) in table.cells.iter().enumerate() {
                let cell = row[c].trim();
                let code = match codes.iter().position(|known| known == cell) {
                    Some(i) => i,
                    None => {
                        codes.push(cell.to_string());
                        codes.len() - 1
                    }
                };
                encoded[c][r] = code as f64;
            }
        }
    }

    let feature_cols: Vec<usize> = (0..cols).filter(|c| *c != table.target_index).collect();
    let x: Vec<Vec<f64>> = (0..n)
        .map(|r| feature_cols.iter().map(|&c| encoded[c][r]).collect())
        .collect();
    let y: Vec<f64> = (0..n).map(|r| encoded[table.target_index][r]).collect();
    Ok(Dataset {
        x,
        y,
        feature_names: feature_cols
            .iter()
            .map(|&c| table.header[c].clone())
            .collect(),
        name: name.to_string(),
    })
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return 0.0;
    }
    cov / (var_a * var_b).sqrt()
}

fn column(dataset: &Dataset, f: usize) -> Vec<f64> {
    dataset.x.iter().map(|row| row[f]).collect()
}

fn merit(relevance: &[f64], redundancy: &[Vec<f64>], subset: &[usize]) -> f64 {
    let k = subset.len() as f64;
    let rcf = subset.iter().map(|&f| relevance[f]).sum::<f64>() / k;
    let mut rff = 0.0;
    let mut pairs = 0.0;
    for (i, &f) in subset.iter().enumerate() {
        for &g in &subset[i + 1..] {
            rff += redundancy[f][g];
            pairs += 1.0;
        }
    }
    if pairs > 0.0 {
        rff /= pairs;
    }
    k * rcf / (k + k * (k - 1.0) * rff).sqrt()
}

/// Greedy forward correlation-based feature subset selection.
///
/// Maximizes `k * mean|corr(f, y)| / sqrt(k + k(k-1) * mean|corr(f, f')|)`;
/// stops when no addition improves the merit or `max_features` is reached.
/// Returns the selected indices in ascending order.
pub fn cfs_select(dataset: &Dataset, max_features: Option<usize>) -> Result<Vec<usize>, DataError> {
    let m = dataset.n_features();
    if m == 0 {
        return Err(DataError::TooSmall {
            what: "columns",
            needed: 1,
            have: 0,
        });
    }
    if dataset.y.iter().all(|v| *v == dataset.y[0]) {
        return Err(DataError::ConstantTarget);
    }
    let cap = max_features.unwrap_or(m).max(1);

    let columns: Vec<Vec<f64>> = (0..m).map(|f| column(dataset, f)).collect();
    let relevance: Vec<f64> = columns
        .iter()
        .map(|c| pearson(c, &dataset.y).abs())
        .collect();
    let mut redundancy = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let r = pearson(&columns[i], &columns[j]).abs();
            redundancy[i][j] = r;
            redundancy[j][i] = r;
        }
    }

    let mut selected: Vec<usize> = Vec::new();
    let mut current_merit = f64::NEG_INFINITY;
    while selected.len() < cap {
        let mut best: Option<(usize, f64)> = None;
        for f in 0..m {
            if selected.contains(&f) {
                continue;
            }
            let mut candidate = selected.clone();
            candidate.push(f);
            let value = merit(&relevance, &redundancy, &candidate);
            if best.is_none_or(|(_, b)| value > b) {
                best = Some((f, value));
            }
        }
        match best {
            Some((f, value)) if value > current_merit => {
                selected.push(f);
                current_merit = value;
            }
            _ => break,
        }
    }
    selected.sort_unstable();
    Ok(selected)
}

/// Writes the canonical numeric form `feature_1,...,feature_m,target`.
pub fn write_numeric_csv<W: Write>(dataset: &Dataset, mut out: W) -> std::io::Result<()> {
    let m = dataset.n_features();
    for i in 1..=m {
        write!(out, "feature_{i},")?;
    }
    writeln!(out, "target")?;
    for (row, y) in dataset.x.iter().zip(&dataset.y) {
        for v in row {
            write!(out, "{v},")?;
        }
        writeln!(out, "{y}")?;
    }
    Ok(())
}

/// Per-dataset configuration: plain `key = value` lines.
#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub name: String,
    pub path: PathBuf,
    pub target: ColumnSelector,
    pub missing_token: String,
    pub delimiter: u8,
    /// Apply correlation-based feature selection before modeling.
    pub cfs: bool,
    pub max_features: Option<usize>,
}

/// What preprocessing did to a dataset.
#[derive(Debug, Clone)]
pub struct PreprocessReport {
    pub rows_removed: usize,
    pub selected_features: Vec<usize>,
}

impl fmt::Display for PreprocessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "removed {} rows, kept features {:?}",
            self.rows_removed, self.selected_features
        )
    }
}

fn parse_delimiter(text: &str) -> Option<u8> {
    match text {
        "comma" | "," => Some(b','),
        "tab" | "\\t" | "\t" => Some(b'\t'),
        "semicolon" | ";" => Some(b';'),
        other if other.len() == 1 => Some(other.as_bytes()[0]),
        _ => None,
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map(str::trim)
        .filter(|line| !line.is_empty() && !line.starts_with('#'))
        .filter_map(|line| {
            line.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

impl DatasetConfig {
    /// Reads a dataset config file. Relative `path` values resolve against
    /// the config file's directory; `name` defaults to the file stem.
    pub fn from_file(config_path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(config_path).map_err(|source| DataError::Io {
            path: config_path.to_path_buf(),
            source,
        })?;
        let base = config_path.parent().unwrap_or_else(|| Path::new("."));
        let mut cfg = DatasetConfig {
            name: config_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".to_string()),
            path: PathBuf::new(),
            target: ColumnSelector::Last,
            missing_token: "?".to_string(),
            delimiter: b',',
            cfs: true,
            max_features: None,
        };
        let mut saw_path = false;
        for (key, value) in parse_key_values(&text) {
            match key.as_str() {
                "name" => cfg.name = value,
                "path" => {
                    let p = PathBuf::from(&value);
                    cfg.path = if p.is_absolute() { p } else { base.join(p) };
                    saw_path = true;
                }
                "target" => cfg.target = ColumnSelector::parse(&value),
                "missing_token" => cfg.missing_token = value,
                "delimiter" => {
                    cfg.delimiter = parse_delimiter(&value).ok_or_else(|| DataError::Config {
                        path: config_path.to_path_buf(),
                        message: format!("unrecognized delimiter {value:?}"),
                    })?
                }
                "cfs" => {
                    cfg.cfs = value.parse::<bool>().map_err(|_| DataError::Config {
                        path: config_path.to_path_buf(),
                        message: format!("cfs must be true or false, got {value:?}"),
                    })?
                }
                "max_features" => {
                    cfg.max_features =
                        Some(value.parse::<usize>().map_err(|_| DataError::Config {
                            path: config_path.to_path_buf(),
                            message: format!("max_features must be an integer, got {value:?}"),
                        })?)
                }
                other => {
                    return Err(DataError::Config {
                        path: config_path.to_path_buf(),
                        message: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        if !saw_path {
            return Err(DataError::Config {
                path: config_path.to_path_buf(),
                message: "missing required key `path`".to_string(),
            });
        }
        Ok(cfg)
    }

    /// Full ingestion pipeline: load, drop missing rows, encode, select
    /// features.
    pub fn load(&self) -> Result<(Dataset, PreprocessReport), DataError> {
        let table = load_csv(
            &self.path,
            &self.target,
            &self.missing_token,
            self.delimiter,
        )?;
        let (table, rows_removed) = drop_missing(&table)?;
        let dataset = encode_nominal(&table, &self.name)?;
        let selected_features = if self.cfs {
            cfs_select(&dataset, self.max_features)?
        } else {
            (0..dataset.n_features()).collect()
        };
        let dataset = dataset.select_features(&selected_features);
        Ok((
            dataset,
            PreprocessReport {
                rows_removed,
                selected_features,
            },
        ))
    }
}
