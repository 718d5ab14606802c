//! Bit-stable result emission: C-style `%.17g` numeric formatting, CSV
//! tables, versioned JSON summaries, and order-fixed reductions that make
//! results independent of the worker count.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::SCHEMA;
use crate::LabError;

/// C `printf("%.17g")`: 17 significant digits, fixed or scientific by the
/// exponent rules, trailing zeros stripped.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // 17 significant digits in scientific form, then re-shape per %g
    let sci = format!("{:.*e}", 16, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific form");
    let exp: i32 = exp.parse().expect("exponent");
    let neg = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let sign = if neg { "-" } else { "" };
    if exp < -4 || exp >= 17 {
        // scientific: d.ddd...e±XX (two-digit exponent minimum, C style)
        let head = &digits[..1];
        let tail = &digits[1..];
        let exp_str = format!("{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
        if tail.is_empty() {
            format!("{sign}{head}e{exp_str}")
        } else {
            format!("{sign}{head}.{tail}e{exp_str}")
        }
    } else if exp >= 0 {
        let e = exp as usize;
        if digits.len() <= e + 1 {
            let zeros = "0".repeat(e + 1 - digits.len());
            format!("{sign}{digits}{zeros}")
        } else {
            format!("{sign}{}.{}", &digits[..e + 1], &digits[e + 1..])
        }
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        format!("{sign}0.{zeros}{digits}")
    }
}

/// One CSV table: UTF-8, header row, `%.17g` numbers, `\n` line endings.
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, cells: &[CsvCell]) {
        assert_eq!(cells.len(), self.header.len(), "row width mismatch");
        self.rows.push(cells.iter().map(|c| c.render()).collect());
    }

    pub fn to_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub enum CsvCell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl CsvCell {
    fn render(&self) -> String {
        match self {
            CsvCell::Num(x) => fmt_g17(*x),
            CsvCell::Int(i) => i.to_string(),
            CsvCell::Text(s) => s.clone(),
        }
    }
}

/// Assembles the per-run output directory: CSV tables plus one versioned
/// summary.json with the provenance block.
pub struct ResultBundle {
    out_dir: PathBuf,
    kind: String,
    config_sha256: String,
    seed: u64,
    tables: Vec<(String, CsvTable)>,
    metrics: BTreeMap<String, Value>,
}

impl ResultBundle {
    pub fn new(out_dir: &Path, kind: &str, config_bytes: &[u8], seed: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(config_bytes);
        let config_sha256 = format!("{:x}", hasher.finalize());
        ResultBundle {
            out_dir: out_dir.to_path_buf(),
            kind: kind.to_string(),
            config_sha256,
            seed,
            tables: Vec::new(),
            metrics: BTreeMap::new(),
        }
    }

    pub fn add_table(&mut self, name: &str, table: CsvTable) {
        self.tables.push((name.to_string(), table));
    }

    /// Numbers are stored as `%.17g` strings so the JSON bytes are
    /// reproducible and carry full precision.
    pub fn add_metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), Value::String(fmt_g17(value)));
    }

    pub fn add_metric_text(&mut self, key: &str, value: &str) {
        self.metrics.insert(key.to_string(), Value::String(value.to_string()));
    }

    pub fn add_metric_list(&mut self, key: &str, values: &[f64]) {
        let list: Vec<Value> = values.iter().map(|&v| Value::String(fmt_g17(v))).collect();
        self.metrics.insert(key.to_string(), Value::Array(list));
    }

    pub fn write(&self) -> Result<(), LabError> {
        fs::create_dir_all(&self.out_dir)
            .map_err(|e| LabError::Config(format!("{}: {e}", self.out_dir.display())))?;
        for (name, table) in &self.tables {
            let path = self.out_dir.join(format!("{name}.csv"));
            fs::write(&path, table.to_string())
                .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        }
        let summary = json!({
            "schema": SCHEMA,
            "kind": self.kind,
            "provenance": {
                "config_sha256": self.config_sha256,
                "seed": self.seed,
                "version": env!("CARGO_PKG_VERSION"),
            },
            "metrics": self.metrics,
        });
        let path = self.out_dir.join("summary.json");
        let mut text = serde_json::to_string_pretty(&summary)
            .map_err(|e| LabError::Config(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}

/// Fixed-order pairwise (tree) summation: the reduction order depends only
/// on the slice length, never on how the values were produced.
pub fn tree_sum(vals: &[f64]) -> f64 {
    match vals.len() {
        0 => 0.0,
        1 => vals[0],
        n => {
            let mid = n / 2;
            tree_sum(&vals[..mid]) + tree_sum(&vals[mid..])
        }
    }
}

pub fn tree_mean(vals: &[f64]) -> f64 {
    if vals.is_empty() {
        return f64::NAN;
    }
    tree_sum(vals) / vals.len() as f64
}

/// Evaluate `f` over `0..n` with a fixed number of worker threads. Results
/// come back indexed by input, so downstream reductions see the same order
/// for every worker count.
pub fn parallel_map<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.max(1).min(n.max(1));
    if workers == 1 {
        return (0..n).map(&f).collect();
    }
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let chunks: Vec<(usize, &mut [Option<T>])> = {
        let mut out = Vec::new();
        let mut rest = slots.as_mut_slice();
        let mut start = 0;
        let base = n / workers;
        let extra = n % workers;
        for w in 0..workers {
            let len = base + usize::from(w < extra);
            let (head, tail) = rest.split_at_mut(len);
            out.push((start, head));
            start += len;
            rest = tail;
        }
        out
    };
    std::thread::scope(|scope| {
        for (start, chunk) in chunks {
            let f = &f;
            scope.spawn(move || {
                for (off, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(f(start + off));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("worker filled every slot")).collect()
}
