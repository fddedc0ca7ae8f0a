//! Plot-ready series files from a results CSV.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::run::{AggregateRow, CSV_COLUMNS};
use super::HarnessError;

/// Parses a results CSV. Errors carry the 1-based line number.
pub fn read_results(path: &Path) -> Result<Vec<AggregateRow>, HarnessError> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    parse_results(&bytes)
}

pub fn parse_results(bytes: &[u8]) -> Result<Vec<AggregateRow>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(bytes);
    let mut rows = Vec::new();
    let mut header_seen = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| HarnessError::MalformedCsv {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |reason: String| HarnessError::MalformedCsv { line, reason };
        if !header_seen {
            if rec.iter().ne(CSV_COLUMNS.iter().copied()) {
                return Err(bad(format!("expected header `{}`", CSV_COLUMNS.join(","))));
            }
            header_seen = true;
            continue;
        }
        if rec.len() != CSV_COLUMNS.len() {
            return Err(bad(format!("expected {} fields, found {}", CSV_COLUMNS.len(), rec.len())));
        }
        let num = |i: usize| -> Result<f64, HarnessError> {
            rec[i].parse::<f64>().map_err(|_| bad(format!("`{}` is not a number in column {}", &rec[i], CSV_COLUMNS[i])))
        };
        let opt = |i: usize| -> Result<Option<f64>, HarnessError> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let count = |i: usize| -> Result<usize, HarnessError> {
            rec[i].parse::<usize>().map_err(|_| bad(format!("`{}` is not a count in column {}", &rec[i], CSV_COLUMNS[i])))
        };
        if rec[0].is_empty() || rec[2].is_empty() {
            return Err(bad("empty sweep_var or scheme".into()));
        }
        rows.push(AggregateRow {
            sweep_var: rec[0].to_string(),
            sweep_value: num(1)?,
            scheme: rec[2].to_string(),
            realizations: count(3)?,
            mean_sum_rate: opt(4)?,
            std_sum_rate: opt(5)?,
            mean_dual_gap_pct: opt(6)?,
            infeasible_count: count(7)?,
            mean_iters: opt(8)?,
            mean_seconds: opt(9)?,
        });
    }
    Ok(rows)
}

fn safe_name(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

/// Writes `<sweep_var>_<scheme>.dat` per (figure, scheme) with columns
/// `x mean std`, rows in CSV order. Points without a feasible realization
/// are left out. Returns the files written.
pub fn emit_plot_data(csv_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let rows = read_results(csv_path)?;
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut series: BTreeMap<(String, String), String> = BTreeMap::new();
    for r in &rows {
        let body = series
            .entry((r.sweep_var.clone(), r.scheme.clone()))
            .or_insert_with(|| format!("# {} mean_sum_rate std_sum_rate\n", r.sweep_var));
        if let (Some(m), Some(s)) = (r.mean_sum_rate, r.std_sum_rate) {
            body.push_str(&format!("{} {} {}\n", r.sweep_value, m, s));
        }
    }
    let mut written = Vec::with_capacity(series.len());
    for ((fig, scheme), body) in series {
        let path = out_dir.join(format!("{}_{}.dat", safe_name(&fig), safe_name(&scheme)));
        std::fs::write(&path, body).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
