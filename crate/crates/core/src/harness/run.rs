//! Monte-Carlo loop over sweep points and channel realizations.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use super::config::{ExperimentConfig, Scheme};
use super::HarnessError;
use crate::baselines::{assign_ftm_modes, solve_ftm, solve_noncoop, solve_proposed};
use crate::channel::generate_instance;

pub const CSV_COLUMNS: [&str; 10] = [
    "sweep_var",
    "sweep_value",
    "scheme",
    "realizations",
    "mean_sum_rate",
    "std_sum_rate",
    "mean_dual_gap_pct",
    "infeasible_count",
    "mean_iters",
    "mean_seconds",
];

const REALIZATION_COLUMNS: [&str; 10] = [
    "sweep_var",
    "sweep_value",
    "realization",
    "seed",
    "scheme",
    "feasible",
    "sum_rate",
    "dual_bound",
    "dual_gap_pct",
    "iterations",
];

pub const RESULTS_FILE: &str = "results.csv";
pub const REALIZATIONS_FILE: &str = "realizations.csv";
pub const METADATA_FILE: &str = "metadata.json";

/// One scheme on one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationRecord {
    pub sweep_value: f64,
    pub realization: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub feasible: bool,
    pub sum_rate: f64,
    pub dual_bound: f64,
    pub gap_pct: f64,
    pub iterations: usize,
    pub seconds: f64,
}

/// One CSV row. `None` fields are written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub sweep_var: String,
    pub sweep_value: f64,
    pub scheme: String,
    pub realizations: usize,
    pub mean_sum_rate: Option<f64>,
    pub std_sum_rate: Option<f64>,
    pub mean_dual_gap_pct: Option<f64>,
    pub infeasible_count: usize,
    pub mean_iters: Option<f64>,
    pub mean_seconds: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub results_csv: PathBuf,
    pub realizations_csv: PathBuf,
    pub metadata: PathBuf,
    pub rows: Vec<AggregateRow>,
    pub records: Vec<RealizationRecord>,
}

/// Seed of realization `index`. Independent of the sweep point, so every
/// point sees the same channels.
pub fn realization_seed(base: u64, index: usize) -> u64 {
    let mut z = base.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Runs every scheme on one realization of one sweep point.
pub fn run_realization(cfg: &ExperimentConfig, sweep_value: f64, realization: usize) -> Result<Vec<RealizationRecord>, HarnessError> {
    let seed = realization_seed(cfg.seed, realization);
    let mut scenario = cfg.scenario_at(sweep_value);
    scenario.rng_seed = seed;
    let (inst, layout) = generate_instance(&scenario).map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut out = Vec::with_capacity(cfg.schemes.len());
    for &scheme in &cfg.schemes {
        let start = Instant::now();
        let outcome = match scheme {
            Scheme::Proposed => solve_proposed(&inst, &cfg.solver),
            Scheme::Ftm => solve_ftm(&inst, &assign_ftm_modes(&layout, inst.dims, &cfg.ftm), &cfg.solver),
            Scheme::Noncoop => solve_noncoop(&inst, &cfg.solver),
        };
        let r = &outcome.report;
        out.push(RealizationRecord {
            sweep_value,
            realization,
            seed,
            scheme,
            feasible: r.feasible,
            sum_rate: r.primal_sum_rate,
            dual_bound: r.dual_bound,
            gap_pct: 100.0 * r.relative_gap(),
            iterations: r.iterations,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(out)
}

/// Mean and sample standard deviation of `records` (in the given order) for
/// one scheme.
pub fn aggregate(cfg: &ExperimentConfig, sweep_value: f64, scheme: Scheme, records: &[RealizationRecord]) -> AggregateRow {
    let mine: Vec<&RealizationRecord> = records.iter().filter(|r| r.scheme == scheme).collect();
    let feasible: Vec<&RealizationRecord> = mine.iter().copied().filter(|r| r.feasible).collect();
    let mean = |xs: &mut dyn Iterator<Item = f64>, n: usize| {
        if n == 0 {
            None
        } else {
            Some(xs.sum::<f64>() / n as f64)
        }
    };
    let nf = feasible.len();
    let mean_rate = mean(&mut feasible.iter().map(|r| r.sum_rate), nf);
    let std_rate = mean_rate.map(|m| {
        if nf < 2 {
            0.0
        } else {
            (feasible.iter().map(|r| (r.sum_rate - m).powi(2)).sum::<f64>() / (nf - 1) as f64).sqrt()
        }
    });
    AggregateRow {
        sweep_var: cfg.sweep.variable.as_str().to_string(),
        sweep_value,
        scheme: scheme.as_str().to_string(),
        realizations: mine.len(),
        mean_sum_rate: mean_rate,
        std_sum_rate: std_rate,
        mean_dual_gap_pct: mean(&mut feasible.iter().map(|r| r.gap_pct), nf),
        infeasible_count: mine.len() - nf,
        mean_iters: mean(&mut mine.iter().map(|r| r.iterations as f64), mine.len()),
        mean_seconds: if cfg.record_timing {
            mean(&mut mine.iter().map(|r| r.seconds), mine.len())
        } else {
            None
        },
    }
}

impl AggregateRow {
    pub fn fields(&self) -> [String; 10] {
        [
            self.sweep_var.clone(),
            self.sweep_value.to_string(),
            self.scheme.clone(),
            self.realizations.to_string(),
            fmt_opt(self.mean_sum_rate),
            fmt_opt(self.std_sum_rate),
            fmt_opt(self.mean_dual_gap_pct),
            self.infeasible_count.to_string(),
            fmt_opt(self.mean_iters),
            fmt_opt(self.mean_seconds),
        ]
    }
}

fn record_fields(cfg: &ExperimentConfig, r: &RealizationRecord) -> [String; 10] {
    [
        cfg.sweep.variable.as_str().to_string(),
        r.sweep_value.to_string(),
        r.realization.to_string(),
        r.seed.to_string(),
        r.scheme.as_str().to_string(),
        r.feasible.to_string(),
        r.sum_rate.to_string(),
        r.dual_bound.to_string(),
        r.gap_pct.to_string(),
        r.iterations.to_string(),
    ]
}

/// CSV file that is flushed to disk after every appended block.
struct AppendCsv {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl AppendCsv {
    fn create(path: PathBuf, header: &[&str]) -> Result<Self, HarnessError> {
        let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        let mut me = Self {
            writer: csv::Writer::from_writer(file),
            path,
        };
        me.append(std::iter::once(header.iter().map(|s| s.to_string()).collect::<Vec<_>>()))?;
        Ok(me)
    }

    fn append<I, R>(&mut self, rows: I) -> Result<(), HarnessError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = &self.path;
        let csv_err = |e: csv::Error| HarnessError::io(path, std::io::Error::other(e));
        for row in rows {
            self.writer.write_record(row).map_err(csv_err)?;
        }
        self.writer.flush().map_err(|e| HarnessError::io(path, e))?;
        self.writer.get_ref().sync_data().map_err(|e| HarnessError::io(path, e))
    }
}

fn write_metadata(cfg: &ExperimentConfig, path: &Path) -> Result<(), HarnessError> {
    let meta = json!({
        "generator": concat!("coopcr ", env!("CARGO_PKG_VERSION")),
        "reference_gain": cfg.scenario.channel.reference_gain,
        "reference_distance_km": 1.0,
        "power_convention": "peak_power = 10^(snr_db/10): transmit SNR in dB over unit noise at the reference gain",
        "noise_variance": cfg.scenario.noise_variance,
        "rate_unit": "bits per OFDM symbol",
        "sweep_var": cfg.sweep.variable.as_str(),
        "columns": CSV_COLUMNS,
        "infeasible_policy": "infeasible realizations are excluded from means and counted in infeasible_count",
        "config": cfg,
    });
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    let mut f = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| HarnessError::io(path, e))
}

/// Runs the experiment and writes `results.csv`, `realizations.csv` and
/// `metadata.json` into `out_dir`. Each sweep point is appended as soon as
/// it finishes.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let metadata = out_dir.join(METADATA_FILE);
    write_metadata(cfg, &metadata)?;
    let mut results = AppendCsv::create(out_dir.join(RESULTS_FILE), &CSV_COLUMNS)?;
    let mut per_real = AppendCsv::create(out_dir.join(REALIZATIONS_FILE), &REALIZATION_COLUMNS)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start {} workers: {e}", cfg.parallel)))?;

    let mut rows = Vec::new();
    let mut records = Vec::new();
    for &value in &cfg.sweep.values {
        if cfg.realizations == 0 {
            continue;
        }
        let batches: Vec<Result<Vec<RealizationRecord>, HarnessError>> = pool.install(|| {
            (0..cfg.realizations)
                .into_par_iter()
                .map(|i| run_realization(cfg, value, i))
                .collect()
        });
        let mut point = Vec::with_capacity(cfg.realizations * cfg.schemes.len());
        for b in batches {
            point.extend(b?);
        }
        point.sort_by_key(|r| (r.realization, r.scheme));
        let point_rows: Vec<AggregateRow> = cfg.schemes.iter().map(|&s| aggregate(cfg, value, s, &point)).collect();
        per_real.append(point.iter().map(|r| record_fields(cfg, r)))?;
        results.append(point_rows.iter().map(|r| r.fields()))?;
        rows.extend(point_rows);
        records.extend(point);
    }
    Ok(RunSummary {
        results_csv: results.path,
        realizations_csv: per_real.path,
        metadata,
        rows,
        records,
    })
}
