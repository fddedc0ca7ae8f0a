use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "sweep_var,sweep_value,scheme,realizations,mean_sum_rate,std_sum_rate,mean_dual_gap_pct,infeasible_count,mean_iters,mean_seconds";

const SMALL: &str = r#"{
  "scenario": {"num_subcarriers": 8, "num_pu_pairs": 1, "num_sus": 2, "pu_rate_requirement": 1.0},
  "sweep": {"variable": "snr_db", "values": [4, 10]},
  "realizations": 3,
  "seed": 11
}"#;

fn coopcr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coopcr"))
        .args(args)
        .env_remove("COOPCR_REALIZATIONS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn zero_realizations_write_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = coopcr(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--realizations", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(out.join("results.csv")).unwrap(), format!("{HEADER}\n"));
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["reference_gain"], 1.0);
    assert!(meta["power_convention"].as_str().unwrap().contains("10^(snr_db/10)"));
}

#[test]
fn environment_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_coopcr"))
        .args(["run", "--config", &cfg, "--out", out.to_str().unwrap()])
        .env("COOPCR_REALIZATIONS", "0")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(out.join("results.csv")).unwrap().lines().count(), 1);
}

#[test]
fn unknown_key_is_a_named_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = coopcr(&["run", "--config", &cfg, "--set", "scenario.num_subcarrierz=4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("scenario.num_subcarrierz"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), r#"{"sweep": {"value": [1]}}"#);
    let o = coopcr(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sweep.value"), "{}", stderr(&o));
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = coopcr(&["run", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

/// Mean and sample deviation over feasible rows of realizations.csv, in
/// file order.
fn recompute(realizations: &str, value: &str, scheme: &str) -> (f64, f64) {
    let rates: Vec<f64> = realizations
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|f| f[1] == value && f[4] == scheme && f[5] == "true")
        .map(|f| f[6].parse().unwrap())
        .collect();
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = if rates.len() < 2 {
        0.0
    } else {
        rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    (mean, var.sqrt())
}

#[test]
fn run_then_plotdata_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = coopcr(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
    let per_real = std::fs::read_to_string(out.join("realizations.csv")).unwrap();

    let plots = dir.path().join("plots");
    let o = coopcr(&["plotdata", "--in", out.join("results.csv").to_str().unwrap(), "--out", plots.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut files: Vec<String> = std::fs::read_dir(&plots)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["snr_db_ftm.dat", "snr_db_noncoop.dat", "snr_db_proposed.dat"]);

    for scheme in ["proposed", "ftm", "noncoop"] {
        let series = std::fs::read_to_string(plots.join(format!("snr_db_{scheme}.dat"))).unwrap();
        for line in series.lines().filter(|l| !l.starts_with('#')) {
            let cols: Vec<f64> = line.split_whitespace().map(|x| x.parse().unwrap()).collect();
            assert_eq!(cols.len(), 3);
            let key = if cols[0] == 4.0 { "4" } else { "10" };
            let row: Vec<&str> = csv
                .lines()
                .map(|l| l.split(',').collect::<Vec<_>>())
                .find(|f| f[1] == key && f[2] == scheme)
                .unwrap();
            assert_eq!(cols[1].to_bits(), row[4].parse::<f64>().unwrap().to_bits());
            assert_eq!(cols[2].to_bits(), row[5].parse::<f64>().unwrap().to_bits());
            let (m, s) = recompute(&per_real, key, scheme);
            assert_eq!(cols[1].to_bits(), m.to_bits());
            assert_eq!(cols[2].to_bits(), s.to_bits());
        }
    }
}

#[test]
fn plotdata_reports_the_bad_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, format!("{HEADER}\nsnr_db,0,proposed,2,1.0,0.5,1.0,0,10,\nsnr_db,2,proposed,2,oops,0.5,1.0,0,10,\n")).unwrap();
    let o = coopcr(&["plotdata", "--in", bad.to_str().unwrap(), "--out", dir.path().join("p").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn plotdata_on_empty_csv_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, format!("{HEADER}\n")).unwrap();
    let plots = dir.path().join("p");
    let o = coopcr(&["plotdata", "--in", empty.to_str().unwrap(), "--out", plots.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_dir(&plots).unwrap().count(), 0);
}

#[test]
fn verify_passes_on_a_short_run() {
    let o = coopcr(&["verify", "--subproblems", "3", "--instances", "1"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}{}", stderr(&o));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{stdout}");
}

#[test]
fn bad_arguments_exit_with_config_error() {
    assert_eq!(coopcr(&["run"]).status.code(), Some(1));
    assert_eq!(coopcr(&["frobnicate"]).status.code(), Some(1));
}
