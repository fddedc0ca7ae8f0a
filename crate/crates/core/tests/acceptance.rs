//! Acceptance suite. Every test prints one `PASS`/`FAIL` line for its
//! criterion before asserting. Tests hold a shared lock so timings are not
//! disturbed by each other.

use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use coopcr::baselines::{solve_proposed, SolveOptions};
use coopcr::dual::{evaluate_dual, CandidateSet, EvalOptions};
use coopcr::harness::{run_experiment, ExperimentConfig, RunSummary, Scheme, SweepVar};
use coopcr::oracle::{oracle_small_instance, oracle_subproblem, GridSpec, OracleMode, SmallInstanceOptions};
use coopcr::persub::{solve_direct_pu, solve_direct_su, solve_oneway_df, solve_twoway, solve_twoway_mac, InnerOptions, ModeInputs};
use coopcr::{generate_instance, DualState, NetworkInstance, ScenarioConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, ok: bool, what: &str, detail: String) {
    println!("[criterion {id:>2}] {}: {what}; {detail}", if ok { "PASS" } else { "FAIL" });
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

fn random_inputs(rng: &mut impl Rng) -> ModeInputs {
    ModeInputs {
        gain_direct: log_uniform(rng, 1e-2, 1e2),
        gain_first_relay: log_uniform(rng, 1e-2, 1e2),
        gain_second_relay: log_uniform(rng, 1e-2, 1e2),
        gain_su_bs: log_uniform(rng, 1e-2, 1e2),
        lambda_first: log_uniform(rng, 1e-2, 10.0),
        lambda_second: log_uniform(rng, 1e-2, 10.0),
        lambda_su: log_uniform(rng, 1e-2, 10.0),
        beta_first: log_uniform(rng, 1e-2, 10.0),
        beta_second: log_uniform(rng, 1e-2, 10.0),
        su_weight: 1.0,
        noise_variance: 1.0,
    }
}

#[test]
fn c01_closed_forms_match_grid_oracle() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for mode in [OracleMode::DirectPu, OracleMode::DirectSu, OracleMode::OneWay, OracleMode::TwoWay] {
        // Two-way is the pure relaying branch, so the oracle pins t = 0.
        let grid = match mode {
            OracleMode::TwoWay => GridSpec {
                t_points: 1,
                ..GridSpec::default()
            },
            _ => GridSpec::default(),
        };
        let mut mode_fail = 0;
        for _ in 0..500 {
            let inp = random_inputs(&mut rng);
            let fast = match mode {
                OracleMode::DirectPu => solve_direct_pu(inp.gain_direct, inp.lambda_first, inp.beta_second).value,
                OracleMode::DirectSu => solve_direct_su(inp.gain_su_bs, inp.lambda_su, inp.su_weight).value,
                OracleMode::OneWay => solve_oneway_df(&inp).value,
                OracleMode::TwoWay => solve_twoway(&inp, &InnerOptions::default(), f64::NEG_INFINITY).value,
            };
            match oracle_subproblem(&inp, mode, &grid) {
                Ok(o) => {
                    let tol = (0.01 * o.value.abs()).max(o.grid_tolerance);
                    let ratio = (fast - o.value).abs() / tol.max(1e-300);
                    worst = worst.max(ratio);
                    if ratio > 1.0 {
                        mode_fail += 1;
                    }
                }
                Err(_) => mode_fail += 1,
            }
        }
        if mode_fail > 0 {
            failures.push(format!("{mode:?}: {mode_fail}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = failures.is_empty() && secs < 120.0;
    report(
        1,
        ok,
        "closed forms vs grid oracle, 500 inputs per mode",
        format!("mismatches {failures:?}, worst |diff|/tol {worst:.3}, {secs:.1} s (limit 120 s)"),
    );
    assert!(ok);
}

#[test]
fn c02_time_split_is_binary() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut interior_wins = 0;
    let mut total = 0;
    let mut worst = f64::NEG_INFINITY;
    for mode in [OracleMode::OneWay, OracleMode::TwoWay] {
        for _ in 0..200 {
            let inp = random_inputs(&mut rng);
            let o = oracle_subproblem(&inp, mode, &GridSpec::default()).expect("bounded at positive prices");
            assert_eq!(o.t_profile.len(), 101);
            let ends = o.t_profile[0].1.max(o.t_profile[100].1);
            let interior = o.t_profile[1..100].iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            let excess = interior - ends;
            worst = worst.max(excess);
            if excess > o.grid_tolerance {
                interior_wins += 1;
            }
            total += 1;
        }
    }
    let ok = interior_wins == 0;
    report(
        2,
        ok,
        "101-point t sweep peaks at t in {0, 1}",
        format!("{interior_wins}/{total} interior wins, largest interior excess {worst:.3e}"),
    );
    assert!(ok);
}

#[test]
fn c03_two_way_necessary_condition() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut both = 0;
    let mut violations = 0;
    for _ in 0..10_000 {
        let w = [log_uniform(&mut rng, 1e-2, 10.0), log_uniform(&mut rng, 1e-2, 10.0)];
        let g = [log_uniform(&mut rng, 1e-2, 1e2), log_uniform(&mut rng, 1e-2, 1e2)];
        let l = [log_uniform(&mut rng, 1e-2, 10.0), log_uniform(&mut rng, 1e-2, 10.0)];
        let s = solve_twoway_mac(w, g, l);
        if s.power[0] > 0.0 && s.power[1] > 0.0 {
            both += 1;
            // Relabel so that the first weight is the larger one.
            let holds = if w[0] >= w[1] {
                g[0] * l[1] > g[1] * l[0]
            } else {
                g[1] * l[0] > g[0] * l[1]
            };
            if !holds {
                violations += 1;
            }
        }
    }
    let ok = violations == 0 && both > 0;
    report(
        3,
        ok,
        "both MAC powers positive implies g1*lambda2 > g2*lambda1",
        format!("{violations} violations among {both} two-user solutions of 10000"),
    );
    assert!(ok);
}

fn random_dual(rng: &mut impl Rng, inst: &NetworkInstance) -> DualState {
    let v: Vec<f64> = (0..inst.dims.dual_dim()).map(|_| log_uniform(rng, 1e-2, 10.0)).collect();
    DualState::from_slice(inst.dims, &v).unwrap()
}

#[test]
fn c04_subgradient_inequality() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let opts = EvalOptions::default();
    let mut min_slack = f64::INFINITY;
    let mut violations = 0;
    for seed in 0..20 {
        let cfg = ScenarioConfig {
            rng_seed: 4000 + seed,
            ..ScenarioConfig::default()
        };
        let (inst, _) = generate_instance(&cfg).unwrap();
        for _ in 0..100 {
            let d = random_dual(&mut rng, &inst);
            let e = random_dual(&mut rng, &inst);
            let gd = evaluate_dual(&inst, &d, &CandidateSet::Full, &opts);
            let ge = evaluate_dual(&inst, &e, &CandidateSet::Full, &opts);
            let lin: f64 = gd
                .subgradient
                .iter()
                .zip(e.to_vec().iter().zip(d.to_vec()))
                .map(|(s, (a, b))| s * (a - b))
                .sum();
            let slack = ge.value - (gd.value + lin);
            min_slack = min_slack.min(slack);
            if slack < -1e-8 {
                violations += 1;
            }
        }
    }
    let ok = violations == 0;
    report(
        4,
        ok,
        "g(d') >= g(d) + <s(d), d' - d> on 20 instances x 100 pairs",
        format!("{violations} violations, min slack {min_slack:.3e} (limit -1e-8)"),
    );
    assert!(ok);
}

#[test]
fn c05_small_instances_near_enumeration_optimum() {
    let _g = serial();
    let opts = SolveOptions::default();
    let mut failures = Vec::new();
    let mut worst_short = f64::NEG_INFINITY;
    let mut solved = 0;
    for seed in 0..50 {
        let cfg = ScenarioConfig {
            num_subcarriers: 4,
            num_pu_pairs: 1,
            num_sus: 2,
            peak_power: 10.0,
            pu_rate_requirement: 1.0,
            rng_seed: seed,
            ..ScenarioConfig::default()
        };
        let (inst, _) = generate_instance(&cfg).unwrap();
        let oracle = oracle_small_instance(&inst, &SmallInstanceOptions::default()).unwrap();
        let got = solve_proposed(&inst, &opts).report;
        match oracle.value {
            Some(v) => {
                solved += 1;
                let short = (v - got.primal_sum_rate) / v.abs().max(1e-12);
                worst_short = worst_short.max(short);
                if !got.feasible || short > 0.02 {
                    failures.push(seed);
                }
            }
            None => {
                if got.feasible {
                    failures.push(seed);
                }
            }
        }
    }
    let ok = failures.is_empty();
    report(
        5,
        ok,
        "N=4, K_P=1, K_S=2 recovery within 2% of enumeration oracle",
        format!(
            "failing seeds {failures:?}, {solved}/50 feasible, worst relative shortfall {:.4}",
            worst_short
        ),
    );
    assert!(ok);
}

/// Desk-scale sweep over SNR shared by criteria 6 and 7.
fn snr_sweep() -> &'static RunSummary {
    static RUN: OnceLock<RunSummary> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = ExperimentConfig {
            realizations: 100,
            seed: 2024,
            ..ExperimentConfig::default()
        };
        assert_eq!(cfg.sweep.variable, SweepVar::SnrDb);
        assert_eq!(cfg.sweep.values, vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0]);
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&cfg, dir.path()).unwrap()
    })
}

fn mean_at(run: &RunSummary, value: f64, scheme: Scheme) -> (f64, f64) {
    let row = run
        .rows
        .iter()
        .find(|r| r.sweep_value == value && r.scheme == scheme.as_str())
        .expect("row present");
    (row.mean_sum_rate.unwrap_or(f64::NAN), row.std_sum_rate.unwrap_or(f64::NAN))
}

#[test]
fn c06_median_duality_gap() {
    let _g = serial();
    let run = snr_sweep();
    let mut gaps: Vec<f64> = run
        .records
        .iter()
        .filter(|r| r.sweep_value == 10.0 && r.scheme == Scheme::Proposed && r.feasible)
        .map(|r| (r.dual_bound - r.sum_rate) / r.dual_bound)
        .collect();
    let feasible = gaps.len();
    gaps.sort_by(f64::total_cmp);
    let median = if gaps.is_empty() {
        f64::NAN
    } else if gaps.len() % 2 == 1 {
        gaps[gaps.len() / 2]
    } else {
        0.5 * (gaps[gaps.len() / 2 - 1] + gaps[gaps.len() / 2])
    };
    let ok = median <= 0.05;
    report(
        6,
        ok,
        "median relative duality gap at N=64, SNR 10 dB, r=5",
        format!("median {median:.4} over {feasible}/100 feasible realizations (limit 0.05)"),
    );
    assert!(ok);
}

#[test]
fn c07_snr_sweep_ratios() {
    let _g = serial();
    let run = snr_sweep();
    let (p, _) = mean_at(run, 10.0, Scheme::Proposed);
    let (f, _) = mean_at(run, 10.0, Scheme::Ftm);
    let (n, _) = mean_at(run, 10.0, Scheme::Noncoop);
    let (pn, pf) = (p / n, p / f);
    let ok = (1.3..=2.0).contains(&pn) && (1.05..=1.4).contains(&pf);
    let curve: Vec<String> = run
        .rows
        .iter()
        .filter(|r| r.scheme == "proposed")
        .map(|r| format!("{}:{:.1}", r.sweep_value, r.mean_sum_rate.unwrap_or(f64::NAN)))
        .collect();
    report(
        7,
        ok,
        "SNR sweep ratios at 10 dB",
        format!(
            "proposed/noncoop {pn:.3} (want [1.3, 2.0]), proposed/FTM {pf:.3} (want [1.05, 1.4]); proposed curve {}",
            curve.join(" ")
        ),
    );
    assert!(ok);
}

/// Spearman rank correlation; ties get their average rank.
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[test]
fn c08_rate_requirement_sweep_shape() {
    let _g = serial();
    let mut cfg = ExperimentConfig {
        realizations: 100,
        seed: 2025,
        ..ExperimentConfig::default()
    };
    cfg.sweep.variable = SweepVar::RateRequirement;
    cfg.sweep.values = (1..=9).map(f64::from).collect();
    cfg.sweep.snr_db = Some(10.0);
    let dir = tempfile::tempdir().unwrap();
    let run = run_experiment(&cfg, dir.path()).unwrap();
    let rs = &cfg.sweep.values;
    let mut rhos = Vec::new();
    let mut ok = true;
    for s in Scheme::ALL {
        let m: Vec<f64> = rs.iter().map(|&r| mean_at(&run, r, s).0).collect();
        let rho = spearman(rs, &m);
        ok &= rho <= -0.9;
        rhos.push(format!("{} {rho:.3}", s.as_str()));
    }
    let mut order_breaks = Vec::new();
    for &r in rs {
        let (p, sp) = mean_at(&run, r, Scheme::Proposed);
        let (f, sf) = mean_at(&run, r, Scheme::Ftm);
        let (n, sn) = mean_at(&run, r, Scheme::Noncoop);
        if !(p >= f - sp.max(sf)) || !(f >= n - sf.max(sn)) {
            order_breaks.push(r);
        }
    }
    ok &= order_breaks.is_empty();
    report(
        8,
        ok,
        "rate-requirement sweep at 10 dB: Spearman rho <= -0.9 and proposed >= FTM >= noncoop within 1 std",
        format!("rho [{}], ordering broken at r = {order_breaks:?}", rhos.join(", ")),
    );
    assert!(ok);
}

#[test]
fn c09_candidate_count_and_linear_time() {
    let _g = serial();
    let mut counts_ok = true;
    for (kp, ks) in [(1, 1), (1, 2), (2, 4), (3, 5)] {
        let cfg = ScenarioConfig {
            num_subcarriers: 8,
            num_pu_pairs: kp,
            num_sus: ks,
            ..ScenarioConfig::default()
        };
        let (inst, _) = generate_instance(&cfg).unwrap();
        let e = evaluate_dual(&inst, &DualState::uniform(inst.dims, 1.0), &CandidateSet::Full, &EvalOptions::default());
        let want = 1 + 2 * kp + ks + 3 * kp * ks;
        counts_ok &= e.candidates_considered.iter().all(|&c| c == want);
    }

    let ns = [16usize, 32, 64, 128];
    let opts = EvalOptions::default();
    let times: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let cfg = ScenarioConfig {
                num_subcarriers: n,
                rng_seed: 9,
                ..ScenarioConfig::default()
            };
            let (inst, _) = generate_instance(&cfg).unwrap();
            let d = DualState::uniform(inst.dims, 1.0);
            let mut samples: Vec<f64> = (0..21)
                .map(|_| {
                    let t = Instant::now();
                    std::hint::black_box(evaluate_dual(&inst, &d, &CandidateSet::Full, &opts));
                    t.elapsed().as_secs_f64()
                })
                .collect();
            samples.sort_by(f64::total_cmp);
            samples[samples.len() / 2]
        })
        .collect();
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, times.iter().sum::<f64>() / k);
    let sxy: f64 = x.iter().zip(&times).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = times.iter().map(|b| (b - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    let ok = counts_ok && r2 > 0.95;
    report(
        9,
        ok,
        "candidates per subcarrier = 1 + 2K_P + K_S + 3K_P K_S; evaluate_dual time linear in N",
        format!(
            "counts {}, median times {:?} ms, R^2 {r2:.4} (want > 0.95)",
            if counts_ok { "exact" } else { "wrong" },
            times.iter().map(|t| (t * 1e5).round() / 100.0).collect::<Vec<_>>()
        ),
    );
    assert!(ok);
}

#[test]
fn c10_identical_config_gives_identical_csv() {
    let _g = serial();
    let mut cfg = ExperimentConfig {
        realizations: 6,
        seed: 77,
        ..ExperimentConfig::default()
    };
    cfg.scenario.num_subcarriers = 16;
    cfg.sweep.values = vec![0.0, 10.0];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cfg.parallel = 1;
    let ra = run_experiment(&cfg, a.path()).unwrap();
    cfg.parallel = 3;
    let rb = run_experiment(&cfg, b.path()).unwrap();
    let same_results = std::fs::read(&ra.results_csv).unwrap() == std::fs::read(&rb.results_csv).unwrap();
    let same_rows = std::fs::read(&ra.realizations_csv).unwrap() == std::fs::read(&rb.realizations_csv).unwrap();
    let ok = same_results && same_rows;
    report(
        10,
        ok,
        "two runs with the same config and seed write byte-identical CSV",
        format!("results.csv identical: {same_results}, realizations.csv identical: {same_rows}"),
    );
    assert!(ok);
}
