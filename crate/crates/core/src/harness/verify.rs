//! Cross-checks of the fast solvers against the brute-force oracles, run
//! by the `verify` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::{solve_proposed, SolveOptions};
use crate::channel::generate_instance;
use crate::model::ScenarioConfig;
use crate::oracle::{oracle_small_instance, oracle_subproblem, GridSpec, OracleMode, SmallInstanceOptions};
use crate::persub::{solve_direct_pu, solve_direct_su, solve_oneway_df, solve_twoway, InnerOptions, ModeInputs};

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Random inputs per per-subcarrier mode.
    pub subproblems: usize,
    /// Instances with N = 4, one PU pair and two SUs.
    pub small_instances: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            subproblems: 25,
            small_instances: 5,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub total: usize,
    pub failures: usize,
    /// Worst case, human-readable.
    pub detail: String,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Gains log-uniform in [1e-2, 1e2], prices log-uniform in [1e-2, 10].
pub fn random_mode_inputs(rng: &mut impl Rng) -> ModeInputs {
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

/// Lagrangian value of the closed-form solver for `mode`. Two-way is the
/// pure relaying branch.
pub fn closed_form_value(mode: OracleMode, inp: &ModeInputs) -> f64 {
    match mode {
        OracleMode::DirectPu => solve_direct_pu(inp.gain_direct, inp.lambda_first, inp.beta_second).value,
        OracleMode::DirectSu => solve_direct_su(inp.gain_su_bs, inp.lambda_su, inp.su_weight).value,
        OracleMode::OneWay => solve_oneway_df(inp).value,
        OracleMode::TwoWay => solve_twoway(inp, &InnerOptions::default(), f64::NEG_INFINITY).value,
    }
}

/// Oracle grid matching [`closed_form_value`]: two-way pins `t = 0`.
pub fn oracle_grid(mode: OracleMode) -> GridSpec {
    match mode {
        OracleMode::TwoWay => GridSpec {
            t_points: 1,
            ..GridSpec::default()
        },
        _ => GridSpec::default(),
    }
}

fn check_mode(mode: OracleMode, opts: &VerifyOptions) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (mode as u64) << 32);
    let mut failures = 0;
    let mut worst = (f64::NEG_INFINITY, String::new());
    for _ in 0..opts.subproblems {
        let inp = random_mode_inputs(&mut rng);
        let fast = closed_form_value(mode, &inp);
        let slow = match oracle_subproblem(&inp, mode, &oracle_grid(mode)) {
            Ok(o) => o,
            Err(e) => {
                failures += 1;
                worst = (f64::INFINITY, format!("oracle failed: {e}"));
                continue;
            }
        };
        let tol = (0.01 * slow.value.abs()).max(slow.grid_tolerance);
        let excess = (fast - slow.value).abs() / tol.max(1e-12);
        if excess > 1.0 {
            failures += 1;
        }
        if excess > worst.0 {
            worst = (excess, format!("closed form {fast:.6} vs oracle {:.6} (tolerance {tol:.2e})", slow.value));
        }
    }
    CheckResult {
        name: format!("{mode:?} closed form vs grid oracle"),
        total: opts.subproblems,
        failures,
        detail: worst.1,
    }
}

fn check_small_instances(opts: &VerifyOptions) -> CheckResult {
    let solve = SolveOptions::default();
    let mut failures = 0;
    let mut worst = (f64::NEG_INFINITY, String::new());
    for i in 0..opts.small_instances {
        let cfg = ScenarioConfig {
            num_subcarriers: 4,
            num_pu_pairs: 1,
            num_sus: 2,
            peak_power: 10.0,
            pu_rate_requirement: 1.0,
            rng_seed: opts.seed.wrapping_add(i as u64),
            ..ScenarioConfig::default()
        };
        let (inst, _) = generate_instance(&cfg).expect("fixed small scenario is valid");
        let oracle = match oracle_small_instance(&inst, &SmallInstanceOptions::default()) {
            Ok(o) => o,
            Err(e) => {
                failures += 1;
                worst = (f64::INFINITY, format!("oracle failed: {e}"));
                continue;
            }
        };
        let got = solve_proposed(&inst, &solve).report;
        let (ok, shortfall, text) = match oracle.value {
            Some(v) => {
                let short = (v - got.primal_sum_rate) / v.abs().max(1e-12);
                (
                    got.feasible && short <= 0.02,
                    short,
                    format!("seed {}: recovered {:.4} vs oracle {v:.4}", cfg.rng_seed, got.primal_sum_rate),
                )
            }
            None => (!got.feasible, 0.0, format!("seed {}: oracle infeasible", cfg.rng_seed)),
        };
        if !ok {
            failures += 1;
        }
        if shortfall > worst.0 || !ok {
            worst = (if ok { shortfall } else { f64::INFINITY }, text);
        }
    }
    CheckResult {
        name: "small-instance recovery vs enumeration oracle".into(),
        total: opts.small_instances,
        failures,
        detail: worst.1,
    }
}

pub fn run_verification(opts: &VerifyOptions) -> Vec<CheckResult> {
    let mut out: Vec<CheckResult> = [OracleMode::DirectPu, OracleMode::DirectSu, OracleMode::OneWay, OracleMode::TwoWay]
        .into_iter()
        .map(|m| check_mode(m, opts))
        .collect();
    out.push(check_small_instances(opts));
    out
}
