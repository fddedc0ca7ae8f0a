//! End-to-end properties of the dual solve, recovery and oracles.

use coopcr::baselines::{solve_noncoop, solve_proposed, SolveOptions};
use coopcr::oracle::{oracle_small_instance, SmallInstanceOptions};
use coopcr::{feasibility_check, generate_instance, NetworkInstance, ScenarioConfig, Side};

fn small(seed: u64, r: f64) -> NetworkInstance {
    let cfg = ScenarioConfig {
        num_subcarriers: 4,
        num_pu_pairs: 1,
        num_sus: 2,
        peak_power: 10.0,
        pu_rate_requirement: r,
        rng_seed: seed,
        ..ScenarioConfig::default()
    };
    generate_instance(&cfg).unwrap().0
}

fn permute(inst: &NetworkInstance, order: &[usize]) -> NetworkInstance {
    let p = |v: &Vec<f64>| order.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let mut out = inst.clone();
    out.direct_gain = inst.direct_gain.iter().map(p).collect();
    out.pu_su_gain = inst.pu_su_gain.iter().map(|node| node.iter().map(p).collect()).collect();
    out.su_bs_gain = inst.su_bs_gain.iter().map(p).collect();
    out
}

/// Water-filled SU rate by bisection on the water level.
fn water_fill_bisect(gains: &[f64], budget: f64) -> f64 {
    if gains.is_empty() {
        return 0.0;
    }
    let spent = |mu: f64| gains.iter().map(|g| (mu - 1.0 / g).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, budget + gains.iter().map(|g| 1.0 / g).fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spent(mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    gains.iter().map(|g| (1.0 + (lo - 1.0 / g).max(0.0) * g).log2()).sum()
}

#[test]
fn enumeration_oracle_ignores_subcarrier_order() {
    for seed in 0..3 {
        let inst = small(seed, 1.0);
        let a = oracle_small_instance(&inst, &SmallInstanceOptions::default()).unwrap();
        let b = oracle_small_instance(&permute(&inst, &[2, 0, 3, 1]), &SmallInstanceOptions::default()).unwrap();
        match (a.value, b.value) {
            (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0), "{x} vs {y}"),
            (x, y) => assert_eq!(x, y),
        }
    }
}

#[test]
fn zero_requirement_reduces_to_su_water_filling() {
    for seed in 0..4 {
        let inst = small(seed, 0.0);
        // Every subcarrier goes to one of the two SUs; water-fill each SU's
        // share on its own budget.
        let mut best: f64 = 0.0;
        for mask in 0..16u32 {
            let mut rate = 0.0;
            for su in 0..2 {
                let gains: Vec<f64> = (0..4)
                    .filter(|&n| ((mask >> n) & 1) as usize == su)
                    .map(|n| inst.su_bs_gain[su][n] / inst.noise_variance)
                    .collect();
                rate += inst.su_weight[su] * water_fill_bisect(&gains, inst.peak_power[inst.dims.su_user(su)]);
            }
            best = best.max(rate);
        }
        let oracle = oracle_small_instance(&inst, &SmallInstanceOptions::default()).unwrap();
        let v = oracle.value.unwrap();
        assert!((v - best).abs() <= 1e-5 * best, "seed {seed}: oracle {v} vs {best}");
        let got = solve_proposed(&inst, &SolveOptions::default()).report;
        assert!(got.feasible);
        assert!(got.primal_sum_rate >= 0.98 * best, "seed {seed}: {} vs {best}", got.primal_sum_rate);
    }
}

#[test]
fn swapping_pair_sides_keeps_the_optimum() {
    for seed in 0..3 {
        let inst = small(seed, 1.0);
        let mut swapped = inst.clone();
        let (a, b) = (inst.dims.pu_node(0, Side::First), inst.dims.pu_node(0, Side::Second));
        swapped.pu_su_gain.swap(a, b);
        swapped.peak_power.swap(a, b);
        swapped.rate_requirement.swap(a, b);
        let x = oracle_small_instance(&inst, &SmallInstanceOptions::default()).unwrap().value;
        let y = oracle_small_instance(&swapped, &SmallInstanceOptions::default()).unwrap().value;
        match (x, y) {
            (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0), "{x} vs {y}"),
            (x, y) => assert_eq!(x, y),
        }
    }
}

#[test]
fn recovered_allocations_respect_constraints_and_bounds() {
    let opts = SolveOptions::default();
    for seed in 0..4 {
        let cfg = ScenarioConfig {
            num_subcarriers: 16,
            rng_seed: seed,
            ..ScenarioConfig::default()
        };
        let (inst, _) = generate_instance(&cfg).unwrap();
        let full = solve_proposed(&inst, &opts);
        let direct = solve_noncoop(&inst, &opts);
        for out in [&full, &direct] {
            if out.report.feasible {
                let check = feasibility_check(&inst, &out.allocation, 1e-9, 1e-6).unwrap();
                assert!(check.feasible, "seed {seed}: {check:?}");
                assert!((out.allocation.weighted_sum_rate - out.report.primal_sum_rate).abs() < 1e-9);
            }
            if out.report.feasible && out.dual.converged {
                assert!(
                    out.report.primal_sum_rate <= out.report.dual_bound * (1.0 + 1e-6) + 1e-6,
                    "seed {seed}: primal {} above bound {}",
                    out.report.primal_sum_rate,
                    out.report.dual_bound
                );
            }
        }
        if full.dual.converged && direct.dual.converged && !direct.dual.infeasible {
            // Every direct-only candidate is also a full candidate.
            assert!(full.report.dual_bound >= direct.report.dual_bound * (1.0 - 1e-4) - 1e-4, "seed {seed}");
        }
    }
}
