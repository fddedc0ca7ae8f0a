//! Shared fixtures for the benchmarks in `benches/`.

use coopcr::{generate_instance, DualState, NetworkInstance, ScenarioConfig};

/// Default desk-scale scenario (K_P = 2, K_S = 4, SNR 10 dB) with `n`
/// subcarriers.
pub fn instance(n: usize, seed: u64) -> NetworkInstance {
    let cfg = ScenarioConfig {
        num_subcarriers: n,
        rng_seed: seed,
        ..ScenarioConfig::default()
    };
    generate_instance(&cfg).expect("default scenario is valid").0
}

/// Unit multipliers, the ellipsoid's default starting point.
pub fn unit_dual(inst: &NetworkInstance) -> DualState {
    DualState::uniform(inst.dims, 1.0)
}
