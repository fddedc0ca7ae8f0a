//! Random network realizations: node placement, log-distance path loss with
//! log-normal shadowing, and frequency-selective Rayleigh fading sampled on
//! the OFDM subcarrier grid.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::{ModelError, NetworkInstance, ScenarioConfig, Side};

/// Channel-model constants that the scenario does not fix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    /// Total signal bandwidth; subcarrier spacing is this divided by N.
    pub bandwidth_mhz: f64,
    pub num_taps: usize,
    /// Decay constant of the exponential power delay profile.
    pub tap_decay_us: f64,
    /// Path gain at 1 km with 0 dB shadowing.
    pub reference_gain: f64,
    /// Distances below this are clamped before applying the power law.
    pub min_distance_km: f64,
    pub shadowing: bool,
    pub fading: bool,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            bandwidth_mhz: 1.0,
            num_taps: 6,
            tap_decay_us: 1.0,
            reference_gain: 1.0,
            min_distance_km: 0.01,
            shadowing: true,
            fading: true,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |field, reason: &str| {
            Err(ModelError::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        if !(self.bandwidth_mhz > 0.0) {
            return bad("channel.bandwidth_mhz", "must be positive");
        }
        if self.num_taps == 0 {
            return bad("channel.num_taps", "must be at least 1");
        }
        if !(self.tap_decay_us > 0.0) {
            return bad("channel.tap_decay_us", "must be positive");
        }
        if !(self.reference_gain > 0.0) {
            return bad("channel.reference_gain", "must be positive");
        }
        if !(self.min_distance_km > 0.0) {
            return bad("channel.min_distance_km", "must be positive");
        }
        Ok(())
    }
}

/// Node positions in km. The BS sits at the centre of the PU square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLayout {
    /// Indexed by PU node (`2k`, `2k + 1` for pair `k`).
    pub pu: Vec<(f64, f64)>,
    pub su: Vec<(f64, f64)>,
    pub bs: (f64, f64),
}

pub fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

impl NodeLayout {
    pub fn pu_pu(&self, pair: usize) -> f64 {
        distance(self.pu[2 * pair], self.pu[2 * pair + 1])
    }

    pub fn pu_su(&self, pu_node: usize, su: usize) -> f64 {
        distance(self.pu[pu_node], self.su[su])
    }

    pub fn su_bs(&self, su: usize) -> f64 {
        distance(self.su[su], self.bs)
    }
}

/// PU nodes uniform in the square, SUs uniform over the cell disc.
pub fn place_nodes<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> NodeLayout {
    let side = config.area_side_km;
    let bs = (side / 2.0, side / 2.0);
    let pu = (0..2 * config.num_pu_pairs)
        .map(|_| (rng.gen::<f64>() * side, rng.gen::<f64>() * side))
        .collect();
    let su = (0..config.num_sus)
        .map(|_| {
            let r = config.cell_radius_km * rng.gen::<f64>().sqrt();
            let phi = 2.0 * PI * rng.gen::<f64>();
            (bs.0 + r * phi.cos(), bs.1 + r * phi.sin())
        })
        .collect();
    NodeLayout { pu, su, bs }
}

/// `G0 · d^(−exponent) · 10^(shadow/10)` with `d` clamped to the minimum
/// distance.
pub fn link_gain_large_scale(distance_km: f64, config: &ScenarioConfig, shadow_db: f64) -> f64 {
    let d = distance_km.max(config.channel.min_distance_km);
    config.channel.reference_gain * d.powf(-config.path_loss_exponent) * 10f64.powf(shadow_db / 10.0)
}

/// Power delay profile of the small-scale fading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TapProfile {
    pub delays_us: Vec<f64>,
    /// Mean tap powers, normalized to sum to one.
    pub powers: Vec<f64>,
}

impl TapProfile {
    /// `taps` delays evenly spread over `[0, max_delay_us]` with
    /// exponentially decaying mean powers.
    pub fn exponential(taps: usize, max_delay_us: f64, decay_us: f64) -> Self {
        let delays_us: Vec<f64> = if taps <= 1 {
            vec![0.0]
        } else {
            (0..taps)
                .map(|l| max_delay_us * l as f64 / (taps - 1) as f64)
                .collect()
        };
        let raw: Vec<f64> = delays_us.iter().map(|t| (-t / decay_us).exp()).collect();
        let total: f64 = raw.iter().sum();
        Self {
            delays_us,
            powers: raw.into_iter().map(|p| p / total).collect(),
        }
    }

    pub fn single_tap() -> Self {
        Self {
            delays_us: vec![0.0],
            powers: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.delays_us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays_us.is_empty()
    }
}

/// `|Σ_l h_l e^(−j2π n Δf τ_l)|²` for `n = 0..num_subcarriers`.
pub fn response_from_taps(
    amplitudes: &[Complex64],
    delays_us: &[f64],
    spacing_mhz: f64,
    num_subcarriers: usize,
) -> Vec<f64> {
    (0..num_subcarriers)
        .map(|n| {
            amplitudes
                .iter()
                .zip(delays_us)
                .map(|(h, tau)| h * Complex64::from_polar(1.0, -2.0 * PI * n as f64 * spacing_mhz * tau))
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect()
}

/// One Rayleigh realization of the per-subcarrier power gains.
pub fn frequency_response<R: Rng + ?Sized>(
    taps: &TapProfile,
    spacing_mhz: f64,
    num_subcarriers: usize,
    rng: &mut R,
) -> Vec<f64> {
    let amplitudes: Vec<Complex64> = taps
        .powers
        .iter()
        .map(|p| {
            let s = (p / 2.0).sqrt();
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(s * re, s * im)
        })
        .collect();
    response_from_taps(&amplitudes, &taps.delays_us, spacing_mhz, num_subcarriers)
}

/// Per-link gain over all subcarriers: one shadowing draw, one fading draw.
fn draw_link<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    taps: &TapProfile,
    shadow: &Normal<f64>,
    distance_km: f64,
    rng: &mut R,
) -> Vec<f64> {
    let n = config.num_subcarriers;
    let shadow_db = if config.channel.shadowing {
        shadow.sample(rng)
    } else {
        0.0
    };
    let large = link_gain_large_scale(distance_km, config, shadow_db);
    if config.channel.fading {
        let spacing = config.channel.bandwidth_mhz / n as f64;
        frequency_response(taps, spacing, n, rng)
            .into_iter()
            .map(|g| large * g)
            .collect()
    } else {
        vec![large; n]
    }
}

/// Draws a full realization. The RNG is seeded from `config.rng_seed`, so
/// equal configurations give bit-identical instances.
///
/// Draw order: node positions, then PU-PU links by pair, PU-SU links by
/// (PU node, SU), SU-BS links by SU.
pub fn generate_instance(config: &ScenarioConfig) -> Result<(NetworkInstance, NodeLayout), ModelError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let layout = place_nodes(config, &mut rng);
    let taps = TapProfile::exponential(
        config.channel.num_taps,
        config.max_delay_spread_us,
        config.channel.tap_decay_us,
    );
    let shadow = Normal::new(0.0, config.shadowing_std_db).map_err(|e| ModelError::InvalidConfig {
        field: "shadowing_std_db",
        reason: e.to_string(),
    })?;
    let dims = config.dims();

    let direct_gain = (0..dims.pu_pairs)
        .map(|k| draw_link(config, &taps, &shadow, layout.pu_pu(k), &mut rng))
        .collect();
    let pu_su_gain = (0..dims.pu_nodes())
        .map(|p| {
            (0..dims.sus)
                .map(|s| draw_link(config, &taps, &shadow, layout.pu_su(p, s), &mut rng))
                .collect()
        })
        .collect();
    let su_bs_gain = (0..dims.sus)
        .map(|s| draw_link(config, &taps, &shadow, layout.su_bs(s), &mut rng))
        .collect();

    let inst = NetworkInstance {
        dims,
        num_subcarriers: config.num_subcarriers,
        direct_gain,
        pu_su_gain,
        su_bs_gain,
        peak_power: vec![config.peak_power; dims.users()],
        rate_requirement: vec![config.pu_rate_requirement; dims.pu_nodes()],
        su_weight: config.su_weight_vec(),
        noise_variance: config.noise_variance,
    };
    Ok((inst, layout))
}

/// On-disk form of an instance: the generating configuration plus every
/// gain array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub config: ScenarioConfig,
    pub layout: Option<NodeLayout>,
    pub instance: NetworkInstance,
}

pub fn save_instance(path: &Path, file: &InstanceFile) -> std::io::Result<()> {
    let json = serde_json::to_string_pretty(file)?;
    std::fs::write(path, json)
}

pub fn load_instance(path: &Path) -> std::io::Result<InstanceFile> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

/// Convenience used by the relay-selection baseline.
pub fn pu_su_distance(layout: &NodeLayout, pair: usize, side: Side, su: usize) -> f64 {
    layout.pu_su(2 * pair + side.index(), su)
}
