//! Domain types shared by every solver stage, plus instance and allocation
//! validation.
//!
//! Index conventions used throughout the crate:
//!
//! * PU pair `k` owns the two PU nodes `2k` (first node) and `2k + 1`
//!   (second node).
//! * Users are numbered PU nodes first, then SUs: SU `s` is user `2K_P + s`.
//! * PU rates are attributed to the receiving node, so a PU node's rate
//!   requirement constrains the traffic delivered *to* it.
//! * Dual vectors are flattened as `[λ_pu (2K_P), λ_su (K_S), β (2K_P)]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelParams;

/// Shannon capacity `log2(1 + x)` in bits.
#[inline]
pub fn capacity(snr: f64) -> f64 {
    snr.ln_1p() / std::f64::consts::LN_2
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid configuration: {field} {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
}

/// Counts of PU pairs and SUs; everything else is derived from these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub pu_pairs: usize,
    pub sus: usize,
}

impl Dims {
    pub fn new(pu_pairs: usize, sus: usize) -> Self {
        Self { pu_pairs, sus }
    }

    pub fn pu_nodes(&self) -> usize {
        2 * self.pu_pairs
    }

    pub fn users(&self) -> usize {
        2 * self.pu_pairs + self.sus
    }

    /// Number of dual multipliers: one λ per user and one β per PU node.
    pub fn dual_dim(&self) -> usize {
        4 * self.pu_pairs + self.sus
    }

    pub fn pu_node(&self, pair: usize, side: Side) -> usize {
        2 * pair + side.index()
    }

    pub fn su_user(&self, su: usize) -> usize {
        2 * self.pu_pairs + su
    }

    /// Candidates enumerated per subcarrier by the full search:
    /// idle, every direct mode, every one-way relay choice and every
    /// two-way relay choice.
    pub fn full_candidate_count(&self) -> usize {
        1 + 2 * self.pu_pairs + self.sus + 3 * self.pu_pairs * self.sus
    }
}

/// One of the two nodes of a PU pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    First,
    Second,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::First => 0,
            Side::Second => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::First => Side::Second,
            Side::Second => Side::First,
        }
    }
}

/// Ordered (source, destination) within a PU pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    /// First node transmits to the second.
    Forward,
    /// Second node transmits to the first.
    Backward,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Forward, Direction::Backward];

    pub fn source(self) -> Side {
        match self {
            Direction::Forward => Side::First,
            Direction::Backward => Side::Second,
        }
    }

    pub fn destination(self) -> Side {
        self.source().other()
    }
}

/// Per-experiment scenario parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub num_subcarriers: usize,
    pub num_pu_pairs: usize,
    pub num_sus: usize,
    /// Peak (total) power of every user, linear units relative to the noise.
    pub peak_power: f64,
    /// Rate every PU node must receive, bits per OFDM symbol.
    pub pu_rate_requirement: f64,
    pub noise_variance: f64,
    pub path_loss_exponent: f64,
    pub shadowing_std_db: f64,
    pub max_delay_spread_us: f64,
    /// Per-SU objective weights; `None` weighs every SU by one.
    pub su_weights: Option<Vec<f64>>,
    pub area_side_km: f64,
    pub cell_radius_km: f64,
    pub rng_seed: u64,
    pub channel: ChannelParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_subcarriers: 64,
            num_pu_pairs: 2,
            num_sus: 4,
            peak_power: 10.0,
            pu_rate_requirement: 5.0,
            noise_variance: 1.0,
            path_loss_exponent: 4.0,
            shadowing_std_db: 5.8,
            max_delay_spread_us: 5.0,
            su_weights: None,
            area_side_km: 1.0,
            cell_radius_km: 1.0,
            rng_seed: 0,
            channel: ChannelParams::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn dims(&self) -> Dims {
        Dims::new(self.num_pu_pairs, self.num_sus)
    }

    pub fn su_weight_vec(&self) -> Vec<f64> {
        self.su_weights
            .clone()
            .unwrap_or_else(|| vec![1.0; self.num_sus])
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        fn bad(field: &'static str, reason: impl Into<String>) -> Result<(), ModelError> {
            Err(ModelError::InvalidConfig {
                field,
                reason: reason.into(),
            })
        }
        if self.num_subcarriers == 0 {
            return bad("num_subcarriers", "must be at least 1");
        }
        if self.num_pu_pairs == 0 {
            return bad("num_pu_pairs", "must be at least 1");
        }
        if self.num_sus == 0 {
            return bad("num_sus", "must be at least 1");
        }
        if !(self.peak_power > 0.0 && self.peak_power.is_finite()) {
            return bad("peak_power", "must be positive and finite");
        }
        if !(self.pu_rate_requirement >= 0.0 && self.pu_rate_requirement.is_finite()) {
            return bad("pu_rate_requirement", "must be nonnegative and finite");
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return bad("noise_variance", "must be positive and finite");
        }
        if !(self.path_loss_exponent > 0.0) {
            return bad("path_loss_exponent", "must be positive");
        }
        if !(self.shadowing_std_db >= 0.0) {
            return bad("shadowing_std_db", "must be nonnegative");
        }
        if !(self.max_delay_spread_us >= 0.0) {
            return bad("max_delay_spread_us", "must be nonnegative");
        }
        if !(self.area_side_km > 0.0) {
            return bad("area_side_km", "must be positive");
        }
        if !(self.cell_radius_km > 0.0) {
            return bad("cell_radius_km", "must be positive");
        }
        if let Some(w) = &self.su_weights {
            if w.len() != self.num_sus {
                return bad(
                    "su_weights",
                    format!("has {} entries for {} SUs", w.len(), self.num_sus),
                );
            }
            if w.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return bad("su_weights", "entries must be nonnegative and finite");
            }
        }
        self.channel.validate()
    }
}

/// Channel power gains and constraints of one network realization.
///
/// Gains are raw linear power gains; solvers divide them by
/// `noise_variance` to obtain per-unit-power SNRs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkInstance {
    pub dims: Dims,
    pub num_subcarriers: usize,
    /// `[pair][n]`: gain between the two nodes of a PU pair.
    pub direct_gain: Vec<Vec<f64>>,
    /// `[pu node][su][n]`: gain between a PU node and an SU.
    pub pu_su_gain: Vec<Vec<Vec<f64>>>,
    /// `[su][n]`: gain between an SU and the base station.
    pub su_bs_gain: Vec<Vec<f64>>,
    /// `[user]`: peak total power.
    pub peak_power: Vec<f64>,
    /// `[pu node]`: rate the node must receive.
    pub rate_requirement: Vec<f64>,
    /// `[su]`: objective weight.
    pub su_weight: Vec<f64>,
    pub noise_variance: f64,
}

impl NetworkInstance {
    /// Instance with every gain set to zero; handy for tests and as a
    /// starting point for hand-built scenarios.
    pub fn zeroed(
        dims: Dims,
        num_subcarriers: usize,
        peak_power: f64,
        rate_requirement: f64,
    ) -> Self {
        let n = num_subcarriers;
        Self {
            dims,
            num_subcarriers: n,
            direct_gain: vec![vec![0.0; n]; dims.pu_pairs],
            pu_su_gain: vec![vec![vec![0.0; n]; dims.sus]; dims.pu_nodes()],
            su_bs_gain: vec![vec![0.0; n]; dims.sus],
            peak_power: vec![peak_power; dims.users()],
            rate_requirement: vec![rate_requirement; dims.pu_nodes()],
            su_weight: vec![1.0; dims.sus],
            noise_variance: 1.0,
        }
    }
}

/// Where an invariant of an instance or dual point is broken.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub index: Vec<usize>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{:?}: {}", self.field, self.index, self.message)
    }
}

fn check_gain_table(
    out: &mut Vec<Violation>,
    field: &'static str,
    rows: &[Vec<f64>],
    expected_rows: usize,
    n: usize,
    prefix: &[usize],
) {
    if rows.len() != expected_rows {
        out.push(Violation {
            field,
            index: prefix.to_vec(),
            message: format!("expected {expected_rows} rows, found {}", rows.len()),
        });
        return;
    }
    for (i, row) in rows.iter().enumerate() {
        let mut idx = prefix.to_vec();
        idx.push(i);
        if row.len() != n {
            out.push(Violation {
                field,
                index: idx,
                message: format!("expected {n} subcarriers, found {}", row.len()),
            });
            continue;
        }
        for (j, &g) in row.iter().enumerate() {
            if !(g >= 0.0 && g.is_finite()) {
                let mut at = idx.clone();
                at.push(j);
                out.push(Violation {
                    field,
                    index: at,
                    message: format!("gain {g} is negative or not finite"),
                });
            }
        }
    }
}

/// Lists every broken invariant of `inst`; an empty list means the
/// instance is well formed.
pub fn validate_instance(inst: &NetworkInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let d = inst.dims;
    let n = inst.num_subcarriers;
    if n == 0 {
        out.push(Violation {
            field: "num_subcarriers",
            index: vec![],
            message: "must be at least 1".into(),
        });
    }
    if d.pu_pairs == 0 || d.sus == 0 {
        out.push(Violation {
            field: "dims",
            index: vec![],
            message: "need at least one PU pair and one SU".into(),
        });
    }
    check_gain_table(&mut out, "direct_gain", &inst.direct_gain, d.pu_pairs, n, &[]);
    if inst.pu_su_gain.len() != d.pu_nodes() {
        out.push(Violation {
            field: "pu_su_gain",
            index: vec![],
            message: format!(
                "expected {} PU nodes, found {}",
                d.pu_nodes(),
                inst.pu_su_gain.len()
            ),
        });
    } else {
        for (p, per_su) in inst.pu_su_gain.iter().enumerate() {
            check_gain_table(&mut out, "pu_su_gain", per_su, d.sus, n, &[p]);
        }
    }
    check_gain_table(&mut out, "su_bs_gain", &inst.su_bs_gain, d.sus, n, &[]);

    let mut vector = |field: &'static str, v: &[f64], len: usize, ok: fn(f64) -> bool, what: &str| {
        if v.len() != len {
            out.push(Violation {
                field,
                index: vec![],
                message: format!("expected {len} entries, found {}", v.len()),
            });
            return;
        }
        for (i, &x) in v.iter().enumerate() {
            if !ok(x) {
                out.push(Violation {
                    field,
                    index: vec![i],
                    message: format!("{x} is not {what}"),
                });
            }
        }
    };
    vector(
        "peak_power",
        &inst.peak_power,
        d.users(),
        |x| x > 0.0 && x.is_finite(),
        "positive and finite",
    );
    vector(
        "rate_requirement",
        &inst.rate_requirement,
        d.pu_nodes(),
        |x| x >= 0.0 && x.is_finite(),
        "nonnegative and finite",
    );
    vector(
        "su_weight",
        &inst.su_weight,
        d.sus,
        |x| x >= 0.0 && x.is_finite(),
        "nonnegative and finite",
    );
    if !(inst.noise_variance > 0.0 && inst.noise_variance.is_finite()) {
        out.push(Violation {
            field: "noise_variance",
            index: vec![],
            message: format!("{} is not positive and finite", inst.noise_variance),
        });
    }
    out
}

/// Lagrange multipliers: `lambda_pu`/`lambda_su` price power, `beta`
/// rewards rate delivered to each PU node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambda_pu: Vec<f64>,
    pub lambda_su: Vec<f64>,
    pub beta: Vec<f64>,
}

impl DualState {
    pub fn uniform(dims: Dims, value: f64) -> Self {
        Self {
            lambda_pu: vec![value; dims.pu_nodes()],
            lambda_su: vec![value; dims.sus],
            beta: vec![value; dims.pu_nodes()],
        }
    }

    pub fn dim(&self) -> usize {
        self.lambda_pu.len() + self.lambda_su.len() + self.beta.len()
    }

    /// λ of a user in the crate-wide user numbering.
    pub fn lambda(&self, user: usize) -> f64 {
        if user < self.lambda_pu.len() {
            self.lambda_pu[user]
        } else {
            self.lambda_su[user - self.lambda_pu.len()]
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.lambda_pu);
        v.extend_from_slice(&self.lambda_su);
        v.extend_from_slice(&self.beta);
        v
    }

    pub fn from_slice(dims: Dims, v: &[f64]) -> Result<Self, ModelError> {
        if v.len() != dims.dual_dim() {
            return Err(ModelError::DimensionMismatch {
                what: "dual vector",
                expected: dims.dual_dim(),
                found: v.len(),
            });
        }
        let a = dims.pu_nodes();
        let b = a + dims.sus;
        Ok(Self {
            lambda_pu: v[..a].to_vec(),
            lambda_su: v[a..b].to_vec(),
            beta: v[b..].to_vec(),
        })
    }

    /// Copy with every λ raised to at least `floor`; β is left alone.
    pub fn with_lambda_floor(&self, floor: f64) -> Self {
        Self {
            lambda_pu: self.lambda_pu.iter().map(|x| x.max(floor)).collect(),
            lambda_su: self.lambda_su.iter().map(|x| x.max(floor)).collect(),
            beta: self.beta.clone(),
        }
    }
}

/// Checks a dual point against an instance: dimensions and sign.
pub fn validate_dual(inst: &NetworkInstance, dual: &DualState) -> Vec<Violation> {
    let d = inst.dims;
    let mut out = Vec::new();
    for (field, v, len) in [
        ("lambda_pu", &dual.lambda_pu, d.pu_nodes()),
        ("lambda_su", &dual.lambda_su, d.sus),
        ("beta", &dual.beta, d.pu_nodes()),
    ] {
        if v.len() != len {
            out.push(Violation {
                field,
                index: vec![],
                message: format!("expected {len} multipliers, found {}", v.len()),
            });
            continue;
        }
        for (i, &x) in v.iter().enumerate() {
            if !(x >= 0.0 && x.is_finite()) {
                out.push(Violation {
                    field,
                    index: vec![i],
                    message: format!("multiplier {x} is negative or not finite"),
                });
            }
        }
    }
    out
}

/// Transmission mode of one subcarrier together with the users it involves.
///
/// Variant order is the tie-break order used by the candidate search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Idle,
    DirectPu { pair: usize, dir: Direction },
    DirectSu { su: usize },
    OneWay { pair: usize, dir: Direction, su: usize },
    TwoWay { pair: usize, su: usize },
}

impl Mode {
    pub fn ordinal(&self) -> u8 {
        match self {
            Mode::Idle => 0,
            Mode::DirectPu { .. } => 1,
            Mode::DirectSu { .. } => 2,
            Mode::OneWay { .. } => 3,
            Mode::TwoWay { .. } => 4,
        }
    }

    pub fn pair(&self) -> Option<usize> {
        match *self {
            Mode::DirectPu { pair, .. } | Mode::OneWay { pair, .. } | Mode::TwoWay { pair, .. } => {
                Some(pair)
            }
            _ => None,
        }
    }

    pub fn su(&self) -> Option<usize> {
        match *self {
            Mode::DirectSu { su } | Mode::OneWay { su, .. } | Mode::TwoWay { su, .. } => Some(su),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Mode::Idle => "idle",
            Mode::DirectPu { .. } => "direct_pu",
            Mode::DirectSu { .. } => "direct_su",
            Mode::OneWay { .. } => "oneway_df",
            Mode::TwoWay { .. } => "twoway_df",
        }
    }
}

/// Diagnostics attached to a candidate by the closed-form solvers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateNotes {
    /// A zero power price met a positive reward; the optimum is unbounded.
    pub unbounded: bool,
    /// Two-way: a broadcast-phase rate cap cut the multiple-access rates.
    pub bc_capped: bool,
    /// Two-way: the relay is active but one direction carries nothing.
    pub one_way_optimal: bool,
}

/// One evaluated (mode, powers, rates) choice on a subcarrier.
///
/// `pu_power` and `pu_rate` are indexed by [`Side`] of the mode's pair.
/// `pu_rate[side]` is the rate delivered to that node. `su_rate` is the
/// unweighted own-traffic rate of the mode's SU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierCandidate {
    pub mode: Mode,
    pub pu_power: [f64; 2],
    pub su_power: f64,
    pub pu_rate: [f64; 2],
    pub su_rate: f64,
    /// `true` when the SU uses the subcarrier for its own traffic.
    pub su_transmits: bool,
    /// Per-subcarrier Lagrangian contribution at the evaluating dual point.
    pub value: f64,
    pub notes: CandidateNotes,
}

impl SubcarrierCandidate {
    pub fn idle() -> Self {
        Self::empty(Mode::Idle)
    }

    /// A candidate for `mode` with nothing transmitted.
    pub fn empty(mode: Mode) -> Self {
        Self {
            mode,
            pu_power: [0.0; 2],
            su_power: 0.0,
            pu_rate: [0.0; 2],
            su_rate: 0.0,
            su_transmits: false,
            value: 0.0,
            notes: CandidateNotes::default(),
        }
    }

    /// `(user, power)` for every user the mode charges.
    pub fn power_entries(&self, dims: Dims) -> impl Iterator<Item = (usize, f64)> {
        let mut e: [(usize, f64); 3] = [(usize::MAX, 0.0); 3];
        if let Some(pair) = self.mode.pair() {
            e[0] = (dims.pu_node(pair, Side::First), self.pu_power[0]);
            e[1] = (dims.pu_node(pair, Side::Second), self.pu_power[1]);
        }
        if let Some(su) = self.mode.su() {
            e[2] = (dims.su_user(su), self.su_power);
        }
        e.into_iter().filter(|(u, _)| *u != usize::MAX)
    }

    /// `(pu node, rate)` for every PU node the mode serves.
    pub fn rate_entries(&self, dims: Dims) -> impl Iterator<Item = (usize, f64)> {
        let mut e: [(usize, f64); 2] = [(usize::MAX, 0.0); 2];
        if let Some(pair) = self.mode.pair() {
            e[0] = (dims.pu_node(pair, Side::First), self.pu_rate[0]);
            e[1] = (dims.pu_node(pair, Side::Second), self.pu_rate[1]);
        }
        e.into_iter().filter(|(u, _)| *u != usize::MAX)
    }
}

/// A full N-subcarrier assignment with its per-user totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub candidates: Vec<SubcarrierCandidate>,
    /// `[user]`: total power spent.
    pub user_power: Vec<f64>,
    /// `[pu node]`: total rate received.
    pub pu_rate: Vec<f64>,
    /// `[su]`: total own-traffic rate (unweighted).
    pub su_rate: Vec<f64>,
    /// Objective: Σ_s w_s · su_rate[s].
    pub weighted_sum_rate: f64,
}

impl Allocation {
    /// Sums per-subcarrier values in subcarrier order.
    pub fn from_candidates(
        dims: Dims,
        su_weight: &[f64],
        candidates: Vec<SubcarrierCandidate>,
    ) -> Self {
        let mut user_power = vec![0.0; dims.users()];
        let mut pu_rate = vec![0.0; dims.pu_nodes()];
        let mut su_rate = vec![0.0; dims.sus];
        for c in &candidates {
            for (u, p) in c.power_entries(dims) {
                user_power[u] += p;
            }
            for (node, r) in c.rate_entries(dims) {
                pu_rate[node] += r;
            }
            if let Some(su) = c.mode.su() {
                su_rate[su] += c.su_rate;
            }
        }
        let weighted_sum_rate = su_rate
            .iter()
            .zip(su_weight)
            .map(|(r, w)| r * w)
            .sum();
        Self {
            candidates,
            user_power,
            pu_rate,
            su_rate,
            weighted_sum_rate,
        }
    }

    pub fn idle(dims: Dims, su_weight: &[f64], num_subcarriers: usize) -> Self {
        Self::from_candidates(
            dims,
            su_weight,
            vec![SubcarrierCandidate::idle(); num_subcarriers],
        )
    }
}

/// Result of checking an allocation against the power and rate constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// `[user]`: `(spent, cap)`.
    pub power: Vec<(f64, f64)>,
    /// `[pu node]`: `(received, required)`.
    pub rate: Vec<(f64, f64)>,
    /// Largest `(spent − cap) / cap`, floored at zero.
    pub max_power_violation: f64,
    /// Largest `(required − received) / required`, floored at zero.
    pub max_rate_shortfall: f64,
}

pub fn feasibility_check(
    inst: &NetworkInstance,
    alloc: &Allocation,
    eps_power: f64,
    eps_rate: f64,
) -> Result<FeasibilityReport, ModelError> {
    let d = inst.dims;
    if alloc.candidates.len() != inst.num_subcarriers {
        return Err(ModelError::DimensionMismatch {
            what: "allocation subcarriers",
            expected: inst.num_subcarriers,
            found: alloc.candidates.len(),
        });
    }
    if alloc.user_power.len() != d.users() {
        return Err(ModelError::DimensionMismatch {
            what: "allocation users",
            expected: d.users(),
            found: alloc.user_power.len(),
        });
    }
    if alloc.pu_rate.len() != d.pu_nodes() {
        return Err(ModelError::DimensionMismatch {
            what: "allocation PU nodes",
            expected: d.pu_nodes(),
            found: alloc.pu_rate.len(),
        });
    }
    let mut feasible = true;
    let mut max_power_violation: f64 = 0.0;
    let mut max_rate_shortfall: f64 = 0.0;
    let power: Vec<(f64, f64)> = alloc
        .user_power
        .iter()
        .zip(&inst.peak_power)
        .map(|(&p, &cap)| {
            if p > cap * (1.0 + eps_power) {
                feasible = false;
            }
            max_power_violation = max_power_violation.max((p - cap) / cap);
            (p, cap)
        })
        .collect();
    let rate: Vec<(f64, f64)> = alloc
        .pu_rate
        .iter()
        .zip(&inst.rate_requirement)
        .map(|(&r, &req)| {
            if r < req * (1.0 - eps_rate) {
                feasible = false;
            }
            if req > 0.0 {
                max_rate_shortfall = max_rate_shortfall.max((req - r) / req);
            }
            (r, req)
        })
        .collect();
    Ok(FeasibilityReport {
        feasible,
        power,
        rate,
        max_power_violation,
        max_rate_shortfall,
    })
}

/// Summary of one scheme run on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    /// Dual optimum of the scheme's candidate set, bits/OFDM symbol.
    pub dual_bound: f64,
    /// Weighted SU sum-rate of the recovered allocation.
    pub primal_sum_rate: f64,
    pub feasible: bool,
    pub max_power_violation: f64,
    pub max_rate_shortfall: f64,
    /// Outer ellipsoid iterations (dual phase plus recovery phase).
    pub iterations: usize,
    pub dual_converged: bool,
    pub wall_time: f64,
}

impl SolverReport {
    /// `(dual_bound − primal) / dual_bound`, zero when the bound is zero.
    pub fn relative_gap(&self) -> f64 {
        if self.dual_bound.abs() <= f64::EPSILON {
            0.0
        } else {
            (self.dual_bound - self.primal_sum_rate) / self.dual_bound
        }
    }
}
