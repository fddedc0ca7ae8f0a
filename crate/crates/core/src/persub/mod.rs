//! Closed-form maximizers of the per-subcarrier Lagrangian, one per
//! transmission mode, at fixed dual variables.
//!
//! All scalar entry points take SNR gains (channel gain divided by the noise
//! variance). Functions taking [`ModeInputs`] normalize internally.

mod direct;
mod oneway;
mod twoway;

pub use direct::{solve_direct_pu, solve_direct_su, DirectSolution};
pub use oneway::{solve_oneway_df, solve_oneway_relay, OneWaySolution, RelaySolution};
pub use twoway::{
    best_twoway_rates, solve_twoway, solve_twoway_bc, solve_twoway_mac, InnerOptions,
    MacSolution, TwoWaySolution,
};

use crate::model::{Direction, Mode, Side, SubcarrierCandidate};

/// `ln 2`: converts natural-log derivatives of `log2` rates.
pub const LN2: f64 = std::f64::consts::LN_2;

/// Gains and prices seen by one candidate on one subcarrier.
///
/// "First" and "second" name the two PU nodes involved. For direct and
/// one-way modes the first node is the source; for two-way the first node
/// is the pair's first node. `gain_first_relay` is the first node ↔ SU gain,
/// `gain_second_relay` the SU ↔ second node gain.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeInputs {
    pub gain_direct: f64,
    pub gain_first_relay: f64,
    pub gain_second_relay: f64,
    pub gain_su_bs: f64,
    pub lambda_first: f64,
    pub lambda_second: f64,
    pub lambda_su: f64,
    pub beta_first: f64,
    pub beta_second: f64,
    pub su_weight: f64,
    pub noise_variance: f64,
}

impl ModeInputs {
    /// Gains divided by the noise variance, noise set to one.
    pub fn normalized(&self) -> Self {
        let nv = if self.noise_variance > 0.0 {
            self.noise_variance
        } else {
            1.0
        };
        Self {
            gain_direct: self.gain_direct / nv,
            gain_first_relay: self.gain_first_relay / nv,
            gain_second_relay: self.gain_second_relay / nv,
            gain_su_bs: self.gain_su_bs / nv,
            noise_variance: 1.0,
            ..*self
        }
    }
}

/// `(level − 1/gain)⁺`, zero for a dead channel.
#[inline]
pub(crate) fn water_fill(level: f64, gain: f64) -> f64 {
    if gain <= 0.0 || !(level > 0.0) {
        0.0
    } else {
        (level - 1.0 / gain).max(0.0)
    }
}

/// Knobs for [`solve_mode`].
#[derive(Debug, Clone, Copy)]
pub struct ModeContext<'a> {
    pub inner: &'a InnerOptions,
    /// Two-way solves stop early once their upper bound drops to this value.
    pub prune_below: f64,
    /// One-way: evaluate only the relaying branch (`t = 0`).
    pub relay_only: bool,
}

/// Solves `mode` and packs the result as a candidate. `inputs` must be
/// oriented as described on [`ModeInputs`] for that mode.
pub fn solve_mode(mode: Mode, inputs: &ModeInputs, ctx: &ModeContext<'_>) -> SubcarrierCandidate {
    let inp = inputs.normalized();
    match mode {
        Mode::Idle => SubcarrierCandidate::idle(),
        Mode::DirectPu { dir, .. } => {
            let s = solve_direct_pu(inp.gain_direct, inp.lambda_first, inp.beta_second);
            let mut c = SubcarrierCandidate::empty(mode);
            c.pu_power[dir.source().index()] = s.power;
            c.pu_rate[dir.destination().index()] = s.rate;
            c.value = s.value;
            c.notes.unbounded = s.unbounded;
            c
        }
        Mode::DirectSu { .. } => su_candidate(mode, solve_direct_su(inp.gain_su_bs, inp.lambda_su, inp.su_weight)),
        Mode::OneWay { dir, .. } => {
            if ctx.relay_only {
                match solve_oneway_relay(&inp) {
                    Some(r) => relay_candidate(mode, dir, &r),
                    None => SubcarrierCandidate::empty(mode),
                }
            } else {
                let s = solve_oneway_df(&inp);
                match (&s.relay, s.su_transmits) {
                    (Some(r), false) => relay_candidate(mode, dir, r),
                    _ if s.own.power > 0.0 || s.own.unbounded => su_candidate(mode, s.own),
                    _ => SubcarrierCandidate::idle(),
                }
            }
        }
        Mode::TwoWay { .. } => {
            let s = solve_twoway(&inp, ctx.inner, ctx.prune_below);
            let mut c = SubcarrierCandidate::empty(mode);
            c.pu_power = s.pu_power;
            c.su_power = s.su_power;
            c.pu_rate = s.pu_rate;
            c.value = s.value;
            c.notes = s.notes;
            c
        }
    }
}

fn su_candidate(mode: Mode, s: DirectSolution) -> SubcarrierCandidate {
    let mut c = SubcarrierCandidate::empty(mode);
    c.su_power = s.power;
    c.su_rate = s.rate;
    c.su_transmits = true;
    c.value = s.value;
    c.notes.unbounded = s.unbounded;
    c
}

fn relay_candidate(mode: Mode, dir: Direction, r: &RelaySolution) -> SubcarrierCandidate {
    let mut c = SubcarrierCandidate::empty(mode);
    c.pu_power[dir.source().index()] = r.source_power;
    c.su_power = r.relay_power;
    c.pu_rate[dir.destination().index()] = r.rate;
    c.value = r.value;
    c.notes.unbounded = r.unbounded;
    c
}

/// Rates a fixed-mode candidate achieves with the given powers, used after
/// powers are rescaled. `inputs` oriented as for [`solve_mode`]; `beta`
/// orders the two-way rate split.
pub fn rates_for_powers(c: &SubcarrierCandidate, inputs: &ModeInputs) -> SubcarrierCandidate {
    use crate::model::capacity;
    let inp = inputs.normalized();
    let mut out = *c;
    match c.mode {
        Mode::Idle => {}
        Mode::DirectPu { dir, .. } => {
            let p = c.pu_power[dir.source().index()];
            out.pu_rate = [0.0; 2];
            out.pu_rate[dir.destination().index()] = capacity(p * inp.gain_direct);
        }
        Mode::DirectSu { .. } => {
            out.su_rate = capacity(c.su_power * inp.gain_su_bs);
        }
        Mode::OneWay { dir, .. } => {
            if c.su_transmits {
                out.su_rate = capacity(c.su_power * inp.gain_su_bs);
            } else {
                let p = c.pu_power[dir.source().index()];
                let first = capacity(p * inp.gain_first_relay);
                let second = capacity(p * inp.gain_direct + c.su_power * inp.gain_second_relay);
                out.pu_rate = [0.0; 2];
                out.pu_rate[dir.destination().index()] = 0.5 * first.min(second);
            }
        }
        Mode::TwoWay { .. } => {
            out.pu_rate = best_twoway_rates(
                c.pu_power,
                c.su_power,
                inp.gain_first_relay,
                inp.gain_second_relay,
                [inp.beta_first, inp.beta_second],
            );
        }
    }
    out
}

/// Side of the pair that transmits in a one-way or direct mode.
pub fn source_side(mode: Mode) -> Option<Side> {
    match mode {
        Mode::DirectPu { dir, .. } | Mode::OneWay { dir, .. } => Some(dir.source()),
        _ => None,
    }
}
