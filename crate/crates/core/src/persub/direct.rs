use super::{water_fill, LN2};
use crate::model::capacity;

/// Optimal single-link water-filling power with its rate and Lagrangian
/// value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectSolution {
    pub power: f64,
    pub rate: f64,
    pub value: f64,
    /// Zero power price with positive reward: no finite optimum.
    pub unbounded: bool,
}

impl DirectSolution {
    pub const ZERO: Self = Self {
        power: 0.0,
        rate: 0.0,
        value: 0.0,
        unbounded: false,
    };

    const UNBOUNDED: Self = Self {
        power: f64::INFINITY,
        rate: f64::INFINITY,
        value: f64::INFINITY,
        unbounded: true,
    };
}

fn weighted_link(gain: f64, price: f64, weight: f64) -> DirectSolution {
    if gain <= 0.0 || weight <= 0.0 {
        return DirectSolution::ZERO;
    }
    if price <= 0.0 {
        return DirectSolution::UNBOUNDED;
    }
    let power = water_fill(weight / (LN2 * price), gain);
    let rate = capacity(power * gain);
    DirectSolution {
        power,
        rate,
        value: weight * rate - price * power,
        unbounded: false,
    }
}

/// PU source transmits straight to its partner: maximizes
/// `β_dst · C(P γ) − λ_src · P`.
pub fn solve_direct_pu(gain: f64, lambda_src: f64, beta_dst: f64) -> DirectSolution {
    weighted_link(gain, lambda_src, beta_dst)
}

/// SU uses the subcarrier for its own uplink: maximizes
/// `w · C(P γs) − λ_S · P`.
pub fn solve_direct_su(gain: f64, lambda_su: f64, weight: f64) -> DirectSolution {
    weighted_link(gain, lambda_su, weight)
}
