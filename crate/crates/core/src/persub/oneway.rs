use super::{direct::solve_direct_su, water_fill, DirectSolution, ModeInputs, LN2};
use crate::model::capacity;

/// Relaying branch (`t = 0`) of decode-and-forward one-way relaying.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaySolution {
    pub source_power: f64,
    pub relay_power: f64,
    /// Rate delivered to the destination over both hops.
    pub rate: f64,
    pub value: f64,
    pub unbounded: bool,
    /// Relay power spent per unit source power: `(γ1 − γ) / γ2`, or zero
    /// for a silent relay.
    pub relay_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneWaySolution {
    /// `None` when relaying cannot beat the direct link or the relay
    /// cannot reach the destination.
    pub relay: Option<RelaySolution>,
    /// The SU's own-traffic branch (`t = 1`).
    pub own: DirectSolution,
    /// Winning branch: `true` for `t = 1`.
    pub su_transmits: bool,
    pub value: f64,
}

/// Relaying branch alone: the better of a relay that matches the second
/// hop to the first (relay power tied to the source power by
/// `(γ1 − γ)/γ2`) and a silent relay, where the destination only hears the
/// source's first-phase transmission.
pub fn solve_oneway_relay(inputs: &ModeInputs) -> Option<RelaySolution> {
    let inp = inputs.normalized();
    let (g, g1, g2) = (inp.gain_direct, inp.gain_first_relay, inp.gain_second_relay);
    if !(g1 > g) {
        return None;
    }
    let beta = inp.beta_second;
    let zero = RelaySolution {
        source_power: 0.0,
        relay_power: 0.0,
        rate: 0.0,
        value: 0.0,
        unbounded: false,
        relay_ratio: 0.0,
    };
    if beta <= 0.0 {
        return Some(zero);
    }
    let unbounded = |ratio| RelaySolution {
        source_power: f64::INFINITY,
        relay_power: f64::INFINITY,
        rate: f64::INFINITY,
        value: f64::INFINITY,
        unbounded: true,
        relay_ratio: ratio,
    };
    // `P1` water-filled at `price` over `gain`, relay spending `ratio · P1`.
    let branch = |ratio: f64, price: f64, gain: f64| {
        if price <= 0.0 {
            return unbounded(ratio);
        }
        let source_power = water_fill(beta / (2.0 * LN2 * price), gain);
        let relay_power = ratio * source_power;
        let rate = 0.5 * capacity(source_power * gain);
        RelaySolution {
            source_power,
            relay_power,
            rate,
            value: beta * rate - inp.lambda_first * source_power - inp.lambda_su * relay_power,
            unbounded: false,
            relay_ratio: ratio,
        }
    };
    let silent = if g > 0.0 { branch(0.0, inp.lambda_first, g) } else { zero };
    if g2 <= 0.0 {
        return Some(silent);
    }
    let ratio = (g1 - g) / g2;
    let matched = branch(ratio, inp.lambda_first + inp.lambda_su * ratio, g1);
    Some(if silent.value > matched.value { silent } else { matched })
}

/// Best of the relaying branch and the SU-own branch; the time split is
/// binary so only the two endpoints are evaluated.
pub fn solve_oneway_df(inputs: &ModeInputs) -> OneWaySolution {
    let inp = inputs.normalized();
    let relay = solve_oneway_relay(&inp);
    let own = solve_direct_su(inp.gain_su_bs, inp.lambda_su, inp.su_weight);
    match relay {
        Some(r) if r.value > own.value => OneWaySolution {
            relay,
            own,
            su_transmits: false,
            value: r.value,
        },
        _ => OneWaySolution {
            relay,
            own,
            su_transmits: true,
            value: own.value,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> ModeInputs {
        ModeInputs {
            gain_direct: 0.0,
            gain_first_relay: 4.0,
            gain_second_relay: 2.0,
            gain_su_bs: 0.0,
            lambda_first: 1.0,
            lambda_second: 1.0,
            lambda_su: 0.5,
            beta_first: 0.0,
            beta_second: 4.0 * LN2,
            su_weight: 1.0,
            noise_variance: 1.0,
        }
    }

    #[test]
    fn relay_branch_closed_form() {
        let s = solve_oneway_df(&inputs());
        assert!(!s.su_transmits);
        let r = s.relay.unwrap();
        assert!((r.relay_ratio - 2.0).abs() < 1e-15);
        assert!((r.source_power - 0.75).abs() < 1e-12);
        assert!((r.relay_power - 1.5).abs() < 1e-12);
        assert!((r.rate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_useful_branch_when_direct_dominates_and_su_is_dead() {
        let inp = ModeInputs {
            gain_direct: 5.0,
            ..inputs()
        };
        let s = solve_oneway_df(&inp);
        assert!(s.relay.is_none());
        assert!(s.su_transmits);
        assert_eq!(s.value, 0.0);
        assert_eq!(s.own.power, 0.0);
    }

    #[test]
    fn dead_second_hop_leaves_a_silent_relay() {
        let inp = ModeInputs {
            gain_second_relay: 0.0,
            ..inputs()
        };
        assert_eq!(solve_oneway_relay(&inp).unwrap().value, 0.0);
        let inp = ModeInputs {
            gain_direct: 1.0,
            ..inp
        };
        let r = solve_oneway_relay(&inp).unwrap();
        assert_eq!(r.relay_power, 0.0);
        // Level β/(2a λ1) = 2, so P1 = 1 and the rate is ½ log2(2).
        assert!((r.source_power - 1.0).abs() < 1e-12);
        assert!((r.rate - 0.5).abs() < 1e-12);
    }

    #[test]
    fn expensive_relay_stays_silent() {
        let inp = ModeInputs {
            gain_direct: 3.0,
            gain_first_relay: 4.0,
            gain_second_relay: 0.01,
            lambda_su: 5.0,
            ..inputs()
        };
        let r = solve_oneway_relay(&inp).unwrap();
        assert_eq!(r.relay_power, 0.0);
        assert!((r.source_power - (2.0 - 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn stronger_first_hop_lowers_water_level() {
        // With γ2 and γ fixed, larger γ1 raises the relay ratio and the
        // effective price, so the level β / (2a(λ1 + λS γ')) falls.
        let mut last = f64::INFINITY;
        for i in 1..40 {
            let inp = ModeInputs {
                gain_first_relay: 0.5 * i as f64,
                gain_direct: 0.25,
                ..inputs()
            };
            if let Some(r) = solve_oneway_relay(&inp) {
                let level = inp.beta_second / (2.0 * LN2 * (inp.lambda_first + inp.lambda_su * r.relay_ratio));
                assert!(level <= last);
                last = level;
            }
        }
    }

    #[test]
    fn picks_the_larger_branch() {
        let inp = ModeInputs {
            gain_su_bs: 50.0,
            ..inputs()
        };
        let s = solve_oneway_df(&inp);
        let r = s.relay.unwrap();
        assert_eq!(s.value, r.value.max(s.own.value));
        assert_eq!(s.su_transmits, s.own.value >= r.value);
    }
}
