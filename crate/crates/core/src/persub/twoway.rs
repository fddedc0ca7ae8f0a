//! Two-way decode-and-forward relaying on one subcarrier.
//!
//! Both PU nodes transmit to the SU in a multiple-access phase, the SU
//! broadcasts in a second phase. The Lagrangian is not separable in the
//! powers because the rate to each node is capped by both phases, so the
//! rate split is dualized with multipliers `α ∈ [0, β1] × [0, β2]`: the
//! multiple-access phase then sees weights `β − α`, the broadcast phase
//! weights `α`, and each has a closed-form maximizer. A small ellipsoid
//! (bisection in one dimension) drives `α`.

use super::{water_fill, ModeInputs, LN2};
use crate::ellipsoid::Ellipsoid;
use crate::model::{capacity, CandidateNotes};

/// Below this a rate weight counts as zero.
const TINY: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOptions {
    /// Stop once best bound minus best primal value is below this.
    pub gap_tol: f64,
    pub max_iters: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-5,
            max_iters: 200,
        }
    }
}

/// Maximizer of the multiple-access part of the two-way Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacSolution {
    /// `[node 1, node 2]` transmit powers.
    pub power: [f64; 2],
    /// `[to node 1, to node 2]`, at the decoding-order vertex matching the
    /// weights.
    pub rate: [f64; 2],
    pub value: f64,
    pub unbounded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoWaySolution {
    pub pu_power: [f64; 2],
    pub su_power: f64,
    /// `[to node 1, to node 2]`.
    pub pu_rate: [f64; 2],
    /// Lagrangian value of the returned primal point.
    pub value: f64,
    /// Smallest inner dual value seen; upper-bounds the true maximum.
    pub dual_bound: f64,
    pub alpha: [f64; 2],
    pub iterations: usize,
    pub converged: bool,
    /// Stopped because `dual_bound` fell below the prune threshold.
    pub pruned: bool,
    pub notes: CandidateNotes,
}

impl TwoWaySolution {
    fn zero() -> Self {
        Self {
            pu_power: [0.0; 2],
            su_power: 0.0,
            pu_rate: [0.0; 2],
            value: 0.0,
            dual_bound: 0.0,
            alpha: [0.0; 2],
            iterations: 0,
            converged: true,
            pruned: false,
            notes: CandidateNotes::default(),
        }
    }
}

#[inline]
fn half_cap(snr: f64) -> f64 {
    0.5 * capacity(snr)
}

/// Multiple-access objective with the flow of weight `ws ≥ ww` decoded
/// last (strong) and the other first (weak).
fn mac_objective(ws: f64, ww: f64, gs: f64, gw: f64, cs: f64, cw: f64, ps: f64, pw: f64) -> f64 {
    (ws - ww) * half_cap(ps * gs) + ww * half_cap(ps * gs + pw * gw) - cs * ps - cw * pw
}

/// `(p_strong, p_weak)` maximizing [`mac_objective`]; the stationary point
/// of the joint objective if both powers are positive there, otherwise the
/// better single-user face.
fn mac_ordered(ws: f64, ww: f64, gs: f64, gw: f64, cs: f64, cw: f64) -> (f64, f64) {
    let d = gw * cs - gs * cw;
    if gs > 0.0 && gw > 0.0 && d > TINY && ww > 0.0 {
        let ps = (ws - ww) * gw / (2.0 * LN2 * d) - 1.0 / gs;
        let pw = ww / (2.0 * LN2 * cw) - (ws - ww) * gs / (2.0 * LN2 * d);
        if ps > 0.0 && pw > 0.0 {
            return (ps, pw);
        }
    }
    // Face A: only the strong flow; its rate is weighted ws in total.
    let a = water_fill(ws / (2.0 * LN2 * cs), gs);
    // Face B: only the weak flow, weighted ww.
    let b = water_fill(ww / (2.0 * LN2 * cw), gw);
    let fa = mac_objective(ws, ww, gs, gw, cs, cw, a, 0.0);
    let fb = mac_objective(ws, ww, gs, gw, cs, cw, 0.0, b);
    if fa > fb {
        (a, 0.0)
    } else {
        (0.0, b)
    }
}

/// Maximizes `w1 R1 + w2 R2 − λ1 P1 − λ2 P2` over the two-user
/// multiple-access region (each phase lasting half the slot). `R1` is the
/// rate to node 1, carried by node 2 over `g2`; `R2` the rate to node 2,
/// carried by node 1 over `g1`.
pub fn solve_twoway_mac(w: [f64; 2], g: [f64; 2], lambda: [f64; 2]) -> MacSolution {
    let [w1, w2] = w.map(|x| x.max(0.0));
    let [g1, g2] = g;
    let [l1, l2] = lambda;
    if (w1 > 0.0 && g2 > 0.0 && l2 <= 0.0) || (w2 > 0.0 && g1 > 0.0 && l1 <= 0.0) {
        return MacSolution {
            power: [f64::INFINITY; 2],
            rate: [f64::INFINITY; 2],
            value: f64::INFINITY,
            unbounded: true,
        };
    }
    let (power, rate) = if w1 >= w2 {
        // Node 2's flow (to node 1) is decoded last.
        let (ps, pw) = mac_ordered(w1, w2, g2, g1, l2, l1);
        let r1 = half_cap(ps * g2);
        ([pw, ps], [r1, half_cap(ps * g2 + pw * g1) - r1])
    } else {
        let (ps, pw) = mac_ordered(w2, w1, g1, g2, l1, l2);
        let r2 = half_cap(ps * g1);
        ([ps, pw], [half_cap(ps * g1 + pw * g2) - r2, r2])
    };
    MacSolution {
        power,
        rate,
        value: w1 * rate[0] + w2 * rate[1] - l1 * power[0] - l2 * power[1],
        unbounded: false,
    }
}

/// Relay power maximizing `α1 ½C(P γ1) + α2 ½C(P γ2) − λ P`. Returns
/// infinity when `λ ≤ 0` and some weight is positive.
pub fn solve_twoway_bc(alpha: [f64; 2], g: [f64; 2], lambda: f64) -> f64 {
    let [a1, a2] = alpha.map(|x| x.max(0.0));
    let [g1, g2] = g.map(|x| x.max(0.0));
    let slope = a1 * g1 + a2 * g2;
    if slope <= 0.0 {
        return 0.0;
    }
    if lambda <= 0.0 {
        return f64::INFINITY;
    }
    if 2.0 * LN2 * lambda >= slope {
        return 0.0;
    }
    if g1 <= 0.0 {
        return water_fill(a2 / (2.0 * LN2 * lambda), g2);
    }
    if g2 <= 0.0 {
        return water_fill(a1 / (2.0 * LN2 * lambda), g1);
    }
    // Stationarity clears to θ1 P² + θ2 P + θ3 = 0 with θ1 > 0 > θ3, so
    // exactly one positive root.
    let t1 = 2.0 * LN2 * lambda * g1 * g2;
    let t2 = 2.0 * LN2 * lambda * (g1 + g2) - g1 * g2 * (a1 + a2);
    let t3 = 2.0 * LN2 * lambda - slope;
    let sq = (t2 * t2 - 4.0 * t1 * t3).sqrt();
    if t2 >= 0.0 {
        -2.0 * t3 / (t2 + sq)
    } else {
        (sq - t2) / (2.0 * t1)
    }
}

/// Largest `β1 R1 + β2 R2` over rate pairs supported by both phases with
/// fixed powers. The feasible set is a polymatroid, so serving the
/// higher-weight flow first is optimal.
pub fn best_twoway_rates(pu_power: [f64; 2], su_power: f64, g1: f64, g2: f64, beta: [f64; 2]) -> [f64; 2] {
    let [p1, p2] = pu_power;
    let cap1 = half_cap(p2 * g2).min(half_cap(su_power * g1));
    let cap2 = half_cap(p1 * g1).min(half_cap(su_power * g2));
    let sum = half_cap(p1 * g1 + p2 * g2);
    if beta[0] >= beta[1] {
        let r1 = cap1.min(sum);
        [r1, cap2.min(sum - r1).max(0.0)]
    } else {
        let r2 = cap2.min(sum);
        [cap1.min(sum - r2).max(0.0), r2]
    }
}

#[derive(Debug, Clone, Copy)]
struct Primal {
    pu_power: [f64; 2],
    su_power: f64,
    pu_rate: [f64; 2],
    value: f64,
    bc_capped: bool,
}

struct Eval {
    h: f64,
    subgrad: [f64; 2],
    primal: Primal,
}

struct Problem {
    g: [f64; 2],
    lambda: [f64; 2],
    lambda_su: f64,
    beta: [f64; 2],
}

impl Problem {
    fn eval(&self, alpha: [f64; 2]) -> Eval {
        let a = [alpha[0].clamp(0.0, self.beta[0]), alpha[1].clamp(0.0, self.beta[1])];
        let mac = solve_twoway_mac([self.beta[0] - a[0], self.beta[1] - a[1]], self.g, self.lambda);
        let ps = solve_twoway_bc(a, self.g, self.lambda_su);
        let bc = [half_cap(ps * self.g[0]), half_cap(ps * self.g[1])];
        let h = mac.value + a[0] * bc[0] + a[1] * bc[1] - self.lambda_su * ps;
        let rate = best_twoway_rates(mac.power, ps, self.g[0], self.g[1], self.beta);
        let value = self.beta[0] * rate[0] + self.beta[1] * rate[1]
            - self.lambda[0] * mac.power[0]
            - self.lambda[1] * mac.power[1]
            - self.lambda_su * ps;
        let capped = rate[0] < mac.rate[0] - 1e-12 || rate[1] < mac.rate[1] - 1e-12;
        Eval {
            h,
            subgrad: [bc[0] - mac.rate[0], bc[1] - mac.rate[1]],
            primal: Primal {
                pu_power: mac.power,
                su_power: ps,
                pu_rate: rate,
                value,
                bc_capped: capped,
            },
        }
    }
}

struct Tracker {
    bound: f64,
    alpha: [f64; 2],
    primal: Primal,
    iterations: usize,
}

impl Tracker {
    fn record(&mut self, alpha: [f64; 2], e: &Eval) {
        if e.h < self.bound {
            self.bound = e.h;
            self.alpha = alpha;
        }
        if e.primal.value > self.primal.value {
            self.primal = e.primal;
        }
    }

    fn gap(&self) -> f64 {
        self.bound - self.primal.value
    }
}

/// Maximizes the two-way Lagrangian on one subcarrier.
///
/// `inputs.beta_first`/`beta_second` reward rate into nodes 1 and 2;
/// `lambda_first`/`lambda_second` price their power. The search stops once
/// the inner duality gap is within `opts.gap_tol`, or as soon as the bound
/// drops to `prune_below` (the candidate cannot win then).
pub fn solve_twoway(inputs: &ModeInputs, opts: &InnerOptions, prune_below: f64) -> TwoWaySolution {
    let inp = inputs.normalized();
    let g = [inp.gain_first_relay, inp.gain_second_relay];
    let beta = [inp.beta_first.max(0.0), inp.beta_second.max(0.0)];
    if g[0] <= 0.0 || g[1] <= 0.0 || (beta[0] <= TINY && beta[1] <= TINY) {
        return TwoWaySolution::zero();
    }
    let prob = Problem {
        g,
        lambda: [inp.lambda_first, inp.lambda_second],
        lambda_su: inp.lambda_su,
        beta,
    };
    if prob.lambda_su <= 0.0 || prob.lambda[0] <= 0.0 || prob.lambda[1] <= 0.0 {
        let mut s = TwoWaySolution::zero();
        s.pu_power = [f64::INFINITY; 2];
        s.su_power = f64::INFINITY;
        s.pu_rate = [f64::INFINITY; 2];
        s.value = f64::INFINITY;
        s.dual_bound = f64::INFINITY;
        s.notes.unbounded = true;
        return s;
    }

    let zero = Primal {
        pu_power: [0.0; 2],
        su_power: 0.0,
        pu_rate: [0.0; 2],
        value: 0.0,
        bc_capped: false,
    };
    let mut t = Tracker {
        bound: f64::INFINITY,
        alpha: [0.0; 2],
        primal: zero,
        iterations: 0,
    };
    let mut converged = false;
    let mut pruned = false;

    let one_dim = if beta[0] <= TINY {
        Some(1)
    } else if beta[1] <= TINY {
        Some(0)
    } else {
        None
    };

    match one_dim {
        Some(k) => {
            let (mut lo, mut hi) = (0.0, beta[k]);
            while t.iterations < opts.max_iters {
                let mut alpha = [0.0; 2];
                alpha[k] = 0.5 * (lo + hi);
                let e = prob.eval(alpha);
                t.iterations += 1;
                t.record(alpha, &e);
                if t.bound <= prune_below {
                    pruned = true;
                    break;
                }
                if t.gap() <= opts.gap_tol {
                    converged = true;
                    break;
                }
                if e.subgrad[k] > 0.0 {
                    hi = alpha[k];
                } else if e.subgrad[k] < 0.0 {
                    lo = alpha[k];
                } else {
                    converged = true;
                    break;
                }
            }
        }
        None => {
            let mut ell = Ellipsoid::ball(vec![0.5 * beta[0], 0.5 * beta[1]], beta[0].hypot(beta[1]));
            while t.iterations < opts.max_iters {
                t.iterations += 1;
                let c = [ell.center()[0], ell.center()[1]];
                let feas_cut = if c[0] < 0.0 {
                    Some([-1.0, 0.0])
                } else if c[0] > beta[0] {
                    Some([1.0, 0.0])
                } else if c[1] < 0.0 {
                    Some([0.0, -1.0])
                } else if c[1] > beta[1] {
                    Some([0.0, 1.0])
                } else {
                    None
                };
                if let Some(cut) = feas_cut {
                    if !ell.cut(&cut) {
                        break;
                    }
                    continue;
                }
                let e = prob.eval(c);
                t.record(c, &e);
                if t.bound <= prune_below {
                    pruned = true;
                    break;
                }
                if t.gap() <= opts.gap_tol {
                    converged = true;
                    break;
                }
                if !ell.cut(&e.subgrad) {
                    converged = true;
                    break;
                }
            }
        }
    }

    let p = t.primal;
    let active = p.su_power > 0.0;
    TwoWaySolution {
        pu_power: p.pu_power,
        su_power: p.su_power,
        pu_rate: p.pu_rate,
        value: p.value,
        dual_bound: t.bound,
        alpha: t.alpha,
        iterations: t.iterations,
        converged,
        pruned,
        notes: CandidateNotes {
            unbounded: false,
            bc_capped: active && p.bc_capped,
            one_way_optimal: active && (p.pu_rate[0] <= 0.0) != (p.pu_rate[1] <= 0.0),
        },
    }
}
