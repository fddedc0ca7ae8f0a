//! Exact optimum of tiny instances by enumerating every mode assignment.
//!
//! With the mode of each subcarrier fixed the problem is a convex program
//! in powers and rates; each rate cap `R ≤ c·log2(1 + Σ γ P)` is an
//! exponential-cone constraint. Assignments are visited in decreasing
//! order of a cheap upper bound so most never reach the conic solver.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::model::{Allocation, Direction, Mode, NetworkInstance, Side, SubcarrierCandidate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmallInstanceOptions {
    pub max_subcarriers: usize,
    pub max_pu_pairs: usize,
    pub max_sus: usize,
    /// Stop once the next assignment's bound is within this of the best.
    pub bound_tol: f64,
}

impl Default for SmallInstanceOptions {
    fn default() -> Self {
        Self {
            max_subcarriers: 4,
            max_pu_pairs: 1,
            max_sus: 2,
            bound_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallInstanceOracle {
    /// `None` when no assignment is feasible.
    pub value: Option<f64>,
    pub allocation: Option<Allocation>,
    pub assignments: usize,
    /// Assignments that reached the conic solver.
    pub solved: usize,
    /// Solves that ended without a usable status.
    pub solver_failures: usize,
}

/// Every mode with every user combination. Idle is left out: any mode with
/// zero power is idle.
fn modes(inst: &NetworkInstance) -> Vec<Mode> {
    let d = inst.dims;
    let mut out = Vec::new();
    for pair in 0..d.pu_pairs {
        for dir in Direction::BOTH {
            out.push(Mode::DirectPu { pair, dir });
        }
    }
    for su in 0..d.sus {
        out.push(Mode::DirectSu { su });
    }
    for pair in 0..d.pu_pairs {
        for dir in Direction::BOTH {
            for su in 0..d.sus {
                out.push(Mode::OneWay { pair, dir, su });
            }
        }
        for su in 0..d.sus {
            out.push(Mode::TwoWay { pair, su });
        }
    }
    if out.is_empty() {
        out.push(Mode::Idle);
    }
    out
}

fn cap(snr: f64) -> f64 {
    (1.0 + snr).log2()
}

struct Gains<'a> {
    inst: &'a NetworkInstance,
}

impl Gains<'_> {
    fn nv(&self) -> f64 {
        self.inst.noise_variance
    }
    fn direct(&self, pair: usize, n: usize) -> f64 {
        self.inst.direct_gain[pair][n] / self.nv()
    }
    fn relay(&self, pair: usize, side: Side, su: usize, n: usize) -> f64 {
        self.inst.pu_su_gain[self.inst.dims.pu_node(pair, side)][su][n] / self.nv()
    }
    fn su_bs(&self, su: usize, n: usize) -> f64 {
        self.inst.su_bs_gain[su][n] / self.nv()
    }
}

/// Σ_s w_s · (best own rate of SU s on its subcarriers at full budget),
/// ignoring any power it spends relaying.
fn upper_bound(inst: &NetworkInstance, assign: &[Mode]) -> f64 {
    let g = Gains { inst };
    (0..inst.dims.sus)
        .map(|su| {
            let gains: Vec<f64> = assign
                .iter()
                .enumerate()
                .filter(|(_, m)| **m == Mode::DirectSu { su })
                .map(|(n, _)| g.su_bs(su, n))
                .collect();
            inst.su_weight[su] * water_filled_rate(&gains, inst.peak_power[inst.dims.su_user(su)])
        })
        .sum()
}

/// `max Σ log2(1 + P_i g_i)` subject to `Σ P_i ≤ budget`, by bisection on
/// the water level.
pub(crate) fn water_filled_rate(gains: &[f64], budget: f64) -> f64 {
    let live: Vec<f64> = gains.iter().copied().filter(|&g| g > 0.0).collect();
    if live.is_empty() || budget <= 0.0 {
        return 0.0;
    }
    let spent = |mu: f64| live.iter().map(|g| (mu - 1.0 / g).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, budget + live.iter().map(|g| 1.0 / g).fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spent(mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    live.iter().map(|g| cap((lo - 1.0 / g).max(0.0) * g)).sum()
}

/// Necessary condition for meeting every rate requirement: each node gets
/// enough rate with every transmitter at its whole budget on every
/// subcarrier.
fn may_be_feasible(inst: &NetworkInstance, assign: &[Mode]) -> bool {
    let d = inst.dims;
    let g = Gains { inst };
    let pmax = |u: usize| inst.peak_power[u];
    let mut best = vec![0.0; d.pu_nodes()];
    for (n, m) in assign.iter().enumerate() {
        match *m {
            Mode::DirectPu { pair, dir } => {
                let src = d.pu_node(pair, dir.source());
                best[d.pu_node(pair, dir.destination())] += cap(pmax(src) * g.direct(pair, n));
            }
            Mode::OneWay { pair, dir, su } => {
                let src = d.pu_node(pair, dir.source());
                let hop1 = cap(pmax(src) * g.relay(pair, dir.source(), su, n));
                let hop2 = cap(pmax(src) * g.direct(pair, n) + pmax(d.su_user(su)) * g.relay(pair, dir.destination(), su, n));
                best[d.pu_node(pair, dir.destination())] += 0.5 * hop1.min(hop2);
            }
            Mode::TwoWay { pair, su } => {
                for side in [Side::First, Side::Second] {
                    let from = d.pu_node(pair, side.other());
                    let hop1 = cap(pmax(from) * g.relay(pair, side.other(), su, n));
                    let hop2 = cap(pmax(d.su_user(su)) * g.relay(pair, side, su, n));
                    best[d.pu_node(pair, side)] += 0.5 * hop1.min(hop2);
                }
            }
            _ => {}
        }
    }
    best.iter().zip(&inst.rate_requirement).all(|(b, r)| *b >= *r)
}

/// Column layout of one subcarrier's variables.
#[derive(Debug, Clone, Copy, Default)]
struct Cols {
    /// Power columns `[first node, second node, su]`.
    power: [Option<usize>; 3],
    /// Rate columns `[to first node, to second node, su own]`.
    rate: [Option<usize>; 3],
}

#[derive(Default)]
struct Builder {
    cols: usize,
    rows: usize,
    tri: (Vec<usize>, Vec<usize>, Vec<f64>),
    b: Vec<f64>,
}

impl Builder {
    fn col(&mut self) -> usize {
        self.cols += 1;
        self.cols - 1
    }

    fn row(&mut self, coeffs: &[(usize, f64)], rhs: f64) {
        for &(c, v) in coeffs {
            self.tri.0.push(self.rows);
            self.tri.1.push(c);
            self.tri.2.push(v);
        }
        self.b.push(rhs);
        self.rows += 1;
    }

    /// `Σ rates ≤ scale · log2(1 + Σ γ P)` as the exponential-cone triple
    /// `(ln2/scale · Σ R, 1, 1 + Σ γ P)`.
    fn log_cap(&mut self, rates: &[usize], scale: f64, powers: &[(usize, f64)]) {
        let k = std::f64::consts::LN_2 / scale;
        let r: Vec<(usize, f64)> = rates.iter().map(|&c| (c, -k)).collect();
        self.row(&r, 0.0);
        self.row(&[], 1.0);
        let p: Vec<(usize, f64)> = powers.iter().map(|&(c, g)| (c, -g)).collect();
        self.row(&p, 1.0);
    }
}

struct Solved {
    value: f64,
    x: Vec<f64>,
}

fn solve_assignment(inst: &NetworkInstance, assign: &[Mode]) -> Result<Option<(Solved, Vec<Cols>)>, SolverStatus> {
    let d = inst.dims;
    let g = Gains { inst };
    let mut bld = Builder::default();
    let mut cols = vec![Cols::default(); assign.len()];
    for (n, m) in assign.iter().enumerate() {
        let c = &mut cols[n];
        match *m {
            Mode::Idle => {}
            Mode::DirectPu { dir, .. } => {
                c.power[dir.source().index()] = Some(bld.col());
                c.rate[dir.destination().index()] = Some(bld.col());
            }
            Mode::DirectSu { .. } => {
                c.power[2] = Some(bld.col());
                c.rate[2] = Some(bld.col());
            }
            Mode::OneWay { dir, .. } => {
                c.power[dir.source().index()] = Some(bld.col());
                c.power[2] = Some(bld.col());
                c.rate[dir.destination().index()] = Some(bld.col());
            }
            Mode::TwoWay { .. } => {
                c.power = [Some(bld.col()), Some(bld.col()), Some(bld.col())];
                c.rate[0] = Some(bld.col());
                c.rate[1] = Some(bld.col());
            }
        }
    }
    let nvar = bld.cols;
    // Linear rows first (nonnegative cone): variable signs, budgets, rates.
    for v in 0..nvar {
        bld.row(&[(v, -1.0)], 0.0);
    }
    for user in 0..d.users() {
        let mut terms = Vec::new();
        for (n, m) in assign.iter().enumerate() {
            for (slot, col) in cols[n].power.iter().enumerate() {
                let Some(col) = col else { continue };
                let owner = match slot {
                    2 => d.su_user(m.su().expect("su power without su")),
                    s => d.pu_node(m.pair().expect("pu power without pair"), if s == 0 { Side::First } else { Side::Second }),
                };
                if owner == user {
                    terms.push((*col, 1.0));
                }
            }
        }
        bld.row(&terms, inst.peak_power[user]);
    }
    for node in 0..d.pu_nodes() {
        let mut terms = Vec::new();
        for (n, m) in assign.iter().enumerate() {
            let Some(pair) = m.pair() else { continue };
            for side in [Side::First, Side::Second] {
                if d.pu_node(pair, side) == node {
                    if let Some(col) = cols[n].rate[side.index()] {
                        terms.push((col, -1.0));
                    }
                }
            }
        }
        bld.row(&terms, -inst.rate_requirement[node]);
    }
    let linear = bld.rows;
    let mut exp_cones = 0;
    for (n, m) in assign.iter().enumerate() {
        let c = cols[n];
        match *m {
            Mode::Idle => {}
            Mode::DirectPu { pair, dir } => {
                let p = c.power[dir.source().index()].unwrap();
                let r = c.rate[dir.destination().index()].unwrap();
                bld.log_cap(&[r], 1.0, &[(p, g.direct(pair, n))]);
                exp_cones += 1;
            }
            Mode::DirectSu { su } => {
                bld.log_cap(&[c.rate[2].unwrap()], 1.0, &[(c.power[2].unwrap(), g.su_bs(su, n))]);
                exp_cones += 1;
            }
            Mode::OneWay { pair, dir, su } => {
                let p = c.power[dir.source().index()].unwrap();
                let ps = c.power[2].unwrap();
                let r = c.rate[dir.destination().index()].unwrap();
                bld.log_cap(&[r], 0.5, &[(p, g.relay(pair, dir.source(), su, n))]);
                bld.log_cap(&[r], 0.5, &[(p, g.direct(pair, n)), (ps, g.relay(pair, dir.destination(), su, n))]);
                exp_cones += 2;
            }
            Mode::TwoWay { pair, su } => {
                let [p1, p2, ps] = c.power.map(Option::unwrap);
                let (r1, r2) = (c.rate[0].unwrap(), c.rate[1].unwrap());
                let g1 = g.relay(pair, Side::First, su, n);
                let g2 = g.relay(pair, Side::Second, su, n);
                // Multiple-access phase: node 2 feeds the rate to node 1.
                bld.log_cap(&[r1], 0.5, &[(p2, g2)]);
                bld.log_cap(&[r2], 0.5, &[(p1, g1)]);
                bld.log_cap(&[r1, r2], 0.5, &[(p1, g1), (p2, g2)]);
                // Broadcast phase.
                bld.log_cap(&[r1], 0.5, &[(ps, g1)]);
                bld.log_cap(&[r2], 0.5, &[(ps, g2)]);
                exp_cones += 5;
            }
        }
    }
    let mut q = vec![0.0; nvar];
    for (n, m) in assign.iter().enumerate() {
        if let (Mode::DirectSu { su }, Some(r)) = (*m, cols[n].rate[2]) {
            q[r] = -inst.su_weight[su];
        }
    }
    let mut cones = vec![SupportedConeT::NonnegativeConeT(linear)];
    cones.extend((0..exp_cones).map(|_| SupportedConeT::ExponentialConeT()));
    let a = CscMatrix::new_from_triplets(bld.rows, nvar, bld.tri.0, bld.tri.1, bld.tri.2);
    let p = CscMatrix::zeros((nvar, nvar));
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .build()
        .expect("static settings");
    let mut solver = DefaultSolver::new(&p, &q, &a, &bld.b, &cones, settings);
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Ok(Some((
            Solved {
                value: -solver.solution.obj_val,
                x: solver.solution.x.clone(),
            },
            cols,
        ))),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Ok(None),
        other => Err(other),
    }
}

fn to_allocation(inst: &NetworkInstance, assign: &[Mode], cols: &[Cols], x: &[f64]) -> Allocation {
    let get = |c: Option<usize>| c.map_or(0.0, |c| x[c].max(0.0));
    let cands = assign
        .iter()
        .zip(cols)
        .map(|(m, c)| {
            let mut s = SubcarrierCandidate::empty(*m);
            s.pu_power = [get(c.power[0]), get(c.power[1])];
            s.su_power = get(c.power[2]);
            s.pu_rate = [get(c.rate[0]), get(c.rate[1])];
            s.su_rate = get(c.rate[2]);
            s.su_transmits = matches!(m, Mode::DirectSu { .. });
            s
        })
        .collect();
    Allocation::from_candidates(inst.dims, &inst.su_weight, cands)
}

/// Best feasible weighted SU sum-rate of a tiny instance over every mode
/// assignment.
pub fn oracle_small_instance(inst: &NetworkInstance, opts: &SmallInstanceOptions) -> Result<SmallInstanceOracle, OracleError> {
    let d = inst.dims;
    if inst.num_subcarriers > opts.max_subcarriers || d.pu_pairs > opts.max_pu_pairs || d.sus > opts.max_sus {
        return Err(OracleError::TooLarge {
            subcarriers: inst.num_subcarriers,
            pu_pairs: d.pu_pairs,
            sus: d.sus,
        });
    }
    let choices = modes(inst);
    let n = inst.num_subcarriers;
    let total = choices.len().pow(n as u32);
    let mut ranked: Vec<(f64, usize)> = Vec::new();
    let mut assign = vec![Mode::Idle; n];
    for k in 0..total {
        decode(k, &choices, &mut assign);
        if may_be_feasible(inst, &assign) {
            ranked.push((upper_bound(inst, &assign), k));
        }
    }
    // Highest bound first; equal bounds in enumeration order.
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut out = SmallInstanceOracle {
        value: None,
        allocation: None,
        assignments: total,
        solved: 0,
        solver_failures: 0,
    };
    for (bound, k) in ranked {
        if let Some(v) = out.value {
            if bound <= v + opts.bound_tol {
                break;
            }
        }
        decode(k, &choices, &mut assign);
        out.solved += 1;
        match solve_assignment(inst, &assign) {
            Ok(Some((s, cols))) => {
                if out.value.map_or(true, |v| s.value > v) {
                    out.value = Some(s.value);
                    out.allocation = Some(to_allocation(inst, &assign, &cols, &s.x));
                }
            }
            Ok(None) => {}
            Err(_) => out.solver_failures += 1,
        }
    }
    Ok(out)
}

fn decode(mut k: usize, choices: &[Mode], out: &mut [Mode]) {
    for slot in out.iter_mut() {
        *slot = choices[k % choices.len()];
        k /= choices.len();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;

    #[test]
    fn water_filling_two_channels() {
        // Gains 1 and 1/2 with budget 4: level 3.5, powers 2.5 and 1.5.
        let r = water_filled_rate(&[1.0, 0.5], 4.0);
        assert!((r - (3.5f64.log2() + 1.75f64.log2())).abs() < 1e-9);
    }

    #[test]
    fn su_only_instance_matches_water_filling() {
        let mut inst = NetworkInstance::zeroed(Dims::new(1, 1), 3, 5.0, 0.0);
        inst.su_bs_gain[0] = vec![2.0, 0.5, 1.0];
        let o = oracle_small_instance(&inst, &SmallInstanceOptions::default()).unwrap();
        let expect = water_filled_rate(&[2.0, 0.5, 1.0], 5.0);
        assert!((o.value.unwrap() - expect).abs() < 1e-6, "{:?} vs {expect}", o.value);
    }

    #[test]
    fn unreachable_requirement_is_infeasible() {
        let mut inst = NetworkInstance::zeroed(Dims::new(1, 1), 2, 1.0, 50.0);
        inst.direct_gain[0] = vec![1.0, 1.0];
        inst.su_bs_gain[0] = vec![1.0, 1.0];
        let o = oracle_small_instance(&inst, &SmallInstanceOptions::default()).unwrap();
        assert_eq!(o.value, None);
        assert!(o.allocation.is_none());
    }

    #[test]
    fn rejects_large_instances() {
        let inst = NetworkInstance::zeroed(Dims::new(2, 1), 2, 1.0, 0.0);
        assert!(matches!(
            oracle_small_instance(&inst, &SmallInstanceOptions::default()),
            Err(OracleError::TooLarge { .. })
        ));
    }
}
