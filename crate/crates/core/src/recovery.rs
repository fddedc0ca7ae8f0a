//! Primal recovery: freeze the dual phase's mode and user choice on every
//! subcarrier, re-solve the (now convex) power allocation through its own
//! dual, then repair small constraint violations.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dual::{
    all_modes, evaluate_dual, mode_inputs, solve_dual_from, CandidateSet, DualOptions, DualResult, TIE_EPS,
};
use crate::model::{
    capacity, feasibility_check, Allocation, DualState, Mode, NetworkInstance, Side, SolverReport,
    SubcarrierCandidate,
};
use crate::persub::{rates_for_powers, solve_mode, ModeContext};

/// Relative rate slack accepted in the final feasibility verdict.
pub const RATE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryOptions {
    /// Options of the reduced dual solve. Its ball is centred at the dual
    /// phase's optimum.
    pub dual: DualOptions,
    /// Largest relative power overshoot that is scaled away silently.
    pub eps_power: f64,
    /// Largest relative rate shortfall that triggers β bisection.
    pub eps_rate: f64,
    pub max_bisection_steps: usize,
    /// Reduced-dual solves spent adding subcarriers for short PU nodes.
    pub max_cover_rounds: usize,
    /// A relative gap above this triggers a second covering pass that
    /// sizes candidates at full power budgets instead of dual prices.
    pub second_pass_gap: f64,
    /// Reduced-dual iterates kept for mixing into a feasible point.
    pub mix_window: usize,
    /// Instances with at most this many subcarriers get a mode-swap local
    /// search after covering.
    pub local_search_max_subcarriers: usize,
    pub local_search_sweeps: usize,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            dual: DualOptions::default(),
            eps_power: 1e-3,
            eps_rate: 1e-3,
            max_bisection_steps: 30,
            max_cover_rounds: 8,
            second_pass_gap: 0.02,
            mix_window: 256,
            local_search_max_subcarriers: 8,
            local_search_sweeps: 8,
        }
    }
}

/// Modes the dual phase selected, one per subcarrier. A one-way winner
/// whose SU kept the subcarrier for itself is frozen as direct SU.
pub fn frozen_modes(candidates: &[SubcarrierCandidate]) -> Vec<Mode> {
    candidates
        .iter()
        .map(|c| match c.mode {
            Mode::OneWay { su, .. } if c.su_transmits => Mode::DirectSu { su },
            m => m,
        })
        .collect()
}

fn is_feasible(inst: &NetworkInstance, alloc: &Allocation) -> bool {
    let exact_power = alloc
        .user_power
        .iter()
        .zip(&inst.peak_power)
        .all(|(p, cap)| p <= cap);
    exact_power
        && alloc
            .pu_rate
            .iter()
            .zip(&inst.rate_requirement)
            .all(|(r, req)| *r >= req * (1.0 - RATE_SLACK))
}

/// Scales every over-budget user's powers down uniformly so its total is
/// at most its cap, recomputing the rates of touched subcarriers, then
/// re-splits two-way rates with [`balance_twoway_rates`]. Returns the
/// largest relative overshoot found before scaling.
pub fn scale_to_budget(
    inst: &NetworkInstance,
    dual: &DualState,
    candidates: &mut [SubcarrierCandidate],
) -> f64 {
    let dims = inst.dims;
    let mut worst: f64 = 0.0;
    for round in 0..8 {
        let mut total = vec![0.0; dims.users()];
        for c in candidates.iter() {
            for (u, p) in c.power_entries(dims) {
                total[u] += p;
            }
        }
        let factor: Vec<f64> = total
            .iter()
            .zip(&inst.peak_power)
            .map(|(&t, &cap)| {
                if t > cap {
                    // Shave a few ulps so the re-summed total lands under.
                    (cap / t) * (1.0 - 4.0 * f64::EPSILON * (round + 1) as f64)
                } else {
                    1.0
                }
            })
            .collect();
        if round == 0 {
            for (t, cap) in total.iter().zip(&inst.peak_power) {
                worst = worst.max((t - cap) / cap);
            }
        }
        if factor.iter().all(|&f| f == 1.0) {
            break;
        }
        for (n, c) in candidates.iter_mut().enumerate() {
            let mut touched = false;
            if let Some(pair) = c.mode.pair() {
                for side in [Side::First, Side::Second] {
                    let u = dims.pu_node(pair, side);
                    if factor[u] != 1.0 && c.pu_power[side.index()] > 0.0 {
                        c.pu_power[side.index()] *= factor[u];
                        touched = true;
                    }
                }
            }
            if let Some(su) = c.mode.su() {
                let u = dims.su_user(su);
                if factor[u] != 1.0 && c.su_power > 0.0 {
                    c.su_power *= factor[u];
                    touched = true;
                }
            }
            if touched {
                *c = rates_for_powers(c, &mode_inputs(inst, dual, n, c.mode));
            }
        }
    }
    balance_twoway_rates(inst, candidates);
    worst
}

/// Re-splits the rate of every two-way subcarrier inside its rate region
/// so the pair's nodes get what they still need. The dual extraction
/// returns a vertex of the region, which can send everything one way even
/// when both nodes are short. Powers and SU rates are untouched.
pub fn balance_twoway_rates(inst: &NetworkInstance, candidates: &mut [SubcarrierCandidate]) {
    let dims = inst.dims;
    let mut have = vec![0.0; dims.pu_nodes()];
    for c in candidates.iter().filter(|c| !matches!(c.mode, Mode::TwoWay { .. })) {
        for (node, r) in c.rate_entries(dims) {
            have[node] += r;
        }
    }
    for (n, c) in candidates.iter_mut().enumerate() {
        let Mode::TwoWay { pair, .. } = c.mode else { continue };
        let nodes = [dims.pu_node(pair, Side::First), dims.pu_node(pair, Side::Second)];
        let need = nodes.map(|u| (inst.rate_requirement[u] - have[u]).max(0.0));
        c.pu_rate = split_twoway(twoway_caps(inst, n, c), need);
        have[nodes[0]] += c.pu_rate[0];
        have[nodes[1]] += c.pu_rate[1];
    }
}

/// `(cap to node 1, cap to node 2, sum cap)` of a two-way candidate's rate
/// region at its powers.
fn twoway_caps(inst: &NetworkInstance, n: usize, c: &SubcarrierCandidate) -> (f64, f64, f64) {
    let Mode::TwoWay { pair, su } = c.mode else { return (0.0, 0.0, 0.0) };
    let half_cap = |snr: f64| 0.5 * capacity(snr);
    let nv = inst.noise_variance;
    let g1 = inst.pu_su_gain[inst.dims.pu_node(pair, Side::First)][su][n] / nv;
    let g2 = inst.pu_su_gain[inst.dims.pu_node(pair, Side::Second)][su][n] / nv;
    let [p1, p2] = c.pu_power;
    let cap1 = half_cap(p2 * g2).min(half_cap(c.su_power * g1));
    let cap2 = half_cap(p1 * g1).min(half_cap(c.su_power * g2));
    (cap1, cap2, half_cap(p1 * g1 + p2 * g2).min(cap1 + cap2))
}

/// A point of the region that first meets `need` (node 1 first), then
/// spends what is left on node 2 and node 1.
fn split_twoway((cap1, cap2, sum): (f64, f64, f64), need: [f64; 2]) -> [f64; 2] {
    let r1 = need[0].min(cap1).min(sum);
    let r2 = cap2.min(sum - r1).max(0.0);
    [cap1.min(sum - r2).max(0.0), r2]
}

/// Outcome of [`repair_feasibility`].
#[derive(Debug, Clone, PartialEq)]
pub struct Repair {
    pub allocation: Allocation,
    /// Dual point the allocation was finally extracted at.
    pub dual: DualState,
    pub feasible: bool,
    pub bisection_steps: usize,
}

/// Repairs an allocation extracted from the reduced dual at `dual` with
/// `modes` frozen: scales power overshoots away and, for small rate
/// shortfalls, raises the short node's β until its rate is met.
pub fn repair_feasibility(
    inst: &NetworkInstance,
    alloc: &Allocation,
    dual: &DualState,
    modes: &[Mode],
    opts: &RecoveryOptions,
) -> Repair {
    let dims = inst.dims;
    let weights = &inst.su_weight;
    if is_feasible(inst, alloc) {
        return Repair {
            allocation: alloc.clone(),
            dual: dual.clone(),
            feasible: true,
            bisection_steps: 0,
        };
    }
    let set = CandidateSet::Frozen(modes.to_vec());
    let extract = |d: &DualState| -> (Allocation, f64) {
        let mut c = evaluate_dual(inst, d, &set, &opts.dual.eval).candidates;
        let over = scale_to_budget(inst, d, &mut c);
        (Allocation::from_candidates(dims, weights, c), over)
    };

    let mut cands = alloc.candidates.clone();
    let over = scale_to_budget(inst, dual, &mut cands);
    let mut current = Allocation::from_candidates(dims, weights, cands);
    let mut overshoot_ok = over <= opts.eps_power;
    let mut d = dual.clone();
    let mut steps = 0;

    // Fix the shortest node first; later fixes keep earlier β raises.
    for _ in 0..dims.pu_nodes() {
        let short = (0..dims.pu_nodes())
            .filter(|&p| inst.rate_requirement[p] > 0.0)
            .map(|p| (p, (inst.rate_requirement[p] - current.pu_rate[p]) / inst.rate_requirement[p]))
            .filter(|&(_, s)| s > RATE_SLACK)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((p, shortfall)) = short else { break };
        if shortfall > opts.eps_rate {
            break;
        }
        let meets = |a: &Allocation| a.pu_rate[p] >= inst.rate_requirement[p] * (1.0 - RATE_SLACK);
        let lo0 = d.beta[p];
        let mut lo = lo0;
        let mut hi = if lo0 > 0.0 { 2.0 * lo0 } else { 1.0 };
        let mut hi_alloc = None;
        for _ in 0..opts.max_bisection_steps {
            let mut trial = d.clone();
            trial.beta[p] = hi;
            let (a, o) = extract(&trial);
            steps += 1;
            if meets(&a) {
                hi_alloc = Some((a, o));
                break;
            }
            lo = hi;
            hi *= 2.0;
        }
        let Some((mut best, mut best_over)) = hi_alloc else { break };
        for _ in 0..opts.max_bisection_steps {
            let mid = 0.5 * (lo + hi);
            let mut trial = d.clone();
            trial.beta[p] = mid;
            let (a, o) = extract(&trial);
            steps += 1;
            if meets(&a) {
                hi = mid;
                best = a;
                best_over = o;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-9 * hi {
                break;
            }
        }
        d.beta[p] = hi;
        current = best;
        overshoot_ok = best_over <= opts.eps_power;
    }

    let feasible = overshoot_ok && is_feasible(inst, &current);
    Repair {
        allocation: current,
        dual: d,
        feasible,
        bisection_steps: steps,
    }
}

/// How the covering pass sizes the candidates it may hand to PU nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pricing {
    /// Candidates as solved at the dual optimum; the cost of a swap is the
    /// drop in Lagrangian value.
    Dual,
    /// Every transmitter of a candidate at its whole power budget; the cost
    /// of a swap is the displaced winner's value. Finds relays the dual
    /// prices rule out when the duality gap is large.
    FullBudget,
}

/// Every pair-serving candidate of `set` on every subcarrier at `dual`,
/// solved without pruning, with the cost of putting it on the subcarrier.
/// One-way entries hold the relaying branch only.
fn candidate_table(
    inst: &NetworkInstance,
    dual_result: &DualResult,
    opts: &RecoveryOptions,
    pricing: Pricing,
) -> (Vec<Vec<SubcarrierCandidate>>, Vec<Vec<f64>>) {
    let dims = inst.dims;
    let modes = match &dual_result.candidate_set {
        CandidateSet::Full => all_modes(dims),
        CandidateSet::Modes(m) => m.clone(),
        CandidateSet::Frozen(_) => Vec::new(),
    };
    let d = dual_result.dual.with_lambda_floor(opts.dual.eval.lambda_floor);
    let inner = opts.dual.eval.inner();
    let ctx = ModeContext {
        inner: &inner,
        prune_below: f64::NEG_INFINITY,
        relay_only: true,
    };
    let mut table = Vec::with_capacity(inst.num_subcarriers);
    let mut cost = Vec::with_capacity(inst.num_subcarriers);
    for n in 0..inst.num_subcarriers {
        let winner = dual_result.candidates[n].value;
        let mut row = Vec::new();
        let mut row_cost = Vec::new();
        for &m in modes.iter().filter(|m| m.pair().is_some()) {
            let inputs = mode_inputs(inst, &d, n, m);
            let mut c = solve_mode(m, &inputs, &ctx);
            match pricing {
                Pricing::Dual => row_cost.push((winner - c.value).max(0.0)),
                Pricing::FullBudget => {
                    let pair = m.pair().expect("pair mode");
                    let active: [bool; 2] = match m {
                        Mode::TwoWay { .. } => [true, true],
                        _ => {
                            let src = crate::persub::source_side(m).expect("directed mode").index();
                            [src == 0, src == 1]
                        }
                    };
                    for side in [Side::First, Side::Second] {
                        c.pu_power[side.index()] = if active[side.index()] {
                            inst.peak_power[dims.pu_node(pair, side)]
                        } else {
                            0.0
                        };
                    }
                    c.su_power = m.su().map_or(0.0, |su| inst.peak_power[dims.su_user(su)]);
                    c.su_transmits = false;
                    c = rates_for_powers(&c, &inputs);
                    row_cost.push(winner.max(0.0));
                }
            }
            row.push(c);
        }
        table.push(row);
        cost.push(row_cost);
    }
    (table, cost)
}

/// Relative rate shortfall of each PU node under `rate`.
fn shortfalls(inst: &NetworkInstance, rate: &[f64]) -> Vec<f64> {
    rate.iter()
        .zip(&inst.rate_requirement)
        .map(|(r, req)| if *req > 0.0 { (req - r) / req } else { 0.0 })
        .collect()
}

/// Assignment covering state: which subcarriers were handed to a PU node
/// against the dual winner, and the candidate now sitting on each.
struct Cover<'a> {
    inst: &'a NetworkInstance,
    table: Vec<Vec<SubcarrierCandidate>>,
    cost: Vec<Vec<f64>>,
    current: Vec<SubcarrierCandidate>,
    fixed: Vec<bool>,
}

impl Cover<'_> {
    /// Hands node `p` an unfixed subcarrier candidate that serves it. The
    /// pick minimizes the swap cost per unit of remaining
    /// shortfall covered, counted over every short node, so a candidate
    /// serving both ends of a pair counts twice. `false` if none is left.
    fn serve(&mut self, p: usize) -> bool {
        let dims = self.inst.dims;
        let rates = self.rates();
        let need: Vec<f64> = rates
            .iter()
            .zip(&self.inst.rate_requirement)
            .map(|(r, req)| (req - r).max(0.0))
            .collect();
        let mut pick: Option<(usize, usize, f64, f64)> = None;
        for (n, row) in self.table.iter().enumerate() {
            if self.fixed[n] {
                continue;
            }
            for (i, c) in row.iter().enumerate() {
                let mut c = *c;
                if let Mode::TwoWay { pair, .. } = c.mode {
                    let nodes = [dims.pu_node(pair, Side::First), dims.pu_node(pair, Side::Second)];
                    c.pu_rate = split_twoway(twoway_caps(self.inst, n, &c), nodes.map(|u| need[u]));
                }
                let r = c.rate_entries(dims).find(|&(node, _)| node == p).map_or(0.0, |e| e.1);
                if r <= 0.0 || c.mode == self.current[n].mode {
                    continue;
                }
                let covered: f64 = c
                    .rate_entries(dims)
                    .filter(|&(q, _)| need[q] > 0.0)
                    .map(|(q, rq)| rq.min(need[q]) / need[q])
                    .sum();
                let score = self.cost[n][i] / covered;
                let better = match pick {
                    None => true,
                    Some((_, _, s, cv)) => score < s - TIE_EPS || (score <= s + TIE_EPS && covered > cv),
                };
                if better {
                    pick = Some((n, i, score, covered));
                }
            }
        }
        match pick {
            Some((n, i, _, _)) => {
                self.current[n] = self.table[n][i];
                self.fixed[n] = true;
                true
            }
            None => false,
        }
    }

    fn rates(&self) -> Vec<f64> {
        let mut c = self.current.clone();
        balance_twoway_rates(self.inst, &mut c);
        Allocation::from_candidates(self.inst.dims, &self.inst.su_weight, c).pu_rate
    }

    fn modes(&self) -> Vec<Mode> {
        frozen_modes(&self.current)
    }
}

struct Attempt {
    best_feasible: Option<Allocation>,
    last: Allocation,
    iterations: usize,
}

/// Reduced dual over `modes` starting at `center`, then repair.
fn attempt(inst: &NetworkInstance, modes: Vec<Mode>, center: &DualState, opts: &RecoveryOptions) -> Attempt {
    let dims = inst.dims;
    let weights = &inst.su_weight;
    let set = CandidateSet::Frozen(modes.clone());

    // Every reduced-dual iterate is a candidate primal point once scaled
    // into the power budget; keep the best one that is feasible. The
    // latest iterates are also kept raw for mixing.
    let mut fallback: Option<Allocation> = None;
    let mut recent: VecDeque<Vec<SubcarrierCandidate>> = VecDeque::with_capacity(opts.mix_window);
    let mut observe = |d: &DualState, ev: &crate::dual::DualEvaluation| {
        if opts.mix_window > 0 {
            if recent.len() == opts.mix_window {
                recent.pop_front();
            }
            recent.push_back(ev.candidates.clone());
        }
        let mut c = ev.candidates.clone();
        scale_to_budget(inst, d, &mut c);
        let a = Allocation::from_candidates(dims, weights, c);
        if is_feasible(inst, &a)
            && fallback
                .as_ref()
                .map_or(true, |b| a.weighted_sum_rate > b.weighted_sum_rate)
        {
            fallback = Some(a);
        }
    };
    let reduced = solve_dual_from(
        inst,
        &set,
        &opts.dual,
        center.to_vec(),
        opts.dual.radius(dims.dual_dim()),
        &mut observe,
    );
    let extracted = Allocation::from_candidates(dims, weights, reduced.candidates.clone());
    let repaired = repair_feasibility(inst, &extracted, &reduced.dual, &modes, opts);
    let mut best = repaired.feasible.then(|| repaired.allocation.clone());
    let mut consider = |a: Allocation| {
        if best.as_ref().map_or(true, |b| a.weighted_sum_rate > b.weighted_sum_rate) {
            best = Some(a);
        }
    };
    if let Some(f) = fallback {
        consider(f);
    }
    recent.push_back(reduced.candidates.clone());
    if let Some(m) = mix_iterates(inst, &reduced.dual, recent.make_contiguous()) {
        consider(m);
    }
    Attempt {
        best_feasible: best,
        last: repaired.allocation,
        iterations: reduced.iterations,
    }
}

/// Best convex combination of primal points of the same frozen assignment.
///
/// Near the reduced-dual optimum the per-subcarrier maximizers jump between
/// vertices (a two-way subcarrier serving one direction or the other), and
/// no single iterate may meet every rate. Rates are concave in the powers,
/// so averaging powers subcarrier by subcarrier delivers at least the
/// averaged rates at no more than the averaged power. The weights come from
/// a small LP over the points' totals.
fn mix_iterates(inst: &NetworkInstance, dual: &DualState, points: &[Vec<SubcarrierCandidate>]) -> Option<Allocation> {
    let dims = inst.dims;
    let weights = &inst.su_weight;
    if points.len() < 2 {
        return None;
    }
    let totals: Vec<Allocation> = points
        .iter()
        .map(|c| Allocation::from_candidates(dims, weights, c.clone()))
        .collect();
    let theta = mixing_weights(inst, &totals)?;
    let n = inst.num_subcarriers;
    let mut mixed: Vec<SubcarrierCandidate> = (0..n).map(|i| SubcarrierCandidate::empty(points[0][i].mode)).collect();
    for (pt, &t) in points.iter().zip(&theta) {
        if t <= 0.0 {
            continue;
        }
        for (m, c) in mixed.iter_mut().zip(pt) {
            m.pu_power[0] += t * c.pu_power[0];
            m.pu_power[1] += t * c.pu_power[1];
            m.su_power += t * c.su_power;
            m.pu_rate[0] += t * c.pu_rate[0];
            m.pu_rate[1] += t * c.pu_rate[1];
            m.su_transmits |= c.su_transmits;
        }
    }
    for (i, m) in mixed.iter_mut().enumerate() {
        let averaged = m.pu_rate;
        *m = rates_for_powers(m, &mode_inputs(inst, dual, i, m.mode));
        if matches!(m.mode, Mode::TwoWay { .. }) {
            // Inside the region at the averaged powers by concavity.
            m.pu_rate = averaged;
        }
    }
    let a = Allocation::from_candidates(dims, weights, mixed.clone());
    if is_feasible(inst, &a) {
        return Some(a);
    }
    scale_to_budget(inst, dual, &mut mixed);
    let a = Allocation::from_candidates(dims, weights, mixed);
    is_feasible(inst, &a).then_some(a)
}

/// `max Σ θ_k v_k` over the simplex subject to the averaged power budgets
/// and rate requirements.
fn mixing_weights(inst: &NetworkInstance, totals: &[Allocation]) -> Option<Vec<f64>> {
    use clarabel::algebra::CscMatrix;
    use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

    let k = totals.len();
    let users = inst.dims.users();
    let nodes = inst.dims.pu_nodes();
    let (mut ri, mut ci, mut v) = (Vec::new(), Vec::new(), Vec::new());
    let mut b = Vec::new();
    // Row 0: Σθ = 1 (zero cone). Then θ ≥ 0, budgets, requirements.
    for j in 0..k {
        ri.push(0);
        ci.push(j);
        v.push(1.0);
    }
    b.push(1.0);
    for j in 0..k {
        ri.push(1 + j);
        ci.push(j);
        v.push(-1.0);
        b.push(0.0);
    }
    let base = 1 + k;
    for u in 0..users {
        for (j, a) in totals.iter().enumerate() {
            if a.user_power[u] != 0.0 {
                ri.push(base + u);
                ci.push(j);
                v.push(a.user_power[u]);
            }
        }
        b.push(inst.peak_power[u] * (1.0 - 1e-9));
    }
    let base = base + users;
    for p in 0..nodes {
        for (j, a) in totals.iter().enumerate() {
            if a.pu_rate[p] != 0.0 {
                ri.push(base + p);
                ci.push(j);
                v.push(-a.pu_rate[p]);
            }
        }
        b.push(-inst.rate_requirement[p] * (1.0 + 1e-9));
    }
    let rows = base + nodes;
    let q: Vec<f64> = totals.iter().map(|a| -a.weighted_sum_rate).collect();
    let a = CscMatrix::new_from_triplets(rows, k, ri, ci, v);
    let p = CscMatrix::zeros((k, k));
    let cones = [SupportedConeT::ZeroConeT(1), SupportedConeT::NonnegativeConeT(rows - 1)];
    let settings = DefaultSettingsBuilder::default().verbose(false).build().expect("static settings");
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings);
    solver.solve();
    if !matches!(solver.solution.status, SolverStatus::Solved | SolverStatus::AlmostSolved) {
        return None;
    }
    let mut theta: Vec<f64> = solver.solution.x.iter().map(|t| t.max(0.0)).collect();
    let sum: f64 = theta.iter().sum();
    if !(sum > 0.0) {
        return None;
    }
    theta.iter_mut().for_each(|t| *t /= sum);
    Some(theta)
}

/// Recovers a feasible allocation for the candidate set that produced
/// `dual_result`. Infeasibility is reported in the returned report, never
/// as an error.
pub fn recover_primal(
    inst: &NetworkInstance,
    dual_result: &DualResult,
    opts: &RecoveryOptions,
) -> (Allocation, SolverReport) {
    let start = Instant::now();
    let dims = inst.dims;
    let weights = &inst.su_weight;
    let finish = |alloc: Allocation, feasible: bool, iterations: usize| {
        let check = feasibility_check(inst, &alloc, 0.0, RATE_SLACK).expect("allocation matches instance");
        let report = SolverReport {
            dual_bound: dual_result.value,
            primal_sum_rate: alloc.weighted_sum_rate,
            feasible: feasible && check.feasible,
            max_power_violation: check.max_power_violation,
            max_rate_shortfall: check.max_rate_shortfall,
            iterations: dual_result.iterations + iterations,
            dual_converged: dual_result.converged,
            wall_time: start.elapsed().as_secs_f64(),
        };
        (alloc, report)
    };
    if dual_result.infeasible {
        return finish(Allocation::idle(dims, weights, inst.num_subcarriers), false, 0);
    }

    let (mut best, mut iterations) = cover_pass(inst, dual_result, opts, Pricing::Dual);
    let gap = |a: &Allocation| (dual_result.value - a.weighted_sum_rate) / dual_result.value.abs().max(f64::MIN_POSITIVE);
    let retry = match &best {
        Ok(a) => gap(a) > opts.second_pass_gap,
        Err(_) => true,
    };
    if retry {
        let (second, more) = cover_pass(inst, dual_result, opts, Pricing::FullBudget);
        iterations += more;
        best = match (best, second) {
            (Ok(a), Ok(b)) => Ok(if b.weighted_sum_rate > a.weighted_sum_rate { b } else { a }),
            (Ok(a), Err(_)) | (Err(_), Ok(a)) => Ok(a),
            (Err(a), Err(_)) => Err(a),
        };
    }
    if inst.num_subcarriers <= opts.local_search_max_subcarriers {
        if let Ok(a) = &best {
            let (improved, more) = local_search(inst, dual_result, a, opts);
            iterations += more;
            best = Ok(improved);
        }
    }
    match best {
        Ok(a) => finish(a, true, iterations),
        Err(last) => finish(last, false, iterations),
    }
}

/// First-improvement search over single-subcarrier mode swaps, each
/// judged by a reduced-dual solve. Only affordable for a handful of
/// subcarriers; it closes part of the duality gap that covering leaves.
fn local_search(
    inst: &NetworkInstance,
    dual_result: &DualResult,
    start: &Allocation,
    opts: &RecoveryOptions,
) -> (Allocation, usize) {
    let choices: Vec<Mode> = match &dual_result.candidate_set {
        CandidateSet::Full => all_modes(inst.dims),
        CandidateSet::Modes(m) => m.clone(),
        CandidateSet::Frozen(_) => return (start.clone(), 0),
    };
    let mut best = start.clone();
    let mut modes = frozen_modes(&best.candidates);
    let mut iterations = 0;
    let mut try_modes = |trial: Vec<Mode>, best: &mut Allocation, modes: &mut Vec<Mode>| -> bool {
        let a = attempt(inst, trial.clone(), &dual_result.dual, opts);
        iterations += a.iterations;
        match a.best_feasible {
            Some(f) if f.weighted_sum_rate > best.weighted_sum_rate + 1e-9 * (1.0 + best.weighted_sum_rate.abs()) => {
                *best = f;
                *modes = trial;
                true
            }
            _ => false,
        }
    };
    let serves_pu = |m: &Mode| m.pair().is_some();
    for _ in 0..opts.local_search_sweeps {
        let mut improved = false;
        for n in 0..inst.num_subcarriers {
            for &m in choices.iter().filter(|&&m| m != Mode::Idle) {
                if m == modes[n] {
                    continue;
                }
                let mut trial = modes.clone();
                trial[n] = m;
                improved |= try_modes(trial, &mut best, &mut modes);
            }
        }
        if improved {
            continue;
        }
        // Collapse: one subcarrier takes over the pair, every other PU
        // subcarrier goes to the SU with the strongest weighted link on it.
        let best_su = |k: usize| {
            (0..inst.dims.sus)
                .max_by(|&a, &b| {
                    let va = inst.su_weight[a] * inst.su_bs_gain[a][k];
                    let vb = inst.su_weight[b] * inst.su_bs_gain[b][k];
                    va.total_cmp(&vb).then(b.cmp(&a))
                })
                .map(|su| Mode::DirectSu { su })
        };
        for n in 0..inst.num_subcarriers {
            for &m in choices.iter().filter(|m| serves_pu(m)) {
                if m == modes[n] {
                    continue;
                }
                let mut trial = modes.clone();
                trial[n] = m;
                for k in (0..inst.num_subcarriers).filter(|&k| k != n && serves_pu(&modes[k])) {
                    if let Some(s) = best_su(k) {
                        trial[k] = s;
                    }
                }
                improved |= try_modes(trial, &mut best, &mut modes);
            }
        }
        if improved {
            continue;
        }
        // Paired move: a new PU-serving mode on one subcarrier frees another
        // PU subcarrier for an SU. Neither half improves on its own.
        'pairs: for n in 0..inst.num_subcarriers {
            for &m in choices.iter().filter(|m| serves_pu(m)) {
                if m == modes[n] {
                    continue;
                }
                let pu_subcarriers: Vec<usize> = (0..inst.num_subcarriers).filter(|&k| k != n && serves_pu(&modes[k])).collect();
                for k in pu_subcarriers {
                    for &s in choices.iter().filter(|m| matches!(m, Mode::DirectSu { .. })) {
                        let mut trial = modes.clone();
                        trial[n] = m;
                        trial[k] = s;
                        if try_modes(trial, &mut best, &mut modes) {
                            improved = true;
                            break 'pairs;
                        }
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    (best, iterations)
}

/// One covering pass. At the dual optimum some subcarriers are tied
/// between candidates serving different users, and the tie-break can leave
/// a PU node with nothing. Such nodes get their cheapest subcarriers first;
/// then one more subcarrier goes to the shortest node while the reduced
/// problem stays infeasible. `Err` carries the last infeasible allocation.
fn cover_pass(
    inst: &NetworkInstance,
    dual_result: &DualResult,
    opts: &RecoveryOptions,
    pricing: Pricing,
) -> (Result<Allocation, Allocation>, usize) {
    let (table, cost) = candidate_table(inst, dual_result, opts, pricing);
    let mut cover = Cover {
        inst,
        table,
        cost,
        current: dual_result.candidates.clone(),
        fixed: vec![false; inst.num_subcarriers],
    };
    let worst_short = |rate: &[f64]| {
        let short = shortfalls(inst, rate);
        (0..short.len())
            .filter(|&p| short[p] > RATE_SLACK)
            .max_by(|&a, &b| short[a].total_cmp(&short[b]))
    };
    for _ in 0..inst.num_subcarriers {
        match worst_short(&cover.rates()) {
            Some(p) if cover.serve(p) => {}
            _ => break,
        }
    }

    let mut iterations = 0;
    let mut last = None;
    let mut tried: Vec<Vec<Mode>> = Vec::new();
    for _ in 0..opts.max_cover_rounds.max(1) {
        let modes = cover.modes();
        if tried.contains(&modes) {
            break;
        }
        tried.push(modes.clone());
        let a = attempt(inst, modes, &dual_result.dual, opts);
        iterations += a.iterations;
        if let Some(best) = a.best_feasible {
            return (Ok(best), iterations);
        }
        let worst = worst_short(&a.last.pu_rate);
        last = Some(a.last);
        match worst {
            Some(p) if cover.serve(p) => {}
            _ => break,
        }
    }
    let last = last.unwrap_or_else(|| Allocation::idle(inst.dims, &inst.su_weight, inst.num_subcarriers));
    (Err(last), iterations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::solve_dual;
    use crate::model::Dims;

    #[test]
    fn su_only_problem_recovers_dual_value() {
        let mut inst = NetworkInstance::zeroed(Dims::new(1, 2), 4, 4.0, 0.0);
        for n in 0..4 {
            inst.su_bs_gain[0][n] = 1.0 + n as f64;
            inst.su_bs_gain[1][n] = 4.0 - n as f64;
        }
        let d = solve_dual(&inst, &CandidateSet::Full, &DualOptions::default());
        let (alloc, rep) = recover_primal(&inst, &d, &RecoveryOptions::default());
        assert!(rep.feasible);
        assert!(alloc.candidates.iter().all(|c| matches!(c.mode, Mode::DirectSu { .. })));
        assert!(rep.relative_gap().abs() < 1e-3, "{rep:?}");
    }

    #[test]
    fn overshoot_is_scaled_exactly_to_cap() {
        let mut inst = NetworkInstance::zeroed(Dims::new(1, 1), 2, 1.0, 0.0);
        inst.su_bs_gain[0] = vec![3.0, 1.0];
        let mut c = vec![SubcarrierCandidate::empty(Mode::DirectSu { su: 0 }); 2];
        c[0].su_power = 0.7035;
        c[1].su_power = 0.3;
        let dual = DualState::uniform(inst.dims, 1.0);
        for (n, x) in c.iter_mut().enumerate() {
            *x = rates_for_powers(x, &mode_inputs(&inst, &dual, n, x.mode));
        }
        let before = Allocation::from_candidates(inst.dims, &inst.su_weight, c.clone());
        let over = scale_to_budget(&inst, &dual, &mut c);
        let after = Allocation::from_candidates(inst.dims, &inst.su_weight, c);
        assert!((over - 0.0035).abs() < 1e-12);
        assert!(after.user_power[2] <= 1.0);
        assert!(after.user_power[2] > 1.0 - 1e-12);
        let loss = (before.weighted_sum_rate - after.weighted_sum_rate) / before.weighted_sum_rate;
        assert!(loss > 0.0 && loss < 0.01);
    }

    #[test]
    fn feasible_allocation_is_left_alone() {
        let mut inst = NetworkInstance::zeroed(Dims::new(1, 1), 1, 1.0, 0.0);
        inst.su_bs_gain[0] = vec![2.0];
        let dual = DualState::uniform(inst.dims, 1.0);
        let mut c = SubcarrierCandidate::empty(Mode::DirectSu { su: 0 });
        c.su_power = 0.5;
        c.su_rate = 1.0;
        let a = Allocation::from_candidates(inst.dims, &inst.su_weight, vec![c]);
        let r = repair_feasibility(&inst, &a, &dual, &[c.mode], &RecoveryOptions::default());
        assert!(r.feasible);
        assert_eq!(r.allocation, a);
    }

    #[test]
    fn unreachable_rate_is_marked_infeasible() {
        let mut inst = NetworkInstance::zeroed(Dims::new(1, 1), 2, 1.0, 50.0);
        inst.direct_gain[0] = vec![1.0, 1.0];
        inst.su_bs_gain[0] = vec![1.0, 1.0];
        let d = solve_dual(&inst, &CandidateSet::Full, &DualOptions::default());
        let (alloc, rep) = recover_primal(&inst, &d, &RecoveryOptions::default());
        assert!(!rep.feasible);
        for (p, cap) in alloc.user_power.iter().zip(&inst.peak_power) {
            assert!(p <= cap);
        }
    }
}
