//! Dual function evaluation and the outer ellipsoid loop over `(λ, β)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ellipsoid::Ellipsoid;
use crate::model::{
    DualState, Direction, Dims, Mode, NetworkInstance, Side, SubcarrierCandidate,
};
use crate::persub::{solve_mode, InnerOptions, ModeContext, ModeInputs};

/// Two candidate values closer than this are treated as tied; the one
/// enumerated first wins.
pub const TIE_EPS: f64 = 1e-12;

/// Which (mode, users) choices a subcarrier may take.
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateSet {
    /// Every mode with every user combination.
    Full,
    /// The same list on every subcarrier. Idle is always added.
    Modes(Vec<Mode>),
    /// Exactly one mode per subcarrier; powers are still optimized. A
    /// frozen one-way mode only relays.
    Frozen(Vec<Mode>),
}

impl CandidateSet {
    /// Direct transmissions only.
    pub fn direct_only(dims: Dims) -> Self {
        Self::Modes(
            all_modes(dims)
                .into_iter()
                .filter(|m| matches!(m, Mode::DirectPu { .. } | Mode::DirectSu { .. }))
                .collect(),
        )
    }
}

/// All modes in enumeration (tie-break) order: by mode ordinal, then pair,
/// direction and SU index.
pub fn all_modes(dims: Dims) -> Vec<Mode> {
    let mut out = vec![Mode::Idle];
    for pair in 0..dims.pu_pairs {
        for dir in Direction::BOTH {
            out.push(Mode::DirectPu { pair, dir });
        }
    }
    for su in 0..dims.sus {
        out.push(Mode::DirectSu { su });
    }
    for pair in 0..dims.pu_pairs {
        for dir in Direction::BOTH {
            for su in 0..dims.sus {
                out.push(Mode::OneWay { pair, dir, su });
            }
        }
    }
    for pair in 0..dims.pu_pairs {
        for su in 0..dims.sus {
            out.push(Mode::TwoWay { pair, su });
        }
    }
    out
}

/// Gains and prices a mode sees on subcarrier `n`, oriented as
/// [`ModeInputs`] expects.
pub fn mode_inputs(inst: &NetworkInstance, dual: &DualState, n: usize, mode: Mode) -> ModeInputs {
    let dims = inst.dims;
    let mut m = ModeInputs {
        noise_variance: inst.noise_variance,
        ..Default::default()
    };
    let (pair, first, second) = match mode {
        Mode::Idle => return m,
        Mode::DirectSu { .. } => (None, Side::First, Side::Second),
        Mode::DirectPu { pair, dir } | Mode::OneWay { pair, dir, .. } => {
            (Some(pair), dir.source(), dir.destination())
        }
        Mode::TwoWay { pair, .. } => (Some(pair), Side::First, Side::Second),
    };
    if let Some(pair) = pair {
        let a = dims.pu_node(pair, first);
        let b = dims.pu_node(pair, second);
        m.gain_direct = inst.direct_gain[pair][n];
        m.lambda_first = dual.lambda_pu[a];
        m.lambda_second = dual.lambda_pu[b];
        m.beta_first = dual.beta[a];
        m.beta_second = dual.beta[b];
        if let Some(su) = mode.su() {
            m.gain_first_relay = inst.pu_su_gain[a][su][n];
            m.gain_second_relay = inst.pu_su_gain[b][su][n];
        }
    }
    if let Some(su) = mode.su() {
        m.gain_su_bs = inst.su_bs_gain[su][n];
        m.lambda_su = dual.lambda_su[su];
        m.su_weight = inst.su_weight[su];
    }
    m
}

/// Options shared by every dual evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    /// Every λ is raised to at least this before evaluation.
    pub lambda_floor: f64,
    pub inner_gap_tol: f64,
    pub inner_max_iters: usize,
    /// Search subcarriers on the rayon pool.
    pub parallel: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        let inner = InnerOptions::default();
        Self {
            lambda_floor: 1e-9,
            inner_gap_tol: inner.gap_tol,
            inner_max_iters: inner.max_iters,
            parallel: false,
        }
    }
}

impl EvalOptions {
    pub fn inner(&self) -> InnerOptions {
        InnerOptions {
            gap_tol: self.inner_gap_tol,
            max_iters: self.inner_max_iters,
        }
    }
}

/// Best candidate on subcarrier `n` from `modes`, searched in order. Two-way
/// solves are stopped as soon as they provably cannot beat the incumbent.
/// Returns the winner and the number of candidates considered.
pub fn best_candidate_among(
    inst: &NetworkInstance,
    dual: &DualState,
    n: usize,
    modes: &[Mode],
    inner: &InnerOptions,
) -> (SubcarrierCandidate, usize) {
    let mut best = SubcarrierCandidate::idle();
    let mut count = 1;
    for &mode in modes {
        if mode == Mode::Idle {
            continue;
        }
        count += 1;
        let ctx = ModeContext {
            inner,
            prune_below: best.value + TIE_EPS,
            relay_only: false,
        };
        let c = solve_mode(mode, &mode_inputs(inst, dual, n, mode), &ctx);
        if c.value > best.value + TIE_EPS {
            best = c;
        }
    }
    (best, count)
}

/// Full candidate search on one subcarrier at `dual` (λ floor applied).
pub fn best_candidate_on_subcarrier(
    n: usize,
    inst: &NetworkInstance,
    dual: &DualState,
    opts: &EvalOptions,
) -> SubcarrierCandidate {
    let d = dual.with_lambda_floor(opts.lambda_floor);
    best_candidate_among(inst, &d, n, &all_modes(inst.dims), &opts.inner()).0
}

/// Dual function value, a subgradient and the per-subcarrier maximizers.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEvaluation {
    pub value: f64,
    /// Ordered like [`DualState::to_vec`]: `P_max − ΣP` per user, then
    /// `ΣR − r` per PU node.
    pub subgradient: Vec<f64>,
    pub candidates: Vec<SubcarrierCandidate>,
    /// Candidates considered on each subcarrier.
    pub candidates_considered: Vec<usize>,
}

fn solve_subcarrier(
    inst: &NetworkInstance,
    dual: &DualState,
    n: usize,
    set: &CandidateSet,
    modes: &[Mode],
    inner: &InnerOptions,
) -> (SubcarrierCandidate, usize) {
    match set {
        CandidateSet::Frozen(fixed) => {
            let mode = fixed[n];
            let ctx = ModeContext {
                inner,
                prune_below: f64::NEG_INFINITY,
                relay_only: true,
            };
            (solve_mode(mode, &mode_inputs(inst, dual, n, mode), &ctx), 1)
        }
        _ => best_candidate_among(inst, dual, n, modes, inner),
    }
}

/// Evaluates `g(λ, β)` restricted to `set`.
pub fn evaluate_dual(
    inst: &NetworkInstance,
    dual: &DualState,
    set: &CandidateSet,
    opts: &EvalOptions,
) -> DualEvaluation {
    let dims = inst.dims;
    let d = dual.with_lambda_floor(opts.lambda_floor);
    let inner = opts.inner();
    let modes: Vec<Mode> = match set {
        CandidateSet::Full => all_modes(dims),
        CandidateSet::Modes(m) => m.clone(),
        CandidateSet::Frozen(m) => {
            assert_eq!(m.len(), inst.num_subcarriers, "one frozen mode per subcarrier");
            Vec::new()
        }
    };
    let per_sub = |n: usize| solve_subcarrier(inst, &d, n, set, &modes, &inner);
    let results: Vec<(SubcarrierCandidate, usize)> = if opts.parallel {
        (0..inst.num_subcarriers).into_par_iter().map(per_sub).collect()
    } else {
        (0..inst.num_subcarriers).map(per_sub).collect()
    };

    let mut power = vec![0.0; dims.users()];
    let mut rate = vec![0.0; dims.pu_nodes()];
    let mut value = 0.0;
    for (c, _) in &results {
        value += c.value;
        for (u, p) in c.power_entries(dims) {
            power[u] += p;
        }
        for (node, r) in c.rate_entries(dims) {
            rate[node] += r;
        }
    }
    let mut subgradient = Vec::with_capacity(dims.dual_dim());
    for u in 0..dims.users() {
        value += d.lambda(u) * inst.peak_power[u];
        subgradient.push(inst.peak_power[u] - power[u]);
    }
    for p in 0..dims.pu_nodes() {
        value -= d.beta[p] * inst.rate_requirement[p];
        subgradient.push(rate[p] - inst.rate_requirement[p]);
    }
    let (candidates, candidates_considered) = results.into_iter().unzip();
    DualEvaluation {
        value,
        subgradient,
        candidates,
        candidates_considered,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualOptions {
    /// Every multiplier of the starting ball centre.
    pub initial_center: f64,
    /// Starting radius; `None` means `10 √n`.
    pub initial_radius: Option<f64>,
    pub tol_abs: f64,
    pub tol_rel: f64,
    /// `None` means `2000 n`.
    pub max_iters: Option<usize>,
    pub eval: EvalOptions,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            initial_center: 1.0,
            initial_radius: None,
            tol_abs: 1e-4,
            tol_rel: 1e-6,
            max_iters: None,
            eval: EvalOptions::default(),
        }
    }
}

impl DualOptions {
    pub fn radius(&self, dim: usize) -> f64 {
        self.initial_radius.unwrap_or(10.0 * (dim as f64).sqrt())
    }

    pub fn iteration_limit(&self, dim: usize) -> usize {
        self.max_iters.unwrap_or(2000 * dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualResult {
    /// Best dual point found.
    pub dual: DualState,
    /// `g` at `dual`: an upper bound on the restricted primal optimum.
    pub value: f64,
    pub subgradient: Vec<f64>,
    pub candidates: Vec<SubcarrierCandidate>,
    /// Ellipsoid iterations, feasibility cuts included.
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// A dual point with `g < 0` was found, which proves the primal problem
    /// infeasible (its objective is never negative).
    pub infeasible: bool,
    /// Best dual value after each evaluation.
    pub trace: Vec<f64>,
    /// The candidate set the dual was minimized over.
    pub candidate_set: CandidateSet,
}

/// Minimizes the dual function over `λ, β ≥ 0` with the central-cut
/// ellipsoid method.
pub fn solve_dual(inst: &NetworkInstance, set: &CandidateSet, opts: &DualOptions) -> DualResult {
    let dims = inst.dims;
    let n = dims.dual_dim();
    let center = vec![opts.initial_center; n];
    solve_dual_from(inst, set, opts, center, opts.radius(n), &mut |_, _| {})
}

/// [`solve_dual`] with an explicit starting ball. `observer` sees every
/// evaluated dual point (λ floor applied) with its evaluation.
pub fn solve_dual_from(
    inst: &NetworkInstance,
    set: &CandidateSet,
    opts: &DualOptions,
    center: Vec<f64>,
    radius: f64,
    observer: &mut dyn FnMut(&DualState, &DualEvaluation),
) -> DualResult {
    let dims = inst.dims;
    let n = dims.dual_dim();
    let limit = opts.iteration_limit(n);
    let mut ell = Ellipsoid::ball(center, radius);
    let mut best: Option<(DualState, DualEvaluation)> = None;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut infeasible = false;

    while iterations < limit {
        iterations += 1;
        let c = ell.center();
        let (worst, lowest) = c
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, &x)| if x < acc.1 { (i, x) } else { acc });
        if lowest < 0.0 {
            let mut g = vec![0.0; n];
            g[worst] = -1.0;
            if !ell.cut(&g) {
                break;
            }
            continue;
        }
        let point = DualState::from_slice(dims, c).expect("ellipsoid dimension matches");
        let ev = evaluate_dual(inst, &point, set, &opts.eval);
        observer(&point.with_lambda_floor(opts.eval.lambda_floor), &ev);
        let width = ell.width_along(&ev.subgradient);
        let improved = best.as_ref().map_or(true, |(_, b)| ev.value < b.value);
        if improved {
            best = Some((point, ev.clone()));
        }
        let best_value = best.as_ref().map(|(_, b)| b.value).unwrap_or(f64::INFINITY);
        trace.push(best_value);
        if best_value < -opts.tol_abs {
            infeasible = true;
            break;
        }
        if width < opts.tol_abs + opts.tol_rel * best_value.abs() {
            converged = true;
            break;
        }
        if !ell.cut(&ev.subgradient) {
            converged = true;
            break;
        }
    }

    let evaluations = trace.len();
    let (dual, ev) = best.unwrap_or_else(|| {
        let d = DualState::uniform(dims, opts.initial_center.max(0.0));
        let ev = evaluate_dual(inst, &d, set, &opts.eval);
        (d, ev)
    });
    DualResult {
        dual: dual.with_lambda_floor(opts.eval.lambda_floor),
        value: ev.value,
        subgradient: ev.subgradient,
        candidates: ev.candidates,
        iterations,
        evaluations,
        converged,
        infeasible,
        trace,
        candidate_set: set.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetworkInstance;

    fn dead_instance(n: usize) -> NetworkInstance {
        NetworkInstance::zeroed(Dims::new(1, 2), n, 10.0, 5.0)
    }

    #[test]
    fn enumeration_count_matches_formula() {
        for (kp, ks) in [(1, 1), (2, 4), (3, 2)] {
            let d = Dims::new(kp, ks);
            assert_eq!(all_modes(d).len(), d.full_candidate_count());
            assert_eq!(all_modes(d).len(), 1 + 2 * kp + ks + 3 * kp * ks);
        }
    }

    #[test]
    fn enumeration_is_in_tie_break_order() {
        let m = all_modes(Dims::new(2, 3));
        assert!(m.windows(2).all(|w| w[0].ordinal() <= w[1].ordinal()));
    }

    #[test]
    fn all_gains_zero_gives_constant_terms() {
        let inst = dead_instance(3);
        let dual = DualState {
            lambda_pu: vec![0.5, 0.25],
            lambda_su: vec![1.0, 2.0],
            beta: vec![0.3, 0.7],
        };
        let ev = evaluate_dual(&inst, &dual, &CandidateSet::Full, &EvalOptions::default());
        assert!(ev.candidates.iter().all(|c| c.mode == Mode::Idle));
        let expect = 10.0 * (0.5 + 0.25 + 1.0 + 2.0) - 5.0 * (0.3 + 0.7);
        assert!((ev.value - expect).abs() < 1e-12);
        assert_eq!(ev.subgradient, vec![10.0, 10.0, 10.0, 10.0, -5.0, -5.0]);
    }

    #[test]
    fn only_live_su_link_wins() {
        let mut inst = dead_instance(1);
        inst.su_bs_gain[1][0] = 2.0;
        let dual = DualState::uniform(inst.dims, 0.1);
        let c = best_candidate_on_subcarrier(0, &inst, &dual, &EvalOptions::default());
        assert_eq!(c.mode, Mode::DirectSu { su: 1 });
    }

    #[test]
    fn empty_problem_has_zero_optimum() {
        let mut inst = dead_instance(2);
        inst.rate_requirement = vec![0.0; 2];
        let r = solve_dual(&inst, &CandidateSet::Full, &DualOptions::default());
        assert!(r.converged);
        assert!(r.value.abs() < 1e-3, "{}", r.value);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn unreachable_rates_are_certified_infeasible() {
        let inst = dead_instance(2);
        let r = solve_dual(&inst, &CandidateSet::Full, &DualOptions::default());
        assert!(r.infeasible);
        assert!(r.value < 0.0);
    }
}
