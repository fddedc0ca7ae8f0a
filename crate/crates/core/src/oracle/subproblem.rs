//! Exhaustive grid search of one mode's per-subcarrier Lagrangian.
//!
//! Objectives are written straight from the rate definitions (min of the
//! two hops, the multiple-access and broadcast regions) and share no code
//! with the closed-form solvers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::persub::ModeInputs;

/// Which per-subcarrier problem to search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleMode {
    /// Source power only; reward on the destination rate.
    DirectPu,
    DirectSu,
    /// Source and relay power, time split `t`.
    OneWay,
    /// Both PU powers and the relay power, time split `t`.
    TwoWay,
}

impl OracleMode {
    fn dims(self) -> usize {
        match self {
            OracleMode::DirectPu | OracleMode::DirectSu => 1,
            OracleMode::OneWay => 2,
            OracleMode::TwoWay => 3,
        }
    }

    fn has_time_split(self) -> bool {
        matches!(self, OracleMode::OneWay | OracleMode::TwoWay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Log-spaced points per power dimension (zero is added).
    pub points: usize,
    /// Override of `points` for the three-dimensional two-way search.
    pub twoway_points: usize,
    pub lower: f64,
    pub upper: f64,
    /// Points of the `t ∈ [0, 1]` grid; 1 pins `t = 0`.
    pub t_points: usize,
    /// Local refinement rounds around the coarse argmax.
    pub zoom_rounds: usize,
    pub zoom_points: usize,
    /// How often `upper` may grow ×4 before the optimum counts as unbounded.
    pub max_expansions: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: 200,
            twoway_points: 60,
            lower: 1e-3,
            upper: 40.0,
            t_points: 101,
            zoom_rounds: 4,
            zoom_points: 21,
            max_expansions: 8,
        }
    }
}

impl GridSpec {
    /// Grid for a peak power: `[10⁻³, 4·p_max]`.
    pub fn for_peak_power(p_max: f64) -> Self {
        Self {
            upper: 4.0 * p_max,
            ..Self::default()
        }
    }

    fn power_axis(&self, mode: OracleMode, upper: f64) -> Vec<f64> {
        let n = if mode == OracleMode::TwoWay {
            self.twoway_points
        } else {
            self.points
        }
        .max(2);
        let (lo, hi) = (self.lower.ln(), upper.ln());
        let mut axis = Vec::with_capacity(n + 1);
        axis.push(0.0);
        axis.extend((0..n).map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()));
        axis
    }

    fn t_axis(&self, mode: OracleMode) -> Vec<f64> {
        if !mode.has_time_split() || self.t_points <= 1 {
            return vec![0.0];
        }
        let n = self.t_points;
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }
}

/// Argmax of the grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSubproblem {
    /// `[first, second, su]` powers. Direct PU uses `first`; direct SU
    /// uses `su`.
    pub powers: [f64; 3],
    pub t: f64,
    pub value: f64,
    /// Best coarse-grid value at each point of the `t` grid.
    pub t_profile: Vec<(f64, f64)>,
    /// Largest value drop within two coarse grid steps of the argmax.
    pub grid_tolerance: f64,
    /// Upper end of the power grid after expansion.
    pub upper: f64,
}

fn cap(snr: f64) -> f64 {
    (1.0 + snr).log2()
}

/// Own-traffic part `A`, relaying part `B` and power cost `L` of the
/// objective `t·A + (1 − t)·B − L` at powers `[first, second, su]`.
fn terms(mode: OracleMode, inp: &ModeInputs, p: [f64; 3]) -> (f64, f64, f64) {
    let [p1, p2, ps] = p;
    match mode {
        OracleMode::DirectPu => (0.0, inp.beta_second * cap(p1 * inp.gain_direct), inp.lambda_first * p1),
        OracleMode::DirectSu => (0.0, inp.su_weight * cap(ps * inp.gain_su_bs), inp.lambda_su * ps),
        OracleMode::OneWay => {
            let own = inp.su_weight * cap(ps * inp.gain_su_bs);
            // Decode-and-forward needs the relay to hear the source better
            // than the destination does.
            let relay = if inp.gain_first_relay > inp.gain_direct {
                let hop1 = cap(p1 * inp.gain_first_relay);
                let hop2 = cap(p1 * inp.gain_direct + ps * inp.gain_second_relay);
                inp.beta_second * 0.5 * hop1.min(hop2)
            } else {
                0.0
            };
            (own, relay, inp.lambda_first * p1 + inp.lambda_su * ps)
        }
        OracleMode::TwoWay => {
            let own = inp.su_weight * cap(ps * inp.gain_su_bs);
            let (g1, g2) = (inp.gain_first_relay, inp.gain_second_relay);
            let relay = region_lp(
                [inp.beta_first, inp.beta_second],
                0.5 * cap(p2 * g2),
                0.5 * cap(p1 * g1),
                0.5 * cap(p1 * g1 + p2 * g2),
                [0.5 * cap(ps * g1), 0.5 * cap(ps * g2)],
            );
            let cost = inp.lambda_first * p1 + inp.lambda_second * p2 + inp.lambda_su * ps;
            (own, relay, cost)
        }
    }
}

/// `max w·R` over `R ≥ 0` in the multiple-access region
/// `{R1 ≤ m1, R2 ≤ m2, R1 + R2 ≤ sum}` intersected with the broadcast box.
/// Evaluated at every vertex of the intersection that passes a membership
/// test.
fn region_lp(w: [f64; 2], m1: f64, m2: f64, sum: f64, bc: [f64; 2]) -> f64 {
    let c1 = m1.min(bc[0]);
    let c2 = m2.min(bc[1]);
    let inside = |r1: f64, r2: f64| {
        let tol = 1e-12 * (1.0 + sum);
        r1 >= 0.0 && r2 >= 0.0 && r1 <= m1 + tol && r2 <= m2 + tol && r1 <= bc[0] + tol && r2 <= bc[1] + tol && r1 + r2 <= sum + tol
    };
    let vertices = [
        (0.0, 0.0),
        (c1.min(sum), 0.0),
        (0.0, c2.min(sum)),
        (c1, c2),
        (c1, sum - c1),
        (sum - c2, c2),
    ];
    vertices
        .iter()
        .filter(|(a, b)| inside(*a, *b))
        .map(|(a, b)| w[0] * a + w[1] * b)
        .fold(0.0, f64::max)
}

fn objective(mode: OracleMode, inp: &ModeInputs, p: [f64; 3], t: f64) -> f64 {
    let (a, b, l) = terms(mode, inp, p);
    t * a + (1.0 - t) * b - l
}

/// Maps grid coordinates of the active dimensions to `[first, second, su]`.
fn place(mode: OracleMode, x: &[f64]) -> [f64; 3] {
    match mode {
        OracleMode::DirectPu => [x[0], 0.0, 0.0],
        OracleMode::DirectSu => [0.0, 0.0, x[0]],
        OracleMode::OneWay => [x[0], 0.0, x[1]],
        OracleMode::TwoWay => [x[0], x[1], x[2]],
    }
}

/// Odometer over `dims` axes of length `len`, first axis slowest.
fn unflatten(mut k: usize, dims: usize, len: usize, out: &mut [usize; 3]) {
    for d in (0..dims).rev() {
        out[d] = k % len;
        k /= len;
    }
}

struct Coarse {
    idx: [usize; 3],
    t_idx: usize,
    value: f64,
    profile: Vec<f64>,
}

/// Full coarse search. For every power point the `A`, `B`, `L` terms are
/// computed once and reused across the `t` grid.
fn coarse(mode: OracleMode, inp: &ModeInputs, axis: &[f64], ts: &[f64]) -> Coarse {
    let dims = mode.dims();
    let len = axis.len();
    let total = len.pow(dims as u32);
    let block = len.pow(dims as u32 - 1);
    // One block per first-axis index; reduced in index order, so ties go to
    // the lowest lexicographic (t, power) index.
    let blocks: Vec<(Vec<f64>, Vec<usize>)> = (0..len)
        .into_par_iter()
        .map(|b| {
            let mut best = vec![f64::NEG_INFINITY; ts.len()];
            let mut arg = vec![usize::MAX; ts.len()];
            let mut ix = [0usize; 3];
            let mut x = [0.0; 3];
            for k in b * block..((b + 1) * block).min(total) {
                unflatten(k, dims, len, &mut ix);
                for d in 0..dims {
                    x[d] = axis[ix[d]];
                }
                let (a, bb, l) = terms(mode, inp, place(mode, &x[..dims]));
                for (j, &t) in ts.iter().enumerate() {
                    let v = t * a + (1.0 - t) * bb - l;
                    if v > best[j] {
                        best[j] = v;
                        arg[j] = k;
                    }
                }
            }
            (best, arg)
        })
        .collect();
    let mut profile = vec![f64::NEG_INFINITY; ts.len()];
    let mut arg = vec![usize::MAX; ts.len()];
    for (best, a) in &blocks {
        for j in 0..ts.len() {
            if best[j] > profile[j] {
                profile[j] = best[j];
                arg[j] = a[j];
            }
        }
    }
    let mut t_idx = 0;
    for j in 1..ts.len() {
        if profile[j] > profile[t_idx] {
            t_idx = j;
        }
    }
    let mut idx = [0usize; 3];
    unflatten(arg[t_idx], dims, len, &mut idx);
    Coarse {
        idx,
        t_idx,
        value: profile[t_idx],
        profile,
    }
}

/// Linear grids between the neighbours of the argmax, repeated.
fn zoom(mode: OracleMode, inp: &ModeInputs, spec: &GridSpec, axis: &[f64], idx: [usize; 3], t: f64) -> ([f64; 3], f64) {
    let dims = mode.dims();
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    let mut x = [0.0; 3];
    for d in 0..dims {
        x[d] = axis[idx[d]];
        lo[d] = axis[idx[d].saturating_sub(1)];
        hi[d] = axis[(idx[d] + 1).min(axis.len() - 1)];
    }
    let mut best = objective(mode, inp, place(mode, &x[..dims]), t);
    let m = spec.zoom_points.max(3);
    for _ in 0..spec.zoom_rounds {
        let total = m.pow(dims as u32);
        let mut ix = [0usize; 3];
        let mut cand = [0.0; 3];
        for k in 0..total {
            unflatten(k, dims, m, &mut ix);
            for d in 0..dims {
                cand[d] = lo[d] + (hi[d] - lo[d]) * ix[d] as f64 / (m - 1) as f64;
            }
            let v = objective(mode, inp, place(mode, &cand[..dims]), t);
            if v > best {
                best = v;
                x = cand;
            }
        }
        for d in 0..dims {
            let step = (hi[d] - lo[d]) / (m - 1) as f64;
            lo[d] = (x[d] - step).max(0.0);
            hi[d] = x[d] + step;
        }
    }
    (place(mode, &x[..dims]), best)
}

/// Largest drop of the objective when any single coordinate moves up to
/// two coarse steps from the argmax.
fn two_step_tolerance(mode: OracleMode, inp: &ModeInputs, axis: &[f64], idx: [usize; 3], t: f64) -> f64 {
    let dims = mode.dims();
    let mut x = [0.0; 3];
    for d in 0..dims {
        x[d] = axis[idx[d]];
    }
    let centre = objective(mode, inp, place(mode, &x[..dims]), t);
    let mut worst: f64 = 0.0;
    for d in 0..dims {
        for off in [-2isize, -1, 1, 2] {
            let j = idx[d] as isize + off;
            if j < 0 || j as usize >= axis.len() {
                continue;
            }
            let mut y = x;
            y[d] = axis[j as usize];
            worst = worst.max(centre - objective(mode, inp, place(mode, &y[..dims]), t));
        }
    }
    worst
}

/// Grid-searches `mode`'s per-subcarrier objective at the multipliers in
/// `inputs`. The power grid grows ×4 while the argmax sits on its upper
/// end; running out of expansions means the objective has no finite
/// maximizer on any grid tried.
pub fn oracle_subproblem(inputs: &ModeInputs, mode: OracleMode, spec: &GridSpec) -> Result<OracleSubproblem, OracleError> {
    if !(spec.lower > 0.0 && spec.upper > spec.lower) {
        return Err(OracleError::BadGrid("need 0 < lower < upper"));
    }
    let inp = inputs.normalized();
    let ts = spec.t_axis(mode);
    let mut upper = spec.upper;
    for _ in 0..=spec.max_expansions {
        let axis = spec.power_axis(mode, upper);
        let c = coarse(mode, &inp, &axis, &ts);
        if c.idx[..mode.dims()].iter().any(|&i| i == axis.len() - 1) {
            upper *= 4.0;
            continue;
        }
        let t = ts[c.t_idx];
        let grid_tolerance = two_step_tolerance(mode, &inp, &axis, c.idx, t);
        let (powers, value) = zoom(mode, &inp, spec, &axis, c.idx, t);
        debug_assert!(value >= c.value);
        return Ok(OracleSubproblem {
            powers,
            t,
            value,
            t_profile: ts.iter().copied().zip(c.profile).collect(),
            grid_tolerance,
            upper,
        });
    }
    Err(OracleError::Unbounded { upper })
}
