//! The proposed scheme and the two comparison schemes. All three share the
//! dual solve + recovery pipeline and differ only in the candidate set.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::NodeLayout;
use crate::dual::{all_modes, solve_dual, CandidateSet, DualOptions, DualResult};
use crate::model::{Allocation, Dims, Direction, Mode, NetworkInstance, SolverReport};
use crate::recovery::{recover_primal, RecoveryOptions};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub dual: DualOptions,
    pub recovery: RecoveryOptions,
}

/// Everything one scheme run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub allocation: Allocation,
    pub report: SolverReport,
    pub dual: DualResult,
}

/// Dual solve over `set` followed by primal recovery.
pub fn solve_with_candidates(inst: &NetworkInstance, set: &CandidateSet, opts: &SolveOptions) -> SchemeOutcome {
    let start = Instant::now();
    let dual = solve_dual(inst, set, &opts.dual);
    let (allocation, mut report) = recover_primal(inst, &dual, &opts.recovery);
    report.wall_time = start.elapsed().as_secs_f64();
    SchemeOutcome {
        allocation,
        report,
        dual,
    }
}

/// Joint mode selection, relay assignment and power allocation.
pub fn solve_proposed(inst: &NetworkInstance, opts: &SolveOptions) -> SchemeOutcome {
    solve_with_candidates(inst, &CandidateSet::Full, opts)
}

/// No cooperation: PUs and SUs only transmit directly.
pub fn solve_noncoop(inst: &NetworkInstance, opts: &SolveOptions) -> SchemeOutcome {
    solve_with_candidates(inst, &CandidateSet::direct_only(inst.dims), opts)
}

/// Fixed mode of one PU direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FtmMode {
    Direct,
    OneWay { su: usize },
    TwoWay { su: usize },
}

/// `modes[pair][direction]`, directions in [`Direction::BOTH`] order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FtmAssignment {
    pub modes: Vec<[FtmMode; 2]>,
}

impl FtmAssignment {
    /// Idle, every direct SU transmission, and each direction's fixed mode,
    /// in enumeration order.
    pub fn candidate_set(&self, dims: Dims) -> CandidateSet {
        let allowed = |m: &Mode| match *m {
            Mode::Idle | Mode::DirectSu { .. } => true,
            Mode::DirectPu { pair, dir } => self.modes[pair][dir_index(dir)] == FtmMode::Direct,
            Mode::OneWay { pair, dir, su } => self.modes[pair][dir_index(dir)] == FtmMode::OneWay { su },
            Mode::TwoWay { pair, su } => self.modes[pair][0] == FtmMode::TwoWay { su },
        };
        CandidateSet::Modes(all_modes(dims).into_iter().filter(allowed).collect())
    }
}

fn dir_index(dir: Direction) -> usize {
    match dir {
        Direction::Forward => 0,
        Direction::Backward => 1,
    }
}

/// Geometry rule of the fixed-mode baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FtmRule {
    /// Two path losses within this many dB count as "about the same".
    pub delta_db: f64,
    pub path_loss_exponent: f64,
    pub min_distance_km: f64,
}

impl Default for FtmRule {
    fn default() -> Self {
        Self {
            delta_db: 3.0,
            path_loss_exponent: 4.0,
            min_distance_km: 0.01,
        }
    }
}

/// Fixes each PU direction's mode from node positions only.
///
/// A source talks directly when its partner is closer than every SU.
/// Otherwise its nearest SU relays: two-way when the source→SU and
/// SU→destination path losses are within `delta_db`, one-way for the
/// source's own direction otherwise. A two-way direction pulls its pair's
/// other direction into two-way with the same SU.
pub fn assign_ftm_modes(layout: &NodeLayout, dims: Dims, rule: &FtmRule) -> FtmAssignment {
    let dist = |d: f64| d.max(rule.min_distance_km);
    let loss_db = |d: f64| 10.0 * rule.path_loss_exponent * dist(d).log10();
    let modes = (0..dims.pu_pairs)
        .map(|pair| {
            let mut m = [FtmMode::Direct; 2];
            for dir in Direction::BOTH {
                let src = dims.pu_node(pair, dir.source());
                let dst = dims.pu_node(pair, dir.destination());
                let direct = dist(layout.pu_pu(pair));
                let nearest = (0..dims.sus)
                    .map(|s| (s, dist(layout.pu_su(src, s))))
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                let Some((su, d_relay)) = nearest else { continue };
                if direct < d_relay {
                    continue;
                }
                let diff = (loss_db(layout.pu_su(src, su)) - loss_db(layout.pu_su(dst, su))).abs();
                m[dir_index(dir)] = if diff <= rule.delta_db {
                    FtmMode::TwoWay { su }
                } else {
                    FtmMode::OneWay { su }
                };
            }
            if let Some(tw) = m.iter().copied().find(|x| matches!(x, FtmMode::TwoWay { .. })) {
                m = [tw; 2];
            }
            m
        })
        .collect();
    FtmAssignment { modes }
}

/// Fixed transmission mode baseline.
pub fn solve_ftm(inst: &NetworkInstance, assignment: &FtmAssignment, opts: &SolveOptions) -> SchemeOutcome {
    solve_with_candidates(inst, &assignment.candidate_set(inst.dims), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(pu: Vec<(f64, f64)>, su: Vec<(f64, f64)>) -> NodeLayout {
        NodeLayout {
            pu,
            su,
            bs: (0.5, 0.5),
        }
    }

    #[test]
    fn close_partner_means_direct() {
        let l = layout(vec![(0.0, 0.0), (0.05, 0.0)], vec![(0.4, 0.0)]);
        let a = assign_ftm_modes(&l, Dims::new(1, 1), &FtmRule::default());
        assert_eq!(a.modes[0], [FtmMode::Direct; 2]);
    }

    #[test]
    fn midpoint_su_means_two_way_both_ways() {
        let l = layout(vec![(0.0, 0.0), (0.8, 0.0)], vec![(0.41, 0.05), (0.9, 0.9)]);
        let a = assign_ftm_modes(&l, Dims::new(1, 2), &FtmRule::default());
        assert_eq!(a.modes[0], [FtmMode::TwoWay { su: 0 }; 2]);
    }

    #[test]
    fn lopsided_relay_means_one_way() {
        // SU next to node 0: node 0 → SU is short, SU → node 1 long.
        let l = layout(vec![(0.0, 0.0), (0.8, 0.0)], vec![(0.1, 0.0)]);
        let a = assign_ftm_modes(&l, Dims::new(1, 1), &FtmRule::default());
        assert_eq!(a.modes[0][0], FtmMode::OneWay { su: 0 });
        // From node 1 the partner (0.8) is further than the SU (0.7).
        assert_eq!(a.modes[0][1], FtmMode::OneWay { su: 0 });
    }

    #[test]
    fn all_direct_assignment_matches_noncoop_set() {
        let dims = Dims::new(2, 3);
        let a = FtmAssignment {
            modes: vec![[FtmMode::Direct; 2]; 2],
        };
        let CandidateSet::Modes(mut m) = a.candidate_set(dims) else { panic!() };
        m.retain(|x| *x != Mode::Idle);
        assert_eq!(CandidateSet::Modes(m), CandidateSet::direct_only(dims));
    }

    #[test]
    fn ftm_candidate_count() {
        let dims = Dims::new(2, 4);
        let a = FtmAssignment {
            modes: vec![[FtmMode::TwoWay { su: 1 }; 2], [FtmMode::OneWay { su: 0 }, FtmMode::Direct]],
        };
        let CandidateSet::Modes(m) = a.candidate_set(dims) else { panic!() };
        assert_eq!(m.len(), 1 + 4 + 1 + 2);
    }
}
