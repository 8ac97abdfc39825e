//! Safe intervals of a single cell with respect to a set of fixed
//! trajectories.

use crate::geometry::{collision_window_with_slack, MotionSegment, TimeInterval, COLLISION_SLACK};
use crate::grid::Cell;
use crate::trajectory::{segments_of, Trajectory};

/// Safe intervals shorter than this are dropped; blocked windows closer than
/// this are merged.
pub const SI_EPS: f64 = 1e-9;

/// Tolerance used when testing whether a time lies inside an interval.
pub const LOCATE_TOL: f64 = 1e-9;

/// Sorted, disjoint, maximal closed intervals of `[0, +inf)` during which a
/// stationary agent at the cell is collision-free.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeIntervalList {
    pub intervals: Vec<TimeInterval>,
}

impl SafeIntervalList {
    pub fn always_safe() -> Self {
        SafeIntervalList {
            intervals: vec![TimeInterval::unbounded_from(0.0)],
        }
    }

    /// Complement in `[0, +inf)` of the union of open blocked windows.
    pub fn from_blocked(mut blocked: Vec<TimeInterval>) -> Self {
        blocked.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut intervals = Vec::new();
        let mut free_from = 0.0_f64;
        let mut i = 0;
        while i < blocked.len() {
            let lo = blocked[i].lo;
            let mut hi = blocked[i].hi;
            i += 1;
            while i < blocked.len() && blocked[i].lo <= hi + SI_EPS {
                hi = hi.max(blocked[i].hi);
                i += 1;
            }
            if lo - free_from >= SI_EPS {
                intervals.push(TimeInterval::new(free_from, lo));
            }
            free_from = free_from.max(hi);
            if free_from == f64::INFINITY {
                break;
            }
        }
        if free_from < f64::INFINITY {
            intervals.push(TimeInterval::unbounded_from(free_from));
        }
        SafeIntervalList { intervals }
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&TimeInterval> {
        self.intervals.get(i)
    }

    /// Index of the interval containing `t` (endpoints included).
    pub fn locate(&self, t: f64) -> Option<usize> {
        let i = self.intervals.partition_point(|iv| iv.hi + LOCATE_TOL < t);
        self.intervals
            .get(i)
            .filter(|iv| iv.lo - LOCATE_TOL <= t)
            .map(|_| i)
    }

    /// `t` if it is safe, otherwise the start of the first interval after
    /// `t`; `None` if the cell never becomes safe again.
    pub fn next_safe_start(&self, t: f64) -> Option<f64> {
        if self.locate(t).is_some() {
            return Some(t);
        }
        self.first_start_after(t)
    }

    /// Start of the first interval beginning strictly after `t`.
    pub fn first_start_after(&self, t: f64) -> Option<f64> {
        self.intervals.iter().find(|iv| iv.lo > t).map(|iv| iv.lo)
    }

    /// Whether the cell is safe from some finite time on.
    pub fn ends_unbounded(&self) -> bool {
        self.intervals
            .last()
            .is_some_and(TimeInterval::is_unbounded)
    }
}

/// Open time windows during which a stationary agent at `cell` collides with
/// one of `segments`.
pub fn blocked_windows<'a>(
    cell: Cell,
    segments: impl IntoIterator<Item = &'a MotionSegment>,
    r: f64,
) -> Vec<TimeInterval> {
    blocked_windows_with_slack(cell, segments, r, COLLISION_SLACK)
}

pub(crate) fn blocked_windows_with_slack<'a>(
    cell: Cell,
    segments: impl IntoIterator<Item = &'a MotionSegment>,
    r: f64,
    slack: f64,
) -> Vec<TimeInterval> {
    let probe = MotionSegment::stationary(cell.center(), 0.0, f64::INFINITY);
    segments
        .into_iter()
        .filter_map(|s| collision_window_with_slack(&probe, s, r, slack))
        .collect()
}

/// Safe intervals of `cell` against every segment of every trajectory in
/// `fixed`.
pub fn safe_intervals_for(cell: Cell, fixed: &[Trajectory], r: f64) -> SafeIntervalList {
    let segs: Vec<MotionSegment> = fixed.iter().flat_map(segments_of).collect();
    SafeIntervalList::from_blocked(blocked_windows(cell, &segs, r))
}
