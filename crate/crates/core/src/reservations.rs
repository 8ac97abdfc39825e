//! Spatially bucketed store of committed trajectories.
//!
//! Every motion segment is registered in each cell whose center lies within
//! `R + sqrt(2)/2` of the segment's swept line. A query segment then only
//! needs the buckets of cells whose centers lie within `sqrt(2)/2` of its own
//! line: every point of the query lies in such a cell, and any fixed point
//! closer than `R` to it is registered there.
//!
//! All checks use [`PLANNING_SLACK`], so whatever passes here also passes the
//! validator.

use crate::geometry::{
    collision_window_with_slack, point_segment_dist_sq, MotionSegment, Point2, PLANNING_SLACK,
};
use crate::grid::{Cell, GridMap};
use crate::safe_intervals::{blocked_windows_with_slack, SafeIntervalList};
use crate::trajectory::{segments_of, Trajectory};

const HALF_DIAGONAL: f64 = std::f64::consts::FRAC_1_SQRT_2 + 1e-9;

#[derive(Debug, Clone, Copy)]
struct Entry {
    traj: u32,
    seg: u32,
    segment: MotionSegment,
}

#[derive(Debug, Clone)]
pub struct Reservations {
    width: i32,
    height: i32,
    radius_sum: f64,
    trajectories: Vec<Trajectory>,
    buckets: Vec<Vec<Entry>>,
}

impl Reservations {
    /// `radius_sum` is the collision distance `R` (twice the agent radius).
    pub fn new(map: &GridMap, radius_sum: f64) -> Self {
        Reservations {
            width: map.width(),
            height: map.height(),
            radius_sum,
            trajectories: Vec::new(),
            buckets: vec![Vec::new(); map.num_cells()],
        }
    }

    pub fn with_trajectories(
        map: &GridMap,
        radius_sum: f64,
        fixed: impl IntoIterator<Item = Trajectory>,
    ) -> Self {
        let mut res = Self::new(map, radius_sum);
        for tr in fixed {
            res.add(tr);
        }
        res
    }

    pub fn radius_sum(&self) -> f64 {
        self.radius_sum
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn into_trajectories(self) -> Vec<Trajectory> {
        self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn add(&mut self, tr: Trajectory) {
        let traj = self.trajectories.len() as u32;
        let reach = self.radius_sum + HALF_DIAGONAL;
        for (seg_idx, segment) in segments_of(&tr).into_iter().enumerate() {
            let (a, b) = (segment.origin, segment.end_position());
            let near: Vec<Cell> = self.cells_near(a, b, reach).collect();
            for cell in near {
                let i = self.slot(cell);
                self.buckets[i].push(Entry {
                    traj,
                    seg: seg_idx as u32,
                    segment,
                });
            }
        }
        self.trajectories.push(tr);
    }

    fn slot(&self, c: Cell) -> usize {
        (c.row * self.width + c.col) as usize
    }

    /// In-bounds cells whose center is within `reach` of segment `[a, b]`.
    fn cells_near(&self, a: Point2, b: Point2, reach: f64) -> impl Iterator<Item = Cell> + '_ {
        let col_lo = ((a.x.min(b.x) - reach).floor() as i32).max(0);
        let col_hi = ((a.x.max(b.x) + reach).ceil() as i32).min(self.width - 1);
        let row_lo = ((a.y.min(b.y) - reach).floor() as i32).max(0);
        let row_hi = ((a.y.max(b.y) + reach).ceil() as i32).min(self.height - 1);
        let reach_sq = reach * reach;
        (row_lo..=row_hi)
            .flat_map(move |row| (col_lo..=col_hi).map(move |col| Cell::new(col, row)))
            .filter(move |c| point_segment_dist_sq(c.center(), a, b) <= reach_sq)
    }

    /// Fixed segments that could come within `R` of the straight line
    /// `[a, b]` and whose time span meets `[t_lo, t_hi]`. Deduplicated.
    pub fn candidates(
        &self,
        a: Point2,
        b: Point2,
        t_lo: f64,
        t_hi: f64,
    ) -> Vec<(usize, MotionSegment)> {
        let mut found: Vec<Entry> = Vec::new();
        for cell in self.cells_near(a, b, HALF_DIAGONAL) {
            found.extend(
                self.buckets[self.slot(cell)]
                    .iter()
                    .filter(|e| e.segment.t_start <= t_hi && e.segment.t_end >= t_lo),
            );
        }
        found.sort_unstable_by_key(|e| (e.traj, e.seg));
        found.dedup_by_key(|e| (e.traj, e.seg));
        found
            .into_iter()
            .map(|e| (self.trajectories[e.traj as usize].agent_id, e.segment))
            .collect()
    }

    /// Earliest strict collision of `seg` with a committed trajectory.
    pub fn first_conflict(&self, seg: &MotionSegment) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for (agent, other) in
            self.candidates(seg.origin, seg.end_position(), seg.t_start, seg.t_end)
        {
            if let Some(w) =
                collision_window_with_slack(seg, &other, self.radius_sum, PLANNING_SLACK)
            {
                if best.is_none_or(|(t, id)| w.lo < t || (w.lo == t && agent < id)) {
                    best = Some((w.lo, agent));
                }
            }
        }
        best
    }

    /// Whether `seg` is free of strict collisions. Stops at the first hit.
    pub fn is_free(&self, seg: &MotionSegment) -> bool {
        let (a, b) = (seg.origin, seg.end_position());
        for cell in self.cells_near(a, b, HALF_DIAGONAL) {
            for e in &self.buckets[self.slot(cell)] {
                if e.segment.t_start <= seg.t_end
                    && e.segment.t_end >= seg.t_start
                    && collision_window_with_slack(seg, &e.segment, self.radius_sum, PLANNING_SLACK)
                        .is_some()
                {
                    return false;
                }
            }
        }
        true
    }

    pub fn safe_intervals(&self, cell: Cell) -> SafeIntervalList {
        if cell.col < 0 || cell.row < 0 || cell.col >= self.width || cell.row >= self.height {
            return SafeIntervalList::always_safe();
        }
        let bucket = &self.buckets[self.slot(cell)];
        SafeIntervalList::from_blocked(blocked_windows_with_slack(
            cell,
            bucket.iter().map(|e| &e.segment),
            self.radius_sum,
            PLANNING_SLACK,
        ))
    }
}
