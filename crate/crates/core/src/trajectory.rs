//! Timed trajectories over a fixed waypoint sequence.
//!
//! An agent waits only at waypoints, moves at constant speed between them and
//! parks at its last waypoint forever after arriving.

use serde::{Deserialize, Serialize};

use crate::geometry::{collision_window, MotionSegment, Point2};
use crate::grid::Cell;
use crate::planners::GeomPath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedWaypoint {
    pub cell: Cell,
    pub t_arrive: f64,
    pub t_depart: f64,
}

impl TimedWaypoint {
    pub fn wait(&self) -> f64 {
        self.t_depart - self.t_arrive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub agent_id: usize,
    pub points: Vec<TimedWaypoint>,
    pub speed: f64,
}

impl Trajectory {
    /// Builds a trajectory from per-waypoint departure times. Arrival times
    /// follow from the distance/speed recurrence; `departures` has one entry
    /// per waypoint except the last.
    pub fn from_departures(
        agent_id: usize,
        path: &GeomPath,
        speed: f64,
        t0: f64,
        departures: &[f64],
    ) -> Self {
        assert_eq!(departures.len() + 1, path.len(), "one departure per move");
        let mut points = Vec::with_capacity(path.len());
        let mut t_arrive = t0;
        for (k, &cell) in path.waypoints.iter().enumerate() {
            if let Some(&dep) = departures.get(k) {
                debug_assert!(dep >= t_arrive);
                points.push(TimedWaypoint {
                    cell,
                    t_arrive,
                    t_depart: dep,
                });
                t_arrive = dep + cell.euclidean(path.waypoints[k + 1]) / speed;
            } else {
                points.push(TimedWaypoint {
                    cell,
                    t_arrive,
                    t_depart: t_arrive,
                });
            }
        }
        Trajectory {
            agent_id,
            points,
            speed,
        }
    }

    pub fn start(&self) -> Cell {
        self.points[0].cell
    }

    pub fn goal(&self) -> Cell {
        self.points.last().expect("empty trajectory").cell
    }

    pub fn start_time(&self) -> f64 {
        self.points[0].t_arrive
    }

    /// Time at which the agent reaches its goal and parks.
    pub fn arrival_time(&self) -> f64 {
        self.points.last().expect("empty trajectory").t_arrive
    }

    /// Time spent moving or waiting after `start_time`.
    pub fn duration(&self) -> f64 {
        self.arrival_time() - self.start_time()
    }

    pub fn path(&self) -> GeomPath {
        GeomPath::new(self.cells())
    }

    pub fn cells(&self) -> Vec<Cell> {
        self.points.iter().map(|p| p.cell).collect()
    }

    pub fn waits(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(TimedWaypoint::wait)
    }

    pub fn total_wait(&self) -> f64 {
        self.waits().sum()
    }

    pub fn position_at(&self, t: f64) -> Point2 {
        position_at(self, t)
    }

    pub fn segments(&self) -> Vec<MotionSegment> {
        segments_of(self)
    }
}

/// Zero-wait timing of `path` departing at `t0`.
pub fn nominal_trajectory(agent_id: usize, path: &GeomPath, speed: f64, t0: f64) -> Trajectory {
    assert!(speed > 0.0, "speed must be positive");
    let mut departures = Vec::with_capacity(path.len().saturating_sub(1));
    let mut t = t0;
    for w in path.waypoints.windows(2) {
        departures.push(t);
        t += w[0].euclidean(w[1]) / speed;
    }
    Trajectory::from_departures(agent_id, path, speed, t0, &departures)
}

/// Position of the agent's center at time `t`. Before the first waypoint's
/// arrival the agent sits at its start; after the last arrival, at its goal.
pub fn position_at(tr: &Trajectory, t: f64) -> Point2 {
    let pts = &tr.points;
    // first waypoint whose departure is at or after t
    let k = pts.partition_point(|p| p.t_depart < t);
    if k == 0 {
        return pts[0].cell.center();
    }
    if k >= pts.len() {
        return tr.goal().center();
    }
    let cur = &pts[k];
    if t >= cur.t_arrive {
        return cur.cell.center();
    }
    let prev = &pts[k - 1];
    let span = cur.t_arrive - prev.t_depart;
    let frac = if span > 0.0 {
        (t - prev.t_depart) / span
    } else {
        1.0
    };
    let (a, b) = (prev.cell.center(), cur.cell.center());
    a + (b - a) * frac
}

/// Decomposition into motion segments: one per positive wait, one per move
/// and a terminal parking segment reaching to `+inf`.
pub fn segments_of(tr: &Trajectory) -> Vec<MotionSegment> {
    let mut out = Vec::with_capacity(tr.points.len() * 2);
    for w in tr.points.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        if p.t_depart > p.t_arrive {
            out.push(MotionSegment::stationary(
                p.cell.center(),
                p.t_arrive,
                p.t_depart,
            ));
        }
        out.push(MotionSegment::between(
            p.cell.center(),
            q.cell.center(),
            p.t_depart,
            q.t_arrive,
        ));
    }
    let last = tr.points.last().expect("empty trajectory");
    out.push(MotionSegment::stationary(
        last.cell.center(),
        last.t_arrive,
        f64::INFINITY,
    ));
    out
}

/// Earliest strict collision of `seg` with any of `fixed`, together with the
/// blocking agent's id. Checks every segment of every trajectory.
pub fn first_conflict(seg: &MotionSegment, fixed: &[Trajectory], r: f64) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for tr in fixed {
        for other in segments_of(tr) {
            if let Some(w) = collision_window(seg, &other, r) {
                if best.is_none_or(|(t, id)| w.lo < t || (w.lo == t && tr.agent_id < id)) {
                    best = Some((w.lo, tr.agent_id));
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(cells: &[(i32, i32)]) -> GeomPath {
        GeomPath::new(cells.iter().map(|&(c, r)| Cell::new(c, r)).collect())
    }

    fn straight(agent: usize, from: (i32, i32), to: (i32, i32)) -> Trajectory {
        let (dc, dr) = ((to.0 - from.0).signum(), (to.1 - from.1).signum());
        let mut cells = vec![from];
        let mut c = from;
        while c != to {
            c = (c.0 + dc, c.1 + dr);
            cells.push(c);
        }
        nominal_trajectory(agent, &path(&cells), 1.0, 0.0)
    }

    #[test]
    fn nominal_timing() {
        let tr = nominal_trajectory(0, &path(&[(0, 0), (4, 0)]), 1.0, 0.0);
        assert_eq!(tr.arrival_time(), 4.0);
        let tr = nominal_trajectory(0, &path(&[(0, 0), (4, 3)]), 1.0, 0.0);
        assert_eq!(tr.arrival_time(), 5.0);
        let tr = nominal_trajectory(0, &path(&[(2, 2)]), 1.0, 3.0);
        assert_eq!(tr.duration(), 0.0);
        assert_eq!(tr.points.len(), 1);
    }

    #[test]
    fn positions() {
        let tr = nominal_trajectory(0, &path(&[(0, 0), (4, 0)]), 1.0, 0.0);
        assert_eq!(position_at(&tr, 2.0), Point2::new(2.0, 0.0));
        assert_eq!(position_at(&tr, -5.0), Point2::new(0.0, 0.0));
        assert_eq!(position_at(&tr, 1000.0), Point2::new(4.0, 0.0));
    }

    #[test]
    fn positions_during_wait() {
        let tr =
            Trajectory::from_departures(0, &path(&[(0, 0), (1, 0), (2, 0)]), 1.0, 0.0, &[0.0, 3.0]);
        assert_eq!(position_at(&tr, 0.5), Point2::new(0.5, 0.0));
        assert_eq!(position_at(&tr, 2.0), Point2::new(1.0, 0.0));
        assert_eq!(position_at(&tr, 3.5), Point2::new(1.5, 0.0));
        assert_eq!(tr.arrival_time(), 4.0);
    }

    #[test]
    fn segment_decomposition() {
        let p = path(&[(0, 0), (4, 0)]);
        let segs = segments_of(&nominal_trajectory(0, &p, 1.0, 0.0));
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[1].t_end, f64::INFINITY);

        let waited = Trajectory::from_departures(0, &p, 1.0, 0.0, &[1.5]);
        let segs = segments_of(&waited);
        assert_eq!(segs.len(), 3);
        assert_eq!((segs[0].t_start, segs[0].t_end), (0.0, 1.5));
        assert_eq!(segs[0].velocity, Point2::ZERO);
        assert_eq!((segs[1].t_start, segs[1].t_end), (1.5, 5.5));
        assert_eq!(segs[1].velocity, Point2::new(1.0, 0.0));

        let segs = segments_of(&nominal_trajectory(0, &path(&[(1, 1)]), 1.0, 0.0));
        assert_eq!(segs.len(), 1);
        assert_eq!((segs[0].t_start, segs[0].t_end), (0.0, f64::INFINITY));
    }

    #[test]
    fn conflict_against_empty_set() {
        let seg = MotionSegment::between(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), 0.0, 1.0);
        assert_eq!(first_conflict(&seg, &[], 1.0), None);
    }

    #[test]
    fn crossing_conflict_time() {
        let a = straight(7, (0, 2), (4, 2));
        let seg = MotionSegment::between(Point2::new(2.0, 1.0), Point2::new(2.0, 2.0), 1.0, 2.0);
        let (t, id) = first_conflict(&seg, &[a], 1.0).unwrap();
        assert_eq!(id, 7);
        let expected = 2.0 - 1.0 / 2f64.sqrt();
        assert!((t - expected).abs() < 1e-6, "{t} vs {expected}");
    }

    #[test]
    fn clear_after_everyone_parked() {
        let a = straight(0, (0, 2), (4, 2));
        let seg = MotionSegment::between(Point2::new(2.0, 0.0), Point2::new(2.0, 1.0), 10.0, 11.0);
        assert_eq!(first_conflict(&seg, &[a], 1.0), None);
    }
}
