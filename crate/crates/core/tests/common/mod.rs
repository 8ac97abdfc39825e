//! Reference implementations shared by the integration tests. Nothing here
//! reuses the planners; positions are interpolated straight from waypoints.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use mapf_repair::geometry::collision_window;
use mapf_repair::{
    Agent, Cell, CellSet, GeomPath, GridMap, Instance, MotionSegment, Point2, Trajectory,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const R: f64 = 1.0;
pub const SLACK: f64 = 1e-9;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cells(v: &[(i32, i32)]) -> GeomPath {
    GeomPath::new(v.iter().map(|&(c, r)| Cell::new(c, r)).collect())
}

pub fn crossing_instance() -> Instance {
    Instance::new(
        GridMap::empty(5, 5),
        vec![
            Agent {
                id: 0,
                start: Cell::new(0, 2),
                goal: Cell::new(4, 2),
            },
            Agent {
                id: 1,
                start: Cell::new(2, 0),
                goal: Cell::new(2, 4),
            },
        ],
    )
}

fn center(c: Cell) -> (f64, f64) {
    (c.col as f64, c.row as f64)
}

/// Position by direct interpolation between timed waypoints; parked at both
/// ends.
pub fn position(tr: &Trajectory, t: f64) -> (f64, f64) {
    let pts = &tr.points;
    if t <= pts[0].t_arrive {
        return center(pts[0].cell);
    }
    for (i, p) in pts.iter().enumerate() {
        if t <= p.t_depart {
            if t >= p.t_arrive {
                return center(p.cell);
            }
            let q = &pts[i - 1];
            let f = (t - q.t_depart) / (p.t_arrive - q.t_depart);
            let (a, b) = (center(q.cell), center(p.cell));
            return (a.0 + (b.0 - a.0) * f, a.1 + (b.1 - a.1) * f);
        }
        if let Some(n) = pts.get(i + 1) {
            if t < n.t_arrive {
                let f = (t - p.t_depart) / (n.t_arrive - p.t_depart);
                let (a, b) = (center(p.cell), center(n.cell));
                return (a.0 + (b.0 - a.0) * f, a.1 + (b.1 - a.1) * f);
            }
        }
    }
    center(tr.goal())
}

pub fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Whether two trajectories come strictly closer than `r` at any sample on a
/// `dt` grid over `[0, t_end]`.
pub fn sampled_conflict(a: &Trajectory, b: &Trajectory, r: f64, dt: f64, t_end: f64) -> bool {
    let n = (t_end / dt).ceil() as usize;
    (0..=n).any(|k| {
        let t = (k as f64 * dt).min(t_end);
        dist(position(a, t), position(b, t)).powi(2) < r * r - SLACK
    })
}

/// Random passable cell.
pub fn random_cell(map: &GridMap, rng: &mut impl Rng) -> Cell {
    loop {
        let c = Cell::new(
            rng.gen_range(0..map.width()),
            rng.gen_range(0..map.height()),
        );
        if map.is_passable(c) {
            return c;
        }
    }
}

/// Random map with roughly `density` of its cells blocked.
pub fn random_map(w: i32, h: i32, density: f64, rng: &mut impl Rng) -> GridMap {
    let mut map = GridMap::empty(w, h);
    for c in GridMap::empty(w, h).cells() {
        if rng.gen_bool(density) {
            map.set_blocked(c, true);
        }
    }
    map
}

/// Shortest cardinal path by breadth-first search.
pub fn bfs_path(map: &GridMap, a: Cell, b: Cell, extra: &CellSet) -> Option<Vec<Cell>> {
    let ok = |c: Cell| map.is_passable(c) && !extra.contains(c);
    if !ok(a) || !ok(b) {
        return None;
    }
    let idx = |c: Cell| (c.row * map.width() + c.col) as usize;
    let mut prev: Vec<Option<Cell>> = vec![None; map.num_cells()];
    let mut seen = vec![false; map.num_cells()];
    let mut queue = std::collections::VecDeque::from([a]);
    seen[idx(a)] = true;
    while let Some(c) = queue.pop_front() {
        if c == b {
            let mut path = vec![b];
            let mut cur = b;
            while let Some(p) = prev[idx(cur)] {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        for (dc, dr) in [(0, -1), (-1, 0), (0, 1), (1, 0)] {
            let n = Cell::new(c.col + dc, c.row + dr);
            if map.in_bounds(n) && ok(n) && !seen[idx(n)] {
                seen[idx(n)] = true;
                prev[idx(n)] = Some(c);
                queue.push_back(n);
            }
        }
    }
    None
}

/// Random cardinal trajectory with random waits, starting at t = 0.
pub fn random_trajectory(map: &GridMap, id: usize, rng: &mut impl Rng) -> Trajectory {
    let none = CellSet::new(map);
    loop {
        let (a, b) = (random_cell(map, rng), random_cell(map, rng));
        let Some(path) = bfs_path(map, a, b, &none) else {
            continue;
        };
        let path = GeomPath::new(path);
        let mut t = 0.0;
        let mut deps = Vec::new();
        for _ in 1..path.len() {
            if rng.gen_bool(0.4) {
                t += rng.gen_range(0.0..2.5);
            }
            deps.push(t);
            t += 1.0;
        }
        return Trajectory::from_departures(id, &path, 1.0, 0.0, &deps);
    }
}

/// Random motion segment in a 6x6 box; a fifth are stationary.
pub fn random_segment(rng: &mut impl Rng) -> MotionSegment {
    let origin = Point2::new(rng.gen_range(0.0..6.0), rng.gen_range(0.0..6.0));
    let velocity = if rng.gen_bool(0.2) {
        Point2::ZERO
    } else {
        Point2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
    };
    let t0 = rng.gen_range(0.0..5.0);
    let len = if rng.gen_bool(0.05) {
        0.0
    } else {
        rng.gen_range(0.0..4.0)
    };
    MotionSegment::new(origin, velocity, t0, t0 + len)
}

/// Sampled minimum distance over the common span: every `dt` plus the final
/// instant. `None` when the spans are disjoint.
pub fn sampled_min_separation(
    a: &MotionSegment,
    b: &MotionSegment,
    dt: f64,
) -> Option<(f64, Option<f64>)> {
    let lo = a.t_start.max(b.t_start);
    let hi = a.t_end.min(b.t_end);
    if lo > hi {
        return None;
    }
    let at = |s: &MotionSegment, t: f64| {
        let k = t - s.t_start;
        (s.origin.x + s.velocity.x * k, s.origin.y + s.velocity.y * k)
    };
    let mut best = f64::INFINITY;
    let mut first_hit = None;
    let n = ((hi - lo) / dt).floor() as usize;
    for k in 0..=n + 1 {
        let t = (lo + k as f64 * dt).min(hi);
        let d = dist(at(a, t), at(b, t));
        best = best.min(d);
        if first_hit.is_none() && d * d < R * R - SLACK {
            first_hit = Some(t);
        }
    }
    Some((best, first_hit))
}

#[derive(PartialEq)]
struct Label(f64, Cell);

impl Eq for Label {}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| (other.1.row, other.1.col).cmp(&(self.1.row, self.1.col)))
    }
}

/// Earliest arrival at `goal` (followed by safe parking forever) over the
/// time-expanded graph of wait-and-move plans. Departure times are scanned
/// on a `1e-3` grid and every bad-to-good transition is refined by bisection,
/// so arrivals can sit up to a few nanoseconds above the true optimum.
pub fn time_expanded_arrival(
    map: &GridMap,
    start: Cell,
    goal: Cell,
    extra: &CellSet,
    fixed: &[Trajectory],
    r: f64,
) -> Option<f64> {
    const H: f64 = 1e-3;
    let per_agent: Vec<Vec<MotionSegment>> = fixed.iter().map(|t| t.segments()).collect();
    let settle = fixed.iter().map(|t| t.arrival_time()).fold(0.0, f64::max);
    let horizon = settle + 4.0 * map.num_cells() as f64;

    let clear = |seg: &MotionSegment| {
        per_agent.iter().all(|segs| {
            let from = segs.partition_point(|s| s.t_end < seg.t_start);
            segs[from..]
                .iter()
                .take_while(|s| s.t_start <= seg.t_end)
                .all(|s| collision_window(seg, s, r).is_none())
        })
    };
    let clear_until = |c: Cell, t: f64| {
        let probe = MotionSegment::stationary(c.center(), t, f64::INFINITY);
        per_agent
            .iter()
            .flatten()
            .filter_map(|s| collision_window(&probe, s, r))
            .map(|w| w.lo)
            .fold(f64::INFINITY, f64::min)
    };
    let usable = |c: Cell| map.in_bounds(c) && map.is_passable(c) && !extra.contains(c);

    let mut settled: Vec<Vec<(f64, f64)>> = vec![Vec::new(); map.num_cells()];
    let mut heap = BinaryHeap::from([Label(0.0, start)]);
    while let Some(Label(t, c)) = heap.pop() {
        let idx = (c.row * map.width() + c.col) as usize;
        if settled[idx].iter().any(|&(t1, w1)| t1 <= t && t <= w1) {
            continue;
        }
        let until = clear_until(c, t);
        settled[idx].push((t, until));
        if c == goal && until.is_infinite() {
            return Some(t);
        }
        if t > horizon {
            continue;
        }
        for (dc, dr) in [(0, -1), (-1, 0), (0, 1), (1, 0)] {
            let nb = Cell::new(c.col + dc, c.row + dr);
            if !usable(nb) {
                continue;
            }
            let mv = |d: f64| MotionSegment::between(c.center(), nb.center(), d, d + 1.0);
            let stop = until.min(t.max(settle) + 1.0 + H);
            let mut prev: Option<f64> = None;
            let mut k = 0usize;
            loop {
                let d = (t + k as f64 * H).min(stop);
                let good = clear(&mv(d));
                if good {
                    if let Some(bad) = prev {
                        let (mut lo, mut hi) = (bad, d);
                        for _ in 0..60 {
                            let mid = 0.5 * (lo + hi);
                            if clear(&mv(mid)) {
                                hi = mid;
                            } else {
                                lo = mid;
                            }
                        }
                        // step off the exact contact boundary so chains of
                        // touching moves do not hinge on rounding
                        let nudged = (hi + 1e-9).min(d);
                        let dep = if clear(&mv(nudged)) { nudged } else { hi };
                        heap.push(Label(dep + 1.0, nb));
                    } else if k == 0 {
                        heap.push(Label(d + 1.0, nb));
                    }
                    prev = None;
                } else {
                    prev = Some(d);
                }
                if d >= stop {
                    break;
                }
                k += 1;
            }
        }
    }
    None
}
