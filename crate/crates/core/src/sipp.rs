//! Prioritized safe-interval path planning over cardinal moves.
//!
//! Search states are `(cell, safe interval)` pairs labelled with the earliest
//! arrival time. For every move the set of departure times that lead into a
//! collision with one fixed segment is an open interval (the projection of a
//! convex set), computed exactly; the earliest departure is then found by
//! sweeping over the union of those intervals.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::error::{Error, Result};
use crate::geometry::{MotionSegment, Point2, PLANNING_SLACK};
use crate::grid::{Cell, CellSet, GridMap};
use crate::instance::Instance;
use crate::planners::GeomPath;
use crate::repair::{plan_prioritized, RepairConfig, Solution};
use crate::reservations::Reservations;
use crate::safe_intervals::SafeIntervalList;
use crate::trajectory::Trajectory;

const DEGENERATE: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SippState {
    pub cell: Cell,
    pub interval: usize,
    pub arrival: f64,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    state: SippState,
    parent: Option<usize>,
    /// Departure time from the parent's cell.
    depart: f64,
    waits: u32,
}

#[derive(Debug, Clone, Copy)]
struct Open {
    f: f64,
    g: f64,
    waits: u32,
    cell: Cell,
    node: usize,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // reversed for the max-heap: smallest (f, g, waits, cell) first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.g.total_cmp(&self.g))
            .then_with(|| other.waits.cmp(&self.waits))
            .then_with(|| (other.cell.row, other.cell.col).cmp(&(self.cell.row, self.cell.col)))
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Open interval of departure times `d` for which a body leaving `from` at
/// `d` with `velocity` for `duration` comes strictly closer than `r` to
/// `fixed`, with the planners' slack. The upper end may be `+inf` when
/// `fixed` is parked.
pub fn unsafe_departures(
    from: Point2,
    velocity: Point2,
    duration: f64,
    fixed: &MotionSegment,
    r: f64,
) -> Option<(f64, f64)> {
    let rho = r * r - PLANNING_SLACK;
    let vs = fixed.velocity;
    let (t0, t1) = (fixed.t_start, fixed.t_end);
    // offset(d, s) = p - vs*d + w*s, s = time since departure
    let p = from - fixed.origin + vs * t0;
    let w = velocity - vs;
    let f = |d: f64, s: f64| (p - vs * d + w * s).norm_sq();
    let in_box = |d: f64, s: f64| {
        let tol = 1e-12;
        s >= -tol && s <= duration + tol && d + s >= t0 - tol && d + s <= t1 + tol
    };

    let mut cands: Vec<f64> = Vec::new();
    // corners of the feasible parallelogram
    for s in [0.0, duration] {
        for b in [t0, t1] {
            if b.is_finite() && f(b - s, s) < rho {
                cands.push(b - s);
            }
        }
    }
    // |base - dir * d|^2 = rho along the four edges, restricted to the edge
    let mut edge = |base: Point2, dir: Point2, d_lo: f64, d_hi: f64| {
        for d in quadratic_roots(base, dir, rho) {
            if d >= d_lo - 1e-12 && d <= d_hi + 1e-12 {
                cands.push(d);
            }
        }
    };
    for s in [0.0, duration] {
        edge(p + w * s, vs, t0 - s, t1 - s);
    }
    for b in [t0, t1] {
        if b.is_finite() {
            edge(p + w * b, velocity, b - duration, b);
        }
    }
    // points where the boundary is tangent to the s direction
    let ww = w.norm_sq();
    if ww > DEGENERATE {
        let wn = w * (1.0 / ww.sqrt());
        let perp = |v: Point2| v - wn * v.dot(wn);
        for d in quadratic_roots(perp(p), perp(vs), rho) {
            let s = -w.dot(p - vs * d) / ww;
            if in_box(d, s) {
                cands.push(d);
            }
        }
    }

    let unbounded = !t1.is_finite() && {
        let s = if ww > DEGENERATE {
            (-w.dot(p) / ww).clamp(0.0, duration)
        } else {
            0.0
        };
        f(0.0, s) < rho
    };
    if cands.is_empty() {
        return unbounded.then_some((t0 - duration, f64::INFINITY));
    }
    let lo = cands.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = if unbounded {
        f64::INFINITY
    } else {
        cands.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    };
    (hi > lo).then_some((lo, hi))
}

/// Real roots `d` of `|base - dir * d|^2 = rho` with two distinct crossings.
fn quadratic_roots(base: Point2, dir: Point2, rho: f64) -> Vec<f64> {
    let a = dir.norm_sq();
    if a < DEGENERATE {
        return Vec::new();
    }
    let b = -2.0 * base.dot(dir);
    let c = base.norm_sq() - rho;
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + if b >= 0.0 { sq } else { -sq });
    vec![q / a, c / q]
}

/// Earliest departure in `[lo, hi]` for the move `from -> to` that avoids
/// every committed trajectory.
fn earliest_departure(
    fixed: &Reservations,
    from: Cell,
    to: Cell,
    duration: f64,
    lo: f64,
    hi: f64,
) -> Option<f64> {
    let (a, b) = (from.center(), to.center());
    let velocity = (b - a) * (1.0 / duration);
    let r = fixed.radius_sum();
    let mut bad: Vec<(f64, f64)> = fixed
        .candidates(a, b, lo, hi + duration)
        .iter()
        .filter_map(|(_, seg)| unsafe_departures(a, velocity, duration, seg, r))
        .collect();
    bad.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut d = lo;
    for &(blo, bhi) in &bad {
        if blo >= d {
            break;
        }
        if bhi > d {
            d = bhi;
        }
    }
    // guard against rounding at the interval boundaries
    let mut nudge = 1e-10;
    for _ in 0..12 {
        if d > hi + 1e-9 {
            return None;
        }
        if fixed.is_free(&MotionSegment::between(a, b, d, d + duration)) {
            return Some(d.min(hi).max(lo));
        }
        d += nudge;
        nudge *= 4.0;
    }
    None
}

/// Time-optimal cardinal trajectory among wait-and-move plans that avoid
/// `fixed`, or `None` if the goal cannot be reached and held forever.
pub fn sipp_plan_against(
    map: &GridMap,
    agent_id: usize,
    start: Cell,
    goal: Cell,
    extra_blocked: &CellSet,
    fixed: &Reservations,
    cfg: &RepairConfig,
) -> Option<Trajectory> {
    let usable = |c: Cell| map.is_passable(c) && !extra_blocked.contains(c);
    if !usable(start) || !usable(goal) {
        return None;
    }
    let step = 1.0 / cfg.speed;
    let heuristic = |c: Cell| c.manhattan(goal) as f64 / cfg.speed;

    let mut intervals: Vec<Option<SafeIntervalList>> = vec![None; map.num_cells()];
    let mut si = |c: Cell| -> SafeIntervalList {
        let i = map.index(c);
        intervals[i]
            .get_or_insert_with(|| fixed.safe_intervals(c))
            .clone()
    };

    let start_si = si(start);
    let first = start_si.locate(0.0)?;
    let mut nodes = vec![Node {
        state: SippState {
            cell: start,
            interval: first,
            arrival: 0.0,
        },
        parent: None,
        depart: 0.0,
        waits: 0,
    }];
    let mut best: HashMap<(Cell, usize), f64> = HashMap::new();
    let mut closed: HashMap<(Cell, usize), ()> = HashMap::new();
    best.insert((start, first), 0.0);
    let mut open = BinaryHeap::from([Open {
        f: heuristic(start),
        g: 0.0,
        waits: 0,
        cell: start,
        node: 0,
    }]);

    while let Some(entry) = open.pop() {
        let node = nodes[entry.node];
        let SippState {
            cell,
            interval,
            arrival,
        } = node.state;
        if closed.contains_key(&(cell, interval)) {
            continue;
        }
        closed.insert((cell, interval), ());
        let here = si(cell);
        if cell == goal && here.intervals[interval].is_unbounded() {
            return Some(reconstruct(&nodes, entry.node, agent_id, cfg.speed));
        }
        let stay_until = here.intervals[interval].hi;
        for nb in map.neighbors4_iter(cell) {
            if extra_blocked.contains(nb) {
                continue;
            }
            let there = si(nb);
            for (j, target) in there.intervals.iter().enumerate() {
                if target.lo > stay_until + step {
                    break;
                }
                let lo = arrival.max(target.lo - step);
                let hi = stay_until.min(target.hi - step);
                if lo > hi {
                    continue;
                }
                let Some(d) = earliest_departure(fixed, cell, nb, step, lo, hi) else {
                    continue;
                };
                let t = d + step;
                if closed.contains_key(&(nb, j)) || best.get(&(nb, j)).is_some_and(|&b| b <= t) {
                    continue;
                }
                best.insert((nb, j), t);
                let waits = node.waits + u32::from(d > arrival);
                nodes.push(Node {
                    state: SippState {
                        cell: nb,
                        interval: j,
                        arrival: t,
                    },
                    parent: Some(entry.node),
                    depart: d,
                    waits,
                });
                open.push(Open {
                    f: t + heuristic(nb),
                    g: t,
                    waits,
                    cell: nb,
                    node: nodes.len() - 1,
                });
            }
        }
    }
    None
}

fn reconstruct(nodes: &[Node], mut i: usize, agent_id: usize, speed: f64) -> Trajectory {
    let mut cells = vec![nodes[i].state.cell];
    let mut departures = Vec::new();
    while let Some(p) = nodes[i].parent {
        departures.push(nodes[i].depart);
        cells.push(nodes[p].state.cell);
        i = p;
    }
    cells.reverse();
    departures.reverse();
    Trajectory::from_departures(agent_id, &GeomPath::new(cells), speed, 0.0, &departures)
}

/// [`sipp_plan_against`] with the fixed trajectories given as a list.
pub fn sipp_plan(
    map: &GridMap,
    agent_id: usize,
    start: Cell,
    goal: Cell,
    extra_blocked: &CellSet,
    fixed: &[Trajectory],
    cfg: &RepairConfig,
) -> Option<Trajectory> {
    let res = Reservations::with_trajectories(map, cfg.radius_sum(), fixed.iter().cloned());
    sipp_plan_against(map, agent_id, start, goal, extra_blocked, &res, cfg)
}

/// Prioritized SIPP over the whole instance with the same endpoint blocking
/// as the repair planners.
pub fn sipp_plan_all(instance: &Instance, cfg: &RepairConfig) -> Result<Solution> {
    sipp_plan_prefix(instance, instance.len(), cfg)
}

/// The first `count` agents of a prioritized SIPP run. Endpoints of the
/// remaining agents stay blocked.
pub fn sipp_plan_prefix(instance: &Instance, count: usize, cfg: &RepairConfig) -> Result<Solution> {
    plan_prioritized(instance, count, cfg, "c-sipp", |i, extra, committed| {
        let agent = &instance.agents[i];
        sipp_plan_against(
            &instance.map,
            agent.id,
            agent.start,
            agent.goal,
            extra,
            committed,
            cfg,
        )
        .ok_or(Error::PathNotFound {
            agent: agent.id,
            start: agent.start,
            goal: agent.goal,
        })
    })
}
