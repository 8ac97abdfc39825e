//! Wait-only repair of egocentric paths and the prioritized drivers built on
//! it.
//!
//! [`repair_path`] keeps an agent's waypoint sequence untouched and only
//! chooses how long to wait at each waypoint. Moves are processed left to
//! right. A conflicting move is delayed by growing the wait in front of it in
//! steps of `delta`. If that wait would overrun the safe interval the agent
//! arrived in, the arrival itself has to happen later, which is arranged by
//! re-timing the previous move, possibly cascading back to the start cell.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MotionSegment;
use crate::grid::{Cell, GridMap};
use crate::instance::Instance;
use crate::planners::{astar_cardinal, path_length, thetastar_anyangle, GeomPath};
use crate::reservations::Reservations;
use crate::safe_intervals::{SafeIntervalList, LOCATE_TOL};
use crate::trajectory::Trajectory;

/// Bound on backward re-timing rounds for a single path.
const MAX_PROPAGATIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairConfig {
    /// Wait quantum.
    pub delta: f64,
    /// Agent radius; two agents collide when closer than twice this.
    pub radius: f64,
    pub speed: f64,
    /// Latest admissible departure time. `None` uses the sum of all fixed
    /// agents' arrival times plus the own path duration plus 10.
    pub max_wait_horizon: Option<f64>,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            delta: 0.1,
            radius: 0.5,
            speed: 1.0,
            max_wait_horizon: None,
        }
    }
}

impl RepairConfig {
    pub fn radius_sum(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.delta > 0.0 && self.radius > 0.0 && self.speed > 0.0;
        let horizon_ok = self.max_wait_horizon.is_none_or(|h| h > 0.0);
        if ok && horizon_ok && self.delta.is_finite() && self.speed.is_finite() {
            Ok(())
        } else {
            Err(Error::MalformedInstance(format!(
                "invalid configuration {self:?}"
            )))
        }
    }
}

/// Egocentric planner used in front of the repair step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RepairMode {
    /// 4-connected A* paths.
    Cardinal,
    /// Theta* any-angle paths.
    AnyAngle,
}

impl RepairMode {
    pub fn label(self) -> &'static str {
        match self {
            RepairMode::Cardinal => "c-repair",
            RepairMode::AnyAngle => "aa-repair",
        }
    }

    pub fn plan(
        self,
        map: &GridMap,
        start: Cell,
        goal: Cell,
        extra_blocked: &crate::grid::CellSet,
    ) -> Option<GeomPath> {
        match self {
            RepairMode::Cardinal => astar_cardinal(map, start, goal, extra_blocked),
            RepairMode::AnyAngle => thetastar_anyangle(map, start, goal, extra_blocked),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub algorithm: String,
    pub trajectories: Vec<Trajectory>,
    /// Wall-clock planning time.
    pub runtime: Duration,
}

impl Solution {
    /// Sum of goal arrival times.
    pub fn flowtime(&self) -> f64 {
        self.trajectories.iter().map(Trajectory::arrival_time).sum()
    }

    /// Latest goal arrival time.
    pub fn makespan(&self) -> f64 {
        self.trajectories
            .iter()
            .map(Trajectory::arrival_time)
            .fold(0.0, f64::max)
    }

    pub fn runtime_ms(&self) -> f64 {
        self.runtime.as_secs_f64() * 1e3
    }
}

/// Adds waits to `path` until it is free of strict collisions with every
/// trajectory in `fixed`. The waypoint sequence is preserved exactly.
///
/// `fixed` trajectories must avoid the path's start and goal cells, and the
/// path must avoid theirs; otherwise the call may fail with
/// [`Error::NotWellFormed`].
pub fn repair_path(
    agent_id: usize,
    path: &GeomPath,
    fixed: &[Trajectory],
    cfg: &RepairConfig,
) -> Result<Trajectory> {
    let mut width = 1;
    let mut height = 1;
    let cells = path
        .waypoints
        .iter()
        .chain(fixed.iter().flat_map(|t| t.points.iter().map(|p| &p.cell)));
    for c in cells {
        width = width.max(c.col + 1);
        height = height.max(c.row + 1);
    }
    let bounds = GridMap::empty(width, height);
    let res = Reservations::with_trajectories(&bounds, cfg.radius_sum(), fixed.iter().cloned());
    repair_against(agent_id, path, &res, cfg)
}

/// [`repair_path`] against an already indexed set of fixed trajectories.
pub fn repair_against(
    agent_id: usize,
    path: &GeomPath,
    fixed: &Reservations,
    cfg: &RepairConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let own = path_length(path) / cfg.speed;
    let horizon = cfg.max_wait_horizon.unwrap_or_else(|| {
        fixed
            .trajectories()
            .iter()
            .map(Trajectory::arrival_time)
            .sum::<f64>()
            + own
            + 10.0
    });
    Repairer::new(agent_id, path, fixed, cfg, horizon).run()
}

struct Repairer<'a> {
    agent_id: usize,
    path: &'a GeomPath,
    fixed: &'a Reservations,
    delta: f64,
    speed: f64,
    horizon: f64,
    move_time: Vec<f64>,
    arrive: Vec<f64>,
    depart: Vec<f64>,
    safe: Vec<Option<SafeIntervalList>>,
}

impl<'a> Repairer<'a> {
    fn new(
        agent_id: usize,
        path: &'a GeomPath,
        fixed: &'a Reservations,
        cfg: &RepairConfig,
        horizon: f64,
    ) -> Self {
        let n = path.len();
        let move_time = path
            .waypoints
            .windows(2)
            .map(|w| w[0].euclidean(w[1]) / cfg.speed)
            .collect();
        Repairer {
            agent_id,
            path,
            fixed,
            delta: cfg.delta,
            speed: cfg.speed,
            horizon,
            move_time,
            arrive: vec![0.0; n],
            depart: vec![0.0; n.saturating_sub(1)],
            safe: vec![None; n],
        }
    }

    fn not_well_formed(&self, reason: impl Into<String>) -> Error {
        Error::NotWellFormed {
            agent: self.agent_id,
            reason: reason.into(),
        }
    }

    fn safe_intervals(&mut self, k: usize) -> &SafeIntervalList {
        let cell = self.path.waypoints[k];
        let fixed = self.fixed;
        self.safe[k].get_or_insert_with(|| fixed.safe_intervals(cell))
    }

    fn move_segment(&self, k: usize, depart: f64) -> MotionSegment {
        let w = &self.path.waypoints;
        MotionSegment::between(
            w[k].center(),
            w[k + 1].center(),
            depart,
            depart + self.move_time[k],
        )
    }

    /// First departure `base + j * delta` (j = 0, 1, ...) at which move `k`
    /// is collision-free, or `None` once candidates pass `limit`.
    fn delta_search(&self, k: usize, base: f64, limit: f64) -> Result<Option<f64>> {
        for j in 0u64.. {
            let t = base + j as f64 * self.delta;
            if t > limit + LOCATE_TOL {
                return Ok(None);
            }
            if t > self.horizon {
                return Err(self.not_well_formed(format!(
                    "no collision-free departure from {} before the horizon {:.3}",
                    self.path.waypoints[k], self.horizon
                )));
            }
            if self.fixed.is_free(&self.move_segment(k, t)) {
                return Ok(Some(t));
            }
        }
        unreachable!()
    }

    fn commit(&mut self, k: usize, depart: f64) {
        self.depart[k] = depart;
        self.arrive[k + 1] = depart + self.move_time[k];
    }

    fn run(mut self) -> Result<Trajectory> {
        let m = self.path.len() - 1;
        let mut k = 0;
        let mut rounds = 0;
        loop {
            while k < m {
                let arrived = self.arrive[k];
                let leave = self
                    .delta_search(k, arrived, f64::INFINITY)?
                    .expect("unbounded search returns a departure");
                if leave > arrived {
                    let si = self.safe_intervals(k).clone();
                    let at_arrival = si.locate(arrived);
                    let at_leave = si.locate(leave);
                    if at_arrival.is_none() || at_arrival != at_leave {
                        // the wait would cross a blocked window at c_k
                        let required = match at_leave {
                            Some(_) => Some(leave),
                            None => si.next_safe_start(leave),
                        };
                        let required = required.ok_or_else(|| {
                            self.not_well_formed(format!(
                                "{} never becomes safe again",
                                self.path.waypoints[k]
                            ))
                        })?;
                        if k == 0 {
                            return Err(
                                self.not_well_formed("start cell is crossed by a fixed agent")
                            );
                        }
                        rounds += 1;
                        if rounds > MAX_PROPAGATIONS {
                            return Err(self.not_well_formed("repair did not converge"));
                        }
                        k = self.arrive_later(k - 1, required)?;
                        continue;
                    }
                }
                self.commit(k, leave);
                k += 1;
            }

            // the goal must be reached inside its final, unbounded interval
            let arrived = self.arrive[m];
            let si = self.safe_intervals(m).clone();
            let last = si.len().checked_sub(1);
            let final_start = match si.intervals.last() {
                Some(iv) if iv.is_unbounded() => iv.lo,
                _ => {
                    return Err(self.not_well_formed(format!(
                        "goal {} is occupied forever by a fixed agent",
                        self.path.goal()
                    )))
                }
            };
            if si.locate(arrived) == last {
                break;
            }
            if m == 0 {
                return Err(self.not_well_formed("start cell is crossed by a fixed agent"));
            }
            rounds += 1;
            if rounds > MAX_PROPAGATIONS {
                return Err(self.not_well_formed("repair did not converge"));
            }
            k = self.arrive_later(m - 1, final_start)?;
        }
        Ok(Trajectory::from_departures(
            self.agent_id,
            self.path,
            self.speed,
            self.arrive[0],
            &self.depart,
        ))
    }

    /// Re-times move `j` so that the agent reaches waypoint `j + 1` no
    /// earlier than `required`, without leaving the safe interval it waits in
    /// at waypoint `j`. When no such departure exists the requirement moves to
    /// an earlier waypoint. Returns the index the forward pass resumes from.
    fn arrive_later(&mut self, mut j: usize, mut required: f64) -> Result<usize> {
        for _ in 0..MAX_PROPAGATIONS {
            let arrived = self.arrive[j];
            let earliest = arrived.max(required - self.move_time[j]);
            let si = self.safe_intervals(j).clone();
            let limit = match si.locate(arrived) {
                Some(i) => si.intervals[i].hi,
                None => arrived,
            };
            let next_start = if earliest > limit + LOCATE_TOL {
                si.next_safe_start(earliest)
            } else {
                si.first_start_after(limit)
            };
            if earliest <= limit + LOCATE_TOL {
                if let Some(d) = self.delta_search(j, earliest, limit)? {
                    self.commit(j, d);
                    return Ok(j + 1);
                }
            }
            // no departure fits the current interval: arrive at c_j later
            if j == 0 {
                return Err(self.not_well_formed("start cell is crossed by a fixed agent"));
            }
            required = next_start.ok_or_else(|| {
                self.not_well_formed(format!(
                    "{} never becomes safe again",
                    self.path.waypoints[j]
                ))
            })?;
            j -= 1;
        }
        Err(self.not_well_formed("repair did not converge"))
    }
}

pub(crate) fn plan_prioritized(
    instance: &Instance,
    count: usize,
    cfg: &RepairConfig,
    label: &str,
    mut plan_one: impl FnMut(usize, &crate::grid::CellSet, &Reservations) -> Result<Trajectory>,
) -> Result<Solution> {
    cfg.validate()?;
    let timer = Instant::now();
    let endpoints = instance.endpoints();
    let mut committed = Reservations::new(&instance.map, cfg.radius_sum());
    for (i, agent) in instance.agents.iter().take(count).enumerate() {
        let extra = instance.endpoints_except(&endpoints, agent);
        let tr = plan_one(i, &extra, &committed)?;
        committed.add(tr);
    }
    Ok(Solution {
        algorithm: label.to_string(),
        trajectories: committed.into_trajectories(),
        runtime: timer.elapsed(),
    })
}

/// Egocentric path of agent `i` with every other endpoint blocked.
pub fn egocentric_path(instance: &Instance, i: usize, mode: RepairMode) -> Result<GeomPath> {
    let endpoints = instance.endpoints();
    let agent = &instance.agents[i];
    let extra = instance.endpoints_except(&endpoints, agent);
    mode.plan(&instance.map, agent.start, agent.goal, &extra)
        .ok_or(Error::PathNotFound {
            agent: agent.id,
            start: agent.start,
            goal: agent.goal,
        })
}

/// Prioritized planning: each agent plans egocentrically around all other
/// endpoints, then its path is repaired against the agents before it.
pub fn plan_all(instance: &Instance, mode: RepairMode, cfg: &RepairConfig) -> Result<Solution> {
    plan_prefix(instance, instance.len(), mode, cfg)
}

/// Plans only the first `count` agents of `instance`. Endpoint blocking still
/// accounts for every agent of the full instance.
pub fn plan_prefix(
    instance: &Instance,
    count: usize,
    mode: RepairMode,
    cfg: &RepairConfig,
) -> Result<Solution> {
    plan_prioritized(instance, count, cfg, mode.label(), |i, extra, committed| {
        let agent = &instance.agents[i];
        let path = mode
            .plan(&instance.map, agent.start, agent.goal, extra)
            .ok_or(Error::PathNotFound {
                agent: agent.id,
                start: agent.start,
                goal: agent.goal,
            })?;
        repair_against(agent.id, &path, committed, cfg)
    })
}

/// Sequential release: agent `k` waits at its start until every agent
/// before it has finished its own egocentric path, then drives without
/// stopping.
pub fn naive_schedule(instance: &Instance, cfg: &RepairConfig) -> Result<Solution> {
    cfg.validate()?;
    let timer = Instant::now();
    let endpoints = instance.endpoints();
    let mut release = 0.0;
    let mut trajectories = Vec::with_capacity(instance.len());
    for agent in &instance.agents {
        let extra = instance.endpoints_except(&endpoints, agent);
        let path = astar_cardinal(&instance.map, agent.start, agent.goal, &extra).ok_or(
            Error::PathNotFound {
                agent: agent.id,
                start: agent.start,
                goal: agent.goal,
            },
        )?;
        let mut departures = Vec::with_capacity(path.len().saturating_sub(1));
        let mut t = release;
        for w in path.waypoints.windows(2) {
            departures.push(t);
            t += w[0].euclidean(w[1]) / cfg.speed;
        }
        trajectories.push(Trajectory::from_departures(
            agent.id,
            &path,
            cfg.speed,
            0.0,
            &departures,
        ));
        release += path_length(&path) / cfg.speed;
    }
    Ok(Solution {
        algorithm: "naive".to_string(),
        trajectories,
        runtime: timer.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Agent;
    use crate::trajectory::nominal_trajectory;

    fn cells(v: &[(i32, i32)]) -> GeomPath {
        GeomPath::new(v.iter().map(|&(c, r)| Cell::new(c, r)).collect())
    }

    fn crossing() -> (Trajectory, GeomPath) {
        let a = nominal_trajectory(
            0,
            &cells(&[(0, 2), (1, 2), (2, 2), (3, 2), (4, 2)]),
            1.0,
            0.0,
        );
        let b = cells(&[(2, 0), (2, 1), (2, 2), (2, 3), (2, 4)]);
        (a, b)
    }

    pub(crate) fn crossing_instance() -> Instance {
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

    #[test]
    fn no_fixed_agents_gives_nominal_timing() {
        let (_, b) = crossing();
        let tr = repair_path(1, &b, &[], &RepairConfig::default()).unwrap();
        assert_eq!(tr, nominal_trajectory(1, &b, 1.0, 0.0));
    }

    #[test]
    fn crossing_waits_one_and_a_half() {
        let (a, b) = crossing();
        let tr = repair_path(1, &b, &[a], &RepairConfig::default()).unwrap();
        assert_eq!(tr.cells(), b.waypoints);
        let waits: Vec<f64> = tr.waits().collect();
        assert!((waits[1] - 1.5).abs() < 1e-9, "{waits:?}");
        assert!(
            waits.iter().enumerate().all(|(i, w)| i == 1 || *w == 0.0),
            "{waits:?}"
        );
        assert!((tr.arrival_time() - 5.5).abs() < 1e-9);
    }

    #[test]
    fn crossing_a_parked_goal_is_rejected() {
        // A ends at (2,2), which lies on B's path
        let a = nominal_trajectory(0, &cells(&[(0, 2), (1, 2), (2, 2)]), 1.0, 0.0);
        let (_, b) = crossing();
        let err = repair_path(1, &b, &[a], &RepairConfig::default()).unwrap_err();
        assert!(
            matches!(err, Error::NotWellFormed { agent: 1, .. }),
            "{err}"
        );
    }

    fn column(agent: usize, col: i32, depart: f64) -> Trajectory {
        let path = GeomPath::new((0..7).map(|r| Cell::new(col, r)).collect());
        let deps: Vec<f64> = (0..6).map(|k| depart + k as f64).collect();
        Trajectory::from_departures(agent, &path, 1.0, 0.0, &deps)
    }

    #[test]
    fn blocked_wait_is_shifted_back_to_the_start() {
        // column 2 is crossed around t = 3 and column 1 around t = 2.5, so
        // waiting at (1,2) for the first crossing collides with the second
        let fixed = vec![column(0, 2, 1.0), column(1, 1, 0.5)];
        let b = cells(&[(0, 2), (1, 2), (2, 2), (3, 2)]);
        let tr = repair_path(2, &b, &fixed, &RepairConfig::default()).unwrap();
        assert_eq!(tr.cells(), b.waypoints);
        assert!(tr.points[0].wait() > 0.0, "{tr:?}");
        for seg in tr.segments() {
            assert!(
                crate::trajectory::first_conflict(&seg, &fixed, 1.0).is_none(),
                "{seg:?}"
            );
        }
        let si = crate::safe_intervals::safe_intervals_for(Cell::new(1, 2), &fixed, 1.0);
        let p = &tr.points[1];
        assert_eq!(si.locate(p.t_arrive), si.locate(p.t_depart));
    }

    #[test]
    fn plan_all_on_crossing() {
        let inst = crossing_instance();
        let sol = plan_all(&inst, RepairMode::Cardinal, &RepairConfig::default()).unwrap();
        assert!((sol.flowtime() - 9.5).abs() < 1e-9);
        assert!((sol.makespan() - 5.5).abs() < 1e-9);
    }

    #[test]
    fn single_agent_plan_is_shortest_path() {
        let inst = Instance::new(
            GridMap::empty(6, 6),
            vec![Agent {
                id: 3,
                start: Cell::new(0, 0),
                goal: Cell::new(5, 2),
            }],
        );
        let sol = plan_all(&inst, RepairMode::Cardinal, &RepairConfig::default()).unwrap();
        assert_eq!(sol.flowtime(), 7.0);
        let naive = naive_schedule(&inst, &RepairConfig::default()).unwrap();
        assert_eq!(naive.trajectories, sol.trajectories);
    }

    #[test]
    fn naive_on_crossing() {
        let sol = naive_schedule(&crossing_instance(), &RepairConfig::default()).unwrap();
        assert_eq!(sol.trajectories[1].points[0].wait(), 4.0);
        assert_eq!(sol.trajectories[1].arrival_time(), 8.0);
        assert_eq!(sol.flowtime(), 12.0);
        assert_eq!(sol.makespan(), 8.0);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = RepairConfig {
            delta: 0.0,
            ..RepairConfig::default()
        };
        let (_, b) = crossing();
        assert!(repair_path(0, &b, &[], &cfg).is_err());
    }
}
