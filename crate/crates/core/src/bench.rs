//! Validation, metrics and benchmark sweeps.

use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::collision_window;
use crate::grid::{Cell, CellSet, GridMap};
use crate::instance::{generate_wfi_instance, Instance};
use crate::planners::{astar_cardinal, path_length};
use crate::repair::{naive_schedule, plan_all, RepairConfig, RepairMode, Solution};
use crate::sipp::sipp_plan_all;
use crate::trajectory::{segments_of, TimedWaypoint, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    CRepair,
    AaRepair,
    CSipp,
    Naive,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::CRepair,
        Algorithm::AaRepair,
        Algorithm::CSipp,
        Algorithm::Naive,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::CRepair => "c-repair",
            Algorithm::AaRepair => "aa-repair",
            Algorithm::CSipp => "c-sipp",
            Algorithm::Naive => "naive",
        }
    }

    /// Whether every move is a unit cardinal step, so that cardinal path
    /// lengths bound the cost from below.
    pub fn is_cardinal(self) -> bool {
        !matches!(self, Algorithm::AaRepair)
    }

    pub fn solve(self, instance: &Instance, cfg: &RepairConfig) -> Result<Solution> {
        match self {
            Algorithm::CRepair => plan_all(instance, RepairMode::Cardinal, cfg),
            Algorithm::AaRepair => plan_all(instance, RepairMode::AnyAngle, cfg),
            Algorithm::CSipp => sipp_plan_all(instance, cfg),
            Algorithm::Naive => naive_schedule(instance, cfg),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| {
                format!("unknown algorithm `{s}` (expected c-repair, aa-repair, c-sipp or naive)")
            })
    }
}

/// Sum and maximum of the agents' individual shortest cardinal path lengths
/// on the bare map, divided by speed.
pub fn lower_bounds(instance: &Instance, speed: f64) -> Result<(f64, f64)> {
    let none = CellSet::new(&instance.map);
    let mut sum = 0.0;
    let mut max = 0.0_f64;
    for a in &instance.agents {
        let p =
            astar_cardinal(&instance.map, a.start, a.goal, &none).ok_or(Error::PathNotFound {
                agent: a.id,
                start: a.start,
                goal: a.goal,
            })?;
        let t = path_length(&p) / speed;
        sum += t;
        max = max.max(t);
    }
    Ok((sum, max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conflict {
    pub agent_a: usize,
    pub agent_b: usize,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub conflicts: Vec<Conflict>,
    /// Trajectory-level defects: wrong endpoints, speeding, obstacle
    /// crossings, missing agents.
    pub structural: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.conflicts.is_empty() && self.structural.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "valid");
        }
        writeln!(
            f,
            "{} conflicts, {} structural errors",
            self.conflicts.len(),
            self.structural.len()
        )?;
        for c in &self.conflicts {
            writeln!(
                f,
                "  conflict: agents {} and {} during [{:.6}, {:.6}]",
                c.agent_a, c.agent_b, c.t_start, c.t_end
            )?;
        }
        for s in &self.structural {
            writeln!(f, "  {s}")?;
        }
        Ok(())
    }
}

/// Exhaustive check of a solution: every pair of agents, every pair of
/// time-overlapping segments (waits and parking included).
pub fn validate_solution(instance: &Instance, solution: &Solution, r: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    if solution.trajectories.len() != instance.agents.len() {
        report.structural.push(format!(
            "{} trajectories for {} agents",
            solution.trajectories.len(),
            instance.agents.len()
        ));
    }
    let none = CellSet::new(&instance.map);
    for (agent, tr) in instance.agents.iter().zip(&solution.trajectories) {
        check_structure(
            &instance.map,
            &none,
            agent.id,
            agent.start,
            agent.goal,
            tr,
            &mut report.structural,
        );
    }

    let segments: Vec<_> = solution.trajectories.iter().map(segments_of).collect();
    for i in 0..segments.len() {
        for j in i + 1..segments.len() {
            if let Some(c) = pair_conflict(&segments[i], &segments[j], r) {
                report.conflicts.push(Conflict {
                    agent_a: solution.trajectories[i].agent_id,
                    agent_b: solution.trajectories[j].agent_id,
                    t_start: c.0,
                    t_end: c.1,
                });
            }
        }
    }
    report
}

fn check_structure(
    map: &GridMap,
    none: &CellSet,
    id: usize,
    start: Cell,
    goal: Cell,
    tr: &Trajectory,
    out: &mut Vec<String>,
) {
    if tr.agent_id != id {
        out.push(format!(
            "trajectory for agent {} found where agent {id} expected",
            tr.agent_id
        ));
    }
    let Some(first) = tr.points.first() else {
        out.push(format!("agent {id}: empty trajectory"));
        return;
    };
    if first.cell != start {
        out.push(format!(
            "agent {id}: starts at {} instead of {start}",
            first.cell
        ));
    }
    if first.t_arrive != 0.0 {
        out.push(format!(
            "agent {id}: trajectory starts at t = {} instead of 0",
            first.t_arrive
        ));
    }
    if tr.goal() != goal {
        out.push(format!(
            "agent {id}: ends at {} instead of {goal}",
            tr.goal()
        ));
    }
    for p in &tr.points {
        if !matches!(
            p.t_depart.partial_cmp(&p.t_arrive),
            Some(Ordering::Greater | Ordering::Equal)
        ) {
            out.push(format!("agent {id}: departs {} before arriving", p.cell));
        }
        if !map.in_bounds(p.cell) {
            out.push(format!("agent {id}: waypoint {} out of bounds", p.cell));
            return;
        }
    }
    for w in tr.points.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        let dist = p.cell.euclidean(q.cell);
        if dist == 0.0 {
            out.push(format!("agent {id}: repeated waypoint {}", p.cell));
        }
        if q.t_arrive - p.t_depart < dist / tr.speed - 1e-9 {
            out.push(format!(
                "agent {id}: move {} -> {} exceeds the speed limit",
                p.cell, q.cell
            ));
        }
        if !map.line_of_sight(p.cell, q.cell, none) {
            out.push(format!(
                "agent {id}: move {} -> {} crosses an obstacle",
                p.cell, q.cell
            ));
        }
    }
}

/// First collision window between two time-sorted segment lists.
fn pair_conflict(
    a: &[crate::geometry::MotionSegment],
    b: &[crate::geometry::MotionSegment],
    r: f64,
) -> Option<(f64, f64)> {
    let (mut i, mut j) = (0, 0);
    let mut first: Option<(f64, f64)> = None;
    while i < a.len() && j < b.len() {
        if let Some(w) = collision_window(&a[i], &b[j], r) {
            if first.is_none_or(|(lo, _)| w.lo < lo) {
                first = Some((w.lo, w.hi));
            }
        }
        if a[i].t_end <= b[j].t_end {
            i += 1;
        } else {
            j += 1;
        }
    }
    first
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub map: String,
    pub algorithm: String,
    pub n_agents: usize,
    pub instance_id: usize,
    pub success: bool,
    pub runtime_ms: Option<f64>,
    pub flowtime: Option<f64>,
    pub makespan: Option<f64>,
    pub norm_flowtime: Option<f64>,
    pub norm_makespan: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub map_name: String,
    pub algorithms: Vec<Algorithm>,
    pub agent_counts: Vec<usize>,
    pub instances: usize,
    pub seed: u64,
    pub repair: RepairConfig,
    pub endpoint_pool: Option<Vec<Cell>>,
    /// Worker threads; 1 runs everything on the calling thread.
    pub jobs: usize,
}

/// Seed of instance `id` at agent count `n` in a sweep seeded with `seed`.
pub fn instance_seed(seed: u64, n: usize, id: usize) -> u64 {
    let mut z = seed
        ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (id as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one algorithm on one instance and turns the outcome into a row.
/// A solution that fails validation is an error, never a row.
pub fn measure(
    map_name: &str,
    instance: &Instance,
    instance_id: usize,
    algorithm: Algorithm,
    cfg: &RepairConfig,
) -> Result<(MetricsRow, Option<Solution>)> {
    let mut row = MetricsRow {
        map: map_name.to_string(),
        algorithm: algorithm.label().to_string(),
        n_agents: instance.len(),
        instance_id,
        success: false,
        runtime_ms: None,
        flowtime: None,
        makespan: None,
        norm_flowtime: None,
        norm_makespan: None,
    };
    let solution = match algorithm.solve(instance, cfg) {
        Ok(s) => s,
        Err(Error::PathNotFound { .. } | Error::NotWellFormed { .. }) => return Ok((row, None)),
        Err(e) => return Err(e),
    };
    let report = validate_solution(instance, &solution, cfg.radius_sum());
    if !report.is_valid() {
        return Err(Error::MalformedInstance(format!(
            "{algorithm} produced an invalid solution on instance {instance_id} ({} agents): {report}",
            instance.len()
        )));
    }
    let (lb_flow, lb_make) = lower_bounds(instance, cfg.speed)?;
    let (flow, make) = (solution.flowtime(), solution.makespan());
    row.success = true;
    row.runtime_ms = Some(solution.runtime_ms());
    row.flowtime = Some(flow);
    row.makespan = Some(make);
    row.norm_flowtime = Some(if lb_flow > 0.0 { flow / lb_flow } else { 1.0 });
    row.norm_makespan = Some(if lb_make > 0.0 { make / lb_make } else { 1.0 });
    Ok((row, Some(solution)))
}

/// Full sweep over agent counts, instance ids and algorithms. Rows are
/// ordered by (algorithm, n, instance id) regardless of `jobs`.
pub fn run_benchmark(map: &GridMap, cfg: &BenchConfig) -> Result<Vec<MetricsRow>> {
    let points: Vec<(usize, usize)> = cfg
        .agent_counts
        .iter()
        .flat_map(|&n| (0..cfg.instances).map(move |id| (n, id)))
        .collect();
    let run_point = |&(n, id): &(usize, usize)| -> Result<Vec<MetricsRow>> {
        let inst = generate_wfi_instance(
            map,
            n,
            instance_seed(cfg.seed, n, id),
            cfg.endpoint_pool.as_deref(),
        )?;
        cfg.algorithms
            .iter()
            .map(|&algo| measure(&cfg.map_name, &inst, id, algo, &cfg.repair).map(|(row, _)| row))
            .collect()
    };
    let per_point: Vec<Vec<MetricsRow>> = if cfg.jobs <= 1 {
        points.iter().map(run_point).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        pool.install(|| points.par_iter().map(run_point).collect::<Result<_>>())?
    };
    let mut rows: Vec<MetricsRow> = per_point.into_iter().flatten().collect();
    let rank = |label: &str| cfg.algorithms.iter().position(|a| a.label() == label);
    rows.sort_by_key(|r| (rank(&r.algorithm), r.n_agents, r.instance_id));
    Ok(rows)
}

pub const CSV_HEADER: [&str; 10] = [
    "map",
    "algorithm",
    "n_agents",
    "instance_id",
    "success",
    "runtime_ms",
    "flowtime",
    "makespan",
    "norm_flowtime",
    "norm_makespan",
];

pub fn write_metrics_csv(writer: impl Write, rows: &[MetricsRow]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    wtr.write_record(CSV_HEADER)?;
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_metrics_csv(reader: impl Read) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Mean of each metric over the successful rows of one (algorithm, n) point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub map: String,
    pub algorithm: String,
    pub n_agents: usize,
    pub instances: usize,
    pub successes: usize,
    pub mean_runtime_ms: f64,
    pub median_runtime_ms: f64,
    pub mean_flowtime: f64,
    pub mean_makespan: f64,
    pub mean_norm_flowtime: f64,
    pub mean_norm_makespan: f64,
}

pub fn summarize(rows: &[MetricsRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String, usize)> = rows
        .iter()
        .map(|r| (r.map.clone(), r.algorithm.clone(), r.n_agents))
        .collect();
    keys.dedup();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(map, algorithm, n)| {
            let group: Vec<&MetricsRow> = rows
                .iter()
                .filter(|r| r.map == map && r.algorithm == algorithm && r.n_agents == n)
                .collect();
            let ok: Vec<&&MetricsRow> = group.iter().filter(|r| r.success).collect();
            let mean = |f: &dyn Fn(&MetricsRow) -> Option<f64>| {
                let v: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
                if v.is_empty() {
                    f64::NAN
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            };
            let mut runtimes: Vec<f64> = ok.iter().filter_map(|r| r.runtime_ms).collect();
            SummaryRow {
                instances: group.len(),
                successes: ok.len(),
                mean_runtime_ms: mean(&|r| r.runtime_ms),
                median_runtime_ms: median(&mut runtimes),
                mean_flowtime: mean(&|r| r.flowtime),
                mean_makespan: mean(&|r| r.makespan),
                mean_norm_flowtime: mean(&|r| r.norm_flowtime),
                mean_norm_makespan: mean(&|r| r.norm_makespan),
                map,
                algorithm,
                n_agents: n,
            }
        })
        .collect()
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn write_summary_csv(writer: impl Write, rows: &[SummaryRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointRecord {
    pub x: i32,
    pub y: i32,
    pub t_arrive: f64,
    pub t_depart: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub id: usize,
    pub waypoints: Vec<WaypointRecord>,
}

/// On-disk form of a [`Solution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub algorithm: String,
    pub speed: f64,
    pub runtime_ms: f64,
    pub agents: Vec<AgentRecord>,
}

impl SolutionFile {
    pub fn from_solution(sol: &Solution, speed: f64) -> Self {
        SolutionFile {
            algorithm: sol.algorithm.clone(),
            speed,
            runtime_ms: sol.runtime_ms(),
            agents: sol
                .trajectories
                .iter()
                .map(|tr| AgentRecord {
                    id: tr.agent_id,
                    waypoints: tr
                        .points
                        .iter()
                        .map(|p| WaypointRecord {
                            x: p.cell.col,
                            y: p.cell.row,
                            t_arrive: p.t_arrive,
                            t_depart: p.t_depart,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn into_solution(self) -> Solution {
        let speed = self.speed;
        Solution {
            algorithm: self.algorithm,
            runtime: Duration::from_secs_f64(self.runtime_ms.max(0.0) / 1e3),
            trajectories: self
                .agents
                .into_iter()
                .map(|a| Trajectory {
                    agent_id: a.id,
                    speed,
                    points: a
                        .waypoints
                        .into_iter()
                        .map(|w| TimedWaypoint {
                            cell: Cell::new(w.x, w.y),
                            t_arrive: w.t_arrive,
                            t_depart: w.t_depart,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Writes solution JSON. Floats use the shortest representation that
/// round-trips exactly.
pub fn write_solution(writer: impl Write, sol: &Solution, speed: f64) -> Result<()> {
    serde_json::to_writer_pretty(writer, &SolutionFile::from_solution(sol, speed))?;
    Ok(())
}

pub fn read_solution(reader: impl Read) -> Result<Solution> {
    let file: SolutionFile = serde_json::from_reader(reader)?;
    Ok(file.into_solution())
}
