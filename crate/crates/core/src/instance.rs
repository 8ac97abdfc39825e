//! Problem instances, well-formedness certification and random generation.
//!
//! An instance is well-formed when every agent can still reach its goal with
//! all other agents' starts and goals treated as obstacles. On such instances
//! an agent parked at any endpoint never cuts anyone else off.

use std::collections::{HashSet, VecDeque};
use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{parse_map, Cell, CellSet, GridMap};

pub const MAX_GENERATION_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Agent {
    pub id: usize,
    pub start: Cell,
    pub goal: Cell,
}

/// A map plus agents. Agent order is priority order (index 0 first).
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub map: GridMap,
    pub agents: Vec<Agent>,
}

impl Instance {
    pub fn new(map: GridMap, agents: Vec<Agent>) -> Self {
        Instance { map, agents }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Instance restricted to the first `n` agents.
    pub fn prefix(&self, n: usize) -> Instance {
        Instance {
            map: self.map.clone(),
            agents: self.agents[..n.min(self.agents.len())].to_vec(),
        }
    }

    /// Starts and goals of every agent.
    pub fn endpoints(&self) -> CellSet {
        CellSet::from_cells(
            &self.map,
            self.agents.iter().flat_map(|a| [a.start, a.goal]),
        )
    }

    /// Endpoints of every agent except `agent`.
    pub fn endpoints_except(&self, all: &CellSet, agent: &Agent) -> CellSet {
        let mut set = all.clone();
        set.remove(agent.start);
        set.remove(agent.goal);
        set
    }

    /// Endpoints in bounds, passable and pairwise distinct.
    pub fn check_endpoints(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for a in &self.agents {
            for (what, c) in [("start", a.start), ("goal", a.goal)] {
                if !self.map.in_bounds(c) {
                    return Err(Error::MalformedInstance(format!(
                        "agent {} {what} {c} out of bounds",
                        a.id
                    )));
                }
                if self.map.is_blocked(c) {
                    return Err(Error::MalformedInstance(format!(
                        "agent {} {what} {c} is an obstacle",
                        a.id
                    )));
                }
                if !seen.insert(c) {
                    return Err(Error::MalformedInstance(format!(
                        "agent {} {what} {c} is shared",
                        a.id
                    )));
                }
            }
        }
        let ids: HashSet<_> = self.agents.iter().map(|a| a.id).collect();
        if ids.len() != self.agents.len() {
            return Err(Error::MalformedInstance("duplicate agent ids".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WellFormedReport {
    pub well_formed: bool,
    /// Ids of agents that cannot reach their goal around the other
    /// endpoints.
    pub violators: Vec<usize>,
}

/// Whether every agent has a 4-connected route to its goal with all other
/// agents' endpoints blocked.
pub fn check_well_formed(instance: &Instance) -> Result<WellFormedReport> {
    instance.check_endpoints()?;
    let endpoints = instance.endpoints();
    let violators: Vec<usize> = instance
        .agents
        .iter()
        .filter(|a| {
            let blocked = instance.endpoints_except(&endpoints, a);
            !reachable(&instance.map, a.start, a.goal, &blocked)
        })
        .map(|a| a.id)
        .collect();
    Ok(WellFormedReport {
        well_formed: violators.is_empty(),
        violators,
    })
}

fn reachable(map: &GridMap, start: Cell, goal: Cell, blocked: &CellSet) -> bool {
    let mut seen = CellSet::new(map);
    let mut queue = VecDeque::from([start]);
    seen.insert(start);
    while let Some(c) = queue.pop_front() {
        if c == goal {
            return true;
        }
        for nb in map.neighbors4_iter(c) {
            if !blocked.contains(nb) && seen.insert(nb) {
                queue.push_back(nb);
            }
        }
    }
    false
}

/// Draws `n` agents with distinct endpoints from `pool` (all free cells when
/// `None`) until the draw is well-formed. Deterministic in `seed`.
pub fn generate_wfi_instance(
    map: &GridMap,
    n: usize,
    seed: u64,
    endpoint_pool: Option<&[Cell]>,
) -> Result<Instance> {
    let pool: Vec<Cell> = match endpoint_pool {
        Some(p) => {
            let mut p: Vec<Cell> = p.iter().copied().filter(|&c| map.is_passable(c)).collect();
            p.sort();
            p.dedup();
            p
        }
        None => map.passable_cells().collect(),
    };
    let label = format!("{}x{} map", map.width(), map.height());
    if pool.len() < 2 * n {
        return Err(Error::GenerationFailed {
            n,
            map: label,
            attempts: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let picks = sample(&mut rng, pool.len(), 2 * n);
        let cells: Vec<Cell> = picks.iter().map(|i| pool[i]).collect();
        let agents = (0..n)
            .map(|i| Agent {
                id: i,
                start: cells[i],
                goal: cells[n + i],
            })
            .collect();
        let inst = Instance::new(map.clone(), agents);
        if check_well_formed(&inst)?.well_formed {
            return Ok(inst);
        }
    }
    Err(Error::GenerationFailed {
        n,
        map: label,
        attempts: MAX_GENERATION_ATTEMPTS,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct AgentRow {
    id: usize,
    start_x: i32,
    start_y: i32,
    goal_x: i32,
    goal_y: i32,
}

/// Reads `id,start_x,start_y,goal_x,goal_y` rows; row order is priority.
pub fn read_agents(reader: impl Read) -> Result<Vec<Agent>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["id", "start_x", "start_y", "goal_x", "goal_y"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::parse(
            1,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    let mut agents = Vec::new();
    for row in rdr.deserialize::<AgentRow>() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        agents.push(Agent {
            id: row.id,
            start: Cell::new(row.start_x, row.start_y),
            goal: Cell::new(row.goal_x, row.goal_y),
        });
    }
    Ok(agents)
}

pub fn write_agents(writer: impl Write, agents: &[Agent]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    if agents.is_empty() {
        wtr.write_record(["id", "start_x", "start_y", "goal_x", "goal_y"])?;
    }
    for a in agents {
        wtr.serialize(AgentRow {
            id: a.id,
            start_x: a.start.col,
            start_y: a.start.row,
            goal_x: a.goal.col,
            goal_y: a.goal.row,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads an endpoint pool: CSV with header `x,y`.
pub fn read_endpoint_pool(reader: impl Read) -> Result<Vec<Cell>> {
    #[derive(Deserialize)]
    struct Row {
        x: i32,
        y: i32,
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut cells = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        cells.push(Cell::new(row.x, row.y));
    }
    Ok(cells)
}

pub fn write_endpoint_pool(writer: impl Write, cells: &[Cell]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["x", "y"])?;
    for c in cells {
        wtr.write_record([c.col.to_string(), c.row.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Free cells sharing an edge with an obstacle (rack faces on a warehouse
/// map).
pub fn rack_face_cells(map: &GridMap) -> Vec<Cell> {
    map.passable_cells()
        .filter(|&c| {
            crate::grid::CARDINAL_STEPS.iter().any(|&(dc, dr)| {
                let n = Cell::new(c.col + dc, c.row + dr);
                map.in_bounds(n) && map.is_blocked(n)
            })
        })
        .collect()
}

pub const EMPTY_64_MAP: &str = include_str!("../assets/empty-64-64.map");
pub const WAREHOUSE_MAP: &str = include_str!("../assets/warehouse-46-70.map");

/// The 64x64 obstacle-free benchmark map.
pub fn empty_64() -> GridMap {
    parse_map(EMPTY_64_MAP).expect("bundled map is valid")
}

/// The bundled warehouse map: 46 rows by 70 columns with 8 bands of 5
/// racks. Each rack is 10 cells wide and 2 deep; aisles are 3 cells wide.
pub fn warehouse() -> GridMap {
    parse_map(WAREHOUSE_MAP).expect("bundled map is valid")
}

/// Generates the warehouse layout bundled as `assets/warehouse-46-70.map`.
pub fn build_warehouse() -> GridMap {
    let mut map = GridMap::empty(70, 46);
    for band in 0..8 {
        let top = 4 + 5 * band;
        for rack in 0..5 {
            let left = 4 + 13 * rack;
            for row in top..top + 2 {
                for col in left..left + 10 {
                    map.set_blocked(Cell::new(col, row), true);
                }
            }
        }
    }
    map
}
