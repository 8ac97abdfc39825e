//! Egocentric single-agent planners: 4-connected A* and Theta*.
//!
//! Both planners treat `extra_blocked` as additional static obstacles; the
//! prioritized front-ends pass every other agent's start and goal there.
//! Ties on `f` are broken toward larger `g`, then toward the earliest
//! generated node, so neighbor order (up, left, down, right) decides the rest.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::grid::{Cell, CellSet, GridMap};

/// Ordered waypoints from start to goal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeomPath {
    pub waypoints: Vec<Cell>,
}

impl GeomPath {
    pub fn new(waypoints: Vec<Cell>) -> Self {
        debug_assert!(!waypoints.is_empty());
        GeomPath { waypoints }
    }

    pub fn start(&self) -> Cell {
        self.waypoints[0]
    }

    pub fn goal(&self) -> Cell {
        *self.waypoints.last().expect("empty path")
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn length(&self) -> f64 {
        path_length(self)
    }
}

/// Sum of Euclidean distances between consecutive waypoints.
pub fn path_length(p: &GeomPath) -> f64 {
    p.waypoints.windows(2).map(|w| w[0].euclidean(w[1])).sum()
}

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    g: f64,
    seq: u64,
    node: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // BinaryHeap is a max-heap: the "greatest" entry is popped first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn endpoints_usable(map: &GridMap, extra_blocked: &CellSet, start: Cell, goal: Cell) -> bool {
    [start, goal]
        .iter()
        .all(|&c| map.is_passable(c) && !extra_blocked.contains(c))
}

fn trace_back(map: &GridMap, parent: &[usize], mut node: usize) -> GeomPath {
    let mut cells = vec![map.cell_at(node)];
    while parent[node] != node {
        node = parent[node];
        cells.push(map.cell_at(node));
    }
    cells.reverse();
    GeomPath::new(cells)
}

/// Shortest 4-connected path avoiding obstacles and `extra_blocked`.
pub fn astar_cardinal(
    map: &GridMap,
    start: Cell,
    goal: Cell,
    extra_blocked: &CellSet,
) -> Option<GeomPath> {
    if !endpoints_usable(map, extra_blocked, start, goal) {
        return None;
    }
    let n = map.num_cells();
    let mut g = vec![f64::INFINITY; n];
    let mut parent: Vec<usize> = (0..n).collect();
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;

    let s = map.index(start);
    let target = map.index(goal);
    g[s] = 0.0;
    open.push(OpenEntry {
        f: start.manhattan(goal) as f64,
        g: 0.0,
        seq,
        node: s,
    });

    while let Some(OpenEntry { g: g_cur, node, .. }) = open.pop() {
        if closed[node] || g_cur > g[node] {
            continue;
        }
        if node == target {
            return Some(trace_back(map, &parent, node));
        }
        closed[node] = true;
        let cell = map.cell_at(node);
        for nb in map.neighbors4_iter(cell) {
            if extra_blocked.contains(nb) {
                continue;
            }
            let j = map.index(nb);
            let g_new = g_cur + 1.0;
            if closed[j] || g_new >= g[j] {
                continue;
            }
            g[j] = g_new;
            parent[j] = node;
            seq += 1;
            open.push(OpenEntry {
                f: g_new + nb.manhattan(goal) as f64,
                g: g_new,
                seq,
                node: j,
            });
        }
    }
    None
}

/// Any-angle path by Theta* over the 4-connected expansion.
///
/// A neighbor is linked straight to the current node's parent whenever the
/// two are in line of sight. Closed nodes are reopened on improvement, which
/// keeps the result no longer than the 4-connected optimum.
pub fn thetastar_anyangle(
    map: &GridMap,
    start: Cell,
    goal: Cell,
    extra_blocked: &CellSet,
) -> Option<GeomPath> {
    if !endpoints_usable(map, extra_blocked, start, goal) {
        return None;
    }
    let n = map.num_cells();
    let mut g = vec![f64::INFINITY; n];
    let mut parent: Vec<usize> = (0..n).collect();
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;

    let s = map.index(start);
    let target = map.index(goal);
    g[s] = 0.0;
    open.push(OpenEntry {
        f: start.euclidean(goal),
        g: 0.0,
        seq,
        node: s,
    });

    while let Some(OpenEntry { g: g_cur, node, .. }) = open.pop() {
        if closed[node] || g_cur > g[node] {
            continue;
        }
        if node == target {
            return Some(trace_back(map, &parent, node));
        }
        closed[node] = true;
        let cell = map.cell_at(node);
        let up = parent[node];
        let up_cell = map.cell_at(up);
        for nb in map.neighbors4_iter(cell) {
            if extra_blocked.contains(nb) {
                continue;
            }
            let j = map.index(nb);
            if j == up {
                continue;
            }
            let (via, g_new) = if up != node && map.line_of_sight(up_cell, nb, extra_blocked) {
                (up, g[up] + up_cell.euclidean(nb))
            } else {
                (node, g_cur + 1.0)
            };
            if g_new >= g[j] {
                continue;
            }
            g[j] = g_new;
            parent[j] = via;
            closed[j] = false;
            seq += 1;
            open.push(OpenEntry {
                f: g_new + nb.euclidean(goal),
                g: g_new,
                seq,
                node: j,
            });
        }
    }
    None
}
