//! Prioritized multi-agent path finding for disk-shaped agents in continuous
//! time on 4-connected grids.
//!
//! Each agent plans an egocentric path that ignores the others, then the path
//! is repaired against the trajectories of higher-priority agents by inserting
//! waits only. A safe-interval planner and a naive sequential schedule are
//! included as baselines, together with instance generation, exact solution
//! validation and a benchmark driver.

pub mod bench;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod instance;
pub mod planners;
pub mod repair;
pub mod reservations;
pub mod safe_intervals;
pub mod sipp;
pub mod trajectory;

pub use bench::{validate_solution, Algorithm, MetricsRow, ValidationReport};
pub use error::{Error, Result};
pub use geometry::{collision_window, MotionSegment, Point2, TimeInterval};
pub use grid::{parse_map, Cell, CellSet, GridMap};
pub use instance::{generate_wfi_instance, Agent, Instance};
pub use planners::{astar_cardinal, thetastar_anyangle, GeomPath};
pub use repair::{plan_all, plan_prefix, repair_path, RepairConfig, RepairMode, Solution};
pub use reservations::Reservations;
pub use safe_intervals::SafeIntervalList;
pub use sipp::{sipp_plan, sipp_plan_all, sipp_plan_prefix};
pub use trajectory::{nominal_trajectory, segments_of, TimedWaypoint, Trajectory};
