//! Fleet management: task assignment, space-time path planning for robots,
//! encounter-minimizing routes for humans.

mod assign;
mod reservation;
mod search;

pub use assign::assign_tasks;
pub use reservation::{AgentHold, Conflict, ReservationTable};
pub use search::{count_encounters, plan_human_path, search_robot_path};

use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::grid::{GridPos, WarehouseMap};
use crate::ids::RobotId;
use crate::path::TimedPath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub horizon_ticks: u64,
    /// Penalty per tick a human spends near a robot hold.
    pub lambda: f64,
    pub max_expansions: usize,
    pub encounter_radius_m: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            horizon_ticks: 512,
            lambda: 10_000.0,
            max_expansions: 1_000_000,
            encounter_radius_m: 10.0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.horizon_ticks < 1 {
            return Err(("planner.horizon_ticks", "must be >= 1".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(("planner.lambda", "must be >= 0".into()));
        }
        if self.max_expansions == 0 {
            return Err(("planner.max_expansions", "must be positive".into()));
        }
        if !(self.encounter_radius_m >= 0.0) {
            return Err(("planner.encounter_radius_m", "must be >= 0".into()));
        }
        Ok(())
    }
}

/// Plans a robot path and, on success, reserves it and parks the robot at the
/// goal from the arrival tick on. Other agents' holds are never disturbed.
pub fn plan_robot_path(
    map: &WarehouseMap,
    table: &mut ReservationTable,
    agent: RobotId,
    start: GridPos,
    goal: GridPos,
    t0: u64,
    cfg: &PlannerConfig,
) -> Result<TimedPath, PlanError> {
    let path = search_robot_path(map, table, agent, start, goal, t0, cfg)?;
    Ok(commit_robot_path(table, agent, goal, path))
}

/// [`plan_robot_path`] with a precomputed passable distance field to `goal`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn plan_robot_path_with(
    map: &WarehouseMap,
    table: &mut ReservationTable,
    agent: RobotId,
    start: GridPos,
    goal: GridPos,
    t0: u64,
    cfg: &PlannerConfig,
    heuristic: &[Option<u32>],
) -> Result<TimedPath, PlanError> {
    let path = search::search_robot_path_with(map, table, agent, start, goal, t0, cfg, heuristic)?;
    Ok(commit_robot_path(table, agent, goal, path))
}

fn commit_robot_path(table: &mut ReservationTable, agent: RobotId, goal: GridPos, path: TimedPath) -> TimedPath {
    table
        .reserve_path(agent, path.clone())
        .expect("search honors the table");
    let displaced = table.park(agent, goal, path.end_tick());
    debug_assert!(displaced.is_empty(), "goal accepted while still held");
    path
}
