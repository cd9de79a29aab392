//! Robots, workers and racks.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::grid::GridPos;
use crate::hir::BehaviorState;
use crate::ids::{ProductId, RackId, RobotId, TaskId};
use crate::path::TimedPath;
use crate::wms::RackCommand;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RobotState {
    Idle,
    ToRack,
    Lifting,
    Carrying,
    ToStation,
    QueueWait,
    Returning,
    Charging,
    Broken,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpeedClass {
    Normal,
    Slow,
    Stopped,
}

/// Where a robot is in its current rack job. `RobotState` is derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JobPhase {
    FetchRack,
    LiftAtRack,
    /// Rack on board, heading for the picking node or a queue node.
    ToStation,
    /// Rack on board, parked until the station frees up.
    AwaitStation,
    DropAtStation,
    Picking,
    LiftAtStation,
    ReturnHome,
    DropAtHome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotJob {
    pub command: RackCommand,
    pub phase: JobPhase,
    /// Picks still to perform at the station.
    pub remaining: VecDeque<TaskId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Robot {
    pub id: RobotId,
    pub pos: GridPos,
    pub state: RobotState,
    pub carrying: Option<RackId>,
    pub path: Option<TimedPath>,
    pub speed_class: SpeedClass,
    pub job: Option<RobotJob>,
    /// Ticks spent in the current dwell.
    pub dwell: u32,
    /// Navigation target for the current phase.
    pub target: Option<GridPos>,
    /// Set when the robot must (re)plan before its next move.
    pub needs_plan: bool,
    /// Temporary sidestep node that overrides `target` until reached.
    #[serde(default)]
    pub detour: Option<GridPos>,
    /// Consecutive failed plans toward the current goal.
    #[serde(default)]
    pub plan_failures: u32,
}

impl Robot {
    pub fn new(id: RobotId, pos: GridPos) -> Self {
        Self {
            id,
            pos,
            state: RobotState::Idle,
            carrying: None,
            path: None,
            speed_class: SpeedClass::Normal,
            job: None,
            dwell: 0,
            target: None,
            needs_plan: false,
            detour: None,
            plan_failures: 0,
        }
    }

    pub fn is_broken(&self) -> bool {
        self.state == RobotState::Broken
    }

    pub fn is_idle(&self) -> bool {
        self.state == RobotState::Idle && self.job.is_none()
    }

    pub fn phase(&self) -> Option<JobPhase> {
        self.job.as_ref().map(|j| j.phase)
    }

    /// Sets the job phase and the matching externally visible state.
    pub fn set_phase(&mut self, phase: JobPhase) {
        if let Some(job) = self.job.as_mut() {
            job.phase = phase;
        }
        self.dwell = 0;
        self.state = state_for(phase, self.path.is_some());
    }

    /// Recomputes the visible state after a path change.
    pub fn refresh_state(&mut self) {
        if self.is_broken() {
            return;
        }
        self.state = match self.phase() {
            Some(p) => state_for(p, self.path.is_some()),
            None => RobotState::Idle,
        };
    }

    /// The planned node at `tick + 1`, when that is a move.
    pub fn planned_move(&self, tick: u64) -> Option<GridPos> {
        let next = self.path.as_ref()?.at(tick + 1)?;
        (next != self.pos).then_some(next)
    }

    /// True when the robot intends to make physical progress this tick:
    /// a planned move, travel toward an unreached target without a usable
    /// path, or a lift/drop in progress.
    pub fn has_pending_motion(&self, tick: u64) -> bool {
        if self.is_broken() {
            return false;
        }
        if self.planned_move(tick).is_some() {
            return true;
        }
        let travelling = matches!(
            self.phase(),
            Some(JobPhase::FetchRack | JobPhase::ToStation | JobPhase::ReturnHome)
        ) || (self.job.is_none() && self.target.is_some());
        let stuck = travelling
            && self.target.is_some_and(|t| t != self.pos)
            && self.path.as_ref().is_none_or(|p| p.at(tick + 1).is_none());
        let actuating = matches!(
            self.phase(),
            Some(
                JobPhase::LiftAtRack
                    | JobPhase::DropAtStation
                    | JobPhase::LiftAtStation
                    | JobPhase::DropAtHome
            )
        );
        stuck || actuating
    }
}

fn state_for(phase: JobPhase, has_path: bool) -> RobotState {
    match phase {
        JobPhase::FetchRack => RobotState::ToRack,
        JobPhase::LiftAtRack | JobPhase::LiftAtStation => RobotState::Lifting,
        JobPhase::ToStation if has_path => RobotState::ToStation,
        JobPhase::ToStation => RobotState::Carrying,
        JobPhase::AwaitStation | JobPhase::DropAtStation | JobPhase::Picking => {
            RobotState::QueueWait
        }
        JobPhase::ReturnHome | JobPhase::DropAtHome => RobotState::Returning,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WorkerTask {
    Pick { task: TaskId },
    Repair { robot: RobotId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WorkerActivity {
    /// Outside the robot area.
    Outside,
    Walking,
    /// At the goal performing the task; counts dwell ticks.
    Working,
    /// At the goal with nothing to do.
    Standing,
    /// Heading back to an entry to leave.
    Leaving,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Worker {
    pub id: crate::ids::WorkerId,
    pub pos: GridPos,
    pub goal: Option<GridPos>,
    pub task: Option<WorkerTask>,
    pub path: Option<TimedPath>,
    /// Index into `path.steps()` of the node the worker is on.
    pub cursor: usize,
    pub last_positions: VecDeque<GridPos>,
    pub window: usize,
    pub inside: bool,
    /// Entry node used to enter and leave.
    pub entry: GridPos,
    /// Path steps advanced per tick.
    pub speed: u32,
    pub activity: WorkerActivity,
    pub behavior: BehaviorState,
    pub dwell: u32,
    /// Set when the worker could not advance and should replan.
    pub blocked: bool,
    /// Consecutive ticks spent blocked without a usable route.
    #[serde(default)]
    pub blocked_ticks: u32,
}

impl Worker {
    pub fn new(id: crate::ids::WorkerId, entry: GridPos, window: usize, speed: u32) -> Self {
        Self {
            id,
            pos: entry,
            goal: None,
            task: None,
            path: None,
            cursor: 0,
            last_positions: VecDeque::with_capacity(window),
            window: window.max(2),
            inside: false,
            entry,
            speed: speed.max(1),
            activity: WorkerActivity::Outside,
            behavior: BehaviorState::OnTrack,
            dwell: 0,
            blocked: false,
            blocked_ticks: 0,
        }
    }

    /// Appends the position observed at the end of a tick, evicting the oldest
    /// entry when the window is full.
    pub fn record_position(&mut self, p: GridPos) {
        if self.last_positions.len() == self.window {
            self.last_positions.pop_front();
        }
        self.last_positions.push_back(p);
    }

    /// Remaining path nodes from the cursor on, consecutive duplicates removed.
    pub fn remaining_nodes(&self) -> Vec<GridPos> {
        let Some(path) = &self.path else {
            return Vec::new();
        };
        let mut out: Vec<GridPos> = Vec::new();
        for &p in &path.steps()[self.cursor.min(path.steps().len() - 1)..] {
            if out.last() != Some(&p) {
                out.push(p);
            }
        }
        out
    }

    pub fn pick_task(&self) -> Option<TaskId> {
        match self.task {
            Some(WorkerTask::Pick { task }) => Some(task),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "at", rename_all = "lowercase")]
pub enum RackLocation {
    Node { pos: GridPos },
    Robot { robot: RobotId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rack {
    pub id: RackId,
    pub home: GridPos,
    pub location: RackLocation,
    pub rows: u32,
    pub cols: u32,
    /// Row-major `rows × cols` product lists.
    pub bins: Vec<Vec<ProductId>>,
}

impl Rack {
    pub fn new(id: RackId, home: GridPos, rows: u32, cols: u32) -> Self {
        Self {
            id,
            home,
            location: RackLocation::Node { pos: home },
            rows,
            cols,
            bins: vec![Vec::new(); (rows * cols) as usize],
        }
    }

    pub fn node(&self) -> Option<GridPos> {
        match self.location {
            RackLocation::Node { pos } => Some(pos),
            RackLocation::Robot { .. } => None,
        }
    }

    pub fn bin(&self, row: u32, col: u32) -> Option<&Vec<ProductId>> {
        (row < self.rows && col < self.cols).then(|| &self.bins[(row * self.cols + col) as usize])
    }

    pub fn bin_mut(&mut self, row: u32, col: u32) -> Option<&mut Vec<ProductId>> {
        (row < self.rows && col < self.cols)
            .then(|| &mut self.bins[(row * self.cols + col) as usize])
    }
}
