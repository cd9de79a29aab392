//! Operator commands, state frames and the wire message envelope shared by
//! the live server and command-script replay.

use serde::{Deserialize, Serialize};

use crate::agents::{RackLocation, RobotState, SpeedClass, WorkerTask};
use crate::ar::{guidance, minimap_frame, ArGuidance, MinimapFrame, StationQueue};
use crate::error::CommandError;
use crate::grid::GridPos;
use crate::hir::BehaviorState;
use crate::ids::{RackId, RobotId, StationId, WorkerId};
use crate::sim::{fms, Event, Metrics, Mode, World};
use crate::wms::{Order, OrderLine, PickMode, PickTarget, TaskStatus};

/// Where a dispatched worker should go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GoalRef {
    Node { node: GridPos },
    Rack { rack_id: RackId },
    Robot { robot_id: RobotId },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Pick,
    Repair,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum OperatorCommand {
    DispatchWorker {
        worker_id: WorkerId,
        goal: GoalRef,
        #[serde(default)]
        task: TaskKind,
    },
    RecallWorker {
        worker_id: WorkerId,
    },
    BreakRobot {
        robot_id: RobotId,
    },
    PlaceOrder {
        lines: Vec<OrderLine>,
        station_id: StationId,
        #[serde(default)]
        mode: PickMode,
        #[serde(default)]
        due_tick: Option<u64>,
    },
    SetMode {
        mode: Mode,
    },
    ResumeFleet,
    Pause,
    Resume,
    SetRate {
        ticks_per_second: f64,
    },
}

impl OperatorCommand {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorCommand::DispatchWorker { .. } => "DispatchWorker",
            OperatorCommand::RecallWorker { .. } => "RecallWorker",
            OperatorCommand::BreakRobot { .. } => "BreakRobot",
            OperatorCommand::PlaceOrder { .. } => "PlaceOrder",
            OperatorCommand::SetMode { .. } => "SetMode",
            OperatorCommand::ResumeFleet => "ResumeFleet",
            OperatorCommand::Pause => "Pause",
            OperatorCommand::Resume => "Resume",
            OperatorCommand::SetRate { .. } => "SetRate",
        }
    }

    /// Pause, Resume and SetRate steer the driver, not the world.
    pub fn is_driver_control(&self) -> bool {
        matches!(
            self,
            OperatorCommand::Pause | OperatorCommand::Resume | OperatorCommand::SetRate { .. }
        )
    }
}

/// Applies a command at a tick boundary. On success returns the events it
/// produced (stamped with the next tick). On error the world is unchanged;
/// callers that keep a log should follow up with [`World::record_rejection`]
/// or use [`apply_command`].
pub fn handle_command(world: &mut World, cmd: &OperatorCommand) -> Result<Vec<Event>, CommandError> {
    let before = world.pending_events_len();
    match cmd {
        OperatorCommand::DispatchWorker { worker_id, goal, task } => dispatch(world, *worker_id, *goal, *task)?,
        OperatorCommand::RecallWorker { worker_id } => {
            let w = world.worker(*worker_id).ok_or_else(|| unknown("worker", worker_id))?;
            if !w.inside {
                return Err(CommandError::IllegalState(format!("worker {worker_id} is not inside")));
            }
            fms::send_worker_out(world, *worker_id);
        }
        OperatorCommand::BreakRobot { robot_id } => {
            let r = world.robot(*robot_id).ok_or_else(|| unknown("robot", robot_id))?;
            if r.is_broken() {
                return Err(CommandError::IllegalState(format!("robot {robot_id} is already broken")));
            }
            fms::replan_on_failure(world, *robot_id);
        }
        OperatorCommand::PlaceOrder {
            lines,
            station_id,
            mode,
            due_tick,
        } => {
            if world.station(*station_id).is_none() {
                return Err(unknown("station", station_id));
            }
            let id = world.wms.peek_order_id();
            let order = Order {
                id,
                lines: lines.clone(),
                station: *station_id,
                created_tick: world.tick,
                due_tick: *due_tick,
            };
            let units = lines.iter().map(|l| l.quantity).sum();
            world
                .wms
                .place_order(order, *mode)
                .map_err(|e| CommandError::IllegalState(e.to_string()))?;
            world.emit_pub(crate::sim::EventKind::OrderPlaced { order: id, mode: *mode, units });
        }
        OperatorCommand::SetMode { mode } => world.pending_mode = Some(*mode),
        OperatorCommand::ResumeFleet => world.fleet_stop = false,
        OperatorCommand::Pause | OperatorCommand::Resume | OperatorCommand::SetRate { .. } => {}
    }
    Ok(world.pending_events_since(before).to_vec())
}

/// [`handle_command`] that logs a `CommandRejected` event on failure.
pub fn apply_command(world: &mut World, cmd: &OperatorCommand) -> Result<Vec<Event>, CommandError> {
    handle_command(world, cmd).inspect_err(|e| world.record_rejection(cmd.name(), &e.to_string()))
}

fn unknown(kind: &'static str, id: &impl ToString) -> CommandError {
    CommandError::UnknownId { kind, id: id.to_string() }
}

fn dispatch(world: &mut World, wid: WorkerId, goal: GoalRef, task: TaskKind) -> Result<(), CommandError> {
    let w = world.worker(wid).ok_or_else(|| unknown("worker", &wid))?;
    if w.inside && w.task.is_some() {
        return Err(CommandError::IllegalState(format!("worker {wid} is inside on another task")));
    }
    let start = if w.inside { w.pos } else { w.entry };
    let map = &world.map;
    let (node, task_ref) = match goal {
        GoalRef::Node { node } => {
            if !map.in_bounds(node) || !map.is_walkable(node) {
                return Err(CommandError::IllegalState(format!("goal {node} is not walkable")));
            }
            (node, None)
        }
        GoalRef::Rack { rack_id } => {
            let rack = world.rack(rack_id).ok_or_else(|| unknown("rack", &rack_id))?;
            let RackLocation::Node { pos } = rack.location else {
                return Err(CommandError::IllegalState(format!("rack {rack_id} is on a robot")));
            };
            let near = world
                .approach_node(pos, start)
                .ok_or_else(|| CommandError::IllegalState(format!("rack {rack_id} cannot be reached on foot")))?;
            (near, Some(rack_id))
        }
        GoalRef::Robot { robot_id } => {
            let r = world.robot(robot_id).ok_or_else(|| unknown("robot", &robot_id))?;
            let near = world
                .approach_node(r.pos, start)
                .ok_or_else(|| CommandError::IllegalState(format!("robot {robot_id} cannot be reached on foot")))?;
            (near, None)
        }
    };
    let worker_task = match task {
        TaskKind::None => None,
        TaskKind::Pick => {
            let GoalRef::Rack { rack_id } = goal else {
                return Err(CommandError::IllegalState("a pick needs a rack goal".into()));
            };
            let _ = task_ref;
            if world.robots.iter().any(|r| r.job.as_ref().is_some_and(|j| j.command.rack == rack_id)) {
                return Err(CommandError::IllegalState(format!("rack {rack_id} is claimed by a robot")));
            }
            if world.rack_locks.contains_key(&rack_id) {
                return Err(CommandError::IllegalState(format!("rack {rack_id} is taken by another worker")));
            }
            let t = world
                .wms
                .open_tasks()
                .find(|t| t.bin.rack == rack_id && t.target == PickTarget::Worker(None))
                .ok_or_else(|| CommandError::IllegalState(format!("no open pre-pick task at rack {rack_id}")))?;
            Some(WorkerTask::Pick { task: t.id })
        }
        TaskKind::Repair => {
            let GoalRef::Robot { robot_id } = goal else {
                return Err(CommandError::IllegalState("a repair needs a robot goal".into()));
            };
            if !world.robot(robot_id).is_some_and(|r| r.is_broken()) {
                return Err(CommandError::IllegalState(format!("robot {robot_id} is not broken")));
            }
            let taken = world
                .workers
                .iter()
                .any(|o| o.id != wid && o.inside && o.task == Some(WorkerTask::Repair { robot: robot_id }));
            if taken {
                return Err(CommandError::IllegalState(format!("robot {robot_id} already has a repairer")));
            }
            Some(WorkerTask::Repair { robot: robot_id })
        }
    };
    fms::dispatch_worker(world, wid, node, worker_task)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotView {
    pub id: RobotId,
    pub pos: GridPos,
    pub state: RobotState,
    pub carrying: Option<RackId>,
    pub speed_class: SpeedClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerView {
    pub id: WorkerId,
    pub pos: GridPos,
    pub inside: bool,
    pub behavior: BehaviorState,
    pub goal: Option<GridPos>,
    pub task: Option<WorkerTask>,
    /// Up to three most likely goals with their probabilities.
    pub belief_top3: Vec<(GridPos, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RackView {
    pub id: RackId,
    pub location: RackLocation,
}

/// Metric counters without the per-pick list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub picks_completed: u64,
    pub orders_completed: u64,
    pub robot_downtime_ticks: u64,
    pub mean_robot_utilization: f64,
    pub min_human_robot_distance_m: Option<f64>,
    pub encounter_ticks: u64,
    pub vest_stop_events: u64,
    pub vest_slow_events: u64,
    pub open_tasks: u64,
}

impl MetricsSnapshot {
    fn of(m: &Metrics, open_tasks: u64) -> Self {
        Self {
            picks_completed: m.picks_completed,
            orders_completed: m.orders_completed,
            robot_downtime_ticks: m.robot_downtime_ticks,
            mean_robot_utilization: m.mean_robot_utilization(),
            min_human_robot_distance_m: m.min_human_robot_distance_m,
            encounter_ticks: m.encounter_ticks,
            vest_stop_events: m.vest_stop_events,
            vest_slow_events: m.vest_slow_events,
            open_tasks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub tick: u64,
    /// Events in this frame have `since < tick <= self.tick`.
    pub since: u64,
    pub mode: Mode,
    pub fleet_stop: bool,
    pub robots: Vec<RobotView>,
    pub workers: Vec<WorkerView>,
    pub racks: Vec<RackView>,
    pub station_queues: Vec<StationQueue>,
    pub metrics: MetricsSnapshot,
    pub events: Vec<Event>,
    pub guidance: Vec<ArGuidance>,
    pub minimap: MinimapFrame,
}

pub fn state_frame(world: &World, since_tick: u64) -> StateFrame {
    let since = since_tick.min(world.tick);
    let minimap = minimap_frame(world);
    StateFrame {
        tick: world.tick,
        since,
        mode: world.mode,
        fleet_stop: world.fleet_stop,
        robots: world
            .robots
            .iter()
            .map(|r| RobotView {
                id: r.id,
                pos: r.pos,
                state: r.state,
                carrying: r.carrying,
                speed_class: r.speed_class,
            })
            .collect(),
        workers: world
            .workers
            .iter()
            .map(|w| WorkerView {
                id: w.id,
                pos: w.pos,
                inside: w.inside,
                behavior: w.behavior,
                goal: w.goal,
                task: w.task,
                belief_top3: world.beliefs.get(&w.id).map(|b| b.top(3)).unwrap_or_default(),
            })
            .collect(),
        racks: world
            .racks
            .iter()
            .map(|k| RackView {
                id: k.id,
                location: k.location,
            })
            .collect(),
        station_queues: minimap.station_queues.clone(),
        metrics: MetricsSnapshot::of(
            &world.metrics,
            world.wms.open_tasks().filter(|t| t.status == TaskStatus::Open).count() as u64,
        ),
        events: world.events_since(since).to_vec(),
        guidance: world
            .workers
            .iter()
            .filter_map(|w| guidance(world, w.id, &world.ar).ok())
            .collect(),
        minimap,
    }
}

/// Server reply to a command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandReply {
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}

/// Newline-delimited JSON messages on the bidirectional stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum WireMessage {
    Frame(Box<StateFrame>),
    Command(OperatorCommand),
    Reply(CommandReply),
}

impl WireMessage {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("wire messages serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim())
    }
}
