use std::fmt;

use serde::{Deserialize, Serialize};

use crate::grid::GridPos;
use crate::ids::{OrderId, ProductId, RackId, RobotId, TaskId, WorkerId};
use crate::wms::PickMode;

/// Who performed a pick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Picker {
    Station(RobotId),
    Worker(WorkerId),
}

/// Event payloads. Variant order is the emission order within a tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    RobotMoved {
        robot: RobotId,
        from: GridPos,
        to: GridPos,
    },
    RackLifted {
        robot: RobotId,
        rack: RackId,
        at: GridPos,
    },
    RackDropped {
        robot: RobotId,
        rack: RackId,
        at: GridPos,
    },
    PickDone {
        task: TaskId,
        order: OrderId,
        product: ProductId,
        by: Picker,
    },
    VestStop {
        robot: RobotId,
        worker: WorkerId,
        distance_m: f64,
    },
    VestSlow {
        robot: RobotId,
        worker: WorkerId,
        distance_m: f64,
    },
    RobotBroken {
        robot: RobotId,
        at: GridPos,
    },
    RobotRepaired {
        robot: RobotId,
        worker: Option<WorkerId>,
    },
    WorkerDispatched {
        worker: WorkerId,
        goal: GridPos,
        encounter_ticks: u32,
    },
    WorkerExited {
        worker: WorkerId,
        at: GridPos,
    },
    EmergencyStop {
        worker: WorkerId,
    },
    ReplanTriggered {
        robot: RobotId,
        blocked_by: RobotId,
        ok: bool,
    },
    OrderPlaced {
        order: OrderId,
        mode: PickMode,
        units: u32,
    },
    OrderDone {
        order: OrderId,
    },
    LivelockSuspected {
        stalled_ticks: u64,
    },
    CommandRejected {
        command: String,
        reason: String,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::RobotMoved { .. } => "RobotMoved",
            EventKind::RackLifted { .. } => "RackLifted",
            EventKind::RackDropped { .. } => "RackDropped",
            EventKind::PickDone { .. } => "PickDone",
            EventKind::VestStop { .. } => "VestStop",
            EventKind::VestSlow { .. } => "VestSlow",
            EventKind::RobotBroken { .. } => "RobotBroken",
            EventKind::RobotRepaired { .. } => "RobotRepaired",
            EventKind::WorkerDispatched { .. } => "WorkerDispatched",
            EventKind::WorkerExited { .. } => "WorkerExited",
            EventKind::EmergencyStop { .. } => "EmergencyStop",
            EventKind::ReplanTriggered { .. } => "ReplanTriggered",
            EventKind::OrderPlaced { .. } => "OrderPlaced",
            EventKind::OrderDone { .. } => "OrderDone",
            EventKind::LivelockSuspected { .. } => "LivelockSuspected",
            EventKind::CommandRejected { .. } => "CommandRejected",
        }
    }

    /// (kind rank, agent id) sort key for intra-tick ordering.
    pub fn order_key(&self) -> (u8, u64) {
        use EventKind::*;
        match self {
            RobotMoved { robot, .. } => (0, robot.0 as u64),
            RackLifted { robot, .. } => (1, robot.0 as u64),
            RackDropped { robot, .. } => (2, robot.0 as u64),
            PickDone { task, .. } => (3, task.0),
            VestStop { robot, .. } => (4, robot.0 as u64),
            VestSlow { robot, .. } => (5, robot.0 as u64),
            RobotBroken { robot, .. } => (6, robot.0 as u64),
            RobotRepaired { robot, .. } => (7, robot.0 as u64),
            WorkerDispatched { worker, .. } => (8, worker.0 as u64),
            WorkerExited { worker, .. } => (9, worker.0 as u64),
            EmergencyStop { worker } => (10, worker.0 as u64),
            ReplanTriggered { robot, .. } => (11, robot.0 as u64),
            OrderPlaced { order, .. } => (12, order.0),
            OrderDone { order } => (13, order.0),
            LivelockSuspected { .. } => (14, 0),
            CommandRejected { .. } => (15, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl fmt::Display for Event {
    /// `tick Kind key=value ...` with a fixed field order per kind.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use EventKind::*;
        write!(f, "{} {}", self.tick, self.kind.name())?;
        match &self.kind {
            RobotMoved { robot, from, to } => write!(f, " robot={robot} from={from} to={to}"),
            RackLifted { robot, rack, at } | RackDropped { robot, rack, at } => {
                write!(f, " robot={robot} rack={rack} at={at}")
            }
            PickDone {
                task,
                order,
                product,
                by,
            } => {
                write!(f, " task={task} order={order} product={product} by=")?;
                match by {
                    Picker::Station(r) => write!(f, "robot:{r}"),
                    Picker::Worker(w) => write!(f, "worker:{w}"),
                }
            }
            VestStop {
                robot,
                worker,
                distance_m,
            }
            | VestSlow {
                robot,
                worker,
                distance_m,
            } => write!(f, " robot={robot} worker={worker} distance_m={distance_m:.3}"),
            RobotBroken { robot, at } => write!(f, " robot={robot} at={at}"),
            RobotRepaired { robot, worker } => match worker {
                Some(w) => write!(f, " robot={robot} worker={w}"),
                None => write!(f, " robot={robot} worker=-"),
            },
            WorkerDispatched {
                worker,
                goal,
                encounter_ticks,
            } => write!(f, " worker={worker} goal={goal} encounter_ticks={encounter_ticks}"),
            WorkerExited { worker, at } => write!(f, " worker={worker} at={at}"),
            EmergencyStop { worker } => write!(f, " worker={worker}"),
            ReplanTriggered {
                robot,
                blocked_by,
                ok,
            } => write!(f, " robot={robot} blocked_by={blocked_by} ok={ok}"),
            OrderPlaced { order, mode, units } => {
                let mode = match mode {
                    PickMode::StationPick => "station",
                    PickMode::PrePick => "prepick",
                };
                write!(f, " order={order} mode={mode} units={units}")
            }
            OrderDone { order } => write!(f, " order={order}"),
            LivelockSuspected { stalled_ticks } => write!(f, " stalled_ticks={stalled_ticks}"),
            CommandRejected { command, reason } => {
                write!(f, " command={command} reason={:?}", reason)
            }
        }
    }
}

/// Renders events as newline-terminated log lines.
pub fn render_log(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_string());
        out.push('\n');
    }
    out
}
