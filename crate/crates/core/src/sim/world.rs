use std::collections::{BTreeMap, HashSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agents::{Rack, RackLocation, Robot, Worker, WorkerTask};
use crate::ar::ArFeedConfig;
use crate::error::InvariantViolation;
use crate::grid::{GridPos, NodeKind, WarehouseMap};
use crate::hir::{GoalBelief, HirConfig};
use crate::ids::{RackId, RobotId, StationId, WorkerId};
use crate::planner::{PlannerConfig, ReservationTable};
use crate::vest::VestConfig;
use crate::wms::{PickTarget, RackCommand, Wms};

use super::events::{Event, EventKind};
use super::metrics::{Metrics, MetricsSeries};
use super::scenario::{FaultInjection, Mode, OrderStreamSpec, Scenario, ScriptedCommand, Timing};

/// A Picking node with its FIFO of waiting robots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Station {
    pub id: StationId,
    pub pos: GridPos,
    /// Robot currently cleared to occupy the picking node.
    pub holder: Option<RobotId>,
    pub queue: VecDeque<RobotId>,
    /// Queue nodes served by this station, nearest first.
    pub queue_nodes: Vec<GridPos>,
}

#[derive(Debug, Clone, Serialize)]
pub struct World {
    pub tick: u64,
    pub map: WarehouseMap,
    pub mode: Mode,
    /// Mode requested by an operator; applied at the start of the next step.
    pub pending_mode: Option<Mode>,
    /// Latched by an emergency classification until `ResumeFleet`.
    pub fleet_stop: bool,
    pub robots: Vec<Robot>,
    pub workers: Vec<Worker>,
    pub racks: Vec<Rack>,
    pub stations: Vec<Station>,
    pub wms: Wms,
    /// Rack commands released by the WMS and not yet given to a robot.
    pub pending_commands: VecDeque<RackCommand>,
    /// Racks reserved for a worker's pre-pick.
    pub rack_locks: BTreeMap<RackId, WorkerId>,
    pub table: ReservationTable,
    pub beliefs: BTreeMap<WorkerId, GoalBelief>,
    /// Nodes each worker traversed during the previous tick, oldest first.
    pub observed: BTreeMap<WorkerId, Vec<GridPos>>,
    pub metrics: Metrics,
    pub series: MetricsSeries,
    pub timing: Timing,
    pub vest: VestConfig,
    pub hir: HirConfig,
    pub planner: PlannerConfig,
    pub ar: ArFeedConfig,
    pub orders: OrderStreamSpec,
    pub(crate) next_scheduled: usize,
    pub auto_dispatch: bool,
    pub metrics_interval: u64,
    pub fault_injection: Option<FaultInjection>,
    /// Every event emitted so far, in order.
    pub log: Vec<Event>,
    /// Events produced since the last completed tick.
    pub(crate) pending_events: Vec<Event>,
    pub(crate) last_progress_tick: u64,
    pub(crate) livelock_reported: bool,
    #[serde(skip)]
    pub(crate) product_pool: Vec<crate::ids::ProductId>,
    #[serde(skip)]
    pub(crate) rng: ChaCha8Rng,
    #[serde(skip)]
    pub(crate) fields: crate::grid::FieldCache,
}

impl World {
    pub fn new(s: &Scenario) -> Self {
        let map = s.map.clone();
        let mut table = ReservationTable::new();
        let robots: Vec<Robot> = s
            .robots
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let id = RobotId(i as u32);
                table.park(id, p, 0);
                Robot::new(id, p)
            })
            .collect();
        let mut racks: Vec<Rack> = s
            .racks
            .iter()
            .map(|&(id, home, rows, cols)| Rack::new(id, home, rows, cols))
            .collect();
        for (bin, products) in s.inventory.bins() {
            if let Some(b) = racks.get_mut(bin.rack.0 as usize).and_then(|r| r.bin_mut(bin.row, bin.col)) {
                b.extend(products);
            }
        }
        let workers = s
            .workers
            .iter()
            .enumerate()
            .map(|(i, &entry)| Worker::new(WorkerId(i as u32), entry, s.hir.window_ticks, s.timing.worker_speed))
            .collect();
        let stations = build_stations(&map, &s.stations);
        Self {
            tick: 0,
            mode: s.mode,
            pending_mode: None,
            fleet_stop: false,
            robots,
            workers,
            racks,
            wms: Wms::new(s.inventory.clone(), s.stations.iter().copied()),
            stations,
            pending_commands: VecDeque::new(),
            rack_locks: BTreeMap::new(),
            table,
            beliefs: BTreeMap::new(),
            observed: BTreeMap::new(),
            metrics: Metrics::default(),
            series: MetricsSeries::default(),
            timing: s.timing,
            vest: s.vest,
            hir: s.hir,
            planner: s.planner,
            ar: s.ar,
            orders: s.orders.clone(),
            next_scheduled: 0,
            auto_dispatch: s.auto_dispatch,
            metrics_interval: s.metrics_interval,
            fault_injection: s.fault_injection,
            log: Vec::new(),
            pending_events: Vec::new(),
            last_progress_tick: 0,
            livelock_reported: false,
            product_pool: if s.orders.products.is_empty() {
                s.inventory.products().cloned().collect()
            } else {
                s.orders.products.clone()
            },
            rng: ChaCha8Rng::seed_from_u64(s.seed),
            fields: Default::default(),
            map,
        }
    }

    pub fn robot(&self, id: RobotId) -> Option<&Robot> {
        self.robots.get(id.0 as usize)
    }

    pub fn worker(&self, id: WorkerId) -> Option<&Worker> {
        self.workers.get(id.0 as usize)
    }

    pub fn rack(&self, id: RackId) -> Option<&Rack> {
        self.racks.get(id.0 as usize)
    }

    pub fn station(&self, id: StationId) -> Option<&Station> {
        self.stations.iter().find(|s| s.id == id)
    }

    /// Node of a rack, whether on the floor or under a robot.
    pub fn rack_pos(&self, id: RackId) -> Option<GridPos> {
        let rack = self.rack(id)?;
        match rack.location {
            RackLocation::Node { pos } => Some(pos),
            RackLocation::Robot { robot } => self.robot(robot).map(|r| r.pos),
        }
    }

    /// Workers currently past an entry node.
    pub fn inside_workers(&self) -> impl Iterator<Item = &Worker> {
        self.workers.iter().filter(|w| w.inside)
    }

    pub fn any_worker_inside(&self) -> bool {
        self.workers.iter().any(|w| w.inside)
    }

    /// Legacy override or the emergency latch stops every robot.
    pub fn fleet_halted(&self) -> bool {
        self.fleet_stop || (self.mode == Mode::Legacy && self.any_worker_inside())
    }

    /// Queues an event for the tick being built.
    pub(crate) fn emit(&mut self, kind: EventKind) {
        self.pending_events.push(Event {
            tick: self.tick + 1,
            kind,
        });
    }

    pub(crate) fn emit_pub(&mut self, kind: EventKind) {
        self.emit(kind);
    }

    pub(crate) fn pending_events_len(&self) -> usize {
        self.pending_events.len()
    }

    pub(crate) fn pending_events_since(&self, from: usize) -> &[Event] {
        &self.pending_events[from..]
    }

    /// Events produced at the current boundary that the next step will stamp.
    pub fn pending_events(&self) -> &[Event] {
        &self.pending_events
    }

    /// Records a rejected operator command; the rest of the world is untouched.
    pub fn record_rejection(&mut self, command: &str, reason: &str) {
        self.emit(EventKind::CommandRejected {
            command: command.to_string(),
            reason: reason.to_string(),
        });
    }

    /// Events with `tick > since`.
    pub fn events_since(&self, since: u64) -> &[Event] {
        let start = self.log.partition_point(|e| e.tick <= since);
        &self.log[start..]
    }

    /// True when no work remains and no more orders can arrive.
    pub fn is_done(&self, scripted: &[ScriptedCommand]) -> bool {
        self.orders.exhausted_at(self.tick)
            && scripted.iter().all(|c| c.tick < self.tick)
            && self.wms.open_tasks().next().is_none()
            && self.wms.queued_commands().is_empty()
            && self.pending_commands.is_empty()
            && self.robots.iter().all(|r| r.job.is_none() || r.is_broken())
            && !self.any_worker_inside()
    }

    /// Nearest walkable neighbor of `node` as seen from `from`, or `node`
    /// itself when it is walkable and nothing better exists.
    pub fn approach_node(&self, node: GridPos, from: GridPos) -> Option<GridPos> {
        let field = self.map.distance_field(from, |p| self.map.is_walkable(p));
        self.map
            .neighbors_iter(node)
            .filter(|&q| self.map.is_walkable(q))
            .filter_map(|q| field[self.map.index(q)].map(|d| (d, q)))
            .min_by_key(|&(d, _)| d)
            .map(|(_, q)| q)
    }

    /// Entry node with the fewest walkable steps from `from`, lowest index on ties.
    pub fn nearest_exit(&self, from: GridPos) -> Option<GridPos> {
        let field = self.map.distance_field(from, |p| self.map.is_walkable(p));
        self.map
            .entry_points()
            .iter()
            .enumerate()
            .filter_map(|(i, &e)| field[self.map.index(e)].map(|d| (d, i, e)))
            .min()
            .map(|(_, _, e)| e)
    }

    /// Candidate goal set for a worker heading to `assigned`.
    pub fn candidate_goals(&self, assigned: GridPos, task_node: Option<GridPos>) -> Vec<GridPos> {
        let mut others: Vec<GridPos> = self.map.entry_points().to_vec();
        if let Some(t) = task_node {
            others.push(t);
        }
        others.retain(|&g| g != assigned);
        let mut seen = HashSet::new();
        others.retain(|g| seen.insert(*g));
        others
    }

    /// Cross-checks the world invariants.
    pub fn check_invariants(&self) -> Result<(), InvariantViolation> {
        let fail = |what: String| InvariantViolation { tick: self.tick, what };
        let mut occupied: Vec<Option<RobotId>> = vec![None; self.map.node_count()];
        for r in &self.robots {
            if let Some(other) = occupied[self.map.index(r.pos)].replace(r.id) {
                return Err(fail(format!("robots {other} and {} share node {}", r.id, r.pos)));
            }
            if r.is_broken() && r.path.is_some() {
                return Err(fail(format!("broken robot {} has a path", r.id)));
            }
            if let Some(rack) = r.carrying {
                match self.rack(rack).map(|k| &k.location) {
                    Some(RackLocation::Robot { robot }) if *robot == r.id => {}
                    _ => return Err(fail(format!("robot {} claims rack {rack}", r.id))),
                }
            }
        }
        let mut floor = vec![false; self.map.node_count()];
        for k in &self.racks {
            match k.location {
                RackLocation::Node { pos } => {
                    let kind = self.map.kind(pos);
                    if !matches!(kind, NodeKind::RackSlot | NodeKind::Queue | NodeKind::Picking) {
                        return Err(fail(format!("rack {} dropped on {kind:?} node {pos}", k.id)));
                    }
                    if std::mem::replace(&mut floor[self.map.index(pos)], true) {
                        return Err(fail(format!("two racks on node {pos}")));
                    }
                }
                RackLocation::Robot { robot } => {
                    if self.robot(robot).and_then(|r| r.carrying) != Some(k.id) {
                        return Err(fail(format!("rack {} on robot {robot} that does not carry it", k.id)));
                    }
                }
            }
        }
        for w in &self.workers {
            if w.goal.is_some() && w.inside {
                if let Some(p) = &w.path {
                    if p.steps().windows(2).any(|s| s[0] != s[1] && !s[0].is_adjacent(s[1])) {
                        return Err(fail(format!("worker {} path breaks adjacency", w.id)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Task node a worker's belief should include.
    pub(crate) fn task_node(&self, task: Option<&WorkerTask>) -> Option<GridPos> {
        match task? {
            WorkerTask::Pick { task } => {
                let t = self.wms.task(*task)?;
                self.rack_pos(t.bin.rack)
            }
            WorkerTask::Repair { robot } => self.robot(*robot).map(|r| r.pos),
        }
    }

    /// Open pre-pick tasks not yet taken by a worker, oldest first.
    pub(crate) fn unbound_prepick_tasks(&self) -> Vec<crate::ids::TaskId> {
        self.wms
            .open_tasks()
            .filter(|t| t.target == PickTarget::Worker(None))
            .map(|t| t.id)
            .collect()
    }
}

fn build_stations(map: &WarehouseMap, ids: &[StationId]) -> Vec<Station> {
    let picking: Vec<GridPos> = map.nodes_of_kind(NodeKind::Picking).collect();
    let mut stations: Vec<Station> = ids
        .iter()
        .map(|&id| Station {
            id,
            pos: picking[id.0 as usize],
            holder: None,
            queue: VecDeque::new(),
            queue_nodes: Vec::new(),
        })
        .collect();
    if stations.is_empty() {
        return stations;
    }
    let fields: Vec<Vec<Option<u32>>> = stations
        .iter()
        .map(|s| map.distance_field(s.pos, |p| map.is_passable(p)))
        .collect();
    let mut owned: Vec<Vec<(u32, GridPos)>> = vec![Vec::new(); stations.len()];
    for q in map.nodes_of_kind(NodeKind::Queue) {
        let best = fields
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f[map.index(q)].map(|d| (d, i)))
            .min();
        if let Some((d, i)) = best {
            owned[i].push((d, q));
        }
    }
    for (s, mut nodes) in stations.iter_mut().zip(owned) {
        nodes.sort();
        s.queue_nodes = nodes.into_iter().map(|(_, q)| q).collect();
    }
    stations
}
