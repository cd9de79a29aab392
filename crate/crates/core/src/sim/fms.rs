//! Fleet-side decisions the engine makes during a tick: rack assignment,
//! station queueing, robot (re)planning, failure handling and worker routing.

use std::collections::{BTreeSet, HashSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{JobPhase, RackLocation, RobotJob, RobotState, SpeedClass, WorkerActivity, WorkerTask};
use crate::error::{CommandError, PlanError};
use crate::grid::{GridPos, NodeKind};
use crate::hir::GoalBelief;
use crate::ids::{RobotId, WorkerId};
use crate::path::TimedPath;
use crate::planner::{assign_tasks, plan_human_path, plan_robot_path_with, PlannerConfig};
use crate::vest::{command_for_distance, SafetyCommand};
use crate::wms::{RackCommand, TaskStatus};

use super::events::EventKind;
use super::world::World;

/// Outcome of [`replan_on_failure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDelta {
    pub robot: RobotId,
    /// Future node reservations the broken robot gave up.
    pub released_ticks: usize,
    /// Robots whose reservations crossed the broken node, in replanning order,
    /// with whether a new path was found.
    pub replanned: Vec<(RobotId, bool)>,
    /// Fetch command handed back to the queue, when the robot had not yet
    /// lifted its rack.
    pub requeued: Option<RackCommand>,
}

/// Marks `id` Broken, frees its future reservations, blocks its node for good
/// and replans every robot whose reservations cross that node, lowest id first.
pub fn replan_on_failure(world: &mut World, id: RobotId) -> PlanDelta {
    let t = world.tick;
    let i = id.0 as usize;
    let pos = world.robots[i].pos;
    let released = world
        .table
        .release_path(id)
        .map(|p| p.steps().len().saturating_sub((t.saturating_sub(p.start_tick())) as usize))
        .unwrap_or(0);
    let displaced = world.table.park(id, pos, t);
    let robot = &mut world.robots[i];
    robot.path = None;
    robot.needs_plan = false;
    robot.speed_class = SpeedClass::Stopped;
    robot.state = RobotState::Broken;
    let mut requeued = None;
    if robot.carrying.is_none() {
        if let Some(job) = robot.job.take() {
            requeued = Some(job.command);
            robot.target = None;
        }
    }
    if let Some(cmd) = &requeued {
        world.pending_commands.push_front(cmd.clone());
    }
    // A broken station holder gives up its slot.
    for s in &mut world.stations {
        if s.holder == Some(id) {
            s.holder = None;
        }
        s.queue.retain(|&r| r != id);
    }
    world.emit(EventKind::RobotBroken { robot: id, at: pos });

    let mut replanned = Vec::new();
    let mut displaced = displaced;
    displaced.extend(stall_all(world, &displaced, t));
    displaced.sort();
    displaced.dedup();
    for other in displaced {
        let o = other.0 as usize;
        if world.robots[o].is_broken() || world.robots[o].target.is_none() {
            continue;
        }
        world.robots[o].needs_plan = true;
        let ok = plan_robot(world, other, t).is_ok();
        if !ok {
            world.robots[o].state = RobotState::QueueWait;
        }
        world.emit(EventKind::ReplanTriggered {
            robot: other,
            blocked_by: id,
            ok,
        });
        replanned.push((other, ok));
    }
    PlanDelta {
        robot: id,
        released_ticks: released,
        replanned,
        requeued,
    }
}

/// Parks `id` on `pos` from `from`. Robots whose planned paths cross that
/// node later are stopped where they stand (parked from `from`), repeatedly,
/// and flagged for replanning. Returns every robot stalled this way.
pub(crate) fn park_cascade(world: &mut World, id: RobotId, pos: GridPos, from: u64) -> Vec<RobotId> {
    let hit = world.table.park(id, pos, from);
    stall_all(world, &hit, from)
}

fn stall_all(world: &mut World, start: &[RobotId], from: u64) -> Vec<RobotId> {
    let mut todo: Vec<RobotId> = start.to_vec();
    let mut out = Vec::new();
    while let Some(b) = todo.pop() {
        if out.contains(&b) {
            continue;
        }
        out.push(b);
        let j = b.0 as usize;
        world.table.release_path(b);
        world.robots[j].path = None;
        if !world.robots[j].is_broken() {
            world.robots[j].needs_plan = world.robots[j].target.is_some();
        }
        let bpos = world.robots[j].pos;
        todo.extend(world.table.park(b, bpos, from));
        world.robots[j].refresh_state();
    }
    out.sort();
    out
}

/// Plans robot `id` from its position at `t` toward its target. On failure the
/// robot stays parked where it is and keeps `needs_plan`.
pub(crate) fn plan_robot(world: &mut World, id: RobotId, t: u64) -> Result<(), PlanError> {
    let i = id.0 as usize;
    if world.robots[i].detour == Some(world.robots[i].pos) {
        world.robots[i].detour = None;
    }
    let (pos, target) = (world.robots[i].pos, world.robots[i].detour.or(world.robots[i].target));
    let Some(goal) = target else {
        world.robots[i].needs_plan = false;
        return Ok(());
    };
    world.table.release_path(id);
    world.robots[i].path = None;
    if goal == pos {
        park_cascade(world, id, pos, t);
        world.robots[i].needs_plan = false;
        world.robots[i].refresh_state();
        return Ok(());
    }
    let field = world.fields.get(&world.map, goal);
    match plan_robot_path_with(&world.map, &mut world.table, id, pos, goal, t, &world.planner, &field) {
        Ok(path) => {
            let r = &mut world.robots[i];
            r.path = Some(path);
            r.needs_plan = false;
            r.refresh_state();
            Ok(())
        }
        Err(e) => {
            park_cascade(world, id, pos, t);
            world.robots[i].needs_plan = true;
            world.robots[i].refresh_state();
            Err(e)
        }
    }
}

/// Moves idle robots that sit on `id`'s static route (or on its goal) out of
/// the way, toward the nearest free charge node.
pub(crate) fn nudge_blockers(world: &mut World, id: RobotId) {
    let r = &world.robots[id.0 as usize];
    let Some(goal) = r.target else { return };
    let field = world.fields.get(&world.map, goal);
    let r = &world.robots[id.0 as usize];
    let map = &world.map;
    // Greedy descent along the static distance field gives one shortest route.
    let mut route = vec![r.pos];
    let mut cur = r.pos;
    while cur != goal {
        let Some(d) = field[map.index(cur)] else { break };
        let Some(next) = map
            .neighbors_iter(cur)
            .find(|&q| field[map.index(q)] == Some(d.saturating_sub(1)) && d > 0)
        else {
            break;
        };
        route.push(next);
        cur = next;
    }
    let on_route: HashSet<GridPos> = route.iter().copied().collect();
    let blockers: Vec<RobotId> = world
        .robots
        .iter()
        .filter(|o| o.id != id && o.is_idle() && o.target.is_none() && on_route.contains(&o.pos))
        .map(|o| o.id)
        .collect();
    for b in blockers {
        if let Some(q) = parking_spot(world, b, &on_route) {
            let o = &mut world.robots[b.0 as usize];
            o.target = Some(q);
            o.needs_plan = true;
        }
    }
}

/// Nearest free Charge node for an idle robot, else the nearest free
/// Navigation node, avoiding `avoid`.
fn parking_spot(world: &mut World, id: RobotId, avoid: &HashSet<GridPos>) -> Option<GridPos> {
    let from = world.robots[id.0 as usize].pos;
    let field = world.fields.get(&world.map, from);
    let map = &world.map;
    let taken: HashSet<GridPos> = world
        .robots
        .iter()
        .filter(|o| o.id != id)
        .flat_map(|o| [Some(o.pos), o.target])
        .flatten()
        .collect();
    let usable = |q: GridPos| {
        q != from
            && !avoid.contains(&q)
            && !taken.contains(&q)
            && world.table.free_forever_from(q, id).is_some()
            && !world.workers.iter().any(|w| w.inside && w.pos == q)
    };
    let best = |kind: NodeKind| {
        map.nodes_of_kind(kind)
            .filter(|&q| usable(q))
            .filter_map(|q| field[map.index(q)].map(|d| (d, q)))
            .min()
            .map(|(_, q)| q)
    };
    best(NodeKind::Charge).or_else(|| best(NodeKind::Navigation))
}

/// Hands released WMS commands to idle robots.
pub(crate) fn assign(world: &mut World, t: u64) {
    if world.pending_commands.is_empty() || !world.robots.iter().any(|r| r.is_idle()) {
        return;
    }
    let claimed: BTreeSet<_> = world
        .robots
        .iter()
        .filter_map(|r| r.job.as_ref().map(|j| j.command.rack))
        .collect();
    let cmds: Vec<RackCommand> = world.pending_commands.iter().cloned().collect();
    let assigned = {
        let w = &*world;
        assign_tasks(&w.map, &cmds, &w.robots, |rack| {
            if claimed.contains(&rack) || w.rack_locks.contains_key(&rack) {
                return None;
            }
            match w.rack(rack)?.location {
                RackLocation::Node { pos } => Some(pos),
                RackLocation::Robot { .. } => None,
            }
        })
    };
    let mut claimed = claimed;
    for (rid, cmd) in assigned {
        // One robot per rack even when several commands name it.
        if !claimed.insert(cmd.rack) {
            continue;
        }
        let idx = world
            .pending_commands
            .iter()
            .position(|c| c == &cmd)
            .expect("assigned command is pending");
        world.pending_commands.remove(idx);
        let rack_pos = world.rack_pos(cmd.rack).expect("rack on floor");
        let r = &mut world.robots[rid.0 as usize];
        r.job = Some(RobotJob {
            remaining: cmd.tasks.iter().copied().collect(),
            command: cmd,
            phase: JobPhase::FetchRack,
        });
        r.target = Some(rack_pos);
        r.needs_plan = true;
        r.set_phase(JobPhase::FetchRack);
    }
    let _ = t;
}

/// Points a loaded robot at its station, or at a queue node when the station
/// is taken.
pub(crate) fn route_to_station(world: &mut World, id: RobotId) {
    let i = id.0 as usize;
    let Some(job) = world.robots[i].job.as_ref() else { return };
    let sid = job.command.station;
    let Some(si) = world.stations.iter().position(|s| s.id == sid) else { return };
    let st = &mut world.stations[si];
    let target = if st.holder == Some(id) || (st.holder.is_none() && st.queue.is_empty()) {
        st.holder = Some(id);
        st.pos
    } else {
        if !st.queue.contains(&id) {
            st.queue.push_back(id);
        }
        let st = &world.stations[si];
        let me = world.robots[i].pos;
        let busy: HashSet<GridPos> = world
            .robots
            .iter()
            .filter(|o| o.id != id)
            .flat_map(|o| [Some(o.pos), o.target])
            .flatten()
            .collect();
        st.queue_nodes
            .iter()
            .copied()
            .find(|q| !busy.contains(q) && world.table.free_forever_from(*q, id).is_some())
            .unwrap_or(me)
    };
    let r = &mut world.robots[i];
    r.target = Some(target);
    r.needs_plan = true;
    r.set_phase(JobPhase::ToStation);
}

/// Clears the head of each free station's queue to drive in.
pub(crate) fn advance_stations(world: &mut World) {
    for si in 0..world.stations.len() {
        if world.stations[si].holder.is_some() {
            continue;
        }
        let Some(next) = world.stations[si].queue.pop_front() else { continue };
        world.stations[si].holder = Some(next);
        let pos = world.stations[si].pos;
        let r = &mut world.robots[next.0 as usize];
        r.target = Some(pos);
        r.needs_plan = true;
        r.set_phase(JobPhase::ToStation);
    }
}

/// True when the robot will be stopped this tick regardless of its plan, so
/// planning for it would be wasted.
pub(crate) fn held(world: &World, id: RobotId) -> bool {
    if world.fleet_halted() {
        return true;
    }
    let r = &world.robots[id.0 as usize];
    r.speed_class == SpeedClass::Stopped
        && world.inside_workers().any(|w| {
            let d = crate::grid::grid_distance_m(r.pos, w.pos, world.map.spacing_m());
            command_for_distance(d, &world.vest) == SafetyCommand::Stop
        })
}

/// Robot planning pass of phase 2.
pub(crate) fn plan_robots(world: &mut World, t: u64) {
    for i in 0..world.robots.len() {
        let id = world.robots[i].id;
        if !world.robots[i].needs_plan || world.robots[i].is_broken() || held(world, id) {
            continue;
        }
        let has_job = world.robots[i].job.is_some();
        if plan_robot(world, id, t).is_ok() {
            world.robots[i].plan_failures = 0;
            continue;
        }
        if has_job {
            nudge_blockers(world, id);
        }
        let r = &mut world.robots[i];
        r.plan_failures += 1;
        if r.plan_failures >= DETOUR_AFTER && r.detour.is_none() {
            r.plan_failures = 0;
            try_detour(world, id, t);
        }
    }
}

/// Failed plans in a row before a robot sidesteps.
const DETOUR_AFTER: u32 = 8;

/// Sends a stuck robot to the nearest free node off its goal, so that two
/// robots waiting on each other's nodes can untangle.
fn try_detour(world: &mut World, id: RobotId, t: u64) {
    let i = id.0 as usize;
    let Some(goal) = world.robots[i].target else { return };
    let from = world.robots[i].pos;
    let field = world.fields.get(&world.map, from);
    let map = &world.map;
    let taken: HashSet<GridPos> = world
        .robots
        .iter()
        .filter(|o| o.id != id)
        .flat_map(|o| [Some(o.pos), o.target, o.detour])
        .flatten()
        .collect();
    let spot = map
        .positions()
        .filter(|&q| {
            q != from
                && q != goal
                && matches!(map.kind(q), NodeKind::Navigation | NodeKind::Charge)
                && !taken.contains(&q)
                && world.table.free_forever_from(q, id).is_some()
                && !world.workers.iter().any(|w| w.inside && w.pos == q)
        })
        .filter_map(|q| field[map.index(q)].map(|d| (d, q)))
        .min()
        .map(|(_, q)| q);
    let Some(spot) = spot else { return };
    world.robots[i].detour = Some(spot);
    if plan_robot(world, id, t).is_err() {
        world.robots[i].detour = None;
    }
}

/// Random unreserved paths for every robot without motion queued: a random
/// walk, or a beeline toward the nearest worker. Reservations are ignored.
pub(crate) fn adversarial_paths(world: &mut World, t: u64) {
    for i in 0..world.robots.len() {
        let r = &world.robots[i];
        if r.is_broken() || r.path.as_ref().is_some_and(|p| p.end_tick() > t) {
            continue;
        }
        let start = r.pos;
        let toward = world.inside_workers().map(|w| w.pos).min_by_key(|p| p.manhattan(start));
        let chase = toward.is_some() && world.rng.random_bool(0.5);
        let len = world.rng.random_range(1..=12usize);
        let mut steps = vec![start];
        let mut cur = start;
        for _ in 0..len {
            let nbrs: Vec<GridPos> = world.map.neighbors_iter(cur).collect();
            if nbrs.is_empty() {
                break;
            }
            let next = match (chase, toward) {
                (true, Some(goal)) => *nbrs.iter().min_by_key(|q| q.manhattan(goal)).expect("non-empty"),
                _ => nbrs[world.rng.random_range(0..nbrs.len())],
            };
            steps.push(next);
            cur = next;
        }
        let path = TimedPath::new(t, steps).expect("adjacent steps");
        world.robots[i].path = Some(path);
        world.robots[i].needs_plan = false;
    }
}

/// Routes a worker from its current node (or its entry when outside) to
/// `goal`. Falls back to a shortest route when the encounter search runs out
/// of budget.
pub(crate) fn route_worker(
    world: &World,
    wid: WorkerId,
    goal: GridPos,
    t: u64,
) -> Result<(TimedPath, u32), PlanError> {
    let w = &world.workers[wid.0 as usize];
    let start = if w.inside { w.pos } else { w.entry };
    match plan_human_path(&world.map, &world.table, start, goal, t, &world.planner) {
        Err(PlanError::BudgetExceeded(_)) => {
            let plain = PlannerConfig {
                lambda: 0.0,
                ..world.planner
            };
            plan_human_path(&world.map, &world.table, start, goal, t, &plain)
        }
        other => other,
    }
}

/// Sends a worker toward `goal` with an optional task. Nothing changes on error.
pub(crate) fn dispatch_worker(
    world: &mut World,
    wid: WorkerId,
    goal: GridPos,
    task: Option<WorkerTask>,
) -> Result<(), CommandError> {
    let t = world.tick;
    let w = &world.workers[wid.0 as usize];
    let start = if w.inside { w.pos } else { w.entry };
    if !w.inside && world.robots.iter().any(|r| r.pos == start) {
        return Err(CommandError::IllegalState(format!("entry {start} is occupied by a robot")));
    }
    let (path, encounters) = route_worker(world, wid, goal, t)
        .map_err(|e| CommandError::IllegalState(format!("no route for worker {wid} to {goal}: {e}")))?;
    let task_node = world.task_node(task.as_ref());
    let belief = GoalBelief::with_assigned(goal, world.candidate_goals(goal, task_node));
    if let Some(WorkerTask::Pick { task }) = task {
        world.wms.bind_worker(task, Some(wid));
        if let Some(pt) = world.wms.task(task) {
            world.rack_locks.insert(pt.bin.rack, wid);
        }
    }
    let w = &mut world.workers[wid.0 as usize];
    w.inside = true;
    w.pos = start;
    w.goal = Some(goal);
    w.task = task;
    w.path = Some(path);
    w.cursor = 0;
    w.dwell = 0;
    w.blocked = false;
    w.activity = WorkerActivity::Walking;
    w.behavior = crate::hir::BehaviorState::OnTrack;
    w.last_positions.clear();
    w.record_position(start);
    world.beliefs.insert(wid, belief);
    world.observed.insert(wid, Vec::new());
    world.emit(EventKind::WorkerDispatched {
        worker: wid,
        goal,
        encounter_ticks: encounters,
    });
    Ok(())
}

/// Releases a worker's task binding and sends it to the nearest exit.
pub(crate) fn send_worker_out(world: &mut World, wid: WorkerId) {
    let i = wid.0 as usize;
    if let Some(WorkerTask::Pick { task }) = world.workers[i].task {
        if world.wms.task(task).is_some_and(|t| t.status == TaskStatus::Open) {
            world.wms.bind_worker(task, None);
        }
        world.rack_locks.retain(|_, w| *w != wid);
    }
    let pos = world.workers[i].pos;
    let exit = world.nearest_exit(pos).unwrap_or(world.workers[i].entry);
    let goals = world.candidate_goals(exit, None);
    world.beliefs.insert(wid, GoalBelief::with_assigned(exit, goals));
    let w = &mut world.workers[i];
    w.task = None;
    w.goal = Some(exit);
    w.entry = exit;
    w.activity = WorkerActivity::Leaving;
    w.dwell = 0;
    w.blocked = true;
}

/// Blocked ticks after which a walking worker abandons the task and leaves.
const WORKER_GIVE_UP_TICKS: u32 = 40;

/// When a robot stands on a task worker's goal, picks another walkable node
/// next to the task (the worker's own node if it already is one). Returns the
/// goal to route to.
fn retarget_worker(world: &mut World, wid: WorkerId, goal: GridPos) -> GridPos {
    let i = wid.0 as usize;
    let w = &world.workers[i];
    if w.activity != WorkerActivity::Walking || !world.robots.iter().any(|r| r.pos == goal) {
        return goal;
    }
    let Some(node) = world.task_node(w.task.as_ref()) else { return goal };
    let pos = w.pos;
    let map = &world.map;
    let new_goal = if pos.is_adjacent(node) && map.is_walkable(pos) {
        Some(pos)
    } else {
        let field = map.distance_field(pos, |p| map.is_walkable(p));
        map.neighbors_iter(node)
            .filter(|&q| map.is_walkable(q) && !world.robots.iter().any(|r| r.pos == q))
            .filter_map(|q| field[map.index(q)].map(|d| (d, q)))
            .min()
            .map(|(_, q)| q)
    };
    let Some(new_goal) = new_goal else { return goal };
    let goals = world.candidate_goals(new_goal, Some(node));
    world.beliefs.insert(wid, GoalBelief::with_assigned(new_goal, goals));
    world.workers[i].goal = Some(new_goal);
    new_goal
}

/// Worker routing pass of phase 2: replans blocked workers and auto-dispatches
/// idle ones to waiting pre-pick tasks.
pub(crate) fn route_workers(world: &mut World, t: u64) {
    for i in 0..world.workers.len() {
        let w = &world.workers[i];
        if !w.inside || !w.blocked {
            continue;
        }
        let (wid, goal) = (w.id, w.goal);
        let Some(goal) = goal else {
            world.workers[i].blocked = false;
            continue;
        };
        let goal = retarget_worker(world, wid, goal);
        if world.workers[i].goal == Some(world.workers[i].pos) {
            let w = &mut world.workers[i];
            w.path = None;
            w.blocked = false;
            w.blocked_ticks = 0;
            continue;
        }
        if let Ok((path, _)) = route_worker(world, wid, goal, t) {
            let w = &mut world.workers[i];
            w.path = Some(path);
            w.cursor = 0;
            w.blocked = false;
            w.blocked_ticks = 0;
            continue;
        }
        let w = &mut world.workers[i];
        w.blocked_ticks += 1;
        if w.blocked_ticks >= WORKER_GIVE_UP_TICKS && w.activity == WorkerActivity::Walking {
            w.blocked_ticks = 0;
            send_worker_out(world, wid);
        }
    }
    if !world.auto_dispatch {
        return;
    }
    let mut queue: VecDeque<_> = world.unbound_prepick_tasks().into();
    while let Some(task) = queue.pop_front() {
        let Some(wid) = world
            .workers
            .iter()
            .find(|w| !w.inside && w.activity == WorkerActivity::Outside)
            .map(|w| w.id)
        else {
            break;
        };
        let Some(rack) = world.wms.task(task).map(|t| t.bin.rack) else { continue };
        let claimed = world.robots.iter().any(|r| r.job.as_ref().is_some_and(|j| j.command.rack == rack));
        let at_home = world.rack(rack).is_some_and(|k| k.location == RackLocation::Node { pos: k.home });
        if claimed || !at_home || world.rack_locks.contains_key(&rack) {
            continue;
        }
        let entry = world.workers[wid.0 as usize].entry;
        let home = world.rack(rack).expect("known rack").home;
        let Some(goal) = world.approach_node(home, entry) else { continue };
        let _ = dispatch_worker(world, wid, goal, Some(WorkerTask::Pick { task }));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{load_scenario, step};

    // Two robots in a 2-wide corridor; robot 0 heads east past robot 1.
    const CORRIDOR: &str = r#"
stop_when_done = false
[map]
layout = """
E.........
.........."""
[[robots]]
spawn = [0, 1]
[[robots]]
spawn = [5, 0]
"#;

    #[test]
    fn breaking_a_robot_reroutes_the_ones_crossing_it() {
        let mut world = World::new(&load_scenario(CORRIDOR).unwrap());
        world.robots[0].target = Some(GridPos::new(9, 1));
        world.robots[0].needs_plan = true;
        step(&mut world).unwrap();
        // Park robot 1 on robot 0's row, then break it there.
        let blocker = GridPos::new(5, 1);
        world.table.release_all(RobotId(1));
        world.robots[1].pos = blocker;
        world.table.park(RobotId(1), blocker, world.tick);
        world.robots[0].needs_plan = true;
        let t = world.tick;
        plan_robot(&mut world, RobotId(0), t).unwrap();
        let delta = replan_on_failure(&mut world, RobotId(1));
        assert!(world.robots[1].is_broken());
        assert!(world.robots[1].path.is_none());
        assert_eq!(world.table.free_forever_from(blocker, RobotId(0)), None);
        assert!(delta.replanned.iter().all(|&(_, ok)| ok));
        let path = world.robots[0].path.clone().unwrap();
        assert!(!path.steps().contains(&blocker));
        assert_eq!(path.goal(), GridPos::new(9, 1));
        assert!(world.pending_events().iter().any(|e| matches!(e.kind, EventKind::RobotBroken { .. })));
    }

    #[test]
    fn broken_robot_with_a_job_returns_its_command() {
        let text = "stop_when_done = false\n[map]\nlayout = \"E..R..P\"\n[[robots]]\nspawn = [1, 0]\n[inventory]\nfill_units_per_bin = 1\n[[orders.scheduled]]\ntick = 0\nlines = [{ product = \"p0-0-0\", quantity = 1 }]\n";
        let mut world = World::new(&load_scenario(text).unwrap());
        step(&mut world).unwrap();
        assert!(world.robots[0].job.is_some());
        let delta = replan_on_failure(&mut world, RobotId(0));
        assert!(delta.requeued.is_some());
        assert_eq!(world.pending_commands.len(), 1);
        assert!(world.robots[0].job.is_none());
    }
}
