//! The fixed-phase tick.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::agents::{JobPhase, RackLocation, RobotState, SpeedClass, WorkerActivity, WorkerTask};
use crate::ar::{self, PickResult};
use crate::error::InvariantViolation;
use crate::grid::{grid_distance_m, GridPos};
use crate::hir::{classify_behavior_with, update_belief_with, BehaviorState};
use crate::ids::{RobotId, TaskId};
use crate::vest::{effective_speed, nodes_this_tick, vest_commands, SafetyCommand};
use crate::wms::{Order, OrderLine, PickMode, TaskStatus};

use super::events::{Event, EventKind, Picker};
use super::fms;
use super::world::World;

/// Ticks without robot progress before a livelock is reported.
pub const LIVELOCK_TICKS: u64 = 200;

/// Advances the world by one tick and returns the events stamped with the new
/// tick. Phases: WMS, FMS, HIR, vest, legacy override, motion and dwell,
/// metrics.
pub fn step(world: &mut World) -> Result<Vec<Event>, InvariantViolation> {
    let t = world.tick;
    if let Some(mode) = world.pending_mode.take() {
        world.mode = mode;
    }

    wms_phase(world, t);
    fms_phase(world, t);
    hir_phase(world);
    let cmds = vest_phase(world);
    legacy_phase(world);
    let progressed = motion_phase(world, t, &cmds);
    metrics_phase(world, t, progressed);

    world.tick = t + 1;
    let mut events = std::mem::take(&mut world.pending_events);
    for e in &mut events {
        e.tick = world.tick;
    }
    events.sort_by_key(|e| e.kind.order_key());
    world.log.extend(events.iter().cloned());
    if world.tick % world.metrics_interval == 0 {
        let mut snap = world.metrics.clone();
        snap.pick_completion_ticks.clear();
        world.series.rows.push((world.tick, snap));
    }
    world.check_invariants()?;
    world
        .table
        .check_invariants()
        .map_err(|what| InvariantViolation { tick: world.tick, what })?;
    Ok(events)
}

fn wms_phase(world: &mut World, t: u64) {
    let mut new_orders: Vec<(Vec<OrderLine>, crate::ids::StationId, PickMode, Option<u64>)> = Vec::new();
    while let Some(s) = world.orders.scheduled.get(world.next_scheduled) {
        if s.tick > t {
            break;
        }
        if s.tick == t {
            new_orders.push((s.lines.clone(), s.station, s.mode, s.due_tick));
        }
        world.next_scheduled += 1;
    }
    let generating = world.orders.until_tick.is_none_or(|u| t < u);
    if generating && world.orders.rate_per_1000_ticks > 0.0 {
        let lambda = world.orders.rate_per_1000_ticks / 1000.0;
        let n = Poisson::new(lambda).expect("positive rate").sample(&mut world.rng) as u64;
        for _ in 0..n {
            let mode = if world.rng.random_bool(world.orders.prepick_fraction) {
                PickMode::PrePick
            } else {
                PickMode::StationPick
            };
            let station = random_station(world);
            let nlines = world.rng.random_range(1..=world.orders.max_lines);
            let mut lines = Vec::new();
            for _ in 0..nlines {
                let qty = world.rng.random_range(1..=world.orders.max_quantity);
                if let Some(product) = random_product(world, qty) {
                    lines.push(OrderLine { product, quantity: qty });
                }
            }
            if !lines.is_empty() {
                new_orders.push((lines, station, mode, None));
            }
        }
    }
    let every = world.orders.prepick_interval_ticks;
    if generating && every > 0 && t > 0 && t % every == 0 {
        let station = random_station(world);
        if let Some(product) = random_product(world, 1) {
            new_orders.push((vec![OrderLine { product, quantity: 1 }], station, PickMode::PrePick, None));
        }
    }
    for (lines, station, mode, due_tick) in new_orders {
        let id = world.wms.next_order_id();
        let units = lines.iter().map(|l| l.quantity).sum();
        let order = Order {
            id,
            lines,
            station,
            created_tick: t,
            due_tick,
        };
        match world.wms.place_order(order, mode) {
            Ok(_) => world.emit(EventKind::OrderPlaced { order: id, mode, units }),
            Err(e) => world.record_rejection("PlaceOrder", &e.to_string()),
        }
    }
    let due = world.wms.next_commands(t);
    world.pending_commands.extend(due);
}

fn random_station(world: &mut World) -> crate::ids::StationId {
    let n = world.stations.len();
    if n == 0 {
        return crate::ids::StationId(0);
    }
    world.stations[world.rng.random_range(0..n)].id
}

/// Uniform draw from the product pool; when the drawn product lacks stock the
/// next ones in pool order are tried.
fn random_product(world: &mut World, qty: u32) -> Option<String> {
    let n = world.product_pool.len();
    if n == 0 {
        return None;
    }
    let start = world.rng.random_range(0..n);
    (0..n)
        .map(|k| &world.product_pool[(start + k) % n])
        .find(|p| world.wms.inventory.available(p) >= qty)
        .cloned()
}

fn fms_phase(world: &mut World, t: u64) {
    world.table.prune_before(t);
    if world.fault_injection.is_some_and(|f| f.random_paths) {
        fms::adversarial_paths(world, t);
    } else {
        if !world.fleet_halted() {
            fms::assign(world, t);
        }
        fms::advance_stations(world);
        fms::plan_robots(world, t);
    }
    fms::route_workers(world, t);
}

fn hir_phase(world: &mut World) {
    for i in 0..world.workers.len() {
        let w = &world.workers[i];
        if !w.inside {
            continue;
        }
        let wid = w.id;
        let Some(mut belief) = world.beliefs.get(&wid).cloned() else { continue };
        let seen = world.observed.insert(wid, Vec::new()).unwrap_or_default();
        for pair in seen.windows(2) {
            let (map, fields) = (&world.map, &mut world.fields);
            if let Ok(u) = update_belief_with(&belief, pair[0], pair[1], world.hir.beta, |a, b| fields.steps(map, a, b)) {
                belief = u.belief;
            }
        }
        let w = &world.workers[i];
        if w.last_positions.len() >= 2 {
            let task_open = match w.task {
                Some(WorkerTask::Pick { task }) => world.wms.task(task).is_some_and(|t| t.status == TaskStatus::Open),
                Some(WorkerTask::Repair { robot }) => world.robot(robot).is_some_and(|r| r.is_broken()),
                None => false,
            };
            let (map, fields) = (&world.map, &mut world.fields);
            let state = classify_behavior_with(&belief, w, &world.hir, map, w.goal, task_open, |a, b| {
                fields.steps(map, a, b)
            });
            world.workers[i].behavior = state;
            if state == BehaviorState::Emergency && !world.fleet_stop {
                world.fleet_stop = true;
                world.emit(EventKind::EmergencyStop { worker: wid });
            }
        }
        world.beliefs.insert(wid, belief);
    }
}

fn vest_phase(world: &mut World) -> BTreeMap<RobotId, SafetyCommand> {
    let workers: Vec<(crate::ids::WorkerId, GridPos)> = world.inside_workers().map(|w| (w.id, w.pos)).collect();
    let positions: Vec<GridPos> = workers.iter().map(|&(_, p)| p).collect();
    let robots: Vec<(RobotId, GridPos)> = world
        .robots
        .iter()
        .filter(|r| !r.is_broken())
        .map(|r| (r.id, r.pos))
        .collect();
    let spacing = world.map.spacing_m();
    let cmds = vest_commands(&positions, &robots, spacing, &world.vest, &mut world.rng);
    for &(id, pos) in &robots {
        let cmd = cmds[&id];
        let r = &mut world.robots[id.0 as usize];
        r.speed_class = match cmd {
            SafetyCommand::Stop => SpeedClass::Stopped,
            SafetyCommand::Slow => SpeedClass::Slow,
            SafetyCommand::NoConstraint => SpeedClass::Normal,
        };
        if cmd == SafetyCommand::NoConstraint {
            continue;
        }
        let (worker, d) = workers
            .iter()
            .map(|&(w, p)| (w, grid_distance_m(pos, p, spacing)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("a command implies a worker");
        if cmd == SafetyCommand::Stop {
            world.metrics.vest_stop_events += 1;
            world.emit(EventKind::VestStop { robot: id, worker, distance_m: d });
        } else {
            world.metrics.vest_slow_events += 1;
            world.emit(EventKind::VestSlow { robot: id, worker, distance_m: d });
        }
    }
    cmds
}

fn legacy_phase(world: &mut World) {
    if world.fleet_halted() {
        for r in &mut world.robots {
            r.speed_class = SpeedClass::Stopped;
        }
    }
}

/// Returns whether any robot made physical progress.
fn motion_phase(world: &mut World, t: u64, cmds: &BTreeMap<RobotId, SafetyCommand>) -> bool {
    let n = world.robots.len();
    let halted = world.fleet_halted();
    let allowed: Vec<u32> = world
        .robots
        .iter()
        .map(|r| {
            if r.is_broken() || halted {
                return 0;
            }
            let cmd = cmds.get(&r.id).copied().unwrap_or(SafetyCommand::NoConstraint);
            nodes_this_tick(effective_speed(world.timing.robot_speed, cmd, world.vest.slow_factor), t)
        })
        .collect();
    let stopped: Vec<bool> = world.robots.iter().map(|r| r.speed_class == SpeedClass::Stopped).collect();
    let pending: Vec<bool> = world.robots.iter().map(|r| r.has_pending_motion(t)).collect();
    let mut advanced = vec![false; n];

    for i in 0..n {
        if world.robots[i].is_broken() {
            continue;
        }
        if !stopped[i] {
            arrive(world, i, t);
        }
        advanced[i] = dwell(world, i, stopped[i]);
    }

    // Motion with an execution-level guard.
    let worker_nodes: BTreeSet<GridPos> = world.inside_workers().map(|w| w.pos).collect();
    let mut movers: BTreeMap<usize, GridPos> = (0..n)
        .filter(|&i| allowed[i] >= 1)
        .filter_map(|i| world.robots[i].planned_move(t).map(|q| (i, q)))
        .collect();
    let occupant: BTreeMap<GridPos, usize> = world.robots.iter().enumerate().map(|(i, r)| (r.pos, i)).collect();
    loop {
        let mut drop: BTreeSet<usize> = BTreeSet::new();
        let mut claimed: BTreeMap<GridPos, usize> = BTreeMap::new();
        for (&i, &q) in &movers {
            if worker_nodes.contains(&q) {
                drop.insert(i);
                continue;
            }
            if let Some(&o) = occupant.get(&q) {
                match movers.get(&o) {
                    None => {
                        drop.insert(i);
                    }
                    Some(&oq) if oq == world.robots[i].pos => {
                        drop.insert(i);
                        drop.insert(o);
                    }
                    _ => {}
                }
            }
            if let Some(&first) = claimed.get(&q) {
                drop.insert(i.max(first));
            } else {
                claimed.insert(q, i);
            }
        }
        if drop.is_empty() {
            break;
        }
        for i in drop {
            movers.remove(&i);
        }
    }
    for (&i, &q) in &movers {
        let r = &mut world.robots[i];
        let from = r.pos;
        r.pos = q;
        advanced[i] = true;
        let id = r.id;
        world.emit(EventKind::RobotMoved { robot: id, from, to: q });
    }
    for i in 0..n {
        if pending[i] && !advanced[i] {
            world.metrics.robot_downtime_ticks += 1;
        }
    }

    // Robots that fell behind their plan give it up and hold their node.
    let injected = world.fault_injection.is_some_and(|f| f.random_paths);
    let mut deviated: Vec<usize> = (0..n)
        .filter(|&i| {
            let r = &world.robots[i];
            r.path.as_ref().and_then(|p| p.at(t + 1)).is_some_and(|q| q != r.pos)
        })
        .collect();
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    while let Some(i) = deviated.pop() {
        if !seen.insert(i) {
            continue;
        }
        let id = world.robots[i].id;
        world.robots[i].path = None;
        if injected {
            continue;
        }
        world.table.release_path(id);
        if !world.robots[i].is_broken() {
            world.robots[i].needs_plan = world.robots[i].target.is_some();
        }
        let pos = world.robots[i].pos;
        for other in world.table.park(id, pos, t + 1) {
            deviated.push(other.0 as usize);
        }
        world.robots[i].refresh_state();
    }
    for r in &mut world.robots {
        if r.path.as_ref().is_some_and(|p| p.end_tick() <= t + 1) {
            r.path = None;
            r.refresh_state();
        }
    }

    workers_phase(world, t);
    advanced.iter().any(|&a| a)
}

/// Job transitions for a robot standing on its target with no motion left.
fn arrive(world: &mut World, i: usize, t: u64) {
    let r = &world.robots[i];
    if r.detour == Some(r.pos) && !r.path.as_ref().is_some_and(|p| p.at(t + 1).is_some()) {
        let r = &mut world.robots[i];
        r.detour = None;
        r.needs_plan = r.target.is_some();
        return;
    }
    let Some(target) = r.target else { return };
    if r.pos != target || r.path.as_ref().is_some_and(|p| p.at(t + 1).is_some()) || r.needs_plan {
        return;
    }
    let id = r.id;
    match r.phase() {
        None => world.robots[i].target = None,
        Some(JobPhase::FetchRack) => world.robots[i].set_phase(JobPhase::LiftAtRack),
        Some(JobPhase::ToStation) => {
            let sid = r.job.as_ref().expect("phase implies job").command.station;
            let holds = world.station(sid).is_some_and(|s| s.holder == Some(id) && s.pos == target);
            world.robots[i].set_phase(if holds {
                JobPhase::DropAtStation
            } else {
                JobPhase::AwaitStation
            });
        }
        Some(JobPhase::ReturnHome) => world.robots[i].set_phase(JobPhase::DropAtHome),
        Some(_) => {}
    }
}

/// Advances lift, drop and pick dwell. Returns whether anything progressed.
fn dwell(world: &mut World, i: usize, stopped: bool) -> bool {
    let Some(phase) = world.robots[i].phase() else { return false };
    let id = world.robots[i].id;
    let pos = world.robots[i].pos;
    let timing = world.timing;
    let actuating = matches!(
        phase,
        JobPhase::LiftAtRack | JobPhase::DropAtStation | JobPhase::LiftAtStation | JobPhase::DropAtHome
    );
    if actuating && stopped {
        return false;
    }
    let need = match phase {
        JobPhase::LiftAtRack | JobPhase::LiftAtStation => timing.lift_ticks,
        JobPhase::DropAtStation | JobPhase::DropAtHome => timing.drop_ticks,
        JobPhase::Picking => timing.pick_dwell_ticks,
        _ => return false,
    };
    let r = &mut world.robots[i];
    r.dwell += 1;
    if r.dwell < need && !(phase == JobPhase::Picking && r.job.as_ref().is_some_and(|j| j.remaining.is_empty())) {
        return true;
    }
    let rack = r.job.as_ref().expect("phase implies job").command.rack;
    match phase {
        JobPhase::LiftAtRack | JobPhase::LiftAtStation => {
            r.carrying = Some(rack);
            world.racks[rack.0 as usize].location = RackLocation::Robot { robot: id };
            world.emit(EventKind::RackLifted { robot: id, rack, at: pos });
            if phase == JobPhase::LiftAtRack {
                fms::route_to_station(world, id);
            } else {
                for s in &mut world.stations {
                    if s.holder == Some(id) {
                        s.holder = None;
                    }
                }
                let home = world.racks[rack.0 as usize].home;
                let r = &mut world.robots[i];
                r.target = Some(home);
                r.needs_plan = true;
                r.set_phase(JobPhase::ReturnHome);
            }
        }
        JobPhase::DropAtStation | JobPhase::DropAtHome => {
            r.carrying = None;
            world.racks[rack.0 as usize].location = RackLocation::Node { pos };
            world.emit(EventKind::RackDropped { robot: id, rack, at: pos });
            let r = &mut world.robots[i];
            if phase == JobPhase::DropAtStation {
                r.set_phase(JobPhase::Picking);
            } else {
                r.job = None;
                r.target = None;
                r.dwell = 0;
                r.state = RobotState::Idle;
            }
        }
        JobPhase::Picking => {
            r.dwell = 0;
            let next = r.job.as_mut().and_then(|j| j.remaining.pop_front());
            if let Some(task) = next {
                finish_pick(world, task, Picker::Station(id));
            }
            let r = &mut world.robots[i];
            if r.job.as_ref().is_some_and(|j| j.remaining.is_empty()) {
                r.set_phase(JobPhase::LiftAtStation);
            }
        }
        _ => {}
    }
    true
}

/// Closes a pick task, updates rack contents and metrics, and emits events.
pub(crate) fn finish_pick(world: &mut World, task: TaskId, by: Picker) -> bool {
    let tick = world.tick;
    let Some(pt) = world.wms.task(task).cloned() else { return false };
    let Some(done) = world.wms.complete_task(task, tick + 1) else { return false };
    if world.wms.inventory.units_at(&pt.product, pt.bin) == 0 {
        if let Some(bin) = world.racks.get_mut(pt.bin.rack.0 as usize).and_then(|r| r.bin_mut(pt.bin.row, pt.bin.col)) {
            bin.retain(|p| p != &pt.product);
        }
    }
    world.metrics.picks_completed += 1;
    world.metrics.pick_completion_ticks.push(done.waited_ticks);
    world.emit(EventKind::PickDone {
        task,
        order: pt.order,
        product: pt.product,
        by,
    });
    if done.order_done {
        world.metrics.orders_completed += 1;
        world.emit(EventKind::OrderDone { order: done.order });
    }
    true
}

fn workers_phase(world: &mut World, _t: u64) {
    let robot_nodes: BTreeSet<GridPos> = world.robots.iter().map(|r| r.pos).collect();
    for i in 0..world.workers.len() {
        if !world.workers[i].inside {
            continue;
        }
        let wid = world.workers[i].id;
        let at_end = {
            let w = &world.workers[i];
            w.path.as_ref().is_none_or(|p| w.cursor + 1 >= p.steps().len()) && Some(w.pos) == w.goal
        };
        match world.workers[i].activity {
            WorkerActivity::Walking if at_end => {
                let w = &mut world.workers[i];
                w.activity = if w.task.is_some() {
                    WorkerActivity::Working
                } else {
                    WorkerActivity::Standing
                };
                w.dwell = 0;
            }
            WorkerActivity::Leaving if at_end => {
                let w = &mut world.workers[i];
                w.inside = false;
                w.activity = WorkerActivity::Outside;
                w.path = None;
                w.goal = None;
                w.cursor = 0;
                w.behavior = BehaviorState::OnTrack;
                w.last_positions.clear();
                let at = w.pos;
                world.beliefs.remove(&wid);
                world.observed.remove(&wid);
                world.emit(EventKind::WorkerExited { worker: wid, at });
                continue;
            }
            _ => {}
        }
        match world.workers[i].activity {
            WorkerActivity::Working => work(world, i),
            WorkerActivity::Walking | WorkerActivity::Leaving => {
                let w = &mut world.workers[i];
                let mut trail = vec![w.pos];
                if let Some(path) = &w.path {
                    for _ in 0..w.speed {
                        let Some(&next) = path.steps().get(w.cursor + 1) else { break };
                        if next != w.pos && robot_nodes.contains(&next) {
                            w.blocked = true;
                            break;
                        }
                        w.cursor += 1;
                        if next != w.pos {
                            w.pos = next;
                            trail.push(next);
                        }
                    }
                    if w.cursor + 1 >= path.steps().len() && Some(w.pos) != w.goal {
                        w.blocked = true;
                    }
                } else if Some(w.pos) != w.goal {
                    w.blocked = true;
                }
                world.observed.entry(wid).or_default().extend(trail);
            }
            _ => {}
        }
        let w = &mut world.workers[i];
        if w.inside {
            let p = w.pos;
            w.record_position(p);
        }
    }
}

fn work(world: &mut World, i: usize) {
    let wid = world.workers[i].id;
    world.workers[i].dwell += 1;
    let dwell = world.workers[i].dwell;
    match world.workers[i].task {
        Some(WorkerTask::Pick { task }) => {
            if dwell < world.timing.pick_dwell_ticks {
                return;
            }
            let product = world.wms.task(task).map(|t| t.product.clone()).unwrap_or_default();
            match ar::confirm_pick(world, wid, &product) {
                Ok(PickResult::Success) | Err(_) => fms::send_worker_out(world, wid),
                Ok(PickResult::WrongItem) => {}
            }
        }
        Some(WorkerTask::Repair { robot }) => {
            if dwell < world.timing.repair_ticks {
                return;
            }
            repair(world, robot, Some(wid));
            fms::send_worker_out(world, wid);
        }
        None => world.workers[i].activity = WorkerActivity::Standing,
    }
}

/// Returns a broken robot to service; a carried rack job resumes.
pub(crate) fn repair(world: &mut World, robot: RobotId, by: Option<crate::ids::WorkerId>) {
    let Some(r) = world.robots.get_mut(robot.0 as usize) else { return };
    if !r.is_broken() {
        return;
    }
    r.state = RobotState::Idle;
    r.speed_class = SpeedClass::Normal;
    r.refresh_state();
    r.needs_plan = r.target.is_some();
    world.emit(EventKind::RobotRepaired { robot, worker: by });
}

fn metrics_phase(world: &mut World, t: u64, progressed: bool) {
    let m = &mut world.metrics;
    m.robot_ticks += world.robots.len() as u64;
    m.busy_robot_ticks += world.robots.iter().filter(|r| r.job.is_some()).count() as u64;
    let spacing = world.map.spacing_m();
    for w in world.workers.iter().filter(|w| w.inside) {
        let nearest = world
            .robots
            .iter()
            .map(|r| grid_distance_m(r.pos, w.pos, spacing))
            .min_by(f64::total_cmp);
        if let Some(d) = nearest {
            m.observe_distance(d);
            if d <= world.vest.slow_radius_m {
                m.encounter_ticks += 1;
            }
        }
    }
    let waiting = world.robots.iter().any(|r| r.has_pending_motion(t + 1));
    if progressed || world.fleet_halted() || !waiting {
        world.last_progress_tick = t + 1;
        world.livelock_reported = false;
    } else if t + 1 - world.last_progress_tick >= LIVELOCK_TICKS && !world.livelock_reported {
        world.livelock_reported = true;
        let stalled_ticks = t + 1 - world.last_progress_tick;
        world.emit(EventKind::LivelockSuspected { stalled_ticks });
    }
}
