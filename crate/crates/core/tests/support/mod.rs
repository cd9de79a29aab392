//! Reference implementations used to check the library. Everything here is
//! written from the rules directly and shares no search code with the crate.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use rackfloor::grid::{parse_layout, GridPos, LayoutOptions, WarehouseMap};
use rackfloor::ids::RobotId;
use rackfloor::path::TimedPath;
use rackfloor::planner::ReservationTable;
use rackfloor::sim::World;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn in_map(map: &WarehouseMap, x: i64, y: i64) -> bool {
    x >= 0 && y >= 0 && x < map.width() as i64 && y < map.height() as i64
}

/// Four neighbors inside the map, in no particular order.
pub fn around(map: &WarehouseMap, p: GridPos) -> Vec<GridPos> {
    let (x, y) = (p.x as i64, p.y as i64);
    [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]
        .into_iter()
        .filter(|&(a, b)| in_map(map, a, b))
        .map(|(a, b)| GridPos::new(a as u32, b as u32))
        .collect()
}

/// Plain breadth-first hop count over cells accepted by `ok`.
pub fn bfs(map: &WarehouseMap, a: GridPos, b: GridPos, ok: impl Fn(GridPos) -> bool) -> Option<u32> {
    if !ok(a) || !ok(b) {
        return None;
    }
    let mut dist = vec![u32::MAX; (map.width() * map.height()) as usize];
    let idx = |p: GridPos| (p.y * map.width() + p.x) as usize;
    dist[idx(a)] = 0;
    let mut q = VecDeque::from([a]);
    while let Some(p) = q.pop_front() {
        if p == b {
            return Some(dist[idx(p)]);
        }
        for n in around(map, p) {
            if ok(n) && dist[idx(n)] == u32::MAX {
                dist[idx(n)] = dist[idx(p)] + 1;
                q.push_back(n);
            }
        }
    }
    None
}

pub fn passable_steps(map: &WarehouseMap, a: GridPos, b: GridPos) -> Option<u32> {
    bfs(map, a, b, |p| map.is_passable(p))
}

/// Where every reserved agent stands at `tick`, read straight from the holds.
pub fn robots_at(table: &ReservationTable, tick: u64) -> Vec<GridPos> {
    table
        .agents()
        .filter_map(|(_, h)| {
            h.path
                .as_ref()
                .and_then(|p| {
                    let i = tick.checked_sub(p.start_tick())? as usize;
                    p.steps().get(i).copied()
                })
                .or_else(|| h.park.and_then(|(p, from)| (tick >= from).then_some(p)))
        })
        .collect()
}

/// Last tick at which anything in the table still changes.
fn quiet_after(table: &ReservationTable) -> u64 {
    table
        .agents()
        .map(|(_, h)| {
            let a = h.path.as_ref().map_or(0, |p| p.start_tick() + p.steps().len() as u64 - 1);
            let b = h.park.map_or(0, |(_, t)| t);
            a.max(b)
        })
        .max()
        .unwrap_or(0)
}

fn other_holds(table: &ReservationTable, p: GridPos, t: u64, me: RobotId) -> bool {
    table.holder(p, t).is_some_and(|a| a != me)
}

fn swap_with_other(table: &ReservationTable, from: GridPos, to: GridPos, t: u64, me: RobotId) -> bool {
    from != to && table.edge_holder(to, from, t).is_some_and(|a| a != me)
}

/// Earliest arrival tick at `goal` over the time-expanded graph, where the
/// robot may wait, never enters a node another agent holds, never swaps with
/// one, and may only finish where nobody else comes afterwards.
pub fn earliest_arrival(
    map: &WarehouseMap,
    table: &ReservationTable,
    me: RobotId,
    start: GridPos,
    goal: GridPos,
    t0: u64,
    horizon: u64,
) -> Option<u64> {
    if !map.is_passable(start) || !map.is_passable(goal) {
        return None;
    }
    let quiet = quiet_after(table) + 1;
    let stays_free = |t: u64| (t..=quiet.max(t)).all(|k| !other_holds(table, goal, k, me));
    let mut layer: BTreeSet<GridPos> = BTreeSet::from([start]);
    for t in t0..=t0 + horizon {
        if layer.contains(&goal) && stays_free(t) {
            return Some(t);
        }
        let mut next = BTreeSet::new();
        for &p in &layer {
            for q in around(map, p).into_iter().chain([p]) {
                if !map.is_passable(q) || other_holds(table, q, t + 1, me) || swap_with_other(table, p, q, t, me) {
                    continue;
                }
                next.insert(q);
            }
        }
        if next.is_empty() {
            return None;
        }
        layer = next;
    }
    None
}

/// Fewest penalized ticks for a human walking `start → goal` within
/// `horizon` ticks, and the earliest arrival achieving that count. A tick is
/// penalized when the entered node is within `radius_m` of a robot.
pub fn min_encounters(
    map: &WarehouseMap,
    table: &ReservationTable,
    start: GridPos,
    goal: GridPos,
    t0: u64,
    horizon: u64,
    radius_m: f64,
) -> Option<(u32, u64)> {
    let s2 = map.spacing_m() * map.spacing_m();
    let near = |p: GridPos, t: u64| {
        robots_at(table, t).iter().any(|r| {
            let dx = p.x as f64 - r.x as f64;
            let dy = p.y as f64 - r.y as f64;
            (dx * dx + dy * dy) * s2 <= radius_m * radius_m
        })
    };
    let n = (map.width() * map.height()) as usize;
    let idx = |p: GridPos| (p.y * map.width() + p.x) as usize;
    let mut cost = vec![u32::MAX; n];
    cost[idx(start)] = 0;
    let mut best: Option<(u32, u64)> = None;
    for t in t0..=t0 + horizon {
        let c = cost[idx(goal)];
        if c != u32::MAX && best.is_none_or(|(b, _)| c < b) {
            best = Some((c, t));
        }
        if t == t0 + horizon {
            break;
        }
        let mut next = vec![u32::MAX; n];
        for i in 0..n {
            if cost[i] == u32::MAX {
                continue;
            }
            let p = GridPos::new(i as u32 % map.width(), i as u32 / map.width());
            for q in around(map, p).into_iter().chain([p]) {
                if !map.is_walkable(q) || table.holder(q, t + 1).is_some() {
                    continue;
                }
                if p != q && table.edge_holder(q, p, t).is_some() {
                    continue;
                }
                let c = cost[i] + near(q, t + 1) as u32;
                let j = idx(q);
                next[j] = next[j].min(c);
            }
        }
        cost = next;
    }
    best
}

/// Posterior over goals after a whole trajectory, computed in one product
/// from the prior. Unreachable goals get the `exp(-beta)` factor per move.
pub fn batch_posterior(map: &WarehouseMap, prior: &[f64], goals: &[GridPos], traj: &[GridPos], beta: f64) -> Vec<f64> {
    let mut w: Vec<f64> = prior.to_vec();
    for pair in traj.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a == b {
            continue;
        }
        for (k, &g) in goals.iter().enumerate() {
            let progress = match (passable_steps(map, a, g), passable_steps(map, b, g)) {
                (Some(x), Some(y)) => x as f64 - y as f64,
                _ => -1.0,
            };
            w[k] *= (beta * progress).exp();
        }
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// Robots an inside worker should see through racks: exact integer test on
/// squared half-meter offsets, 10 m to 20 m inclusive.
pub fn xray_members(world: &World, worker: GridPos) -> BTreeSet<RobotId> {
    assert_eq!(world.map.spacing_m(), 0.5);
    world
        .robots
        .iter()
        .filter(|r| {
            let dx = r.pos.x as i64 - worker.x as i64;
            let dy = r.pos.y as i64 - worker.y as i64;
            let d2 = dx * dx + dy * dy;
            (400..=1600).contains(&d2)
        })
        .map(|r| r.id)
        .collect()
}

/// A random floor of `w`×`h` with roughly `void` of it blocked.
pub fn random_floor<R: Rng>(rng: &mut R, w: u32, h: u32, void: f64) -> WarehouseMap {
    let rows: Vec<String> = (0..h)
        .map(|_| (0..w).map(|_| if rng.random::<f64>() < void { '#' } else { '.' }).collect())
        .collect();
    parse_layout(
        &rows.join("\n"),
        LayoutOptions {
            require_entry: false,
            ..Default::default()
        },
    )
    .unwrap()
}

fn pick<R: Rng, T: Copy>(rng: &mut R, xs: &[T]) -> T {
    xs[rng.random_range(0..xs.len())]
}

/// A random lazy walk of `len` ticks from `start`.
pub fn random_walk<R: Rng>(rng: &mut R, map: &WarehouseMap, start: GridPos, len: usize, t0: u64) -> TimedPath {
    let mut steps = vec![start];
    for _ in 0..len {
        let p = *steps.last().unwrap();
        let mut opts: Vec<GridPos> = around(map, p).into_iter().filter(|&q| map.is_passable(q)).collect();
        opts.push(p);
        steps.push(pick(rng, &opts));
    }
    TimedPath::new(t0, steps).unwrap()
}

/// Reserves up to `agents` random walks (ids 100..) and parks some of them.
pub fn random_table<R: Rng>(rng: &mut R, map: &WarehouseMap, agents: usize, max_len: usize) -> ReservationTable {
    let mut table = ReservationTable::new();
    let cells: Vec<GridPos> = map.positions().filter(|&p| map.is_passable(p)).collect();
    for i in 0..agents {
        let id = RobotId(100 + i as u32);
        let start = pick(rng, &cells);
        let len = rng.random_range(0..=max_len);
        let path = random_walk(rng, map, start, len, 0);
        if table.check_path(id, &path).is_some() {
            continue;
        }
        let (end, end_t) = (path.goal(), path.end_tick());
        table.reserve_path(id, path).unwrap();
        if rng.random_bool(0.5) && table.free_forever_from(end, id).is_some_and(|t| t <= end_t) {
            assert!(table.park(id, end, end_t).is_empty());
        }
    }
    table
}

pub struct PlanCase {
    pub map: WarehouseMap,
    pub table: ReservationTable,
    pub start: GridPos,
    pub goal: GridPos,
    pub t0: u64,
}

pub const PLANNED: RobotId = RobotId(1);

/// A small planning instance: floor at most 6×6, at most three reserved agents.
pub fn plan_case(seed: u64) -> PlanCase {
    let mut rng = rng(seed);
    loop {
        let (w, h) = (rng.random_range(2..=6), rng.random_range(2..=6));
        let map = random_floor(&mut rng, w, h, 0.2);
        let cells: Vec<GridPos> = map.positions().filter(|&p| map.is_passable(p)).collect();
        if cells.len() < 2 {
            continue;
        }
        let agents = rng.random_range(0..=3);
        let table = random_table(&mut rng, &map, agents, 10);
        let t0 = rng.random_range(0..=2);
        let free: Vec<GridPos> = cells.iter().copied().filter(|&p| table.holder(p, t0).is_none()).collect();
        if free.is_empty() {
            continue;
        }
        let start = pick(&mut rng, &free);
        let goal = pick(&mut rng, &cells);
        return PlanCase { map, table, start, goal, t0 };
    }
}

/// A human routing instance on a 5×5 to 7×7 floor with one to three robots.
pub fn human_case(seed: u64) -> PlanCase {
    let mut rng = rng(seed);
    loop {
        let n = rng.random_range(5..=7);
        let map = random_floor(&mut rng, n, n, 0.1);
        let cells: Vec<GridPos> = map.positions().filter(|&p| map.is_walkable(p)).collect();
        let agents = rng.random_range(1..=3);
        let table = random_table(&mut rng, &map, agents, 14);
        let free: Vec<GridPos> = cells.iter().copied().filter(|&p| table.holder(p, 0).is_none()).collect();
        if free.len() < 2 {
            continue;
        }
        let start = pick(&mut rng, &free);
        let goal = pick(&mut rng, &cells);
        if start == goal || passable_steps(&map, start, goal).is_none() {
            continue;
        }
        return PlanCase { map, table, start, goal, t0: 0 };
    }
}
