//! Time-expanded A* over `(node, tick)` with wait actions.
//!
//! Once every reservation in the table has started (parks) or ended (paths),
//! the table no longer changes with time, so all ticks past that point are
//! folded into one layer. Earlier arrival at a node in that layer dominates
//! later arrival because the agent can always wait. This keeps searches
//! toward unreachable or far goals bounded by the map size.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rustc_hash::FxHashMap as HashMap;

use crate::error::PlanError;
use crate::grid::{grid_distance_m, GridPos, WarehouseMap};
use crate::ids::RobotId;
use crate::path::TimedPath;
use crate::planner::{PlannerConfig, ReservationTable};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    g: f64,
    seq: u64,
    node: usize,
    tick: u64,
}

impl Eq for Open {}

impl Ord for Open {
    // Min-heap on f, then deeper g, then insertion order.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Search<'a> {
    map: &'a WarehouseMap,
    t0: u64,
    deadline: u64,
    fold_at: u64,
    max_expansions: usize,
}

impl Search<'_> {
    fn key(&self, node: usize, tick: u64) -> (usize, u64) {
        (node, tick.min(self.fold_at))
    }

    /// Generic best-first search. `step_cost(from, to, tick)` prices the move
    /// leaving `from` at `tick`, or forbids it with `None`.
    fn run(
        &self,
        start: GridPos,
        heuristic: &[Option<u32>],
        is_goal: impl Fn(GridPos, u64) -> bool,
        mut step_cost: impl FnMut(GridPos, GridPos, u64) -> Option<f64>,
    ) -> Result<TimedPath, PlanError> {
        let map = self.map;
        let h = |p: GridPos| heuristic[map.index(p)].map(|d| d as f64);
        let Some(h0) = h(start) else {
            return Err(PlanError::NoPathWithinHorizon);
        };
        let mut open = BinaryHeap::new();
        let mut best_g: HashMap<(usize, u64), f64> = HashMap::default();
        let mut parent: HashMap<(usize, u64), (usize, u64)> = HashMap::default();
        let mut closed: HashMap<(usize, u64), ()> = HashMap::default();
        let mut seq = 0u64;
        let start_key = self.key(map.index(start), self.t0);
        best_g.insert(start_key, 0.0);
        open.push(Open {
            f: h0,
            g: 0.0,
            seq,
            node: map.index(start),
            tick: self.t0,
        });
        let mut expansions = 0usize;
        while let Some(cur) = open.pop() {
            let key = self.key(cur.node, cur.tick);
            if closed.contains_key(&key) {
                continue;
            }
            closed.insert(key, ());
            let pos = map.pos_of(cur.node);
            if is_goal(pos, cur.tick) {
                return Ok(self.rebuild(key, &parent, cur.tick));
            }
            expansions += 1;
            if expansions > self.max_expansions {
                return Err(PlanError::BudgetExceeded(self.max_expansions));
            }
            if cur.tick >= self.deadline {
                continue;
            }
            let next_tick = cur.tick + 1;
            for q in map.neighbors_iter(pos).chain(std::iter::once(pos)) {
                let Some(hq) = h(q) else { continue };
                let Some(c) = step_cost(pos, q, cur.tick) else {
                    continue;
                };
                let nk = self.key(map.index(q), next_tick);
                if closed.contains_key(&nk) {
                    continue;
                }
                let g = cur.g + c;
                if best_g.get(&nk).is_some_and(|&old| old <= g) {
                    continue;
                }
                best_g.insert(nk, g);
                parent.insert(nk, key);
                seq += 1;
                open.push(Open {
                    f: g + hq,
                    g,
                    seq,
                    node: map.index(q),
                    tick: next_tick,
                });
            }
        }
        Err(PlanError::NoPathWithinHorizon)
    }

    fn rebuild(
        &self,
        mut key: (usize, u64),
        parent: &HashMap<(usize, u64), (usize, u64)>,
        arrival: u64,
    ) -> TimedPath {
        let len = (arrival - self.t0 + 1) as usize;
        let mut steps = Vec::with_capacity(len);
        steps.push(self.map.pos_of(key.0));
        while steps.len() < len {
            key = parent[&key];
            steps.push(self.map.pos_of(key.0));
        }
        steps.reverse();
        TimedPath::new(self.t0, steps).expect("search emits adjacent steps")
    }
}

/// Shortest space-time path for a robot that avoids every other agent's node
/// holds, edge holds and head-on swaps. The goal is accepted only at a tick
/// from which it stays free for good, so the robot can remain there.
/// Does not touch the table.
pub fn search_robot_path(
    map: &WarehouseMap,
    table: &ReservationTable,
    agent: RobotId,
    start: GridPos,
    goal: GridPos,
    t0: u64,
    cfg: &PlannerConfig,
) -> Result<TimedPath, PlanError> {
    if !map.is_passable(start) || !map.is_passable(goal) {
        return Err(PlanError::InvalidEndpoint);
    }
    if table.free_forever_from(goal, agent).is_none() {
        return Err(PlanError::NoPathWithinHorizon);
    }
    let heuristic = map.distance_field(goal, |p| map.is_passable(p));
    search_robot_path_with(map, table, agent, start, goal, t0, cfg, &heuristic)
}

/// [`search_robot_path`] with a precomputed passable distance field to `goal`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn search_robot_path_with(
    map: &WarehouseMap,
    table: &ReservationTable,
    agent: RobotId,
    start: GridPos,
    goal: GridPos,
    t0: u64,
    cfg: &PlannerConfig,
    heuristic: &[Option<u32>],
) -> Result<TimedPath, PlanError> {
    if !map.is_passable(start) || !map.is_passable(goal) {
        return Err(PlanError::InvalidEndpoint);
    }
    let Some(goal_free) = table.free_forever_from(goal, agent) else {
        return Err(PlanError::NoPathWithinHorizon);
    };
    let search = Search {
        map,
        t0,
        deadline: t0 + cfg.horizon_ticks,
        fold_at: (table.static_after() + 1).max(goal_free),
        max_expansions: cfg.max_expansions,
    };
    search.run(
        start,
        heuristic,
        |p, t| p == goal && t >= goal_free,
        |from, to, t| (!table.move_conflicts(from, to, t, agent)).then_some(1.0),
    )
}

/// Per-tick proximity masks: node is within `radius_m` of some robot hold.
struct Proximity<'a> {
    map: &'a WarehouseMap,
    table: &'a ReservationTable,
    fold_at: u64,
    masks: HashMap<u64, Vec<bool>>,
    /// Grid offsets within `radius_m` of the origin.
    offsets: Vec<(i64, i64)>,
}

fn disc_offsets(radius_m: f64, spacing_m: f64) -> Vec<(i64, i64)> {
    let reach = (radius_m / spacing_m).floor() as i64 + 1;
    let origin = GridPos::new(reach as u32, reach as u32);
    let mut out = Vec::new();
    for y in 0..=2 * reach {
        for x in 0..=2 * reach {
            if grid_distance_m(GridPos::new(x as u32, y as u32), origin, spacing_m) <= radius_m {
                out.push((x - reach, y - reach));
            }
        }
    }
    out
}

impl Proximity<'_> {
    fn near(&mut self, p: GridPos, tick: u64) -> bool {
        let tick = tick.min(self.fold_at);
        let idx = self.map.index(p);
        if let Some(m) = self.masks.get(&tick) {
            return m[idx];
        }
        let mask = self.build(tick);
        let hit = mask[idx];
        self.masks.insert(tick, mask);
        hit
    }

    fn build(&self, tick: u64) -> Vec<bool> {
        let map = self.map;
        let mut mask = vec![false; map.node_count()];
        let (w, h) = (map.width() as i64, map.height() as i64);
        for (_, r) in self.table.positions_at(tick) {
            for &(dx, dy) in &self.offsets {
                let (x, y) = (r.x as i64 + dx, r.y as i64 + dy);
                if (0..w).contains(&x) && (0..h).contains(&y) {
                    mask[(y * w + x) as usize] = true;
                }
            }
        }
        mask
    }
}

/// Human route minimizing `sum over entered ticks of 1 + lambda * prox`, where
/// prox is 1 when any robot hold at that tick lies within the encounter
/// radius. Humans never step onto a node a robot holds at that tick nor swap
/// with one, and stay out of Void cells and the no-entry zone. Returns the
/// path and the number of penalized ticks (start tick excluded). The table is
/// read only: human routes are not reserved.
pub fn plan_human_path(
    map: &WarehouseMap,
    table: &ReservationTable,
    start: GridPos,
    goal: GridPos,
    t0: u64,
    cfg: &PlannerConfig,
) -> Result<(TimedPath, u32), PlanError> {
    if !map.in_bounds(start) || !map.is_passable(start) || !map.is_walkable(goal) {
        return Err(PlanError::InvalidEndpoint);
    }
    let heuristic = map.distance_field(goal, |p| map.is_walkable(p) || p == start);
    let fold_at = table.static_after() + 1;
    let mut prox = Proximity {
        map,
        table,
        fold_at,
        masks: HashMap::default(),
        offsets: disc_offsets(cfg.encounter_radius_m, map.spacing_m()),
    };
    let search = Search {
        map,
        t0,
        deadline: t0 + cfg.horizon_ticks,
        fold_at,
        max_expansions: cfg.max_expansions,
    };
    let lambda = cfg.lambda;
    let path = search.run(
        start,
        &heuristic,
        |p, _| p == goal,
        |from, to, t| {
            if table.holder(to, t + 1).is_some() {
                return None;
            }
            if from != to && table.edge_holder(to, from, t).is_some() {
                return None;
            }
            let penalty = if lambda > 0.0 && prox.near(to, t + 1) {
                lambda
            } else {
                0.0
            };
            Some(1.0 + penalty)
        },
    )?;
    let encounters = count_encounters(map, table, &path, cfg.encounter_radius_m);
    Ok((path, encounters))
}

/// Ticks after the start at which the path lies within `radius_m` of some
/// robot hold.
pub fn count_encounters(
    map: &WarehouseMap,
    table: &ReservationTable,
    path: &TimedPath,
    radius_m: f64,
) -> u32 {
    let t0 = path.start_tick();
    path.steps()
        .iter()
        .enumerate()
        .skip(1)
        .filter(|&(i, &p)| {
            table
                .positions_at(t0 + i as u64)
                .iter()
                .any(|&(_, r)| grid_distance_m(p, r, map.spacing_m()) <= radius_m)
        })
        .count() as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{parse_layout, LayoutOptions};

    fn map(text: &str) -> WarehouseMap {
        parse_layout(text, LayoutOptions { require_entry: false, ..Default::default() }).unwrap()
    }

    fn p(x: u32, y: u32) -> GridPos {
        GridPos::new(x, y)
    }

    #[test]
    fn waits_for_a_crossing_robot() {
        let m = map("#.#\n...\n#.#");
        let mut table = ReservationTable::new();
        let other = TimedPath::new(0, vec![p(1, 0), p(1, 1), p(1, 2)]).unwrap();
        table.reserve_path(RobotId(2), other).unwrap();
        table.park(RobotId(2), p(1, 2), 2);
        let path = search_robot_path(&m, &table, RobotId(1), p(0, 1), p(2, 1), 0, &PlannerConfig::default()).unwrap();
        assert_eq!(path.end_tick(), 3);
        assert_eq!(path.at(1), Some(p(0, 1)));
    }

    #[test]
    fn refuses_head_on_swaps() {
        // Nowhere to dodge: the only way through is a swap.
        let m = map("..");
        let mut table = ReservationTable::new();
        table.reserve_path(RobotId(2), TimedPath::new(0, vec![p(1, 0), p(0, 0)]).unwrap()).unwrap();
        let r = search_robot_path(&m, &table, RobotId(1), p(0, 0), p(1, 0), 0, &PlannerConfig::default());
        assert_eq!(r, Err(PlanError::NoPathWithinHorizon));
        // With a side cell the robot steps aside and goes around.
        let m = map("..\n..");
        let mut table = ReservationTable::new();
        let other = TimedPath::new(0, vec![p(1, 0), p(0, 0), p(0, 1)]).unwrap();
        table.reserve_path(RobotId(2), other).unwrap();
        let path = search_robot_path(&m, &table, RobotId(1), p(0, 0), p(1, 0), 0, &PlannerConfig::default()).unwrap();
        assert_eq!(path.steps(), &[p(0, 0), p(0, 1), p(1, 1), p(1, 0)]);
    }

    #[test]
    fn parked_goal_is_never_accepted() {
        let m = map("...");
        let mut table = ReservationTable::new();
        table.park(RobotId(2), p(2, 0), 0);
        let r = search_robot_path(&m, &table, RobotId(1), p(0, 0), p(2, 0), 0, &PlannerConfig::default());
        assert_eq!(r, Err(PlanError::NoPathWithinHorizon));
    }

    #[test]
    fn unreachable_goal_fails_fast_despite_a_long_horizon() {
        let m = map(".#.");
        let cfg = PlannerConfig { horizon_ticks: 1_000_000, max_expansions: 100, ..Default::default() };
        let r = search_robot_path(&m, &ReservationTable::new(), RobotId(1), p(0, 0), p(2, 0), 0, &cfg);
        assert_eq!(r, Err(PlanError::NoPathWithinHorizon));
    }

    #[test]
    fn human_detours_around_a_parked_robot() {
        let m = map(".....\n.....\n.....");
        let mut table = ReservationTable::new();
        table.park(RobotId(2), p(2, 0), 0);
        let cfg = PlannerConfig { encounter_radius_m: 0.5, ..Default::default() };
        let (path, enc) = plan_human_path(&m, &table, p(0, 0), p(4, 0), 0, &cfg).unwrap();
        assert_eq!(enc, 0);
        assert_eq!(path.end_tick(), 8);
        assert!(path.steps().iter().all(|q| grid_distance_m(*q, p(2, 0), 0.5) > 0.5));
        assert_eq!(count_encounters(&m, &table, &path, 0.5), 0);
    }

    #[test]
    fn disc_offsets_are_symmetric_and_closed() {
        let d = disc_offsets(1.0, 0.5);
        assert_eq!(d.len(), 13);
        assert!(d.contains(&(2, 0)) && d.contains(&(0, -2)) && !d.contains(&(2, 1)));
    }
}
