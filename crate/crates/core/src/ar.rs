//! Per-worker guidance payloads for a head-mounted display: the path line,
//! distance to goal, near-goal arrow, robots seen through shelving, safety
//! circles, a minimap snapshot and pick-by-AR bin highlights. Geometry only.

use serde::{Deserialize, Serialize};

use crate::agents::{RackLocation, RobotState, WorkerTask};
use crate::error::FeedError;
use crate::grid::{grid_distance_m, GridPos, GridRect};
use crate::ids::{ProductId, RackId, RobotId, StationId, WorkerId};
use crate::sim::{Picker, World};
use crate::wms::TaskStatus;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArFeedConfig {
    pub xray_min_m: f64,
    pub xray_max_m: f64,
    pub near_goal_m: f64,
    pub show_safety_circles: bool,
}

impl Default for ArFeedConfig {
    fn default() -> Self {
        Self {
            xray_min_m: 10.0,
            xray_max_m: 20.0,
            near_goal_m: 2.0,
            show_safety_circles: true,
        }
    }
}

impl ArFeedConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.xray_min_m >= 0.0) {
            return Err(("ar.xray_min_m", "must be >= 0".into()));
        }
        if !(self.xray_max_m > self.xray_min_m) {
            return Err(("ar.xray_max_m", "must exceed ar.xray_min_m".into()));
        }
        if !(self.near_goal_m > 0.0) {
            return Err(("ar.near_goal_m", "must be > 0".into()));
        }
        Ok(())
    }

    /// Closed band membership.
    pub fn in_xray_band(&self, d: f64) -> bool {
        self.xray_min_m <= d && d <= self.xray_max_m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XrayRobot {
    pub robot_id: RobotId,
    pub position: GridPos,
    pub distance_m: f64,
    /// Remaining planned nodes, current node first.
    pub remaining_path: Vec<GridPos>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyCircles {
    pub center_m: (f64, f64),
    pub stop_radius_m: f64,
    pub slow_radius_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArGuidance {
    pub worker_id: WorkerId,
    /// Remaining path nodes in meters, current position first.
    pub path_polyline: Vec<(f64, f64)>,
    pub distance_to_goal_m: f64,
    /// Unit vector toward the goal once within `near_goal_m`. At the goal it
    /// points at the task's rack or robot, or is zero when there is none.
    pub near_goal_arrow: Option<(f64, f64)>,
    pub xray_robots: Vec<XrayRobot>,
    pub safety_circles: Option<SafetyCircles>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RackHighlight {
    pub rack_id: RackId,
    pub row: u32,
    pub col: u32,
    pub product_id: ProductId,
    pub description_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PickResult {
    Success,
    WrongItem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimapRobot {
    pub id: RobotId,
    pub pos: GridPos,
    pub state: RobotState,
    pub carrying: Option<RackId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimapWorker {
    pub id: WorkerId,
    pub pos: GridPos,
    pub inside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimapRack {
    pub id: RackId,
    pub location: RackLocation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationQueue {
    pub station: StationId,
    pub pos: GridPos,
    pub holder: Option<RobotId>,
    pub queue: Vec<RobotId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimapFrame {
    pub tick: u64,
    pub width: u32,
    pub height: u32,
    /// Layout rows in the layout-file alphabet.
    pub layout: Vec<String>,
    pub robots: Vec<MinimapRobot>,
    pub workers: Vec<MinimapWorker>,
    pub racks: Vec<MinimapRack>,
    pub station_queues: Vec<StationQueue>,
    pub no_entry_zone: Option<GridRect>,
}

fn unit(from: (f64, f64), to: (f64, f64)) -> (f64, f64) {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let n = dx.hypot(dy);
    if n == 0.0 {
        (0.0, 0.0)
    } else {
        (dx / n, dy / n)
    }
}

pub fn guidance(world: &World, worker_id: WorkerId, cfg: &ArFeedConfig) -> Result<ArGuidance, FeedError> {
    let w = world.worker(worker_id).ok_or(FeedError::UnknownWorker(worker_id.0))?;
    if !w.inside || w.path.is_none() {
        return Err(FeedError::NoActivePath(worker_id.0));
    }
    let map = &world.map;
    let spacing = map.spacing_m();
    let remaining = w.remaining_nodes();
    let path_polyline: Vec<(f64, f64)> = remaining.iter().map(|&p| map.to_meters(p)).collect();
    let distance_to_goal_m = (remaining.len().saturating_sub(1)) as f64 * spacing;
    let here = map.to_meters(w.pos);
    let near_goal_arrow = (distance_to_goal_m <= cfg.near_goal_m).then(|| {
        let goal = remaining.last().copied().unwrap_or(w.pos);
        if goal != w.pos {
            unit(here, map.to_meters(goal))
        } else {
            match world.task_node(w.task.as_ref()) {
                Some(t) => unit(here, map.to_meters(t)),
                None => (0.0, 0.0),
            }
        }
    });
    let xray_robots = world
        .robots
        .iter()
        .filter_map(|r| {
            let d = grid_distance_m(r.pos, w.pos, spacing);
            cfg.in_xray_band(d).then(|| XrayRobot {
                robot_id: r.id,
                position: r.pos,
                distance_m: d,
                remaining_path: r
                    .path
                    .as_ref()
                    .map(|p| p.remaining_nodes(world.tick))
                    .unwrap_or_else(|| vec![r.pos]),
            })
        })
        .collect();
    let safety_circles = cfg.show_safety_circles.then_some(SafetyCircles {
        center_m: here,
        stop_radius_m: world.vest.stop_radius_m,
        slow_radius_m: world.vest.slow_radius_m,
    });
    Ok(ArGuidance {
        worker_id,
        path_polyline,
        distance_to_goal_m,
        near_goal_arrow,
        xray_robots,
        safety_circles,
    })
}

pub fn minimap_frame(world: &World) -> MinimapFrame {
    MinimapFrame {
        tick: world.tick,
        width: world.map.width(),
        height: world.map.height(),
        layout: world.map.to_layout_string().lines().map(str::to_string).collect(),
        robots: world
            .robots
            .iter()
            .map(|r| MinimapRobot {
                id: r.id,
                pos: r.pos,
                state: r.state,
                carrying: r.carrying,
            })
            .collect(),
        workers: world
            .workers
            .iter()
            .map(|w| MinimapWorker {
                id: w.id,
                pos: w.pos,
                inside: w.inside,
            })
            .collect(),
        racks: world
            .racks
            .iter()
            .map(|k| MinimapRack {
                id: k.id,
                location: k.location,
            })
            .collect(),
        station_queues: world
            .stations
            .iter()
            .map(|s| StationQueue {
                station: s.id,
                pos: s.pos,
                holder: s.holder,
                queue: s.queue.iter().copied().collect(),
            })
            .collect(),
        no_entry_zone: world.map.no_entry_zone(),
    }
}

/// The open pick task a worker holds, with its rack node.
fn open_pick(world: &World, worker_id: WorkerId) -> Result<(crate::wms::PickTask, GridPos), FeedError> {
    let w = world.worker(worker_id).ok_or(FeedError::UnknownWorker(worker_id.0))?;
    let Some(WorkerTask::Pick { task }) = w.task else {
        return Err(FeedError::NoActivePickTask(worker_id.0));
    };
    let t = world
        .wms
        .task(task)
        .filter(|t| t.status == TaskStatus::Open)
        .ok_or(FeedError::NoActivePickTask(worker_id.0))?;
    let node = world.rack_pos(t.bin.rack).ok_or(FeedError::NotAtRack(worker_id.0))?;
    if !w.inside || w.pos.manhattan(node) > 1 {
        return Err(FeedError::NotAtRack(worker_id.0));
    }
    Ok((t.clone(), node))
}

pub fn pick_highlight(world: &World, worker_id: WorkerId) -> Result<RackHighlight, FeedError> {
    let (t, _) = open_pick(world, worker_id)?;
    Ok(RackHighlight {
        rack_id: t.bin.rack,
        row: t.bin.row,
        col: t.bin.col,
        description_text: world.wms.inventory.description(&t.product).unwrap_or_default().to_string(),
        product_id: t.product,
    })
}

/// Scans an item for the worker's open pick. A match closes the task and
/// removes the unit; a mismatch changes nothing.
pub fn confirm_pick(world: &mut World, worker_id: WorkerId, scanned_product_id: &str) -> Result<PickResult, FeedError> {
    let (t, _) = open_pick(world, worker_id)?;
    let w = world.worker(worker_id).expect("checked");
    if w.dwell < world.timing.pick_dwell_ticks {
        return Err(FeedError::DwellIncomplete(worker_id.0));
    }
    if scanned_product_id != t.product {
        return Ok(PickResult::WrongItem);
    }
    crate::sim::finish_pick(world, t.id, Picker::Worker(worker_id));
    world.rack_locks.retain(|_, w| *w != worker_id);
    Ok(PickResult::Success)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service::{apply_command, GoalRef, OperatorCommand};
    use crate::sim::{load_scenario, step};

    fn world() -> World {
        let row = ".".repeat(59);
        let text = format!(
            "stop_when_done = false\n[map]\nlayout = \"\"\"\nE{row}\n.{row}\"\"\"\n[[robots]]\nspawn = [25, 1]\n[[robots]]\nspawn = [45, 0]\n[[robots]]\nspawn = [59, 1]\n[[workers]]\n"
        );
        World::new(&load_scenario(&text).unwrap())
    }

    #[test]
    fn outside_worker_has_no_guidance() {
        let w = world();
        assert_eq!(guidance(&w, WorkerId(0), &w.ar).unwrap_err(), FeedError::NoActivePath(0));
        assert_eq!(guidance(&w, WorkerId(4), &w.ar).unwrap_err(), FeedError::UnknownWorker(4));
    }

    #[test]
    fn guidance_follows_the_route() {
        let mut w = world();
        let cmd = OperatorCommand::DispatchWorker {
            worker_id: WorkerId(0),
            goal: GoalRef::Node { node: GridPos::new(4, 0) },
            task: Default::default(),
        };
        apply_command(&mut w, &cmd).unwrap();
        step(&mut w).unwrap();
        let g = guidance(&w, WorkerId(0), &w.ar).unwrap();
        assert_eq!(g.path_polyline.first(), Some(&w.map.to_meters(w.workers[0].pos)));
        assert_eq!(g.distance_to_goal_m, (g.path_polyline.len() - 1) as f64 * 0.5);
        assert!(g.near_goal_arrow.is_some());
        // From (1, 0) robot 0 is about 12 m off, robot 1 is 22 m off.
        let ids: Vec<RobotId> = g.xray_robots.iter().map(|r| r.robot_id).collect();
        assert_eq!(ids, vec![RobotId(0)]);
    }

    #[test]
    fn band_is_closed() {
        let cfg = ArFeedConfig::default();
        assert!(cfg.in_xray_band(10.0) && cfg.in_xray_band(20.0));
        assert!(!cfg.in_xray_band(9.999) && !cfg.in_xray_band(20.001));
    }

    #[test]
    fn minimap_mirrors_the_world() {
        let w = world();
        let m = minimap_frame(&w);
        assert_eq!((m.width, m.height), (60, 2));
        assert_eq!(m.layout.len(), 2);
        assert_eq!(m.robots.len(), 3);
        assert!(m.workers.iter().all(|k| !k.inside));
    }
}
