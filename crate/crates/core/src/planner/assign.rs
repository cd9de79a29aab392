use std::collections::HashMap;

use crate::agents::Robot;
use crate::grid::{GridPos, WarehouseMap};
use crate::ids::{RackId, RobotId};
use crate::wms::RackCommand;

/// Greedy nearest-idle-robot matching. Commands are served in the given
/// order; each takes the idle robot with the fewest hops to the rack, lowest
/// id on ties. Commands whose rack is unavailable (`rack_node` gives `None`)
/// or that no idle robot can reach are left out of the result.
pub fn assign_tasks(
    map: &WarehouseMap,
    commands: &[RackCommand],
    robots: &[Robot],
    rack_node: impl Fn(RackId) -> Option<GridPos>,
) -> Vec<(RobotId, RackCommand)> {
    let mut free: Vec<&Robot> = robots.iter().filter(|r| r.is_idle()).collect();
    free.sort_by_key(|r| r.id);
    let mut fields: HashMap<GridPos, Vec<Option<u32>>> = HashMap::new();
    let mut out = Vec::new();
    for cmd in commands {
        if free.is_empty() {
            break;
        }
        let Some(at) = rack_node(cmd.rack) else { continue };
        let field = fields
            .entry(at)
            .or_insert_with(|| map.distance_field(at, |p| map.is_passable(p)));
        let best = free
            .iter()
            .enumerate()
            .filter_map(|(i, r)| field[map.index(r.pos)].map(|d| (d, r.id, i)))
            .min();
        if let Some((_, id, i)) = best {
            free.remove(i);
            out.push((id, cmd.clone()));
        }
    }
    out
}
