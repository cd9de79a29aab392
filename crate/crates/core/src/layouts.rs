//! Generated layouts and scenarios: the 60×60 reference warehouse and seeded
//! random floors for fuzzing.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{GridPos, NodeKind};
use crate::sim::{load_scenario, Mode, Scenario};

fn render(kinds: &[Vec<NodeKind>]) -> String {
    kinds
        .iter()
        .map(|row| row.iter().map(|k| k.as_char()).collect::<String>())
        .collect::<Vec<_>>()
        .join("\n")
}

pub const REFERENCE_SIZE: u32 = 60;

/// 60×60 floor: rack blocks of 2×6 slots between one-node aisles, four
/// picking stations with three queue nodes each on the east wall, a charge
/// row on the south edge and two worker entries on the west wall.
pub fn reference_layout() -> String {
    let n = REFERENCE_SIZE as usize;
    let mut k = vec![vec![NodeKind::Navigation; n]; n];
    for (y, row) in k.iter_mut().enumerate() {
        for (x, cell) in row.iter_mut().enumerate() {
            let rack_row = (3..=55).contains(&y) && y % 3 != 0;
            let rack_col = (4..=51).contains(&x) && (x - 4) % 7 != 6;
            if rack_row && rack_col {
                *cell = NodeKind::RackSlot;
            }
        }
    }
    for &sy in &[10usize, 24, 38, 52] {
        k[sy][59] = NodeKind::Picking;
        for q in 1..=3 {
            k[sy - q][59] = NodeKind::Queue;
        }
    }
    for x in 6..=33 {
        k[59][x] = NodeKind::Charge;
    }
    k[10][0] = NodeKind::Entry;
    k[50][0] = NodeKind::Entry;
    render(&k)
}

/// The reference throughput scenario: 20 robots, a Poisson stream of station
/// orders, one worker sent in for a pre-pick every 500 ticks.
pub fn reference_scenario_toml(seed: u64, mode: Mode) -> String {
    let mode = match mode {
        Mode::SafeLog => "safelog",
        Mode::Legacy => "legacy",
    };
    let spawns: String = (0..20)
        .map(|i| format!("[[robots]]\nspawn = [{}, 59]\n", 7 + i))
        .collect();
    format!(
        r#"seed = {seed}
mode = "{mode}"
rack_rows = 2
rack_cols = 2

[map]
layout = """
{layout}"""
no_entry_zone = [[55, 0], [59, 59]]

{spawns}
[inventory]
fill_units_per_bin = 20

[orders]
rate_per_1000_ticks = 120.0
prepick_interval_ticks = 500

[[workers]]
entry = [0, 10]

[planner]
encounter_radius_m = 5.0
"#,
        layout = reference_layout(),
    )
}

pub fn reference_scenario(seed: u64, mode: Mode) -> Scenario {
    load_scenario(&reference_scenario_toml(seed, mode)).expect("reference scenario is valid")
}

/// Knobs for [`random_scenario`].
#[derive(Debug, Clone, Copy)]
pub struct RandomScenarioSpec {
    pub max_dim: u32,
    pub max_robots: u32,
    pub workers: u32,
    pub fault_injection: bool,
}

impl Default for RandomScenarioSpec {
    fn default() -> Self {
        Self {
            max_dim: 40,
            max_robots: 20,
            workers: 1,
            fault_injection: false,
        }
    }
}

/// A random connected floor of `w`×`h` (both ≥ 6) with one entry on the west
/// wall, one to three picking stations with queue nodes on the east wall,
/// scattered rack slots and a few void cells.
pub fn random_layout<R: Rng + ?Sized>(rng: &mut R, w: u32, h: u32) -> String {
    let (w, h) = (w.max(6) as usize, h.max(6) as usize);
    let mut k = vec![vec![NodeKind::Navigation; w]; h];
    for y in 1..h - 1 {
        for x in 2..w - 2 {
            let r: f64 = rng.random();
            k[y][x] = if r < 0.25 {
                NodeKind::RackSlot
            } else if r < 0.32 {
                NodeKind::Void
            } else if r < 0.35 {
                NodeKind::Charge
            } else {
                NodeKind::Navigation
            };
        }
    }
    let entry_y = rng.random_range(0..h);
    k[entry_y][0] = NodeKind::Entry;
    let stations = rng.random_range(1..=3usize).min(h / 3);
    for s in 0..stations {
        let y = 1 + s * (h - 2) / stations.max(1);
        let y = y.min(h - 1);
        k[y][w - 1] = NodeKind::Picking;
        if y + 1 < h && k[y + 1][w - 1] == NodeKind::Navigation {
            k[y + 1][w - 1] = NodeKind::Queue;
        }
    }
    // Void out anything the entry cannot reach.
    let mut seen = vec![vec![false; w]; h];
    let mut q = VecDeque::from([(0usize, entry_y)]);
    seen[entry_y][0] = true;
    while let Some((x, y)) = q.pop_front() {
        let mut nb = Vec::new();
        if y > 0 {
            nb.push((x, y - 1));
        }
        if x + 1 < w {
            nb.push((x + 1, y));
        }
        if y + 1 < h {
            nb.push((x, y + 1));
        }
        if x > 0 {
            nb.push((x - 1, y));
        }
        for (nx, ny) in nb {
            if !seen[ny][nx] && k[ny][nx] != NodeKind::Void {
                seen[ny][nx] = true;
                q.push_back((nx, ny));
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            if !seen[y][x] {
                k[y][x] = NodeKind::Void;
            }
        }
    }
    render(&k)
}

/// A seeded random scenario on a floor of up to `max_dim`×`max_dim` with up to
/// `max_robots` robots, a steady station order stream and periodic pre-picks.
pub fn random_scenario(seed: u64, spec: RandomScenarioSpec) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f100_7000_0001);
    let w = rng.random_range(8..=spec.max_dim.max(8));
    let h = rng.random_range(8..=spec.max_dim.max(8));
    let layout = random_layout(&mut rng, w, h);
    let map = crate::grid::parse_layout(&layout, Default::default()).expect("generated layout parses");
    let mut spots: Vec<GridPos> = map
        .positions()
        .filter(|&p| matches!(map.kind(p), NodeKind::Navigation | NodeKind::Charge) && p.x >= 1)
        .collect();
    let want = rng.random_range(1..=spec.max_robots.max(1)) as usize;
    let mut spawns = Vec::new();
    while spawns.len() < want && !spots.is_empty() {
        let i = rng.random_range(0..spots.len());
        spawns.push(spots.swap_remove(i));
    }
    let racks = map.nodes_of_kind(NodeKind::RackSlot).count();
    let robots: String = spawns
        .iter()
        .map(|p| format!("[[robots]]\nspawn = [{}, {}]\n", p.x, p.y))
        .collect();
    let workers: String = (0..spec.workers).map(|_| "[[workers]]\n").collect();
    let rate = rng.random_range(20.0..150.0f64);
    let orders = if racks > 0 {
        format!("[orders]\nrate_per_1000_ticks = {rate:.3}\nprepick_interval_ticks = 250\n")
    } else {
        String::new()
    };
    let fault = if spec.fault_injection {
        "[fault_injection]\nrandom_paths = true\n"
    } else {
        ""
    };
    let text = format!(
        r#"seed = {seed}
rack_rows = 2
rack_cols = 2
[map]
layout = """
{layout}"""
{robots}
[inventory]
fill_units_per_bin = 50
{orders}{workers}{fault}
[planner]
max_expansions = 200000
"#
    );
    load_scenario(&text).unwrap_or_else(|e| panic!("random scenario {seed} invalid: {e}\n{text}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{parse_layout, LayoutOptions};

    #[test]
    fn reference_layout_shape() {
        let map = parse_layout(&reference_layout(), LayoutOptions::default()).unwrap();
        assert_eq!((map.width(), map.height()), (60, 60));
        assert_eq!(map.entry_points().len(), 2);
        assert_eq!(map.nodes_of_kind(NodeKind::Picking).count(), 4);
        assert!(map.nodes_of_kind(NodeKind::RackSlot).count() > 500);
        let s = reference_scenario(1, Mode::SafeLog);
        assert_eq!(s.robots.len(), 20);
        assert_eq!(s.workers.len(), 1);
    }

    #[test]
    fn random_scenarios_are_valid_and_seeded() {
        for seed in 0..20 {
            let a = random_scenario(seed, RandomScenarioSpec::default());
            let b = random_scenario(seed, RandomScenarioSpec::default());
            assert_eq!(a, b);
            assert!(a.map.width() <= 40 && a.map.height() <= 40);
            assert!(a.robots.len() <= 20);
        }
    }
}
