use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ar::ArFeedConfig;
use crate::error::ScenarioError;
use crate::grid::{parse_layout, GridPos, GridRect, LayoutOptions, NodeKind, WarehouseMap};
use crate::hir::HirConfig;
use crate::ids::{ProductId, RackId, StationId};
use crate::planner::PlannerConfig;
use crate::service::OperatorCommand;
use crate::vest::VestConfig;
use crate::wms::{BinRef, Inventory, OrderLine, PickMode};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    SafeLog,
    Legacy,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "safelog" => Ok(Mode::SafeLog),
            "legacy" => Ok(Mode::Legacy),
            other => Err(format!("unknown mode {other:?} (expected safelog or legacy)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    pub spawn: GridPos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RackSpec {
    pub home: GridPos,
    pub rows: Option<u32>,
    pub cols: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkerSpec {
    /// Defaults to the map's entry points in round-robin order.
    pub entry: Option<GridPos>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledOrder {
    pub tick: u64,
    #[serde(default)]
    pub station: StationId,
    #[serde(default)]
    pub mode: PickMode,
    pub lines: Vec<OrderLine>,
    pub due_tick: Option<u64>,
}

/// Random order generation plus explicitly scheduled orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrderStreamSpec {
    /// Mean Poisson arrivals per 1000 ticks.
    pub rate_per_1000_ticks: f64,
    /// Candidate products, drawn uniformly; empty means every stocked product.
    pub products: Vec<ProductId>,
    /// Fraction of generated orders placed as pre-pick.
    pub prepick_fraction: f64,
    pub max_lines: u32,
    pub max_quantity: u32,
    /// Additionally place one single-unit pre-pick order every this many
    /// ticks (0 disables).
    pub prepick_interval_ticks: u64,
    /// No generated orders at or after this tick.
    pub until_tick: Option<u64>,
    pub scheduled: Vec<ScheduledOrder>,
}

impl Default for OrderStreamSpec {
    fn default() -> Self {
        Self {
            rate_per_1000_ticks: 0.0,
            products: Vec::new(),
            prepick_fraction: 0.0,
            max_lines: 1,
            max_quantity: 1,
            prepick_interval_ticks: 0,
            until_tick: None,
            scheduled: Vec::new(),
        }
    }
}

impl OrderStreamSpec {
    /// True once no further orders can be generated at or after `tick`.
    pub fn exhausted_at(&self, tick: u64) -> bool {
        let generating = self.rate_per_1000_ticks > 0.0 || self.prepick_interval_ticks > 0;
        let open_ended = generating && self.until_tick.is_none_or(|u| tick < u);
        !open_ended && self.scheduled.iter().all(|o| o.tick < tick)
    }
}

/// An operator command applied at the boundary before step `tick`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedCommand {
    pub tick: u64,
    #[serde(flatten)]
    pub command: OperatorCommand,
}

/// Replaces planner output with random unreserved paths. Test-only knob for
/// exercising the vest as the sole safety layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultInjection {
    pub random_paths: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub tick_seconds: f64,
    pub robot_speed: f64,
    pub worker_speed: u32,
    pub lift_ticks: u32,
    pub drop_ticks: u32,
    pub pick_dwell_ticks: u32,
    pub repair_ticks: u32,
}

impl Default for Timing {
    fn default() -> Self {
        Self {
            tick_seconds: 0.5,
            robot_speed: 1.0,
            worker_speed: 1,
            lift_ticks: 4,
            drop_ticks: 4,
            pick_dwell_ticks: 6,
            repair_ticks: 40,
        }
    }
}

/// A fully resolved and validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub seed: u64,
    pub mode: Mode,
    pub timing: Timing,
    pub map: WarehouseMap,
    pub robots: Vec<GridPos>,
    pub racks: Vec<(RackId, GridPos, u32, u32)>,
    pub inventory: Inventory,
    pub stations: Vec<StationId>,
    pub orders: OrderStreamSpec,
    pub workers: Vec<GridPos>,
    pub auto_dispatch: bool,
    pub vest: VestConfig,
    pub hir: HirConfig,
    pub planner: PlannerConfig,
    pub ar: ArFeedConfig,
    pub metrics_interval: u64,
    pub max_ticks: Option<u64>,
    pub stop_when_done: bool,
    pub commands: Vec<ScriptedCommand>,
    pub fault_injection: Option<FaultInjection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MapSection {
    layout: Option<String>,
    file: Option<PathBuf>,
    spacing_m: Option<f64>,
    no_entry_zone: Option<[GridPos; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct InventorySection {
    /// Inline ingest records.
    records: Option<String>,
    file: Option<PathBuf>,
    /// Stock every bin of every rack with this many units of a per-bin
    /// product named `p<rack>-<row>-<col>`.
    fill_units_per_bin: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    mode: Mode,
    tick_seconds: Option<f64>,
    robot_speed: Option<f64>,
    worker_speed: Option<u32>,
    lift_ticks: Option<u32>,
    drop_ticks: Option<u32>,
    pick_dwell_ticks: Option<u32>,
    repair_ticks: Option<u32>,
    #[serde(default = "default_metrics_interval")]
    metrics_interval: u64,
    max_ticks: Option<u64>,
    #[serde(default = "yes")]
    stop_when_done: bool,
    #[serde(default)]
    map: MapSection,
    #[serde(default)]
    robots: Vec<RobotSpec>,
    racks: Option<Vec<RackSpec>>,
    #[serde(default = "default_rack_dim")]
    rack_rows: u32,
    #[serde(default = "default_rack_dim")]
    rack_cols: u32,
    #[serde(default)]
    inventory: InventorySection,
    stations: Option<Vec<StationId>>,
    #[serde(default)]
    orders: OrderStreamSpec,
    #[serde(default)]
    workers: Vec<WorkerSpec>,
    #[serde(default = "yes")]
    auto_dispatch: bool,
    #[serde(default)]
    vest: VestConfig,
    #[serde(default)]
    hir: HirConfig,
    #[serde(default)]
    planner: PlannerConfig,
    #[serde(default)]
    ar: ArFeedConfig,
    #[serde(default)]
    commands: Vec<ScriptedCommand>,
    fault_injection: Option<FaultInjection>,
}

fn default_metrics_interval() -> u64 {
    100
}

fn default_rack_dim() -> u32 {
    3
}

fn yes() -> bool {
    true
}

/// Where to find files referenced by a scenario, and CLI-level overrides.
#[derive(Debug, Clone, Default)]
pub struct ScenarioSources {
    /// Directory relative paths resolve against.
    pub base_dir: Option<PathBuf>,
    /// Layout text that replaces the scenario's own map.
    pub layout_override: Option<String>,
}

/// Parses and validates a scenario whose map and inventory are inline.
pub fn load_scenario(config_text: &str) -> Result<Scenario, ScenarioError> {
    load_scenario_with(config_text, &ScenarioSources::default())
}

pub fn load_scenario_file(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Parse(format!("{}: {e}", path.display())))?;
    load_scenario_with(
        &text,
        &ScenarioSources {
            base_dir: path.parent().map(Path::to_path_buf),
            layout_override: None,
        },
    )
}

pub fn load_scenario_with(config_text: &str, src: &ScenarioSources) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(config_text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    resolve(file, src)
}

fn read_ref(src: &ScenarioSources, p: &Path, key: &str) -> Result<String, ScenarioError> {
    let full = match &src.base_dir {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    };
    std::fs::read_to_string(&full).map_err(|e| ScenarioError::validation(key, format!("{}: {e}", full.display())))
}

fn resolve(f: ScenarioFile, src: &ScenarioSources) -> Result<Scenario, ScenarioError> {
    use ScenarioError as E;
    let d = Timing::default();
    let timing = Timing {
        tick_seconds: f.tick_seconds.unwrap_or(d.tick_seconds),
        robot_speed: f.robot_speed.unwrap_or(d.robot_speed),
        worker_speed: f.worker_speed.unwrap_or(d.worker_speed),
        lift_ticks: f.lift_ticks.unwrap_or(d.lift_ticks),
        drop_ticks: f.drop_ticks.unwrap_or(d.drop_ticks),
        pick_dwell_ticks: f.pick_dwell_ticks.unwrap_or(d.pick_dwell_ticks),
        repair_ticks: f.repair_ticks.unwrap_or(d.repair_ticks),
    };
    if !(timing.tick_seconds > 0.0) {
        return Err(E::validation("tick_seconds", "must be > 0"));
    }
    // Planned paths assume one node per tick; slower motion comes from the vest.
    if timing.robot_speed != 1.0 {
        return Err(E::validation("robot_speed", "only 1 node/tick is supported"));
    }
    if timing.worker_speed < 1 {
        return Err(E::validation("worker_speed", "must be >= 1"));
    }
    if f.metrics_interval == 0 {
        return Err(E::validation("metrics_interval", "must be >= 1"));
    }

    let layout = match (&src.layout_override, &f.map.layout, &f.map.file) {
        (Some(text), _, _) => text.clone(),
        (None, Some(text), _) => text.clone(),
        (None, None, Some(p)) => read_ref(src, p, "map.file")?,
        (None, None, None) => return Err(E::validation("map", "needs `layout` or `file`")),
    };
    let spacing_m = f.map.spacing_m.unwrap_or(crate::grid::DEFAULT_SPACING_M);
    if !(spacing_m > 0.0) {
        return Err(E::validation("map.spacing_m", "must be > 0"));
    }
    let map = parse_layout(
        &layout,
        LayoutOptions {
            require_entry: true,
            spacing_m,
        },
    )
    .map_err(|e| E::validation("map.layout", e.to_string()))?;
    let zone = f.map.no_entry_zone.map(|[a, b]| GridRect {
        min: GridPos::new(a.x.min(b.x), a.y.min(b.y)),
        max: GridPos::new(a.x.max(b.x), a.y.max(b.y)),
    });
    if let Some(z) = zone {
        if !map.in_bounds(z.max) {
            return Err(E::validation("map.no_entry_zone", "outside the map"));
        }
        if map.entry_points().iter().any(|&e| z.contains(e)) {
            return Err(E::validation("map.no_entry_zone", "covers an entry node"));
        }
    }
    let map = map.with_no_entry_zone(zone);

    let mut seen = HashSet::new();
    for (i, r) in f.robots.iter().enumerate() {
        let key = format!("robots[{i}].spawn");
        if !map.in_bounds(r.spawn) {
            return Err(E::validation(key, "out of bounds"));
        }
        if !map.is_passable(r.spawn) {
            return Err(E::validation(key, "spawn on a Void cell"));
        }
        if !seen.insert(r.spawn) {
            return Err(E::validation(key, format!("duplicate spawn node {}", r.spawn)));
        }
    }
    let robots: Vec<GridPos> = f.robots.iter().map(|r| r.spawn).collect();

    let racks: Vec<(RackId, GridPos, u32, u32)> = match &f.racks {
        Some(list) => {
            let mut homes = HashSet::new();
            let mut out = Vec::new();
            for (i, r) in list.iter().enumerate() {
                let key = format!("racks[{i}].home");
                if !map.in_bounds(r.home) || map.kind(r.home) != NodeKind::RackSlot {
                    return Err(E::validation(key, "must be a RackSlot node"));
                }
                if !homes.insert(r.home) {
                    return Err(E::validation(key, "duplicate rack home"));
                }
                let (rows, cols) = (r.rows.unwrap_or(f.rack_rows), r.cols.unwrap_or(f.rack_cols));
                if rows == 0 || cols == 0 {
                    return Err(E::validation(format!("racks[{i}]"), "bin grid must be non-empty"));
                }
                out.push((RackId(i as u32), r.home, rows, cols));
            }
            out
        }
        None => {
            if f.rack_rows == 0 || f.rack_cols == 0 {
                return Err(E::validation("rack_rows", "bin grid must be non-empty"));
            }
            map.nodes_of_kind(NodeKind::RackSlot)
                .enumerate()
                .map(|(i, p)| (RackId(i as u32), p, f.rack_rows, f.rack_cols))
                .collect()
        }
    };

    let mut inventory = match (&f.inventory.records, &f.inventory.file) {
        (Some(text), _) => Inventory::ingest(text).map_err(|e| E::validation("inventory.records", e.to_string()))?,
        (None, Some(p)) => {
            let text = read_ref(src, p, "inventory.file")?;
            Inventory::ingest(&text).map_err(|e| E::validation("inventory.file", e.to_string()))?
        }
        (None, None) => Inventory::new(),
    };
    if f.inventory.fill_units_per_bin > 0 {
        for &(rack, _, rows, cols) in &racks {
            for row in 0..rows {
                for col in 0..cols {
                    let product = format!("p{}-{row}-{col}", rack.0);
                    let desc = format!("Item {} at rack {} bin {row},{col}", product, rack.0);
                    inventory.add_units(&product, BinRef { rack, row, col }, f.inventory.fill_units_per_bin, &desc);
                }
            }
        }
    }
    for (bin, _) in inventory.bins() {
        let ok = racks
            .iter()
            .any(|&(id, _, rows, cols)| id == bin.rack && bin.row < rows && bin.col < cols);
        if !ok {
            return Err(E::validation(
                "inventory",
                format!("bin rack {} row {} col {} does not exist", bin.rack, bin.row, bin.col),
            ));
        }
    }

    let picking: Vec<GridPos> = map.nodes_of_kind(NodeKind::Picking).collect();
    let stations = match &f.stations {
        Some(ids) => {
            for (i, s) in ids.iter().enumerate() {
                if s.0 as usize >= picking.len() {
                    return Err(E::validation(format!("stations[{i}]"), "no such Picking node"));
                }
            }
            ids.clone()
        }
        None => (0..picking.len() as u32).map(StationId).collect(),
    };

    let o = &f.orders;
    if !(o.rate_per_1000_ticks >= 0.0) || !o.rate_per_1000_ticks.is_finite() {
        return Err(E::validation("orders.rate_per_1000_ticks", "must be a finite rate >= 0"));
    }
    if !(0.0..=1.0).contains(&o.prepick_fraction) {
        return Err(E::validation("orders.prepick_fraction", "must be in [0, 1]"));
    }
    if o.max_lines == 0 || o.max_quantity == 0 {
        return Err(E::validation("orders.max_lines", "line and quantity caps must be >= 1"));
    }
    if (o.rate_per_1000_ticks > 0.0 || o.prepick_interval_ticks > 0)
        && (stations.is_empty() || inventory.total_units() == 0)
    {
        return Err(E::validation("orders", "generated orders need stations and inventory"));
    }
    for (i, p) in o.products.iter().enumerate() {
        if !inventory.contains(p) {
            return Err(E::validation(format!("orders.products[{i}]"), format!("unknown product {p}")));
        }
    }
    for (i, s) in o.scheduled.iter().enumerate() {
        if !stations.contains(&s.station) {
            return Err(E::validation(format!("orders.scheduled[{i}].station"), "not a configured station"));
        }
        if s.lines.is_empty() {
            return Err(E::validation(format!("orders.scheduled[{i}].lines"), "must be non-empty"));
        }
        for (j, l) in s.lines.iter().enumerate() {
            if l.quantity == 0 {
                return Err(E::validation(format!("orders.scheduled[{i}].lines[{j}].quantity"), "must be >= 1"));
            }
            if !inventory.contains(&l.product) {
                return Err(E::validation(
                    format!("orders.scheduled[{i}].lines[{j}].product"),
                    format!("unknown product {}", l.product),
                ));
            }
        }
    }
    let mut orders = f.orders.clone();
    orders.scheduled.sort_by_key(|s| s.tick);

    let entries = map.entry_points();
    let mut workers = Vec::new();
    for (i, w) in f.workers.iter().enumerate() {
        let entry = w.entry.unwrap_or(entries[i % entries.len()]);
        if !entries.contains(&entry) {
            return Err(E::validation(format!("workers[{i}].entry"), "not an Entry node"));
        }
        workers.push(entry);
    }

    f.vest.validate().map_err(|(k, r)| E::validation(k, r))?;
    f.hir.validate().map_err(|(k, r)| E::validation(k, r))?;
    f.planner.validate().map_err(|(k, r)| E::validation(k, r))?;
    f.ar.validate().map_err(|(k, r)| E::validation(k, r))?;

    let mut commands = f.commands;
    commands.sort_by_key(|c| c.tick);

    Ok(Scenario {
        seed: f.seed,
        mode: f.mode,
        timing,
        map,
        robots,
        racks,
        inventory,
        stations,
        orders,
        workers,
        auto_dispatch: f.auto_dispatch,
        vest: f.vest,
        hir: f.hir,
        planner: f.planner,
        ar: f.ar,
        metrics_interval: f.metrics_interval,
        max_ticks: f.max_ticks,
        stop_when_done: f.stop_when_done,
        commands,
        fault_injection: f.fault_injection,
    })
}

/// Parses a JSON-lines command script (`{"tick": N, "kind": ...}` per line).
pub fn parse_command_script(text: &str) -> Result<Vec<ScriptedCommand>, ScenarioError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cmd: ScriptedCommand = serde_json::from_str(line)
            .map_err(|e| ScenarioError::validation(format!("commands[{i}]"), e.to_string()))?;
        out.push(cmd);
    }
    out.sort_by_key(|c| c.tick);
    Ok(out)
}

pub fn render_command_script(cmds: &[ScriptedCommand]) -> String {
    let mut out = String::new();
    for c in cmds {
        out.push_str(&serde_json::to_string(c).expect("commands serialize"));
        out.push('\n');
    }
    out
}

/// A one-unit station order, used by scripts and tests.
pub fn single_line(product: &str, quantity: u32) -> Vec<OrderLine> {
    vec![OrderLine {
        product: product.to_string(),
        quantity,
    }]
}
