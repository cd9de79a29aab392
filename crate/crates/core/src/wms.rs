//! Warehouse management: product locations, orders, pick tasks, and the
//! rack-to-station command queue handed to fleet management.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::WmsError;
use crate::ids::{OrderId, ProductId, RackId, StationId, TaskId, WorkerId};

/// One bin of one rack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BinRef {
    pub rack: RackId,
    pub row: u32,
    pub col: u32,
}

/// Product database: where every unit sits and what each product is.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Inventory {
    /// Physical units per product per bin. Inner map iterates in
    /// (rack, row, col) order.
    units: BTreeMap<ProductId, BTreeMap<BinRef, u32>>,
    /// Units promised to open tasks but not yet picked.
    allocated: BTreeMap<ProductId, BTreeMap<BinRef, u32>>,
    descriptions: BTreeMap<ProductId, String>,
}

impl Inventory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `product_id,rack_id,row,col,description` records, one unit per
    /// record. The description is everything after the fourth comma. Blank
    /// lines and lines starting with `#` are skipped.
    pub fn ingest(text: &str) -> Result<Self, WmsError> {
        let mut inv = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| WmsError::Ingest {
                line: i + 1,
                reason: reason.to_string(),
            };
            let mut fields = line.splitn(5, ',');
            let product = fields.next().map(str::trim).filter(|s| !s.is_empty());
            let product = product.ok_or_else(|| err("missing product id"))?;
            let mut num = |name: &str| -> Result<u32, WmsError> {
                fields
                    .next()
                    .ok_or_else(|| err(&format!("missing {name}")))?
                    .trim()
                    .parse()
                    .map_err(|_| err(&format!("bad {name}")))
            };
            let rack = RackId(num("rack_id")?);
            let row = num("row")?;
            let col = num("col")?;
            let description = fields.next().unwrap_or("").to_string();
            inv.add_units(product, BinRef { rack, row, col }, 1, &description);
        }
        Ok(inv)
    }

    pub fn add_units(&mut self, product: &str, bin: BinRef, count: u32, description: &str) {
        *self
            .units
            .entry(product.to_string())
            .or_default()
            .entry(bin)
            .or_default() += count;
        self.descriptions
            .entry(product.to_string())
            .or_insert_with(|| description.to_string());
    }

    pub fn contains(&self, product: &str) -> bool {
        self.units.contains_key(product)
    }

    pub fn products(&self) -> impl Iterator<Item = &ProductId> {
        self.units.keys()
    }

    pub fn description(&self, product: &str) -> Option<&str> {
        self.descriptions.get(product).map(String::as_str)
    }

    pub fn units_at(&self, product: &str, bin: BinRef) -> u32 {
        self.units
            .get(product)
            .and_then(|m| m.get(&bin))
            .copied()
            .unwrap_or(0)
    }

    fn allocated_at(&self, product: &str, bin: BinRef) -> u32 {
        self.allocated
            .get(product)
            .and_then(|m| m.get(&bin))
            .copied()
            .unwrap_or(0)
    }

    pub fn available_at(&self, product: &str, bin: BinRef) -> u32 {
        self.units_at(product, bin) - self.allocated_at(product, bin)
    }

    pub fn available(&self, product: &str) -> u32 {
        self.units
            .get(product)
            .map(|m| m.keys().map(|&b| self.available_at(product, b)).sum())
            .unwrap_or(0)
    }

    pub fn total_units(&self) -> u64 {
        self.units.values().flat_map(|m| m.values()).map(|&n| n as u64).sum()
    }

    /// All bins and the products they hold.
    pub fn bins(&self) -> BTreeMap<BinRef, BTreeSet<ProductId>> {
        let mut out: BTreeMap<BinRef, BTreeSet<ProductId>> = BTreeMap::new();
        for (product, bins) in &self.units {
            for (&bin, &n) in bins {
                if n > 0 {
                    out.entry(bin).or_default().insert(product.clone());
                }
            }
        }
        out
    }

    /// Lowest rack id, then lowest (row, col), among bins with an unallocated unit.
    pub fn locate_product(&self, product: &str) -> Result<BinRef, WmsError> {
        let bins = self
            .units
            .get(product)
            .ok_or_else(|| WmsError::UnknownProduct(product.to_string()))?;
        bins.keys()
            .copied()
            .find(|&b| self.available_at(product, b) > 0)
            .ok_or(WmsError::OutOfStock {
                product: product.to_string(),
                requested: 1,
                available: 0,
            })
    }

    fn allocate(&mut self, product: &str, bin: BinRef) {
        *self
            .allocated
            .entry(product.to_string())
            .or_default()
            .entry(bin)
            .or_default() += 1;
    }

    fn release(&mut self, product: &str, bin: BinRef) {
        if let Some(n) = self.allocated.get_mut(product).and_then(|m| m.get_mut(&bin)) {
            *n = n.saturating_sub(1);
        }
    }

    /// Removes one allocated unit from a bin.
    fn take(&mut self, product: &str, bin: BinRef) {
        self.release(product, bin);
        if let Some(n) = self.units.get_mut(product).and_then(|m| m.get_mut(&bin)) {
            *n = n.saturating_sub(1);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PickMode {
    /// Rack is carried to a picking station.
    #[default]
    #[serde(alias = "station", alias = "StationPick")]
    StationPick,
    /// A worker walks to the rack.
    #[serde(alias = "prepick", alias = "PrePick")]
    PrePick,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderLine {
    pub product: ProductId,
    pub quantity: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub id: OrderId,
    pub lines: Vec<OrderLine>,
    pub station: StationId,
    pub created_tick: u64,
    /// Delivery tick; defaults to `created_tick`.
    pub due_tick: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RackCommand {
    pub rack: RackId,
    pub station: StationId,
    pub due_tick: u64,
    pub order: OrderId,
    pub line: usize,
    pub tasks: Vec<TaskId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PickTarget {
    Station(StationId),
    /// Pre-pick; the worker is bound when dispatched.
    Worker(Option<WorkerId>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskStatus {
    Open,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PickTask {
    pub id: TaskId,
    pub target: PickTarget,
    pub bin: BinRef,
    pub product: ProductId,
    pub status: TaskStatus,
    pub order: OrderId,
    pub created_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct OrderRecord {
    order: Order,
    mode: PickMode,
    open_tasks: u32,
}

/// Outcome of completing a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completion {
    pub order: OrderId,
    pub order_done: bool,
    pub waited_ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wms {
    pub inventory: Inventory,
    stations: BTreeSet<StationId>,
    orders: BTreeMap<OrderId, OrderRecord>,
    tasks: BTreeMap<TaskId, PickTask>,
    /// Sorted by due tick; insertion order within equal ticks.
    queue: Vec<RackCommand>,
    next_task: u64,
    next_order: u64,
}

impl Wms {
    pub fn new(inventory: Inventory, stations: impl IntoIterator<Item = StationId>) -> Self {
        Self {
            inventory,
            stations: stations.into_iter().collect(),
            orders: BTreeMap::new(),
            tasks: BTreeMap::new(),
            queue: Vec::new(),
            next_task: 0,
            next_order: 0,
        }
    }

    /// The id [`Wms::next_order_id`] would hand out, without consuming it.
    pub fn peek_order_id(&self) -> OrderId {
        OrderId(self.next_order)
    }

    pub fn next_order_id(&mut self) -> OrderId {
        let id = OrderId(self.next_order);
        self.next_order += 1;
        id
    }

    pub fn stations(&self) -> &BTreeSet<StationId> {
        &self.stations
    }

    /// Explodes an order into one task per unit. Station orders also queue one
    /// rack command per (line, rack). Nothing changes on error.
    pub fn place_order(&mut self, order: Order, mode: PickMode) -> Result<Vec<PickTask>, WmsError> {
        if order.lines.is_empty() {
            return Err(WmsError::InvalidOrder(order.id.0, "no lines".into()));
        }
        if let Some(l) = order.lines.iter().find(|l| l.quantity == 0) {
            return Err(WmsError::InvalidOrder(
                order.id.0,
                format!("zero quantity for {}", l.product),
            ));
        }
        if self.orders.contains_key(&order.id) {
            return Err(WmsError::InvalidOrder(order.id.0, "duplicate id".into()));
        }
        if mode == PickMode::StationPick && !self.stations.contains(&order.station) {
            return Err(WmsError::UnknownStation(order.station.0));
        }
        // Check every line before allocating anything so a failure leaves no trace.
        let mut wanted: BTreeMap<&str, u32> = BTreeMap::new();
        for line in &order.lines {
            if !self.inventory.contains(&line.product) {
                return Err(WmsError::UnknownProduct(line.product.clone()));
            }
            *wanted.entry(&line.product).or_default() += line.quantity;
        }
        for (&product, &requested) in &wanted {
            let available = self.inventory.available(product);
            if available < requested {
                return Err(WmsError::OutOfStock {
                    product: product.to_string(),
                    requested,
                    available,
                });
            }
        }
        let mut picks: Vec<(usize, BinRef, ProductId)> = Vec::new();
        for (li, line) in order.lines.iter().enumerate() {
            for _ in 0..line.quantity {
                let bin = self.inventory.locate_product(&line.product)?;
                self.inventory.allocate(&line.product, bin);
                picks.push((li, bin, line.product.clone()));
            }
        }

        let due_tick = order.due_tick.unwrap_or(order.created_tick);
        let target = match mode {
            PickMode::StationPick => PickTarget::Station(order.station),
            PickMode::PrePick => PickTarget::Worker(None),
        };
        let mut created = Vec::with_capacity(picks.len());
        let mut commands: BTreeMap<(usize, RackId), Vec<TaskId>> = BTreeMap::new();
        for (li, bin, product) in picks {
            let id = TaskId(self.next_task);
            self.next_task += 1;
            let task = PickTask {
                id,
                target,
                bin,
                product,
                status: TaskStatus::Open,
                order: order.id,
                created_tick: order.created_tick,
            };
            if mode == PickMode::StationPick {
                commands.entry((li, bin.rack)).or_default().push(id);
            }
            self.tasks.insert(id, task.clone());
            created.push(task);
        }
        for ((line, rack), tasks) in commands {
            self.enqueue(RackCommand {
                rack,
                station: order.station,
                due_tick,
                order: order.id,
                line,
                tasks,
            });
        }
        self.next_order = self.next_order.max(order.id.0 + 1);
        self.orders.insert(
            order.id,
            OrderRecord {
                open_tasks: created.len() as u32,
                order,
                mode,
            },
        );
        Ok(created)
    }

    fn enqueue(&mut self, cmd: RackCommand) {
        let at = self.queue.partition_point(|c| c.due_tick <= cmd.due_tick);
        self.queue.insert(at, cmd);
    }

    /// Puts a command back at the head of its due-tick group.
    pub fn requeue_front(&mut self, cmd: RackCommand) {
        let at = self.queue.partition_point(|c| c.due_tick < cmd.due_tick);
        self.queue.insert(at, cmd);
    }

    /// Removes and returns every queued command due at or before `now`.
    pub fn next_commands(&mut self, now: u64) -> Vec<RackCommand> {
        let n = self.queue.partition_point(|c| c.due_tick <= now);
        self.queue.drain(..n).collect()
    }

    pub fn queued_commands(&self) -> &[RackCommand] {
        &self.queue
    }

    pub fn task(&self, id: TaskId) -> Option<&PickTask> {
        self.tasks.get(&id)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &PickTask> {
        self.tasks.values()
    }

    pub fn open_tasks(&self) -> impl Iterator<Item = &PickTask> {
        self.tasks.values().filter(|t| t.status == TaskStatus::Open)
    }

    pub fn order(&self, id: OrderId) -> Option<&Order> {
        self.orders.get(&id).map(|r| &r.order)
    }

    pub fn order_mode(&self, id: OrderId) -> Option<PickMode> {
        self.orders.get(&id).map(|r| r.mode)
    }

    pub fn open_order_count(&self) -> usize {
        self.orders.values().filter(|r| r.open_tasks > 0).count()
    }

    pub fn bind_worker(&mut self, task: TaskId, worker: Option<WorkerId>) {
        if let Some(t) = self.tasks.get_mut(&task) {
            if matches!(t.target, PickTarget::Worker(_)) {
                t.target = PickTarget::Worker(worker);
            }
        }
    }

    /// Marks an open task done and removes its unit from the bin. Returns
    /// `None` if the task is unknown or already done.
    pub fn complete_task(&mut self, id: TaskId, now: u64) -> Option<Completion> {
        let task = self.tasks.get_mut(&id)?;
        if task.status != TaskStatus::Open {
            return None;
        }
        task.status = TaskStatus::Done;
        let (product, bin, order, created) =
            (task.product.clone(), task.bin, task.order, task.created_tick);
        self.inventory.take(&product, bin);
        let rec = self.orders.get_mut(&order)?;
        rec.open_tasks -= 1;
        Some(Completion {
            order,
            order_done: rec.open_tasks == 0,
            waited_ticks: now.saturating_sub(created),
        })
    }
}
