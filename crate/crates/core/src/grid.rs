//! Ground-node grid: node taxonomy, layout parsing and basic graph queries.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::LayoutError;

/// Default distance between adjacent floor markers, in meters.
pub const DEFAULT_SPACING_M: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Navigation,
    RackSlot,
    Charge,
    Queue,
    Picking,
    Entry,
    Void,
}

impl NodeKind {
    pub fn from_char(c: char) -> Option<Self> {
        Some(match c {
            '.' => NodeKind::Navigation,
            'R' => NodeKind::RackSlot,
            'C' => NodeKind::Charge,
            'Q' => NodeKind::Queue,
            'P' => NodeKind::Picking,
            'E' => NodeKind::Entry,
            '#' => NodeKind::Void,
            _ => return None,
        })
    }

    pub fn as_char(self) -> char {
        match self {
            NodeKind::Navigation => '.',
            NodeKind::RackSlot => 'R',
            NodeKind::Charge => 'C',
            NodeKind::Queue => 'Q',
            NodeKind::Picking => 'P',
            NodeKind::Entry => 'E',
            NodeKind::Void => '#',
        }
    }
}

/// A ground node address. `x` is the column, `y` the row (row 0 is the first
/// line of the layout file).
/// Serialized as a `[x, y]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct GridPos {
    pub x: u32,
    pub y: u32,
}

impl GridPos {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: GridPos) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    pub fn is_adjacent(self, other: GridPos) -> bool {
        self.manhattan(other) == 1
    }
}

impl From<[u32; 2]> for GridPos {
    fn from([x, y]: [u32; 2]) -> Self {
        Self { x, y }
    }
}

impl From<GridPos> for [u32; 2] {
    fn from(p: GridPos) -> Self {
        [p.x, p.y]
    }
}

impl fmt::Display for GridPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

/// Inclusive axis-aligned rectangle of nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridRect {
    pub min: GridPos,
    pub max: GridPos,
}

impl GridRect {
    pub fn contains(&self, p: GridPos) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarehouseMap {
    width: u32,
    height: u32,
    kinds: Vec<NodeKind>,
    spacing_m: f64,
    entry_points: Vec<GridPos>,
    no_entry_zone: Option<GridRect>,
}

/// Options for [`parse_layout`].
#[derive(Debug, Clone, Copy)]
pub struct LayoutOptions {
    /// Reject layouts without any `E` cell.
    pub require_entry: bool,
    pub spacing_m: f64,
}

impl Default for LayoutOptions {
    fn default() -> Self {
        Self {
            require_entry: true,
            spacing_m: DEFAULT_SPACING_M,
        }
    }
}

/// Parses the plain-text layout format: one character per node, rows separated
/// by `\n`, trailing newline optional.
pub fn parse_layout(text: &str, opts: LayoutOptions) -> Result<WarehouseMap, LayoutError> {
    if !(opts.spacing_m > 0.0) {
        return Err(LayoutError::BadSpacing(opts.spacing_m));
    }
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Err(LayoutError::Empty);
    }
    let mut width = None;
    let mut kinds = Vec::new();
    let mut height = 0u32;
    for (row, line) in body.split('\n').enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        let mut count = 0u32;
        for (col, c) in line.chars().enumerate() {
            let kind = NodeKind::from_char(c).ok_or(LayoutError::UnknownCharacter {
                ch: c,
                row: row as u32,
                col: col as u32,
            })?;
            kinds.push(kind);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(LayoutError::RaggedLayout {
                    row: row as u32,
                    expected: w,
                    found: count,
                })
            }
            _ => {}
        }
        height += 1;
    }
    let width = width.unwrap_or(0);
    if width == 0 {
        return Err(LayoutError::Empty);
    }
    let map = WarehouseMap::from_kinds(width, height, kinds, opts.spacing_m)?;
    if opts.require_entry && map.entry_points.is_empty() {
        return Err(LayoutError::NoEntryNode);
    }
    Ok(map)
}

impl WarehouseMap {
    /// Builds a map from a row-major kind grid. Entry points are collected from
    /// `Entry` cells, which must lie on the boundary.
    pub fn from_kinds(
        width: u32,
        height: u32,
        kinds: Vec<NodeKind>,
        spacing_m: f64,
    ) -> Result<Self, LayoutError> {
        if kinds.len() != (width as usize) * (height as usize) {
            return Err(LayoutError::SizeMismatch {
                expected: (width as usize) * (height as usize),
                found: kinds.len(),
            });
        }
        if !(spacing_m > 0.0) {
            return Err(LayoutError::BadSpacing(spacing_m));
        }
        let mut entry_points = Vec::new();
        for y in 0..height {
            for x in 0..width {
                if kinds[(y * width + x) as usize] == NodeKind::Entry {
                    if x != 0 && y != 0 && x + 1 != width && y + 1 != height {
                        return Err(LayoutError::InteriorEntry(GridPos::new(x, y)));
                    }
                    entry_points.push(GridPos::new(x, y));
                }
            }
        }
        Ok(Self {
            width,
            height,
            kinds,
            spacing_m,
            entry_points,
            no_entry_zone: None,
        })
    }

    pub fn with_no_entry_zone(mut self, zone: Option<GridRect>) -> Self {
        self.no_entry_zone = zone;
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn spacing_m(&self) -> f64 {
        self.spacing_m
    }

    pub fn entry_points(&self) -> &[GridPos] {
        &self.entry_points
    }

    pub fn no_entry_zone(&self) -> Option<GridRect> {
        self.no_entry_zone
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn in_bounds(&self, p: GridPos) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub fn index(&self, p: GridPos) -> usize {
        (p.y * self.width + p.x) as usize
    }

    pub fn pos_of(&self, index: usize) -> GridPos {
        GridPos::new(index as u32 % self.width, index as u32 / self.width)
    }

    /// Kind of an in-bounds node. Panics when out of bounds.
    pub fn kind(&self, p: GridPos) -> NodeKind {
        self.kinds[self.index(p)]
    }

    pub fn get(&self, p: GridPos) -> Option<NodeKind> {
        self.in_bounds(p).then(|| self.kind(p))
    }

    pub fn is_passable(&self, p: GridPos) -> bool {
        matches!(self.get(p), Some(k) if k != NodeKind::Void)
    }

    /// Passable for a human: not Void and outside the no-entry zone.
    pub fn is_walkable(&self, p: GridPos) -> bool {
        self.is_passable(p) && !self.no_entry_zone.is_some_and(|z| z.contains(p))
    }

    pub fn positions(&self) -> impl Iterator<Item = GridPos> + '_ {
        (0..self.kinds.len()).map(|i| self.pos_of(i))
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = GridPos> + '_ {
        self.positions().filter(move |&p| self.kind(p) == kind)
    }

    /// Re-serializes to the layout text format (no trailing newline).
    pub fn to_layout_string(&self) -> String {
        let mut out = String::with_capacity(self.kinds.len() + self.height as usize);
        for y in 0..self.height {
            if y > 0 {
                out.push('\n');
            }
            for x in 0..self.width {
                out.push(self.kind(GridPos::new(x, y)).as_char());
            }
        }
        out
    }

    /// World coordinates of a node in meters.
    pub fn to_meters(&self, p: GridPos) -> (f64, f64) {
        (p.x as f64 * self.spacing_m, p.y as f64 * self.spacing_m)
    }

    /// 4-connected non-Void neighbors in fixed N, E, S, W order.
    pub fn neighbors(&self, p: GridPos) -> Result<Vec<GridPos>, LayoutError> {
        if !self.in_bounds(p) {
            return Err(LayoutError::OutOfBounds(p));
        }
        Ok(self.neighbors_iter(p).collect())
    }

    /// Same as [`neighbors`](Self::neighbors) without the bounds check on `p`.
    pub fn neighbors_iter(&self, p: GridPos) -> impl Iterator<Item = GridPos> + '_ {
        let candidates = [
            (p.y > 0).then(|| GridPos::new(p.x, p.y - 1)),
            Some(GridPos::new(p.x + 1, p.y)),
            Some(GridPos::new(p.x, p.y + 1)),
            (p.x > 0).then(|| GridPos::new(p.x - 1, p.y)),
        ];
        candidates
            .into_iter()
            .flatten()
            .filter(move |&q| self.is_passable(q))
    }

    /// Breadth-first hop counts from `source` to every node, honoring `passable`.
    /// Unreached nodes are `None`.
    pub fn distance_field(
        &self,
        source: GridPos,
        passable: impl Fn(GridPos) -> bool,
    ) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.kinds.len()];
        if !self.in_bounds(source) || !passable(source) {
            return dist;
        }
        let mut queue = VecDeque::new();
        dist[self.index(source)] = Some(0);
        queue.push_back(source);
        while let Some(p) = queue.pop_front() {
            let d = dist[self.index(p)].unwrap_or(0);
            for q in self.neighbors_iter(p) {
                let qi = self.index(q);
                if dist[qi].is_none() && passable(q) {
                    dist[qi] = Some(d + 1);
                    queue.push_back(q);
                }
            }
        }
        dist
    }
}

/// Memoized passable-node distance fields, keyed by source node. Fields are
/// symmetric, so one entry answers both "from" and "to" queries.
#[derive(Clone, Default)]
pub struct FieldCache {
    fields: rustc_hash::FxHashMap<GridPos, std::sync::Arc<Vec<Option<u32>>>>,
}

impl std::fmt::Debug for FieldCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FieldCache({} fields)", self.fields.len())
    }
}

impl FieldCache {
    const MAX_ENTRIES: usize = 1024;

    pub fn get(&mut self, map: &WarehouseMap, source: GridPos) -> std::sync::Arc<Vec<Option<u32>>> {
        if let Some(f) = self.fields.get(&source) {
            return f.clone();
        }
        if self.fields.len() >= Self::MAX_ENTRIES {
            self.fields.clear();
        }
        let f = std::sync::Arc::new(map.distance_field(source, |p| map.is_passable(p)));
        self.fields.insert(source, f.clone());
        f
    }

    /// Passable steps between `a` and `b`.
    pub fn steps(&mut self, map: &WarehouseMap, a: GridPos, b: GridPos) -> Option<u32> {
        if !map.in_bounds(a) || !map.in_bounds(b) {
            return None;
        }
        self.get(map, b)[map.index(a)]
    }
}

/// Euclidean distance between two nodes in meters.
pub fn grid_distance_m(a: GridPos, b: GridPos, spacing_m: f64) -> f64 {
    let dx = a.x as f64 - b.x as f64;
    let dy = a.y as f64 - b.y as f64;
    (dx * dx + dy * dy).sqrt() * spacing_m
}

/// Result of [`shortest_path_steps`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Steps {
    Reachable(u32),
    Unreachable,
}

impl Steps {
    pub fn get(self) -> Option<u32> {
        match self {
            Steps::Reachable(n) => Some(n),
            Steps::Unreachable => None,
        }
    }
}

/// Minimal 4-connected hop count from `from` to `to`, avoiding Void and
/// `blocked` cells.
pub fn shortest_path_steps(
    map: &WarehouseMap,
    from: GridPos,
    to: GridPos,
    blocked: &HashSet<GridPos>,
) -> Result<Steps, LayoutError> {
    for p in [from, to] {
        if !map.in_bounds(p) {
            return Err(LayoutError::OutOfBounds(p));
        }
    }
    let passable = |p: GridPos| map.is_passable(p) && !blocked.contains(&p);
    if !passable(from) || !passable(to) {
        return Ok(Steps::Unreachable);
    }
    if from == to {
        return Ok(Steps::Reachable(0));
    }
    let mut seen = vec![false; map.node_count()];
    let mut queue = VecDeque::from([(from, 0u32)]);
    seen[map.index(from)] = true;
    while let Some((p, d)) = queue.pop_front() {
        for q in map.neighbors_iter(p) {
            if q == to {
                return Ok(Steps::Reachable(d + 1));
            }
            let qi = map.index(q);
            if !seen[qi] && passable(q) {
                seen[qi] = true;
                queue.push_back((q, d + 1));
            }
        }
    }
    Ok(Steps::Unreachable)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(w: u32, h: u32) -> WarehouseMap {
        let text = (0..h)
            .map(|_| ".".repeat(w as usize))
            .collect::<Vec<_>>()
            .join("\n");
        parse_layout(
            &text,
            LayoutOptions {
                require_entry: false,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn single_node_layout_depends_on_strictness() {
        assert_eq!(
            parse_layout(".", LayoutOptions::default()),
            Err(LayoutError::NoEntryNode)
        );
        let map = parse_layout(
            ".",
            LayoutOptions {
                require_entry: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!((map.width(), map.height()), (1, 1));
        assert_eq!(map.kind(GridPos::new(0, 0)), NodeKind::Navigation);
    }

    #[test]
    fn parses_kinds_and_entries() {
        let map = parse_layout("E.R\n..P", LayoutOptions::default()).unwrap();
        assert_eq!((map.width(), map.height()), (3, 2));
        let count = |k| map.nodes_of_kind(k).count();
        assert_eq!(count(NodeKind::Entry), 1);
        assert_eq!(count(NodeKind::Navigation), 3);
        assert_eq!(count(NodeKind::RackSlot), 1);
        assert_eq!(count(NodeKind::Picking), 1);
        assert_eq!(map.entry_points(), &[GridPos::new(0, 0)]);
    }

    #[test]
    fn rejects_ragged_and_unknown() {
        assert!(matches!(
            parse_layout("..\n...", LayoutOptions::default()),
            Err(LayoutError::RaggedLayout { row: 1, .. })
        ));
        assert!(matches!(
            parse_layout("E.x", LayoutOptions::default()),
            Err(LayoutError::UnknownCharacter { ch: 'x', .. })
        ));
    }

    #[test]
    fn rejects_interior_entry() {
        assert!(matches!(
            parse_layout("...\n.E.\n...", LayoutOptions::default()),
            Err(LayoutError::InteriorEntry(_))
        ));
    }

    #[test]
    fn trailing_newline_is_optional() {
        let a = parse_layout("E.\n..\n", LayoutOptions::default()).unwrap();
        let b = parse_layout("E.\n..", LayoutOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn neighbor_counts() {
        let map = open(3, 3);
        assert_eq!(map.neighbors(GridPos::new(1, 1)).unwrap().len(), 4);
        assert_eq!(map.neighbors(GridPos::new(0, 0)).unwrap().len(), 2);
        assert_eq!(
            map.neighbors(GridPos::new(1, 1)).unwrap(),
            vec![
                GridPos::new(1, 0),
                GridPos::new(2, 1),
                GridPos::new(1, 2),
                GridPos::new(0, 1)
            ]
        );
        assert!(map.neighbors(GridPos::new(3, 0)).is_err());
    }

    #[test]
    fn void_neighbors_excluded() {
        let map = parse_layout(
            ".#.\n...",
            LayoutOptions {
                require_entry: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(
            map.neighbors(GridPos::new(0, 0)).unwrap(),
            vec![GridPos::new(0, 1)]
        );
    }

    #[test]
    fn distances_in_meters() {
        let o = GridPos::new(0, 0);
        assert_eq!(grid_distance_m(o, o, 0.5), 0.0);
        assert_eq!(grid_distance_m(o, GridPos::new(3, 4), 0.5), 2.5);
        assert_eq!(grid_distance_m(o, GridPos::new(16, 0), 0.5), 8.0);
    }

    #[test]
    fn shortest_paths() {
        let map = open(3, 3);
        let none = HashSet::new();
        let s = |a, b, blocked: &HashSet<GridPos>| shortest_path_steps(&map, a, b, blocked).unwrap();
        assert_eq!(s(GridPos::new(0, 0), GridPos::new(2, 2), &none), Steps::Reachable(4));
        let walled: HashSet<_> = [GridPos::new(1, 2), GridPos::new(2, 1)].into();
        assert_eq!(s(GridPos::new(0, 0), GridPos::new(2, 2), &walled), Steps::Unreachable);
    }
}
