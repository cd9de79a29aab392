use std::collections::BTreeMap;

use rustc_hash::FxHashMap as HashMap;

use serde::{Deserialize, Serialize};

use crate::grid::GridPos;
use crate::ids::RobotId;
use crate::path::TimedPath;

/// What a single agent holds in the table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentHold {
    pub path: Option<TimedPath>,
    /// Node held from a tick onward, indefinitely.
    pub park: Option<(GridPos, u64)>,
}

/// Space-time occupancy ledger. A planned path reserves every `(node, tick)`
/// it covers and every traversed edge; a park holds one node from some tick
/// on, with no end. One holder per `(node, tick)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReservationTable {
    #[serde(with = "pairs")]
    nodes: HashMap<GridPos, BTreeMap<u64, RobotId>>,
    /// `(from, to, tick)`: leaves `from` at `tick`, reaches `to` at `tick + 1`.
    #[serde(with = "pairs")]
    edges: HashMap<(GridPos, GridPos, u64), RobotId>,
    #[serde(with = "pairs")]
    parks: HashMap<GridPos, (RobotId, u64)>,
    agents: BTreeMap<RobotId, AgentHold>,
}

/// A failed reservation: the first conflicting holder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conflict {
    pub with: RobotId,
    pub at: GridPos,
    pub tick: u64,
}

impl ReservationTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Holder of `(p, tick)` from paths or parks.
    pub fn holder(&self, p: GridPos, tick: u64) -> Option<RobotId> {
        if let Some(&a) = self.nodes.get(&p).and_then(|m| m.get(&tick)) {
            return Some(a);
        }
        match self.parks.get(&p) {
            Some(&(a, from)) if tick >= from => Some(a),
            _ => None,
        }
    }

    /// True when `(p, tick)` is held by anyone other than `me`.
    pub fn is_blocked(&self, p: GridPos, tick: u64, me: RobotId) -> bool {
        self.holder(p, tick).is_some_and(|a| a != me)
    }

    /// True when some other agent moves `from → to` leaving at `tick`.
    pub fn edge_holder(&self, from: GridPos, to: GridPos, tick: u64) -> Option<RobotId> {
        self.edges.get(&(from, to, tick)).copied()
    }

    /// Would moving `from → to` between `tick` and `tick + 1` collide with
    /// another agent's vertex or swap?
    pub fn move_conflicts(&self, from: GridPos, to: GridPos, tick: u64, me: RobotId) -> bool {
        if self.is_blocked(to, tick + 1, me) {
            return true;
        }
        from != to && self.edge_holder(to, from, tick).is_some_and(|a| a != me)
    }

    /// Earliest tick from which `p` stays free of other agents forever, or
    /// `None` when another agent parks there.
    pub fn free_forever_from(&self, p: GridPos, me: RobotId) -> Option<u64> {
        if let Some(&(a, _)) = self.parks.get(&p) {
            if a != me {
                return None;
            }
        }
        let last = self
            .nodes
            .get(&p)
            .and_then(|m| m.iter().rev().find(|(_, &a)| a != me).map(|(&t, _)| t));
        Some(last.map_or(0, |t| t + 1))
    }

    /// Last tick after which the table no longer changes over time.
    pub fn static_after(&self) -> u64 {
        self.agents
            .values()
            .map(|h| {
                let path_end = h.path.as_ref().map_or(0, |p| p.end_tick());
                let park_from = h.park.map_or(0, |(_, t)| t);
                path_end.max(park_from)
            })
            .max()
            .unwrap_or(0)
    }

    pub fn hold(&self, agent: RobotId) -> Option<&AgentHold> {
        self.agents.get(&agent)
    }

    pub fn agents(&self) -> impl Iterator<Item = (&RobotId, &AgentHold)> {
        self.agents.iter()
    }

    /// Positions every agent holds at `tick`.
    pub fn positions_at(&self, tick: u64) -> Vec<(RobotId, GridPos)> {
        self.agents
            .iter()
            .filter_map(|(&a, h)| {
                let on_path = h.path.as_ref().and_then(|p| p.at(tick));
                let parked = h.park.and_then(|(p, from)| (tick >= from).then_some(p));
                on_path.or(parked).map(|p| (a, p))
            })
            .collect()
    }

    /// First conflict a path would cause, ignoring the agent's own holds.
    pub fn check_path(&self, agent: RobotId, path: &TimedPath) -> Option<Conflict> {
        let t0 = path.start_tick();
        for (i, &p) in path.steps().iter().enumerate() {
            let t = t0 + i as u64;
            if let Some(a) = self.holder(p, t).filter(|&a| a != agent) {
                return Some(Conflict { with: a, at: p, tick: t });
            }
            if i > 0 {
                let prev = path.steps()[i - 1];
                if let Some(a) = self.edge_holder(p, prev, t - 1).filter(|&a| a != agent) {
                    return Some(Conflict { with: a, at: p, tick: t });
                }
            }
        }
        None
    }

    /// Reserves `path` for `agent`, replacing any previous path (but not the
    /// park). Fails without changes on conflict.
    pub fn reserve_path(&mut self, agent: RobotId, path: TimedPath) -> Result<(), Conflict> {
        if let Some(c) = self.check_path(agent, &path) {
            return Err(c);
        }
        self.release_path(agent);
        let t0 = path.start_tick();
        for (i, &p) in path.steps().iter().enumerate() {
            let t = t0 + i as u64;
            self.nodes.entry(p).or_default().insert(t, agent);
            if i > 0 {
                self.edges.insert((path.steps()[i - 1], p, t - 1), agent);
            }
        }
        self.agents.entry(agent).or_insert(AgentHold { path: None, park: None }).path = Some(path);
        Ok(())
    }

    /// Parks `agent` on `p` from `from` onward, replacing any previous park.
    /// Returns other agents whose path reservations on `p` at or after `from`
    /// conflict with it; the caller must replan or release those agents.
    pub fn park(&mut self, agent: RobotId, p: GridPos, from: u64) -> Vec<RobotId> {
        self.release_park(agent);
        if let Some(&(other, _)) = self.parks.get(&p) {
            debug_assert_ne!(other, agent);
        }
        self.parks.insert(p, (agent, from));
        self.agents.entry(agent).or_insert(AgentHold { path: None, park: None }).park = Some((p, from));
        let mut hit: Vec<RobotId> = self
            .nodes
            .get(&p)
            .map(|m| {
                m.range(from..)
                    .filter(|(_, &a)| a != agent)
                    .map(|(_, &a)| a)
                    .collect()
            })
            .unwrap_or_default();
        hit.sort();
        hit.dedup();
        hit
    }

    pub fn release_path(&mut self, agent: RobotId) -> Option<TimedPath> {
        let path = self.agents.get_mut(&agent)?.path.take()?;
        let t0 = path.start_tick();
        for (i, &p) in path.steps().iter().enumerate() {
            let t = t0 + i as u64;
            if let Some(m) = self.nodes.get_mut(&p) {
                if m.get(&t) == Some(&agent) {
                    m.remove(&t);
                }
                if m.is_empty() {
                    self.nodes.remove(&p);
                }
            }
            if i > 0 {
                let key = (path.steps()[i - 1], p, t - 1);
                if self.edges.get(&key) == Some(&agent) {
                    self.edges.remove(&key);
                }
            }
        }
        Some(path)
    }

    pub fn release_park(&mut self, agent: RobotId) -> Option<(GridPos, u64)> {
        let park = self.agents.get_mut(&agent)?.park.take()?;
        if self.parks.get(&park.0).map(|&(a, _)| a) == Some(agent) {
            self.parks.remove(&park.0);
        }
        Some(park)
    }

    /// Drops both the path and the park of `agent`.
    pub fn release_all(&mut self, agent: RobotId) {
        self.release_path(agent);
        self.release_park(agent);
        self.agents.remove(&agent);
    }

    /// Drops path reservations strictly before `tick`.
    pub fn prune_before(&mut self, tick: u64) {
        self.nodes.retain(|_, m| {
            while let Some(e) = m.first_entry() {
                if *e.key() >= tick {
                    break;
                }
                e.remove();
            }
            !m.is_empty()
        });
        self.edges.retain(|&(_, _, t), _| t >= tick);
        for hold in self.agents.values_mut() {
            if hold.path.as_ref().is_some_and(|p| p.end_tick() < tick) {
                hold.path = None;
            }
        }
    }

    /// Checks the one-holder and edge-implies-nodes invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (&(from, to, t), &a) in &self.edges {
            if self.holder(from, t) != Some(a) || self.holder(to, t + 1) != Some(a) {
                return Err(format!("edge {from}->{to}@{t} of {a} lacks node holds"));
            }
        }
        for (&p, &(a, from)) in &self.parks {
            if let Some(m) = self.nodes.get(&p) {
                if let Some((t, b)) = m.range(from..).find(|(_, &b)| b != a) {
                    return Err(format!("{p}@{t} held by {b} inside park of {a}"));
                }
            }
        }
        Ok(())
    }
}

/// Serializes hash maps with non-string keys as sorted pair lists.
mod pairs {
    use serde::de::DeserializeOwned;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use rustc_hash::FxHashMap as HashMap;
    use std::hash::Hash;

    pub fn serialize<K, V, S>(map: &HashMap<K, V>, s: S) -> Result<S::Ok, S::Error>
    where
        K: Serialize + Ord,
        V: Serialize,
        S: Serializer,
    {
        let mut v: Vec<(&K, &V)> = map.iter().collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v.serialize(s)
    }

    pub fn deserialize<'de, K, V, D>(d: D) -> Result<HashMap<K, V>, D::Error>
    where
        K: DeserializeOwned + Eq + Hash,
        V: DeserializeOwned,
        D: Deserializer<'de>,
    {
        Ok(Vec::<(K, V)>::deserialize(d)?.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: u32, y: u32) -> GridPos {
        GridPos::new(x, y)
    }

    #[test]
    fn reserve_and_release() {
        let mut t = ReservationTable::new();
        let a = RobotId(1);
        let path = TimedPath::new(0, vec![p(0, 0), p(1, 0), p(2, 0)]).unwrap();
        t.reserve_path(a, path.clone()).unwrap();
        assert_eq!(t.holder(p(1, 0), 1), Some(a));
        assert!(t.is_blocked(p(1, 0), 1, RobotId(2)));
        assert!(!t.is_blocked(p(1, 0), 1, a));
        // Head-on swap with the edge (0,0)->(1,0) at tick 0.
        assert!(t.move_conflicts(p(1, 0), p(0, 0), 0, RobotId(2)));
        let clash = TimedPath::new(0, vec![p(1, 1), p(1, 0)]).unwrap();
        assert!(t.reserve_path(RobotId(2), clash).is_err());
        t.check_invariants().unwrap();
        assert_eq!(t.release_path(a), Some(path));
        assert_eq!(t.holder(p(1, 0), 1), None);
    }

    #[test]
    fn park_reports_conflicts() {
        let mut t = ReservationTable::new();
        t.reserve_path(RobotId(2), TimedPath::new(0, vec![p(0, 0), p(1, 0), p(2, 0)]).unwrap())
            .unwrap();
        let hit = t.park(RobotId(1), p(2, 0), 1);
        assert_eq!(hit, vec![RobotId(2)]);
        assert_eq!(t.free_forever_from(p(2, 0), RobotId(3)), None);
        assert_eq!(t.free_forever_from(p(1, 0), RobotId(3)), Some(2));
        assert_eq!(t.static_after(), 2);
    }

    #[test]
    fn prune_drops_the_past() {
        let mut t = ReservationTable::new();
        t.reserve_path(RobotId(0), TimedPath::new(0, vec![p(0, 0), p(1, 0)]).unwrap())
            .unwrap();
        t.prune_before(5);
        assert_eq!(t.holder(p(1, 0), 1), None);
        assert!(t.hold(RobotId(0)).unwrap().path.is_none());
    }
}
