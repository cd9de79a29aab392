//! Human intention recognition.
//!
//! A worker's goal is inferred with a Boltzmann progress model: every observed
//! step multiplies the weight of goal `g` by `exp(beta * (d(prev, g) - d(cur, g)))`
//! where `d` is the shortest-path hop count. Steps toward a goal raise its
//! weight, steps away lower it, and waiting carries no evidence. The belief
//! and the worker's recent motion then drive a small priority-ordered
//! classifier (emergency, returning, lost, on track).

use serde::{Deserialize, Serialize};

use crate::agents::Worker;
use crate::error::HirError;
use crate::grid::{shortest_path_steps, GridPos, WarehouseMap};

/// Prior mass on the goal the worker was sent to.
pub const ASSIGNED_GOAL_PRIOR: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HirConfig {
    pub beta: f64,
    /// Nodes per tick at or above which motion counts as running.
    pub run_speed_threshold: f64,
    /// Length of the position history used for the lost test.
    pub window_ticks: usize,
    /// Most recent intervals averaged for the speed estimate.
    pub speed_window_ticks: usize,
    pub returning_prob_threshold: f64,
    /// Nats. `None` means `0.9 * ln(goal count)`.
    pub lost_entropy_threshold: Option<f64>,
}

impl Default for HirConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            run_speed_threshold: 2.0,
            window_ticks: 8,
            speed_window_ticks: 2,
            returning_prob_threshold: 0.7,
            lost_entropy_threshold: None,
        }
    }
}

impl HirConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.beta >= 0.0) {
            return Err(("hir.beta", "must be >= 0".into()));
        }
        if !(self.run_speed_threshold > 0.0) {
            return Err(("hir.run_speed_threshold", "must be positive".into()));
        }
        if self.window_ticks < 2 {
            return Err(("hir.window_ticks", "must be >= 2".into()));
        }
        if self.speed_window_ticks == 0 {
            return Err(("hir.speed_window_ticks", "must be positive".into()));
        }
        if !(self.returning_prob_threshold > 0.0) {
            return Err(("hir.returning_prob_threshold", "must be positive".into()));
        }
        if self.lost_entropy_threshold.is_some_and(|t| !(t > 0.0)) {
            return Err(("hir.lost_entropy_threshold", "must be positive".into()));
        }
        Ok(())
    }

    pub fn entropy_threshold(&self, goal_count: usize) -> f64 {
        self.lost_entropy_threshold
            .unwrap_or(0.9 * (goal_count as f64).ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BehaviorState {
    OnTrack,
    Lost,
    Returning,
    Emergency,
}

/// Probability vector over candidate goals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalBelief {
    goals: Vec<GridPos>,
    probs: Vec<f64>,
}

impl GoalBelief {
    /// Normalizes non-negative weights into a belief.
    pub fn from_weights(goals: Vec<GridPos>, weights: Vec<f64>) -> Result<Self, HirError> {
        if goals.is_empty() || goals.len() != weights.len() {
            return Err(HirError::InvalidBelief);
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(HirError::InvalidBelief);
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(HirError::InvalidBelief);
        }
        Ok(Self {
            goals,
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(goals: Vec<GridPos>) -> Result<Self, HirError> {
        let n = goals.len();
        Self::from_weights(goals, vec![1.0; n])
    }

    /// The assigned goal gets [`ASSIGNED_GOAL_PRIOR`], the other candidates
    /// share the rest. Duplicates are dropped, keeping first occurrence.
    pub fn with_assigned(assigned: GridPos, others: impl IntoIterator<Item = GridPos>) -> Self {
        let mut goals = vec![assigned];
        for g in others {
            if !goals.contains(&g) {
                goals.push(g);
            }
        }
        let rest = goals.len() - 1;
        let weights = if rest == 0 {
            vec![1.0]
        } else {
            std::iter::once(ASSIGNED_GOAL_PRIOR)
                .chain(std::iter::repeat_n((1.0 - ASSIGNED_GOAL_PRIOR) / rest as f64, rest))
                .collect()
        };
        Self::from_weights(goals, weights).expect("valid prior")
    }

    pub fn goals(&self) -> &[GridPos] {
        &self.goals
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob_of(&self, g: GridPos) -> Option<f64> {
        self.goals.iter().position(|&x| x == g).map(|i| self.probs[i])
    }

    /// Most likely goal; the lowest index wins ties.
    pub fn argmax(&self) -> (GridPos, f64) {
        let mut best = 0;
        for i in 1..self.probs.len() {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        (self.goals[best], self.probs[best])
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    /// Goals ranked by probability (descending; index order on ties).
    pub fn top(&self, k: usize) -> Vec<(GridPos, f64)> {
        let mut idx: Vec<usize> = (0..self.goals.len()).collect();
        idx.sort_by(|&a, &b| self.probs[b].total_cmp(&self.probs[a]).then(a.cmp(&b)));
        idx.into_iter()
            .take(k)
            .map(|i| (self.goals[i], self.probs[i]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefUpdate {
    pub belief: GoalBelief,
    /// Goals whose distance was unreachable from `prev` or `cur`; each got the
    /// fixed `exp(-beta)` factor.
    pub unreachable: Vec<GridPos>,
}

/// One Bayesian step using shortest-path distances on `map`.
pub fn update_belief(
    b: &GoalBelief,
    prev: GridPos,
    cur: GridPos,
    map: &WarehouseMap,
    cfg: &HirConfig,
) -> Result<BeliefUpdate, HirError> {
    let none = Default::default();
    update_belief_with(b, prev, cur, cfg.beta, |from, to| {
        shortest_path_steps(map, from, to, &none)
            .ok()
            .and_then(|s| s.get())
    })
}

/// [`update_belief`] with a caller-supplied distance function (used by the
/// engine's cached distance fields).
pub fn update_belief_with(
    b: &GoalBelief,
    prev: GridPos,
    cur: GridPos,
    beta: f64,
    mut dist: impl FnMut(GridPos, GridPos) -> Option<u32>,
) -> Result<BeliefUpdate, HirError> {
    if prev != cur && !prev.is_adjacent(cur) {
        return Err(HirError::NotAdjacent(prev, cur));
    }
    if prev == cur {
        return Ok(BeliefUpdate {
            belief: b.clone(),
            unreachable: Vec::new(),
        });
    }
    let mut unreachable = Vec::new();
    let log_w: Vec<f64> = b
        .goals
        .iter()
        .zip(&b.probs)
        .map(|(&g, &p)| {
            let progress = match (dist(prev, g), dist(cur, g)) {
                (Some(a), Some(c)) => a as f64 - c as f64,
                _ => {
                    unreachable.push(g);
                    -1.0
                }
            };
            p.ln() + beta * progress
        })
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|&l| (l - max).exp()).collect();
    let belief = GoalBelief::from_weights(b.goals.clone(), weights)?;
    Ok(BeliefUpdate {
        belief,
        unreachable,
    })
}

/// Mean nodes per tick over the most recent `speed_window_ticks` intervals.
pub fn observed_speed(worker: &Worker, cfg: &HirConfig) -> f64 {
    let pos = &worker.last_positions;
    if pos.len() < 2 {
        return 0.0;
    }
    let intervals = (pos.len() - 1).min(cfg.speed_window_ticks);
    let start = pos.len() - 1 - intervals;
    let travelled: u32 = (start..pos.len() - 1)
        .map(|i| pos[i].manhattan(pos[i + 1]))
        .sum();
    travelled as f64 / intervals as f64
}

/// Priority-ordered behavior rules: emergency, returning, lost, on track.
pub fn classify_behavior(
    b: &GoalBelief,
    worker: &Worker,
    cfg: &HirConfig,
    map: &WarehouseMap,
    assigned_goal: Option<GridPos>,
    task_open: bool,
) -> BehaviorState {
    let none = Default::default();
    classify_behavior_with(b, worker, cfg, map, assigned_goal, task_open, |p, g| {
        shortest_path_steps(map, p, g, &none).ok().and_then(|s| s.get())
    })
}

/// [`classify_behavior`] with a caller-supplied distance function.
pub fn classify_behavior_with(
    b: &GoalBelief,
    worker: &Worker,
    cfg: &HirConfig,
    map: &WarehouseMap,
    assigned_goal: Option<GridPos>,
    task_open: bool,
    mut dist: impl FnMut(GridPos, GridPos) -> Option<u32>,
) -> BehaviorState {
    let is_exit = |g: GridPos| map.entry_points().contains(&g);
    let (top, top_p) = b.argmax();
    let speed = observed_speed(worker, cfg);
    let running = speed >= cfg.run_speed_threshold;

    if running && is_exit(top) {
        return BehaviorState::Emergency;
    }
    if task_open && !running && is_exit(top) && top_p >= cfg.returning_prob_threshold {
        return BehaviorState::Returning;
    }
    let confused = b.goals.len() >= 2 && b.entropy() >= cfg.entropy_threshold(b.goals.len());
    let receding = assigned_goal.is_some_and(|g| {
        let pos = &worker.last_positions;
        if pos.len() < cfg.window_ticks.max(2) {
            return false;
        }
        match (dist(pos[0], g), dist(pos[pos.len() - 1], g)) {
            (Some(first), Some(last)) => last > first,
            _ => false,
        }
    });
    if confused || receding {
        return BehaviorState::Lost;
    }
    BehaviorState::OnTrack
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{parse_layout, LayoutOptions};
    use crate::ids::WorkerId;

    fn open(w: usize, h: usize) -> WarehouseMap {
        let mut rows: Vec<String> = (0..h).map(|_| ".".repeat(w)).collect();
        rows[0].replace_range(0..1, "E");
        parse_layout(&rows.join("\n"), LayoutOptions::default()).unwrap()
    }

    #[test]
    fn single_goal_stays_certain() {
        let map = open(5, 5);
        let b = GoalBelief::uniform(vec![GridPos::new(4, 4)]).unwrap();
        let u = update_belief(&b, GridPos::new(0, 0), GridPos::new(1, 0), &map, &HirConfig::default())
            .unwrap();
        assert_eq!(u.belief.probs(), &[1.0]);
    }

    #[test]
    fn zero_beta_is_flat() {
        let map = open(5, 5);
        let b = GoalBelief::uniform(vec![GridPos::new(4, 0), GridPos::new(0, 4)]).unwrap();
        let cfg = HirConfig {
            beta: 0.0,
            ..Default::default()
        };
        let u = update_belief(&b, GridPos::new(2, 2), GridPos::new(3, 2), &map, &cfg).unwrap();
        assert_eq!(u.belief, b);
    }

    #[test]
    fn two_goal_closed_form() {
        let map = open(9, 1);
        // Goals at both ends; a step right gains one on g1 and loses one on g2.
        let b = GoalBelief::uniform(vec![GridPos::new(8, 0), GridPos::new(0, 0)]).unwrap();
        let u = update_belief(&b, GridPos::new(4, 0), GridPos::new(5, 0), &map, &HirConfig::default())
            .unwrap();
        let expected = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((u.belief.probs()[0] - expected).abs() < 1e-12);
        assert!((u.belief.probs()[0] - 0.8808).abs() < 1e-4);
    }

    #[test]
    fn wait_carries_no_evidence() {
        let map = open(5, 5);
        let b = GoalBelief::from_weights(vec![GridPos::new(4, 4), GridPos::new(0, 4)], vec![0.3, 0.7])
            .unwrap();
        let u = update_belief(&b, GridPos::new(2, 2), GridPos::new(2, 2), &map, &HirConfig::default())
            .unwrap();
        assert_eq!(u.belief, b);
    }

    #[test]
    fn unreachable_goal_is_flagged() {
        let map = parse_layout("E.#.", LayoutOptions::default()).unwrap();
        let b = GoalBelief::uniform(vec![GridPos::new(0, 0), GridPos::new(3, 0)]).unwrap();
        let u = update_belief(&b, GridPos::new(1, 0), GridPos::new(0, 0), &map, &HirConfig::default())
            .unwrap();
        assert_eq!(u.unreachable, vec![GridPos::new(3, 0)]);
        let expected = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((u.belief.probs()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_jumps() {
        let map = open(5, 5);
        let b = GoalBelief::uniform(vec![GridPos::new(4, 4)]).unwrap();
        assert!(update_belief(&b, GridPos::new(0, 0), GridPos::new(2, 0), &map, &HirConfig::default())
            .is_err());
    }

    #[test]
    fn assigned_prior() {
        let b = GoalBelief::with_assigned(
            GridPos::new(3, 3),
            [GridPos::new(0, 0), GridPos::new(3, 3), GridPos::new(0, 4)],
        );
        assert_eq!(b.goals().len(), 3);
        assert!((b.probs()[0] - 0.6).abs() < 1e-12);
        assert!((b.probs()[1] - 0.2).abs() < 1e-12);
    }

    fn worker_with(track: &[(u32, u32)]) -> Worker {
        let mut w = Worker::new(WorkerId(0), GridPos::new(0, 0), 8, 1);
        for &(x, y) in track {
            w.record_position(GridPos::new(x, y));
        }
        w.inside = true;
        w
    }

    #[test]
    fn classifier_rules() {
        let map = open(20, 20);
        let cfg = HirConfig::default();
        let exit = GridPos::new(0, 0);
        let goal = GridPos::new(15, 15);
        let toward_goal = GoalBelief::from_weights(vec![goal, exit], vec![0.9, 0.1]).unwrap();
        let toward_exit = GoalBelief::from_weights(vec![goal, exit], vec![0.2, 0.8]).unwrap();

        let walking = worker_with(&[(5, 5), (6, 5), (7, 5)]);
        assert_eq!(
            classify_behavior(&toward_goal, &walking, &cfg, &map, Some(goal), true),
            BehaviorState::OnTrack
        );
        let running = worker_with(&[(9, 5), (7, 5), (5, 5)]);
        assert_eq!(
            classify_behavior(&toward_exit, &running, &cfg, &map, Some(goal), true),
            BehaviorState::Emergency
        );
        let strolling_back = worker_with(&[(7, 5), (6, 5), (5, 5)]);
        assert_eq!(
            classify_behavior(&toward_exit, &strolling_back, &cfg, &map, Some(goal), true),
            BehaviorState::Returning
        );
        assert_eq!(
            classify_behavior(&toward_goal, &strolling_back, &cfg, &map, Some(goal), false),
            BehaviorState::OnTrack
        );
        let wandering = worker_with(&[(9, 9), (9, 8), (9, 7), (9, 6), (9, 5), (9, 4), (9, 3), (9, 2)]);
        assert_eq!(
            classify_behavior(&toward_goal, &wandering, &cfg, &map, Some(goal), true),
            BehaviorState::Lost
        );
        let flat = GoalBelief::uniform(vec![goal, exit, GridPos::new(19, 0)]).unwrap();
        assert_eq!(
            classify_behavior(&flat, &walking, &cfg, &map, Some(goal), true),
            BehaviorState::Lost
        );
    }
}
