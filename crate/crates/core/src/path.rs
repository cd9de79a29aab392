use serde::{Deserialize, Serialize};

use crate::grid::GridPos;

/// A space-time plan: `steps[i]` is the node occupied at `start_tick + i`.
/// Consecutive steps are identical (wait) or 4-adjacent (move).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedPath {
    start_tick: u64,
    steps: Vec<GridPos>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathShapeError {
    Empty,
    Jump(usize),
}

impl TimedPath {
    pub fn new(start_tick: u64, steps: Vec<GridPos>) -> Result<Self, PathShapeError> {
        if steps.is_empty() {
            return Err(PathShapeError::Empty);
        }
        if let Some(i) = steps
            .windows(2)
            .position(|w| w[0] != w[1] && !w[0].is_adjacent(w[1]))
        {
            return Err(PathShapeError::Jump(i));
        }
        Ok(Self { start_tick, steps })
    }

    /// A path that holds `pos` for a single tick.
    pub fn stay(start_tick: u64, pos: GridPos) -> Self {
        Self {
            start_tick,
            steps: vec![pos],
        }
    }

    pub fn start_tick(&self) -> u64 {
        self.start_tick
    }

    pub fn end_tick(&self) -> u64 {
        self.start_tick + self.steps.len() as u64 - 1
    }

    pub fn steps(&self) -> &[GridPos] {
        &self.steps
    }

    pub fn start(&self) -> GridPos {
        self.steps[0]
    }

    pub fn goal(&self) -> GridPos {
        *self.steps.last().expect("non-empty path")
    }

    /// Node occupied at `tick`, or `None` outside the path's time span.
    pub fn at(&self, tick: u64) -> Option<GridPos> {
        let i = tick.checked_sub(self.start_tick)?;
        self.steps.get(i as usize).copied()
    }

    /// Number of move (non-wait) steps.
    pub fn move_count(&self) -> usize {
        self.steps.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Remaining nodes from `tick` on, with consecutive duplicates collapsed.
    pub fn remaining_nodes(&self, tick: u64) -> Vec<GridPos> {
        let from = tick.saturating_sub(self.start_tick) as usize;
        let mut out: Vec<GridPos> = Vec::new();
        for &p in self.steps.iter().skip(from) {
            if out.last() != Some(&p) {
                out.push(p);
            }
        }
        out
    }

    /// Remaining move count from `tick` to the goal.
    pub fn remaining_moves(&self, tick: u64) -> usize {
        self.remaining_nodes(tick).len().saturating_sub(1)
    }
}
