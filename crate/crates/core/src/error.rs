use thiserror::Error;

use crate::grid::GridPos;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutError {
    #[error("layout is empty")]
    Empty,
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedLayout { row: u32, expected: u32, found: u32 },
    #[error("unknown layout character {ch:?} at row {row}, column {col}")]
    UnknownCharacter { ch: char, row: u32, col: u32 },
    #[error("layout has no entry node")]
    NoEntryNode,
    #[error("entry node {0} is not on the map boundary")]
    InteriorEntry(GridPos),
    #[error("expected {expected} cells, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("node spacing must be positive, got {0}")]
    BadSpacing(f64),
    #[error("position {0} is out of bounds")]
    OutOfBounds(GridPos),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WmsError {
    #[error("unknown product {0:?}")]
    UnknownProduct(String),
    #[error("product {product:?} has {available} units available, {requested} requested")]
    OutOfStock {
        product: String,
        requested: u32,
        available: u32,
    },
    #[error("order {0} is invalid: {1}")]
    InvalidOrder(u64, String),
    #[error("station {0} is not a picking node")]
    UnknownStation(u32),
    #[error("inventory line {line}: {reason}")]
    Ingest { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("no path to the goal within the planning horizon")]
    NoPathWithinHorizon,
    #[error("search budget of {0} expansions exceeded")]
    BudgetExceeded(usize),
    #[error("start or goal is not a passable node")]
    InvalidEndpoint,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HirError {
    #[error("belief must have at least one goal and matching probabilities")]
    InvalidBelief,
    #[error("positions {0} and {1} are neither identical nor adjacent")]
    NotAdjacent(GridPos, GridPos),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {reason}")]
    Validation { key: String, reason: String },
}

impl ScenarioError {
    pub fn validation(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ScenarioError::Validation {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn key(&self) -> Option<&str> {
        match self {
            ScenarioError::Validation { key, .. } => Some(key),
            ScenarioError::Parse(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invariant violated at tick {tick}: {what}")]
pub struct InvariantViolation {
    pub tick: u64,
    pub what: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeedError {
    #[error("worker {0} has no active path")]
    NoActivePath(u32),
    #[error("worker {0} has no open pick task")]
    NoActivePickTask(u32),
    #[error("worker {0} is not at the task rack")]
    NotAtRack(u32),
    #[error("worker {0} has not finished the pick dwell")]
    DwellIncomplete(u32),
    #[error("unknown worker {0}")]
    UnknownWorker(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommandError {
    #[error("unknown {kind} id {id}")]
    UnknownId { kind: &'static str, id: String },
    #[error("illegal state: {0}")]
    IllegalState(String),
}
