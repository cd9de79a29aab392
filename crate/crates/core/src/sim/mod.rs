//! The deterministic tick engine and its inputs and outputs.

mod engine;
mod events;
pub(crate) mod fms;
mod metrics;
mod run;
mod scenario;
mod world;

pub use engine::{step, LIVELOCK_TICKS};
pub(crate) use engine::finish_pick;
pub use events::{render_log, Event, EventKind, Picker};
pub use fms::{replan_on_failure, PlanDelta};
pub use metrics::{Metrics, MetricsSeries, CSV_HEADER};
pub use run::{run_scenario, run_with_commands, RunFailure, RunOutput};
pub use scenario::{
    load_scenario, load_scenario_file, load_scenario_with, parse_command_script, render_command_script,
    single_line, FaultInjection, Mode, OrderStreamSpec, RobotSpec, Scenario, ScenarioSources, ScheduledOrder,
    ScriptedCommand, Timing,
};
pub use world::{Station, World};
