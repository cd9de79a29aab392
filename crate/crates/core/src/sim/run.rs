use crate::error::InvariantViolation;
use crate::service::apply_command;

use super::events::{render_log, Event};
use super::metrics::{Metrics, MetricsSeries};
use super::scenario::{Scenario, ScriptedCommand};
use super::world::World;
use super::engine::step;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: Metrics,
    /// Sampled rows plus the final summary row.
    pub series: MetricsSeries,
    pub events: Vec<Event>,
    pub final_tick: u64,
}

impl RunOutput {
    pub fn event_log(&self) -> String {
        render_log(&self.events)
    }

    pub fn metrics_csv(&self) -> String {
        self.series.to_csv()
    }
}

/// An aborted run: the violation plus the world as it stood.
#[derive(Debug)]
pub struct RunFailure {
    pub violation: InvariantViolation,
    pub world: Box<World>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.violation.fmt(f)
    }
}

impl std::error::Error for RunFailure {}

/// Runs the scenario with its own command script.
pub fn run_scenario(scenario: &Scenario, max_ticks: u64) -> Result<RunOutput, RunFailure> {
    run_with_commands(scenario, &scenario.commands, max_ticks)
}

/// Steps until `max_ticks`, or (when the scenario allows early stop) until the
/// order stream is exhausted and all work is done. Commands apply at the
/// boundary before the step of their tick.
pub fn run_with_commands(
    scenario: &Scenario,
    commands: &[ScriptedCommand],
    max_ticks: u64,
) -> Result<RunOutput, RunFailure> {
    let mut world = World::new(scenario);
    let mut next = 0;
    while world.tick < max_ticks {
        while let Some(c) = commands.get(next) {
            if c.tick > world.tick {
                break;
            }
            if c.tick == world.tick {
                let _ = apply_command(&mut world, &c.command);
            }
            next += 1;
        }
        if scenario.stop_when_done && world.is_done(commands) {
            break;
        }
        if let Err(violation) = step(&mut world) {
            return Err(RunFailure {
                violation,
                world: Box::new(world),
            });
        }
    }
    Ok(finish(world))
}

fn finish(mut world: World) -> RunOutput {
    let mut summary = world.metrics.clone();
    summary.pick_completion_ticks.clear();
    world.series.rows.push((world.tick, summary));
    RunOutput {
        metrics: world.metrics,
        series: world.series,
        events: world.log,
        final_tick: world.tick,
    }
}
