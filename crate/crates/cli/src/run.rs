use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use rackfloor::sim::{
    load_scenario_with, parse_command_script, render_log, run_with_commands, RunFailure, RunOutput, Scenario,
    ScenarioSources,
};

use crate::{ModeArg, EXIT_INVALID, EXIT_INVARIANT};

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Layout file that replaces the scenario's map.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[arg(long)]
    pub scenario: PathBuf,
    /// Tick budget; defaults to the scenario's `max_ticks`.
    #[arg(long)]
    pub ticks: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
    #[arg(long)]
    pub events_out: Option<PathBuf>,
    /// NDJSON command script; replaces the scenario's own `commands`.
    #[arg(long)]
    pub commands: Option<PathBuf>,
    /// Where to write the world as JSON if an invariant breaks (stderr when unset).
    #[arg(long)]
    pub dump_out: Option<PathBuf>,
}

pub fn load(scenario: &Path, layout: Option<&Path>) -> anyhow::Result<Scenario> {
    let text = std::fs::read_to_string(scenario).with_context(|| format!("reading {}", scenario.display()))?;
    let layout_override = layout
        .map(|p| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let src = ScenarioSources {
        base_dir: scenario.parent().map(Path::to_path_buf),
        layout_override,
    };
    Ok(load_scenario_with(&text, &src)?)
}

fn prepare(args: &RunArgs) -> anyhow::Result<(Scenario, u64)> {
    let mut s = load(&args.scenario, args.layout.as_deref())?;
    if let Some(seed) = args.seed {
        s.seed = seed;
    }
    if let Some(mode) = args.mode {
        s.mode = mode.into();
    }
    if let Some(path) = &args.commands {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        s.commands = parse_command_script(&text).with_context(|| format!("parsing {}", path.display()))?;
    }
    let ticks = args
        .ticks
        .or(s.max_ticks)
        .ok_or_else(|| anyhow!("no tick budget: pass --ticks or set max_ticks in the scenario"))?;
    Ok((s, ticks))
}

fn write(path: &Option<PathBuf>, body: &str) -> anyhow::Result<()> {
    if let Some(p) = path {
        std::fs::write(p, body).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

pub fn run(args: RunArgs) -> u8 {
    let (s, ticks) = match prepare(&args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_INVALID;
        }
    };
    let result = run_with_commands(&s, &s.commands, ticks);
    match finish(&args, result) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INVALID
        }
    }
}

/// Writes outputs for a finished or aborted run and picks the exit status.
fn finish(args: &RunArgs, result: Result<RunOutput, RunFailure>) -> anyhow::Result<u8> {
    match result {
        Ok(out) => {
            write(&args.metrics_out, &out.metrics_csv())?;
            write(&args.events_out, &out.event_log())?;
            let m = &out.metrics;
            println!(
                "ticks={} picks={} orders={} downtime_ticks={} encounter_ticks={} vest_stops={}",
                out.final_tick,
                m.picks_completed,
                m.orders_completed,
                m.robot_downtime_ticks,
                m.encounter_ticks,
                m.vest_stop_events
            );
            Ok(0)
        }
        Err(failure) => {
            eprintln!("error: {}", failure.violation);
            let w = &failure.world;
            write(&args.metrics_out, &w.series.to_csv())?;
            write(&args.events_out, &render_log(&w.log))?;
            let dump = serde_json::to_string_pretty(w.as_ref())?;
            match &args.dump_out {
                Some(_) => write(&args.dump_out, &dump)?,
                None => eprintln!("{dump}"),
            }
            Ok(EXIT_INVARIANT)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rackfloor::error::InvariantViolation;
    use rackfloor::sim::{load_scenario, World};

    fn args(dir: &Path) -> RunArgs {
        RunArgs {
            layout: None,
            scenario: dir.join("s.toml"),
            ticks: None,
            seed: None,
            mode: None,
            metrics_out: Some(dir.join("m.csv")),
            events_out: Some(dir.join("e.log")),
            commands: None,
            dump_out: Some(dir.join("dump.json")),
        }
    }

    #[test]
    fn invariant_failure_exits_2_and_dumps() {
        let dir = tempfile::tempdir().unwrap();
        let s = load_scenario("[map]\nlayout = \"E..\"\n[[robots]]\nspawn = [1, 0]\n").unwrap();
        let failure = RunFailure {
            violation: InvariantViolation { tick: 3, what: "test".into() },
            world: Box::new(World::new(&s)),
        };
        let a = args(dir.path());
        assert_eq!(finish(&a, Err(failure)).unwrap(), EXIT_INVARIANT);
        let dump: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("dump.json")).unwrap()).unwrap();
        assert_eq!(dump["tick"], 0);
        assert!(dir.path().join("m.csv").exists());
    }

    #[test]
    fn missing_tick_budget_is_an_input_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("s.toml"), "[map]\nlayout = \"E..\"\n").unwrap();
        let err = prepare(&args(dir.path())).unwrap_err();
        assert!(err.to_string().contains("--ticks"));
    }
}
