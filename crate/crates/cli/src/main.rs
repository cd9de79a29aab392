mod run;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rackfloor::sim::Mode;

/// Exit status for bad arguments, unreadable files and invalid scenarios.
pub const EXIT_INVALID: u8 = 1;
/// Exit status when the engine detects a broken invariant.
pub const EXIT_INVARIANT: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "sim", version, about = "Rack warehouse simulator and fleet service")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run a scenario headlessly and write its metrics and event log.
    Run(run::RunArgs),
    /// Serve a live world over HTTP and a WebSocket stream.
    Serve(serve::ServeArgs),
    /// Check a scenario and report what it contains.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        layout: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Safelog,
    Legacy,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Safelog => Mode::SafeLog,
            ModeArg::Legacy => Mode::Legacy,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match cli.cmd {
        Cmd::Run(args) => run::run(args),
        Cmd::Serve(args) => serve::serve(args),
        Cmd::Validate { scenario, layout } => match run::load(&scenario, layout.as_deref()) {
            Ok(s) => {
                println!(
                    "ok: {}x{} map, {} robots, {} racks, {} stations, {} workers, {} scripted commands",
                    s.map.width(),
                    s.map.height(),
                    s.robots.len(),
                    s.racks.len(),
                    s.stations.len(),
                    s.workers.len(),
                    s.commands.len()
                );
                0
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                EXIT_INVALID
            }
        },
    };
    ExitCode::from(code)
}
