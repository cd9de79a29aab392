//! Wearable safety layer. Ranges every robot against every worker and issues
//! stop/slow commands from positions alone; it never looks at planner state.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::grid::{grid_distance_m, GridPos};
use crate::ids::RobotId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VestConfig {
    /// Zone A: robots at or inside this range stop.
    pub stop_radius_m: f64,
    /// Zone B: robots at or inside this range (and outside zone A) slow down.
    pub slow_radius_m: f64,
    pub ranging_noise_std_m: f64,
    /// Fraction of planner speed allowed in zone B.
    pub slow_factor: f64,
}

impl Default for VestConfig {
    fn default() -> Self {
        Self {
            stop_radius_m: 8.0,
            slow_radius_m: 10.0,
            ranging_noise_std_m: 0.0,
            slow_factor: 0.5,
        }
    }
}

impl VestConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.stop_radius_m > 0.0 && self.stop_radius_m < self.slow_radius_m) {
            return Err((
                "vest.stop_radius_m",
                "need 0 < stop_radius_m < slow_radius_m".into(),
            ));
        }
        if !(self.ranging_noise_std_m >= 0.0) {
            return Err(("vest.ranging_noise_std_m", "must be >= 0".into()));
        }
        if !(self.slow_factor > 0.0 && self.slow_factor <= 1.0) {
            return Err(("vest.slow_factor", "must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Ordered so that `max` merges commands from several workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SafetyCommand {
    NoConstraint,
    Slow,
    Stop,
}

/// Command for a single measured distance. Both zones are closed.
pub fn command_for_distance(d: f64, cfg: &VestConfig) -> SafetyCommand {
    if d <= cfg.stop_radius_m {
        SafetyCommand::Stop
    } else if d <= cfg.slow_radius_m {
        SafetyCommand::Slow
    } else {
        SafetyCommand::NoConstraint
    }
}

/// Per-robot command from the nearest worker. With nonzero ranging noise, one
/// Gaussian sample is drawn per (robot, worker) pair in robot-then-worker order.
pub fn vest_commands<R: Rng + ?Sized>(
    workers: &[GridPos],
    robots: &[(RobotId, GridPos)],
    spacing_m: f64,
    cfg: &VestConfig,
    rng: &mut R,
) -> BTreeMap<RobotId, SafetyCommand> {
    let noise = (cfg.ranging_noise_std_m > 0.0)
        .then(|| Normal::new(0.0, cfg.ranging_noise_std_m).expect("finite std"));
    robots
        .iter()
        .map(|&(id, rp)| {
            let mut cmd = SafetyCommand::NoConstraint;
            for &wp in workers {
                let mut d = grid_distance_m(rp, wp, spacing_m);
                if let Some(n) = &noise {
                    d = (d + n.sample(rng)).max(0.0);
                }
                cmd = cmd.max(command_for_distance(d, cfg));
            }
            (id, cmd)
        })
        .collect()
}

/// Allowed speed in nodes per tick. The vest always overrides planner intent.
pub fn effective_speed(planner_speed: f64, cmd: SafetyCommand, slow_factor: f64) -> f64 {
    match cmd {
        SafetyCommand::Stop => 0.0,
        SafetyCommand::Slow => planner_speed * slow_factor,
        SafetyCommand::NoConstraint => planner_speed,
    }
}

/// Whole nodes a robot at `speed` nodes/tick may advance during `tick`.
/// Fractional speeds move on a fixed cadence starting at tick 0, so half
/// speed moves on even ticks only.
pub fn nodes_this_tick(speed: f64, tick: u64) -> u32 {
    if speed <= 0.0 {
        return 0;
    }
    let ceil = |x: f64| (x - 1e-9).ceil().max(0.0) as u64;
    (ceil((tick + 1) as f64 * speed) - ceil(tick as f64 * speed)) as u32
}
