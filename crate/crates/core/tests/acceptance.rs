//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero when
//! anything fails.

mod support;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rackfloor::ar::guidance;
use rackfloor::batch::{par_map, run_batch};
use rackfloor::grid::{GridPos, WarehouseMap};
use rackfloor::hir::{update_belief, BehaviorState, GoalBelief, HirConfig};
use rackfloor::ids::{RobotId, WorkerId};
use rackfloor::layouts::{random_scenario, reference_scenario, RandomScenarioSpec};
use rackfloor::path::TimedPath;
use rackfloor::planner::{plan_human_path, plan_robot_path, PlannerConfig};
use rackfloor::service::{apply_command, GoalRef, OperatorCommand};
use rackfloor::sim::{load_scenario, run_with_commands, step, EventKind, Mode, ScriptedCommand, World};
use rackfloor::vest::{command_for_distance, SafetyCommand, VestConfig};
use rand::Rng;

use support::*;

type Check = fn() -> Result<String, String>;

fn main() {
    let checks: &[(&str, Check, Option<Duration>)] = &[
        ("vest thresholds", vest_thresholds, None),
        ("safety under adversarial planning", adversarial_safety, Some(Duration::from_secs(60))),
        ("collision freedom", collision_freedom, None),
        ("planner optimality", planner_optimality, None),
        ("human encounter routing", human_routing, None),
        ("throughput ordering", throughput_ordering, Some(Duration::from_secs(120))),
        ("hir convergence", hir_convergence, None),
        ("belief normalization", belief_normalization, None),
        ("determinism", determinism, None),
        ("x-ray band", xray_band, None),
        ("hand-traced delivery", hand_trace, None),
    ];
    let mut failed = 0;
    for &(name, check, limit) in checks {
        let t = Instant::now();
        let mut result = check();
        let took = t.elapsed();
        if let (Ok(msg), Some(limit)) = (&result, limit) {
            if took > limit {
                result = Err(format!("{msg}; took {took:.1?}, limit {limit:?}"));
            }
        }
        match result {
            Ok(msg) => println!("PASS  {name}: {msg} [{took:.2?}]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name}: {msg} [{took:.2?}]");
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn vest_thresholds() -> Result<String, String> {
    use SafetyCommand::*;
    let cfg = VestConfig::default();
    let sweep = [5.0, 7.99, 8.0, 8.01, 9.0, 10.0, 10.01, 15.0];
    let want = [Stop, Stop, Stop, Slow, Slow, Slow, NoConstraint, NoConstraint];
    let got: Vec<_> = sweep.iter().map(|&d| command_for_distance(d, &cfg)).collect();
    if got == want {
        Ok(format!("{} distances exact", sweep.len()))
    } else {
        Err(format!("got {got:?}"))
    }
}

struct Frame {
    robots: Vec<(RobotId, GridPos, bool)>,
    workers: Vec<GridPos>,
}

fn frame(w: &World) -> Frame {
    Frame {
        robots: w.robots.iter().map(|r| (r.id, r.pos, r.is_broken())).collect(),
        workers: w.workers.iter().filter(|k| k.inside).map(|k| k.pos).collect(),
    }
}

/// Steps `world` for `ticks`, applying `script` at tick boundaries and
/// handing each (before, after) pair to `judge`.
fn watch(
    mut world: World,
    ticks: u64,
    script: &[ScriptedCommand],
    mut judge: impl FnMut(u64, &Frame, &Frame) -> Option<String>,
) -> Result<World, String> {
    let mut next = 0;
    let mut before = frame(&world);
    while world.tick < ticks {
        while let Some(c) = script.get(next).filter(|c| c.tick <= world.tick) {
            let _ = apply_command(&mut world, &c.command);
            next += 1;
        }
        let t = world.tick;
        step(&mut world).map_err(|v| format!("invariant at tick {t}: {v}"))?;
        let after = frame(&world);
        if let Some(msg) = judge(t, &before, &after) {
            return Err(format!("tick {t}: {msg}"));
        }
        before = after;
    }
    Ok(world)
}

fn within_8m(a: GridPos, b: GridPos, spacing: f64) -> bool {
    let dx = a.x as f64 - b.x as f64;
    let dy = a.y as f64 - b.y as f64;
    (dx * dx + dy * dy) * spacing * spacing <= 64.0
}

fn adversarial_safety() -> Result<String, String> {
    let spec = RandomScenarioSpec {
        workers: 2,
        fault_injection: true,
        ..Default::default()
    };
    let seeds: Vec<u64> = (0..100).collect();
    let results = par_map(&seeds, |&seed| {
        let s = random_scenario(seed, spec);
        let spacing = s.map.spacing_m();
        let mut exposed = 0u64;
        watch(World::new(&s), 2000, &[], |_, a, b| {
            for (ra, rb) in a.robots.iter().zip(&b.robots) {
                let near = a.workers.iter().any(|&w| within_8m(ra.1, w, spacing));
                exposed += near as u64;
                if near && ra.1 != rb.1 {
                    return Some(format!("robot {} moved {} -> {} near a worker", ra.0, ra.1, rb.1));
                }
            }
            None
        })
        .map(|_| exposed)
        .map_err(|e| format!("seed {seed}: {e}"))
    });
    let mut exposed = 0;
    for r in results {
        exposed += r?;
    }
    if exposed == 0 {
        return Err("no robot was ever near a worker; the check saw nothing".into());
    }
    Ok(format!("100 seeds x 2000 ticks, 0 violations over {exposed} robot-ticks within 8 m"))
}

fn collision_freedom() -> Result<String, String> {
    let seeds: Vec<u64> = (1000..1100).collect();
    let results = par_map(&seeds, |&seed| {
        let s = random_scenario(seed, RandomScenarioSpec::default());
        let mut script = Vec::new();
        if seed % 2 == 0 && !s.robots.is_empty() {
            let mut rng = rng(seed);
            let robot_id = RobotId(rng.random_range(0..s.robots.len() as u32));
            let tick = rng.random_range(100..1500);
            script.push(ScriptedCommand {
                tick,
                command: OperatorCommand::BreakRobot { robot_id },
            });
        }
        let mut picks = 0;
        watch(World::new(&s), 2000, &script, |_, a, b| {
            let live: Vec<usize> = (0..b.robots.len()).filter(|&i| !b.robots[i].2 && !a.robots[i].2).collect();
            let mut seen = BTreeSet::new();
            for &i in &live {
                if !seen.insert(b.robots[i].1) {
                    return Some(format!("node collision at {}", b.robots[i].1));
                }
            }
            for &i in &live {
                for &j in &live {
                    if i < j && a.robots[i].1 == b.robots[j].1 && a.robots[j].1 == b.robots[i].1 && a.robots[i].1 != a.robots[j].1 {
                        return Some(format!("robots {} and {} swapped", a.robots[i].0, a.robots[j].0));
                    }
                }
            }
            None
        })
        .map(|w| {
            picks += w.metrics.picks_completed;
            picks
        })
        .map_err(|e| format!("seed {seed}: {e}"))
    });
    let mut picks = 0;
    for r in results {
        picks += r?;
    }
    Ok(format!("100 seeds x 2000 ticks, 0 collisions, 0 swaps, {picks} picks"))
}

fn planner_optimality() -> Result<String, String> {
    let cfg = PlannerConfig {
        horizon_ticks: 64,
        ..Default::default()
    };
    let (mut cases, mut solvable) = (0, 0);
    for seed in 0..400 {
        let c = plan_case(seed);
        let want = earliest_arrival(&c.map, &c.table, PLANNED, c.start, c.goal, c.t0, cfg.horizon_ticks);
        let mut table = c.table.clone();
        let got = plan_robot_path(&c.map, &mut table, PLANNED, c.start, c.goal, c.t0, &cfg)
            .ok()
            .map(|p| p.end_tick());
        if got != want {
            return Err(format!("seed {seed}: planner {got:?}, oracle {want:?}"));
        }
        cases += 1;
        solvable += want.is_some() as u32;
    }
    Ok(format!("{cases} cases ({solvable} solvable) match the time-expanded oracle"))
}

fn human_routing() -> Result<String, String> {
    let cfg = PlannerConfig {
        horizon_ticks: 20,
        lambda: 10_000.0,
        encounter_radius_m: 1.0,
        ..Default::default()
    };
    let (mut zero, mut positive, mut seed) = (0, 0, 0u64);
    while zero + positive < 50 {
        seed += 1;
        let c = human_case(seed);
        let Some((min, _)) = min_encounters(&c.map, &c.table, c.start, c.goal, 0, cfg.horizon_ticks, cfg.encounter_radius_m) else {
            continue;
        };
        let (_, got) = plan_human_path(&c.map, &c.table, c.start, c.goal, 0, &cfg)
            .map_err(|e| format!("seed {seed}: planner failed ({e}) where the oracle found {min}"))?;
        if got != min {
            return Err(format!("seed {seed}: planner {got} encounter ticks, oracle minimum {min}"));
        }
        if min == 0 {
            zero += 1;
        } else {
            positive += 1;
        }
    }
    Ok(format!("50 instances: {zero} encounter-free, {positive} at the oracle minimum"))
}

fn throughput_ordering() -> Result<String, String> {
    let jobs: Vec<_> = (1..=10u64)
        .flat_map(|seed| [(reference_scenario(seed, Mode::SafeLog), 20_000), (reference_scenario(seed, Mode::Legacy), 20_000)])
        .collect();
    let out = run_batch(&jobs);
    let mut ratios = Vec::new();
    let mut bad = Vec::new();
    for (i, pair) in out.chunks(2).enumerate() {
        let seed = i + 1;
        let safe = pair[0].as_ref().map_err(|e| format!("seed {seed} safelog: {e}"))?;
        let legacy = pair[1].as_ref().map_err(|e| format!("seed {seed} legacy: {e}"))?;
        let (sp, lp) = (safe.metrics.picks_completed, legacy.metrics.picks_completed);
        let (sd, ld) = (safe.metrics.robot_downtime_ticks, legacy.metrics.robot_downtime_ticks);
        if !(sp > lp && ld > sd) {
            bad.push(format!("seed {seed}: picks {sp} vs {lp}, downtime {sd} vs {ld}"));
        }
        ratios.push(sp as f64 / lp.max(1) as f64);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let (lo, hi) = ratios.iter().fold((f64::MAX, f64::MIN), |(a, b), &r| (a.min(r), b.max(r)));
    let msg = format!("picks ratio safelog/legacy mean {mean:.3} (min {lo:.3}, max {hi:.3})");
    if bad.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; {}", bad.join("; ")))
    }
}

fn open_floor(n: u32, entry: bool) -> WarehouseMap {
    let mut rows: Vec<String> = (0..n).map(|_| ".".repeat(n as usize)).collect();
    if entry {
        rows[0].replace_range(0..1, "E");
    }
    rackfloor::grid::parse_layout(
        &rows.join("\n"),
        rackfloor::grid::LayoutOptions {
            require_entry: entry,
            ..Default::default()
        },
    )
    .unwrap()
}

/// A shortest path on an open floor with randomly interleaved axis moves.
fn direct_walk<R: Rng>(rng: &mut R, from: GridPos, to: GridPos) -> Vec<GridPos> {
    let mut p = from;
    let mut out = vec![p];
    while p != to {
        let can_x = p.x != to.x;
        let can_y = p.y != to.y;
        let along_x = can_x && (!can_y || rng.random_bool(0.5));
        if along_x {
            p.x = if to.x > p.x { p.x + 1 } else { p.x - 1 };
        } else {
            p.y = if to.y > p.y { p.y + 1 } else { p.y - 1 };
        }
        out.push(p);
    }
    out
}

/// Start, three goals at least 8 nodes apart and the true one, redrawn until
/// every decoy costs a detour of at least 6 steps. A decoy lying on a shortest route to the true
/// goal looks identical to it until the walker passes it, so no observer
/// could separate the two.
fn identifiable_goals<R: Rng>(rng: &mut R, map: &WarehouseMap) -> (GridPos, Vec<GridPos>, usize) {
    loop {
        let mut cells: Vec<GridPos> = map.positions().collect();
        let mut take = |rng: &mut R| cells.swap_remove(rng.random_range(0..cells.len()));
        let start = take(rng);
        let goals: Vec<GridPos> = (0..3).map(|_| take(rng)).collect();
        let truth = rng.random_range(0..3);
        let a = goals[truth];
        let detour = |b: GridPos| start.manhattan(a) + a.manhattan(b) - start.manhattan(b);
        let apart = goals.iter().all(|&g| goals.iter().all(|&h| g == h || g.manhattan(h) >= 8));
        if apart && goals.iter().all(|&b| b == a || detour(b) >= 6) {
            return (start, goals, truth);
        }
    }
}

fn hir_convergence() -> Result<String, String> {
    let map = open_floor(20, false);
    let cfg = HirConfig::default();
    let mut converged = 0;
    for seed in 0..50 {
        let mut rng = rng(7_000 + seed);
        let (start, goals, truth) = identifiable_goals(&mut rng, &map);
        let traj = direct_walk(&mut rng, start, goals[truth]);
        let mut b = GoalBelief::uniform(goals.clone()).unwrap();
        let mut hit = false;
        for k in 1..traj.len().min(16) {
            b = update_belief(&b, traj[k - 1], traj[k], &map, &cfg).unwrap().belief;
            let direct = batch_posterior(&map, &[1.0 / 3.0; 3], &goals, &traj[..=k], cfg.beta);
            if b.probs().iter().zip(&direct).any(|(a, d)| (a - d).abs() > 1e-9) {
                return Err(format!("seed {seed}: sequential {:?} vs batch {direct:?}", b.probs()));
            }
            hit |= b.probs()[truth] > 0.9;
        }
        converged += hit as u32;
    }
    if converged < 48 {
        return Err(format!("only {converged}/50 trajectories converged"));
    }
    let mut stopped = 0;
    for seed in 0..50 {
        run_to_exit(seed).map_err(|e| format!("run-to-exit seed {seed}: {e}"))?;
        stopped += 1;
    }
    Ok(format!("{converged}/50 converged within 15 steps (batch Bayes agrees); {stopped}/50 run-to-exit stops"))
}

fn run_to_exit(seed: u64) -> Result<(), String> {
    let mut rng = rng(9_000 + seed);
    let layout: Vec<String> = (0..20).map(|y| if y == 0 { format!("E{}", ".".repeat(19)) } else { ".".repeat(20) }).collect();
    let text = format!(
        "seed = {seed}\n[map]\nlayout = \"\"\"\n{}\"\"\"\n[[robots]]\nspawn = [19, 0]\n[[robots]]\nspawn = [0, 19]\n[[workers]]\n",
        layout.join("\n")
    );
    let s = load_scenario(&text).map_err(|e| e.to_string())?;
    let mut world = World::new(&s);
    let goal = GridPos::new(rng.random_range(10..19), rng.random_range(10..19));
    apply_command(
        &mut world,
        &OperatorCommand::DispatchWorker {
            worker_id: WorkerId(0),
            goal: GoalRef::Node { node: goal },
            task: Default::default(),
        },
    )
    .map_err(|e| e.to_string())?;
    for _ in 0..rng.random_range(10..16) {
        step(&mut world).map_err(|e| e.to_string())?;
    }
    // Recall re-seeds the belief with the exit as the assigned goal, so the
    // dash starts with the exit as the leading guess.
    apply_command(&mut world, &OperatorCommand::RecallWorker { worker_id: WorkerId(0) }).map_err(|e| e.to_string())?;
    let w = &mut world.workers[0];
    if w.pos.manhattan(GridPos::new(0, 0)) < 6 {
        return Err(format!("worker at {} is too close to the exit", w.pos));
    }
    if world.beliefs[&WorkerId(0)].argmax().0 != GridPos::new(0, 0) {
        return Err("exit is not the leading goal after recall".into());
    }
    w.speed = 2;
    for k in 1..=3 {
        let events = step(&mut world).map_err(|e| e.to_string())?;
        let stop = events.iter().any(|e| matches!(e.kind, EventKind::EmergencyStop { .. }));
        let emergency = world.workers[0].behavior == BehaviorState::Emergency;
        if emergency != stop {
            return Err(format!("tick {k}: emergency {emergency} but stop event {stop}"));
        }
        if emergency {
            return if world.fleet_stop { Ok(()) } else { Err("fleet not stopped".into()) };
        }
    }
    Err("no emergency within 3 ticks".into())
}

fn belief_normalization() -> Result<String, String> {
    let mut updates = 0u64;
    for seed in 0..10_000u64 {
        let mut rng = rng(50_000 + seed);
        let n = rng.random_range(4..=12);
        let map = random_floor(&mut rng, n, n, 0.15);
        let cells: Vec<GridPos> = map.positions().filter(|&p| map.is_passable(p)).collect();
        if cells.is_empty() {
            continue;
        }
        let k = rng.random_range(1..=5);
        let goals: Vec<GridPos> = (0..k).map(|_| map.pos_of(rng.random_range(0..map.node_count()))).collect();
        let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.001..1.0)).collect();
        let mut b = GoalBelief::from_weights(goals, weights).unwrap();
        let cfg = HirConfig {
            beta: rng.random_range(0.01..40.0),
            ..Default::default()
        };
        let start = cells[rng.random_range(0..cells.len())];
        let len = rng.random_range(1..30);
        let walk = random_walk(&mut rng, &map, start, len, 0);
        for pair in walk.steps().windows(2) {
            b = update_belief(&b, pair[0], pair[1], &map, &cfg).map_err(|e| format!("seed {seed}: {e}"))?.belief;
            updates += 1;
            let sum: f64 = b.probs().iter().sum();
            if (sum - 1.0).abs() > 1e-9 || b.probs().iter().any(|&p| !(p >= 0.0)) {
                return Err(format!("seed {seed}: probabilities {:?}", b.probs()));
            }
        }
    }
    Ok(format!("10000 sequences, {updates} updates, all normalized"))
}

fn determinism() -> Result<String, String> {
    let mut runs = Vec::new();
    for seed in 0..6u64 {
        let s = random_scenario(seed, RandomScenarioSpec::default());
        let script = vec![
            ScriptedCommand {
                tick: 300,
                command: OperatorCommand::BreakRobot { robot_id: RobotId(0) },
            },
            ScriptedCommand {
                tick: 700,
                command: OperatorCommand::SetMode { mode: Mode::Legacy },
            },
            ScriptedCommand {
                tick: 1200,
                command: OperatorCommand::SetMode { mode: Mode::SafeLog },
            },
        ];
        runs.push((s, script, 2000));
    }
    runs.push((reference_scenario(3, Mode::SafeLog), Vec::new(), 3000));
    for (i, (s, script, ticks)) in runs.iter().enumerate() {
        let a = run_with_commands(s, script, *ticks).map_err(|e| format!("run {i}: {e}"))?;
        let b = run_with_commands(s, script, *ticks).map_err(|e| format!("run {i}: {e}"))?;
        if a.event_log() != b.event_log() {
            return Err(format!("run {i}: event logs differ"));
        }
        if a.metrics_csv() != b.metrics_csv() {
            return Err(format!("run {i}: metrics differ"));
        }
    }
    Ok(format!("{} scripted runs byte-identical twice", runs.len()))
}

const BAND_EDGES: [(i64, i64); 10] = [(20, 0), (0, -20), (12, 16), (-16, 12), (19, 0), (40, 0), (-24, 32), (41, 0), (0, 39), (28, 29)];

fn xray_band() -> Result<String, String> {
    let mut members = 0;
    for seed in 0..1000u64 {
        let mut rng = rng(80_000 + seed);
        let (w, h) = (rng.random_range(10..=60u32), rng.random_range(10..=60u32));
        let worker = GridPos::new(rng.random_range(0..w), rng.random_range(0..h));
        let mut taken = BTreeSet::from([worker, GridPos::new(0, 0)]);
        let mut spawns = Vec::new();
        for &(dx, dy) in &BAND_EDGES {
            let (x, y) = (worker.x as i64 + dx, worker.y as i64 + dy);
            if x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && taken.insert(GridPos::new(x as u32, y as u32)) {
                spawns.push(GridPos::new(x as u32, y as u32));
            }
        }
        for _ in 0..rng.random_range(0..25) {
            let p = GridPos::new(rng.random_range(0..w), rng.random_range(0..h));
            if taken.insert(p) {
                spawns.push(p);
            }
        }
        let rows: Vec<String> = (0..h).map(|y| if y == 0 { format!("E{}", ".".repeat(w as usize - 1)) } else { ".".repeat(w as usize) }).collect();
        let robots: String = spawns.iter().map(|p| format!("[[robots]]\nspawn = [{}, {}]\n", p.x, p.y)).collect();
        let text = format!("seed = {seed}\n[map]\nlayout = \"\"\"\n{}\"\"\"\n{robots}[[workers]]\n", rows.join("\n"));
        let s = load_scenario(&text).map_err(|e| format!("seed {seed}: {e}"))?;
        let mut world = World::new(&s);
        let wk = &mut world.workers[0];
        wk.inside = true;
        wk.pos = worker;
        wk.path = Some(TimedPath::stay(world.tick, worker));
        let g = guidance(&world, WorkerId(0), &world.ar).map_err(|e| format!("seed {seed}: {e}"))?;
        let got: BTreeSet<RobotId> = g.xray_robots.iter().map(|r| r.robot_id).collect();
        let want = xray_members(&world, worker);
        if got != want {
            return Err(format!("seed {seed}: feed {got:?}, direct filter {want:?}"));
        }
        members += want.len();
    }
    Ok(format!("1000 worlds, {members} band members, 0 discrepancies"))
}

fn hand_trace() -> Result<String, String> {
    let s = load_scenario(
        r#"
seed = 7
[map]
layout = "E...R...P"
[[robots]]
spawn = [1, 0]
[inventory]
fill_units_per_bin = 1
[[orders.scheduled]]
tick = 0
lines = [{ product = "p0-0-0", quantity = 1 }]
"#,
    )
    .map_err(|e| e.to_string())?;
    let out = run_with_commands(&s, &[], 100).map_err(|e| e.to_string())?;
    let done = out.events.iter().find(|e| matches!(e.kind, EventKind::PickDone { .. })).map(|e| e.tick);
    match done {
        Some(21) => Ok("pick completes at tick 21".into()),
        other => Err(format!("pick completed at {other:?}")),
    }
}
