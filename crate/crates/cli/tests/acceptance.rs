//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails. The learning runs take a few hours on one core.

use std::f64::consts::PI;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng as _;

use resetless::envs::{make_domain, task_reward, task_success, ArenaConfig, Family, ManipAction, ManipState};
use resetless::eval::task_share;
use resetless::mdp::TaskId;
use resetless::nn::Mat;
use resetless::orchestrator::episodic::{train_reach, ReachSchedule};
use resetless::orchestrator::{build_trainer, Algorithm, TrainerConfig};
use resetless::rng::{stream, Rng};
use resetless::sac::{Batch, SacAgent, SacConfig};
use resetless::taskgraph::{GraphThresholds, TaskGraph};

/// Written straight to stderr so the verdicts show even when test output is captured.
fn report(line: std::fmt::Arguments) {
    let _ = writeln!(std::io::stderr().lock(), "{line}");
}

struct Verdicts(Vec<(String, bool)>);

impl Verdicts {
    fn record(&mut self, name: &str, pass: bool, detail: String, started: Instant) {
        let tag = if pass { "PASS" } else { "FAIL" };
        report(format_args!("{tag} {name}: {detail} [{:.1}s]", started.elapsed().as_secs_f64()));
        self.0.push((name.to_string(), pass));
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// ---------------------------------------------------------------------------
// Reward and success transcriptions.

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn one(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn oracle_reward(name: &str, s: &ManipState, c: &ArenaConfig) -> f64 {
    let [x, y, z] = s.obj_xyz;
    let [hx, hy, hz] = s.hand_xyz;
    let threshold = c.lift_threshold;
    let d3 = |g: [f64; 3]| norm(&[x - g[0], y - g[1], z - g[2]]);
    let d2 = |g: [f64; 2]| norm(&[x - g[0], y - g[1]]);
    match name {
        "recenter" => -3.0 * d2(c.goal_xy) - norm(&[x - hx, y - hy, z - hz]),
        "lift" => -(z - c.goal_z).abs(),
        "pipe_lift" => -2.0 * (z - c.goal_z).abs() - 2.0 * (s.closure - c.q_goal).abs(),
        "flipup" => {
            let e = (s.wrist_theta_x - c.theta_x_goal).abs();
            -5.0 * e - 50.0 * one(z < threshold) + 10.0 * one(e < 0.15 && z > threshold)
        }
        "reorient" => -(s.obj_theta_z - c.theta_z_goal).abs(),
        "insert1" => {
            let d1 = d3(c.insert_waypoint);
            -d1 + 10.0 * one(d1 < 0.1)
        }
        "insert2" => {
            let d2 = d3(c.insert_goal);
            -d2 + 10.0 * one(d2 < 0.1)
        }
        "remove" => -d3(c.arena_center),
        "bulb_insert" => {
            let g = c.lamp_goal;
            let dxy = d2([g[0], g[1]]);
            -dxy - 2.0 * (z - g[2]).abs() + one(dxy < 0.1) + 10.0 * one(dxy < 0.1 && (z - g[2]).abs() < 0.1)
                - one(z < threshold)
        }
        "dunk" => {
            let d = d3(c.basket_goal);
            -d + 20.0 * one(d < 0.2) + 50.0 * one(d < 0.1) - one(z < threshold)
        }
        "grasp" => -norm(&[x - hx, y - hy]) + one(s.attached),
        "fill_drawer" => -d2(c.drawer_mouth) + 10.0 * one(oracle_in_drawer(s, c)),
        "pull_drawer" => -norm(&[hx - c.drawer_handle[0], hy - c.drawer_handle[1]]) + 5.0 * s.obj_theta_z,
        "perturb" => 0.0,
        other => panic!("no transcription for {other}"),
    }
}

fn oracle_in_drawer(s: &ManipState, c: &ArenaConfig) -> bool {
    !s.attached && norm(&[s.obj_xyz[0] - c.drawer_slot[0], s.obj_xyz[1] - c.drawer_slot[1]]) < 1e-6
}

fn oracle_success(name: &str, s: &ManipState, c: &ArenaConfig) -> bool {
    let [x, y, z] = s.obj_xyz;
    let threshold = c.lift_threshold;
    let d3 = |g: [f64; 3]| norm(&[x - g[0], y - g[1], z - g[2]]);
    let flipped = z > threshold && (s.wrist_theta_x - c.theta_x_goal).abs() < 0.15;
    match name {
        "recenter" => norm(&[x - c.goal_xy[0], y - c.goal_xy[1]]) < 0.1 && z < threshold,
        "lift" | "pipe_lift" => z > c.lifted_height,
        "flipup" => flipped,
        "reorient" => flipped && (s.obj_theta_z - c.theta_z_goal).abs() < 0.1,
        "insert1" => z > threshold && d3(c.insert_waypoint) < 0.05,
        "insert2" => z > threshold && d3(c.insert_goal) < 0.05,
        "remove" => d3(c.arena_center) < 0.1,
        "bulb_insert" => {
            let g = c.lamp_goal;
            norm(&[x - g[0], y - g[1]]) < 0.1 && (z - g[2]).abs() < 0.1
        }
        "dunk" => {
            let g = c.basket_goal;
            norm(&[x - g[0], y - g[1]]) < 0.1 && (z - g[2]).abs() < 0.15
        }
        "grasp" => s.attached,
        "fill_drawer" => oracle_in_drawer(s, c),
        "pull_drawer" => s.obj_theta_z >= 1.0 && !oracle_in_drawer(s, c),
        "perturb" => false,
        other => panic!("no transcription for {other}"),
    }
}

/// Task names as listed per family; the pipe family's lift is its own formula.
fn transcription_names(family: Family) -> Vec<&'static str> {
    match family {
        Family::Inhand => vec!["recenter", "lift", "flipup", "reorient", "perturb"],
        Family::Pipe => vec!["recenter", "pipe_lift", "insert1", "insert2", "remove", "perturb"],
        Family::Lightbulb => vec!["recenter", "lift", "flipup", "bulb_insert", "perturb"],
        Family::Basketball => vec!["recenter", "lift", "dunk", "perturb"],
        Family::Pincer => vec!["grasp", "fill_drawer", "pull_drawer", "perturb"],
    }
}

fn near(rng: &mut Rng, p: [f64; 3], scale: f64) -> [f64; 3] {
    let mut q = p;
    for v in &mut q {
        *v += rng.random_range(-scale..scale);
    }
    [q[0].clamp(-0.5, 0.5), q[1].clamp(-0.5, 0.5), q[2].clamp(0.0, 0.6)]
}

/// Arena states concentrated around every threshold the formulas test.
fn random_state(rng: &mut Rng, c: &ArenaConfig, family: Family) -> ManipState {
    let anchors = [
        [c.goal_xy[0], c.goal_xy[1], 0.0],
        [c.goal_xy[0], c.goal_xy[1], c.goal_z],
        c.insert_waypoint,
        c.insert_goal,
        c.arena_center,
        c.basket_goal,
        c.lamp_goal,
        [c.drawer_mouth[0], c.drawer_mouth[1], 0.0],
        [0.0, 0.0, c.lift_threshold],
        [0.0, 0.0, c.lifted_height],
    ];
    let scale = [0.02, 0.06, 0.15, 0.5][rng.random_range(0..4)];
    let anchor = anchors[rng.random_range(0..anchors.len())];
    let mut obj = near(rng, anchor, scale);
    if rng.random_bool(0.1) {
        obj = [c.drawer_slot[0], c.drawer_slot[1], 0.0];
    }
    let hand = if rng.random_bool(0.2) {
        [c.drawer_handle[0] + rng.random_range(-0.1..0.1), c.drawer_handle[1] + rng.random_range(-0.1..0.1), 0.0]
    } else {
        near(rng, obj, 0.3)
    };
    let wrist = if rng.random_bool(0.5) {
        c.theta_x_goal + rng.random_range(-0.3..0.3)
    } else {
        rng.random_range(0.0..2.0 * PI)
    };
    let theta_z = if family == Family::Pincer {
        rng.random_range(0.0..=1.0)
    } else if rng.random_bool(0.5) {
        c.theta_z_goal + rng.random_range(-0.3..0.3)
    } else {
        rng.random_range(-PI..PI)
    };
    ManipState {
        hand_xyz: hand,
        wrist_theta_x: wrist,
        closure: rng.random_range(0.0..=1.0),
        obj_xyz: obj,
        obj_theta_z: theta_z,
        attached: rng.random_bool(0.3),
        prev_task: rng.random_range(0..family.task_count()),
    }
}

fn formula_oracle() -> (bool, String) {
    let c = ArenaConfig::default();
    let mut rng = stream(20, "formula-oracle", 0);
    let (mut checked, mut worst, mut mismatches) = (0usize, 0.0f64, 0usize);
    let mut success_counts = (0usize, 0usize);
    for family in Family::ALL {
        for (task, name) in transcription_names(family).into_iter().enumerate() {
            for _ in 0..10_000 {
                let s = random_state(&mut rng, &c, family);
                let s2 = random_state(&mut rng, &c, family);
                let got = task_reward(family, task, &s, &ManipAction::default(), &s2, &c).unwrap();
                worst = worst.max((got - oracle_reward(name, &s2, &c)).abs());
                let ok = task_success(family, task, &s2, &c).unwrap();
                if ok != oracle_success(name, &s2, &c) {
                    mismatches += 1;
                }
                if ok {
                    success_counts.0 += 1;
                } else {
                    success_counts.1 += 1;
                }
                checked += 1;
            }
        }
    }
    let pass = worst <= 1e-12 && mismatches == 0 && success_counts.0 > 0;
    (
        pass,
        format!(
            "{checked} states, max |reward diff| {worst:.1e}, {mismatches} success mismatches ({} true / {} false)",
            success_counts.0, success_counts.1
        ),
    )
}

// ---------------------------------------------------------------------------
// Task graph transcriptions, one ordered rule table per graph.

#[derive(Clone, Copy)]
enum P {
    Lifted,
    Upright,
    NotCentered3,
    Centered2,
    PrevRecenter,
    PrevGrasp,
    Inserted,
    AtWaypoint,
    Attached,
    InDrawer,
}

fn holds(p: P, s: &ManipState, c: &ArenaConfig, family: Family) -> bool {
    let q = s.obj_xyz;
    let to = |g: [f64; 3]| norm(&[q[0] - g[0], q[1] - g[1], q[2] - g[2]]);
    let prev = family.tasks()[s.prev_task].name();
    match p {
        P::Lifted => q[2] > 0.15,
        P::Upright => (s.wrist_theta_x - PI).abs() < 0.1,
        P::NotCentered3 => to(c.arena_center) > 0.1,
        P::Centered2 => norm(&[q[0] - c.arena_center[0], q[1] - c.arena_center[1]]) < 0.1,
        P::PrevRecenter => prev == "recenter",
        P::PrevGrasp => prev == "grasp",
        P::Inserted => to(c.insert_goal) < 0.05,
        P::AtWaypoint => to(c.insert_waypoint) < 0.05,
        P::Attached => s.attached,
        P::InDrawer => oracle_in_drawer(s, c),
    }
}

type Rule = (&'static [(P, bool)], &'static str);

fn rule_table(family: Family) -> &'static [Rule] {
    use P::*;
    match family {
        Family::Inhand => &[
            (&[(Upright, true), (Lifted, true)], "reorient"),
            (&[(Lifted, true)], "flipup"),
            (&[(NotCentered3, true), (PrevRecenter, true)], "perturb"),
            (&[(NotCentered3, true)], "recenter"),
            (&[], "lift"),
        ],
        Family::Pipe => &[
            (&[(Inserted, true)], "remove"),
            (&[(AtWaypoint, true)], "insert2"),
            (&[(Lifted, true)], "insert1"),
            (&[(NotCentered3, true), (PrevRecenter, true)], "perturb"),
            (&[(NotCentered3, true)], "recenter"),
            (&[], "lift"),
        ],
        Family::Lightbulb => &[
            (&[(Centered2, false), (Lifted, false), (PrevRecenter, true)], "perturb"),
            (&[(Centered2, false), (Lifted, false)], "recenter"),
            (&[(Centered2, true), (Lifted, false)], "lift"),
            (&[(Lifted, true), (Upright, false)], "flipup"),
            (&[(Lifted, true), (Upright, true)], "bulb_insert"),
        ],
        Family::Basketball => &[
            (&[(Centered2, false), (Lifted, false), (PrevRecenter, true)], "perturb"),
            (&[(Centered2, false), (Lifted, false)], "recenter"),
            (&[(Centered2, true), (Lifted, false)], "lift"),
            (&[(Lifted, true)], "dunk"),
        ],
        Family::Pincer => &[
            (&[(Attached, true)], "fill_drawer"),
            (&[(InDrawer, true)], "pull_drawer"),
            (&[(PrevGrasp, true)], "perturb"),
            (&[], "grasp"),
        ],
    }
}

fn oracle_graph(family: Family, s: &ManipState, c: &ArenaConfig) -> &'static str {
    rule_table(family)
        .iter()
        .find(|(conds, _)| conds.iter().all(|&(p, want)| holds(p, s, c, family) == want))
        .map(|r| r.1)
        .expect("every table ends in a catch-all or is exhaustive")
}

fn graph_oracle() -> (bool, String) {
    let c = ArenaConfig::default();
    let mut rng = stream(21, "graph-oracle", 0);
    let mut disagreements = 0;
    let mut hits = std::collections::BTreeSet::new();
    let total = 100_000;
    for i in 0..total {
        let family = Family::ALL[i % Family::ALL.len()];
        let graph = TaskGraph::new(family, GraphThresholds::default(), c.clone()).unwrap();
        let mut s = random_state(&mut rng, &c, family);
        if rng.random_bool(0.3) {
            let z = if rng.random_bool(0.5) { 0.0 } else { 0.15 };
            s.obj_xyz = near(&mut rng, [0.0, 0.0, z], 0.12);
        }
        let expected = oracle_graph(family, &s, &c);
        let got = family.tasks()[graph.query(&s)].name();
        if got != expected {
            disagreements += 1;
        }
        hits.insert((family.name(), expected));
    }
    let branches: usize = Family::ALL.iter().map(|f| f.task_count()).sum();
    (
        disagreements == 0 && hits.len() == branches,
        format!("{total} states, {disagreements} disagreements, {}/{branches} outcomes exercised", hits.len()),
    )
}

// ---------------------------------------------------------------------------
// Loss gradients against central differences.

const H: f64 = 1e-5;

fn random_mat(rng: &mut Rng, r: usize, c: usize, scale: f64) -> Mat {
    Mat::from_shape_fn((r, c), |_| rng.random_range(-scale..scale))
}

fn tiny_agent(seed: u64) -> SacAgent {
    let cfg = SacConfig {
        policy_hidden: vec![6, 5],
        q_hidden: vec![5, 4],
        batch_size: 7,
        replay_capacity: 100,
        warmup_steps: 0,
        ..SacConfig::paper()
    };
    let mut rng = stream(seed, "grad-agent", 0);
    let mut agent = SacAgent::new(3, 2, &cfg, &mut rng).unwrap();
    for net in [&mut agent.policy, &mut agent.q1, &mut agent.q2, &mut agent.q1_target, &mut agent.q2_target] {
        for p in net.params_mut() {
            p.mapv_inplace(|_| rng.random_range(-0.8..0.8));
        }
    }
    agent.log_alpha = 0.4f64.ln();
    agent
}

fn rel(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Worst relative error between `analytic` and central differences of `f`
/// over the parameters of the network chosen by `pick`.
fn check_net(
    agent: &SacAgent,
    pick: fn(&mut SacAgent) -> &mut resetless::nn::Mlp,
    analytic: &[Mat],
    f: &dyn Fn(&SacAgent) -> f64,
) -> f64 {
    let mut probe = agent.clone();
    let mut worst: f64 = 0.0;
    for (k, g) in analytic.iter().enumerate() {
        for ((i, j), &a) in g.indexed_iter() {
            let orig = pick(&mut probe).params()[k][[i, j]];
            pick(&mut probe).params_mut()[k][[i, j]] = orig + H;
            let up = f(&probe);
            pick(&mut probe).params_mut()[k][[i, j]] = orig - H;
            let down = f(&probe);
            pick(&mut probe).params_mut()[k][[i, j]] = orig;
            worst = worst.max(rel(a, (up - down) / (2.0 * H)));
        }
    }
    worst
}

fn gradient_suite() -> (bool, String) {
    let (mut critic, mut actor, mut temp) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..5 {
        let agent = tiny_agent(seed);
        let mut rng = stream(seed, "grad-batch", 0);
        let batch = Batch {
            obs: random_mat(&mut rng, 7, 3, 1.0),
            actions: random_mat(&mut rng, 7, 2, 0.99),
            rewards: random_mat(&mut rng, 7, 1, 2.0),
            next_obs: random_mat(&mut rng, 7, 3, 1.0),
        };
        let noise = random_mat(&mut rng, 7, 2, 2.0);
        let (_, g1, g2) = agent.critic_loss_grads(&batch, &noise).unwrap();
        let fc = |a: &SacAgent| a.critic_loss_value(&batch, &noise).unwrap();
        critic = critic.max(check_net(&agent, |a| &mut a.q1, &g1, &fc));
        critic = critic.max(check_net(&agent, |a| &mut a.q2, &g2, &fc));
        let (_, gp, mean_lp) = agent.actor_loss_grads(&batch, &noise).unwrap();
        let fa = |a: &SacAgent| a.actor_loss_value(&batch, &noise).unwrap().0;
        actor = actor.max(check_net(&agent, |a| &mut a.policy, &gp, &fa));
        let target = agent.config().target_entropy_for(2);
        let loss = |la: f64| -la.exp() * (mean_lp + target);
        let numeric = (loss(agent.log_alpha + H) - loss(agent.log_alpha - H)) / (2.0 * H);
        temp = temp.max(rel(agent.alpha_gradient(mean_lp), numeric));
    }
    let pass = critic < 1e-4 && actor < 1e-4 && temp < 1e-4;
    (pass, format!("max rel err: critic {critic:.2e}, actor {actor:.2e}, temperature {temp:.2e}"))
}

// ---------------------------------------------------------------------------
// Learning runs.

fn desk() -> SacConfig {
    SacConfig::desk()
}

struct RunResult {
    evals: Vec<(u64, f64)>,
    log: Vec<resetless::eval::TransitionLogEntry>,
    total_steps: u64,
    accounted: bool,
}

fn train(
    family: &str,
    algorithm: Algorithm,
    seed: u64,
    budget: u64,
    eval_every: u64,
    stop_at: Option<f64>,
) -> RunResult {
    let domain = make_domain(family, ArenaConfig::default(), seed).unwrap();
    let cfg =
        TrainerConfig { switch_period: 100, eval_every, eval_episodes: 50, eval_horizon: 200, ..Default::default() };
    let mut tr = build_trainer(domain, algorithm, &desk(), cfg, GraphThresholds::default(), seed).unwrap();
    let mut evals = Vec::new();
    while tr.total_steps < budget {
        let out = tr.run_window().unwrap();
        if let Some(e) = out.eval {
            evals.push((e.step_of_training, e.success_rate));
            if stop_at.is_some_and(|t| e.success_rate >= t) {
                break;
            }
        }
    }
    let routed = tr.slots.iter().all(|s| s.buffer.iter().all(|t| t.task_id == s.task_id));
    RunResult {
        evals,
        log: tr.transition_log.clone(),
        total_steps: tr.total_steps,
        accounted: routed && tr.pushes() == tr.total_steps,
    }
}

fn resetless_bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_resetless"));
    c.env_remove("RESETLESS_OUT");
    c
}

fn cli_train(config: &Path, extra: &[&str]) -> bool {
    resetless_bin().arg("train").arg(config).args(extra).output().map(|o| o.status.success()).unwrap_or(false)
}

fn write_config(path: &Path, budget: u64, out: &Path) {
    let cfg = serde_json::json!({
        "domain": "pincer",
        "algorithm": "mtrf",
        "profile": "desk",
        "seed": 3,
        "budget": budget,
        "eval_every": 5000,
        "checkpoint_every": 5000,
        "out_dir": out,
    });
    std::fs::write(path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
}

fn determinism_and_resume() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (full, half) = (d.join("full.json"), d.join("half.json"));
    write_config(&full, 20_000, &d.join("a"));
    write_config(&half, 10_000, &d.join("split"));
    let ok_a = cli_train(&full, &[]);
    let ok_b = cli_train(&full, &["--out", d.join("b").to_str().unwrap()]);
    let ok_half = cli_train(&half, &[]);
    write_config(&full, 20_000, &d.join("split"));
    let ok_rest = cli_train(&full, &["--resume"]);
    let read = |run: &str, f: &str| std::fs::read(d.join(run).join(f)).unwrap_or_default();
    let identical = ok_a && ok_b && read("a", "metrics.csv") == read("b", "metrics.csv");
    let resumed = ok_half
        && ok_rest
        && read("a", "metrics.csv") == read("split", "metrics.csv")
        && read("a", "transitions.csv") == read("split", "transitions.csv");
    let rows = String::from_utf8_lossy(&read("a", "metrics.csv")).lines().count() - 1;
    (
        identical && resumed && rows > 0,
        format!("rerun byte-identical: {identical}, resume row-for-row: {resumed} ({rows} rows)"),
    )
}

#[test]
fn acceptance() {
    let mut v = Verdicts(Vec::new());
    let mut accounting = true;

    let t = Instant::now();
    let (pass, detail) = formula_oracle();
    v.record("formula oracle", pass && t.elapsed().as_secs() < 10, detail, t);

    let t = Instant::now();
    let (pass, detail) = graph_oracle();
    v.record("task graph oracle", pass && t.elapsed().as_secs() < 10, detail, t);

    let t = Instant::now();
    let (pass, detail) = gradient_suite();
    v.record("gradient suite", pass && t.elapsed().as_secs() < 60, detail, t);

    let t = Instant::now();
    let schedule = ReachSchedule { stop_at: Some(0.95), ..Default::default() };
    let reach: Vec<_> = (0..3).map(|seed| train_reach(seed, &desk(), &schedule).unwrap()).collect();
    let solved = reach.iter().filter(|r| r.best() >= 0.95).count();
    let steps: Vec<u64> = reach.iter().map(|r| r.steps).collect();
    v.record(
        "SAC sanity (point-mass reach)",
        solved == 3 && t.elapsed().as_secs() < 15 * 60,
        format!("{solved}/3 seeds reached >= 0.95 within 50k steps, solved at {steps:?}"),
        t,
    );

    let t = Instant::now();
    let pincer: Vec<RunResult> =
        (0..3).map(|seed| train("pincer", Algorithm::Mtrf, seed, 300_000, 10_000, Some(0.7))).collect();
    accounting &= pincer.iter().all(|r| r.accounted);
    let best: Vec<f64> = pincer.iter().map(|r| r.evals.iter().map(|e| e.1).fold(0.0, f64::max)).collect();
    let reached: Vec<u64> = pincer.iter().map(|r| r.total_steps).collect();
    let m = median(best.clone());
    v.record(
        "MTRF end-to-end (pincer)",
        m >= 0.7 && t.elapsed().as_secs() < 2 * 3600,
        format!("median forward success {m:.2} (per seed {best:?}, steps {reached:?})"),
        t,
    );

    let t = Instant::now();
    let algorithms = [Algorithm::Mtrf, Algorithm::Sac, Algorithm::ResetController, Algorithm::PerturbationController];
    let mut finals = Vec::new();
    let mut mtrf_logs = Vec::new();
    for algorithm in algorithms {
        let mut per_seed = Vec::new();
        for seed in 0..3 {
            let r = train("basketball", algorithm, seed, 500_000, 100_000, None);
            accounting &= r.accounted;
            per_seed.push(r.evals.last().map_or(0.0, |e| e.1));
            if algorithm == Algorithm::Mtrf {
                mtrf_logs.push((r.log, r.total_steps));
            }
        }
        report(format_args!("  basketball {algorithm}: final forward success per seed {per_seed:?}"));
        finals.push(median(per_seed));
    }
    let [mtrf, sac, reset, perturb] = [finals[0], finals[1], finals[2], finals[3]];
    v.record(
        "baseline ordering (basketball)",
        mtrf > sac && mtrf > reset && mtrf >= perturb,
        format!("median final success: mtrf {mtrf:.2}, sac {sac:.2}, reset_controller {reset:.2}, perturbation_controller {perturb:.2}"),
        t,
    );

    let t = Instant::now();
    let recenter: TaskId = 0;
    let dunk = Family::Basketball.forward_task();
    let early = median(mtrf_logs.iter().map(|(l, n)| task_share(l, *n, 0.0, 0.1, recenter)).collect());
    let late = median(mtrf_logs.iter().map(|(l, n)| task_share(l, *n, 0.9, 1.0, recenter)).collect());
    let dunk_late = median(
        mtrf_logs
            .iter()
            .map(|(l, n)| l.iter().filter(|e| e.to_task == dunk && e.step as f64 >= 0.9 * *n as f64).count() as f64)
            .collect(),
    );
    v.record(
        "task frequency pattern (basketball)",
        early > late && dunk_late >= 1.0,
        format!("recenter share first 10% {early:.3} vs last 10% {late:.3}; dunk windows in last 10% {dunk_late}"),
        t,
    );

    let t = Instant::now();
    let (pass, detail) = determinism_and_resume();
    v.record(
        "accounting, determinism, resume",
        pass && accounting,
        format!("buffer routing on every run: {accounting}; {detail}"),
        t,
    );

    let failed: Vec<&str> = v.0.iter().filter(|(_, p)| !p).map(|(n, _)| n.as_str()).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
