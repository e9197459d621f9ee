//! Task rewards, success predicates, and designed initial-state distributions.

use rand::Rng as _;

use super::manip::{dist2, dist3, xy, ArenaConfig, ManipAction, ManipState};
use super::Family;
use crate::error::{contract, Result};
use crate::mdp::TaskId;
use crate::rng::Rng;

/// Tolerance on wrist angle for the flip-up success test.
pub const UPRIGHT_TOLERANCE: f64 = 0.15;
/// Tolerance on object yaw for the reorient success test.
pub const REORIENT_TOLERANCE: f64 = 0.1;
/// Planar distance counted as recentered.
pub const CENTER_TOLERANCE: f64 = 0.1;
/// Distance at which an insertion stage counts as reached.
pub const INSERT_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Recenter,
    Lift,
    /// Lift variant for the pipe family that also shapes the grip.
    PipeLift,
    Flipup,
    Reorient,
    Insert1,
    Insert2,
    Remove,
    BulbInsert,
    Dunk,
    Grasp,
    FillDrawer,
    PullDrawer,
    Perturb,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Recenter => "recenter",
            TaskKind::Lift | TaskKind::PipeLift => "lift",
            TaskKind::Flipup => "flipup",
            TaskKind::Reorient => "reorient",
            TaskKind::Insert1 => "insert1",
            TaskKind::Insert2 => "insert2",
            TaskKind::Remove => "remove",
            TaskKind::BulbInsert => "bulb_insert",
            TaskKind::Dunk => "dunk",
            TaskKind::Grasp => "grasp",
            TaskKind::FillDrawer => "fill_drawer",
            TaskKind::PullDrawer => "pull_drawer",
            TaskKind::Perturb => "perturb",
        }
    }
}

fn ind(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Reward of one task, read off the post-transition state.
pub fn reward_of(kind: TaskKind, s2: &ManipState, cfg: &ArenaConfig) -> f64 {
    let obj = s2.obj_xyz;
    let z = obj[2];
    let thr = cfg.lift_threshold;
    match kind {
        TaskKind::Recenter => -3.0 * dist2(xy(&obj), cfg.goal_xy) - dist3(obj, s2.hand_xyz),
        TaskKind::Lift => -(z - cfg.goal_z).abs(),
        TaskKind::PipeLift => -2.0 * (z - cfg.goal_z).abs() - 2.0 * (s2.closure - cfg.q_goal).abs(),
        TaskKind::Flipup => {
            let err = (s2.wrist_theta_x - cfg.theta_x_goal).abs();
            -5.0 * err - 50.0 * ind(z < thr) + 10.0 * ind(err < UPRIGHT_TOLERANCE && z > thr)
        }
        TaskKind::Reorient => -(s2.obj_theta_z - cfg.theta_z_goal).abs(),
        TaskKind::Insert1 => {
            let d = dist3(obj, cfg.insert_waypoint);
            -d + 10.0 * ind(d < 0.1)
        }
        TaskKind::Insert2 => {
            let d = dist3(obj, cfg.insert_goal);
            -d + 10.0 * ind(d < 0.1)
        }
        TaskKind::Remove => -dist3(obj, cfg.arena_center),
        TaskKind::BulbInsert => {
            let dxy = dist2(xy(&obj), xy(&cfg.lamp_goal));
            let dz = (z - cfg.lamp_goal[2]).abs();
            -dxy - 2.0 * dz + ind(dxy < 0.1) + 10.0 * ind(dxy < 0.1 && dz < 0.1) - ind(z < thr)
        }
        TaskKind::Dunk => {
            let d = dist3(obj, cfg.basket_goal);
            -d + 20.0 * ind(d < 0.2) + 50.0 * ind(d < 0.1) - ind(z < thr)
        }
        TaskKind::Grasp => -dist2(xy(&obj), xy(&s2.hand_xyz)) + ind(s2.attached),
        TaskKind::FillDrawer => -dist2(xy(&obj), cfg.drawer_mouth) + 10.0 * ind(s2.in_drawer(cfg)),
        TaskKind::PullDrawer => -dist2(xy(&s2.hand_xyz), cfg.drawer_handle) + 5.0 * s2.drawer_openness(),
        TaskKind::Perturb => 0.0,
    }
}

/// Success predicate of one task.
pub fn success_of(kind: TaskKind, s: &ManipState, cfg: &ArenaConfig) -> bool {
    let obj = s.obj_xyz;
    let z = obj[2];
    let thr = cfg.lift_threshold;
    let upright = (s.wrist_theta_x - cfg.theta_x_goal).abs() < UPRIGHT_TOLERANCE;
    match kind {
        TaskKind::Recenter => dist2(xy(&obj), cfg.goal_xy) < CENTER_TOLERANCE && z < thr,
        TaskKind::Lift | TaskKind::PipeLift => z > cfg.lifted_height,
        TaskKind::Flipup => z > thr && upright,
        TaskKind::Reorient => z > thr && upright && (s.obj_theta_z - cfg.theta_z_goal).abs() < REORIENT_TOLERANCE,
        TaskKind::Insert1 => z > thr && dist3(obj, cfg.insert_waypoint) < INSERT_TOLERANCE,
        TaskKind::Insert2 => z > thr && dist3(obj, cfg.insert_goal) < INSERT_TOLERANCE,
        TaskKind::Remove => dist3(obj, cfg.arena_center) < CENTER_TOLERANCE,
        TaskKind::BulbInsert => dist2(xy(&obj), xy(&cfg.lamp_goal)) < 0.1 && (z - cfg.lamp_goal[2]).abs() < 0.1,
        TaskKind::Dunk => dist2(xy(&obj), xy(&cfg.basket_goal)) < 0.1 && (z - cfg.basket_goal[2]).abs() < 0.15,
        TaskKind::Grasp => s.attached,
        TaskKind::FillDrawer => s.in_drawer(cfg),
        TaskKind::PullDrawer => s.drawer_openness() >= 1.0 && !s.in_drawer(cfg),
        TaskKind::Perturb => false,
    }
}

fn kind_of(family: Family, task: TaskId) -> Result<TaskKind> {
    family
        .tasks()
        .get(task)
        .copied()
        .ok_or_else(|| contract(format!("task id {task} is not defined for the {} family", family.name())))
}

/// Reward for task `task` of `family` on the transition `(s, a, s2)`; only `s2` matters.
pub fn task_reward(
    family: Family,
    task: TaskId,
    _s: &ManipState,
    _a: &ManipAction,
    s2: &ManipState,
    cfg: &ArenaConfig,
) -> Result<f64> {
    Ok(reward_of(kind_of(family, task)?, s2, cfg))
}

pub fn task_success(family: Family, task: TaskId, s: &ManipState, cfg: &ArenaConfig) -> Result<bool> {
    Ok(success_of(kind_of(family, task)?, s, cfg))
}

/// Uniform draw, or the interval midpoint when no rng is given.
fn uniform(rng: &mut Option<&mut Rng>, lo: f64, hi: f64) -> f64 {
    match rng {
        Some(r) if hi > lo => r.random_range(lo..hi),
        _ => 0.5 * (lo + hi),
    }
}

fn clamp_arena(p: [f64; 3]) -> [f64; 3] {
    use super::manip::{ARENA_MAX, ARENA_MIN};
    [0, 1, 2].map(|i| p[i].clamp(ARENA_MIN[i], ARENA_MAX[i]))
}

fn jittered(rng: &mut Option<&mut Rng>, c: [f64; 3], j: f64) -> [f64; 3] {
    clamp_arena([c[0] + uniform(rng, -j, j), c[1] + uniform(rng, -j, j), c[2] + uniform(rng, -j, j)])
}

fn resting(hand: [f64; 3], obj: [f64; 3], cfg: &ArenaConfig) -> ManipState {
    ManipState {
        hand_xyz: hand,
        wrist_theta_x: cfg.wrist_start,
        closure: 0.0,
        obj_xyz: obj,
        obj_theta_z: 0.0,
        attached: false,
        prev_task: 0,
    }
}

fn held(hand: [f64; 3], wrist: f64, cfg: &ArenaConfig) -> ManipState {
    let obj = [0, 1, 2].map(|i| hand[i] + cfg.grasp_offset[i]);
    ManipState { closure: 1.0, attached: true, wrist_theta_x: wrist, ..resting(hand, obj, cfg) }
}

/// Object at a random table position with the hand hovering anywhere;
/// pincer objects stay clear of the drawer, which starts open.
pub fn table_start(family: Family, cfg: &ArenaConfig, mut rng: Option<&mut Rng>) -> ManipState {
    let mut s = if family == Family::Pincer {
        let obj = [uniform(&mut rng, -0.4, 0.2), uniform(&mut rng, -0.4, 0.4), 0.0];
        let hand = [uniform(&mut rng, -0.4, cfg.pincer_x_max), uniform(&mut rng, -0.4, 0.4), 0.0];
        let mut s = resting(hand, obj, cfg);
        s.obj_theta_z = 1.0;
        s
    } else {
        let obj = [uniform(&mut rng, -0.4, 0.4), uniform(&mut rng, -0.4, 0.4), 0.0];
        let hand = [uniform(&mut rng, -0.4, 0.4), uniform(&mut rng, -0.4, 0.4), uniform(&mut rng, 0.05, 0.3)];
        resting(hand, obj, cfg)
    };
    s.prev_task = family.forward_task();
    s
}

/// Designed starting distribution for one task, used before any predecessor
/// successes have been observed. Without an rng it returns the distribution's center.
pub fn designed_initial(family: Family, kind: TaskKind, cfg: &ArenaConfig, mut rng: Option<&mut Rng>) -> ManipState {
    let center_hold = [cfg.goal_xy[0], cfg.goal_xy[1], 0.25];
    let r = &mut rng;
    let mut s = match kind {
        TaskKind::Recenter | TaskKind::Perturb => table_start(family, cfg, rng.as_deref_mut()),
        TaskKind::Lift | TaskKind::PipeLift => {
            let obj = [cfg.goal_xy[0] + uniform(r, -0.05, 0.05), cfg.goal_xy[1] + uniform(r, -0.05, 0.05), 0.0];
            let hand = [obj[0] + uniform(r, -0.03, 0.03), obj[1] + uniform(r, -0.03, 0.03), uniform(r, 0.02, 0.1)];
            resting(hand, obj, cfg)
        }
        TaskKind::Flipup | TaskKind::Insert1 | TaskKind::Dunk => {
            held(jittered(r, center_hold, 0.05), cfg.wrist_start, cfg)
        }
        TaskKind::Reorient => {
            let wrist = cfg.theta_x_goal + uniform(r, -0.05, 0.05);
            let mut s = held(jittered(r, center_hold, 0.05), wrist, cfg);
            s.obj_theta_z = uniform(r, -0.2, 0.2);
            s
        }
        TaskKind::BulbInsert => {
            let wrist = cfg.theta_x_goal + uniform(r, -0.05, 0.05);
            held(jittered(r, center_hold, 0.05), wrist, cfg)
        }
        TaskKind::Insert2 => held(jittered(r, cfg.insert_waypoint, 0.02), cfg.wrist_start, cfg),
        TaskKind::Remove => held(jittered(r, cfg.insert_goal, 0.02), cfg.wrist_start, cfg),
        TaskKind::Grasp => table_start(family, cfg, rng),
        TaskKind::FillDrawer => {
            let hand = [uniform(r, -0.4, 0.2), uniform(r, -0.4, 0.4), 0.0];
            let mut s = held(hand, cfg.wrist_start, cfg);
            s.obj_theta_z = 1.0;
            s
        }
        TaskKind::PullDrawer => {
            let hand = [uniform(r, -0.4, cfg.pincer_x_max), uniform(r, -0.4, 0.4), 0.0];
            resting(hand, [cfg.drawer_slot[0], cfg.drawer_slot[1], 0.0], cfg)
        }
    };
    s.prev_task = family.forward_task();
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn at(obj: [f64; 3]) -> ManipState {
        ManipState {
            hand_xyz: obj,
            wrist_theta_x: PI,
            closure: 1.0,
            obj_xyz: obj,
            obj_theta_z: 0.0,
            attached: true,
            prev_task: 0,
        }
    }

    fn r(kind: TaskKind, s: &ManipState) -> f64 {
        reward_of(kind, s, &ArenaConfig::default())
    }

    #[test]
    fn reward_examples() {
        let cfg = ArenaConfig::default();
        assert_eq!(r(TaskKind::Recenter, &at([0.0, 0.0, 0.0])), 0.0);
        assert!((r(TaskKind::Lift, &at([0.0, 0.0, cfg.goal_z - 0.2])) + 0.2).abs() < 1e-12);
        assert_eq!(r(TaskKind::Flipup, &at([0.0, 0.0, 0.2])), 10.0);
        let p = cfg.insert_waypoint;
        assert!((r(TaskKind::Insert1, &at([p[0] - 0.05, p[1], p[2]])) - 9.95).abs() < 1e-12);
        let g = cfg.basket_goal;
        assert!((r(TaskKind::Dunk, &at([g[0], g[1], g[2] - 0.05])) - 69.95).abs() < 1e-12);
        assert_eq!(r(TaskKind::BulbInsert, &at(cfg.lamp_goal)), 11.0);
    }

    #[test]
    fn success_examples() {
        let cfg = ArenaConfig::default();
        let mut s = at([0.0, 0.0, 0.2]);
        s.wrist_theta_x = cfg.theta_x_goal + 0.1;
        assert!(success_of(TaskKind::Flipup, &s, &cfg));
        let g = cfg.insert_goal;
        assert!(success_of(TaskKind::Insert2, &at([g[0] - 0.049, g[1], g[2]]), &cfg));
        let b = cfg.basket_goal;
        assert!(!success_of(TaskKind::Dunk, &at([b[0] - 0.2, b[1], b[2]]), &cfg));
        assert!(success_of(TaskKind::Dunk, &at(b), &cfg));
    }

    #[test]
    fn unknown_task_is_a_contract_violation() {
        let cfg = ArenaConfig::default();
        let s = at([0.0; 3]);
        assert!(task_reward(Family::Basketball, 4, &s, &ManipAction::default(), &s, &cfg).is_err());
        assert!(task_success(Family::Pincer, 9, &s, &cfg).is_err());
        assert!(task_success(Family::Pipe, 5, &s, &cfg).is_ok());
    }

    #[test]
    fn designed_initial_states_match_their_stage() {
        let cfg = ArenaConfig::default();
        let mut rng = crate::rng::stream(3, "init", 0);
        for _ in 0..200 {
            let lift = designed_initial(Family::Basketball, TaskKind::Lift, &cfg, Some(&mut rng));
            assert!(success_of(TaskKind::Recenter, &lift, &cfg));
            let dunk = designed_initial(Family::Basketball, TaskKind::Dunk, &cfg, Some(&mut rng));
            assert!(success_of(TaskKind::Lift, &dunk, &cfg) && dunk.attached);
            let reo = designed_initial(Family::Inhand, TaskKind::Reorient, &cfg, Some(&mut rng));
            assert!(success_of(TaskKind::Flipup, &reo, &cfg));
            let pull = designed_initial(Family::Pincer, TaskKind::PullDrawer, &cfg, Some(&mut rng));
            assert!(success_of(TaskKind::FillDrawer, &pull, &cfg));
            let fill = designed_initial(Family::Pincer, TaskKind::FillDrawer, &cfg, Some(&mut rng));
            assert!(success_of(TaskKind::Grasp, &fill, &cfg));
        }
        let nominal = designed_initial(Family::Basketball, TaskKind::Dunk, &cfg, None);
        assert_eq!(nominal.hand_xyz, [0.0, 0.0, 0.25]);
    }
}
