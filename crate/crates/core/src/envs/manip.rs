//! Kinematic hand-arm arena: state layout, configuration, and one-step dynamics.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Family;
use crate::error::{contract, Error, Result};
use crate::mdp::{Schema, StateVec, TaskId};
use crate::rng::Rng;

pub const ARENA_MIN: [f64; 3] = [-0.5, -0.5, 0.0];
pub const ARENA_MAX: [f64; 3] = [0.5, 0.5, 0.6];
pub const WRIST_RANGE: (f64, f64) = (0.0, 2.0 * PI);
pub const SPIN_RANGE: (f64, f64) = (-PI, PI);

/// Per-step command limits.
pub const MAX_HAND_STEP: f64 = 0.05;
pub const MAX_WRIST_STEP: f64 = 0.1;
pub const MAX_CLOSURE_STEP: f64 = 0.1;
pub const MAX_SPIN_STEP: f64 = 0.1;
/// The in-hand rotation channel works only this close to the upright wrist angle.
pub const SPIN_WRIST_TOLERANCE: f64 = 0.15;
/// Objects closer than this to the drawer slot count as stored in the drawer.
const SLOT_TOLERANCE: f64 = 1e-6;

pub const MANIP_SCHEMA: Schema = Schema { name: "manip", len: 11 };
/// Same layout as [`MANIP_SCHEMA`]; the `obj_theta_z` slot holds drawer openness.
pub const PINCER_SCHEMA: Schema = Schema { name: "pincer", len: 11 };

/// Geometry and thresholds of the arena. Distances in meters, angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArenaConfig {
    /// Height separating "on the table" from "lifted" in rewards and success tests.
    pub lift_threshold: f64,
    /// Height above which the lift task counts as done (matches the task graphs).
    pub lifted_height: f64,
    /// Recenter target on the table.
    pub goal_xy: [f64; 2],
    /// Lift target height.
    pub goal_z: f64,
    pub theta_x_goal: f64,
    pub theta_z_goal: f64,
    /// Closure target of the pipe lift reward.
    pub q_goal: f64,
    pub insert_waypoint: [f64; 3],
    pub insert_goal: [f64; 3],
    pub arena_center: [f64; 3],
    pub basket_goal: [f64; 3],
    pub lamp_goal: [f64; 3],
    pub grasp_radius: f64,
    /// Objects farther than this from the arena center (in the plane) sit too
    /// close to the walls to grasp and must be pushed inward first.
    pub graspable_radius: f64,
    /// The hand pushes a free object when lower than this and within `grasp_radius` in the plane.
    pub push_height: f64,
    pub grasp_offset: [f64; 3],
    pub attach_closure: f64,
    pub drop_closure: f64,
    /// Half-width of the uniform lateral scatter of a dropped object.
    pub drop_noise: f64,
    /// Per-step chance that a ball held in the hoop slips through the net.
    pub hoop_slip_prob: f64,
    pub wrist_start: f64,
    pub drawer_mouth: [f64; 2],
    pub drawer_slot: [f64; 2],
    pub drawer_handle: [f64; 2],
    pub eject_point: [f64; 2],
    pub drawer_pull_rate: f64,
    /// The pincer hand cannot pass this x coordinate (the drawer front).
    pub pincer_x_max: f64,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        Self {
            lift_threshold: 0.1,
            lifted_height: 0.15,
            goal_xy: [0.0, 0.0],
            goal_z: 0.3,
            theta_x_goal: PI,
            theta_z_goal: FRAC_PI_2,
            q_goal: 1.0,
            insert_waypoint: [0.35, 0.0, 0.3],
            insert_goal: [0.45, 0.0, 0.3],
            arena_center: [0.0, 0.0, 0.0],
            basket_goal: [0.3, 0.3, 0.45],
            lamp_goal: [-0.3, 0.3, 0.4],
            grasp_radius: 0.05,
            graspable_radius: 0.25,
            push_height: 0.05,
            grasp_offset: [0.0, 0.0, 0.0],
            attach_closure: 0.7,
            drop_closure: 0.5,
            drop_noise: 0.05,
            hoop_slip_prob: 0.01,
            wrist_start: FRAC_PI_2,
            drawer_mouth: [0.3, 0.0],
            drawer_slot: [0.45, 0.0],
            drawer_handle: [0.3, -0.25],
            eject_point: [0.05, 0.0],
            drawer_pull_rate: 0.25,
            pincer_x_max: 0.35,
        }
    }
}

fn inside(p: &[f64; 3]) -> bool {
    (0..3).all(|i| p[i] >= ARENA_MIN[i] && p[i] <= ARENA_MAX[i])
}

impl ArenaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lift_threshold > 0.0 && self.lifted_height > 0.0) {
            return Err(Error::Config("lift thresholds must be positive".into()));
        }
        if !(self.grasp_radius > 0.0
            && self.graspable_radius > 0.0
            && self.push_height > 0.0
            && self.drop_noise >= 0.0
            && self.drawer_pull_rate > 0.0)
        {
            return Err(Error::Config("grasp radii, push height, drop noise, and pull rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.hoop_slip_prob) {
            return Err(Error::Config("hoop_slip_prob must lie in [0, 1]".into()));
        }
        if self.drop_closure >= self.attach_closure {
            return Err(Error::Config("drop_closure must be below attach_closure".into()));
        }
        let goals = [
            ("insert_waypoint", self.insert_waypoint),
            ("insert_goal", self.insert_goal),
            ("arena_center", self.arena_center),
            ("basket_goal", self.basket_goal),
            ("lamp_goal", self.lamp_goal),
            ("goal", [self.goal_xy[0], self.goal_xy[1], self.goal_z]),
        ];
        for (name, g) in goals {
            if !inside(&g) {
                return Err(Error::Config(format!("{name} {g:?} lies outside the arena")));
            }
        }
        Ok(())
    }
}

/// Full observable state of the arena.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManipState {
    pub hand_xyz: [f64; 3],
    pub wrist_theta_x: f64,
    /// Aggregate finger closure in [0, 1].
    pub closure: f64,
    pub obj_xyz: [f64; 3],
    /// Object yaw; drawer openness in the pincer family.
    pub obj_theta_z: f64,
    pub attached: bool,
    pub prev_task: TaskId,
}

impl ManipState {
    pub fn to_vec(&self, family: Family) -> StateVec {
        let v = vec![
            self.hand_xyz[0],
            self.hand_xyz[1],
            self.hand_xyz[2],
            self.wrist_theta_x,
            self.closure,
            self.obj_xyz[0],
            self.obj_xyz[1],
            self.obj_xyz[2],
            self.obj_theta_z,
            if self.attached { 1.0 } else { 0.0 },
            self.prev_task as f64,
        ];
        StateVec::new(family.schema(), v).expect("manip state entries are finite")
    }

    pub fn from_vec(s: &StateVec) -> Result<Self> {
        let schema = s.schema();
        if schema != MANIP_SCHEMA && schema != PINCER_SCHEMA {
            return Err(contract(format!("state of schema {} is not a manipulation state", schema.name)));
        }
        let v = s.values();
        Ok(Self {
            hand_xyz: [v[0], v[1], v[2]],
            wrist_theta_x: v[3],
            closure: v[4],
            obj_xyz: [v[5], v[6], v[7]],
            obj_theta_z: v[8],
            attached: v[9] > 0.5,
            prev_task: v[10].max(0.0) as TaskId,
        })
    }

    pub fn drawer_openness(&self) -> f64 {
        self.obj_theta_z
    }

    /// Object resting in the pincer drawer.
    pub fn in_drawer(&self, cfg: &ArenaConfig) -> bool {
        !self.attached && dist2(xy(&self.obj_xyz), cfg.drawer_slot) < SLOT_TOLERANCE
    }
}

/// Normalised command deltas, every field in [-1, 1].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ManipAction {
    pub d_hand_xyz: [f64; 3],
    pub d_wrist: f64,
    pub d_closure: f64,
    pub d_obj_theta_z: f64,
}

impl ManipAction {
    /// Maps a family's action layout onto the full command; unused channels are zero.
    pub fn from_slice(family: Family, a: &[f64]) -> Result<Self> {
        if a.len() != family.action_dim() {
            return Err(contract(format!(
                "{} actions have {} entries, got {}",
                family.name(),
                family.action_dim(),
                a.len()
            )));
        }
        let mut out = ManipAction::default();
        match family {
            Family::Inhand => {
                out.d_hand_xyz = [a[0], a[1], a[2]];
                out.d_wrist = a[3];
                out.d_closure = a[4];
                out.d_obj_theta_z = a[5];
            }
            Family::Lightbulb => {
                out.d_hand_xyz = [a[0], a[1], a[2]];
                out.d_wrist = a[3];
                out.d_closure = a[4];
            }
            Family::Pipe | Family::Basketball => {
                out.d_hand_xyz = [a[0], a[1], a[2]];
                out.d_closure = a[3];
            }
            Family::Pincer => {
                out.d_hand_xyz = [a[0], a[1], 0.0];
                out.d_closure = a[2];
            }
        }
        Ok(out)
    }
}

pub(crate) fn xy(p: &[f64; 3]) -> [f64; 2] {
    [p[0], p[1]]
}

pub(crate) fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub(crate) fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn clamp_arena(mut p: [f64; 3]) -> [f64; 3] {
    for i in 0..3 {
        p[i] = p[i].clamp(ARENA_MIN[i], ARENA_MAX[i]);
    }
    p
}

fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Lets go of the object: it lands on the table below its current position,
/// scattered laterally by up to `drop_noise` per axis.
fn drop_object(s: &mut ManipState, cfg: &ArenaConfig, rng: &mut Rng) {
    s.attached = false;
    let (nx, ny) = if cfg.drop_noise > 0.0 {
        (rng.random_range(-cfg.drop_noise..=cfg.drop_noise), rng.random_range(-cfg.drop_noise..=cfg.drop_noise))
    } else {
        (0.0, 0.0)
    };
    s.obj_xyz = clamp_arena([s.obj_xyz[0] + nx, s.obj_xyz[1] + ny, 0.0]);
}

/// Whether the ball currently sits in the hoop (the dunk success region).
pub(crate) fn in_hoop(s: &ManipState, cfg: &ArenaConfig) -> bool {
    dist2(xy(&s.obj_xyz), xy(&cfg.basket_goal)) < 0.1 && (s.obj_xyz[2] - cfg.basket_goal[2]).abs() < 0.15
}

/// One kinematic step. Inputs are clipped to bounds, never rejected.
///
/// Order: a held ball already in the hoop may slip through (basketball); the
/// hand, wrist, and closure move; a held object follows the hand and is
/// dropped when closure falls below `drop_closure`; a free object within
/// `grasp_radius` of a hand closed past `attach_closure` becomes attached if it
/// lies within `graspable_radius` of the center; otherwise a low hand touching
/// it pushes it along in the plane.
/// The pincer family adds the drawer: releasing a held object at the open
/// drawer's mouth stores it and shuts the drawer, and gripping the handle
/// opens the drawer step by step until the stored object is ejected.
pub fn step_kinematics(
    family: Family,
    state: &ManipState,
    action: &ManipAction,
    cfg: &ArenaConfig,
    rng: &mut Rng,
) -> ManipState {
    let mut s = *state;
    let c = |v: f64| v.clamp(-1.0, 1.0);

    if family == Family::Basketball && s.attached && in_hoop(&s, cfg) && rng.random::<f64>() < cfg.hoop_slip_prob {
        drop_object(&mut s, cfg, rng);
    }

    let mut hand = [
        s.hand_xyz[0] + MAX_HAND_STEP * c(action.d_hand_xyz[0]),
        s.hand_xyz[1] + MAX_HAND_STEP * c(action.d_hand_xyz[1]),
        s.hand_xyz[2] + MAX_HAND_STEP * c(action.d_hand_xyz[2]),
    ];
    hand = clamp_arena(hand);
    if family == Family::Pincer {
        hand[0] = hand[0].min(cfg.pincer_x_max);
        hand[2] = 0.0;
    } else {
        s.wrist_theta_x = (s.wrist_theta_x + MAX_WRIST_STEP * c(action.d_wrist)).clamp(WRIST_RANGE.0, WRIST_RANGE.1);
    }
    s.hand_xyz = hand;
    s.closure = (s.closure + MAX_CLOSURE_STEP * c(action.d_closure)).clamp(0.0, 1.0);

    if s.attached {
        s.obj_xyz = add3(s.hand_xyz, cfg.grasp_offset);
        let upright = (s.wrist_theta_x - cfg.theta_x_goal).abs() < SPIN_WRIST_TOLERANCE;
        if family == Family::Inhand && upright {
            s.obj_theta_z = (s.obj_theta_z + MAX_SPIN_STEP * c(action.d_obj_theta_z)).clamp(SPIN_RANGE.0, SPIN_RANGE.1);
        }
        if s.closure < cfg.drop_closure {
            let at_open_drawer =
                family == Family::Pincer && s.obj_theta_z >= 0.5 && dist2(xy(&s.obj_xyz), cfg.drawer_mouth) < 0.1;
            if at_open_drawer {
                s.attached = false;
                s.obj_xyz = [cfg.drawer_slot[0], cfg.drawer_slot[1], 0.0];
                s.obj_theta_z = 0.0;
            } else {
                drop_object(&mut s, cfg, rng);
            }
        }
    } else if family == Family::Pincer && s.in_drawer(cfg) {
        let gripping = dist2(xy(&s.hand_xyz), cfg.drawer_handle) < cfg.grasp_radius && s.closure > cfg.attach_closure;
        if gripping {
            s.obj_theta_z = (s.obj_theta_z + cfg.drawer_pull_rate).min(1.0);
            if s.obj_theta_z >= 1.0 {
                s.obj_xyz = [cfg.eject_point[0], cfg.eject_point[1], 0.0];
                drop_object(&mut s, cfg, rng);
            }
        }
    } else {
        let center = xy(&cfg.arena_center);
        let graspable = family == Family::Pincer || dist2(xy(&s.obj_xyz), center) < cfg.graspable_radius;
        let touching = family != Family::Pincer
            && state.hand_xyz[2] < cfg.push_height
            && dist2(xy(&state.hand_xyz), xy(&s.obj_xyz)) < cfg.grasp_radius;
        if graspable && dist3(s.hand_xyz, s.obj_xyz) < cfg.grasp_radius && s.closure > cfg.attach_closure {
            s.attached = true;
            s.obj_xyz = add3(s.hand_xyz, cfg.grasp_offset);
        } else if touching {
            let dx = s.hand_xyz[0] - state.hand_xyz[0];
            let dy = s.hand_xyz[1] - state.hand_xyz[1];
            s.obj_xyz = clamp_arena([s.obj_xyz[0] + dx, s.obj_xyz[1] + dy, 0.0]);
        }
    }
    s
}
