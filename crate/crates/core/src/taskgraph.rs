//! Task graphs: total state machines choosing which task runs next.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::envs::manip::{dist2, dist3, xy};
use crate::envs::{ArenaConfig, Family, ManipState};
use crate::error::{Error, Result};
use crate::mdp::{StateVec, TaskId};

/// Predicate constants shared by the graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphThresholds {
    /// Object height above which it counts as lifted.
    pub lift_height: f64,
    /// Wrist-angle tolerance for "upright".
    pub angle_tolerance: f64,
    /// Distance from the arena center beyond which the object is off-center.
    pub center_tolerance: f64,
    /// Distance to the waypoint or the inserted pose that counts as reached.
    pub insert_tolerance: f64,
    pub theta_upright: f64,
}

impl Default for GraphThresholds {
    fn default() -> Self {
        Self {
            lift_height: 0.15,
            angle_tolerance: 0.1,
            center_tolerance: 0.1,
            insert_tolerance: 0.05,
            theta_upright: PI,
        }
    }
}

impl GraphThresholds {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lift_height, self.angle_tolerance, self.center_tolerance, self.insert_tolerance];
        if all.iter().all(|t| *t > 0.0 && t.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("task graph thresholds must be positive".into()))
        }
    }
}

/// Chooses the next task from the current state.
pub trait TaskSelector {
    fn select(&self, state: &StateVec) -> Result<TaskId>;
}

#[derive(Debug, Clone)]
pub struct TaskGraph {
    family: Family,
    th: GraphThresholds,
    arena: ArenaConfig,
}

impl TaskGraph {
    pub fn new(family: Family, th: GraphThresholds, arena: ArenaConfig) -> Result<Self> {
        th.validate()?;
        Ok(Self { family, th, arena })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn thresholds(&self) -> &GraphThresholds {
        &self.th
    }

    pub fn task_index(&self, name: &str) -> Option<TaskId> {
        self.family.task_id(name)
    }

    fn id(&self, name: &str) -> TaskId {
        self.family.task_id(name).expect("graph names only tasks of its family")
    }

    pub fn query(&self, s: &ManipState) -> TaskId {
        match self.family {
            Family::Inhand => self.query_inhand(s),
            Family::Pipe => self.query_pipe(s),
            Family::Lightbulb => self.query_lightbulb(s),
            Family::Basketball => self.query_basketball(s),
            Family::Pincer => self.query_pincer(s),
        }
    }

    fn lifted(&self, s: &ManipState) -> bool {
        s.obj_xyz[2] > self.th.lift_height
    }

    fn upright(&self, s: &ManipState) -> bool {
        (s.wrist_theta_x - self.th.theta_upright).abs() < self.th.angle_tolerance
    }

    fn off_center_3d(&self, s: &ManipState) -> bool {
        dist3(s.obj_xyz, self.arena.arena_center) > self.th.center_tolerance
    }

    fn centered_2d(&self, s: &ManipState) -> bool {
        dist2(xy(&s.obj_xyz), xy(&self.arena.arena_center)) < self.th.center_tolerance
    }

    /// Recenter, or Perturb when a recenter window just failed.
    fn recenter_or_perturb(&self, s: &ManipState) -> TaskId {
        let recenter = self.id("recenter");
        if s.prev_task == recenter {
            self.id("perturb")
        } else {
            recenter
        }
    }

    pub fn query_inhand(&self, s: &ManipState) -> TaskId {
        if self.upright(s) && self.lifted(s) {
            self.id("reorient")
        } else if self.lifted(s) {
            self.id("flipup")
        } else if self.off_center_3d(s) {
            self.recenter_or_perturb(s)
        } else {
            self.id("lift")
        }
    }

    pub fn query_pipe(&self, s: &ManipState) -> TaskId {
        let tol = self.th.insert_tolerance;
        if dist3(s.obj_xyz, self.arena.insert_goal) < tol {
            self.id("remove")
        } else if dist3(s.obj_xyz, self.arena.insert_waypoint) < tol {
            self.id("insert2")
        } else if self.lifted(s) {
            self.id("insert1")
        } else if self.off_center_3d(s) {
            self.recenter_or_perturb(s)
        } else {
            self.id("lift")
        }
    }

    pub fn query_lightbulb(&self, s: &ManipState) -> TaskId {
        let (centered, lifted) = (self.centered_2d(s), self.lifted(s));
        if !centered && !lifted {
            self.recenter_or_perturb(s)
        } else if !lifted {
            self.id("lift")
        } else if !self.upright(s) {
            self.id("flipup")
        } else {
            self.id("bulb_insert")
        }
    }

    pub fn query_basketball(&self, s: &ManipState) -> TaskId {
        let (centered, lifted) = (self.centered_2d(s), self.lifted(s));
        if !centered && !lifted {
            self.recenter_or_perturb(s)
        } else if !lifted {
            self.id("lift")
        } else {
            self.id("dunk")
        }
    }

    /// grasped → fill; stored in the drawer → pull; a free object after a
    /// failed grasp window → perturb; otherwise grasp.
    pub fn query_pincer(&self, s: &ManipState) -> TaskId {
        let grasp = self.id("grasp");
        if s.attached {
            self.id("fill_drawer")
        } else if s.in_drawer(&self.arena) {
            self.id("pull_drawer")
        } else if s.prev_task == grasp {
            self.id("perturb")
        } else {
            grasp
        }
    }
}

impl TaskSelector for TaskGraph {
    fn select(&self, state: &StateVec) -> Result<TaskId> {
        Ok(self.query(&ManipState::from_vec(state)?))
    }
}

/// Tasks whose successful outcomes are valid starting states for `task`.
pub fn predecessors(family: Family, task: TaskId) -> Vec<TaskId> {
    let names: &[&str] = match (family, family.tasks().get(task).map(|k| k.name())) {
        (_, None) => &[],
        (Family::Pincer, Some("grasp")) => &["pull_drawer"],
        (Family::Pincer, Some("fill_drawer")) => &["grasp"],
        (Family::Pincer, Some("pull_drawer")) => &["fill_drawer"],
        (Family::Pincer, Some("perturb")) => &["grasp"],
        (_, Some("perturb")) => &["recenter"],
        (_, Some("lift")) => &["recenter"],
        (Family::Inhand | Family::Lightbulb, Some("flipup")) => &["lift"],
        (Family::Inhand, Some("reorient")) => &["flipup"],
        (Family::Lightbulb, Some("bulb_insert")) => &["flipup"],
        (Family::Pipe, Some("insert1")) => &["lift"],
        (Family::Pipe, Some("insert2")) => &["insert1"],
        (Family::Pipe, Some("remove")) => &["insert2"],
        (Family::Basketball, Some("dunk")) => &["lift"],
        _ => &[],
    };
    names.iter().filter_map(|n| family.task_id(n)).collect()
}
