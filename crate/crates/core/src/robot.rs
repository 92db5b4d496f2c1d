//! Differential-drive kinematics with acceleration-limited velocity tracking.

use serde::{Deserialize, Serialize};

pub use crate::geom::{normalize_angle, Point2, Pose2D};

/// Default simulation step (s).
pub const DT: f64 = 0.05;
/// Planner runs every this many simulation steps.
pub const CONTROL_EVERY: u64 = 2;
/// Below this |w| the straight-line update is used.
pub const ARC_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub v: f64,
    pub w: f64,
}

impl Action {
    pub const ZERO: Action = Action { v: 0.0, w: 0.0 };

    pub const fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose2D,
    pub vel: Action,
    pub t: f64,
}

impl RobotState {
    pub fn at_rest(pose: Pose2D) -> Self {
        Self {
            pose,
            vel: Action::ZERO,
            t: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicLimits {
    pub max_v: f64,
    pub max_w: f64,
    pub max_acc_v: f64,
    pub max_acc_w: f64,
    /// Permit full-speed reverse; otherwise reverse is capped at 10% of `max_v`.
    pub allow_reverse: bool,
}

impl Default for KinematicLimits {
    /// Hardware limits of the simulated robot; planner parameters cap
    /// the speeds further.
    fn default() -> Self {
        Self {
            max_v: 2.0,
            max_w: 3.14,
            max_acc_v: 2.0,
            max_acc_w: 4.0,
            allow_reverse: false,
        }
    }
}

impl KinematicLimits {
    pub fn with_speeds(max_v: f64, max_w: f64) -> Self {
        Self {
            max_v,
            max_w,
            ..Self::default()
        }
    }

    pub fn min_v(&self) -> f64 {
        if self.allow_reverse {
            -self.max_v
        } else {
            -0.1 * self.max_v
        }
    }
}

pub fn clamp_action(cmd: Action, limits: &KinematicLimits) -> Action {
    let v = if cmd.v.is_nan() { 0.0 } else { cmd.v };
    let w = if cmd.w.is_nan() { 0.0 } else { cmd.w };
    Action {
        v: v.clamp(limits.min_v(), limits.max_v),
        w: w.clamp(-limits.max_w, limits.max_w),
    }
}

/// Moves the velocity toward `cmd` under the acceleration limits, then
/// integrates the pose along the exact arc for `dt`.
pub fn step(state: &RobotState, cmd: Action, limits: &KinematicLimits, dt: f64) -> RobotState {
    debug_assert!(dt > 0.0);
    let target = clamp_action(cmd, limits);
    let dv = (target.v - state.vel.v).clamp(-limits.max_acc_v * dt, limits.max_acc_v * dt);
    let dw = (target.w - state.vel.w).clamp(-limits.max_acc_w * dt, limits.max_acc_w * dt);
    let vel = Action::new(state.vel.v + dv, state.vel.w + dw);
    RobotState {
        pose: integrate(&state.pose, vel, dt),
        vel,
        t: state.t + dt,
    }
}

/// Constant-velocity unicycle motion over `dt`.
pub fn integrate(pose: &Pose2D, vel: Action, dt: f64) -> Pose2D {
    let th = pose.theta;
    if vel.w.abs() < ARC_EPS {
        Pose2D::new(
            pose.x + vel.v * th.cos() * dt,
            pose.y + vel.v * th.sin() * dt,
            th + vel.w * dt,
        )
    } else {
        let r = vel.v / vel.w;
        let th1 = th + vel.w * dt;
        Pose2D::new(
            pose.x + r * (th1.sin() - th.sin()),
            pose.y - r * (th1.cos() - th.cos()),
            th1,
        )
    }
}
