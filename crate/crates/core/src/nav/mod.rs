//! The parameterized navigation system: a Dijkstra global planner, a
//! trajectory-sampling local planner driven by a [`ParameterSet`], and the
//! recovery behaviors used when no sampled trajectory is feasible.

mod dwa;
mod global;
mod params;
mod recovery;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dwa::{velocity_samples, Dwa, DwaConfig, PlanOutcome, ScoreTerms};
pub use global::{edge_cost, local_goal, plan_global, plan_global_from_anywhere, Path, COST_WEIGHT};
pub use params::{ParameterSet, ParameterSpace, PARAM_KEYS};
pub use recovery::{recovery_action, RecoveryPhase, RecoveryState, RECOVERY_AFTER};

use crate::geom::Point2;
use crate::robot::RobotState;
use crate::world::{CostGrid, LaserScan};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NavError {
    #[error("global path is empty")]
    EmptyPath,
    #[error("no path to goal")]
    NoPath,
    #[error("start or goal lies in a lethal cell")]
    LethalEndpoint,
    #[error("point ({}, {}) is outside the grid", .0.x, .0.y)]
    OutOfBounds(Point2),
    #[error("bad parameters: {0}")]
    BadParameters(String),
}

/// Everything the navigation system observes at one control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerInput {
    pub state: RobotState,
    pub scan: LaserScan,
    pub global_path: Vec<Point2>,
    pub local_goal: Point2,
    pub goal: Point2,
}

/// A local planner `G(x; theta)`. Implementations must be deterministic.
pub trait LocalPlanner: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;

    fn plan(
        &self,
        x: &PlannerInput,
        theta: &ParameterSet,
        costs: &CostGrid,
    ) -> Result<PlanOutcome, NavError>;
}
