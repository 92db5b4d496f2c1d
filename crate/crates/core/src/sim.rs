//! Closed-loop simulation: robot, sensing, global replanning and the
//! autopilot, advanced one control period at a time.

use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point2;
use crate::nav::{
    local_goal, plan_global_from_anywhere, recovery_action, Dwa, DwaConfig, LocalPlanner, NavError,
    ParameterSet, PlanOutcome, PlannerInput, RecoveryPhase, RecoveryState,
};
use crate::robot::{step, Action, RobotState, CONTROL_EVERY, DT};
use crate::world::{
    apply_scan_noise, inflate, inflation_breakpoints, is_collision, raycast, CostGrid,
    InflationModel, LaserScan, OccupancyGrid, ScanConfig, World,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("start pose collides with an obstacle")]
    StartInCollision,
    #[error(transparent)]
    Nav(#[from] NavError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub control_every: u64,
    pub scan: ScanConfig,
    pub dwa: DwaConfig,
    pub inflation: InflationModel,
    /// Inflation of the costmap the global planner runs on.
    pub global_inflation: f64,
    /// Control periods between global replans.
    pub replan_every: u32,
    pub lookahead: f64,
    pub goal_tolerance: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: DT,
            control_every: CONTROL_EVERY,
            scan: ScanConfig::default(),
            dwa: DwaConfig::default(),
            inflation: InflationModel::default(),
            global_inflation: 0.45,
            replan_every: 5,
            lookahead: 1.0,
            goal_tolerance: 0.3,
        }
    }
}

impl SimConfig {
    pub fn control_period(&self) -> f64 {
        self.dt * self.control_every as f64
    }
}

/// Cost grids of one occupancy grid, built on demand. Inflation only
/// changes at the breakpoints, so radii are keyed by breakpoint index.
#[derive(Debug)]
pub struct CostCache {
    grid: OccupancyGrid,
    model: InflationModel,
    breakpoints: Vec<f64>,
    slots: Vec<OnceLock<Arc<CostGrid>>>,
}

impl CostCache {
    const MAX_RADIUS: f64 = 1.5;

    pub fn new(grid: OccupancyGrid, model: InflationModel) -> Self {
        let breakpoints = inflation_breakpoints(grid.resolution(), Self::MAX_RADIUS);
        let slots = (0..=breakpoints.len()).map(|_| OnceLock::new()).collect();
        Self {
            grid,
            model,
            breakpoints,
            slots,
        }
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn model(&self) -> &InflationModel {
        &self.model
    }

    pub fn get(&self, radius: f64) -> Arc<CostGrid> {
        let key = self.breakpoints.partition_point(|b| *b <= radius);
        if key == self.breakpoints.len() {
            return Arc::new(inflate(&self.grid, radius, &self.model));
        }
        self.slots[key]
            .get_or_init(|| Arc::new(inflate(&self.grid, radius, &self.model)))
            .clone()
    }
}

impl Clone for CostCache {
    fn clone(&self) -> Self {
        Self::new(self.grid.clone(), self.model)
    }
}

/// The complete mutable state of a simulation. Restoring a copy makes the
/// continuation bit-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub tick: u64,
    pub robot: RobotState,
    pub rng: ChaCha8Rng,
    pub recovery: RecoveryState,
    pub held: Action,
    pub path: Vec<Point2>,
    pub path_age: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Running,
    Reached,
    Collision,
}

/// Autopilot output for one control period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub action: Action,
    pub outcome: PlanOutcome,
    pub recovering: bool,
}

#[derive(Debug, Clone)]
pub struct Sim {
    world: World,
    config: SimConfig,
    costs: CostCache,
    global_costs: CostGrid,
    planner: Arc<dyn LocalPlanner>,
    state: SimState,
}

impl Sim {
    pub fn new(world: World, config: SimConfig, seed: u64) -> Result<Self, SimError> {
        let start = world.start_pose();
        Self::with_start(world, config, seed, RobotState::at_rest(start))
    }

    pub fn with_start(
        world: World,
        config: SimConfig,
        seed: u64,
        robot: RobotState,
    ) -> Result<Self, SimError> {
        if is_collision(&world.grid, &robot.pose, config.dwa.footprint_radius) {
            return Err(SimError::StartInCollision);
        }
        let costs = CostCache::new(world.grid.clone(), config.inflation);
        let global_costs = inflate(&world.grid, config.global_inflation, &config.inflation);
        let planner: Arc<dyn LocalPlanner> = Arc::new(Dwa::new(config.dwa));
        Ok(Self {
            world,
            config,
            costs,
            global_costs,
            planner,
            state: SimState {
                tick: 0,
                robot,
                rng: ChaCha8Rng::seed_from_u64(seed),
                recovery: RecoveryState::default(),
                held: Action::ZERO,
                path: Vec::new(),
                path_age: 0,
            },
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn costs(&self) -> &CostCache {
        &self.costs
    }

    pub fn planner(&self) -> &Arc<dyn LocalPlanner> {
        &self.planner
    }

    pub fn set_planner(&mut self, planner: Arc<dyn LocalPlanner>) {
        self.planner = planner;
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn restore(&mut self, state: SimState) {
        self.state = state;
    }

    pub fn time(&self) -> f64 {
        self.state.tick as f64 * self.config.dt
    }

    pub fn distance_to_goal(&self) -> f64 {
        self.state.robot.pose.position().distance(&self.world.goal)
    }

    pub fn at_goal(&self) -> bool {
        self.distance_to_goal() <= self.config.goal_tolerance
    }

    fn replan(&mut self) {
        let pos = self.state.robot.pose.position();
        match plan_global_from_anywhere(&self.global_costs, pos, self.world.goal) {
            Ok(p) => self.state.path = p.waypoints,
            Err(_) if self.state.path.is_empty() => self.state.path = vec![pos, self.world.goal],
            Err(_) => {}
        }
    }

    fn scan(&mut self) -> LaserScan {
        let cfg = &self.config.scan;
        let mut scan = raycast(&self.world.grid, &self.state.robot.pose, cfg).unwrap_or_else(|_| LaserScan {
            ranges: vec![0.0; cfg.num_beams],
            angle_min: cfg.angle_min,
            angle_max: cfg.angle_max,
            max_range: cfg.max_range,
        });
        apply_scan_noise(&mut scan, cfg, &mut self.state.rng);
        scan
    }

    /// Senses and refreshes the global path when it is due.
    pub fn observe(&mut self) -> PlannerInput {
        if self.state.path.is_empty() || self.state.path_age >= self.config.replan_every {
            self.replan();
            self.state.path_age = 0;
        }
        self.state.path_age += 1;
        let pos = self.state.robot.pose.position();
        let lg = local_goal(&self.state.path, pos, self.config.lookahead).unwrap_or(self.world.goal);
        PlannerInput {
            state: self.state.robot,
            scan: self.scan(),
            global_path: self.state.path.clone(),
            local_goal: lg,
            goal: self.world.goal,
        }
    }

    /// Runs the local planner with `theta`, falling back to the recovery
    /// behaviors after repeated infeasible results.
    pub fn autopilot(&mut self, x: &PlannerInput, theta: &ParameterSet) -> Result<Decision, NavError> {
        let costs = self.costs.get(theta.inflation_radius);
        let outcome = self.planner.plan(x, theta, &costs)?;
        if let Some(action) = outcome.action() {
            self.state.recovery.reset();
            return Ok(Decision {
                action,
                outcome,
                recovering: false,
            });
        }
        let limits = self.config.dwa.effective_limits(theta);
        let mut action = self
            .state
            .recovery
            .on_infeasible(&limits, self.config.control_period());
        if self.state.recovery.phase == Some(RecoveryPhase::Backup) && self.backup_collides(action) {
            action = recovery_action(RecoveryPhase::Rotate, &limits);
        }
        Ok(Decision {
            action,
            outcome,
            recovering: self.state.recovery.active(),
        })
    }

    fn backup_collides(&self, cmd: Action) -> bool {
        let mut s = self.state.robot;
        for _ in 0..self.config.control_every {
            s = step(&s, cmd, &self.config.dwa.limits, self.config.dt);
            if is_collision(&self.world.grid, &s.pose, self.config.dwa.footprint_radius) {
                return true;
            }
        }
        false
    }

    /// Holds `cmd` for one control period. Stops early on collision or when
    /// the goal is reached.
    pub fn advance(&mut self, cmd: Action) -> StepStatus {
        self.state.held = cmd;
        for _ in 0..self.config.control_every {
            self.state.robot = step(&self.state.robot, cmd, &self.config.dwa.limits, self.config.dt);
            self.state.tick += 1;
            self.state.robot.t = self.state.tick as f64 * self.config.dt;
            if is_collision(&self.world.grid, &self.state.robot.pose, self.config.dwa.footprint_radius) {
                return StepStatus::Collision;
            }
            if self.at_goal() {
                return StepStatus::Reached;
            }
        }
        StepStatus::Running
    }
}
