use serde::{Deserialize, Serialize};

use super::{LocalPlanner, NavError, ParameterSet, PlannerInput};
use crate::geom::{polyline_distance, Point2};
use crate::geom::normalize_angle;
use crate::robot::{step, Action, KinematicLimits, RobotState, ARC_EPS};
use crate::world::{CostGrid, LETHAL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwaConfig {
    /// Rollout length (s).
    pub horizon: f64,
    /// Rollout integration step (s).
    pub sim_dt: f64,
    /// Time between planner invocations (s); sets the dynamic window.
    pub control_period: f64,
    pub footprint_radius: f64,
    /// Hardware limits; planner parameters cap the speeds further.
    pub limits: KinematicLimits,
}

impl Default for DwaConfig {
    fn default() -> Self {
        Self {
            horizon: 1.5,
            sim_dt: 0.05,
            control_period: 0.1,
            footprint_radius: 0.15,
            limits: KinematicLimits::default(),
        }
    }
}

impl DwaConfig {
    /// Hardware limits with speed caps taken from `theta`.
    pub fn effective_limits(&self, theta: &ParameterSet) -> KinematicLimits {
        KinematicLimits {
            max_v: self.limits.max_v.min(theta.max_vel_x),
            max_w: self.limits.max_w.min(theta.max_vel_theta),
            ..self.limits
        }
    }

    pub fn rollout_steps(&self) -> usize {
        (self.horizon / self.sim_dt).round().max(1.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTerms {
    pub d_path: f64,
    pub d_goal: f64,
    pub c_occ: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PlanOutcome {
    Feasible {
        action: Action,
        sample: usize,
        terms: ScoreTerms,
    },
    Infeasible,
}

impl PlanOutcome {
    pub fn action(&self) -> Option<Action> {
        match self {
            PlanOutcome::Feasible { action, .. } => Some(*action),
            PlanOutcome::Infeasible => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, PlanOutcome::Feasible { .. })
    }
}

/// Linear and angular sample values. Linear samples span `[0, v_reach]`,
/// angular samples `[-w_reach, w_reach]`, where the reach is what the
/// acceleration limits allow within one control period.
pub fn sample_axes(state: &RobotState, theta: &ParameterSet, cfg: &DwaConfig) -> (Vec<f64>, Vec<f64>) {
    let lim = cfg.effective_limits(theta);
    let v_hi = (state.vel.v.max(0.0) + lim.max_acc_v * cfg.control_period)
        .min(lim.max_v)
        .max(0.0);
    let w_hi = (state.vel.w.abs() + lim.max_acc_w * cfg.control_period).min(lim.max_w);
    let s = theta.vx_samples.max(1) as usize;
    let t = theta.vtheta_samples.max(1) as usize;
    let vs: Vec<f64> = if s == 1 {
        vec![v_hi]
    } else {
        (0..s).map(|i| v_hi * i as f64 / (s - 1) as f64).collect()
    };
    let ws: Vec<f64> = if t == 1 {
        vec![0.0]
    } else {
        (0..t)
            .map(|j| -w_hi + 2.0 * w_hi * j as f64 / (t - 1) as f64)
            .collect()
    };
    (vs, ws)
}

/// The `(v, w)` grid in sample-index order (`index = i * t + j`).
pub fn velocity_samples(state: &RobotState, theta: &ParameterSet, cfg: &DwaConfig) -> Vec<Action> {
    let (vs, ws) = sample_axes(state, theta, cfg);
    let mut out = Vec::with_capacity(vs.len() * ws.len());
    for &v in &vs {
        for &w in &ws {
            out.push(Action::new(v, w));
        }
    }
    out
}

/// Per-step velocity of one command component under the acceleration limit.
fn ramp(cur: f64, target: f64, acc: f64, dt: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut v = cur;
    for _ in 0..n {
        v += (target - v).clamp(-acc * dt, acc * dt);
        out.push(v);
    }
    out
}

/// Heading terms of one angular command, step by step.
struct Turn {
    w: Vec<f64>,
    c0: Vec<f64>,
    s0: Vec<f64>,
    c1: Vec<f64>,
    s1: Vec<f64>,
}

impl Turn {
    fn new(theta0: f64, w: Vec<f64>, dt: f64) -> Self {
        let n = w.len();
        let mut t = Turn {
            c0: Vec::with_capacity(n),
            s0: Vec::with_capacity(n),
            c1: Vec::with_capacity(n),
            s1: Vec::with_capacity(n),
            w,
        };
        let mut th = theta0;
        let (mut s, mut c) = th.sin_cos();
        for k in 0..n {
            let th1 = th + t.w[k] * dt;
            let (s1, c1) = th1.sin_cos();
            t.c0.push(c);
            t.s0.push(s);
            t.c1.push(c1);
            t.s1.push(s1);
            let next = normalize_angle(th1);
            if next == th1 {
                (s, c) = (s1, c1);
            } else {
                (s, c) = next.sin_cos();
            }
            th = next;
        }
        t
    }
}

/// Positions along the rollout of one sample; bit-identical to stepping
/// the robot model.
fn trace(x0: f64, y0: f64, v: &[f64], turn: &Turn, dt: f64, mut visit: impl FnMut(f64, f64) -> bool) -> (f64, f64) {
    let (mut x, mut y) = (x0, y0);
    for k in 0..v.len() {
        let w = turn.w[k];
        if w.abs() < ARC_EPS {
            x += v[k] * turn.c0[k] * dt;
            y += v[k] * turn.s0[k] * dt;
        } else {
            let r = v[k] / w;
            x += r * (turn.s1[k] - turn.s0[k]);
            y -= r * (turn.c1[k] - turn.c0[k]);
        }
        if !visit(x, y) {
            break;
        }
    }
    (x, y)
}

/// The trajectory-rollout local planner.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dwa {
    pub config: DwaConfig,
}

impl Dwa {
    pub fn new(config: DwaConfig) -> Self {
        Self { config }
    }

    /// Holds `cmd` for the horizon. Returns the end point and the worst
    /// footprint cost, or `None` once any pose touches a lethal cell.
    pub fn rollout(
        &self,
        start: &RobotState,
        cmd: Action,
        limits: &KinematicLimits,
        costs: &CostGrid,
    ) -> Option<(Point2, f64)> {
        let cfg = &self.config;
        let mut s = *start;
        let mut worst: f64 = 0.0;
        for _ in 0..cfg.rollout_steps() {
            s = step(&s, cmd, limits, cfg.sim_dt);
            let c = costs.footprint_cost(s.pose.x, s.pose.y, cfg.footprint_radius);
            if c >= LETHAL {
                return None;
            }
            worst = worst.max(c);
        }
        Some((s.pose.position(), worst))
    }

    /// Score terms of every sample; `None` marks discarded trajectories.
    pub fn score_all(
        &self,
        x: &PlannerInput,
        theta: &ParameterSet,
        costs: &CostGrid,
    ) -> Result<Vec<(Action, Option<ScoreTerms>)>, NavError> {
        if x.global_path.is_empty() {
            return Err(NavError::EmptyPath);
        }
        let limits = self.config.effective_limits(theta);
        Ok(velocity_samples(&x.state, theta, &self.config)
            .into_iter()
            .map(|cmd| {
                let terms = self.rollout(&x.state, cmd, &limits, costs).map(|(end, c_occ)| {
                    let d_path = polyline_distance(end, &x.global_path);
                    let d_goal = end.distance(&x.local_goal);
                    ScoreTerms {
                        d_path,
                        d_goal,
                        c_occ,
                        total: theta.pdist_scale * d_path
                            + theta.gdist_scale * d_goal
                            + theta.occdist_scale * c_occ,
                    }
                });
                (cmd, terms)
            })
            .collect())
    }
}

impl LocalPlanner for Dwa {
    fn name(&self) -> &str {
        "dwa"
    }

    /// Same result as taking the lowest-index minimum of [`Dwa::score_all`].
    /// Samples are visited by increasing goal term and skipped once their
    /// path and goal terms alone cannot beat the best total.
    fn plan(
        &self,
        x: &PlannerInput,
        theta: &ParameterSet,
        costs: &CostGrid,
    ) -> Result<PlanOutcome, NavError> {
        if x.global_path.is_empty() {
            return Err(NavError::EmptyPath);
        }
        let cfg = &self.config;
        let lim = cfg.effective_limits(theta);
        let n = cfg.rollout_steps();
        let dt = cfg.sim_dt;
        let st = &x.state;
        let (vs, ws) = sample_axes(st, theta, cfg);
        let vseq: Vec<Vec<f64>> = vs
            .iter()
            .map(|&v| ramp(st.vel.v, v.clamp(lim.min_v(), lim.max_v), lim.max_acc_v, dt, n))
            .collect();
        let turns: Vec<Turn> = ws
            .iter()
            .map(|&w| {
                let seq = ramp(st.vel.w, w.clamp(-lim.max_w, lim.max_w), lim.max_acc_w, dt, n);
                Turn::new(st.pose.theta, seq, dt)
            })
            .collect();
        let t = ws.len();
        let (px, py) = (st.pose.x, st.pose.y);
        let mut order: Vec<(f64, usize, f64, f64)> = Vec::with_capacity(vs.len() * t);
        for (i, v) in vseq.iter().enumerate() {
            for (j, turn) in turns.iter().enumerate() {
                let (ex, ey) = trace(px, py, v, turn, dt, |_, _| true);
                let g = theta.gdist_scale * Point2::new(ex, ey).distance(&x.local_goal);
                order.push((g, i * t + j, ex, ey));
            }
        }
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut best = PlanOutcome::Infeasible;
        let mut best_total = f64::INFINITY;
        let mut best_index = usize::MAX;
        for &(_, idx, ex, ey) in &order {
            let end = Point2::new(ex, ey);
            let d_goal = end.distance(&x.local_goal);
            if theta.gdist_scale * d_goal > best_total {
                break;
            }
            let d_path = polyline_distance(end, &x.global_path);
            let partial = theta.pdist_scale * d_path + theta.gdist_scale * d_goal;
            if partial > best_total {
                continue;
            }
            let (i, j) = (idx / t, idx % t);
            let mut c_occ: f64 = 0.0;
            let mut lethal = false;
            trace(px, py, &vseq[i], &turns[j], dt, |qx, qy| {
                let c = costs.footprint_cost(qx, qy, cfg.footprint_radius);
                if c >= LETHAL {
                    lethal = true;
                    return false;
                }
                c_occ = c_occ.max(c);
                true
            });
            if lethal {
                continue;
            }
            let total = partial + theta.occdist_scale * c_occ;
            if total < best_total || (total == best_total && idx < best_index) {
                best_total = total;
                best_index = idx;
                best = PlanOutcome::Feasible {
                    action: Action::new(vs[i], ws[j]),
                    sample: idx,
                    terms: ScoreTerms {
                        d_path,
                        d_goal,
                        c_occ,
                        total,
                    },
                };
            }
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Pose2D;
    use crate::world::{inflate, InflationModel, LaserScan, OccupancyGrid};

    fn input(pose: Pose2D, path: Vec<Point2>, local_goal: Point2) -> PlannerInput {
        PlannerInput {
            state: RobotState::at_rest(pose),
            scan: LaserScan {
                ranges: vec![5.0; 4],
                angle_min: -1.0,
                angle_max: 1.0,
                max_range: 5.0,
            },
            goal: *path.last().unwrap(),
            global_path: path,
            local_goal,
        }
    }

    #[test]
    fn open_space_goes_straight() {
        let g = OccupancyGrid::new(40, 40, 0.15).unwrap();
        let c = inflate(&g, 0.3, &InflationModel::default());
        let pose = Pose2D::new(1.0, 1.0, std::f64::consts::FRAC_PI_2);
        let path: Vec<Point2> = (0..=30).map(|i| Point2::new(1.0, 1.0 + i as f64 * 0.1)).collect();
        let x = input(pose, path, Point2::new(1.0, 3.0));
        let out = Dwa::default().plan(&x, &ParameterSet::default(), &c).unwrap();
        let a = out.action().expect("feasible");
        assert!(a.v > 0.0);
        assert!(a.w.abs() < 0.2);
    }

    #[test]
    fn boxed_in_is_infeasible() {
        let mut g = OccupancyGrid::new(10, 10, 0.15).unwrap();
        g.set(5, 4, true);
        let c = inflate(&g, 0.3, &InflationModel::default());
        // Center of the adjacent cell: the footprint already touches the obstacle.
        let pose = Pose2D::new(0.825, 0.525, 0.0);
        let x = input(pose, vec![Point2::new(0.8, 0.5), Point2::new(1.2, 1.2)], Point2::new(1.2, 1.2));
        assert_eq!(
            Dwa::default().plan(&x, &ParameterSet::default(), &c).unwrap(),
            PlanOutcome::Infeasible
        );
    }

    #[test]
    fn empty_path_is_an_input_error() {
        let g = OccupancyGrid::new(10, 10, 0.15).unwrap();
        let c = inflate(&g, 0.3, &InflationModel::default());
        let mut x = input(Pose2D::new(0.7, 0.7, 0.0), vec![Point2::new(1.0, 1.0)], Point2::new(1.0, 1.0));
        x.global_path.clear();
        assert_eq!(
            Dwa::default().plan(&x, &ParameterSet::default(), &c),
            Err(NavError::EmptyPath)
        );
    }

    #[test]
    fn plan_matches_exhaustive_scores() {
        let mut g = OccupancyGrid::new(20, 20, 0.15).unwrap();
        crate::world::force_border(&mut g);
        g.fill_rect(6, 9, 13, 10, true);
        let c = inflate(&g, 0.2, &InflationModel::default());
        let dwa = Dwa::default();
        for (k, heading) in [0.3, 1.2, 2.9, -3.1, -1.0].into_iter().enumerate() {
            let path = vec![Point2::new(1.5, 0.6), Point2::new(0.6, 1.2), Point2::new(1.0, 2.4)];
            let mut x = input(Pose2D::new(1.5, 0.6, heading), path, Point2::new(0.6, 1.2));
            x.state.vel = Action::new(0.1 * k as f64, 0.4 - 0.2 * k as f64);
            let theta = ParameterSet {
                vx_samples: 3 + k as u32,
                vtheta_samples: 7 + 2 * k as u32,
                ..ParameterSet::default()
            };
            let all = dwa.score_all(&x, &theta, &c).unwrap();
            let mut want = PlanOutcome::Infeasible;
            let mut best = f64::INFINITY;
            for (i, (a, t)) in all.iter().enumerate() {
                if let Some(t) = t {
                    if t.total < best {
                        best = t.total;
                        want = PlanOutcome::Feasible {
                            action: *a,
                            sample: i,
                            terms: *t,
                        };
                    }
                }
            }
            assert_eq!(dwa.plan(&x, &theta, &c).unwrap(), want);
        }
    }

    #[test]
    fn sample_grid_shape() {
        let theta = ParameterSet::default();
        let s = velocity_samples(&RobotState::default(), &theta, &DwaConfig::default());
        assert_eq!(s.len(), 120);
        assert_eq!(s[0], Action::new(0.0, -0.4));
        assert!((s[119].v - 0.2).abs() < 1e-12 && (s[119].w - 0.4).abs() < 1e-12);
    }
}
