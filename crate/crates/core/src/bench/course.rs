//! The training course: hand-built worlds where scripted experts provide
//! Type A, Type B and demonstration segments.

use serde::{Deserialize, Serialize};

use super::suite::{generate_suite, SuiteConfig};
use super::BenchError;
use crate::geom::Point2;
use crate::intervention::{scripted_intervention, ExpertScript, InterventionRecord, InterventionType, Onset, Session};
use crate::nav::{ParameterSet, PlannerInput};
use crate::sim::{Sim, SimConfig, SimError, StepStatus};
use crate::world::{force_border, OccupancyGrid, World};

const SIDE: usize = 30;
const RES: f64 = 0.15;

fn walled() -> OccupancyGrid {
    let mut g = OccupancyGrid::new(SIDE, SIDE, RES).expect("valid size");
    force_border(&mut g);
    g
}

/// A two-row wall across the room with a three-cell gap at column `gx`.
pub fn gap_world(gx: usize, row: usize) -> World {
    let mut g = walled();
    g.fill_rect(0, row, SIDE - 1, row + 1, true);
    g.fill_rect(gx, row, gx + 2, row + 1, false);
    World::with_default_endpoints(g)
}

/// A block with a three-cell channel through it.
pub fn channel_world(cx: usize, rows: (usize, usize)) -> World {
    let mut g = walled();
    g.fill_rect(0, rows.0, SIDE - 1, rows.1, true);
    g.fill_rect(cx, rows.0, cx + 2, rows.1, false);
    World::with_default_endpoints(g)
}

/// Empty room.
pub fn open_world() -> World {
    World::with_default_endpoints(walled())
}

/// Pillars away from the straight line between start and goal.
pub fn pillar_world() -> World {
    let mut g = walled();
    for (x, y) in [(4, 8), (24, 10), (6, 18), (23, 21), (9, 25), (20, 4)] {
        g.fill_rect(x, y, x + 1, y + 1, true);
    }
    World::with_default_endpoints(g)
}

/// Scattered blocks that force a weaving path.
pub fn clutter_world(variant: usize) -> World {
    let mut g = walled();
    let blocks: &[(usize, usize, usize, usize)] = if variant == 0 {
        &[(12, 8, 17, 9), (4, 13, 10, 14), (19, 13, 25, 14), (10, 19, 14, 20), (17, 22, 20, 24)]
    } else {
        &[(9, 7, 13, 8), (17, 9, 21, 11), (13, 14, 16, 16), (5, 20, 9, 21), (20, 19, 24, 20)]
    };
    for &(x0, y0, x1, y1) in blocks {
        g.fill_rect(x0, y0, x1, y1, true);
    }
    World::with_default_endpoints(g)
}

/// Slow, tight clearance: gets through gaps the default seals.
pub fn tight_expert() -> ParameterSet {
    ParameterSet {
        max_vel_x: 0.3,
        max_vel_theta: 1.0,
        vx_samples: 8,
        vtheta_samples: 15,
        occdist_scale: 0.05,
        pdist_scale: 1.0,
        gdist_scale: 0.6,
        inflation_radius: 0.08,
    }
}

/// Fast driving in open space.
pub fn open_expert() -> ParameterSet {
    ParameterSet {
        max_vel_x: 1.2,
        vx_samples: 10,
        occdist_scale: 0.05,
        ..ParameterSet::default()
    }
}

/// A moderate all-round demonstrator.
pub fn demo_expert() -> ParameterSet {
    ParameterSet {
        max_vel_x: 0.8,
        max_vel_theta: 2.0,
        vx_samples: 8,
        vtheta_samples: 20,
        occdist_scale: 0.1,
        pdist_scale: 0.75,
        gdist_scale: 1.0,
        inflation_radius: 0.2,
    }
}

pub struct CourseItem {
    pub name: &'static str,
    pub world: World,
    pub script: ExpertScript,
}

pub fn course() -> Vec<CourseItem> {
    let failure = Onset::FirstFailure {
        lead: 1.0,
        stall_window: 2.0,
        stall_dist: 0.1,
    };
    let a = |onset| ExpertScript {
        itype: InterventionType::TypeA,
        expert: tight_expert(),
        onset,
        duration: 4.0,
        max_wait: 30.0,
    };
    let b = ExpertScript {
        itype: InterventionType::TypeB,
        expert: open_expert(),
        onset: Onset::At(0.5),
        duration: 3.0,
        max_wait: 30.0,
    };
    let d = ExpertScript {
        itype: InterventionType::Demo,
        expert: demo_expert(),
        onset: Onset::At(0.0),
        duration: 5.0,
        max_wait: 30.0,
    };
    vec![
        CourseItem {
            name: "A1",
            world: gap_world(11, 14),
            script: a(failure),
        },
        CourseItem {
            name: "A2",
            world: channel_world(16, (12, 17)),
            script: a(failure),
        },
        CourseItem {
            name: "B1",
            world: open_world(),
            script: b,
        },
        CourseItem {
            name: "B2",
            world: pillar_world(),
            script: b,
        },
        CourseItem {
            name: "D1",
            world: clutter_world(0),
            script: d,
        },
        CourseItem {
            name: "D2",
            world: clutter_world(1),
            script: d,
        },
    ]
}

/// Runs every scripted expert once; records get context ids 1.. in course
/// order.
pub fn collect(items: &[CourseItem], sim: &SimConfig, seed: u64) -> Result<Vec<InterventionRecord>, BenchError> {
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let mut session = Session::new(item.world.clone(), format!("course/{}", item.name), sim.clone(), seed)?
                .with_first_context(i as u32 + 1);
            let mut rec = scripted_intervention(&mut session, &ParameterSet::default(), &item.script)?;
            rec.meta = format!("{} {}", item.name, rec.meta);
            Ok(rec)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NominalConfig {
    pub duration: f64,
    /// Keep every this many control ticks.
    pub stride: usize,
    /// Inputs this close to the first failure are not nominal.
    pub lead: f64,
    pub stall_window: f64,
    pub stall_dist: f64,
    /// Generated practice worlds driven in addition to the course.
    pub practice_envs: usize,
    pub practice_seed: u64,
}

impl Default for NominalConfig {
    fn default() -> Self {
        Self {
            duration: 25.0,
            stride: 2,
            lead: 1.0,
            stall_window: 2.0,
            stall_dist: 0.1,
            practice_envs: 2,
            practice_seed: 1000,
        }
    }
}

pub fn course_worlds(items: &[CourseItem]) -> Vec<World> {
    items.iter().map(|i| i.world.clone()).collect()
}

/// Distinct worlds the records were taken in, with the default start.
pub fn record_worlds(records: &[InterventionRecord]) -> Vec<World> {
    let mut out: Vec<World> = Vec::new();
    for r in records {
        if out.iter().any(|w| w.grid == r.grid && w.goal == r.goal) {
            continue;
        }
        out.push(World {
            goal: r.goal,
            ..World::with_default_endpoints(r.grid.clone())
        });
    }
    out
}

/// Inputs seen while the default parameters drive unattended, on each
/// given world and on `practice_envs` generated worlds, up to the
/// default's first failure (an infeasible tick or a stall) less `lead`
/// seconds.
pub fn nominal_lap(
    worlds: &[World],
    sim: &SimConfig,
    seed: u64,
    cfg: &NominalConfig,
) -> Result<Vec<PlannerInput>, BenchError> {
    let mut worlds = worlds.to_vec();
    if cfg.practice_envs > 0 {
        let practice = generate_suite(&SuiteConfig {
            n_envs: cfg.practice_envs,
            ..SuiteConfig::desk(cfg.practice_seed)
        })?;
        worlds.extend(practice.into_iter().map(|e| e.world));
    }
    let default = ParameterSet::default();
    let mut out = Vec::new();
    for world in worlds {
        let mut s = Sim::new(world, sim.clone(), seed)?;
        let mut seen: Vec<(f64, PlannerInput)> = Vec::new();
        let mut trail: Vec<(f64, Point2)> = Vec::new();
        let mut cut = f64::INFINITY;
        let mut tick = 0usize;
        while s.time() < cfg.duration {
            let t = s.time();
            let p = s.state().robot.pose.position();
            trail.push((t, p));
            if let Some((t0, p0)) = trail.iter().find(|(t0, _)| t - t0 <= cfg.stall_window + 1e-9) {
                if t - t0 >= cfg.stall_window - 1e-9 && p.distance(p0) < cfg.stall_dist {
                    cut = *t0;
                    break;
                }
            }
            let x = s.observe();
            let d = s.autopilot(&x, &default).map_err(SimError::from)?;
            if !d.outcome.is_feasible() {
                cut = t;
                break;
            }
            if tick % cfg.stride.max(1) == 0 {
                seen.push((t, x));
            }
            tick += 1;
            if s.advance(d.action) != StepStatus::Running {
                break;
            }
        }
        out.extend(seen.into_iter().filter(|(t, _)| *t < cut - cfg.lead).map(|(_, x)| x));
    }
    Ok(out)
}

/// Records of the given types, renumbered 1.. in their original order.
pub fn subset(records: &[InterventionRecord], types: &[InterventionType]) -> Vec<InterventionRecord> {
    let mut out: Vec<InterventionRecord> = records.iter().filter(|r| types.contains(&r.itype)).cloned().collect();
    out.sort_by_key(|r| r.context_id);
    for (i, r) in out.iter_mut().enumerate() {
        r.context_id = i as u32 + 1;
    }
    out
}
