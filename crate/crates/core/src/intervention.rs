//! Rewindable sessions, intervention capture, the line-JSON intervention log
//! and dataset assembly.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path as FsPath;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Point2, Pose2D};
use crate::nav::{NavError, ParameterSet, PlannerInput};
use crate::robot::{Action, RobotState};
use crate::sim::{Decision, Sim, SimConfig, SimError, SimState, StepStatus};
use crate::world::{LaserScan, OccupancyGrid, ScanConfig, World, WorldError};

/// Default ring capacity in simulation steps (60 s at 20 Hz).
pub const DEFAULT_RING_STEPS: usize = 1200;

#[derive(Debug, Error)]
pub enum InterventionError {
    #[error("time {t} s is outside the rewind window [{oldest}, {newest}] s")]
    OutOfWindow { t: f64, oldest: f64, newest: f64 },
    #[error("invalid span: {0}")]
    InvalidSpan(String),
    #[error("no intervention records")]
    NoRecords,
    #[error("context ids must be exactly 1..={expected}, got {got:?}")]
    ContextIds { expected: usize, got: Vec<u32> },
    #[error("log line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no failure observed within {0} s")]
    NoFailure(f64),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InterventionType {
    #[serde(rename = "A")]
    TypeA,
    #[serde(rename = "B")]
    TypeB,
    Demo,
}

impl fmt::Display for InterventionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InterventionType::TypeA => "A",
            InterventionType::TypeB => "B",
            InterventionType::Demo => "Demo",
        })
    }
}

impl FromStr for InterventionType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" | "TypeA" => Ok(Self::TypeA),
            "B" | "b" | "TypeB" => Ok(Self::TypeB),
            "Demo" | "demo" | "D" | "d" => Ok(Self::Demo),
            _ => Err(format!("unknown intervention type {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub t: f64,
    pub x: PlannerInput,
    pub action: Action,
}

/// A short teleoperated segment together with the environment it was
/// recorded in, so it can be replayed through the planner.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionRecord {
    pub context_id: u32,
    pub itype: InterventionType,
    pub env_file: String,
    pub seed: u64,
    pub grid: OccupancyGrid,
    pub goal: Point2,
    pub scan_config: ScanConfig,
    pub steps: Vec<Step>,
    pub meta: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    context_id: u32,
    itype: InterventionType,
    env_file: String,
    seed: u64,
    goal: [f64; 2],
    scan_config: ScanConfig,
    grid: String,
    #[serde(default)]
    meta: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepLine {
    t: f64,
    pose: [f64; 3],
    vel: [f64; 2],
    scan: Vec<f64>,
    local_goal: [f64; 2],
    action: [f64; 2],
    path: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LogLine {
    Header(HeaderLine),
    Step(StepLine),
}

impl InterventionRecord {
    pub fn validate(&self) -> Result<(), InterventionError> {
        if self.context_id == 0 {
            return Err(InterventionError::InvalidSpan("context id must be positive".into()));
        }
        if self.steps.is_empty() {
            return Err(InterventionError::InvalidSpan("record has no steps".into()));
        }
        if self.steps.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(InterventionError::InvalidSpan("timestamps not increasing".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        match (self.steps.first(), self.steps.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn to_log(&self) -> String {
        let header = HeaderLine {
            context_id: self.context_id,
            itype: self.itype,
            env_file: self.env_file.clone(),
            seed: self.seed,
            goal: [self.goal.x, self.goal.y],
            scan_config: self.scan_config.clone(),
            grid: self.grid.to_text(),
            meta: self.meta.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for s in &self.steps {
            let st = &s.x.state;
            let line = StepLine {
                t: s.t,
                pose: [st.pose.x, st.pose.y, st.pose.theta],
                vel: [st.vel.v, st.vel.w],
                scan: s.x.scan.ranges.clone(),
                local_goal: [s.x.local_goal.x, s.x.local_goal.y],
                action: [s.action.v, s.action.w],
                path: s.x.global_path.iter().map(|p| [p.x, p.y]).collect(),
            };
            out.push_str(&serde_json::to_string(&line).expect("step serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn write_log(records: &[InterventionRecord]) -> String {
    records.iter().map(InterventionRecord::to_log).collect()
}

pub fn parse_log(text: &str) -> Result<Vec<InterventionRecord>, InterventionError> {
    let mut out: Vec<InterventionRecord> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: LogLine = serde_json::from_str(raw).map_err(|e| InterventionError::Parse {
            line,
            msg: e.to_string(),
        })?;
        match parsed {
            LogLine::Header(h) => {
                let grid = OccupancyGrid::from_text(&h.grid).map_err(|e| InterventionError::Parse {
                    line,
                    msg: e.to_string(),
                })?;
                out.push(InterventionRecord {
                    context_id: h.context_id,
                    itype: h.itype,
                    env_file: h.env_file,
                    seed: h.seed,
                    grid,
                    goal: Point2::new(h.goal[0], h.goal[1]),
                    scan_config: h.scan_config,
                    steps: Vec::new(),
                    meta: h.meta,
                });
            }
            LogLine::Step(s) => {
                let Some(rec) = out.last_mut() else {
                    return Err(InterventionError::Parse {
                        line,
                        msg: "step before header".into(),
                    });
                };
                let x = PlannerInput {
                    state: RobotState {
                        pose: Pose2D {
                            x: s.pose[0],
                            y: s.pose[1],
                            theta: s.pose[2],
                        },
                        vel: Action::new(s.vel[0], s.vel[1]),
                        t: s.t,
                    },
                    scan: LaserScan {
                        ranges: s.scan,
                        angle_min: rec.scan_config.angle_min,
                        angle_max: rec.scan_config.angle_max,
                        max_range: rec.scan_config.max_range,
                    },
                    global_path: s.path.iter().map(|p| Point2::new(p[0], p[1])).collect(),
                    local_goal: Point2::new(s.local_goal[0], s.local_goal[1]),
                    goal: rec.goal,
                };
                rec.steps.push(Step {
                    t: s.t,
                    x,
                    action: Action::new(s.action[0], s.action[1]),
                });
            }
        }
    }
    for r in &out {
        r.validate()?;
    }
    Ok(out)
}

pub fn load_log(path: &FsPath) -> Result<Vec<InterventionRecord>, InterventionError> {
    parse_log(&std::fs::read_to_string(path)?)
}

pub fn save_log(path: &FsPath, records: &[InterventionRecord]) -> Result<(), InterventionError> {
    std::fs::write(path, write_log(records))?;
    Ok(())
}

pub fn append_log(path: &FsPath, record: &InterventionRecord) -> Result<(), InterventionError> {
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(record.to_log().as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
struct Snapshot {
    epoch: u32,
    state: SimState,
}

/// One control period as it was executed.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub epoch: u32,
    pub tick: u64,
    pub x: PlannerInput,
    pub action: Action,
}

/// Ring of simulator snapshots taken at every control tick, plus the
/// planner inputs and commands executed from them.
#[derive(Debug, Clone)]
pub struct SimTrace {
    capacity: usize,
    snapshots: VecDeque<Snapshot>,
    entries: VecDeque<TraceEntry>,
    epoch: u32,
}

impl SimTrace {
    /// `capacity_steps` simulation steps, stored as one snapshot per
    /// control period.
    pub fn new(capacity_steps: usize, control_every: u64) -> Self {
        Self {
            capacity: (capacity_steps / control_every.max(1) as usize).max(1),
            snapshots: VecDeque::new(),
            entries: VecDeque::new(),
            epoch: 0,
        }
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &TraceEntry> {
        self.entries.iter()
    }

    pub fn oldest_tick(&self) -> Option<u64> {
        self.snapshots.front().map(|s| s.state.tick)
    }

    fn push(&mut self, state: SimState, entry: TraceEntry) {
        if self.snapshots.len() == self.capacity {
            self.snapshots.pop_front();
            self.entries.pop_front();
        }
        self.snapshots.push_back(Snapshot {
            epoch: self.epoch,
            state,
        });
        self.entries.push_back(entry);
    }

    fn restore_point(&mut self, tick: u64) -> Option<SimState> {
        let i = self.snapshots.iter().position(|s| s.state.tick == tick)?;
        let state = self.snapshots[i].state.clone();
        self.snapshots.truncate(i);
        self.entries.truncate(i);
        self.epoch += 1;
        Some(state)
    }
}

/// Result of one control period of a session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickReport {
    pub status: StepStatus,
    pub action: Action,
    pub decision: Option<Decision>,
}

/// A live simulation with rewind and capture.
#[derive(Debug, Clone)]
pub struct Session {
    sim: Sim,
    trace: SimTrace,
    env_file: String,
    seed: u64,
    next_context: u32,
}

impl Session {
    pub fn new(
        world: World,
        env_file: impl Into<String>,
        config: SimConfig,
        seed: u64,
    ) -> Result<Self, InterventionError> {
        let trace = SimTrace::new(DEFAULT_RING_STEPS, config.control_every);
        Ok(Self {
            sim: Sim::new(world, config, seed)?,
            trace,
            env_file: env_file.into(),
            seed,
            next_context: 1,
        })
    }

    pub fn with_ring(mut self, capacity_steps: usize) -> Self {
        self.trace = SimTrace::new(capacity_steps, self.sim.config().control_every);
        self
    }

    /// Context ids handed out by later captures start at `next`.
    pub fn with_first_context(mut self, next: u32) -> Self {
        self.next_context = next.max(1);
        self
    }

    pub fn sim(&self) -> &Sim {
        &self.sim
    }

    pub fn trace(&self) -> &SimTrace {
        &self.trace
    }

    pub fn time(&self) -> f64 {
        self.sim.time()
    }

    fn dt(&self) -> f64 {
        self.sim.config().dt
    }

    fn to_tick(&self, t: f64) -> u64 {
        let every = self.sim.config().control_every as f64;
        ((t / self.dt() / every).round().max(0.0) * every) as u64
    }

    /// Runs one control period with the command produced by `control`.
    pub fn tick_with<F>(&mut self, control: F) -> Result<TickReport, InterventionError>
    where
        F: FnOnce(&mut Sim, &PlannerInput) -> Result<(Action, Option<Decision>), NavError>,
    {
        let before = self.sim.state().clone();
        let tick = before.tick;
        let x = self.sim.observe();
        let (action, decision) = control(&mut self.sim, &x)?;
        let status = self.sim.advance(action);
        self.trace.push(
            before,
            TraceEntry {
                epoch: self.trace.epoch,
                tick,
                x,
                action,
            },
        );
        Ok(TickReport {
            status,
            action,
            decision,
        })
    }

    pub fn tick_autopilot(&mut self, theta: &ParameterSet) -> Result<TickReport, InterventionError> {
        self.tick_with(|sim, x| {
            let d = sim.autopilot(x, theta)?;
            Ok((d.action, Some(d)))
        })
    }

    pub fn tick_teleop(&mut self, cmd: Action) -> Result<TickReport, InterventionError> {
        self.tick_with(|_, _| Ok((cmd, None)))
    }

    /// Restores the full simulator state recorded at `t` (rounded to the
    /// control period). Later history is discarded.
    pub fn rewind_to(&mut self, t: f64) -> Result<(), InterventionError> {
        let target = self.to_tick(t);
        let now = self.sim.state().tick;
        if target == now {
            return Ok(());
        }
        let (oldest, newest) = (
            self.trace.oldest_tick().unwrap_or(now) as f64 * self.dt(),
            now as f64 * self.dt(),
        );
        let window_err = || InterventionError::OutOfWindow { t, oldest, newest };
        if target > now || !t.is_finite() {
            return Err(window_err());
        }
        let Some(state) = self.trace.restore_point(target) else {
            return Err(window_err());
        };
        self.sim.restore(state);
        Ok(())
    }

    /// Builds a record from the control periods in `[start_t, end_t)` and
    /// assigns it the next context id.
    pub fn capture(
        &mut self,
        start_t: f64,
        end_t: f64,
        itype: InterventionType,
    ) -> Result<InterventionRecord, InterventionError> {
        if !(start_t < end_t) {
            return Err(InterventionError::InvalidSpan(format!("[{start_t}, {end_t}) is empty")));
        }
        let (a, b) = (self.to_tick(start_t), self.to_tick(end_t));
        let oldest = self.trace.oldest_tick().unwrap_or(0);
        if a < oldest || b > self.sim.state().tick {
            return Err(InterventionError::OutOfWindow {
                t: if a < oldest { start_t } else { end_t },
                oldest: oldest as f64 * self.dt(),
                newest: self.time(),
            });
        }
        let span: Vec<&TraceEntry> = self
            .trace
            .entries
            .iter()
            .filter(|e| e.tick >= a && e.tick < b)
            .collect();
        if span.is_empty() {
            return Err(InterventionError::InvalidSpan("no control steps in span".into()));
        }
        if span.iter().any(|e| e.epoch != span[0].epoch) {
            return Err(InterventionError::InvalidSpan("span crosses a rewind".into()));
        }
        let dt = self.dt();
        let steps = span
            .iter()
            .map(|e| Step {
                t: e.tick as f64 * dt,
                x: e.x.clone(),
                action: e.action,
            })
            .collect();
        let world = self.sim.world();
        let record = InterventionRecord {
            context_id: self.next_context,
            itype,
            env_file: self.env_file.clone(),
            seed: self.seed,
            grid: world.grid.clone(),
            goal: world.goal,
            scan_config: self.sim.config().scan.clone(),
            steps,
            meta: String::new(),
        };
        self.next_context += 1;
        Ok(record)
    }
}

/// Planner-driven stand-in for a human intervener: it acts as the local
/// planner would with a hidden parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptedExpert {
    pub theta: ParameterSet,
}

impl ScriptedExpert {
    pub fn act(&self, sim: &Sim, x: &PlannerInput) -> Result<Action, NavError> {
        let costs = sim.costs().get(self.theta.inflation_radius);
        Ok(sim.planner().plan(x, &self.theta, &costs)?.action().unwrap_or(Action::ZERO))
    }
}

/// Where the scripted intervener rewinds to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Onset {
    /// The first control period where the default planner is infeasible or
    /// the start of the first stall (less than `stall_dist` of travel over
    /// `stall_window` seconds), moved back by `lead` seconds.
    FirstFailure {
        lead: f64,
        stall_window: f64,
        stall_dist: f64,
    },
    /// A fixed time.
    At(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpertScript {
    pub itype: InterventionType,
    pub expert: ParameterSet,
    pub onset: Onset,
    /// Length of the teleoperated segment (s).
    pub duration: f64,
    /// How long the default autopilot may run while looking for the onset.
    pub max_wait: f64,
}

/// Runs the default autopilot until the onset, rewinds, lets the expert
/// drive for the scripted duration and captures the segment.
pub fn scripted_intervention(
    session: &mut Session,
    default: &ParameterSet,
    script: &ExpertScript,
) -> Result<InterventionRecord, InterventionError> {
    let start = match script.onset {
        Onset::At(t) => {
            while session.time() + 1e-9 < t {
                if session.tick_autopilot(default)?.status != StepStatus::Running {
                    break;
                }
            }
            t.min(session.time())
        }
        Onset::FirstFailure {
            lead,
            stall_window,
            stall_dist,
        } => {
            let mut onset = None;
            let mut seen: Vec<(f64, Point2)> = Vec::new();
            while session.time() < script.max_wait {
                let t = session.time();
                seen.push((t, session.sim.state().robot.pose.position()));
                if let Some((t0, p0)) = seen.iter().find(|(t0, _)| t - t0 <= stall_window + 1e-9) {
                    if t - t0 >= stall_window - 1e-9 && seen.last().unwrap().1.distance(p0) < stall_dist {
                        onset = Some(*t0);
                        break;
                    }
                }
                let r = session.tick_autopilot(default)?;
                if r.decision.is_some_and(|d| !d.outcome.is_feasible()) {
                    onset = Some(t);
                    break;
                }
                if r.status != StepStatus::Running {
                    break;
                }
            }
            let t = onset.ok_or(InterventionError::NoFailure(script.max_wait))?;
            let oldest = session.trace.oldest_tick().unwrap_or(0) as f64 * session.dt();
            (t - lead).max(oldest)
        }
    };
    session.rewind_to(start)?;
    let start = session.time();
    let expert = ScriptedExpert {
        theta: script.expert,
    };
    while session.time() < start + script.duration - 1e-9 {
        let r = session.tick_with(|sim, x| Ok((expert.act(sim, x)?, None)))?;
        if r.status != StepStatus::Running {
            break;
        }
    }
    let end = session.time();
    let mut rec = session.capture(start, end, script.itype)?;
    rec.meta = format!("scripted {} expert", script.itype);
    Ok(rec)
}

/// Planner inputs labeled with the context of the record they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub items: Vec<(PlannerInput, u32)>,
    pub context_count: usize,
}

impl LabeledDataset {
    pub fn label_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.context_count];
        for (_, l) in &self.items {
            c[*l as usize - 1] += 1;
        }
        c
    }
}

/// Concatenates every step under its record's context id. Ids must be
/// exactly `1..=N` in some order.
pub fn build_dataset(records: &[InterventionRecord]) -> Result<LabeledDataset, InterventionError> {
    if records.is_empty() {
        return Err(InterventionError::NoRecords);
    }
    let mut ids: Vec<u32> = records.iter().map(|r| r.context_id).collect();
    ids.sort_unstable();
    if ids.iter().enumerate().any(|(i, id)| *id as usize != i + 1) {
        return Err(InterventionError::ContextIds {
            expected: records.len(),
            got: records.iter().map(|r| r.context_id).collect(),
        });
    }
    for r in records {
        r.validate()?;
    }
    let mut sorted: Vec<&InterventionRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.context_id);
    let items = sorted
        .iter()
        .flat_map(|r| r.steps.iter().map(|s| (s.x.clone(), r.context_id)))
        .collect();
    Ok(LabeledDataset {
        items,
        context_count: records.len(),
    })
}

/// Gives records the ids 1..=N in their current order.
pub fn renumber(records: &mut [InterventionRecord]) {
    for (i, r) in records.iter_mut().enumerate() {
        r.context_id = i as u32 + 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::force_border;

    fn session() -> Session {
        let mut g = OccupancyGrid::new(24, 40, 0.15).unwrap();
        force_border(&mut g);
        Session::new(World::with_default_endpoints(g), "room.grid", SimConfig::default(), 3).unwrap()
    }

    #[test]
    fn three_seconds_is_thirty_steps() {
        let mut s = session();
        for _ in 0..40 {
            s.tick_teleop(Action::new(0.2, 0.0)).unwrap();
        }
        let r = s.capture(0.5, 3.5, InterventionType::TypeA).unwrap();
        assert_eq!(r.steps.len(), 30);
        assert_eq!(r.context_id, 1);
        let r2 = s.capture(0.0, 1.0, InterventionType::TypeB).unwrap();
        assert_eq!(r2.context_id, 2);
    }

    #[test]
    fn capture_errors() {
        let mut s = session();
        for _ in 0..30 {
            s.tick_teleop(Action::new(0.2, 0.0)).unwrap();
        }
        assert!(matches!(
            s.capture(1.0, 1.0, InterventionType::TypeA),
            Err(InterventionError::InvalidSpan(_))
        ));
        s.rewind_to(2.0).unwrap();
        for _ in 0..10 {
            s.tick_teleop(Action::new(0.1, 0.3)).unwrap();
        }
        assert!(matches!(
            s.capture(1.0, 2.5, InterventionType::TypeA),
            Err(InterventionError::InvalidSpan(_))
        ));
        assert!(s.capture(2.0, 2.5, InterventionType::TypeA).is_ok());
        assert!(matches!(s.rewind_to(10.0), Err(InterventionError::OutOfWindow { .. })));
    }

    #[test]
    fn rewind_restores_and_replays() {
        let mut s = session();
        let theta = ParameterSet::default();
        for _ in 0..30 {
            s.tick_autopilot(&theta).unwrap();
        }
        let now = s.sim().state().clone();
        s.rewind_to(s.time()).unwrap();
        assert_eq!(*s.sim().state(), now);

        let mut first = Vec::new();
        for _ in 0..20 {
            s.tick_autopilot(&theta).unwrap();
            first.push(s.sim().state().clone());
        }
        s.rewind_to(3.0).unwrap();
        let restored = s.sim().state().clone();
        assert_eq!(restored, now);
        let mut second = Vec::new();
        for _ in 0..20 {
            s.tick_autopilot(&theta).unwrap();
            second.push(s.sim().state().clone());
        }
        assert_eq!(first, second);
    }

    #[test]
    fn log_round_trip_is_byte_identical() {
        let mut s = session();
        for i in 0..12 {
            s.tick_teleop(Action::new(0.3, 0.1 * (i % 3) as f64 - 0.1)).unwrap();
        }
        let r = s.capture(0.0, 1.2, InterventionType::Demo).unwrap();
        let text = r.to_log();
        let parsed = parse_log(&text).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0], r);
        assert_eq!(write_log(&parsed), text);
    }

    #[test]
    fn dataset_partition() {
        let mut s = session();
        for _ in 0..80 {
            s.tick_teleop(Action::new(0.1, 0.0)).unwrap();
        }
        let a = s.capture(0.0, 3.0, InterventionType::TypeA).unwrap();
        let b = s.capture(3.0, 8.0, InterventionType::TypeB).unwrap();
        let d = build_dataset(&[b.clone(), a.clone()]).unwrap();
        assert_eq!(d.context_count, 2);
        assert_eq!(d.items.len(), 80);
        assert_eq!(d.label_counts(), vec![30, 50]);
        let one = build_dataset(std::slice::from_ref(&a)).unwrap();
        assert_eq!((one.items.len(), one.context_count), (30, 1));
        assert!(matches!(build_dataset(&[]), Err(InterventionError::NoRecords)));
        assert!(matches!(
            build_dataset(&[b.clone()]),
            Err(InterventionError::ContextIds { .. })
        ));
        let mut v = vec![b];
        renumber(&mut v);
        assert!(build_dataset(&v).is_ok());
    }
}
