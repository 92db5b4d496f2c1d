//! The session state machine. It owns the simulator, applies commands at
//! tick boundaries and produces the outgoing message stream.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use navtune::intervention::{append_log, InterventionRecord, InterventionType, Session};
use navtune::nav::ParameterSet;
use navtune::robot::Action;
use navtune::sim::{SimConfig, StepStatus};
use navtune::world::{generate_ca_world, raycast, CaConfig, OccupancyGrid, World};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{
    ClientCommand, EnvSource, ErrorCode, Payload, Phase, SessionMessage, StateFrame, StatusFrame,
    PROTOCOL_VERSION,
};

pub type ClientId = u64;

#[derive(Debug, Error)]
pub enum TeleopError {
    #[error("environment: {0}")]
    Env(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("command log line {line}: {msg}")]
    Log { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeleopConfig {
    pub sim: SimConfig,
    pub seed: u64,
    /// Rewind ring capacity in simulation steps.
    pub ring_steps: usize,
    /// Context id given to the first saved record.
    pub first_context: u32,
    /// Send a scan frame after every n-th state frame; 0 disables them.
    pub scan_every: u32,
}

impl Default for TeleopConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            seed: 0,
            ring_steps: navtune::intervention::DEFAULT_RING_STEPS,
            first_context: 1,
            scan_every: 1,
        }
    }
}

/// A world with the source it was loaded from. File sources are resolved
/// to grid text so a command log never depends on files that may change.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedEnv {
    pub name: String,
    pub source: EnvSource,
    pub world: World,
}

impl LoadedEnv {
    pub fn load(source: &EnvSource, footprint_radius: f64) -> Result<Self, TeleopError> {
        let env_err = |e: &dyn std::fmt::Display| TeleopError::Env(e.to_string());
        match source {
            EnvSource::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| env_err(&e))?;
                let name = Some(path.clone());
                Self::load(&EnvSource::Grid { text, name }, footprint_radius)
            }
            EnvSource::Grid { text, name } => {
                let grid = OccupancyGrid::from_text(text).map_err(|e| env_err(&e))?;
                Ok(Self {
                    name: name.clone().unwrap_or_else(|| "inline".into()),
                    source: source.clone(),
                    world: World::with_default_endpoints(grid),
                })
            }
            EnvSource::Generated { seed, fill_prob } => {
                let g = generate_ca_world(&CaConfig {
                    seed: *seed,
                    fill_prob: *fill_prob,
                    footprint_radius,
                    ..CaConfig::default()
                })
                .map_err(|e| env_err(&e))?;
                let name = format!("ca_{seed}_{fill_prob}");
                Ok(Self {
                    source: EnvSource::Grid {
                        text: g.world.grid.to_text(),
                        name: Some(name.clone()),
                    },
                    name,
                    world: g.world,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mark {
    None,
    Open { begin: f64 },
}

/// First line of a command log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub version: u32,
    pub config: TeleopConfig,
    pub env: EnvSource,
}

/// An accepted command and the number of ticks executed before it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub at: u64,
    pub client: ClientId,
    pub cmd: ClientCommand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandLog {
    pub header: LogHeader,
    pub entries: Vec<LogEntry>,
}

impl CommandLog {
    pub fn to_text(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TeleopError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(TeleopError::Log {
            line: 1,
            msg: "empty log".into(),
        })?;
        let header: LogHeader = serde_json::from_str(first).map_err(|e| TeleopError::Log {
            line: 1,
            msg: e.to_string(),
        })?;
        let entries = lines
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| TeleopError::Log {
                    line: i + 1,
                    msg: e.to_string(),
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { header, entries })
    }
}

/// Files a live session writes as it goes.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub records: Option<PathBuf>,
    pub commands: Option<PathBuf>,
}

pub struct Teleop {
    config: TeleopConfig,
    env: LoadedEnv,
    session: Session,
    theta: ParameterSet,
    phase: Phase,
    controller: Option<ClientId>,
    held: Action,
    mark: Mark,
    pending: Option<InterventionRecord>,
    outcome: StepStatus,
    ticks: u64,
    frames: u64,
    seq: u64,
    next_context: u32,
    saved: Vec<InterventionRecord>,
    log: CommandLog,
    outputs: Outputs,
}

fn violation(client: ClientId, cmd: &ClientCommand, expected: &[&str]) -> Payload {
    Payload::Error {
        client: Some(client),
        code: ErrorCode::ProtocolViolation,
        message: format!("{} is not allowed in the current state", cmd.name()),
        expected: expected.iter().map(|s| s.to_string()).collect(),
    }
}

fn error(client: Option<ClientId>, code: ErrorCode, message: impl Into<String>) -> Payload {
    Payload::Error {
        client,
        code,
        message: message.into(),
        expected: Vec::new(),
    }
}

impl Teleop {
    /// A running session on `env`, driven by the default autopilot.
    pub fn new(env: LoadedEnv, config: TeleopConfig) -> Result<Self, TeleopError> {
        let session = Self::fresh_session(&env, &config)?;
        let log = CommandLog {
            header: LogHeader {
                version: PROTOCOL_VERSION,
                config: config.clone(),
                env: env.source.clone(),
            },
            entries: Vec::new(),
        };
        Ok(Self {
            next_context: config.first_context.max(1),
            config,
            env,
            session,
            theta: ParameterSet::default(),
            phase: Phase::Running,
            controller: None,
            held: Action::ZERO,
            mark: Mark::None,
            pending: None,
            outcome: StepStatus::Running,
            ticks: 0,
            frames: 0,
            seq: 0,
            saved: Vec::new(),
            log,
            outputs: Outputs::default(),
        })
    }

    /// Starts writing the command log and saved records to files. The
    /// command log is truncated and begins with the header.
    pub fn with_outputs(mut self, outputs: Outputs) -> Result<Self, TeleopError> {
        if let Some(path) = &outputs.commands {
            std::fs::write(path, self.log.to_text())?;
        }
        self.outputs = outputs;
        Ok(self)
    }

    fn fresh_session(env: &LoadedEnv, config: &TeleopConfig) -> Result<Session, TeleopError> {
        Session::new(env.world.clone(), env.name.clone(), config.sim.clone(), config.seed)
            .map(|s| s.with_ring(config.ring_steps))
            .map_err(|e| TeleopError::Env(e.to_string()))
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn time(&self) -> f64 {
        self.session.time()
    }

    pub fn sim_tick(&self) -> u64 {
        self.session.sim().state().tick
    }

    /// Control periods executed so far, counting across rewinds.
    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn controller(&self) -> Option<ClientId> {
        self.controller
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn env(&self) -> &LoadedEnv {
        &self.env
    }

    pub fn saved(&self) -> &[InterventionRecord] {
        &self.saved
    }

    pub fn command_log(&self) -> &CommandLog {
        &self.log
    }

    fn emit(&mut self, payload: Payload) -> SessionMessage {
        self.seq += 1;
        SessionMessage {
            seq: self.seq,
            payload,
        }
    }

    fn mark_begin(&self) -> Option<f64> {
        match self.mark {
            Mark::Open { begin } => Some(begin),
            Mark::None => None,
        }
    }

    fn status(&self, event: &str, client: Option<ClientId>, detail: String) -> Payload {
        Payload::Status(StatusFrame {
            event: event.into(),
            client,
            t: self.time(),
            phase: self.phase,
            controller: self.controller,
            mark_begin: self.mark_begin(),
            detail,
        })
    }

    pub fn hello(&mut self, client: ClientId, observer: bool) -> SessionMessage {
        let grid = self.env.world.grid.to_text();
        self.emit(Payload::Hello {
            version: PROTOCOL_VERSION,
            client,
            observer,
            grid,
        })
    }

    /// An error frame for input that never became a command.
    pub fn reject(&mut self, client: Option<ClientId>, code: ErrorCode, message: impl Into<String>) -> SessionMessage {
        let p = error(client, code, message);
        self.emit(p)
    }

    /// A client went away; it gives up control if it held it.
    pub fn disconnect(&mut self, client: ClientId) -> Vec<SessionMessage> {
        if self.controller == Some(client) {
            self.handle(client, ClientCommand::ReleaseControl)
        } else {
            Vec::new()
        }
    }

    /// Applies one command. Rejected commands change nothing and produce a
    /// single error frame.
    pub fn handle(&mut self, client: ClientId, cmd: ClientCommand) -> Vec<SessionMessage> {
        let at = self.ticks;
        let cmd = match cmd {
            ClientCommand::LoadEnv { env } => match LoadedEnv::load(&env, self.config.sim.dwa.footprint_radius) {
                Ok(loaded) => ClientCommand::LoadEnv { env: loaded.source },
                Err(e) => return vec![self.reject(Some(client), ErrorCode::Env, e.to_string())],
            },
            c => c,
        };
        match self.apply(client, &cmd) {
            Ok(payloads) => {
                let entry = LogEntry { at, client, cmd };
                if let Some(path) = &self.outputs.commands {
                    let line = serde_json::to_string(&entry).expect("entry serializes");
                    if let Err(e) = OpenOptions::new()
                        .append(true)
                        .open(path)
                        .and_then(|mut f| writeln!(f, "{line}"))
                    {
                        log::error!("command log write failed: {e}");
                    }
                }
                self.log.entries.push(entry);
                payloads.into_iter().map(|p| self.emit(p)).collect()
            }
            Err(p) => vec![self.emit(p)],
        }
    }

    fn apply(&mut self, client: ClientId, cmd: &ClientCommand) -> Result<Vec<Payload>, Payload> {
        let name = cmd.name();
        match cmd {
            ClientCommand::Hello { version } => {
                if *version != PROTOCOL_VERSION {
                    return Err(error(
                        Some(client),
                        ErrorCode::Version,
                        format!("server speaks version {PROTOCOL_VERSION}, client sent {version}"),
                    ));
                }
            }
            ClientCommand::LoadEnv { env } => {
                let loaded = LoadedEnv::load(env, self.config.sim.dwa.footprint_radius)
                    .map_err(|e| error(Some(client), ErrorCode::Env, e.to_string()))?;
                let session = Self::fresh_session(&loaded, &self.config)
                    .map_err(|e| error(Some(client), ErrorCode::Env, e.to_string()))?;
                self.env = loaded;
                self.session = session;
                self.phase = Phase::Running;
                self.controller = None;
                self.held = Action::ZERO;
                self.mark = Mark::None;
                self.pending = None;
                self.outcome = StepStatus::Running;
                let grid = self.env.world.grid.to_text();
                return Ok(vec![
                    Payload::Hello {
                        version: PROTOCOL_VERSION,
                        client,
                        observer: false,
                        grid,
                    },
                    self.status(name, Some(client), self.env.name.clone()),
                ]);
            }
            ClientCommand::Start => {
                if self.phase != Phase::Paused {
                    return Err(violation(client, cmd, &["paused"]));
                }
                self.phase = Phase::Running;
                self.outcome = StepStatus::Running;
            }
            ClientCommand::Pause => {
                if self.phase != Phase::Running {
                    return Err(violation(client, cmd, &["running"]));
                }
                self.phase = Phase::Paused;
            }
            ClientCommand::RewindTo { t } => {
                if self.phase != Phase::Paused || self.mark != Mark::None {
                    return Err(violation(client, cmd, &["paused", "no_open_mark"]));
                }
                self.session
                    .rewind_to(*t)
                    .map_err(|e| error(Some(client), ErrorCode::OutOfWindow, e.to_string()))?;
                self.outcome = StepStatus::Running;
            }
            ClientCommand::Drive { v, w } => {
                if self.controller != Some(client) {
                    return Err(violation(client, cmd, &["controlling"]));
                }
                if !v.is_finite() || !w.is_finite() {
                    return Err(error(Some(client), ErrorCode::Malformed, "drive needs finite v and w"));
                }
                self.held = Action::new(*v, *w);
            }
            ClientCommand::TakeControl => {
                match self.controller {
                    Some(c) if c == client => return Err(violation(client, cmd, &["not_controlling"])),
                    Some(c) => {
                        return Err(error(
                            Some(client),
                            ErrorCode::ControlHeld,
                            format!("client {c} holds control"),
                        ))
                    }
                    None => {}
                }
                self.controller = Some(client);
                self.held = Action::ZERO;
                self.phase = Phase::Running;
                self.outcome = StepStatus::Running;
            }
            ClientCommand::ReleaseControl => {
                if self.controller != Some(client) {
                    return Err(violation(client, cmd, &["controlling"]));
                }
                self.controller = None;
                self.held = Action::ZERO;
            }
            ClientCommand::MarkBegin => {
                if self.mark != Mark::None {
                    return Err(violation(client, cmd, &["no_open_mark"]));
                }
                self.mark = Mark::Open { begin: self.time() };
            }
            ClientCommand::MarkEnd { itype } => {
                let Mark::Open { begin } = self.mark else {
                    return Err(violation(client, cmd, &["mark_open"]));
                };
                let record = self.capture(begin, *itype).map_err(|e| error(Some(client), ErrorCode::Capture, e))?;
                self.mark = Mark::None;
                let detail = format!("{} steps", record.steps.len());
                self.pending = Some(record);
                return Ok(vec![self.status(name, Some(client), detail)]);
            }
            ClientCommand::SaveRecord => {
                let Some(mut record) = self.pending.clone() else {
                    return Err(violation(client, cmd, &["mark_closed"]));
                };
                record.context_id = self.next_context;
                if let Some(path) = &self.outputs.records {
                    append_log(path, &record).map_err(|e| error(Some(client), ErrorCode::Io, e.to_string()))?;
                }
                self.pending = None;
                self.next_context += 1;
                let ack = Payload::RecordAck {
                    client,
                    context_id: record.context_id,
                    itype: record.itype,
                    steps: record.steps.len(),
                    t_start: record.steps.first().map_or(0.0, |s| s.t),
                    t_end: record.steps.last().map_or(0.0, |s| s.t),
                    path: self.outputs.records.as_deref().map(|p| p.display().to_string()),
                };
                self.saved.push(record);
                return Ok(vec![ack]);
            }
        }
        Ok(vec![self.status(name, Some(client), String::new())])
    }

    fn capture(&mut self, begin: f64, itype: InterventionType) -> Result<InterventionRecord, String> {
        let mut record = self
            .session
            .clone()
            .capture(begin, self.time(), itype)
            .map_err(|e| e.to_string())?;
        record.meta = "teleop".into();
        Ok(record)
    }

    /// One loop iteration: advances the simulation by a control period when
    /// running, then reports the state.
    pub fn tick(&mut self) -> Vec<SessionMessage> {
        let mut out = Vec::new();
        if self.phase == Phase::Running {
            let report = match self.controller {
                Some(_) => self.session.tick_teleop(self.held),
                None => self.session.tick_autopilot(&self.theta),
            };
            self.ticks += 1;
            match report {
                Ok(r) => {
                    self.outcome = r.status;
                    if r.status != StepStatus::Running {
                        self.phase = Phase::Paused;
                        let event = match r.status {
                            StepStatus::Reached => "reached",
                            _ => "collision",
                        };
                        let p = self.status(event, None, String::new());
                        out.push(self.emit(p));
                    }
                }
                Err(e) => {
                    self.phase = Phase::Paused;
                    let p = error(None, ErrorCode::Planner, e.to_string());
                    out.push(self.emit(p));
                }
            }
        }
        let frame = self.state_frame();
        out.push(self.emit(Payload::State(frame)));
        self.frames += 1;
        if self.config.scan_every > 0 && self.frames % self.config.scan_every as u64 == 0 {
            let scan = self.scan_frame();
            out.push(self.emit(scan));
        }
        out
    }

    pub fn state_frame(&self) -> StateFrame {
        let sim = self.session.sim();
        let r = sim.state().robot;
        let goal = sim.world().goal;
        StateFrame {
            t: sim.time(),
            tick: sim.state().tick,
            pose: [r.pose.x, r.pose.y, r.pose.theta],
            vel: [r.vel.v, r.vel.w],
            goal: [goal.x, goal.y],
            goal_dist: sim.distance_to_goal(),
            phase: self.phase,
            controller: self.controller,
            mark_begin: self.mark_begin(),
            outcome: self.outcome,
        }
    }

    /// Noise-free scan at the current pose. It does not touch the
    /// simulator's random stream.
    fn scan_frame(&self) -> Payload {
        let sim = self.session.sim();
        let cfg = &sim.config().scan;
        let ranges = raycast(&sim.world().grid, &sim.state().robot.pose, cfg)
            .map(|s| s.ranges)
            .unwrap_or_else(|_| vec![0.0; cfg.num_beams]);
        Payload::ScanFrame {
            t: sim.time(),
            angle_min: cfg.angle_min,
            angle_max: cfg.angle_max,
            max_range: cfg.max_range,
            ranges,
        }
    }
}

/// Re-runs a command log headlessly and returns the session it ends in.
pub fn replay(log: &CommandLog) -> Result<Teleop, TeleopError> {
    let env = LoadedEnv::load(&log.header.env, log.header.config.sim.dwa.footprint_radius)?;
    let mut t = Teleop::new(env, log.header.config.clone())?;
    for e in &log.entries {
        while t.ticks < e.at {
            t.tick();
        }
        t.handle(e.client, e.cmd.clone());
    }
    Ok(t)
}

pub fn replay_file(path: &Path) -> Result<Teleop, TeleopError> {
    replay(&CommandLog::parse(&std::fs::read_to_string(path)?)?)
}
