//! JSON wire format. Every frame is one JSON object with a `kind` field.

use navtune::intervention::InterventionType;
use navtune::sim::StepStatus;
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

/// Where a session's world comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnvSource {
    /// A grid file in the text grid format.
    File { path: String },
    /// Grid text sent inline.
    Grid {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    /// A cellular-automata world.
    Generated { seed: u64, fill_prob: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientCommand {
    Hello { version: u32 },
    LoadEnv { env: EnvSource },
    Start,
    Pause,
    RewindTo { t: f64 },
    Drive { v: f64, w: f64 },
    TakeControl,
    ReleaseControl,
    MarkBegin,
    MarkEnd { itype: InterventionType },
    SaveRecord,
}

impl ClientCommand {
    pub fn name(&self) -> &'static str {
        match self {
            ClientCommand::Hello { .. } => "hello",
            ClientCommand::LoadEnv { .. } => "load_env",
            ClientCommand::Start => "start",
            ClientCommand::Pause => "pause",
            ClientCommand::RewindTo { .. } => "rewind_to",
            ClientCommand::Drive { .. } => "drive",
            ClientCommand::TakeControl => "take_control",
            ClientCommand::ReleaseControl => "release_control",
            ClientCommand::MarkBegin => "mark_begin",
            ClientCommand::MarkEnd { .. } => "mark_end",
            ClientCommand::SaveRecord => "save_record",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Running,
    Paused,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    ProtocolViolation,
    OutOfWindow,
    ControlHeld,
    ReadOnly,
    Version,
    Capture,
    Env,
    Io,
    Planner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub t: f64,
    pub tick: u64,
    pub pose: [f64; 3],
    pub vel: [f64; 2],
    pub goal: [f64; 2],
    pub goal_dist: f64,
    pub phase: Phase,
    pub controller: Option<u64>,
    pub mark_begin: Option<f64>,
    pub outcome: StepStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusFrame {
    /// The command this acknowledges, or the event that caused it.
    pub event: String,
    pub client: Option<u64>,
    pub t: f64,
    pub phase: Phase,
    pub controller: Option<u64>,
    pub mark_begin: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Hello {
        version: u32,
        client: u64,
        observer: bool,
        /// Grid text of the loaded world.
        grid: String,
    },
    State(StateFrame),
    ScanFrame {
        t: f64,
        angle_min: f64,
        angle_max: f64,
        max_range: f64,
        ranges: Vec<f64>,
    },
    Status(StatusFrame),
    RecordAck {
        client: u64,
        context_id: u32,
        itype: InterventionType,
        steps: usize,
        t_start: f64,
        t_end: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
    },
    Error {
        client: Option<u64>,
        code: ErrorCode,
        message: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        expected: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMessage {
    pub seq: u64,
    #[serde(flatten)]
    pub payload: Payload,
}

impl SessionMessage {
    pub fn kind(&self) -> &'static str {
        match self.payload {
            Payload::Hello { .. } => "hello",
            Payload::State(_) => "state",
            Payload::ScanFrame { .. } => "scan_frame",
            Payload::Status(_) => "status",
            Payload::RecordAck { .. } => "record_ack",
            Payload::Error { .. } => "error",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }
}
