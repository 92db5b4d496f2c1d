//! Live intervention sessions: a simulation a person can pause, rewind and
//! drive over a WebSocket, with every accepted command logged for headless
//! replay.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientCommand, EnvSource, ErrorCode, Payload, Phase, SessionMessage, PROTOCOL_VERSION};
pub use server::{start, RunningServer, ServerConfig, ServerError, DEFAULT_PORT};
pub use session::{replay, replay_file, ClientId, CommandLog, LoadedEnv, Outputs, Teleop, TeleopConfig, TeleopError};
