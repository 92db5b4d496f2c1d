//! WebSocket front end. One thread runs the simulation loop and is the only
//! writer of session state; connections talk to it through an ordered
//! command queue and read from a broadcast queue.

use std::collections::HashSet;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use thiserror::Error;
use tokio::sync::{broadcast, mpsc, oneshot};

use crate::protocol::{ClientCommand, ErrorCode, PROTOCOL_VERSION};
use crate::session::{ClientId, Teleop};

pub const DEFAULT_PORT: u16 = 7777;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub addr: SocketAddr,
    /// Simulated seconds per wall-clock second; 0 runs unpaced.
    pub speed: f64,
    /// Capacity of the outgoing broadcast queue, in frames.
    pub queue: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            addr: SocketAddr::from(([127, 0, 0, 1], DEFAULT_PORT)),
            speed: 1.0,
            queue: 4096,
        }
    }
}

enum Inbound {
    Connect { client: ClientId, observer: bool },
    Command { client: ClientId, cmd: ClientCommand },
    Malformed { client: ClientId, message: String },
    Disconnect { client: ClientId },
}

#[derive(Clone)]
struct Shared {
    inbound: mpsc::UnboundedSender<Inbound>,
    outbound: broadcast::Sender<Arc<str>>,
    next_client: Arc<AtomicU64>,
}

/// A server running in the background.
pub struct RunningServer {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    http_stop: Option<oneshot::Sender<()>>,
    sim: Option<JoinHandle<Teleop>>,
    http: tokio::task::JoinHandle<()>,
}

impl RunningServer {
    /// Stops both halves and hands back the session.
    pub async fn shutdown(mut self) -> Teleop {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(tx) = self.http_stop.take() {
            let _ = tx.send(());
        }
        let _ = (&mut self.http).await;
        let sim = self.sim.take().expect("sim thread present");
        tokio::task::spawn_blocking(move || sim.join().expect("sim thread panicked"))
            .await
            .expect("join task")
    }

    /// Runs until the process is interrupted.
    pub async fn wait(self) {
        let _ = self.http.await;
    }
}

#[derive(Deserialize)]
struct ConnectQuery {
    #[serde(default)]
    observer: bool,
}

/// Binds the socket and starts the simulation loop. Fails if the port is
/// taken.
pub async fn start(teleop: Teleop, config: ServerConfig) -> Result<RunningServer, ServerError> {
    let listener = tokio::net::TcpListener::bind(config.addr)
        .await
        .map_err(|source| ServerError::Bind {
            addr: config.addr,
            source,
        })?;
    let addr = listener.local_addr()?;
    let (in_tx, in_rx) = mpsc::unbounded_channel();
    let (out_tx, _) = broadcast::channel(config.queue.max(16));
    let stop = Arc::new(AtomicBool::new(false));
    let sim = {
        let out = out_tx.clone();
        let stop = stop.clone();
        let speed = config.speed;
        std::thread::Builder::new()
            .name("teleop-sim".into())
            .spawn(move || sim_loop(teleop, in_rx, out, speed, stop))?
    };
    let shared = Shared {
        inbound: in_tx,
        outbound: out_tx,
        next_client: Arc::new(AtomicU64::new(1)),
    };
    let app = Router::new()
        .route("/ws", get(upgrade))
        .route("/version", get(version))
        .with_state(shared);
    let (http_stop, rx) = oneshot::channel::<()>();
    let http = tokio::spawn(async move {
        let serve = axum::serve(listener, app).with_graceful_shutdown(async {
            let _ = rx.await;
        });
        if let Err(e) = serve.await {
            log::error!("http server stopped: {e}");
        }
    });
    log::info!("teleop server listening on ws://{addr}/ws");
    Ok(RunningServer {
        addr,
        stop,
        http_stop: Some(http_stop),
        sim: Some(sim),
        http,
    })
}

async fn version() -> impl IntoResponse {
    Json(serde_json::json!({ "version": PROTOCOL_VERSION }))
}

async fn upgrade(ws: WebSocketUpgrade, Query(q): Query<ConnectQuery>, State(shared): State<Shared>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, q.observer, shared))
}

async fn connection(socket: WebSocket, observer: bool, shared: Shared) {
    let client = shared.next_client.fetch_add(1, Ordering::SeqCst);
    let mut frames = shared.outbound.subscribe();
    if shared.inbound.send(Inbound::Connect { client, observer }).is_err() {
        return;
    }
    let (mut tx, mut rx) = socket.split();
    let writer = tokio::spawn(async move {
        loop {
            match frames.recv().await {
                Ok(text) => {
                    if tx.send(Message::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::warn!("client {client} lagged by {n} frames");
                }
                Err(broadcast::error::RecvError::Closed) => break,
            }
        }
    });
    while let Some(Ok(msg)) = rx.next().await {
        let inbound = match msg {
            Message::Text(text) => match serde_json::from_str::<ClientCommand>(text.as_str()) {
                Ok(cmd) => Inbound::Command { client, cmd },
                Err(e) => Inbound::Malformed {
                    client,
                    message: e.to_string(),
                },
            },
            Message::Binary(_) => Inbound::Malformed {
                client,
                message: "binary frames are not supported".into(),
            },
            Message::Close(_) => break,
            _ => continue,
        };
        if shared.inbound.send(inbound).is_err() {
            break;
        }
    }
    let _ = shared.inbound.send(Inbound::Disconnect { client });
    writer.abort();
}

fn sim_loop(
    mut teleop: Teleop,
    mut inbound: mpsc::UnboundedReceiver<Inbound>,
    out: broadcast::Sender<Arc<str>>,
    speed: f64,
    stop: Arc<AtomicBool>,
) -> Teleop {
    let period = teleop.session().sim().config().control_period();
    let pace = (speed > 0.0).then(|| Duration::from_secs_f64(period / speed));
    let mut observers = HashSet::new();
    let mut next = Instant::now();
    while !stop.load(Ordering::SeqCst) {
        let mut msgs = Vec::new();
        while let Ok(m) = inbound.try_recv() {
            match m {
                Inbound::Connect { client, observer } => {
                    if observer {
                        observers.insert(client);
                    }
                    msgs.push(teleop.hello(client, observer));
                }
                Inbound::Command { client, cmd } => {
                    if observers.contains(&client) && !matches!(cmd, ClientCommand::Hello { .. }) {
                        msgs.push(teleop.reject(Some(client), ErrorCode::ReadOnly, "observers cannot send commands"));
                    } else {
                        msgs.extend(teleop.handle(client, cmd));
                    }
                }
                Inbound::Malformed { client, message } => {
                    msgs.push(teleop.reject(Some(client), ErrorCode::Malformed, message));
                }
                Inbound::Disconnect { client } => {
                    observers.remove(&client);
                    msgs.extend(teleop.disconnect(client));
                }
            }
        }
        msgs.extend(teleop.tick());
        for m in msgs {
            let _ = out.send(m.to_json().into());
        }
        match pace {
            Some(p) => {
                next += p;
                let now = Instant::now();
                if next > now {
                    std::thread::sleep(next - now);
                } else {
                    next = now;
                }
            }
            None => std::thread::yield_now(),
        }
    }
    teleop
}
