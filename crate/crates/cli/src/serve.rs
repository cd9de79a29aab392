//! Live service: one driver task owns the stepping; HTTP handlers and stream
//! clients read frames from the shared world and queue commands that the
//! driver applies at the next tick boundary.

use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clap::Args;
use futures::{SinkExt, StreamExt};
use rackfloor::error::InvariantViolation;
use rackfloor::service::{apply_command, state_frame, CommandReply, OperatorCommand, WireMessage};
use rackfloor::sim::{step, World};
use serde::Deserialize;
use tokio::sync::{mpsc, oneshot, watch};
use tokio::time::Instant;

use crate::{EXIT_INVALID, EXIT_INVARIANT};

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// 0 picks a free port; the bound address is printed on stdout.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Ticks per second.
    #[arg(long, default_value_t = 10.0)]
    pub rate: f64,
    /// Where to write the world as JSON if an invariant breaks (stderr when unset).
    #[arg(long)]
    pub dump_out: Option<PathBuf>,
}

type Pending = (OperatorCommand, oneshot::Sender<CommandReply>);

#[derive(Clone)]
struct Shared {
    world: Arc<RwLock<World>>,
    ticks: watch::Receiver<u64>,
    commands: mpsc::Sender<Pending>,
}

impl Shared {
    fn frame_line(&self, since: u64) -> (u64, String) {
        let world = self.world.read().expect("world lock");
        let frame = state_frame(&world, since);
        (frame.tick, WireMessage::Frame(Box::new(frame)).to_line())
    }

    /// Queues a command in arrival order; the receiver yields the reply once
    /// the driver has applied or rejected it.
    async fn enqueue(&self, cmd: OperatorCommand) -> oneshot::Receiver<CommandReply> {
        let (tx, rx) = oneshot::channel();
        if let Err(mpsc::error::SendError((_, tx))) = self.commands.send((cmd, tx)).await {
            let _ = tx.send(rejected("simulation driver has stopped"));
        }
        rx
    }

    async fn submit(&self, cmd: OperatorCommand) -> CommandReply {
        self.enqueue(cmd)
            .await
            .await
            .unwrap_or_else(|_| rejected("simulation driver has stopped"))
    }
}

fn accepted() -> CommandReply {
    CommandReply {
        accepted: true,
        reason: None,
    }
}

fn rejected(reason: impl Into<String>) -> CommandReply {
    CommandReply {
        accepted: false,
        reason: Some(reason.into()),
    }
}

pub fn serve(args: ServeArgs) -> u8 {
    let scenario = match crate::run::load(&args.scenario, args.layout.as_deref()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_INVALID;
        }
    };
    if !(args.rate.is_finite() && args.rate > 0.0) {
        eprintln!("error: --rate must be a positive number");
        return EXIT_INVALID;
    }
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime");
    rt.block_on(async move {
        let world = Arc::new(RwLock::new(World::new(&scenario)));
        let (tick_tx, tick_rx) = watch::channel(0u64);
        let (cmd_tx, cmd_rx) = mpsc::channel(256);
        let shared = Shared {
            world: world.clone(),
            ticks: tick_rx,
            commands: cmd_tx,
        };
        let listener = match tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await {
            Ok(l) => l,
            Err(e) => {
                eprintln!("error: cannot bind {}:{}: {e}", args.host, args.port);
                return EXIT_INVALID;
            }
        };
        let addr = listener.local_addr().expect("bound address");
        println!("listening on http://{addr}");
        let app = router(shared);
        let server = axum::serve(listener, app);
        tokio::select! {
            r = server => {
                if let Err(e) = r {
                    eprintln!("error: server: {e}");
                }
                EXIT_INVALID
            }
            violation = drive(world.clone(), cmd_rx, tick_tx, args.rate) => {
                eprintln!("error: {violation}");
                let w = world.read().expect("world lock");
                let dump = serde_json::to_string_pretty(&*w).expect("world serializes");
                match &args.dump_out {
                    Some(p) => {
                        if let Err(e) = std::fs::write(p, dump) {
                            eprintln!("error: writing {}: {e}", p.display());
                        }
                    }
                    None => eprintln!("{dump}"),
                }
                EXIT_INVARIANT
            }
        }
    })
}

fn router(shared: Shared) -> Router {
    Router::new()
        .route("/state", get(get_state))
        .route("/command", post(post_command))
        .route("/stream", get(stream))
        .with_state(shared)
}

/// Steps the world at `rate` ticks per second until an invariant breaks.
/// Queued commands are applied at each boundary, before the step.
async fn drive(
    world: Arc<RwLock<World>>,
    mut commands: mpsc::Receiver<Pending>,
    ticks: watch::Sender<u64>,
    mut rate: f64,
) -> InvariantViolation {
    let mut paused = false;
    let mut queue: Vec<Pending> = Vec::new();
    let mut next = Instant::now();
    loop {
        let period = Duration::from_secs_f64(1.0 / rate);
        next += period;
        let now = Instant::now();
        if next + period < now {
            next = now;
        }
        loop {
            tokio::select! {
                Some(p) = commands.recv() => queue.push(p),
                _ = tokio::time::sleep_until(next) => break,
            }
        }
        let tick = {
            let mut w = world.write().expect("world lock");
            for (cmd, reply) in queue.drain(..) {
                let r = match cmd {
                    OperatorCommand::Pause => {
                        paused = true;
                        accepted()
                    }
                    OperatorCommand::Resume => {
                        paused = false;
                        accepted()
                    }
                    OperatorCommand::SetRate { ticks_per_second } => {
                        if ticks_per_second.is_finite() && ticks_per_second > 0.0 {
                            rate = ticks_per_second;
                            accepted()
                        } else {
                            let reason = format!("illegal state: rate {ticks_per_second} is not positive");
                            w.record_rejection("SetRate", &reason);
                            rejected(reason)
                        }
                    }
                    other => match apply_command(&mut w, &other) {
                        Ok(_) => accepted(),
                        Err(e) => rejected(e.to_string()),
                    },
                };
                let _ = reply.send(r);
            }
            if !paused {
                if let Err(v) = step(&mut w) {
                    return v;
                }
            }
            w.tick
        };
        ticks.send_if_modified(|t| std::mem::replace(t, tick) != tick);
    }
}

#[derive(Deserialize)]
struct SinceQuery {
    since: Option<u64>,
}

async fn get_state(State(s): State<Shared>, Query(q): Query<SinceQuery>) -> Response {
    let world = s.world.read().expect("world lock");
    Json(state_frame(&world, q.since.unwrap_or(0))).into_response()
}

async fn post_command(State(s): State<Shared>, body: String) -> Response {
    match serde_json::from_str::<OperatorCommand>(&body) {
        Ok(cmd) => Json(s.submit(cmd).await).into_response(),
        Err(e) => (StatusCode::BAD_REQUEST, Json(rejected(format!("malformed command: {e}")))).into_response(),
    }
}

async fn stream(ws: WebSocketUpgrade, State(s): State<Shared>, Query(q): Query<SinceQuery>) -> Response {
    ws.on_upgrade(move |socket| client(socket, s, q.since.unwrap_or(0)))
}

/// One stream client. Frames are coalesced: each carries the latest state
/// and every event since the previous frame sent to this client.
async fn client(socket: WebSocket, mut s: Shared, since: u64) {
    let (mut tx, mut rx) = socket.split();
    // Replies go out in the order their lines arrived, even when a malformed
    // line is answered before an earlier command has been applied.
    let (order_tx, mut order_rx) = mpsc::channel::<oneshot::Receiver<CommandReply>>(64);
    let (reply_tx, mut replies) = mpsc::channel::<CommandReply>(64);
    tokio::spawn(async move {
        while let Some(pending) = order_rx.recv().await {
            let reply = pending.await.unwrap_or_else(|_| rejected("simulation driver has stopped"));
            if reply_tx.send(reply).await.is_err() {
                break;
            }
        }
    });
    let (mut last, line) = s.frame_line(since);
    if tx.send(Message::Text((line + "\n").into())).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            changed = s.ticks.changed() => {
                if changed.is_err() {
                    break;
                }
                let (tick, line) = s.frame_line(last);
                if tick <= last {
                    continue;
                }
                last = tick;
                if tx.send(Message::Text((line + "\n").into())).await.is_err() {
                    break;
                }
            }
            Some(reply) = replies.recv() => {
                let line = WireMessage::Reply(reply).to_line() + "\n";
                if tx.send(Message::Text(line.into())).await.is_err() {
                    break;
                }
            }
            msg = rx.next() => {
                let text = match msg {
                    Some(Ok(Message::Text(t))) => t.to_string(),
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                for line in text.lines().filter(|l| !l.trim().is_empty()) {
                    let pending = match WireMessage::from_line(line) {
                        Ok(WireMessage::Command(cmd)) => s.enqueue(cmd).await,
                        other => {
                            let reason = match other {
                                Err(e) => format!("malformed message: {e}"),
                                Ok(_) => "clients may only send commands".to_string(),
                            };
                            let (tx, rx) = oneshot::channel();
                            let _ = tx.send(rejected(reason));
                            rx
                        }
                    };
                    if order_tx.send(pending).await.is_err() {
                        return;
                    }
                }
            }
        }
    }
}
