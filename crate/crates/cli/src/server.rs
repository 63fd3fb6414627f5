//! WebSocket session server for the operator console.
//!
//! The simulation runs on its own thread and owns the [`Session`]. The
//! network side talks to it only through channels: console input goes in
//! over a `std::sync::mpsc` queue, serialized protocol messages come out on
//! a `tokio::sync::broadcast` channel. A console that falls behind skips
//! frames rather than stalling the simulation.

use std::future::Future;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use anyhow::Context;
use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::broadcast;
use tower_http::services::ServeDir;

use spir_core::compositor::Mode;
use spir_core::par::Exec;
use spir_core::protocol::{encode_frame, ConfigMessage, FrameMessage, Message};
use spir_core::session::{Command, Operator, OperatorView, Session, SessionConfig, SessionRecord};
use spir_core::vehicle::DT;
use spir_core::SimTime;

pub const WS_PATH: &str = "/ws";

#[derive(Clone, Debug)]
pub struct ServeOptions {
    /// Pace ticks to the wall clock.
    pub realtime: bool,
    /// Send every n-th displayed frame.
    pub frame_stride: u32,
    /// Directory holding the console bundle, served at `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions { realtime: true, frame_stride: 1, static_dir: None }
    }
}

#[derive(Debug)]
enum Input {
    Connected,
    Disconnected,
    Cmd(Command),
    Mode(Mode),
    ConfigRequest,
    Shutdown,
}

/// Forwards the newest console command once.
#[derive(Default)]
struct ConsoleOperator {
    pending: Option<Command>,
}

impl Operator for ConsoleOperator {
    fn decide(&mut self, _view: &OperatorView) -> Option<Command> {
        self.pending.take()
    }
}

fn config_message(session: &Session) -> Message {
    let c = session.config();
    Message::Config(ConfigMessage {
        mode: session.mode(),
        preset: c.preset.name.clone(),
        width: c.preset.image_width,
        height: c.preset.image_height,
        image_interval: c.preset.image_interval.as_secs(),
        data_interval: c.preset.data_interval.as_secs(),
        max_steering: c.vehicle.max_steering,
        seed: c.seed,
    })
}

fn publish(out: &broadcast::Sender<Arc<str>>, msg: &Message) {
    // no subscribers is fine
    let _ = out.send(msg.to_json().into());
}

fn sanitize(cmd: Command, max_steering: f64) -> Option<Command> {
    (cmd.throttle.is_finite() && cmd.steering.is_finite()).then(|| Command {
        throttle: cmd.throttle.clamp(-1.0, 1.0),
        steering: cmd.steering.clamp(-max_steering, max_steering),
    })
}

fn sim_loop(
    mut session: Session,
    inputs: mpsc::Receiver<Input>,
    out: broadcast::Sender<Arc<str>>,
    opts: ServeOptions,
) -> SessionRecord {
    let mut op = ConsoleOperator::default();
    let mut connected = false;
    // sim time until which a disconnected session keeps ticking to bring the vehicle to rest
    let mut stop_until: Option<SimTime> = None;
    let mut ticks: u64 = 0;
    let mut next = Instant::now();
    let stride = u64::from(opts.frame_stride.max(1));
    let max_steering = session.config().vehicle.max_steering;

    'run: loop {
        let mut batch = Vec::new();
        let stopping = stop_until.is_some();
        if !connected && !stopping {
            match inputs.recv() {
                Ok(i) => batch.push(i),
                Err(_) => break,
            }
            next = Instant::now();
        }
        batch.extend(inputs.try_iter());
        for input in batch {
            match input {
                Input::Connected => {
                    connected = true;
                    stop_until = None;
                    publish(&out, &config_message(&session));
                }
                Input::Disconnected => {
                    connected = false;
                    op.pending = Some(Command::STOP);
                    session.note_disconnect();
                    let delay = session.config().preset.command_delay;
                    stop_until = Some(session.time() + delay + DT);
                }
                Input::Cmd(c) if connected => op.pending = sanitize(c, max_steering).or(op.pending),
                Input::Cmd(_) => {}
                Input::Mode(m) => {
                    session.set_mode(m);
                    publish(&out, &Message::Mode { value: m });
                }
                Input::ConfigRequest => publish(&out, &config_message(&session)),
                Input::Shutdown => break 'run,
            }
        }

        if !connected {
            match stop_until {
                Some(t) if session.time() < t || session.vehicle_state().speed.abs() > 1e-6 => {
                    if session.time() > t + SimTime::from_secs(30.0) {
                        stop_until = None;
                        continue;
                    }
                }
                Some(_) => {
                    stop_until = None;
                    continue;
                }
                None => continue,
            }
        }

        session.tick(&mut op);
        ticks += 1;

        if connected && ticks.is_multiple_of(stride) && out.receiver_count() > 0 {
            if let Some(display) = session.display() {
                let frame = display.render(Exec::default());
                publish(
                    &out,
                    &Message::Frame(FrameMessage {
                        t: session.time().as_secs(),
                        png_or_ppm_b64: encode_frame(&frame),
                        mode: session.mode(),
                        diag: display.diag(),
                    }),
                );
            }
        }

        if opts.realtime && connected {
            next += Duration::from_micros(DT.as_micros() as u64);
            let now = Instant::now();
            if next > now {
                thread::sleep(next - now);
            } else {
                next = now;
            }
        }
    }
    session.into_record()
}

/// A bare `{"type":"config"}` asks for the current configuration.
fn is_config_request(text: &str) -> bool {
    serde_json::from_str::<serde_json::Value>(text).is_ok_and(|v| v["type"] == "config")
}

#[derive(Clone)]
struct AppState {
    inputs: mpsc::Sender<Input>,
    out: broadcast::Sender<Arc<str>>,
    busy: Arc<AtomicBool>,
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    if state.busy.swap(true, Ordering::SeqCst) {
        return (StatusCode::CONFLICT, "a console is already connected\n").into_response();
    }
    ws.on_upgrade(move |socket| console(socket, state))
}

async fn console(socket: WebSocket, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    let mut outgoing = state.out.subscribe();
    let _ = state.inputs.send(Input::Connected);

    let send = async {
        loop {
            match outgoing.recv().await {
                Ok(text) => {
                    if sink.send(WsMessage::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => break,
            }
        }
    };
    let inputs = state.inputs.clone();
    let receive = async move {
        while let Some(Ok(msg)) = stream.next().await {
            let text = match msg {
                WsMessage::Text(t) => t,
                WsMessage::Close(_) => break,
                _ => continue,
            };
            let input = match Message::from_json(text.as_str()) {
                Ok(Message::Cmd { throttle, steering }) => Input::Cmd(Command { throttle, steering }),
                Ok(Message::Mode { value }) => Input::Mode(value),
                Ok(Message::Config(_)) => Input::ConfigRequest,
                Err(_) if is_config_request(text.as_str()) => Input::ConfigRequest,
                Ok(Message::Frame(_)) | Err(_) => {
                    eprintln!("ignoring console message: {text}");
                    continue;
                }
            };
            if inputs.send(input).is_err() {
                break;
            }
        }
    };
    tokio::select! {
        _ = send => {}
        _ = receive => {}
    }
    let _ = state.inputs.send(Input::Disconnected);
    state.busy.store(false, Ordering::SeqCst);
}

/// Serves one session on `listener` until `shutdown` resolves, then returns
/// what the session recorded.
pub async fn serve(
    listener: TcpListener,
    config: SessionConfig,
    opts: ServeOptions,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> anyhow::Result<SessionRecord> {
    let session = Session::new(config).context("starting session")?;
    let (input_tx, input_rx) = mpsc::channel();
    let (out, _) = broadcast::channel(8);
    let sim = {
        let out = out.clone();
        let opts = opts.clone();
        thread::Builder::new().name("spir-sim".into()).spawn(move || sim_loop(session, input_rx, out, opts))?
    };

    let state = AppState { inputs: input_tx.clone(), out, busy: Arc::new(AtomicBool::new(false)) };
    let mut app = Router::new().route(WS_PATH, get(ws_handler)).with_state(state);
    app = match &opts.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(|| async { "spir-teleop session server; console endpoint at /ws\n" })),
    };

    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    let _ = input_tx.send(Input::Shutdown);
    let record = tokio::task::spawn_blocking(move || sim.join())
        .await?
        .map_err(|_| anyhow::anyhow!("simulation thread panicked"))?;
    Ok(record)
}
