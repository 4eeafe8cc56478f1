//! WebSocket session server. Each connection owns one calculator and steps
//! it sequentially; sessions share nothing but the read-only defaults.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::header;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::serve::ListenerExt;
use axum::Router;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;
use tokio::time::Instant;
use tower_http::services::ServeDir;
use vrlab_core::calculators::{build, CalculatorId};
use vrlab_core::observer::{classify_with, trajectory_from_rows, SensorSpec};
use vrlab_core::prober::{falsify_plan, FalsifyReport, PassState, ProbeError, ProbePlan, ProbeTarget};
use vrlab_core::{Calculator64, Vec2d};

use crate::commands::named_plan;
use crate::config::RunConfig;
use crate::protocol::{parse_client, ClientMessage, Frame, ServerMessage, Speed, VerdictSource};

/// Frames between two live verdicts.
pub const LIVE_VERDICT_EVERY: usize = 200;
/// Most recent unforced frames a live verdict looks at.
pub const LIVE_WINDOW: usize = 3000;

pub const PROTOCOL_DOC: &str = include_str!("../../../PROTOCOL.md");

const BUILTIN_INDEX: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>vrlab</title></head>\n\
<body><h1>vrlab session server</h1>\n<p>No UI bundle is being served (start with <code>--assets DIR</code>). \
Clients connect to <code>/ws</code>; see <a href=\"/PROTOCOL.md\">PROTOCOL.md</a>.</p></body></html>\n";

#[derive(Clone, Debug)]
pub struct ServerConfig {
    /// Parameters, sensor, step and observer settings for sessions whose
    /// `init` leaves them out.
    pub defaults: RunConfig,
    /// Default pacing in simulated units per second; infinite for unpaced.
    pub speed: f64,
    /// Directory served at `/`.
    pub assets: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { defaults: RunConfig::default(), speed: 1.0, assets: None }
    }
}

pub fn router(config: ServerConfig) -> Router {
    let assets = config.assets.clone();
    let app = Router::new()
        .route("/ws", get(upgrade))
        .route("/PROTOCOL.md", get(protocol_doc))
        .with_state(Arc::new(config));
    match assets {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(|| async { Html(BUILTIN_INDEX) })),
    }
}

/// Serves until the listener fails. Frames are small and latency matters
/// more than packet count, so Nagle's algorithm is off.
pub async fn serve(listener: TcpListener, config: ServerConfig) -> std::io::Result<()> {
    let listener = listener.tap_io(|tcp| {
        let _ = tcp.set_nodelay(true);
    });
    axum::serve(listener, router(config)).await
}

/// Binds `addr`; the returned listener's `local_addr` is the real port.
pub async fn bind(addr: SocketAddr) -> std::io::Result<TcpListener> {
    TcpListener::bind(addr).await
}

async fn protocol_doc() -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "text/markdown; charset=utf-8")], PROTOCOL_DOC)
}

async fn upgrade(ws: WebSocketUpgrade, State(config): State<Arc<ServerConfig>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| run_session(socket, config))
}

static NEXT_SESSION: AtomicU64 = AtomicU64::new(1);

struct Session {
    calculator: Calculator64,
    sensor: SensorSpec,
    dt: f64,
    per_sample: usize,
    /// Wall-clock seconds per simulated unit; zero when unpaced.
    pace: f64,
    origin: Instant,
    /// Index of the last frame sent.
    frame: u64,
    force: Vec2d,
    /// Recent frames recorded while no force was held.
    quiet: Vec<(f64, Vec<f64>)>,
    since_verdict: usize,
}

impl Session {
    fn t(&self) -> f64 {
        self.frame as f64 * self.sensor.sample_period
    }

    fn next_deadline(&self) -> Instant {
        let t_next = (self.frame + 1) as f64 * self.sensor.sample_period;
        self.origin + Duration::from_secs_f64(t_next * self.pace)
    }

    fn record(&mut self, frame: &Frame) {
        if self.force != Vec2d::zero() {
            return;
        }
        let row = self.calculator.partition.output().iter().map(|d| frame.values[d]).collect();
        self.quiet.push((frame.t, row));
        if self.quiet.len() > LIVE_WINDOW {
            self.quiet.drain(..self.quiet.len() - LIVE_WINDOW);
        }
    }

    /// Holds the force for one sample period and reads the sensor.
    fn advance(&mut self) -> Result<Frame, ProbeError> {
        for _ in 0..self.per_sample {
            self.calculator.advance(self.dt, self.force)?;
        }
        self.frame += 1;
        let frame = Frame::observe(&self.calculator, self.t(), self.sensor.quantum);
        self.record(&frame);
        self.since_verdict += 1;
        Ok(frame)
    }

    /// Passive verdict on the quiet window, if it is long enough.
    fn live_verdict(&mut self, config: &RunConfig) -> Option<ServerMessage> {
        if self.since_verdict < LIVE_VERDICT_EVERY {
            return None;
        }
        self.since_verdict = 0;
        let t0 = self.quiet.first()?.0;
        let times = self.quiet.iter().map(|(t, _)| t - t0).collect();
        let samples = self.quiet.iter().map(|(_, r)| r.clone()).collect();
        let dofs = self.calculator.partition.output().to_vec();
        let traj = trajectory_from_rows(dofs, times, samples, self.sensor.quantum).ok()?;
        let verdict = classify_with(&traj, &self.calculator.declaration, &config.observer).ok()?.report();
        Some(ServerMessage::Verdict {
            source: VerdictSource::Live,
            t: self.t(),
            residual: verdict.residual,
            verdict,
            probe: None,
            falsified: None,
        })
    }
}

type ProbeTask = JoinHandle<Result<FalsifyReport, ProbeError>>;

enum Step {
    Continue,
    Close,
}

async fn send(socket: &mut WebSocket, msg: &ServerMessage) -> bool {
    socket.send(Message::Text(msg.to_json().into())).await.is_ok()
}

async fn run_session(mut socket: WebSocket, config: Arc<ServerConfig>) {
    let mut session: Option<Session> = None;
    let mut probe: Option<(ProbeTask, f64)> = None;
    loop {
        let deadline = session.as_ref().map(Session::next_deadline);
        tokio::select! {
            biased;
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Binary(_))) => {
                        let _ = send(&mut socket, &ServerMessage::error("malformed message: expected text", true)).await;
                        break;
                    }
                    Some(Ok(Message::Ping(_) | Message::Pong(_))) => continue,
                    Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                };
                match handle(&mut socket, &config, &mut session, &mut probe, text.as_str()).await {
                    Step::Continue => {}
                    Step::Close => break,
                }
            }
            done = async { (&mut probe.as_mut().expect("guarded").0).await }, if probe.is_some() => {
                let t = probe.take().map_or(0.0, |(_, t)| t);
                let msg = match done {
                    Ok(Ok(report)) => probe_verdict(report, t),
                    Ok(Err(e)) => ServerMessage::error(e.to_string(), false),
                    Err(e) => ServerMessage::error(format!("probe crashed: {e}"), false),
                };
                if !send(&mut socket, &msg).await {
                    break;
                }
            }
            _ = tokio::time::sleep_until(deadline.unwrap_or_else(Instant::now)), if deadline.is_some() => {
                let s = session.as_mut().expect("guarded");
                let msg = match s.advance() {
                    Ok(frame) => ServerMessage::Frame(frame),
                    Err(e) => {
                        let _ = send(&mut socket, &ServerMessage::error(format!("simulation failed: {e}"), true)).await;
                        break;
                    }
                };
                if !send(&mut socket, &msg).await {
                    break;
                }
                if let Some(v) = s.live_verdict(&config.defaults) {
                    if !send(&mut socket, &v).await {
                        break;
                    }
                }
                if s.pace == 0.0 {
                    tokio::task::yield_now().await;
                }
            }
        }
    }
    if let Some((task, _)) = probe {
        task.abort();
    }
}

fn probe_verdict(report: FalsifyReport, t: f64) -> ServerMessage {
    let verdict = report.verdict().report();
    let probe = report.probes.into_iter().next();
    ServerMessage::Verdict {
        source: VerdictSource::Probe,
        t,
        falsified: probe.as_ref().map(|p| p.pass == PassState::Fail),
        residual: None,
        verdict,
        probe,
    }
}

async fn handle(
    socket: &mut WebSocket,
    config: &ServerConfig,
    session: &mut Option<Session>,
    probe: &mut Option<(ProbeTask, f64)>,
    text: &str,
) -> Step {
    let msg = match parse_client(text) {
        Ok(m) => m,
        Err(e) => {
            let _ = send(socket, &ServerMessage::error(e, true)).await;
            return Step::Close;
        }
    };
    let out = match msg {
        ClientMessage::Init { calculator, params, sensor, dt, speed } => {
            match start(config, &calculator, params, sensor, dt, speed) {
                Ok(s) => {
                    let ack = ServerMessage::Init {
                        session_id: format!("s{}", NEXT_SESSION.fetch_add(1, Ordering::Relaxed)),
                        calculator: s.calculator.id.to_string(),
                        output_dofs: s.calculator.partition.output().to_vec(),
                        input_dofs: s.calculator.partition.input().to_vec(),
                        declaration: s.calculator.declaration.clone(),
                        sensor: s.sensor.clone(),
                        dt: s.dt,
                        speed: Speed(if s.pace > 0.0 { 1.0 / s.pace } else { f64::INFINITY }),
                    };
                    let first = Frame::observe(&s.calculator, 0.0, s.sensor.quantum);
                    let mut s = s;
                    s.record(&first);
                    *session = Some(s);
                    if let Some((task, _)) = probe.take() {
                        task.abort();
                    }
                    if !send(socket, &ack).await || !send(socket, &ServerMessage::Frame(first)).await {
                        return Step::Close;
                    }
                    return Step::Continue;
                }
                Err(e) => ServerMessage::error(e, false),
            }
        }
        ClientMessage::Force { force } => match session.as_mut() {
            None => ServerMessage::error("send init first", false),
            Some(s) if s.calculator.input_dofs().is_empty() => {
                ServerMessage::error(ProbeError::NoController.to_string(), false)
            }
            Some(_) if !force.is_finite() => ServerMessage::error("force must be finite", false),
            Some(s) => {
                if force != Vec2d::zero() {
                    s.quiet.clear();
                }
                s.force = force;
                ServerMessage::Force { force, from_t: s.t() }
            }
        },
        ClientMessage::Probe { probe: name, plan } => match session.as_ref() {
            None => ServerMessage::error("send init first", false),
            Some(s) if s.calculator.input_dofs().is_empty() => {
                ServerMessage::error(ProbeError::NoController.to_string(), false)
            }
            Some(_) if probe.is_some() => ServerMessage::error("a probe is already running", false),
            Some(s) => match probe_plan(s, &name, plan) {
                Ok(plan) => {
                    let target = s.calculator.clone();
                    let observer = config.defaults.observer.clone();
                    let task = tokio::task::spawn_blocking(move || falsify_plan(&target, &plan, plan.dt, &observer));
                    *probe = Some((task, s.t()));
                    return Step::Continue;
                }
                Err(e) => ServerMessage::error(e, false),
            },
        },
    };
    if send(socket, &out).await {
        Step::Continue
    } else {
        Step::Close
    }
}

fn probe_plan(s: &Session, name: &str, plan: Option<ProbePlan>) -> Result<ProbePlan, String> {
    match plan {
        Some(p) if p.name() != name => Err(format!("plan is a {} but the probe asks for {name}", p.name())),
        Some(p) => p.validate().map(|_| p).map_err(|e| e.to_string()),
        None => named_plan(name, &s.sensor, s.dt).map_err(|e| e.to_string()),
    }
}

fn start(
    config: &ServerConfig,
    calculator: &str,
    params: Option<vrlab_core::calculators::CatalogParams>,
    sensor: Option<SensorSpec>,
    dt: Option<f64>,
    speed: Option<Speed>,
) -> Result<Session, String> {
    let id: CalculatorId = calculator.parse().map_err(|e: vrlab_core::calculators::CatalogError| e.to_string())?;
    let d = &config.defaults;
    let params = params.unwrap_or_else(|| d.params.clone());
    let sensor = sensor.unwrap_or_else(|| d.sensor.clone());
    let dt = dt.unwrap_or(d.dt);
    let speed = speed.map_or(config.speed, |s| s.0);
    let per_sample = sensor.steps_per_sample(dt).map_err(|e| e.to_string())?;
    let calculator = build::<f64>(id, &params).map_err(|e| e.to_string())?;
    Ok(Session {
        calculator,
        sensor,
        dt,
        per_sample,
        pace: if speed.is_finite() { 1.0 / speed } else { 0.0 },
        origin: Instant::now(),
        frame: 0,
        force: Vec2d::zero(),
        quiet: Vec::new(),
        since_verdict: 0,
    })
}
