//! Live session: the conductor on the wall clock, services on the bus, and
//! an HTTP server exposing the envelope stream at `/ws` and the console at
//! `/`.

use std::net::TcpStream;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::Router;
use taskpilot_core::conductor::{
    run_session, wall_clock_ms, BusSink, ConductorConfig, EffectSink, LiveSource, CONDUCTOR_SRC, SESSION_SRC, TIMER_SRC,
};
use taskpilot_core::msgbus::{bridge_tcp, BridgeHandle, Bus, Envelope, LogWriter, Topic, TopicFilter};
use taskpilot_core::services::transcript_envelopes;
use tokio::sync::{broadcast, watch};
use tower_http::services::ServeDir;

use crate::run::{observation, outcome_of, Prepared, ServiceSpec, FRAME_INTERVAL_MS};
use crate::{fail, RunArgs};

const INDEX_HTML: &str = include_str!("../assets/index.html");
/// Time the stream stays up after the session ends so clients see the end.
const LINGER_MS: u64 = 500;
const STREAM_BACKLOG: usize = 4096;

/// Every envelope of the session so far, plus a channel for new ones. Both
/// are updated under one lock so a joining client sees no gap or repeat.
struct History {
    lines: Vec<String>,
    tx: broadcast::Sender<String>,
}

#[derive(Clone)]
struct AppState {
    bus: Bus,
    history: Arc<Mutex<History>>,
    closing: watch::Receiver<bool>,
}

fn sleep_until(ts_ms: u64, shutdown: &AtomicBool) -> bool {
    loop {
        if shutdown.load(Ordering::SeqCst) {
            return false;
        }
        let now = wall_clock_ms();
        if now >= ts_ms {
            return true;
        }
        thread::sleep(Duration::from_millis((ts_ms - now).min(50)));
    }
}

pub fn serve(addr: &str, args: &RunArgs, mut prepared: Prepared) -> anyhow::Result<()> {
    let listener = std::net::TcpListener::bind(addr).map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => fail(3, format!("{addr} is already in use")),
        _ => fail(2, format!("cannot listen on {addr}: {e}")),
    })?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;

    let bus = Bus::new();
    let shutdown = Arc::new(AtomicBool::new(false));
    let (tx, _) = broadcast::channel(STREAM_BACKLOG);
    let history = Arc::new(Mutex::new(History { lines: Vec::new(), tx }));

    let recorder = {
        let sub = bus.subscribe(TopicFilter::All);
        let history = history.clone();
        let shutdown = shutdown.clone();
        thread::spawn(move || {
            while !shutdown.load(Ordering::SeqCst) {
                let env = match sub.recv_timeout(Duration::from_millis(50)) {
                    Ok(Some(env)) if env.topic != Topic::Log => env,
                    Ok(_) => continue,
                    Err(_) => return,
                };
                {
                    let line = env.to_canonical_json();
                    let mut h = history.lock().unwrap();
                    let _ = h.tx.send(line.clone());
                    h.lines.push(line);
                }
            }
        })
    };

    let mut bridges: Vec<BridgeHandle> = Vec::new();
    let services = &prepared.services;
    for (name, spec, outbound) in [
        ("perception", &services.perception, TopicFilter::only([Topic::Ui])),
        ("asr", &services.asr, TopicFilter::only([Topic::Ui])),
        ("llm", &services.llm, TopicFilter::only([Topic::Conductor])),
        ("tts", &services.tts, TopicFilter::only([Topic::Conductor])),
    ] {
        if let ServiceSpec::Tcp(target) = spec {
            let stream = TcpStream::connect(target).map_err(|e| fail(1, format!("{name} service at {target}: {e}")))?;
            bridges.push(bridge_tcp(&bus, stream, outbound)?);
        }
    }

    let mock_thread = (services.llm == ServiceSpec::Mock || services.tts == ServiceSpec::Mock).then(|| {
        let sub = bus.subscribe(TopicFilter::only([Topic::Conductor]));
        let bus = bus.clone();
        let shutdown = shutdown.clone();
        let mut mocks = services.mocks();
        thread::spawn(move || {
            while !shutdown.load(Ordering::SeqCst) {
                let Ok(Some(env)) = sub.recv_timeout(Duration::from_millis(50)) else {
                    continue;
                };
                for reply in mocks.deliver(&env) {
                    if !sleep_until(reply.ts_ms, &shutdown) {
                        return;
                    }
                    bus.publish(&reply);
                }
            }
        })
    });

    // Subscribe before anything can publish inputs.
    let source = LiveSource::new(&bus, shutdown.clone());
    let start_ms = wall_clock_ms();
    let mut feeders = Vec::new();
    if let Some(mut feed) = prepared.perception.take() {
        let bus = bus.clone();
        let shutdown = shutdown.clone();
        let graph = prepared.graph.clone();
        feeders.push(thread::spawn(move || {
            let mut seq = 0;
            let mut offset = 0;
            while offset <= feed.end_ms && sleep_until(start_ms + offset, &shutdown) {
                match feed.frame(offset, &graph) {
                    Ok(Some((step, conf))) => {
                        bus.publish(&observation(step, conf, seq, wall_clock_ms()));
                        seq += 1;
                    }
                    Ok(None) => {}
                    Err(e) => {
                        tracing::error!("{e:#}");
                        return;
                    }
                }
                offset += FRAME_INTERVAL_MS;
            }
            if let Some((step, conf)) = feed.finish() {
                if sleep_until(start_ms + feed.end_ms, &shutdown) {
                    bus.publish(&observation(step, conf, seq, wall_clock_ms()));
                }
            }
        }));
    }
    if !prepared.transcript.is_empty() {
        let bus = bus.clone();
        let shutdown = shutdown.clone();
        let lines = transcript_envelopes(&prepared.transcript);
        feeders.push(thread::spawn(move || {
            for mut env in lines {
                if !sleep_until(start_ms + env.ts_ms, &shutdown) {
                    return;
                }
                env.ts_ms = wall_clock_ms();
                bus.publish(&env);
            }
        }));
    }

    let (done_tx, done_rx) = tokio::sync::oneshot::channel::<()>();
    let conductor = {
        let bus = bus.clone();
        let graph = prepared.graph.clone();
        let condition = args.condition;
        let meta = prepared.meta.clone();
        let log_path = prepared.log_path.clone();
        thread::spawn(move || {
            let result = LogWriter::open(&log_path).map_err(anyhow::Error::from).and_then(|mut writer| {
                run_session(
                    source,
                    BusSink::new(bus),
                    graph,
                    condition,
                    ConductorConfig::default(),
                    meta,
                    Some(&mut writer),
                )
                .map_err(anyhow::Error::from)
            });
            let _ = done_tx.send(());
            result
        })
    };

    let (closing_tx, closing_rx) = watch::channel(false);
    let state = AppState {
        bus: bus.clone(),
        history,
        closing: closing_rx,
    };
    let mut app = Router::new().route("/ws", get(ws_handler));
    app = match &args.assets {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(|| async { Html(INDEX_HTML) })),
    };
    let app = app.with_state(state);

    println!("listening on {local}");
    eprintln!("console at http://{local}/ (stream at ws://{local}/ws)");

    let runtime = tokio::runtime::Runtime::new()?;
    let signal_flag = shutdown.clone();
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener)?;
        tokio::spawn(async move {
            if tokio::signal::ctrl_c().await.is_ok() {
                tracing::info!("interrupted; closing the session");
                signal_flag.store(true, Ordering::SeqCst);
            }
        });
        axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = done_rx.await;
                tokio::time::sleep(Duration::from_millis(LINGER_MS)).await;
                let _ = closing_tx.send(true);
            })
            .await
    })?;

    let result = conductor.join().map_err(|_| anyhow::anyhow!("conductor thread panicked"))?;
    shutdown.store(true, Ordering::SeqCst);
    for h in feeders {
        let _ = h.join();
    }
    if let Some(h) = mock_thread {
        let _ = h.join();
    }
    let _ = recorder.join();
    drop(bridges);
    let log = result?;
    eprintln!(
        "session {} ended: {:?} ({} envelopes)",
        prepared.meta.session_id,
        outcome_of(&log),
        log.entries.len()
    );
    println!("{}", prepared.log_path.display());
    Ok(())
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn client(mut socket: WebSocket, state: AppState) {
    let (backlog, mut rx) = {
        let h = state.history.lock().unwrap();
        (h.lines.clone(), h.tx.subscribe())
    };
    for line in backlog {
        if socket.send(Message::Text(line.into())).await.is_err() {
            return;
        }
    }
    let mut closing = state.closing.clone();
    loop {
        tokio::select! {
            line = rx.recv() => match line {
                Ok(line) => {
                    if socket.send(Message::Text(line.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!(skipped = n, "console client fell behind; dropping it");
                    return;
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => ingest(&state.bus, text.as_str()),
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
            _ = closing.changed() => {
                let _ = socket.send(Message::Close(None)).await;
                return;
            }
        }
    }
}

/// Accepts a console envelope on the `ui` or `asr` topic and stamps it with
/// the server clock.
fn ingest(bus: &Bus, text: &str) {
    let mut env = match Envelope::from_json(text) {
        Ok(env) => env,
        Err(e) => {
            tracing::warn!("ignoring malformed console envelope: {e}");
            return;
        }
    };
    if !matches!(env.topic, Topic::Ui | Topic::Asr) || [CONDUCTOR_SRC, SESSION_SRC, TIMER_SRC].contains(&env.src.as_str())
    {
        tracing::warn!(topic = %env.topic, src = %env.src, "console may only send on ui or asr");
        return;
    }
    env.ts_ms = wall_clock_ms();
    bus.publish(&env);
}
