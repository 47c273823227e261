//! Live sessions: the `/ws` envelope stream, console ingress, the built-in
//! page and listen-address errors.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

/// Tea over `secs` seconds, split evenly across its five steps.
fn short_annotation(dir: &Path, secs: u32) -> PathBuf {
    let steps: Vec<Value> = (0..5)
        .map(|i| {
            let w = secs as f64 / 5.0;
            json!({"step": i + 1, "start_sec": i as f64 * w, "end_sec": (i + 1) as f64 * w})
        })
        .collect();
    let ann = json!({
        "session_id": "live", "participant": "p01", "task": "tea", "condition": "AI",
        "attempt_index": 1, "success": true,
        "duration": {"start_sec": 0.0, "end_sec": secs as f64},
        "steps": steps, "out_of_order": false, "step_mistakes": []
    });
    let path = dir.join("short.annotation.json");
    std::fs::write(&path, ann.to_string()).unwrap();
    path
}

fn spawn_live(dir: &Path, extra: &[&str]) -> (Child, String) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_taskpilot"))
        .args(["run", "--task", "tea", "--listen", "127.0.0.1:0", "--out", "logs"])
        .args(extra)
        .current_dir(dir)
        .env("TASKPILOT_TASKDIR", fixtures().join("tasks"))
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.as_mut().unwrap()).read_line(&mut line).unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on ")
        .unwrap_or_else(|| panic!("unexpected first line {line:?}"))
        .to_string();
    (child, addr)
}

/// Waits for the server to exit, killing it after 30 s so a stuck session
/// fails the test instead of hanging it.
fn wait(child: &mut Child) -> Option<i32> {
    for _ in 0..300 {
        if let Some(status) = child.try_wait().unwrap() {
            return status.code();
        }
        std::thread::sleep(Duration::from_millis(100));
    }
    let _ = child.kill();
    panic!("live session did not end");
}

fn http_get(addr: &str, path: &str) -> String {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(s, "GET {path} HTTP/1.0\r\nHost: {addr}\r\n\r\n").unwrap();
    let mut body = String::new();
    s.read_to_string(&mut body).unwrap();
    body
}

#[tokio::test(flavor = "multi_thread")]
async fn ws_streams_the_session_and_accepts_console_input() {
    let dir = tempfile::tempdir().unwrap();
    let ann = short_annotation(dir.path(), 5);
    let (mut child, addr) = spawn_live(dir.path(), &["--annotation", ann.to_str().unwrap()]);

    let page = http_get(&addr, "/");
    assert!(page.starts_with("HTTP/1.0 200") || page.starts_with("HTTP/1.1 200"), "{page}");
    assert!(page.contains("<title>taskpilot</title>"));

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    // Forged conductor output is dropped; a spoken question is accepted.
    let forged = json!({"v": 1, "seq": 0, "ts_ms": 0, "topic": "conductor", "src": "conductor",
        "type": "end_session", "data": {"outcome": "aborted"}});
    ws.send(Message::Text(forged.to_string().into())).await.unwrap();
    let question = json!({"v": 1, "seq": 0, "ts_ms": 0, "topic": "asr", "src": "console",
        "type": "utterance", "data": {"text": "say that again"}});
    ws.send(Message::Text(question.to_string().into())).await.unwrap();

    let mut stream = Vec::new();
    let collect = async {
        while let Some(msg) = ws.next().await {
            match msg {
                Ok(Message::Text(t)) => stream.push(serde_json::from_str::<Value>(&t).unwrap()),
                Ok(Message::Close(_)) | Err(_) => break,
                Ok(_) => {}
            }
        }
    };
    tokio::time::timeout(Duration::from_secs(30), collect).await.expect("stream closes after the session");

    assert_eq!(wait(&mut child), Some(0));
    let mut out = String::new();
    child.stdout.take().unwrap().read_to_string(&mut out).unwrap();
    let log_path = dir.path().join(out.trim());

    // Every streamed frame is a canonical envelope, starting with the start event.
    assert_eq!(stream[0]["type"], "start");
    for env in &stream {
        for key in ["v", "seq", "ts_ms", "topic", "src", "type", "data"] {
            assert!(env.get(key).is_some(), "{env} lacks {key}");
        }
    }
    let of = |src: &str, kind: &str| stream.iter().filter(|e| e["src"] == src && e["type"] == kind).count();
    assert_eq!(of("conductor", "step_completed"), 5);
    assert_eq!(of("conductor", "end_session"), 1);
    assert_eq!(of("console", "utterance"), 1);
    assert_eq!(of("conductor", "ask_intent"), 1);
    let end = stream.iter().find(|e| e["type"] == "end_session").unwrap();
    assert_eq!(end["data"]["outcome"], "completed");

    // The log holds what was streamed and replays cleanly.
    let logged = std::fs::read_to_string(&log_path).unwrap();
    assert_eq!(logged.lines().count(), stream.len());
    let replay = Command::new(env!("CARGO_BIN_EXE_taskpilot"))
        .arg("replay")
        .arg(&log_path)
        .output()
        .unwrap();
    assert_eq!(replay.status.code(), Some(0), "{}", String::from_utf8_lossy(&replay.stdout));
}

#[test]
fn busy_listen_address_exits_3() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_taskpilot"))
        .args(["run", "--task", "tea", "--listen", &addr])
        .current_dir(dir.path())
        .env("TASKPILOT_TASKDIR", fixtures().join("tasks"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn assets_directory_replaces_the_builtin_page() {
    let dir = tempfile::tempdir().unwrap();
    let assets = dir.path().join("assets");
    std::fs::create_dir(&assets).unwrap();
    std::fs::write(assets.join("index.html"), "<p>custom console</p>").unwrap();
    std::fs::write(assets.join("app.js"), "console.log(1)").unwrap();
    let ann = short_annotation(dir.path(), 5);
    let (mut child, addr) = spawn_live(
        dir.path(),
        &["--annotation", ann.to_str().unwrap(), "--assets", assets.to_str().unwrap()],
    );
    assert!(http_get(&addr, "/").contains("custom console"));
    assert!(http_get(&addr, "/app.js").contains("console.log(1)"));
    assert_eq!(wait(&mut child), Some(0));
}
