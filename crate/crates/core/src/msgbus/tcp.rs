use std::collections::HashSet;
use std::io::{Read, Write};
use std::net::{Shutdown, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use super::bus::{Bus, TopicFilter};
use super::frame::{encode_frame, FrameDecoder};

/// Threads pumping frames between a TCP peer and the bus.
pub struct BridgeHandle {
    stream: TcpStream,
    reader: Option<JoinHandle<()>>,
    writer: Option<JoinHandle<()>>,
}

impl BridgeHandle {
    /// Closes the connection and waits for both pumps to stop.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        let _ = self.stream.shutdown(Shutdown::Both);
        if let Some(h) = self.reader.take() {
            let _ = h.join();
        }
        if let Some(h) = self.writer.take() {
            let _ = h.join();
        }
    }
}

impl Drop for BridgeHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Connects an external process speaking the framed wire protocol to `bus`.
///
/// Bus envelopes matching `outbound` are written to the peer; frames read from
/// the peer are published. Envelopes whose `src` the peer itself produced are
/// not echoed back.
pub fn bridge_tcp(bus: &Bus, stream: TcpStream, outbound: TopicFilter) -> std::io::Result<BridgeHandle> {
    let peer_srcs: Arc<Mutex<HashSet<String>>> = Arc::default();

    let mut read_half = stream.try_clone()?;
    let reader = {
        let bus = bus.clone();
        let peer_srcs = peer_srcs.clone();
        std::thread::spawn(move || {
            let mut dec = FrameDecoder::new();
            let mut buf = [0u8; 8192];
            loop {
                let n = match read_half.read(&mut buf) {
                    Ok(0) | Err(_) => break,
                    Ok(n) => n,
                };
                dec.push(&buf[..n]);
                loop {
                    match dec.next_frame() {
                        Ok(Some(env)) => {
                            peer_srcs.lock().unwrap().insert(env.src.clone());
                            bus.publish(&env);
                        }
                        Ok(None) => break,
                        Err(e) => tracing::warn!(error = %e, "dropping bad frame from peer"),
                    }
                }
            }
        })
    };

    let mut write_half = stream.try_clone()?;
    let sub = bus.subscribe(outbound);
    let writer = std::thread::spawn(move || loop {
        let env = match sub.recv_timeout(Duration::from_millis(50)) {
            Ok(Some(env)) => env,
            Ok(None) => {
                // Detect a closed peer even when the bus is quiet.
                if write_half.peer_addr().is_err() {
                    break;
                }
                continue;
            }
            Err(_) => break,
        };
        if peer_srcs.lock().unwrap().contains(&env.src) {
            continue;
        }
        let frame = match encode_frame(&env) {
            Ok(f) => f,
            Err(e) => {
                tracing::warn!(error = %e, "envelope too large for the wire");
                continue;
            }
        };
        if write_half.write_all(&frame).is_err() {
            break;
        }
    });

    Ok(BridgeHandle {
        stream,
        reader: Some(reader),
        writer: Some(writer),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msgbus::{Envelope, Topic};
    use serde_json::Map;
    use std::net::TcpListener;

    #[test]
    fn frames_flow_both_ways() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        // A fake external service: reads one frame, answers with one frame.
        let service = std::thread::spawn(move || {
            let (mut s, _) = listener.accept().unwrap();
            let mut dec = FrameDecoder::new();
            let mut buf = [0u8; 1024];
            let req = loop {
                let n = s.read(&mut buf).unwrap();
                dec.push(&buf[..n]);
                if let Some(e) = dec.next_frame().unwrap() {
                    break e;
                }
            };
            let mut reply = Envelope::new(Topic::Perception, "remote-cls", "step_observed", 0, req.ts_ms, Map::new());
            reply.data.insert("step_id".into(), 1.into());
            s.write_all(&encode_frame(&reply).unwrap()).unwrap();
            req
        });

        let bus = Bus::new();
        let inbound = bus.subscribe(TopicFilter::only([Topic::Perception]));
        let stream = TcpStream::connect(addr).unwrap();
        let bridge = bridge_tcp(&bus, stream, TopicFilter::only([Topic::Conductor])).unwrap();
        // Wait until the writer's subscription is registered.
        while bus.subscriber_count() < 2 {
            std::thread::yield_now();
        }
        bus.publish(&Envelope::new(Topic::Conductor, "conductor", "display", 0, 42, Map::new()));

        let got = inbound.recv_timeout(Duration::from_secs(5)).unwrap().unwrap();
        assert_eq!(got.src, "remote-cls");
        let req = service.join().unwrap();
        assert_eq!(req.kind, "display");
        assert_eq!(req.ts_ms, 42);
        bridge.shutdown();
    }
}
