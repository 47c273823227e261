use std::collections::BTreeSet;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::envelope::{Envelope, Topic};

/// The bus was dropped; no more envelopes will arrive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("message bus disconnected")]
pub struct Disconnected;

/// Which topics a subscriber receives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopicFilter {
    All,
    Only(BTreeSet<Topic>),
}

impl TopicFilter {
    pub fn only(topics: impl IntoIterator<Item = Topic>) -> Self {
        TopicFilter::Only(topics.into_iter().collect())
    }

    pub fn matches(&self, topic: Topic) -> bool {
        match self {
            TopicFilter::All => true,
            TopicFilter::Only(set) => set.contains(&topic),
        }
    }
}

struct Subscriber {
    id: u64,
    filter: TopicFilter,
    tx: Sender<Envelope>,
}

#[derive(Default)]
struct Inner {
    next_id: u64,
    subscribers: Vec<Subscriber>,
}

/// In-process topic bus.
///
/// `publish` delivers under one lock, so envelopes from a single publisher
/// reach every subscriber in publish order. Subscribers whose receiving end
/// has been dropped are removed on the next publish.
#[derive(Clone, Default)]
pub struct Bus {
    inner: Arc<Mutex<Inner>>,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&self, filter: TopicFilter) -> Subscription {
        let (tx, rx) = mpsc::channel();
        let mut inner = self.inner.lock().unwrap();
        let id = inner.next_id;
        inner.next_id += 1;
        inner.subscribers.push(Subscriber { id, filter, tx });
        Subscription { id, rx }
    }

    /// Delivers a copy of `env` to every matching subscriber; returns how many
    /// received it.
    pub fn publish(&self, env: &Envelope) -> usize {
        let mut inner = self.inner.lock().unwrap();
        let mut delivered = 0;
        inner.subscribers.retain(|sub| {
            if !sub.filter.matches(env.topic) {
                return true;
            }
            match sub.tx.send(env.clone()) {
                Ok(()) => {
                    delivered += 1;
                    true
                }
                Err(_) => {
                    tracing::debug!(subscriber = sub.id, topic = %env.topic, "dropping disconnected subscriber");
                    false
                }
            }
        });
        delivered
    }

    pub fn subscriber_count(&self) -> usize {
        self.inner.lock().unwrap().subscribers.len()
    }
}

/// Receiving end of a bus subscription.
pub struct Subscription {
    id: u64,
    rx: Receiver<Envelope>,
}

impl Subscription {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn recv(&self) -> Option<Envelope> {
        self.rx.recv().ok()
    }

    /// `Ok(None)` on timeout.
    pub fn recv_timeout(&self, timeout: Duration) -> Result<Option<Envelope>, Disconnected> {
        match self.rx.recv_timeout(timeout) {
            Ok(e) => Ok(Some(e)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(Disconnected),
        }
    }

    pub fn try_recv(&self) -> Option<Envelope> {
        self.rx.try_recv().ok()
    }

    pub fn drain(&self) -> Vec<Envelope> {
        std::iter::from_fn(|| self.try_recv()).collect()
    }
}
