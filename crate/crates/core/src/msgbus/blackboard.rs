use std::collections::HashMap;
use std::sync::RwLock;

use serde_json::Value;

/// Shared latest-value store. Each write is stamped with a sequence number
/// from one counter, so stamps for a key strictly increase.
#[derive(Debug, Default)]
pub struct Blackboard {
    inner: RwLock<Board>,
}

#[derive(Debug, Default)]
struct Board {
    counter: u64,
    entries: HashMap<String, (Value, u64)>,
}

impl Blackboard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&self, key: impl Into<String>, value: Value) -> u64 {
        let mut board = self.inner.write().unwrap();
        board.counter += 1;
        let seq = board.counter;
        board.entries.insert(key.into(), (value, seq));
        seq
    }

    pub fn get(&self, key: &str) -> Option<(Value, u64)> {
        self.inner.read().unwrap().entries.get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.read().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
