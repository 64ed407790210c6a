use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// Shared call counters, used to check cache behavior and cost.
#[derive(Debug, Default)]
pub struct Counters {
    decompile: AtomicU64,
    validate: AtomicU64,
    model: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterSnapshot {
    pub decompile_calls: u64,
    pub validate_calls: u64,
    pub model_calls: u64,
}

impl Counters {
    pub fn record_decompile(&self) {
        self.decompile.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_validate(&self) {
        self.validate.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_model(&self) {
        self.model.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            decompile_calls: self.decompile.load(Ordering::Relaxed),
            validate_calls: self.validate.load(Ordering::Relaxed),
            model_calls: self.model.load(Ordering::Relaxed),
        }
    }
}
