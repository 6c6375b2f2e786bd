//! Versioned, checksummed parameter images and the trainer → inference hand-off.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};

/// Anything whose parameters flatten to a single vector.
pub trait Parameterized {
    fn param_count(&self) -> usize;
    fn flat_params(&self) -> Vec<f64>;
    fn load_flat_params(&mut self, flat: &[f64]) -> Result<()>;

    /// Rounds every parameter to the nearest `f32`, the precision of weight files.
    fn quantize_f32(&mut self) {
        let q: Vec<f64> = self
            .flat_params()
            .iter()
            .map(|&p| p as f32 as f64)
            .collect();
        self.load_flat_params(&q).expect("same parameter count");
    }
}

/// CRC-32 of the little-endian bytes of `params`.
pub fn param_checksum(params: &[f64]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    for p in params {
        h.update(&p.to_le_bytes());
    }
    h.finalize()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSnapshot {
    version: u64,
    params: Arc<[f64]>,
    checksum: u32,
}

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

impl WeightSnapshot {
    pub fn with_version(version: u64, params: Vec<f64>) -> Self {
        let checksum = param_checksum(&params);
        Self {
            version,
            params: params.into(),
            checksum,
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn checksum(&self) -> u32 {
        self.checksum
    }

    pub fn verify(&self) -> Result<()> {
        let found = param_checksum(&self.params);
        if found != self.checksum {
            return Err(Error::Corruption {
                expected: self.checksum,
                found,
            });
        }
        Ok(())
    }

    /// Test hook: a copy whose parameter image no longer matches its checksum.
    pub fn corrupted(&self) -> Self {
        let mut p = self.params.to_vec();
        if let Some(v) = p.first_mut() {
            *v += 1.0;
        }
        Self {
            version: self.version,
            params: p.into(),
            checksum: self.checksum,
        }
    }
}

/// Captures the model's parameters under a process-wide strictly increasing version.
pub fn snapshot_weights<M: Parameterized + ?Sized>(model: &M) -> WeightSnapshot {
    WeightSnapshot::with_version(
        NEXT_VERSION.fetch_add(1, Ordering::Relaxed),
        model.flat_params(),
    )
}

/// Verifies the checksum, then overwrites the model's parameters.
pub fn load_snapshot<M: Parameterized + ?Sized>(
    model: &mut M,
    snapshot: &WeightSnapshot,
) -> Result<()> {
    snapshot.verify()?;
    model.load_flat_params(snapshot.params())
}

/// Single-slot latest-value channel. Publishing swaps an `Arc` under a lock
/// held only for the pointer exchange, so readers always get a complete image.
#[derive(Debug, Default)]
pub struct SnapshotChannel {
    latest: Mutex<Option<Arc<WeightSnapshot>>>,
    next_version: AtomicU64,
}

impl SnapshotChannel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Publishes the model's current parameters; returns the assigned version.
    pub fn publish<M: Parameterized + ?Sized>(&self, model: &M) -> u64 {
        let version = self.next_version.fetch_add(1, Ordering::AcqRel) + 1;
        let snap = Arc::new(WeightSnapshot::with_version(version, model.flat_params()));
        let mut slot = self.latest.lock().unwrap_or_else(|e| e.into_inner());
        if slot.as_ref().is_none_or(|s| s.version < version) {
            *slot = Some(snap);
        }
        version
    }

    pub fn latest(&self) -> Option<Arc<WeightSnapshot>> {
        self.latest
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    pub fn latest_version(&self) -> u64 {
        self.latest().map_or(0, |s| s.version)
    }
}

/// Inference-side holder: keeps a model in sync with a channel.
#[derive(Debug)]
pub struct InferenceTwin<M> {
    pub model: M,
    version: u64,
}

impl<M: Parameterized> InferenceTwin<M> {
    pub fn new(model: M) -> Self {
        Self { model, version: 0 }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Loads the channel's newest snapshot if it is newer than the one held.
    pub fn sync(&mut self, channel: &SnapshotChannel) -> Result<bool> {
        match channel.latest() {
            Some(s) if s.version > self.version => {
                load_snapshot(&mut self.model, &s)?;
                self.version = s.version;
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}
