//! One-sided communication window.
//!
//! A window holds one complete payload. A put swaps in a new payload
//! atomically, so readers never observe a partial write; they keep the
//! previous complete version until the swap happens.

use std::sync::Arc;

use arc_swap::ArcSwap;

use crate::error::{CouplingError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Payload {
    /// Strictly increasing per window.
    pub version: u64,
    /// Iterate index the data was computed from.
    pub source: u64,
    pub stop: bool,
    pub data: Vec<f64>,
    checksum: u64,
}

impl Payload {
    pub fn new(version: u64, source: u64, stop: bool, data: Vec<f64>) -> Self {
        let checksum = checksum(version, source, stop, &data);
        Payload {
            version,
            source,
            stop,
            data,
            checksum,
        }
    }

    pub fn is_intact(&self) -> bool {
        self.checksum == checksum(self.version, self.source, self.stop, &self.data)
    }
}

fn checksum(version: u64, source: u64, stop: bool, data: &[f64]) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut mix = |x: u64| {
        for b in x.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(PRIME);
        }
    };
    mix(version);
    mix(source);
    mix(u64::from(stop));
    for v in data {
        mix(v.to_bits());
    }
    h
}

#[derive(Debug)]
pub struct WindowCell {
    owner: usize,
    cell: ArcSwap<Payload>,
}

impl WindowCell {
    pub fn new(owner: usize, initial: Vec<f64>) -> Self {
        WindowCell {
            owner,
            cell: ArcSwap::from_pointee(Payload::new(0, 0, false, initial)),
        }
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn version(&self) -> u64 {
        self.cell.load().version
    }

    /// Publishes `data` as the next version. Single writer per window.
    pub fn put(&self, source: u64, stop: bool, data: Vec<f64>) -> u64 {
        let version = self.cell.load().version + 1;
        self.cell.store(Arc::new(Payload::new(version, source, stop, data)));
        version
    }

    /// Latest complete payload, checksum verified.
    pub fn get(&self) -> Result<Arc<Payload>> {
        let p = self.cell.load_full();
        if !p.is_intact() {
            return Err(CouplingError::Window(format!(
                "checksum mismatch on window of rank {} version {}",
                self.owner, p.version
            )));
        }
        Ok(p)
    }
}

/// Reader-side view enforcing non-decreasing observed versions.
#[derive(Debug, Default, Clone)]
pub struct WindowReader {
    last: u64,
}

impl WindowReader {
    pub fn read(&mut self, window: &WindowCell) -> Result<Arc<Payload>> {
        let p = window.get()?;
        if p.version < self.last {
            return Err(CouplingError::Window(format!(
                "version went back from {} to {} on window of rank {}",
                self.last,
                p.version,
                window.owner()
            )));
        }
        self.last = p.version;
        Ok(p)
    }

    pub fn last_version(&self) -> u64 {
        self.last
    }
}
