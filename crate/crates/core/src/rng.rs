//! Seeded update streams.
//!
//! The generator is splitmix64 with the seed as its initial state. Each
//! update draws two words: the first decides the kind
//! (`x % 100 < insert_pct` inserts), the second picks the key as
//! `(x * size) >> 64`, which is uniform on `[0, size)`.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Update {
    Insert(u64),
    Delete(u64),
}

impl Update {
    pub fn key(self) -> u64 {
        match self {
            Update::Insert(k) | Update::Delete(k) => k,
        }
    }
}

#[derive(Clone, Debug)]
pub struct UpdateStream {
    rng: SplitMix64,
    size: u64,
    insert_pct: u64,
}

impl UpdateStream {
    pub fn new(seed: u64, size: u64, insert_pct: u8) -> Self {
        assert!(size > 0, "key space must be non-empty");
        UpdateStream {
            rng: SplitMix64::seed_from_u64(seed),
            size,
            insert_pct: insert_pct as u64,
        }
    }

    pub fn set_insert_pct(&mut self, insert_pct: u8) {
        self.insert_pct = insert_pct as u64;
    }

    pub fn next_key(&mut self) -> u64 {
        ((self.rng.next_u64() as u128 * self.size as u128) >> 64) as u64
    }

    pub fn next_update(&mut self) -> Update {
        let insert = self.rng.next_u64() % 100 < self.insert_pct;
        let key = self.next_key();
        if insert {
            Update::Insert(key)
        } else {
            Update::Delete(key)
        }
    }
}

impl Iterator for UpdateStream {
    type Item = Update;

    fn next(&mut self) -> Option<Update> {
        Some(self.next_update())
    }
}
