use serde::{Deserialize, Serialize};

use crate::components::DesignRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliteEntry {
    pub fitness: f64,
    pub record: DesignRecord,
    /// Offer order; earlier offers win ties.
    pub seq: u64,
}

/// Fixed-capacity elite set with strict-improvement replacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliteQueue {
    capacity: usize,
    entries: Vec<EliteEntry>,
    offers: u64,
}

impl EliteQueue {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "queue capacity must be at least 1");
        EliteQueue {
            capacity,
            entries: Vec::with_capacity(capacity),
            offers: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Offers made so far, accepted or not.
    pub fn offers(&self) -> u64 {
        self.offers
    }

    /// Entries in insertion-slot order.
    pub fn entries(&self) -> &[EliteEntry] {
        &self.entries
    }

    /// The entry `maybe_insert` would evict: lowest fitness, latest offer.
    fn weakest(&self) -> Option<usize> {
        (0..self.entries.len()).min_by(|&a, &b| {
            let (ea, eb) = (&self.entries[a], &self.entries[b]);
            ea.fitness.total_cmp(&eb.fitness).then(eb.seq.cmp(&ea.seq))
        })
    }

    pub fn min_fitness(&self) -> Option<f64> {
        self.weakest().map(|i| self.entries[i].fitness)
    }

    pub fn max_fitness(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.fitness).max_by(f64::total_cmp)
    }

    /// Highest fitness, earliest offer.
    pub fn best(&self) -> Option<&EliteEntry> {
        self.ranked().into_iter().next()
    }

    /// Best first: fitness descending, then offer order.
    pub fn ranked(&self) -> Vec<&EliteEntry> {
        let mut v: Vec<&EliteEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| b.fitness.total_cmp(&a.fitness).then(a.seq.cmp(&b.seq)));
        v
    }

    /// Worst first; the reverse of [`ranked`](Self::ranked).
    pub fn ascending(&self) -> Vec<&EliteEntry> {
        let mut v = self.ranked();
        v.reverse();
        v
    }

    /// Inserts while below capacity, otherwise replaces the weakest entry if
    /// `fitness` is strictly greater. NaN is never accepted.
    pub fn maybe_insert(&mut self, fitness: f64, mut record: DesignRecord) -> bool {
        let seq = self.offers;
        self.offers += 1;
        if fitness.is_nan() {
            return false;
        }
        record.fitness = Some(fitness);
        let entry = EliteEntry { fitness, record, seq };
        if self.entries.len() < self.capacity {
            self.entries.push(entry);
            return true;
        }
        let weakest = self.weakest().expect("full queue is non-empty");
        if fitness > self.entries[weakest].fitness {
            self.entries[weakest] = entry;
            true
        } else {
            false
        }
    }

    /// `(seq, fitness)` of each entry, best first.
    pub fn snapshot(&self) -> Vec<QueueSlot> {
        self.ranked()
            .into_iter()
            .map(|e| QueueSlot {
                seq: e.seq,
                fitness: e.fitness,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueSlot {
    pub seq: u64,
    pub fitness: f64,
}
