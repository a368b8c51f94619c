//! Client- and server-side queues of early-exit outputs.
//!
//! Priority pops the highest score first (ties in insertion order), FIFO
//! pops insertion order, and the client-only random strategy pops a
//! PRF-chosen entry: pop `k` removes index `prf(seed, QUEUE_RANDOM, [], k)
//! mod len`.

use crate::prf::{prf, tag};
use crate::wire::ExitOutput;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClientQueueStrategy {
    Priority,
    Fifo,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServerQueueStrategy {
    Priority,
    Fifo,
}

#[derive(Debug)]
struct Slot {
    entry: ExitOutput,
    seq: u64,
}

fn pick(slots: &[Slot], priority: bool, rng_seed: u64, pops: u64, random: bool) -> Option<usize> {
    if slots.is_empty() {
        return None;
    }
    if random {
        return Some((prf(rng_seed, tag::QUEUE_RANDOM, &[], pops) % slots.len() as u64) as usize);
    }
    if priority {
        let mut best = 0usize;
        for (i, s) in slots.iter().enumerate() {
            let better = s.entry.score.total_cmp(&slots[best].entry.score);
            if better == std::cmp::Ordering::Greater
                || (better == std::cmp::Ordering::Equal && s.seq < slots[best].seq)
            {
                best = i;
            }
        }
        Some(best)
    } else {
        // FIFO: lowest insertion sequence.
        let mut best = 0usize;
        for (i, s) in slots.iter().enumerate() {
            if s.seq < slots[best].seq {
                best = i;
            }
        }
        Some(best)
    }
}

/// Client queue of pending early-exit outputs awaiting pre-drafting.
#[derive(Debug)]
pub struct ClientQueue {
    strategy: ClientQueueStrategy,
    rng_seed: u64,
    slots: Vec<Slot>,
    next_seq: u64,
    pops: u64,
}

impl ClientQueue {
    pub fn new(strategy: ClientQueueStrategy, rng_seed: u64) -> Self {
        ClientQueue {
            strategy,
            rng_seed,
            slots: Vec::new(),
            next_seq: 0,
            pops: 0,
        }
    }

    pub fn push(&mut self, entry: ExitOutput) {
        self.slots.push(Slot {
            entry,
            seq: self.next_seq,
        });
        self.next_seq += 1;
    }

    pub fn pop(&mut self) -> Option<ExitOutput> {
        let idx = pick(
            &self.slots,
            self.strategy == ClientQueueStrategy::Priority,
            self.rng_seed,
            self.pops,
            self.strategy == ClientQueueStrategy::Random,
        )?;
        self.pops += 1;
        Some(self.slots.swap_remove(idx).entry)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Drop all entries; returns how many were discarded.
    pub fn reset(&mut self) -> usize {
        let n = self.slots.len();
        self.slots.clear();
        n
    }
}

/// Server queue of early-exit outputs awaiting transmission.
#[derive(Debug)]
pub struct ServerQueue {
    strategy: ServerQueueStrategy,
    slots: Vec<Slot>,
    next_seq: u64,
}

impl ServerQueue {
    pub fn new(strategy: ServerQueueStrategy) -> Self {
        ServerQueue {
            strategy,
            slots: Vec::new(),
            next_seq: 0,
        }
    }

    pub fn push(&mut self, entry: ExitOutput) {
        self.slots.push(Slot {
            entry,
            seq: self.next_seq,
        });
        self.next_seq += 1;
    }

    pub fn pop(&mut self) -> Option<ExitOutput> {
        let idx = pick(
            &self.slots,
            self.strategy == ServerQueueStrategy::Priority,
            0,
            0,
            false,
        )?;
        Some(self.slots.swap_remove(idx).entry)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Discard unsent entries when the final output ships; returns the count.
    pub fn reset(&mut self) -> usize {
        let n = self.slots.len();
        self.slots.clear();
        n
    }
}
