//! Batches of hypotheses sharing one premise, handed out under expiring
//! per-candidate locks.

use std::collections::{BTreeMap, HashMap};

use relmine_core::discovery::format_slots;
use relmine_core::Candidate;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lock {
    pub worker: String,
    pub batch: u64,
    pub expires: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub id: u64,
    pub premise: String,
    /// Candidate indices.
    pub cands: Vec<usize>,
    pub expires: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockState {
    Held,
    Expired,
    Missing,
}

#[derive(Debug, Clone)]
pub struct Queue {
    /// Premise key → candidate indices, in first-seen order of premises.
    groups: Vec<(String, Vec<usize>)>,
    locks: HashMap<usize, Lock>,
    next_batch: u64,
    pub lock_timeout: u64,
}

pub fn premise_key(c: &Candidate) -> String {
    format!("{}|{}|{}", c.premise, format_slots(&c.premise_types), c.premise_reversed as u8)
}

impl Queue {
    pub fn new(cands: &[Candidate], lock_timeout: u64) -> Self {
        let mut order: Vec<String> = Vec::new();
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, c) in cands.iter().enumerate() {
            let key = premise_key(c);
            let g = groups.entry(key.clone()).or_default();
            if g.is_empty() {
                order.push(key);
            }
            g.push(i);
        }
        Queue {
            groups: order.into_iter().map(|k| {
                let v = groups.remove(&k).unwrap_or_default();
                (k, v)
            }).collect(),
            locks: HashMap::new(),
            next_batch: 1,
            lock_timeout,
        }
    }

    fn expire(&mut self, now: u64) {
        self.locks.retain(|_, l| l.expires > now);
    }

    /// Locks every pending candidate of the first premise that has one for
    /// this worker. `pending(i)` says whether candidate `i` still needs
    /// annotations and `labeled(i)` whether this worker already judged it.
    /// The worker's earlier unsubmitted locks are released.
    pub fn assign(
        &mut self,
        worker: &str,
        now: u64,
        pending: impl Fn(usize) -> bool,
        labeled: impl Fn(usize) -> bool,
    ) -> Option<Batch> {
        self.expire(now);
        self.locks.retain(|_, l| l.worker != worker);
        for (premise, members) in &self.groups {
            let free: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&i| pending(i) && !labeled(i) && !self.locks.contains_key(&i))
                .collect();
            if free.is_empty() {
                continue;
            }
            let id = self.next_batch;
            self.next_batch += 1;
            let expires = now + self.lock_timeout;
            for &i in &free {
                self.locks.insert(
                    i,
                    Lock {
                        worker: worker.to_string(),
                        batch: id,
                        expires,
                    },
                );
            }
            return Some(Batch {
                id,
                premise: premise.clone(),
                cands: free,
                expires,
            });
        }
        None
    }

    pub fn lock_state(&self, cand: usize, worker: &str, now: u64) -> LockState {
        match self.locks.get(&cand) {
            Some(l) if l.worker == worker && l.expires > now => LockState::Held,
            Some(l) if l.worker == worker => LockState::Expired,
            _ => LockState::Missing,
        }
    }

    pub fn release(&mut self, cand: usize) {
        self.locks.remove(&cand);
    }

    pub fn lock(&self, cand: usize) -> Option<&Lock> {
        self.locks.get(&cand)
    }

    pub fn active_locks(&self, now: u64) -> usize {
        self.locks.values().filter(|l| l.expires > now).count()
    }
}
