//! Replica leasing. A question with `k` replicas can be leased to at most
//! `k - answered` annotators at a time, never twice to the same annotator,
//! and each annotator holds at most one lease.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use pointillism_core::campaign::Campaign;
use pointillism_core::ClassId;

/// Monotonic milliseconds, injectable so tests can move time by hand.
pub trait Clock: Send + Sync + 'static {
    fn now_ms(&self) -> u64;
}

#[derive(Debug)]
pub struct MonotonicClock {
    start: Instant,
}

impl Default for MonotonicClock {
    fn default() -> Self {
        MonotonicClock { start: Instant::now() }
    }
}

impl Clock for MonotonicClock {
    fn now_ms(&self) -> u64 {
        self.start.elapsed().as_millis() as u64
    }
}

#[derive(Debug, Default)]
pub struct ManualClock {
    now: AtomicU64,
}

impl ManualClock {
    pub fn advance(&self, by: Duration) {
        self.now.fetch_add(by.as_millis() as u64, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.now.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lease {
    pub question: usize,
    pub expires_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LeaseError {
    /// The annotator holds no live lease on this question.
    NotLeased,
    Expired,
}

#[derive(Debug)]
pub struct Dispatcher {
    k: u32,
    lease_ms: u64,
    classes: Vec<ClassId>,
    answered: Vec<u32>,
    leased: Vec<u32>,
    /// Annotators that ever held or answered each question.
    seen: Vec<HashSet<String>>,
    open: BTreeSet<usize>,
    open_by_class: HashMap<ClassId, BTreeSet<usize>>,
    leases: HashMap<String, Lease>,
    last_class: HashMap<String, ClassId>,
}

impl Dispatcher {
    pub fn new(campaign: &Campaign, lease_ms: u64) -> Self {
        let mut d = Dispatcher {
            k: campaign.replication() as u32,
            lease_ms,
            classes: Vec::new(),
            answered: Vec::new(),
            leased: Vec::new(),
            seen: Vec::new(),
            open: BTreeSet::new(),
            open_by_class: HashMap::new(),
            leases: HashMap::new(),
            last_class: HashMap::new(),
        };
        for q in campaign.questions() {
            let i = d.push(q.question.class_id);
            d.answered[i] = q.answers.len() as u32;
            d.seen[i] = q.answers.iter().map(|a| a.annotator_id.clone()).collect();
            d.refresh(i);
        }
        d
    }

    fn push(&mut self, class: ClassId) -> usize {
        self.classes.push(class);
        self.answered.push(0);
        self.leased.push(0);
        self.seen.push(HashSet::new());
        self.classes.len() - 1
    }

    /// Registers a question appended to the campaign at index `question`.
    pub fn add_question(&mut self, question: usize, class: ClassId) {
        debug_assert_eq!(question, self.classes.len());
        let i = self.push(class);
        self.refresh(i);
    }

    fn refresh(&mut self, q: usize) {
        let free = self.answered[q] + self.leased[q] < self.k;
        let by_class = self.open_by_class.entry(self.classes[q]).or_default();
        if free {
            self.open.insert(q);
            by_class.insert(q);
        } else {
            self.open.remove(&q);
            by_class.remove(&q);
        }
    }

    fn release(&mut self, annotator: &str) {
        if let Some(lease) = self.leases.remove(annotator) {
            self.leased[lease.question] -= 1;
            self.refresh(lease.question);
        }
    }

    /// Returns lapsed leases to the pool.
    pub fn expire(&mut self, now_ms: u64) {
        let lapsed: Vec<String> =
            self.leases.iter().filter(|(_, l)| l.expires_ms <= now_ms).map(|(a, _)| a.clone()).collect();
        for a in lapsed {
            self.release(&a);
        }
    }

    /// Leases the next eligible replica to `annotator`, preferring the class
    /// it saw last so that same-class questions arrive in contiguous blocks.
    /// Any lease the annotator still holds is given up first.
    pub fn next(&mut self, annotator: &str, now_ms: u64) -> Option<Lease> {
        self.expire(now_ms);
        self.release(annotator);
        let eligible = |q: &&usize| !self.seen[**q].contains(annotator);
        let same_class = self
            .last_class
            .get(annotator)
            .and_then(|c| self.open_by_class.get(c))
            .and_then(|set| set.iter().find(eligible));
        let q = *same_class.or_else(|| self.open.iter().find(eligible))?;
        self.seen[q].insert(annotator.to_string());
        self.leased[q] += 1;
        self.refresh(q);
        let lease = Lease { question: q, expires_ms: now_ms + self.lease_ms };
        self.leases.insert(annotator.to_string(), lease);
        self.last_class.insert(annotator.to_string(), self.classes[q]);
        Some(lease)
    }

    pub fn check(&self, annotator: &str, question: usize, now_ms: u64) -> Result<(), LeaseError> {
        match self.leases.get(annotator) {
            Some(l) if l.question == question && l.expires_ms > now_ms => Ok(()),
            Some(l) if l.question == question => Err(LeaseError::Expired),
            _ => Err(LeaseError::NotLeased),
        }
    }

    /// Converts the annotator's lease on `question` into an answer.
    pub fn complete(&mut self, annotator: &str, question: usize) {
        if self.leases.get(annotator).is_some_and(|l| l.question == question) {
            self.leases.remove(annotator);
            self.leased[question] -= 1;
        }
        self.answered[question] += 1;
        self.seen[question].insert(annotator.to_string());
        self.refresh(question);
    }

    pub fn lease_of(&self, annotator: &str) -> Option<Lease> {
        self.leases.get(annotator).copied()
    }
}
