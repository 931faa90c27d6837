//! The network log: committed per-link load over time, plus the FIFO
//! waitlist of deferred requests.
//!
//! Load is tracked as half-open windows `[start, end)` of reserved bandwidth
//! per link. Capacity questions reduce to "what is the peak committed load
//! on this link inside a window", which is evaluated exactly at commitment
//! boundaries since load is piecewise constant.

use std::collections::{BTreeMap, VecDeque};

use crate::ids::{LinkId, RequestId};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Commitment {
    pub request: RequestId,
    pub start: SimTime,
    pub end: SimTime,
    pub bandwidth: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown link {0}")]
pub struct UnknownLink(pub LinkId);

/// Committed load per link. Entries are never mutated in place: commits add
/// windows, releases drop them, and the full history stays available for
/// post-hoc invariant sweeps.
#[derive(Debug, Clone, Default)]
pub struct NetworkLog {
    capacities: BTreeMap<LinkId, u64>,
    committed: BTreeMap<LinkId, Vec<Commitment>>,
    history: Vec<(LinkId, Commitment)>,
}

impl NetworkLog {
    pub fn new(capacities: BTreeMap<LinkId, u64>) -> Self {
        NetworkLog {
            capacities,
            committed: BTreeMap::new(),
            history: Vec::new(),
        }
    }

    pub fn capacity(&self, link: &LinkId) -> Result<u64, UnknownLink> {
        self.capacities
            .get(link)
            .copied()
            .ok_or_else(|| UnknownLink(link.clone()))
    }

    /// Peak committed load on a link inside `[start, end)`.
    pub fn peak_load(&self, link: &LinkId, start: SimTime, end: SimTime) -> u64 {
        let Some(commitments) = self.committed.get(link) else {
            return 0;
        };
        let overlapping: Vec<&Commitment> = commitments
            .iter()
            .filter(|c| c.start < end && start < c.end)
            .collect();
        // load changes only at commitment starts; probe those plus the
        // window start
        let mut probes: Vec<SimTime> = overlapping
            .iter()
            .map(|c| c.start)
            .filter(|t| *t >= start && *t < end)
            .collect();
        probes.push(start);
        probes
            .into_iter()
            .map(|t| {
                overlapping
                    .iter()
                    .filter(|c| c.start <= t && t < c.end)
                    .map(|c| c.bandwidth)
                    .sum()
            })
            .max()
            .unwrap_or(0)
    }

    /// Instantaneous committed load on a link.
    pub fn load_at(&self, link: &LinkId, at: SimTime) -> u64 {
        self.committed
            .get(link)
            .map(|cs| {
                cs.iter()
                    .filter(|c| c.start <= at && at < c.end)
                    .map(|c| c.bandwidth)
                    .sum()
            })
            .unwrap_or(0)
    }

    /// Minimum headroom over the links of a path inside a window.
    pub fn available(
        &self,
        links: &[LinkId],
        start: SimTime,
        end: SimTime,
    ) -> Result<u64, UnknownLink> {
        let mut min = u64::MAX;
        for link in links {
            let cap = self.capacity(link)?;
            let headroom = cap.saturating_sub(self.peak_load(link, start, end));
            min = min.min(headroom);
        }
        if links.is_empty() {
            min = 0;
        }
        Ok(min)
    }

    /// Reserves bandwidth on every link of a path for the window.
    pub fn commit(
        &mut self,
        request: &RequestId,
        links: &[LinkId],
        start: SimTime,
        end: SimTime,
        bandwidth: u64,
    ) {
        for link in links {
            let c = Commitment {
                request: request.clone(),
                start,
                end,
                bandwidth,
            };
            self.history.push((link.clone(), c.clone()));
            self.committed.entry(link.clone()).or_default().push(c);
        }
    }

    /// Drops a request's reservations; its history entries remain.
    pub fn release(&mut self, request: &RequestId) {
        for commitments in self.committed.values_mut() {
            commitments.retain(|c| &c.request != request);
        }
    }

    /// Every reservation ever committed, for post-hoc sweeps.
    pub fn history(&self) -> &[(LinkId, Commitment)] {
        &self.history
    }

    /// Checks that at no instant did committed load exceed capacity on any
    /// link, evaluating the full history at every window boundary.
    pub fn sweep_overallocation(&self) -> Option<(LinkId, SimTime, u64)> {
        for (link, cap) in &self.capacities {
            let windows: Vec<&Commitment> = self
                .history
                .iter()
                .filter(|(l, _)| l == link)
                .map(|(_, c)| c)
                .collect();
            for probe in windows.iter().map(|c| c.start) {
                let load: u64 = windows
                    .iter()
                    .filter(|c| c.start <= probe && probe < c.end)
                    .map(|c| c.bandwidth)
                    .sum();
                if load > *cap {
                    return Some((link.clone(), probe, load));
                }
            }
        }
        None
    }
}

/// A deferred request waiting for capacity, FIFO.
#[derive(Debug, Clone)]
pub struct Waitlist<T> {
    queue: VecDeque<T>,
}

impl<T> Default for Waitlist<T> {
    fn default() -> Self {
        Waitlist {
            queue: VecDeque::new(),
        }
    }
}

impl<T> Waitlist<T> {
    pub fn push(&mut self, item: T) {
        self.queue.push_back(item);
    }

    /// Returns an item to the head of the queue (retry without losing the
    /// FIFO position).
    pub fn push_front(&mut self, item: T) {
        self.queue.push_front(item);
    }

    pub fn head(&self) -> Option<&T> {
        self.queue.front()
    }

    pub fn pop(&mut self) -> Option<T> {
        self.queue.pop_front()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}
