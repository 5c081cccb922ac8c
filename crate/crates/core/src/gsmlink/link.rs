//! Discrete-event cellular link.
//!
//! SMS are lossy, delayed and occasionally duplicated; calls always ring after
//! a fixed setup delay. Events fire in timestamp order, ties in submission
//! order. All randomness comes from one ChaCha8 stream seeded from
//! [`LinkParams::seed`].

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Msisdn, SmsMessage};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinkError {
    #[error("latency range is inverted: min {min} > max {max}")]
    InvertedLatency { min: u64, max: u64 },
    #[error("{name} must be a probability in [0, 1], got {value}")]
    BadProbability { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LinkParams {
    pub latency_ms_min: u64,
    pub latency_ms_max: u64,
    pub loss_prob: f64,
    pub dup_prob: f64,
    pub seed: u64,
    pub call_setup_ms: u64,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            latency_ms_min: 500,
            latency_ms_max: 3000,
            loss_prob: 0.0,
            dup_prob: 0.0,
            seed: 0,
            call_setup_ms: 2000,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<(), LinkError> {
        if self.latency_ms_min > self.latency_ms_max {
            return Err(LinkError::InvertedLatency {
                min: self.latency_ms_min,
                max: self.latency_ms_max,
            });
        }
        for (name, value) in [("lossProb", self.loss_prob), ("dupProb", self.dup_prob)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(LinkError::BadProbability { name, value });
            }
        }
        Ok(())
    }
}

/// Delivery times for one submitted SMS.
///
/// Every call consumes exactly four draws (loss, latency, duplicate, duplicate
/// latency), so one message's fate never shifts the stream seen by the next.
pub fn submit(msg: &SmsMessage, params: &LinkParams, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let range = params.latency_ms_min..=params.latency_ms_max;
    let lost = rng.random::<f64>() < params.loss_prob;
    let first = rng.random_range(range.clone());
    let duplicated = rng.random::<f64>() < params.dup_prob;
    let second = rng.random_range(range);

    let t = msg.submitted_at_ms();
    match (lost, duplicated) {
        (true, _) => Vec::new(),
        (false, false) => vec![t + first],
        (false, true) => vec![t + first, t + second],
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinkEvent {
    SmsDelivered(SmsMessage),
    Ring { from: Msisdn, to: Msisdn },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledEvent {
    pub at_ms: u64,
    /// Submission order, breaks timestamp ties.
    pub order: u64,
    pub event: LinkEvent,
}

impl Ord for ScheduledEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        (other.at_ms, other.order).cmp(&(self.at_ms, self.order))
    }
}

impl PartialOrd for ScheduledEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DeadLetter {
    pub at_ms: u64,
    pub kind: &'static str,
    pub from: Msisdn,
    pub to: Msisdn,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LinkStats {
    pub sms_submitted: u64,
    pub sms_dropped: u64,
    pub sms_duplicated: u64,
    pub sms_delivered: u64,
    pub rings_delivered: u64,
}

/// The simulated operator network: subscribers plus a pending-event queue.
#[derive(Debug)]
pub struct GsmNetwork {
    params: LinkParams,
    rng: ChaCha8Rng,
    subscribers: BTreeSet<Msisdn>,
    queue: BinaryHeap<ScheduledEvent>,
    next_order: u64,
    dead_letters: Vec<DeadLetter>,
    trace: Vec<(u64, SmsMessage)>,
    stats: LinkStats,
}

impl GsmNetwork {
    pub fn new(params: LinkParams) -> Result<Self, LinkError> {
        params.validate()?;
        Ok(GsmNetwork {
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            params,
            subscribers: BTreeSet::new(),
            queue: BinaryHeap::new(),
            next_order: 0,
            dead_letters: Vec::new(),
            trace: Vec::new(),
            stats: LinkStats::default(),
        })
    }

    pub fn params(&self) -> &LinkParams {
        &self.params
    }

    /// Replaces loss/latency settings mid-run. The random stream is kept.
    pub fn set_params(&mut self, params: LinkParams) -> Result<(), LinkError> {
        params.validate()?;
        self.params = params;
        Ok(())
    }

    pub fn register(&mut self, msisdn: Msisdn) {
        self.subscribers.insert(msisdn);
    }

    pub fn is_registered(&self, msisdn: &Msisdn) -> bool {
        self.subscribers.contains(msisdn)
    }

    fn schedule(&mut self, at_ms: u64, event: LinkEvent) {
        let order = self.next_order;
        self.next_order += 1;
        self.queue.push(ScheduledEvent {
            at_ms,
            order,
            event,
        });
    }

    /// Hands an SMS to the network. Returns how many deliveries were scheduled.
    pub fn submit_sms(&mut self, msg: SmsMessage) -> usize {
        self.stats.sms_submitted += 1;
        let times = submit(&msg, &self.params, &mut self.rng);
        if !self.is_registered(msg.to()) {
            self.dead_letters.push(DeadLetter {
                at_ms: msg.submitted_at_ms(),
                kind: "sms",
                from: msg.from().clone(),
                to: msg.to().clone(),
            });
            return 0;
        }
        match times.len() {
            0 => self.stats.sms_dropped += 1,
            2 => self.stats.sms_duplicated += 1,
            _ => {}
        }
        for &t in &times {
            self.schedule(t, LinkEvent::SmsDelivered(msg.clone()));
        }
        times.len()
    }

    /// Rings `to` after the call-setup delay. Calls to unknown numbers are
    /// dead-lettered and `false` is returned.
    pub fn place_call(&mut self, from: Msisdn, to: Msisdn, now_ms: u64) -> bool {
        if !self.is_registered(&to) {
            self.dead_letters.push(DeadLetter {
                at_ms: now_ms,
                kind: "call",
                from,
                to,
            });
            return false;
        }
        let at = now_ms + self.params.call_setup_ms;
        self.schedule(at, LinkEvent::Ring { from, to });
        true
    }

    pub fn next_event_at(&self) -> Option<u64> {
        self.queue.peek().map(|e| e.at_ms)
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Pops the earliest event if it is due at or before `now_ms`.
    pub fn pop_due(&mut self, now_ms: u64) -> Option<ScheduledEvent> {
        if self.queue.peek()?.at_ms > now_ms {
            return None;
        }
        let ev = self.queue.pop()?;
        match &ev.event {
            LinkEvent::SmsDelivered(msg) => {
                self.stats.sms_delivered += 1;
                self.trace.push((ev.at_ms, msg.clone()));
            }
            LinkEvent::Ring { .. } => self.stats.rings_delivered += 1,
        }
        Some(ev)
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    pub fn dead_letters(&self) -> &[DeadLetter] {
        &self.dead_letters
    }

    /// Delivered messages in delivery order.
    pub fn delivered(&self) -> &[(u64, SmsMessage)] {
        &self.trace
    }

    /// One `<tMs> <from> <to> <payload>` line per delivered message.
    pub fn trace_lines(&self) -> impl Iterator<Item = String> + '_ {
        self.trace
            .iter()
            .map(|(t, m)| format!("{t} {} {} {}", m.from(), m.to(), m.payload()))
    }
}
