//! Deterministic message-passing substrate for the distributed solvers.
//!
//! The bus is single-threaded and round-synchronous: agents are stepped in
//! id order, messages sent during round `n` are delivered at round `n + 1`,
//! and delivery order is fixed by (round, sender id, send order). Every
//! envelope that crosses an agent boundary goes through [`Bus::send`], which
//! is where message counts and byte totals are accounted. A broadcast is
//! counted as one point-to-point message per recipient.
//!
//! Payloads are serialized JSON using the same records as the external file
//! formats, so byte counts are meaningful and stable across runs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::BusError;
use crate::ids::UserId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MsgKind {
    Announce,
    Bid,
    Award,
    BundleState,
    DcopUtil,
    DcopValue,
    PlanReport,
}

impl MsgKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MsgKind::Announce => "announce",
            MsgKind::Bid => "bid",
            MsgKind::Award => "award",
            MsgKind::BundleState => "bundle-state",
            MsgKind::DcopUtil => "dcop-util",
            MsgKind::DcopValue => "dcop-value",
            MsgKind::PlanReport => "plan-report",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Envelope {
    pub from: UserId,
    pub to: UserId,
    pub kind: MsgKind,
    pub payload: Vec<u8>,
}

impl Envelope {
    pub fn new(
        from: impl Into<UserId>,
        to: impl Into<UserId>,
        kind: MsgKind,
        payload: &impl Serialize,
    ) -> Result<Self, BusError> {
        let payload = serde_json::to_vec(payload).map_err(|e| BusError::Payload(e.to_string()))?;
        Ok(Envelope {
            from: from.into(),
            to: to.into(),
            kind,
            payload,
        })
    }

    pub fn size(&self) -> usize {
        self.payload.len()
    }

    pub fn decode<'a, T: serde::Deserialize<'a>>(&'a self) -> Result<T, BusError> {
        serde_json::from_slice(&self.payload).map_err(|e| BusError::Payload(e.to_string()))
    }
}

/// One line of the exported trace: everything about a delivery except the
/// payload bytes (those still feed the trace hash).
#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub round: u64,
    pub from: UserId,
    pub to: UserId,
    pub kind: MsgKind,
    pub size: usize,
}

/// Monotone counters over one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Metrics {
    pub message_count: u64,
    pub message_bytes: u64,
}

pub struct Bus {
    registered: BTreeSet<UserId>,
    queues: BTreeMap<UserId, VecDeque<Envelope>>,
    metrics: Metrics,
    trace: Vec<TraceRecord>,
    payloads: Vec<Vec<u8>>,
    hasher: Sha256,
    round: u64,
}

impl Default for Bus {
    fn default() -> Self {
        Self::new()
    }
}

impl Bus {
    pub fn new() -> Self {
        Bus {
            registered: BTreeSet::new(),
            queues: BTreeMap::new(),
            metrics: Metrics::default(),
            trace: Vec::new(),
            payloads: Vec::new(),
            hasher: Sha256::new(),
            round: 0,
        }
    }

    pub fn register(&mut self, agent: impl Into<UserId>) {
        let agent = agent.into();
        self.queues.entry(agent.clone()).or_default();
        self.registered.insert(agent);
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn advance_round(&mut self) {
        self.round += 1;
    }

    /// Enqueues an envelope for its recipient and accounts for it.
    pub fn send(&mut self, envelope: Envelope) -> Result<(), BusError> {
        if !self.registered.contains(&envelope.to) {
            return Err(BusError::UnknownRecipient(envelope.to.clone()));
        }
        self.metrics.message_count += 1;
        self.metrics.message_bytes += envelope.size() as u64;
        self.hasher.update(self.round.to_le_bytes());
        self.hasher.update(envelope.from.as_str().as_bytes());
        self.hasher.update([0u8]);
        self.hasher.update(envelope.to.as_str().as_bytes());
        self.hasher.update([0u8]);
        self.hasher.update(envelope.kind.as_str().as_bytes());
        self.hasher.update([0u8]);
        self.hasher.update(&envelope.payload);
        self.trace.push(TraceRecord {
            round: self.round,
            from: envelope.from.clone(),
            to: envelope.to.clone(),
            kind: envelope.kind,
            size: envelope.size(),
        });
        self.payloads.push(envelope.payload.clone());
        self.queues
            .get_mut(&envelope.to)
            .expect("registered above")
            .push_back(envelope);
        Ok(())
    }

    /// Sends the same payload to every recipient; counted per recipient.
    pub fn broadcast(
        &mut self,
        from: &UserId,
        recipients: &[UserId],
        kind: MsgKind,
        payload: &impl Serialize,
    ) -> Result<(), BusError> {
        let bytes = serde_json::to_vec(payload).map_err(|e| BusError::Payload(e.to_string()))?;
        for to in recipients {
            self.send(Envelope {
                from: from.clone(),
                to: to.clone(),
                kind,
                payload: bytes.clone(),
            })?;
        }
        Ok(())
    }

    /// Drains everything queued for `agent`.
    pub fn deliver(&mut self, agent: &UserId) -> Vec<Envelope> {
        self.queues
            .get_mut(agent)
            .map(|q| q.drain(..).collect())
            .unwrap_or_default()
    }

    pub fn pending(&self) -> usize {
        self.queues.values().map(|q| q.len()).sum()
    }

    pub fn metrics(&self) -> Metrics {
        self.metrics
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// Payload bytes aligned with [`Bus::trace`], kept for post-run
    /// inspection (privacy assertions, debugging); not part of the exported
    /// trace.
    pub fn payloads(&self) -> &[Vec<u8>] {
        &self.payloads
    }

    /// Hex digest over every (round, sender, recipient, kind, payload) seen
    /// so far; two identical runs produce identical digests.
    pub fn trace_hash(&self) -> String {
        let digest = self.hasher.clone().finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Message counts per kind, for protocol-shape assertions.
    pub fn count_of(&self, kind: MsgKind) -> usize {
        self.trace.iter().filter(|r| r.kind == kind).count()
    }

    pub fn write_trace_jsonl(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        for record in &self.trace {
            serde_json::to_writer(&mut w, record)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// A synchronous agent: consumes this round's inbox, emits next round's
/// messages. Implementations must be pure state machines so runs stay
/// deterministic.
pub trait RoundAgent {
    fn id(&self) -> &UserId;
    fn step(&mut self, round: u64, inbox: Vec<Envelope>) -> Result<Vec<Envelope>, BusError>;
}

/// Runs synchronous rounds until quiescence (a round in which nothing is
/// delivered and nothing is sent) or the round cap. Returns the number of
/// rounds executed.
pub fn run_rounds(
    bus: &mut Bus,
    agents: &mut [&mut dyn RoundAgent],
    round_cap: u64,
) -> Result<u64, BusError> {
    agents.sort_by(|a, b| a.id().cmp(b.id()));
    for agent in agents.iter() {
        bus.register(agent.id().clone());
    }
    let mut rounds = 0;
    loop {
        if rounds >= round_cap {
            return Err(BusError::RoundCapExceeded(round_cap));
        }
        let mut activity = false;
        let round = bus.round();
        let mut outboxes = Vec::new();
        for agent in agents.iter_mut() {
            let inbox = bus.deliver(agent.id());
            activity |= !inbox.is_empty();
            let outbox = agent.step(round, inbox)?;
            activity |= !outbox.is_empty();
            outboxes.push(outbox);
        }
        for outbox in outboxes {
            for envelope in outbox {
                bus.send(envelope)?;
            }
        }
        bus.advance_round();
        rounds += 1;
        if !activity {
            return Ok(rounds);
        }
    }
}
