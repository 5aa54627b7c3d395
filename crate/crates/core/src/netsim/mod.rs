//! Deterministic discrete-event simulation of clients and servers over an
//! asynchronous network with crash and repair injection.
//!
//! Everything random (delays, tie-breaks, fault draws, values) comes from a
//! single seeded generator, so a configuration and seed fully determine the
//! trace. Each delivery runs the recipient's handler and applies all its
//! outputs before the next event is popped.

mod windows;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{Codec, CodecParams};
use crate::config::{Condition, ConfigError, DeliveryPolicy, FaultAction, FaultSpec, ScenarioConfig};
use crate::proto::radon_c::{ReaderC, ServerC, WriterC};
use crate::proto::radon_l::{ReaderL, ServerL, WriterL};
use crate::proto::radon_s::{ClientS, ServerS};
use crate::proto::{ClientEvent, ClientProcess, Output, Protocol, RepairEvent, Request, ServerProcess, Stored};
use crate::trace::{DeferredKind, Event, OpKind, Trace, TraceMeta};
use crate::types::{Message, OpId, Payload, ProcessId, ProcessKind, ServerStatus, Value};

use windows::Windows;

/// One planned step of the theorem-1 adversary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Theorem1Step {
    pub server: ProcessId,
    pub crash_at: u64,
    /// The writer's first message to `server` is held until this tick.
    pub deliver_at: u64,
    pub repair_at: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Theorem1Plan {
    pub steps: Vec<Theorem1Step>,
    pub writer_start: u64,
    pub reader_start: u64,
}

/// Crash and repair the servers one at a time, each while the writer's
/// first message to it is still in flight.
pub fn theorem1_schedule(n: usize) -> Theorem1Plan {
    let steps = (1..=n as u64)
        .map(|i| {
            let base = 100 * i;
            Theorem1Step {
                server: ProcessId::server(i as u32),
                crash_at: base + 5,
                deliver_at: base + 10,
                repair_at: base + 20,
            }
        })
        .collect();
    Theorem1Plan { steps, writer_start: 0, reader_start: 100 * (n as u64 + 1) + 50 }
}

#[derive(Clone, Debug)]
enum Item {
    Deliver { msg: Message, group: Option<u64>, reply_window: Option<u64> },
    Invoke { client: usize },
    Crash { server: usize, downtime: Option<u64> },
    Repair { server: usize },
    CrashClient { client: usize },
    ArmSendCrash { process: ProcessId, sends: usize },
    Burst,
}

#[derive(Debug)]
struct Scheduled {
    tick: u64,
    tiebreak: u64,
    seq: u64,
    item: Item,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}
impl Scheduled {
    fn key(&self) -> (u64, u64, u64) {
        (self.tick, self.tiebreak, self.seq)
    }
}

struct ClientSlot {
    proc: Box<dyn ClientProcess>,
    crashed: bool,
    issued: usize,
    busy: bool,
}

#[derive(Clone, Copy, Debug)]
struct DeferredCrash {
    downtime: Option<u64>,
    repair_requested: bool,
}

struct World {
    cfg: ScenarioConfig,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    tick: u64,
    clients: Vec<ClientSlot>,
    servers: Vec<Box<dyn ServerProcess>>,
    last_snapshot: Vec<(ServerStatus, Stored)>,
    /// Tick at which each server last became active.
    active_since: Vec<u64>,
    deferred: BTreeMap<usize, DeferredCrash>,
    send_crash: BTreeMap<ProcessId, usize>,
    windows: Windows,
    next_op: u64,
    next_group: u64,
    /// Held first-group-send deliveries of the theorem-1 adversary.
    holds: Option<(ProcessId, BTreeMap<ProcessId, u64>)>,
    /// Latency class of each directed link, drawn on first use.
    slow_links: BTreeMap<(ProcessId, ProcessId), bool>,
    trace: Trace,
}

impl World {
    fn new(cfg: &ScenarioConfig) -> Self {
        let n = cfg.n;
        let len = cfg.value_len();
        let ids: Vec<ProcessId> = (1..=cfg.writers as u32)
            .map(ProcessId::writer)
            .chain((1..=cfg.readers as u32).map(ProcessId::reader))
            .collect();
        let (clients, servers): (Vec<Box<dyn ClientProcess>>, Vec<Box<dyn ServerProcess>>) = match cfg.protocol {
            Protocol::RadonL => (
                ids.iter()
                    .map(|&id| -> Box<dyn ClientProcess> {
                        match id.kind {
                            ProcessKind::Writer => Box::new(WriterL::new(id, n)),
                            _ => Box::new(ReaderL::new(id, n)),
                        }
                    })
                    .collect(),
                (1..=n as u32)
                    .map(|i| -> Box<dyn ServerProcess> { Box::new(ServerL::new(ProcessId::server(i), n, len)) })
                    .collect(),
            ),
            Protocol::RadonC => {
                let codec = Arc::new(
                    Codec::new(CodecParams::new(n, cfg.code_k()).expect("validated")).expect("validated"),
                );
                (
                    ids.iter()
                        .map(|&id| -> Box<dyn ClientProcess> {
                            match id.kind {
                                ProcessKind::Writer => Box::new(WriterC::new(id, codec.clone())),
                                _ => Box::new(ReaderC::new(id, codec.clone())),
                            }
                        })
                        .collect(),
                    (1..=n as u32)
                        .map(|i| -> Box<dyn ServerProcess> {
                            Box::new(ServerC::new(ProcessId::server(i), codec.clone(), cfg.delta, len))
                        })
                        .collect(),
                )
            }
            Protocol::RadonS => (
                ids.iter().map(|&id| -> Box<dyn ClientProcess> { Box::new(ClientS::new(id, n)) }).collect(),
                (1..=n as u32)
                    .map(|i| -> Box<dyn ServerProcess> { Box::new(ServerS::new(ProcessId::server(i), n, len)) })
                    .collect(),
            ),
        };
        let meta = TraceMeta {
            protocol: cfg.protocol,
            n,
            k: cfg.code_k(),
            delta: cfg.delta,
            value_len: len,
            condition: cfg.condition,
            seed: cfg.seed,
            steps: 0,
            budget_exhausted: false,
            starved_crashes: 0,
        };
        let last_snapshot = servers.iter().map(|s| (s.status(), s.stored())).collect();
        Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            queue: BinaryHeap::new(),
            seq: 0,
            tick: 0,
            clients: clients.into_iter().map(|proc| ClientSlot { proc, crashed: false, issued: 0, busy: false }).collect(),
            servers,
            last_snapshot,
            active_since: vec![0; n],
            deferred: BTreeMap::new(),
            send_crash: BTreeMap::new(),
            windows: Windows::default(),
            next_op: 0,
            next_group: 0,
            holds: None,
            slow_links: BTreeMap::new(),
            trace: Trace::new(meta),
            cfg: cfg.clone(),
        }
    }

    fn enforcing(&self) -> bool {
        self.cfg.condition != Condition::None
    }

    fn schedule(&mut self, tick: u64, item: Item) {
        let tiebreak = match self.cfg.delivery {
            DeliveryPolicy::Fifo => 0,
            _ => self.rng.gen(),
        };
        self.seq += 1;
        self.queue.push(Reverse(Scheduled { tick, tiebreak, seq: self.seq, item }));
    }

    fn delay(&mut self, from: ProcessId, to: ProcessId) -> u64 {
        let max = self.cfg.max_delay;
        match self.cfg.delivery {
            DeliveryPolicy::SlowLinks => {
                let rng = &mut self.rng;
                let slow = *self.slow_links.entry((from, to)).or_insert_with(|| rng.gen_bool(0.25));
                if slow {
                    self.rng.gen_range(max..=8 * max)
                } else {
                    self.rng.gen_range(1..=max)
                }
            }
            DeliveryPolicy::Fifo => 1,
            DeliveryPolicy::Random => self.rng.gen_range(1..=max),
            DeliveryPolicy::MaxReorder => {
                if self.rng.gen_bool(0.1) {
                    self.rng.gen_range(max..=16 * max)
                } else {
                    self.rng.gen_range(1..=max)
                }
            }
        }
    }

    fn record(&mut self, event: Event) {
        self.trace.push(self.tick, event);
    }

    fn snapshot(&mut self, slot: usize) {
        let now = (self.servers[slot].status(), self.servers[slot].stored());
        if now != self.last_snapshot[slot] {
            self.record(Event::Snapshot { server: self.servers[slot].id(), status: now.0, stored: now.1.clone() });
            self.last_snapshot[slot] = now;
        }
    }

    fn client_slot(&self, id: ProcessId) -> Option<usize> {
        match id.kind {
            ProcessKind::Writer => Some(id.index as usize - 1),
            ProcessKind::Reader => Some(self.cfg.writers + id.index as usize - 1),
            ProcessKind::Server => None,
        }
    }

    fn non_active(&self) -> usize {
        self.servers.iter().filter(|s| s.status() != ServerStatus::Active).count()
    }

    fn setup(&mut self) {
        for slot in 0..self.servers.len() {
            let (status, stored) = self.last_snapshot[slot].clone();
            self.record(Event::Snapshot { server: self.servers[slot].id(), status, stored });
        }
        let think = self.cfg.think_time;
        let mut starts: Vec<u64> = (0..self.clients.len()).map(|_| 0).collect();
        for s in starts.iter_mut() {
            *s = self.rng.gen_range(0..=think);
        }
        let fault = self.cfg.fault.clone();
        match fault {
            FaultSpec::Theorem1 => {
                let plan = theorem1_schedule(self.cfg.n);
                starts[0] = plan.writer_start;
                starts[self.cfg.writers] = plan.reader_start;
                let mut holds = BTreeMap::new();
                for step in &plan.steps {
                    let slot = step.server.index as usize - 1;
                    self.schedule(step.crash_at, Item::Crash { server: slot, downtime: None });
                    self.schedule(step.repair_at, Item::Repair { server: slot });
                    holds.insert(step.server, step.deliver_at);
                }
                self.holds = Some((ProcessId::writer(1), holds));
            }
            FaultSpec::Burst { period, .. } => {
                if period > 0 {
                    self.schedule(period, Item::Burst);
                }
            }
            FaultSpec::Inline { events } => {
                for e in events {
                    let item = match (e.action, e.target.kind) {
                        (FaultAction::Crash, ProcessKind::Server) => {
                            Item::Crash { server: e.target.index as usize - 1, downtime: None }
                        }
                        (FaultAction::Crash, _) => {
                            Item::CrashClient { client: self.client_slot(e.target).expect("client") }
                        }
                        (FaultAction::Repair, ProcessKind::Server) => Item::Repair { server: e.target.index as usize - 1 },
                        // Clients never recover.
                        (FaultAction::Repair, _) => continue,
                        (FaultAction::CrashDuringSend, _) => {
                            Item::ArmSendCrash { process: e.target, sends: e.sends.unwrap_or(0) }
                        }
                    };
                    self.schedule(e.at, item);
                }
            }
            FaultSpec::None | FaultSpec::Random { .. } | FaultSpec::PutCrash { .. } => {}
        }
        for (client, start) in starts.into_iter().enumerate() {
            if self.cfg.ops > 0 {
                self.schedule(start, Item::Invoke { client });
            }
        }
    }

    fn run(mut self) -> Trace {
        self.setup();
        let mut steps = 0u64;
        while let Some(Reverse(next)) = self.queue.pop() {
            if steps >= self.cfg.budget {
                self.trace.meta.budget_exhausted = true;
                break;
            }
            steps += 1;
            self.tick = next.tick;
            self.process(next.item);
        }
        self.trace.meta.steps = steps;
        self.trace.meta.starved_crashes = self.deferred.len();
        self.trace
    }

    fn process(&mut self, item: Item) {
        match item {
            Item::Deliver { msg, group, reply_window } => self.deliver(msg, group, reply_window),
            Item::Invoke { client } => self.invoke(client),
            Item::Crash { server, downtime } => self.request_crash(server, downtime),
            Item::Repair { server } => self.request_repair(server),
            Item::CrashClient { client } => self.crash_client(client),
            Item::ArmSendCrash { process, sends } => {
                self.send_crash.insert(process, sends);
            }
            Item::Burst => self.burst(),
        }
    }

    fn value_for(&mut self, op: OpId) -> Value {
        let mut bytes = vec![0u8; self.cfg.value_len()];
        self.rng.fill(&mut bytes[..]);
        let stamp = (op.0 + 1).to_le_bytes();
        let m = stamp.len().min(bytes.len());
        bytes[..m].copy_from_slice(&stamp[..m]);
        Value::new(bytes)
    }

    fn fresh_op(&mut self) -> OpId {
        let op = OpId(self.next_op);
        self.next_op += 1;
        op
    }

    fn invoke(&mut self, client: usize) {
        let slot = &self.clients[client];
        if slot.crashed || slot.busy || slot.issued >= self.cfg.ops {
            return;
        }
        let id = slot.proc.id();
        let op = self.fresh_op();
        let (kind, request, value) = match id.kind {
            ProcessKind::Writer => {
                let v = self.value_for(op);
                (OpKind::Write, Request::Write(v.clone()), Some(v))
            }
            _ => (OpKind::Read, Request::Read, None),
        };
        self.record(Event::Invoke { op, client: id, kind, value });
        let slot = &mut self.clients[client];
        slot.busy = true;
        slot.issued += 1;
        let out = slot.proc.step(ClientEvent::Invoke { op, request });
        self.apply(id, out, None);
    }

    fn deliver(&mut self, msg: Message, group: Option<u64>, reply_window: Option<u64>) {
        let to = msg.recipient;
        if let Some(slot) = to.server_slot() {
            if self.servers[slot].status() == ServerStatus::Crashed {
                self.record(Event::Drop { msg });
                return;
            }
            self.record(Event::Deliver { msg: msg.clone() });
            if let Some(w) = reply_window {
                self.windows.reply_consumed(w, msg.sender);
            }
            let out = self.servers[slot].on_message(&msg);
            let tracked = group.and_then(|g| self.windows.consumed(g, to, &out));
            self.apply(to, out, tracked);
            self.snapshot(slot);
            self.close_windows();
            self.random_fault(slot, &msg);
        } else {
            let client = self.client_slot(to).expect("client recipient");
            if self.clients[client].crashed {
                self.record(Event::Drop { msg });
                return;
            }
            self.record(Event::Deliver { msg: msg.clone() });
            if let Some(w) = reply_window {
                self.windows.reply_consumed(w, msg.sender);
            }
            let out = self.clients[client].proc.step(ClientEvent::Response(msg));
            self.apply(to, out, None);
            self.close_windows();
            let rate = self.cfg.client_crash_rate;
            if rate > 0.0 && self.rng.gen_bool(rate) {
                self.crash_client(client);
            }
        }
    }

    /// Applies one transition's outputs. `tracked` names the window whose
    /// sender's replies must be followed until consumed.
    fn apply(&mut self, actor: ProcessId, outputs: Vec<Output>, tracked: Option<(u64, ProcessId)>) {
        for out in outputs {
            match out {
                Output::Send(msg) => {
                    let reply_window = tracked.filter(|(_, s)| *s == msg.recipient).map(|(w, _)| w);
                    self.record(Event::Send { msg: msg.clone(), group: None });
                    let at = self.tick + self.delay(msg.sender, msg.recipient);
                    self.schedule(at, Item::Deliver { msg, group: None, reply_window });
                }
                Output::GroupSend(msgs) => {
                    if self.group_send(actor, msgs) {
                        // The sender crashed part-way; the rest of the step is lost.
                        return;
                    }
                }
                Output::Respond { op, tag, value } => {
                    self.record(Event::Respond { op, client: actor, tag, value });
                    let client = self.client_slot(actor).expect("only clients respond");
                    self.clients[client].busy = false;
                    if self.clients[client].issued < self.cfg.ops {
                        let think = self.cfg.think_time;
                        let wait = self.rng.gen_range(think..=2 * think);
                        self.schedule(self.tick + wait, Item::Invoke { client });
                    }
                }
                Output::Stuck { op } => self.record(Event::Stuck { op, client: actor }),
                Output::RepairDone { op } => {
                    self.record(Event::RepairEnd { server: actor, op });
                    let slot = actor.server_slot().expect("only servers repair");
                    self.active_since[slot] = self.tick;
                    self.snapshot(slot);
                    self.retry_deferred();
                }
            }
        }
    }

    /// Returns true if the sender crashed during the send.
    fn group_send(&mut self, sender: ProcessId, msgs: Vec<Message>) -> bool {
        let group = self.next_group;
        self.next_group += 1;
        if let Some(sends) = self.send_crash.remove(&sender) {
            for msg in msgs.into_iter().take(sends) {
                self.send_one(msg, group);
            }
            match sender.server_slot() {
                Some(slot) => self.do_crash(slot, None),
                None => {
                    let c = self.client_slot(sender).expect("client");
                    self.crash_client(c);
                }
            }
            return true;
        }
        if self.enforcing() {
            let needed = self.cfg.protected_count();
            let mut candidates: Vec<usize> =
                (0..self.servers.len()).filter(|&s| self.servers[s].status() == ServerStatus::Active).collect();
            if candidates.len() < needed {
                self.record(Event::ConditionViolated { group, sender, active: candidates.len(), needed });
            } else {
                candidates.sort_by_key(|&s| (self.active_since[s], s));
                candidates.truncate(needed);
                let protected: Vec<ProcessId> = candidates.iter().map(|&s| ProcessId::server(s as u32 + 1)).collect();
                let n2 = self.cfg.condition == Condition::N2;
                let window = self.windows.open(group, sender, &protected, n2);
                self.record(Event::WindowOpen { window, group, sender, protected });
            }
        }
        let held = match &mut self.holds {
            Some((w, holds)) if *w == sender => {
                let h = std::mem::take(holds);
                self.holds = None;
                h
            }
            _ => BTreeMap::new(),
        };
        for msg in msgs {
            match held.get(&msg.recipient) {
                Some(&at) => {
                    self.record(Event::Send { msg: msg.clone(), group: Some(group) });
                    self.schedule(at, Item::Deliver { msg, group: Some(group), reply_window: None });
                }
                None => self.send_one(msg, group),
            }
        }
        false
    }

    fn send_one(&mut self, msg: Message, group: u64) {
        self.record(Event::Send { msg: msg.clone(), group: Some(group) });
        let at = self.tick + self.delay(msg.sender, msg.recipient);
        self.schedule(at, Item::Deliver { msg, group: Some(group), reply_window: None });
    }

    fn crash_allowed(&self, slot: usize) -> bool {
        if !self.enforcing() {
            return true;
        }
        let id = ProcessId::server(slot as u32 + 1);
        if self.windows.protects(id) {
            return false;
        }
        self.servers[slot].status() != ServerStatus::Active || self.non_active() < self.cfg.fault_budget()
    }

    fn request_crash(&mut self, slot: usize, downtime: Option<u64>) {
        if self.servers[slot].status() == ServerStatus::Crashed {
            return;
        }
        if self.crash_allowed(slot) {
            self.do_crash(slot, downtime);
            return;
        }
        if let std::collections::btree_map::Entry::Vacant(e) = self.deferred.entry(slot) {
            e.insert(DeferredCrash { downtime, repair_requested: false });
            self.record(Event::Deferred { server: ProcessId::server(slot as u32 + 1), kind: DeferredKind::Crash });
        }
    }

    fn do_crash(&mut self, slot: usize, downtime: Option<u64>) {
        let id = self.servers[slot].id();
        self.servers[slot].crash();
        self.send_crash.remove(&id);
        self.record(Event::Crash { process: id });
        self.snapshot(slot);
        self.windows.sender_crashed(id);
        if let Some(d) = downtime {
            self.schedule(self.tick + d, Item::Repair { server: slot });
        }
    }

    fn crash_client(&mut self, client: usize) {
        if self.clients[client].crashed {
            return;
        }
        self.clients[client].crashed = true;
        let id = self.clients[client].proc.id();
        self.send_crash.remove(&id);
        self.record(Event::Crash { process: id });
        self.windows.sender_crashed(id);
        self.close_windows();
    }

    fn request_repair(&mut self, slot: usize) {
        if let Some(d) = self.deferred.get_mut(&slot) {
            if !d.repair_requested {
                d.repair_requested = true;
                self.record(Event::Deferred { server: ProcessId::server(slot as u32 + 1), kind: DeferredKind::Repair });
            }
            return;
        }
        if self.servers[slot].status() != ServerStatus::Crashed {
            return;
        }
        let op = self.fresh_op();
        let id = self.servers[slot].id();
        self.record(Event::RepairStart { server: id, op });
        let out = self.servers[slot].repair(RepairEvent::Trigger { op });
        self.snapshot(slot);
        self.apply(id, out, None);
    }

    fn close_windows(&mut self) {
        let closed = self.windows.close_finished();
        if closed.is_empty() {
            return;
        }
        for w in closed {
            self.record(Event::WindowClose { window: w });
        }
        self.retry_deferred();
    }

    fn retry_deferred(&mut self) {
        let pending: Vec<usize> = self.deferred.keys().copied().collect();
        for slot in pending {
            if !self.crash_allowed(slot) {
                continue;
            }
            let d = self.deferred.remove(&slot).expect("pending");
            if self.servers[slot].status() == ServerStatus::Crashed {
                continue;
            }
            self.do_crash(slot, d.downtime);
            if d.repair_requested && d.downtime.is_none() {
                self.schedule(self.tick + 1, Item::Repair { server: slot });
            }
        }
    }

    fn random_fault(&mut self, slot: usize, consumed: &Message) {
        let (rate, max_down, downtime) = match self.cfg.fault {
            FaultSpec::Random { rate, max_down, downtime } => (rate, max_down, downtime),
            FaultSpec::PutCrash { rate, max_down, downtime }
                if matches!(consumed.payload, Payload::PutData { .. } | Payload::CodeElements { .. }) =>
            {
                (rate, max_down, downtime)
            }
            _ => return,
        };
        if self.servers[slot].status() != ServerStatus::Active || rate <= 0.0 {
            return;
        }
        if !self.rng.gen_bool(rate) {
            return;
        }
        let cap = max_down.unwrap_or(self.cfg.n.div_ceil(2).saturating_sub(1));
        if self.non_active() >= cap {
            return;
        }
        let downtime = self.rng.gen_range(1..=downtime.unwrap_or(2 * self.cfg.max_delay).max(1));
        self.request_crash(slot, Some(downtime));
    }

    fn burst(&mut self) {
        let FaultSpec::Burst { period, size, downtime } = self.cfg.fault else { return };
        let mut active: Vec<usize> =
            (0..self.servers.len()).filter(|&s| self.servers[s].status() == ServerStatus::Active).collect();
        for _ in 0..size.min(active.len()) {
            let i = self.rng.gen_range(0..active.len());
            let slot = active.swap_remove(i);
            self.request_crash(slot, Some(downtime.max(1)));
        }
        // Stop once nothing else is pending, or stuck clients would keep the run alive forever.
        let work_left = self.clients.iter().any(|c| !c.crashed && (c.busy || c.issued < self.cfg.ops));
        if work_left && !self.queue.is_empty() {
            self.schedule(self.tick + period, Item::Burst);
        }
    }
}

/// Runs one scenario to quiescence or until the step budget runs out.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Trace, ConfigError> {
    cfg.validate()?;
    Ok(World::new(cfg).run())
}

#[cfg(test)]
mod tests;
