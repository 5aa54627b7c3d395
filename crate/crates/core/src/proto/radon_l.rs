//! Replication-based protocol: two-phase writes and reads (the read writes
//! back what it found), and a single-phase repair that rebuilds a crashed
//! server from a majority.

use crate::proto::{
    broadcast, ceil_div, majority, ClientEvent, ClientProcess, Output, RepairEvent, Request, Responses,
    ServerProcess, Stored,
};
use crate::types::{max_tag, next_tag, Message, OpId, Payload, Phase, ProcessId, ServerStatus, Tag, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuorumsL {
    pub majority: usize,
    /// `⌈(3n+1)/4⌉`, the number of put-data acks a client waits for.
    pub put_quorum: usize,
}

pub fn quorum_sizes_l(n: usize) -> QuorumsL {
    QuorumsL { majority: majority(n), put_quorum: ceil_div(3 * n + 1, 4) }
}

/// Picks the response with the highest tag.
pub(crate) fn best_pair<'a>(pairs: impl Iterator<Item = &'a (Tag, Value)>) -> Option<(Tag, Value)> {
    let mut best: Option<&(Tag, Value)> = None;
    for p in pairs {
        if best.is_none_or(|b| p.0 > b.0) {
            best = Some(p);
        }
    }
    best.cloned()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WriteStateL {
    Done,
    GetTag { op: OpId, value: Value, tags: Responses<Tag> },
    PutData { op: OpId, tag: Tag, acks: Responses<()> },
}

#[derive(Clone, Debug)]
pub struct WriterL {
    id: ProcessId,
    n: usize,
    quorums: QuorumsL,
    pub state: WriteStateL,
}

impl WriterL {
    pub fn new(id: ProcessId, n: usize) -> Self {
        Self { id, n, quorums: quorum_sizes_l(n), state: WriteStateL::Done }
    }

    pub fn step(&mut self, event: ClientEvent) -> Vec<Output> {
        match (&mut self.state, event) {
            (WriteStateL::Done, ClientEvent::Invoke { op, request: Request::Write(value) }) => {
                self.state = WriteStateL::GetTag { op, value, tags: Responses::new(op, Phase::Query) };
                vec![broadcast(self.id, self.n, op, Phase::Query, Payload::QueryTag)]
            }
            (WriteStateL::GetTag { op, value, tags }, ClientEvent::Response(msg)) => {
                let Payload::TagResp { tag } = msg.payload else { return vec![] };
                if !tags.matches(&msg) || !tags.record(msg.sender, tag) || tags.len() < self.quorums.majority {
                    return vec![];
                }
                let t_w = next_tag(max_tag(tags.values().copied()).expect("quorum is nonempty"), self.id);
                let (op, value) = (*op, value.clone());
                self.state = WriteStateL::PutData { op, tag: t_w, acks: Responses::new(op, Phase::Put) };
                vec![broadcast(self.id, self.n, op, Phase::Put, Payload::PutData { tag: t_w, value })]
            }
            (WriteStateL::PutData { op, tag, acks }, ClientEvent::Response(msg)) => {
                if msg.payload != Payload::Ack
                    || !acks.matches(&msg)
                    || !acks.record(msg.sender, ())
                    || acks.len() < self.quorums.put_quorum
                {
                    return vec![];
                }
                let out = vec![Output::Respond { op: *op, tag: *tag, value: None }];
                self.state = WriteStateL::Done;
                out
            }
            _ => vec![],
        }
    }
}

impl ClientProcess for WriterL {
    fn id(&self) -> ProcessId {
        self.id
    }

    fn step(&mut self, event: ClientEvent) -> Vec<Output> {
        WriterL::step(self, event)
    }

    fn is_idle(&self) -> bool {
        self.state == WriteStateL::Done
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReadStateL {
    Done,
    GetData { op: OpId, responses: Responses<(Tag, Value)> },
    PutData { op: OpId, tag: Tag, value: Value, acks: Responses<()> },
}

#[derive(Clone, Debug)]
pub struct ReaderL {
    id: ProcessId,
    n: usize,
    quorums: QuorumsL,
    pub state: ReadStateL,
}

impl ReaderL {
    pub fn new(id: ProcessId, n: usize) -> Self {
        Self { id, n, quorums: quorum_sizes_l(n), state: ReadStateL::Done }
    }

    pub fn step(&mut self, event: ClientEvent) -> Vec<Output> {
        match (&mut self.state, event) {
            (ReadStateL::Done, ClientEvent::Invoke { op, request: Request::Read }) => {
                self.state = ReadStateL::GetData { op, responses: Responses::new(op, Phase::Query) };
                vec![broadcast(self.id, self.n, op, Phase::Query, Payload::QueryTagData)]
            }
            (ReadStateL::GetData { op, responses }, ClientEvent::Response(msg)) => {
                let Payload::TagDataResp { tag, value } = msg.payload.clone() else { return vec![] };
                if !responses.matches(&msg)
                    || !responses.record(msg.sender, (tag, value))
                    || responses.len() < self.quorums.majority
                {
                    return vec![];
                }
                let (tag, value) = best_pair(responses.values()).expect("quorum is nonempty");
                let op = *op;
                self.state =
                    ReadStateL::PutData { op, tag, value: value.clone(), acks: Responses::new(op, Phase::Put) };
                vec![broadcast(self.id, self.n, op, Phase::Put, Payload::PutData { tag, value })]
            }
            (ReadStateL::PutData { op, tag, value, acks }, ClientEvent::Response(msg)) => {
                if msg.payload != Payload::Ack
                    || !acks.matches(&msg)
                    || !acks.record(msg.sender, ())
                    || acks.len() < self.quorums.put_quorum
                {
                    return vec![];
                }
                let out = vec![Output::Respond { op: *op, tag: *tag, value: Some(value.clone()) }];
                self.state = ReadStateL::Done;
                out
            }
            _ => vec![],
        }
    }
}

impl ClientProcess for ReaderL {
    fn id(&self) -> ProcessId {
        self.id
    }

    fn step(&mut self, event: ClientEvent) -> Vec<Output> {
        ReaderL::step(self, event)
    }

    fn is_idle(&self) -> bool {
        self.state == ReadStateL::Done
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerStateL {
    pub t_loc: Tag,
    pub v_loc: Value,
    pub status: ServerStatus,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepairStateL {
    pub op: OpId,
    pub responses: Responses<(Tag, Value)>,
}

/// Repair bookkeeping shared with RADON_S: collect `(tag, value)` pairs
/// from a majority and keep the one with the highest tag.
pub(crate) fn repair_collect(
    repair: &mut Option<RepairStateL>,
    msg: &Message,
    majority: usize,
) -> Option<(OpId, (Tag, Value))> {
    let st = repair.as_mut()?;
    let Payload::TagDataResp { tag, value } = &msg.payload else { return None };
    if !st.responses.matches(msg) || !st.responses.record(msg.sender, (*tag, value.clone())) {
        return None;
    }
    if st.responses.len() < majority {
        return None;
    }
    let best = best_pair(st.responses.values()).expect("quorum is nonempty");
    let op = st.op;
    *repair = None;
    Some((op, best))
}

#[derive(Clone, Debug)]
pub struct ServerL {
    id: ProcessId,
    n: usize,
    initial: Value,
    pub state: ServerStateL,
    pub repair_state: Option<RepairStateL>,
}

impl ServerL {
    pub fn new(id: ProcessId, n: usize, value_len: usize) -> Self {
        let initial = Value::initial(value_len);
        Self {
            id,
            n,
            state: ServerStateL { t_loc: Tag::INITIAL, v_loc: initial.clone(), status: ServerStatus::Active },
            initial,
            repair_state: None,
        }
    }

    /// Request handlers. Only an active server answers.
    pub fn handle(&mut self, msg: &Message) -> Vec<Output> {
        if matches!(msg.payload, Payload::TagDataResp { .. }) && msg.phase == Phase::Repair {
            return self.repair_step(RepairEvent::Response(msg.clone()));
        }
        if self.state.status != ServerStatus::Active {
            return vec![];
        }
        let st = &mut self.state;
        let reply = match &msg.payload {
            Payload::QueryTag => Payload::TagResp { tag: st.t_loc },
            Payload::QueryTagData | Payload::RepairTagData => {
                Payload::TagDataResp { tag: st.t_loc, value: st.v_loc.clone() }
            }
            Payload::PutData { tag, value } => {
                if *tag > st.t_loc {
                    st.t_loc = *tag;
                    st.v_loc = value.clone();
                }
                Payload::Ack
            }
            other => panic!("configuration error: radon-l server received {}", other.kind()),
        };
        vec![Output::Send(msg.reply(reply))]
    }

    pub fn repair_step(&mut self, event: RepairEvent) -> Vec<Output> {
        match event {
            RepairEvent::Trigger { op } => {
                if self.state.status != ServerStatus::Crashed {
                    return vec![];
                }
                self.state =
                    ServerStateL { t_loc: Tag::INITIAL, v_loc: self.initial.clone(), status: ServerStatus::Repair };
                self.repair_state = Some(RepairStateL { op, responses: Responses::new(op, Phase::Repair) });
                vec![broadcast(self.id, self.n, op, Phase::Repair, Payload::RepairTagData)]
            }
            RepairEvent::Response(msg) => {
                if self.state.status != ServerStatus::Repair {
                    return vec![];
                }
                let Some((op, (tag, value))) = repair_collect(&mut self.repair_state, &msg, majority(self.n))
                else {
                    return vec![];
                };
                self.state = ServerStateL { t_loc: tag, v_loc: value, status: ServerStatus::Active };
                vec![Output::RepairDone { op }]
            }
        }
    }
}

impl ServerProcess for ServerL {
    fn id(&self) -> ProcessId {
        self.id
    }

    fn status(&self) -> ServerStatus {
        self.state.status
    }

    fn on_message(&mut self, msg: &Message) -> Vec<Output> {
        self.handle(msg)
    }

    fn crash(&mut self) {
        self.state = ServerStateL { t_loc: Tag::INITIAL, v_loc: self.initial.clone(), status: ServerStatus::Crashed };
        self.repair_state = None;
    }

    fn repair(&mut self, event: RepairEvent) -> Vec<Output> {
        self.repair_step(event)
    }

    fn stored(&self) -> Stored {
        match self.state.status {
            ServerStatus::Crashed => Stored::Nothing,
            _ => Stored::Replica { tag: self.state.t_loc, value: self.state.v_loc.clone() },
        }
    }
}
