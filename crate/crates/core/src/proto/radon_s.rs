//! Replication with a third, confirming phase. A server acks a confirm only
//! if it still remembers the matching put-data, so an operation cannot
//! finish on servers that lost its data to a crash in between.

use std::collections::BTreeSet;

use crate::proto::radon_l::{best_pair, quorum_sizes_l, repair_collect, QuorumsL, RepairStateL};
use crate::proto::{
    broadcast, majority, ClientEvent, ClientProcess, Output, RepairEvent, Request, Responses, ServerProcess, Stored,
};
use crate::types::{max_tag, next_tag, Message, OpId, Payload, Phase, ProcessId, ServerStatus, Tag, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Reader,
    Writer,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClientStateS {
    Done,
    /// get-tag for a writer (values absent), get-data for a reader.
    Get { op: OpId, value: Option<Value>, responses: Responses<(Tag, Option<Value>)> },
    PutData { op: OpId, tag: Tag, value: Value, acks: Responses<()> },
    Confirm { op: OpId, tag: Tag, value: Value, s_alpha: BTreeSet<ProcessId>, acks: Responses<()> },
}

#[derive(Clone, Debug)]
pub struct ClientS {
    id: ProcessId,
    n: usize,
    role: Role,
    quorums: QuorumsL,
    pub state: ClientStateS,
}

impl ClientS {
    pub fn new(id: ProcessId, n: usize) -> Self {
        let role = if id.kind == crate::types::ProcessKind::Writer { Role::Writer } else { Role::Reader };
        Self { id, n, role, quorums: quorum_sizes_l(n), state: ClientStateS::Done }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn step(&mut self, event: ClientEvent) -> Vec<Output> {
        match (&mut self.state, event) {
            (ClientStateS::Done, ClientEvent::Invoke { op, request }) => {
                let (value, payload) = match (self.role, request) {
                    (Role::Writer, Request::Write(v)) => (Some(v), Payload::QueryTag),
                    (Role::Reader, Request::Read) => (None, Payload::QueryTagData),
                    _ => return vec![],
                };
                self.state = ClientStateS::Get { op, value, responses: Responses::new(op, Phase::Query) };
                vec![broadcast(self.id, self.n, op, Phase::Query, payload)]
            }
            (ClientStateS::Get { op, value, responses }, ClientEvent::Response(msg)) => {
                let got = match (&msg.payload, self.role) {
                    (Payload::TagResp { tag }, Role::Writer) => (*tag, None),
                    (Payload::TagDataResp { tag, value }, Role::Reader) => (*tag, Some(value.clone())),
                    _ => return vec![],
                };
                if !responses.matches(&msg) || !responses.record(msg.sender, got) || responses.len() < self.quorums.majority
                {
                    return vec![];
                }
                let (tag, value) = match self.role {
                    Role::Writer => {
                        let t_star = max_tag(responses.values().map(|(t, _)| *t)).expect("quorum is nonempty");
                        (next_tag(t_star, self.id), value.clone().expect("writer holds its value"))
                    }
                    Role::Reader => {
                        let pairs: Vec<(Tag, Value)> =
                            responses.values().map(|(t, v)| (*t, v.clone().expect("tag-data carries a value"))).collect();
                        best_pair(pairs.iter()).expect("quorum is nonempty")
                    }
                };
                let op = *op;
                self.state = ClientStateS::PutData { op, tag, value: value.clone(), acks: Responses::new(op, Phase::Put) };
                vec![broadcast(self.id, self.n, op, Phase::Put, Payload::PutData { tag, value })]
            }
            (ClientStateS::PutData { op, tag, value, acks }, ClientEvent::Response(msg)) => {
                if msg.payload != Payload::Ack
                    || !acks.matches(&msg)
                    || !acks.record(msg.sender, ())
                    || acks.len() < self.quorums.put_quorum
                {
                    return vec![];
                }
                let (op, tag) = (*op, *tag);
                let s_alpha: BTreeSet<ProcessId> = acks.senders().collect();
                self.state = ClientStateS::Confirm {
                    op,
                    tag,
                    value: value.clone(),
                    s_alpha,
                    acks: Responses::new(op, Phase::Confirm),
                };
                // The confirm round leaves within the same step as the last ack.
                vec![broadcast(self.id, self.n, op, Phase::Confirm, Payload::ConfirmData { tag })]
            }
            (ClientStateS::Confirm { op, tag, value, s_alpha, acks }, ClientEvent::Response(msg)) => {
                if msg.payload != Payload::Ack
                    || !acks.matches(&msg)
                    || !s_alpha.contains(&msg.sender)
                    || !acks.record(msg.sender, ())
                    || acks.len() < self.quorums.majority
                {
                    return vec![];
                }
                let value = (self.role == Role::Reader).then(|| value.clone());
                let out = vec![Output::Respond { op: *op, tag: *tag, value }];
                self.state = ClientStateS::Done;
                out
            }
            _ => vec![],
        }
    }
}

impl ClientProcess for ClientS {
    fn id(&self) -> ProcessId {
        self.id
    }

    fn step(&mut self, event: ClientEvent) -> Vec<Output> {
        ClientS::step(self, event)
    }

    fn is_idle(&self) -> bool {
        self.state == ClientStateS::Done
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerStateS {
    pub t_loc: Tag,
    pub v_loc: Value,
    pub status: ServerStatus,
    /// Put-data received since the last crash, by tag, client and
    /// operation. The operation id keeps a late confirm-data from an earlier
    /// operation of the same client on the same tag from consuming the entry
    /// of a later one.
    pub seen: BTreeSet<(Tag, ProcessId, OpId)>,
}

#[derive(Clone, Debug)]
pub struct ServerS {
    id: ProcessId,
    n: usize,
    initial: Value,
    pub state: ServerStateS,
    pub repair_state: Option<RepairStateL>,
}

impl ServerS {
    pub fn new(id: ProcessId, n: usize, value_len: usize) -> Self {
        let initial = Value::initial(value_len);
        Self { id, n, state: Self::blank(&initial, ServerStatus::Active), initial, repair_state: None }
    }

    fn blank(initial: &Value, status: ServerStatus) -> ServerStateS {
        ServerStateS { t_loc: Tag::INITIAL, v_loc: initial.clone(), status, seen: BTreeSet::new() }
    }

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
                st.seen.insert((*tag, msg.sender, msg.op));
                Payload::Ack
            }
            Payload::ConfirmData { tag } => {
                if !st.seen.remove(&(*tag, msg.sender, msg.op)) {
                    return vec![];
                }
                Payload::Ack
            }
            other => panic!("configuration error: radon-s server received {}", other.kind()),
        };
        vec![Output::Send(msg.reply(reply))]
    }

    pub fn repair_step(&mut self, event: RepairEvent) -> Vec<Output> {
        match event {
            RepairEvent::Trigger { op } => {
                if self.state.status != ServerStatus::Crashed {
                    return vec![];
                }
                self.state = Self::blank(&self.initial, ServerStatus::Repair);
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
                self.state = ServerStateS { t_loc: tag, v_loc: value, status: ServerStatus::Active, seen: BTreeSet::new() };
                vec![Output::RepairDone { op }]
            }
        }
    }
}

impl ServerProcess for ServerS {
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
        self.state = Self::blank(&self.initial, ServerStatus::Crashed);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proto::radon_l::tests::{group, resp, t, val};

    fn writer_to_confirm(n: usize, put_ackers: &[u32]) -> (ClientS, OpId) {
        let w1 = ProcessId::writer(1);
        let mut c = ClientS::new(w1, n);
        let op = OpId(1);
        c.step(ClientEvent::Invoke { op, request: Request::Write(val(5)) });
        for s in 1..=majority(n) as u32 {
            c.step(resp(s, w1, op, Phase::Query, Payload::TagResp { tag: Tag::INITIAL }));
        }
        let mut out = vec![];
        for s in put_ackers {
            out = c.step(resp(*s, w1, op, Phase::Put, Payload::Ack));
        }
        let msgs = group(&out);
        assert!(msgs.iter().all(|m| m.payload == Payload::ConfirmData { tag: t(1, 1) }));
        (c, op)
    }

    #[test]
    fn confirm_counts_only_members_of_s_alpha() {
        let w1 = ProcessId::writer(1);
        let (mut c, op) = writer_to_confirm(5, &[1, 2, 3, 4]);
        let ClientStateS::Confirm { s_alpha, .. } = &c.state else { panic!() };
        assert_eq!(s_alpha.len(), 4);
        assert!(c.step(resp(5, w1, op, Phase::Confirm, Payload::Ack)).is_empty());
        assert!(c.step(resp(1, w1, op, Phase::Confirm, Payload::Ack)).is_empty());
        assert!(c.step(resp(2, w1, op, Phase::Confirm, Payload::Ack)).is_empty());
        let out = c.step(resp(3, w1, op, Phase::Confirm, Payload::Ack));
        assert_eq!(out, vec![Output::Respond { op, tag: t(1, 1), value: None }]);
    }

    #[test]
    fn only_outside_acks_leave_operation_pending() {
        let w1 = ProcessId::writer(1);
        let (mut c, op) = writer_to_confirm(5, &[2, 3, 4, 5]);
        assert!(c.step(resp(1, w1, op, Phase::Confirm, Payload::Ack)).is_empty());
        assert!(!c.is_idle());
    }

    #[test]
    fn reader_runs_three_phases() {
        let r1 = ProcessId::reader(1);
        let mut c = ClientS::new(r1, 3);
        let op = OpId(2);
        c.step(ClientEvent::Invoke { op, request: Request::Read });
        c.step(resp(1, r1, op, Phase::Query, Payload::TagDataResp { tag: t(2, 1), value: val(2) }));
        let out = c.step(resp(2, r1, op, Phase::Query, Payload::TagDataResp { tag: t(1, 1), value: val(1) }));
        assert_eq!(group(&out)[0].payload, Payload::PutData { tag: t(2, 1), value: val(2) });
        let mut out = vec![];
        for s in 1..=3 {
            out = c.step(resp(s, r1, op, Phase::Put, Payload::Ack));
        }
        assert_eq!(group(&out).len(), 3);
        c.step(resp(3, r1, op, Phase::Confirm, Payload::Ack));
        let out = c.step(resp(1, r1, op, Phase::Confirm, Payload::Ack));
        assert_eq!(out, vec![Output::Respond { op, tag: t(2, 1), value: Some(val(2)) }]);
    }

    fn from(client: ProcessId, phase: Phase, payload: Payload) -> Message {
        Message { sender: client, recipient: ProcessId::server(1), op: OpId(1), phase, payload }
    }

    fn acked(out: &[Output]) -> bool {
        matches!(out, [Output::Send(m)] if m.payload == Payload::Ack)
    }

    #[test]
    fn server_confirms_once_per_put() {
        let w1 = ProcessId::writer(1);
        let mut s = ServerS::new(ProcessId::server(1), 5, 4);
        assert!(acked(&s.handle(&from(w1, Phase::Put, Payload::PutData { tag: t(2, 1), value: val(2) }))));
        let confirm = from(w1, Phase::Confirm, Payload::ConfirmData { tag: t(2, 1) });
        assert!(acked(&s.handle(&confirm)));
        assert!(s.state.seen.is_empty());
        assert!(s.handle(&confirm).is_empty());
    }

    #[test]
    fn crash_between_put_and_confirm_loses_seen() {
        let w1 = ProcessId::writer(1);
        let mut s = ServerS::new(ProcessId::server(1), 3, 4);
        s.handle(&from(w1, Phase::Put, Payload::PutData { tag: t(2, 1), value: val(2) }));
        s.crash();
        let op = OpId(7);
        s.repair_step(RepairEvent::Trigger { op });
        assert!(s.state.seen.is_empty());
        for sender in 2..=3 {
            s.repair_step(RepairEvent::Response(Message {
                sender: ProcessId::server(sender),
                recipient: ProcessId::server(1),
                op,
                phase: Phase::Repair,
                payload: Payload::TagDataResp { tag: t(3, 1), value: val(3) },
            }));
        }
        assert_eq!(s.status(), ServerStatus::Active);
        assert_eq!((s.state.t_loc, s.state.seen.len()), (t(3, 1), 0));
        assert!(s.handle(&from(w1, Phase::Confirm, Payload::ConfirmData { tag: t(2, 1) })).is_empty());
    }

    #[test]
    fn late_confirm_from_an_earlier_op_leaves_the_later_entry() {
        let r2 = ProcessId::reader(2);
        let mut s = ServerS::new(ProcessId::server(1), 7, 4);
        let msg = |op: u64, phase, payload| Message { sender: r2, recipient: ProcessId::server(1), op: OpId(op), phase, payload };
        let put = |op| msg(op, Phase::Put, Payload::PutData { tag: t(3, 1), value: val(3) });
        let confirm = |op| msg(op, Phase::Confirm, Payload::ConfirmData { tag: t(3, 1) });
        // Two reads by the same reader write back the same tag; the first
        // read's confirm is delayed past the second read's put.
        s.handle(&put(5));
        s.handle(&put(7));
        assert!(acked(&s.handle(&confirm(5))));
        assert!(acked(&s.handle(&confirm(7))));
        assert!(s.state.seen.is_empty());
    }

    #[test]
    fn seen_is_keyed_by_client() {
        let mut s = ServerS::new(ProcessId::server(1), 3, 4);
        let (w1, r1) = (ProcessId::writer(1), ProcessId::reader(1));
        s.handle(&from(w1, Phase::Put, Payload::PutData { tag: t(2, 1), value: val(2) }));
        s.handle(&from(r1, Phase::Put, Payload::PutData { tag: t(2, 1), value: val(2) }));
        assert_eq!(s.state.seen.len(), 2);
        assert!(s.handle(&from(ProcessId::writer(2), Phase::Confirm, Payload::ConfirmData { tag: t(2, 1) })).is_empty());
        assert!(acked(&s.handle(&from(r1, Phase::Confirm, Payload::ConfirmData { tag: t(2, 1) }))));
    }
}
