//! Erasure-coded protocol. Each server keeps a list of `(tag, coded element)`
//! pairs for at most `δ+1` tags; reads decode the highest tag that at least
//! `k` responding lists agree on and write its fragments back.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::codec::Codec;
use crate::proto::{
    broadcast, ceil_div, majority, ClientEvent, ClientProcess, Output, RepairEvent, Request, Responses,
    ServerProcess, Stored,
};
use crate::types::{
    max_tag, next_tag, CodedElement, ListEntry, Message, OpId, Payload, Phase, ProcessId, ServerStatus, Tag, Value,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuorumsC {
    pub majority: usize,
    /// `⌈(3n+k)/4⌉` acks end a put phase.
    pub put_quorum: usize,
    /// `⌈(n+k)/2⌉` lists are collected by reads and repairs.
    pub list_quorum: usize,
}

pub fn quorum_sizes_c(n: usize, k: usize) -> QuorumsC {
    QuorumsC { majority: majority(n), put_quorum: ceil_div(3 * n + k, 4), list_quorum: ceil_div(n + k, 2) }
}

/// A server list keyed by tag.
pub type List = BTreeMap<Tag, CodedElement>;

/// Adds `entry` unless its tag is already present, then keeps only the
/// `δ+1` highest tags.
pub fn apply_code_element(list: &mut List, entry: ListEntry, delta: usize) {
    list.entry(entry.tag).or_insert(entry.element);
    while list.len() > delta + 1 {
        list.pop_first();
    }
}

fn list_entries(list: &List) -> Vec<ListEntry> {
    list.iter().map(|(tag, element)| ListEntry { tag: *tag, element: element.clone() }).collect()
}

/// Every tag backed by at least `k` distinct fragment indices, highest
/// first, with its decoded value and the fragments used.
pub fn decodable_tags<'a>(
    lists: impl IntoIterator<Item = &'a Vec<ListEntry>>,
    codec: &Codec,
) -> Vec<(Tag, Value, Vec<CodedElement>)> {
    let mut by_tag: BTreeMap<Tag, BTreeMap<usize, CodedElement>> = BTreeMap::new();
    for list in lists {
        for e in list {
            by_tag.entry(e.tag).or_default().entry(e.element.index).or_insert_with(|| e.element.clone());
        }
    }
    by_tag
        .into_iter()
        .rev()
        .filter(|(_, frags)| frags.len() >= codec.k())
        .filter_map(|(tag, frags)| {
            let frags: Vec<CodedElement> = frags.into_values().collect();
            let value = codec.decode(&frags).ok()?;
            Some((tag, value, frags))
        })
        .collect()
}

/// The highest decodable tag and its value, if any.
pub fn select_decodable<'a>(
    lists: impl IntoIterator<Item = &'a Vec<ListEntry>>,
    codec: &Codec,
) -> Option<(Tag, Value)> {
    decodable_tags(lists, codec).into_iter().next().map(|(t, v, _)| (t, v))
}

fn code_elements(
    sender: ProcessId,
    codec: &Codec,
    op: OpId,
    tag: Tag,
    value: &Value,
) -> Output {
    let fragments = codec.encode(value).expect("value length is a multiple of k");
    Output::GroupSend(
        fragments
            .into_iter()
            .map(|element| Message {
                sender,
                recipient: ProcessId::server(element.index as u32),
                op,
                phase: Phase::Put,
                payload: Payload::CodeElements { tag, element },
            })
            .collect(),
    )
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WriteStateC {
    Done,
    GetTag { op: OpId, value: Value, tags: Responses<Tag> },
    PutData { op: OpId, tag: Tag, acks: Responses<()> },
}

#[derive(Clone, Debug)]
pub struct WriterC {
    id: ProcessId,
    n: usize,
    codec: Arc<Codec>,
    quorums: QuorumsC,
    pub state: WriteStateC,
}

impl WriterC {
    pub fn new(id: ProcessId, codec: Arc<Codec>) -> Self {
        let (n, k) = (codec.n(), codec.k());
        Self { id, n, codec, quorums: quorum_sizes_c(n, k), state: WriteStateC::Done }
    }

    pub fn step(&mut self, event: ClientEvent) -> Vec<Output> {
        match (&mut self.state, event) {
            (WriteStateC::Done, ClientEvent::Invoke { op, request: Request::Write(value) }) => {
                self.state = WriteStateC::GetTag { op, value, tags: Responses::new(op, Phase::Query) };
                vec![broadcast(self.id, self.n, op, Phase::Query, Payload::QueryTag)]
            }
            (WriteStateC::GetTag { op, value, tags }, ClientEvent::Response(msg)) => {
                let Payload::TagResp { tag } = msg.payload else { return vec![] };
                if !tags.matches(&msg) || !tags.record(msg.sender, tag) || tags.len() < self.quorums.majority {
                    return vec![];
                }
                let t_w = next_tag(max_tag(tags.values().copied()).expect("quorum is nonempty"), self.id);
                let (op, value) = (*op, value.clone());
                self.state = WriteStateC::PutData { op, tag: t_w, acks: Responses::new(op, Phase::Put) };
                vec![code_elements(self.id, &self.codec, op, t_w, &value)]
            }
            (WriteStateC::PutData { op, tag, acks }, ClientEvent::Response(msg)) => {
                if msg.payload != Payload::Ack
                    || !acks.matches(&msg)
                    || !acks.record(msg.sender, ())
                    || acks.len() < self.quorums.put_quorum
                {
                    return vec![];
                }
                let out = vec![Output::Respond { op: *op, tag: *tag, value: None }];
                self.state = WriteStateC::Done;
                out
            }
            _ => vec![],
        }
    }
}

impl ClientProcess for WriterC {
    fn id(&self) -> ProcessId {
        self.id
    }

    fn step(&mut self, event: ClientEvent) -> Vec<Output> {
        WriterC::step(self, event)
    }

    fn is_idle(&self) -> bool {
        self.state == WriteStateC::Done
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReadStateC {
    Done,
    GetData { op: OpId, lists: Responses<Vec<ListEntry>> },
    PutData { op: OpId, tag: Tag, value: Value, acks: Responses<()> },
    /// No tag was decodable from the first `list_quorum` lists.
    Stuck { op: OpId },
}

#[derive(Clone, Debug)]
pub struct ReaderC {
    id: ProcessId,
    n: usize,
    codec: Arc<Codec>,
    quorums: QuorumsC,
    pub state: ReadStateC,
}

impl ReaderC {
    pub fn new(id: ProcessId, codec: Arc<Codec>) -> Self {
        let (n, k) = (codec.n(), codec.k());
        Self { id, n, codec, quorums: quorum_sizes_c(n, k), state: ReadStateC::Done }
    }

    pub fn step(&mut self, event: ClientEvent) -> Vec<Output> {
        match (&mut self.state, event) {
            (ReadStateC::Done, ClientEvent::Invoke { op, request: Request::Read }) => {
                self.state = ReadStateC::GetData { op, lists: Responses::new(op, Phase::Query) };
                vec![broadcast(self.id, self.n, op, Phase::Query, Payload::QueryList)]
            }
            (ReadStateC::GetData { op, lists }, ClientEvent::Response(msg)) => {
                let Payload::ListResp { list } = msg.payload.clone() else { return vec![] };
                if !lists.matches(&msg) || !lists.record(msg.sender, list) || lists.len() < self.quorums.list_quorum {
                    return vec![];
                }
                let op = *op;
                match select_decodable(lists.values(), &self.codec) {
                    Some((tag, value)) => {
                        let out = code_elements(self.id, &self.codec, op, tag, &value);
                        self.state = ReadStateC::PutData { op, tag, value, acks: Responses::new(op, Phase::Put) };
                        vec![out]
                    }
                    None => {
                        self.state = ReadStateC::Stuck { op };
                        vec![Output::Stuck { op }]
                    }
                }
            }
            (ReadStateC::PutData { op, tag, value, acks }, ClientEvent::Response(msg)) => {
                if msg.payload != Payload::Ack
                    || !acks.matches(&msg)
                    || !acks.record(msg.sender, ())
                    || acks.len() < self.quorums.put_quorum
                {
                    return vec![];
                }
                let out = vec![Output::Respond { op: *op, tag: *tag, value: Some(value.clone()) }];
                self.state = ReadStateC::Done;
                out
            }
            _ => vec![],
        }
    }
}

impl ClientProcess for ReaderC {
    fn id(&self) -> ProcessId {
        self.id
    }

    fn step(&mut self, event: ClientEvent) -> Vec<Output> {
        ReaderC::step(self, event)
    }

    fn is_idle(&self) -> bool {
        self.state == ReadStateC::Done
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerStateC {
    pub status: ServerStatus,
    pub list: List,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepairStateC {
    pub op: OpId,
    pub lists: Responses<Vec<ListEntry>>,
}

#[derive(Clone, Debug)]
pub struct ServerC {
    id: ProcessId,
    index: usize,
    delta: usize,
    codec: Arc<Codec>,
    quorums: QuorumsC,
    pub state: ServerStateC,
    pub repair_state: Option<RepairStateC>,
}

impl ServerC {
    pub fn new(id: ProcessId, codec: Arc<Codec>, delta: usize, value_len: usize) -> Self {
        let index = id.index as usize;
        let initial = codec.project(&Value::initial(value_len), index).expect("server index within 1..=n");
        let quorums = quorum_sizes_c(codec.n(), codec.k());
        Self {
            id,
            index,
            delta,
            codec,
            quorums,
            state: ServerStateC { status: ServerStatus::Active, list: List::from([(Tag::INITIAL, initial)]) },
            repair_state: None,
        }
    }

    pub fn handle(&mut self, msg: &Message) -> Vec<Output> {
        if matches!(msg.payload, Payload::ListResp { .. }) && msg.phase == Phase::Repair {
            return self.repair_step(RepairEvent::Response(msg.clone()));
        }
        if self.state.status != ServerStatus::Active {
            return vec![];
        }
        let reply = match &msg.payload {
            // An empty list (possible after a repair) reports the initial tag.
            Payload::QueryTag => Payload::TagResp { tag: self.state.list.keys().next_back().copied().unwrap_or_default() },
            Payload::QueryList | Payload::RepairList => Payload::ListResp { list: list_entries(&self.state.list) },
            Payload::CodeElements { tag, element } => {
                debug_assert_eq!(element.index, self.index);
                apply_code_element(&mut self.state.list, ListEntry { tag: *tag, element: element.clone() }, self.delta);
                Payload::Ack
            }
            other => panic!("configuration error: radon-c server received {}", other.kind()),
        };
        vec![Output::Send(msg.reply(reply))]
    }

    pub fn repair_step(&mut self, event: RepairEvent) -> Vec<Output> {
        match event {
            RepairEvent::Trigger { op } => {
                if self.state.status != ServerStatus::Crashed {
                    return vec![];
                }
                self.state = ServerStateC { status: ServerStatus::Repair, list: List::new() };
                self.repair_state = Some(RepairStateC { op, lists: Responses::new(op, Phase::Repair) });
                vec![broadcast(self.id, self.codec.n(), op, Phase::Repair, Payload::RepairList)]
            }
            RepairEvent::Response(msg) => {
                if self.state.status != ServerStatus::Repair {
                    return vec![];
                }
                let Some(st) = self.repair_state.as_mut() else { return vec![] };
                let Payload::ListResp { list } = &msg.payload else { return vec![] };
                if !st.lists.matches(&msg) || !st.lists.record(msg.sender, list.clone()) {
                    return vec![];
                }
                if st.lists.len() < self.quorums.list_quorum {
                    return vec![];
                }
                let op = st.op;
                let mut rebuilt = List::new();
                for (tag, _, frags) in decodable_tags(st.lists.values(), &self.codec).into_iter().take(self.delta + 1) {
                    let own = self.codec.re_encode(&frags, self.index).expect("decodable fragments re-encode");
                    rebuilt.insert(tag, own);
                }
                self.state = ServerStateC { status: ServerStatus::Active, list: rebuilt };
                self.repair_state = None;
                vec![Output::RepairDone { op }]
            }
        }
    }
}

impl ServerProcess for ServerC {
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
        self.state = ServerStateC { status: ServerStatus::Crashed, list: List::new() };
        self.repair_state = None;
    }

    fn repair(&mut self, event: RepairEvent) -> Vec<Output> {
        self.repair_step(event)
    }

    fn stored(&self) -> Stored {
        match self.state.status {
            ServerStatus::Crashed => Stored::Nothing,
            _ => Stored::List(list_entries(&self.state.list)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::CodecParams;
    use crate::proto::radon_l::tests::{group, resp, t};
    use proptest::prelude::*;

    fn codec(n: usize, k: usize) -> Arc<Codec> {
        Arc::new(Codec::new(CodecParams::new(n, k).unwrap()).unwrap())
    }

    fn entry(codec: &Codec, tag: Tag, value: &Value, index: usize) -> ListEntry {
        ListEntry { tag, element: codec.project(value, index).unwrap() }
    }

    #[test]
    fn quorum_sizes() {
        assert_eq!(quorum_sizes_c(5, 3), QuorumsC { majority: 3, put_quorum: 5, list_quorum: 4 });
        assert_eq!(quorum_sizes_c(8, 2), QuorumsC { majority: 5, put_quorum: 7, list_quorum: 5 });
        assert_eq!(quorum_sizes_c(1, 1), QuorumsC { majority: 1, put_quorum: 1, list_quorum: 1 });
    }

    fn el(b: u8) -> CodedElement {
        CodedElement::new(1, vec![b])
    }

    #[test]
    fn apply_adds_prunes_and_dedups() {
        let mut list = List::from([(Tag::INITIAL, el(0))]);
        apply_code_element(&mut list, ListEntry { tag: t(1, 1), element: el(1) }, 1);
        assert_eq!(list.keys().copied().collect::<Vec<_>>(), vec![Tag::INITIAL, t(1, 1)]);

        let mut list = List::from([(t(1, 1), el(1)), (t(2, 1), el(2))]);
        apply_code_element(&mut list, ListEntry { tag: t(3, 1), element: el(3) }, 1);
        assert_eq!(list.keys().copied().collect::<Vec<_>>(), vec![t(2, 1), t(3, 1)]);

        let before = list.clone();
        apply_code_element(&mut list, ListEntry { tag: t(3, 1), element: el(9) }, 1);
        assert_eq!(list, before);

        // A tag below the retained window is added and immediately pruned.
        apply_code_element(&mut list, ListEntry { tag: t(1, 5), element: el(4) }, 1);
        assert_eq!(list, before);
    }

    #[test]
    fn writer_sends_distinct_fragments() {
        let c = codec(4, 2);
        let w1 = ProcessId::writer(1);
        let mut w = WriterC::new(w1, c.clone());
        let op = OpId(1);
        let v = Value::new(vec![5, 7]);
        w.step(ClientEvent::Invoke { op, request: Request::Write(v.clone()) });
        let mut out = vec![];
        for s in 1..=3 {
            out = w.step(resp(s, w1, op, Phase::Query, Payload::TagResp { tag: Tag::INITIAL }));
        }
        let msgs = group(&out);
        let expected: Vec<Vec<u8>> = vec![vec![5], vec![7], vec![1], vec![3]];
        for (i, m) in msgs.iter().enumerate() {
            assert_eq!(m.recipient, ProcessId::server(i as u32 + 1));
            let Payload::CodeElements { tag, element } = &m.payload else { panic!() };
            assert_eq!(*tag, t(1, 1));
            assert_eq!(element.index, i + 1);
            assert_eq!(&element.bytes[..], &expected[i][..]);
        }
        // n=4, k=2: put quorum is ⌈14/4⌉ = 4.
        for s in 1..=3 {
            assert!(w.step(resp(s, w1, op, Phase::Put, Payload::Ack)).is_empty());
        }
        assert_eq!(
            w.step(resp(4, w1, op, Phase::Put, Payload::Ack)),
            vec![Output::Respond { op, tag: t(1, 1), value: None }]
        );
    }

    #[test]
    fn select_prefers_max_decodable_over_max_seen() {
        let c = codec(4, 2);
        let v1 = Value::new(vec![1, 2, 3, 4]);
        let v2 = Value::new(vec![9, 9, 9, 9]);
        let mut lists: Vec<Vec<ListEntry>> = (1..=3).map(|i| vec![entry(&c, t(1, 1), &v1, i)]).collect();
        lists.push(vec![entry(&c, t(2, 2), &v2, 4)]);
        assert_eq!(select_decodable(&lists, &c), Some((t(1, 1), v1)));
    }

    #[test]
    fn select_on_initial_lists_gives_initial_value() {
        let c = codec(5, 3);
        let v0 = Value::initial(6);
        let lists: Vec<Vec<ListEntry>> = (1..=4).map(|i| vec![entry(&c, Tag::INITIAL, &v0, i)]).collect();
        assert_eq!(select_decodable(&lists, &c), Some((Tag::INITIAL, v0)));
    }

    #[test]
    fn select_needs_k_distinct_fragments() {
        let c = codec(4, 2);
        let v = Value::new(vec![1, 2]);
        let lists: Vec<Vec<ListEntry>> = (1..=3).map(|i| vec![entry(&c, t(i as u64, 1), &v, i)]).collect();
        assert_eq!(select_decodable(&lists, &c), None);
    }

    #[test]
    fn reader_decodes_writes_back_and_returns() {
        let c = codec(4, 2);
        let r1 = ProcessId::reader(1);
        let mut r = ReaderC::new(r1, c.clone());
        let op = OpId(4);
        let v = Value::new(vec![3, 1, 4, 1]);
        r.step(ClientEvent::Invoke { op, request: Request::Read });
        let mut out = vec![];
        for s in 1..=3usize {
            let list = vec![entry(&c, t(1, 1), &v, s)];
            out = r.step(resp(s as u32, r1, op, Phase::Query, Payload::ListResp { list }));
        }
        let msgs = group(&out);
        assert_eq!(msgs.len(), 4);
        let frags: Vec<CodedElement> = msgs
            .iter()
            .map(|m| match &m.payload {
                Payload::CodeElements { element, .. } => element.clone(),
                _ => panic!(),
            })
            .collect();
        assert_eq!(frags, c.encode(&v).unwrap());
        for s in 1..=4 {
            out = r.step(resp(s, r1, op, Phase::Put, Payload::Ack));
        }
        assert_eq!(out, vec![Output::Respond { op, tag: t(1, 1), value: Some(v) }]);
    }

    #[test]
    fn reader_gets_stuck_and_ignores_later_lists() {
        let c = codec(4, 2);
        let r1 = ProcessId::reader(1);
        let mut r = ReaderC::new(r1, c.clone());
        let op = OpId(4);
        let v = Value::new(vec![1, 2]);
        r.step(ClientEvent::Invoke { op, request: Request::Read });
        let mut out = vec![];
        for s in 1..=3usize {
            let list = vec![entry(&c, t(s as u64, 1), &v, s)];
            out = r.step(resp(s as u32, r1, op, Phase::Query, Payload::ListResp { list }));
        }
        assert_eq!(out, vec![Output::Stuck { op }]);
        let list = vec![entry(&c, t(1, 1), &v, 4)];
        assert!(r.step(resp(4, r1, op, Phase::Query, Payload::ListResp { list })).is_empty());
        assert!(!r.is_idle());
    }

    fn msg_to(index: u32, payload: Payload) -> Message {
        Message {
            sender: ProcessId::writer(1),
            recipient: ProcessId::server(index),
            op: OpId(1),
            phase: Phase::Put,
            payload,
        }
    }

    #[test]
    fn server_reports_max_tag_and_prunes() {
        let c = codec(4, 2);
        let mut s = ServerC::new(ProcessId::server(1), c.clone(), 1, 2);
        s.state.list = List::from([(t(1, 1), el(1)), (t(4, 2), el(4))]);
        let out = s.handle(&msg_to(1, Payload::QueryTag));
        assert!(matches!(&out[..], [Output::Send(m)] if m.payload == Payload::TagResp { tag: t(4, 2) }));
        let out = s.handle(&msg_to(1, Payload::CodeElements { tag: Tag::INITIAL, element: el(0) }));
        assert!(matches!(&out[..], [Output::Send(m)] if m.payload == Payload::Ack));
        assert_eq!(s.state.list.keys().copied().collect::<Vec<_>>(), vec![t(1, 1), t(4, 2)]);
    }

    #[test]
    fn server_in_repair_does_not_answer() {
        let c = codec(4, 2);
        let mut s = ServerC::new(ProcessId::server(1), c, 1, 2);
        s.crash();
        s.repair_step(RepairEvent::Trigger { op: OpId(3) });
        assert!(s.handle(&msg_to(1, Payload::RepairList)).is_empty());
    }

    fn repair_lists(s: &mut ServerC, op: OpId, lists: Vec<(u32, Vec<ListEntry>)>) -> Vec<Output> {
        let mut out = vec![];
        for (from, list) in lists {
            out = s.repair_step(RepairEvent::Response(Message {
                sender: ProcessId::server(from),
                recipient: s.id(),
                op,
                phase: Phase::Repair,
                payload: Payload::ListResp { list },
            }));
        }
        out
    }

    #[test]
    fn repair_keeps_delta_plus_one_highest_decodable() {
        let c = codec(5, 2);
        let vals: Vec<Value> = (1..=3u8).map(|b| Value::new(vec![b, b + 10])).collect();
        let mut s = ServerC::new(ProcessId::server(5), c.clone(), 1, 2);
        s.crash();
        let op = OpId(8);
        let out = s.repair_step(RepairEvent::Trigger { op });
        assert_eq!(group(&out).len(), 5);
        // list quorum for n=5, k=2 is 4.
        let lists = (1..=4usize)
            .map(|i| (i as u32, (1..=3).map(|z| entry(&c, t(z as u64, 1), &vals[z - 1], i)).collect()))
            .collect();
        assert_eq!(repair_lists(&mut s, op, lists), vec![Output::RepairDone { op }]);
        assert_eq!(s.status(), ServerStatus::Active);
        let expect: List = (2..=3)
            .map(|z| (t(z as u64, 1), c.project(&vals[z - 1], 5).unwrap()))
            .collect();
        assert_eq!(s.state.list, expect);
    }

    #[test]
    fn repair_without_decodable_tag_leaves_empty_list() {
        let c = codec(5, 3);
        let v = Value::new(vec![1, 2, 3]);
        let mut s = ServerC::new(ProcessId::server(1), c.clone(), 1, 3);
        s.crash();
        let op = OpId(8);
        s.repair_step(RepairEvent::Trigger { op });
        let lists = (2..=5usize).map(|i| (i as u32, vec![entry(&c, t(i as u64, 1), &v, i)])).collect();
        repair_lists(&mut s, op, lists);
        assert_eq!(s.status(), ServerStatus::Active);
        assert!(s.state.list.is_empty());
        let out = s.handle(&msg_to(1, Payload::QueryTag));
        assert!(matches!(&out[..], [Output::Send(m)] if m.payload == Payload::TagResp { tag: Tag::INITIAL }));
    }

    #[test]
    fn repair_on_fresh_system_restores_initial_fragment() {
        let c = codec(4, 2);
        let mut fresh: Vec<ServerC> = (1..=4).map(|i| ServerC::new(ProcessId::server(i), c.clone(), 2, 4)).collect();
        let initial = fresh[0].state.list.clone();
        fresh[0].crash();
        let op = OpId(1);
        fresh[0].repair_step(RepairEvent::Trigger { op });
        let lists = (2..=4).map(|i| (i as u32, list_entries(&fresh[i - 1].state.list))).collect();
        repair_lists(&mut fresh[0], op, lists);
        assert_eq!(fresh[0].state.list, initial);
    }

    proptest! {
        #[test]
        fn list_never_exceeds_delta_plus_one(
            delta in 0usize..4,
            zs in proptest::collection::vec((0u64..10, 1u32..4), 0..40),
        ) {
            let mut list = List::from([(Tag::INITIAL, el(0))]);
            for (z, w) in zs {
                apply_code_element(&mut list, ListEntry { tag: t(z, w), element: el(z as u8) }, delta);
                prop_assert!(list.len() <= delta + 1);
            }
        }

        #[test]
        fn select_returns_written_value(
            bytes in proptest::collection::vec(any::<u8>(), 6),
            holders in proptest::sample::subsequence((1usize..=6).collect::<Vec<_>>(), 3..=6),
        ) {
            let c = codec(6, 3);
            let v = Value::new(bytes);
            let lists: Vec<Vec<ListEntry>> = holders.iter().map(|&i| vec![entry(&c, t(1, 1), &v, i)]).collect();
            prop_assert_eq!(select_decodable(&lists, &c), Some((t(1, 1), v)));
        }
    }
}
