//! Shared vocabulary: process identities, tags, values, coded elements and
//! the messages exchanged by every protocol.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Role of a process. The derived order (reader, writer, server) together
/// with the index gives the total order over all process identities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProcessKind {
    Reader,
    Writer,
    Server,
}

/// Unique identity of a reader, writer or server. Indices are 1-based;
/// server `i` stores coded element `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcessId {
    pub kind: ProcessKind,
    pub index: u32,
}

impl ProcessId {
    pub const fn reader(index: u32) -> Self {
        Self { kind: ProcessKind::Reader, index }
    }

    pub const fn writer(index: u32) -> Self {
        Self { kind: ProcessKind::Writer, index }
    }

    pub const fn server(index: u32) -> Self {
        Self { kind: ProcessKind::Server, index }
    }

    pub fn is_server(&self) -> bool {
        self.kind == ProcessKind::Server
    }

    pub fn is_client(&self) -> bool {
        !self.is_server()
    }

    /// Zero-based slot of a server in `0..n`.
    pub fn server_slot(&self) -> Option<usize> {
        self.is_server().then(|| self.index as usize - 1)
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.kind {
            ProcessKind::Reader => 'r',
            ProcessKind::Writer => 'w',
            ProcessKind::Server => 's',
        };
        write!(f, "{prefix}{}", self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid process id `{0}`: expected r<N>, w<N> or s<N> with N >= 1")]
pub struct ParseProcessIdError(String);

impl FromStr for ProcessId {
    type Err = ParseProcessIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseProcessIdError(s.to_string());
        let mut chars = s.chars();
        let kind = match chars.next() {
            Some('r') => ProcessKind::Reader,
            Some('w') => ProcessKind::Writer,
            Some('s') => ProcessKind::Server,
            _ => return Err(err()),
        };
        let index: u32 = chars.as_str().parse().map_err(|_| err())?;
        if index == 0 {
            return Err(err());
        }
        Ok(Self { kind, index })
    }
}

impl Serialize for ProcessId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProcessId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Index of a writer as it appears inside a tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WriterId(pub u32);

/// Version tag `(z, w)`. `writer == None` is the distinguished initial
/// writer id, which orders below every real writer.
///
/// The derived order compares `z` first and then the writer id, which is
/// exactly the lexicographic tag order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag {
    pub z: u64,
    pub writer: Option<WriterId>,
}

impl Tag {
    /// The initial tag `(0, ⊥)`, minimum of the tag order.
    pub const INITIAL: Tag = Tag { z: 0, writer: None };

    pub fn new(z: u64, writer: ProcessId) -> Self {
        debug_assert_eq!(writer.kind, ProcessKind::Writer);
        Self { z, writer: Some(WriterId(writer.index)) }
    }
}

impl Default for Tag {
    fn default() -> Self {
        Tag::INITIAL
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.writer {
            Some(WriterId(w)) => write!(f, "({},w{})", self.z, w),
            None => write!(f, "({},⊥)", self.z),
        }
    }
}

/// Strict tag order.
pub fn tag_less(t1: Tag, t2: Tag) -> bool {
    t1 < t2
}

/// The tag a writer `w` uses after observing `t_star` as the maximum.
pub fn next_tag(t_star: Tag, w: ProcessId) -> Tag {
    Tag::new(t_star.z + 1, w)
}

/// Maximum of a collection of tags; `None` for an empty collection.
pub fn max_tag<I: IntoIterator<Item = Tag>>(tags: I) -> Option<Tag> {
    tags.into_iter().max()
}

/// An opaque object value. Cloning is cheap.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Value(Arc<[u8]>);

impl Value {
    pub fn new(bytes: impl Into<Arc<[u8]>>) -> Self {
        Self(bytes.into())
    }

    /// The distinguished initial value `v₀` of the given length (all zeros).
    pub fn initial(len: usize) -> Self {
        Self(vec![0u8; len].into())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Value(")?;
        for b in self.0.iter().take(8) {
            write!(f, "{b:02x}")?;
        }
        if self.0.len() > 8 {
            write!(f, "..")?;
        }
        write!(f, ";{})", self.0.len())
    }
}

/// One of the `n` fragments of a value under an `[n, k]` code. `index` is
/// 1-based and names the server that stores it.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CodedElement {
    pub index: usize,
    pub bytes: Arc<[u8]>,
}

impl CodedElement {
    pub fn new(index: usize, bytes: impl Into<Arc<[u8]>>) -> Self {
        Self { index, bytes: bytes.into() }
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

impl fmt::Debug for CodedElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}{:?}", self.index, &self.bytes[..self.bytes.len().min(4)])
    }
}

/// A `(tag, coded element)` pair held in a server list.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ListEntry {
    pub tag: Tag,
    pub element: CodedElement,
}

/// Globally unique token for one client operation or one repair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OpId(pub u64);

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "op{}", self.0)
    }
}

/// Which phase of an operation a message belongs to. Responses echo the
/// request's `(op, phase)` so clients can discard stale responses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    /// get-tag / get-data.
    Query,
    /// put-data (write or read write-back).
    Put,
    /// confirm-data (RADON_S only).
    Confirm,
    /// init-repair.
    Repair,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    QueryTag,
    QueryTagData,
    QueryList,
    PutData { tag: Tag, value: Value },
    CodeElements { tag: Tag, element: CodedElement },
    ConfirmData { tag: Tag },
    RepairTagData,
    RepairList,
    TagResp { tag: Tag },
    TagDataResp { tag: Tag, value: Value },
    ListResp { list: Vec<ListEntry> },
    Ack,
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::QueryTag => "query-tag",
            Payload::QueryTagData => "query-tag-data",
            Payload::QueryList => "query-list",
            Payload::PutData { .. } => "put-data",
            Payload::CodeElements { .. } => "code-elements",
            Payload::ConfirmData { .. } => "confirm-data",
            Payload::RepairTagData => "repair-tag-data",
            Payload::RepairList => "repair-list",
            Payload::TagResp { .. } => "tag",
            Payload::TagDataResp { .. } => "tag-data",
            Payload::ListResp { .. } => "list",
            Payload::Ack => "ack",
        }
    }

    /// The single tag carried by the payload, if any.
    pub fn tag(&self) -> Option<Tag> {
        match self {
            Payload::PutData { tag, .. }
            | Payload::CodeElements { tag, .. }
            | Payload::ConfirmData { tag }
            | Payload::TagResp { tag }
            | Payload::TagDataResp { tag, .. } => Some(*tag),
            Payload::ListResp { list } => max_tag(list.iter().map(|e| e.tag)),
            _ => None,
        }
    }

    /// Bytes of value data carried. Metadata (tags, ids, headers) is free.
    pub fn data_bytes(&self) -> usize {
        match self {
            Payload::PutData { value, .. } | Payload::TagDataResp { value, .. } => value.len(),
            Payload::CodeElements { element, .. } => element.len(),
            Payload::ListResp { list } => list.iter().map(|e| e.element.len()).sum(),
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub sender: ProcessId,
    pub recipient: ProcessId,
    pub op: OpId,
    pub phase: Phase,
    pub payload: Payload,
}

impl Message {
    /// A response to `self`, echoing its operation and phase.
    pub fn reply(&self, payload: Payload) -> Message {
        Message {
            sender: self.recipient,
            recipient: self.sender,
            op: self.op,
            phase: self.phase,
            payload,
        }
    }
}

/// Status of a server. `Crashed` is not a protocol state; the simulator
/// sets it and drops everything addressed to a crashed server.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ServerStatus {
    Active,
    Repair,
    Crashed,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(z: u64, w: u32) -> Tag {
        Tag::new(z, ProcessId::writer(w))
    }

    #[test]
    fn tag_order_examples() {
        assert!(tag_less(t(2, 1), t(3, 1)));
        assert!(!tag_less(t(2, 1), t(2, 1)));
        assert!(tag_less(t(2, 1), t(2, 3)));
        assert!(tag_less(Tag::INITIAL, t(0, 1)));
    }

    #[test]
    fn next_tag_examples() {
        assert_eq!(next_tag(Tag::INITIAL, ProcessId::writer(1)), t(1, 1));
        assert_eq!(next_tag(t(5, 2), ProcessId::writer(1)), t(6, 1));
        assert_eq!(next_tag(t(5, 2), ProcessId::writer(9)), t(6, 9));
    }

    #[test]
    fn max_tag_examples() {
        assert_eq!(max_tag([t(1, 1)]), Some(t(1, 1)));
        assert_eq!(max_tag([t(1, 2), t(2, 1)]), Some(t(2, 1)));
        assert_eq!(max_tag([t(2, 1), t(2, 3)]), Some(t(2, 3)));
        assert_eq!(max_tag(std::iter::empty()), None);
    }

    #[test]
    fn process_id_round_trips_through_text() {
        for p in [ProcessId::reader(3), ProcessId::writer(1), ProcessId::server(12)] {
            assert_eq!(p.to_string().parse::<ProcessId>().unwrap(), p);
        }
        assert!("x1".parse::<ProcessId>().is_err());
        assert!("s0".parse::<ProcessId>().is_err());
        assert!(ProcessId::reader(9) < ProcessId::writer(1));
        assert!(ProcessId::writer(9) < ProcessId::server(1));
    }

    fn arb_tag() -> impl Strategy<Value = Tag> {
        (0u64..6, proptest::option::of(1u32..5))
            .prop_map(|(z, w)| Tag { z, writer: w.map(WriterId) })
    }

    proptest! {
        #[test]
        fn tag_order_is_strict_total(a in arb_tag(), b in arb_tag()) {
            let holds = [tag_less(a, b), tag_less(b, a), a == b];
            prop_assert_eq!(holds.iter().filter(|h| **h).count(), 1);
        }

        #[test]
        fn next_tag_increases(a in arb_tag(), w in 1u32..20) {
            prop_assert!(tag_less(a, next_tag(a, ProcessId::writer(w))));
        }

        #[test]
        fn distinct_writers_never_collide(a in arb_tag(), b in arb_tag(), w1 in 1u32..5, w2 in 5u32..9) {
            prop_assert_ne!(next_tag(a, ProcessId::writer(w1)), next_tag(b, ProcessId::writer(w2)));
        }
    }
}
