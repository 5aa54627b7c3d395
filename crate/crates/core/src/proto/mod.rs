//! Protocol state machines. Every process is a transition function from
//! `(state, event)` to outbound effects; the simulator applies the effects of
//! one transition atomically, which is what "effective consumption" means
//! here.

pub mod radon_c;
pub mod radon_l;
pub mod radon_s;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::types::{ListEntry, Message, OpId, Payload, Phase, ProcessId, ServerStatus, Tag, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    RadonL,
    RadonC,
    RadonS,
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::RadonL => "radon-l",
            Protocol::RadonC => "radon-c",
            Protocol::RadonS => "radon-s",
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "radon-l" => Ok(Protocol::RadonL),
            "radon-c" => Ok(Protocol::RadonC),
            "radon-s" => Ok(Protocol::RadonS),
            other => Err(format!("unknown protocol `{other}` (expected radon-l, radon-c or radon-s)")),
        }
    }
}

/// `⌊n/2⌋ + 1`.
pub fn majority(n: usize) -> usize {
    n / 2 + 1
}

/// `⌈num / den⌉` for positive integers.
pub(crate) fn ceil_div(num: usize, den: usize) -> usize {
    num.div_ceil(den)
}

/// What a client is asked to do.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Request {
    Read,
    Write(Value),
}

/// Something that happens to a client: an invocation from its environment or
/// a message from a server.
#[derive(Clone, Debug)]
pub enum ClientEvent {
    Invoke { op: OpId, request: Request },
    Response(Message),
}

/// Something that happens to a server besides message receipt.
#[derive(Clone, Debug)]
pub enum RepairEvent {
    Trigger { op: OpId },
    Response(Message),
}

/// Data a server currently holds, as seen by snapshots and cost accounting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stored {
    Replica { tag: Tag, value: Value },
    List(Vec<ListEntry>),
    Nothing,
}

impl Stored {
    pub fn tags(&self) -> Vec<Tag> {
        match self {
            Stored::Replica { tag, .. } => vec![*tag],
            Stored::List(list) => list.iter().map(|e| e.tag).collect(),
            Stored::Nothing => Vec::new(),
        }
    }

    pub fn max_tag(&self) -> Option<Tag> {
        self.tags().into_iter().max()
    }

    pub fn data_bytes(&self) -> usize {
        match self {
            Stored::Replica { value, .. } => value.len(),
            Stored::List(list) => list.iter().map(|e| e.element.len()).sum(),
            Stored::Nothing => 0,
        }
    }
}

/// Effects of one transition, applied by the simulator in order.
#[derive(Clone, Debug, PartialEq)]
pub enum Output {
    /// Point-to-point message (replies).
    Send(Message),
    /// `n` messages, the `i`-th addressed to server `i`.
    GroupSend(Vec<Message>),
    /// A client operation responds.
    Respond { op: OpId, tag: Tag, value: Option<Value> },
    /// A read found no decodable tag among its quorum; it will never respond.
    Stuck { op: OpId },
    /// A repair finished and the server is active again.
    RepairDone { op: OpId },
}

pub trait ClientProcess: Send {
    fn id(&self) -> ProcessId;
    fn step(&mut self, event: ClientEvent) -> Vec<Output>;
    /// True when no operation is pending.
    fn is_idle(&self) -> bool;
}

pub trait ServerProcess: Send {
    fn id(&self) -> ProcessId;
    fn status(&self) -> ServerStatus;
    /// Receipt of a message while not crashed.
    fn on_message(&mut self, msg: &Message) -> Vec<Output>;
    /// Loses every state variable.
    fn crash(&mut self);
    /// External repair trigger. Only meaningful from the crashed state.
    fn repair(&mut self, event: RepairEvent) -> Vec<Output>;
    fn stored(&self) -> Stored;
}

/// Builds a group-send with the same payload to every server.
pub(crate) fn broadcast(sender: ProcessId, n: usize, op: OpId, phase: Phase, payload: Payload) -> Output {
    Output::GroupSend(
        (1..=n as u32)
            .map(|i| Message {
                sender,
                recipient: ProcessId::server(i),
                op,
                phase,
                payload: payload.clone(),
            })
            .collect(),
    )
}

/// Responses to one `(op, phase)`, at most one per server.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Responses<T> {
    pub op: OpId,
    pub phase: Phase,
    by_server: BTreeMap<ProcessId, T>,
    /// Arrival order of distinct servers.
    order: Vec<ProcessId>,
}

impl<T> Responses<T> {
    pub fn new(op: OpId, phase: Phase) -> Self {
        Self { op, phase, by_server: BTreeMap::new(), order: Vec::new() }
    }

    /// Whether `msg` belongs to this phase.
    pub fn matches(&self, msg: &Message) -> bool {
        msg.op == self.op && msg.phase == self.phase && msg.sender.is_server()
    }

    /// Records a response; duplicates from the same server are ignored.
    /// Returns true if the response was new.
    pub fn record(&mut self, from: ProcessId, value: T) -> bool {
        if self.by_server.contains_key(&from) {
            return false;
        }
        self.by_server.insert(from, value);
        self.order.push(from);
        true
    }

    pub fn len(&self) -> usize {
        self.by_server.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_server.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.by_server.values()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ProcessId, &T)> {
        self.by_server.iter()
    }

    pub fn senders(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.order.iter().copied()
    }

    pub fn contains(&self, from: &ProcessId) -> bool {
        self.by_server.contains_key(from)
    }
}
