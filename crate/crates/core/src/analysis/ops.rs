//! Operation summaries recovered from a trace.

use std::collections::BTreeMap;

use crate::trace::{Event, OpKind, Trace};
use crate::types::{OpId, Payload, ProcessId, Tag, Value};
use crate::proto::Stored;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpClass {
    Read,
    Write,
    Repair,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpSummary {
    pub op: OpId,
    pub class: OpClass,
    /// Client for reads and writes, the repaired server for repairs.
    pub process: ProcessId,
    pub invoke: u64,
    pub respond: Option<u64>,
    /// Writes: the tag of their put phase, even if incomplete. Reads: the
    /// returned tag. Repairs: the highest restored tag.
    pub tag: Option<Tag>,
    /// Writes: the written value. Reads: the returned value. Repairs: the
    /// restored state.
    pub value: Option<Value>,
    pub restored: Option<Stored>,
    pub stuck: bool,
}

impl OpSummary {
    pub fn completed(&self) -> bool {
        self.respond.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("operation {0} responds without an invocation")]
    RespondWithoutInvoke(OpId),
    #[error("operation {0} is invoked twice")]
    DuplicateInvoke(OpId),
}

/// Every client operation and repair, ordered by op id.
pub fn extract_ops(trace: &Trace) -> Result<BTreeMap<OpId, OpSummary>, TraceError> {
    let mut ops: BTreeMap<OpId, OpSummary> = BTreeMap::new();
    // Repairs whose restored state is the next snapshot of their server.
    let mut awaiting_snapshot: BTreeMap<ProcessId, OpId> = BTreeMap::new();
    for rec in &trace.records {
        match &rec.event {
            Event::Invoke { op, client, kind, value } => {
                let class = match kind {
                    OpKind::Read => OpClass::Read,
                    OpKind::Write => OpClass::Write,
                };
                let summary = OpSummary {
                    op: *op,
                    class,
                    process: *client,
                    invoke: rec.time,
                    respond: None,
                    tag: None,
                    value: value.clone(),
                    restored: None,
                    stuck: false,
                };
                if ops.insert(*op, summary).is_some() {
                    return Err(TraceError::DuplicateInvoke(*op));
                }
            }
            Event::RepairStart { server, op } => {
                ops.insert(
                    *op,
                    OpSummary {
                        op: *op,
                        class: OpClass::Repair,
                        process: *server,
                        invoke: rec.time,
                        respond: None,
                        tag: None,
                        value: None,
                        restored: None,
                        stuck: false,
                    },
                );
            }
            Event::Send { msg, .. } if msg.sender.is_client() => {
                if let (Some(s), Payload::PutData { tag, .. } | Payload::CodeElements { tag, .. }) =
                    (ops.get_mut(&msg.op), &msg.payload)
                {
                    if s.class == OpClass::Write && s.tag.is_none() {
                        s.tag = Some(*tag);
                    }
                }
            }
            Event::Respond { op, tag, value, .. } => {
                let s = ops.get_mut(op).ok_or(TraceError::RespondWithoutInvoke(*op))?;
                s.respond = Some(rec.time);
                match s.class {
                    OpClass::Write => {
                        s.tag.get_or_insert(*tag);
                    }
                    _ => {
                        s.tag = Some(*tag);
                        s.value = value.clone();
                    }
                }
            }
            Event::Stuck { op, .. } => {
                if let Some(s) = ops.get_mut(op) {
                    s.stuck = true;
                }
            }
            Event::RepairEnd { server, op } => {
                let s = ops.get_mut(op).ok_or(TraceError::RespondWithoutInvoke(*op))?;
                s.respond = Some(rec.time);
                awaiting_snapshot.insert(*server, *op);
            }
            Event::Snapshot { server, stored, .. } => {
                if let Some(op) = awaiting_snapshot.remove(server) {
                    let s = ops.get_mut(&op).expect("repair recorded");
                    s.tag = stored.max_tag();
                    if let Stored::Replica { value, .. } = stored {
                        s.value = Some(value.clone());
                    }
                    s.restored = Some(stored.clone());
                }
            }
            _ => {}
        }
    }
    Ok(ops)
}

/// Trace time at which each crashed client failed.
pub fn client_crashes(trace: &Trace) -> BTreeMap<ProcessId, u64> {
    trace
        .records
        .iter()
        .filter_map(|r| match &r.event {
            Event::Crash { process } if process.is_client() => Some((*process, r.time)),
            _ => None,
        })
        .collect()
}
