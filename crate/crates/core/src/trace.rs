//! Run traces. The in-memory form keeps full messages so analysis can be
//! done from the trace alone; the line-delimited form is a flat projection.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::config::Condition;
use crate::proto::{Protocol, Stored};
use crate::types::{Message, OpId, ProcessId, ServerStatus, Tag, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpKind {
    Read,
    Write,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeferredKind {
    Crash,
    Repair,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    Invoke { op: OpId, client: ProcessId, kind: OpKind, value: Option<Value> },
    Respond { op: OpId, client: ProcessId, tag: Tag, value: Option<Value> },
    /// A read gave up: nothing was decodable.
    Stuck { op: OpId, client: ProcessId },
    /// `group` identifies the group-send a message belongs to.
    Send { msg: Message, group: Option<u64> },
    Deliver { msg: Message },
    Drop { msg: Message },
    /// A server or a client crashed.
    Crash { process: ProcessId },
    RepairStart { server: ProcessId, op: OpId },
    RepairEnd { server: ProcessId, op: OpId },
    Snapshot { server: ProcessId, status: ServerStatus, stored: Stored },
    WindowOpen { window: u64, group: u64, sender: ProcessId, protected: Vec<ProcessId> },
    WindowClose { window: u64 },
    /// A group-send found fewer active servers than the condition requires.
    ConditionViolated { group: u64, sender: ProcessId, active: usize, needed: usize },
    /// A fault request was postponed to keep the stability condition.
    Deferred { server: ProcessId, kind: DeferredKind },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::Invoke { .. } => "invoke",
            Event::Respond { .. } => "respond",
            Event::Stuck { .. } => "stuck",
            Event::Send { .. } => "send",
            Event::Deliver { .. } => "deliver",
            Event::Drop { .. } => "drop",
            Event::Crash { .. } => "crash",
            Event::RepairStart { .. } => "repair-start",
            Event::RepairEnd { .. } => "repair-end",
            Event::Snapshot { .. } => "state-snapshot",
            Event::WindowOpen { .. } => "window-open",
            Event::WindowClose { .. } => "window-close",
            Event::ConditionViolated { .. } => "condition-violated",
            Event::Deferred { .. } => "deferred",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    /// Position in the trace; strictly increasing.
    pub time: u64,
    /// Simulated clock at which the event happened.
    pub tick: u64,
    pub event: Event,
}

/// Flat line form of a record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub time: u64,
    pub event: String,
    pub actor: String,
    pub op_id: Option<u64>,
    pub payload_kind: Option<String>,
    pub tag: Option<String>,
    pub size_units: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub protocol: Protocol,
    pub n: usize,
    pub k: usize,
    pub delta: usize,
    pub value_len: usize,
    pub condition: Condition,
    pub seed: u64,
    /// Events processed.
    pub steps: u64,
    pub budget_exhausted: bool,
    /// Crash requests still deferred when the run ended.
    pub starved_crashes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(meta: TraceMeta) -> Self {
        Self { meta, records: Vec::new() }
    }

    pub fn push(&mut self, tick: u64, event: Event) {
        let time = self.records.len() as u64;
        self.records.push(TraceRecord { time, tick, event });
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.records.iter().map(|r| &r.event)
    }

    fn units(&self, bytes: usize) -> f64 {
        if self.meta.value_len == 0 {
            0.0
        } else {
            bytes as f64 / self.meta.value_len as f64
        }
    }

    pub fn line(&self, rec: &TraceRecord) -> TraceLine {
        let mut line = TraceLine {
            time: rec.time,
            event: rec.event.name().to_string(),
            actor: String::new(),
            op_id: None,
            payload_kind: None,
            tag: None,
            size_units: 0.0,
        };
        let msg_line = |line: &mut TraceLine, msg: &Message, actor: ProcessId| {
            line.actor = actor.to_string();
            line.op_id = Some(msg.op.0);
            line.payload_kind = Some(msg.payload.kind().to_string());
            line.tag = msg.payload.tag().map(|t| t.to_string());
            line.size_units = self.units(msg.payload.data_bytes());
        };
        match &rec.event {
            Event::Invoke { op, client, kind, value } => {
                line.actor = client.to_string();
                line.op_id = Some(op.0);
                line.payload_kind = Some(match kind {
                    OpKind::Read => "read".into(),
                    OpKind::Write => "write".into(),
                });
                line.size_units = self.units(value.as_ref().map_or(0, Value::len));
            }
            Event::Respond { op, client, tag, value } => {
                line.actor = client.to_string();
                line.op_id = Some(op.0);
                line.tag = Some(tag.to_string());
                line.size_units = self.units(value.as_ref().map_or(0, Value::len));
            }
            Event::Stuck { op, client } => {
                line.actor = client.to_string();
                line.op_id = Some(op.0);
            }
            Event::Send { msg, .. } => msg_line(&mut line, msg, msg.sender),
            Event::Deliver { msg } | Event::Drop { msg } => msg_line(&mut line, msg, msg.recipient),
            Event::Crash { process } => line.actor = process.to_string(),
            Event::RepairStart { server, op } | Event::RepairEnd { server, op } => {
                line.actor = server.to_string();
                line.op_id = Some(op.0);
            }
            Event::Snapshot { server, status, stored } => {
                line.actor = server.to_string();
                line.payload_kind = Some(
                    match status {
                        ServerStatus::Active => "active",
                        ServerStatus::Repair => "repair",
                        ServerStatus::Crashed => "crashed",
                    }
                    .into(),
                );
                line.tag = stored.max_tag().map(|t| t.to_string());
                line.size_units = self.units(stored.data_bytes());
            }
            Event::WindowOpen { window, sender, .. } => {
                line.actor = sender.to_string();
                line.op_id = Some(*window);
            }
            Event::WindowClose { window } => {
                line.actor = "net".into();
                line.op_id = Some(*window);
            }
            Event::ConditionViolated { sender, .. } => line.actor = sender.to_string(),
            Event::Deferred { server, kind } => {
                line.actor = server.to_string();
                line.payload_kind = Some(
                    match kind {
                        DeferredKind::Crash => "crash",
                        DeferredKind::Repair => "repair",
                    }
                    .into(),
                );
            }
        }
        line
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for rec in &self.records {
            serde_json::to_writer(&mut out, &self.line(rec))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("json is utf-8")
    }
}
