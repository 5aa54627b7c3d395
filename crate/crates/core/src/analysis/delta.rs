//! Write concurrency of valid reads and repairs.
//!
//! For an operation `π`, `Σ` holds the reads and writes that completed before
//! `π` started and `σ*` is the one with the highest tag. The writes
//! concurrent with `π` are those that start before `T₂` and carry a tag above
//! `tag(σ*)`, where `T₂` is the receipt of the last response a read needs
//! for its first phase, or the end of a repair.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::analysis::ops::{extract_ops, OpClass, OpSummary, TraceError};
use crate::proto::radon_c::quorum_sizes_c;
use crate::proto::{majority, Protocol};
use crate::trace::{Event, Trace};
use crate::types::{OpId, Phase, ProcessId, Tag};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DeltaReport {
    /// Maximum over all valid reads and repairs.
    pub delta: usize,
    /// Per valid operation: number of concurrent writes.
    pub per_op: Vec<(OpId, usize)>,
}

/// Responses a read waits for in its first phase.
pub fn read_quorum(protocol: Protocol, n: usize, k: usize) -> usize {
    match protocol {
        Protocol::RadonC => quorum_sizes_c(n, k).list_quorum,
        _ => majority(n),
    }
}

/// Time at which each read received the last first-phase response it needed.
pub fn read_quorum_times(trace: &Trace) -> BTreeMap<OpId, u64> {
    let need = read_quorum(trace.meta.protocol, trace.meta.n, trace.meta.k);
    let mut seen: BTreeMap<OpId, BTreeSet<ProcessId>> = BTreeMap::new();
    let mut reached = BTreeMap::new();
    for rec in &trace.records {
        if let Event::Deliver { msg } = &rec.event {
            if msg.recipient.kind == crate::types::ProcessKind::Reader && msg.phase == Phase::Query {
                let from = seen.entry(msg.op).or_default();
                if from.insert(msg.sender) && from.len() == need {
                    reached.insert(msg.op, rec.time);
                }
            }
        }
    }
    reached
}

/// `tag(σ*)` for an operation starting at `start`, or `None` if nothing
/// completed before it.
pub fn sigma_star<'a>(ops: impl Iterator<Item = &'a OpSummary>, start: u64) -> Option<&'a OpSummary> {
    ops.filter(|o| o.class != OpClass::Repair && o.respond.is_some_and(|r| r < start) && o.tag.is_some())
        .max_by_key(|o| (o.tag, o.class == OpClass::Write))
}

pub fn measure_delta(trace: &Trace) -> Result<DeltaReport, TraceError> {
    let ops = extract_ops(trace)?;
    let quorum_at = read_quorum_times(trace);
    let writes: Vec<&OpSummary> = ops.values().filter(|o| o.class == OpClass::Write && o.tag.is_some()).collect();
    let mut report = DeltaReport::default();
    for o in ops.values() {
        let t2 = match o.class {
            OpClass::Read => quorum_at.get(&o.op).copied(),
            OpClass::Repair => o.respond,
            OpClass::Write => None,
        };
        let Some(t2) = t2 else { continue };
        let floor = sigma_star(ops.values(), o.invoke).and_then(|s| s.tag).unwrap_or(Tag::INITIAL);
        let lambda = writes.iter().filter(|w| w.invoke < t2 && w.tag.unwrap() > floor).count();
        report.delta = report.delta.max(lambda);
        report.per_op.push((o.op, lambda));
    }
    Ok(report)
}
