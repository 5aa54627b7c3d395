use serde::Serialize;

use crate::analysis::ops::{client_crashes, extract_ops, OpClass, TraceError};
use crate::trace::{Event, Trace};
use crate::types::{OpId, ProcessId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Liveness {
    Live,
    Violation,
    /// The step budget ran out before quiescence.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LivenessReport {
    pub verdict: Liveness,
    /// Operations of non-faulty clients that never responded.
    pub pending: Vec<OpId>,
    /// Reads that found nothing decodable.
    pub stuck: Vec<OpId>,
    /// Repairs whose server never crashed again yet never finished.
    pub unfinished_repairs: Vec<(ProcessId, OpId)>,
    /// Operations excluded because their client crashed.
    pub excluded: usize,
}

pub fn check_liveness(trace: &Trace) -> Result<LivenessReport, TraceError> {
    let ops = extract_ops(trace)?;
    let crashed = client_crashes(trace);
    let mut pending = Vec::new();
    let mut stuck = Vec::new();
    let mut unfinished_repairs = Vec::new();
    let mut excluded = 0;
    for o in ops.values() {
        if o.completed() {
            continue;
        }
        match o.class {
            OpClass::Read | OpClass::Write => {
                if crashed.contains_key(&o.process) {
                    excluded += 1;
                } else if o.stuck {
                    stuck.push(o.op);
                } else {
                    pending.push(o.op);
                }
            }
            OpClass::Repair => {
                let crashed_again = trace.records.iter().any(|r| {
                    r.time > o.invoke && matches!(&r.event, Event::Crash { process } if *process == o.process)
                });
                if !crashed_again {
                    unfinished_repairs.push((o.process, o.op));
                }
            }
        }
    }
    let verdict = if pending.is_empty() && stuck.is_empty() && unfinished_repairs.is_empty() {
        Liveness::Live
    } else if trace.meta.budget_exhausted {
        Liveness::Inconclusive
    } else {
        Liveness::Violation
    };
    Ok(LivenessReport { verdict, pending, stuck, unfinished_repairs, excluded })
}
