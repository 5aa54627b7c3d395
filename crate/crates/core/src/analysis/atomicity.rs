//! Atomicity via tags. Operations are ordered by `π ≺ φ` iff
//! `tag(π) < tag(φ)`, or the tags are equal and `π` is a write while `φ` is
//! a read. The trace is atomic when
//!
//! * P1: no operation that completed before another started is ordered
//!   after it,
//! * P2: writes have pairwise distinct tags,
//! * P3: every read returns the initial value under the initial tag, or the
//!   value of the write that owns its tag.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::analysis::ops::{extract_ops, OpClass, OpSummary, TraceError};
use crate::trace::Trace;
use crate::types::{OpId, Tag, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Property {
    P1,
    P2,
    P3,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub property: Property,
    /// For P1, `(earlier, later)`: `earlier` completed before `later` began
    /// yet `later ≺ earlier`. For P2, the two writes sharing a tag. For P3,
    /// the read alone.
    pub ops: Vec<OpId>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AtomicityReport {
    /// Operations taking part in the order.
    pub checked: usize,
    /// Invoked reads and writes that never completed.
    pub incomplete: Vec<OpId>,
    pub violations: Vec<Violation>,
    /// Total number of violations, which may exceed the witnesses kept.
    pub violation_count: usize,
}

impl AtomicityReport {
    pub fn atomic(&self) -> bool {
        self.violation_count == 0
    }
}

const MAX_WITNESSES: usize = 16;

fn precedes(a: &OpSummary, b: &OpSummary) -> bool {
    let (ta, tb) = (a.tag.expect("ordered ops have tags"), b.tag.expect("ordered ops have tags"));
    ta < tb || (ta == tb && a.class == OpClass::Write && b.class == OpClass::Read)
}

pub fn check_atomicity(trace: &Trace) -> Result<AtomicityReport, TraceError> {
    let ops = extract_ops(trace)?;
    Ok(check_ops(&ops, &Value::initial(trace.meta.value_len)))
}

/// The check itself, over already extracted operations.
pub fn check_ops(ops: &BTreeMap<OpId, OpSummary>, initial: &Value) -> AtomicityReport {
    let mut report = AtomicityReport::default();
    let push = |report: &mut AtomicityReport, v: Violation| {
        report.violation_count += 1;
        if report.violations.len() < MAX_WITNESSES {
            report.violations.push(v);
        }
    };
    let client_ops = || ops.values().filter(|o| o.class != OpClass::Repair);
    report.incomplete = client_ops().filter(|o| !o.completed()).map(|o| o.op).collect();

    let mut writes_by_tag: BTreeMap<Tag, Vec<&OpSummary>> = BTreeMap::new();
    for w in client_ops().filter(|o| o.class == OpClass::Write && o.tag.is_some()) {
        writes_by_tag.entry(w.tag.unwrap()).or_default().push(w);
    }
    for (tag, ws) in &writes_by_tag {
        for pair in ws.windows(2) {
            push(
                &mut report,
                Violation {
                    property: Property::P2,
                    ops: vec![pair[0].op, pair[1].op],
                    detail: format!("writes {} and {} share tag {tag}", pair[0].op, pair[1].op),
                },
            );
        }
    }

    let reads: Vec<&OpSummary> = client_ops().filter(|o| o.class == OpClass::Read && o.completed()).collect();
    for r in &reads {
        let tag = r.tag.expect("completed read has a tag");
        let value = r.value.as_ref();
        let ok = if tag == Tag::INITIAL {
            value == Some(initial)
        } else {
            writes_by_tag.get(&tag).is_some_and(|ws| ws.iter().any(|w| w.value.as_ref() == value))
        };
        if !ok {
            push(
                &mut report,
                Violation {
                    property: Property::P3,
                    ops: vec![r.op],
                    detail: format!("read {} returned tag {tag} with a value no write of that tag wrote", r.op),
                },
            );
        }
    }

    // Completed operations plus incomplete writes some read has observed.
    let returned: std::collections::BTreeSet<Tag> = reads.iter().filter_map(|r| r.tag).collect();
    let mut ordered: Vec<&OpSummary> = client_ops()
        .filter(|o| {
            o.tag.is_some() && (o.completed() || (o.class == OpClass::Write && returned.contains(&o.tag.unwrap())))
        })
        .collect();
    ordered.sort_by_key(|o| o.invoke);
    report.checked = ordered.len();

    for (i, earlier) in ordered.iter().enumerate() {
        let Some(done) = earlier.respond else { continue };
        for later in &ordered[i + 1..] {
            if later.invoke > done && precedes(later, earlier) {
                push(
                    &mut report,
                    Violation {
                        property: Property::P1,
                        ops: vec![earlier.op, later.op],
                        detail: format!(
                            "{} ({:?}, tag {}) completed before {} ({:?}, tag {}) began but is ordered after it",
                            earlier.op,
                            earlier.class,
                            earlier.tag.unwrap(),
                            later.op,
                            later.class,
                            later.tag.unwrap()
                        ),
                    },
                );
            }
        }
    }
    report
}
