//! Runtime forms of the two invariant lemmas.
//!
//! For the replicated protocols: if at time `T` some majority of servers is
//! active, every read or repair started after `T` ends with a tag at least
//! the minimum tag of that majority at `T`, and every write strictly above.
//!
//! For the coded protocol, under the stability condition and with write
//! concurrency within `δ`, the highest-tag operation `σ*` completed before
//! an operation `π` starts is never lost: a repair restores its fragment, a
//! read finds it in at least `k` of its lists, and a write's tag query sees
//! it or something newer.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::delta::{read_quorum, sigma_star};
use crate::analysis::ops::{client_crashes, OpClass, OpSummary};
use crate::analysis::CheckResult;
use crate::codec::{Codec, CodecParams};
use crate::config::Condition;
use crate::proto::{majority, Protocol, Stored};
use crate::trace::{Event, Trace};
use crate::types::{ListEntry, OpId, Payload, Phase, ProcessId, ProcessKind, ServerStatus, Tag};

/// One in this many ordinary events is also sampled.
const SAMPLE_ONE_IN: u32 = 16;

/// `(time, min tag of the first active majority)` just before selected events.
fn majority_floors(trace: &Trace) -> Vec<(u64, Tag)> {
    let n = trace.meta.n;
    let mut rng = ChaCha8Rng::seed_from_u64(trace.meta.seed ^ 0x5eed_1e55);
    let mut status = vec![ServerStatus::Active; n];
    let mut tags = vec![Tag::INITIAL; n];
    let mut boundary = false;
    let mut floors = Vec::new();
    for rec in &trace.records {
        let starts_step = matches!(
            rec.event,
            Event::Deliver { .. } | Event::Drop { .. } | Event::Invoke { .. } | Event::Crash { .. } | Event::RepairStart { .. }
        );
        if starts_step {
            let sample = boundary
                || matches!(rec.event, Event::Crash { .. } | Event::RepairStart { .. })
                || rng.gen_ratio(1, SAMPLE_ONE_IN);
            if sample {
                let active: Vec<usize> = (0..n).filter(|&s| status[s] == ServerStatus::Active).take(majority(n)).collect();
                if active.len() == majority(n) {
                    floors.push((rec.time, active.iter().map(|&s| tags[s]).min().expect("nonempty")));
                }
            }
            boundary = false;
        }
        match &rec.event {
            Event::Snapshot { server, status: st, stored } => {
                let s = server.index as usize - 1;
                status[s] = *st;
                tags[s] = stored.max_tag().unwrap_or(Tag::INITIAL);
            }
            Event::Crash { .. } | Event::RepairStart { .. } | Event::RepairEnd { .. } | Event::Respond { .. } => {
                boundary = true;
            }
            _ => {}
        }
    }
    floors
}

pub fn check_lemma1(trace: &Trace, ops: &BTreeMap<OpId, OpSummary>) -> CheckResult {
    if trace.meta.protocol == Protocol::RadonC {
        return CheckResult::skipped("applies to the replicated protocols");
    }
    let floors = majority_floors(trace);
    // Running maximum so a single lookup gives the strongest bound before a time.
    let mut best = Vec::with_capacity(floors.len());
    let mut acc = Tag::INITIAL;
    for (time, tag) in &floors {
        acc = acc.max(*tag);
        best.push((*time, acc));
    }
    let mut result = CheckResult::pass();
    for o in ops.values().filter(|o| o.completed()) {
        let Some(tag) = o.tag else { continue };
        let idx = best.partition_point(|(time, _)| *time <= o.invoke);
        if idx == 0 {
            continue;
        }
        let (at, bound) = best[idx - 1];
        result.checked += 1;
        let ok = match o.class {
            OpClass::Write => tag > bound,
            _ => tag >= bound,
        };
        if !ok {
            result.fail(format!(
                "{} ({:?}) started after time {at} when an active majority held tags >= {bound}, but ended with {tag}",
                o.op, o.class
            ));
        }
    }
    result
}

/// Why the coded-protocol checks do not apply to this trace, if they do not.
pub fn lemma2_gate(trace: &Trace, measured_delta: usize) -> Option<String> {
    if trace.meta.protocol != Protocol::RadonC {
        return Some("applies to radon-c only".into());
    }
    if trace.meta.condition == Condition::None {
        return Some("no stability condition enforced".into());
    }
    let violations = trace.events().filter(|e| matches!(e, Event::ConditionViolated { .. })).count();
    if violations > 0 {
        return Some(format!("{violations} group-sends violated the stability condition"));
    }
    if measured_delta > trace.meta.delta {
        return Some(format!("measured write concurrency {measured_delta} exceeds delta={}", trace.meta.delta));
    }
    None
}

pub fn check_lemma2(trace: &Trace, ops: &BTreeMap<OpId, OpSummary>, measured_delta: usize) -> CheckResult {
    if let Some(reason) = lemma2_gate(trace, measured_delta) {
        return CheckResult::skipped(&reason);
    }
    let meta = &trace.meta;
    let codec = Codec::new(CodecParams::new(meta.n, meta.k).expect("trace parameters are valid")).expect("valid");
    let crashed = client_crashes(trace);
    let fragment = |sigma: &OpSummary, server: ProcessId| {
        let v = sigma.value.as_ref().expect("completed reads and writes carry values");
        ListEntry { tag: sigma.tag.unwrap(), element: codec.project(v, server.index as usize).expect("index in range") }
    };

    // First-phase responses in arrival order, distinct servers only.
    let mut first_phase: BTreeMap<OpId, Vec<(ProcessId, Payload)>> = BTreeMap::new();
    let mut senders: BTreeMap<OpId, BTreeSet<ProcessId>> = BTreeMap::new();
    for e in trace.events() {
        if let Event::Deliver { msg } = e {
            if msg.recipient.is_client() && msg.phase == Phase::Query && senders.entry(msg.op).or_default().insert(msg.sender) {
                first_phase.entry(msg.op).or_default().push((msg.sender, msg.payload.clone()));
            }
        }
    }

    let mut result = CheckResult::pass();
    for o in ops.values() {
        let Some(sigma) = sigma_star(ops.values(), o.invoke) else { continue };
        let target = sigma.tag.unwrap();
        match o.class {
            OpClass::Repair if o.completed() => {
                result.checked += 1;
                let want = fragment(sigma, o.process);
                let ok = matches!(&o.restored, Some(Stored::List(list)) if list.contains(&want));
                if !ok {
                    result.fail(format!(
                        "repair {} of {} lost ({target}) written by {}",
                        o.op, o.process, sigma.op
                    ));
                }
            }
            OpClass::Read if !crashed.contains_key(&o.process) => {
                let need = read_quorum(meta.protocol, meta.n, meta.k);
                let Some(resps) = first_phase.get(&o.op).filter(|r| r.len() >= need) else { continue };
                result.checked += 1;
                let holding = resps[..need]
                    .iter()
                    .filter(|(s, p)| matches!(p, Payload::ListResp { list } if list.contains(&fragment(sigma, *s))))
                    .count();
                if holding < meta.k {
                    result.fail(format!(
                        "read {} saw ({target}) in only {holding} of its {need} lists, needs {}",
                        o.op, meta.k
                    ));
                }
            }
            OpClass::Write if !crashed.contains_key(&o.process) => {
                let need = majority(meta.n);
                let Some(resps) = first_phase.get(&o.op).filter(|r| r.len() >= need) else { continue };
                result.checked += 1;
                let ok = resps[..need].iter().any(|(_, p)| matches!(p, Payload::TagResp { tag } if *tag >= target));
                if !ok {
                    result.fail(format!("write {} saw no tag >= {target} in its tag query", o.op));
                }
            }
            _ => {}
        }
    }
    debug_assert!(ops.values().all(|o| o.process.kind != ProcessKind::Server || o.class == OpClass::Repair));
    result
}
