//! Post-hoc analysis of run traces. Everything here is computed from a
//! [`Trace`] alone.

pub mod atomicity;
pub mod costs;
pub mod delta;
pub mod lemmas;
pub mod liveness;
pub mod ops;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::config::Condition;
use crate::proto::{majority, Protocol};
use crate::proto::radon_l::quorum_sizes_l;
use crate::trace::{DeferredKind, Event, Trace};
use crate::types::{OpId, Phase, Payload, ProcessId, ServerStatus, Value};

pub use atomicity::{check_atomicity, AtomicityReport, Property, Violation};
pub use costs::{cost_formula, measure_costs, CostFormula, CostReport, Units};
pub use delta::{measure_delta, DeltaReport};
pub use liveness::{check_liveness, Liveness, LivenessReport};
pub use ops::{extract_ops, OpClass, OpSummary, TraceError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    Inconclusive,
}

impl Status {
    /// Skipped checks do not block a run.
    pub fn ok(self) -> bool {
        matches!(self, Status::Pass | Status::Skipped)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Skipped => "skipped",
            Status::Inconclusive => "inconclusive",
        })
    }
}

const MAX_DETAILS: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub status: Status,
    /// Number of individual obligations checked.
    pub checked: usize,
    pub failures: usize,
    /// Witnesses for failures, or the reason a check was skipped.
    pub details: Vec<String>,
}

impl CheckResult {
    pub fn pass() -> Self {
        Self { status: Status::Pass, checked: 0, failures: 0, details: Vec::new() }
    }

    pub fn skipped(reason: &str) -> Self {
        Self { status: Status::Skipped, checked: 0, failures: 0, details: vec![reason.to_string()] }
    }

    pub fn fail(&mut self, detail: String) {
        self.status = Status::Fail;
        self.failures += 1;
        if self.details.len() < MAX_DETAILS {
            self.details.push(detail);
        }
    }
}

/// Checks selectable by name.
pub const CHECK_NAMES: [&str; 7] = ["atomicity", "liveness", "costs", "delta", "lemmas", "windows", "confirm"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub protocol: Protocol,
    pub n: usize,
    pub k: usize,
    pub delta: usize,
    pub condition: Condition,
    pub seed: u64,
    pub steps: u64,
    pub budget_exhausted: bool,
    pub atomicity: AtomicityReport,
    pub liveness: LivenessReport,
    pub measured_delta: usize,
    pub costs: CostReport,
    pub lemma1: CheckResult,
    pub lemma2: CheckResult,
    pub windows: CheckResult,
    pub confirm: CheckResult,
    pub server_crashes: usize,
    pub condition_violations: usize,
    pub deferred_crashes: usize,
    pub deferred_repairs: usize,
    pub starved_crashes: usize,
    /// Most servers crashed or repairing at one instant.
    pub max_down: usize,
}

impl RunReport {
    /// Verdict of one named check, `None` for an unknown name.
    pub fn status(&self, check: &str) -> Option<Status> {
        Some(match check {
            "atomicity" => {
                if self.atomicity.atomic() {
                    Status::Pass
                } else {
                    Status::Fail
                }
            }
            "liveness" => match self.liveness.verdict {
                Liveness::Live => Status::Pass,
                Liveness::Violation => Status::Fail,
                Liveness::Inconclusive => Status::Inconclusive,
            },
            "costs" => {
                if self.costs.matches_formula() {
                    Status::Pass
                } else {
                    Status::Fail
                }
            }
            "delta" => {
                if self.protocol != Protocol::RadonC {
                    Status::Skipped
                } else if self.measured_delta <= self.delta {
                    Status::Pass
                } else {
                    Status::Fail
                }
            }
            "lemmas" => {
                let (a, b) = (self.lemma1.status, self.lemma2.status);
                if a == Status::Fail || b == Status::Fail {
                    Status::Fail
                } else if a == Status::Pass || b == Status::Pass {
                    Status::Pass
                } else {
                    Status::Skipped
                }
            }
            "windows" => self.windows.status,
            "confirm" => self.confirm.status,
            _ => return None,
        })
    }

    /// True when every listed check passes or is skipped.
    pub fn passes(&self, checks: &[&str]) -> bool {
        checks.iter().all(|c| self.status(c).is_some_and(Status::ok))
    }

    /// Short reasons for every failing listed check.
    pub fn failures(&self, checks: &[&str]) -> Vec<String> {
        let mut out = Vec::new();
        for c in checks {
            let Some(status) = self.status(c) else {
                out.push(format!("unknown check {c}"));
                continue;
            };
            if status.ok() {
                continue;
            }
            let detail = match *c {
                "atomicity" => self.atomicity.violations.first().map(|v| v.detail.clone()),
                "liveness" => {
                    let l = &self.liveness;
                    let mut parts = Vec::new();
                    for (what, ops) in [("pending", &l.pending), ("stuck", &l.stuck)] {
                        if !ops.is_empty() {
                            let ids: Vec<String> = ops.iter().map(ToString::to_string).collect();
                            parts.push(format!("{what} {}", ids.join(" ")));
                        }
                    }
                    if !l.unfinished_repairs.is_empty() {
                        let ids: Vec<String> = l.unfinished_repairs.iter().map(|(s, op)| format!("{s}:{op}")).collect();
                        parts.push(format!("unfinished repairs {}", ids.join(" ")));
                    }
                    if self.budget_exhausted {
                        parts.push("step budget exhausted".into());
                    }
                    Some(parts.join(", "))
                }
                "costs" => Some(self.costs.mismatches().join("; ")),
                "delta" => Some(format!("measured {} > {}", self.measured_delta, self.delta)),
                "lemmas" => self.lemma1.details.first().or(self.lemma2.details.first()).cloned(),
                "windows" => self.windows.details.first().cloned(),
                "confirm" => self.confirm.details.first().cloned(),
                _ => None,
            };
            out.push(format!("{c}: {status}{}", detail.map(|d| format!(" ({d})")).unwrap_or_default()));
        }
        out
    }
}

/// No crash hits a server while a window protecting it is open.
pub fn check_windows(trace: &Trace) -> CheckResult {
    if trace.meta.condition == Condition::None {
        return CheckResult::skipped("no stability condition enforced");
    }
    let mut open: BTreeMap<u64, Vec<ProcessId>> = BTreeMap::new();
    let mut result = CheckResult::pass();
    for rec in &trace.records {
        match &rec.event {
            Event::WindowOpen { window, protected, .. } => {
                open.insert(*window, protected.clone());
                result.checked += 1;
            }
            Event::WindowClose { window } => {
                open.remove(window);
            }
            Event::Crash { process } if process.is_server() => {
                if let Some((w, _)) = open.iter().find(|(_, p)| p.contains(process)) {
                    result.fail(format!("{process} crashed at time {} inside window {w}", rec.time));
                }
            }
            _ => {}
        }
    }
    result
}

/// Every completed operation of the confirming protocol collected a
/// majority of confirm acks from its own put-phase quorum `S_α`: the first
/// `⌈(3n+1)/4⌉` distinct servers whose put acks it received.
pub fn check_confirm_acks(trace: &Trace) -> CheckResult {
    if trace.meta.protocol != Protocol::RadonS {
        return CheckResult::skipped("applies to radon-s only");
    }
    let n = trace.meta.n;
    let put_quorum = quorum_sizes_l(n).put_quorum;
    let mut s_alpha: BTreeMap<OpId, Vec<ProcessId>> = BTreeMap::new();
    let mut confirmed: BTreeMap<OpId, BTreeSet<ProcessId>> = BTreeMap::new();
    let mut result = CheckResult::pass();
    for e in trace.events() {
        match e {
            Event::Deliver { msg } if msg.recipient.is_client() && msg.payload == Payload::Ack => match msg.phase {
                Phase::Put => {
                    let set = s_alpha.entry(msg.op).or_default();
                    if set.len() < put_quorum && !set.contains(&msg.sender) {
                        set.push(msg.sender);
                    }
                }
                Phase::Confirm => {
                    confirmed.entry(msg.op).or_default().insert(msg.sender);
                }
                _ => {}
            },
            Event::Respond { op, .. } => {
                result.checked += 1;
                let members = s_alpha.get(op).map(Vec::as_slice).unwrap_or_default();
                let acks = confirmed.get(op).cloned().unwrap_or_default();
                let inside = acks.iter().filter(|s| members.contains(s)).count();
                if members.len() < put_quorum || inside < majority(n) {
                    result.fail(format!(
                        "{op} completed with {inside} confirm acks from its S_alpha of {} servers",
                        members.len()
                    ));
                }
            }
            _ => {}
        }
    }
    result
}

/// Most servers simultaneously not active.
pub fn max_down(trace: &Trace) -> usize {
    let mut down = vec![false; trace.meta.n];
    let mut max = 0;
    for e in trace.events() {
        if let Event::Snapshot { server, status, .. } = e {
            down[server.index as usize - 1] = *status != ServerStatus::Active;
            max = max.max(down.iter().filter(|d| **d).count());
        }
    }
    max
}

pub fn analyze(trace: &Trace) -> Result<RunReport, TraceError> {
    let meta = &trace.meta;
    let ops = extract_ops(trace)?;
    let atomicity = atomicity::check_ops(&ops, &Value::initial(meta.value_len));
    let liveness = check_liveness(trace)?;
    let delta = measure_delta(trace)?;
    let count = |pred: &dyn Fn(&Event) -> bool| trace.events().filter(|e| pred(e)).count();
    Ok(RunReport {
        protocol: meta.protocol,
        n: meta.n,
        k: meta.k,
        delta: meta.delta,
        condition: meta.condition,
        seed: meta.seed,
        steps: meta.steps,
        budget_exhausted: meta.budget_exhausted,
        atomicity,
        liveness,
        measured_delta: delta.delta,
        costs: measure_costs(trace, &ops),
        lemma1: lemmas::check_lemma1(trace, &ops),
        lemma2: lemmas::check_lemma2(trace, &ops, delta.delta),
        windows: check_windows(trace),
        confirm: check_confirm_acks(trace),
        server_crashes: count(&|e| matches!(e, Event::Crash { process } if process.is_server())),
        condition_violations: count(&|e| matches!(e, Event::ConditionViolated { .. })),
        deferred_crashes: count(&|e| matches!(e, Event::Deferred { kind: DeferredKind::Crash, .. })),
        deferred_repairs: count(&|e| matches!(e, Event::Deferred { kind: DeferredKind::Repair, .. })),
        starved_crashes: meta.starved_crashes,
        max_down: max_down(trace),
    })
}
