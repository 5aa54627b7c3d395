//! Communication and storage costs, in units of one value.
//!
//! Only value data counts: a full value is one unit and a coded element
//! `1/k`. Tags, ids and headers are free.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use serde::{Serialize, Serializer};

use crate::analysis::ops::{OpClass, OpSummary};
use crate::proto::Protocol;
use crate::trace::{Event, Trace};
use crate::types::OpId;

/// An exact cost. Serialized as `{"exact": "5/2", "value": 2.5}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Units(pub Ratio<u64>);

impl Units {
    pub fn new(numer: u64, denom: u64) -> Self {
        Units(Ratio::new(numer, denom))
    }

    pub fn as_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for Units {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Units", 2)?;
        st.serialize_field("exact", &self.to_string())?;
        st.serialize_field("value", &self.as_f64())?;
        st.end()
    }
}

/// Expected costs for a protocol: exact write cost, upper bounds for reads
/// and storage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CostFormula {
    pub write: Units,
    pub read: Units,
    pub storage: Units,
}

pub fn cost_formula(protocol: Protocol, n: usize, k: usize, delta: usize) -> CostFormula {
    let (n, k, d) = (n as u64, k as u64, delta as u64);
    match protocol {
        Protocol::RadonC => CostFormula {
            write: Units::new(n, k),
            read: Units::new((d + 2) * n, k),
            storage: Units::new((d + 1) * n, k),
        },
        _ => CostFormula { write: Units::new(n, 1), read: Units::new(2 * n, 1), storage: Units::new(n, 1) },
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CostReport {
    /// Largest cost of a completed write, if any completed.
    pub write_cost: Option<Units>,
    /// Largest cost of a completed read, if any completed.
    pub read_cost: Option<Units>,
    /// Largest total stored data over all snapshots.
    pub storage_max: Units,
    pub formula: CostFormula,
}

impl CostReport {
    /// Writes cost exactly the formula; reads and storage stay within it.
    pub fn matches_formula(&self) -> bool {
        self.write_cost.is_none_or(|w| w == self.formula.write)
            && self.read_cost.is_none_or(|r| r <= self.formula.read)
            && self.storage_max <= self.formula.storage
    }

    pub fn mismatches(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(w) = self.write_cost.filter(|w| *w != self.formula.write) {
            out.push(format!("write cost {w} != {}", self.formula.write));
        }
        if let Some(r) = self.read_cost.filter(|r| *r > self.formula.read) {
            out.push(format!("read cost {r} > {}", self.formula.read));
        }
        if self.storage_max > self.formula.storage {
            out.push(format!("storage {} > {}", self.storage_max, self.formula.storage));
        }
        out
    }
}

/// Data bytes sent on behalf of each operation, replies included.
pub fn bytes_per_op(trace: &Trace) -> BTreeMap<OpId, u64> {
    let mut bytes: BTreeMap<OpId, u64> = BTreeMap::new();
    for e in trace.events() {
        if let Event::Send { msg, .. } = e {
            *bytes.entry(msg.op).or_default() += msg.payload.data_bytes() as u64;
        }
    }
    bytes
}

pub fn measure_costs(trace: &Trace, ops: &BTreeMap<OpId, OpSummary>) -> CostReport {
    let meta = &trace.meta;
    let len = meta.value_len as u64;
    let bytes = bytes_per_op(trace);
    let max_cost = |class: OpClass| {
        ops.values()
            .filter(|o| o.class == class && o.completed())
            .map(|o| Units::new(bytes.get(&o.op).copied().unwrap_or(0), len))
            .max()
    };

    let mut stored = vec![0u64; meta.n];
    let mut storage_max = 0;
    for e in trace.events() {
        if let Event::Snapshot { server, stored: s, .. } = e {
            stored[server.index as usize - 1] = s.data_bytes() as u64;
            storage_max = storage_max.max(stored.iter().sum());
        }
    }
    CostReport {
        write_cost: max_cost(OpClass::Write),
        read_cost: max_cost(OpClass::Read),
        storage_max: Units::new(storage_max, len),
        formula: cost_formula(meta.protocol, meta.n, meta.k, meta.delta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formulas() {
        let l = cost_formula(Protocol::RadonL, 5, 1, 1);
        assert_eq!((l.write, l.read, l.storage), (Units::new(5, 1), Units::new(10, 1), Units::new(5, 1)));
        let c = cost_formula(Protocol::RadonC, 6, 3, 1);
        assert_eq!((c.write, c.read, c.storage), (Units::new(2, 1), Units::new(6, 1), Units::new(4, 1)));
        let c = cost_formula(Protocol::RadonC, 8, 2, 2);
        assert_eq!((c.write, c.read, c.storage), (Units::new(4, 1), Units::new(16, 1), Units::new(12, 1)));
    }

    #[test]
    fn units_serialize_exact_and_float() {
        let json = serde_json::to_string(&Units::new(5, 2)).unwrap();
        assert_eq!(json, r#"{"exact":"5/2","value":2.5}"#);
        assert_eq!(Units::new(8, 2).to_string(), "4");
    }
}
