//! Scenario configuration, stored as TOML.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec::CodecParams;
use crate::proto::radon_c::quorum_sizes_c;
use crate::proto::radon_l::quorum_sizes_l;
use crate::proto::Protocol;
use crate::types::{ProcessId, ProcessKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    None,
    N1,
    N2,
}

impl Condition {
    pub fn name(&self) -> &'static str {
        match self {
            Condition::None => "none",
            Condition::N1 => "n1",
            Condition::N2 => "n2",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Condition::None),
            "n1" => Ok(Condition::N1),
            "n2" => Ok(Condition::N2),
            other => Err(format!("unknown condition `{other}` (expected none, n1 or n2)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeliveryPolicy {
    /// Every message takes one tick.
    Fifo,
    /// Uniform delay in `1..=max_delay`.
    Random,
    /// Mostly uniform, occasionally a very long hold.
    MaxReorder,
    /// Each directed link is fixed as fast or slow for the whole run. A
    /// quarter of the links are slow and take `max_delay..=8*max_delay`;
    /// the rest behave like `Random`.
    SlowLinks,
}

impl DeliveryPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            DeliveryPolicy::Fifo => "fifo",
            DeliveryPolicy::Random => "random",
            DeliveryPolicy::MaxReorder => "max-reorder",
            DeliveryPolicy::SlowLinks => "slow-links",
        }
    }
}

impl fmt::Display for DeliveryPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DeliveryPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fifo" => Ok(DeliveryPolicy::Fifo),
            "random" => Ok(DeliveryPolicy::Random),
            "max-reorder" => Ok(DeliveryPolicy::MaxReorder),
            "slow-links" => Ok(DeliveryPolicy::SlowLinks),
            other => Err(format!("unknown delivery policy `{other}` (expected fifo, random, max-reorder or slow-links)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultAction {
    Crash,
    Repair,
    /// The target crashes part-way through its next group-send, after
    /// `sends` messages have left.
    CrashDuringSend,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FaultRequest {
    pub at: u64,
    pub target: ProcessId,
    pub action: FaultAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sends: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
#[derive(Default)]
pub enum FaultSpec {
    #[default]
    None,
    /// After each delivery to an active server, crash it with probability
    /// `rate`; it is repaired after a random downtime.
    Random {
        rate: f64,
        #[serde(default, rename = "max-down", skip_serializing_if = "Option::is_none")]
        max_down: Option<usize>,
        /// Longest downtime in ticks; defaults to twice the maximum delay.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        downtime: Option<u64>,
    },
    /// Like `Random`, but only put-data deliveries trigger crashes: the
    /// server acknowledges and then loses the value.
    PutCrash {
        rate: f64,
        #[serde(default, rename = "max-down", skip_serializing_if = "Option::is_none")]
        max_down: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        downtime: Option<u64>,
    },
    /// One server at a time is crashed while the writer's message to it is in
    /// flight, then repaired.
    Theorem1,
    /// Every `period` ticks, `size` random active servers crash together.
    Burst { period: u64, size: usize, downtime: u64 },
    Inline { events: Vec<FaultRequest> },
}


impl FromStr for FaultSpec {
    type Err = String;

    /// `none`, `theorem1`, `random:RATE[:MAX_DOWN[:DOWNTIME]]`,
    /// `put-crash:RATE[:MAX_DOWN[:DOWNTIME]]`, `burst[:PERIOD:SIZE:DOWNTIME]`.
    /// Call syntax such as `random(0.3)` or `burst(100,2,30)` also works.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let colon_form;
        let s = match s.strip_suffix(')').and_then(|body| body.split_once('(')) {
            Some((name, args)) => {
                colon_form = format!("{name}:{}", args.replace(',', ":"));
                colon_form.as_str()
            }
            None => s,
        };
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.parse::<u64>().map_err(|_| format!("bad number `{p}` in fault spec `{s}`"));
        match parts.as_slice() {
            ["none"] => Ok(FaultSpec::None),
            ["theorem1"] => Ok(FaultSpec::Theorem1),
            [kind @ ("random" | "put-crash"), rate, rest @ ..] if rest.len() <= 2 => {
                let rate = rate.parse::<f64>().map_err(|_| format!("bad rate `{rate}` in fault spec `{s}`"))?;
                let max_down = rest.first().map(|m| num(m)).transpose()?.map(|m| m as usize);
                let downtime = rest.get(1).map(|d| num(d)).transpose()?;
                Ok(if *kind == "random" {
                    FaultSpec::Random { rate, max_down, downtime }
                } else {
                    FaultSpec::PutCrash { rate, max_down, downtime }
                })
            }
            ["burst"] => Ok(FaultSpec::Burst { period: 200, size: 1, downtime: 40 }),
            ["burst", p, z, d] => Ok(FaultSpec::Burst { period: num(p)?, size: num(z)? as usize, downtime: num(d)? }),
            _ => Err(format!(
                "unknown fault spec `{s}` (expected none, theorem1, random:RATE[:MAX_DOWN[:DOWNTIME]], put-crash:RATE[:MAX_DOWN[:DOWNTIME]] or burst[:PERIOD:SIZE:DOWNTIME])"
            )),
        }
    }
}

fn default_delta() -> usize {
    1
}
fn one() -> usize {
    1
}
fn default_ops() -> usize {
    5
}
fn default_delivery() -> DeliveryPolicy {
    DeliveryPolicy::Random
}
fn default_max_delay() -> u64 {
    20
}
fn default_think() -> u64 {
    10
}
fn default_budget() -> u64 {
    2_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ScenarioConfig {
    pub protocol: Protocol,
    pub n: usize,
    /// Code dimension; only for radon-c.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default = "default_delta")]
    pub delta: usize,
    /// Defaults to the smallest value the protocol accepts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "Condition::none")]
    pub condition: Condition,
    #[serde(default = "one")]
    pub writers: usize,
    #[serde(default = "one")]
    pub readers: usize,
    /// Operations per client.
    #[serde(default = "default_ops")]
    pub ops: usize,
    /// Value length in bytes; defaults to `8k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_size: Option<usize>,
    #[serde(default = "default_delivery")]
    pub delivery: DeliveryPolicy,
    #[serde(default = "default_max_delay")]
    pub max_delay: u64,
    /// Clients pause for `think-time..=2*think-time` ticks between operations.
    #[serde(default = "default_think")]
    pub think_time: u64,
    #[serde(default)]
    pub client_crash_rate: f64,
    #[serde(default)]
    pub seed: u64,
    /// Maximum number of processed events.
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default)]
    pub fault: FaultSpec,
}

impl Condition {
    fn none() -> Self {
        Condition::None
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("n must be between 1 and 255, got {0}")]
    BadN(usize),
    #[error("radon-c needs k (1 <= k <= n)")]
    MissingK,
    #[error("k is only used by radon-c; remove it for {0}")]
    UnexpectedK(Protocol),
    #[error("invalid code parameters: n={n}, k={k}")]
    BadK { n: usize, k: usize },
    #[error("value size {size} must be positive and a multiple of k={k}")]
    BadValueSize { size: usize, k: usize },
    #[error("alpha must lie in (0, 1], got {0}")]
    AlphaRange(f64),
    #[error(
        "alpha={alpha} protects {protected} of {n} servers, but {protocol} under {condition} needs {needed}{extra}"
    )]
    AlphaTooSmall { alpha: f64, n: usize, protected: usize, needed: usize, protocol: Protocol, condition: Condition, extra: &'static str },
    #[error("{what} must lie in [0, 1], got {value}")]
    Rate { what: &'static str, value: f64 },
    #[error("max-delay must be at least 1")]
    MaxDelay,
    #[error("fault target {0} does not exist in this scenario")]
    BadTarget(ProcessId),
    #[error("crash-during-send needs `sends`")]
    MissingSends,
    #[error("burst size {size} exceeds n={n}")]
    BurstSize { size: usize, n: usize },
    #[error("the theorem1 schedule needs radon-l or radon-c with at least one writer and one reader")]
    Theorem1,
    #[error("invalid configuration file: {0}")]
    Parse(String),
}

impl ScenarioConfig {
    pub fn new(protocol: Protocol, n: usize) -> Self {
        Self {
            protocol,
            n,
            k: None,
            delta: default_delta(),
            alpha: None,
            condition: Condition::None,
            writers: 1,
            readers: 1,
            ops: default_ops(),
            value_size: None,
            delivery: default_delivery(),
            max_delay: default_max_delay(),
            think_time: default_think(),
            client_crash_rate: 0.0,
            seed: 0,
            budget: default_budget(),
            fault: FaultSpec::None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// `k`, or 1 for the replication protocols.
    pub fn code_k(&self) -> usize {
        match self.protocol {
            Protocol::RadonC => self.k.unwrap_or(1),
            _ => 1,
        }
    }

    pub fn value_len(&self) -> usize {
        self.value_size.unwrap_or(8 * self.code_k())
    }

    /// Size of the put quorum, which is also the smallest acceptable `⌈αn⌉`.
    pub fn put_quorum(&self) -> usize {
        match self.protocol {
            Protocol::RadonC => quorum_sizes_c(self.n, self.code_k()).put_quorum,
            _ => quorum_sizes_l(self.n).put_quorum,
        }
    }

    pub fn effective_alpha(&self) -> f64 {
        self.alpha.unwrap_or(self.put_quorum() as f64 / self.n as f64)
    }

    /// `⌈αn⌉`, the number of servers each group-send protects.
    pub fn protected_count(&self) -> usize {
        protected_count(self.effective_alpha(), self.n)
    }

    /// Servers allowed to be crashed or under repair at once while a
    /// condition is enforced.
    pub fn fault_budget(&self) -> usize {
        self.n.saturating_sub(self.protected_count())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.n;
        if n == 0 || n > 255 {
            return Err(ConfigError::BadN(n));
        }
        match (self.protocol, self.k) {
            (Protocol::RadonC, None) => return Err(ConfigError::MissingK),
            (Protocol::RadonC, Some(k)) => {
                CodecParams::new(n, k).map_err(|_| ConfigError::BadK { n, k })?;
            }
            (p, Some(_)) => return Err(ConfigError::UnexpectedK(p)),
            _ => {}
        }
        let k = self.code_k();
        let size = self.value_len();
        if size == 0 || !size.is_multiple_of(k) {
            return Err(ConfigError::BadValueSize { size, k });
        }
        let alpha = self.effective_alpha();
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(ConfigError::AlphaRange(alpha));
        }
        if self.condition != Condition::None {
            let protected = self.protected_count();
            let needed = self.put_quorum();
            let strict = self.protocol != Protocol::RadonC && alpha * 4.0 <= 3.0;
            if protected < needed || strict {
                return Err(ConfigError::AlphaTooSmall {
                    alpha,
                    n,
                    protected,
                    needed,
                    protocol: self.protocol,
                    condition: self.condition,
                    extra: if strict { " and alpha > 3/4" } else { "" },
                });
            }
        }
        if !(0.0..=1.0).contains(&self.client_crash_rate) {
            return Err(ConfigError::Rate { what: "client-crash-rate", value: self.client_crash_rate });
        }
        if self.max_delay == 0 {
            return Err(ConfigError::MaxDelay);
        }
        match &self.fault {
            FaultSpec::Random { rate, .. } | FaultSpec::PutCrash { rate, .. } if !(0.0..=1.0).contains(rate) => {
                return Err(ConfigError::Rate { what: "fault rate", value: *rate });
            }
            FaultSpec::Burst { size, .. } if *size > n => {
                return Err(ConfigError::BurstSize { size: *size, n });
            }
            FaultSpec::Theorem1 => {
                if self.protocol == Protocol::RadonS || self.writers == 0 || self.readers == 0 {
                    return Err(ConfigError::Theorem1);
                }
            }
            FaultSpec::Inline { events } => {
                for e in events {
                    let limit = match e.target.kind {
                        ProcessKind::Server => n,
                        ProcessKind::Writer => self.writers,
                        ProcessKind::Reader => self.readers,
                    };
                    if e.target.index as usize > limit {
                        return Err(ConfigError::BadTarget(e.target));
                    }
                    if e.action == FaultAction::CrashDuringSend && e.sends.is_none() {
                        return Err(ConfigError::MissingSends);
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// `⌈αn⌉`, tolerant of the rounding error in decimal `α`.
pub fn protected_count(alpha: f64, n: usize) -> usize {
    ((alpha * n as f64) - 1e-9).ceil().max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protected_count_examples() {
        assert_eq!(protected_count(0.76, 8), 7);
        // (3n+k)/(4n) for n=8, k=2 is 0.8125.
        assert_eq!(protected_count(0.8125, 8), 7);
        assert_eq!(protected_count(0.8, 5), 4);
        assert_eq!(protected_count(0.1 * 3.0, 10), 3);
    }

    #[test]
    fn alpha_checks_depend_on_protocol() {
        let mut c = ScenarioConfig::new(Protocol::RadonC, 8);
        c.k = Some(2);
        c.condition = Condition::N1;
        c.alpha = Some(0.8125);
        c.validate().unwrap();
        c.alpha = Some(0.75);
        // ⌈6⌉ = 6 < 7.
        assert!(matches!(c.validate(), Err(ConfigError::AlphaTooSmall { .. })));

        let mut l = ScenarioConfig::new(Protocol::RadonL, 8);
        l.condition = Condition::N1;
        l.alpha = Some(0.75);
        assert!(matches!(l.validate(), Err(ConfigError::AlphaTooSmall { .. })));
        l.alpha = Some(0.76);
        l.validate().unwrap();
        l.condition = Condition::None;
        l.alpha = Some(0.5);
        l.validate().unwrap();
    }

    #[test]
    fn default_alpha_is_minimal_feasible() {
        let mut l = ScenarioConfig::new(Protocol::RadonL, 5);
        l.condition = Condition::N2;
        l.validate().unwrap();
        assert_eq!(l.protected_count(), 4);
        assert_eq!(l.fault_budget(), 1);
    }

    #[test]
    fn k_only_for_coded_protocol() {
        let mut l = ScenarioConfig::new(Protocol::RadonS, 5);
        l.k = Some(2);
        assert_eq!(l.validate(), Err(ConfigError::UnexpectedK(Protocol::RadonS)));
        let c = ScenarioConfig::new(Protocol::RadonC, 5);
        assert_eq!(c.validate(), Err(ConfigError::MissingK));
    }

    #[test]
    fn value_size_must_divide() {
        let mut c = ScenarioConfig::new(Protocol::RadonC, 6);
        c.k = Some(3);
        assert_eq!(c.value_len(), 24);
        c.value_size = Some(10);
        assert_eq!(c.validate(), Err(ConfigError::BadValueSize { size: 10, k: 3 }));
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ScenarioConfig::new(Protocol::RadonC, 8);
        c.k = Some(2);
        c.delta = 2;
        c.alpha = Some(0.8125);
        c.condition = Condition::N1;
        c.fault = FaultSpec::Inline {
            events: vec![
                FaultRequest { at: 5, target: ProcessId::server(1), action: FaultAction::Crash, sends: None },
                FaultRequest { at: 9, target: ProcessId::writer(1), action: FaultAction::CrashDuringSend, sends: Some(2) },
            ],
        };
        let text = c.to_toml();
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), c);

        c.fault = FaultSpec::Random { rate: 0.25, max_down: Some(2), downtime: None };
        assert_eq!(ScenarioConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn minimal_toml() {
        let c = ScenarioConfig::from_toml("protocol = \"radon-l\"\nn = 5\n[fault]\nkind = \"random\"\nrate = 0.1\n").unwrap();
        assert_eq!(c.fault, FaultSpec::Random { rate: 0.1, max_down: None, downtime: None });
        assert_eq!(c.writers, 1);
        assert!(ScenarioConfig::from_toml("protocol = \"radon-x\"\nn = 5\n").is_err());
        assert!(ScenarioConfig::from_toml("protocol = \"radon-l\"\nn = 5\nbogus = 1\n").is_err());
    }

    #[test]
    fn fault_spec_from_str() {
        assert_eq!("random:0.3".parse::<FaultSpec>().unwrap(), FaultSpec::Random { rate: 0.3, max_down: None, downtime: None });
        assert_eq!(
            "random:0.5:2".parse::<FaultSpec>().unwrap(),
            FaultSpec::Random { rate: 0.5, max_down: Some(2), downtime: None }
        );
        assert_eq!("theorem1".parse::<FaultSpec>().unwrap(), FaultSpec::Theorem1);
        assert_eq!(
            "burst:100:2:30".parse::<FaultSpec>().unwrap(),
            FaultSpec::Burst { period: 100, size: 2, downtime: 30 }
        );
        assert_eq!("random(0.3)".parse::<FaultSpec>().unwrap(), "random:0.3".parse::<FaultSpec>().unwrap());
        assert_eq!("burst(100,2,30)".parse::<FaultSpec>().unwrap(), "burst:100:2:30".parse::<FaultSpec>().unwrap());
        assert!("random".parse::<FaultSpec>().is_err());
        assert!("random()".parse::<FaultSpec>().is_err());
        assert!("flood".parse::<FaultSpec>().is_err());
    }
}
