use proptest::prelude::*;
use radon_core::analysis::{analyze, Property};
use radon_core::{run_scenario, Condition, DeliveryPolicy, FaultSpec, Protocol, ScenarioConfig};

fn delivery() -> impl Strategy<Value = DeliveryPolicy> {
    prop_oneof![
        Just(DeliveryPolicy::Fifo),
        Just(DeliveryPolicy::Random),
        Just(DeliveryPolicy::MaxReorder),
        Just(DeliveryPolicy::SlowLinks),
    ]
}

/// Protocol, n and k.
fn shape() -> impl Strategy<Value = (Protocol, usize, Option<usize>)> {
    prop_oneof![
        (5usize..=9).prop_map(|n| (Protocol::RadonL, n, None)),
        (5usize..=9).prop_map(|n| (Protocol::RadonS, n, None)),
        (5usize..=9).prop_flat_map(|n| (1..=n / 2).prop_map(move |k| (Protocol::RadonC, n, Some(k)))),
    ]
}

/// A configuration under the condition its protocol needs for liveness:
/// N1 for radon-l and radon-c, N2 for radon-s.
fn stable_config() -> impl Strategy<Value = ScenarioConfig> {
    (shape(), delivery(), 0.0f64..0.1, 1usize..=3, 1usize..=3, any::<u64>()).prop_map(
        |((protocol, n, k), delivery, rate, writers, readers, seed)| {
            let mut c = ScenarioConfig::new(protocol, n);
            c.k = k;
            c.writers = writers;
            c.readers = readers;
            c.delivery = delivery;
            c.seed = seed;
            c.ops = 4;
            c.condition = if protocol == Protocol::RadonS { Condition::N2 } else { Condition::N1 };
            c.alpha = Some(match k {
                Some(k) => (3 * n + k) as f64 / (4 * n) as f64,
                None => 0.76,
            });
            if protocol == Protocol::RadonC {
                c.delta = 8;
                c.think_time = 30;
            }
            c.fault = FaultSpec::Random { rate, max_down: None, downtime: None };
            c
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn protocols_are_safe_and_live_under_their_condition(c in stable_config()) {
        prop_assume!(c.validate().is_ok());
        let report = analyze(&run_scenario(&c).unwrap()).unwrap();
        let checks = ["atomicity", "liveness", "windows", "lemmas", "confirm"];
        prop_assert!(report.passes(&checks), "{:?}: {:?}", c, report.failures(&checks));
    }

    #[test]
    fn confirming_protocol_never_reuses_a_tag(
        n in 3usize..=7,
        rate in 0.0f64..0.5,
        delivery in delivery(),
        seed in any::<u64>(),
    ) {
        let mut c = ScenarioConfig::new(Protocol::RadonS, n);
        c.writers = 3;
        c.readers = 2;
        c.delivery = delivery;
        c.seed = seed;
        c.fault = FaultSpec::Random { rate, max_down: None, downtime: Some(3) };
        let report = analyze(&run_scenario(&c).unwrap()).unwrap();
        prop_assert!(report.atomicity.violations.iter().all(|v| v.property != Property::P2));
        prop_assert!(report.atomicity.atomic(), "{:?}", report.atomicity.violations);
    }

    #[test]
    fn config_survives_toml(c in stable_config()) {
        prop_assume!(c.validate().is_ok());
        prop_assert_eq!(ScenarioConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn runs_are_reproducible(c in stable_config()) {
        prop_assume!(c.validate().is_ok());
        let a = run_scenario(&c).unwrap();
        let b = run_scenario(&c).unwrap();
        prop_assert_eq!(a.to_jsonl(), b.to_jsonl());
    }
}

#[test]
fn writes_complete_with_increasing_tags_when_sequential() {
    for protocol in [Protocol::RadonL, Protocol::RadonS] {
        let mut c = ScenarioConfig::new(protocol, 4);
        c.readers = 0;
        c.ops = 6;
        let report = analyze(&run_scenario(&c).unwrap()).unwrap();
        assert!(report.passes(&["atomicity", "liveness", "costs"]));
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let c = ScenarioConfig::new(Protocol::RadonC, 5);
    assert!(run_scenario(&c).is_err());
    let mut c = ScenarioConfig::new(Protocol::RadonL, 5);
    c.k = Some(2);
    assert!(run_scenario(&c).is_err());
    let mut c = ScenarioConfig::new(Protocol::RadonS, 3);
    c.fault = FaultSpec::Theorem1;
    assert!(run_scenario(&c).is_err());
}

#[test]
fn stale_confirm_does_not_starve_a_repeated_read() {
    // Reader 2 reads the same tag twice; the first read's confirm to s1
    // arrives after the second read's put.
    let mut c = ScenarioConfig::new(Protocol::RadonS, 7);
    c.alpha = Some(0.76);
    c.condition = Condition::N2;
    c.readers = 2;
    c.ops = 4;
    c.delivery = DeliveryPolicy::MaxReorder;
    c.fault = FaultSpec::Random { rate: 0.07444122827918177, max_down: None, downtime: None };
    c.seed = 4785364015936474647;
    let report = analyze(&run_scenario(&c).unwrap()).unwrap();
    assert!(report.passes(&["atomicity", "liveness", "confirm"]), "{:?}", report.failures(&["liveness"]));
}
