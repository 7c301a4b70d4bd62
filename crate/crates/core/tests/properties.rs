use proptest::prelude::*;
use ringsim::protocols::{ProtocolConfig, ProtocolName};
use ringsim::qstate::{BornSampler, QState};
use ringsim::runtime::{HungerSpec, PolicyKind};
use ringsim::verify::{fifo_violation, mutual_exclusion_violation, rotation_check};

fn policy() -> impl Strategy<Value = PolicyKind> {
    prop::sample::select(PolicyKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn le_elects_exactly_one(n in 2usize..=9, kind in policy(), seed in any::<u64>()) {
        let cfg = ProtocolConfig::new(ProtocolName::Le, n).with_policy(kind, seed).with_seed(seed);
        let r = cfg.run_traced().unwrap();
        prop_assert!(r.outcome.is_completed(), "{:?}", r.outcome);
        prop_assert_eq!(r.outputs.iter().filter(|o| o.leader == Some(true)).count(), 1);
        let t = r.trace.unwrap();
        prop_assert_eq!(fifo_violation(&t), None);
        prop_assert_eq!(mutual_exclusion_violation(&t), None);
    }

    #[test]
    fn sb_breaks_symmetry(n in 2usize..=10, kind in policy(), seed in any::<u64>()) {
        let cfg = ProtocolConfig::new(ProtocolName::Sb, n).with_policy(kind, seed).with_seed(seed);
        let r = cfg.run().unwrap();
        prop_assert!(r.outcome.is_completed());
        let g: Vec<bool> = r.outputs.iter().filter_map(|o| o.group).collect();
        prop_assert!(g.contains(&true) && g.contains(&false));
        prop_assert_eq!(r.ledger.qubits_sent, n as u64);
        prop_assert!(r.ledger.max_qubits() <= 3);
    }

    #[test]
    fn dp_feeds_everyone_safely(
        n in 2usize..=8,
        kind in policy(),
        seed in any::<u64>(),
        courteous in any::<bool>(),
    ) {
        let cfg = ProtocolConfig::new(ProtocolName::Dp, n)
            .with_hunger(HungerSpec::All)
            .with_courteous(courteous)
            .with_policy(kind, seed)
            .with_seed(seed);
        let r = cfg.run_traced().unwrap();
        prop_assert!(r.outcome.is_completed(), "{:?}", r.outcome);
        prop_assert!(r.meals.iter().all(|m| *m >= 1));
        let t = r.trace.unwrap();
        prop_assert_eq!(mutual_exclusion_violation(&t), None);
        prop_assert_eq!(fifo_violation(&t), None);
    }

    #[test]
    fn dp_prime_halves(
        pattern in prop::collection::vec(any::<bool>(), 3..=8),
        kind in policy(),
        seed in any::<u64>(),
    ) {
        let l = pattern.iter().filter(|x| **x).count() as u32;
        prop_assume!(l >= 1);
        let n = pattern.len();
        let cfg = ProtocolConfig::new(ProtocolName::DpPrime, n)
            .with_eligible(pattern.clone())
            .with_policy(kind, seed)
            .with_seed(seed);
        let r = cfg.run().unwrap();
        prop_assert!(r.outcome.is_completed());
        let h = r.outputs[0].count.unwrap();
        prop_assert!(r.outputs.iter().all(|o| o.count == Some(h)));
        let survivors = r.outputs.iter().filter(|o| o.eligible == Some(true)).count() as u32;
        prop_assert_eq!(h, survivors);
        if l >= 2 {
            prop_assert!(h >= 1 && h <= l / 2, "L = {}, h = {}", l, h);
        } else {
            prop_assert_eq!(h, 1);
        }
        // Only eligible parties can survive.
        for (j, o) in r.outputs.iter().enumerate() {
            if o.eligible == Some(true) {
                prop_assert!(pattern[j]);
            }
        }
    }

    #[test]
    fn rotation_commutes_with_runs(n in 2usize..=5, d in 0usize..5, seed in any::<u64>(), le in any::<bool>()) {
        let p = if le { ProtocolName::Le } else { ProtocolName::Sb };
        let cfg = ProtocolConfig::new(p, n).with_seed(seed);
        prop_assert!(rotation_check(&cfg, d % n, None).unwrap());
    }

    #[test]
    fn hunger_specs_round_trip(list in prop::collection::vec((0usize..10, 0u64..1000), 1..6)) {
        let spec = HungerSpec::List(list);
        let parsed: HungerSpec = spec.to_string().parse().unwrap();
        prop_assert_eq!(parsed, spec);
    }

    #[test]
    fn measurements_preserve_norm(ops in prop::collection::vec(0u8..4, 1..40), seed in any::<u64>()) {
        let mut s = QState::new();
        let q = s.alloc(0, 4).unwrap();
        let mut live = q.clone();
        let mut src = BornSampler::new(seed);
        for (i, op) in ops.iter().enumerate() {
            if live.len() < 2 {
                break;
            }
            let a = live[i % live.len()];
            let b = live[(i + 1) % live.len()];
            match op {
                0 => s.apply_h(a).unwrap(),
                1 => s.apply_cnot(a, b).unwrap(),
                2 => {
                    s.measure_parity(a, b, &mut src).unwrap();
                }
                _ => {
                    s.measure(a, &mut src).unwrap();
                    s.release(a).unwrap();
                    live.retain(|x| *x != a);
                }
            }
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-9);
            prop_assert_eq!(s.num_live(), live.len());
        }
    }
}
