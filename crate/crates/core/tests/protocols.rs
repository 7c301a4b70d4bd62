use ringsim::protocols::{le_to_dp, AdapterError, ProtocolConfig, ProtocolName};
use ringsim::qstate::build_magic;
use ringsim::runtime::{
    Effect, Event, ExecutionTrace, HungerSpec, LedgerSnapshot, MsgKind, Outcome, PolicyKind,
    Scheduler, Side, Source,
};
use ringsim::verify::{
    audit, check, explore, explore_capped, fifo_violation, mutual_exclusion_violation,
    rotation_check, sample, Property, VerifyError, DEFAULT_THRESHOLD,
};

fn groups(outputs: &[ringsim::runtime::PartyOutput]) -> Vec<bool> {
    outputs.iter().map(|o| o.group.unwrap()).collect()
}

fn leaders(outputs: &[ringsim::runtime::PartyOutput]) -> usize {
    outputs.iter().filter(|o| o.leader == Some(true)).count()
}

fn lifted_sticks(trace: &ExecutionTrace) -> Vec<usize> {
    let mut v: Vec<usize> = trace
        .events
        .iter()
        .flat_map(|e| e.detail.iter())
        .filter_map(|d| match d {
            Effect::Lift { stick, ok: true, .. } => Some(*stick),
            _ => None,
        })
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

#[test]
fn single_party_rings() {
    let r = ProtocolConfig::new(ProtocolName::Sb, 1).run().unwrap();
    assert!(r.outcome.is_completed());
    assert_eq!(groups(&r.outputs), vec![true]);

    let r = ProtocolConfig::new(ProtocolName::Le, 1).run().unwrap();
    assert!(r.outcome.is_completed());
    assert_eq!(leaders(&r.outputs), 1);
}

#[test]
fn sb_two_parties_every_branch() {
    let cfg = ProtocolConfig::new(ProtocolName::Sb, 2);
    let tree = explore(&cfg, DEFAULT_THRESHOLD, false).unwrap();
    assert!((tree.leaf_mass() - 1.0).abs() < 1e-9);
    assert!(tree.conservation_error() < 1e-9);
    let mut magic_branch = false;
    for leaf in &tree.leaves {
        assert!(leaf.outcome.is_completed());
        let g = groups(&leaf.outputs);
        assert!(g.contains(&true) && g.contains(&false), "{}: {g:?}", leaf.path);
        assert_eq!(leaf.ledger.qubits_sent, 2);
        // Both parity checks equal: the magic unitary fixes the groups.
        if leaf.path.starts_with("00") {
            magic_branch = true;
        }
    }
    assert!(magic_branch);
}

#[test]
fn sb_three_parties_every_branch() {
    let cfg = ProtocolConfig::new(ProtocolName::Sb, 3);
    let tree = explore(&cfg, DEFAULT_THRESHOLD, false).unwrap();
    let rep = check(&cfg, &tree.leaves, &[Property::SymmetryBroken]).unwrap();
    assert!(rep.passed());
    assert!(tree.pruned_mass().abs() < 1e-9);
}

#[test]
fn sb_bounded_at_tight_bound_keeps_the_bound() {
    for n in 2..=4 {
        let cfg = ProtocolConfig::new(ProtocolName::SbBounded, n).with_bound(n as u32);
        let tree = explore(&cfg, DEFAULT_THRESHOLD, false).unwrap();
        for leaf in &tree.leaves {
            assert!(leaf.outcome.is_completed());
            let g = groups(&leaf.outputs);
            assert!(g.contains(&true) && g.contains(&false));
            assert!(leaf.outputs.iter().all(|o| o.bound == Some(n as u32)));
        }
    }
}

#[test]
fn sb_bounded_single_party_recurses_to_one() {
    let r = ProtocolConfig::new(ProtocolName::SbBounded, 1)
        .with_bound(4)
        .run()
        .unwrap();
    assert!(r.outcome.is_completed());
    assert_eq!(r.outputs[0].group, Some(true));
    assert_eq!(r.outputs[0].bound, Some(1));
}

#[test]
fn dp_all_hungry_completes() {
    let cfg = ProtocolConfig::new(ProtocolName::Dp, 4)
        .with_hunger(HungerSpec::All)
        .with_seed(2);
    let r = cfg.run().unwrap();
    assert_eq!(r.outcome, Outcome::Completed);
    assert!(r.first_eat_step.is_some());
    assert!(r.meals.iter().all(|m| *m >= 1));
}

#[test]
fn dp_courteous_repeated_hunger_feeds_everyone() {
    let hunger: HungerSpec = "list:0@0,1@0,2@0,3@0,4@0,0@150,2@150,1@400,0@400"
        .parse()
        .unwrap();
    let cfg = ProtocolConfig::new(ProtocolName::Dp, 5)
        .with_hunger(hunger.clone())
        .with_courteous(true)
        .with_budget(100_000);
    for seed in 0..100 {
        let c = cfg.clone().with_policy(PolicyKind::SeededRandom, seed).with_seed(seed);
        let r = c.run().unwrap();
        assert_eq!(r.outcome, Outcome::Completed, "seed {seed}");
        // Hunger arriving while already hungry is dropped, not lost.
        let served: u32 = r.meals.iter().sum::<u32>() + r.ignored_hunger;
        assert_eq!(served, 9, "seed {seed}");
        assert!(r.meals.iter().all(|m| *m >= 1), "seed {seed}: {:?}", r.meals);
    }
}

#[test]
fn adapter_groups_come_from_the_leader() {
    assert_eq!(
        le_to_dp(&[false, false, true, false]).unwrap(),
        vec![false, false, true, false]
    );
    assert_eq!(
        le_to_dp(&[false; 4]),
        Err(AdapterError::NotALeaderConfig(0))
    );
    assert!(le_to_dp(&[true, true, false]).is_err());

    let mut cfg = ProtocolConfig::new(ProtocolName::Dp, 4).with_hunger(HungerSpec::All);
    cfg.leader = Some(2);
    let r = cfg.run().unwrap();
    assert_eq!(r.outcome, Outcome::Completed);
    assert!(r.first_eat_step.is_some());
    // No symmetry breaking ran, so no qubits moved.
    assert_eq!(r.ledger.qubits_sent, 0);
}

#[test]
fn dp_prime_lifts_only_valid_sticks() {
    // Eligible parties 0, 4, 5 of six. Stick c sits between c and c + 1, so
    // the valid sticks are 5, 3 and 4.
    let eligible = vec![true, false, false, false, true, true];
    for seed in 0..40 {
        for kind in PolicyKind::ALL {
            let cfg = ProtocolConfig::new(ProtocolName::DpPrime, 6)
                .with_eligible(eligible.clone())
                .with_policy(kind, seed)
                .with_seed(seed);
            let r = cfg.run_traced().unwrap();
            assert!(r.outcome.is_completed(), "seed {seed} {kind:?}: {:?}", r.outcome);
            let t = r.trace.unwrap();
            for s in lifted_sticks(&t) {
                assert!([3, 4, 5].contains(&s), "stick {s} lifted, seed {seed}");
            }
            // Relays 1..=3 serve exactly one master, which sits to their right.
            for ev in t.actions().filter(|e| (1..=3).contains(&e.actor)) {
                for d in &ev.detail {
                    if let Effect::Deliver { side, kind: MsgKind::LiftLeft, .. } = d {
                        assert_eq!(*side, Side::Right, "seed {seed}");
                    }
                }
            }
            assert_eq!(r.outputs[0].count, Some(1), "three eligible halve to one");
        }
    }
}

#[test]
fn dp_prime_halving_on_every_branch() {
    for n in 2..=4 {
        let cfg = ProtocolConfig::new(ProtocolName::DpPrime, n);
        let tree = explore(&cfg, DEFAULT_THRESHOLD, false).unwrap();
        let rep = check(&cfg, &tree.leaves, &[Property::Halving]).unwrap();
        assert!(rep.passed(), "n = {n}: {:?}", rep.results);
    }
}

#[test]
fn dp_prime_single_eligible_passes_through() {
    let cfg = ProtocolConfig::new(ProtocolName::DpPrime, 5)
        .with_eligible(vec![false, false, true, false, false]);
    let r = cfg.run().unwrap();
    assert!(r.outcome.is_completed());
    assert!(r.outputs.iter().all(|o| o.count == Some(1)));
    assert_eq!(r.outputs[2].eligible, Some(true));
}

#[test]
fn le_exhaustive_small_rings() {
    for n in 2..=4 {
        let cfg = ProtocolConfig::new(ProtocolName::Le, n);
        let tree = explore(&cfg, DEFAULT_THRESHOLD, false).unwrap();
        assert!(tree.pruned_mass().abs() < 1e-9);
        let lg = ringsim::verify::ceil_log2(n);
        for leaf in &tree.leaves {
            assert_eq!(leaf.outcome, Outcome::Completed, "n = {n}, {}", leaf.path);
            assert_eq!(leaders(&leaf.outputs), 1, "n = {n}, {}", leaf.path);
            let it = leaf.outputs.iter().filter_map(|o| o.iterations).max().unwrap();
            assert!(it <= lg, "n = {n}: {it} iterations");
        }
    }
    let cfg = ProtocolConfig::new(ProtocolName::Le, 3);
    let tree = explore(&cfg, DEFAULT_THRESHOLD, false).unwrap();
    assert!(check(&cfg, &tree.leaves, &[Property::UniqueLeader]).unwrap().passed());
}

#[test]
fn le_bounded_two_of_three() {
    let cfg = ProtocolConfig::new(ProtocolName::LeBounded, 2).with_bound(3);
    let tree = explore(&cfg, DEFAULT_THRESHOLD, false).unwrap();
    assert!(!tree.leaves.is_empty());
    for leaf in &tree.leaves {
        assert!(leaf.outcome.is_completed());
        assert_eq!(leaders(&leaf.outputs), 1, "{}", leaf.path);
    }
}

#[test]
fn le_bounded_with_exact_bound_agrees_with_le() {
    for n in 2..=4 {
        let known = ProtocolConfig::new(ProtocolName::Le, n);
        let bounded = ProtocolConfig::new(ProtocolName::LeBounded, n).with_bound(n as u32);
        for cfg in [known, bounded] {
            let tree = explore(&cfg, DEFAULT_THRESHOLD, false).unwrap();
            assert!(check(&cfg, &tree.leaves, &[Property::UniqueLeader]).unwrap().passed());
            assert!(tree.leaves.iter().all(|l| l.outcome.is_completed()));
        }
    }
}

#[test]
fn le_bounded_sole_party_lifts_its_only_stick_twice() {
    let cfg = ProtocolConfig::new(ProtocolName::LeBounded, 1).with_bound(3);
    let r = cfg.run_traced().unwrap();
    assert!(r.outcome.is_completed());
    assert_eq!(leaders(&r.outputs), 1);
}

#[test]
fn classical_dp_many_seeds() {
    for seed in 0..1000 {
        let cfg = ProtocolConfig::new(ProtocolName::ClassicalDp, 5)
            .with_hunger(HungerSpec::All)
            .with_policy(PolicyKind::SeededRandom, seed)
            .with_seed(seed);
        let r = cfg.run().unwrap();
        assert_eq!(r.outcome, Outcome::Completed, "seed {seed}");
    }
}

fn first_lift_side(t: &ExecutionTrace, party: usize) -> Option<Side> {
    t.actions().filter(|e| e.actor == party).find_map(|e| {
        e.detail.iter().find_map(|d| match d {
            Effect::Lift { side, .. } => Some(*side),
            _ => None,
        })
    })
}

#[test]
fn classical_dp_two_parties_with_different_coins() {
    let mut seen = 0;
    for seed in 0..64 {
        let cfg = ProtocolConfig::new(ProtocolName::ClassicalDp, 2)
            .with_hunger(HungerSpec::All)
            .with_seed(seed);
        let r = cfg.run_traced().unwrap();
        let t = r.trace.as_ref().unwrap();
        if first_lift_side(t, 0) != first_lift_side(t, 1) {
            seen += 1;
            assert!(r.ledger.time <= 8, "seed {seed}: {} actions", r.ledger.time);
        }
    }
    assert!(seen > 0);
}

#[test]
fn classical_dp_constant_coin_livelocks() {
    let mut cfg = ProtocolConfig::new(ProtocolName::ClassicalDp, 4)
        .with_hunger(HungerSpec::All)
        .with_budget(5_000);
    cfg.constant_coin = Some(false);
    assert_eq!(cfg.run().unwrap().outcome, Outcome::BudgetExceeded);
}

#[test]
fn budget_of_one_is_exceeded() {
    for p in [ProtocolName::Sb, ProtocolName::Le] {
        let cfg = ProtocolConfig::new(p, 3).with_budget(1);
        assert_eq!(cfg.run().unwrap().outcome, Outcome::BudgetExceeded);
    }
}

#[test]
fn unsupported_magic_surfaces_as_an_outcome() {
    let broken = build_magic(2).unwrap().as_unsupported();
    let cfg = ProtocolConfig::new(ProtocolName::Sb, 2);
    let mut hit = 0;
    for seed in 0..32 {
        let world = cfg
            .build_with(Scheduler::new(&cfg.policy, 2), Source::seeded(seed))
            .unwrap()
            .with_magic_override(broken.clone());
        let r = world.run(cfg.budget);
        match r.outcome {
            Outcome::UnsupportedMagic { m } => {
                assert_eq!(m, 2);
                hit += 1;
            }
            Outcome::Completed => {
                let g = groups(&r.outputs);
                assert!(g.contains(&true) && g.contains(&false));
            }
            other => panic!("seed {seed}: {other:?}"),
        }
    }
    assert!(hit > 0);
}

#[test]
fn same_seed_same_trace() {
    let cfg = ProtocolConfig::new(ProtocolName::Le, 5)
        .with_policy(PolicyKind::SeededRandom, 9)
        .with_seed(9);
    let a = cfg.run_traced().unwrap().trace.unwrap().to_ndjson();
    let b = cfg.run_traced().unwrap().trace.unwrap().to_ndjson();
    assert_eq!(a, b);
}

#[test]
fn dp_traces_respect_mutual_exclusion_and_fifo() {
    let cfg = ProtocolConfig::new(ProtocolName::Dp, 5)
        .with_hunger(HungerSpec::All)
        .with_courteous(true);
    let leaves = sample(&cfg.with_policy(PolicyKind::SeededRandom, 0), 0..50, true).unwrap();
    for leaf in &leaves {
        let t = leaf.trace.as_ref().unwrap();
        assert_eq!(mutual_exclusion_violation(t), None);
        assert_eq!(fifo_violation(t), None);
    }
}

fn event(step: u64, actor: usize, detail: Vec<Effect>) -> Event {
    Event {
        step,
        actor,
        action: "test",
        detail,
        ledger: LedgerSnapshot {
            time: step,
            cbits: 0,
            qubits: 0,
        },
    }
}

#[test]
fn corrupted_trace_breaks_mutual_exclusion() {
    let cfg = ProtocolConfig::new(ProtocolName::Dp, 4).with_hunger(HungerSpec::All);
    let mut t = cfg.run_traced().unwrap().trace.unwrap();
    assert_eq!(mutual_exclusion_violation(&t), None);
    // Party 2 grabs stick 1 at step 0 while party 1 already holds it.
    let lift = |stick, side| Effect::Lift { stick, side, ok: true };
    t.events.insert(0, event(0, 1, vec![lift(1, Side::Left)]));
    t.events.insert(1, event(1, 2, vec![lift(1, Side::Right)]));
    let (step, msg) = mutual_exclusion_violation(&t).expect("violation");
    assert_eq!(step, 1);
    assert!(msg.contains("stick 1"));
}

#[test]
fn corrupted_trace_breaks_fifo() {
    let mut t = ExecutionTrace::new(3);
    let send = |seq| Effect::Send {
        side: Side::Left,
        kind: MsgKind::XBit,
        seq,
        bits: 1,
        qubits: 0,
    };
    let deliver = |seq| Effect::Deliver {
        side: Side::Right,
        kind: MsgKind::XBit,
        seq,
    };
    t.events.push(event(0, 0, vec![send(0)]));
    t.events.push(event(1, 0, vec![send(1)]));
    t.events.push(event(2, 1, vec![deliver(1)]));
    assert_eq!(fifo_violation(&t).map(|(s, _)| s), Some(2));
}

#[test]
fn rotation_identity_and_full_turn() {
    let cfg = ProtocolConfig::new(ProtocolName::Sb, 4);
    for d in [0, 1, 4] {
        assert!(rotation_check(&cfg, d, None).unwrap(), "d = {d}");
    }
}

#[test]
fn exploration_preconditions() {
    let cfg = ProtocolConfig::new(ProtocolName::Le, 3).with_policy(PolicyKind::SeededRandom, 1);
    assert_eq!(
        explore(&cfg, DEFAULT_THRESHOLD, false).unwrap_err(),
        VerifyError::NotDeterministic(PolicyKind::SeededRandom)
    );
    let cfg = ProtocolConfig::new(ProtocolName::Le, 4);
    assert!(matches!(
        explore_capped(&cfg, DEFAULT_THRESHOLD, false, 10),
        Err(VerifyError::TreeTooLarge(_))
    ));
    assert!(matches!(
        explore(&cfg, -1.0, false),
        Err(VerifyError::BadThreshold(_))
    ));
    assert!(matches!(
        "no-such-property".parse::<Property>(),
        Err(VerifyError::BadProperty(_))
    ));
}

#[test]
fn audit_needs_enough_data() {
    let cfg = ProtocolConfig::new(ProtocolName::Sb, 3);
    assert!(matches!(
        audit(&cfg, &[3, 4, 5], 20),
        Err(VerifyError::NotEnoughData { .. })
    ));
    assert!(matches!(
        audit(&cfg, &[3, 4, 5, 6], 5),
        Err(VerifyError::NotEnoughData { .. })
    ));
}

#[test]
fn tree_probabilities_are_consistent() {
    let cfg = ProtocolConfig::new(ProtocolName::Le, 3);
    let tree = explore(&cfg, DEFAULT_THRESHOLD, false).unwrap();
    for node in &tree.nodes {
        assert!((node.probs[0] + node.probs[1] - 1.0).abs() < 1e-9, "{}", node.path);
    }
    assert!(tree.conservation_error() < 1e-9);
}
