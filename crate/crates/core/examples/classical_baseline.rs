//! The randomized classical dining philosophers next to the quantum one,
//! and what happens to it when the coins stop being random.

use ringsim::protocols::{ProtocolConfig, ProtocolName};
use ringsim::runtime::{HungerSpec, PolicyKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 5;
    for p in [ProtocolName::ClassicalDp, ProtocolName::Dp] {
        let mut steps = Vec::new();
        for seed in 0..200 {
            let cfg = ProtocolConfig::new(p, n)
                .with_hunger(HungerSpec::All)
                .with_policy(PolicyKind::SeededRandom, seed)
                .with_seed(seed);
            let r = cfg.run()?;
            assert!(r.outcome.is_completed(), "{p} seed {seed}: {}", r.outcome.name());
            steps.push(r.ledger.time);
        }
        steps.sort_unstable();
        println!(
            "{p:<12} n={n}: time to first meal median {} max {}",
            steps[steps.len() / 2],
            steps[steps.len() - 1]
        );
    }

    // Every philosopher reaches for the same side first, forever.
    let mut cfg = ProtocolConfig::new(ProtocolName::ClassicalDp, n)
        .with_hunger(HungerSpec::All)
        .with_budget(20_000);
    cfg.constant_coin = Some(true);
    let r = cfg.run()?;
    println!("classical-dp with a constant coin: {}", r.outcome.name());
    Ok(())
}
