//! Quantum dining philosophers with everyone hungry at once, then one
//! round of the halving step used by leader election.

use ringsim::protocols::{ProtocolConfig, ProtocolName};
use ringsim::runtime::{Effect, HungerSpec, PolicyKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 5;
    let cfg = ProtocolConfig::new(ProtocolName::Dp, n)
        .with_hunger(HungerSpec::All)
        .with_courteous(true)
        .with_policy(PolicyKind::SeededRandom, 4)
        .with_seed(4)
        .with_budget(50 * (n * n) as u64);
    let r = cfg.run()?;
    println!("dp n={n}: {}", r.outcome.name());
    println!("  first hunger at step {:?}, first meal at step {:?}", r.first_hunger_step, r.first_eat_step);
    println!("  meals {:?}", r.meals);
    println!("  failed lifts before the first meal {:?}", r.failed_lifts_before_first_eat);

    // Eligible parties 0, 4 and 5 on a ring of six. Each eligible party may
    // only ever touch the stick between it and its eligible right neighbor.
    let eligible = vec![true, false, false, false, true, true];
    let cfg = ProtocolConfig::new(ProtocolName::DpPrime, 6).with_eligible(eligible);
    let r = cfg.run_traced()?;
    let mut lifted: Vec<usize> = r
        .trace
        .iter()
        .flat_map(|t| t.events.iter())
        .flat_map(|e| e.detail.iter())
        .filter_map(|d| match d {
            Effect::Lift { stick, ok: true, .. } => Some(*stick),
            _ => None,
        })
        .collect();
    lifted.sort_unstable();
    lifted.dedup();
    let survivors: Vec<usize> = (0..6).filter(|j| r.outputs[*j].eligible == Some(true)).collect();
    println!("dp-prime n=6 eligible {{0,4,5}}: {}", r.outcome.name());
    println!("  sticks lifted {lifted:?}, still eligible {survivors:?}, count {:?}", r.outputs[0].count);
    Ok(())
}
