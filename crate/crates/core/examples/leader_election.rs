//! Leader election on an anonymous ring under each scheduling policy.

use ringsim::protocols::{ProtocolConfig, ProtocolName};
use ringsim::runtime::PolicyKind;
use ringsim::verify::{check, sample, Property};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 6;
    let cfg = ProtocolConfig::new(ProtocolName::Le, n).with_seed(11);
    let r = cfg.run_traced()?;
    let leader = r.outputs.iter().position(|o| o.leader == Some(true));
    println!(
        "single run: outcome {}, leader {:?}, iterations {:?}, {} actions, {} classical bits, {} qubits sent",
        r.outcome.name(),
        leader,
        r.outputs[0].iterations,
        r.ledger.steps,
        r.ledger.classical_bits,
        r.ledger.qubits_sent
    );

    for kind in PolicyKind::ALL {
        let c = cfg.clone().with_policy(kind, 0);
        let leaves = sample(&c, 0..100, false)?;
        let rep = check(&c, &leaves, &[Property::UniqueLeader])?;
        println!("{:<14} 100 seeds, unique leader: {}", kind.name(), rep.passed());
    }
    Ok(())
}
