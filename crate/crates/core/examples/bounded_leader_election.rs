//! Leader election when parties only know an upper bound `N` on the ring
//! size.

use ringsim::protocols::{ProtocolConfig, ProtocolName};
use ringsim::verify::{check, explore, outcome_histogram, Property, DEFAULT_THRESHOLD};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (n, bound) in [(2, 3), (3, 4), (3, 5), (4, 6)] {
        for p in [ProtocolName::SbBounded, ProtocolName::LeBounded] {
            let cfg = ProtocolConfig::new(p, n).with_bound(bound);
            let tree = explore(&cfg, DEFAULT_THRESHOLD, false)?;
            let prop = if p == ProtocolName::SbBounded {
                Property::SymmetryBroken
            } else {
                Property::UniqueLeader
            };
            let rep = check(&cfg, &tree.leaves, &[prop])?;
            println!(
                "{p:<10} n={n} N={bound}: {:>4} branches {:?}, {}: {}",
                tree.leaves.len(),
                outcome_histogram(&tree.leaves),
                prop.name(),
                rep.passed()
            );
        }
    }
    Ok(())
}
