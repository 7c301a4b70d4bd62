//! Cost ledgers over ring sizes 3 to 10, with log-log fits and the budget
//! checks.

use ringsim::protocols::{ProtocolConfig, ProtocolName};
use ringsim::runtime::PolicyKind;
use ringsim::verify::audit;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sizes: Vec<usize> = (3..=10).collect();
    for p in [ProtocolName::Sb, ProtocolName::Le] {
        let cfg = ProtocolConfig::new(p, 3).with_policy(PolicyKind::SeededRandom, 0);
        let rep = audit(&cfg, &sizes, 20)?;
        println!("{p}");
        for f in &rep.fits {
            println!("  fit {:<13} {:<8} slope {:>6.3} intercept {:>7.3}", f.metric, f.kind, f.slope, f.intercept);
        }
        for c in &rep.checks {
            println!(
                "  {:<18} observed {:>8.3} limit {:>6.2} {}",
                c.name,
                c.observed,
                c.constant,
                if c.passed { "ok" } else { "FAIL" }
            );
        }
    }
    Ok(())
}
