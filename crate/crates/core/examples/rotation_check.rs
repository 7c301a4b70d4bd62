//! Anonymity: rotating the ring, the schedule and the measurement outcomes
//! together rotates the whole trace.

use ringsim::protocols::{ProtocolConfig, ProtocolName};
use ringsim::verify::rotation_check;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 4;
    for p in [ProtocolName::Sb, ProtocolName::Le, ProtocolName::Dp] {
        let mut cfg = ProtocolConfig::new(p, n).with_seed(3);
        if p.is_dining() {
            cfg.hunger = "list:1@0,3@5".parse()?;
        }
        let ok: Vec<bool> = (0..n).map(|d| rotation_check(&cfg, d, None)).collect::<Result<_, _>>()?;
        println!("{p:<4} n={n}: rotation by 0..{n} matches {ok:?}");
    }
    Ok(())
}
