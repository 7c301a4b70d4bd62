//! Builds the magic unitaries for m = 2..12 and prints which candidate
//! passed the gate.

use ringsim::verify::validate_magic;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rep = validate_magic(2..=12)?;
    for r in &rep.rows {
        println!(
            "m={:<3} {:<11} variant {:<24} unitarity defect {:.1e}  residue {:.1e} ({:?})",
            r.m,
            if r.supported { "supported" } else { "unsupported" },
            r.variant.as_deref().unwrap_or("-"),
            r.unitarity_defect,
            r.support_residue,
            r.residue_method
        );
    }
    println!("all even m supported: {}", rep.all_even_supported());
    Ok(())
}
