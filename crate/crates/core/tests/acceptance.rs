//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use ringsim::protocols::{ProtocolConfig, ProtocolName};
use ringsim::qstate::ResidueMethod;
use ringsim::runtime::{Outcome, PartyOutput, PolicyKind};
use ringsim::verify::{
    audit, ceil_log2, explore, rotation_check, sample, validate_magic, BranchTree, Leaf,
    DEFAULT_THRESHOLD,
};

const PRUNED_MAX: f64 = 1e-9;
const RESIDUE_MAX: f64 = 1e-12;
const DEFECT_MAX: f64 = 1e-9;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict, Duration);

fn leaders(o: &[PartyOutput]) -> usize {
    o.iter().filter(|p| p.leader == Some(true)).count()
}

fn mixed(o: &[PartyOutput]) -> bool {
    let g: Vec<bool> = o.iter().filter_map(|p| p.group).collect();
    g.len() == o.len() && g.contains(&true) && g.contains(&false)
}

fn tree(cfg: &ProtocolConfig) -> Result<BranchTree, String> {
    explore(cfg, DEFAULT_THRESHOLD, false).map_err(|e| format!("{} n={}: {e}", cfg.protocol, cfg.n))
}

/// Every leaf completed and satisfies `ok`; pruned mass small.
fn exhaustive_ok(cfg: &ProtocolConfig, ok: impl Fn(&Leaf) -> bool) -> Result<usize, String> {
    let t = tree(cfg)?;
    let pruned = t.pruned_mass().abs();
    if pruned >= PRUNED_MAX {
        return Err(format!("{} n={}: pruned mass {pruned:e}", cfg.protocol, cfg.n));
    }
    if let Some(l) = t.leaves.iter().find(|l| !l.outcome.is_completed() || !ok(l)) {
        return Err(format!(
            "{} n={} N={:?}: branch {} ended {} with {:?}",
            cfg.protocol,
            cfg.n,
            cfg.bound,
            l.path,
            l.outcome.name(),
            l.outputs
        ));
    }
    Ok(t.leaves.len())
}

fn le_exhaustive() -> Verdict {
    let mut branches = Vec::new();
    for n in 2..=5 {
        let cfg = ProtocolConfig::new(ProtocolName::Le, n);
        branches.push(exhaustive_ok(&cfg, |l| leaders(&l.outputs) == 1)?);
    }
    Ok(format!("n=2..5 branches {branches:?}, one leader on each"))
}

fn le_sampled() -> Verdict {
    let mut runs = 0;
    let mut unsupported = 0;
    for n in 2..=10 {
        for kind in PolicyKind::ALL {
            let cfg = ProtocolConfig::new(ProtocolName::Le, n).with_policy(kind, 0);
            for l in sample(&cfg, 0..200, false).map_err(|e| e.to_string())? {
                runs += 1;
                match &l.outcome {
                    Outcome::Completed if leaders(&l.outputs) == 1 => {}
                    Outcome::UnsupportedMagic { .. } => unsupported += 1,
                    o => {
                        return Err(format!(
                            "n={n} {} seed {:?}: {} with {} leaders",
                            kind.name(),
                            l.seed,
                            o.name(),
                            leaders(&l.outputs)
                        ))
                    }
                }
            }
        }
    }
    Ok(format!("{runs} runs, all one leader, {unsupported} unsupported-magic"))
}

fn sb_correctness() -> Verdict {
    let mut branches = 0;
    for n in 2..=6 {
        branches += exhaustive_ok(&ProtocolConfig::new(ProtocolName::Sb, n), |l| mixed(&l.outputs))?;
    }
    let mut runs = 0;
    for n in 2..=10 {
        for kind in PolicyKind::ALL {
            let cfg = ProtocolConfig::new(ProtocolName::Sb, n).with_policy(kind, 0);
            for l in sample(&cfg, 0..200, false).map_err(|e| e.to_string())? {
                runs += 1;
                if l.outcome.is_completed() && !mixed(&l.outputs) {
                    return Err(format!("n={n} seed {:?}: groups not mixed", l.seed));
                }
                if !l.outcome.is_completed() && !matches!(l.outcome, Outcome::UnsupportedMagic { .. }) {
                    return Err(format!("n={n} seed {:?}: {}", l.seed, l.outcome.name()));
                }
            }
        }
    }
    Ok(format!("{branches} exhaustive branches (n=2..6), {runs} sampled runs (n=2..10)"))
}

fn dp_lockout() -> Verdict {
    let mut worst = 0.0f64;
    for n in 2..=10 {
        let budget = 50 * (n * n) as u64;
        let cfg = ProtocolConfig::new(ProtocolName::Dp, n)
            .with_policy(PolicyKind::AllHungry, 0)
            .with_courteous(true)
            .with_budget(budget);
        for l in sample(&cfg, 0..200, false).map_err(|e| e.to_string())? {
            if !l.outcome.is_completed() || l.meals.contains(&0) {
                return Err(format!(
                    "n={n} seed {:?}: {} meals {:?}",
                    l.seed,
                    l.outcome.name(),
                    l.meals
                ));
            }
            if !l.failed_lifts_before_first_eat.contains(&0) {
                return Err(format!(
                    "n={n} seed {:?}: every party failed a lift before the first meal",
                    l.seed
                ));
            }
            worst = worst.max(l.ledger.steps as f64 / (n * n) as f64);
        }
    }
    Ok(format!("n=2..10 x 200 seeds all fed, max steps/n^2 = {worst:.1} (budget 50)"))
}

fn dp_prime_halving() -> Verdict {
    let mut runs = 0;
    for n in 3..=8usize {
        for mask in 0u32..(1 << n) {
            let l = mask.count_ones();
            if l < 2 {
                continue;
            }
            let pattern: Vec<bool> = (0..n).map(|j| mask >> j & 1 == 1).collect();
            for seed in 0..50u64 {
                let kind = PolicyKind::ALL[(seed % 5) as usize];
                let cfg = ProtocolConfig::new(ProtocolName::DpPrime, n)
                    .with_eligible(pattern.clone())
                    .with_policy(kind, seed)
                    .with_seed(seed);
                let r = cfg.run().map_err(|e| e.to_string())?;
                runs += 1;
                let h = r.outputs[0].count;
                let fine = r.outcome.is_completed()
                    && r.outputs.iter().all(|o| o.count == h)
                    && h.is_some_and(|h| h >= 1 && h <= l / 2);
                if !fine {
                    return Err(format!(
                        "n={n} pattern {mask:0n$b} seed {seed}: {} counts {:?}",
                        r.outcome.name(),
                        r.outputs.iter().map(|o| o.count).collect::<Vec<_>>()
                    ));
                }
            }
        }
    }
    Ok(format!("{runs} runs, 1 <= h_out <= floor(L/2), all equal"))
}

fn complexity() -> Verdict {
    let sizes: Vec<usize> = (3..=10).collect();
    let mut notes = Vec::new();
    for p in [ProtocolName::Sb, ProtocolName::Le] {
        let cfg = ProtocolConfig::new(p, 3).with_policy(PolicyKind::SeededRandom, 0);
        let rep = audit(&cfg, &sizes, 20).map_err(|e| e.to_string())?;
        if let Some(c) = rep.checks.iter().find(|c| !c.passed) {
            return Err(format!("{p} {}: observed {} limit {}", c.name, c.observed, c.constant));
        }
        for r in &rep.rows {
            if p == ProtocolName::Le && r.iterations > ceil_log2(r.n) {
                return Err(format!("le n={} seed {}: {} iterations", r.n, r.seed, r.iterations));
            }
        }
        let slope = rep.fits.iter().find(|f| f.metric == "time").map_or(f64::NAN, |f| f.slope);
        notes.push(format!("{p} time slope {slope:.2}"));
        for c in &rep.checks {
            if c.name.contains('/') {
                notes.push(format!("{} {:.2}<={}", c.name, c.observed, c.constant));
            }
        }
    }
    Ok(notes.join(", "))
}

fn magic_gate() -> Verdict {
    let rep = validate_magic(2..=12).map_err(|e| e.to_string())?;
    for m in [2u32, 4, 6, 8, 10, 12] {
        let r = rep.row(m).ok_or(format!("no row for m={m}"))?;
        let method = if m <= 6 { ResidueMethod::BruteForce } else { ResidueMethod::Analytic };
        if !r.supported
            || r.unitarity_defect > DEFECT_MAX
            || r.support_residue > RESIDUE_MAX
            || r.residue_method != method
        {
            return Err(format!(
                "m={m}: supported {} defect {:e} residue {:e} method {:?}",
                r.supported, r.unitarity_defect, r.support_residue, r.residue_method
            ));
        }
    }
    let mut odd = Vec::new();
    for m in [3u32, 5] {
        let r = rep.row(m).ok_or(format!("no row for m={m}"))?;
        if r.supported && r.support_residue > RESIDUE_MAX {
            return Err(format!("m={m}: supported but residue {:e}", r.support_residue));
        }
        odd.push(format!("m={m} {}", if r.supported { "supported" } else { "unsupported" }));
    }
    Ok(format!("even m=2..12 pass, {}", odd.join(", ")))
}

fn anonymity() -> Verdict {
    let n = 4;
    let mut checks = 0;
    for p in [ProtocolName::Sb, ProtocolName::Le] {
        let cfg = ProtocolConfig::new(p, n);
        let t = tree(&cfg)?;
        for leaf in &t.leaves {
            let bits: Vec<u8> = leaf.path.bytes().map(|b| b - b'0').collect();
            for d in 0..n {
                checks += 1;
                if !rotation_check(&cfg, d, Some(bits.clone())).map_err(|e| e.to_string())? {
                    return Err(format!("{p} branch {} differs under rotation by {d}", leaf.path));
                }
            }
        }
    }
    Ok(format!("{checks} (branch, d) pairs on sb and le at n=4"))
}

fn bounded() -> Verdict {
    let mut counts = Vec::new();
    for (n, bound) in [(2, 3), (3, 4), (3, 5), (4, 6)] {
        let sb = ProtocolConfig::new(ProtocolName::SbBounded, n).with_bound(bound);
        let le = ProtocolConfig::new(ProtocolName::LeBounded, n).with_bound(bound);
        let a = exhaustive_ok(&sb, |l| mixed(&l.outputs))?;
        let b = exhaustive_ok(&le, |l| leaders(&l.outputs) == 1)?;
        counts.push(format!("({n},{bound}):{a}/{b}"));
    }
    Ok(format!("exhaustive sb/le branches {}", counts.join(" ")))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("le-exhaustive", le_exhaustive, Duration::from_secs(120)),
        ("le-sampled", le_sampled, Duration::from_secs(600)),
        ("sb-correctness", sb_correctness, Duration::from_secs(300)),
        ("dp-deadlock-lockout", dp_lockout, Duration::from_secs(300)),
        ("dp-prime-halving", dp_prime_halving, Duration::from_secs(300)),
        ("complexity", complexity, Duration::from_secs(300)),
        ("magic-gate", magic_gate, Duration::from_secs(60)),
        ("anonymity", anonymity, Duration::from_secs(60)),
        ("bounded-variants", bounded, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (name, f, limit) in criteria {
        let t = Instant::now();
        let v = f();
        let took = t.elapsed();
        let v = match v {
            Ok(msg) if took > limit => Err(format!("{msg}; took {took:.1?}, limit {limit:?}")),
            other => other,
        };
        match v {
            Ok(msg) => println!("PASS {name:<20} {msg} [{took:.1?}]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name:<20} {msg} [{took:.1?}]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
