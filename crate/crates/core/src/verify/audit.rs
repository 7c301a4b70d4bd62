//! Complexity audit: ledgers over a grid of ring sizes and seeds, log-log
//! fits, and budget checks against frozen constants.

use rayon::prelude::*;
use serde::Serialize;

use super::VerifyError;
use crate::protocols::{ProtocolConfig, ProtocolName};
use crate::runtime::HungerSpec;

/// Classical bits of symmetry breaking per `n^2`.
pub const C1_SB_CBITS: f64 = 4.0;
/// Atomic actions of symmetry breaking per `n^2`.
pub const C2_SB_TIME: f64 = 8.0;
/// Classical bits of leader election per `n^2 * ceil(log2 n)`.
pub const C3_LE_CBITS: f64 = 4.0;
/// Per-party classical memory per `ceil(log2 n)`.
pub const C4_MEMORY: f64 = 32.0;
/// Live qubits any party may hold at once.
pub const MAX_PARTY_QUBITS: u32 = 3;
/// Accepted range for the fitted slope of time against `n`.
pub const SB_TIME_SLOPE: (f64, f64) = (1.6, 2.4);

pub const MIN_SIZES: usize = 4;
pub const MIN_SEEDS: u64 = 20;

pub fn ceil_log2(n: usize) -> u32 {
    (usize::BITS - (n.max(2) - 1).leading_zeros()).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub n: usize,
    pub seed: u64,
    pub outcome: &'static str,
    pub time: u64,
    pub cbits: u64,
    pub qubits: u64,
    pub mem_bits_max: u32,
    pub qubits_max: u32,
    pub iterations: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fit {
    pub metric: &'static str,
    /// `log-log` fits `ln y = slope * ln n + intercept`; `log2` fits
    /// `y = slope * log2 n + intercept`.
    pub kind: &'static str,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetCheck {
    pub name: String,
    /// The declared constant or limit.
    pub constant: f64,
    /// Largest observed value of the checked ratio (or the slope).
    pub observed: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub protocol: ProtocolName,
    pub sizes: Vec<usize>,
    pub seeds: u64,
    pub rows: Vec<AuditRow>,
    pub fits: Vec<Fit>,
    pub checks: Vec<BudgetCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&BudgetCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub const CSV_HEADER: &'static str = "n,seed,time,cbits,qubits,mem_bits_max,qubits_max,iterations";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.n, r.seed, r.time, r.cbits, r.qubits, r.mem_bits_max, r.qubits_max, r.iterations
            ));
        }
        s
    }
}

/// Ordinary least squares `y = a x + b`.
pub fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let k = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (a, my - a * mx)
}

fn loglog(rows: &[AuditRow], metric: &'static str, f: impl Fn(&AuditRow) -> u64) -> Fit {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.n as f64).ln(), (f(r).max(1) as f64).ln()))
        .collect();
    let (slope, intercept) = least_squares(&pts);
    Fit {
        metric,
        kind: "log-log",
        slope,
        intercept,
    }
}

fn ratio_check(
    name: &str,
    rows: &[AuditRow],
    constant: f64,
    f: impl Fn(&AuditRow) -> f64,
) -> BudgetCheck {
    let observed = rows.iter().map(&f).fold(0.0, f64::max);
    BudgetCheck {
        name: name.to_string(),
        constant,
        observed,
        passed: observed <= constant,
    }
}

fn run_row(template: &ProtocolConfig, n: usize, seed: u64) -> Result<AuditRow, VerifyError> {
    let mut c = template.clone();
    c.n = n;
    c.seed = seed;
    c.policy.seed = seed;
    if let Some(extra) = template.bound.map(|b| b as usize).filter(|_| template.protocol.is_bounded()) {
        // Keep the slack between bound and ring size fixed across sizes.
        c.bound = Some((n + extra.saturating_sub(template.n)) as u32);
    }
    if c.protocol.is_dining() && c.hunger.is_empty() {
        c.hunger = HungerSpec::All;
    }
    let r = c.run()?;
    Ok(AuditRow {
        n,
        seed,
        outcome: r.outcome.name(),
        time: r.ledger.time,
        cbits: r.ledger.classical_bits,
        qubits: r.ledger.qubits_sent,
        mem_bits_max: r.ledger.max_mem_bits(),
        qubits_max: r.ledger.max_qubits(),
        iterations: r.outputs.iter().filter_map(|o| o.iterations).max().unwrap_or(0),
    })
}

/// Runs `template` for every size in `sizes` and seeds `0..seeds`.
pub fn audit(
    template: &ProtocolConfig,
    sizes: &[usize],
    seeds: u64,
) -> Result<AuditReport, VerifyError> {
    let mut ns: Vec<usize> = sizes.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < MIN_SIZES || seeds < MIN_SEEDS {
        return Err(VerifyError::NotEnoughData {
            sizes: ns.len(),
            seeds,
        });
    }
    let grid: Vec<(usize, u64)> = ns
        .iter()
        .flat_map(|n| (0..seeds).map(move |s| (*n, s)))
        .collect();
    let rows: Vec<AuditRow> = grid
        .par_iter()
        .map(|(n, s)| run_row(template, *n, *s))
        .collect::<Result<_, _>>()?;

    let mut fits = vec![
        loglog(&rows, "time", |r| r.time),
        loglog(&rows, "cbits", |r| r.cbits),
        loglog(&rows, "qubits", |r| r.qubits),
    ];
    let mem_pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (f64::from(ceil_log2(r.n)), f64::from(r.mem_bits_max)))
        .collect();
    let (slope, intercept) = least_squares(&mem_pts);
    fits.push(Fit {
        metric: "mem_bits_max",
        kind: "log2",
        slope,
        intercept,
    });

    let n2 = |r: &AuditRow| (r.n * r.n) as f64;
    let lg = |r: &AuditRow| f64::from(ceil_log2(r.n));
    let mut checks = vec![
        BudgetCheck {
            name: "completed".into(),
            constant: 0.0,
            observed: rows.iter().filter(|r| r.outcome != "completed").count() as f64,
            passed: rows.iter().all(|r| r.outcome == "completed"),
        },
        ratio_check("party-qubits", &rows, f64::from(MAX_PARTY_QUBITS), |r| {
            f64::from(r.qubits_max)
        }),
        ratio_check("memory/log2n", &rows, C4_MEMORY, |r| {
            f64::from(r.mem_bits_max) / lg(r)
        }),
    ];
    match template.protocol {
        ProtocolName::Sb => {
            let off = rows.iter().filter(|r| r.qubits != r.n as u64).count();
            checks.push(BudgetCheck {
                name: "qubits=n".into(),
                constant: 0.0,
                observed: off as f64,
                passed: off == 0,
            });
            checks.push(ratio_check("cbits/n^2", &rows, C1_SB_CBITS, |r| r.cbits as f64 / n2(r)));
            checks.push(ratio_check("time/n^2", &rows, C2_SB_TIME, |r| r.time as f64 / n2(r)));
            let s = fits[0].slope;
            checks.push(BudgetCheck {
                name: "time-slope".into(),
                constant: SB_TIME_SLOPE.1,
                observed: s,
                passed: (SB_TIME_SLOPE.0..=SB_TIME_SLOPE.1).contains(&s),
            });
        }
        ProtocolName::Le => {
            checks.push(ratio_check("iterations/log2n", &rows, 1.0, |r| {
                f64::from(r.iterations) / lg(r)
            }));
            checks.push(ratio_check("cbits/(n^2 log2n)", &rows, C3_LE_CBITS, |r| {
                r.cbits as f64 / (n2(r) * lg(r))
            }));
        }
        _ => {}
    }
    Ok(AuditReport {
        protocol: template.protocol,
        sizes: ns,
        seeds,
        rows,
        fits,
        checks,
    })
}
