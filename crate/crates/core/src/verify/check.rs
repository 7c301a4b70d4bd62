//! Named properties over branch leaves and traces.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::explore::Leaf;
use super::rotation::rotation_check;
use super::VerifyError;
use crate::protocols::{ProtocolConfig, ProtocolName};
use crate::runtime::{Effect, ExecutionTrace, Outcome, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    UniqueLeader,
    SymmetryBroken,
    DeadlockFree,
    LockoutFree,
    Halving,
    MutualExclusion,
    Fifo,
    RotationEquivariance,
}

impl Property {
    pub const ALL: [Property; 8] = [
        Property::UniqueLeader,
        Property::SymmetryBroken,
        Property::DeadlockFree,
        Property::LockoutFree,
        Property::Halving,
        Property::MutualExclusion,
        Property::Fifo,
        Property::RotationEquivariance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::UniqueLeader => "unique-leader",
            Property::SymmetryBroken => "symmetry-broken",
            Property::DeadlockFree => "deadlock-free",
            Property::LockoutFree => "lockout-free",
            Property::Halving => "halving",
            Property::MutualExclusion => "mutual-exclusion",
            Property::Fifo => "fifo",
            Property::RotationEquivariance => "rotation-equivariance",
        }
    }

    /// Whether checking needs recorded traces.
    pub fn needs_trace(self) -> bool {
        matches!(self, Property::MutualExclusion | Property::Fifo)
    }

    /// The properties that make sense for `protocol`.
    pub fn defaults_for(protocol: ProtocolName) -> Vec<Property> {
        use Property::*;
        let mut v = match protocol {
            ProtocolName::Sb | ProtocolName::SbBounded => vec![SymmetryBroken],
            ProtocolName::Le | ProtocolName::LeBounded => vec![UniqueLeader],
            ProtocolName::DpPrime => vec![Halving],
            ProtocolName::Dp | ProtocolName::ClassicalDp => vec![DeadlockFree, LockoutFree],
        };
        v.extend([MutualExclusion, Fifo]);
        v
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = VerifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| VerifyError::BadProperty(s.to_string()))
    }
}

/// Enough to replay a failing branch: the measurement outcome string (or
/// seed) plus where in the trace things went wrong.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<u64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub property: Property,
    pub passed: bool,
    /// Leaves or runs examined.
    pub checked: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub results: Vec<PropertyResult>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn get(&self, p: Property) -> Option<&PropertyResult> {
        self.results.iter().find(|r| r.property == p)
    }
}

/// Chopstick holders replayed from lift and put-down effects. Returns the
/// first step at which a lift succeeded on a stick that was already held.
pub fn mutual_exclusion_violation(trace: &ExecutionTrace) -> Option<(u64, String)> {
    let mut holder: HashMap<usize, usize> = HashMap::new();
    for ev in trace.actions() {
        for eff in &ev.detail {
            match eff {
                Effect::Lift { stick, ok: true, .. } => {
                    if let Some(h) = holder.insert(*stick, ev.actor) {
                        return Some((
                            ev.step,
                            format!("party {} lifted stick {stick} held by {h}", ev.actor),
                        ));
                    }
                }
                Effect::PutDown { stick } => {
                    holder.remove(stick);
                }
                _ => {}
            }
        }
    }
    None
}

/// Each directed channel must deliver in send order.
pub fn fifo_violation(trace: &ExecutionTrace) -> Option<(u64, String)> {
    let n = trace.n;
    let mut chans: HashMap<(usize, Side), VecDeque<u64>> = HashMap::new();
    for ev in trace.actions() {
        for eff in &ev.detail {
            match eff {
                Effect::Send { side, seq, .. } => {
                    let to = match side {
                        Side::Left => (ev.actor + 1) % n,
                        Side::Right => (ev.actor + n - 1) % n,
                    };
                    chans.entry((to, side.opposite())).or_default().push_back(*seq);
                }
                Effect::Deliver { side, seq, .. } => {
                    let head = chans.get_mut(&(ev.actor, *side)).and_then(|q| q.pop_front());
                    if head != Some(*seq) {
                        return Some((
                            ev.step,
                            format!(
                                "party {} received message {seq} from the {side:?} but {head:?} was first",
                                ev.actor
                            ),
                        ));
                    }
                }
                _ => {}
            }
        }
    }
    None
}

fn leader_count(leaf: &Leaf) -> usize {
    leaf.outputs.iter().filter(|o| o.leader == Some(true)).count()
}

fn check_leaf(p: Property, leaf: &Leaf, cfg: &ProtocolConfig) -> Result<(), (Option<u64>, String)> {
    let completed = leaf.outcome.is_completed();
    match p {
        Property::UniqueLeader => {
            let k = leader_count(leaf);
            if k > 1 || (completed && k != 1) {
                return Err((None, format!("{k} leaders, outcome {}", leaf.outcome.name())));
            }
        }
        Property::SymmetryBroken => {
            if completed && cfg.n >= 2 {
                let g: Vec<bool> = leaf.outputs.iter().filter_map(|o| o.group).collect();
                if g.len() != cfg.n || !g.contains(&true) || !g.contains(&false) {
                    return Err((None, format!("group bits {g:?}")));
                }
            }
        }
        Property::DeadlockFree => {
            if let Outcome::Deadlock { stuck } = &leaf.outcome {
                return Err((None, format!("deadlock with parties {stuck:?} stuck")));
            }
            if cfg.protocol.is_dining() && leaf.first_eat_step.is_none() {
                return Err((None, format!("nobody ate, outcome {}", leaf.outcome.name())));
            }
        }
        Property::LockoutFree => {
            let hungry: Vec<usize> = cfg
                .effective_hunger()
                .events(cfg.n)
                .map_err(|e| (None, e.to_string()))?
                .into_iter()
                .map(|(p, _)| p)
                .collect();
            if let Some(p) = hungry.iter().find(|p| leaf.meals[**p] == 0) {
                return Err((None, format!("party {p} was hungry and never ate")));
            }
        }
        Property::Halving => {
            let l_in = cfg
                .eligible
                .as_ref()
                .map_or(cfg.n, |e| e.iter().filter(|x| **x).count()) as u32;
            if completed {
                let hs: Vec<Option<u32>> = leaf.outputs.iter().map(|o| o.count).collect();
                let h = hs[0].unwrap_or(0);
                let survivors = leaf.outputs.iter().filter(|o| o.eligible == Some(true)).count() as u32;
                let cap = if l_in >= 2 { l_in / 2 } else { 1 };
                if hs.iter().any(|x| *x != Some(h)) || h != survivors || h < 1 || h > cap {
                    return Err((None, format!("L = {l_in}, counts {hs:?}, survivors {survivors}")));
                }
            } else {
                return Err((None, format!("round did not complete: {}", leaf.outcome.name())));
            }
        }
        Property::MutualExclusion | Property::Fifo => {
            let Some(t) = &leaf.trace else {
                return Err((None, "no trace recorded".into()));
            };
            let v = if p == Property::Fifo {
                fifo_violation(t)
            } else {
                mutual_exclusion_violation(t)
            };
            if let Some((step, msg)) = v {
                return Err((Some(step), msg));
            }
        }
        Property::RotationEquivariance => {}
    }
    Ok(())
}

/// Checks `props` against every leaf. Rotation equivariance re-runs the
/// configuration for every shift of the ring.
pub fn check(
    cfg: &ProtocolConfig,
    leaves: &[Leaf],
    props: &[Property],
) -> Result<CheckReport, VerifyError> {
    let mut results = Vec::new();
    for &p in props {
        if p == Property::RotationEquivariance {
            let mut ce = None;
            for d in 0..cfg.n {
                if !rotation_check(cfg, d, None)? {
                    ce = Some(Counterexample {
                        path: String::new(),
                        seed: Some(cfg.seed),
                        step: None,
                        detail: format!("trace differs under rotation by {d}"),
                    });
                    break;
                }
            }
            results.push(PropertyResult {
                property: p,
                passed: ce.is_none(),
                checked: cfg.n,
                counterexample: ce,
            });
            continue;
        }
        let failure = leaves.iter().find_map(|leaf| {
            check_leaf(p, leaf, cfg).err().map(|(step, detail)| Counterexample {
                path: leaf.path.clone(),
                seed: leaf.seed,
                step,
                detail,
            })
        });
        results.push(PropertyResult {
            property: p,
            passed: failure.is_none(),
            checked: leaves.len(),
            counterexample: failure,
        });
    }
    Ok(CheckReport { results })
}

/// Outcome counts over a set of leaves, keyed by outcome name.
pub fn outcome_histogram(leaves: &[Leaf]) -> BTreeMap<&'static str, usize> {
    let mut h = BTreeMap::new();
    for l in leaves {
        *h.entry(l.outcome.name()).or_insert(0) += 1;
    }
    h
}
