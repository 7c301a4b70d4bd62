//! Depth-first enumeration of measurement branches.
//!
//! Each branch is a fresh run driven by a [`BranchSelector`]: it follows a
//! forced outcome prefix and then always takes the first outcome whose
//! running probability stays above the threshold. Every measurement seen
//! beyond the prefix either spawns the sibling branch or books the
//! sibling's mass as pruned.

use rayon::prelude::*;
use serde::Serialize;

use super::VerifyError;
use crate::protocols::ProtocolConfig;
use crate::qstate::BranchSelector;
use crate::runtime::{
    CostLedger, ExecutionTrace, Outcome, PartyOutput, PolicyKind, Scheduler, Source,
};

pub const DEFAULT_THRESHOLD: f64 = 1e-12;
pub const NODE_CAP: usize = 10_000_000;

fn bits(v: &[u8]) -> String {
    v.iter().map(|b| char::from(b'0' + b)).collect()
}

/// A measurement event: the outcome path leading to it and the branch
/// probability at that point.
#[derive(Debug, Clone, Serialize)]
pub struct TreeNode {
    pub path: String,
    pub probability: f64,
    pub probs: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct Leaf {
    /// Measurement outcomes along the branch.
    pub path: String,
    pub probability: f64,
    /// Seed for sampled runs; `None` for enumerated branches.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub outcome: Outcome,
    pub outputs: Vec<PartyOutput>,
    pub ledger: CostLedger,
    pub meals: Vec<u32>,
    pub failed_lifts_before_first_eat: Vec<u32>,
    pub first_eat_step: Option<u64>,
    #[serde(skip)]
    pub trace: Option<ExecutionTrace>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PrunedBranch {
    pub path: String,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchTree {
    pub threshold: f64,
    pub nodes: Vec<TreeNode>,
    pub leaves: Vec<Leaf>,
    pub pruned: Vec<PrunedBranch>,
}

impl BranchTree {
    pub fn pruned_mass(&self) -> f64 {
        self.pruned.iter().map(|p| p.mass).sum()
    }

    pub fn leaf_mass(&self) -> f64 {
        self.leaves.iter().map(|l| l.probability).sum()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len() + self.leaves.len()
    }

    /// Largest deviation from probability conservation: at the root, and
    /// at every measurement node against the mass below it.
    pub fn conservation_error(&self) -> f64 {
        let mut err = (self.leaf_mass() + self.pruned_mass() - 1.0).abs();
        let mut below: Vec<(&str, f64)> = self
            .leaves
            .iter()
            .map(|l| (l.path.as_str(), l.probability))
            .chain(self.pruned.iter().map(|p| (p.path.as_str(), p.mass)))
            .collect();
        below.sort_by(|a, b| a.0.cmp(b.0));
        for node in &self.nodes {
            let start = below.partition_point(|(p, _)| *p < node.path.as_str());
            let mass: f64 = below[start..]
                .iter()
                .take_while(|(p, _)| p.starts_with(&node.path))
                .filter(|(p, _)| p.len() > node.path.len())
                .map(|(_, m)| m)
                .sum();
            err = err.max((mass - node.probability).abs());
        }
        err
    }
}

struct BranchRun {
    leaf: Option<Leaf>,
    nodes: Vec<TreeNode>,
    pruned: Vec<PrunedBranch>,
    spawn: Vec<Vec<u8>>,
}

fn run_branch(
    cfg: &ProtocolConfig,
    prefix: Vec<u8>,
    threshold: f64,
    keep_trace: bool,
) -> Result<BranchRun, VerifyError> {
    let sched = Scheduler::new(&cfg.policy, cfg.n);
    let src = Source::Branch(BranchSelector::new(prefix.clone(), threshold));
    let report = cfg
        .build_with(sched, src)?
        .with_trace(keep_trace)
        .run(cfg.budget);
    let Some(Source::Branch(sel)) = &report.source else {
        unreachable!("the world hands back its branch selector");
    };
    let mut out = BranchRun {
        leaf: None,
        nodes: Vec::new(),
        pruned: Vec::new(),
        spawn: Vec::new(),
    };
    let mut path: Vec<u8> = Vec::new();
    for (i, d) in sel.decisions.iter().enumerate() {
        if i >= sel.prefix_len() {
            out.nodes.push(TreeNode {
                path: bits(&path),
                probability: d.before,
                probs: d.probs,
            });
            for c in 0..2u8 {
                if d.chosen == Some(c) {
                    continue;
                }
                let mass = d.before * d.probs[c as usize];
                let mut p = path.clone();
                p.push(c);
                if mass > threshold && d.chosen.is_some_and(|ch| ch < c) {
                    out.spawn.push(p);
                } else if mass > 0.0 {
                    out.pruned.push(PrunedBranch {
                        path: bits(&p),
                        mass,
                    });
                }
            }
        }
        match d.chosen {
            Some(c) => path.push(c),
            None => break,
        }
    }
    if report.outcome != Outcome::Pruned {
        out.leaf = Some(Leaf {
            path: bits(&path),
            probability: sel.probability(),
            seed: None,
            outcome: report.outcome,
            outputs: report.outputs,
            ledger: report.ledger,
            meals: report.meals,
            failed_lifts_before_first_eat: report.failed_lifts_before_first_eat,
            first_eat_step: report.first_eat_step,
            trace: report.trace,
        });
    }
    Ok(out)
}

/// Enumerates every branch with probability above `threshold`.
/// Requires the round-robin policy so that branching comes only from
/// measurements.
pub fn explore(
    cfg: &ProtocolConfig,
    threshold: f64,
    keep_traces: bool,
) -> Result<BranchTree, VerifyError> {
    explore_capped(cfg, threshold, keep_traces, NODE_CAP)
}

pub fn explore_capped(
    cfg: &ProtocolConfig,
    threshold: f64,
    keep_traces: bool,
    cap: usize,
) -> Result<BranchTree, VerifyError> {
    if !cfg.policy.kind.is_deterministic() {
        return Err(VerifyError::NotDeterministic(cfg.policy.kind));
    }
    if !(threshold >= 0.0) {
        return Err(VerifyError::BadThreshold(threshold));
    }
    cfg.validate()?;
    let mut tree = BranchTree {
        threshold,
        nodes: Vec::new(),
        leaves: Vec::new(),
        pruned: Vec::new(),
    };
    let mut frontier: Vec<Vec<u8>> = vec![Vec::new()];
    while !frontier.is_empty() {
        let runs: Vec<BranchRun> = frontier
            .par_iter()
            .map(|p| run_branch(cfg, p.clone(), threshold, keep_traces))
            .collect::<Result<_, _>>()?;
        frontier = Vec::new();
        for r in runs {
            tree.nodes.extend(r.nodes);
            tree.pruned.extend(r.pruned);
            tree.leaves.extend(r.leaf);
            frontier.extend(r.spawn);
        }
        if tree.node_count() > cap {
            return Err(VerifyError::TreeTooLarge(tree.node_count()));
        }
    }
    tree.nodes.sort_by(|a, b| a.path.cmp(&b.path));
    tree.leaves.sort_by(|a, b| a.path.cmp(&b.path));
    tree.pruned.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(tree)
}

/// Runs `seeds` independent Born-sampled runs under the configured policy.
/// The policy seed and the measurement seed both follow the run seed.
pub fn sample(
    cfg: &ProtocolConfig,
    seeds: std::ops::Range<u64>,
    keep_traces: bool,
) -> Result<Vec<Leaf>, VerifyError> {
    cfg.validate()?;
    let count = (seeds.end - seeds.start).max(1) as f64;
    seeds
        .into_par_iter()
        .map(|seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            c.policy.seed = seed;
            let world = c.build()?.with_trace(keep_traces);
            let r = world.run(c.budget);
            Ok(Leaf {
                path: r.measurements.clone(),
                probability: 1.0 / count,
                seed: Some(seed),
                outcome: r.outcome,
                outputs: r.outputs,
                ledger: r.ledger,
                meals: r.meals,
                failed_lifts_before_first_eat: r.failed_lifts_before_first_eat,
                first_eat_step: r.first_eat_step,
                trace: r.trace,
            })
        })
        .collect()
}

/// Convenience: the round-robin policy used by exhaustive mode.
pub fn exhaustive_policy(cfg: &ProtocolConfig) -> ProtocolConfig {
    let mut c = cfg.clone();
    c.policy.kind = PolicyKind::RoundRobin;
    c
}
