//! Branch enumeration, property checks, complexity audits, rotation checks
//! and magic-unitary validation.

mod audit;
mod check;
mod explore;
mod magic;
mod rotation;

use thiserror::Error;

pub use audit::{
    audit, ceil_log2, least_squares, AuditReport, AuditRow, BudgetCheck, Fit, C1_SB_CBITS,
    C2_SB_TIME, C3_LE_CBITS, C4_MEMORY, MAX_PARTY_QUBITS, MIN_SEEDS, MIN_SIZES, SB_TIME_SLOPE,
};
pub use check::{
    check, fifo_violation, mutual_exclusion_violation, outcome_histogram, CheckReport,
    Counterexample, Property, PropertyResult,
};
pub use explore::{
    explore, explore_capped, exhaustive_policy, sample, BranchTree, Leaf, PrunedBranch, TreeNode,
    DEFAULT_THRESHOLD, NODE_CAP,
};
pub use magic::{validate_magic, MagicReport};
pub use rotation::{rotate_trace, rotation_check};

use crate::protocols::ConfigError;
use crate::runtime::PolicyKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("branch tree exceeded the node cap ({0} nodes)")]
    TreeTooLarge(usize),
    #[error("exhaustive exploration needs a deterministic policy, got {}", .0.name())]
    NotDeterministic(PolicyKind),
    #[error("threshold must be a non-negative number, got {0}")]
    BadThreshold(f64),
    #[error("unknown property {0:?}")]
    BadProperty(String),
    #[error("not enough data: {sizes} ring sizes and {seeds} seeds (need {MIN_SIZES} and {MIN_SEEDS})")]
    NotEnoughData { sizes: usize, seeds: u64 },
    #[error("bad range {0}")]
    BadRange(String),
}
