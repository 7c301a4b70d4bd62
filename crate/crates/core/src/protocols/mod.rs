//! Protocol state machines and the glue that turns a configuration into a
//! runnable [`World`].

mod dp;
mod dp_prime;
mod le;
mod sb;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dp::{le_to_dp, AdapterError, ClassicalParty, DiningParty, SbProvider};
pub use dp_prime::{DpPrimeParty, DpStep, Tally};
pub use le::LeParty;
pub use sb::{SbMachine, SbParty};

use crate::qstate::MAX_QUBITS;
use crate::runtime::{
    Coins, Completion, HungerError, HungerSpec, PolicyKind, Process, RunReport, Scheduler,
    SchedulerPolicy, Source, WindowMode, World,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolName {
    Sb,
    SbBounded,
    Dp,
    DpPrime,
    Le,
    LeBounded,
    ClassicalDp,
}

impl ProtocolName {
    pub const ALL: [ProtocolName; 7] = [
        ProtocolName::Sb,
        ProtocolName::SbBounded,
        ProtocolName::Dp,
        ProtocolName::DpPrime,
        ProtocolName::Le,
        ProtocolName::LeBounded,
        ProtocolName::ClassicalDp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolName::Sb => "sb",
            ProtocolName::SbBounded => "sb-bounded",
            ProtocolName::Dp => "dp",
            ProtocolName::DpPrime => "dp-prime",
            ProtocolName::Le => "le",
            ProtocolName::LeBounded => "le-bounded",
            ProtocolName::ClassicalDp => "classical-dp",
        }
    }

    /// Dining protocols driven by a hunger schedule.
    pub fn is_dining(self) -> bool {
        matches!(self, ProtocolName::Dp | ProtocolName::ClassicalDp)
    }

    pub fn is_bounded(self) -> bool {
        matches!(self, ProtocolName::SbBounded | ProtocolName::LeBounded)
    }
}

impl fmt::Display for ProtocolName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolName {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| ConfigError::UnknownProtocol(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("unknown protocol {0:?}")]
    UnknownProtocol(String),
    #[error("ring size must be at least {min}, got {n}")]
    RingTooSmall { n: usize, min: usize },
    #[error("ring size {0} exceeds the simulator limit of {max}", max = MAX_RING)]
    RingTooLarge(usize),
    #[error("bound {bound} is below the ring size {n}")]
    BoundBelowRing { bound: u32, n: usize },
    #[error("{0} needs a bound N")]
    MissingBound(ProtocolName),
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("{0} needs a non-empty hunger schedule")]
    NeedsHunger(ProtocolName),
    #[error(transparent)]
    Hunger(#[from] HungerError),
    #[error("eligibility pattern has {got} entries for a ring of {n}")]
    EligibleLength { got: usize, n: usize },
    #[error("at least one party must be eligible")]
    NoEligible,
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

/// Largest ring the engine accepts: up to three live qubits per party must
/// fit the 64-bit basis index.
pub const MAX_RING: usize = MAX_QUBITS / 3;

pub const DEFAULT_BUDGET: u64 = 1_000_000;

fn default_budget() -> u64 {
    DEFAULT_BUDGET
}

/// Everything needed to build one run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProtocolConfig {
    pub protocol: ProtocolName,
    pub n: usize,
    /// The bound `N` for the bounded variants; for `dp` it switches the
    /// group source to bounded symmetry breaking.
    #[serde(default)]
    pub bound: Option<u32>,
    #[serde(default)]
    pub courteous: bool,
    #[serde(default)]
    pub hunger: HungerSpec,
    /// `dp-prime` eligibility pattern. Defaults to everyone.
    #[serde(default)]
    pub eligible: Option<Vec<bool>>,
    /// `dp` only: take groups from this leader instead of running
    /// symmetry breaking.
    #[serde(default)]
    pub leader: Option<usize>,
    pub policy: SchedulerPolicy,
    /// Seed of the measurement stream and of classical coins.
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub budget: u64,
    /// `classical-dp` only: force every coin to this value.
    #[serde(default)]
    pub constant_coin: Option<bool>,
}

impl ProtocolConfig {
    pub fn new(protocol: ProtocolName, n: usize) -> Self {
        ProtocolConfig {
            protocol,
            n,
            bound: None,
            courteous: false,
            hunger: HungerSpec::None,
            eligible: None,
            leader: None,
            policy: SchedulerPolicy::round_robin(),
            seed: 0,
            budget: DEFAULT_BUDGET,
            constant_coin: None,
        }
    }

    pub fn with_bound(mut self, bound: u32) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn with_policy(mut self, kind: PolicyKind, seed: u64) -> Self {
        self.policy = SchedulerPolicy::new(kind, seed);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_hunger(mut self, hunger: HungerSpec) -> Self {
        self.hunger = hunger;
        self
    }

    pub fn with_courteous(mut self, on: bool) -> Self {
        self.courteous = on;
        self
    }

    pub fn with_eligible(mut self, eligible: Vec<bool>) -> Self {
        self.eligible = Some(eligible);
        self
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    /// The hunger schedule actually used: the all-hungry preset overrides
    /// the configured one for dining protocols.
    pub fn effective_hunger(&self) -> HungerSpec {
        if self.protocol.is_dining() && self.policy.kind == PolicyKind::AllHungry {
            HungerSpec::All
        } else {
            self.hunger.clone()
        }
    }

    fn eligible_flags(&self) -> Vec<bool> {
        self.eligible.clone().unwrap_or_else(|| vec![true; self.n])
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let min = if self.protocol.is_dining() { 2 } else { 1 };
        if self.n < min {
            return Err(ConfigError::RingTooSmall { n: self.n, min });
        }
        if self.n > MAX_RING {
            return Err(ConfigError::RingTooLarge(self.n));
        }
        if self.budget == 0 {
            return Err(ConfigError::ZeroBudget);
        }
        if let Some(b) = self.bound {
            if (b as usize) < self.n {
                return Err(ConfigError::BoundBelowRing { bound: b, n: self.n });
            }
        } else if self.protocol.is_bounded() {
            return Err(ConfigError::MissingBound(self.protocol));
        }
        if self.protocol.is_dining() {
            let h = self.effective_hunger();
            h.events(self.n)?;
            if h.is_empty() {
                return Err(ConfigError::NeedsHunger(self.protocol));
            }
        }
        if self.protocol == ProtocolName::DpPrime {
            let e = self.eligible_flags();
            if e.len() != self.n {
                return Err(ConfigError::EligibleLength {
                    got: e.len(),
                    n: self.n,
                });
            }
            if !e.iter().any(|x| *x) {
                return Err(ConfigError::NoEligible);
            }
        }
        if let Some(l) = self.leader {
            let mut flags = vec![false; self.n];
            if l < self.n {
                flags[l] = true;
            }
            le_to_dp(&flags)?;
        }
        Ok(())
    }

    fn parties(&self) -> Result<Vec<Box<dyn Process>>, ConfigError> {
        let n = self.n;
        let bound = self.bound.unwrap_or(n as u32);
        let mut out: Vec<Box<dyn Process>> = Vec::with_capacity(n);
        match self.protocol {
            ProtocolName::Sb => out.extend((0..n).map(|_| boxed(SbParty::new(n as u32)))),
            ProtocolName::SbBounded => out.extend((0..n).map(|_| boxed(SbParty::bounded(bound)))),
            ProtocolName::Dp => {
                let groups = match self.leader {
                    Some(l) => {
                        let mut f = vec![false; n];
                        f[l] = true;
                        Some(le_to_dp(&f)?)
                    }
                    None => None,
                };
                for j in 0..n {
                    let provider = match (&groups, self.bound) {
                        (Some(g), _) => SbProvider::Fixed(g[j]),
                        (None, Some(b)) => SbProvider::Bounded { bound: b },
                        (None, None) => SbProvider::Quantum { n: n as u32 },
                    };
                    out.push(boxed(DiningParty::new(provider, self.courteous)));
                }
            }
            ProtocolName::DpPrime => {
                let e = self.eligible_flags();
                let count = e.iter().filter(|x| **x).count() as u32;
                out.extend(e.iter().map(|l| boxed(DpPrimeParty::new(*l, count, n as u32))));
            }
            ProtocolName::Le => out.extend((0..n).map(|_| boxed(LeParty::new(n as u32)))),
            ProtocolName::LeBounded => out.extend((0..n).map(|_| boxed(LeParty::bounded(bound)))),
            ProtocolName::ClassicalDp => out.extend((0..n).map(|_| boxed(ClassicalParty::new()))),
        }
        Ok(out)
    }

    /// A world with an explicit scheduler and measurement source.
    pub fn build_with(&self, sched: Scheduler, src: Source) -> Result<World, ConfigError> {
        self.validate()?;
        let procs = self.parties()?;
        let (completion, window) = if self.protocol.is_dining() {
            (Completion::AllFed, WindowMode::FirstHungerToFirstEat)
        } else {
            (Completion::AllDone, WindowMode::Whole)
        };
        let mut world = World::new(procs, completion, window, sched, src);
        match self.protocol {
            ProtocolName::Le | ProtocolName::LeBounded => {
                world = world.with_flags(&vec![true; self.n]);
            }
            ProtocolName::DpPrime => world = world.with_flags(&self.eligible_flags()),
            ProtocolName::Dp | ProtocolName::ClassicalDp => {
                world = world.with_hunger(self.effective_hunger().events(self.n)?);
            }
            _ => {}
        }
        let coins = match self.constant_coin {
            Some(c) => Coins::Constant(c),
            None => Coins::seeded(self.seed),
        };
        Ok(world.with_coins(coins))
    }

    /// A world with the configured policy and Born sampling from `seed`.
    pub fn build(&self) -> Result<World, ConfigError> {
        let sched = Scheduler::new(&self.policy, self.n);
        self.build_with(sched, Source::seeded(self.seed))
    }

    pub fn run(&self) -> Result<RunReport, ConfigError> {
        Ok(self.build()?.run(self.budget))
    }

    /// Like [`run`](Self::run) but keeps the full trace.
    pub fn run_traced(&self) -> Result<RunReport, ConfigError> {
        Ok(self.build()?.with_trace(true).run(self.budget))
    }
}

fn boxed<P: Process + 'static>(p: P) -> Box<dyn Process> {
    Box::new(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in ProtocolName::ALL {
            assert_eq!(p.name().parse::<ProtocolName>().unwrap(), p);
        }
        assert!("paxos".parse::<ProtocolName>().is_err());
    }

    #[test]
    fn validation_catches_bad_configs() {
        assert!(ProtocolConfig::new(ProtocolName::Le, 0).validate().is_err());
        assert!(ProtocolConfig::new(ProtocolName::Dp, 4).validate().is_err());
        assert!(ProtocolConfig::new(ProtocolName::LeBounded, 4).validate().is_err());
        assert!(ProtocolConfig::new(ProtocolName::LeBounded, 4)
            .with_bound(3)
            .validate()
            .is_err());
        assert!(ProtocolConfig::new(ProtocolName::Le, 4)
            .with_budget(0)
            .validate()
            .is_err());
        assert!(ProtocolConfig::new(ProtocolName::DpPrime, 3)
            .with_eligible(vec![false; 3])
            .validate()
            .is_err());
        assert!(ProtocolConfig::new(ProtocolName::Dp, 4)
            .with_hunger(HungerSpec::All)
            .validate()
            .is_ok());
    }
}
