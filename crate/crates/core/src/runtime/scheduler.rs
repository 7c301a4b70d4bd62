//! Choosing which schedulable entity gets the token.
//!
//! Entity `3j` is party `j`'s local action, `3j + 1` the delivery of the
//! head of its left incoming channel and `3j + 2` of its right one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ring::Side;

pub fn local_entity(party: usize) -> usize {
    3 * party
}

pub fn delivery_entity(party: usize, from: Side) -> usize {
    3 * party + 1 + from.index()
}

/// Entity on a ring shifted by `d`.
pub fn rotate_entity(e: usize, d: usize, n: usize) -> usize {
    3 * ((e / 3 + d) % n) + e % 3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    RoundRobin,
    SeededRandom,
    /// Every party hungry at step 0, random scheduling.
    AllHungry,
    /// The target party's entities are deferred until forced.
    OneStarved,
    /// Deliveries on the target party's left incoming channel are deferred
    /// until forced.
    ChannelDelay,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::RoundRobin,
        PolicyKind::SeededRandom,
        PolicyKind::AllHungry,
        PolicyKind::OneStarved,
        PolicyKind::ChannelDelay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::RoundRobin => "round-robin",
            PolicyKind::SeededRandom => "seeded-random",
            PolicyKind::AllHungry => "all-hungry",
            PolicyKind::OneStarved => "one-starved",
            PolicyKind::ChannelDelay => "channel-delay",
        }
    }

    pub fn parse(s: &str) -> Option<PolicyKind> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_deterministic(self) -> bool {
        self == PolicyKind::RoundRobin
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SchedulerPolicy {
    pub kind: PolicyKind,
    pub seed: u64,
    /// Fairness bound. `None` means the default `4 * 3n`.
    pub fairness: Option<u64>,
    /// Party targeted by the starvation and channel-delay presets.
    #[serde(default)]
    pub target: usize,
}

impl SchedulerPolicy {
    pub fn new(kind: PolicyKind, seed: u64) -> Self {
        SchedulerPolicy {
            kind,
            seed,
            fairness: None,
            target: 0,
        }
    }

    pub fn round_robin() -> Self {
        Self::new(PolicyKind::RoundRobin, 0)
    }

    pub fn bound(&self, n: usize) -> u64 {
        self.fairness.unwrap_or(4 * 3 * n as u64).max(1)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("replayed choice {choice} at position {pos} is not enabled")]
    Diverged { pos: usize, choice: usize },
    #[error("replay sequence exhausted at position {0}")]
    Exhausted(usize),
}

#[derive(Debug, Clone)]
enum Mode {
    Policy(PolicyKind),
    Replay { choices: Vec<usize>, pos: usize },
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    mode: Mode,
    rng: ChaCha8Rng,
    bound: u64,
    target: usize,
    age: Vec<u64>,
    last: Option<usize>,
}

impl Scheduler {
    pub fn new(policy: &SchedulerPolicy, n: usize) -> Self {
        Scheduler {
            mode: Mode::Policy(policy.kind),
            rng: ChaCha8Rng::seed_from_u64(policy.seed ^ 0x5e_ed0f_5c4e_d01e),
            bound: policy.bound(n),
            target: policy.target % n.max(1),
            age: vec![0; 3 * n],
            last: None,
        }
    }

    /// Replays a recorded choice sequence exactly.
    pub fn replay(choices: Vec<usize>, n: usize) -> Self {
        Scheduler {
            mode: Mode::Replay { choices, pos: 0 },
            rng: ChaCha8Rng::seed_from_u64(0),
            bound: u64::MAX,
            target: 0,
            age: vec![0; 3 * n],
            last: None,
        }
    }

    fn deferred(&self, kind: PolicyKind, e: usize) -> bool {
        match kind {
            PolicyKind::OneStarved => e / 3 == self.target,
            PolicyKind::ChannelDelay => e == delivery_entity(self.target, Side::Left),
            _ => false,
        }
    }

    /// Picks one of `enabled`, which must be sorted and non-empty.
    pub fn choose(&mut self, enabled: &[usize]) -> Result<usize, ScheduleError> {
        let pick = match &mut self.mode {
            Mode::Replay { choices, pos } => {
                let c = *choices.get(*pos).ok_or(ScheduleError::Exhausted(*pos))?;
                if enabled.binary_search(&c).is_err() {
                    return Err(ScheduleError::Diverged { pos: *pos, choice: c });
                }
                *pos += 1;
                c
            }
            Mode::Policy(kind) => {
                let kind = *kind;
                let overdue = enabled
                    .iter()
                    .copied()
                    .filter(|e| self.age[*e] >= self.bound)
                    .max_by_key(|e| (self.age[*e], std::cmp::Reverse(*e)));
                match overdue {
                    Some(e) => e,
                    None => self.by_policy(kind, enabled),
                }
            }
        };
        // `age` counts consecutive steps an entity stayed enabled without
        // being chosen; anything else restarts from zero.
        let mut next = vec![0; self.age.len()];
        for &e in enabled {
            if e != pick {
                next[e] = self.age[e] + 1;
            }
        }
        self.age = next;
        self.last = Some(pick);
        Ok(pick)
    }

    fn by_policy(&mut self, kind: PolicyKind, enabled: &[usize]) -> usize {
        match kind {
            PolicyKind::RoundRobin => {
                let after = self.last.map_or(0, |l| l + 1);
                enabled
                    .iter()
                    .copied()
                    .find(|e| *e >= after)
                    .unwrap_or(enabled[0])
            }
            PolicyKind::SeededRandom | PolicyKind::AllHungry => {
                enabled[self.rng.gen_range(0..enabled.len())]
            }
            PolicyKind::OneStarved | PolicyKind::ChannelDelay => {
                let preferred: Vec<usize> = enabled
                    .iter()
                    .copied()
                    .filter(|e| !self.deferred(kind, *e))
                    .collect();
                let pool = if preferred.is_empty() {
                    enabled
                } else {
                    &preferred
                };
                pool[self.rng.gen_range(0..pool.len())]
            }
        }
    }

    pub fn ages(&self) -> &[u64] {
        &self.age
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(s: &mut Scheduler, enabled: &[usize]) -> usize {
        s.choose(enabled).unwrap()
    }

    #[test]
    fn round_robin_cycles() {
        let mut s = Scheduler::new(&SchedulerPolicy::round_robin(), 3);
        let en = [0, 3, 6];
        let picks: Vec<usize> = (0..6).map(|_| step(&mut s, &en)).collect();
        assert_eq!(picks, vec![0, 3, 6, 0, 3, 6]);
    }

    #[test]
    fn starved_party_is_forced_at_the_bound() {
        let mut p = SchedulerPolicy::new(PolicyKind::OneStarved, 1);
        p.fairness = Some(5);
        let mut s = Scheduler::new(&p, 2);
        let en = [0, 3];
        let picks: Vec<usize> = (0..12).map(|_| step(&mut s, &en)).collect();
        let first = picks.iter().position(|e| *e == 0).unwrap();
        assert_eq!(first, 5);
    }

    #[test]
    fn replay_detects_divergence() {
        let mut s = Scheduler::replay(vec![4], 2);
        assert_eq!(
            s.choose(&[0, 3]),
            Err(ScheduleError::Diverged { pos: 0, choice: 4 })
        );
    }

    #[test]
    fn entity_rotation_wraps() {
        assert_eq!(rotate_entity(7, 1, 3), 1);
        assert_eq!(rotate_entity(5, 2, 4), 11);
    }
}
