//! Where measurement outcomes come from.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{QError, ZERO_TOL};

/// Picks an outcome for a two-outcome measurement with normalized
/// probabilities `probs`.
pub trait OutcomeSource {
    fn choose(&mut self, probs: [f64; 2]) -> Result<u8, QError>;
}

/// Born-rule sampling from a seeded stream. Outcomes below `ZERO_TOL`
/// are never picked and do not consume randomness.
#[derive(Debug, Clone)]
pub struct BornSampler {
    rng: ChaCha8Rng,
    log: Vec<u8>,
}

impl BornSampler {
    pub fn new(seed: u64) -> Self {
        BornSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            log: Vec::new(),
        }
    }

    /// Every outcome produced so far, in order.
    pub fn outcomes(&self) -> &[u8] {
        &self.log
    }
}

impl OutcomeSource for BornSampler {
    fn choose(&mut self, probs: [f64; 2]) -> Result<u8, QError> {
        let out = if probs[1] < ZERO_TOL {
            0
        } else if probs[0] < ZERO_TOL {
            1
        } else {
            u8::from(self.rng.gen::<f64>() < probs[1])
        };
        self.log.push(out);
        Ok(out)
    }
}

/// Replays a fixed outcome sequence. Running past its end is reported
/// as `Pruned`.
#[derive(Debug, Clone)]
pub struct Replay {
    seq: Vec<u8>,
    pos: usize,
}

impl Replay {
    pub fn new(seq: Vec<u8>) -> Self {
        Replay { seq, pos: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }

    pub fn consumed_prefix(&self) -> Vec<u8> {
        self.seq[..self.pos].to_vec()
    }
}

impl OutcomeSource for Replay {
    fn choose(&mut self, probs: [f64; 2]) -> Result<u8, QError> {
        let out = *self.seq.get(self.pos).ok_or(QError::Pruned)?;
        if probs[out as usize] <= 0.0 {
            return Err(QError::Impossible(out));
        }
        self.pos += 1;
        Ok(out)
    }
}

/// One measurement seen by a [`BranchSelector`].
#[derive(Debug, Clone, Copy)]
pub struct Decision {
    pub probs: [f64; 2],
    /// Probability of the branch before this measurement.
    pub before: f64,
    /// `None` when both outcomes fell below the threshold.
    pub chosen: Option<u8>,
}

/// Depth-first branch selection: follows a forced prefix, then takes the
/// first outcome whose running probability stays above `threshold`.
#[derive(Debug, Clone)]
pub struct BranchSelector {
    prefix: Vec<u8>,
    threshold: f64,
    prob: f64,
    pub decisions: Vec<Decision>,
}

impl BranchSelector {
    pub fn new(prefix: Vec<u8>, threshold: f64) -> Self {
        BranchSelector {
            prefix,
            threshold,
            prob: 1.0,
            decisions: Vec::new(),
        }
    }

    pub fn probability(&self) -> f64 {
        self.prob
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix.len()
    }

    pub fn outcomes(&self) -> Vec<u8> {
        self.decisions.iter().filter_map(|d| d.chosen).collect()
    }
}

impl OutcomeSource for BranchSelector {
    fn choose(&mut self, probs: [f64; 2]) -> Result<u8, QError> {
        let before = self.prob;
        let i = self.decisions.len();
        let pick = if i < self.prefix.len() {
            let c = self.prefix[i];
            if probs[c as usize] <= 0.0 {
                return Err(QError::Impossible(c));
            }
            Some(c)
        } else {
            (0..2u8).find(|&c| before * probs[c as usize] > self.threshold)
        };
        self.decisions.push(Decision {
            probs,
            before,
            chosen: pick,
        });
        match pick {
            Some(c) => {
                self.prob *= probs[c as usize];
                Ok(c)
            }
            None => Err(QError::Pruned),
        }
    }
}
