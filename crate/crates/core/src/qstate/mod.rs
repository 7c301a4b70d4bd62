//! Sparse statevector engine with per-party qubit ownership.
//!
//! Amplitudes live in a map keyed by computational basis index, so the
//! cost of an operation tracks the support of the state rather than
//! `2^k`. The protocols in this crate only ever build products of Bell
//! pairs and cat states, whose support stays near `2^n` even when the
//! number of live qubits is `2n` or `3n`.
//!
//! Ownership is recorded here but enforced by the runtime: the engine
//! itself will happily act on any live handle.

mod magic;
mod source;

use std::collections::{BTreeMap, HashSet};

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex;
use serde::Serialize;
use thiserror::Error;

pub use magic::{
    build_magic, magic_cached, MagicMatrix, MagicUnitarySpec, ResidueMethod, VariantReport,
};
pub use source::{BornSampler, BranchSelector, OutcomeSource, Replay};

pub type C64 = Complex<f64>;

/// Tolerance for validation gates and freshness checks.
pub const GATE_TOL: f64 = 1e-9;
/// Tolerance for claims of exact zero.
pub const ZERO_TOL: f64 = 1e-12;
/// Entries with squared magnitude below this are dropped after a gate.
const PRUNE_SQR: f64 = 1e-30;
/// Basis indices are `u64`.
pub const MAX_QUBITS: usize = 64;

/// Opaque qubit identifier. Never reused within one engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct QubitHandle(u32);

impl QubitHandle {
    pub fn id(self) -> u32 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Owner {
    Party(usize),
    InTransit,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QError {
    #[error("cannot allocate zero qubits")]
    EmptyAlloc,
    #[error("register full: at most {MAX_QUBITS} live qubits")]
    Capacity,
    #[error("qubit {0:?} is not a fresh |0> separable from the rest")]
    NotFresh(QubitHandle),
    #[error("control and target are the same qubit")]
    SameQubit,
    #[error("both measurement outcomes have vanishing probability")]
    NumericalFailure,
    #[error("bad arity: {0}")]
    BadArity(String),
    #[error("magic unitary for m = {0} failed validation")]
    UnsupportedMagic(u32),
    #[error("pattern of length {got} for {expected} qubits")]
    BadPattern { expected: usize, got: usize },
    #[error("qubit {0:?} is entangled or not in |0>")]
    CannotRelease(QubitHandle),
    #[error("qubit {0:?} is not live")]
    Dead(QubitHandle),
    #[error("branch probability fell below the exploration threshold")]
    Pruned,
    #[error("forced outcome {0} has zero probability")]
    Impossible(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Life {
    Live(usize),
    Measured,
    Released,
}

#[derive(Debug, Clone)]
struct QubitInfo {
    owner: Owner,
    life: Life,
}

/// The global state of every live qubit in one run.
#[derive(Debug, Clone)]
pub struct QState {
    amps: BTreeMap<u64, C64>,
    /// `order[i]` is the handle stored at bit `i` of the basis index.
    order: Vec<QubitHandle>,
    info: Vec<QubitInfo>,
}

impl Default for QState {
    fn default() -> Self {
        Self::new()
    }
}

impl QState {
    pub fn new() -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(0, C64::new(1.0, 0.0));
        QState {
            amps,
            order: Vec::new(),
            info: Vec::new(),
        }
    }

    /// Appends `count` qubits in `|0>` owned by `owner`.
    pub fn alloc(&mut self, owner: usize, count: usize) -> Result<Vec<QubitHandle>, QError> {
        if count == 0 {
            return Err(QError::EmptyAlloc);
        }
        if self.order.len() + count > MAX_QUBITS {
            return Err(QError::Capacity);
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let h = QubitHandle(self.info.len() as u32);
            self.info.push(QubitInfo {
                owner: Owner::Party(owner),
                life: Life::Live(self.order.len()),
            });
            self.order.push(h);
            out.push(h);
        }
        Ok(out)
    }

    pub fn num_live(&self) -> usize {
        self.order.len()
    }

    pub fn support_size(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_live(&self, q: QubitHandle) -> bool {
        matches!(self.life(q), Some(Life::Live(_)))
    }

    pub fn owner(&self, q: QubitHandle) -> Option<Owner> {
        self.info.get(q.0 as usize).map(|i| i.owner)
    }

    pub fn set_owner(&mut self, q: QubitHandle, owner: Owner) -> Result<(), QError> {
        self.pos(q)?;
        self.info[q.0 as usize].owner = owner;
        Ok(())
    }

    /// Live qubits currently owned by `party`.
    pub fn owned_by(&self, party: usize) -> usize {
        self.order
            .iter()
            .filter(|h| self.info[h.0 as usize].owner == Owner::Party(party))
            .count()
    }

    /// Sorted `(basis index, amplitude)` pairs, for determinism checks.
    pub fn amplitudes(&self) -> Vec<(u64, C64)> {
        self.amps.iter().map(|(k, v)| (*k, *v)).collect()
    }

    /// Dense amplitude vector over `qs`, with `qs[0]` as the most
    /// significant bit. `qs` must list every live qubit exactly once.
    pub fn dense(&self, qs: &[QubitHandle]) -> Result<Vec<C64>, QError> {
        if qs.len() != self.order.len() {
            return Err(QError::BadPattern {
                expected: self.order.len(),
                got: qs.len(),
            });
        }
        let pos: Vec<usize> = qs.iter().map(|q| self.pos(*q)).collect::<Result<_, _>>()?;
        let k = qs.len();
        let mut out = vec![C64::new(0.0, 0.0); 1usize << k];
        for (idx, amp) in &self.amps {
            let mut d = 0usize;
            for p in &pos {
                d = (d << 1) | ((idx >> p) & 1) as usize;
            }
            out[d] += amp;
        }
        Ok(out)
    }

    fn life(&self, q: QubitHandle) -> Option<Life> {
        self.info.get(q.0 as usize).map(|i| i.life)
    }

    fn pos(&self, q: QubitHandle) -> Result<usize, QError> {
        match self.life(q) {
            Some(Life::Live(p)) => Ok(p),
            _ => Err(QError::Dead(q)),
        }
    }

    /// Probability that `q` reads 1.
    pub fn prob_one(&self, q: QubitHandle) -> Result<f64, QError> {
        let p = self.pos(q)?;
        let bit = 1u64 << p;
        let total = self.norm_sqr();
        let ones: f64 = self
            .amps
            .iter()
            .filter(|(k, _)| *k & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        Ok(ones / total)
    }

    fn is_fresh(&self, q: QubitHandle) -> Result<bool, QError> {
        Ok(self.prob_one(q)? <= GATE_TOL)
    }

    fn prune(map: BTreeMap<u64, C64>) -> BTreeMap<u64, C64> {
        map.into_iter().filter(|(_, a)| a.norm_sqr() > PRUNE_SQR).collect()
    }

    /// Applies a one-qubit matrix, `m[(row, col)]` in the `|0>,|1>` basis.
    pub fn apply_1q(&mut self, q: QubitHandle, m: &Matrix2<C64>) -> Result<(), QError> {
        let p = self.pos(q)?;
        let bit = 1u64 << p;
        let mut next: BTreeMap<u64, C64> = BTreeMap::new();
        for (idx, amp) in &self.amps {
            let col = ((idx >> p) & 1) as usize;
            let base = idx & !bit;
            for row in 0..2 {
                let c = m[(row, col)];
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                *next.entry(base | ((row as u64) << p)).or_default() += c * amp;
            }
        }
        self.amps = Self::prune(next);
        Ok(())
    }

    /// Applies a two-qubit matrix with `hi` as the more significant bit.
    pub fn apply_2q(
        &mut self,
        hi: QubitHandle,
        lo: QubitHandle,
        m: &Matrix4<C64>,
    ) -> Result<(), QError> {
        if hi == lo {
            return Err(QError::SameQubit);
        }
        let ph = self.pos(hi)?;
        let pl = self.pos(lo)?;
        let mask = (1u64 << ph) | (1u64 << pl);
        let mut next: BTreeMap<u64, C64> = BTreeMap::new();
        for (idx, amp) in &self.amps {
            let col = ((((idx >> ph) & 1) << 1) | ((idx >> pl) & 1)) as usize;
            let base = idx & !mask;
            for row in 0..4 {
                let c = m[(row, col)];
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                let r = row as u64;
                let target = base | ((r >> 1) << ph) | ((r & 1) << pl);
                *next.entry(target).or_default() += c * amp;
            }
        }
        self.amps = Self::prune(next);
        Ok(())
    }

    pub fn apply_h(&mut self, q: QubitHandle) -> Result<(), QError> {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        self.apply_1q(q, &Matrix2::new(s, s, s, -s))
    }

    pub fn apply_x(&mut self, q: QubitHandle) -> Result<(), QError> {
        let p = self.pos(q)?;
        let bit = 1u64 << p;
        self.amps = std::mem::take(&mut self.amps)
            .into_iter()
            .map(|(k, a)| (k ^ bit, a))
            .collect();
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: QubitHandle, target: QubitHandle) -> Result<(), QError> {
        if control == target {
            return Err(QError::SameQubit);
        }
        let pc = self.pos(control)?;
        let pt = self.pos(target)?;
        self.amps = std::mem::take(&mut self.amps)
            .into_iter()
            .map(|(k, a)| if (k >> pc) & 1 == 1 { (k ^ (1 << pt), a) } else { (k, a) })
            .collect();
        Ok(())
    }

    /// Turns two fresh qubits into `(|00> + |11>)/sqrt 2`.
    pub fn prepare_pair(&mut self, q1: QubitHandle, q2: QubitHandle) -> Result<(), QError> {
        if q1 == q2 {
            return Err(QError::SameQubit);
        }
        for q in [q1, q2] {
            if !self.is_fresh(q)? {
                return Err(QError::NotFresh(q));
            }
        }
        self.apply_h(q1)?;
        self.apply_cnot(q1, q2)
    }

    fn collapse<F>(&mut self, src: &mut dyn OutcomeSource, class: F) -> Result<u8, QError>
    where
        F: Fn(u64) -> u8,
    {
        let mut p = [0.0f64; 2];
        for (idx, amp) in &self.amps {
            p[class(*idx) as usize] += amp.norm_sqr();
        }
        let total = p[0] + p[1];
        if !(total > ZERO_TOL) || !total.is_finite() {
            return Err(QError::NumericalFailure);
        }
        let probs = [p[0] / total, p[1] / total];
        let outcome = src.choose(probs)?;
        let keep = p[outcome as usize];
        if keep <= 0.0 {
            return Err(QError::Impossible(outcome));
        }
        let scale = 1.0 / keep.sqrt();
        self.amps = std::mem::take(&mut self.amps)
            .into_iter()
            .filter(|(k, _)| class(*k) == outcome)
            .map(|(k, a)| (k, a * scale))
            .collect();
        Ok(outcome)
    }

    /// Projects the pair onto equal bits (0) or unequal bits (1).
    pub fn measure_parity(
        &mut self,
        qa: QubitHandle,
        qb: QubitHandle,
        src: &mut dyn OutcomeSource,
    ) -> Result<u8, QError> {
        if qa == qb {
            return Err(QError::SameQubit);
        }
        let pa = self.pos(qa)?;
        let pb = self.pos(qb)?;
        self.collapse(src, |k| (((k >> pa) ^ (k >> pb)) & 1) as u8)
    }

    /// Computational-basis measurement. The qubit leaves the statevector
    /// and its handle becomes classical.
    pub fn measure(&mut self, q: QubitHandle, src: &mut dyn OutcomeSource) -> Result<u8, QError> {
        let p = self.pos(q)?;
        let outcome = self.collapse(src, |k| ((k >> p) & 1) as u8)?;
        self.remove_bit(p, outcome);
        self.info[q.0 as usize].life = Life::Measured;
        Ok(outcome)
    }

    /// Retires a handle. Measured handles always release; live ones must
    /// read `|0>` with probability at least `1 - GATE_TOL`.
    pub fn release(&mut self, q: QubitHandle) -> Result<(), QError> {
        match self.life(q) {
            Some(Life::Measured) => {
                self.info[q.0 as usize].life = Life::Released;
                Ok(())
            }
            Some(Life::Live(p)) => {
                if !self.is_fresh(q)? {
                    return Err(QError::CannotRelease(q));
                }
                self.remove_bit(p, 0);
                let norm = self.norm_sqr().sqrt();
                if norm > 0.0 {
                    for a in self.amps.values_mut() {
                        *a /= norm;
                    }
                }
                self.info[q.0 as usize].life = Life::Released;
                Ok(())
            }
            _ => Err(QError::Dead(q)),
        }
    }

    /// Drops bit `p`, keeping entries where it equals `value`, and shifts
    /// higher positions down.
    fn remove_bit(&mut self, p: usize, value: u8) {
        let low = (1u64 << p) - 1;
        self.amps = std::mem::take(&mut self.amps)
            .into_iter()
            .filter(|(k, _)| ((k >> p) & 1) as u8 == value)
            .map(|(k, a)| ((k & low) | ((k >> (p + 1)) << p), a))
            .collect();
        self.order.remove(p);
        for (i, h) in self.order.iter().enumerate().skip(p) {
            self.info[h.0 as usize].life = Life::Live(i);
        }
    }

    /// Squared amplitude on the listed patterns of `qs`, summed over the
    /// remaining qubits. Pattern bit `i` is the value of `qs[i]`.
    pub fn support_probability(
        &self,
        qs: &[QubitHandle],
        patterns: &[Vec<u8>],
    ) -> Result<f64, QError> {
        let pos: Vec<usize> = qs.iter().map(|q| self.pos(*q)).collect::<Result<_, _>>()?;
        let mut set = HashSet::new();
        for pat in patterns {
            if pat.len() != qs.len() {
                return Err(QError::BadPattern {
                    expected: qs.len(),
                    got: pat.len(),
                });
            }
            set.insert(pat.clone());
        }
        let mut mass = 0.0;
        let mut buf = vec![0u8; qs.len()];
        for (idx, amp) in &self.amps {
            for (b, p) in buf.iter_mut().zip(&pos) {
                *b = ((idx >> p) & 1) as u8;
            }
            if set.contains(&buf) {
                mass += amp.norm_sqr();
            }
        }
        Ok(mass / self.norm_sqr())
    }

    /// Applies a validated magic unitary. Odd parameters take a fresh
    /// ancilla, which is entangled with `q` by a CNOT first.
    pub fn apply_magic(
        &mut self,
        spec: &MagicUnitarySpec,
        q: QubitHandle,
        anc: Option<QubitHandle>,
    ) -> Result<(), QError> {
        if !spec.supported {
            return Err(QError::UnsupportedMagic(spec.m));
        }
        match (&spec.matrix, anc) {
            (MagicMatrix::One(u), None) => {
                self.pos(q)?;
                self.apply_1q(q, u)
            }
            (MagicMatrix::Two(v), Some(a)) => {
                if a == q {
                    return Err(QError::SameQubit);
                }
                if !self.is_fresh(a)? {
                    return Err(QError::NotFresh(a));
                }
                self.pos(q)?;
                self.apply_cnot(q, a)?;
                self.apply_2q(q, a, v)
            }
            (MagicMatrix::One(_), Some(_)) => Err(QError::BadArity(format!(
                "m = {} takes no ancilla",
                spec.m
            ))),
            (MagicMatrix::Two(_), None) => Err(QError::BadArity(format!(
                "m = {} needs an ancilla",
                spec.m
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forced(bits: &[u8]) -> Replay {
        Replay::new(bits.to_vec())
    }

    #[test]
    fn alloc_appends_zero_qubits() {
        let mut s = QState::new();
        let hs = s.alloc(0, 2).unwrap();
        assert_eq!(hs.len(), 2);
        assert_eq!(s.dense(&hs).unwrap()[0], C64::new(1.0, 0.0));
        assert_eq!(s.alloc(0, 0), Err(QError::EmptyAlloc));
    }

    #[test]
    fn measured_qubit_leaves_register() {
        let mut s = QState::new();
        let q = s.alloc(0, 2).unwrap();
        s.apply_x(q[0]).unwrap();
        assert_eq!(s.measure(q[0], &mut forced(&[1])).unwrap(), 1);
        assert_eq!(s.num_live(), 1);
        s.release(q[0]).unwrap();
        assert_eq!(s.release(q[0]), Err(QError::Dead(q[0])));
    }

    #[test]
    fn forced_impossible_outcome_is_rejected() {
        let mut s = QState::new();
        let q = s.alloc(0, 1).unwrap();
        assert!(s.measure(q[0], &mut forced(&[1])).is_err());
    }

    #[test]
    fn release_shifts_positions() {
        let mut s = QState::new();
        let q = s.alloc(0, 3).unwrap();
        s.apply_x(q[2]).unwrap();
        s.release(q[0]).unwrap();
        assert_eq!(s.prob_one(q[2]).unwrap(), 1.0);
        assert_eq!(s.prob_one(q[1]).unwrap(), 0.0);
    }
}
