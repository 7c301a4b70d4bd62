//! Shared registers of the table: chopsticks, hunger bits, last-eater
//! registers and the sleep markers used to route wake-ups.
//!
//! Orientation: the left neighbour of party `j` is `j + 1` and the right
//! neighbour is `j - 1` (mod n). Chopstick `c` lies between `c` and
//! `c + 1`, so it is the left chopstick of `c` and the right chopstick of
//! `c + 1`. From the chopstick's point of view `c + 1` sits on its left
//! (counter-clockwise) and `c` on its right (clockwise).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }
}

/// Chopstick register. `L`: held by the party on its left, `R`: held by
/// the party on its right, `M`: on the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stick {
    L,
    M,
    R,
}

/// Who ate last across one edge, oriented like [`Stick`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LastEater {
    Neutral,
    L,
    R,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RingError {
    #[error("party {0} holds no chopstick")]
    NoChopstick(usize),
    #[error("party {0} is already hungry")]
    AlreadyHungry(usize),
}

#[derive(Debug, Clone)]
pub struct SharedRing {
    n: usize,
    sticks: Vec<Stick>,
    hungry: Vec<bool>,
    waiting: Vec<bool>,
    last: Vec<LastEater>,
}

impl SharedRing {
    pub fn new(n: usize) -> Self {
        SharedRing {
            n,
            sticks: vec![Stick::M; n],
            hungry: vec![false; n],
            waiting: vec![false; n],
            last: vec![LastEater::Neutral; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbor(&self, p: usize, side: Side) -> usize {
        match side {
            Side::Left => (p + 1) % self.n,
            Side::Right => (p + self.n - 1) % self.n,
        }
    }

    pub fn stick_index(&self, p: usize, side: Side) -> usize {
        match side {
            Side::Left => p,
            Side::Right => (p + self.n - 1) % self.n,
        }
    }

    /// Register value meaning "held by the party whose `side` stick this is".
    fn mark(side: Side) -> Stick {
        match side {
            Side::Left => Stick::R,
            Side::Right => Stick::L,
        }
    }

    pub fn sticks(&self) -> &[Stick] {
        &self.sticks
    }

    pub fn holder(&self, stick: usize) -> Option<usize> {
        match self.sticks[stick] {
            Stick::M => None,
            Stick::R => Some(stick),
            Stick::L => Some((stick + 1) % self.n),
        }
    }

    pub fn holds(&self, p: usize, side: Side) -> bool {
        self.sticks[self.stick_index(p, side)] == Self::mark(side)
    }

    pub fn try_lift(&mut self, p: usize, side: Side) -> bool {
        let i = self.stick_index(p, side);
        if self.sticks[i] == Stick::M {
            self.sticks[i] = Self::mark(side);
            true
        } else {
            false
        }
    }

    /// Returns every chopstick index that went back on the table.
    pub fn put_down(&mut self, p: usize) -> Result<Vec<usize>, RingError> {
        let mut freed = Vec::new();
        for side in [Side::Left, Side::Right] {
            if self.holds(p, side) {
                let i = self.stick_index(p, side);
                self.sticks[i] = Stick::M;
                freed.push(i);
            }
        }
        if freed.is_empty() {
            Err(RingError::NoChopstick(p))
        } else {
            Ok(freed)
        }
    }

    pub fn is_hungry(&self, p: usize) -> bool {
        self.hungry[p]
    }

    pub fn hungry_flags(&self) -> &[bool] {
        &self.hungry
    }

    pub fn set_hungry(&mut self, p: usize) -> Result<(), RingError> {
        if self.hungry[p] {
            return Err(RingError::AlreadyHungry(p));
        }
        self.hungry[p] = true;
        Ok(())
    }

    /// Writes the flag without the duplicate check. Leader election reuses
    /// the hunger bit as the eligibility bit.
    pub fn set_flag(&mut self, p: usize, value: bool) {
        self.hungry[p] = value;
    }

    pub fn is_waiting(&self, p: usize) -> bool {
        self.waiting[p]
    }

    pub fn set_waiting(&mut self, p: usize, value: bool) {
        self.waiting[p] = value;
    }

    /// Eating clears hunger and makes `p` the last eater on both edges.
    pub fn record_eat(&mut self, p: usize) {
        self.hungry[p] = false;
        let l = self.stick_index(p, Side::Left);
        let r = self.stick_index(p, Side::Right);
        self.last[l] = LastEater::R;
        self.last[r] = LastEater::L;
    }

    /// Whether `p` ate more recently than its neighbour on `side`.
    pub fn ate_last_against(&self, p: usize, side: Side) -> bool {
        let want = match side {
            Side::Left => LastEater::R,
            Side::Right => LastEater::L,
        };
        self.last[self.stick_index(p, side)] == want
    }
}
