//! Leader election by repeated elimination rounds.
//!
//! Everyone starts eligible with `h = n`. While `h > 1` the parties run an
//! elimination round, count the survivors, put down every lifted
//! chopstick and confirm around the ring before the next round starts.
//! Each round removes at least half of the eligible parties and keeps at
//! least one, so the loop ends with exactly one eligible party.
//!
//! With only a bound `N` known, counts are replaced by a minimum over
//! upper bounds. Parties that fail any lift while alone at the table
//! eliminate themselves; if a round leaves nobody eligible, the single
//! participant of that round becomes the leader.

use super::dp_prime::{DpStep, Tally};
use crate::runtime::{
    width_for, Ctx, Fault, Message, MsgKind, PartyOutput, Process, Side, Status,
};

#[derive(Debug, Clone)]
enum Phase {
    Step(DpStep),
    Count(Tally),
    PutDown,
    Confirm(Tally),
    Done,
}

#[derive(Debug, Clone)]
pub struct LeParty {
    /// `n`, or the bound `N` when `bounded`.
    size: u32,
    bounded: bool,
    l: bool,
    prev_l: bool,
    h: u32,
    bound_out: u32,
    iterations: u32,
    phase: Phase,
}

impl LeParty {
    /// Known ring size `n`.
    pub fn new(n: u32) -> Self {
        Self::build(n, false)
    }

    /// Only an upper bound `N` on the ring size is known.
    pub fn bounded(bound: u32) -> Self {
        Self::build(bound, true)
    }

    fn build(size: u32, bounded: bool) -> Self {
        let size = size.max(1);
        let mut p = LeParty {
            size,
            bounded,
            l: true,
            prev_l: true,
            h: size,
            bound_out: size,
            iterations: 0,
            phase: Phase::Done,
        };
        p.check();
        p
    }

    fn check(&mut self) {
        self.phase = if self.h > 1 {
            self.prev_l = self.l;
            Phase::Step(DpStep::new(self.l, self.h, self.bounded, self.iterations))
        } else {
            Phase::Done
        };
    }

    fn own_count(&self) -> Message {
        if self.bounded {
            let cand = if self.prev_l {
                if self.bound_out <= 1 {
                    1
                } else {
                    self.bound_out / 2
                }
            } else {
                self.h
            };
            let w = 1 + width_for(self.size) as u8;
            Message::value(MsgKind::Bound, (cand << 1) | u32::from(self.l), w)
        } else {
            Message::bit(MsgKind::LBit, self.l)
        }
    }

    fn tally_counts(&mut self, own: u32, seen: &[u32], ctx: &mut Ctx<'_>) {
        if self.bounded {
            let all = std::iter::once(own).chain(seen.iter().copied());
            let any_l = all.clone().any(|v| v & 1 == 1);
            self.h = all.map(|v| v >> 1).min().unwrap_or(1);
            if !any_l {
                // Nobody survived: the last round had a single participant.
                self.l = self.prev_l;
                if self.l {
                    ctx.set_flag(true);
                }
                self.h = 1;
            }
        } else {
            self.h = u32::from(self.l) + seen.iter().sum::<u32>();
        }
    }

    fn advance(&mut self, ctx: &mut Ctx<'_>) {
        loop {
            match &mut self.phase {
                Phase::Step(s) => match s.result() {
                    Some(l) => {
                        self.l = l;
                        self.bound_out = s.bound_out();
                        let carry = s.take_carry();
                        self.phase = Phase::Count(Tally::new(self.own_count(), self.size, carry));
                    }
                    None => return,
                },
                Phase::Count(t) if t.is_done() => {
                    let seen = t.seen().to_vec();
                    let own = self.own_count().as_value();
                    self.tally_counts(own, &seen, ctx);
                    self.phase = Phase::PutDown;
                }
                Phase::Confirm(t) if t.is_done() => {
                    self.iterations += 1;
                    self.check();
                    if matches!(self.phase, Phase::Done) {
                        ctx.output("leader", u32::from(self.l));
                    }
                }
                _ => return,
            }
        }
    }

    fn confirm(&self) -> Tally {
        Tally::new(Message::signal(MsgKind::Confirm), self.size, None)
    }
}

impl Process for LeParty {
    fn status(&self, _flag: bool) -> Status {
        match &self.phase {
            Phase::Step(s) => s.status(),
            Phase::Count(t) | Phase::Confirm(t) => t.status(),
            Phase::PutDown => Status::local(),
            Phase::Done => Status::done(),
        }
    }

    fn act(&mut self, ctx: &mut Ctx<'_>) -> Result<(), Fault> {
        match &mut self.phase {
            Phase::Step(s) => s.act(ctx)?,
            Phase::Count(t) => t.act("count:send", ctx)?,
            Phase::PutDown => {
                let mut t = self.confirm();
                if ctx.holds_any() {
                    ctx.label("le:put-down");
                    ctx.put_down()?;
                } else {
                    t.act("le:confirm", ctx)?;
                }
                self.phase = Phase::Confirm(t);
            }
            Phase::Confirm(t) => t.act("le:confirm", ctx)?,
            Phase::Done => return Err(Fault::Protocol("le: finished".into())),
        }
        self.advance(ctx);
        Ok(())
    }

    fn receive(&mut self, from: Side, msg: Message, ctx: &mut Ctx<'_>) -> Result<(), Fault> {
        match &mut self.phase {
            Phase::Step(s) => s.receive(from, msg, ctx)?,
            Phase::Count(t) | Phase::Confirm(t) => t.receive(from, msg, ctx)?,
            Phase::PutDown | Phase::Done => ctx.label("le:drop"),
        }
        self.advance(ctx);
        Ok(())
    }

    fn memory_bits(&self) -> u32 {
        // l, previous l, h, bound out, iteration counter
        let w = width_for(self.size);
        let base = 2 + 2 * w + width_for(w + 1);
        base + match &self.phase {
            Phase::Step(s) => s.memory_bits(),
            Phase::Count(t) | Phase::Confirm(t) => t.memory_bits(),
            _ => 0,
        }
    }

    fn output(&self) -> PartyOutput {
        let done = matches!(self.phase, Phase::Done);
        PartyOutput {
            leader: done.then_some(self.l),
            iterations: Some(self.iterations),
            ..PartyOutput::default()
        }
    }
}
