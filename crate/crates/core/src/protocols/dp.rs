//! Dining philosophers from symmetry breaking, and the classical
//! randomized baseline.
//!
//! The first hungry party starts a `doSB` wave rightwards; each party
//! forwards it once and joins symmetry breaking. Afterwards group-0
//! parties lift their left chopstick first and group-1 parties their right
//! one. A failed lift marks the party as waiting and puts it to sleep
//! until a neighbour's put-down wakes it. Nobody releases a chopstick
//! before eating.
//!
//! With the courteous rule a hungry party that ate more recently than a
//! hungry neighbour sleeps instead of lifting, until that neighbour has
//! eaten. The rule is applied against both neighbours.

use thiserror::Error;

use super::sb::SbMachine;
use crate::runtime::{Ctx, Fault, Message, MsgKind, PartyOutput, Process, Side, Status};

/// How a dining party obtains its group bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbProvider {
    /// Quantum symmetry breaking with known ring size.
    Quantum { n: u32 },
    /// Quantum symmetry breaking with an upper bound on the ring size.
    Bounded { bound: u32 },
    /// A precomputed bit, e.g. from leader election.
    Fixed(bool),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdapterError {
    #[error("expected exactly one leader flag, found {0}")]
    NotALeaderConfig(usize),
}

/// Group bits from a leader election result: the leader alone is in
/// group 1.
pub fn le_to_dp(leaders: &[bool]) -> Result<Vec<bool>, AdapterError> {
    let k = leaders.iter().filter(|l| **l).count();
    if k != 1 {
        return Err(AdapterError::NotALeaderConfig(k));
    }
    Ok(leaders.to_vec())
}

#[derive(Debug, Clone)]
enum Stage {
    Thinking,
    ForwardDoSb,
    Sb(Box<SbMachine>),
    Courtesy,
    Deferred,
    Lift(usize),
    EnterSleep(usize),
    Asleep(usize),
    Eat,
    PutDown,
}

#[derive(Debug, Clone)]
pub struct DiningParty {
    provider: SbProvider,
    courteous: bool,
    done_sb: bool,
    g: bool,
    stage: Stage,
}

impl DiningParty {
    pub fn new(provider: SbProvider, courteous: bool) -> Self {
        let (done_sb, g) = match provider {
            SbProvider::Fixed(g) => (true, g),
            _ => (false, false),
        };
        DiningParty {
            provider,
            courteous,
            done_sb,
            g,
            stage: Stage::Thinking,
        }
    }

    fn sides(&self) -> [Side; 2] {
        if self.g {
            [Side::Right, Side::Left]
        } else {
            [Side::Left, Side::Right]
        }
    }

    fn start_sb(&mut self) {
        let m = match self.provider {
            SbProvider::Quantum { n } => SbMachine::new(n),
            SbProvider::Bounded { bound } => SbMachine::bounded(bound),
            SbProvider::Fixed(_) => unreachable!("fixed groups need no symmetry breaking"),
        };
        self.stage = Stage::Sb(Box::new(m));
    }

    fn after_sb(&mut self, ctx: &mut Ctx<'_>) {
        let Stage::Sb(m) = &self.stage else { return };
        if let Some((g, _)) = m.result() {
            self.g = g;
            self.done_sb = true;
            ctx.output("g", u32::from(g));
            self.stage = if ctx.my_flag() {
                self.ready_stage()
            } else {
                Stage::Thinking
            };
        }
    }

    fn ready_stage(&self) -> Stage {
        if self.courteous {
            Stage::Courtesy
        } else {
            Stage::Lift(0)
        }
    }
}

impl Process for DiningParty {
    fn status(&self, hungry: bool) -> Status {
        match &self.stage {
            // Before symmetry breaking a qubit may already sit in the right
            // channel; leave it there until the machine exists.
            Stage::Thinking => Status {
                local: hungry,
                ..Status::waiting(true, self.done_sb)
            },
            Stage::Sb(m) => m.status(),
            Stage::Deferred | Stage::Asleep(_) => Status::asleep(true, true),
            _ => Status::local(),
        }
    }

    fn act(&mut self, ctx: &mut Ctx<'_>) -> Result<(), Fault> {
        match &mut self.stage {
            Stage::Thinking => {
                if !self.done_sb {
                    ctx.label("dp:do-sb");
                    ctx.send(Side::Right, Message::signal(MsgKind::DoSb))?;
                    self.start_sb();
                } else {
                    self.stage = self.ready_stage();
                    return self.act(ctx);
                }
            }
            Stage::ForwardDoSb => {
                ctx.label("dp:forward-do-sb");
                ctx.send(Side::Right, Message::signal(MsgKind::DoSb))?;
                self.start_sb();
            }
            Stage::Sb(m) => {
                m.act(ctx)?;
                self.after_sb(ctx);
            }
            Stage::Courtesy => {
                ctx.label("dp:courtesy");
                let defer = [Side::Left, Side::Right]
                    .into_iter()
                    .any(|s| ctx.neighbor_flag(s) && ctx.ate_last_against(s));
                if defer {
                    ctx.set_waiting(true);
                    ctx.sleep();
                    self.stage = Stage::Deferred;
                } else {
                    self.stage = Stage::Lift(0);
                }
            }
            Stage::Lift(i) => {
                let i = *i;
                ctx.label("dp:lift");
                if ctx.try_lift(self.sides()[i]) {
                    self.stage = if i == 0 { Stage::Lift(1) } else { Stage::Eat };
                } else {
                    ctx.set_waiting(true);
                    self.stage = Stage::EnterSleep(i);
                }
            }
            Stage::EnterSleep(i) => {
                let i = *i;
                ctx.label("dp:sleep");
                ctx.sleep();
                self.stage = Stage::Asleep(i);
            }
            Stage::Eat => {
                ctx.label("dp:eat");
                ctx.eat();
                self.stage = Stage::PutDown;
            }
            Stage::PutDown => {
                ctx.label("dp:put-down");
                ctx.put_down()?;
                self.stage = Stage::Thinking;
            }
            Stage::Deferred | Stage::Asleep(_) => {
                return Err(Fault::Protocol("dp: sleeping party scheduled".into()))
            }
        }
        Ok(())
    }

    fn receive(&mut self, from: Side, msg: Message, ctx: &mut Ctx<'_>) -> Result<(), Fault> {
        match (&mut self.stage, msg.kind) {
            (Stage::Sb(m), _) => {
                m.receive(from, msg, ctx)?;
                self.after_sb(ctx);
            }
            (Stage::Thinking, MsgKind::DoSb) if !self.done_sb && from == Side::Left => {
                ctx.label("dp:recv-do-sb");
                self.stage = Stage::ForwardDoSb;
            }
            (Stage::Deferred, MsgKind::WakeUp) => {
                ctx.label("dp:wake");
                ctx.set_waiting(false);
                ctx.wake();
                self.stage = Stage::Courtesy;
            }
            (Stage::Asleep(i), MsgKind::WakeUp) => {
                let i = *i;
                ctx.label("dp:wake");
                ctx.set_waiting(false);
                ctx.wake();
                self.stage = Stage::Lift(i);
            }
            _ => ctx.label("dp:drop"),
        }
        Ok(())
    }

    fn memory_bits(&self) -> u32 {
        // doneSB, g, courteous, stage
        let base = 3 + 4;
        match &self.stage {
            Stage::Sb(m) => base + m.memory_bits(),
            _ => base,
        }
    }

    fn output(&self) -> PartyOutput {
        PartyOutput {
            group: self.done_sb.then_some(self.g),
            ..PartyOutput::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CStage {
    Thinking,
    Flip,
    First(Side),
    EnterSleep(Side),
    Asleep(Side),
    Second(Side),
    Drop,
    Eat,
    PutDown,
}

/// Randomized baseline: flip a coin for the first chopstick, wait for it,
/// and if the second one is taken drop the first and flip again.
#[derive(Debug, Clone)]
pub struct ClassicalParty {
    stage: CStage,
}

impl Default for ClassicalParty {
    fn default() -> Self {
        Self::new()
    }
}

impl ClassicalParty {
    pub fn new() -> Self {
        ClassicalParty {
            stage: CStage::Thinking,
        }
    }

    fn flip(ctx: &mut Ctx<'_>) -> Side {
        if ctx.coin() {
            Side::Left
        } else {
            Side::Right
        }
    }
}

impl Process for ClassicalParty {
    fn status(&self, hungry: bool) -> Status {
        match self.stage {
            CStage::Thinking => Status {
                local: hungry,
                ..Status::waiting(true, true)
            },
            CStage::Asleep(_) => Status::asleep(true, true),
            _ => Status::local(),
        }
    }

    fn act(&mut self, ctx: &mut Ctx<'_>) -> Result<(), Fault> {
        self.stage = match self.stage {
            CStage::Thinking | CStage::Flip => {
                ctx.label("cdp:flip");
                CStage::First(Self::flip(ctx))
            }
            CStage::First(s) => {
                ctx.label("cdp:lift");
                if ctx.try_lift(s) {
                    CStage::Second(s.opposite())
                } else {
                    ctx.set_waiting(true);
                    CStage::EnterSleep(s)
                }
            }
            CStage::EnterSleep(s) => {
                ctx.label("cdp:sleep");
                ctx.sleep();
                CStage::Asleep(s)
            }
            CStage::Second(s) => {
                ctx.label("cdp:lift");
                if ctx.try_lift(s) {
                    CStage::Eat
                } else {
                    CStage::Drop
                }
            }
            CStage::Drop => {
                ctx.label("cdp:drop");
                ctx.put_down()?;
                CStage::Flip
            }
            CStage::Eat => {
                ctx.label("cdp:eat");
                ctx.eat();
                CStage::PutDown
            }
            CStage::PutDown => {
                ctx.label("cdp:put-down");
                ctx.put_down()?;
                CStage::Thinking
            }
            CStage::Asleep(_) => {
                return Err(Fault::Protocol("cdp: sleeping party scheduled".into()))
            }
        };
        Ok(())
    }

    fn receive(&mut self, _from: Side, msg: Message, ctx: &mut Ctx<'_>) -> Result<(), Fault> {
        match (self.stage, msg.kind) {
            (CStage::Asleep(s), MsgKind::WakeUp) => {
                ctx.label("cdp:wake");
                ctx.set_waiting(false);
                ctx.wake();
                self.stage = CStage::First(s);
            }
            _ => ctx.label("cdp:drop-msg"),
        }
        Ok(())
    }

    fn memory_bits(&self) -> u32 {
        4
    }

    fn output(&self) -> PartyOutput {
        PartyOutput::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adapter_accepts_exactly_one_leader() {
        assert_eq!(
            le_to_dp(&[false, false, true, false]),
            Ok(vec![false, false, true, false])
        );
        assert_eq!(le_to_dp(&[false; 4]), Err(AdapterError::NotALeaderConfig(0)));
        assert_eq!(le_to_dp(&[true, true]), Err(AdapterError::NotALeaderConfig(2)));
    }
}
