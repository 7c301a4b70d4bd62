//! Symmetry breaking from shared entanglement.
//!
//! Every participant makes a Bell pair and sends one half to its left
//! neighbour, then checks the parity of the two qubits it holds. Parity
//! bits are broadcast rightwards. If some bit is 1, the pairs already
//! disagree somewhere and measuring one qubit each gives mixed results.
//! If every bit is 0, the ring shares one big cat state; a CNOT folds it
//! down to one qubit per party and the magic unitary removes the
//! all-equal outcomes before measurement.
//!
//! Broadcasts use a counting window: with parameter `m`, each party
//! sends its own value, receives exactly `m - 1` values and forwards the
//! first `m - 2`. When `m` exceeds the number of participants the values
//! simply go round more than once. No messages are left in flight.
//!
//! For odd `m` the magic unitary acts on the party qubit plus an ancilla
//! and the outcome is a two-bit colour. Parties broadcast colours and take
//! `g = 1` exactly when their colour is the smallest one seen.
//!
//! The bounded variant appends a `g` broadcast; if every bit agrees the
//! whole run restarts with parameter `m - 1`.

use crate::qstate::QubitHandle;
use crate::runtime::{
    width_for, Ctx, Fault, Message, MsgKind, PartyOutput, Payload, Process, Side, Status,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Start,
    Prepare,
    SendQubit,
    AwaitQubit,
    Parity,
    SendX,
    AwaitX,
    ForwardX,
    Fold,
    Magic,
    AllocAncilla,
    MeasureG,
    MeasureHigh,
    MeasureLow,
    SendColor,
    AwaitColor,
    ForwardColor,
    SendG,
    AwaitG,
    ForwardG,
    Done,
}

/// One party's symmetry-breaking state machine, embeddable in larger
/// protocols.
#[derive(Debug, Clone)]
pub struct SbMachine {
    m: u32,
    bounded: bool,
    stage: Stage,
    own: Option<QubitHandle>,
    out: Option<QubitHandle>,
    recv: Option<QubitHandle>,
    anc: Option<QubitHandle>,
    x: bool,
    seen_one: bool,
    count: u32,
    pending: Option<Message>,
    high: u8,
    color: u8,
    min_color: u8,
    g: bool,
    broken: bool,
}

impl SbMachine {
    /// Known ring size (or eligible count) `m`.
    pub fn new(m: u32) -> Self {
        Self::with_mode(m, false)
    }

    /// Only an upper bound `m` on the number of participants is known.
    pub fn bounded(m: u32) -> Self {
        Self::with_mode(m, true)
    }

    fn with_mode(m: u32, bounded: bool) -> Self {
        SbMachine {
            m: m.max(1),
            bounded,
            stage: Stage::Start,
            own: None,
            out: None,
            recv: None,
            anc: None,
            x: false,
            seen_one: false,
            count: 0,
            pending: None,
            high: 0,
            color: 0,
            min_color: 0,
            g: false,
            broken: false,
        }
    }

    pub fn is_done(&self) -> bool {
        self.stage == Stage::Done
    }

    /// `(g, m')` once finished. `m'` is the parameter the run ended with.
    pub fn result(&self) -> Option<(bool, u32)> {
        self.is_done().then_some((self.g, self.m))
    }

    pub fn status(&self) -> Status {
        match self.stage {
            Stage::AwaitQubit => Status::asleep(false, true),
            Stage::AwaitX | Stage::AwaitColor | Stage::AwaitG => Status::asleep(true, false),
            Stage::Done => Status::done(),
            _ => Status::local(),
        }
    }

    pub fn memory_bits(&self) -> u32 {
        let w = width_for(self.m);
        // parameter, counter, x, seen_one, g, broken, colour, min colour,
        // one forwarded message, stage
        2 * w + 4 + 2 + 2 + 2 + 5
    }

    fn reset_for(&mut self, m: u32) {
        *self = Self::with_mode(m, self.bounded);
    }

    pub fn act(&mut self, ctx: &mut Ctx<'_>) -> Result<(), Fault> {
        match self.stage {
            Stage::Start => {
                if self.m == 1 {
                    ctx.label("sb:single");
                    self.g = true;
                    self.stage = Stage::Done;
                } else {
                    ctx.label("sb:alloc");
                    let q = ctx.alloc(2)?;
                    self.own = Some(q[0]);
                    self.out = Some(q[1]);
                    self.stage = Stage::Prepare;
                }
            }
            Stage::Prepare => {
                ctx.label("sb:pair");
                ctx.prepare_pair(self.own.unwrap(), self.out.unwrap())?;
                self.stage = Stage::SendQubit;
            }
            Stage::SendQubit => {
                ctx.label("sb:send-qubit");
                let q = self.out.take().unwrap();
                ctx.send(Side::Left, Message::qubit(q))?;
                self.stage = Stage::AwaitQubit;
            }
            Stage::Parity => {
                ctx.label("sb:parity");
                self.x = ctx.measure_parity(self.own.unwrap(), self.recv.unwrap())? == 1;
                self.stage = Stage::SendX;
            }
            Stage::SendX => {
                ctx.label("sb:send-x");
                ctx.send(Side::Right, Message::bit(MsgKind::XBit, self.x))?;
                self.seen_one = self.x;
                self.count = 1;
                self.stage = Stage::AwaitX;
            }
            Stage::ForwardX | Stage::ForwardColor | Stage::ForwardG => {
                ctx.label("sb:forward");
                let msg = self.pending.take().unwrap();
                ctx.send(Side::Right, msg)?;
                self.stage = match self.stage {
                    Stage::ForwardX => Stage::AwaitX,
                    Stage::ForwardColor => Stage::AwaitColor,
                    _ => Stage::AwaitG,
                };
            }
            Stage::Fold => {
                ctx.label("sb:cnot");
                let (a, r) = (self.own.unwrap(), self.recv.take().unwrap());
                ctx.cnot(a, r)?;
                ctx.release(r)?;
                self.stage = if self.m.is_multiple_of(2) {
                    Stage::Magic
                } else {
                    Stage::AllocAncilla
                };
            }
            Stage::AllocAncilla => {
                ctx.label("sb:alloc-ancilla");
                self.anc = Some(ctx.alloc(1)?[0]);
                self.stage = Stage::Magic;
            }
            Stage::Magic => {
                ctx.label("sb:magic");
                let spec = ctx.magic(self.m)?;
                ctx.apply_magic(&spec, self.own.unwrap(), self.anc)?;
                self.stage = if self.anc.is_some() {
                    Stage::MeasureHigh
                } else {
                    Stage::MeasureG
                };
            }
            Stage::MeasureG => {
                ctx.label("sb:measure");
                self.g = ctx.measure(self.own.take().unwrap())? == 1;
                if let Some(r) = self.recv.take() {
                    ctx.measure(r)?;
                }
                self.after_g();
            }
            Stage::MeasureHigh => {
                ctx.label("sb:measure");
                self.high = ctx.measure(self.own.take().unwrap())?;
                self.stage = Stage::MeasureLow;
            }
            Stage::MeasureLow => {
                ctx.label("sb:measure");
                let low = ctx.measure(self.anc.take().unwrap())?;
                self.color = 2 * self.high + low;
                self.stage = Stage::SendColor;
            }
            Stage::SendColor => {
                ctx.label("sb:send-color");
                ctx.send(
                    Side::Right,
                    Message::value(MsgKind::Color, u32::from(self.color), 2),
                )?;
                self.min_color = self.color;
                self.count = 1;
                self.stage = Stage::AwaitColor;
            }
            Stage::SendG => {
                ctx.label("sb:send-g");
                ctx.send(Side::Right, Message::bit(MsgKind::GBit, self.g))?;
                self.broken = false;
                self.count = 1;
                self.stage = Stage::AwaitG;
            }
            Stage::AwaitQubit | Stage::AwaitX | Stage::AwaitColor | Stage::AwaitG | Stage::Done => {
                return Err(Fault::Protocol(format!("sb: no local action in {:?}", self.stage)))
            }
        }
        Ok(())
    }

    fn after_g(&mut self) {
        self.stage = if self.bounded {
            Stage::SendG
        } else {
            Stage::Done
        };
    }

    /// Consumes one delivery. Messages of unexpected kinds are dropped.
    pub fn receive(&mut self, from: Side, msg: Message, ctx: &mut Ctx<'_>) -> Result<(), Fault> {
        match (self.stage, from, msg.kind) {
            (Stage::AwaitQubit, Side::Right, MsgKind::Qubit) => {
                ctx.label("sb:recv-qubit");
                let Payload::Qubit(q) = msg.payload else {
                    return Err(Fault::Protocol("qubit message without a qubit".into()));
                };
                self.recv = Some(q);
                self.stage = Stage::Parity;
            }
            (Stage::AwaitX, Side::Left, MsgKind::XBit) => {
                ctx.label("sb:recv-x");
                self.count += 1;
                self.seen_one |= msg.as_bit();
                if self.count < self.m {
                    self.pending = Some(msg);
                    self.stage = Stage::ForwardX;
                } else {
                    self.stage = if self.seen_one {
                        Stage::MeasureG
                    } else {
                        Stage::Fold
                    };
                }
            }
            (Stage::AwaitColor, Side::Left, MsgKind::Color) => {
                ctx.label("sb:recv-color");
                self.count += 1;
                self.min_color = self.min_color.min(msg.as_value() as u8);
                if self.count < self.m {
                    self.pending = Some(msg);
                    self.stage = Stage::ForwardColor;
                } else {
                    self.g = self.color == self.min_color;
                    self.after_g();
                }
            }
            (Stage::AwaitG, Side::Left, MsgKind::GBit) => {
                ctx.label("sb:recv-g");
                self.count += 1;
                self.broken |= msg.as_bit() != self.g;
                if self.count < self.m {
                    self.pending = Some(msg);
                    self.stage = Stage::ForwardG;
                } else if self.broken {
                    self.stage = Stage::Done;
                } else {
                    let next = self.m - 1;
                    self.reset_for(next);
                }
            }
            _ => {
                ctx.label("sb:drop");
                if let Payload::Qubit(q) = msg.payload {
                    return Err(Fault::Protocol(format!("stray qubit {q:?} dropped")));
                }
            }
        }
        Ok(())
    }
}

/// A ring party that only runs symmetry breaking.
#[derive(Debug, Clone)]
pub struct SbParty {
    sb: SbMachine,
}

impl SbParty {
    pub fn new(n: u32) -> Self {
        SbParty {
            sb: SbMachine::new(n),
        }
    }

    pub fn bounded(bound: u32) -> Self {
        SbParty {
            sb: SbMachine::bounded(bound),
        }
    }
}

impl Process for SbParty {
    fn status(&self, _flag: bool) -> Status {
        self.sb.status()
    }

    fn act(&mut self, ctx: &mut Ctx<'_>) -> Result<(), Fault> {
        self.sb.act(ctx)?;
        self.report(ctx);
        Ok(())
    }

    fn receive(&mut self, from: Side, msg: Message, ctx: &mut Ctx<'_>) -> Result<(), Fault> {
        self.sb.receive(from, msg, ctx)?;
        self.report(ctx);
        Ok(())
    }

    fn memory_bits(&self) -> u32 {
        self.sb.memory_bits()
    }

    fn output(&self) -> PartyOutput {
        let (group, bound) = self.sb.result().unzip();
        PartyOutput {
            group,
            bound: if self.sb.bounded { bound } else { None },
            ..PartyOutput::default()
        }
    }
}

impl SbParty {
    fn report(&self, ctx: &mut Ctx<'_>) {
        if let Some((g, _)) = self.sb.result() {
            ctx.output("g", u32::from(g));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_party_needs_no_messages() {
        let m = SbMachine::new(1);
        assert_eq!(m.status(), Status::local());
        assert_eq!(m.result(), None);
    }

    #[test]
    fn memory_grows_with_the_parameter_width() {
        assert!(SbMachine::new(16).memory_bits() > SbMachine::new(3).memory_bits());
    }
}
