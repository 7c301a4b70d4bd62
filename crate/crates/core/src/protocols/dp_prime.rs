//! One round of dining among the eligible parties only.
//!
//! Eligible parties run symmetry breaking among themselves and then try to
//! take two chopsticks. The valid chopsticks are the right chopsticks of
//! eligible parties. An eligible party whose left neighbour is eliminated
//! cannot reach its left valid chopstick directly; it sends a lift-left
//! request that eliminated parties relay leftwards until one of them sits
//! next to the chopstick, lifts it, and relays the answer back.
//!
//! A party that gets both chopsticks keeps them and sends a terminate wave
//! leftwards. Everyone the wave reaches before eating is eliminated.
//! Afterwards all parties count the surviving eligibility bits.
//!
//! Replies carry a one-bit round parity so that an answer still travelling
//! when its round ends is recognised as stale in the next one.

use super::sb::SbMachine;
use crate::runtime::{
    width_for, Ctx, Fault, Message, MsgKind, PartyOutput, Payload, Process, Side, Status,
};

#[derive(Debug, Clone)]
enum Stage {
    Sb(Box<SbMachine>),
    Lift(usize),
    AwaitReply(usize),
    EnterSleep,
    Asleep,
    Eat,
    SendTerminate(bool),
    ForwardTerminate,
    // relay stages
    Idle,
    Forward(Side, Message),
    PendingLift(u32),
    Reply(bool, u32),
    Finished,
}

/// One party's part in a single elimination round.
#[derive(Debug, Clone)]
pub struct DpStep {
    eligible: bool,
    bounded: bool,
    epoch: u32,
    h: u32,
    g: bool,
    bound_out: u32,
    stage: Stage,
    result: Option<bool>,
    carry: Option<Message>,
}

fn is_count(kind: MsgKind) -> bool {
    matches!(kind, MsgKind::LBit | MsgKind::Bound)
}

impl DpStep {
    /// `h` is the number of eligible parties (or an upper bound on it when
    /// `bounded`). `epoch` is the round parity.
    pub fn new(eligible: bool, h: u32, bounded: bool, epoch: u32) -> Self {
        let stage = if !eligible {
            Stage::Idle
        } else if !bounded && h <= 1 {
            Stage::SendTerminate(true)
        } else if bounded {
            Stage::Sb(Box::new(SbMachine::bounded(h)))
        } else {
            Stage::Sb(Box::new(SbMachine::new(h)))
        };
        DpStep {
            eligible,
            bounded,
            epoch: epoch & 1,
            h,
            g: false,
            bound_out: h,
            stage,
            result: None,
            carry: None,
        }
    }

    /// `Some(l)` once the round is over for this party.
    pub fn result(&self) -> Option<bool> {
        self.result
    }

    /// The bound symmetry breaking ended with (eligible parties only).
    pub fn bound_out(&self) -> u32 {
        self.bound_out
    }

    /// A count message that arrived before the round ended here.
    pub fn take_carry(&mut self) -> Option<Message> {
        self.carry.take()
    }

    pub fn status(&self) -> Status {
        match &self.stage {
            Stage::Sb(m) => m.status(),
            Stage::AwaitReply(_) | Stage::Asleep | Stage::Idle => Status::asleep(true, true),
            Stage::PendingLift(_) => Status {
                local: true,
                right: true,
                ..Status::default()
            },
            Stage::Finished => Status::done(),
            _ => Status::local(),
        }
    }

    pub fn memory_bits(&self) -> u32 {
        // eligible, bounded, epoch, g, lift index, stage
        let base = 4 + 1 + 4 + width_for(self.h);
        match &self.stage {
            Stage::Sb(m) => base + m.memory_bits(),
            _ => base,
        }
    }

    fn sides(&self) -> [Side; 2] {
        if self.g {
            [Side::Right, Side::Left]
        } else {
            [Side::Left, Side::Right]
        }
    }

    fn finish(&mut self, l: bool, ctx: &mut Ctx<'_>) {
        if self.eligible && !l {
            ctx.set_flag(false);
        }
        self.result = Some(l);
        self.stage = Stage::Finished;
    }

    fn lifted(&mut self, i: usize) {
        self.stage = if i == 0 { Stage::Lift(1) } else { Stage::Eat };
    }

    fn failed(&mut self, ctx: &mut Ctx<'_>) {
        if self.bounded && self.bound_out <= 1 {
            // Alone at the table: nobody will send a terminate.
            self.finish(false, ctx);
        } else {
            self.stage = Stage::EnterSleep;
        }
    }

    fn after_sb(&mut self) {
        let Stage::Sb(m) = &self.stage else { return };
        if let Some((g, b)) = m.result() {
            self.g = g;
            self.bound_out = b;
            self.stage = Stage::Lift(0);
        }
    }

    fn reply_epoch_ok(&self, msg: &Message) -> bool {
        msg.as_value() == self.epoch
    }

    pub fn act(&mut self, ctx: &mut Ctx<'_>) -> Result<(), Fault> {
        match std::mem::replace(&mut self.stage, Stage::Finished) {
            Stage::Sb(mut m) => {
                m.act(ctx)?;
                self.stage = Stage::Sb(m);
                self.after_sb();
            }
            Stage::Lift(i) => {
                let side = self.sides()[i];
                if side == Side::Right || ctx.neighbor_flag(Side::Left) {
                    ctx.label("dpp:lift");
                    if ctx.try_lift(side) {
                        self.lifted(i);
                    } else {
                        self.failed(ctx);
                    }
                } else {
                    ctx.label("dpp:lift-left-request");
                    ctx.send(Side::Left, Message::value(MsgKind::LiftLeft, self.epoch, 1))?;
                    self.stage = Stage::AwaitReply(i);
                }
            }
            Stage::EnterSleep => {
                ctx.label("dpp:sleep");
                ctx.sleep();
                self.stage = Stage::Asleep;
            }
            Stage::Eat => {
                // Eating here only marks survival; chopsticks stay lifted.
                ctx.label("dpp:eat");
                ctx.output("ate", 1);
                self.stage = Stage::SendTerminate(true);
            }
            Stage::SendTerminate(l) => {
                ctx.label("dpp:terminate");
                ctx.send(Side::Left, Message::signal(MsgKind::Terminate))?;
                self.finish(l, ctx);
            }
            Stage::ForwardTerminate => {
                ctx.label("dpp:forward-terminate");
                ctx.send(Side::Left, Message::signal(MsgKind::Terminate))?;
                self.finish(false, ctx);
            }
            Stage::Forward(side, msg) => {
                ctx.label("dpp:relay");
                ctx.send(side, msg)?;
                self.stage = Stage::Idle;
            }
            Stage::PendingLift(epoch) => {
                ctx.label("dpp:lift-for-master");
                let ok = ctx.try_lift(Side::Left);
                self.stage = Stage::Reply(ok, epoch);
            }
            Stage::Reply(ok, epoch) => {
                ctx.label("dpp:reply");
                let kind = if ok { MsgKind::Success } else { MsgKind::Failure };
                ctx.send(Side::Right, Message::value(kind, epoch, 1))?;
                self.stage = Stage::Idle;
            }
            s @ (Stage::AwaitReply(_) | Stage::Asleep | Stage::Idle | Stage::Finished) => {
                self.stage = s;
                return Err(Fault::Protocol("dp-prime: no local action".into()));
            }
        }
        Ok(())
    }

    pub fn receive(&mut self, from: Side, msg: Message, ctx: &mut Ctx<'_>) -> Result<(), Fault> {
        let stage = std::mem::replace(&mut self.stage, Stage::Finished);
        match (stage, from, msg.kind) {
            (Stage::Sb(mut m), _, _) => {
                m.receive(from, msg, ctx)?;
                self.stage = Stage::Sb(m);
                self.after_sb();
            }
            (Stage::AwaitReply(i), Side::Left, MsgKind::Success) if self.reply_epoch_ok(&msg) => {
                ctx.label("dpp:recv-success");
                self.lifted(i);
            }
            (Stage::AwaitReply(_), Side::Left, MsgKind::Failure) if self.reply_epoch_ok(&msg) => {
                ctx.label("dpp:recv-failure");
                self.failed(ctx);
            }
            (
                Stage::AwaitReply(_) | Stage::Asleep | Stage::Idle | Stage::PendingLift(_),
                Side::Right,
                MsgKind::Terminate,
            ) => {
                ctx.label("dpp:recv-terminate");
                self.stage = Stage::ForwardTerminate;
            }
            (Stage::AwaitReply(_) | Stage::Asleep | Stage::Idle, Side::Right, k) if is_count(k) => {
                // The round ended without a terminate reaching us.
                ctx.label("dpp:recv-count");
                self.carry = Some(msg);
                self.finish(false, ctx);
            }
            (Stage::Idle, Side::Right, MsgKind::LiftLeft) => {
                ctx.label("dpp:recv-lift-left");
                self.stage = if ctx.neighbor_flag(Side::Left) {
                    Stage::PendingLift(msg.as_value())
                } else {
                    Stage::Forward(Side::Left, msg)
                };
            }
            (Stage::Idle, Side::Right, MsgKind::Qubit) => {
                ctx.label("dpp:recv-qubit");
                self.stage = Stage::Forward(Side::Left, msg);
            }
            (Stage::Idle, Side::Left, MsgKind::Success | MsgKind::Failure)
                if self.reply_epoch_ok(&msg) =>
            {
                ctx.label("dpp:recv-reply");
                self.stage = Stage::Forward(Side::Right, msg);
            }
            (Stage::Idle, Side::Left, MsgKind::XBit | MsgKind::Color | MsgKind::GBit) => {
                ctx.label("dpp:recv-broadcast");
                self.stage = Stage::Forward(Side::Right, msg);
            }
            (stage, _, _) => {
                ctx.label("dpp:drop");
                self.stage = stage;
                if let Payload::Qubit(q) = msg.payload {
                    return Err(Fault::Protocol(format!("stray qubit {q:?} dropped")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TallyStage {
    SendOwn,
    Await,
    Forward,
    Done,
}

/// Counting window: send one value, receive exactly `window - 1` values
/// from the right and forward the first `window - 2` of them. With
/// `window` at least the ring size every value is seen at least once.
#[derive(Debug, Clone)]
pub struct Tally {
    kind: MsgKind,
    own: Message,
    window: u32,
    received: u32,
    stage: TallyStage,
    pending: Option<Message>,
    carry: Option<Message>,
    seen: Vec<u32>,
}

impl Tally {
    pub fn new(own: Message, window: u32, carry: Option<Message>) -> Self {
        Tally {
            kind: own.kind,
            own,
            window: window.max(1),
            received: 0,
            stage: TallyStage::SendOwn,
            pending: None,
            carry,
            seen: Vec::new(),
        }
    }

    pub fn is_done(&self) -> bool {
        self.stage == TallyStage::Done
    }

    /// Payloads received, in arrival order. The own value is not included.
    pub fn seen(&self) -> &[u32] {
        &self.seen
    }

    pub fn status(&self) -> Status {
        match self.stage {
            TallyStage::Await => Status::asleep(false, true),
            TallyStage::Done => Status::done(),
            _ => Status::local(),
        }
    }

    pub fn memory_bits(&self) -> u32 {
        // counter, one forwarded message, stage
        width_for(self.window) + self.own.classical_bits() + 2
    }

    fn absorb(&mut self, msg: Message) {
        self.received += 1;
        self.seen.push(msg.as_value());
        if self.received + 1 < self.window {
            self.pending = Some(msg);
            self.stage = TallyStage::Forward;
        } else {
            self.stage = TallyStage::Done;
        }
    }

    fn settle(&mut self) {
        if self.received + 1 >= self.window {
            self.stage = TallyStage::Done;
        } else if let Some(c) = self.carry.take() {
            self.absorb(c);
        } else {
            self.stage = TallyStage::Await;
        }
    }

    pub fn act(&mut self, label: &'static str, ctx: &mut Ctx<'_>) -> Result<(), Fault> {
        match self.stage {
            TallyStage::SendOwn => {
                ctx.label(label);
                ctx.send(Side::Left, self.own)?;
                if self.carry.as_ref().is_some_and(|c| c.kind != self.kind) {
                    self.carry = None;
                }
                self.settle();
            }
            TallyStage::Forward => {
                ctx.label("count:forward");
                let msg = self.pending.take().expect("forward stage holds a message");
                ctx.send(Side::Left, msg)?;
                self.settle();
            }
            _ => return Err(Fault::Protocol("count: no local action".into())),
        }
        Ok(())
    }

    pub fn receive(&mut self, from: Side, msg: Message, ctx: &mut Ctx<'_>) -> Result<(), Fault> {
        if self.stage == TallyStage::Await && from == Side::Right && msg.kind == self.kind {
            ctx.label("count:recv");
            self.absorb(msg);
            return Ok(());
        }
        ctx.label("count:drop");
        if let Payload::Qubit(q) = msg.payload {
            return Err(Fault::Protocol(format!("stray qubit {q:?} dropped")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Phase {
    Step(DpStep),
    Count(Tally),
    Done,
}

/// A party running one standalone elimination round followed by the count.
#[derive(Debug, Clone)]
pub struct DpPrimeParty {
    n: u32,
    l: bool,
    h: u32,
    phase: Phase,
}

impl DpPrimeParty {
    /// `l` is the eligibility bit, `eligible` the number of eligible
    /// parties, `n` the ring size.
    pub fn new(l: bool, eligible: u32, n: u32) -> Self {
        DpPrimeParty {
            n,
            l,
            h: 0,
            phase: Phase::Step(DpStep::new(l, eligible, false, 0)),
        }
    }

    fn advance(&mut self) {
        loop {
            match &mut self.phase {
                Phase::Step(s) => match s.result() {
                    Some(l) => {
                        self.l = l;
                        let carry = s.take_carry();
                        let own = Message::bit(MsgKind::LBit, l);
                        self.phase = Phase::Count(Tally::new(own, self.n, carry));
                    }
                    None => return,
                },
                Phase::Count(t) if t.is_done() => {
                    self.h = u32::from(self.l) + t.seen().iter().sum::<u32>();
                    self.phase = Phase::Done;
                }
                _ => return,
            }
        }
    }
}

impl Process for DpPrimeParty {
    fn status(&self, _flag: bool) -> Status {
        match &self.phase {
            Phase::Step(s) => s.status(),
            Phase::Count(t) => t.status(),
            Phase::Done => Status::done(),
        }
    }

    fn act(&mut self, ctx: &mut Ctx<'_>) -> Result<(), Fault> {
        match &mut self.phase {
            Phase::Step(s) => s.act(ctx)?,
            Phase::Count(t) => t.act("count:send", ctx)?,
            Phase::Done => return Err(Fault::Protocol("dp-prime: finished".into())),
        }
        self.advance();
        Ok(())
    }

    fn receive(&mut self, from: Side, msg: Message, ctx: &mut Ctx<'_>) -> Result<(), Fault> {
        match &mut self.phase {
            Phase::Step(s) => s.receive(from, msg, ctx)?,
            Phase::Count(t) => t.receive(from, msg, ctx)?,
            Phase::Done => ctx.label("dpp:drop"),
        }
        self.advance();
        Ok(())
    }

    fn memory_bits(&self) -> u32 {
        // l plus the two counters
        let base = 1 + 2 * width_for(self.n);
        base + match &self.phase {
            Phase::Step(s) => s.memory_bits(),
            Phase::Count(t) => t.memory_bits(),
            Phase::Done => 0,
        }
    }

    fn output(&self) -> PartyOutput {
        let done = matches!(self.phase, Phase::Done);
        PartyOutput {
            eligible: Some(self.l),
            count: done.then_some(self.h),
            ..PartyOutput::default()
        }
    }
}
