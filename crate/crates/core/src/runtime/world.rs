//! The execution loop: parties, shared registers, channels, the quantum
//! state, and the scheduler that serializes them into atomic actions.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::ledger::{CostLedger, WindowMode};
use super::message::{Envelope, Message, Payload};
use super::ring::{RingError, SharedRing, Side};
use super::scheduler::{ScheduleError, Scheduler};
use super::trace::{Effect, Event, ExecutionTrace};
use crate::qstate::{
    magic_cached, BornSampler, BranchSelector, MagicUnitarySpec, OutcomeSource, Owner, QError,
    QState, QubitHandle, Replay,
};

/// What a party can do right now.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Status {
    /// Has a local action.
    pub local: bool,
    /// Accepts a delivery from the left channel.
    pub left: bool,
    /// Accepts a delivery from the right channel.
    pub right: bool,
    /// Only wake-up-flagged messages may be delivered.
    pub asleep: bool,
    pub done: bool,
}

impl Status {
    pub fn local() -> Self {
        Status {
            local: true,
            ..Self::default()
        }
    }

    pub fn waiting(left: bool, right: bool) -> Self {
        Status {
            left,
            right,
            ..Self::default()
        }
    }

    pub fn asleep(left: bool, right: bool) -> Self {
        Status {
            left,
            right,
            asleep: true,
            ..Self::default()
        }
    }

    pub fn done() -> Self {
        Status {
            done: true,
            ..Self::default()
        }
    }
}

/// Per-party result fields. Unused fields stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PartyOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eligible: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leader: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u32>,
}

/// A party's protocol logic. Parties never learn their own index: every
/// interaction goes through [`Ctx`], which only speaks in sides.
pub trait Process: Send {
    /// `flag` is the party's own hunger (or eligibility) bit.
    fn status(&self, flag: bool) -> Status;
    fn act(&mut self, ctx: &mut Ctx<'_>) -> Result<(), Fault>;
    fn receive(&mut self, from: Side, msg: Message, ctx: &mut Ctx<'_>) -> Result<(), Fault>;
    /// Bits held in named classical registers.
    fn memory_bits(&self) -> u32;
    fn output(&self) -> PartyOutput;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Fault {
    #[error(transparent)]
    Quantum(#[from] QError),
    #[error("party {party} used qubit {qubit:?} it does not own")]
    NotOwner { party: usize, qubit: QubitHandle },
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("protocol violation: {0}")]
    Protocol(String),
}

/// Measurement outcome providers a world can own.
#[derive(Debug, Clone)]
pub enum Source {
    Born(BornSampler),
    Replay(Replay),
    Branch(BranchSelector),
}

impl Source {
    pub fn seeded(seed: u64) -> Self {
        Source::Born(BornSampler::new(seed))
    }

    pub fn outcomes(&self) -> Vec<u8> {
        match self {
            Source::Born(b) => b.outcomes().to_vec(),
            Source::Replay(r) => r.consumed_prefix(),
            Source::Branch(b) => b.outcomes(),
        }
    }
}

impl OutcomeSource for Source {
    fn choose(&mut self, probs: [f64; 2]) -> Result<u8, QError> {
        match self {
            Source::Born(b) => b.choose(probs),
            Source::Replay(r) => r.choose(probs),
            Source::Branch(b) => b.choose(probs),
        }
    }
}

/// Classical coins for randomized baselines.
#[derive(Debug, Clone)]
pub enum Coins {
    Seeded(ChaCha8Rng),
    Constant(bool),
}

impl Coins {
    pub fn seeded(seed: u64) -> Self {
        Coins::Seeded(ChaCha8Rng::seed_from_u64(seed ^ 0xc017_5eed))
    }

    fn flip(&mut self) -> bool {
        match self {
            Coins::Seeded(r) => r.gen(),
            Coins::Constant(b) => *b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Completion {
    /// Every party reports `done`.
    AllDone,
    /// The hunger schedule is exhausted and nobody is hungry.
    AllFed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    Completed,
    Deadlock { stuck: Vec<usize> },
    BudgetExceeded,
    UnsupportedMagic { m: u32 },
    /// Exploration only: the branch fell below the probability threshold.
    Pruned,
    Fault { message: String },
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::Deadlock { .. } => "deadlock",
            Outcome::BudgetExceeded => "budget-exceeded",
            Outcome::UnsupportedMagic { .. } => "unsupported-magic",
            Outcome::Pruned => "pruned",
            Outcome::Fault { .. } => "fault",
        }
    }

    pub fn is_completed(&self) -> bool {
        *self == Outcome::Completed
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("no runnable party and no deliverable message")]
    Quiescent { hungry: Vec<usize> },
    #[error(transparent)]
    Fault(#[from] Fault),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Everything a party may touch, minus the parties themselves.
struct Env {
    ring: SharedRing,
    q: QState,
    chans: Vec<VecDeque<Envelope>>,
    ledger: CostLedger,
    src: Source,
    coins: Coins,
    magic_overrides: HashMap<u32, Arc<MagicUnitarySpec>>,
    magic_used: BTreeMap<u32, Arc<MagicUnitarySpec>>,
    seq: u64,
    step: u64,
    close_window: bool,
    first_hunger: Option<u64>,
    first_eat: Option<u64>,
    meals: Vec<u32>,
    failed_lifts: Vec<u32>,
    failed_before_first_eat: Vec<u32>,
}

fn chan(receiver: usize, from: Side) -> usize {
    2 * receiver + from.index()
}

/// The acting party's view of the world during one atomic action.
pub struct Ctx<'a> {
    me: usize,
    env: &'a mut Env,
    effects: Vec<Effect>,
    label: &'static str,
}

impl<'a> Ctx<'a> {
    pub fn label(&mut self, label: &'static str) {
        self.label = label;
    }

    fn check_owner(&self, q: QubitHandle) -> Result<(), Fault> {
        if self.env.q.owner(q) == Some(Owner::Party(self.me)) {
            Ok(())
        } else {
            Err(Fault::NotOwner {
                party: self.me,
                qubit: q,
            })
        }
    }

    pub fn send(&mut self, side: Side, msg: Message) -> Result<(), Fault> {
        if let Payload::Qubit(q) = msg.payload {
            self.check_owner(q)?;
            self.env.q.set_owner(q, Owner::InTransit)?;
        }
        let to = self.env.ring.neighbor(self.me, side);
        let seq = self.env.seq;
        self.env.seq += 1;
        self.env.chans[chan(to, side.opposite())].push_back(Envelope { msg, seq });
        let bits = msg.classical_bits();
        let qubits = msg.qubits();
        self.env.ledger.classical_bits += u64::from(bits);
        self.env.ledger.qubits_sent += u64::from(qubits);
        self.effects.push(Effect::Send {
            side,
            kind: msg.kind,
            seq,
            bits,
            qubits,
        });
        Ok(())
    }

    pub fn try_lift(&mut self, side: Side) -> bool {
        let ok = self.env.ring.try_lift(self.me, side);
        let stick = self.env.ring.stick_index(self.me, side);
        self.effects.push(Effect::Lift { stick, side, ok });
        if !ok {
            self.env.failed_lifts[self.me] += 1;
            if self.env.first_eat.is_none() {
                self.env.failed_before_first_eat[self.me] += 1;
            }
        }
        ok
    }

    pub fn holds(&self, side: Side) -> bool {
        self.env.ring.holds(self.me, side)
    }

    pub fn holds_any(&self) -> bool {
        self.holds(Side::Left) || self.holds(Side::Right)
    }

    /// Puts down every held chopstick and wakes neighbours that are
    /// marked as waiting.
    pub fn put_down(&mut self) -> Result<(), Fault> {
        let freed = self.env.ring.put_down(self.me)?;
        for stick in freed {
            self.effects.push(Effect::PutDown { stick });
        }
        for side in [Side::Left, Side::Right] {
            let nb = self.env.ring.neighbor(self.me, side);
            if nb != self.me && self.env.ring.is_waiting(nb) {
                self.send(side, Message::signal(super::MsgKind::WakeUp))?;
            }
        }
        Ok(())
    }

    pub fn neighbor_flag(&self, side: Side) -> bool {
        let nb = self.env.ring.neighbor(self.me, side);
        self.env.ring.is_hungry(nb)
    }

    pub fn my_flag(&self) -> bool {
        self.env.ring.is_hungry(self.me)
    }

    pub fn set_flag(&mut self, value: bool) {
        self.env.ring.set_flag(self.me, value);
        self.effects.push(Effect::Flag { value });
    }

    pub fn set_waiting(&mut self, value: bool) {
        self.env.ring.set_waiting(self.me, value);
    }

    pub fn ate_last_against(&self, side: Side) -> bool {
        self.env.ring.ate_last_against(self.me, side)
    }

    /// One meal: hunger clears and the last-eater registers move.
    pub fn eat(&mut self) {
        self.env.ring.record_eat(self.me);
        self.env.meals[self.me] += 1;
        if self.env.first_eat.is_none() {
            self.env.first_eat = Some(self.env.step);
            self.env.close_window = true;
        }
        self.effects.push(Effect::Eat);
    }

    pub fn sleep(&mut self) {
        self.effects.push(Effect::Sleep);
    }

    pub fn wake(&mut self) {
        self.effects.push(Effect::Wake);
    }

    pub fn coin(&mut self) -> bool {
        self.env.coins.flip()
    }

    pub fn output(&mut self, name: &'static str, value: u32) {
        self.effects.push(Effect::Output { name, value });
    }

    pub fn alloc(&mut self, count: usize) -> Result<Vec<QubitHandle>, Fault> {
        let hs = self.env.q.alloc(self.me, count)?;
        self.effects.push(Effect::Alloc { count });
        Ok(hs)
    }

    pub fn prepare_pair(&mut self, a: QubitHandle, b: QubitHandle) -> Result<(), Fault> {
        self.check_owner(a)?;
        self.check_owner(b)?;
        self.env.q.prepare_pair(a, b)?;
        self.effects.push(Effect::Gate { name: "pair" });
        Ok(())
    }

    pub fn cnot(&mut self, control: QubitHandle, target: QubitHandle) -> Result<(), Fault> {
        self.check_owner(control)?;
        self.check_owner(target)?;
        self.env.q.apply_cnot(control, target)?;
        self.effects.push(Effect::Gate { name: "cnot" });
        Ok(())
    }

    pub fn measure_parity(&mut self, a: QubitHandle, b: QubitHandle) -> Result<u8, Fault> {
        self.check_owner(a)?;
        self.check_owner(b)?;
        let out = self.env.q.measure_parity(a, b, &mut self.env.src)?;
        self.effects.push(Effect::Measure {
            what: "parity",
            outcome: out,
        });
        Ok(out)
    }

    /// Measures and retires `q`.
    pub fn measure(&mut self, q: QubitHandle) -> Result<u8, Fault> {
        self.check_owner(q)?;
        let out = self.env.q.measure(q, &mut self.env.src)?;
        self.env.q.release(q)?;
        self.effects.push(Effect::Measure {
            what: "basis",
            outcome: out,
        });
        Ok(out)
    }

    pub fn release(&mut self, q: QubitHandle) -> Result<(), Fault> {
        self.check_owner(q)?;
        self.env.q.release(q)?;
        self.effects.push(Effect::Release { count: 1 });
        Ok(())
    }

    /// The validated magic unitary for `m`. An unsupported spec is still
    /// recorded so the run report can carry it.
    pub fn magic(&mut self, m: u32) -> Result<Arc<MagicUnitarySpec>, Fault> {
        let spec = match self.env.magic_overrides.get(&m) {
            Some(s) => s.clone(),
            None => magic_cached(m)?,
        };
        self.env.magic_used.insert(m, spec.clone());
        Ok(spec)
    }

    pub fn apply_magic(
        &mut self,
        spec: &MagicUnitarySpec,
        q: QubitHandle,
        anc: Option<QubitHandle>,
    ) -> Result<(), Fault> {
        self.check_owner(q)?;
        if let Some(a) = anc {
            self.check_owner(a)?;
        }
        self.env.q.apply_magic(spec, q, anc)?;
        self.effects.push(Effect::Gate { name: "magic" });
        Ok(())
    }
}

/// Everything a finished run leaves behind.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub n: usize,
    pub outcome: Outcome,
    pub ledger: CostLedger,
    pub outputs: Vec<PartyOutput>,
    pub first_hunger_step: Option<u64>,
    pub first_eat_step: Option<u64>,
    pub meals: Vec<u32>,
    pub failed_lifts: Vec<u32>,
    pub failed_lifts_before_first_eat: Vec<u32>,
    pub ignored_hunger: u32,
    /// Measurement outcomes in order, as a `0`/`1` string.
    pub measurements: String,
    pub magic: Vec<MagicUnitarySpec>,
    #[serde(skip)]
    pub choices: Vec<usize>,
    #[serde(skip)]
    pub trace: Option<ExecutionTrace>,
    #[serde(skip)]
    pub source: Option<Source>,
}

impl RunReport {
    pub fn measurement_bits(&self) -> Vec<u8> {
        self.measurements.bytes().map(|b| b - b'0').collect()
    }
}

pub struct World {
    n: usize,
    procs: Vec<Box<dyn Process>>,
    env: Env,
    sched: Scheduler,
    hunger: Vec<(usize, u64)>,
    hunger_pos: usize,
    ignored_hunger: u32,
    completion: Completion,
    trace: Option<ExecutionTrace>,
    choices: Vec<usize>,
}

impl World {
    pub fn new(
        procs: Vec<Box<dyn Process>>,
        completion: Completion,
        window: WindowMode,
        sched: Scheduler,
        src: Source,
    ) -> Self {
        let n = procs.len();
        World {
            n,
            procs,
            env: Env {
                ring: SharedRing::new(n),
                q: QState::new(),
                chans: vec![VecDeque::new(); 2 * n],
                ledger: CostLedger::new(n, window),
                src,
                coins: Coins::seeded(0),
                magic_overrides: HashMap::new(),
                magic_used: BTreeMap::new(),
                seq: 0,
                step: 0,
                close_window: false,
                first_hunger: None,
                first_eat: None,
                meals: vec![0; n],
                failed_lifts: vec![0; n],
                failed_before_first_eat: vec![0; n],
            },
            sched,
            hunger: Vec::new(),
            hunger_pos: 0,
            ignored_hunger: 0,
            completion,
            trace: None,
            choices: Vec::new(),
        }
    }

    /// `(party, before_step)` events, sorted by step.
    pub fn with_hunger(mut self, events: Vec<(usize, u64)>) -> Self {
        self.hunger = events;
        self
    }

    /// Initial values of the shared hunger/eligibility bits.
    pub fn with_flags(mut self, flags: &[bool]) -> Self {
        for (p, f) in flags.iter().enumerate() {
            self.env.ring.set_flag(p, *f);
        }
        self
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.trace = on.then(|| ExecutionTrace::new(self.n));
        self
    }

    pub fn with_coins(mut self, coins: Coins) -> Self {
        self.env.coins = coins;
        self
    }

    /// Replaces the validated magic unitary for `spec.m` in this world only.
    pub fn with_magic_override(mut self, spec: MagicUnitarySpec) -> Self {
        self.env.magic_overrides.insert(spec.m, Arc::new(spec));
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ring(&self) -> &SharedRing {
        &self.env.ring
    }

    pub fn qstate(&self) -> &QState {
        &self.env.q
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.env.ledger
    }

    pub fn trace(&self) -> Option<&ExecutionTrace> {
        self.trace.as_ref()
    }

    pub fn steps(&self) -> u64 {
        self.env.step
    }

    pub fn pending_messages(&self) -> usize {
        self.env.chans.iter().map(|c| c.len()).sum()
    }

    pub fn outputs(&self) -> Vec<PartyOutput> {
        self.procs.iter().map(|p| p.output()).collect()
    }

    /// Marks `p` hungry now.
    pub fn set_hungry(&mut self, p: usize) -> Result<(), RingError> {
        self.env.ring.set_hungry(p)?;
        if self.env.first_hunger.is_none() {
            self.env.first_hunger = Some(self.env.step);
            self.env.ledger.open_window();
        }
        if let Some(t) = &mut self.trace {
            t.events.push(Event {
                step: self.env.step,
                actor: p,
                action: "env:hungry",
                detail: vec![Effect::Hungry],
                ledger: self.env.ledger.snapshot(),
            });
        }
        Ok(())
    }

    fn apply_hunger_event(&mut self) {
        let (p, _) = self.hunger[self.hunger_pos];
        self.hunger_pos += 1;
        if self.set_hungry(p).is_err() {
            self.ignored_hunger += 1;
        }
    }

    fn apply_due_hunger(&mut self) {
        while self.hunger_pos < self.hunger.len() && self.hunger[self.hunger_pos].1 <= self.env.step
        {
            self.apply_hunger_event();
        }
    }

    /// Sorted list of schedulable entities.
    pub fn enabled(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (j, p) in self.procs.iter().enumerate() {
            let st = p.status(self.env.ring.is_hungry(j));
            if st.done {
                continue;
            }
            if st.local {
                out.push(3 * j);
            }
            for (k, side, accepts) in [(1, Side::Left, st.left), (2, Side::Right, st.right)] {
                if !accepts {
                    continue;
                }
                if let Some(head) = self.env.chans[chan(j, side)].front() {
                    if !st.asleep || head.msg.wake {
                        out.push(3 * j + k);
                    }
                }
            }
        }
        out
    }

    fn stuck(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|j| {
                let flag = self.env.ring.is_hungry(*j);
                match self.completion {
                    Completion::AllFed => flag,
                    Completion::AllDone => !self.procs[*j].status(flag).done,
                }
            })
            .collect()
    }

    /// Executes one atomic action and returns its step index.
    pub fn step(&mut self) -> Result<u64, StepError> {
        self.apply_due_hunger();
        let enabled = self.enabled();
        if enabled.is_empty() {
            return Err(StepError::Quiescent {
                hungry: self.stuck(),
            });
        }
        let e = self.sched.choose(&enabled)?;
        self.choices.push(e);
        let party = e / 3;
        let step = self.env.step;
        let mut ctx = Ctx {
            me: party,
            env: &mut self.env,
            effects: Vec::new(),
            label: "act",
        };
        let res = match e % 3 {
            0 => self.procs[party].act(&mut ctx),
            k => {
                let side = if k == 1 { Side::Left } else { Side::Right };
                let env = ctx.env.chans[chan(party, side)]
                    .pop_front()
                    .expect("enabled delivery has a message");
                if let Payload::Qubit(q) = env.msg.payload {
                    ctx.env.q.set_owner(q, Owner::Party(party)).map_err(Fault::from)?;
                }
                ctx.label = "deliver";
                ctx.effects.push(Effect::Deliver {
                    side,
                    kind: env.msg.kind,
                    seq: env.seq,
                });
                self.procs[party].receive(side, env.msg, &mut ctx)
            }
        };
        let Ctx { effects, label, .. } = ctx;
        self.env.ledger.count_action();
        if self.env.close_window {
            self.env.ledger.close_window();
            self.env.close_window = false;
        }
        self.env.step += 1;
        let mem = self.procs[party].memory_bits();
        let owned = self.env.q.owned_by(party) as u32;
        self.env.ledger.observe(party, mem, owned);
        if let Some(t) = &mut self.trace {
            t.events.push(Event {
                step,
                actor: party,
                action: label,
                detail: effects,
                ledger: self.env.ledger.snapshot(),
            });
        }
        res?;
        Ok(step)
    }

    fn complete(&self) -> bool {
        match self.completion {
            Completion::AllDone => self
                .procs
                .iter()
                .enumerate()
                .all(|(j, p)| p.status(self.env.ring.is_hungry(j)).done),
            Completion::AllFed => {
                self.hunger_pos == self.hunger.len()
                    && !self.env.ring.hungry_flags().iter().any(|h| *h)
            }
        }
    }

    /// Steps until completion, quiescence, a fault, or `budget` actions.
    pub fn run(mut self, budget: u64) -> RunReport {
        for j in 0..self.n {
            let mem = self.procs[j].memory_bits();
            self.env.ledger.observe(j, mem, 0);
        }
        let outcome = loop {
            self.apply_due_hunger();
            if self.complete() {
                break Outcome::Completed;
            }
            if self.env.step >= budget {
                break Outcome::BudgetExceeded;
            }
            match self.step() {
                Ok(_) => {}
                Err(StepError::Quiescent { hungry }) => {
                    if self.hunger_pos < self.hunger.len() {
                        self.apply_hunger_event();
                        continue;
                    }
                    break Outcome::Deadlock { stuck: hungry };
                }
                Err(StepError::Fault(Fault::Quantum(QError::UnsupportedMagic(m)))) => {
                    break Outcome::UnsupportedMagic { m }
                }
                Err(StepError::Fault(Fault::Quantum(QError::Pruned))) => break Outcome::Pruned,
                Err(e) => {
                    break Outcome::Fault {
                        message: e.to_string(),
                    }
                }
            }
        };
        self.into_report(outcome)
    }

    fn into_report(self, outcome: Outcome) -> RunReport {
        let outputs = self.outputs();
        let env = self.env;
        let measurements = env
            .src
            .outcomes()
            .iter()
            .map(|b| char::from(b'0' + b))
            .collect();
        RunReport {
            n: self.n,
            outcome,
            ledger: env.ledger,
            outputs,
            first_hunger_step: env.first_hunger,
            first_eat_step: env.first_eat,
            meals: env.meals,
            failed_lifts: env.failed_lifts,
            failed_lifts_before_first_eat: env.failed_before_first_eat,
            ignored_hunger: self.ignored_hunger,
            measurements,
            magic: env.magic_used.values().map(|s| (**s).clone()).collect(),
            choices: self.choices,
            trace: self.trace,
            source: Some(env.src),
        }
    }
}
