//! Asynchronous ring execution model.
//!
//! A run is a sequence of atomic actions. In each step the scheduler hands
//! the token to one schedulable entity: a party's local action, or the
//! delivery of the head of one of its two incoming FIFO channels.
//! Delivery is the receiver's action.

mod hunger;
mod ledger;
mod message;
mod ring;
mod scheduler;
mod trace;
mod world;

pub use hunger::{HungerError, HungerSpec};
pub use ledger::{CostLedger, LedgerSnapshot, WindowMode};
pub use message::{width_for, Envelope, Message, MsgKind, Payload};
pub use ring::{LastEater, RingError, SharedRing, Side, Stick};
pub use scheduler::{
    delivery_entity, local_entity, rotate_entity, PolicyKind, ScheduleError, Scheduler,
    SchedulerPolicy,
};
pub use trace::{Effect, Event, ExecutionTrace};
pub use world::{
    Coins, Completion, Ctx, Fault, Outcome, PartyOutput, Process, RunReport, Source, Status,
    StepError, World,
};
