//! Ordered log of atomic actions.
//!
//! Each [`Event`] serializes to one JSON line with the fields `step`,
//! `actor`, `action`, `detail` and `ledger`. Environment events (hunger)
//! use the action name `env:hungry` and carry the step they precede; they
//! are not atomic actions and do not advance the ledger.

use std::io::{self, Write};

use serde::Serialize;

use super::ledger::LedgerSnapshot;
use super::message::MsgKind;
use super::ring::Side;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Effect {
    Lift { stick: usize, side: Side, ok: bool },
    PutDown { stick: usize },
    Send { side: Side, kind: MsgKind, seq: u64, bits: u32, qubits: u32 },
    Deliver { side: Side, kind: MsgKind, seq: u64 },
    Measure { what: &'static str, outcome: u8 },
    Gate { name: &'static str },
    Alloc { count: usize },
    Release { count: usize },
    Eat,
    Sleep,
    Wake,
    Hungry,
    Flag { value: bool },
    Output { name: &'static str, value: u32 },
}

impl Effect {
    fn rotated(&self, d: usize, n: usize) -> Effect {
        match self {
            Effect::Lift { stick, side, ok } => Effect::Lift {
                stick: (stick + d) % n,
                side: *side,
                ok: *ok,
            },
            Effect::PutDown { stick } => Effect::PutDown {
                stick: (stick + d) % n,
            },
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub step: u64,
    pub actor: usize,
    pub action: &'static str,
    pub detail: Vec<Effect>,
    pub ledger: LedgerSnapshot,
}

impl Event {
    pub fn is_env(&self) -> bool {
        self.action.starts_with("env:")
    }

    /// The same event on a ring whose indices are shifted by `d`.
    pub fn rotated(&self, d: usize, n: usize) -> Event {
        Event {
            actor: (self.actor + d) % n,
            detail: self.detail.iter().map(|e| e.rotated(d, n)).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ExecutionTrace {
    pub n: usize,
    pub events: Vec<Event>,
}

impl ExecutionTrace {
    pub fn new(n: usize) -> Self {
        ExecutionTrace {
            n,
            events: Vec::new(),
        }
    }

    /// Newline-delimited JSON, one event per line.
    pub fn write_ndjson<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn actions(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| !e.is_env())
    }
}
