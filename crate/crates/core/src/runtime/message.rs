use serde::{Deserialize, Serialize};

use crate::qstate::QubitHandle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MsgKind {
    DoSb,
    Qubit,
    XBit,
    /// Two-bit measurement result used on odd magic branches.
    Color,
    GBit,
    LiftLeft,
    Success,
    Failure,
    Terminate,
    /// Eligibility bit counted after a DP' round.
    LBit,
    /// Eligibility bit plus a bound candidate (bounded leader election).
    Bound,
    Confirm,
    WakeUp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payload {
    None,
    Bits { value: u32, width: u8 },
    Qubit(QubitHandle),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub kind: MsgKind,
    pub payload: Payload,
    pub wake: bool,
}

impl Message {
    /// A payload-free signal. Every protocol message carries the wake-up flag.
    pub fn signal(kind: MsgKind) -> Self {
        Message {
            kind,
            payload: Payload::None,
            wake: true,
        }
    }

    pub fn bit(kind: MsgKind, b: bool) -> Self {
        Self::value(kind, u32::from(b), 1)
    }

    pub fn value(kind: MsgKind, value: u32, width: u8) -> Self {
        Message {
            kind,
            payload: Payload::Bits { value, width },
            wake: true,
        }
    }

    pub fn qubit(q: QubitHandle) -> Self {
        Message {
            kind: MsgKind::Qubit,
            payload: Payload::Qubit(q),
            wake: true,
        }
    }

    pub fn as_value(&self) -> u32 {
        match self.payload {
            Payload::Bits { value, .. } => value,
            _ => 0,
        }
    }

    pub fn as_bit(&self) -> bool {
        self.as_value() & 1 == 1
    }

    /// Classical size. Signals count as one bit.
    pub fn classical_bits(&self) -> u32 {
        match self.payload {
            Payload::None => 1,
            Payload::Bits { width, .. } => u32::from(width),
            Payload::Qubit(_) => 0,
        }
    }

    pub fn qubits(&self) -> u32 {
        u32::from(matches!(self.payload, Payload::Qubit(_)))
    }
}

/// A message in a channel, tagged with its global send sequence number.
#[derive(Debug, Clone, Copy)]
pub struct Envelope {
    pub msg: Message,
    pub seq: u64,
}

/// Bits needed for a counter over `0..=range`.
pub fn width_for(range: u32) -> u32 {
    32 - range.leading_zeros()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths() {
        assert_eq!(width_for(0), 0);
        assert_eq!(width_for(1), 1);
        assert_eq!(width_for(3), 2);
        assert_eq!(width_for(4), 3);
        assert_eq!(width_for(10), 4);
    }

    #[test]
    fn sizes() {
        assert_eq!(Message::bit(MsgKind::XBit, true).classical_bits(), 1);
        assert_eq!(Message::signal(MsgKind::Terminate).classical_bits(), 1);
        assert_eq!(Message::value(MsgKind::Bound, 9, 5).classical_bits(), 5);
    }
}
