use serde::Serialize;

/// When the time counter runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowMode {
    /// From the first action until termination.
    Whole,
    /// From the first hunger event until the first eat, inclusive.
    FirstHungerToFirstEat,
}

#[derive(Debug, Clone, Serialize)]
pub struct CostLedger {
    pub mode: WindowMode,
    /// Atomic actions inside the measurement window.
    pub time: u64,
    /// Atomic actions overall.
    pub steps: u64,
    pub classical_bits: u64,
    pub qubits_sent: u64,
    pub mem_bits_max: Vec<u32>,
    pub qubits_max: Vec<u32>,
    #[serde(skip)]
    open: bool,
    #[serde(skip)]
    closed: bool,
}

/// The counters attached to every trace event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LedgerSnapshot {
    pub time: u64,
    pub cbits: u64,
    pub qubits: u64,
}

impl CostLedger {
    pub fn new(n: usize, mode: WindowMode) -> Self {
        CostLedger {
            mode,
            time: 0,
            steps: 0,
            classical_bits: 0,
            qubits_sent: 0,
            mem_bits_max: vec![0; n],
            qubits_max: vec![0; n],
            open: mode == WindowMode::Whole,
            closed: false,
        }
    }

    pub fn open_window(&mut self) {
        if !self.closed {
            self.open = true;
        }
    }

    pub fn close_window(&mut self) {
        if self.mode == WindowMode::FirstHungerToFirstEat && self.open {
            self.closed = true;
        }
    }

    pub fn count_action(&mut self) {
        self.steps += 1;
        if self.open && !self.closed {
            self.time += 1;
        }
    }

    pub fn observe(&mut self, party: usize, mem_bits: u32, qubits: u32) {
        let m = &mut self.mem_bits_max[party];
        *m = (*m).max(mem_bits);
        let q = &mut self.qubits_max[party];
        *q = (*q).max(qubits);
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            time: self.time,
            cbits: self.classical_bits,
            qubits: self.qubits_sent,
        }
    }

    pub fn max_mem_bits(&self) -> u32 {
        self.mem_bits_max.iter().copied().max().unwrap_or(0)
    }

    pub fn max_qubits(&self) -> u32 {
        self.qubits_max.iter().copied().max().unwrap_or(0)
    }
}
