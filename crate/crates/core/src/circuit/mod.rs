//! Stabilizer-circuit intermediate representation.
//!
//! A [`Circuit`] is a flat instruction list over `num_qubits` qubits. Gates
//! and noise target qubit indices; `DETECTOR` and `OBSERVABLE_INCLUDE`
//! target measurement records counted backwards from the most recent one
//! (`rec[-1]` is the latest measurement).

mod text;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use text::{parse_circuit, serialize_circuit};
pub use validate::{ValidationReport, Violation};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Opcode {
    R,
    M,
    MR,
    H,
    CX,
    CZ,
    XError,
    ZError,
    Depolarize1,
    Depolarize2,
    Tick,
    Detector,
    ObservableInclude,
}

impl Opcode {
    pub const ALL: [Opcode; 13] = [
        Opcode::R,
        Opcode::M,
        Opcode::MR,
        Opcode::H,
        Opcode::CX,
        Opcode::CZ,
        Opcode::XError,
        Opcode::ZError,
        Opcode::Depolarize1,
        Opcode::Depolarize2,
        Opcode::Tick,
        Opcode::Detector,
        Opcode::ObservableInclude,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Opcode::R => "R",
            Opcode::M => "M",
            Opcode::MR => "MR",
            Opcode::H => "H",
            Opcode::CX => "CX",
            Opcode::CZ => "CZ",
            Opcode::XError => "X_ERROR",
            Opcode::ZError => "Z_ERROR",
            Opcode::Depolarize1 => "DEPOLARIZE1",
            Opcode::Depolarize2 => "DEPOLARIZE2",
            Opcode::Tick => "TICK",
            Opcode::Detector => "DETECTOR",
            Opcode::ObservableInclude => "OBSERVABLE_INCLUDE",
        }
    }

    pub fn is_noise(self) -> bool {
        matches!(
            self,
            Opcode::XError | Opcode::ZError | Opcode::Depolarize1 | Opcode::Depolarize2
        )
    }

    pub fn is_annotation(self) -> bool {
        matches!(self, Opcode::Detector | Opcode::ObservableInclude)
    }

    pub fn is_two_qubit(self) -> bool {
        matches!(self, Opcode::CX | Opcode::CZ | Opcode::Depolarize2)
    }

    pub fn is_unitary(self) -> bool {
        matches!(self, Opcode::H | Opcode::CX | Opcode::CZ)
    }

    pub fn measures(self) -> bool {
        matches!(self, Opcode::M | Opcode::MR)
    }

    pub fn resets(self) -> bool {
        matches!(self, Opcode::R | Opcode::MR)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Opcode {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        Opcode::ALL.iter().copied().find(|op| op.name() == s).ok_or(())
    }
}

/// One circuit operation.
///
/// For gates, resets, measurements and noise, `targets` are qubit indices.
/// For annotations they are look-backs `k >= 1` meaning `rec[-k]`.
/// `arg` holds the probability of noise channels and the observable index
/// of `OBSERVABLE_INCLUDE`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    pub opcode: Opcode,
    pub targets: Vec<u32>,
    pub arg: Option<f64>,
}

impl Instruction {
    pub fn new(opcode: Opcode, targets: Vec<u32>, arg: Option<f64>) -> Self {
        Self {
            opcode,
            targets,
            arg,
        }
    }

    pub fn gate(opcode: Opcode, targets: &[u32]) -> Self {
        Self::new(opcode, targets.to_vec(), None)
    }

    pub fn noise(opcode: Opcode, p: f64, targets: &[u32]) -> Self {
        Self::new(opcode, targets.to_vec(), Some(p))
    }

    pub fn detector(lookbacks: &[u32]) -> Self {
        Self::new(Opcode::Detector, lookbacks.to_vec(), None)
    }

    pub fn observable(index: u32, lookbacks: &[u32]) -> Self {
        Self::new(Opcode::ObservableInclude, lookbacks.to_vec(), Some(index as f64))
    }

    pub fn tick() -> Self {
        Self::new(Opcode::Tick, Vec::new(), None)
    }

    pub fn probability(&self) -> Option<f64> {
        if self.opcode.is_noise() {
            self.arg
        } else {
            None
        }
    }

    pub fn observable_index(&self) -> Option<u32> {
        if self.opcode == Opcode::ObservableInclude {
            self.arg.map(|a| a as u32)
        } else {
            None
        }
    }

    /// Number of measurement records this instruction appends.
    pub fn measurement_count(&self) -> usize {
        if self.opcode.measures() {
            self.targets.len()
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    pub num_qubits: usize,
    pub instructions: Vec<Instruction>,
    pub coords: BTreeMap<u32, (f64, f64)>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            instructions: Vec::new(),
            coords: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, inst: Instruction) {
        self.instructions.push(inst);
    }

    pub fn num_measurements(&self) -> usize {
        self.instructions.iter().map(Instruction::measurement_count).sum()
    }

    pub fn num_detectors(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| i.opcode == Opcode::Detector)
            .count()
    }

    /// One past the largest observable index referenced.
    pub fn num_observables(&self) -> usize {
        self.instructions
            .iter()
            .filter_map(Instruction::observable_index)
            .map(|i| i as usize + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn has_noise(&self) -> bool {
        self.instructions.iter().any(|i| i.opcode.is_noise())
    }

    /// Copy of the circuit with every noise instruction removed.
    pub fn without_noise(&self) -> Circuit {
        Circuit {
            num_qubits: self.num_qubits,
            instructions: self
                .instructions
                .iter()
                .filter(|i| !i.opcode.is_noise())
                .cloned()
                .collect(),
            coords: self.coords.clone(),
        }
    }

    pub fn count(&self, op: Opcode) -> usize {
        self.instructions.iter().filter(|i| i.opcode == op).count()
    }

    /// Sum of target-list lengths for instructions with the given opcode.
    pub fn count_targets(&self, op: Opcode) -> usize {
        self.instructions
            .iter()
            .filter(|i| i.opcode == op)
            .map(|i| i.targets.len())
            .sum()
    }

    pub fn validate(&self) -> ValidationReport {
        validate::validate(self)
    }

    /// Validation as a hard precondition.
    pub fn check(&self) -> Result<()> {
        let report = self.validate();
        match report.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidCircuit(format!(
                "instruction {}: {} ({} violation(s) total)",
                v.index,
                v.message,
                report.violations.len()
            ))),
        }
    }

    /// For every measurement record (in order), the qubit it measured.
    pub fn measured_qubits(&self) -> Vec<u32> {
        self.instructions
            .iter()
            .filter(|i| i.opcode.measures())
            .flat_map(|i| i.targets.iter().copied())
            .collect()
    }

    /// Absolute measurement-record indices of each detector.
    pub fn detector_records(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut seen = 0usize;
        for inst in &self.instructions {
            if inst.opcode == Opcode::Detector {
                out.push(inst.targets.iter().map(|&k| seen - k as usize).collect());
            }
            seen += inst.measurement_count();
        }
        out
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_circuit(self))
    }
}

impl FromStr for Circuit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_circuit(s)
    }
}
