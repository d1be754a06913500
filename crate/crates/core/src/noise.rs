//! Noise injection and single-channel samplers.
//!
//! Injection only inserts noise instructions next to existing ones; the
//! clean circuit is recovered exactly by [`Circuit::without_noise`].

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Instruction, Opcode};
use crate::error::{Error, Result};
use crate::pauli::Pauli;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorType {
    /// DEPOLARIZE1 on every data qubit at the start of each round.
    Depolarizing,
    /// DEPOLARIZE1 after H, DEPOLARIZE2 after CX and CZ.
    Gate,
    /// X_ERROR before each measurement.
    Readout,
    /// X_ERROR after each reset.
    Reset,
}

impl ErrorType {
    pub const ALL: [ErrorType; 4] = [
        ErrorType::Depolarizing,
        ErrorType::Gate,
        ErrorType::Readout,
        ErrorType::Reset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorType::Depolarizing => "depolarizing",
            ErrorType::Gate => "gate",
            ErrorType::Readout => "readout",
            ErrorType::Reset => "reset",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NoiseModel {
    CodeCapacity,
    Phenomenological,
    CircuitLevel,
}

impl NoiseModel {
    pub const ALL: [NoiseModel; 3] = [
        NoiseModel::CodeCapacity,
        NoiseModel::Phenomenological,
        NoiseModel::CircuitLevel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseModel::CodeCapacity => "code_capacity",
            NoiseModel::Phenomenological => "phenomenological",
            NoiseModel::CircuitLevel => "circuit_level",
        }
    }

    pub fn error_types(self) -> &'static [ErrorType] {
        match self {
            NoiseModel::CodeCapacity => &[ErrorType::Depolarizing, ErrorType::Gate],
            NoiseModel::Phenomenological => &[ErrorType::Readout, ErrorType::Reset],
            NoiseModel::CircuitLevel => &ErrorType::ALL,
        }
    }
}

/// Either a single error type or a composite model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NoiseSource {
    Type(ErrorType),
    Model(NoiseModel),
}

impl NoiseSource {
    pub const ALL: [NoiseSource; 7] = [
        NoiseSource::Type(ErrorType::Depolarizing),
        NoiseSource::Type(ErrorType::Gate),
        NoiseSource::Type(ErrorType::Readout),
        NoiseSource::Type(ErrorType::Reset),
        NoiseSource::Model(NoiseModel::CodeCapacity),
        NoiseSource::Model(NoiseModel::Phenomenological),
        NoiseSource::Model(NoiseModel::CircuitLevel),
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseSource::Type(t) => t.name(),
            NoiseSource::Model(m) => m.name(),
        }
    }

    pub fn error_types(self) -> Vec<ErrorType> {
        match self {
            NoiseSource::Type(t) => vec![t],
            NoiseSource::Model(m) => m.error_types().to_vec(),
        }
    }
}

impl fmt::Display for NoiseSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        NoiseSource::ALL
            .iter()
            .copied()
            .find(|n| n.name() == key)
            .ok_or_else(|| Error::Spec(format!("unknown noise source '{s}'")))
    }
}

impl TryFrom<String> for NoiseSource {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<NoiseSource> for String {
    fn from(n: NoiseSource) -> String {
        n.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub source: NoiseSource,
    pub p: f64,
    /// Also insert Z_ERROR next to every readout and reset X_ERROR.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub strict: bool,
}

impl NoiseSpec {
    pub fn new(source: NoiseSource, p: f64) -> Self {
        Self {
            source,
            p,
            strict: false,
        }
    }

    pub fn apply(&self, circuit: &Circuit) -> Result<Circuit> {
        inject(circuit, &self.source.error_types(), self.p, self.strict)
    }
}

pub fn apply_error_type(circuit: &Circuit, t: ErrorType, p: f64) -> Result<Circuit> {
    inject(circuit, &[t], p, false)
}

pub fn apply_noise_model(circuit: &Circuit, m: NoiseModel, p: f64) -> Result<Circuit> {
    inject(circuit, m.error_types(), p, false)
}

/// Variant of [`apply_noise_model`] that can add the Z half of readout and
/// reset flips.
pub fn apply_noise_model_with(
    circuit: &Circuit,
    m: NoiseModel,
    p: f64,
    strict: bool,
) -> Result<Circuit> {
    inject(circuit, m.error_types(), p, strict)
}

/// Data qubits are taken to be the targets of the final measurement.
fn data_qubits(circuit: &Circuit) -> Vec<u32> {
    circuit
        .instructions
        .iter()
        .rev()
        .find(|i| i.opcode.measures())
        .map(|i| i.targets.clone())
        .unwrap_or_default()
}

fn inject(circuit: &Circuit, types: &[ErrorType], p: f64, strict: bool) -> Result<Circuit> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Spec(format!("noise probability {p} outside [0, 1]")));
    }
    if circuit.has_noise() {
        return Err(Error::Noise("circuit already contains noise instructions".into()));
    }
    let has = |t| types.contains(&t);
    let data = data_qubits(circuit);
    let data_set: HashSet<u32> = data.iter().copied().collect();

    let flips = |targets: &[u32], out: &mut Vec<Instruction>| {
        out.push(Instruction::noise(Opcode::XError, p, targets));
        if strict {
            out.push(Instruction::noise(Opcode::ZError, p, targets));
        }
    };

    let mut out = Vec::with_capacity(circuit.instructions.len() * 2);
    for inst in &circuit.instructions {
        let op = inst.opcode;
        if has(ErrorType::Readout) && op.measures() {
            flips(&inst.targets, &mut out);
        }
        out.push(inst.clone());
        if has(ErrorType::Reset) && op.resets() {
            flips(&inst.targets, &mut out);
        }
        if has(ErrorType::Gate) {
            match op {
                Opcode::H => out.push(Instruction::noise(Opcode::Depolarize1, p, &inst.targets)),
                Opcode::CX | Opcode::CZ => {
                    out.push(Instruction::noise(Opcode::Depolarize2, p, &inst.targets))
                }
                _ => {}
            }
        }
        let starts_round =
            op.resets() && inst.targets.iter().any(|q| !data_set.contains(q));
        if has(ErrorType::Depolarizing) && starts_round && !data.is_empty() {
            out.push(Instruction::noise(Opcode::Depolarize1, p, &data));
        }
    }
    Ok(Circuit {
        num_qubits: circuit.num_qubits,
        instructions: out,
        coords: circuit.coords.clone(),
    })
}

/// Identity with probability `1 - p`, otherwise X, Y or Z uniformly.
pub fn sample_depolarize1<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Pauli {
    if rng.random::<f64>() < p {
        Pauli::ALL[rng.random_range(1..4)]
    } else {
        Pauli::I
    }
}

/// `(I, I)` with probability `1 - p`, otherwise one of the 15 other pairs
/// uniformly.
pub fn sample_depolarize2<R: Rng + ?Sized>(p: f64, rng: &mut R) -> (Pauli, Pauli) {
    if rng.random::<f64>() < p {
        let k = rng.random_range(1..16usize);
        (Pauli::ALL[k >> 2], Pauli::ALL[k & 3])
    } else {
        (Pauli::I, Pauli::I)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::{build, CodeSpec, Family};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rotated(d: u32, r: u32) -> Circuit {
        build(&CodeSpec::new(Family::Rotated, d, r).unwrap()).unwrap()
    }

    fn targets_of(c: &Circuit, op: Opcode) -> usize {
        c.count_targets(op)
    }

    #[test]
    fn depolarizing_hits_each_data_qubit_once_per_round() {
        let c = apply_error_type(&rotated(3, 9), ErrorType::Depolarizing, 0.01).unwrap();
        assert_eq!(targets_of(&c, Opcode::Depolarize1), 81);
    }

    #[test]
    fn readout_adds_one_flip_per_measurement_instruction() {
        let clean = rotated(3, 4);
        let k = clean.count(Opcode::M);
        let c = apply_error_type(&clean, ErrorType::Readout, 0.01).unwrap();
        assert_eq!(c.count(Opcode::XError), k);
        for (i, inst) in c.instructions.iter().enumerate() {
            if inst.opcode == Opcode::XError {
                assert_eq!(c.instructions[i + 1].opcode, Opcode::M);
                assert_eq!(c.instructions[i + 1].targets, inst.targets);
            }
        }
    }

    #[test]
    fn reset_flip_follows_every_reset() {
        let clean = rotated(3, 4);
        let c = apply_error_type(&clean, ErrorType::Reset, 0.02).unwrap();
        assert_eq!(c.count(Opcode::XError), clean.count(Opcode::R));
        for (i, inst) in c.instructions.iter().enumerate() {
            if inst.opcode == Opcode::XError {
                assert_eq!(c.instructions[i - 1].opcode, Opcode::R);
            }
        }
    }

    #[test]
    fn gate_noise_matches_gate_arity() {
        let clean = rotated(3, 2);
        let c = apply_error_type(&clean, ErrorType::Gate, 0.01).unwrap();
        assert_eq!(targets_of(&c, Opcode::Depolarize1), targets_of(&clean, Opcode::H));
        assert_eq!(targets_of(&c, Opcode::Depolarize2), targets_of(&clean, Opcode::CX));
    }

    #[test]
    fn phenomenological_noise_only_touches_resets_and_measurements() {
        let c = apply_noise_model(&rotated(3, 1), NoiseModel::Phenomenological, 0.01).unwrap();
        for (i, inst) in c.instructions.iter().enumerate() {
            if inst.opcode.is_noise() {
                let before = c.instructions[i - 1].opcode;
                let after = c.instructions[i + 1].opcode;
                assert!(before.resets() || after.measures(), "noise at {i}");
                assert!(!before.is_unitary());
            }
        }
    }

    #[test]
    fn injection_is_purely_insertive() {
        for f in Family::ALL {
            let clean = build(&CodeSpec::new(f, 3, 3).unwrap()).unwrap();
            for src in NoiseSource::ALL {
                let noisy = NoiseSpec::new(src, 0.003).apply(&clean).unwrap();
                assert_eq!(noisy.without_noise(), clean);
                assert_eq!(noisy.num_detectors(), clean.num_detectors());
            }
        }
    }

    /// Each inserted instruction keyed by how many clean instructions precede it.
    fn anchored(c: &Circuit) -> Vec<(usize, String)> {
        let mut clean_seen = 0;
        let mut out = Vec::new();
        for inst in &c.instructions {
            if inst.opcode.is_noise() {
                out.push((clean_seen, format!("{inst:?}")));
            } else {
                clean_seen += 1;
            }
        }
        out.sort();
        out
    }

    #[test]
    fn circuit_level_is_union_of_the_other_models() {
        for f in Family::ALL {
            for d in [3, 5] {
                let clean = build(&CodeSpec::new(f, d, 2).unwrap()).unwrap();
                let get = |m| anchored(&apply_noise_model(&clean, m, 0.01).unwrap());
                let mut union = get(NoiseModel::CodeCapacity);
                union.extend(get(NoiseModel::Phenomenological));
                union.sort();
                assert_eq!(union, get(NoiseModel::CircuitLevel));
            }
        }
    }

    #[test]
    fn strict_mode_adds_z_flips() {
        let clean = rotated(3, 2);
        let c = apply_noise_model_with(&clean, NoiseModel::Phenomenological, 0.01, true).unwrap();
        assert_eq!(c.count(Opcode::ZError), c.count(Opcode::XError));
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let clean = rotated(3, 1);
        assert!(matches!(
            apply_error_type(&clean, ErrorType::Gate, 1.5),
            Err(Error::Spec(_))
        ));
        assert!(apply_error_type(&clean, ErrorType::Gate, -0.1).is_err());
        let noisy = apply_error_type(&clean, ErrorType::Gate, 0.1).unwrap();
        assert!(matches!(
            apply_error_type(&noisy, ErrorType::Reset, 0.1),
            Err(Error::Noise(_))
        ));
    }

    #[test]
    fn noise_spec_json_shape() {
        let s: NoiseSpec = serde_json::from_str(r#"{"source": "circuit_level", "p": 1e-3}"#).unwrap();
        assert_eq!(s, NoiseSpec::new(NoiseSource::Model(NoiseModel::CircuitLevel), 1e-3));
        assert_eq!(
            serde_json::to_string(&NoiseSpec::new(NoiseSource::Type(ErrorType::Gate), 0.5)).unwrap(),
            r#"{"source":"gate","p":0.5}"#
        );
        assert!(serde_json::from_str::<NoiseSpec>(r#"{"source": "leakage", "p": 0.1}"#).is_err());
    }

    fn within_4_sigma(count: usize, n: usize, q: f64) -> bool {
        let mean = n as f64 * q;
        let sigma = (n as f64 * q * (1.0 - q)).sqrt();
        (count as f64 - mean).abs() <= 4.0 * sigma
    }

    #[test]
    fn depolarize1_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert!((0..1000).all(|_| sample_depolarize1(0.0, &mut rng) == Pauli::I));
        for (p, n) in [(0.01, 200_000), (0.3, 1_000_000), (0.75, 200_000)] {
            let mut hist = [0usize; 4];
            for _ in 0..n {
                hist[sample_depolarize1(p, &mut rng) as usize] += 1;
            }
            assert!(within_4_sigma(hist[0], n, 1.0 - p), "p={p} {hist:?}");
            for &h in &hist[1..] {
                assert!(within_4_sigma(h, n, p / 3.0), "p={p} {hist:?}");
            }
        }
    }

    #[test]
    fn depolarize2_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        assert!((0..1000).all(|_| sample_depolarize2(0.0, &mut rng) == (Pauli::I, Pauli::I)));
        for (p, n) in [(0.01, 200_000), (0.15, 1_000_000), (0.9375, 320_000)] {
            let mut hist = [0usize; 16];
            for _ in 0..n {
                let (a, b) = sample_depolarize2(p, &mut rng);
                hist[(a as usize) * 4 + b as usize] += 1;
            }
            assert!(within_4_sigma(hist[0], n, 1.0 - p), "p={p}");
            for &h in &hist[1..] {
                assert!(within_4_sigma(h, n, p / 15.0), "p={p} {hist:?}");
            }
        }
    }

    #[test]
    fn maximal_mixing_points_are_uniform() {
        // At p = 3/4 and p = 15/16 the identity is exactly as likely as any other outcome.
        assert!((1.0 - 0.75f64 - 0.75 / 3.0).abs() < 1e-15);
        assert!((1.0 - 0.9375f64 - 0.9375 / 15.0).abs() < 1e-15);
    }
}
