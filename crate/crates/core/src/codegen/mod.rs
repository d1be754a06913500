//! Memory-experiment circuit construction.
//!
//! Every circuit resets the data, runs `rounds` stabilizer cycles, measures
//! the data in the memory basis and compares it against the last syndrome.
//! Detector layout:
//! * first round: one detector per check of the memory basis,
//! * later rounds: each ancilla XOR its previous outcome,
//! * final: each memory-basis check recomputed from data XOR its last outcome.

mod layout;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use layout::{CheckKind, Coord, LayoutMap, Plaquette};

use crate::circuit::{Circuit, Instruction, Opcode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Rotated,
    Unrotated,
    Repetition,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Rotated, Family::Unrotated, Family::Repetition];

    pub fn name(self) -> &'static str {
        match self {
            Family::Rotated => "rotated",
            Family::Unrotated => "unrotated",
            Family::Repetition => "repetition",
        }
    }

    /// Total qubit count of the layout at distance `d`.
    pub fn qubits(self, d: u32) -> u64 {
        let d = d as u64;
        match self {
            Family::Rotated => 2 * d * d - 1,
            Family::Unrotated => (2 * d - 1) * (2 * d - 1),
            Family::Repetition => 2 * d - 1,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Spec(format!("unknown code family '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Basis {
    #[default]
    Z,
    X,
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Z" | "z" => Ok(Basis::Z),
            "X" | "x" => Ok(Basis::X),
            _ => Err(Error::Spec(format!("unknown memory basis '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodeSpec {
    pub family: Family,
    pub distance: u32,
    pub rounds: u32,
    pub basis: Basis,
}

impl CodeSpec {
    pub fn new(family: Family, distance: u32, rounds: u32) -> Result<Self> {
        let spec = Self {
            family,
            distance,
            rounds,
            basis: Basis::Z,
        };
        spec.check()?;
        Ok(spec)
    }

    /// Spec with the default `3 * distance` rounds.
    pub fn with_default_rounds(family: Family, distance: u32) -> Result<Self> {
        Self::new(family, distance, default_rounds(distance))
    }

    pub fn with_basis(mut self, basis: Basis) -> Self {
        self.basis = basis;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.distance < 3 || self.distance.is_multiple_of(2) {
            return Err(Error::Spec(format!(
                "distance must be odd and at least 3, got {}",
                self.distance
            )));
        }
        if self.rounds < 1 {
            return Err(Error::Spec("rounds must be at least 1".into()));
        }
        if self.family == Family::Repetition && self.basis == Basis::X {
            return Err(Error::Spec("the repetition code only protects Z memory".into()));
        }
        Ok(())
    }

    pub fn layout(&self) -> LayoutMap {
        LayoutMap::new(self.family, self.distance)
    }
}

pub fn default_rounds(distance: u32) -> u32 {
    3 * distance
}

/// One syndrome-extraction round: ancilla reset, basis change on X
/// ancillas, four CX layers, basis change back, ancilla measurement.
pub fn stabilizer_schedule(layout: &LayoutMap) -> Vec<Instruction> {
    let ancillas = layout.ancilla_list();
    let x_anc: Vec<u32> = layout
        .plaquettes
        .iter()
        .filter(|p| p.kind == CheckKind::X)
        .map(|p| p.ancilla)
        .collect();

    let mut block = vec![Instruction::gate(Opcode::R, &ancillas), Instruction::tick()];
    if !x_anc.is_empty() {
        block.push(Instruction::gate(Opcode::H, &x_anc));
        block.push(Instruction::tick());
    }
    for layer in 0..4 {
        let mut pairs = Vec::new();
        for p in &layout.plaquettes {
            if let Some(q) = p.slots[layer] {
                match p.kind {
                    CheckKind::X => pairs.extend([p.ancilla, q]),
                    CheckKind::Z => pairs.extend([q, p.ancilla]),
                }
            }
        }
        if !pairs.is_empty() {
            block.push(Instruction::new(Opcode::CX, pairs, None));
            block.push(Instruction::tick());
        }
    }
    if !x_anc.is_empty() {
        block.push(Instruction::gate(Opcode::H, &x_anc));
        block.push(Instruction::tick());
    }
    block.push(Instruction::gate(Opcode::M, &ancillas));
    block
}

fn build_memory(spec: &CodeSpec) -> Result<Circuit> {
    spec.check()?;
    let layout = spec.layout();
    let n_data = layout.num_data() as u32;
    let n_anc = layout.num_ancillas() as u32;
    let data = layout.data_list();
    let memory_kind = match spec.basis {
        Basis::Z => CheckKind::Z,
        Basis::X => CheckKind::X,
    };

    let mut c = Circuit::new(layout.num_qubits());
    for (q, (x, y)) in layout.coordinates() {
        c.coords.insert(q, (x as f64, y as f64));
    }

    c.push(Instruction::gate(Opcode::R, &data));
    if spec.basis == Basis::X {
        c.push(Instruction::gate(Opcode::H, &data));
    }
    c.push(Instruction::tick());

    let round = stabilizer_schedule(&layout);
    for r in 0..spec.rounds {
        c.instructions.extend(round.iter().cloned());
        for (a, p) in layout.plaquettes.iter().enumerate() {
            let back = n_anc - a as u32;
            if r == 0 {
                if p.kind == memory_kind {
                    c.push(Instruction::detector(&[back]));
                }
            } else {
                c.push(Instruction::detector(&[back, back + n_anc]));
            }
        }
        c.push(Instruction::tick());
    }

    if spec.basis == Basis::X {
        c.push(Instruction::gate(Opcode::H, &data));
    }
    c.push(Instruction::gate(Opcode::M, &data));
    for (a, p) in layout.plaquettes.iter().enumerate() {
        if p.kind != memory_kind {
            continue;
        }
        let mut recs: Vec<u32> = p.data().iter().map(|&q| n_data - q).collect();
        recs.push(n_data + n_anc - a as u32);
        c.push(Instruction::detector(&recs));
    }
    let logical = match spec.basis {
        Basis::Z => &layout.z_logical,
        Basis::X => &layout.x_logical,
    };
    let recs: Vec<u32> = logical.iter().map(|&q| n_data - q).collect();
    c.push(Instruction::observable(0, &recs));
    Ok(c)
}

fn require(spec: &CodeSpec, family: Family) -> Result<()> {
    if spec.family != family {
        return Err(Error::Spec(format!(
            "expected a {family} spec, got {}",
            spec.family
        )));
    }
    Ok(())
}

pub fn build_rotated_surface(spec: &CodeSpec) -> Result<Circuit> {
    require(spec, Family::Rotated)?;
    build_memory(spec)
}

pub fn build_unrotated_surface(spec: &CodeSpec) -> Result<Circuit> {
    require(spec, Family::Unrotated)?;
    build_memory(spec)
}

pub fn build_repetition(spec: &CodeSpec) -> Result<Circuit> {
    require(spec, Family::Repetition)?;
    build_memory(spec)
}

/// Builds the memory circuit for whichever family `spec` names.
pub fn build(spec: &CodeSpec) -> Result<Circuit> {
    build_memory(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceCount {
    pub qubits: usize,
    /// Hadamard applications plus two-qubit gate applications.
    pub gates: usize,
}

pub fn resource_count(spec: &CodeSpec) -> Result<ResourceCount> {
    let c = build(spec)?;
    let gates = c.count_targets(Opcode::H)
        + c.count_targets(Opcode::CX) / 2
        + c.count_targets(Opcode::CZ) / 2;
    Ok(ResourceCount {
        qubits: c.num_qubits,
        gates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(f: Family, d: u32, r: u32) -> CodeSpec {
        CodeSpec::new(f, d, r).unwrap()
    }

    #[test]
    fn spec_rejects_bad_distances() {
        assert!(CodeSpec::new(Family::Rotated, 4, 3).is_err());
        assert!(CodeSpec::new(Family::Rotated, 1, 3).is_err());
        assert!(CodeSpec::new(Family::Rotated, 3, 0).is_err());
        assert!(matches!(
            build_rotated_surface(&CodeSpec {
                family: Family::Rotated,
                distance: 2,
                rounds: 1,
                basis: Basis::Z
            }),
            Err(Error::Spec(_))
        ));
    }

    #[test]
    fn builders_insist_on_their_family() {
        let s = spec(Family::Unrotated, 3, 1);
        assert!(build_rotated_surface(&s).is_err());
        assert!(build_unrotated_surface(&s).is_ok());
    }

    #[test]
    fn default_rounds_is_three_times_distance() {
        assert_eq!(default_rounds(3), 9);
        assert_eq!(default_rounds(5), 15);
        assert_eq!(default_rounds(25), 75);
    }

    #[test]
    fn qubit_counts() {
        assert_eq!(build(&spec(Family::Rotated, 3, 3)).unwrap().num_qubits, 17);
        assert_eq!(build(&spec(Family::Rotated, 5, 3)).unwrap().num_qubits, 49);
        assert_eq!(build(&spec(Family::Repetition, 3, 3)).unwrap().num_qubits, 5);
        for (d, n) in [(3, 25), (5, 81), (7, 169), (9, 289)] {
            assert_eq!(resource_count(&spec(Family::Unrotated, d, 1)).unwrap().qubits, n);
            assert_eq!(Family::Unrotated.qubits(d), n as u64);
        }
    }

    #[test]
    fn one_round_measures_every_ancilla_once() {
        let c = build(&spec(Family::Rotated, 3, 1)).unwrap();
        let m: Vec<usize> = c
            .instructions
            .iter()
            .filter(|i| i.opcode == Opcode::M)
            .map(|i| i.targets.len())
            .collect();
        assert_eq!(m, vec![8, 9]);
    }

    #[test]
    fn weight_four_z_check_uses_four_cx_into_the_ancilla() {
        let layout = LayoutMap::new(Family::Rotated, 3);
        let block = stabilizer_schedule(&layout);
        let p = layout
            .plaquettes
            .iter()
            .find(|p| p.kind == CheckKind::Z && p.weight() == 4)
            .unwrap();
        let hits: usize = block
            .iter()
            .filter(|i| i.opcode == Opcode::CX)
            .flat_map(|i| i.targets.chunks_exact(2))
            .filter(|pair| pair[1] == p.ancilla)
            .count();
        assert_eq!(hits, 4);
        assert!(block
            .iter()
            .filter(|i| i.opcode == Opcode::CX)
            .flat_map(|i| i.targets.chunks_exact(2))
            .all(|pair| pair[0] != p.ancilla));
    }

    #[test]
    fn detector_and_measurement_tallies() {
        for f in Family::ALL {
            for d in [3, 5] {
                for r in [1, 2, 5] {
                    let s = spec(f, d, r);
                    let c = build(&s).unwrap();
                    let l = s.layout();
                    let nz = l.z_ancillas.len();
                    let na = l.num_ancillas();
                    assert_eq!(c.num_measurements(), r as usize * na + l.num_data());
                    assert_eq!(c.num_detectors(), nz + (r as usize - 1) * na + nz);
                    assert_eq!(c.num_observables(), 1);
                    assert!(c.validate().is_ok());
                    assert!(!c.has_noise());
                }
            }
        }
    }

    #[test]
    fn x_basis_builds_for_surface_codes_only() {
        let s = spec(Family::Rotated, 3, 2).with_basis(Basis::X);
        let c = build(&s).unwrap();
        assert!(c.validate().is_ok());
        assert!(build(&spec(Family::Repetition, 3, 2).with_basis(Basis::X)).is_err());
    }

    #[test]
    fn gate_count_is_the_schedule_tally() {
        // Rotated d=3: 4 X checks get two H each per round; 24 CX per round.
        let r = resource_count(&spec(Family::Rotated, 3, 1)).unwrap();
        assert_eq!(r.gates, 8 + 24);
        let r9 = resource_count(&spec(Family::Rotated, 3, 9)).unwrap();
        assert_eq!(r9.gates, 9 * 32);
    }

    #[test]
    fn text_round_trip_is_exact() {
        for f in Family::ALL {
            let c = build(&spec(f, 3, 3)).unwrap();
            let back: Circuit = c.to_string().parse().unwrap();
            assert_eq!(back, c);
        }
    }
}
