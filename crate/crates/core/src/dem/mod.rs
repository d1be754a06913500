//! Detector error models: every independent fault of a noisy circuit, the
//! detectors it flips and the observables it flips.

mod graph;
mod split;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

pub use graph::{dem_to_matching_graph, graph_distance, Edge, MatchingGraph};
pub use split::{decoding_graph, split_xz, SplitDem};

use crate::circuit::{Circuit, Opcode};
use crate::error::{Error, Result};
use crate::pauli::Pauli;
use crate::sim::frame::{propagate_faults, Fault, Program, Step, LANES};

/// Probability that exactly one of two independent events happens.
pub fn combine_probabilities(p1: f64, p2: f64) -> f64 {
    p1 * (1.0 - p2) + p2 * (1.0 - p1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMechanism {
    pub p: f64,
    /// Sorted, no duplicates.
    pub detectors: Vec<u32>,
    /// Sorted, no duplicates.
    pub observables: Vec<u32>,
}

impl ErrorMechanism {
    pub fn observable_mask(&self) -> u64 {
        self.observables.iter().fold(0, |m, &o| m | (1 << o))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectorErrorModel {
    pub num_detectors: usize,
    pub num_observables: usize,
    pub mechanisms: Vec<ErrorMechanism>,
    /// `(x, y, t)` per detector when the circuit carries coordinates.
    pub detector_coords: Vec<Option<[f64; 3]>>,
    /// Qubits whose measurement records feed each detector.
    pub detector_qubits: Vec<Vec<u32>>,
}

type Signature = (Vec<u32>, Vec<u32>);

impl DetectorErrorModel {
    /// Builds a model from raw contributions, merging equal signatures.
    /// Contributions are sorted before merging so the result does not depend
    /// on their order.
    pub fn from_contributions(
        num_detectors: usize,
        num_observables: usize,
        contributions: impl IntoIterator<Item = (Signature, f64)>,
    ) -> Self {
        let mut groups: BTreeMap<Signature, Vec<f64>> = BTreeMap::new();
        for ((mut dets, mut obs), p) in contributions {
            dets.sort_unstable();
            obs.sort_unstable();
            if (dets.is_empty() && obs.is_empty()) || p <= 0.0 {
                continue;
            }
            groups.entry((dets, obs)).or_default().push(p);
        }
        let mechanisms = groups
            .into_iter()
            .filter_map(|((detectors, observables), mut ps)| {
                ps.sort_by(f64::total_cmp);
                let p = ps.into_iter().fold(0.0, combine_probabilities);
                (p > 0.0).then_some(ErrorMechanism {
                    p,
                    detectors,
                    observables,
                })
            })
            .collect();
        Self {
            num_detectors,
            num_observables,
            mechanisms,
            detector_coords: vec![None; num_detectors],
            detector_qubits: vec![Vec::new(); num_detectors],
        }
    }

    pub fn len(&self) -> usize {
        self.mechanisms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mechanisms.is_empty()
    }

    pub fn find(&self, detectors: &[u32], observables: &[u32]) -> Option<&ErrorMechanism> {
        self.mechanisms
            .iter()
            .find(|m| m.detectors == detectors && m.observables == observables)
    }
}

/// One elementary Pauli fault of a noisy circuit and what it flips.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultSignature {
    /// Index of the noise instruction in the circuit.
    pub instruction: usize,
    pub flips: Vec<(u32, Pauli)>,
    pub p: f64,
    pub detectors: Vec<u32>,
    pub observables: Vec<u32>,
}

const XYZ: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

fn enumerate_faults(prog: &Program) -> Vec<(Fault, usize, f64)> {
    let mut out = Vec::new();
    for (s, step) in prog.steps.iter().enumerate() {
        let Step::Noise {
            instruction,
            opcode,
            targets,
            p,
            ..
        } = step
        else {
            continue;
        };
        if *p <= 0.0 {
            continue;
        }
        let mut push = |flips: Vec<(u32, Pauli)>, p: f64| {
            out.push((Fault { step: s, flips }, *instruction, p));
        };
        match opcode {
            Opcode::XError => targets.iter().for_each(|&q| push(vec![(q, Pauli::X)], *p)),
            Opcode::ZError => targets.iter().for_each(|&q| push(vec![(q, Pauli::Z)], *p)),
            Opcode::Depolarize1 => {
                for &q in targets {
                    for e in XYZ {
                        push(vec![(q, e)], p / 3.0);
                    }
                }
            }
            Opcode::Depolarize2 => {
                for pair in targets.chunks_exact(2) {
                    for k in 1..16 {
                        let (a, b) = (Pauli::ALL[k >> 2], Pauli::ALL[k & 3]);
                        let flips = [(pair[0], a), (pair[1], b)]
                            .into_iter()
                            .filter(|(_, e)| *e != Pauli::I)
                            .collect();
                        push(flips, p / 15.0);
                    }
                }
            }
            _ => unreachable!("noise step with non-noise opcode"),
        }
    }
    out
}

fn mask_to_list(mask: u64) -> Vec<u32> {
    (0..64).filter(|o| mask >> o & 1 == 1).collect()
}

/// Every elementary fault with the detectors and observables it flips.
pub fn fault_signatures(noisy: &Circuit) -> Result<Vec<FaultSignature>> {
    let prog = Program::compile(noisy)?;
    let faults = enumerate_faults(&prog);
    let chunks: Vec<_> = faults.chunks(LANES).collect();
    let results: Vec<Vec<(Vec<u32>, u64)>> = chunks
        .par_iter()
        .map(|chunk| {
            let fs: Vec<Fault> = chunk.iter().map(|(f, _, _)| f.clone()).collect();
            propagate_faults(&prog, &fs)
        })
        .collect();
    Ok(faults
        .into_iter()
        .zip(results.into_iter().flatten())
        .map(|((fault, instruction, p), (detectors, obs))| FaultSignature {
            instruction,
            flips: fault.flips,
            p,
            detectors,
            observables: mask_to_list(obs),
        })
        .collect())
}

fn detector_geometry(circuit: &Circuit) -> (Vec<Option<[f64; 3]>>, Vec<Vec<u32>>) {
    let measured = circuit.measured_qubits();
    // Measurement-instruction ordinal of every record.
    let mut layer_of = Vec::with_capacity(measured.len());
    let mut layer = 0usize;
    for inst in &circuit.instructions {
        if inst.opcode.measures() {
            layer_of.extend(std::iter::repeat_n(layer, inst.targets.len()));
            layer += 1;
        }
    }
    let final_targets: Vec<u32> = circuit
        .instructions
        .iter()
        .rev()
        .find(|i| i.opcode.measures())
        .map(|i| i.targets.clone())
        .unwrap_or_default();

    let mut coords = Vec::new();
    let mut qubits = Vec::new();
    for recs in circuit.detector_records() {
        let qs: Vec<u32> = recs.iter().map(|&r| measured[r]).collect();
        let anchor = qs
            .iter()
            .find(|q| !final_targets.contains(q))
            .or(qs.first())
            .copied();
        let t = recs.iter().map(|&r| layer_of[r]).max().unwrap_or(0);
        coords.push(anchor.and_then(|q| circuit.coords.get(&q)).map(|&(x, y)| [x, y, t as f64]));
        qubits.push(qs);
    }
    (coords, qubits)
}

/// Extracts the detector error model of a noisy circuit.
pub fn extract_dem(noisy: &Circuit) -> Result<DetectorErrorModel> {
    let sigs = fault_signatures(noisy)?;
    let mut dem = DetectorErrorModel::from_contributions(
        noisy.num_detectors(),
        noisy.num_observables(),
        sigs.into_iter().map(|s| ((s.detectors, s.observables), s.p)),
    );
    let (coords, qubits) = detector_geometry(noisy);
    dem.detector_coords = coords;
    dem.detector_qubits = qubits;
    Ok(dem)
}

impl fmt::Display for DetectorErrorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.mechanisms {
            write!(f, "error({})", m.p)?;
            for d in &m.detectors {
                write!(f, " D{d}")?;
            }
            for o in &m.observables {
                write!(f, " L{o}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FromStr for DetectorErrorModel {
    type Err = Error;

    /// Reads `error(p) Dk ... Lk ...` lines. Detector and observable counts
    /// are inferred from the largest index seen.
    fn from_str(s: &str) -> Result<Self> {
        let mut contributions = Vec::new();
        let (mut nd, mut no) = (0usize, 0usize);
        for (i, raw) in s.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |m: String| Error::Parse {
                line: i + 1,
                message: m,
            };
            let rest = line
                .strip_prefix("error(")
                .ok_or_else(|| perr(format!("expected error(p), found '{line}'")))?;
            let close = rest.find(')').ok_or_else(|| perr("unclosed parenthesis".into()))?;
            let p: f64 = rest[..close]
                .trim()
                .parse()
                .map_err(|_| perr(format!("bad probability '{}'", &rest[..close])))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(perr(format!("probability {p} outside [0, 1]")));
            }
            let (mut dets, mut obs) = (Vec::new(), Vec::new());
            for tok in rest[close + 1..].split_whitespace() {
                let (list, body) = match tok.split_at(1) {
                    ("D", b) => (&mut dets, b),
                    ("L", b) => (&mut obs, b),
                    _ => return Err(perr(format!("bad target '{tok}'"))),
                };
                list.push(body.parse::<u32>().map_err(|_| perr(format!("bad target '{tok}'")))?);
            }
            nd = nd.max(dets.iter().map(|&d| d as usize + 1).max().unwrap_or(0));
            no = no.max(obs.iter().map(|&o| o as usize + 1).max().unwrap_or(0));
            contributions.push(((dets, obs), p));
        }
        Ok(DetectorErrorModel::from_contributions(nd, no, contributions))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Instruction;
    use crate::codegen::{build, CheckKind, CodeSpec, Family};
    use crate::noise::{apply_noise_model, NoiseModel};
    use crate::sim::sample_batch;

    fn noisy(f: Family, d: u32, r: u32, m: NoiseModel, p: f64) -> Circuit {
        apply_noise_model(&build(&CodeSpec::new(f, d, r).unwrap()).unwrap(), m, p).unwrap()
    }

    #[test]
    fn equal_signatures_merge() {
        let sig = || (vec![0u32, 1], vec![]);
        let dem = DetectorErrorModel::from_contributions(2, 0, [(sig(), 0.1), (sig(), 0.1)]);
        assert_eq!(dem.len(), 1);
        assert!((dem.mechanisms[0].p - 0.18).abs() < 1e-15);
    }

    #[test]
    fn merging_ignores_contribution_order() {
        let dem = extract_dem(&noisy(Family::Rotated, 3, 3, NoiseModel::CircuitLevel, 0.01)).unwrap();
        let sigs = fault_signatures(&noisy(Family::Rotated, 3, 3, NoiseModel::CircuitLevel, 0.01)).unwrap();
        let mut reversed: Vec<_> = sigs.into_iter().map(|s| ((s.detectors, s.observables), s.p)).collect();
        reversed.reverse();
        let n = reversed.len();
        reversed.rotate_left(n / 3);
        let again = DetectorErrorModel::from_contributions(dem.num_detectors, 1, reversed);
        assert_eq!(again.mechanisms, dem.mechanisms);
    }

    #[test]
    fn bulk_data_x_error_is_a_two_detector_mechanism() {
        let spec = CodeSpec::new(Family::Rotated, 3, 3).unwrap();
        let layout = spec.layout();
        let q = layout.data_qubits[&(3, 3)];
        let mut c = build(&spec).unwrap();
        let pos = c.instructions.iter().enumerate().filter(|(_, i)| i.opcode == Opcode::R).nth(2).unwrap().0;
        c.instructions.insert(pos, Instruction::noise(Opcode::XError, 0.01, &[q]));
        let dem = extract_dem(&c).unwrap();
        assert_eq!(dem.len(), 1);
        assert_eq!(dem.mechanisms[0].detectors.len(), 2);
        assert!(dem.mechanisms[0].observables.is_empty());
    }

    #[test]
    fn boundary_x_error_before_readout_flips_one_detector_and_the_observable() {
        let spec = CodeSpec::new(Family::Rotated, 3, 3).unwrap();
        let layout = spec.layout();
        // Corner qubit of the logical row: covered by exactly one Z check.
        let q = layout.data_qubits[&(1, 1)];
        let clean = build(&spec).unwrap();
        let last_m = clean.instructions.iter().rposition(|i| i.opcode == Opcode::M).unwrap();
        let mut c = clean.clone();
        c.instructions.insert(last_m, Instruction::noise(Opcode::XError, 0.02, &[q]));
        let dem = extract_dem(&c).unwrap();
        assert_eq!(dem.len(), 1);
        let m = &dem.mechanisms[0];
        assert_eq!((m.detectors.len(), m.observables.clone()), (1, vec![0]));

        let mut forced = clean.clone();
        forced.instructions.insert(last_m, Instruction::noise(Opcode::XError, 1.0, &[q]));
        let b = sample_batch(&forced, 64, 0).unwrap();
        for (s, defects) in b.defects_per_shot().iter().enumerate() {
            assert_eq!(defects, &m.detectors);
            assert!(b.observable(s, 0));
        }
    }

    /// The noiseless circuit with a single forced fault in place of the noise.
    fn forced(noisy: &Circuit, sig: &FaultSignature) -> Circuit {
        let mut out = Circuit::new(noisy.num_qubits);
        for (i, inst) in noisy.instructions.iter().enumerate() {
            if i == sig.instruction {
                for &(q, e) in &sig.flips {
                    if e.x_bit() {
                        out.push(Instruction::noise(Opcode::XError, 1.0, &[q]));
                    }
                    if e.z_bit() {
                        out.push(Instruction::noise(Opcode::ZError, 1.0, &[q]));
                    }
                }
            } else if !inst.opcode.is_noise() {
                out.push(inst.clone());
            }
        }
        out
    }

    #[test]
    fn every_fault_signature_matches_forced_sampling_at_d3() {
        for f in Family::ALL {
            let c = noisy(f, 3, 2, NoiseModel::CircuitLevel, 0.01);
            let sigs = fault_signatures(&c).unwrap();
            assert!(!sigs.is_empty());
            for sig in &sigs {
                let b = sample_batch(&forced(&c, sig), 8, 1).unwrap();
                for (s, defects) in b.defects_per_shot().iter().enumerate() {
                    assert_eq!(defects, &sig.detectors, "{f:?} {sig:?}");
                    assert_eq!(b.observable(s, 0), sig.observables == [0], "{f:?} {sig:?}");
                }
            }
        }
    }

    #[test]
    fn no_single_fault_flips_the_observable_silently() {
        for f in Family::ALL {
            for d in [3, 5] {
                let dem = extract_dem(&noisy(f, d, 3, NoiseModel::CircuitLevel, 0.001)).unwrap();
                assert!(dem.mechanisms.iter().all(|m| !m.detectors.is_empty()), "{f:?} d={d}");
            }
        }
    }

    #[test]
    fn mechanism_probabilities_are_valid() {
        let dem = extract_dem(&noisy(Family::Unrotated, 3, 3, NoiseModel::CircuitLevel, 0.01)).unwrap();
        assert!(dem.mechanisms.iter().all(|m| m.p > 0.0 && m.p < 1.0));
        let mut sigs: Vec<_> = dem.mechanisms.iter().map(|m| (&m.detectors, &m.observables)).collect();
        let n = sigs.len();
        sigs.dedup();
        assert_eq!(sigs.len(), n);
    }

    #[test]
    fn detector_coordinates_follow_the_ancilla_and_round() {
        let spec = CodeSpec::new(Family::Rotated, 3, 3).unwrap();
        let layout = spec.layout();
        let dem = extract_dem(&noisy(Family::Rotated, 3, 3, NoiseModel::CircuitLevel, 0.01)).unwrap();
        let first_z = layout.plaquettes.iter().find(|p| p.kind == CheckKind::Z).unwrap();
        let (x, y) = layout.coordinates()[&first_z.ancilla];
        assert_eq!(dem.detector_coords[0], Some([x as f64, y as f64, 0.0]));
        let last = dem.detector_coords.last().unwrap().unwrap();
        assert_eq!(last[2], 3.0);
    }

    #[test]
    fn text_format_round_trips() {
        let dem = extract_dem(&noisy(Family::Repetition, 3, 3, NoiseModel::CircuitLevel, 0.01)).unwrap();
        let text = dem.to_string();
        assert!(text.lines().all(|l| l.starts_with("error(")));
        let back: DetectorErrorModel = text.parse().unwrap();
        assert_eq!(back.mechanisms, dem.mechanisms);
        let small: DetectorErrorModel = "error(0.1) D3 D7 L0\n".parse().unwrap();
        assert_eq!(small.num_detectors, 8);
        assert_eq!(small.mechanisms[0].observables, vec![0]);
        assert!("error(0.1) Q3".parse::<DetectorErrorModel>().is_err());
    }
}
