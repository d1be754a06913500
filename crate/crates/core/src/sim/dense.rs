//! State-vector reference simulator. Exponential in qubits; test use only.

use num_complex::Complex64;
use rand::Rng;

use super::frame::shot_rngs;
use super::{BitMatrix, ShotBatch};
use crate::circuit::{Circuit, Opcode};
use crate::error::{Error, Result};
use crate::noise::{sample_depolarize1, sample_depolarize2};
use crate::pauli::Pauli;

pub const DEFAULT_ORACLE_QUBITS: usize = 12;

struct State {
    amp: Vec<Complex64>,
}

impl State {
    fn new(n: usize) -> Self {
        let mut amp = vec![Complex64::new(0.0, 0.0); 1 << n];
        amp[0] = Complex64::new(1.0, 0.0);
        Self { amp }
    }

    fn h(&mut self, q: usize) {
        let bit = 1 << q;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..self.amp.len() {
            if i & bit == 0 {
                let (a, b) = (self.amp[i], self.amp[i | bit]);
                self.amp[i] = (a + b) * s;
                self.amp[i | bit] = (a - b) * s;
            }
        }
    }

    fn x(&mut self, q: usize) {
        let bit = 1 << q;
        for i in 0..self.amp.len() {
            if i & bit == 0 {
                self.amp.swap(i, i | bit);
            }
        }
    }

    fn z(&mut self, q: usize) {
        let bit = 1 << q;
        for (i, a) in self.amp.iter_mut().enumerate() {
            if i & bit != 0 {
                *a = -*a;
            }
        }
    }

    fn pauli(&mut self, q: usize, p: Pauli) {
        if p.z_bit() {
            self.z(q);
        }
        if p.x_bit() {
            self.x(q);
        }
    }

    fn cx(&mut self, c: usize, t: usize) {
        let (cb, tb) = (1 << c, 1 << t);
        for i in 0..self.amp.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amp.swap(i, i | tb);
            }
        }
    }

    fn cz(&mut self, a: usize, b: usize) {
        let mask = (1 << a) | (1 << b);
        for (i, v) in self.amp.iter_mut().enumerate() {
            if i & mask == mask {
                *v = -*v;
            }
        }
    }

    fn measure<R: Rng>(&mut self, q: usize, rng: &mut R) -> bool {
        let bit = 1 << q;
        let p1: f64 = self
            .amp
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        let outcome = rng.random::<f64>() < p1;
        let norm = if outcome { p1 } else { 1.0 - p1 }.sqrt();
        for (i, a) in self.amp.iter_mut().enumerate() {
            if (i & bit != 0) == outcome {
                *a /= norm;
            } else {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        outcome
    }
}

pub fn dense_oracle_sample(circuit: &Circuit, shots: usize, seed: u64) -> Result<ShotBatch> {
    dense_oracle_sample_with_cap(circuit, shots, seed, DEFAULT_ORACLE_QUBITS)
}

/// As [`dense_oracle_sample`] with an explicit qubit cap.
pub fn dense_oracle_sample_with_cap(
    circuit: &Circuit,
    shots: usize,
    seed: u64,
    max_qubits: usize,
) -> Result<ShotBatch> {
    circuit.check()?;
    let n = circuit.num_qubits;
    if n > max_qubits {
        return Err(Error::Capacity(format!(
            "dense oracle limited to {max_qubits} qubits, circuit has {n}"
        )));
    }
    let num_det = circuit.num_detectors();
    let num_obs = circuit.num_observables();
    let mut detectors = BitMatrix::zeros(num_det, shots);
    let mut observables = BitMatrix::zeros(num_obs, shots);

    for shot in 0..shots {
        let mut rng = shot_rngs(seed, shot as u64, 1).pop().expect("one stream");
        let mut state = State::new(n);
        let mut records: Vec<bool> = Vec::with_capacity(circuit.num_measurements());
        let mut det = 0usize;
        for inst in &circuit.instructions {
            let t = &inst.targets;
            let p = inst.arg.unwrap_or(0.0);
            match inst.opcode {
                Opcode::H => t.iter().for_each(|&q| state.h(q as usize)),
                Opcode::CX => t.chunks_exact(2).for_each(|c| state.cx(c[0] as usize, c[1] as usize)),
                Opcode::CZ => t.chunks_exact(2).for_each(|c| state.cz(c[0] as usize, c[1] as usize)),
                Opcode::R => {
                    for &q in t {
                        if state.measure(q as usize, &mut rng) {
                            state.x(q as usize);
                        }
                    }
                }
                Opcode::M | Opcode::MR => {
                    for &q in t {
                        let bit = state.measure(q as usize, &mut rng);
                        records.push(bit);
                        if bit && inst.opcode == Opcode::MR {
                            state.x(q as usize);
                        }
                    }
                }
                Opcode::XError => {
                    for &q in t {
                        if rng.random::<f64>() < p {
                            state.x(q as usize);
                        }
                    }
                }
                Opcode::ZError => {
                    for &q in t {
                        if rng.random::<f64>() < p {
                            state.z(q as usize);
                        }
                    }
                }
                Opcode::Depolarize1 => {
                    for &q in t {
                        let e = sample_depolarize1(p, &mut rng);
                        state.pauli(q as usize, e);
                    }
                }
                Opcode::Depolarize2 => {
                    for c in t.chunks_exact(2) {
                        let (a, b) = sample_depolarize2(p, &mut rng);
                        state.pauli(c[0] as usize, a);
                        state.pauli(c[1] as usize, b);
                    }
                }
                Opcode::Tick => {}
                Opcode::Detector => {
                    let v = t.iter().fold(false, |acc, &k| acc ^ records[records.len() - k as usize]);
                    detectors.set(det, shot, v);
                    det += 1;
                }
                Opcode::ObservableInclude => {
                    let o = inst.observable_index().unwrap_or(0) as usize;
                    let v = t.iter().fold(false, |acc, &k| acc ^ records[records.len() - k as usize]);
                    let cur = observables.get(o, shot);
                    observables.set(o, shot, cur ^ v);
                }
            }
        }
    }
    Ok(ShotBatch {
        shots,
        detectors,
        observables,
    })
}
