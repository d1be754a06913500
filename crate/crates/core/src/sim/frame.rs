//! Bit-packed Pauli-frame engine. Each `u64` word holds one qubit's frame
//! bit for 64 independent lanes (shots, or single faults during model
//! extraction).

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::circuit::{Circuit, Opcode};
use crate::error::Result;
use crate::pauli::Pauli;

pub(crate) const LANES: usize = 64;

#[derive(Debug, Clone)]
pub(crate) enum Step {
    H(Vec<u32>),
    Cx(Vec<u32>),
    Cz(Vec<u32>),
    Reset(Vec<u32>),
    Measure {
        targets: Vec<u32>,
        first_record: usize,
        reset: bool,
    },
    Noise {
        instruction: usize,
        opcode: Opcode,
        targets: Vec<u32>,
        p: f64,
        gaps: Option<Geometric>,
    },
}

/// A circuit flattened for repeated execution.
#[derive(Debug, Clone)]
pub(crate) struct Program {
    pub num_qubits: usize,
    pub num_measurements: usize,
    pub steps: Vec<Step>,
    /// Absolute record indices per detector.
    pub detectors: Vec<Vec<usize>>,
    /// Absolute record indices per observable (XOR semantics).
    pub observables: Vec<Vec<usize>>,
}

impl Program {
    pub fn compile(circuit: &Circuit) -> Result<Self> {
        circuit.check()?;
        let mut steps = Vec::new();
        let mut detectors = Vec::new();
        let mut observables = vec![Vec::new(); circuit.num_observables()];
        let mut seen = 0usize;
        for (index, inst) in circuit.instructions.iter().enumerate() {
            let t = inst.targets.clone();
            match inst.opcode {
                Opcode::H => steps.push(Step::H(t)),
                Opcode::CX => steps.push(Step::Cx(t)),
                Opcode::CZ => steps.push(Step::Cz(t)),
                Opcode::R => steps.push(Step::Reset(t)),
                Opcode::M | Opcode::MR => {
                    let n = t.len();
                    steps.push(Step::Measure {
                        targets: t,
                        first_record: seen,
                        reset: inst.opcode == Opcode::MR,
                    });
                    seen += n;
                }
                Opcode::XError | Opcode::ZError | Opcode::Depolarize1 | Opcode::Depolarize2 => {
                    let p = inst.arg.unwrap_or(0.0);
                    let gaps = if p > 0.0 { Geometric::new(p).ok() } else { None };
                    steps.push(Step::Noise {
                        instruction: index,
                        opcode: inst.opcode,
                        targets: t,
                        p,
                        gaps,
                    });
                }
                Opcode::Tick => {}
                Opcode::Detector => {
                    detectors.push(t.iter().map(|&k| seen - k as usize).collect());
                }
                Opcode::ObservableInclude => {
                    let obs = inst.observable_index().unwrap_or(0) as usize;
                    observables[obs].extend(t.iter().map(|&k| seen - k as usize));
                }
            }
        }
        Ok(Self {
            num_qubits: circuit.num_qubits,
            num_measurements: seen,
            steps,
            detectors,
            observables,
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Frames {
    pub x: Vec<u64>,
    pub z: Vec<u64>,
}

impl Frames {
    pub fn new(n: usize) -> Self {
        Self {
            x: vec![0; n],
            z: vec![0; n],
        }
    }

    #[inline]
    pub fn h(&mut self, targets: &[u32]) {
        for &q in targets {
            let q = q as usize;
            std::mem::swap(&mut self.x[q], &mut self.z[q]);
        }
    }

    #[inline]
    pub fn cx(&mut self, targets: &[u32]) {
        for pair in targets.chunks_exact(2) {
            let (c, t) = (pair[0] as usize, pair[1] as usize);
            self.x[t] ^= self.x[c];
            self.z[c] ^= self.z[t];
        }
    }

    #[inline]
    pub fn cz(&mut self, targets: &[u32]) {
        for pair in targets.chunks_exact(2) {
            let (a, b) = (pair[0] as usize, pair[1] as usize);
            self.z[a] ^= self.x[b];
            self.z[b] ^= self.x[a];
        }
    }

    #[inline]
    pub fn flip(&mut self, q: usize, p: Pauli, lane_bit: u64) {
        if p.x_bit() {
            self.x[q] ^= lane_bit;
        }
        if p.z_bit() {
            self.z[q] ^= lane_bit;
        }
    }
}

/// Per-shot random streams: shot `i` always reads stream `i` of `seed`,
/// whichever block or worker processes it.
pub(crate) fn shot_rngs(seed: u64, first_shot: u64, lanes: usize) -> Vec<ChaCha8Rng> {
    (0..lanes as u64)
        .map(|l| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(first_shot + l);
            rng
        })
        .collect()
}

/// Fresh random Z component on each target in every lane. A Z frame on a
/// Z eigenstate is unobservable, so randomizing it exposes any measurement
/// whose noiseless outcome is not deterministic.
fn randomize_z(z: &mut [u64], targets: &[u32], rngs: &mut [ChaCha8Rng]) {
    for &q in targets {
        z[q as usize] = 0;
    }
    for (lane, rng) in rngs.iter_mut().enumerate() {
        for chunk in targets.chunks(64) {
            let mut w = rng.next_u64();
            for &q in chunk {
                z[q as usize] |= (w & 1) << lane;
                w >>= 1;
            }
        }
    }
}

const XYZ: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

#[inline]
fn apply_sampled_error(
    frames: &mut Frames,
    opcode: Opcode,
    targets: &[u32],
    unit: usize,
    lane_bit: u64,
    rng: &mut ChaCha8Rng,
) {
    match opcode {
        Opcode::XError => frames.x[targets[unit] as usize] ^= lane_bit,
        Opcode::ZError => frames.z[targets[unit] as usize] ^= lane_bit,
        Opcode::Depolarize1 => {
            let p = XYZ[rng.random_range(0..3usize)];
            frames.flip(targets[unit] as usize, p, lane_bit);
        }
        Opcode::Depolarize2 => {
            let k = rng.random_range(1..16usize);
            frames.flip(targets[2 * unit] as usize, Pauli::ALL[k >> 2], lane_bit);
            frames.flip(targets[2 * unit + 1] as usize, Pauli::ALL[k & 3], lane_bit);
        }
        _ => unreachable!("not a noise opcode"),
    }
}

/// Output of one block: one word per detector and per observable.
pub(crate) struct BlockOutput {
    pub detectors: Vec<u64>,
    pub observables: Vec<u64>,
}

fn readout(prog: &Program, records: &[u64]) -> BlockOutput {
    let fold = |recs: &Vec<usize>| recs.iter().fold(0u64, |acc, &r| acc ^ records[r]);
    BlockOutput {
        detectors: prog.detectors.iter().map(fold).collect(),
        observables: prog.observables.iter().map(fold).collect(),
    }
}

/// Samples `lanes` consecutive shots starting at `first_shot`.
pub(crate) fn sample_block(prog: &Program, seed: u64, first_shot: u64, lanes: usize) -> BlockOutput {
    debug_assert!(lanes <= LANES);
    let mut rngs = shot_rngs(seed, first_shot, lanes);
    let mut frames = Frames::new(prog.num_qubits);
    let mut records = vec![0u64; prog.num_measurements];

    for step in &prog.steps {
        match step {
            Step::H(t) => frames.h(t),
            Step::Cx(t) => frames.cx(t),
            Step::Cz(t) => frames.cz(t),
            Step::Reset(t) => {
                for &q in t {
                    frames.x[q as usize] = 0;
                }
                randomize_z(&mut frames.z, t, &mut rngs);
            }
            Step::Measure {
                targets,
                first_record,
                reset,
            } => {
                for (i, &q) in targets.iter().enumerate() {
                    records[first_record + i] = frames.x[q as usize];
                    if *reset {
                        frames.x[q as usize] = 0;
                    }
                }
                randomize_z(&mut frames.z, targets, &mut rngs);
            }
            Step::Noise {
                opcode,
                targets,
                gaps,
                ..
            } => {
                let Some(gaps) = gaps else { continue };
                let units = if *opcode == Opcode::Depolarize2 {
                    targets.len() / 2
                } else {
                    targets.len()
                };
                for (lane, rng) in rngs.iter_mut().enumerate() {
                    let lane_bit = 1u64 << lane;
                    let mut pos = gaps.sample(rng);
                    while pos < units as u64 {
                        apply_sampled_error(&mut frames, *opcode, targets, pos as usize, lane_bit, rng);
                        pos = pos.saturating_add(1).saturating_add(gaps.sample(rng));
                    }
                }
            }
        }
    }
    readout(prog, &records)
}

/// A single Pauli fault: where it strikes and what it applies.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Fault {
    pub step: usize,
    pub flips: Vec<(u32, Pauli)>,
}

/// Propagates up to 64 faults at once, one per lane, through an otherwise
/// noiseless run. Returns the fired detector list and observable mask per lane.
pub(crate) fn propagate_faults(prog: &Program, faults: &[Fault]) -> Vec<(Vec<u32>, u64)> {
    assert!(faults.len() <= LANES);
    let mut frames = Frames::new(prog.num_qubits);
    let mut records = vec![0u64; prog.num_measurements];
    let mut by_step: Vec<(usize, usize)> = faults.iter().enumerate().map(|(l, f)| (f.step, l)).collect();
    by_step.sort_unstable();
    let mut next = 0;

    for (s, step) in prog.steps.iter().enumerate() {
        match step {
            Step::H(t) => frames.h(t),
            Step::Cx(t) => frames.cx(t),
            Step::Cz(t) => frames.cz(t),
            Step::Reset(t) => {
                for &q in t {
                    frames.x[q as usize] = 0;
                    frames.z[q as usize] = 0;
                }
            }
            Step::Measure {
                targets,
                first_record,
                reset,
            } => {
                for (i, &q) in targets.iter().enumerate() {
                    records[first_record + i] = frames.x[q as usize];
                    if *reset {
                        frames.x[q as usize] = 0;
                    }
                    frames.z[q as usize] = 0;
                }
            }
            Step::Noise { .. } => {
                while next < by_step.len() && by_step[next].0 == s {
                    let lane = by_step[next].1;
                    for &(q, p) in &faults[lane].flips {
                        frames.flip(q as usize, p, 1u64 << lane);
                    }
                    next += 1;
                }
            }
        }
    }

    let out = readout(prog, &records);
    let mut per_lane: Vec<(Vec<u32>, u64)> = vec![(Vec::new(), 0); faults.len()];
    for (d, &w) in out.detectors.iter().enumerate() {
        let mut w = w;
        while w != 0 {
            let lane = w.trailing_zeros() as usize;
            per_lane[lane].0.push(d as u32);
            w &= w - 1;
        }
    }
    for (o, &w) in out.observables.iter().enumerate() {
        let mut w = w;
        while w != 0 {
            let lane = w.trailing_zeros() as usize;
            per_lane[lane].1 ^= 1u64 << o;
            w &= w - 1;
        }
    }
    per_lane
}
