//! Monte Carlo sampling of noisy stabilizer circuits.
//!
//! The fast path propagates Pauli frames relative to an all-zero noiseless
//! reference. A dense state-vector simulator is kept as a test oracle.

mod bits;
mod dense;
pub(crate) mod frame;

use std::io::{Read, Write};

use rayon::prelude::*;

pub use bits::BitMatrix;
pub use dense::{dense_oracle_sample, dense_oracle_sample_with_cap, DEFAULT_ORACLE_QUBITS};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use frame::{sample_block, Program, LANES};

/// Sampled detector and observable bits. Both matrices are stored
/// annotation-major: row = detector (or observable), column = shot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotBatch {
    pub shots: usize,
    pub detectors: BitMatrix,
    pub observables: BitMatrix,
}

impl ShotBatch {
    pub fn num_detectors(&self) -> usize {
        self.detectors.rows()
    }

    pub fn num_observables(&self) -> usize {
        self.observables.rows()
    }

    pub fn detector(&self, shot: usize, d: usize) -> bool {
        self.detectors.get(d, shot)
    }

    pub fn observable(&self, shot: usize, o: usize) -> bool {
        self.observables.get(o, shot)
    }

    /// Fired detector indices for every shot.
    pub fn defects_per_shot(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.shots];
        for d in 0..self.num_detectors() {
            for (w, &word) in self.detectors.row_words(d).iter().enumerate() {
                let mut word = word;
                while word != 0 {
                    let s = w * 64 + word.trailing_zeros() as usize;
                    out[s].push(d as u32);
                    word &= word - 1;
                }
            }
        }
        out
    }

    /// Observable flips of every shot as a bit mask (observable `o` = bit `o`).
    pub fn observable_masks(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.shots];
        for o in 0..self.num_observables().min(64) {
            for (s, m) in out.iter_mut().enumerate() {
                if self.observables.get(o, s) {
                    *m |= 1 << o;
                }
            }
        }
        out
    }

    /// Number of shots in which detector `d` fired.
    pub fn detector_count(&self, d: usize) -> usize {
        self.detectors.count_ones_in_row(d)
    }

    /// Concatenates two batches along the shot axis.
    pub fn concat(&self, other: &ShotBatch) -> Result<ShotBatch> {
        if self.num_detectors() != other.num_detectors() {
            return Err(Error::SizeMismatch {
                expected: self.num_detectors(),
                actual: other.num_detectors(),
            });
        }
        if self.num_observables() != other.num_observables() {
            return Err(Error::SizeMismatch {
                expected: self.num_observables(),
                actual: other.num_observables(),
            });
        }
        let shots = self.shots + other.shots;
        let mut detectors = BitMatrix::zeros(self.num_detectors(), shots);
        detectors.paste_columns(&self.detectors, 0);
        detectors.paste_columns(&other.detectors, self.shots);
        let mut observables = BitMatrix::zeros(self.num_observables(), shots);
        observables.paste_columns(&self.observables, 0);
        observables.paste_columns(&other.observables, self.shots);
        Ok(ShotBatch {
            shots,
            detectors,
            observables,
        })
    }
}

/// Samples `shots` shots. Deterministic in `(circuit, shots, seed)` and
/// independent of the rayon pool size.
pub fn sample_batch(circuit: &Circuit, shots: usize, seed: u64) -> Result<ShotBatch> {
    sample_range(circuit, 0, shots, seed)
}

/// Samples shots `first_shot .. first_shot + shots` of the stream defined by
/// `seed`. Splitting a run into consecutive ranges reproduces it exactly.
pub fn sample_range(circuit: &Circuit, first_shot: u64, shots: usize, seed: u64) -> Result<ShotBatch> {
    let prog = Program::compile(circuit)?;
    Ok(sample_program(&prog, first_shot, shots, seed))
}

pub(crate) fn sample_program(prog: &Program, first_shot: u64, shots: usize, seed: u64) -> ShotBatch {
    let blocks = shots.div_ceil(LANES);
    let outputs: Vec<_> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lanes = LANES.min(shots - b * LANES);
            sample_block(prog, seed, first_shot + (b * LANES) as u64, lanes)
        })
        .collect();

    let mut detectors = BitMatrix::zeros(prog.detectors.len(), shots);
    let mut observables = BitMatrix::zeros(prog.observables.len(), shots);
    for (b, out) in outputs.iter().enumerate() {
        for (d, &w) in out.detectors.iter().enumerate() {
            detectors.row_words_mut(d)[b] = w;
        }
        for (o, &w) in out.observables.iter().enumerate() {
            observables.row_words_mut(o)[b] = w;
        }
    }
    ShotBatch {
        shots,
        detectors,
        observables,
    }
}

/// Shots in which any predicted observable differs from the sampled one.
pub fn logical_error_count(batch: &ShotBatch, predictions: &BitMatrix) -> Result<usize> {
    let obs = &batch.observables;
    if predictions.rows() != obs.rows() {
        return Err(Error::SizeMismatch {
            expected: obs.rows(),
            actual: predictions.rows(),
        });
    }
    if predictions.cols() != obs.cols() {
        return Err(Error::SizeMismatch {
            expected: obs.cols(),
            actual: predictions.cols(),
        });
    }
    let words = batch.shots.div_ceil(64);
    let mut any = vec![0u64; words];
    for r in 0..obs.rows() {
        for (w, (a, b)) in obs.row_words(r).iter().zip(predictions.row_words(r)).enumerate() {
            any[w] |= a ^ b;
        }
    }
    Ok(any.iter().map(|w| w.count_ones() as usize).sum())
}

/// Writes the raw batch format: three little-endian `u64` (shots, detectors,
/// observables) then one byte-padded, LSB-first bit row per shot holding its
/// detector bits followed by its observable bits.
pub fn write_raw<W: Write>(batch: &ShotBatch, mut w: W) -> Result<()> {
    let nd = batch.num_detectors();
    let no = batch.num_observables();
    for v in [batch.shots as u64, nd as u64, no as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    let row_bytes = (nd + no).div_ceil(8);
    let mut row = vec![0u8; row_bytes];
    for s in 0..batch.shots {
        row.iter_mut().for_each(|b| *b = 0);
        for d in 0..nd {
            if batch.detector(s, d) {
                row[d / 8] |= 1 << (d % 8);
            }
        }
        for o in 0..no {
            if batch.observable(s, o) {
                let i = nd + o;
                row[i / 8] |= 1 << (i % 8);
            }
        }
        w.write_all(&row)?;
    }
    Ok(())
}

pub fn read_raw<R: Read>(mut r: R) -> Result<ShotBatch> {
    let mut header = [0u8; 24];
    r.read_exact(&mut header)?;
    let field = |i: usize| u64::from_le_bytes(header[8 * i..8 * i + 8].try_into().unwrap()) as usize;
    let (shots, nd, no) = (field(0), field(1), field(2));
    let row_bytes = (nd + no).div_ceil(8);
    let mut detectors = BitMatrix::zeros(nd, shots);
    let mut observables = BitMatrix::zeros(no, shots);
    let mut row = vec![0u8; row_bytes];
    for s in 0..shots {
        r.read_exact(&mut row)?;
        for i in 0..nd + no {
            if (row[i / 8] >> (i % 8)) & 1 == 1 {
                if i < nd {
                    detectors.set(i, s, true);
                } else {
                    observables.set(i - nd, s, true);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Instruction, Opcode};
    use crate::codegen::{build, Basis, CheckKind, CodeSpec, Family};
    use crate::noise::{apply_error_type, apply_noise_model, ErrorType, NoiseModel};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn code(f: Family, d: u32, r: u32) -> Circuit {
        build(&CodeSpec::new(f, d, r).unwrap()).unwrap()
    }

    #[test]
    fn noiseless_circuits_are_silent() {
        for f in Family::ALL {
            for d in [3, 5] {
                for basis in [Basis::Z, Basis::X] {
                    if f == Family::Repetition && basis == Basis::X {
                        continue;
                    }
                    let c = build(&CodeSpec::new(f, d, 3).unwrap().with_basis(basis)).unwrap();
                    let noisy = apply_noise_model(&c, NoiseModel::CircuitLevel, 0.0).unwrap();
                    let b = sample_batch(&noisy, 10_000, 5).unwrap();
                    assert!((0..b.num_detectors()).all(|d| b.detector_count(d) == 0), "{f:?} d={d} {basis:?}");
                    assert_eq!(b.observables.count_ones_in_row(0), 0);
                }
            }
        }
    }

    /// Inserts `inst` just before the `k`-th reset instruction.
    fn insert_before_reset(c: &Circuit, k: usize, inst: Instruction) -> Circuit {
        let mut out = c.clone();
        let pos = c
            .instructions
            .iter()
            .enumerate()
            .filter(|(_, i)| i.opcode == Opcode::R)
            .nth(k)
            .unwrap()
            .0;
        out.instructions.insert(pos, inst);
        out
    }

    #[test]
    fn bulk_x_error_lights_its_two_z_checks() {
        let spec = CodeSpec::new(Family::Rotated, 3, 3).unwrap();
        let layout = spec.layout();
        let q = layout.data_qubits[&(3, 3)];
        // Reset 0 is the data reset; reset 2 starts the second syndrome round.
        let c = insert_before_reset(&build(&spec).unwrap(), 2, Instruction::noise(Opcode::XError, 1.0, &[q]));

        let n_z = layout.z_ancillas.len();
        let expected: Vec<u32> = layout
            .plaquettes
            .iter()
            .enumerate()
            .filter(|(_, p)| p.kind == CheckKind::Z && p.data().contains(&q))
            .map(|(a, _)| (n_z + a) as u32)
            .collect();
        assert_eq!(expected.len(), 2);

        let b = sample_batch(&c, 200, 1).unwrap();
        for defects in b.defects_per_shot() {
            assert_eq!(defects, expected);
        }
        let oracle = dense_oracle_sample_with_cap(&c, 3, 1, 17).unwrap();
        for defects in oracle.defects_per_shot() {
            assert_eq!(defects, expected);
        }
    }

    #[test]
    fn flipping_the_observable_qubit_flips_the_observable() {
        let c = code(Family::Repetition, 3, 3);
        let last_m = c.instructions.iter().rposition(|i| i.opcode == Opcode::M).unwrap();
        let obs_qubit = 0;
        let mut flipped = c.clone();
        flipped
            .instructions
            .insert(last_m, Instruction::noise(Opcode::XError, 1.0, &[obs_qubit]));
        let b = sample_batch(&flipped, 500, 3).unwrap();
        assert_eq!(b.observables.count_ones_in_row(0), 500);
    }

    #[test]
    fn z_errors_are_invisible_to_the_repetition_code() {
        let c = code(Family::Repetition, 3, 3);
        let mut z = c.clone();
        z.instructions.insert(4, Instruction::noise(Opcode::ZError, 1.0, &[0, 1, 2]));
        let b = sample_batch(&z, 256, 9).unwrap();
        assert!(b.defects_per_shot().iter().all(Vec::is_empty));
        assert_eq!(b.observables.count_ones_in_row(0), 0);
    }

    #[test]
    fn sampling_is_partition_independent() {
        let c = apply_noise_model(&code(Family::Rotated, 3, 3), NoiseModel::CircuitLevel, 0.02).unwrap();
        let whole = sample_batch(&c, 300, 77).unwrap();
        for split in [1usize, 64, 100, 200, 299] {
            let a = sample_range(&c, 0, split, 77).unwrap();
            let b = sample_range(&c, split as u64, 300 - split, 77).unwrap();
            assert_eq!(a.concat(&b).unwrap(), whole, "split at {split}");
        }
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        assert_eq!(pool.install(|| sample_batch(&c, 300, 77).unwrap()), whole);
        assert_ne!(sample_batch(&c, 300, 78).unwrap(), whole);
    }

    #[test]
    fn bell_pair_parity_is_deterministic_in_the_oracle() {
        let c: Circuit = "R 0 1\nH 0\nCX 0 1\nM 0 1\nDETECTOR rec[-1] rec[-2]".parse().unwrap();
        let b = dense_oracle_sample(&c, 200, 4).unwrap();
        assert_eq!(b.detector_count(0), 0);
    }

    #[test]
    fn oracle_coin_flip_is_fair() {
        let c: Circuit = "R 0\nX_ERROR(0.5) 0\nM 0\nDETECTOR rec[-1]".parse().unwrap();
        let n = 100_000;
        let ones = dense_oracle_sample(&c, n, 8).unwrap().detector_count(0) as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((ones - 0.5 * n as f64).abs() < 4.0 * sigma, "{ones}");
    }

    #[test]
    fn oracle_enforces_its_capacity() {
        let c = code(Family::Rotated, 3, 1);
        assert!(matches!(dense_oracle_sample(&c, 1, 0), Err(Error::Capacity(_))));
    }

    fn chi2_2x2(a: usize, n_a: usize, b: usize, n_b: usize) -> f64 {
        let obs = [[a as f64, (n_a - a) as f64], [b as f64, (n_b - b) as f64]];
        let total = (n_a + n_b) as f64;
        let col = [(a + b) as f64, total - (a + b) as f64];
        let row = [n_a as f64, n_b as f64];
        let mut stat = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let e = row[i] * col[j] / total;
                if e > 0.0 {
                    stat += (obs[i][j] - e).powi(2) / e;
                }
            }
        }
        stat
    }

    fn agree_with_oracle(c: &Circuit, shots: usize, pairs: bool) {
        let crit = ChiSquared::new(1.0).unwrap().inverse_cdf(1.0 - 1e-3);
        let fast = sample_batch(c, shots, 21).unwrap();
        let slow = dense_oracle_sample(c, shots, 22).unwrap();
        let nd = fast.num_detectors();
        for d in 0..nd {
            let s = chi2_2x2(fast.detector_count(d), shots, slow.detector_count(d), shots);
            assert!(s < crit, "detector {d}: chi2 {s}");
        }
        let fo = fast.observables.count_ones_in_row(0);
        let so = slow.observables.count_ones_in_row(0);
        assert!(chi2_2x2(fo, shots, so, shots) < crit);
        if pairs {
            let both = |b: &ShotBatch, i: usize, j: usize| {
                (0..shots).filter(|&s| b.detector(s, i) && b.detector(s, j)).count()
            };
            for i in 0..nd {
                for j in i + 1..nd {
                    let s = chi2_2x2(both(&fast, i, j), shots, both(&slow, i, j), shots);
                    assert!(s < crit, "pair ({i},{j}): chi2 {s}");
                }
            }
        }
    }

    #[test]
    fn frame_sampler_matches_oracle_on_repetition_memory() {
        let c = apply_error_type(&code(Family::Repetition, 3, 3), ErrorType::Depolarizing, 0.1).unwrap();
        agree_with_oracle(&c, 20_000, true);
        let c = apply_noise_model(&code(Family::Repetition, 3, 2), NoiseModel::CircuitLevel, 0.05).unwrap();
        agree_with_oracle(&c, 20_000, true);
    }

    #[test]
    fn frame_sampler_matches_oracle_on_small_handmade_circuits() {
        let text = "R 0 1 2\nH 0\nDEPOLARIZE1(0.2) 0 1\nCZ 0 1\nCX 1 2\nDEPOLARIZE2(0.3) 1 2\n\
                    H 0\nX_ERROR(0.1) 2\nM 0 1 2\nDETECTOR rec[-1]\nDETECTOR rec[-2] rec[-1]\n\
                    OBSERVABLE_INCLUDE(0) rec[-3]\nMR 2\nX_ERROR(0.4) 1\nM 1\nDETECTOR rec[-1]";
        let c: Circuit = text.parse().unwrap();
        let crit = ChiSquared::new(1.0).unwrap().inverse_cdf(1.0 - 1e-3);
        let shots = 30_000;
        let fast = sample_batch(&c, shots, 1).unwrap();
        let slow = dense_oracle_sample(&c, shots, 2).unwrap();
        for d in 0..fast.num_detectors() {
            let s = chi2_2x2(fast.detector_count(d), shots, slow.detector_count(d), shots);
            assert!(s < crit, "detector {d}: chi2 {s}");
        }
    }

    #[test]
    fn unconverted_x_basis_circuit_exposes_random_outcomes() {
        // Measuring |+> is random; the gauge randomization must reveal it.
        let c: Circuit = "R 0\nH 0\nM 0\nDETECTOR rec[-1]".parse().unwrap();
        let b = sample_batch(&c, 4096, 3).unwrap();
        let ones = b.detector_count(0);
        assert!(ones > 1800 && ones < 2300, "{ones}");
    }

    #[test]
    fn logical_error_count_cases() {
        let c = apply_noise_model(&code(Family::Rotated, 3, 3), NoiseModel::CircuitLevel, 0.05).unwrap();
        let b = sample_batch(&c, 10, 4).unwrap();
        assert_eq!(logical_error_count(&b, &b.observables).unwrap(), 0);

        let mut ones = BitMatrix::zeros(1, 10);
        let zeros = BitMatrix::zeros(1, 10);
        let mut all_ones = b.clone();
        for s in 0..10 {
            ones.set(0, s, true);
            all_ones.observables.set(0, s, true);
        }
        assert_eq!(logical_error_count(&all_ones, &zeros).unwrap(), 10);

        let by_hand = (0..10).filter(|&s| b.observable(s, 0) != ones.get(0, s)).count();
        assert_eq!(logical_error_count(&b, &ones).unwrap(), by_hand);
        assert!(matches!(
            logical_error_count(&b, &BitMatrix::zeros(2, 10)),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn raw_dump_round_trips() {
        let c = apply_noise_model(&code(Family::Rotated, 3, 2), NoiseModel::CircuitLevel, 0.05).unwrap();
        let b = sample_batch(&c, 77, 4).unwrap();
        let mut buf = Vec::new();
        write_raw(&b, &mut buf).unwrap();
        let nd = b.num_detectors();
        assert_eq!(buf.len(), 24 + 77 * (nd + 1).div_ceil(8));
        assert_eq!(&buf[..8], &77u64.to_le_bytes());
        assert_eq!(read_raw(buf.as_slice()).unwrap(), b);
    }
}
