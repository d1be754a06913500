//! Phase-free Pauli algebra.
//!
//! A [`PauliString`] stores one X bit and one Z bit per qubit, packed into
//! 64-bit words. Signs and factors of `i` are never tracked: frame
//! simulation of Pauli noise only needs to know which measurements flip.

use std::fmt;

use crate::circuit::{Instruction, Opcode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn x_bit(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    pub fn z_bit(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }

    /// Product up to phase.
    pub fn mul(self, other: Pauli) -> Pauli {
        Pauli::from_bits(self.x_bit() ^ other.x_bit(), self.z_bit() ^ other.z_bit())
    }

    pub fn commutes_with(self, other: Pauli) -> bool {
        let anti = (self.x_bit() & other.z_bit()) ^ (self.z_bit() & other.x_bit());
        !anti
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

#[inline]
fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

/// Bit-packed Pauli operator on `n` qubits, phase dropped.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        Self {
            n,
            x: vec![0; w],
            z: vec![0; w],
        }
    }

    pub fn single(n: usize, qubit: usize, p: Pauli) -> Self {
        let mut s = Self::identity(n);
        s.set(qubit, p);
        s
    }

    /// Builds a string from a product like `[(0, X), (3, Z)]`.
    pub fn from_sparse(n: usize, terms: &[(usize, Pauli)]) -> Self {
        let mut s = Self::identity(n);
        for &(q, p) in terms {
            s.set(q, s.get(q).mul(p));
        }
        s
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, q: usize) -> Pauli {
        assert!(q < self.n, "qubit {q} out of range for {}-qubit string", self.n);
        let (w, b) = (q / 64, q % 64);
        Pauli::from_bits((self.x[w] >> b) & 1 == 1, (self.z[w] >> b) & 1 == 1)
    }

    pub fn set(&mut self, q: usize, p: Pauli) {
        assert!(q < self.n, "qubit {q} out of range for {}-qubit string", self.n);
        let (w, b) = (q / 64, q % 64);
        let mask = 1u64 << b;
        self.x[w] = (self.x[w] & !mask) | ((p.x_bit() as u64) << b);
        self.z[w] = (self.z[w] & !mask) | ((p.z_bit() as u64) << b);
    }

    pub fn x_bit(&self, q: usize) -> bool {
        self.get(q).x_bit()
    }

    pub fn z_bit(&self, q: usize) -> bool {
        self.get(q).z_bit()
    }

    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(self.z.iter()).all(|&w| w == 0)
    }

    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(x, z)| (x | z).count_ones() as usize)
            .sum()
    }

    /// Phase-less product: both masks XOR.
    pub fn compose(&self, other: &PauliString) -> Result<PauliString> {
        if self.n != other.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                actual: other.n,
            });
        }
        Ok(PauliString {
            n: self.n,
            x: self.x.iter().zip(&other.x).map(|(a, b)| a ^ b).collect(),
            z: self.z.iter().zip(&other.z).map(|(a, b)| a ^ b).collect(),
        })
    }

    pub fn commutes_with(&self, other: &PauliString) -> Result<bool> {
        if self.n != other.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                actual: other.n,
            });
        }
        let mut parity = 0u32;
        for i in 0..self.x.len() {
            parity ^= ((self.x[i] & other.z[i]) ^ (self.z[i] & other.x[i])).count_ones() & 1;
        }
        Ok(parity == 0)
    }

    fn apply_h(&mut self, q: usize) {
        let p = self.get(q);
        self.set(q, Pauli::from_bits(p.z_bit(), p.x_bit()));
    }

    fn apply_cx(&mut self, c: usize, t: usize) {
        let (pc, pt) = (self.get(c), self.get(t));
        // X on control spreads to target, Z on target spreads to control.
        let tx = pt.x_bit() ^ pc.x_bit();
        let cz = pc.z_bit() ^ pt.z_bit();
        self.set(c, Pauli::from_bits(pc.x_bit(), cz));
        self.set(t, Pauli::from_bits(tx, pt.z_bit()));
    }

    fn apply_cz(&mut self, a: usize, b: usize) {
        let (pa, pb) = (self.get(a), self.get(b));
        self.set(a, Pauli::from_bits(pa.x_bit(), pa.z_bit() ^ pb.x_bit()));
        self.set(b, Pauli::from_bits(pb.x_bit(), pb.z_bit() ^ pa.x_bit()));
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            write!(f, "{}", self.get(q))?;
        }
        Ok(())
    }
}

/// Conjugates `frame` by a Clifford gate instruction (H, CX or CZ).
pub fn conjugate_through(gate: &Instruction, frame: &PauliString) -> Result<PauliString> {
    let n = frame.len();
    if let Some(&bad) = gate.targets.iter().find(|&&t| t as usize >= n) {
        return Err(Error::InvalidCircuit(format!(
            "target {bad} out of range for {n}-qubit frame"
        )));
    }
    let mut out = frame.clone();
    match gate.opcode {
        Opcode::H => {
            for &q in &gate.targets {
                out.apply_h(q as usize);
            }
        }
        Opcode::CX | Opcode::CZ => {
            if !gate.targets.len().is_multiple_of(2) {
                return Err(Error::InvalidCircuit(format!(
                    "{} needs target pairs",
                    gate.opcode
                )));
            }
            for pair in gate.targets.chunks_exact(2) {
                let (a, b) = (pair[0] as usize, pair[1] as usize);
                if gate.opcode == Opcode::CX {
                    out.apply_cx(a, b);
                } else {
                    out.apply_cz(a, b);
                }
            }
        }
        other => return Err(Error::UnsupportedGate(other.to_string())),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gate(op: Opcode, t: &[u32]) -> Instruction {
        Instruction::new(op, t.to_vec(), None)
    }

    #[test]
    fn x_then_z_is_y() {
        let x = PauliString::single(1, 0, Pauli::X);
        let z = PauliString::single(1, 0, Pauli::Z);
        assert_eq!(x.compose(&z).unwrap(), PauliString::single(1, 0, Pauli::Y));
    }

    #[test]
    fn identity_is_neutral() {
        let p = PauliString::from_sparse(3, &[(0, Pauli::X), (2, Pauli::Y)]);
        let id = PauliString::identity(3);
        assert_eq!(id.compose(&p).unwrap(), p);
    }

    #[test]
    fn compose_rejects_length_mismatch() {
        let a = PauliString::identity(3);
        let b = PauliString::identity(4);
        assert_eq!(
            a.compose(&b),
            Err(Error::SizeMismatch {
                expected: 3,
                actual: 4
            })
        );
    }

    #[test]
    fn hadamard_swaps_x_and_z() {
        let f = PauliString::single(1, 0, Pauli::X);
        let out = conjugate_through(&gate(Opcode::H, &[0]), &f).unwrap();
        assert_eq!(out, PauliString::single(1, 0, Pauli::Z));
    }

    #[test]
    fn cx_spreads_x_forward_and_z_backward() {
        let f = PauliString::single(2, 0, Pauli::X);
        let out = conjugate_through(&gate(Opcode::CX, &[0, 1]), &f).unwrap();
        assert_eq!(out, PauliString::from_sparse(2, &[(0, Pauli::X), (1, Pauli::X)]));

        let f = PauliString::single(2, 1, Pauli::Z);
        let out = conjugate_through(&gate(Opcode::CX, &[0, 1]), &f).unwrap();
        assert_eq!(out, PauliString::from_sparse(2, &[(0, Pauli::Z), (1, Pauli::Z)]));
    }

    #[test]
    fn cz_maps_x_to_xz() {
        let f = PauliString::single(2, 0, Pauli::X);
        let out = conjugate_through(&gate(Opcode::CZ, &[0, 1]), &f).unwrap();
        assert_eq!(out, PauliString::from_sparse(2, &[(0, Pauli::X), (1, Pauli::Z)]));
        let f = PauliString::single(2, 1, Pauli::X);
        let out = conjugate_through(&gate(Opcode::CZ, &[0, 1]), &f).unwrap();
        assert_eq!(out, PauliString::from_sparse(2, &[(0, Pauli::Z), (1, Pauli::X)]));
    }

    #[test]
    fn non_clifford_opcodes_are_rejected() {
        let f = PauliString::identity(1);
        let err = conjugate_through(&gate(Opcode::M, &[0]), &f).unwrap_err();
        assert!(matches!(err, Error::UnsupportedGate(_)));
    }

    fn arb_string(n: usize) -> impl Strategy<Value = PauliString> {
        proptest::collection::vec(0u8..4, n).prop_map(move |v| {
            let terms: Vec<(usize, Pauli)> =
                v.iter().enumerate().map(|(q, &k)| (q, Pauli::ALL[k as usize])).collect();
            PauliString::from_sparse(n, &terms)
        })
    }

    proptest! {
        #[test]
        fn compose_is_self_inverse(p in arb_string(70)) {
            prop_assert!(p.compose(&p).unwrap().is_identity());
        }

        #[test]
        fn compose_is_commutative_and_associative(
            a in arb_string(9), b in arb_string(9), c in arb_string(9)
        ) {
            prop_assert_eq!(a.compose(&b).unwrap(), b.compose(&a).unwrap());
            let left = a.compose(&b).unwrap().compose(&c).unwrap();
            let right = a.compose(&b.compose(&c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn clifford_conjugation_is_an_involution(p in arb_string(4), which in 0usize..3) {
            let g = match which {
                0 => gate(Opcode::H, &[0, 2]),
                1 => gate(Opcode::CX, &[0, 1, 3, 2]),
                _ => gate(Opcode::CZ, &[1, 2, 0, 3]),
            };
            let once = conjugate_through(&g, &p).unwrap();
            let twice = conjugate_through(&g, &once).unwrap();
            prop_assert_eq!(twice, p);
        }

        #[test]
        fn conjugation_preserves_commutation(a in arb_string(3), b in arb_string(3)) {
            let g = gate(Opcode::CX, &[0, 1]);
            let before = a.commutes_with(&b).unwrap();
            let after = conjugate_through(&g, &a)
                .unwrap()
                .commutes_with(&conjugate_through(&g, &b).unwrap())
                .unwrap();
            prop_assert_eq!(before, after);
        }
    }
}
