//! Qubit layouts for the three code families.
//!
//! Coordinates are integer lattice positions. Data qubits get the lowest
//! indices (row-major by `(y, x)`), ancillas follow in the same order.

use std::collections::BTreeMap;

use super::Family;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckKind {
    X,
    Z,
}

pub type Coord = (i32, i32);

/// One stabilizer: its ancilla and the data qubit it touches in each of
/// the four CX layers (`None` where the plaquette is cut by a boundary).
#[derive(Debug, Clone, PartialEq)]
pub struct Plaquette {
    pub ancilla: u32,
    pub kind: CheckKind,
    pub slots: [Option<u32>; 4],
}

impl Plaquette {
    pub fn data(&self) -> Vec<u32> {
        self.slots.iter().flatten().copied().collect()
    }

    pub fn weight(&self) -> usize {
        self.slots.iter().flatten().count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutMap {
    pub family: Family,
    pub distance: u32,
    pub data_qubits: BTreeMap<Coord, u32>,
    pub x_ancillas: BTreeMap<Coord, u32>,
    pub z_ancillas: BTreeMap<Coord, u32>,
    /// Ordered by ancilla index.
    pub plaquettes: Vec<Plaquette>,
    /// Data qubits whose joint Z parity is the logical Z.
    pub z_logical: Vec<u32>,
    /// Data qubits whose joint X parity is the logical X.
    pub x_logical: Vec<u32>,
}

// Offsets visited by each check type, one per CX layer. X checks finish on a
// pair perpendicular to the logical-X direction and Z checks on a pair
// perpendicular to logical Z, so a single ancilla fault spreading to two
// data qubits never shortens a logical chain.
const ROTATED_X_ORDER: [Coord; 4] = [(1, 1), (-1, 1), (1, -1), (-1, -1)];
const ROTATED_Z_ORDER: [Coord; 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];
const UNROTATED_X_ORDER: [Coord; 4] = [(1, 0), (0, 1), (0, -1), (-1, 0)];
const UNROTATED_Z_ORDER: [Coord; 4] = [(1, 0), (0, -1), (0, 1), (-1, 0)];
const REPETITION_ORDER: [Coord; 4] = [(-1, 0), (1, 0), (i32::MIN, 0), (i32::MIN, 0)];

fn row_major(a: &Coord, b: &Coord) -> std::cmp::Ordering {
    (a.1, a.0).cmp(&(b.1, b.0))
}

impl LayoutMap {
    pub fn new(family: Family, distance: u32) -> Self {
        let d = distance as i32;
        let mut data: Vec<Coord> = Vec::new();
        let mut anc: Vec<(Coord, CheckKind)> = Vec::new();
        let mut z_line: Vec<Coord> = Vec::new();
        let mut x_line: Vec<Coord> = Vec::new();

        match family {
            Family::Rotated => {
                for x in 0..d {
                    for y in 0..d {
                        let c = (2 * x + 1, 2 * y + 1);
                        data.push(c);
                        if y == 0 {
                            z_line.push(c);
                        }
                        if x == 0 {
                            x_line.push(c);
                        }
                    }
                }
                for x in 0..=d {
                    for y in 0..=d {
                        let lr_edge = x == 0 || x == d;
                        let tb_edge = y == 0 || y == d;
                        let odd = (x % 2) != (y % 2);
                        if (lr_edge && odd) || (tb_edge && !odd) {
                            continue;
                        }
                        let kind = if odd { CheckKind::X } else { CheckKind::Z };
                        anc.push(((2 * x, 2 * y), kind));
                    }
                }
            }
            Family::Unrotated => {
                let n = 2 * d - 1;
                for x in 0..n {
                    for y in 0..n {
                        let c = (x, y);
                        if (x + y) % 2 == 0 {
                            data.push(c);
                            if y == 0 {
                                z_line.push(c);
                            }
                            if x == 0 {
                                x_line.push(c);
                            }
                        } else if x % 2 == 0 {
                            anc.push((c, CheckKind::Z));
                        } else {
                            anc.push((c, CheckKind::X));
                        }
                    }
                }
            }
            Family::Repetition => {
                for i in 0..d {
                    data.push((2 * i, 0));
                }
                for i in 0..d - 1 {
                    anc.push(((2 * i + 1, 0), CheckKind::Z));
                }
                z_line.push((0, 0));
            }
        }

        data.sort_by(row_major);
        anc.sort_by(|a, b| row_major(&a.0, &b.0));

        let data_qubits: BTreeMap<Coord, u32> =
            data.iter().enumerate().map(|(i, &c)| (c, i as u32)).collect();
        let mut x_ancillas = BTreeMap::new();
        let mut z_ancillas = BTreeMap::new();
        let mut plaquettes = Vec::with_capacity(anc.len());
        let base = data.len() as u32;
        for (k, &(c, kind)) in anc.iter().enumerate() {
            let index = base + k as u32;
            let order = match (family, kind) {
                (Family::Rotated, CheckKind::X) => ROTATED_X_ORDER,
                (Family::Rotated, CheckKind::Z) => ROTATED_Z_ORDER,
                (Family::Unrotated, CheckKind::X) => UNROTATED_X_ORDER,
                (Family::Unrotated, CheckKind::Z) => UNROTATED_Z_ORDER,
                (Family::Repetition, _) => REPETITION_ORDER,
            };
            let mut slots = [None; 4];
            for (layer, &(dx, dy)) in order.iter().enumerate() {
                if dx == i32::MIN {
                    continue;
                }
                slots[layer] = data_qubits.get(&(c.0 + dx, c.1 + dy)).copied();
            }
            match kind {
                CheckKind::X => x_ancillas.insert(c, index),
                CheckKind::Z => z_ancillas.insert(c, index),
            };
            plaquettes.push(Plaquette {
                ancilla: index,
                kind,
                slots,
            });
        }

        let mut z_logical: Vec<u32> = z_line.iter().map(|c| data_qubits[c]).collect();
        let mut x_logical: Vec<u32> = x_line.iter().map(|c| data_qubits[c]).collect();
        z_logical.sort_unstable();
        x_logical.sort_unstable();

        LayoutMap {
            family,
            distance,
            data_qubits,
            x_ancillas,
            z_ancillas,
            plaquettes,
            z_logical,
            x_logical,
        }
    }

    pub fn num_data(&self) -> usize {
        self.data_qubits.len()
    }

    pub fn num_ancillas(&self) -> usize {
        self.plaquettes.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.num_data() + self.num_ancillas()
    }

    /// Data indices in index order.
    pub fn data_list(&self) -> Vec<u32> {
        (0..self.num_data() as u32).collect()
    }

    pub fn ancilla_list(&self) -> Vec<u32> {
        self.plaquettes.iter().map(|p| p.ancilla).collect()
    }

    pub fn plaquette(&self, ancilla: u32) -> Option<&Plaquette> {
        let i = (ancilla as usize).checked_sub(self.num_data())?;
        self.plaquettes.get(i)
    }

    pub fn kind_of(&self, qubit: u32) -> Option<CheckKind> {
        self.plaquette(qubit).map(|p| p.kind)
    }

    pub fn coordinates(&self) -> BTreeMap<u32, Coord> {
        self.data_qubits
            .iter()
            .chain(self.x_ancillas.iter())
            .chain(self.z_ancillas.iter())
            .map(|(&c, &q)| (q, c))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn covered(layout: &LayoutMap, kind: CheckKind) -> Vec<usize> {
        let mut count = vec![0usize; layout.num_data()];
        for p in layout.plaquettes.iter().filter(|p| p.kind == kind) {
            for q in p.data() {
                count[q as usize] += 1;
            }
        }
        count
    }

    #[test]
    fn rotated_d3_matches_the_standard_picture() {
        let l = LayoutMap::new(Family::Rotated, 3);
        assert_eq!(l.num_data(), 9);
        assert_eq!(l.x_ancillas.len(), 4);
        assert_eq!(l.z_ancillas.len(), 4);
        assert_eq!(l.num_qubits(), 17);
        let mut weights: Vec<usize> = l.plaquettes.iter().map(Plaquette::weight).collect();
        weights.sort_unstable();
        assert_eq!(weights, vec![2, 2, 2, 2, 4, 4, 4, 4]);
    }

    #[test]
    fn qubit_count_formulas_hold() {
        for d in [3u32, 5, 7, 9] {
            let r = LayoutMap::new(Family::Rotated, d);
            assert_eq!(r.num_data(), (d * d) as usize);
            assert_eq!(r.num_ancillas(), (d * d - 1) as usize);
            assert_eq!(r.x_ancillas.len(), r.z_ancillas.len());
            assert_eq!(r.num_qubits(), (2 * d * d - 1) as usize);

            let u = LayoutMap::new(Family::Unrotated, d);
            assert_eq!(u.num_qubits(), ((2 * d - 1) * (2 * d - 1)) as usize);
            assert_eq!(u.num_data(), (d * d + (d - 1) * (d - 1)) as usize);
            assert_eq!(u.num_ancillas(), (2 * d * (d - 1)) as usize);
            assert_eq!(u.x_ancillas.len(), u.z_ancillas.len());

            let rep = LayoutMap::new(Family::Repetition, d);
            assert_eq!(rep.num_qubits(), (2 * d - 1) as usize);
        }
        let u3 = LayoutMap::new(Family::Unrotated, 3);
        assert_eq!((u3.z_ancillas.len(), u3.x_ancillas.len()), (6, 6));
    }

    #[test]
    fn every_data_qubit_sees_both_check_types() {
        for fam in [Family::Rotated, Family::Unrotated] {
            for d in [3, 5, 7] {
                let l = LayoutMap::new(fam, d);
                assert!(covered(&l, CheckKind::X).iter().all(|&c| c >= 1), "{fam:?} d={d}");
                assert!(covered(&l, CheckKind::Z).iter().all(|&c| c >= 1), "{fam:?} d={d}");
            }
        }
    }

    fn overlap(a: &[u32], b: &[u32]) -> usize {
        a.iter().filter(|q| b.contains(q)).count()
    }

    #[test]
    fn checks_and_logicals_commute_as_required() {
        for fam in [Family::Rotated, Family::Unrotated] {
            for d in [3, 5, 7] {
                let l = LayoutMap::new(fam, d);
                assert_eq!(l.z_logical.len(), d as usize);
                assert_eq!(l.x_logical.len(), d as usize);
                for a in l.plaquettes.iter().filter(|p| p.kind == CheckKind::X) {
                    for b in l.plaquettes.iter().filter(|p| p.kind == CheckKind::Z) {
                        assert_eq!(overlap(&a.data(), &b.data()) % 2, 0);
                    }
                    assert_eq!(overlap(&a.data(), &l.z_logical) % 2, 0);
                }
                for b in l.plaquettes.iter().filter(|p| p.kind == CheckKind::Z) {
                    assert_eq!(overlap(&b.data(), &l.x_logical) % 2, 0);
                }
                assert_eq!(overlap(&l.z_logical, &l.x_logical) % 2, 1);
            }
        }
    }

    #[test]
    fn no_qubit_is_touched_twice_in_a_layer() {
        for fam in [Family::Rotated, Family::Unrotated, Family::Repetition] {
            let l = LayoutMap::new(fam, 5);
            for layer in 0..4 {
                let mut seen = std::collections::HashSet::new();
                for p in &l.plaquettes {
                    if let Some(q) = p.slots[layer] {
                        assert!(seen.insert(q), "{fam:?} layer {layer} reuses {q}");
                        assert!(seen.insert(p.ancilla));
                    }
                }
            }
        }
    }
}
