use super::{Circuit, Opcode};

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub(super) fn validate(circuit: &Circuit) -> ValidationReport {
    let mut violations = Vec::new();
    let mut flag = |index: usize, message: String| violations.push(Violation { index, message });
    let mut measured = 0usize;

    for (index, inst) in circuit.instructions.iter().enumerate() {
        let op = inst.opcode;

        if op.is_annotation() {
            for &k in &inst.targets {
                if k == 0 || k as usize > measured {
                    flag(
                        index,
                        format!("rec[-{k}] does not resolve ({measured} earlier measurements)"),
                    );
                }
            }
        } else {
            for &q in &inst.targets {
                if q as usize >= circuit.num_qubits {
                    flag(
                        index,
                        format!("qubit {q} out of range (num_qubits = {})", circuit.num_qubits),
                    );
                }
            }
        }

        if op.is_two_qubit() {
            if inst.targets.len() % 2 != 0 {
                flag(index, format!("{op} needs an even number of targets"));
            }
            for pair in inst.targets.chunks_exact(2) {
                if pair[0] == pair[1] {
                    flag(index, format!("{op} pair acts twice on qubit {}", pair[0]));
                }
            }
        }

        match (op, inst.arg) {
            (o, Some(p)) if o.is_noise() => {
                if !(0.0..=1.0).contains(&p) {
                    flag(index, format!("{op} probability {p} outside [0, 1]"));
                }
            }
            (o, None) if o.is_noise() => flag(index, format!("{op} needs a probability")),
            (Opcode::ObservableInclude, Some(a)) => {
                if a < 0.0 || a.fract() != 0.0 {
                    flag(index, format!("observable index {a} is not a non-negative integer"));
                }
            }
            (Opcode::ObservableInclude, None) => {
                flag(index, "OBSERVABLE_INCLUDE needs an observable index".into())
            }
            (_, Some(a)) => flag(index, format!("{op} takes no argument, found {a}")),
            (_, None) => {}
        }

        if op == Opcode::Tick && !inst.targets.is_empty() {
            flag(index, "TICK takes no targets".into());
        }

        measured += inst.measurement_count();
    }

    for &q in circuit.coords.keys() {
        if q as usize >= circuit.num_qubits {
            flag(circuit.instructions.len(), format!("coordinates given for unknown qubit {q}"));
        }
    }
    ValidationReport { violations }
}
