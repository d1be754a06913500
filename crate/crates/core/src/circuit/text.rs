//! Line-oriented circuit text format.
//!
//! ```text
//! # comment
//! QUBIT_COORDS(1, 3) 4
//! R 0 1 2
//! DEPOLARIZE1(0.001) 0 1 2
//! CX 0 1
//! M 1
//! DETECTOR rec[-1]
//! OBSERVABLE_INCLUDE(0) rec[-1]
//! ```

use std::fmt::Write;

use super::{Circuit, Instruction, Opcode};
use crate::error::{Error, Result};

const COORDS: &str = "QUBIT_COORDS";

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Splits `NAME(args) rest` into its three parts.
fn split_head(line: &str, lineno: usize) -> Result<(&str, Option<&str>, &str)> {
    let name_end = line
        .find(|c: char| c == '(' || c.is_whitespace())
        .unwrap_or(line.len());
    let name = &line[..name_end];
    let rest = &line[name_end..];
    if let Some(after) = rest.strip_prefix('(') {
        let close = after
            .find(')')
            .ok_or_else(|| perr(lineno, "unclosed argument parenthesis"))?;
        Ok((name, Some(&after[..close]), &after[close + 1..]))
    } else {
        Ok((name, None, rest))
    }
}

fn parse_number(s: &str, lineno: usize) -> Result<f64> {
    let t = s.trim();
    let ok_chars = !t.is_empty()
        && t
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '-' | '+'));
    match t.parse::<f64>() {
        Ok(v) if ok_chars && v.is_finite() => Ok(v),
        _ => Err(perr(lineno, format!("malformed number '{t}'"))),
    }
}

fn parse_qubit(tok: &str, lineno: usize) -> Result<u32> {
    tok.parse::<u32>()
        .map_err(|_| perr(lineno, format!("expected qubit index, found '{tok}'")))
}

fn parse_rec(tok: &str, lineno: usize, measured: usize) -> Result<u32> {
    let inner = tok
        .strip_prefix("rec[-")
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| perr(lineno, format!("expected rec[-k], found '{tok}'")))?;
    let k = inner
        .parse::<u32>()
        .map_err(|_| perr(lineno, format!("bad record offset in '{tok}'")))?;
    if k == 0 || k as usize > measured {
        return Err(perr(
            lineno,
            format!("{tok} does not refer to one of the {measured} earlier measurements"),
        ));
    }
    Ok(k)
}

pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let mut circuit = Circuit::default();
    let mut max_qubit: Option<u32> = None;
    let mut measured = 0usize;
    let bump = |q: u32, m: &mut Option<u32>| *m = Some(m.map_or(q, |x| x.max(q)));

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (name, arg, rest) = split_head(line, lineno)?;
        let tokens: Vec<&str> = rest.split_whitespace().collect();

        if name == COORDS {
            let args = arg.ok_or_else(|| perr(lineno, "QUBIT_COORDS needs (x, y)"))?;
            let xy: Vec<f64> = args
                .split(',')
                .map(|s| parse_number(s, lineno))
                .collect::<Result<_>>()?;
            if xy.len() != 2 || tokens.len() != 1 {
                return Err(perr(lineno, "QUBIT_COORDS takes two coordinates and one qubit"));
            }
            let q = parse_qubit(tokens[0], lineno)?;
            bump(q, &mut max_qubit);
            circuit.coords.insert(q, (xy[0], xy[1]));
            continue;
        }

        let opcode: Opcode = name
            .parse()
            .map_err(|_| perr(lineno, format!("unknown opcode '{name}'")))?;
        let arg = arg.map(|a| parse_number(a, lineno)).transpose()?;

        let targets = if opcode.is_annotation() {
            tokens
                .iter()
                .map(|t| parse_rec(t, lineno, measured))
                .collect::<Result<Vec<_>>>()?
        } else {
            let qs = tokens
                .iter()
                .map(|t| parse_qubit(t, lineno))
                .collect::<Result<Vec<_>>>()?;
            for &q in &qs {
                bump(q, &mut max_qubit);
            }
            qs
        };
        let inst = Instruction::new(opcode, targets, arg);
        measured += inst.measurement_count();
        circuit.instructions.push(inst);
    }
    circuit.num_qubits = max_qubit.map_or(0, |q| q as usize + 1);
    Ok(circuit)
}

pub fn serialize_circuit(circuit: &Circuit) -> String {
    let mut out = String::new();
    for (q, (x, y)) in &circuit.coords {
        let _ = writeln!(out, "{COORDS}({x}, {y}) {q}");
    }
    for inst in &circuit.instructions {
        out.push_str(inst.opcode.name());
        if let Some(a) = inst.arg {
            let _ = write!(out, "({a})");
        }
        for &t in &inst.targets {
            if inst.opcode.is_annotation() {
                let _ = write!(out, " rec[-{t}]");
            } else {
                let _ = write!(out, " {t}");
            }
        }
        out.push('\n');
    }
    out
}
