//! Separation of a model into the part seen by X checks and the part seen
//! by Z checks.

use super::{dem_to_matching_graph, DetectorErrorModel, MatchingGraph};
use crate::codegen::{CheckKind, LayoutMap};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDem {
    /// Mechanisms restricted to X-check detectors.
    pub x: DetectorErrorModel,
    /// Mechanisms restricted to Z-check detectors.
    pub z: DetectorErrorModel,
    /// Check type of every detector.
    pub detector_kind: Vec<CheckKind>,
    pub diagnostics: Vec<String>,
}

fn classify(dem: &DetectorErrorModel, layout: &LayoutMap, diagnostics: &mut Vec<String>) -> Vec<CheckKind> {
    (0..dem.num_detectors)
        .map(|d| {
            let qubits = dem.detector_qubits.get(d).map(Vec::as_slice).unwrap_or(&[]);
            match qubits.iter().find_map(|&q| layout.kind_of(q)) {
                Some(k) => k,
                None => {
                    diagnostics.push(format!("detector {d} reads no ancilla; treated as a Z check"));
                    CheckKind::Z
                }
            }
        })
        .collect()
}

/// Splits every mechanism into its X-check and Z-check detector parts. The
/// observables go to whichever side detects the errors that flip them,
/// found from mechanisms lying entirely on one side.
pub fn split_xz(dem: &DetectorErrorModel, layout: &LayoutMap) -> SplitDem {
    let mut diagnostics = Vec::new();
    let kind = classify(dem, layout, &mut diagnostics);
    let side = |m: &super::ErrorMechanism, k: CheckKind| -> Vec<u32> {
        m.detectors.iter().copied().filter(|&d| kind[d as usize] == k).collect()
    };

    let mut owner_votes = [0usize; 2];
    for m in dem.mechanisms.iter().filter(|m| !m.observables.is_empty()) {
        let z = side(m, CheckKind::Z).len();
        let x = side(m, CheckKind::X).len();
        if x == 0 && z > 0 {
            owner_votes[1] += 1;
        } else if z == 0 && x > 0 {
            owner_votes[0] += 1;
        }
    }
    let owner = if owner_votes[0] > owner_votes[1] {
        CheckKind::X
    } else {
        CheckKind::Z
    };

    let mut parts = [Vec::new(), Vec::new()];
    for m in &dem.mechanisms {
        for (slot, k) in [(0usize, CheckKind::X), (1, CheckKind::Z)] {
            let dets = side(m, k);
            let obs = if k == owner { m.observables.clone() } else { Vec::new() };
            if dets.len() > 2 {
                diagnostics.push(format!(
                    "mechanism p={} touches {} {:?}-check detectors",
                    m.p,
                    dets.len(),
                    k
                ));
            }
            if !dets.is_empty() || !obs.is_empty() {
                parts[slot].push(((dets, obs), m.p));
            }
        }
    }
    let [xs, zs] = parts;
    let make = |c| {
        let mut half = DetectorErrorModel::from_contributions(dem.num_detectors, dem.num_observables, c);
        half.detector_coords = dem.detector_coords.clone();
        half.detector_qubits = dem.detector_qubits.clone();
        half
    };
    SplitDem {
        x: make(xs),
        z: make(zs),
        detector_kind: kind,
        diagnostics,
    }
}

/// Matching graph built from the two halves of [`split_xz`]. The halves
/// share only the boundary node, so matching on the union is the same as
/// matching each half on its own.
pub fn decoding_graph(dem: &DetectorErrorModel, layout: &LayoutMap) -> Result<MatchingGraph> {
    let split = split_xz(dem, layout);
    let merged = split
        .x
        .mechanisms
        .iter()
        .chain(&split.z.mechanisms)
        .map(|m| ((m.detectors.clone(), m.observables.clone()), m.p));
    let mut union = DetectorErrorModel::from_contributions(dem.num_detectors, dem.num_observables, merged);
    union.detector_coords = dem.detector_coords.clone();
    let mut g = dem_to_matching_graph(&union)?;
    let mut diagnostics = split.diagnostics;
    diagnostics.append(&mut g.diagnostics);
    g.diagnostics = diagnostics;
    Ok(g)
}
