//! Reduction of a detector error model to a weighted matching graph.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use super::{combine_probabilities, DetectorErrorModel, ErrorMechanism};
use crate::error::{Error, Result};

/// Largest mechanism the decomposition search will attempt.
const MAX_DECOMPOSE: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub u: u32,
    /// Equal to [`MatchingGraph::boundary`] for boundary edges.
    pub v: u32,
    pub p: f64,
    pub weight: f64,
    pub observables: u64,
}

/// Detector nodes `0..num_detectors` plus one boundary node with id
/// `num_detectors`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchingGraph {
    pub num_detectors: usize,
    pub num_observables: usize,
    pub edges: Vec<Edge>,
    /// Per node: `(neighbor, edge index)`.
    pub adjacency: Vec<Vec<(u32, u32)>>,
    pub detector_coords: Vec<Option<[f64; 3]>>,
    pub diagnostics: Vec<String>,
}

/// `ln((1 - p) / p)`, clamped to zero for `p >= 1/2`.
pub(crate) fn edge_weight(p: f64) -> f64 {
    if p >= 0.5 {
        if p > 0.5 {
            log::warn!("edge probability {p} above 1/2 clamped to weight 0");
        }
        0.0
    } else {
        ((1.0 - p) / p).ln()
    }
}

impl MatchingGraph {
    pub fn boundary(&self) -> u32 {
        self.num_detectors as u32
    }

    pub fn num_nodes(&self) -> usize {
        self.num_detectors + 1
    }

    pub fn edge_between(&self, u: u32, v: u32) -> Option<&Edge> {
        self.adjacency[u as usize]
            .iter()
            .find(|&&(n, _)| n == v)
            .map(|&(_, e)| &self.edges[e as usize])
    }

    pub fn has_boundary_edges(&self) -> bool {
        !self.adjacency[self.num_detectors].is_empty()
    }

    /// Writes `u,v,weight,p,obs_mask` rows, `B` naming the boundary.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["u", "v", "weight", "p", "obs_mask"])?;
        let name = |n: u32| {
            if n == self.boundary() {
                "B".to_string()
            } else {
                n.to_string()
            }
        };
        for e in &self.edges {
            out.write_record([
                name(e.u),
                name(e.v),
                e.weight.to_string(),
                e.p.to_string(),
                e.observables.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Detector nodes that have edges but no path to the boundary.
    fn unreachable_nodes(&self) -> Vec<u32> {
        let mut seen = vec![false; self.num_nodes()];
        let b = self.boundary() as usize;
        seen[b] = true;
        let mut queue = VecDeque::from([b]);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    queue.push_back(v as usize);
                }
            }
        }
        (0..self.num_detectors as u32)
            .filter(|&d| !seen[d as usize] && !self.adjacency[d as usize].is_empty())
            .collect()
    }
}

struct Builder {
    boundary: u32,
    index: HashMap<(u32, u32), usize>,
    edges: Vec<(u32, u32, f64, u64)>,
    diagnostics: Vec<String>,
}

impl Builder {
    fn key(&self, a: u32, b: Option<u32>) -> (u32, u32) {
        let b = b.unwrap_or(self.boundary);
        (a.min(b), a.max(b))
    }

    fn add(&mut self, key: (u32, u32), p: f64, obs: u64) {
        match self.index.get(&key) {
            None => {
                self.index.insert(key, self.edges.len());
                self.edges.push((key.0, key.1, p, obs));
            }
            Some(&i) => {
                let e = &mut self.edges[i];
                if e.3 == obs {
                    e.2 = combine_probabilities(e.2, p);
                } else {
                    self.diagnostics.push(format!(
                        "parallel edges {:?} disagree on observables ({} vs {}); kept the more likely",
                        key, e.3, obs
                    ));
                    if p > e.2 {
                        e.2 = p;
                        e.3 = obs;
                    }
                }
            }
        }
    }

    /// Splits `dets` into pairs and boundary singles that are all existing
    /// edges and whose observables XOR to `obs`.
    fn decompose(&self, dets: &[u32], obs: u64) -> Option<Vec<(u32, u32)>> {
        fn go(b: &Builder, rem: &mut Vec<u32>, acc: u64, target: u64, out: &mut Vec<(u32, u32)>) -> bool {
            let Some(&a) = rem.first() else {
                return acc == target;
            };
            rem.remove(0);
            let single = b.key(a, None);
            if let Some(&i) = b.index.get(&single) {
                out.push(single);
                if go(b, rem, acc ^ b.edges[i].3, target, out) {
                    return true;
                }
                out.pop();
            }
            for j in 0..rem.len() {
                let c = rem[j];
                let pair = b.key(a, Some(c));
                if let Some(&i) = b.index.get(&pair) {
                    rem.remove(j);
                    out.push(pair);
                    if go(b, rem, acc ^ b.edges[i].3, target, out) {
                        return true;
                    }
                    out.pop();
                    rem.insert(j, c);
                }
            }
            rem.insert(0, a);
            false
        }
        let mut rem = dets.to_vec();
        let mut out = Vec::new();
        go(self, &mut rem, 0, obs, &mut out).then_some(out)
    }
}

fn describe(m: &ErrorMechanism) -> String {
    format!("p={} D{:?} L{:?}", m.p, m.detectors, m.observables)
}

/// Builds the matching graph: one- and two-detector mechanisms become
/// edges, larger ones are decomposed onto those edges or reported and
/// dropped.
pub fn dem_to_matching_graph(dem: &DetectorErrorModel) -> Result<MatchingGraph> {
    if dem.is_empty() {
        return Err(Error::Insufficient("detector error model has no mechanisms".into()));
    }
    let boundary = dem.num_detectors as u32;
    let mut b = Builder {
        boundary,
        index: HashMap::new(),
        edges: Vec::new(),
        diagnostics: Vec::new(),
    };
    let mut hyper = Vec::new();
    for m in &dem.mechanisms {
        let obs = m.observable_mask();
        match m.detectors.as_slice() {
            [] => b.diagnostics.push(format!("undetectable mechanism dropped: {}", describe(m))),
            [a] => {
                let k = b.key(*a, None);
                b.add(k, m.p, obs)
            }
            [a, c] => {
                let k = b.key(*a, Some(*c));
                b.add(k, m.p, obs)
            }
            _ => hyper.push(m),
        }
    }
    for m in hyper {
        let parts = if m.detectors.len() <= MAX_DECOMPOSE {
            b.decompose(&m.detectors, m.observable_mask())
        } else {
            None
        };
        match parts {
            Some(parts) => {
                for key in parts {
                    let i = b.index[&key];
                    b.edges[i].2 = combine_probabilities(b.edges[i].2, m.p);
                }
            }
            None => b
                .diagnostics
                .push(format!("undecomposable mechanism dropped: {}", describe(m))),
        }
    }

    let num_nodes = dem.num_detectors + 1;
    let mut adjacency = vec![Vec::new(); num_nodes];
    let edges: Vec<Edge> = b
        .edges
        .iter()
        .enumerate()
        .map(|(i, &(u, v, p, obs))| {
            adjacency[u as usize].push((v, i as u32));
            adjacency[v as usize].push((u, i as u32));
            Edge {
                u,
                v,
                p,
                weight: edge_weight(p),
                observables: obs,
            }
        })
        .collect();
    let mut g = MatchingGraph {
        num_detectors: dem.num_detectors,
        num_observables: dem.num_observables,
        edges,
        adjacency,
        detector_coords: dem.detector_coords.clone(),
        diagnostics: b.diagnostics,
    };
    let cut_off = g.unreachable_nodes();
    if !cut_off.is_empty() {
        g.diagnostics
            .push(format!("{} detector(s) cannot reach the boundary", cut_off.len()));
    }
    Ok(g)
}

/// Fewest edges in any set that leaves no detector flagged yet flips
/// observable 0. Returns `None` when no such set exists.
pub fn graph_distance(g: &MatchingGraph) -> Option<usize> {
    let n = g.num_nodes();
    let b = g.boundary() as usize;
    let mut best: Option<usize> = None;
    // An odd closed walk through the boundary, or around a detector cycle.
    for start in 0..n {
        if g.adjacency[start].is_empty() {
            continue;
        }
        let mut dist = vec![usize::MAX; 2 * n];
        dist[2 * start] = 0;
        let mut queue = VecDeque::from([(start, 0usize)]);
        while let Some((u, par)) = queue.pop_front() {
            let du = dist[2 * u + par];
            if best.is_some_and(|bst| du >= bst) {
                break;
            }
            for &(v, e) in &g.adjacency[u] {
                let v = v as usize;
                // Walks only touch the boundary at their endpoints.
                if v == b && start != b {
                    continue;
                }
                let np = par ^ (g.edges[e as usize].observables & 1) as usize;
                if v == start && np == 1 {
                    best = Some(best.map_or(du + 1, |x| x.min(du + 1)));
                    continue;
                }
                if v == b {
                    continue;
                }
                if dist[2 * v + np] == usize::MAX {
                    dist[2 * v + np] = du + 1;
                    queue.push_back((v, np));
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::{build, CodeSpec, Family};
    use crate::dem::{decoding_graph, extract_dem};
    use crate::noise::{apply_noise_model, NoiseModel};

    fn dem_of(entries: &[(&[u32], u64, f64)], nd: usize) -> DetectorErrorModel {
        DetectorErrorModel::from_contributions(
            nd,
            1,
            entries.iter().map(|&(d, o, p)| {
                let obs = if o == 1 { vec![0] } else { vec![] };
                ((d.to_vec(), obs), p)
            }),
        )
    }

    #[test]
    fn half_probability_edge_has_zero_weight() {
        let g = dem_to_matching_graph(&dem_of(&[(&[0, 1], 0, 0.5)], 2)).unwrap();
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].weight, 0.0);
        assert_eq!(edge_weight(0.7), 0.0);
    }

    #[test]
    fn single_detector_mechanism_goes_to_boundary() {
        let g = dem_to_matching_graph(&dem_of(&[(&[0], 0, 0.1)], 1)).unwrap();
        assert_eq!((g.edges[0].u, g.edges[0].v), (0, g.boundary()));
        assert!((g.edges[0].weight - (0.9f64 / 0.1).ln()).abs() < 1e-12);
    }

    #[test]
    fn hyperedge_is_folded_into_existing_edges() {
        let dem = dem_of(
            &[(&[0, 1], 0, 0.1), (&[2], 1, 0.1), (&[0, 1, 2], 1, 0.01), (&[0, 2, 3], 0, 0.01)],
            4,
        );
        let g = dem_to_matching_graph(&dem).unwrap();
        assert_eq!(g.edges.len(), 2);
        let e01 = g.edge_between(0, 1).unwrap();
        assert!((e01.p - combine_probabilities(0.1, 0.01)).abs() < 1e-15);
        let dropped = g.diagnostics.iter().filter(|d| d.contains("undecomposable")).count();
        assert_eq!(dropped, 1, "{:?}", g.diagnostics);
    }

    #[test]
    fn conflicting_parallel_edges_keep_the_likelier() {
        let dem = DetectorErrorModel::from_contributions(
            2,
            1,
            [((vec![0, 1], vec![]), 0.1), ((vec![0, 1], vec![0]), 0.2)],
        );
        let g = dem_to_matching_graph(&dem).unwrap();
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].observables, 1);
        assert_eq!(g.diagnostics.iter().filter(|d| d.contains("disagree")).count(), 1);
    }

    #[test]
    fn empty_model_is_rejected() {
        assert!(dem_to_matching_graph(&DetectorErrorModel::default()).is_err());
    }

    #[test]
    fn csv_export_has_expected_columns() {
        let g = dem_to_matching_graph(&dem_of(&[(&[0, 1], 0, 0.1), (&[1], 1, 0.2)], 2)).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "u,v,weight,p,obs_mask");
        assert!(lines[2].starts_with("1,B,"));
        assert!(lines[2].ends_with(",0.2,1"));
    }

    fn graph_for(f: Family, d: u32, r: u32, m: NoiseModel) -> MatchingGraph {
        let spec = CodeSpec::new(f, d, r).unwrap();
        let c = apply_noise_model(&build(&spec).unwrap(), m, 0.001).unwrap();
        decoding_graph(&extract_dem(&c).unwrap(), &spec.layout()).unwrap()
    }

    #[test]
    fn phenomenological_graph_links_rounds() {
        let spec = CodeSpec::new(Family::Rotated, 3, 3).unwrap();
        let c = apply_noise_model(&build(&spec).unwrap(), NoiseModel::Phenomenological, 0.01).unwrap();
        let dem = extract_dem(&c).unwrap();
        let g = decoding_graph(&dem, &spec.layout()).unwrap();
        let coords: Vec<[f64; 3]> = dem.detector_coords.iter().map(|c| c.unwrap()).collect();
        for (d, c) in coords.iter().enumerate() {
            let later = coords
                .iter()
                .enumerate()
                .find(|(_, o)| o[0] == c[0] && o[1] == c[1] && o[2] == c[2] + 1.0);
            if let Some((e, _)) = later {
                assert!(g.edge_between(d as u32, e as u32).is_some(), "{d}->{e}");
            }
        }
    }

    #[test]
    fn graph_distance_equals_code_distance() {
        for f in Family::ALL {
            for d in [3, 5] {
                for m in [NoiseModel::CodeCapacity, NoiseModel::Phenomenological, NoiseModel::CircuitLevel] {
                    let g = graph_for(f, d, d, m);
                    assert_eq!(graph_distance(&g), Some(d as usize), "{f:?} d={d} {m:?}");
                }
            }
        }
    }

    #[test]
    fn weights_are_finite_and_nonnegative() {
        let g = graph_for(Family::Rotated, 5, 5, NoiseModel::CircuitLevel);
        assert!(g.edges.iter().all(|e| e.weight.is_finite() && e.weight >= 0.0));
        assert!(g.diagnostics.is_empty(), "{:?}", g.diagnostics);
    }
}
