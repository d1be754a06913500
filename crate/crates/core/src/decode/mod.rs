//! Minimum-weight perfect matching decoding over a [`MatchingGraph`].

mod blossom;

use std::borrow::Cow;
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::dem::{DetectorErrorModel, MatchingGraph};
use crate::error::{Error, Result};
use crate::sim::{BitMatrix, ShotBatch};

pub use blossom::max_weight_matching;

/// Edge weights are rounded to multiples of `1 / WEIGHT_SCALE` for matching.
const WEIGHT_SCALE: f64 = (1u64 << 20) as f64;

/// Default candidate partners per defect.
pub const DEFAULT_NEIGHBOURS: usize = 32;

/// Mechanism count limit for [`brute_force_mle_decode`].
pub const MAX_MLE_MECHANISMS: usize = 20;

/// Detectors flagged in one shot.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Syndrome {
    pub flagged: Vec<u32>,
}

impl Syndrome {
    /// Sorts and deduplicates; fails when an index is out of range.
    pub fn new(mut flagged: Vec<u32>, num_detectors: usize) -> Result<Self> {
        flagged.sort_unstable();
        flagged.dedup();
        if let Some(&bad) = flagged.iter().find(|&&d| d as usize >= num_detectors) {
            return Err(Error::SizeMismatch {
                expected: num_detectors,
                actual: bad as usize + 1,
            });
        }
        Ok(Self { flagged })
    }

    pub fn is_empty(&self) -> bool {
        self.flagged.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matching {
    /// Sorted pairs `(a, b)` with `a < b`; `b` is the boundary node for
    /// boundary pairings.
    pub pairs: Vec<(u32, u32)>,
    pub total_weight: f64,
    pub observable_flip: u64,
}

/// Shortest path summary from a source.
#[derive(Debug, Clone, Copy)]
struct Reach {
    cost: i64,
    weight: f64,
    obs: u64,
}

/// Detectors settled by one bounded search, nearest first.
type Ball = Box<[(u32, Reach)]>;

/// Cap on cached search entries across all balls of one decoder.
const CACHE_ENTRIES: usize = 1 << 22;

/// Precomputed per-graph state shared by every shot.
#[derive(Debug)]
pub struct MwpmDecoder<'g> {
    graph: &'g MatchingGraph,
    int_weight: Vec<i64>,
    /// Shortest path from each detector to the boundary.
    to_boundary: Vec<Option<Reach>>,
    /// Detectors whose component has at least one observable-flipping edge.
    relevant: Vec<bool>,
    neighbours: usize,
    /// Search ball of each detector out to twice its boundary distance.
    /// It does not depend on the syndrome, so it is filled lazily and
    /// shared by every shot and worker.
    balls: Vec<OnceLock<Ball>>,
    cached: AtomicUsize,
}

/// Reusable Dijkstra buffers, one per worker.
#[derive(Debug, Default)]
struct Scratch {
    best: Vec<Option<Reach>>,
    touched: Vec<usize>,
    target: Vec<Option<usize>>,
    /// Detectors settled by the last search, nearest first.
    found: Vec<(u32, Reach)>,
}

impl Scratch {
    fn for_graph(n: usize) -> Self {
        Self {
            best: vec![None; n],
            touched: Vec::new(),
            target: vec![None; n],
            found: Vec::new(),
        }
    }

    fn reset(&mut self) {
        for &t in &self.touched {
            self.best[t] = None;
        }
        self.touched.clear();
        self.found.clear();
    }
}

impl<'g> MwpmDecoder<'g> {
    pub fn new(graph: &'g MatchingGraph) -> Self {
        let int_weight = graph.edges.iter().map(|e| (e.weight * WEIGHT_SCALE).round() as i64).collect();
        let mut dec = Self {
            graph,
            int_weight,
            to_boundary: vec![None; graph.num_detectors],
            relevant: vec![false; graph.num_detectors],
            neighbours: DEFAULT_NEIGHBOURS,
            balls: (0..graph.num_detectors).map(|_| OnceLock::new()).collect(),
            cached: AtomicUsize::new(0),
        };
        dec.to_boundary = dec.boundary_reach();
        dec.relevant = dec.relevant_components();
        dec
    }

    /// Number of nearest defects each defect may pair with. Matching is
    /// exact for syndromes of up to `n + 1` defects.
    pub fn with_neighbours(mut self, n: usize) -> Self {
        self.neighbours = n.max(1);
        self
    }

    pub fn graph(&self) -> &MatchingGraph {
        self.graph
    }

    fn boundary_reach(&self) -> Vec<Option<Reach>> {
        let g = self.graph;
        let b = g.boundary() as usize;
        let mut scratch = Scratch::for_graph(g.num_nodes());
        self.dijkstra(b, &mut scratch, i64::MAX);
        (0..g.num_detectors).map(|d| scratch.best[d]).collect()
    }

    fn relevant_components(&self) -> Vec<bool> {
        let g = self.graph;
        let n = g.num_detectors;
        let mut comp = vec![usize::MAX; n];
        let mut flips = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = flips.len();
            let mut any = false;
            let mut stack = vec![start];
            comp[start] = id;
            while let Some(u) = stack.pop() {
                for &(v, e) in &g.adjacency[u] {
                    any |= g.edges[e as usize].observables != 0;
                    let v = v as usize;
                    if v < n && comp[v] == usize::MAX {
                        comp[v] = id;
                        stack.push(v);
                    }
                }
            }
            flips.push(any);
        }
        comp.into_iter().map(|c| flips[c]).collect()
    }

    /// Dijkstra from `source` that never steps through the boundary node
    /// and stops past `cutoff`. Settled detectors land in `s.found`.
    fn dijkstra(&self, source: usize, s: &mut Scratch, cutoff: i64) {
        let g = self.graph;
        let boundary = g.boundary() as usize;
        s.reset();
        let mut heap = BinaryHeap::new();
        s.best[source] = Some(Reach {
            cost: 0,
            weight: 0.0,
            obs: 0,
        });
        s.touched.push(source);
        heap.push(Reverse((0i64, source)));
        while let Some(Reverse((cost, u))) = heap.pop() {
            let here = s.best[u].expect("settled node");
            if cost > here.cost {
                continue;
            }
            if cost > cutoff {
                break;
            }
            if u != source && u != boundary {
                s.found.push((u as u32, here));
            }
            if u == boundary && u != source {
                continue;
            }
            for &(v, e) in &g.adjacency[u] {
                let v = v as usize;
                let next = cost.saturating_add(self.int_weight[e as usize]);
                let better = match s.best[v] {
                    None => true,
                    Some(r) => next < r.cost,
                };
                if better {
                    if s.best[v].is_none() {
                        s.touched.push(v);
                    }
                    let edge = &g.edges[e as usize];
                    s.best[v] = Some(Reach {
                        cost: next,
                        weight: here.weight + edge.weight,
                        obs: here.obs ^ edge.observables,
                    });
                    heap.push(Reverse((next, v)));
                }
            }
        }
    }

    fn ball<'a>(&'a self, node: usize, s: &mut Scratch) -> Cow<'a, [(u32, Reach)]> {
        if let Some(b) = self.balls[node].get() {
            return Cow::Borrowed(b);
        }
        let radius = self.to_boundary[node].map_or(i64::MAX, |r| r.cost.saturating_mul(2));
        self.dijkstra(node, s, radius);
        let found: Ball = s.found.drain(..).collect();
        let n = found.len();
        if self.cached.fetch_add(n, Ordering::Relaxed) + n <= CACHE_ENTRIES {
            Cow::Borrowed(self.balls[node].get_or_init(|| found))
        } else {
            self.cached.fetch_sub(n, Ordering::Relaxed);
            Cow::Owned(found.into_vec())
        }
    }

    /// Decodes one syndrome.
    pub fn decode(&self, syndrome: &Syndrome) -> Result<Matching> {
        let mut scratch = Scratch::for_graph(self.graph.num_nodes());
        self.decode_with(&syndrome.flagged, &mut scratch)
    }

    fn decode_with(&self, defects: &[u32], s: &mut Scratch) -> Result<Matching> {
        let k = defects.len();
        if k == 0 {
            return Ok(Matching::default());
        }
        let boundary = self.graph.boundary();
        let bnd: Vec<Option<Reach>> = defects.iter().map(|&d| self.to_boundary[d as usize]).collect();
        let all_reach_boundary = bnd.iter().all(Option::is_some);
        let max_b = bnd.iter().flatten().map(|r| r.cost).max().unwrap_or(0);

        // Pairwise shortest paths to the nearest other defects. A pair is
        // only worth matching when d_ij < b_i + b_j <= 2 max(b_i, b_j), so
        // each defect's ball of radius 2 b_i finds every such pair from at
        // least one end.
        for (i, &d) in defects.iter().enumerate() {
            s.target[d as usize] = Some(i);
        }
        // Without a boundary every pairing may be needed for perfection.
        let limit = if all_reach_boundary { self.neighbours } else { usize::MAX };
        let mut pair: Vec<Vec<(usize, Reach)>> = vec![Vec::new(); k];
        for i in 0..k {
            let cutoff = match bnd[i] {
                Some(r) if all_reach_boundary => r.cost.saturating_add(max_b),
                _ => i64::MAX,
            };
            let ball = self.ball(defects[i] as usize, s);
            let mut seen = 0;
            for &(node, r) in ball.iter() {
                if r.cost > cutoff {
                    break;
                }
                if let Some(j) = s.target[node as usize] {
                    let (lo, hi) = (i.min(j), i.max(j));
                    if !pair[lo].iter().any(|e| e.0 == hi) {
                        pair[lo].push((hi, r));
                    }
                    seen += 1;
                    if seen >= limit {
                        break;
                    }
                }
            }
        }
        for &d in defects {
            s.target[d as usize] = None;
        }

        let mate = if all_reach_boundary {
            let mut edges = Vec::new();
            for (i, row) in pair.iter().enumerate() {
                let bi = bnd[i].expect("boundary reach").cost;
                for &(j, r) in row {
                    let gain = bi + bnd[j].expect("boundary reach").cost - r.cost;
                    if gain > 0 {
                        edges.push((i, j, gain));
                    }
                }
            }
            let mut mate = max_weight_matching(&edges, false);
            mate.resize(k, None);
            mate
        } else {
            self.twin_matching(k, &bnd, &pair)?
        };

        let mut m = Matching::default();
        for i in 0..k {
            match mate[i] {
                Some(j) if j < k => {
                    if i < j {
                        let r = pair[i].iter().find(|e| e.0 == j).expect("matched pair has a path").1;
                        m.pairs.push((defects[i], defects[j]));
                        m.total_weight += r.weight;
                        m.observable_flip ^= r.obs;
                    }
                }
                _ => {
                    let r = bnd[i].expect("boundary pairing needs a boundary path");
                    m.pairs.push((defects[i], boundary));
                    m.total_weight += r.weight;
                    m.observable_flip ^= r.obs;
                }
            }
        }
        m.pairs.sort_unstable();
        Ok(m)
    }

    /// Perfect matching with one boundary twin per defect that can reach
    /// the boundary. Used when some defect cannot.
    fn twin_matching(&self, k: usize, bnd: &[Option<Reach>], pair: &[Vec<(usize, Reach)>]) -> Result<Vec<Option<usize>>> {
        let twins: Vec<usize> = (0..k).filter(|&i| bnd[i].is_some()).collect();
        let mut nodes = k + twins.len();
        let dummy = if nodes % 2 == 1 && !twins.is_empty() {
            nodes += 1;
            Some(nodes - 1)
        } else {
            None
        };
        if nodes % 2 == 1 {
            return Err(Error::Infeasible(format!("{k} defects and no boundary to absorb the odd one")));
        }
        let max_cost = pair
            .iter()
            .flatten()
            .map(|e| e.1.cost)
            .chain(bnd.iter().flatten().map(|r| r.cost))
            .max()
            .unwrap_or(0);
        let top = max_cost + 1;
        let mut edges = Vec::new();
        for (i, row) in pair.iter().enumerate() {
            for &(j, r) in row {
                edges.push((i, j, top - r.cost));
            }
        }
        for (t, &i) in twins.iter().enumerate() {
            edges.push((i, k + t, top - bnd[i].expect("twin").cost));
            for u in t + 1..twins.len() {
                edges.push((k + t, k + u, top));
            }
            if let Some(z) = dummy {
                edges.push((k + t, z, top));
            }
        }
        let mut mate = max_weight_matching(&edges, true);
        mate.resize(nodes, None);
        if mate[..k].iter().any(Option::is_none) {
            return Err(Error::Infeasible("no perfect matching of the defects exists".into()));
        }
        Ok(mate[..k].iter().map(|m| m.map(|j| if j < k { j } else { usize::MAX })).collect())
    }

    /// Predicted observables for every shot, shaped like `batch.observables`.
    pub fn decode_batch(&self, batch: &ShotBatch) -> Result<BitMatrix> {
        let graph = self.graph;
        check_shape(graph, batch)?;
        let defects = batch.defects_per_shot();
        let masks: Vec<u64> = defects
            .par_iter()
            .map_init(|| Scratch::for_graph(graph.num_nodes()), |s, d| self.predict(d, s))
            .collect::<Result<_>>()?;
        let mut out = BitMatrix::zeros(graph.num_observables, batch.shots);
        for (shot, m) in masks.into_iter().enumerate() {
            for o in 0..graph.num_observables {
                if m >> o & 1 == 1 {
                    out.set(o, shot, true);
                }
            }
        }
        Ok(out)
    }

    /// Predicted observable mask for one shot, ignoring defects in
    /// components that cannot flip an observable.
    fn predict(&self, defects: &[u32], s: &mut Scratch) -> Result<u64> {
        let kept: Vec<u32> = defects.iter().copied().filter(|&d| self.relevant[d as usize]).collect();
        Ok(self.decode_with(&kept, s)?.observable_flip)
    }
}

/// Decodes one syndrome given as detector indices.
pub fn mwpm_decode(graph: &MatchingGraph, flagged: &[u32]) -> Result<Matching> {
    let syndrome = Syndrome::new(flagged.to_vec(), graph.num_detectors)?;
    MwpmDecoder::new(graph).decode(&syndrome)
}

fn check_shape(graph: &MatchingGraph, batch: &ShotBatch) -> Result<()> {
    if batch.num_detectors() != graph.num_detectors {
        return Err(Error::SizeMismatch {
            expected: graph.num_detectors,
            actual: batch.num_detectors(),
        });
    }
    if batch.num_observables() != graph.num_observables {
        return Err(Error::SizeMismatch {
            expected: graph.num_observables,
            actual: batch.num_observables(),
        });
    }
    Ok(())
}

/// Predicted observables for every shot, shaped like `batch.observables`.
/// When the graph is the union of an X half and a Z half the two share no
/// detector, so each half is matched independently and the masks XOR.
pub fn decode_batch(graph: &MatchingGraph, batch: &ShotBatch) -> Result<BitMatrix> {
    MwpmDecoder::new(graph).decode_batch(batch)
}

/// Writes one CSV row per shot: `shot,defects,pairs,weight,predicted_obs`.
pub fn write_corrections<W: Write>(graph: &MatchingGraph, batch: &ShotBatch, w: W) -> Result<()> {
    check_shape(graph, batch)?;
    let decoder = MwpmDecoder::new(graph);
    let mut scratch = Scratch::for_graph(graph.num_nodes());
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["shot", "defects", "pairs", "weight", "predicted_obs"])?;
    let boundary = graph.boundary();
    for (shot, d) in batch.defects_per_shot().iter().enumerate() {
        let m = decoder.decode_with(d, &mut scratch)?;
        let name = |n: u32| if n == boundary { "B".to_string() } else { n.to_string() };
        let defects: Vec<String> = d.iter().map(|&x| x.to_string()).collect();
        let pairs: Vec<String> = m.pairs.iter().map(|&(a, b)| format!("{}-{}", name(a), name(b))).collect();
        out.write_record([
            shot.to_string(),
            defects.join(" "),
            pairs.join(" "),
            format!("{:.6}", m.total_weight),
            m.observable_flip.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Observable mask of the most probable set of mechanisms that reproduces
/// the syndrome exactly, found by enumerating every subset.
pub fn brute_force_mle_decode(dem: &DetectorErrorModel, flagged: &[u32]) -> Result<u64> {
    let m = dem.mechanisms.len();
    if m > MAX_MLE_MECHANISMS {
        return Err(Error::Capacity(format!(
            "{m} mechanisms exceed the exhaustive limit of {MAX_MLE_MECHANISMS}"
        )));
    }
    let syndrome = Syndrome::new(flagged.to_vec(), dem.num_detectors)?;
    let words = dem.num_detectors.div_ceil(64).max(1);
    let to_bits = |dets: &[u32]| {
        let mut v = vec![0u64; words];
        for &d in dets {
            v[d as usize / 64] ^= 1 << (d % 64);
        }
        v
    };
    let target = to_bits(&syndrome.flagged);
    let flips: Vec<Vec<u64>> = dem.mechanisms.iter().map(|e| to_bits(&e.detectors)).collect();
    let log_odds: Vec<f64> = dem.mechanisms.iter().map(|e| (e.p / (1.0 - e.p)).ln()).collect();

    let mut current = vec![0u64; words];
    let mut score = 0.0;
    let mut subset = 0u32;
    let mut obs = 0u64;
    let mut best: Option<(f64, u32, u64)> = (current == target).then_some((0.0, 0, 0));
    for step in 1u32..(1u32 << m) {
        let bit = step.trailing_zeros() as usize;
        subset ^= 1 << bit;
        for (c, f) in current.iter_mut().zip(&flips[bit]) {
            *c ^= f;
        }
        obs ^= dem.mechanisms[bit].observable_mask();
        if subset >> bit & 1 == 1 {
            score += log_odds[bit];
        } else {
            score -= log_odds[bit];
        }
        if current == target {
            let better = match best {
                None => true,
                Some((s, b, _)) => score > s + 1e-12 || ((score - s).abs() <= 1e-12 && subset < b),
            };
            if better {
                best = Some((score, subset, obs));
            }
        }
    }
    best.map(|b| b.2)
        .ok_or_else(|| Error::Infeasible("no set of mechanisms reproduces the syndrome".into()))
}
