//! Parameter sweeps and the statistics built on their results.

mod fit;
mod threshold;

use std::io::{Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codegen::{build, Basis, CodeSpec, Family};
use crate::decode::MwpmDecoder;
use crate::dem::{decoding_graph, extract_dem};
use crate::error::{Error, Result};
use crate::noise::{NoiseSource, NoiseSpec};
use crate::sim::{logical_error_count, sample_range, BitMatrix};

pub use fit::{
    fit_distance_scaling, fit_rounds_curve, improvement_factor, project_qubits, FitKind, FitResult, Improvement,
    Projection,
};
pub use threshold::{estimate_threshold, estimate_threshold_with, saturating_round_rate, Crossing, ThresholdEstimate};

/// CSV header of [`write_rows_csv`].
pub const CSV_COLUMNS: [&str; 11] = [
    "family", "distance", "rounds", "noise", "p_phys", "shots", "failures", "p_shot", "p_round", "stderr", "seed",
];

/// Per-round rate from a whole-experiment rate: `1 - (1 - p)^(1/rounds)`.
/// Returns 1 when `p_shot >= 1`.
pub fn per_round_rate(p_shot: f64, rounds: u32) -> f64 {
    assert!(rounds >= 1, "rounds must be positive");
    if p_shot >= 1.0 {
        return 1.0;
    }
    if p_shot <= 0.0 {
        return 0.0;
    }
    -(((1.0 - p_shot).ln() / rounds as f64).exp_m1())
}

/// Binomial standard error `sqrt(p(1-p)/n)`.
pub fn binomial_stderr(failures: u64, shots: u64) -> f64 {
    if shots == 0 {
        return 0.0;
    }
    let p = failures as f64 / shots as f64;
    (p * (1.0 - p) / shots as f64).sqrt()
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(failures: u64, shots: u64, z: f64) -> (f64, f64) {
    if shots == 0 {
        return (0.0, 1.0);
    }
    let n = shots as f64;
    let p = failures as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoundsRule {
    /// `k * d` rounds at distance `d`.
    TimesDistance(u32),
    Explicit(Vec<u32>),
}

impl Default for RoundsRule {
    fn default() -> Self {
        RoundsRule::TimesDistance(3)
    }
}

impl RoundsRule {
    pub fn rounds_for(&self, distance: u32) -> Vec<u32> {
        match self {
            RoundsRule::TimesDistance(k) => vec![k * distance],
            RoundsRule::Explicit(list) => list.clone(),
        }
    }
}

/// JSON form: a list of round counts, or a string such as `"3d"`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RoundsRepr {
    List(Vec<u32>),
    Rule(String),
}

impl Serialize for RoundsRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RoundsRule::TimesDistance(k) => RoundsRepr::Rule(format!("{k}d")),
            RoundsRule::Explicit(list) => RoundsRepr::List(list.clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RoundsRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match RoundsRepr::deserialize(d)? {
            RoundsRepr::List(list) => Ok(RoundsRule::Explicit(list)),
            RoundsRepr::Rule(text) => text
                .strip_suffix('d')
                .and_then(|k| k.parse().ok())
                .map(RoundsRule::TimesDistance)
                .ok_or_else(|| serde::de::Error::custom(format!("rounds rule '{text}' is not of the form '<k>d'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotPolicy {
    Fixed(u64),
    /// Sample until `target_failures` logical failures or `max_shots`.
    Adaptive { target_failures: u64, max_shots: u64 },
}

impl Default for ShotPolicy {
    fn default() -> Self {
        ShotPolicy::Adaptive {
            target_failures: 100,
            max_shots: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub families: Vec<Family>,
    pub distances: Vec<u32>,
    #[serde(default)]
    pub rounds: RoundsRule,
    pub noise: NoiseSource,
    pub p_grid: Vec<f64>,
    #[serde(default)]
    pub shots: ShotPolicy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub basis: Basis,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub strict: bool,
}

/// Twelve log-spaced points from `1e-4` to `5e-2`.
pub fn default_p_grid() -> Vec<f64> {
    let (lo, hi): (f64, f64) = (1e-4, 5e-2);
    (0..12).map(|i| lo * (hi / lo).powf(i as f64 / 11.0)).collect()
}

impl ExperimentSpec {
    pub fn new(families: Vec<Family>, distances: Vec<u32>, noise: NoiseSource, p_grid: Vec<f64>) -> Self {
        Self {
            families,
            distances,
            rounds: RoundsRule::default(),
            noise,
            p_grid,
            shots: ShotPolicy::default(),
            seed: 0,
            basis: Basis::Z,
            strict: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if self.families.is_empty() || self.distances.is_empty() || self.p_grid.is_empty() {
            return Err(Error::Spec("families, distances and p_grid must be nonempty".into()));
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(0.0..=0.5).contains(*p)) {
            return Err(Error::Spec(format!("physical error rate {p} outside [0, 1/2]")));
        }
        match &self.rounds {
            RoundsRule::TimesDistance(0) => return Err(Error::Spec("rounds multiplier must be positive".into())),
            RoundsRule::Explicit(list) if list.is_empty() || list.contains(&0) => {
                return Err(Error::Spec("explicit rounds must be a nonempty list of positive counts".into()))
            }
            _ => {}
        }
        match self.shots {
            ShotPolicy::Fixed(0) => return Err(Error::Spec("shot count must be positive".into())),
            ShotPolicy::Adaptive { target_failures, max_shots } if target_failures == 0 || max_shots == 0 => {
                return Err(Error::Spec("adaptive shot policy needs positive targets".into()))
            }
            _ => {}
        }
        for cell in self.cells() {
            cell.code.check()?;
        }
        Ok(())
    }

    /// Grid cells in output order: family, distance, rounds, then p.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &family in &self.families {
            for &distance in &self.distances {
                for rounds in self.rounds.rounds_for(distance) {
                    for &p in &self.p_grid {
                        let index = out.len() as u64;
                        out.push(Cell {
                            index,
                            code: CodeSpec {
                                family,
                                distance,
                                rounds,
                                basis: self.basis,
                            },
                            noise: NoiseSpec {
                                source: self.noise,
                                p,
                                strict: self.strict,
                            },
                            seed: cell_seed(self.seed, index),
                        });
                    }
                }
            }
        }
        out
    }
}

/// Seed of cell `index`: first word of the spec seed's `index`-th stream.
fn cell_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: u64,
    pub code: CodeSpec,
    pub noise: NoiseSpec,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub family: Family,
    pub distance: u32,
    pub rounds: u32,
    pub noise: NoiseSource,
    pub p_phys: f64,
    pub shots: u64,
    pub failures: u64,
    pub p_shot: f64,
    pub p_round: f64,
    pub stderr: f64,
    pub seed: u64,
    /// Why the cell failed or was flagged. Not part of the CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ResultRow {
    /// Row with the derived columns filled in from the counts.
    pub fn from_counts(cell: &Cell, shots: u64, failures: u64) -> Self {
        let p_shot = if shots == 0 { 0.0 } else { failures as f64 / shots as f64 };
        Self {
            family: cell.code.family,
            distance: cell.code.distance,
            rounds: cell.code.rounds,
            noise: cell.noise.source,
            p_phys: cell.noise.p,
            shots,
            failures,
            p_shot,
            p_round: per_round_rate(p_shot, cell.code.rounds),
            stderr: binomial_stderr(failures, shots),
            seed: cell.seed,
            note: (shots > 0 && failures == shots).then(|| "saturated: every shot failed".to_string()),
        }
    }

    pub fn is_error(&self) -> bool {
        self.shots == 0 && self.note.is_some()
    }

    /// Wilson interval on the per-round rate.
    pub fn round_interval(&self, z: f64) -> (f64, f64) {
        let (lo, hi) = wilson_interval(self.failures, self.shots, z);
        (per_round_rate(lo, self.rounds), per_round_rate(hi, self.rounds))
    }
}

/// Upper bound on a single sampling chunk, in detector bits.
const CHUNK_BITS: usize = 1 << 28;
const MIN_CHUNK: u64 = 4096;
const FIRST_CHUNK: u64 = 20_000;

/// Samples and decodes one cell. Graph construction or decoding failures
/// become a zero-shot row carrying the error.
pub fn run_cell(cell: &Cell, policy: ShotPolicy) -> ResultRow {
    match try_run_cell(cell, policy) {
        Ok(row) => row,
        Err(e) => {
            log::warn!("cell {} failed: {e}", cell.index);
            let mut row = ResultRow::from_counts(cell, 0, 0);
            row.note = Some(e.to_string());
            row
        }
    }
}

fn try_run_cell(cell: &Cell, policy: ShotPolicy) -> Result<ResultRow> {
    let circuit = cell.noise.apply(&build(&cell.code)?)?;
    let dem = extract_dem(&circuit)?;
    // Without any error mechanism nothing can fail and there is nothing to
    // match on.
    let graph = if dem.is_empty() {
        None
    } else {
        Some(decoding_graph(&dem, &cell.code.layout())?)
    };
    let decoder = graph.as_ref().map(MwpmDecoder::new);
    let max_chunk = (CHUNK_BITS / dem.num_detectors.max(1)).max(MIN_CHUNK as usize) as u64;

    let (target, cap) = match policy {
        ShotPolicy::Fixed(n) => (u64::MAX, n),
        ShotPolicy::Adaptive {
            target_failures,
            max_shots,
        } => (target_failures, max_shots),
    };
    let mut shots = 0u64;
    let mut failures = 0u64;
    while shots < cap && failures < target {
        let want = if failures == 0 {
            FIRST_CHUNK.max(shots)
        } else {
            // Enough to reach the target at the observed rate, with margin.
            let needed = ((target - failures) as f64 * shots as f64 / failures as f64 * 1.1).ceil() as u64;
            needed.clamp(MIN_CHUNK, 4 * shots.max(MIN_CHUNK))
        };
        let n = want.min(cap - shots).min(max_chunk);
        let batch = sample_range(&circuit, shots, n as usize, cell.seed)?;
        let predictions = match &decoder {
            Some(d) => d.decode_batch(&batch)?,
            None => BitMatrix::zeros(batch.num_observables(), batch.shots),
        };
        failures += logical_error_count(&batch, &predictions)? as u64;
        shots += n;
    }
    Ok(ResultRow::from_counts(cell, shots, failures))
}

/// Runs every cell of the sweep on a pool of `workers` threads (0 uses the
/// default), calling `on_row` as each row is produced.
pub fn run_sweep_streaming<F: FnMut(&ResultRow)>(spec: &ExperimentSpec, workers: usize, mut on_row: F) -> Result<Vec<ResultRow>> {
    spec.check()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    let mut rows = Vec::new();
    for cell in spec.cells() {
        let row = pool.install(|| run_cell(&cell, spec.shots));
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

pub fn run_sweep(spec: &ExperimentSpec, workers: usize) -> Result<Vec<ResultRow>> {
    run_sweep_streaming(spec, workers, |_| {})
}

fn csv_record(r: &ResultRow) -> [String; 11] {
    [
        r.family.to_string(),
        r.distance.to_string(),
        r.rounds.to_string(),
        r.noise.to_string(),
        r.p_phys.to_string(),
        r.shots.to_string(),
        r.failures.to_string(),
        r.p_shot.to_string(),
        r.p_round.to_string(),
        r.stderr.to_string(),
        r.seed.to_string(),
    ]
}

/// Streaming CSV writer for result rows.
pub struct RowWriter<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> RowWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_COLUMNS)?;
        Ok(Self { out })
    }

    pub fn write(&mut self, row: &ResultRow) -> Result<()> {
        self.out.write_record(csv_record(row))?;
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.out.into_inner().map_err(|e| Error::Io(e.to_string()))
    }
}

pub fn write_rows_csv<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut out = RowWriter::new(w)?;
    for r in rows {
        out.write(r)?;
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let text = rec.get(i).unwrap_or("");
    text.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {} value '{text}'", CSV_COLUMNS[i]),
    })
}

pub fn read_rows_csv<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut input = csv::Reader::from_reader(r);
    let header = input.headers()?.clone();
    if header.iter().ne(CSV_COLUMNS) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected columns {}", CSV_COLUMNS.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (k, rec) in input.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        rows.push(ResultRow {
            family: field(&rec, 0, line)?,
            distance: field(&rec, 1, line)?,
            rounds: field(&rec, 2, line)?,
            noise: field(&rec, 3, line)?,
            p_phys: field(&rec, 4, line)?,
            shots: field(&rec, 5, line)?,
            failures: field(&rec, 6, line)?,
            p_shot: field(&rec, 7, line)?,
            p_round: field(&rec, 8, line)?,
            stderr: field(&rec, 9, line)?,
            seed: field(&rec, 10, line)?,
            note: None,
        });
    }
    Ok(rows)
}
