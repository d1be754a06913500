//! Threshold location from the crossings of logical-rate curves.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use super::ResultRow;
use crate::error::{Error, Result};

const DEFAULT_BOOTSTRAP: usize = 200;

/// Per-round rate that saturates at 1/2 instead of 1:
/// `(1 - (1 - 2p)^(1/rounds)) / 2`. A memory experiment that has lost its
/// logical state fails half the time, whatever its length, so curves of
/// different lengths stay comparable near and above threshold.
pub fn saturating_round_rate(p_shot: f64, rounds: u32) -> f64 {
    if p_shot >= 0.5 {
        return 0.5;
    }
    if p_shot <= 0.0 {
        return 0.0;
    }
    -((1.0 - 2.0 * p_shot).ln() / rounds as f64).exp_m1() / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub small: u32,
    pub large: u32,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdEstimate {
    pub p_th: f64,
    pub crossings: Vec<Crossing>,
    /// Half-width of the central 95% bootstrap interval.
    pub uncertainty: f64,
    pub interval: [f64; 2],
    /// Resamples in which every pair of curves still crossed.
    pub bootstrap_used: usize,
}

/// Usable `(p_phys, round rate)` points of one distance, sorted by `p_phys`.
type Curve = Vec<(f64, f64)>;

fn curves(rows: &[&ResultRow], failures: &[u64]) -> BTreeMap<u32, Curve> {
    let mut out: BTreeMap<u32, Curve> = BTreeMap::new();
    for (r, &f) in rows.iter().zip(failures) {
        if f == 0 || r.shots == 0 {
            continue;
        }
        let rate = saturating_round_rate(f as f64 / r.shots as f64, r.rounds);
        out.entry(r.distance).or_default().push((r.p_phys, rate));
    }
    for c in out.values_mut() {
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

fn same_p(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Physical rate where the larger code stops being better, by linear
/// interpolation in log-log space between the bracketing grid points.
fn crossing(small: &Curve, large: &Curve) -> Option<f64> {
    let common: Vec<(f64, f64)> = small
        .iter()
        .filter_map(|&(p, rs)| {
            large
                .iter()
                .find(|&&(q, _)| same_p(p, q))
                .map(|&(_, rl)| (p.ln(), rl.ln() - rs.ln()))
        })
        .collect();
    common.windows(2).find_map(|w| {
        let ((x0, d0), (x1, d1)) = (w[0], w[1]);
        (d0 < 0.0 && d1 >= 0.0).then(|| (x0 + (x1 - x0) * (-d0) / (d1 - d0)).exp())
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn crossings_of(rows: &[&ResultRow], failures: &[u64]) -> Result<Vec<Crossing>> {
    let by_d = curves(rows, failures);
    let ds: Vec<u32> = by_d.keys().copied().collect();
    ds.windows(2)
        .map(|w| {
            crossing(&by_d[&w[0]], &by_d[&w[1]])
                .map(|p| Crossing {
                    small: w[0],
                    large: w[1],
                    p,
                })
                .ok_or(Error::NoCrossing {
                    small: w[0],
                    large: w[1],
                })
        })
        .collect()
}

pub fn estimate_threshold(rows: &[ResultRow]) -> Result<ThresholdEstimate> {
    estimate_threshold_with(rows, DEFAULT_BOOTSTRAP, 0)
}

/// Median of the adjacent-distance crossings, with a parametric bootstrap
/// that redraws every row's failure count from its binomial.
pub fn estimate_threshold_with(rows: &[ResultRow], resamples: usize, seed: u64) -> Result<ThresholdEstimate> {
    let usable: Vec<&ResultRow> = rows.iter().filter(|r| r.shots > 0).collect();
    let mut distances: Vec<u32> = usable.iter().map(|r| r.distance).collect();
    distances.sort_unstable();
    distances.dedup();
    if distances.len() < 2 {
        return Err(Error::Insufficient("threshold needs at least two distances".into()));
    }
    let failures: Vec<u64> = usable.iter().map(|r| r.failures).collect();
    let crossings = crossings_of(&usable, &failures)?;
    let p_th = median(crossings.iter().map(|c| c.p).collect());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let redrawn: Vec<u64> = usable
            .iter()
            .map(|r| {
                let p = (r.failures as f64 / r.shots as f64).clamp(0.0, 1.0);
                Binomial::new(r.shots, p).expect("valid binomial").sample(&mut rng)
            })
            .collect();
        if let Ok(c) = crossings_of(&usable, &redrawn) {
            draws.push(median(c.iter().map(|c| c.p).collect()));
        }
    }
    let interval = if draws.is_empty() {
        [p_th, p_th]
    } else {
        draws.sort_by(f64::total_cmp);
        let at = |q: f64| draws[((draws.len() - 1) as f64 * q).round() as usize];
        [at(0.025), at(0.975)]
    };
    Ok(ThresholdEstimate {
        p_th,
        crossings,
        uncertainty: (interval[1] - interval[0]) / 2.0,
        interval,
        bootstrap_used: draws.len(),
    })
}
