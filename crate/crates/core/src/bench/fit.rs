//! Regression of logical rates against distance and round count, and the
//! resource projections built on them.

use serde::Serialize;

use super::{per_round_rate, ResultRow};
use crate::codegen::Family;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// `log10(p_round) = slope * d + intercept`.
    LogLinearDistance,
    /// `p_round = intercept + slope * ln(rounds)`.
    LogarithmicRounds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub kind: FitKind,
    pub slope: f64,
    pub intercept: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub weights: Vec<f64>,
    pub residuals: Vec<f64>,
    pub notes: Vec<String>,
}

impl FitResult {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// Smallest integer distance whose fitted rate is at most `target`.
    /// `None` when the fit does not fall with distance.
    pub fn project_distance(&self, target: f64) -> Option<u32> {
        if self.kind != FitKind::LogLinearDistance || self.slope >= 0.0 || target <= 0.0 {
            return None;
        }
        let d = (target.log10() - self.intercept) / self.slope;
        Some(d.max(1.0).ceil() as u32)
    }
}

/// Weighted least squares for `y = a + b x`; returns `(b, a)`.
fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((x, y), w)| w * (x - mx) * (y - my)).sum();
    let sxx: f64 = x.iter().zip(w).map(|(x, w)| w * (x - mx) * (x - mx)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (b, my - b * mx)
}

fn distinct(xs: &[f64]) -> usize {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

fn finish(kind: FitKind, x: Vec<f64>, y: Vec<f64>, weights: Vec<f64>, notes: Vec<String>) -> FitResult {
    let (slope, intercept) = weighted_line(&x, &y, &weights);
    let residuals = x.iter().zip(&y).map(|(x, y)| y - (intercept + slope * x)).collect();
    FitResult {
        kind,
        slope,
        intercept,
        x,
        y,
        weights,
        residuals,
        notes,
    }
}

/// Variance of `log10(p_round)` propagated from the binomial variance of
/// the per-shot rate.
fn log_round_variance(r: &ResultRow) -> f64 {
    let n = r.shots as f64;
    let p = r.p_shot;
    let var_shot = p * (1.0 - p) / n;
    let rounds = r.rounds as f64;
    let slope = (1.0 - p).powf(1.0 / rounds - 1.0) / rounds;
    let sd = slope * var_shot.sqrt() / (r.p_round * std::f64::consts::LN_10);
    sd * sd
}

/// Inverse-variance weighted fit of `log10(p_round)` against distance.
/// Rows without failures, or where every shot failed, are left out.
pub fn fit_distance_scaling(rows: &[ResultRow]) -> Result<FitResult> {
    let (mut x, mut y, mut w, mut notes) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    if let Some(first) = rows.first() {
        if rows.iter().any(|r| r.p_phys != first.p_phys) {
            return Err(Error::Spec("distance fit needs rows at a single physical rate".into()));
        }
    }
    for r in rows {
        if r.failures == 0 || r.shots == 0 {
            notes.push(format!("d={} r={} excluded: no failures in {} shots", r.distance, r.rounds, r.shots));
            continue;
        }
        if r.failures == r.shots {
            notes.push(format!("d={} r={} excluded: saturated", r.distance, r.rounds));
            continue;
        }
        let var = log_round_variance(r);
        x.push(r.distance as f64);
        y.push(r.p_round.log10());
        w.push(if var > 0.0 && var.is_finite() { 1.0 / var } else { 1.0 });
    }
    if distinct(&x) < 3 {
        return Err(Error::Insufficient(format!(
            "distance fit needs three distances with failures, found {}",
            distinct(&x)
        )));
    }
    Ok(finish(FitKind::LogLinearDistance, x, y, w, notes))
}

/// Unweighted fit of `p_round = a + b ln(rounds)`.
pub fn fit_rounds_curve(rows: &[ResultRow]) -> Result<FitResult> {
    let usable: Vec<&ResultRow> = rows.iter().filter(|r| r.shots > 0).collect();
    let x: Vec<f64> = usable.iter().map(|r| (r.rounds as f64).ln()).collect();
    if distinct(&x) < 3 {
        return Err(Error::Insufficient(format!(
            "rounds fit needs three round counts, found {}",
            distinct(&x)
        )));
    }
    let y = usable.iter().map(|r| r.p_round).collect();
    let w = vec![1.0; x.len()];
    Ok(finish(FitKind::LogarithmicRounds, x, y, w, Vec::new()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    pub distance: u32,
    pub qubits: u64,
    pub rounds: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Distance needed to reach `target`, rounded up to an odd value, with the
/// family's qubit count and `3 d` rounds.
pub fn project_qubits(fit: &FitResult, family: Family, target: f64) -> Result<Projection> {
    if fit.kind != FitKind::LogLinearDistance {
        return Err(Error::Spec("qubit projection needs a distance fit".into()));
    }
    let min_d = fit.x.iter().copied().fold(f64::INFINITY, f64::min) as u32;
    let (distance, note) = if fit.predict(min_d as f64) <= target.log10() {
        (min_d, Some(format!("target already met at the smallest fitted distance {min_d}")))
    } else {
        let d = fit.project_distance(target).ok_or_else(|| {
            Error::Infeasible(format!("fitted slope {} does not fall with distance", fit.slope))
        })?;
        (if d % 2 == 0 { d + 1 } else { d }, None)
    };
    Ok(Projection {
        distance,
        qubits: family.qubits(distance),
        rounds: 3 * distance,
        note,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Improvement {
    pub distance: u32,
    pub rounds: u32,
    pub p_round: f64,
    pub factor: f64,
    /// True when no failure was seen; the factor then uses the 95% upper
    /// bound on the rate.
    pub lower_bound: bool,
}

/// `baseline_p / p_round` for every row.
pub fn improvement_factor(rows: &[ResultRow], baseline_p: f64) -> Vec<Improvement> {
    rows.iter()
        .filter(|r| r.shots > 0)
        .map(|r| {
            let (rate, lower_bound) = if r.failures == 0 {
                let upper_shot = 1.0 - 0.05f64.powf(1.0 / r.shots as f64);
                (per_round_rate(upper_shot, r.rounds), true)
            } else {
                (r.p_round, false)
            };
            Improvement {
                distance: r.distance,
                rounds: r.rounds,
                p_round: rate,
                factor: baseline_p / rate,
                lower_bound,
            }
        })
        .collect()
}
