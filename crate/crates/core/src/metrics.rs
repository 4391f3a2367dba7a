//! Loss functions, tracking distance and empirical convergence orders.
//!
//! Every quantity is a pure function of a slice of [`StepLog`]s. The report
//! series are built with the same per-step terms summed in the same order,
//! so `r1(&logs[..k], γ)` reproduces row `k` of a report bit for bit.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector, DensityMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Kf,
    Opg,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Kf => "kf",
            Algorithm::Opg => "opg",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kf" => Ok(Algorithm::Kf),
            "opg" => Ok(Algorithm::Opg),
            other => Err(Error::config(
                "algorithms",
                format!("unknown algorithm `{other}`"),
            )),
        }
    }
}

/// Everything recorded about one estimator step at time `k`.
#[derive(Clone, Debug)]
pub struct StepLog {
    pub k: usize,
    pub p: CVector,
    /// The realized previous iterate `p_{k−1}`.
    pub p_prev: CVector,
    /// Noise estimate (ADMM only).
    pub e: Option<DVector<f64>>,
    /// Dual variable (ADMM only).
    pub lambda: Option<DVector<f64>>,
    pub p_star: CVector,
    pub e_star: DVector<f64>,
    pub b: DVector<f64>,
    pub a: Arc<CMatrix>,
    pub projection_residual: f64,
}

impl StepLog {
    /// `‖𝒜p* + e* − b‖₂`
    pub fn comparator_residual(&self) -> f64 {
        constraint_residual(&self.a, &self.p_star, &self.e_star, &self.b).norm()
    }

    fn noise(&self) -> Result<&DVector<f64>> {
        self.e
            .as_ref()
            .ok_or_else(|| Error::Contract(format!("step {} carries no noise estimate", self.k)))
    }
}

fn complexify(v: &DVector<f64>) -> CVector {
    v.map(|x| c(x, 0.0))
}

fn constraint_residual(a: &CMatrix, p: &CVector, e: &DVector<f64>, b: &DVector<f64>) -> CVector {
    a * p + complexify(e) - complexify(b)
}

/// `‖ρ* − ρ‖_F² / ‖ρ*‖_F²`
pub fn normalized_distance(rho_star: &DensityMatrix, rho: &DensityMatrix) -> Result<f64> {
    normalized_distance_vec(&rho_star.vectorized(), &rho.vectorized())
}

/// [`normalized_distance`] on vectorized states.
pub fn normalized_distance_vec(p_star: &CVector, p: &CVector) -> Result<f64> {
    if p_star.len() != p.len() {
        return Err(Error::Dimension(format!(
            "states of length {} and {}",
            p_star.len(),
            p.len()
        )));
    }
    let scale = p_star.norm_squared();
    if scale == 0.0 {
        return Err(Error::DivideByZero("reference state is zero".into()));
    }
    Ok((p_star - p).norm_squared() / scale)
}

fn ensure_nonempty(logs: &[StepLog]) -> Result<()> {
    if logs.is_empty() {
        return Err(Error::Contract("no steps logged".into()));
    }
    Ok(())
}

fn mean_of(logs: &[StepLog], term: impl Fn(&StepLog) -> Result<f64>) -> Result<f64> {
    ensure_nonempty(logs)?;
    let total = logs
        .iter()
        .try_fold(0.0, |acc, log| Ok::<_, Error>(acc + term(log)?))?;
    Ok(total / logs.len() as f64)
}

/// `(‖p_k‖ + ‖e_k‖²/2γ) − (‖p*_k‖ + ‖e*_k‖²/2γ)`
pub fn r1_term(log: &StepLog, gamma: f64) -> Result<f64> {
    let e = log.noise()?;
    let ours = log.p.norm() + e.norm_squared() / (2.0 * gamma);
    let best = log.p_star.norm() + log.e_star.norm_squared() / (2.0 * gamma);
    Ok(ours - best)
}

/// Mean objective gap with the `‖p_k‖₂` state term.
pub fn r1(logs: &[StepLog], gamma: f64) -> Result<f64> {
    mean_of(logs, |log| r1_term(log, gamma))
}

/// Like [`r1_term`] with the state term `‖p − p_{k−1}‖²` of the per-step
/// objective instead of `‖p‖`.
pub fn r1_objective_term(log: &StepLog, gamma: f64) -> Result<f64> {
    let e = log.noise()?;
    let ours = (&log.p - &log.p_prev).norm_squared() + e.norm_squared() / (2.0 * gamma);
    let best =
        (&log.p_star - &log.p_prev).norm_squared() + log.e_star.norm_squared() / (2.0 * gamma);
    Ok(ours - best)
}

pub fn r1_objective(logs: &[StepLog], gamma: f64) -> Result<f64> {
    mean_of(logs, |log| r1_objective_term(log, gamma))
}

/// `‖𝒜_k p_k + e_k − b_k‖²`
pub fn r2_term(log: &StepLog) -> Result<f64> {
    Ok(constraint_residual(&log.a, &log.p, log.noise()?, &log.b).norm_squared())
}

/// Mean squared constraint violation.
pub fn r2(logs: &[StepLog]) -> Result<f64> {
    mean_of(logs, r2_term)
}

/// `h_k(p) = ‖𝒜_k p − b_k‖²/2γ + ‖p − p_{k−1}‖²`, anchored at the realized
/// previous iterate.
pub fn h(log: &StepLog, p: &CVector, gamma: f64) -> Result<f64> {
    if log.a.ncols() != p.len() || log.a.nrows() != log.b.len() {
        return Err(Error::Contract(format!(
            "step {}: sampling matrix {:?} does not match state {} / record {}",
            log.k,
            log.a.shape(),
            p.len(),
            log.b.len()
        )));
    }
    let misfit = (&*log.a * p - complexify(&log.b)).norm_squared();
    Ok(misfit / (2.0 * gamma) + (p - &log.p_prev).norm_squared())
}

pub fn reg_term(log: &StepLog, gamma: f64) -> Result<f64> {
    Ok(h(log, &log.p, gamma)? - h(log, &log.p_star, gamma)?)
}

/// Cumulative regret `Σ [h_k(p_k) − h_k(p*_k)]`.
pub fn reg(logs: &[StepLog], gamma: f64) -> Result<f64> {
    logs.iter()
        .try_fold(0.0, |acc, log| Ok(acc + reg_term(log, gamma)?))
}

/// `Σ_{k≥2} ‖p*_k − p*_{k−1}‖²`
pub fn path_variation(logs: &[StepLog]) -> f64 {
    logs.windows(2).fold(0.0, |acc, w| {
        acc + (&w[1].p_star - &w[0].p_star).norm_squared()
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

pub const MIN_FIT_POINTS: usize = 10;

/// Least-squares slope of `log(value)` against `log(k)` over the last
/// `tail_fraction` of the series.
///
/// Nonpositive values cannot be logged; they are dropped with a warning.
pub fn fit_order(series: &[(f64, f64)], tail_fraction: f64) -> Result<OrderFit> {
    if series.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            survivors: series.len(),
            required: MIN_FIT_POINTS,
        });
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::Range(format!(
            "tail fraction {tail_fraction} outside (0, 1]"
        )));
    }
    let start = ((series.len() as f64) * (1.0 - tail_fraction)).floor() as usize;
    let tail = &series[start.min(series.len())..];
    let points: Vec<(f64, f64)> = tail
        .iter()
        .filter(|(k, v)| *k > 0.0 && *v > 0.0 && v.is_finite())
        .map(|&(k, v)| (k.ln(), v.ln()))
        .collect();
    let dropped = tail.len() - points.len();
    if dropped > 0 {
        log::warn!("fit_order: dropped {dropped} nonpositive or non-finite values");
    }
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            survivors: points.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum::<f64>();
    let sxy = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum::<f64>();
    if sxx == 0.0 {
        return Err(Error::Numeric("all fit abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>();
    let ss_tot = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum::<f64>();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(OrderFit {
        slope,
        intercept,
        r_squared,
        points_used: points.len(),
    })
}

/// `env_k = max_{j ≥ k} v_j`: the tightest nonincreasing upper envelope.
pub fn suffix_max(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    for i in (0..out.len().saturating_sub(1)).rev() {
        out[i] = out[i].max(out[i + 1]);
    }
    out
}

/// Mean over the trailing `width` values ending at each index.
pub fn trailing_mean(values: &[f64], width: usize) -> Vec<f64> {
    let width = width.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        acc += v;
        if i >= width {
            acc -= values[i - width];
        }
        out.push(acc / (i + 1).min(width) as f64);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub k: usize,
    pub d: f64,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub reg: f64,
    pub w: f64,
    pub sum_e: f64,
    pub r1_obj: Option<f64>,
}

/// Per-step metric series of one estimator run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub config_hash: String,
    pub rows: Vec<ReportRow>,
}

impl TrajectoryReport {
    pub fn build(
        algorithm: Algorithm,
        logs: &[StepLog],
        gamma: f64,
        seed: u64,
        config_hash: impl Into<String>,
    ) -> Result<Self> {
        let mut rows = Vec::with_capacity(logs.len());
        let (mut r1_acc, mut r2_acc, mut obj_acc) = (0.0, 0.0, 0.0);
        let (mut reg_acc, mut w_acc, mut e_acc) = (0.0, 0.0, 0.0);
        for (i, log) in logs.iter().enumerate() {
            let count = (i + 1) as f64;
            let has_noise = log.e.is_some();
            let (r1, r2, r1_obj) = if has_noise {
                r1_acc += r1_term(log, gamma)?;
                r2_acc += r2_term(log)?;
                obj_acc += r1_objective_term(log, gamma)?;
                (
                    Some(r1_acc / count),
                    Some(r2_acc / count),
                    Some(obj_acc / count),
                )
            } else {
                (None, None, None)
            };
            reg_acc += reg_term(log, gamma)?;
            if i > 0 {
                w_acc += (&log.p_star - &logs[i - 1].p_star).norm_squared();
            }
            e_acc += log.projection_residual;
            rows.push(ReportRow {
                k: log.k,
                d: normalized_distance_vec(&log.p_star, &log.p)?,
                r1,
                r2,
                reg: reg_acc,
                w: w_acc,
                sum_e: e_acc,
                r1_obj,
            });
        }
        let report = TrajectoryReport {
            algorithm,
            seed,
            config_hash: config_hash.into(),
            rows,
        };
        report.validate()?;
        Ok(report)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.windows(2).any(|w| w[1].k <= w[0].k) {
            return Err(Error::Contract(
                "report times are not strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.d).collect()
    }

    pub fn series(&self, value: impl Fn(&ReportRow) -> Option<f64>) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| value(r).map(|v| (r.k as f64, v)))
            .collect()
    }
}
