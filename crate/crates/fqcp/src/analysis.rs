//! Critical-point diagnostics: effective exponents of time series, crossing
//! estimation over a reset-rate grid, and bootstrap standard errors.

use crate::rng::{SimRng, Stream};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("observable is non-positive at t={0}; effective exponent undefined")]
    NonpositiveValue(u32),
    #[error("effective-exponent curves do not cross inside the p grid")]
    NoCrossing,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("need at least two p values and two times")]
    GridTooSmall,
}

/// Effective exponent delta_O(t) of one observable series at a fixed lag.
#[derive(Clone, Debug)]
pub struct EffExpSeries {
    /// Reset rate (or other label) the series belongs to.
    pub p: f64,
    pub dt: u32,
    /// (t, delta) pairs, assigned to the left endpoint of the lag window.
    pub values: Vec<(u32, f64)>,
}

impl EffExpSeries {
    pub fn at(&self, t: u32) -> Option<f64> {
        self.values.iter().find(|&&(u, _)| u == t).map(|&(_, d)| d)
    }
}

/// Discrete logarithmic derivative
/// delta_O(t) = [log O(t+dt) - log O(t)] / [log(t+dt) - log t].
///
/// Both endpoints must be positive; a non-positive value anywhere in the
/// usable window is an error, since it usually signals an absorbed series
/// that the caller should truncate first.
pub fn effective_exponent(
    series: &BTreeMap<u32, f64>,
    dt: u32,
    p_label: f64,
) -> Result<EffExpSeries, AnalysisError> {
    assert!(dt >= 1, "lag must be at least 1");
    let mut values = Vec::new();
    for (&t, &o_t) in series.iter() {
        if t == 0 {
            continue; // log t undefined
        }
        let Some(&o_dt) = series.get(&(t + dt)) else { continue };
        if o_t <= 0.0 {
            return Err(AnalysisError::NonpositiveValue(t));
        }
        if o_dt <= 0.0 {
            return Err(AnalysisError::NonpositiveValue(t + dt));
        }
        let delta = (o_dt.ln() - o_t.ln()) / (((t + dt) as f64).ln() - (t as f64).ln());
        values.push((t, delta));
    }
    Ok(EffExpSeries { p: p_label, dt, values })
}

/// Result of a crossing search: critical-point estimate plus the exponent
/// value where the curves meet.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CrossingEstimate {
    pub p_c: f64,
    pub exponent: f64,
    /// Scatter (sample standard deviation) of the per-pair crossings.
    pub p_c_scatter: f64,
    pub exponent_scatter: f64,
    /// One (p, delta) crossing per adjacent time pair that produced one.
    pub per_pair: Vec<(f64, f64)>,
}

/// Locate the reset rate where delta(p; t1) and delta(p; t2) intersect, for
/// every adjacent pair from `times`, interpolating linearly in p between
/// grid points. The mean crossing over pairs is the p_c estimate and the
/// per-pair scatter its uncertainty.
pub fn crossing_estimate(
    curves: &[EffExpSeries],
    times: &[u32],
) -> Result<CrossingEstimate, AnalysisError> {
    if curves.len() < 2 || times.len() < 2 {
        return Err(AnalysisError::GridTooSmall);
    }
    let mut sorted: Vec<&EffExpSeries> = curves.iter().collect();
    sorted.sort_by(|a, b| a.p.total_cmp(&b.p));

    let mut per_pair = Vec::new();
    for w in times.windows(2) {
        let (t1, t2) = (w[0], w[1]);
        // delta as a function of p at the two fixed times.
        let mut pts: Vec<(f64, f64, f64)> = Vec::new();
        for c in &sorted {
            if let (Some(d1), Some(d2)) = (c.at(t1), c.at(t2)) {
                pts.push((c.p, d1, d2));
            }
        }
        if pts.len() < 2 {
            continue;
        }
        let mut crossings = Vec::new();
        for seg in pts.windows(2) {
            let (pa, d1a, d2a) = seg[0];
            let (pb, d1b, d2b) = seg[1];
            let ga = d1a - d2a;
            let gb = d1b - d2b;
            if ga == 0.0 {
                crossings.push((pa, d1a));
            } else if ga * gb < 0.0 {
                let frac = ga / (ga - gb);
                let p = pa + frac * (pb - pa);
                let delta = d1a + frac * (d1b - d1a);
                crossings.push((p, delta));
            }
        }
        if !crossings.is_empty() {
            let n = crossings.len() as f64;
            let p = crossings.iter().map(|c| c.0).sum::<f64>() / n;
            let d = crossings.iter().map(|c| c.1).sum::<f64>() / n;
            per_pair.push((p, d));
        }
    }
    if per_pair.is_empty() {
        return Err(AnalysisError::NoCrossing);
    }
    let n = per_pair.len() as f64;
    let p_c = per_pair.iter().map(|c| c.0).sum::<f64>() / n;
    let exponent = per_pair.iter().map(|c| c.1).sum::<f64>() / n;
    let scatter = |sel: fn(&(f64, f64)) -> f64, mean: f64| {
        if per_pair.len() < 2 {
            0.0
        } else {
            (per_pair.iter().map(|c| (sel(c) - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        }
    };
    Ok(CrossingEstimate {
        p_c,
        exponent,
        p_c_scatter: scatter(|c| c.0, p_c),
        exponent_scatter: scatter(|c| c.1, exponent),
        per_pair,
    })
}

/// Bootstrap standard error of a statistic over weighted samples.
///
/// Shots are resampled with replacement, values and weights jointly;
/// deterministic for a fixed seed. Pass unit weights for plain data.
pub fn bootstrap_se<F>(
    samples: &[(f64, f64)],
    statistic: F,
    resamples: u32,
    seed: u64,
) -> Result<f64, AnalysisError>
where
    F: Fn(&[(f64, f64)]) -> f64,
{
    if samples.len() < 2 {
        return Err(AnalysisError::TooFewSamples { needed: 2, got: samples.len() });
    }
    let mut rng = SimRng::new(seed, Stream::Bootstrap);
    let n = samples.len();
    let mut resampled = vec![(0.0, 0.0); n];
    let mut stats = Vec::with_capacity(resamples as usize);
    for _ in 0..resamples {
        for slot in resampled.iter_mut() {
            *slot = samples[rng.below(n as u64) as usize];
        }
        stats.push(statistic(&resampled));
    }
    let m = stats.iter().sum::<f64>() / stats.len() as f64;
    let var = stats.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (stats.len() as f64 - 1.0);
    Ok(var.sqrt())
}

/// Weighted mean with the 1/M normalization used by the reweighting
/// estimator (weights already average to one in the ideal case).
pub fn weighted_mean(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    samples.iter().map(|&(x, w)| w * x).sum::<f64>() / n
}
