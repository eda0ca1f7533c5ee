//! The post-selection-free adaptive protocol: calibrate the space-time
//! detection rate with injection disabled, compute the compensating
//! injection rate so that detected and injected resets together fire with
//! the target probability everywhere, run the main ensemble, and correct
//! residual rate inhomogeneity by importance-sampling reweighting.

mod backend;

pub use backend::{
    make_backend, run_calibration, run_main, Backend, BackendKind, LogicalErrorKind,
    PhysicalBackend, PhysicalNoise, PhysicalSpec, SyntheticSpec, TrajectoryMode,
    TrajectoryOutcome,
};

use crate::model::SpacetimePoint;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AdaptiveError {
    #[error("detection rate exceeds the target at {0:?}")]
    DetectionExceedsTarget(Vec<SpacetimePoint>),
    #[error("empirical reset rate is degenerate (0 or 1) at {0:?}")]
    DegenerateRate(SpacetimePoint),
    #[error("{0} physical qubits exceed the statevector cap")]
    TooManyQubits(usize),
    #[error("no records")]
    NoRecords,
    #[error("malformed rate field row: {0}")]
    MalformedField(String),
}

/// What happened at one reset slot of one shot.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Injected,
    DetectedSx,
    DetectedSz,
    DetectedLeakage,
    DetectedGadget,
}

impl EventKind {
    pub fn is_detection(self) -> bool {
        !matches!(self, EventKind::Injected)
    }
}

/// A probability per reset slot of the circuit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RateField {
    pub values: BTreeMap<SpacetimePoint, f64>,
}

impl RateField {
    pub fn uniform(slots: &[SpacetimePoint], p: f64) -> Self {
        Self { values: slots.iter().map(|&s| (s, p)).collect() }
    }

    pub fn from_fn(slots: &[SpacetimePoint], f: impl Fn(SpacetimePoint) -> f64) -> Self {
        Self { values: slots.iter().map(|&s| (s, f(s))).collect() }
    }

    pub fn get(&self, pt: SpacetimePoint) -> f64 {
        self.values.get(&pt).copied().unwrap_or(0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.values.values().fold(0.0, |a, &b| a.max(b))
    }

    /// CSV with columns `t,r,p`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,r,p")?;
        let mut rows: Vec<_> = self.values.iter().collect();
        rows.sort_by_key(|(pt, _)| (pt.t, pt.r));
        for (pt, p) in rows {
            writeln!(w, "{},{},{}", pt.t, pt.r, p)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, AdaptiveError> {
        let mut values = BTreeMap::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| AdaptiveError::MalformedField(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with('t')) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(AdaptiveError::MalformedField(line.to_string()));
            }
            let bad = || AdaptiveError::MalformedField(line.to_string());
            let t: u32 = fields[0].parse().map_err(|_| bad())?;
            let rr: i32 = fields[1].parse().map_err(|_| bad())?;
            let p: f64 = fields[2].parse().map_err(|_| bad())?;
            values.insert(SpacetimePoint { r: rr, t }, p);
        }
        Ok(Self { values })
    }
}

/// Per-shot space-time record: every reset event with its kind, and the
/// final-period site bits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShotRecord {
    pub shot: u64,
    pub seed: u64,
    pub events: Vec<RecordedEvent>,
    /// Site -> measured bit at the final period.
    pub final_bits: BTreeMap<i32, u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    /// N_R(t) for t = 0..=t_max; simulator-side extra, not serialized.
    #[serde(skip)]
    pub nr_per_period: Vec<u16>,
}

#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct RecordedEvent {
    pub r: i32,
    pub t: u32,
    pub kind: EventKind,
}

impl ShotRecord {
    /// Reset indicator m_s(r,t): 1 iff any event fired at the point.
    pub fn reset_at(&self, pt: SpacetimePoint) -> bool {
        self.events.iter().any(|e| e.r == pt.r && e.t == pt.t)
    }

    pub fn detected_at(&self, pt: SpacetimePoint) -> bool {
        self.events
            .iter()
            .any(|e| e.r == pt.r && e.t == pt.t && e.kind.is_detection())
    }

    /// Number of active sites at r >= 0 in the final bits.
    pub fn final_n_right(&self) -> f64 {
        self.final_bits.iter().filter(|&(&r, &b)| r >= 0 && b == 1).count() as f64
    }

    pub fn to_jsonl(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    pub fn from_jsonl(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// Eq.-style injection rate: the probability that, conditioned on no
/// detection, an injected reset fires so the combined rate equals the
/// target exactly: p_inject = (p - p_detect) / (1 - p_detect).
pub fn injection_field(p_target: f64, detect: &RateField) -> Result<RateField, AdaptiveError> {
    let offending: Vec<SpacetimePoint> = detect
        .values
        .iter()
        .filter(|&(_, &d)| d > p_target)
        .map(|(&pt, _)| pt)
        .collect();
    if !offending.is_empty() {
        return Err(AdaptiveError::DetectionExceedsTarget(offending));
    }
    let values = detect
        .values
        .iter()
        .map(|(&pt, &d)| {
            let inj = if d >= 1.0 { 0.0 } else { (p_target - d) / (1.0 - d) };
            (pt, inj)
        })
        .collect();
    Ok(RateField { values })
}

/// Empirical per-point reset rate over a set of records.
pub fn empirical_rates(records: &[ShotRecord]) -> Result<RateField, AdaptiveError> {
    if records.is_empty() {
        return Err(AdaptiveError::NoRecords);
    }
    let mut counts: BTreeMap<SpacetimePoint, u64> = BTreeMap::new();
    for rec in records {
        for e in &rec.events {
            *counts.entry(SpacetimePoint { r: e.r, t: e.t }).or_insert(0) += 1;
        }
    }
    let m = records.len() as f64;
    Ok(RateField { values: counts.into_iter().map(|(pt, c)| (pt, c as f64 / m)).collect() })
}

/// Everything the reweighting pass produces.
#[derive(Clone, Debug)]
pub struct ReweightOutcome {
    /// One weight per record, in input order.
    pub weights: Vec<f64>,
    pub mean_weight: f64,
    /// (1/M) sum_s w_s m_s(r,t), the reweighted reset rate per point.
    pub reset_rate: RateField,
    /// (1/M) sum_s w_s n_s(r) over the final-period bits.
    pub final_density: BTreeMap<i32, f64>,
    /// Points whose empirical rate was degenerate and got clipped.
    pub clipped: Vec<SpacetimePoint>,
}

/// Importance-sampling reweighting: each shot receives the ratio of the
/// ideal uniform-rate Bernoulli probability of its reset pattern to the
/// empirical one, accumulated in log space over every slot in `domain`.
pub fn reweight(
    records: &[ShotRecord],
    p_target: f64,
    empirical: &RateField,
    strict: bool,
) -> Result<ReweightOutcome, AdaptiveError> {
    if records.is_empty() {
        return Err(AdaptiveError::NoRecords);
    }
    let m = records.len() as f64;
    let mut clipped = Vec::new();
    // Effective per-point rates after degeneracy handling.
    let mut rates: BTreeMap<SpacetimePoint, f64> = BTreeMap::new();
    for (&pt, &phat) in &empirical.values {
        let degenerate = (phat <= 0.0 || phat >= 1.0) && p_target > 0.0 && p_target < 1.0;
        if degenerate {
            if strict {
                return Err(AdaptiveError::DegenerateRate(pt));
            }
            clipped.push(pt);
            let bound = 1.0 / (2.0 * m);
            rates.insert(pt, phat.clamp(bound, 1.0 - bound));
        } else {
            rates.insert(pt, phat);
        }
    }

    // log w = sum over slots; the no-reset terms are shot-independent.
    let mut base_log = 0.0;
    let mut event_adjust: BTreeMap<SpacetimePoint, f64> = BTreeMap::new();
    for (&pt, &phat) in &rates {
        // exact no-op when the rates match bit-for-bit
        let miss = if p_target == phat { 0.0 } else { ((1.0 - p_target) / (1.0 - phat)).ln() };
        let hit = if p_target == phat { 0.0 } else { (p_target / phat).ln() };
        base_log += miss;
        event_adjust.insert(pt, hit - miss);
    }

    let mut weights = Vec::with_capacity(records.len());
    for rec in records {
        let mut log_w = base_log;
        for e in &rec.events {
            if let Some(adj) = event_adjust.get(&SpacetimePoint { r: e.r, t: e.t }) {
                log_w += adj;
            }
        }
        weights.push(log_w.exp());
    }
    let mean_weight = weights.iter().sum::<f64>() / m;

    let mut rate_values: BTreeMap<SpacetimePoint, f64> = rates.keys().map(|&pt| (pt, 0.0)).collect();
    let mut final_density: BTreeMap<i32, f64> = BTreeMap::new();
    for (rec, &w) in records.iter().zip(&weights) {
        for e in &rec.events {
            if let Some(v) = rate_values.get_mut(&SpacetimePoint { r: e.r, t: e.t }) {
                *v += w;
            }
        }
        for (&site, &bit) in &rec.final_bits {
            *final_density.entry(site).or_insert(0.0) += w * bit as f64;
        }
    }
    for v in rate_values.values_mut() {
        *v /= m;
    }
    for v in final_density.values_mut() {
        *v /= m;
    }

    Ok(ReweightOutcome {
        weights,
        mean_weight,
        reset_rate: RateField { values: rate_values },
        final_density,
        clipped,
    })
}
