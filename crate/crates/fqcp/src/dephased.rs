//! Monte Carlo simulation of the fully-dephased classical limit.
//!
//! In this limit every gate qubit is measured in Z right after the gate, so
//! a trajectory is a bit-string process: a gate flips its target with
//! probability sin^2(theta/2) when the control bit is 1, and each aligned
//! pair is cleared with probability p once per period. The hot loop works on
//! packed 64-bit words restricted to the active interval, which keeps
//! near-critical ensembles with millions of shots cheap.
//!
//! `exact_enumeration` is the correctness oracle: it evolves the full
//! probability distribution over bit configurations instead of sampling,
//! which is exact whenever the cone fits in one machine word.

use crate::model::{block_of, CircuitSpec, SiteRange};
use crate::observables::ObservableSeries;
use crate::rng::{shot_seed, SimRng, Stream};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DephasedError {
    #[error("enumeration budget exceeded: {0} branch evaluations")]
    BudgetExceeded(u64),
    #[error("cone width {0} exceeds one machine word; enumeration needs t <= 15")]
    ConeTooWide(usize),
}

/// One classical configuration: a bit per site over `range`.
#[derive(Clone, Debug)]
pub struct BitLattice {
    words: Vec<u64>,
    range: SiteRange,
}

impl BitLattice {
    pub fn new(range: SiteRange) -> Self {
        let words = vec![0u64; range.width().div_ceil(64)];
        Self { words, range }
    }

    pub fn range(&self) -> SiteRange {
        self.range
    }

    #[inline]
    fn pos(&self, site: i32) -> Option<(usize, u32)> {
        if !self.range.contains(site) {
            return None;
        }
        let off = (site - self.range.lo) as usize;
        Some((off >> 6, (off & 63) as u32))
    }

    #[inline]
    pub fn get(&self, site: i32) -> bool {
        match self.pos(site) {
            Some((w, b)) => (self.words[w] >> b) & 1 == 1,
            None => false,
        }
    }

    #[inline]
    pub fn set(&mut self, site: i32, value: bool) {
        if let Some((w, b)) = self.pos(site) {
            if value {
                self.words[w] |= 1 << b;
            } else {
                self.words[w] &= !(1 << b);
            }
        }
    }

    #[inline]
    fn toggle(&mut self, site: i32) {
        if let Some((w, b)) = self.pos(site) {
            self.words[w] ^= 1 << b;
        }
    }

    pub fn clear(&mut self) {
        self.words.fill(0);
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Tight interval of active sites, if any.
    pub fn active_bounds(&self) -> Option<(i32, i32)> {
        let first = self.words.iter().position(|&w| w != 0)?;
        let last = self.words.iter().rposition(|&w| w != 0)?;
        let lo = self.range.lo + (first as i32) * 64 + self.words[first].trailing_zeros() as i32;
        let hi = self.range.lo + (last as i32) * 64 + 63 - self.words[last].leading_zeros() as i32;
        Some((lo, hi))
    }

    /// Number of active sites at r >= 0.
    pub fn count_right(&self) -> u32 {
        self.sites_set().filter(|&s| s >= 0).count() as u32
    }

    pub fn sites_set(&self) -> impl Iterator<Item = i32> + '_ {
        self.words.iter().enumerate().flat_map(move |(wi, &w)| {
            let base = self.range.lo + (wi as i32) * 64;
            BitIter(w).map(move |b| base + b as i32)
        })
    }
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = u32;
    fn next(&mut self) -> Option<u32> {
        if self.0 == 0 {
            return None;
        }
        let b = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(b)
    }
}

/// Control parity and spread direction of the four gate layers.
const LAYER_RULES: [(bool, i32); 4] = [(true, 1), (false, -1), (false, 1), (true, -1)];

/// Apply the four gate layers of one period. Draws one uniform per gate
/// whose control is actually active, in ascending site order per layer,
/// which is the canonical draw order shared with the reference interpreter.
pub(crate) fn apply_gate_layers(lat: &mut BitLattice, flip: f64, rng: &mut SimRng) {
    for li in 0..4 {
        apply_single_layer(lat, li, flip, rng);
    }
}

pub(crate) fn apply_single_layer(lat: &mut BitLattice, layer: usize, flip: f64, rng: &mut SimRng) {
    {
        let (even_ctrl, dir) = LAYER_RULES[layer];
        let Some((alo, ahi)) = lat.active_bounds() else { return };
        // Controls and targets have opposite parity within one layer, so
        // in-place updates cannot disturb the control bits being scanned.
        let lo_word = ((alo - lat.range.lo) as usize) >> 6;
        let hi_word = ((ahi - lat.range.lo) as usize) >> 6;
        // Parity mask: bit b of word w holds site lo + 64w + b.
        let base_even = lat.range.lo.rem_euclid(2) == 0;
        let even_bits: u64 = 0x5555_5555_5555_5555;
        let mask = if base_even == even_ctrl { even_bits } else { !even_bits };
        for wi in lo_word..=hi_word {
            let mut bits = lat.words[wi] & mask;
            let base = lat.range.lo + (wi as i32) * 64;
            while bits != 0 {
                let b = bits.trailing_zeros();
                bits &= bits - 1;
                let control = base + b as i32;
                let target = control + dir;
                debug_assert!(lat.range.contains(target), "target escaped lattice");
                if rng.bernoulli(flip) {
                    lat.toggle(target);
                }
            }
        }
    }
}

/// Apply the aligned-pair reset layer: each pair with any active site is
/// cleared with probability p. Draws happen only for occupied pairs, in
/// ascending block order; at p = 0 the layer consumes no randomness at
/// all, so a zero-rate run draws exactly the gate stream.
pub(crate) fn apply_reset_layer(lat: &mut BitLattice, p: f64, rng: &mut SimRng) {
    if p == 0.0 {
        return;
    }
    let Some((alo, ahi)) = lat.active_bounds() else { return };
    for k in block_of(alo)..=block_of(ahi) {
        let (a, b) = (2 * k, 2 * k + 1);
        if (lat.get(a) || lat.get(b)) && rng.bernoulli(p) {
            lat.set(a, false);
            lat.set(b, false);
        }
    }
}

/// Summary of a single trajectory.
#[derive(Clone, Debug)]
pub struct ShotSummary {
    /// N_R(t) for t = 0..=t_max.
    pub nr: Vec<u16>,
    /// First period at which the lattice was all-zero, if it absorbed.
    pub absorbed_at: Option<u32>,
    pub final_lattice: BitLattice,
}

/// Run one trajectory from a single active site at the circuit origin.
pub fn run_shot(circuit: &CircuitSpec, theta: f64, p: f64, seed: u64) -> ShotSummary {
    let mut rng = SimRng::new(seed, Stream::Gates);
    let flip = crate::model::flip_prob(theta);
    let t_max = circuit.t_max();
    let mut lat = BitLattice::new(circuit.site_range);
    lat.set(circuit.origin, true);
    let mut nr = vec![0u16; t_max as usize + 1];
    nr[0] = lat.count_right() as u16;
    let mut absorbed_at = None;
    for t in 1..=t_max {
        apply_gate_layers(&mut lat, flip, &mut rng);
        apply_reset_layer(&mut lat, p, &mut rng);
        nr[t as usize] = lat.count_right() as u16;
        if lat.is_empty() {
            absorbed_at = Some(t);
            break;
        }
    }
    ShotSummary { nr, absorbed_at, final_lattice: lat }
}

#[derive(Clone)]
struct Accumulator {
    density_counts: Vec<u64>,
    nr_sum: Vec<u64>,
    nr_sq_sum: Vec<u64>,
    per_shot: Option<Vec<(u64, Vec<u16>)>>,
    width: usize,
}

impl Accumulator {
    fn new(range: SiteRange, t_max: u32, keep_shots: bool) -> Self {
        let width = range.width();
        Self {
            density_counts: vec![0u64; width * (t_max as usize + 1)],
            nr_sum: vec![0u64; t_max as usize + 1],
            nr_sq_sum: vec![0u64; t_max as usize + 1],
            per_shot: keep_shots.then(Vec::new),
            width,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.density_counts.iter_mut().zip(&other.density_counts) {
            *a += b;
        }
        for (a, b) in self.nr_sum.iter_mut().zip(&other.nr_sum) {
            *a += b;
        }
        for (a, b) in self.nr_sq_sum.iter_mut().zip(&other.nr_sq_sum) {
            *a += b;
        }
        if let (Some(mine), Some(theirs)) = (self.per_shot.as_mut(), other.per_shot) {
            mine.extend(theirs);
        }
        self
    }
}

/// Ensemble average over `shots` independent trajectories.
///
/// Accumulation is integer-count based, so the result is bit-identical for a
/// fixed base seed no matter how the shots are scheduled across threads, and
/// two runs over disjoint shot ranges merge exactly.
pub fn run_ensemble(
    circuit: &CircuitSpec,
    theta: f64,
    p: f64,
    shots: u64,
    base_seed: u64,
    keep_shots: bool,
) -> ObservableSeries {
    run_ensemble_range(circuit, theta, p, 0..shots, base_seed, keep_shots)
}

/// Same as `run_ensemble` but over an explicit shot-index range; used to
/// verify merge determinism and to split work across processes.
pub fn run_ensemble_range(
    circuit: &CircuitSpec,
    theta: f64,
    p: f64,
    shot_range: std::ops::Range<u64>,
    base_seed: u64,
    keep_shots: bool,
) -> ObservableSeries {
    let t_max = circuit.t_max();
    let range = circuit.site_range;
    let flip = crate::model::flip_prob(theta);
    let shots = shot_range.end - shot_range.start;

    let acc = shot_range
        .into_par_iter()
        .fold(
            || Accumulator::new(range, t_max, keep_shots),
            |mut acc, shot| {
                let mut rng = SimRng::new(shot_seed(base_seed, shot), Stream::Gates);
                let mut lat = BitLattice::new(range);
                lat.set(circuit.origin, true);
                let mut nr_vec = keep_shots.then(|| vec![0u16; t_max as usize + 1]);
                record_period(&mut acc, &lat, 0, nr_vec.as_deref_mut());
                for t in 1..=t_max {
                    apply_gate_layers(&mut lat, flip, &mut rng);
                    apply_reset_layer(&mut lat, p, &mut rng);
                    record_period(&mut acc, &lat, t, nr_vec.as_deref_mut());
                    if lat.is_empty() {
                        break;
                    }
                }
                if let (Some(vecs), Some(nr)) = (acc.per_shot.as_mut(), nr_vec) {
                    vecs.push((shot, nr));
                }
                acc
            },
        )
        .reduce(|| Accumulator::new(range, t_max, keep_shots), Accumulator::merge);

    finalize(acc, range, t_max, shots)
}

fn record_period(acc: &mut Accumulator, lat: &BitLattice, t: u32, nr_vec: Option<&mut [u16]>) {
    let row = t as usize * acc.width;
    let mut right = 0u64;
    for s in lat.sites_set() {
        acc.density_counts[row + (s - lat.range.lo) as usize] += 1;
        if s >= 0 {
            right += 1;
        }
    }
    acc.nr_sum[t as usize] += right;
    acc.nr_sq_sum[t as usize] += right * right;
    if let Some(nr) = nr_vec {
        nr[t as usize] = right as u16;
    }
}

fn finalize(acc: Accumulator, range: SiteRange, t_max: u32, shots: u64) -> ObservableSeries {
    let mut series = ObservableSeries::zeros(range, t_max, shots);
    let n = shots as f64;
    for (i, &c) in acc.density_counts.iter().enumerate() {
        series.density[i] = c as f64 / n;
    }
    for t in 0..=t_max as usize {
        let mean = acc.nr_sum[t] as f64 / n;
        series.n_right[t] = mean;
        if shots > 1 {
            let var = (acc.nr_sq_sum[t] as f64 / n - mean * mean) * n / (n - 1.0);
            series.n_right_se[t] = (var.max(0.0) / n).sqrt();
        }
    }
    if let Some(mut per_shot) = acc.per_shot {
        per_shot.sort_unstable_by_key(|&(i, _)| i);
        series.per_shot_nr = Some(per_shot.into_iter().map(|(_, v)| v).collect());
    }
    series
}

/// Exact expectations by evolving the full distribution over bit
/// configurations. Every stochastic event splits each configuration into
/// weighted branches; duplicates are merged so the map never exceeds
/// 2^width entries. Intended for t <= 3.
pub fn exact_enumeration(
    circuit: &CircuitSpec,
    theta: f64,
    p: f64,
    branch_budget: u64,
) -> Result<ObservableSeries, DephasedError> {
    let range = circuit.site_range;
    let width = range.width();
    if width > 64 {
        return Err(DephasedError::ConeTooWide(width));
    }
    let flip = crate::model::flip_prob(theta);
    let t_max = circuit.t_max();
    let origin_bit = (circuit.origin - range.lo) as u32;

    let mut dist: Vec<(u64, f64)> = vec![(1u64 << origin_bit, 1.0)];
    let mut branches: u64 = 0;
    let mut series = ObservableSeries::zeros(range, t_max, 0);
    record_distribution(&mut series, &dist, 0);

    for t in 1..=t_max {
        for &(even_ctrl, dir) in LAYER_RULES.iter() {
            for idx in 0..width as i32 {
                let control = range.lo + idx;
                if (control.rem_euclid(2) == 0) != even_ctrl {
                    continue;
                }
                let target = control + dir;
                if !range.contains(target) {
                    continue;
                }
                let cbit = 1u64 << idx;
                let tbit = 1u64 << (target - range.lo) as u32;
                dist = split(dist, &mut branches, branch_budget, |m| m & cbit != 0, |m| m ^ tbit, flip)?;
            }
        }
        for k in block_of(range.lo)..=block_of(range.hi) {
            let (a, b) = (2 * k, 2 * k + 1);
            if !range.contains(a) || !range.contains(b) {
                continue;
            }
            let bits = (1u64 << (a - range.lo) as u32) | (1u64 << (b - range.lo) as u32);
            dist = split(dist, &mut branches, branch_budget, |m| m & bits != 0, |m| m & !bits, p)?;
        }
        record_distribution(&mut series, &dist, t);
    }
    for t in 0..=t_max as usize {
        series.n_right[t] = series.n_right_from_density(t as u32);
    }
    Ok(series)
}

/// Branch every configuration where `applies` holds into an unchanged copy
/// (weight 1-q) and a transformed copy (weight q), then merge duplicates.
fn split(
    dist: Vec<(u64, f64)>,
    branches: &mut u64,
    budget: u64,
    applies: impl Fn(u64) -> bool,
    transform: impl Fn(u64) -> u64,
    q: f64,
) -> Result<Vec<(u64, f64)>, DephasedError> {
    let mut out: std::collections::HashMap<u64, f64> = std::collections::HashMap::new();
    for (m, w) in dist {
        if applies(m) {
            *branches += 1;
            if *branches > budget {
                return Err(DephasedError::BudgetExceeded(*branches));
            }
            if q > 0.0 {
                *out.entry(transform(m)).or_insert(0.0) += w * q;
            }
            if q < 1.0 {
                *out.entry(m).or_insert(0.0) += w * (1.0 - q);
            }
        } else {
            *out.entry(m).or_insert(0.0) += w;
        }
    }
    let mut v: Vec<(u64, f64)> = out.into_iter().collect();
    v.sort_unstable_by_key(|&(m, _)| m);
    Ok(v)
}

fn record_distribution(series: &mut ObservableSeries, dist: &[(u64, f64)], t: u32) {
    let width = series.width();
    let row = t as usize * width;
    for &(m, w) in dist {
        let mut bits = m;
        while bits != 0 {
            let b = bits.trailing_zeros();
            bits &= bits - 1;
            series.density[row + b as usize] += w;
        }
    }
}
