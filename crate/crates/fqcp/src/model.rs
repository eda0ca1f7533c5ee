//! Circuit geometry of the two-qubit-reset Floquet contact process.
//!
//! One period is four alternating layers of controlled-X-rotation gates
//! followed by one layer of two-qubit random resets on aligned pairs
//! `(2k, 2k+1)`. A gate rotates its target by `theta` around X when the
//! control is in |1>, so the all-zero configuration is a fixed point of the
//! whole circuit. Circuits are built over the exact causal cone of a single
//! initially-active site: a gate (or reset) is included only if its control
//! (or pair) can possibly be non-zero at that point of the evolution, which
//! makes the finite site range exact rather than an approximation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Model parameters: rotation angle, reset probability, horizon, start site.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: f64,
    pub p: f64,
    pub t_max: u32,
    pub origin: i32,
}

impl ModelParams {
    pub fn new(theta: f64, p: f64, t_max: u32) -> Self {
        Self { theta, p, t_max, origin: 0 }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.theta.is_finite() {
            return Err(ModelError::InvalidParams(format!("theta={} not finite", self.theta)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(ModelError::InvalidParams(format!("p={} outside [0,1]", self.p)));
        }
        Ok(())
    }
}

/// Probability that a gate flips its target bit in the fully-dephased limit:
/// sin^2(theta/2).
pub fn flip_prob(theta: f64) -> f64 {
    let s = (theta / 2.0).sin();
    s * s
}

/// Inclusive interval of lattice sites.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteRange {
    pub lo: i32,
    pub hi: i32,
}

impl SiteRange {
    pub fn width(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn contains(&self, s: i32) -> bool {
        (self.lo..=self.hi).contains(&s)
    }

    pub fn iter(&self) -> impl Iterator<Item = i32> {
        self.lo..=self.hi
    }
}

/// A space-time coordinate: block (or site) index and 1-based period.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpacetimePoint {
    pub r: i32,
    pub t: u32,
}

/// One controlled-rotation gate; rotation acts on `target` when `control`
/// is active.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub control: i32,
    pub target: i32,
}

pub type GateLayer = Vec<Gate>;

/// One reset slot: the aligned site pair it acts on and its space-time id.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResetSlot {
    pub pair: (i32, i32),
    pub slot: SpacetimePoint,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Period {
    pub gate_layers: [GateLayer; 4],
    pub reset_layer: Vec<ResetSlot>,
}

impl Period {
    /// Odd bonds carrying gates in layers 3/4, identified by their left
    /// site; each such bond is one interblock operation in the encoded
    /// circuit.
    pub fn inter_bonds(&self) -> Vec<i32> {
        let mut bonds: Vec<i32> = self.gate_layers[2]
            .iter()
            .chain(self.gate_layers[3].iter())
            .map(|g| g.control.min(g.target))
            .collect();
        bonds.sort_unstable();
        bonds.dedup();
        bonds
    }
}

/// Fully laid-out circuit. Immutable after construction and safe to share.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub theta: f64,
    pub origin: i32,
    /// Block-aligned hull of the causal cone; every gate and reset acts
    /// strictly inside it.
    pub site_range: SiteRange,
    /// Sites actually reachable from the origin; subset of `site_range`.
    pub cone: SiteRange,
    pub periods: Vec<Period>,
}

/// Role of each of the four gate layers within a period: control parity and
/// spreading direction. Layers 1/2 act within aligned pairs (intra-block),
/// layers 3/4 across them (inter-block).
const LAYER_RULES: [(bool, i32); 4] = [
    (true, 1),   // L1: even controls, target right
    (false, -1), // L2: odd controls, target left
    (false, 1),  // L3: odd controls, target right
    (true, -1),  // L4: even controls, target left
];

fn is_even(s: i32) -> bool {
    s.rem_euclid(2) == 0
}

/// Block index of a site: block k holds sites (2k, 2k+1).
pub fn block_of(site: i32) -> i32 {
    site.div_euclid(2)
}

/// Sites covered by block k.
pub fn block_sites(block: i32) -> (i32, i32) {
    (2 * block, 2 * block + 1)
}

/// Propagate the possibly-active set through one period, appending the
/// included gates and reset slots. `active` is indexed by `site - lo`.
fn build_period(active: &mut [bool], lo: i32, t: u32) -> Period {
    let n = active.len() as i32;
    let mut layers: [GateLayer; 4] = Default::default();
    for (li, &(even_ctrl, dir)) in LAYER_RULES.iter().enumerate() {
        let mut layer = Vec::new();
        for idx in 0..n {
            let site = lo + idx;
            if active[idx as usize] && is_even(site) == even_ctrl {
                let target = site + dir;
                let tidx = target - lo;
                assert!((0..n).contains(&tidx), "causal cone escaped working range");
                layer.push(Gate { control: site, target });
                active[tidx as usize] = true;
            }
        }
        layers[li] = layer;
    }
    let mut reset_layer = Vec::new();
    let mut k = block_of(lo);
    while 2 * k <= lo + n - 1 {
        let (a, b) = block_sites(k);
        let hit = |s: i32| (0..n).contains(&(s - lo)) && active[(s - lo) as usize];
        if hit(a) || hit(b) {
            reset_layer.push(ResetSlot { pair: (a, b), slot: SpacetimePoint { r: k, t } });
        }
        k += 1;
    }
    Period { gate_layers: layers, reset_layer }
}

/// Build the cone-restricted circuit for the given parameters.
pub fn build_circuit(params: &ModelParams) -> Result<CircuitSpec, ModelError> {
    params.validate()?;
    let t_max = params.t_max;
    // Working range: generous bound on the cone (at most 2 sites per side
    // per period), trimmed to the reachable hull afterwards.
    let slack = 2 * t_max as i32 + 2;
    let lo = params.origin - slack;
    let hi = params.origin + slack;
    let width = (hi - lo + 1) as usize;
    let mut active = vec![false; width];
    active[(params.origin - lo) as usize] = true;

    let mut periods = Vec::with_capacity(t_max as usize);
    for t in 1..=t_max {
        periods.push(build_period(&mut active, lo, t));
    }

    let mut cone_lo = params.origin;
    let mut cone_hi = params.origin;
    for (i, &a) in active.iter().enumerate() {
        if a {
            let s = lo + i as i32;
            cone_lo = cone_lo.min(s);
            cone_hi = cone_hi.max(s);
        }
    }
    let cone = SiteRange { lo: cone_lo, hi: cone_hi };
    // Reset pairs are block-aligned, so the lattice needs the full blocks
    // at both edges. With zero periods there is nothing to pad.
    let site_range = if t_max == 0 {
        cone
    } else {
        SiteRange { lo: 2 * block_of(cone_lo), hi: 2 * block_of(cone_hi) + 1 }
    };
    Ok(CircuitSpec { theta: params.theta, origin: params.origin, site_range, cone, periods })
}

/// Sites reachable from the origin after `t` periods.
pub fn causal_cone(t: u32) -> SiteRange {
    let params = ModelParams::new(0.0, 0.0, t);
    build_circuit(&params).expect("valid params").cone
}

impl CircuitSpec {
    pub fn t_max(&self) -> u32 {
        self.periods.len() as u32
    }

    /// All reset slots of the circuit, in period-major order.
    pub fn reset_slots(&self) -> Vec<SpacetimePoint> {
        self.periods
            .iter()
            .flat_map(|p| p.reset_layer.iter().map(|r| r.slot))
            .collect()
    }

    /// Number of two-qubit gates, per period.
    pub fn gate_counts(&self) -> Vec<usize> {
        self.periods
            .iter()
            .map(|p| p.gate_layers.iter().map(Vec::len).sum())
            .collect()
    }

    /// Structural invariants: gates inside range, disjoint pairs per layer,
    /// aligned reset pairs covering every touched block.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (pi, period) in self.periods.iter().enumerate() {
            for layer in &period.gate_layers {
                let mut used = std::collections::HashSet::new();
                for g in layer {
                    if !self.site_range.contains(g.control) || !self.site_range.contains(g.target)
                    {
                        return Err(ModelError::InvalidParams(format!(
                            "gate {:?} outside site range in period {}",
                            g,
                            pi + 1
                        )));
                    }
                    if !used.insert(g.control) || !used.insert(g.target) {
                        return Err(ModelError::InvalidParams(format!(
                            "overlapping gates in period {} layer",
                            pi + 1
                        )));
                    }
                }
            }
            for r in &period.reset_layer {
                if r.pair.0 != 2 * block_of(r.pair.0) || r.pair.1 != r.pair.0 + 1 {
                    return Err(ModelError::InvalidParams(format!(
                        "reset pair {:?} not aligned",
                        r.pair
                    )));
                }
                if !self.site_range.contains(r.pair.0) || !self.site_range.contains(r.pair.1) {
                    return Err(ModelError::InvalidParams(format!(
                        "reset pair {:?} outside site range",
                        r.pair
                    )));
                }
            }
        }
        Ok(())
    }
}
