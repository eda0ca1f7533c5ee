//! Noise backends for the adaptive protocol.
//!
//! The synthetic backend evolves the fully-dephased bit-string model and
//! draws detection events i.i.d. from configured space-time fields; it is
//! the scalable workhorse for protocol-level studies. The physical backend
//! executes the full gadget-level encoded circuit on a statevector with
//! sampled Pauli noise, feed-forward resets and stabilizer detections; it
//! is restricted to a few blocks and short horizons but is faithful down to
//! the physical instruction level.

use super::{AdaptiveError, EventKind, RateField, RecordedEvent, ShotRecord};
use crate::code422::{
    build_gadget, encoded_basis, Gadget, GadgetKind, Op, PauliKind, PauliString, StateVector,
    MAX_QUBITS,
};
use crate::dephased::{apply_gate_layers, BitLattice};
use crate::model::{block_of, block_sites, CircuitSpec, SpacetimePoint};
use crate::rng::{shot_seed, SimRng, Stream};
use rayon::prelude::*;
use std::collections::BTreeMap;

const CALIBRATION_SALT: u64 = 0x63616c6962;

/// Synthetic logical error injected into the bit-string state, emulating
/// undetectable logical X-type errors created by error spreading.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum LogicalErrorKind {
    X1,
    X2,
    X1X2,
}

/// Synthetic backend: dephased bit dynamics plus i.i.d. detection events.
#[derive(Clone, Debug, Default)]
pub struct SyntheticSpec {
    /// Detection fields checked in order; the first that fires fixes the
    /// recorded event kind.
    pub detect: Vec<(EventKind, RateField)>,
    /// Optional silent logical errors: (rate field, Pauli kind).
    pub logical_errors: Option<(RateField, LogicalErrorKind)>,
}

/// Physical noise parameters of the gadget-level backend.
#[derive(Clone, Debug, Default)]
pub struct PhysicalNoise {
    /// Depolarizing probability after each 1-qubit gate.
    pub p1: f64,
    /// Depolarizing probability after each 2-qubit gate.
    pub p2: f64,
    /// Classical flip probability on each recorded measurement bit.
    pub meas_flip: f64,
    /// Z with the given probability on every qubit of the listed blocks,
    /// right before each interblock gadget touching that block.
    pub mem_z: Vec<(i32, f64)>,
}

#[derive(Clone, Debug)]
pub struct PhysicalSpec {
    /// Inclusive block range simulated; bonds leaving it are dropped.
    pub blocks: (i32, i32),
    pub noise: PhysicalNoise,
    /// Run the stabilizer-measurement gadget at every reset slot.
    pub detections_enabled: bool,
    /// Destructively measure the logical bits at the final period.
    pub measure_final: bool,
}

#[derive(Clone, Debug)]
pub enum Backend {
    Synthetic(SyntheticSpec),
    Physical(PhysicalBackend),
}

/// Validate parameters and construct a backend.
pub fn make_backend(kind: BackendKind) -> Result<Backend, AdaptiveError> {
    match kind {
        BackendKind::Synthetic(spec) => Ok(Backend::Synthetic(spec)),
        BackendKind::Physical(spec) => Ok(Backend::Physical(PhysicalBackend::new(spec)?)),
    }
}

#[derive(Clone, Debug)]
pub enum BackendKind {
    Synthetic(SyntheticSpec),
    Physical(PhysicalSpec),
}

/// Everything one trajectory produces. `density` holds exact per-period
/// occupation expectations (branch-averaged in enumerate mode); the final
/// state is available in sample mode for diagnostics.
#[derive(Clone, Debug)]
pub struct TrajectoryOutcome {
    pub record: ShotRecord,
    pub density: Vec<BTreeMap<i32, f64>>,
    pub final_state: Option<StateVector>,
    /// Physical two-qubit gates executed (sample mode; per-branch counts
    /// coincide only when control flow is deterministic).
    pub two_qubit_gates: u64,
}

/// Calibration pass: injection disabled, detection frequency measured.
pub fn run_calibration(
    circuit: &CircuitSpec,
    backend: &Backend,
    shots: u64,
    base_seed: u64,
) -> Result<RateField, AdaptiveError> {
    let records = run_ensemble(circuit, backend, None, shots, base_seed ^ CALIBRATION_SALT)?;
    let slots = circuit.reset_slots();
    let mut counts: BTreeMap<SpacetimePoint, u64> = slots.iter().map(|&s| (s, 0)).collect();
    for rec in &records {
        for e in &rec.events {
            if e.kind.is_detection() {
                if let Some(c) = counts.get_mut(&SpacetimePoint { r: e.r, t: e.t }) {
                    *c += 1;
                }
            }
        }
    }
    Ok(RateField {
        values: counts.into_iter().map(|(pt, c)| (pt, c as f64 / shots as f64)).collect(),
    })
}

/// Main pass: detections convert to resets, injections fill the remainder.
pub fn run_main(
    circuit: &CircuitSpec,
    backend: &Backend,
    injection: &RateField,
    shots: u64,
    base_seed: u64,
) -> Result<Vec<ShotRecord>, AdaptiveError> {
    run_ensemble(circuit, backend, Some(injection), shots, base_seed)
}

fn run_ensemble(
    circuit: &CircuitSpec,
    backend: &Backend,
    injection: Option<&RateField>,
    shots: u64,
    base_seed: u64,
) -> Result<Vec<ShotRecord>, AdaptiveError> {
    if let Some(inj) = injection {
        let slots = circuit.reset_slots();
        if inj.values.len() != slots.len()
            || !slots.iter().all(|s| inj.values.contains_key(s))
        {
            return Err(AdaptiveError::MalformedField(
                "injection field domain does not match the circuit reset slots".into(),
            ));
        }
    }
    let records: Vec<ShotRecord> = (0..shots)
        .into_par_iter()
        .map(|shot| {
            let seed = shot_seed(base_seed, shot);
            match backend {
                Backend::Synthetic(spec) => synthetic_shot(circuit, spec, injection, shot, seed),
                Backend::Physical(p) => {
                    p.run_trajectory(circuit, injection, shot, seed, TrajectoryMode::Sample)
                        .record
                }
            }
        })
        .collect();
    Ok(records)
}

// ---------------------------------------------------------------- synthetic

fn synthetic_shot(
    circuit: &CircuitSpec,
    spec: &SyntheticSpec,
    injection: Option<&RateField>,
    shot: u64,
    seed: u64,
) -> ShotRecord {
    let slots = circuit.reset_slots();
    // Pre-draw one uniform per slot and per decision source, so nothing
    // about the trajectory can reorder the streams.
    let mut detect_rng = SimRng::new(seed, Stream::Detect);
    let detect_u: Vec<Vec<f64>> = slots
        .iter()
        .map(|_| spec.detect.iter().map(|_| detect_rng.uniform()).collect())
        .collect();
    let inject_u: Vec<f64> = if injection.is_some() {
        let mut rng = SimRng::new(seed, Stream::Inject);
        slots.iter().map(|_| rng.uniform()).collect()
    } else {
        Vec::new()
    };
    let logical_u: Vec<f64> = if spec.logical_errors.is_some() {
        let mut rng = SimRng::new(seed, Stream::Noise);
        slots.iter().map(|_| rng.uniform()).collect()
    } else {
        Vec::new()
    };

    let mut gates_rng = SimRng::new(seed, Stream::Gates);
    let flip = crate::model::flip_prob(circuit.theta);
    let mut lat = BitLattice::new(circuit.site_range);
    lat.set(circuit.origin, true);

    let t_max = circuit.t_max();
    let mut events = Vec::new();
    let mut nr = vec![0u16; t_max as usize + 1];
    nr[0] = lat.count_right() as u16;
    let mut slot_idx = 0usize;
    for (pi, period) in circuit.periods.iter().enumerate() {
        let t = pi as u32 + 1;
        apply_gate_layers(&mut lat, flip, &mut gates_rng);
        for r in &period.reset_layer {
            let pt = r.slot;
            debug_assert_eq!(slots[slot_idx], pt);
            // detection first, in configured field order
            let mut kind = None;
            for (fi, (k, field)) in spec.detect.iter().enumerate() {
                if detect_u[slot_idx][fi] < field.get(pt) {
                    kind = Some(*k);
                    break;
                }
            }
            // otherwise the pre-drawn injection decision
            if kind.is_none() {
                if let Some(inj) = injection {
                    if inject_u[slot_idx] < inj.get(pt) {
                        kind = Some(EventKind::Injected);
                    }
                }
            }
            if let Some(kind) = kind {
                lat.set(r.pair.0, false);
                lat.set(r.pair.1, false);
                events.push(RecordedEvent { r: pt.r, t: pt.t, kind });
            }
            // silent logical errors enter after the slot is settled
            if let Some((field, pauli)) = &spec.logical_errors {
                if logical_u[slot_idx] < field.get(pt) {
                    let (a, b) = r.pair;
                    match pauli {
                        LogicalErrorKind::X1 => lat.set(a, !lat.get(a)),
                        LogicalErrorKind::X2 => lat.set(b, !lat.get(b)),
                        LogicalErrorKind::X1X2 => {
                            lat.set(a, !lat.get(a));
                            lat.set(b, !lat.get(b));
                        }
                    }
                }
            }
            slot_idx += 1;
        }
        nr[t as usize] = lat.count_right() as u16;
    }

    let final_bits: BTreeMap<i32, u8> =
        circuit.site_range.iter().map(|s| (s, lat.get(s) as u8)).collect();
    ShotRecord { shot, seed, events, final_bits, weight: None, nr_per_period: nr }
}

// ----------------------------------------------------------------- physical

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum TrajectoryMode {
    /// One sampled trajectory; measurement outcomes drawn from the Born
    /// rule, noise drawn from the noise stream.
    Sample,
    /// Exact branch enumeration over every measurement; requires zero
    /// noise. Densities come back branch-averaged.
    Enumerate,
}

/// Gadget-level simulator of the encoded adaptive circuit.
#[derive(Clone, Debug)]
pub struct PhysicalBackend {
    spec: PhysicalSpec,
    blocks: Vec<i32>,
    n_qubits: usize,
}

struct WeightedBranch {
    probability: f64,
    state: StateVector,
}

/// The gadget library instantiated at one rotation angle.
struct GadgetSet {
    intra1: Gadget,
    intra2: Gadget,
    inter: Gadget,
    stab: Gadget,
    reset: Gadget,
    meas1: Gadget,
    meas2: Gadget,
}

impl GadgetSet {
    fn new(theta: f64) -> Self {
        Self {
            intra1: build_gadget(GadgetKind::CrxIntra { control: 1 }, Some(theta)).unwrap(),
            intra2: build_gadget(GadgetKind::CrxIntra { control: 2 }, Some(theta)).unwrap(),
            inter: build_gadget(GadgetKind::CrxInter, Some(theta)).unwrap(),
            stab: build_gadget(GadgetKind::StabMeas, None).unwrap(),
            reset: build_gadget(GadgetKind::Reset00, None).unwrap(),
            meas1: build_gadget(GadgetKind::MeasZ1, None).unwrap(),
            meas2: build_gadget(GadgetKind::MeasZ2, None).unwrap(),
        }
    }
}

impl PhysicalBackend {
    pub fn new(spec: PhysicalSpec) -> Result<Self, AdaptiveError> {
        let blocks: Vec<i32> = (spec.blocks.0..=spec.blocks.1).collect();
        let n_qubits = blocks.len() * 4 + 2;
        if n_qubits > MAX_QUBITS {
            return Err(AdaptiveError::TooManyQubits(n_qubits));
        }
        Ok(Self { blocks, n_qubits, spec })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn blocks(&self) -> &[i32] {
        &self.blocks
    }

    fn block_index(&self, block: i32) -> Option<usize> {
        self.blocks.iter().position(|&b| b == block)
    }

    /// Binding of a one-block gadget onto a block: data wires then the two
    /// shared ancillas.
    fn binding_single(&self, bi: usize) -> Vec<usize> {
        let mut map: Vec<usize> = (0..4).map(|q| bi * 4 + q).collect();
        map.push(self.blocks.len() * 4);
        map.push(self.blocks.len() * 4 + 1);
        map
    }

    /// Binding of the interblock gadget on the bond between block `left`
    /// and `left+1`: the gadget's A side is the right block (its logical
    /// qubit 1 is the bond site), the B side is the left block with wires
    /// 1 and 2 exchanged so that the gadget's B1 is the block's logical
    /// qubit 2.
    fn binding_inter(&self, bi_left: usize, bi_right: usize) -> Vec<usize> {
        let mut map = Vec::with_capacity(8);
        for q in 0..4 {
            map.push(bi_right * 4 + q); // A side
        }
        const SWAP: [usize; 4] = [0, 2, 1, 3];
        for q in 0..4 {
            map.push(bi_left * 4 + SWAP[q]); // B side, logical-swapped
        }
        map
    }

    /// Execute one full adaptive trajectory.
    pub fn run_trajectory(
        &self,
        circuit: &CircuitSpec,
        injection: Option<&RateField>,
        shot: u64,
        seed: u64,
        mode: TrajectoryMode,
    ) -> TrajectoryOutcome {
        if mode == TrajectoryMode::Enumerate {
            let n = &self.spec.noise;
            assert!(
                n.p1 == 0.0 && n.p2 == 0.0 && n.meas_flip == 0.0 && n.mem_z.is_empty(),
                "enumeration mode requires zero noise"
            );
        }
        let slots = circuit.reset_slots();
        let inject_u: Vec<f64> = if injection.is_some() {
            let mut rng = SimRng::new(seed, Stream::Inject);
            slots.iter().map(|_| rng.uniform()).collect()
        } else {
            Vec::new()
        };
        let mut noise_rng = SimRng::new(seed, Stream::Noise);
        let mut meas_rng = SimRng::new(seed, Stream::Gates);
        let gadgets = GadgetSet::new(circuit.theta);
        let mut gate_count = 0u64;

        // Initial product state: every block |00>, the origin site's block
        // carries the single excitation on its logical qubit.
        let mut init = StateVector::zero(0).unwrap();
        for &b in &self.blocks {
            let (s1, _) = block_sites(b);
            let excited = s1 == circuit.origin || s1 + 1 == circuit.origin;
            let block_state = if excited {
                encoded_basis(circuit.origin == s1, circuit.origin == s1 + 1)
            } else {
                encoded_basis(false, false)
            };
            init = init.kron(&block_state).unwrap();
        }
        init = init.kron(&StateVector::zero(2).unwrap()).unwrap();
        let mut branches = vec![WeightedBranch { probability: 1.0, state: init }];

        let t_max = circuit.t_max();
        let mut density: Vec<BTreeMap<i32, f64>> = Vec::with_capacity(t_max as usize + 1);
        density.push(self.density_snapshot(&branches));
        let mut events = Vec::new();
        let mut slot_idx = 0usize;

        for period in circuit.periods.iter() {
            // Gate layers 1,2: intra-block rotations.
            for (layer, gadget) in
                [(0usize, &gadgets.intra1), (1usize, &gadgets.intra2)]
            {
                for g in &period.gate_layers[layer] {
                    let block = block_of(g.control.min(g.target));
                    if let Some(bi) = self.block_index(block) {
                        let binding = self.binding_single(bi);
                        let bound = bind_gadget(gadget, &binding);
                        self.apply_gadget(
                            &mut branches,
                            &bound,
                            &mut noise_rng,
                            &mut meas_rng,
                            mode,
                            &mut gate_count,
                        );
                    }
                }
            }
            // Layers 3,4 pair up on odd bonds into interblock gadgets.
            for left_site in period.inter_bonds() {
                let (bl, br) = (block_of(left_site), block_of(left_site) + 1);
                let (Some(bi_left), Some(bi_right)) =
                    (self.block_index(bl), self.block_index(br))
                else {
                    continue; // bond leaves the simulated range
                };
                // Accumulated memory error before the interblock gate.
                for &(block, rate) in &self.spec.noise.mem_z {
                    if (block == bl || block == br) && rate > 0.0 {
                        if let Some(bi) = self.block_index(block) {
                            for q in 0..4 {
                                if noise_rng.bernoulli(rate) {
                                    for br in branches.iter_mut() {
                                        br.state.z(bi * 4 + q);
                                    }
                                }
                            }
                        }
                    }
                }
                let binding = self.binding_inter(bi_left, bi_right);
                let bound = bind_gadget(&gadgets.inter, &binding);
                self.apply_gadget(
                    &mut branches,
                    &bound,
                    &mut noise_rng,
                    &mut meas_rng,
                    mode,
                    &mut gate_count,
                );
            }
            // Reset slots: detection, then injection, then feed-forward.
            for r in &period.reset_layer {
                let pt = r.slot;
                let Some(bi) = self.block_index(pt.r) else {
                    slot_idx += 1;
                    continue;
                };
                let mut kind = None;
                if self.spec.detections_enabled {
                    let binding = self.binding_single(bi);
                    let bound = bind_gadget(&gadgets.stab, &binding);
                    let bits = self.apply_gadget(
                        &mut branches,
                        &bound,
                        &mut noise_rng,
                        &mut meas_rng,
                        mode,
                        &mut gate_count,
                    );
                    if bits[1] {
                        kind = Some(EventKind::DetectedSx);
                    } else if bits[0] {
                        kind = Some(EventKind::DetectedSz);
                    }
                }
                if kind.is_none() {
                    if let Some(inj) = injection {
                        if inject_u[slot_idx] < inj.get(pt) {
                            kind = Some(EventKind::Injected);
                        }
                    }
                }
                if let Some(k) = kind {
                    let binding = self.binding_single(bi);
                    let bound = bind_gadget(&gadgets.reset, &binding);
                    let bits = self.apply_gadget(
                        &mut branches,
                        &bound,
                        &mut noise_rng,
                        &mut meas_rng,
                        mode,
                        &mut gate_count,
                    );
                    // A reset that exhausted its retries is itself a
                    // detection event; it never downgrades a detection.
                    let kind = if gadgets.reset.flagged(&bits) && k == EventKind::Injected {
                        EventKind::DetectedGadget
                    } else {
                        k
                    };
                    events.push(RecordedEvent { r: pt.r, t: pt.t, kind });
                }
                slot_idx += 1;
            }
            density.push(self.density_snapshot(&branches));
        }

        // Destructive logical readout, after the exact density snapshot.
        let mut final_bits: BTreeMap<i32, u8> = BTreeMap::new();
        if self.spec.measure_final && matches!(mode, TrajectoryMode::Sample) {
            for (bi, &b) in self.blocks.iter().enumerate() {
                let (s1, s2) = block_sites(b);
                for (gadget, site) in [(&gadgets.meas1, s1), (&gadgets.meas2, s2)] {
                    let binding = self.binding_single(bi);
                    let bound = bind_gadget(gadget, &binding);
                    let bits = self.apply_gadget(
                        &mut branches,
                        &bound,
                        &mut noise_rng,
                        &mut meas_rng,
                        mode,
                        &mut gate_count,
                    );
                    final_bits.insert(site, bits[gadget.outcome_bit.unwrap()] as u8);
                }
            }
        }

        let t_len = t_max as usize;
        let nr_per_period: Vec<u16> = (0..=t_len)
            .map(|t| {
                density[t]
                    .iter()
                    .filter(|&(&s, _)| s >= 0)
                    .map(|(_, &v)| v)
                    .sum::<f64>()
                    .round() as u16
            })
            .collect();
        let final_state = match mode {
            TrajectoryMode::Sample => {
                assert_eq!(branches.len(), 1);
                Some(branches.pop().unwrap().state)
            }
            TrajectoryMode::Enumerate => None,
        };
        TrajectoryOutcome {
            record: ShotRecord {
                shot,
                seed,
                events,
                final_bits,
                weight: None,
                nr_per_period,
            },
            density,
            final_state,
            two_qubit_gates: gate_count,
        }
    }

    /// Exact occupation expectation per simulated site, branch-averaged.
    fn density_snapshot(&self, branches: &[WeightedBranch]) -> BTreeMap<i32, f64> {
        let mut out = BTreeMap::new();
        for (bi, &b) in self.blocks.iter().enumerate() {
            let (s1, s2) = block_sites(b);
            // logical Z representatives on the block's wires
            let z1 = PauliString::from_supports(0, (1 << (bi * 4)) | (1 << (bi * 4 + 2)));
            let z2 = PauliString::from_supports(0, (1 << (bi * 4)) | (1 << (bi * 4 + 1)));
            for (site, zbar) in [(s1, z1), (s2, z2)] {
                let mut acc = 0.0;
                for br in branches {
                    acc += br.probability * br.state.expect_pauli(&zbar).re;
                }
                out.insert(site, (1.0 - acc) / 2.0);
            }
        }
        out
    }

    /// Run one bound gadget over all branches. Returns the recorded bits;
    /// in enumerate mode the bits of the dominant branch (detections are
    /// deterministic in the zero-noise settings enumeration is used for).
    fn apply_gadget(
        &self,
        branches: &mut Vec<WeightedBranch>,
        bound: &BoundGadget,
        noise_rng: &mut SimRng,
        meas_rng: &mut SimRng,
        mode: TrajectoryMode,
        gate_count: &mut u64,
    ) -> Vec<bool> {
        let mut bits = vec![false; bound.n_bits];
        let mut next: Vec<WeightedBranch> = Vec::with_capacity(branches.len());
        let mut work = std::mem::take(branches);
        for inst in &bound.instructions {
            next.clear();
            let mut counted = false;
            for mut br in work.drain(..) {
                let skip = match inst.cond {
                    Some((bit, v)) => bits[bit] != v,
                    None => false,
                };
                if skip {
                    next.push(br);
                    continue;
                }
                if !counted && inst.op.arity() == 2 {
                    *gate_count += 1;
                    counted = true;
                }
                match inst.op {
                    BoundOp::Prep(q) => {
                        // reset-to-zero channel, unraveled by measurement
                        let p1 = br.state.prob_one(q);
                        match mode {
                            TrajectoryMode::Sample => {
                                let outcome = meas_rng.bernoulli(p1);
                                br.state.project(q, outcome);
                                if outcome {
                                    br.state.x(q);
                                }
                                next.push(br);
                            }
                            TrajectoryMode::Enumerate => {
                                for outcome in [false, true] {
                                    let p = if outcome { p1 } else { 1.0 - p1 };
                                    if p < 1e-12 {
                                        continue;
                                    }
                                    let mut nb = WeightedBranch {
                                        probability: br.probability * p,
                                        state: br.state.clone(),
                                    };
                                    nb.state.project(q, outcome);
                                    if outcome {
                                        nb.state.x(q);
                                    }
                                    next.push(nb);
                                }
                            }
                        }
                        continue;
                    }
                    BoundOp::H(q) => br.state.h(q),
                    BoundOp::S(q) => br.state.s_gate(q),
                    BoundOp::Sdg(q) => br.state.sdg(q),
                    BoundOp::X(q) => br.state.x(q),
                    BoundOp::Cx(c, t) => br.state.cx(c, t),
                    BoundOp::Cz(a, b) => br.state.cz(a, b),
                    BoundOp::Rxx(a, b, angle) => br.state.rxx(a, b, angle),
                    BoundOp::MeasureZ(q, bit) => {
                        let p1 = br.state.prob_one(q);
                        match mode {
                            TrajectoryMode::Sample => {
                                let outcome = meas_rng.bernoulli(p1);
                                br.state.project(q, outcome);
                                let recorded = outcome
                                    ^ (self.spec.noise.meas_flip > 0.0
                                        && noise_rng.bernoulli(self.spec.noise.meas_flip));
                                bits[bit] = recorded;
                                next.push(br);
                            }
                            TrajectoryMode::Enumerate => {
                                // Deterministic in the zero-noise regimes
                                // enumeration serves; take the dominant
                                // outcome and assert it is unambiguous.
                                let outcome = p1 > 0.5;
                                assert!(
                                    p1 < 1e-9 || p1 > 1.0 - 1e-9,
                                    "enumeration hit a random measurement (p1 = {p1})"
                                );
                                br.state.project(q, outcome);
                                bits[bit] = outcome;
                                next.push(br);
                            }
                        }
                        continue;
                    }
                }
                // depolarizing gate noise in sample mode
                if mode == TrajectoryMode::Sample {
                    match inst.op.arity() {
                        1 if self.spec.noise.p1 > 0.0 => {
                            if noise_rng.bernoulli(self.spec.noise.p1) {
                                let q = inst.op.qubits()[0];
                                let kind = [PauliKind::X, PauliKind::Y, PauliKind::Z]
                                    [noise_rng.below(3) as usize];
                                br.state.apply_pauli(&PauliString::single(q, kind));
                            }
                        }
                        2 if self.spec.noise.p2 > 0.0 => {
                            if noise_rng.bernoulli(self.spec.noise.p2) {
                                let qs = inst.op.qubits();
                                let idx = 1 + noise_rng.below(15) as usize;
                                let (ka, kb) = (idx % 4, idx / 4);
                                let mut p = PauliString::identity();
                                for (k, &q) in [(ka, &qs[0]), (kb, &qs[1])] {
                                    if let Some(kind) =
                                        [None, Some(PauliKind::X), Some(PauliKind::Y), Some(PauliKind::Z)][k]
                                    {
                                        p = p.mul(&PauliString::single(q, kind));
                                    }
                                }
                                br.state.apply_pauli(&p);
                            }
                        }
                        _ => {}
                    }
                }
                next.push(br);
            }
            std::mem::swap(&mut work, &mut next);
        }
        *branches = work;
        bits
    }
}

/// A gadget with its qubits rebound onto the global register and its
/// rotation angles instantiated.
struct BoundGadget {
    instructions: Vec<BoundInstruction>,
    n_bits: usize,
}

#[derive(Copy, Clone)]
struct BoundInstruction {
    op: BoundOp,
    cond: Option<(usize, bool)>,
}

#[derive(Copy, Clone)]
enum BoundOp {
    Prep(usize),
    H(usize),
    S(usize),
    Sdg(usize),
    X(usize),
    Cx(usize, usize),
    Cz(usize, usize),
    Rxx(usize, usize, f64),
    MeasureZ(usize, usize),
}

impl BoundOp {
    fn arity(&self) -> usize {
        match self {
            BoundOp::Cx(..) | BoundOp::Cz(..) | BoundOp::Rxx(..) => 2,
            BoundOp::MeasureZ(..) | BoundOp::Prep(..) => 0, // no gate noise
            _ => 1,
        }
    }

    fn qubits(&self) -> Vec<usize> {
        match *self {
            BoundOp::Prep(q)
            | BoundOp::H(q)
            | BoundOp::S(q)
            | BoundOp::Sdg(q)
            | BoundOp::X(q)
            | BoundOp::MeasureZ(q, _) => vec![q],
            BoundOp::Cx(a, b) | BoundOp::Cz(a, b) | BoundOp::Rxx(a, b, _) => vec![a, b],
        }
    }
}

/// Rebind a gadget's local qubits through `map` onto the global register.
fn bind_gadget(gadget: &Gadget, map: &[usize]) -> BoundGadget {
    let instructions = gadget
        .instructions
        .iter()
        .map(|inst| {
            let op = match inst.op {
                Op::Prep { q } => BoundOp::Prep(map[q]),
                Op::H { q } => BoundOp::H(map[q]),
                Op::S { q } => BoundOp::S(map[q]),
                Op::Sdg { q } => BoundOp::Sdg(map[q]),
                Op::X { q, .. } => BoundOp::X(map[q]),
                Op::Cx { control, target } => BoundOp::Cx(map[control], map[target]),
                Op::Cz { a, b } => BoundOp::Cz(map[a], map[b]),
                Op::Rxx { a, b, angle } => BoundOp::Rxx(map[a], map[b], angle),
                Op::MeasureZ { q, bit } => BoundOp::MeasureZ(map[q], bit),
            };
            BoundInstruction { op, cond: inst.cond }
        })
        .collect();
    BoundGadget { instructions, n_bits: gadget.n_bits }
}
