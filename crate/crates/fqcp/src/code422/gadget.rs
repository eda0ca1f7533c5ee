//! The [[4,2,2]] gadget library: stabilizer measurement, fault-tolerant
//! reset with repeat-until-success, logical measurements, and the
//! non-fault-tolerant controlled-rotation gadgets within and between
//! blocks. Also the gadget-level transforms: dynamical-decoupling pulse
//! insertion, the decoherence-free-subspace basis relabeling, and Clifford
//! deformation of a block.

use super::state::{StateVector, StateError, MAX_QUBITS};
use crate::rng::{SimRng, Stream};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GadgetError {
    #[error("unknown gadget kind")]
    UnknownKind,
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub enum Op {
    Prep { q: usize },
    H { q: usize },
    S { q: usize },
    Sdg { q: usize },
    /// X gate; `pulse_positive` records the +iX / -iX phase convention of a
    /// decoupling pulse (a global phase, irrelevant to simulation).
    X { q: usize, pulse_positive: bool },
    Cx { control: usize, target: usize },
    Cz { a: usize, b: usize },
    /// exp(-i angle X(a) X(b) / 2)
    Rxx { a: usize, b: usize, angle: f64 },
    MeasureZ { q: usize, bit: usize },
}

impl Op {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Op::Prep { q } | Op::H { q } | Op::S { q } | Op::Sdg { q } | Op::X { q, .. } => {
                vec![q]
            }
            Op::Cx { control, target } => vec![control, target],
            Op::Cz { a, b } | Op::Rxx { a, b, .. } => vec![a, b],
            Op::MeasureZ { q, .. } => vec![q],
        }
    }

    /// Clifford test: everything here is Clifford except XX rotations away
    /// from quarter turns.
    pub fn is_clifford(&self) -> bool {
        match *self {
            Op::Rxx { angle, .. } => {
                let turns = angle / std::f64::consts::FRAC_PI_2;
                (turns - turns.round()).abs() < 1e-9
            }
            _ => true,
        }
    }
}

/// One instruction, optionally conditioned on a classical bit value.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct Instruction {
    pub op: Op,
    pub cond: Option<(usize, bool)>,
}

impl Instruction {
    fn new(op: Op) -> Self {
        Self { op, cond: None }
    }

    fn when(op: Op, bit: usize, value: bool) -> Self {
        Self { op, cond: Some((bit, value)) }
    }
}

/// How a gadget's measurement record signals "an error was detected".
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub enum FlagRule {
    /// Any listed bit deviating from its nominal value (stabilizer
    /// measurements).
    AnyBit,
    /// All listed bits deviating (reset accepted-with-flag after exhausting
    /// its retries).
    AllBits,
    /// The two listed bits disagreeing with each other (redundant logical
    /// readout).
    Mismatch,
    /// No detection capability (bare logical gates).
    None,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum GadgetKind {
    /// Measure S_Z and S_X into two ancillas, flag-fault-tolerantly.
    StabMeas,
    /// Prepare logical |00> with a verification ancilla and one retry.
    Reset00,
    /// Measure logical Z1 via both weight-2 representatives.
    MeasZ1,
    /// Measure logical Z2 via both weight-2 representatives.
    MeasZ2,
    /// Controlled rotation within a block; `control` is logical qubit 1
    /// or 2, the other qubit is the target.
    CrxIntra { control: u8 },
    /// The symmetric interblock pair CRx(A1->B1) CRx(B1->A1).
    CrxInter,
}

/// An ordered physical-level circuit on one or two [[4,2,2]] blocks.
///
/// Data qubits come first (4 per block, block A = 0..3, block B = 4..7),
/// ancillas after. Classical bits hold measurement outcomes; all nominal
/// outcomes are 0 on valid inputs.
#[derive(Clone, Debug, Serialize)]
pub struct Gadget {
    pub kind: GadgetKind,
    pub n_qubits: usize,
    pub n_data: usize,
    pub n_bits: usize,
    pub instructions: Vec<Instruction>,
    /// Bits participating in the detection flag.
    pub flag_bits: Vec<usize>,
    pub flag_rule: FlagRule,
    /// Bit holding the logical readout, for the measurement kinds.
    pub outcome_bit: Option<usize>,
    /// Fault residuals are judged against the prepared |00> state rather
    /// than the whole code space.
    pub prep_rule: bool,
}

impl Gadget {
    pub fn blocks(&self) -> usize {
        self.n_data / 4
    }

    pub fn is_clifford(&self) -> bool {
        self.instructions.iter().all(|i| i.op.is_clifford())
    }

    /// Evaluate the detection flag against measured bits.
    pub fn flagged(&self, bits: &[bool]) -> bool {
        match self.flag_rule {
            FlagRule::AnyBit => self.flag_bits.iter().any(|&b| bits[b]),
            FlagRule::AllBits => self.flag_bits.iter().all(|&b| bits[b]),
            FlagRule::Mismatch => bits[self.flag_bits[0]] != bits[self.flag_bits[1]],
            FlagRule::None => false,
        }
    }

    /// Plain-text netlist, one instruction per line.
    pub fn netlist(&self) -> String {
        let mut out = format!(
            "# {:?}: {} qubits ({} data), {} bits\n",
            self.kind, self.n_qubits, self.n_data, self.n_bits
        );
        for (i, inst) in self.instructions.iter().enumerate() {
            let cond = match inst.cond {
                Some((bit, v)) => format!(" if b{}=={}", bit, v as u8),
                None => String::new(),
            };
            let body = match inst.op {
                Op::Prep { q } => format!("prep q{}", q),
                Op::H { q } => format!("h q{}", q),
                Op::S { q } => format!("s q{}", q),
                Op::Sdg { q } => format!("sdg q{}", q),
                Op::X { q, pulse_positive } => {
                    if pulse_positive {
                        format!("x q{}", q)
                    } else {
                        format!("x(-) q{}", q)
                    }
                }
                Op::Cx { control, target } => format!("cx q{} q{}", control, target),
                Op::Cz { a, b } => format!("cz q{} q{}", a, b),
                Op::Rxx { a, b, angle } => format!("rxx({:.6}) q{} q{}", angle, a, b),
                Op::MeasureZ { q, bit } => format!("measure q{} -> b{}", q, bit),
            };
            out.push_str(&format!("{:3}: {}{}\n", i, body, cond));
        }
        out
    }
}

/// Build one of the gadget circuits. `theta` is required for the
/// controlled-rotation kinds and ignored otherwise.
pub fn build_gadget(kind: GadgetKind, theta: Option<f64>) -> Result<Gadget, GadgetError> {
    match kind {
        GadgetKind::StabMeas => Ok(stab_meas()),
        GadgetKind::Reset00 => Ok(reset_00()),
        GadgetKind::MeasZ1 => Ok(meas_z(1)),
        GadgetKind::MeasZ2 => Ok(meas_z(2)),
        GadgetKind::CrxIntra { control } => {
            let theta = theta.ok_or(GadgetError::UnknownKind)?;
            match control {
                1 | 2 => Ok(crx_intra(control, theta)),
                _ => Err(GadgetError::UnknownKind),
            }
        }
        GadgetKind::CrxInter => {
            let theta = theta.ok_or(GadgetError::UnknownKind)?;
            Ok(crx_inter(theta))
        }
    }
}

/// Joint S_Z / S_X measurement with the z-parity and x-parity CNOTs
/// interleaved per data qubit so that ancilla hook errors always flag.
fn stab_meas() -> Gadget {
    let (anc_z, anc_x) = (4, 5);
    let instructions = vec![
        Instruction::new(Op::Prep { q: anc_z }),
        Instruction::new(Op::Prep { q: anc_x }),
        Instruction::new(Op::H { q: anc_x }),
        Instruction::new(Op::Cx { control: anc_x, target: 0 }),
        Instruction::new(Op::Cx { control: 0, target: anc_z }),
        Instruction::new(Op::Cx { control: 1, target: anc_z }),
        Instruction::new(Op::Cx { control: anc_x, target: 1 }),
        Instruction::new(Op::Cx { control: anc_x, target: 2 }),
        Instruction::new(Op::Cx { control: 2, target: anc_z }),
        Instruction::new(Op::Cx { control: 3, target: anc_z }),
        Instruction::new(Op::Cx { control: anc_x, target: 3 }),
        Instruction::new(Op::H { q: anc_x }),
        Instruction::new(Op::MeasureZ { q: anc_z, bit: 0 }),
        Instruction::new(Op::MeasureZ { q: anc_x, bit: 1 }),
    ];
    Gadget {
        kind: GadgetKind::StabMeas,
        n_qubits: 6,
        n_data: 4,
        n_bits: 2,
        instructions,
        flag_bits: vec![0, 1],
        flag_rule: FlagRule::AnyBit,
        outcome_bit: None,
        prep_rule: false,
    }
}

/// GHZ-type |00> preparation with a parity-check ancilla; one bounded
/// retry, after which the state is accepted with the flag raised.
fn reset_00() -> Gadget {
    let anc = 4;
    let mut instructions = Vec::new();
    let attempt = |cond: Option<(usize, bool)>, bit: usize, instrs: &mut Vec<Instruction>| {
        let push = |instrs: &mut Vec<Instruction>, op: Op| match cond {
            Some((b, v)) => instrs.push(Instruction::when(op, b, v)),
            None => instrs.push(Instruction::new(op)),
        };
        for q in 0..4 {
            push(instrs, Op::Prep { q });
        }
        push(instrs, Op::Prep { q: anc });
        push(instrs, Op::H { q: 1 });
        push(instrs, Op::Cx { control: 1, target: 2 });
        push(instrs, Op::Cx { control: 1, target: 0 });
        push(instrs, Op::Cx { control: 2, target: 3 });
        push(instrs, Op::Cx { control: 3, target: anc });
        push(instrs, Op::Cx { control: 0, target: anc });
        push(instrs, Op::MeasureZ { q: anc, bit });
    };
    attempt(None, 0, &mut instructions);
    attempt(Some((0, true)), 1, &mut instructions);
    Gadget {
        kind: GadgetKind::Reset00,
        n_qubits: 5,
        n_data: 4,
        n_bits: 2,
        instructions,
        flag_bits: vec![0, 1],
        flag_rule: FlagRule::AllBits,
        outcome_bit: None,
        prep_rule: true,
    }
}

/// Logical Z measurement through both weight-2 representatives; a mismatch
/// between the two ancilla readings flags an error.
fn meas_z(which: u8) -> Gadget {
    let (anc1, anc2) = (4, 5);
    // reps: Z1 -> (q1,q3) then (q2,q4); Z2 -> (q1,q2) then (q3,q4)
    let (pair1, pair2) = match which {
        1 => ([0usize, 2], [1usize, 3]),
        2 => ([0, 1], [2, 3]),
        _ => unreachable!(),
    };
    let instructions = vec![
        Instruction::new(Op::Prep { q: anc1 }),
        Instruction::new(Op::Cx { control: pair1[0], target: anc1 }),
        Instruction::new(Op::Cx { control: pair1[1], target: anc1 }),
        Instruction::new(Op::MeasureZ { q: anc1, bit: 0 }),
        Instruction::new(Op::Prep { q: anc2 }),
        Instruction::new(Op::Cx { control: pair2[0], target: anc2 }),
        Instruction::new(Op::Cx { control: pair2[1], target: anc2 }),
        Instruction::new(Op::MeasureZ { q: anc2, bit: 1 }),
    ];
    Gadget {
        kind: if which == 1 { GadgetKind::MeasZ1 } else { GadgetKind::MeasZ2 },
        n_qubits: 6,
        n_data: 4,
        n_bits: 2,
        instructions,
        flag_bits: vec![0, 1],
        flag_rule: FlagRule::Mismatch,
        outcome_bit: Some(0),
        prep_rule: false,
    }
}

/// Intra-block controlled rotation: two parallel XX half-rotations, one of
/// them conjugated by S gates so the pair composes to a rotation of the
/// target conditioned on the control being |1>.
fn crx_intra(control: u8, theta: f64) -> Gadget {
    let instructions = match control {
        2 => vec![
            Instruction::new(Op::S { q: 2 }),
            Instruction::new(Op::S { q: 3 }),
            Instruction::new(Op::Rxx { a: 0, b: 1, angle: theta / 2.0 }),
            Instruction::new(Op::Rxx { a: 2, b: 3, angle: theta / 2.0 }),
            Instruction::new(Op::Sdg { q: 2 }),
            Instruction::new(Op::Sdg { q: 3 }),
        ],
        1 => vec![
            Instruction::new(Op::Rxx { a: 0, b: 2, angle: theta / 2.0 }),
            Instruction::new(Op::S { q: 1 }),
            Instruction::new(Op::S { q: 3 }),
            Instruction::new(Op::Rxx { a: 1, b: 3, angle: theta / 2.0 }),
            Instruction::new(Op::Sdg { q: 1 }),
            Instruction::new(Op::Sdg { q: 3 }),
        ],
        _ => unreachable!(),
    };
    Gadget {
        kind: GadgetKind::CrxIntra { control },
        n_qubits: 4,
        n_data: 4,
        n_bits: 0,
        instructions,
        flag_bits: vec![],
        flag_rule: FlagRule::None,
        outcome_bit: None,
        prep_rule: false,
    }
}

/// Interblock gadget implementing CRx(A1->B1) CRx(B1->A1) out of XX
/// half-rotations and the transversal three-CZ interblock Clifford.
fn crx_inter(theta: f64) -> Gadget {
    let half = theta / 2.0;
    let czs = |v: &mut Vec<Instruction>| {
        v.push(Instruction::new(Op::Cz { a: 0, b: 4 }));
        v.push(Instruction::new(Op::Cz { a: 1, b: 6 }));
        v.push(Instruction::new(Op::Cz { a: 2, b: 5 }));
    };
    let mut instructions = vec![Instruction::new(Op::Rxx { a: 0, b: 1, angle: half })];
    czs(&mut instructions);
    instructions.push(Instruction::new(Op::Rxx { a: 0, b: 1, angle: -half }));
    instructions.push(Instruction::new(Op::Rxx { a: 4, b: 5, angle: -half }));
    czs(&mut instructions);
    instructions.push(Instruction::new(Op::Rxx { a: 4, b: 5, angle: half }));
    Gadget {
        kind: GadgetKind::CrxInter,
        n_qubits: 8,
        n_data: 8,
        n_bits: 0,
        instructions,
        flag_bits: vec![],
        flag_rule: FlagRule::None,
        outcome_bit: None,
        prep_rule: false,
    }
}

/// A fault to inject while executing a gadget: a Pauli inserted at an
/// instruction boundary (0 = before the first instruction).
#[derive(Copy, Clone, Debug)]
pub struct InjectedFault {
    pub location: usize,
    pub pauli: super::pauli::PauliString,
}

/// How measurements are resolved when executing a gadget.
#[derive(Copy, Clone, Debug)]
pub enum RunMode {
    /// Draw each outcome from the Born rule.
    Sample(u64),
    /// Keep every branch with non-negligible probability; deterministic.
    Enumerate,
}

/// One measurement branch of a gadget execution.
#[derive(Clone, Debug)]
pub struct Branch {
    pub probability: f64,
    pub bits: Vec<bool>,
    pub state: StateVector,
}

/// Execute a gadget exactly on a statevector over its data qubits,
/// injecting the given faults. Ancillas start in |0>; they are left in
/// their post-measurement states in the returned branches.
pub fn apply_gadget_statevector(
    gadget: &Gadget,
    input: &StateVector,
    faults: &[InjectedFault],
    mode: RunMode,
) -> Result<Vec<Branch>, GadgetError> {
    assert_eq!(input.n, gadget.n_data, "input must cover the data qubits");
    if gadget.n_qubits > MAX_QUBITS {
        return Err(StateError::TooManyQubits(gadget.n_qubits).into());
    }
    let ancillas = StateVector::zero(gadget.n_qubits - gadget.n_data)?;
    let full = input.kron(&ancillas)?;
    let mut rng = match mode {
        RunMode::Sample(seed) => Some(SimRng::new(seed, Stream::Noise)),
        RunMode::Enumerate => None,
    };
    let mut branches = vec![Branch {
        probability: 1.0,
        bits: vec![false; gadget.n_bits],
        state: full,
    }];

    let inject = |branches: &mut Vec<Branch>, location: usize| {
        for f in faults.iter().filter(|f| f.location == location) {
            for br in branches.iter_mut() {
                br.state.apply_pauli(&f.pauli);
            }
        }
    };

    inject(&mut branches, 0);
    for (i, inst) in gadget.instructions.iter().enumerate() {
        let mut next = Vec::with_capacity(branches.len());
        for mut br in branches {
            let skip = match inst.cond {
                Some((bit, v)) => br.bits[bit] != v,
                None => false,
            };
            if skip {
                next.push(br);
                continue;
            }
            match inst.op {
                Op::Prep { q } => {
                    // Reset-to-|0>: measure and flip, branching if needed.
                    split_measurement(&mut next, br, q, None, &mut rng, true);
                    continue;
                }
                Op::H { q } => br.state.h(q),
                Op::S { q } => br.state.s_gate(q),
                Op::Sdg { q } => br.state.sdg(q),
                Op::X { q, .. } => br.state.x(q),
                Op::Cx { control, target } => br.state.cx(control, target),
                Op::Cz { a, b } => br.state.cz(a, b),
                Op::Rxx { a, b, angle } => br.state.rxx(a, b, angle),
                Op::MeasureZ { q, bit } => {
                    split_measurement(&mut next, br, q, Some(bit), &mut rng, false);
                    continue;
                }
            }
            next.push(br);
        }
        branches = next;
        inject(&mut branches, i + 1);
    }
    Ok(branches)
}

/// Measure qubit q on a branch: either sample one outcome or split into
/// both. When `reset` is set the qubit is flipped back to |0> afterwards.
fn split_measurement(
    out: &mut Vec<Branch>,
    branch: Branch,
    q: usize,
    bit: Option<usize>,
    rng: &mut Option<SimRng>,
    reset: bool,
) {
    let p1 = branch.state.prob_one(q);
    let outcomes: Vec<bool> = match rng {
        Some(rng) => vec![rng.bernoulli(p1)],
        None => [false, true]
            .into_iter()
            .filter(|&o| if o { p1 > 1e-12 } else { 1.0 - p1 > 1e-12 })
            .collect(),
    };
    for outcome in outcomes {
        let mut br = branch.clone();
        let p = br.state.project(q, outcome);
        br.probability *= p;
        if reset && outcome {
            br.state.x(q);
        }
        if let Some(bit) = bit {
            br.bits[bit] = outcome;
        }
        out.push(br);
    }
}

/// Insert decoupling pulses: X on all four qubits of every block at each
/// listed instruction boundary, with the pulse phase alternating between
/// consecutive insertions. The logical action is unchanged because XXXX is
/// a stabilizer.
pub fn insert_dd(gadget: &Gadget, boundaries: &[usize]) -> Gadget {
    let mut sorted: Vec<usize> = boundaries.to_vec();
    sorted.sort_unstable();
    let mut out = gadget.clone();
    out.instructions.clear();
    let mut pulse_index = 0usize;
    let emit_pulse = |instructions: &mut Vec<Instruction>, idx: &mut usize| {
        let positive = *idx % 2 == 0;
        *idx += 1;
        for block in 0..gadget.blocks() {
            for q in 0..4 {
                instructions.push(Instruction::new(Op::X { q: block * 4 + q, pulse_positive: positive }));
            }
        }
    };
    for (i, inst) in gadget.instructions.iter().enumerate() {
        if sorted.contains(&i) {
            emit_pulse(&mut out.instructions, &mut pulse_index);
        }
        out.instructions.push(*inst);
    }
    if sorted.contains(&gadget.instructions.len()) {
        emit_pulse(&mut out.instructions, &mut pulse_index);
    }
    out
}

/// Relabel the logical basis by conjugating preps and measurements with
/// X2 X3 (= logical X1 X2), which moves the GHZ-type state out of the
/// reset target and into the decoherence-free |11> slot.
pub fn dfs_transform(gadget: &Gadget) -> Gadget {
    let mut out = gadget.clone();
    match gadget.kind {
        GadgetKind::Reset00 => {
            // Both attempts produce the relabeled state; appending the
            // unconditional relabel layer covers whichever branch survived.
            out.instructions.push(Instruction::new(Op::X { q: 1, pulse_positive: true }));
            out.instructions.push(Instruction::new(Op::X { q: 2, pulse_positive: true }));
        }
        GadgetKind::MeasZ1 | GadgetKind::MeasZ2 => {
            let mut pre = vec![
                Instruction::new(Op::X { q: 1, pulse_positive: true }),
                Instruction::new(Op::X { q: 2, pulse_positive: true }),
            ];
            pre.extend(out.instructions);
            out.instructions = pre;
        }
        _ => {}
    }
    out
}

/// Map an original-basis logical label to the relabeled basis: both logical
/// bits flip (old |00> becomes new |11> and so on).
pub fn dfs_relabel(label: (bool, bool)) -> (bool, bool) {
    (!label.0, !label.1)
}

#[cfg(test)]
mod tests {
    use super::super::pauli::{PauliKind, PauliString};
    use super::super::state::{encode_state, encoded_basis, StateVector};
    use super::*;
    use num_complex::Complex64;

    const C0: Complex64 = Complex64::new(0.0, 0.0);
    const THETA: f64 = 3.0 * std::f64::consts::FRAC_PI_4;

    fn random_logical(rng: &mut SimRng) -> [Complex64; 4] {
        let mut v = [C0; 4];
        let mut norm = 0.0;
        for a in v.iter_mut() {
            *a = Complex64::new(rng.normal(), rng.normal());
            norm += a.norm_sqr();
        }
        for a in v.iter_mut() {
            *a /= norm.sqrt();
        }
        v
    }

    fn single_branch(branches: Vec<Branch>) -> Branch {
        let mut live: Vec<Branch> =
            branches.into_iter().filter(|b| b.probability > 1e-9).collect();
        assert_eq!(live.len(), 1, "expected a deterministic outcome");
        live.pop().unwrap()
    }

    /// Project the data qubits out of a full-register branch, checking the
    /// ancillas are in a product state.
    fn data_state(branch: &Branch, n_data: usize) -> StateVector {
        let n_anc = branch.state.n - n_data;
        let dim = 1usize << n_data;
        // ancilla register is in a computational state after measurement
        let mut anc_idx = None;
        for i in 0..(1usize << branch.state.n) {
            if branch.state.amps[i].norm() > 1e-9 {
                let hi = i >> n_data;
                match anc_idx {
                    None => anc_idx = Some(hi),
                    Some(prev) => assert_eq!(prev, hi, "ancillas entangled with data"),
                }
            }
        }
        let hi = anc_idx.unwrap_or(0) << n_data;
        let amps: Vec<Complex64> = (0..dim).map(|i| branch.state.amps[hi | i]).collect();
        let _ = n_anc;
        StateVector { n: n_data, amps }
    }

    #[test]
    fn stab_meas_is_transparent_on_code_states() {
        let mut rng = SimRng::new(11, Stream::Noise);
        let g = build_gadget(GadgetKind::StabMeas, None).unwrap();
        for _ in 0..5 {
            let input = encode_state(&random_logical(&mut rng)).unwrap();
            let br = single_branch(
                apply_gadget_statevector(&g, &input, &[], RunMode::Enumerate).unwrap(),
            );
            assert_eq!(br.bits, vec![false, false], "both ancilla outcomes 0");
            let out = data_state(&br, 4);
            assert!(
                (out.overlap(&input) - 1.0).abs() < 1e-10,
                "post-state equals input"
            );
        }
    }

    #[test]
    fn stab_meas_detects_entry_fault() {
        let g = build_gadget(GadgetKind::StabMeas, None).unwrap();
        let input = encoded_basis(false, false);
        let fault = InjectedFault { location: 0, pauli: PauliString::single(0, PauliKind::X) };
        let br = single_branch(
            apply_gadget_statevector(&g, &input, &[fault], RunMode::Enumerate).unwrap(),
        );
        // X1 anticommutes with S_Z: the z-syndrome bit flips.
        assert_eq!(br.bits[0], true);
        assert!(g.flagged(&br.bits));
    }

    #[test]
    fn reset_produces_logical_zero_from_garbage() {
        let g = build_gadget(GadgetKind::Reset00, None).unwrap();
        // Garbage input: some arbitrary product state.
        let mut garbage = StateVector::zero(4).unwrap();
        garbage.x(1);
        garbage.h(2);
        garbage.x(3);
        let target = encoded_basis(false, false);
        let branches = apply_gadget_statevector(&g, &garbage, &[], RunMode::Enumerate).unwrap();
        let mut total_p = 0.0;
        for br in branches.iter().filter(|b| b.probability > 1e-9) {
            // With no faults the parity check always accepts.
            assert_eq!(br.bits, vec![false, false]);
            let out = data_state(br, 4);
            assert!((out.overlap(&target) - 1.0).abs() < 1e-10);
            total_p += br.probability;
        }
        assert!((total_p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn meas_gadgets_read_logical_values() {
        for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
            let input = encoded_basis(a, b);
            for (kind, expect) in [(GadgetKind::MeasZ1, a), (GadgetKind::MeasZ2, b)] {
                let g = build_gadget(kind, None).unwrap();
                let br = single_branch(
                    apply_gadget_statevector(&g, &input, &[], RunMode::Enumerate).unwrap(),
                );
                assert_eq!(br.bits[0], expect, "{:?} on ({},{})", kind, a, b);
                assert_eq!(br.bits[0], br.bits[1], "both representatives agree");
                assert!(!g.flagged(&br.bits));
            }
        }
    }

    /// The logical controlled rotation conditioned on |1>:
    /// |c t> basis (c = control logical, t = target logical).
    fn logical_crx_matrix(theta: f64) -> [[Complex64; 4]; 4] {
        let c = Complex64::new((theta / 2.0).cos(), 0.0);
        let mis = Complex64::new(0.0, -(theta / 2.0).sin());
        let one = Complex64::new(1.0, 0.0);
        // index = c + 2t
        let mut m = [[C0; 4]; 4];
        m[0][0] = one; // |c=0,t=0>
        m[2][2] = one; // |c=0,t=1>
        m[1][1] = c;
        m[3][1] = mis;
        m[1][3] = mis;
        m[3][3] = c;
        m
    }

    /// Extract the logical action of an intra-block gadget as a 4x4 matrix
    /// in the (q1, q2) logical basis, fixing the global phase via the
    /// largest matrix element.
    fn intra_logical_matrix(g: &Gadget) -> [[Complex64; 4]; 4] {
        let mut m = [[C0; 4]; 4];
        for col in 0..4 {
            let input = encoded_basis(col & 1 == 1, col & 2 == 2);
            let br = single_branch(
                apply_gadget_statevector(g, &input, &[], RunMode::Enumerate).unwrap(),
            );
            let out = data_state(&br, 4);
            let (decoded, residual) = super::super::state::decode_state(&out);
            assert!(residual < 1e-10, "gadget left the code space");
            for row in 0..4 {
                m[row][col] = decoded[row];
            }
        }
        m
    }

    fn assert_matrices_equal_up_to_phase(a: &[[Complex64; 4]; 4], b: &[[Complex64; 4]; 4]) {
        // find the largest element of b to fix the phase
        let mut best = (0, 0);
        let mut best_norm = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                if b[r][c].norm() > best_norm {
                    best_norm = b[r][c].norm();
                    best = (r, c);
                }
            }
        }
        let phase = a[best.0][best.1] / b[best.0][best.1];
        assert!((phase.norm() - 1.0).abs() < 1e-9, "not a pure phase: {}", phase);
        for r in 0..4 {
            for c in 0..4 {
                assert!(
                    (a[r][c] - phase * b[r][c]).norm() < 1e-10,
                    "entry ({r},{c}): {} vs {}",
                    a[r][c],
                    phase * b[r][c]
                );
            }
        }
    }

    #[test]
    fn crx_intra_control2_matches_logical_matrix() {
        let g = build_gadget(GadgetKind::CrxIntra { control: 2 }, Some(THETA)).unwrap();
        let got = intra_logical_matrix(&g);
        // control = logical qubit 2, target = logical qubit 1:
        // logical index is q1 + 2 q2, so (c, t) = (q2, q1).
        let m = logical_crx_matrix(THETA);
        let mut expect = [[C0; 4]; 4];
        for q1_out in 0..2 {
            for q2_out in 0..2 {
                for q1_in in 0..2 {
                    for q2_in in 0..2 {
                        expect[q1_out + 2 * q2_out][q1_in + 2 * q2_in] =
                            m[q2_out + 2 * q1_out][q2_in + 2 * q1_in];
                    }
                }
            }
        }
        assert_matrices_equal_up_to_phase(&got, &expect);
    }

    #[test]
    fn crx_intra_control1_matches_logical_matrix() {
        let g = build_gadget(GadgetKind::CrxIntra { control: 1 }, Some(THETA)).unwrap();
        let got = intra_logical_matrix(&g);
        // control = logical qubit 1, target = logical qubit 2: (c,t)=(q1,q2)
        let expect = logical_crx_matrix(THETA);
        assert_matrices_equal_up_to_phase(&got, &expect);
    }

    #[test]
    fn crx_inter_is_clifford_at_pi() {
        let g = build_gadget(GadgetKind::CrxInter, Some(std::f64::consts::PI)).unwrap();
        assert!(g.is_clifford());
        let g = build_gadget(GadgetKind::CrxInter, Some(THETA)).unwrap();
        assert!(!g.is_clifford());
    }

    /// Two-block encoded input, logical (A1,A2,B1,B2); the inter gadget
    /// must act as CRx(A1->B1) CRx(B1->A1) with CRx(B1->A1) applied first.
    #[test]
    fn crx_inter_matches_logical_pair() {
        let theta = THETA;
        let g = build_gadget(GadgetKind::CrxInter, Some(theta)).unwrap();
        let mut rng = SimRng::new(3, Stream::Noise);
        for _ in 0..4 {
            let la = random_logical(&mut rng);
            let lb = random_logical(&mut rng);
            let ea = encode_state(&la).unwrap();
            let eb = encode_state(&lb).unwrap();
            let input = ea.kron(&eb).unwrap();
            let br = single_branch(
                apply_gadget_statevector(&g, &input, &[], RunMode::Enumerate).unwrap(),
            );
            let out = &br.state;

            // Build the expected state by applying the logical pair to the
            // 4-qubit logical state, then encoding.
            // logical register: (A1, A2, B1, B2) little-endian
            let mut logical = vec![C0; 16];
            for (ia, &ca) in la.iter().enumerate() {
                for (ib, &cb) in lb.iter().enumerate() {
                    logical[ia | (ib << 2)] = ca * cb;
                }
            }
            let crx = |amps: &mut Vec<Complex64>, control: usize, target: usize| {
                let cbit = 1usize << control;
                let tbit = 1usize << target;
                let cos = Complex64::new((theta / 2.0).cos(), 0.0);
                let mis = Complex64::new(0.0, -(theta / 2.0).sin());
                for i in 0..amps.len() {
                    if i & cbit != 0 && i & tbit == 0 {
                        let j = i | tbit;
                        let (vi, vj) = (amps[i], amps[j]);
                        amps[i] = cos * vi + mis * vj;
                        amps[j] = mis * vi + cos * vj;
                    }
                }
            };
            // (CRx_{A1,B1})(CRx_{B1,A1}): rightmost factor acts first.
            crx(&mut logical, 2, 0); // control B1 (bit 2), target A1 (bit 0)
            crx(&mut logical, 0, 2); // control A1, target B1

            let mut expect_amps = vec![C0; 1 << 8];
            for idx in 0..16 {
                if logical[idx] == C0 {
                    continue;
                }
                let a_part = encode_state(&{
                    let mut l = [C0; 4];
                    l[idx & 3] = Complex64::new(1.0, 0.0);
                    l
                })
                .unwrap();
                let b_part = encode_state(&{
                    let mut l = [C0; 4];
                    l[idx >> 2] = Complex64::new(1.0, 0.0);
                    l
                })
                .unwrap();
                let prod = a_part.kron(&b_part).unwrap();
                for (i, &v) in prod.amps.iter().enumerate() {
                    expect_amps[i] += logical[idx] * v;
                }
            }
            let expect = StateVector { n: 8, amps: expect_amps };
            let overlap = out.overlap(&expect);
            assert!((overlap - 1.0).abs() < 1e-10, "overlap {}", overlap);
        }
    }

    #[test]
    fn xxxx_fixes_every_encoded_state() {
        for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
            let mut st = encoded_basis(a, b);
            let before = st.clone();
            for q in 0..4 {
                st.x(q);
            }
            assert!((st.overlap(&before) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn double_pulse_is_identity() {
        let g = build_gadget(GadgetKind::CrxIntra { control: 1 }, Some(THETA)).unwrap();
        let with_dd = insert_dd(&g, &[0, 0]);
        // two insertions at the same boundary: X^2 = I per qubit
        let mut rng = SimRng::new(9, Stream::Noise);
        let input = encode_state(&random_logical(&mut rng)).unwrap();
        let a = single_branch(
            apply_gadget_statevector(&g, &input, &[], RunMode::Enumerate).unwrap(),
        );
        let b = single_branch(
            apply_gadget_statevector(&with_dd, &input, &[], RunMode::Enumerate).unwrap(),
        );
        assert!((a.state.overlap(&b.state) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dd_insertion_preserves_logical_action() {
        // Pulses go at logical-operation boundaries, where the state is in
        // the code space and X X X X acts as the stabilizer. (Interleaving
        // them inside a gadget's S-conjugated sections would not be
        // transparent, which is why the backend inserts them between
        // gadgets.)
        let mut rng = SimRng::new(13, Stream::Noise);
        for kind in [
            GadgetKind::CrxIntra { control: 1 },
            GadgetKind::CrxIntra { control: 2 },
            GadgetKind::CrxInter,
        ] {
            let g = build_gadget(kind, Some(THETA)).unwrap();
            let boundaries: Vec<usize> = vec![0, g.instructions.len()];
            let with_dd = insert_dd(&g, &boundaries);
            let input = match kind {
                GadgetKind::CrxInter => {
                    let ea = encode_state(&random_logical(&mut rng)).unwrap();
                    let eb = encode_state(&random_logical(&mut rng)).unwrap();
                    ea.kron(&eb).unwrap()
                }
                _ => encode_state(&random_logical(&mut rng)).unwrap(),
            };
            let a = single_branch(
                apply_gadget_statevector(&g, &input, &[], RunMode::Enumerate).unwrap(),
            );
            let b = single_branch(
                apply_gadget_statevector(&with_dd, &input, &[], RunMode::Enumerate).unwrap(),
            );
            assert!(
                (a.state.overlap(&b.state) - 1.0).abs() < 1e-10,
                "{:?}: decoupling changed the logical output",
                kind
            );
        }
    }

    #[test]
    fn dd_pulse_phases_alternate() {
        let g = build_gadget(GadgetKind::StabMeas, None).unwrap();
        let with_dd = insert_dd(&g, &[0, 4, 8]);
        let pulses: Vec<bool> = with_dd
            .instructions
            .iter()
            .filter_map(|i| match i.op {
                Op::X { pulse_positive, .. } => Some(pulse_positive),
                _ => None,
            })
            .collect();
        assert_eq!(pulses.len(), 12);
        assert!(pulses[0..4].iter().all(|&p| p));
        assert!(pulses[4..8].iter().all(|&p| !p));
        assert!(pulses[8..12].iter().all(|&p| p));
    }

    #[test]
    fn dfs_relabeled_reset_prepares_new_zero() {
        // In the relabeled basis the reset target is the old |11>:
        // physically (|0110> + |1001>)/sqrt(2), a decoherence-free state.
        let g = dfs_transform(&build_gadget(GadgetKind::Reset00, None).unwrap());
        let garbage = StateVector::zero(4).unwrap();
        let branches = apply_gadget_statevector(&g, &garbage, &[], RunMode::Enumerate).unwrap();
        let target = encoded_basis(true, true);
        for br in branches.iter().filter(|b| b.probability > 1e-9) {
            let out = data_state(br, 4);
            assert!((out.overlap(&target) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dfs_relabel_map() {
        assert_eq!(dfs_relabel((false, false)), (true, true));
        assert_eq!(dfs_relabel((false, true)), (true, false));
    }

    #[test]
    fn netlist_lists_every_instruction() {
        let g = build_gadget(GadgetKind::Reset00, None).unwrap();
        let text = g.netlist();
        assert_eq!(text.lines().count(), g.instructions.len() + 1);
        assert!(text.contains("if b0==1"));
    }
}
