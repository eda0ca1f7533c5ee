//! Forward Pauli propagation through Clifford-angle gadgets and the
//! exhaustive single-fault fault-tolerance checker.

use super::gadget::{Gadget, Op};
use super::pauli::{classify, damages_prepared_zero, Classification, PauliKind, PauliString};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PropagateError {
    #[error("gadget contains a non-Clifford rotation; propagation needs quarter-turn angles")]
    NotClifford,
}

/// Where and what went wrong: a Pauli inserted at an instruction boundary
/// (`location` 0 is the gadget entry) or a flipped measurement bit.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub enum Fault {
    Pauli { location: usize, pauli: PauliString },
    MeasureFlip { bit: usize },
}

/// Result of pushing one fault through the rest of the gadget.
#[derive(Clone, Debug, Serialize)]
pub struct FaultOutcome {
    pub fault: Fault,
    /// Residual Pauli restricted to each data block (phaseless).
    pub residual_blocks: Vec<PauliString>,
    /// Measurement bits that flip relative to the fault-free run.
    pub bit_flips: Vec<bool>,
    /// Whether the gadget's own record signals the fault.
    pub flagged: bool,
    pub classifications: Vec<Classification>,
    /// An unflagged fault that silently corrupts the logical content of
    /// some block.
    pub bad: bool,
}

/// Conjugate `pauli` forward from `location` through the remaining
/// instructions, tracking measurement-bit flips and conditional control
/// flow relative to the fault-free execution (all nominal outcomes are 0).
pub fn propagate_pauli(
    gadget: &Gadget,
    fault: Fault,
) -> Result<FaultOutcome, PropagateError> {
    if !gadget.is_clifford() {
        return Err(PropagateError::NotClifford);
    }
    let mut pauli = PauliString::identity();
    let mut bit_flips = vec![false; gadget.n_bits];
    let start;
    match fault {
        Fault::Pauli { location, pauli: p } => {
            pauli = p;
            start = location;
        }
        Fault::MeasureFlip { bit } => {
            // Flipping a bit can redirect conditionals, so walk from the
            // instruction right after that measurement.
            bit_flips[bit] = true;
            start = gadget
                .instructions
                .iter()
                .position(|i| matches!(i.op, Op::MeasureZ { bit: b, .. } if b == bit))
                .map(|i| i + 1)
                .unwrap_or(gadget.instructions.len());
        }
    }

    for inst in &gadget.instructions[start.min(gadget.instructions.len())..] {
        if let Some((bit, value)) = inst.cond {
            // Nominal outcomes are all 0; the actual outcome is the flip.
            if bit_flips[bit] != value {
                continue;
            }
        }
        match inst.op {
            Op::Prep { q } => {
                // A fresh |0> discards whatever error sat on the qubit.
                let bit = 1u32 << q;
                pauli.x &= !bit;
                pauli.z &= !bit;
            }
            Op::H { q } => pauli.conj_h(q),
            Op::S { q } => pauli.conj_s(q),
            Op::Sdg { q } => pauli.conj_sdg(q),
            Op::X { q, .. } => pauli.conj_x(q),
            Op::Cx { control, target } => pauli.conj_cx(control, target),
            Op::Cz { a, b } => pauli.conj_cz(a, b),
            Op::Rxx { a, b, angle } => {
                let axis = PauliString::from_supports((1 << a) | (1 << b), 0);
                let turns = (angle / std::f64::consts::FRAC_PI_2).round() as i32;
                pauli.conj_pauli_rotation(&axis, turns);
            }
            Op::MeasureZ { q, bit } => {
                let bmask = 1u32 << q;
                if pauli.x & bmask != 0 {
                    bit_flips[bit] ^= true;
                }
                // The qubit collapses; any residual on it is spent.
                pauli.x &= !bmask;
                pauli.z &= !bmask;
            }
        }
    }

    let residual_blocks: Vec<PauliString> =
        (0..gadget.blocks()).map(|b| pauli.block(4 * b)).collect();
    let classifications: Vec<Classification> =
        residual_blocks.iter().map(|p| classify(p).0).collect();
    let flagged = {
        let bits: Vec<bool> = bit_flips.clone();
        gadget.flagged(&bits)
    };
    let bad = !flagged
        && residual_blocks.iter().any(|p| {
            if gadget.prep_rule {
                damages_prepared_zero(p)
            } else {
                classify(p).0 == Classification::UndetectableLogical
            }
        });
    Ok(FaultOutcome {
        fault,
        residual_blocks,
        bit_flips,
        flagged,
        classifications,
        bad,
    })
}

/// Every single-fault location of the standard circuit-level model: all 1-
/// and 2-qubit Paulis after every instruction on its support, X after every
/// preparation, one flip per measurement bit, plus single-qubit entry
/// errors on the data qubits.
pub fn enumerate_faults(gadget: &Gadget) -> Vec<Fault> {
    let mut faults = Vec::new();
    for q in 0..gadget.n_data {
        for kind in [PauliKind::X, PauliKind::Y, PauliKind::Z] {
            faults.push(Fault::Pauli { location: 0, pauli: PauliString::single(q, kind) });
        }
    }
    for (i, inst) in gadget.instructions.iter().enumerate() {
        if inst.cond.is_some() {
            // Conditional instructions never execute in the fault-free
            // branch, so no single fault can originate there.
            continue;
        }
        let location = i + 1;
        match inst.op {
            Op::Prep { q } => {
                faults.push(Fault::Pauli { location, pauli: PauliString::single(q, PauliKind::X) });
            }
            Op::MeasureZ { bit, .. } => faults.push(Fault::MeasureFlip { bit }),
            ref op => {
                let qs = op.qubits();
                match qs.len() {
                    1 => {
                        for kind in [PauliKind::X, PauliKind::Y, PauliKind::Z] {
                            faults.push(Fault::Pauli {
                                location,
                                pauli: PauliString::single(qs[0], kind),
                            });
                        }
                    }
                    2 => {
                        let kinds = [None, Some(PauliKind::X), Some(PauliKind::Y), Some(PauliKind::Z)];
                        for ka in kinds {
                            for kb in kinds {
                                if ka.is_none() && kb.is_none() {
                                    continue;
                                }
                                let mut p = PauliString::identity();
                                if let Some(k) = ka {
                                    p = p.mul(&PauliString::single(qs[0], k));
                                }
                                if let Some(k) = kb {
                                    p = p.mul(&PauliString::single(qs[1], k));
                                }
                                faults.push(Fault::Pauli { location, pauli: p });
                            }
                        }
                    }
                    _ => unreachable!(),
                }
            }
        }
    }
    faults
}

#[derive(Clone, Debug, Serialize)]
pub struct FtReport {
    pub kind: super::gadget::GadgetKind,
    pub n_faults: usize,
    pub benign: usize,
    pub detectable: usize,
    pub undetectable_logical: usize,
    pub detectable_logical: usize,
    pub flagged: usize,
    /// Unflagged faults that silently corrupt logical content.
    pub witnesses: Vec<FaultOutcome>,
    pub is_ft: bool,
}

/// Exhaustive single-fault enumeration. A gadget is fault-tolerant iff no
/// single fault produces an unflagged silent logical error on any block.
pub fn ft_check(gadget: &Gadget) -> Result<FtReport, PropagateError> {
    if !gadget.is_clifford() {
        return Err(PropagateError::NotClifford);
    }
    let faults = enumerate_faults(gadget);
    let outcomes: Vec<FaultOutcome> = faults
        .par_iter()
        .map(|&f| propagate_pauli(gadget, f).expect("clifford checked"))
        .collect();

    let mut report = FtReport {
        kind: gadget.kind,
        n_faults: outcomes.len(),
        benign: 0,
        detectable: 0,
        undetectable_logical: 0,
        detectable_logical: 0,
        flagged: 0,
        witnesses: Vec::new(),
        is_ft: true,
    };
    for outcome in outcomes {
        // Count the worst classification across blocks.
        let worst = outcome
            .classifications
            .iter()
            .max_by_key(|c| match c {
                Classification::Benign => 0,
                Classification::Detectable => 1,
                Classification::DetectableLogical => 2,
                Classification::UndetectableLogical => 3,
            })
            .copied()
            .unwrap_or(Classification::Benign);
        match worst {
            Classification::Benign => report.benign += 1,
            Classification::Detectable => report.detectable += 1,
            Classification::UndetectableLogical => report.undetectable_logical += 1,
            Classification::DetectableLogical => report.detectable_logical += 1,
        }
        if outcome.flagged {
            report.flagged += 1;
        }
        if outcome.bad {
            report.is_ft = false;
            report.witnesses.push(outcome);
        }
    }
    Ok(report)
}
