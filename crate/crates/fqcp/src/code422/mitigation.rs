//! Memory-error mitigation math: Clifford deformation of a block and the
//! decoherence-free-subspace phase structure.

use super::gadget::{Gadget, Instruction, Op};
use super::pauli::{classify, Classification, PauliKind, PauliString};
use super::state::encoded_basis;
use num_complex::Complex64;

/// Conjugate a one-block Pauli by I (x) I (x) H (x) (SH): qubit 3 swaps X
/// and Z, qubit 4 cycles Z -> Y -> X -> Z. Weight-1 Z memory errors map to
/// Z1, Z2, X3, Y4.
pub fn clifford_deform_pauli(p: &PauliString) -> PauliString {
    let mut q = *p;
    q.conj_h(2);
    // qubit 4: conjugation by S.H applies H first, then S
    q.conj_h(3);
    q.conj_s(3);
    q
}

/// Wrap a one-block gadget in the deforming layer and its inverse, so that
/// memory error accumulated inside acts as the deformed Pauli set.
pub fn clifford_deform_gadget(g: &Gadget) -> Gadget {
    assert_eq!(g.blocks(), 1, "deformation is block-local");
    let mut out = g.clone();
    let pre = [
        Instruction { op: Op::Sdg { q: 3 }, cond: None },
        Instruction { op: Op::H { q: 3 }, cond: None },
        Instruction { op: Op::H { q: 2 }, cond: None },
    ];
    let post = [
        Instruction { op: Op::H { q: 2 }, cond: None },
        Instruction { op: Op::H { q: 3 }, cond: None },
        Instruction { op: Op::S { q: 3 }, cond: None },
    ];
    let mut instructions = pre.to_vec();
    instructions.extend(out.instructions);
    instructions.extend(post);
    out.instructions = instructions;
    out
}

/// Count the unordered pairs of weight-1 Z memory faults whose product is
/// an undetectable logical error, optionally after Clifford deformation.
pub fn count_double_z_logical(deformed: bool) -> usize {
    count_double_z_logical_masked(if deformed {
        [true, true, true, true]
    } else {
        [false, false, false, false]
    })
}

/// Same count with the deformation applied only on the masked qubits;
/// disabling it on qubits 3 and 4 must reproduce the undeformed count.
pub fn count_double_z_logical_masked(deform: [bool; 4]) -> usize {
    let fault = |q: usize| -> PauliString {
        let z = PauliString::single(q, PauliKind::Z);
        if deform[q] {
            clifford_deform_pauli(&z)
        } else {
            z
        }
    };
    let mut count = 0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            let product = fault(i).mul(&fault(j)).phaseless();
            if classify(&product).0 == Classification::UndetectableLogical {
                count += 1;
            }
        }
    }
    count
}

/// Relative phase an encoded basis state acquires under uniform dephasing
/// D = prod_j exp(-i theta Z_j), computed from the actual statevector. The
/// GHZ-type |00> picks up exp(8 i theta) between its two components; the
/// other three basis states are exactly invariant (phase 1).
pub fn dfs_phase(label: (bool, bool), theta: f64) -> Complex64 {
    let mut st = encoded_basis(label.0, label.1);
    let before = st.clone();
    st.rz_all(&[0, 1, 2, 3], theta);
    // The encoded basis states have exactly two nonzero components; compare
    // the component-amplitude ratio after dephasing to the ratio before.
    let idx: Vec<usize> =
        (0..16).filter(|&i| before.amps[i].norm() > 1e-12).collect();
    assert_eq!(idx.len(), 2);
    let ratio_before = before.amps[idx[1]] / before.amps[idx[0]];
    let ratio_after = st.amps[idx[1]] / st.amps[idx[0]];
    ratio_after / ratio_before
}
