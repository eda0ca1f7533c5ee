//! [[4,2,2]] code machinery: Pauli algebra, encoded states, the gadget
//! circuit library with exact statevector execution, symplectic fault
//! propagation with exhaustive single-fault checking, and the three
//! memory-error mitigations (decoupling pulses, basis relabeling, Clifford
//! deformation).

mod gadget;
mod mitigation;
mod pauli;
mod propagate;
mod state;

pub use gadget::{
    apply_gadget_statevector, build_gadget, dfs_relabel, dfs_transform, insert_dd, Branch,
    FlagRule, Gadget, GadgetError, GadgetKind, InjectedFault, Instruction, Op, RunMode,
};
pub use mitigation::{
    clifford_deform_gadget, clifford_deform_pauli, count_double_z_logical,
    count_double_z_logical_masked, dfs_phase,
};
pub use pauli::{
    all_block_paulis, classify, damages_prepared_zero, logical_pattern, logical_x, logical_z,
    stab_x, stab_z, syndrome, Classification, PauliKind, PauliString,
};
pub use propagate::{
    enumerate_faults, ft_check, propagate_pauli, Fault, FaultOutcome, FtReport, PropagateError,
};
pub use state::{decode_state, encode_state, encoded_basis, StateError, StateVector, MAX_QUBITS};
