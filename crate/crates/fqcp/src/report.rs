//! Gate and qubit resource accounting for the model and its encoded
//! implementation.

use crate::code422::{build_gadget, Gadget, GadgetKind};
use crate::dm::build_reuse_schedule;
use crate::model::{causal_cone, CircuitSpec};
use serde::Serialize;

fn two_qubit_count(g: &Gadget) -> u64 {
    g.instructions.iter().filter(|i| i.op.qubits().len() == 2).count() as u64
}

#[derive(Clone, Debug, Serialize)]
pub struct ResourceRow {
    pub t: u32,
    /// Code blocks touched by this period's reset layer.
    pub blocks: usize,
    /// Reachable sites after this period.
    pub cone_sites: usize,
    /// Model-level two-qubit gates in this period.
    pub model_gates: usize,
    /// Physical two-qubit gates of the encoded period: intra- and
    /// inter-block rotations plus one stabilizer measurement per block
    /// (resets and final readout are excluded: they are stochastic or
    /// terminal).
    pub encoded_two_qubit_gates: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResourceReport {
    pub rows: Vec<ResourceRow>,
    /// Sites that must be held simultaneously without reuse (full cone).
    pub sites_no_reuse: usize,
    /// Peak live sites of the reuse schedule.
    pub sites_with_reuse: usize,
    /// Physical qubits of the encoded circuit over the full cone,
    /// including the two shared ancillas.
    pub physical_qubits_encoded: usize,
    pub total_model_gates: usize,
    pub total_encoded_two_qubit_gates: u64,
}

/// Per-period resource table for a circuit. `detections` adds the
/// stabilizer-measurement gadget cost at every reset slot.
pub fn resource_report(circuit: &CircuitSpec, detections: bool) -> ResourceReport {
    let intra1 = two_qubit_count(&build_gadget(GadgetKind::CrxIntra { control: 1 }, Some(1.0)).unwrap());
    let intra2 = two_qubit_count(&build_gadget(GadgetKind::CrxIntra { control: 2 }, Some(1.0)).unwrap());
    let inter = two_qubit_count(&build_gadget(GadgetKind::CrxInter, Some(1.0)).unwrap());
    let stab = two_qubit_count(&build_gadget(GadgetKind::StabMeas, None).unwrap());

    let mut rows = Vec::new();
    for (pi, period) in circuit.periods.iter().enumerate() {
        let t = pi as u32 + 1;
        let model_gates: usize = period.gate_layers.iter().map(Vec::len).sum();
        let encoded = period.gate_layers[0].len() as u64 * intra1
            + period.gate_layers[1].len() as u64 * intra2
            + period.inter_bonds().len() as u64 * inter
            + if detections { period.reset_layer.len() as u64 * stab } else { 0 };
        rows.push(ResourceRow {
            t,
            blocks: period.reset_layer.len(),
            cone_sites: causal_cone(t).width(),
            model_gates,
            encoded_two_qubit_gates: encoded,
        });
    }
    let schedule = build_reuse_schedule(circuit);
    let blocks_total = rows.last().map(|r| r.blocks).unwrap_or(0);
    ResourceReport {
        sites_no_reuse: circuit.cone.width(),
        sites_with_reuse: schedule.max_live,
        physical_qubits_encoded: 4 * blocks_total + 2,
        total_model_gates: rows.iter().map(|r| r.model_gates).sum(),
        total_encoded_two_qubit_gates: rows.iter().map(|r| r.encoded_two_qubit_gates).sum(),
        rows,
    }
}
