//! Qubit-reuse scheduling: linearize the circuit's instruction DAG so that
//! sites retire as early as possible.
//!
//! The greedy rule retires sites left to right: for each site in ascending
//! order, execute the minimal prerequisite closure that completes its wire,
//! then trace it out. Completing the leftmost wire drags in a staircase of
//! partially-advanced wires to its right whose slope matches the cone edge,
//! so the live window settles at `2t + 1` sites for a horizon of `t`
//! periods -- half the full cone width of `4t`.

use crate::model::CircuitSpec;
use serde::Serialize;
use std::collections::BTreeMap;

/// One executable step of the reuse schedule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ScheduleOp {
    /// Bring a fresh |0> site into the window.
    Admit { site: i32 },
    /// Controlled rotation (angle supplied at simulation time).
    Gate { control: i32, target: i32 },
    /// Two-qubit random reset on an aligned pair.
    Reset { pair: (i32, i32), block: i32, t: u32 },
    /// Store <n(site)> for period `t`.
    Record { site: i32, t: u32 },
    /// Trace the site out of the window.
    Retire { site: i32 },
}

#[derive(Clone, Debug, Serialize)]
pub struct ReuseSchedule {
    pub ops: Vec<ScheduleOp>,
    pub max_live: usize,
}

/// Internal DAG node.
#[derive(Clone, Debug)]
enum Node {
    Gate { control: i32, target: i32 },
    Reset { pair: (i32, i32), block: i32, t: u32, support: Vec<i32> },
    Record { site: i32, t: u32 },
}

impl Node {
    fn support(&self) -> Vec<i32> {
        match self {
            Node::Gate { control, target } => vec![*control, *target],
            Node::Reset { support, .. } => support.clone(),
            Node::Record { site, .. } => vec![*site],
        }
    }
}

struct Builder {
    nodes: Vec<Node>,
    wire_instrs: BTreeMap<i32, Vec<usize>>,
    /// Per-wire index of the next unexecuted instruction.
    wire_pos: BTreeMap<i32, usize>,
    executed: Vec<bool>,
    admitted: BTreeMap<i32, bool>,
    live: usize,
    max_live: usize,
    ops: Vec<ScheduleOp>,
}

impl Builder {
    fn admit_if_needed(&mut self, site: i32) {
        let seen = self.admitted.entry(site).or_insert(false);
        if !*seen {
            *seen = true;
            self.live += 1;
            self.max_live = self.max_live.max(self.live);
            self.ops.push(ScheduleOp::Admit { site });
        }
    }

    fn exec(&mut self, id: usize) {
        if self.executed[id] {
            return;
        }
        // Run every earlier instruction on each wire this one touches.
        // Wire lists are sorted in program order, so recursion only ever
        // reaches strictly earlier instructions and terminates.
        for w in self.nodes[id].support() {
            loop {
                let pos = self.wire_pos[&w];
                let list = &self.wire_instrs[&w];
                if pos >= list.len() || list[pos] == id {
                    break;
                }
                let dep = list[pos];
                self.exec(dep);
            }
        }
        self.executed[id] = true;
        for w in self.nodes[id].support() {
            let pos = self.wire_pos.get_mut(&w).unwrap();
            debug_assert_eq!(self.wire_instrs[&w][*pos], id, "wire order violated");
            *pos += 1;
        }
        match &self.nodes[id] {
            Node::Gate { control, target } => {
                let (c, t) = (*control, *target);
                self.admit_if_needed(c);
                self.admit_if_needed(t);
                self.ops.push(ScheduleOp::Gate { control: c, target: t });
            }
            Node::Reset { pair, block, t, support } => {
                let (pair, block, t) = (*pair, *block, *t);
                for s in support.clone() {
                    self.admit_if_needed(s);
                }
                self.ops.push(ScheduleOp::Reset { pair, block, t });
            }
            Node::Record { site, t } => {
                let (site, t) = (*site, *t);
                self.admit_if_needed(site);
                self.ops.push(ScheduleOp::Record { site, t });
            }
        }
    }
}

/// Greedy diagonal-sweep linearization of the circuit DAG.
pub fn build_reuse_schedule(circuit: &CircuitSpec) -> ReuseSchedule {
    // Reconstruct the possibly-active set per period to know the effective
    // support of resets and which sites need a record.
    let range = circuit.site_range;
    let mut active = vec![false; range.width()];
    active[(circuit.origin - range.lo) as usize] = true;
    let at = |active: &[bool], s: i32| -> bool {
        range.contains(s) && active[(s - range.lo) as usize]
    };

    let mut nodes: Vec<Node> = Vec::new();
    let mut wire_instrs: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    let push = |nodes: &mut Vec<Node>, wire_instrs: &mut BTreeMap<i32, Vec<usize>>, n: Node| {
        let id = nodes.len();
        for w in n.support() {
            wire_instrs.entry(w).or_default().push(id);
        }
        nodes.push(n);
    };

    // The origin's t=0 record precedes everything on its wire.
    push(&mut nodes, &mut wire_instrs, Node::Record { site: circuit.origin, t: 0 });

    for (pi, period) in circuit.periods.iter().enumerate() {
        let t = pi as u32 + 1;
        for layer in &period.gate_layers {
            for g in layer {
                active[(g.target - range.lo) as usize] = true;
                push(
                    &mut nodes,
                    &mut wire_instrs,
                    Node::Gate { control: g.control, target: g.target },
                );
            }
        }
        for r in &period.reset_layer {
            let support: Vec<i32> = [r.pair.0, r.pair.1]
                .into_iter()
                .filter(|&s| at(&active, s))
                .collect();
            debug_assert!(!support.is_empty());
            push(
                &mut nodes,
                &mut wire_instrs,
                Node::Reset { pair: r.pair, block: r.slot.r, t, support },
            );
        }
        for s in range.iter() {
            if at(&active, s) {
                push(&mut nodes, &mut wire_instrs, Node::Record { site: s, t });
            }
        }
    }

    let wire_pos: BTreeMap<i32, usize> = wire_instrs.keys().map(|&w| (w, 0)).collect();
    let executed = vec![false; nodes.len()];
    let mut b = Builder {
        nodes,
        wire_instrs,
        wire_pos,
        executed,
        admitted: BTreeMap::new(),
        live: 0,
        max_live: 0,
        ops: Vec::new(),
    };

    // Sweep wires left to right, retiring each as soon as it completes.
    let wires: Vec<i32> = b.wire_instrs.keys().copied().collect();
    for w in wires {
        let list = b.wire_instrs[&w].clone();
        for id in list {
            b.exec(id);
        }
        // A wire with instructions was necessarily admitted.
        b.ops.push(ScheduleOp::Retire { site: w });
        b.live -= 1;
    }

    ReuseSchedule { ops: b.ops, max_live: b.max_live }
}

impl ReuseSchedule {
    /// Check that the schedule respects the wire order of the circuit:
    /// sites are admitted before first use, retired only after their last
    /// instruction, and every instruction appears exactly once.
    pub fn validate(&self, circuit: &CircuitSpec) -> Result<(), String> {
        let mut live: Vec<i32> = Vec::new();
        let mut retired: Vec<i32> = Vec::new();
        let mut gates_seen = 0usize;
        let mut resets_seen = 0usize;
        for op in &self.ops {
            match op {
                ScheduleOp::Admit { site } => {
                    if live.contains(site) || retired.contains(site) {
                        return Err(format!("site {site} admitted twice"));
                    }
                    live.push(*site);
                }
                ScheduleOp::Gate { control, target } => {
                    if !live.contains(control) || !live.contains(target) {
                        return Err(format!("gate {control}->{target} on dead site"));
                    }
                    gates_seen += 1;
                }
                ScheduleOp::Reset { pair, .. } => {
                    if !live.contains(&pair.0) && !live.contains(&pair.1) {
                        return Err(format!("reset {pair:?} with no live support"));
                    }
                    resets_seen += 1;
                }
                ScheduleOp::Record { site, .. } => {
                    if !live.contains(site) {
                        return Err(format!("record on dead site {site}"));
                    }
                }
                ScheduleOp::Retire { site } => {
                    if !live.contains(site) {
                        return Err(format!("retiring dead site {site}"));
                    }
                    live.retain(|s| s != site);
                    retired.push(*site);
                }
            }
        }
        let expected_gates: usize = circuit.gate_counts().iter().sum();
        let expected_resets: usize =
            circuit.periods.iter().map(|p| p.reset_layer.len()).sum();
        if gates_seen != expected_gates {
            return Err(format!("{gates_seen} gates scheduled, circuit has {expected_gates}"));
        }
        if resets_seen != expected_resets {
            return Err(format!("{resets_seen} resets scheduled, circuit has {expected_resets}"));
        }
        Ok(())
    }
}
