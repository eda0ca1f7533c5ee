//! n-qubit Paulis in symplectic form, plus the [[4,2,2]] block algebra:
//! stabilizers, canonical logical representatives, syndromes, and error
//! classification.

use serde::Serialize;
use std::fmt;

/// A Pauli operator `i^phase * X^x * Z^z` over up to 32 qubits.
///
/// Bit k of `x`/`z` is the X/Z component on qubit k. Multiplication and
/// Clifford conjugation track the phase exactly (exponent of i, mod 4).
#[derive(Copy, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PauliString {
    pub x: u32,
    pub z: u32,
    pub phase: u8,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum PauliKind {
    X,
    Y,
    Z,
}

impl PauliString {
    pub const fn identity() -> Self {
        Self { x: 0, z: 0, phase: 0 }
    }

    pub fn single(qubit: usize, kind: PauliKind) -> Self {
        let bit = 1u32 << qubit;
        match kind {
            PauliKind::X => Self { x: bit, z: 0, phase: 0 },
            PauliKind::Z => Self { x: 0, z: bit, phase: 0 },
            // Y = i X Z
            PauliKind::Y => Self { x: bit, z: bit, phase: 1 },
        }
    }

    pub fn from_supports(x: u32, z: u32) -> Self {
        Self { x, z, phase: 0 }
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn support(&self) -> u32 {
        self.x | self.z
    }

    /// Group product self * other (phases included).
    pub fn mul(&self, other: &Self) -> Self {
        // Moving other's X block past self's Z block picks up a sign per
        // overlapping qubit.
        let swaps = (self.z & other.x).count_ones();
        Self {
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            phase: (self.phase + other.phase + 2 * (swaps as u8 & 1)) % 4,
        }
    }

    pub fn commutes(&self, other: &Self) -> bool {
        let form = (self.x & other.z).count_ones() + (self.z & other.x).count_ones();
        form % 2 == 0
    }

    /// Restrict to a contiguous 4-qubit block starting at `offset`,
    /// renumbered from zero. Phase is dropped (classification works modulo
    /// phase).
    pub fn block(&self, offset: usize) -> Self {
        Self { x: (self.x >> offset) & 0xf, z: (self.z >> offset) & 0xf, phase: 0 }
    }

    /// Same Pauli with phase zeroed.
    pub fn phaseless(&self) -> Self {
        Self { phase: 0, ..*self }
    }

    // -- Clifford conjugation updates (P -> U P U^dagger), phase-exact --

    pub fn conj_h(&mut self, q: usize) {
        let bit = 1u32 << q;
        let xq = self.x & bit != 0;
        let zq = self.z & bit != 0;
        if xq && zq {
            self.phase = (self.phase + 2) % 4; // H Y H = -Y
        }
        if xq != zq {
            self.x ^= bit;
            self.z ^= bit;
        }
    }

    pub fn conj_s(&mut self, q: usize) {
        let bit = 1u32 << q;
        if self.x & bit != 0 {
            self.phase = (self.phase + 1) % 4; // X -> Y, XZ -> i X
            self.z ^= bit;
        }
    }

    pub fn conj_sdg(&mut self, q: usize) {
        let bit = 1u32 << q;
        if self.x & bit != 0 {
            self.phase = (self.phase + 3) % 4;
            self.z ^= bit;
        }
    }

    pub fn conj_x(&mut self, q: usize) {
        let bit = 1u32 << q;
        if self.z & bit != 0 {
            self.phase = (self.phase + 2) % 4;
        }
    }

    pub fn conj_cx(&mut self, control: usize, target: usize) {
        let cb = 1u32 << control;
        let tb = 1u32 << target;
        let xc = self.x & cb != 0;
        let zc = self.z & cb != 0;
        let xt = self.x & tb != 0;
        let zt = self.z & tb != 0;
        // Aaronson-Gottesman sign rule: r ^= x_c z_t (x_t ^ z_c ^ 1)
        if xc && zt && (xt ^ zc ^ true) {
            self.phase = (self.phase + 2) % 4;
        }
        if xc {
            self.x ^= tb;
        }
        if zt {
            self.z ^= cb;
        }
    }

    pub fn conj_cz(&mut self, a: usize, b: usize) {
        // CZ = (I x H) CX (I x H)
        self.conj_h(b);
        self.conj_cx(a, b);
        self.conj_h(b);
    }

    /// Conjugation by exp(-i (k pi/2) A / 2) for a Pauli axis A:
    /// P is unchanged if it commutes with A; otherwise each quarter turn
    /// multiplies by i^(+-1) A.
    pub fn conj_pauli_rotation(&mut self, axis: &PauliString, quarter_turns: i32) {
        if self.commutes(axis) {
            return;
        }
        match quarter_turns.rem_euclid(4) {
            0 => {}
            1 => *self = self.mul(axis).with_phase_add(1),
            2 => self.phase = (self.phase + 2) % 4,
            3 => *self = self.mul(axis).with_phase_add(3),
            _ => unreachable!(),
        }
    }

    fn with_phase_add(mut self, k: u8) -> Self {
        self.phase = (self.phase + k) % 4;
        self
    }

    pub fn display(&self, n: usize) -> String {
        let mut s = match self.phase {
            0 => "+".to_string(),
            1 => "+i".to_string(),
            2 => "-".to_string(),
            3 => "-i".to_string(),
            _ => unreachable!(),
        };
        for q in 0..n {
            let bit = 1u32 << q;
            s.push(match (self.x & bit != 0, self.z & bit != 0) {
                (false, false) => 'I',
                (true, false) => 'X',
                (false, true) => 'Z',
                (true, true) => 'Y',
            });
        }
        s
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display(32 - (self.support().leading_zeros() as usize).min(28)))
    }
}

// ---- [[4,2,2]] block algebra ----

/// S_X = X1 X2 X3 X4 on one block.
pub fn stab_x() -> PauliString {
    PauliString::from_supports(0xf, 0)
}

/// S_Z = Z1 Z2 Z3 Z4.
pub fn stab_z() -> PauliString {
    PauliString::from_supports(0, 0xf)
}

/// Canonical logical representatives: Z1 = Z_1 Z_3, Z2 = Z_1 Z_2,
/// X1 = X_1 X_2, X2 = X_1 X_3 (qubits numbered 1..4 = bits 0..3).
pub fn logical_z(which: usize) -> PauliString {
    match which {
        1 => PauliString::from_supports(0, 0b0101),
        2 => PauliString::from_supports(0, 0b0011),
        _ => panic!("logical index must be 1 or 2"),
    }
}

pub fn logical_x(which: usize) -> PauliString {
    match which {
        1 => PauliString::from_supports(0b0011, 0),
        2 => PauliString::from_supports(0b0101, 0),
        _ => panic!("logical index must be 1 or 2"),
    }
}

/// Syndrome of a one-block Pauli: bit set iff it anticommutes with the
/// corresponding stabilizer. Returned as (s_x, s_z).
pub fn syndrome(p: &PauliString) -> (bool, bool) {
    (!p.commutes(&stab_x()), !p.commutes(&stab_z()))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Classification {
    /// Element of the stabilizer group (up to phase): no effect on any
    /// code state.
    Benign,
    /// Triggers a stabilizer violation but acts trivially on the logical
    /// subspace once detected.
    Detectable,
    /// Commutes with both stabilizers yet acts as a logical operator:
    /// invisible to error detection.
    UndetectableLogical,
    /// Triggers a stabilizer violation and also flips a logical operator.
    DetectableLogical,
}

/// Anticommutation pattern against (Z1, Z2, X1, X2); a set bit means the
/// Pauli acts as the conjugate logical operator on that axis.
pub fn logical_pattern(p: &PauliString) -> u8 {
    let mut pattern = 0u8;
    for (i, rep) in
        [logical_z(1), logical_z(2), logical_x(1), logical_x(2)].iter().enumerate()
    {
        if !p.commutes(rep) {
            pattern |= 1 << i;
        }
    }
    pattern
}

/// Classify a one-block Pauli against the code.
pub fn classify(p: &PauliString) -> (Classification, u8) {
    let (sx, sz) = syndrome(p);
    let detectable = sx || sz;
    let pattern = logical_pattern(p);
    let class = match (detectable, pattern != 0) {
        (false, false) => Classification::Benign,
        (true, false) => Classification::Detectable,
        (false, true) => Classification::UndetectableLogical,
        (true, true) => Classification::DetectableLogical,
    };
    (class, pattern)
}

/// Does the Pauli corrupt a freshly-prepared logical |00>? Z-type logicals
/// stabilize that state, so only undetected X-action counts.
pub fn damages_prepared_zero(p: &PauliString) -> bool {
    let (sx, sz) = syndrome(p);
    if sx || sz {
        return false; // detectable later
    }
    !p.commutes(&logical_z(1)) || !p.commutes(&logical_z(2))
}

/// All 256 phaseless Paulis on one block.
pub fn all_block_paulis() -> impl Iterator<Item = PauliString> {
    (0u32..16).flat_map(|x| (0u32..16).map(move |z| PauliString::from_supports(x, z)))
}
