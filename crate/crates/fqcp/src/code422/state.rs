//! Small exact statevector engine used to verify gadget circuits and to
//! drive the physical-trajectory backend. Capped at 20 qubits.

use super::pauli::PauliString;
use num_complex::Complex64;
use thiserror::Error;

pub const MAX_QUBITS: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("{0} qubits exceed the {MAX_QUBITS}-qubit statevector cap")]
    TooManyQubits(usize),
    #[error("input state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
}

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Pure state over `n` qubits; index bit k holds qubit k.
#[derive(Clone, Debug)]
pub struct StateVector {
    pub n: usize,
    pub amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero(n: usize) -> Result<Self, StateError> {
        if n > MAX_QUBITS {
            return Err(StateError::TooManyQubits(n));
        }
        let mut amps = vec![C0; 1 << n];
        amps[0] = C1;
        Ok(Self { n, amps })
    }

    pub fn from_amps(n: usize, amps: Vec<Complex64>) -> Result<Self, StateError> {
        if n > MAX_QUBITS {
            return Err(StateError::TooManyQubits(n));
        }
        assert_eq!(amps.len(), 1 << n);
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(StateError::NotNormalized(norm));
        }
        Ok(Self { n, amps })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// |<self|other>|.
    pub fn overlap(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n);
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm()
    }

    /// Tensor product self (low bits) with other (high bits).
    pub fn kron(&self, other: &Self) -> Result<Self, StateError> {
        let n = self.n + other.n;
        if n > MAX_QUBITS {
            return Err(StateError::TooManyQubits(n));
        }
        let mut amps = vec![C0; 1 << n];
        for (j, &b) in other.amps.iter().enumerate() {
            if b == C0 {
                continue;
            }
            for (i, &a) in self.amps.iter().enumerate() {
                amps[(j << self.n) | i] = a * b;
            }
        }
        Ok(Self { n, amps })
    }

    fn for_pairs(&mut self, q: usize, mut f: impl FnMut(&mut Complex64, &mut Complex64)) {
        let bit = 1usize << q;
        let dim = self.amps.len();
        let mut i = 0usize;
        while i < dim {
            if i & bit == 0 {
                let (lo, hi) = self.amps.split_at_mut(i | bit);
                f(&mut lo[i], &mut hi[0]);
            }
            i += 1;
        }
    }

    pub fn h(&mut self, q: usize) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        self.for_pairs(q, |a, b| {
            let (va, vb) = (*a, *b);
            *a = s * (va + vb);
            *b = s * (va - vb);
        });
    }

    pub fn s_gate(&mut self, q: usize) {
        let bit = 1usize << q;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & bit != 0 {
                *a *= Complex64::i();
            }
        }
    }

    pub fn sdg(&mut self, q: usize) {
        let bit = 1usize << q;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & bit != 0 {
                *a *= -Complex64::i();
            }
        }
    }

    pub fn x(&mut self, q: usize) {
        self.for_pairs(q, |a, b| std::mem::swap(a, b));
    }

    pub fn z(&mut self, q: usize) {
        let bit = 1usize << q;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & bit != 0 {
                *a = -*a;
            }
        }
    }

    pub fn cx(&mut self, control: usize, target: usize) {
        let cb = 1usize << control;
        let tb = 1usize << target;
        for i in 0..self.amps.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amps.swap(i, i | tb);
            }
        }
    }

    pub fn cz(&mut self, a: usize, b: usize) {
        let mask = (1usize << a) | (1usize << b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *amp = -*amp;
            }
        }
    }

    /// exp(-i angle X(a) X(b) / 2).
    pub fn rxx(&mut self, a: usize, b: usize, angle: f64) {
        let mask = (1usize << a) | (1usize << b);
        let cos = Complex64::new((angle / 2.0).cos(), 0.0);
        let mis = Complex64::new(0.0, -(angle / 2.0).sin());
        for i in 0..self.amps.len() {
            let j = i ^ mask;
            if i < j {
                let (vi, vj) = (self.amps[i], self.amps[j]);
                self.amps[i] = cos * vi + mis * vj;
                self.amps[j] = mis * vi + cos * vj;
            }
        }
    }

    /// exp(-i theta Z(q)) on every listed qubit; uniform dephasing when
    /// applied to all of them.
    pub fn rz_all(&mut self, qubits: &[usize], theta: f64) {
        for (i, a) in self.amps.iter_mut().enumerate() {
            let mut arg = 0.0;
            for &q in qubits {
                arg += if i & (1 << q) != 0 { theta } else { -theta };
            }
            *a *= Complex64::from_polar(1.0, arg);
        }
    }

    /// Apply a Pauli string (with phase) to the state.
    pub fn apply_pauli(&mut self, p: &PauliString) {
        let phase = [C1, Complex64::i(), -C1, -Complex64::i()][p.phase as usize];
        let x = p.x as usize;
        let z = p.z as usize;
        let dim = self.amps.len();
        let mut out = vec![C0; dim];
        for (i, &a) in self.amps.iter().enumerate() {
            if a == C0 {
                continue;
            }
            // X^x Z^z |i> = (-1)^{z.i} |i ^ x>
            let sign = if ((z & i).count_ones()) % 2 == 1 { -C1 } else { C1 };
            out[i ^ x] += phase * sign * a;
        }
        self.amps = out;
    }

    /// Probability that qubit q reads 1.
    pub fn prob_one(&self, q: usize) -> f64 {
        let bit = 1usize << q;
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Project qubit q onto `outcome` and renormalize; returns the branch
    /// probability (state is garbage if it is ~0).
    pub fn project(&mut self, q: usize, outcome: bool) -> f64 {
        let bit = 1usize << q;
        let p: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| (i & bit != 0) == outcome)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        let scale = if p > 0.0 { 1.0 / p.sqrt() } else { 0.0 };
        for (i, a) in self.amps.iter_mut().enumerate() {
            if (i & bit != 0) == outcome {
                *a *= Complex64::new(scale, 0.0);
            } else {
                *a = C0;
            }
        }
        p
    }

    /// Expectation of a Pauli string.
    pub fn expect_pauli(&self, p: &PauliString) -> Complex64 {
        let mut moved = self.clone();
        moved.apply_pauli(p);
        self.amps.iter().zip(&moved.amps).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Encoded images of the four logical basis states of one [[4,2,2]] block.
/// `a` is logical qubit 1, `b` logical qubit 2.
pub fn encoded_basis(a: bool, b: bool) -> StateVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![C0; 16];
    // physical kets written q1 q2 q3 q4; index bit k = qubit k+1
    let (i, j) = match (a, b) {
        (false, false) => (0b0000, 0b1111),
        (false, true) => (0b1010, 0b0101), // |0101> + |1010> in paper order
        (true, false) => (0b1100, 0b0011), // |0011> + |1100>
        (true, true) => (0b0110, 0b1001), // |0110> + |1001>
    };
    amps[i] = Complex64::new(s, 0.0);
    amps[j] = Complex64::new(s, 0.0);
    StateVector { n: 4, amps }
}

/// Linear extension of the logical basis map to an arbitrary normalized
/// 2-qubit state (index = q1 + 2*q2).
pub fn encode_state(logical: &[Complex64; 4]) -> Result<StateVector, StateError> {
    let norm: f64 = logical.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(StateError::NotNormalized(norm));
    }
    let mut out = StateVector { n: 4, amps: vec![C0; 16] };
    for (idx, &coeff) in logical.iter().enumerate() {
        if coeff == C0 {
            continue;
        }
        let basis = encoded_basis(idx & 1 == 1, idx & 2 == 2);
        for (i, &b) in basis.amps.iter().enumerate() {
            out.amps[i] += coeff * b;
        }
    }
    Ok(out)
}

/// Decode a 4-qubit state into logical amplitudes; the residual norm
/// outside the code space is returned alongside.
pub fn decode_state(state: &StateVector) -> ([Complex64; 4], f64) {
    assert_eq!(state.n, 4);
    let mut logical = [C0; 4];
    let mut inside = 0.0;
    for idx in 0..4 {
        let basis = encoded_basis(idx & 1 == 1, idx & 2 == 2);
        let amp: Complex64 =
            basis.amps.iter().zip(&state.amps).map(|(b, s)| b.conj() * s).sum();
        logical[idx] = amp;
        inside += amp.norm_sqr();
    }
    (logical, (1.0 - inside).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::super::pauli::{logical_x, logical_z, stab_x, stab_z, PauliKind, PauliString};
    use super::*;

    #[test]
    fn encoded_basis_matches_published_states() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let e00 = encoded_basis(false, false);
        assert!((e00.amps[0b0000].re - s).abs() < 1e-15);
        assert!((e00.amps[0b1111].re - s).abs() < 1e-15);
        assert_eq!(e00.amps.iter().filter(|a| a.norm() > 0.0).count(), 2);
        let e11 = encoded_basis(true, true);
        assert!((e11.amps[0b0110].re - s).abs() < 1e-15);
        assert!((e11.amps[0b1001].re - s).abs() < 1e-15);
    }

    #[test]
    fn stabilizers_fix_all_basis_states() {
        for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
            let e = encoded_basis(a, b);
            for stab in [stab_x(), stab_z()] {
                let mut moved = e.clone();
                moved.apply_pauli(&stab);
                let overlap: Complex64 =
                    e.amps.iter().zip(&moved.amps).map(|(x, y)| x.conj() * y).sum();
                assert!((overlap.re - 1.0).abs() < 1e-12, "basis ({a},{b})");
                assert!(overlap.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn logical_operators_act_correctly() {
        // Z1 eigenvalues +-1 by logical qubit 1, X1 flips logical qubit 1.
        for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
            let e = encoded_basis(a, b);
            let z1 = e.expect_pauli(&logical_z(1));
            let expect = if a { -1.0 } else { 1.0 };
            assert!((z1.re - expect).abs() < 1e-12);
            let z2 = e.expect_pauli(&logical_z(2));
            let expect = if b { -1.0 } else { 1.0 };
            assert!((z2.re - expect).abs() < 1e-12);

            let mut flipped = e.clone();
            flipped.apply_pauli(&logical_x(1));
            let target = encoded_basis(!a, b);
            assert!((flipped.overlap(&target) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn encode_superposition_stays_in_code_space() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // (|00> + |11>)/sqrt(2) logical Bell state
        let logical = [Complex64::new(s, 0.0), C0, C0, Complex64::new(s, 0.0)];
        let e = encode_state(&logical).unwrap();
        assert!((e.norm_sqr() - 1.0).abs() < 1e-12);
        for stab in [stab_x(), stab_z()] {
            let v = e.expect_pauli(&stab);
            assert!((v.re - 1.0).abs() < 1e-12);
        }
        let (decoded, residual) = decode_state(&e);
        assert!(residual < 1e-12);
        assert!((decoded[0].re - s).abs() < 1e-12);
        assert!((decoded[3].re - s).abs() < 1e-12);
    }

    #[test]
    fn encode_rejects_unnormalized() {
        let logical = [C1, C1, C0, C0];
        assert!(matches!(encode_state(&logical), Err(StateError::NotNormalized(_))));
    }

    #[test]
    fn rxx_at_pi_is_pauli_xx() {
        let mut a = StateVector::zero(2).unwrap();
        a.rxx(0, 1, std::f64::consts::PI);
        // exp(-i pi XX/2) = -i XX: |00> -> -i |11>
        assert!((a.amps[0b11] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn projection_normalizes() {
        let mut st = StateVector::zero(2).unwrap();
        st.h(0);
        st.cx(0, 1);
        let p = st.project(1, true);
        assert!((p - 0.5).abs() < 1e-12);
        assert!((st.norm_sqr() - 1.0).abs() < 1e-12);
        assert!((st.amps[0b11].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pauli_application_signs() {
        let mut st = StateVector::zero(1).unwrap();
        st.x(0); // |1>
        st.apply_pauli(&PauliString::single(0, PauliKind::Z));
        assert!((st.amps[1] + C1).norm() < 1e-12, "Z|1> = -|1>");
        let mut st = StateVector::zero(1).unwrap();
        st.apply_pauli(&PauliString::single(0, PauliKind::Y));
        assert!((st.amps[1] - Complex64::i()).norm() < 1e-12, "Y|0> = i|1>");
    }

    #[test]
    fn qubit_cap() {
        assert!(matches!(StateVector::zero(21), Err(StateError::TooManyQubits(21))));
    }
}
