//! Dense density matrix over the currently-live subset of sites.
//!
//! Gates are applied as index-bit kernels (conjugation by the 4x4 unitary on
//! the two site bits), which costs O(4^w) per gate instead of the O(8^w) of
//! a general matrix product. Sites can be admitted in |0> and retired by
//! partial trace, so the window tracks only the staircase of live sites that
//! the reuse schedule keeps in flight.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WindowError {
    #[error("live-site window of {got} sites exceeds the cap of {cap}")]
    WindowTooLarge { got: usize, cap: usize },
    #[error("trace drifted to {trace} (|1 - trace| = {drift:.3e}) at op {op}")]
    TraceDrift { trace: f64, drift: f64, op: String },
}

const C0: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug)]
pub struct DensityWindow {
    sites: Vec<i32>,
    mat: Vec<Complex64>,
}

impl DensityWindow {
    /// Window holding exactly the origin site in |1>.
    pub fn new_origin(origin: i32) -> Self {
        let mut mat = vec![C0; 4];
        mat[3] = Complex64::new(1.0, 0.0); // |1><1|
        Self { sites: vec![origin], mat }
    }

    /// Window over the given sites in a product state with exactly
    /// `active_site` in |1> and the rest in |0>.
    pub fn new_product(sites: Vec<i32>, active_site: i32) -> Self {
        let w = sites.len();
        let dim = 1usize << w;
        let mut idx = 0usize;
        for (k, &s) in sites.iter().enumerate() {
            if s == active_site {
                idx |= 1 << k;
            }
        }
        let mut mat = vec![C0; dim * dim];
        mat[idx * dim + idx] = Complex64::new(1.0, 0.0);
        Self { sites, mat }
    }

    pub fn live_count(&self) -> usize {
        self.sites.len()
    }

    pub fn live_sites(&self) -> &[i32] {
        &self.sites
    }

    pub fn dim(&self) -> usize {
        1 << self.sites.len()
    }

    pub fn bit_of(&self, site: i32) -> Option<usize> {
        self.sites.iter().position(|&s| s == site)
    }

    pub fn is_live(&self, site: i32) -> bool {
        self.bit_of(site).is_some()
    }

    /// Admit a fresh site in |0>; it becomes the highest bit.
    pub fn admit(&mut self, site: i32) {
        assert!(!self.is_live(site), "site {site} already live");
        let dim = self.dim();
        let new_dim = dim * 2;
        let mut new_mat = vec![C0; new_dim * new_dim];
        for r in 0..dim {
            new_mat[r * new_dim..r * new_dim + dim].copy_from_slice(&self.mat[r * dim..(r + 1) * dim]);
        }
        self.mat = new_mat;
        self.sites.push(site);
    }

    /// Trace a site out of the window.
    pub fn retire(&mut self, site: i32) {
        let k = self.bit_of(site).expect("retiring a site that is not live");
        let dim = self.dim();
        let new_dim = dim / 2;
        let bit = 1usize << k;
        let insert = |idx: usize| -> usize {
            let low = idx & (bit - 1);
            let high = idx >> k;
            (high << (k + 1)) | low
        };
        let mut new_mat = vec![C0; new_dim * new_dim];
        for r in 0..new_dim {
            let r0 = insert(r);
            for c in 0..new_dim {
                let c0 = insert(c);
                new_mat[r * new_dim + c] =
                    self.mat[r0 * dim + c0] + self.mat[(r0 | bit) * dim + (c0 | bit)];
            }
        }
        self.mat = new_mat;
        self.sites.remove(k);
    }

    /// Controlled X-rotation: rotate `target` by theta when `control` is |1>.
    pub fn apply_crx(&mut self, control: i32, target: i32, theta: f64) {
        let cb = self.bit_of(control).expect("control not live");
        let tb = self.bit_of(target).expect("target not live");
        let dim = self.dim();
        let cbit = 1usize << cb;
        let tbit = 1usize << tb;
        let cos = Complex64::new((theta / 2.0).cos(), 0.0);
        let mis = Complex64::new(0.0, -(theta / 2.0).sin()); // -i sin
        let pis = Complex64::new(0.0, (theta / 2.0).sin()); // +i sin

        // Indices with control=1, target=0; partner is idx | tbit.
        let picks: Vec<usize> =
            (0..dim).filter(|i| i & cbit != 0 && i & tbit == 0).collect();

        // Left multiply by U: mix row pairs.
        for &r0 in &picks {
            let r1 = r0 | tbit;
            let (b0, b1) = (r0 * dim, r1 * dim);
            for c in 0..dim {
                let v0 = self.mat[b0 + c];
                let v1 = self.mat[b1 + c];
                self.mat[b0 + c] = cos * v0 + mis * v1;
                self.mat[b1 + c] = mis * v0 + cos * v1;
            }
        }
        // Right multiply by U^dagger: mix column pairs, row-major sweep.
        for r in 0..dim {
            let base = r * dim;
            for &c0 in &picks {
                let c1 = c0 | tbit;
                let v0 = self.mat[base + c0];
                let v1 = self.mat[base + c1];
                self.mat[base + c0] = cos * v0 + pis * v1;
                self.mat[base + c1] = pis * v0 + cos * v1;
            }
        }
    }

    /// Two-qubit random reset on an aligned pair: with probability p the
    /// pair is replaced by |00><00|. Pair sites that are not live are
    /// guaranteed |0>, so the channel reduces to the live subset exactly.
    pub fn apply_reset_pair(&mut self, a: i32, b: i32, p: f64) {
        if p == 0.0 {
            return;
        }
        match (self.bit_of(a), self.bit_of(b)) {
            (Some(ka), Some(kb)) => self.reset_two(ka, kb, p),
            (Some(k), None) | (None, Some(k)) => self.reset_one(k, p),
            (None, None) => {}
        }
    }

    fn reset_one(&mut self, k: usize, p: f64) {
        let dim = self.dim();
        let bit = 1usize << k;
        let keep = 1.0 - p;
        let insert = |idx: usize| -> usize {
            let low = idx & (bit - 1);
            (idx >> k << (k + 1)) | low
        };
        let half = dim / 2;
        let mut sigma = vec![C0; half * half];
        for r in 0..half {
            let r0 = insert(r);
            for c in 0..half {
                let c0 = insert(c);
                sigma[r * half + c] =
                    self.mat[r0 * dim + c0] + self.mat[(r0 | bit) * dim + (c0 | bit)];
            }
        }
        for v in self.mat.iter_mut() {
            *v *= keep;
        }
        for r in 0..half {
            let r0 = insert(r);
            for c in 0..half {
                let c0 = insert(c);
                self.mat[r0 * dim + c0] += p * sigma[r * half + c];
            }
        }
    }

    fn reset_two(&mut self, ka: usize, kb: usize, p: f64) {
        let dim = self.dim();
        let (k1, k2) = (ka.min(kb), ka.max(kb));
        let b1 = 1usize << k1;
        let b2 = 1usize << k2;
        let keep = 1.0 - p;
        // Scatter a (w-2)-bit index into the full index with bits k1,k2 = 0.
        let insert = |idx: usize| -> usize {
            let low = idx & (b1 - 1);
            let mid = (idx >> k1) & ((1usize << (k2 - 1 - k1)) - 1);
            let high = idx >> (k2 - 1);
            (high << (k2 + 1)) | (mid << (k1 + 1)) | low
        };
        let quarter = dim / 4;
        let mut sigma = vec![C0; quarter * quarter];
        for r in 0..quarter {
            let r0 = insert(r);
            for c in 0..quarter {
                let c0 = insert(c);
                let mut acc = C0;
                for u in [0, b1, b2, b1 | b2] {
                    acc += self.mat[(r0 | u) * dim + (c0 | u)];
                }
                sigma[r * quarter + c] = acc;
            }
        }
        for v in self.mat.iter_mut() {
            *v *= keep;
        }
        for r in 0..quarter {
            let r0 = insert(r);
            for c in 0..quarter {
                let c0 = insert(c);
                self.mat[r0 * dim + c0] += p * sigma[r * quarter + c];
            }
        }
    }

    /// Expectation of the occupation |1><1| on a live site.
    pub fn expect_n(&self, site: i32) -> f64 {
        let k = self.bit_of(site).expect("site not live");
        let dim = self.dim();
        let bit = 1usize << k;
        (0..dim)
            .filter(|i| i & bit != 0)
            .map(|i| self.mat[i * dim + i].re)
            .sum()
    }

    pub fn trace(&self) -> Complex64 {
        let dim = self.dim();
        (0..dim).map(|i| self.mat[i * dim + i]).sum()
    }

    pub fn check_trace(&self, tol: f64, op: &str) -> Result<(), WindowError> {
        let tr = self.trace();
        let drift = (tr - Complex64::new(1.0, 0.0)).norm();
        if drift > tol {
            return Err(WindowError::TraceDrift { trace: tr.re, drift, op: op.to_string() });
        }
        Ok(())
    }

    /// tr(rho^2); 1 for pure states.
    pub fn purity(&self) -> f64 {
        let dim = self.dim();
        let mut acc = 0.0;
        for r in 0..dim {
            for c in 0..dim {
                acc += (self.mat[r * dim + c] * self.mat[c * dim + r]).re;
            }
        }
        acc
    }

    /// Largest |rho[r,c] - conj(rho[c,r])|.
    pub fn hermiticity_defect(&self) -> f64 {
        let dim = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..dim {
            for c in 0..dim {
                worst = worst.max((self.mat[r * dim + c] - self.mat[c * dim + r].conj()).norm());
            }
        }
        worst
    }

    /// Full dephasing of one site: zero every element whose row and column
    /// disagree on that bit. Diagonal observables are unaffected.
    pub fn dephase_site(&mut self, site: i32) {
        let k = self.bit_of(site).expect("site not live");
        let dim = self.dim();
        let bit = 1usize << k;
        for r in 0..dim {
            for c in 0..dim {
                if (r ^ c) & bit != 0 {
                    self.mat[r * dim + c] = C0;
                }
            }
        }
    }

    /// Smallest eigenvalue estimate by power iteration on (c*I - rho);
    /// good enough to spot-check positivity.
    pub fn min_eigenvalue_estimate(&self, iters: usize, seed: u64) -> f64 {
        let dim = self.dim();
        let shift = 2.0;
        let mut rng = crate::rng::SimRng::new(seed, crate::rng::Stream::Noise);
        let mut v: Vec<Complex64> =
            (0..dim).map(|_| Complex64::new(rng.normal(), rng.normal())).collect();
        let mut lambda = 0.0;
        for _ in 0..iters {
            // w = (shift*I - rho) v
            let mut w = vec![C0; dim];
            for r in 0..dim {
                let mut acc = shift * v[r];
                for c in 0..dim {
                    acc -= self.mat[r * dim + c] * v[c];
                }
                w[r] = acc;
            }
            let norm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            for x in w.iter_mut() {
                *x /= norm;
            }
            lambda = norm_rayleigh(&self.mat, &w, shift);
            v = w;
        }
        shift - lambda
    }
}

fn norm_rayleigh(mat: &[Complex64], v: &[Complex64], shift: f64) -> f64 {
    let dim = v.len();
    let mut num = C0;
    for r in 0..dim {
        let mut acc = shift * v[r];
        for c in 0..dim {
            acc -= mat[r * dim + c] * v[c];
        }
        num += v[r].conj() * acc;
    }
    num.re
}
