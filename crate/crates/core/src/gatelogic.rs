//! Logic-level check of the duplication and swap schemes on the 16-dimensional
//! (storage ⊗ operation)⊗(storage ⊗ operation) space of two atoms.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateLogicError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("scheme deviates by {deviation:e} for input {input:?}")]
    VerificationFailed { deviation: f64, input: [[f64; 2]; 4] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Duplication,
    Swap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scheme<T> {
    pub kind: SchemeKind,
    /// Collision phase φ, rad.
    pub phase: T,
}

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    pub n: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex::new(T::zero(), T::zero()); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        self.data[r * self.n + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex<T>) {
        self.data[r * self.n + c] = v;
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.get(r, k);
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] = out.data[r * n + c] + a * other.get(k, c);
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    pub fn apply(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        (0..self.n)
            .map(|r| (0..self.n).fold(Complex::new(T::zero(), T::zero()), |acc, c| acc + self.get(r, c) * v[c]))
            .collect()
    }

    /// max |(U†U − 1)_{ij}|.
    pub fn unitarity_deviation(&self) -> T {
        let p = self.adjoint().mul(self);
        let id = Self::identity(self.n);
        p.data.iter().zip(&id.data).fold(T::zero(), |m, (a, b)| m.max((*a - *b).norm()))
    }
}

/// diag(1, 1, 1, e^{iφ}) on |00⟩, |01⟩, |10⟩, |11⟩.
pub fn phase_gate_matrix<T: Real>(phi: T) -> CMatrix<T> {
    let mut m = CMatrix::identity(4);
    m.set(3, 3, Complex::from_polar(T::one(), phi));
    m
}

/// Basis index of |s₁o₁⟩|s₂o₂⟩ with o = 0 for g and 1 for e.
pub fn composite_index(s1: usize, o1: usize, s2: usize, o2: usize) -> usize {
    s1 * 8 + o1 * 4 + s2 * 2 + o2
}

/// Single-atom step (i)/(iii) as a permutation of (s, o) → index 2s + o.
fn single_atom_map(kind: SchemeKind) -> [usize; 4] {
    match kind {
        // |0g⟩→|0g⟩, |0e⟩→|0e⟩, |1g⟩↔|1e⟩
        SchemeKind::Duplication => [0, 1, 3, 2],
        // |0g⟩→|0g⟩, |0e⟩↔|1g⟩, |1e⟩→|1e⟩
        SchemeKind::Swap => [0, 2, 1, 3],
    }
}

/// Both atoms' step (i) (equal to step (iii), the maps are involutions).
pub fn transfer_unitary<T: Real>(kind: SchemeKind) -> CMatrix<T> {
    let map = single_atom_map(kind);
    let mut m = CMatrix::zeros(16);
    for a in 0..4 {
        for b in 0..4 {
            let from = a * 4 + b;
            let to = map[a] * 4 + map[b];
            m.set(to, from, Complex::new(T::one(), T::zero()));
        }
    }
    m
}

/// Step (ii): phase φ on states with both operation registers in |e⟩.
pub fn collision_unitary<T: Real>(phi: T) -> CMatrix<T> {
    let mut m = CMatrix::identity(16);
    for s1 in 0..2 {
        for s2 in 0..2 {
            let k = composite_index(s1, 1, s2, 1);
            m.set(k, k, Complex::from_polar(T::one(), phi));
        }
    }
    m
}

/// Full three-step scheme unitary.
pub fn scheme_unitary<T: Real>(scheme: &Scheme<T>) -> CMatrix<T> {
    let s = transfer_unitary::<T>(scheme.kind);
    s.mul(&collision_unitary(scheme.phase)).mul(&s)
}

/// (a, b, c, d) on storage with both operation registers in |g⟩.
pub fn embed_storage<T: Real>(storage: &[Complex<T>; 4]) -> Vec<Complex<T>> {
    let mut v = vec![Complex::new(T::zero(), T::zero()); 16];
    for s1 in 0..2 {
        for s2 in 0..2 {
            v[composite_index(s1, 0, s2, 0)] = storage[s1 * 2 + s2];
        }
    }
    v
}

/// Schmidt rank across the storage | operation bipartition.
pub fn schmidt_rank<T: Real>(state: &[Complex<T>], tol: f64) -> usize {
    let m = DMatrix::from_fn(4, 4, |r, c| {
        let (s1, s2) = (r / 2, r % 2);
        let (o1, o2) = (c / 2, c % 2);
        let a = state[composite_index(s1, o1, s2, o2)];
        Complex::new(a.re.to_f64_lossy(), a.im.to_f64_lossy())
    });
    m.singular_values().iter().filter(|&&s| s > tol).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeReport {
    pub kind: SchemeKind,
    pub phase: f64,
    pub trials: usize,
    /// Largest |output − (H(φ)·storage)⊗|gg⟩| component over all trials.
    pub max_deviation: f64,
    pub unitarity_deviation: f64,
    /// Largest Schmidt rank of the post-collision state over the trials.
    pub intermediate_schmidt_rank: usize,
}

fn random_storage<T: Real>(rng: &mut StdRng) -> [Complex<T>; 4] {
    let mut v = [Complex::new(0.0f64, 0.0); 4];
    for x in v.iter_mut() {
        *x = Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.map(|x| Complex::new(T::lit(x.re / norm), T::lit(x.im / norm)))
}

/// Largest deviation of the scheme from H(φ)⊗|gg⟩ for one storage input.
pub fn scheme_deviation<T: Real>(u: &CMatrix<T>, phase: T, storage: &[Complex<T>; 4]) -> f64 {
    let out = u.apply(&embed_storage(storage));
    let want_storage = phase_gate_matrix(phase).apply(storage);
    let want = embed_storage(&[want_storage[0], want_storage[1], want_storage[2], want_storage[3]]);
    out.iter().zip(&want).fold(0.0f64, |m, (a, b)| m.max((*a - *b).norm().to_f64_lossy()))
}

/// Checks the scheme on `trials` random storage states; fails with the first
/// counterexample above the tolerance max(1e-10, 64 ε).
pub fn verify_scheme<T: Real>(scheme: &Scheme<T>, trials: usize, seed: u64) -> Result<SchemeReport, GateLogicError> {
    if trials == 0 {
        return Err(GateLogicError::NoTrials);
    }
    let tol = 1e-10f64.max(64.0 * T::epsilon().to_f64_lossy());
    let u = scheme_unitary(scheme);
    let first = transfer_unitary::<T>(scheme.kind);
    let mid = collision_unitary(scheme.phase).mul(&first);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut max_dev = 0.0f64;
    let mut rank = 0;
    for _ in 0..trials {
        let storage = random_storage::<T>(&mut rng);
        let dev = scheme_deviation(&u, scheme.phase, &storage);
        if dev > tol {
            return Err(GateLogicError::VerificationFailed {
                deviation: dev,
                input: storage.map(|x| [x.re.to_f64_lossy(), x.im.to_f64_lossy()]),
            });
        }
        max_dev = max_dev.max(dev);
        rank = rank.max(schmidt_rank(&mid.apply(&embed_storage(&storage)), 1e-6));
    }
    Ok(SchemeReport {
        kind: scheme.kind,
        phase: scheme.phase.to_f64_lossy(),
        trials,
        max_deviation: max_dev,
        unitarity_deviation: u.unitarity_deviation().to_f64_lossy(),
        intermediate_schmidt_rank: rank,
    })
}
