//! Single-particle spectrum on a sampled one-dimensional potential and the
//! well-localized basis built from its lowest doublets.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::HBAR;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("requested {requested} states but a {len}-point grid resolves at most {max}")]
    Resolution { requested: usize, len: usize, max: usize },
    #[error("eigensolver did not converge")]
    NoConvergence,
    #[error("need at least {needed} eigenstates, have {have}")]
    TooFewStates { needed: usize, have: usize },
    #[error("no doublet structure: {0}")]
    NoDoublets(String),
}

/// Uniformly sampled potential. Sample k sits at `origin + k * spacing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub origin: f64,
    pub spacing: f64,
    pub values: Vec<f64>,
    pub mass: f64,
}

impl Grid1D {
    pub fn new(origin: f64, spacing: f64, values: Vec<f64>, mass: f64) -> Result<Self, SpectrumError> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(SpectrumError::InvalidGrid(format!("spacing {spacing:e} must be positive")));
        }
        if values.len() < 64 {
            return Err(SpectrumError::InvalidGrid(format!("{} points, need >= 64", values.len())));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(SpectrumError::InvalidGrid(format!("non-finite potential at sample {k}")));
        }
        if !(mass > 0.0) {
            return Err(SpectrumError::InvalidGrid("mass must be positive".into()));
        }
        Ok(Self { origin, spacing, values, mass })
    }

    /// Samples `potential` on `n` points covering [−halfwidth, halfwidth).
    pub fn symmetric<F: Fn(f64) -> f64>(halfwidth: f64, n: usize, mass: f64, potential: F) -> Result<Self, SpectrumError> {
        let dx = 2.0 * halfwidth / n as f64;
        let values = (0..n).map(|k| potential(-halfwidth + k as f64 * dx)).collect();
        Self::new(-halfwidth, dx, values, mass)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.spacing
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.x(k)).collect()
    }

    /// Midpoint of the sampled interval.
    pub fn center(&self) -> f64 {
        self.origin + 0.5 * self.len() as f64 * self.spacing
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn same_sampling(&self, other: &Grid1D) -> bool {
        self.len() == other.len()
            && (self.origin - other.origin).abs() <= 1e-12 * self.spacing
            && (self.spacing - other.spacing).abs() <= 1e-12 * self.spacing
    }

    /// Sub-grid of samples strictly on one side of `split` (hard-wall restriction).
    pub fn restrict(&self, split: f64, right: bool) -> Result<Grid1D, SpectrumError> {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&k| if right { self.x(k) > split } else { self.x(k) < split })
            .collect();
        let first = *keep.first().ok_or_else(|| SpectrumError::InvalidGrid("empty restriction".into()))?;
        Grid1D::new(self.x(first), self.spacing, keep.iter().map(|&k| self.values[k]).collect(), self.mass)
    }

    /// ∫ f g dx (rectangle rule, exact trapezoid on a periodic grid).
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() * self.spacing
    }

    pub fn mean_position(&self, f: &[f64]) -> f64 {
        f.iter().enumerate().map(|(k, a)| a * a * self.x(k)).sum::<f64>() * self.spacing
    }
}

/// Discretization of the kinetic energy operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KineticKind {
    /// Periodic Fourier-grid (spectral) representation.
    #[default]
    Fourier,
    /// Three-point finite differences with hard walls outside the grid.
    FiniteDifference,
}

/// Kinetic energy matrix of the grid.
pub fn kinetic_matrix(grid: &Grid1D, kind: KineticKind) -> DMatrix<f64> {
    let n = grid.len();
    let dx = grid.spacing;
    let m = grid.mass;
    let mut t = DMatrix::zeros(n, n);
    match kind {
        KineticKind::Fourier => {
            // circulant: t_d = (1/N) Σ_m ħ²k_m²/2M · cos(2π m d / N)
            let len = n as f64 * dx;
            let kin: Vec<f64> = (0..n)
                .map(|j| {
                    let jj = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
                    let k = 2.0 * PI * jj / len;
                    HBAR * HBAR * k * k / (2.0 * m)
                })
                .collect();
            let row: Vec<f64> = (0..n)
                .map(|d| {
                    kin.iter()
                        .enumerate()
                        .map(|(j, e)| e * (2.0 * PI * ((j * d) % n) as f64 / n as f64).cos())
                        .sum::<f64>()
                        / n as f64
                })
                .collect();
            for i in 0..n {
                for j in 0..n {
                    t[(i, j)] = row[(i + n - j) % n];
                }
            }
        }
        KineticKind::FiniteDifference => {
            let c = HBAR * HBAR / (2.0 * m * dx * dx);
            for i in 0..n {
                t[(i, i)] = 2.0 * c;
                if i + 1 < n {
                    t[(i, i + 1)] = -c;
                    t[(i + 1, i)] = -c;
                }
            }
        }
    }
    t
}

/// Lowest eigenpairs of the grid Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSet {
    /// Ascending, J.
    pub energies: Vec<f64>,
    /// Real, normalized (Σ ψ² dx = 1), positive at the leftmost antinode.
    pub states: Vec<Vec<f64>>,
    pub grid: Grid1D,
    pub kinetic: KineticKind,
}

impl EigenSet {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.grid.inner(&self.states[i], &self.states[j]))
    }
}

/// Flips `psi` so that its value at the leftmost antinode is positive.
fn fix_sign(psi: &mut [f64]) {
    let peak = psi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let Some(mut k) = psi.iter().position(|v| v.abs() >= 0.1 * peak) else { return };
    while k + 1 < psi.len() && psi[k + 1].abs() > psi[k].abs() {
        k += 1;
    }
    if psi[k] < 0.0 {
        psi.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Dense diagonalization of H = T + V on the grid.
pub fn solve_eigenstates(grid: &Grid1D, n_states: usize, kinetic: KineticKind) -> Result<EigenSet, SpectrumError> {
    let n = grid.len();
    let max = n / 4;
    if n_states == 0 || n_states > max {
        return Err(SpectrumError::Resolution { requested: n_states, len: n, max });
    }
    // work in units of ħ²/(2M dx²) to keep the solver's tolerances meaningful
    let scale = HBAR * HBAR / (2.0 * grid.mass * grid.spacing * grid.spacing);
    let mut h = kinetic_matrix(grid, kinetic);
    for i in 0..n {
        h[(i, i)] += grid.values[i];
    }
    h /= scale;
    let eig = SymmetricEigen::try_new(h, 1e-15, 0).ok_or(SpectrumError::NoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let norm = 1.0 / grid.spacing.sqrt();
    let mut energies = Vec::with_capacity(n_states);
    let mut states = Vec::with_capacity(n_states);
    for &k in order.iter().take(n_states) {
        energies.push(eig.eigenvalues[k] * scale);
        let mut psi: Vec<f64> = eig.eigenvectors.column(k).iter().map(|v| v * norm).collect();
        fix_sign(&mut psi);
        states.push(psi);
    }
    Ok(EigenSet { energies, states, grid: grid.clone(), kinetic })
}

/// Left/right well states built from the two lowest doublets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizedBasis {
    pub g_left: Vec<f64>,
    pub g_right: Vec<f64>,
    pub e_left: Vec<f64>,
    pub e_right: Vec<f64>,
    /// (E1 − E0, E3 − E2), J.
    pub doublet_splittings: [f64; 2],
    pub grid: Grid1D,
}

impl LocalizedBasis {
    /// ∫|a||b| dx for the ground pair and the excited pair.
    pub fn density_overlaps(&self) -> [f64; 2] {
        let ov = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x * y).abs()).sum::<f64>() * self.grid.spacing;
        [ov(&self.g_left, &self.g_right), ov(&self.e_left, &self.e_right)]
    }
}

/// Energy splittings within the ground and first excited doublets.
pub fn doublet_splittings(eig: &EigenSet) -> Result<[f64; 2], SpectrumError> {
    if eig.len() < 4 {
        return Err(SpectrumError::TooFewStates { needed: 4, have: eig.len() });
    }
    let e = &eig.energies;
    Ok([e[1] - e[0], e[3] - e[2]])
}

fn split_pair(grid: &Grid1D, a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let plus: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y) * r).collect();
    let minus: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * r).collect();
    if grid.mean_position(&plus) < grid.mean_position(&minus) {
        (plus, minus)
    } else {
        (minus, plus)
    }
}

/// (ψ0 ± ψ1)/√2 and (ψ2 ± ψ3)/√2, assigned to wells by mean position.
pub fn localized_basis(eig: &EigenSet) -> Result<LocalizedBasis, SpectrumError> {
    let splittings = doublet_splittings(eig)?;
    let e = &eig.energies;
    let gap = 0.5 * (e[2] + e[3]) - 0.5 * (e[0] + e[1]);
    if !(splittings[0] < 0.1 * gap && splittings[1] < 0.1 * gap) {
        return Err(SpectrumError::NoDoublets(format!(
            "splittings {:e}, {:e} J against doublet gap {:e} J",
            splittings[0], splittings[1], gap
        )));
    }
    let grid = &eig.grid;
    let (g_left, g_right) = split_pair(grid, &eig.states[0], &eig.states[1]);
    let (e_left, e_right) = split_pair(grid, &eig.states[2], &eig.states[3]);
    let c = grid.center();
    for (name, f, left) in [("gL", &g_left, true), ("gR", &g_right, false), ("eL", &e_left, true), ("eR", &e_right, false)] {
        let side = grid.mean_position(f) - c;
        if (side < 0.0) != left {
            return Err(SpectrumError::NoDoublets(format!("{name} is not localized on its side")));
        }
    }
    let basis = LocalizedBasis { g_left, g_right, e_left, e_right, doublet_splittings: splittings, grid: grid.clone() };
    let ov = basis.density_overlaps();
    if ov.iter().any(|&o| o >= 0.2) {
        return Err(SpectrumError::NoDoublets(format!("well states overlap too much: {ov:?}")));
    }
    Ok(basis)
}
