//! Two-photon Raman addressing of the vibrational levels: Lamb-Dicke factors,
//! Rabi chain, wavevector matching and sideband probabilities on grid states.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::HBAR;
use crate::scalar::Real;
use crate::spectrum1d::{localized_basis, solve_eigenstates, EigenSet, KineticKind, SpectrumError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RamanError {
    #[error("detuning {detuning} is not ≫ Rabi frequencies (ratio {ratio:.2} < 10)")]
    DetuningTooSmall { detuning: f64, ratio: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("requested {requested} sideband orders, only {available} available")]
    TooFewStates { requested: usize, available: usize },
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamanSetup<T> {
    /// Single-photon Rabi frequencies, rad/s.
    pub rabi_1: T,
    pub rabi_2: T,
    /// Detuning from the intermediate level, rad/s.
    pub detuning: T,
    /// Effective wavevector, 1/m.
    pub k_effective: T,
    /// Trap angular frequency, rad/s.
    pub trap_omega: T,
    pub mass: T,
}

/// η = k·sqrt(ħ/(2Mω_t)).
pub fn lamb_dicke<T: Real>(setup: &RamanSetup<T>) -> Result<T, RamanError> {
    if !(setup.trap_omega > T::zero() && setup.mass > T::zero()) {
        return Err(RamanError::Invalid("trap frequency and mass must be positive".into()));
    }
    let hbar = T::lit(HBAR);
    Ok(setup.k_effective.abs() * (hbar / (T::lit(2.0) * setup.mass * setup.trap_omega)).sqrt())
}

/// (Ω₀, Ω) with Ω₀ = Ω₁Ω₂/(2Δ) and Ω = ηΩ₀.
pub fn rabi_chain<T: Real>(setup: &RamanSetup<T>) -> Result<(T, T), RamanError> {
    let largest = setup.rabi_1.abs().max(setup.rabi_2.abs());
    let ratio = setup.detuning.abs() / largest;
    if !(ratio >= T::lit(10.0)) {
        return Err(RamanError::DetuningTooSmall {
            detuning: setup.detuning.to_f64_lossy(),
            ratio: ratio.to_f64_lossy(),
        });
    }
    let omega0 = setup.rabi_1 * setup.rabi_2 / (T::lit(2.0) * setup.detuning.abs());
    Ok((omega0, omega0 * lamb_dicke(setup)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Duplication,
    Swap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Desired,
    Undesired,
}

/// Wavevector difference k₁ − k₂ (1/m) resonant with the addressed sideband.
pub fn sideband_condition<T: Real>(trap_freq: T, hyperfine_freq: T, scheme: Scheme, branch: Branch) -> Result<T, RamanError> {
    if !(trap_freq > T::zero() && hyperfine_freq > T::zero()) {
        return Err(RamanError::Invalid("frequencies must be positive".into()));
    }
    let two_pi_over_c = T::lit(2.0) * T::PI() / T::lit(crate::constants::SPEED_OF_LIGHT);
    let nu = match (scheme, branch) {
        // the vibrational transition |1g⟩↔|1e⟩ and its carrier |0g⟩↔|0e⟩ share ν_t
        (Scheme::Duplication, _) => trap_freq,
        (Scheme::Swap, Branch::Desired) => hyperfine_freq + trap_freq,
        (Scheme::Swap, Branch::Undesired) => hyperfine_freq - trap_freq,
    };
    Ok(two_pi_over_c * nu)
}

/// k_eff = η / sqrt(ħ/(2Mω)).
pub fn k_from_eta(eta: f64, mass: f64, omega_well: f64) -> f64 {
    eta / (HBAR / (2.0 * mass * omega_well)).sqrt()
}

/// Which states play the role of the well levels φ_n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SidebandBasis {
    /// φ_n = ψ_n, the eigenstates as given.
    Direct,
    /// φ₀ = g_L; level n collects both members ψ_{2n}, ψ_{2n+1} of the n-th doublet.
    Doublet,
}

/// Angular spacing of the lowest two levels in `basis`.
pub fn well_omega(eig: &EigenSet, basis: SidebandBasis) -> Result<f64, RamanError> {
    let e = &eig.energies;
    let w = match basis {
        SidebandBasis::Direct => {
            if e.len() < 2 {
                return Err(RamanError::TooFewStates { requested: 2, available: e.len() });
            }
            (e[1] - e[0]) / HBAR
        }
        SidebandBasis::Doublet => {
            if e.len() < 4 {
                return Err(RamanError::TooFewStates { requested: 4, available: e.len() });
            }
            (0.5 * (e[2] + e[3]) - 0.5 * (e[0] + e[1])) / HBAR
        }
    };
    Ok(w)
}

fn matrix_element_sqr(eig: &EigenSet, bra: &[f64], ket: &[f64], k: f64) -> f64 {
    let g = &eig.grid;
    let (mut re, mut im) = (0.0, 0.0);
    for (i, (a, b)) in bra.iter().zip(ket).enumerate() {
        let phase = k * g.x(i);
        re += a * b * phase.cos();
        im += a * b * phase.sin();
    }
    (re * re + im * im) * g.spacing * g.spacing
}

/// P_n0 = |⟨φ_n|e^{ik x}|φ₀⟩|² for n = 0..=n_max.
pub fn sideband_probabilities(eig: &EigenSet, k_eff: f64, n_max: usize, basis: SidebandBasis) -> Result<Vec<f64>, RamanError> {
    if !k_eff.is_finite() {
        return Err(RamanError::Invalid("k_eff must be finite".into()));
    }
    match basis {
        SidebandBasis::Direct => {
            if n_max + 1 > eig.len() {
                return Err(RamanError::TooFewStates { requested: n_max + 1, available: eig.len() });
            }
            Ok((0..=n_max).map(|n| matrix_element_sqr(eig, &eig.states[n], &eig.states[0], k_eff)).collect())
        }
        SidebandBasis::Doublet => {
            if 2 * n_max + 2 > eig.len() {
                return Err(RamanError::TooFewStates { requested: 2 * n_max + 2, available: eig.len() });
            }
            let g0 = localized_basis(eig)?.g_left;
            Ok((0..=n_max)
                .map(|n| {
                    matrix_element_sqr(eig, &eig.states[2 * n], &g0, k_eff)
                        + matrix_element_sqr(eig, &eig.states[2 * n + 1], &g0, k_eff)
                })
                .collect())
        }
    }
}

/// Eigenstates of the left well alone, with hard walls at `split` and at the
/// grid edge (finite-difference kinetic term, Dirichlet ends).
pub fn single_well_eigenstates(eig: &EigenSet, split: f64, n_states: usize) -> Result<EigenSet, RamanError> {
    let half = eig.grid.restrict(split, false)?;
    Ok(solve_eigenstates(&half, n_states, KineticKind::FiniteDifference)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JcSample<T> {
    pub time: T,
    pub p_initial: T,
    pub p_final: T,
}

/// Resonant sideband Rabi flopping P_f = sin²(Ωt/2) sampled on [0, duration].
pub fn jc_sideband_dynamics<T: Real>(omega_sideband: T, duration: T, n_samples: usize) -> Result<Vec<JcSample<T>>, RamanError> {
    if !(omega_sideband > T::zero() && duration > T::zero()) || n_samples < 2 {
        return Err(RamanError::Invalid("need positive Ω, duration and at least two samples".into()));
    }
    let last = T::from_usize(n_samples - 1).expect("sample count representable");
    Ok((0..n_samples)
        .map(|k| {
            let t = duration * T::from_usize(k).expect("index representable") / last;
            let s = (omega_sideband * t / T::lit(2.0)).sin();
            let p_final = s * s;
            JcSample { time: t, p_initial: T::one() - p_final, p_final }
        })
        .collect())
}

/// π-pulse duration π/Ω.
pub fn pi_pulse_duration<T: Real>(omega_sideband: T) -> T {
    T::PI() / omega_sideband
}
