//! Two atoms in a static 1D double well with contact interaction, propagated on
//! an (x₁′, x₂′) grid by Strang split-operator steps.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::HBAR;
use crate::spectrum1d::{Grid1D, LocalizedBasis};

/// Confinement-induced resonance constant, -ζ(1/2).
pub const CONFINEMENT_C: f64 = 1.4603;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollisionError {
    #[error("invalid interaction parameters: {0}")]
    InvalidParams(String),
    #[error("transverse correction too close to the confinement resonance (denominator {0:.3})")]
    ConfinementResonance(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid propagation request: {0}")]
    InvalidRequest(String),
    #[error("norm drifted by {drift:e} after {steps} steps")]
    Unstable { drift: f64, steps: usize },
    #[error("overlap magnitude {magnitude:e} at t = {time:e} s; phase undefined")]
    PhaseGap { magnitude: f64, time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionParams {
    /// 3D s-wave scattering length, m.
    pub scattering_length: f64,
    /// Transverse trap angular frequency, rad/s.
    pub omega_perp: f64,
    pub mass: f64,
    pub transverse_correction: bool,
}

impl InteractionParams {
    /// Transverse oscillator length sqrt(ħ/(Mω⊥)).
    pub fn transverse_length(&self) -> f64 {
        (HBAR / (self.mass * self.omega_perp)).sqrt()
    }
}

/// Effective 1D contact strength. With the correction this is Olshanii's
/// 2ħω⊥a / (1 − C a/(√2 ℓ⊥)).
pub fn g1d_coupling(p: &InteractionParams) -> Result<f64, CollisionError> {
    if !(p.scattering_length >= 0.0) || !p.scattering_length.is_finite() {
        return Err(CollisionError::InvalidParams(format!("scattering length {:e}", p.scattering_length)));
    }
    if !(p.omega_perp > 0.0 && p.mass > 0.0) {
        return Err(CollisionError::InvalidParams("omega_perp and mass must be positive".into()));
    }
    let bare = 2.0 * HBAR * p.omega_perp * p.scattering_length;
    if !p.transverse_correction {
        return Ok(bare);
    }
    let ratio = CONFINEMENT_C * p.scattering_length / (std::f64::consts::SQRT_2 * p.transverse_length());
    let denom = 1.0 - ratio;
    if denom <= 0.1 {
        return Err(CollisionError::ConfinementResonance(denom));
    }
    Ok(bare / denom)
}

/// How the contact term is put on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactModel {
    /// g/Δx on the diagonal x₁ = x₂.
    #[default]
    Delta,
    /// Normalized Gaussian of width Δx in x₁ − x₂.
    Gaussian,
}

/// Two-particle amplitude, row-major: `amps[i * n + j]` is Ψ(x_i, x_j).
#[derive(Debug, Clone, PartialEq)]
pub struct Psi2D {
    pub amps: Vec<Complex64>,
    pub grid: Grid1D,
}

impl Psi2D {
    pub fn n(&self) -> usize {
        self.grid.len()
    }

    /// ⟨self|other⟩ with the dx² measure.
    pub fn inner(&self, other: &Psi2D) -> Complex64 {
        let dx2 = self.grid.spacing * self.grid.spacing;
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum::<Complex64>() * dx2
    }

    pub fn norm_sqr(&self) -> f64 {
        let dx2 = self.grid.spacing * self.grid.spacing;
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx2
    }

    /// Ψ(x₂, x₁).
    pub fn exchanged(&self) -> Psi2D {
        let n = self.n();
        let mut amps = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                amps[j * n + i] = self.amps[i * n + j];
            }
        }
        Psi2D { amps, grid: self.grid.clone() }
    }

    /// max |Ψ(x₁,x₂) − Ψ(x₂,x₁)| relative to max |Ψ|.
    pub fn exchange_asymmetry(&self) -> f64 {
        let n = self.n();
        let peak = self.amps.iter().fold(0.0f64, |m, a| m.max(a.norm()));
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.amps[i * n + j] - self.amps[j * n + i]).norm());
            }
        }
        worst / peak
    }

    /// (⟨x₁⟩, ⟨x₂⟩).
    pub fn mean_positions(&self) -> (f64, f64) {
        let n = self.n();
        let dx2 = self.grid.spacing * self.grid.spacing;
        let (mut m1, mut m2) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let p = self.amps[i * n + j].norm_sqr();
                m1 += p * self.grid.x(i);
                m2 += p * self.grid.x(j);
            }
        }
        (m1 * dx2, m2 * dx2)
    }
}

/// Ψ = φ_L(x₁)·φ_R(x₂), or its normalized exchange-symmetric part.
pub fn product_state(left: &[f64], right: &[f64], grid: &Grid1D, symmetrize: bool) -> Result<Psi2D, CollisionError> {
    let n = grid.len();
    if left.len() != n || right.len() != n {
        return Err(CollisionError::GridMismatch(format!(
            "factors have {} and {} points, grid has {n}",
            left.len(),
            right.len()
        )));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let v = if symmetrize {
                left[i] * right[j] + left[j] * right[i]
            } else {
                left[i] * right[j]
            };
            amps[i * n + j] = Complex64::new(v, 0.0);
        }
    }
    let mut psi = Psi2D { amps, grid: grid.clone() };
    let norm = psi.norm_sqr().sqrt();
    if !(norm > 0.0) {
        return Err(CollisionError::InvalidRequest("product state has zero norm".into()));
    }
    for a in psi.amps.iter_mut() {
        *a /= norm;
    }
    Ok(psi)
}

/// Named set of states whose summed populations are recorded.
#[derive(Debug, Clone)]
pub struct ProbeGroup {
    pub name: String,
    pub states: Vec<Psi2D>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationOptions {
    pub dt: f64,
    pub n_steps: usize,
    pub record_every: usize,
    pub contact: ContactModel,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// ⟨Ψ(0)|Ψ(t)⟩.
    pub overlaps: Vec<Complex64>,
    pub norms: Vec<f64>,
    /// ⟨H⟩, J.
    pub energy: Vec<f64>,
    /// One series per probe group.
    pub populations: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

fn relative_drift(series: &[f64]) -> f64 {
    let e0 = series.first().copied().unwrap_or(0.0);
    let scale = e0.abs().max(f64::MIN_POSITIVE);
    series.iter().fold(0.0f64, |m, e| m.max((e - e0).abs() / scale))
}

/// Relative ⟨H⟩ drift above which a gate run carries a warning.
pub const ENERGY_DRIFT_WARN: f64 = 1e-6;

impl Trajectory {
    /// Largest relative deviation of ⟨H⟩ from its initial value.
    pub fn energy_drift(&self) -> f64 {
        relative_drift(&self.energy)
    }

    pub fn norm_drift(&self) -> f64 {
        self.norms.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()))
    }
}

/// Static parts of the split-operator step for one grid and coupling.
struct Stepper {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    /// exp(−i(T₁+T₂)dt/2ħ)/N² in transposed spectral layout (symmetric anyway).
    kin_half: Vec<Complex64>,
    kin_full: Vec<Complex64>,
    pot: Vec<Complex64>,
    /// T₁+T₂ per spectral point and V₁+V₂+V_int per grid point, J.
    t_energy: Vec<f64>,
    v_energy: Vec<f64>,
}

fn wavenumbers(n: usize, dx: f64) -> Vec<f64> {
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * dx);
    (0..n).map(|m| if m < n.div_ceil(2) { m as f64 * dk } else { (m as f64 - n as f64) * dk }).collect()
}

fn transpose(a: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            a.swap(i * n + j, j * n + i);
        }
    }
}

impl Stepper {
    fn new(grid: &Grid1D, g1d: f64, dt: f64, contact: ContactModel) -> Self {
        let n = grid.len();
        let dx = grid.spacing;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        let k = wavenumbers(n, dx);
        let t1: Vec<f64> = k.iter().map(|k| HBAR * HBAR * k * k / (2.0 * grid.mass)).collect();
        let norm = 1.0 / (n * n) as f64;
        let mut t_energy = vec![0.0; n * n];
        let mut kin_half = vec![Complex64::new(0.0, 0.0); n * n];
        let mut kin_full = vec![Complex64::new(0.0, 0.0); n * n];
        for a in 0..n {
            for b in 0..n {
                let e = t1[a] + t1[b];
                t_energy[a * n + b] = e;
                kin_half[a * n + b] = Complex64::from_polar(norm, -e * dt / (2.0 * HBAR));
                kin_full[a * n + b] = Complex64::from_polar(norm, -e * dt / HBAR);
            }
        }
        let mut v_energy = vec![0.0; n * n];
        let width = dx;
        let gauss_norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * width);
        for i in 0..n {
            for j in 0..n {
                let contact_term = match contact {
                    ContactModel::Delta => {
                        if i == j {
                            g1d / dx
                        } else {
                            0.0
                        }
                    }
                    ContactModel::Gaussian => {
                        let r = grid.x(i) - grid.x(j);
                        g1d * gauss_norm * (-r * r / (2.0 * width * width)).exp()
                    }
                };
                v_energy[i * n + j] = grid.values[i] + grid.values[j] + contact_term;
            }
        }
        let pot = v_energy.iter().map(|v| Complex64::from_polar(1.0, -v * dt / HBAR)).collect();
        Self {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            kin_half,
            kin_full,
            pot,
            t_energy,
            v_energy,
        }
    }

    /// Forward 2D transform; the result is stored transposed ([k₂][k₁]).
    fn forward(&mut self, a: &mut [Complex64]) {
        self.fwd.process_with_scratch(a, &mut self.scratch);
        transpose(a, self.n);
        self.fwd.process_with_scratch(a, &mut self.scratch);
    }

    /// Inverse of `forward`, unnormalized.
    fn inverse(&mut self, a: &mut [Complex64]) {
        self.inv.process_with_scratch(a, &mut self.scratch);
        transpose(a, self.n);
        self.inv.process_with_scratch(a, &mut self.scratch);
    }

    fn kinetic(&mut self, a: &mut [Complex64], full: bool) {
        self.forward(a);
        let k = if full { &self.kin_full } else { &self.kin_half };
        for (x, f) in a.iter_mut().zip(k) {
            *x *= f;
        }
        self.inverse(a);
    }

    fn potential(&self, a: &mut [Complex64]) {
        for (x, f) in a.iter_mut().zip(&self.pot) {
            *x *= f;
        }
    }

    /// `m` Strang steps with the inner half-kinetic pairs fused.
    fn advance(&mut self, a: &mut [Complex64], m: usize) {
        if m == 0 {
            return;
        }
        self.kinetic(a, false);
        for _ in 1..m {
            self.potential(a);
            self.kinetic(a, true);
        }
        self.potential(a);
        self.kinetic(a, false);
    }

    /// ⟨H⟩ for a state normalized with the dx² measure.
    fn energy(&mut self, a: &[Complex64], dx: f64) -> f64 {
        let dx2 = dx * dx;
        let v: f64 = a.iter().zip(&self.v_energy).map(|(x, v)| x.norm_sqr() * v).sum();
        let mut spec = a.to_vec();
        self.forward(&mut spec);
        let nn = (self.n * self.n) as f64;
        // the kinetic table is symmetric, so the transposed layout needs no care
        let t: f64 = spec.iter().zip(&self.t_energy).map(|(x, t)| x.norm_sqr() * t).sum::<f64>() / nn;
        (v + t) * dx2
    }
}

/// Strang split-operator propagation of `psi` in V(x₁)+V(x₂)+V_int.
/// Returns the recorded trajectory and the final state.
pub fn propagate(
    psi: &Psi2D,
    potential: &Grid1D,
    g1d: f64,
    opts: &PropagationOptions,
    probes: &[ProbeGroup],
) -> Result<(Trajectory, Psi2D), CollisionError> {
    if !potential.same_sampling(&psi.grid) {
        return Err(CollisionError::GridMismatch("state and potential grids differ".into()));
    }
    if probes.iter().flat_map(|g| &g.states).any(|s| !s.grid.same_sampling(&psi.grid)) {
        return Err(CollisionError::GridMismatch("probe grid differs from state grid".into()));
    }
    if !(opts.dt > 0.0) || opts.record_every == 0 {
        return Err(CollisionError::InvalidRequest("dt must be positive and record_every nonzero".into()));
    }
    if !(g1d >= 0.0) {
        return Err(CollisionError::InvalidRequest(format!("g1d = {g1d:e}")));
    }
    let n0 = psi.norm_sqr();
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(CollisionError::InvalidRequest(format!("initial norm {n0}")));
    }
    let dx = psi.grid.spacing;
    let mut stepper = Stepper::new(potential, g1d, opts.dt, opts.contact);
    let mut traj = Trajectory { populations: vec![Vec::new(); probes.len()], ..Default::default() };

    // accuracy guard on the potential phase per step where the state lives
    let peak = psi.amps.iter().fold(0.0f64, |m, a| m.max(a.norm_sqr()));
    let e_max = psi
        .amps
        .iter()
        .zip(&stepper.v_energy)
        .filter(|(a, _)| a.norm_sqr() > 1e-10 * peak)
        .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    let phase_per_step = opts.dt * e_max / HBAR;
    if phase_per_step > 0.5 {
        traj.warnings.push(format!("dt·E_max/ħ = {phase_per_step:.3} exceeds 0.5"));
    }

    let mut cur = psi.clone();
    let mut step = 0usize;
    loop {
        let norm = cur.norm_sqr();
        let tol = 1e-8 * (step as f64 / 1000.0).max(1.0);
        if (norm - 1.0).abs() > tol {
            return Err(CollisionError::Unstable { drift: norm - 1.0, steps: step });
        }
        traj.times.push(step as f64 * opts.dt);
        traj.overlaps.push(psi.inner(&cur));
        traj.norms.push(norm);
        traj.energy.push(stepper.energy(&cur.amps, dx));
        for (series, group) in traj.populations.iter_mut().zip(probes) {
            series.push(group.states.iter().map(|s| s.inner(&cur).norm_sqr()).sum());
        }
        if step >= opts.n_steps {
            break;
        }
        let m = opts.record_every.min(opts.n_steps - step);
        stepper.advance(&mut cur.amps, m);
        step += m;
    }
    Ok((traj, cur))
}

/// F(t) = |⟨Ψ(0)|Ψ(t)⟩|².
pub fn revival_fidelity(traj: &Trajectory) -> Vec<f64> {
    traj.overlaps.iter().map(|o| o.norm_sqr()).collect()
}

/// Continuous argument of an overlap series. The trivial rotation e^{−iE₀t/ħ}
/// at the initial energy is removed before nearest-branch continuation and
/// added back afterwards, so only the slow remainder has to be resolved by the
/// recording.
pub fn unwrapped_phase(traj: &Trajectory) -> Result<Vec<f64>, CollisionError> {
    let e0 = traj.energy.first().copied().unwrap_or(0.0);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out = Vec::with_capacity(traj.overlaps.len());
    let mut prev = 0.0;
    for (k, o) in traj.overlaps.iter().enumerate() {
        if o.norm() < 1e-6 {
            return Err(CollisionError::PhaseGap { magnitude: o.norm(), time: traj.times[k] });
        }
        let carrier = -e0 * traj.times[k] / HBAR;
        let raw = (o * Complex64::from_polar(1.0, -carrier)).arg();
        let v = if k == 0 { raw } else { raw + two_pi * ((prev - raw) / two_pi).round() };
        out.push(v);
        prev = v;
    }
    Ok(out.iter().zip(&traj.times).map(|(v, t)| v - e0 * t / HBAR).collect())
}

/// Largest sample-to-sample step of the demodulated phase (should stay below π/2).
pub fn max_phase_step(traj: &Trajectory) -> Result<f64, CollisionError> {
    let e0 = traj.energy.first().copied().unwrap_or(0.0);
    let p = unwrapped_phase(traj)?;
    Ok(p.windows(2)
        .zip(traj.times.windows(2))
        .map(|(w, t)| (w[1] - w[0] + e0 * (t[1] - t[0]) / HBAR).abs())
        .fold(0.0, f64::max))
}

/// φ(t) = φ_ee + φ_gg − 2φ_ge, referenced to t = 0.
pub fn gate_phase(gg: &Trajectory, ge: &Trajectory, ee: &Trajectory) -> Result<Vec<f64>, CollisionError> {
    if gg.times != ge.times || gg.times != ee.times {
        return Err(CollisionError::InvalidRequest("trajectories do not share a time axis".into()));
    }
    let (pgg, pge, pee) = (unwrapped_phase(gg)?, unwrapped_phase(ge)?, unwrapped_phase(ee)?);
    let phi: Vec<f64> = (0..pgg.len()).map(|k| pee[k] + pgg[k] - 2.0 * pge[k]).collect();
    let phi0 = phi.first().copied().unwrap_or(0.0);
    Ok(phi.into_iter().map(|p| p - phi0).collect())
}

/// Phase reduced to (−π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = phi - two_pi * (phi / two_pi).round();
    if r <= -std::f64::consts::PI {
        r + two_pi
    } else {
        r
    }
}

/// Probe groups for both-atoms-in-one-well leakage: (Φ_ge, Φ_ee).
pub fn leakage_probes(basis: &LocalizedBasis) -> Result<[ProbeGroup; 2], CollisionError> {
    let g = &basis.grid;
    let mut ge = Vec::new();
    for (gw, ew) in [(&basis.g_left, &basis.e_left), (&basis.g_right, &basis.e_right)] {
        ge.push(product_state(gw, ew, g, false)?);
        ge.push(product_state(ew, gw, g, false)?);
    }
    let ee = vec![
        product_state(&basis.e_left, &basis.e_left, g, false)?,
        product_state(&basis.e_right, &basis.e_right, g, false)?,
    ];
    Ok([ProbeGroup { name: "phi_ge".into(), states: ge }, ProbeGroup { name: "phi_ee".into(), states: ee }])
}

/// Populations (P_Φge, P_Φee) of a single state.
pub fn undesired_populations(psi: &Psi2D, basis: &LocalizedBasis) -> Result<(f64, f64), CollisionError> {
    if !psi.grid.same_sampling(&basis.grid) {
        return Err(CollisionError::GridMismatch("basis and state grids differ".into()));
    }
    let [ge, ee] = leakage_probes(basis)?;
    let pop = |g: &ProbeGroup| g.states.iter().map(|s| s.inner(psi).norm_sqr()).sum::<f64>();
    Ok((pop(&ge), pop(&ee)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOptions {
    pub propagation: PropagationOptions,
    /// Symmetrize the initial product states under exchange.
    pub symmetrize: bool,
    /// Window searched for τ*, s.
    pub tau_window: (f64, f64),
    /// Run the three trajectories on the rayon pool instead of one after another.
    pub concurrent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRun {
    pub times: Vec<f64>,
    pub f_gg: Vec<f64>,
    pub f_ge: Vec<f64>,
    pub f_ee: Vec<f64>,
    pub phi: Vec<f64>,
    pub p_phi_ge: Vec<f64>,
    pub p_phi_ee: Vec<f64>,
    pub energy_gg: Vec<f64>,
    pub energy_ge: Vec<f64>,
    pub energy_ee: Vec<f64>,
    pub g1d: f64,
    pub warnings: Vec<String>,
    pub tau_star: Option<GatePoint>,
}

/// Gate figures of merit at one recorded time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatePoint {
    pub index: usize,
    pub time: f64,
    pub f_ge: f64,
    pub f_ee: f64,
    pub phi: f64,
}

impl GateRun {
    pub fn min_f_gg(&self) -> f64 {
        self.f_gg.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Largest relative ⟨H⟩ deviation of the gg, ge and ee trajectories.
    pub fn energy_drifts(&self) -> [f64; 3] {
        [&self.energy_gg, &self.energy_ge, &self.energy_ee].map(|e| relative_drift(e))
    }

    pub fn max_leakage(&self) -> (f64, f64) {
        let mx = |v: &[f64]| v.iter().cloned().fold(0.0f64, f64::max);
        (mx(&self.p_phi_ge), mx(&self.p_phi_ee))
    }
}

/// τ* = argmax of min(F_ge, F_ee) over recorded times inside `window`.
pub fn select_tau(times: &[f64], f_ge: &[f64], f_ee: &[f64], phi: &[f64], window: (f64, f64)) -> Option<GatePoint> {
    let mut best: Option<GatePoint> = None;
    for (k, &t) in times.iter().enumerate() {
        if t < window.0 || t > window.1 {
            continue;
        }
        let score = f_ge[k].min(f_ee[k]);
        if best.is_none_or(|b| score > b.f_ge.min(b.f_ee)) {
            best = Some(GatePoint { index: k, time: t, f_ge: f_ge[k], f_ee: f_ee[k], phi: phi[k] });
        }
    }
    best
}

/// Propagates the gg, ge and ee initial states concurrently and assembles the
/// gate observables.
pub fn run_gate(
    potential: &Grid1D,
    basis: &LocalizedBasis,
    g1d: f64,
    opts: &GateOptions,
) -> Result<GateRun, CollisionError> {
    if !potential.same_sampling(&basis.grid) {
        return Err(CollisionError::GridMismatch("basis and potential grids differ".into()));
    }
    let grid = &basis.grid;
    let sym = opts.symmetrize;
    let gg = product_state(&basis.g_left, &basis.g_right, grid, sym)?;
    let ge = product_state(&basis.g_left, &basis.e_right, grid, sym)?;
    let ee = product_state(&basis.e_left, &basis.e_right, grid, sym)?;
    let probes = leakage_probes(basis)?;
    let p = &opts.propagation;
    let run = |s: &Psi2D, pr: &[ProbeGroup]| propagate(s, potential, g1d, p, pr).map(|(t, _)| t);
    let (r_gg, (r_ge, r_ee)) = if opts.concurrent {
        rayon::join(|| run(&gg, &[]), || rayon::join(|| run(&ge, &probes), || run(&ee, &probes)))
    } else {
        (run(&gg, &[]), (run(&ge, &probes), run(&ee, &probes)))
    };
    let (t_gg, t_ge, t_ee) = (r_gg?, r_ge?, r_ee?);
    let phi = gate_phase(&t_gg, &t_ge, &t_ee)?;
    let mut warnings = Vec::new();
    for (name, t) in [("gg", &t_gg), ("ge", &t_ge), ("ee", &t_ee)] {
        let step = max_phase_step(t)?;
        if step > 0.5 * std::f64::consts::PI {
            warnings.push(format!("{name}: phase step {step:.3} rad between samples; refine recording"));
        }
    }
    let f_gg = revival_fidelity(&t_gg);
    let f_ge = revival_fidelity(&t_ge);
    let f_ee = revival_fidelity(&t_ee);
    let tau_star = select_tau(&t_ge.times, &f_ge, &f_ee, &phi, opts.tau_window);
    for (name, t) in [("gg", &t_gg), ("ge", &t_ge), ("ee", &t_ee)] {
        warnings.extend(t.warnings.iter().map(|w| format!("{name}: {w}")));
        // the discrete contact feeds the grid cutoff, where Strang splitting is least accurate
        let drift = t.energy_drift();
        if drift > ENERGY_DRIFT_WARN {
            warnings.push(format!("{name}: relative <H> drift {drift:.2e}; reduce dt or use the gaussian contact"));
        }
    }
    Ok(GateRun {
        times: t_ge.times.clone(),
        f_gg,
        f_ge,
        f_ee,
        phi,
        p_phi_ge: t_ge.populations[0].clone(),
        p_phi_ee: t_ee.populations[1].clone(),
        energy_gg: t_gg.energy,
        energy_ge: t_ge.energy.clone(),
        energy_ee: t_ee.energy.clone(),
        g1d,
        warnings,
        tau_star,
    })
}
