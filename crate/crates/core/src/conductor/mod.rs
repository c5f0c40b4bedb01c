//! Pipeline orchestration: runs the requested stages, writes reports, series
//! and plots atomically into the output directory, and records a manifest.

pub mod config;
pub mod plot;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chipfield::{ChipConfig, Vec3};
use crate::collider2d::{g1d_coupling, run_gate, wrap_phase, GateOptions, GateRun, InteractionParams, PropagationOptions};
use crate::constants::{GAUSS, PLANCK, SPEED_OF_LIGHT};
use crate::gatelogic::{verify_scheme, Scheme, SchemeKind, SchemeReport};
use crate::raman::{
    k_from_eta, lamb_dicke, pi_pulse_duration, rabi_chain, sideband_condition, sideband_probabilities,
    single_well_eigenstates, well_omega, Branch, RamanSetup, Scheme as RamanScheme, SidebandBasis,
};
use crate::spectrum1d::{localized_basis, solve_eigenstates, EigenSet, KineticKind, LocalizedBasis};
use crate::trapfinder::{
    analyze_trap, axis_potential, tune_bias, AxisPotential, BiasComponent, BiasScanPoint, CharacterizeOptions,
    DescentOptions, TrapCharacterization, TuneOptions,
};

pub use config::{ConfigError, RunConfig, Stage, SweepSpec};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("sweep: {0}")]
    Sweep(String),
}

/// Execution switches that must not influence any artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Use the rayon pool for gate trajectories and sweep rows.
    pub concurrent: bool,
    pub plots: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { concurrent: true, plots: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub component: BiasComponent,
    pub target_field: f64,
    pub original_bias: f64,
    pub tuned_bias: f64,
    pub scan: Vec<BiasScanPoint>,
}

#[derive(Debug, Clone)]
pub struct TrapOutcome {
    pub chip: ChipConfig<f64>,
    pub charac: TrapCharacterization,
    pub tuning: Option<TuningRecord>,
}

#[derive(Debug, Clone)]
pub struct SpectrumOutcome {
    pub axis: AxisPotential,
    pub eig: EigenSet,
    pub basis: LocalizedBasis,
}

#[derive(Debug, Clone)]
pub struct GateOutcome {
    pub params: InteractionParams,
    pub run: GateRun,
}

/// In-memory results of the stages that ran.
#[derive(Debug, Clone, Default)]
pub struct Results {
    pub trap: Option<TrapOutcome>,
    pub spectrum: Option<SpectrumOutcome>,
    pub gate: Option<GateOutcome>,
    pub raman: Option<RamanReport>,
    pub scheme: Option<Vec<SchemeReport>>,
    pub records: Vec<StageRecord>,
}

impl Results {
    pub fn complete(&self) -> bool {
        self.records.iter().all(|r| r.status == StageStatus::Ok)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    pub error: Option<String>,
}

/// Requested stages plus everything they depend on, in execution order.
pub fn stage_closure(stages: &[Stage]) -> Vec<Stage> {
    let mut need: Vec<Stage> = Vec::new();
    let mut stack: Vec<Stage> = stages.to_vec();
    while let Some(s) = stack.pop() {
        if !need.contains(&s) {
            need.push(s);
            stack.extend_from_slice(s.requires());
        }
    }
    Stage::ALL.into_iter().filter(|s| need.contains(s)).collect()
}

pub fn compute_trap(cfg: &RunConfig) -> Result<TrapOutcome, String> {
    let mut chip = cfg.chip.to_chip();
    let seeds: Vec<Vec3<f64>> = cfg.trap.seeds.iter().map(|s| Vec3::new(s[0].0, s[1].0, s[2].0)).collect();
    let descent = DescentOptions { grad_tol: cfg.trap.grad_tol, ..Default::default() };
    let mut tuning = None;
    if let Some(t) = &cfg.trap.tune {
        let opts = TuneOptions { seeds: seeds.clone(), descent, ..Default::default() };
        let idx = match t.component {
            BiasComponent::X => 0,
            BiasComponent::Y => 1,
        };
        let original = chip.bias.component(idx);
        let (tuned, scan) = tune_bias(&chip, t.target_field.0, t.component, &opts).map_err(|e| e.to_string())?;
        tuning = Some(TuningRecord {
            component: t.component,
            target_field: t.target_field.0,
            original_bias: original,
            tuned_bias: tuned.bias.component(idx),
            scan,
        });
        chip = tuned;
    }
    let copts = CharacterizeOptions { hessian_step: cfg.trap.hessian_step.0, ..Default::default() };
    let charac = analyze_trap(&chip, &seeds, &descent, &copts).map_err(|e| e.to_string())?;
    Ok(TrapOutcome { chip, charac, tuning })
}

/// Axis potential, eigenstates and well basis on one grid.
pub fn compute_spectrum_on(
    trap: &TrapOutcome,
    halfwidth: f64,
    n: usize,
    n_states: usize,
    kinetic: KineticKind,
    relax: bool,
) -> Result<SpectrumOutcome, String> {
    let axis = axis_potential(&trap.chip, &trap.charac, halfwidth, n, relax).map_err(|e| e.to_string())?;
    let eig = solve_eigenstates(&axis.grid, n_states, kinetic).map_err(|e| e.to_string())?;
    let basis = localized_basis(&eig).map_err(|e| e.to_string())?;
    Ok(SpectrumOutcome { axis, eig, basis })
}

pub fn compute_spectrum(cfg: &RunConfig, trap: &TrapOutcome) -> Result<SpectrumOutcome, String> {
    let s = &cfg.spectrum;
    compute_spectrum_on(trap, s.halfwidth.0, s.grid_n, s.n_states, s.kinetic, cfg.trap.relax_axis)
}

/// Transverse angular frequency seen by the colliding pair: geometric mean of
/// the two stiff trap frequencies.
pub fn omega_perp(charac: &TrapCharacterization) -> f64 {
    2.0 * std::f64::consts::PI * (charac.freqs[1] * charac.freqs[2]).sqrt()
}

pub fn compute_gate(cfg: &RunConfig, trap: &TrapOutcome, concurrent: bool) -> Result<GateOutcome, String> {
    let d = &cfg.dynamics;
    let spec = compute_spectrum_on(trap, d.halfwidth.0, d.grid_n, 8.min(d.grid_n / 4), cfg.spectrum.kinetic, cfg.trap.relax_axis)?;
    let params = InteractionParams {
        scattering_length: d.scattering_length.0,
        omega_perp: omega_perp(&trap.charac),
        mass: trap.chip.species.mass,
        transverse_correction: d.transverse_correction,
    };
    let g1d = g1d_coupling(&params).map_err(|e| e.to_string())?;
    let opts = GateOptions {
        propagation: PropagationOptions { dt: d.dt.0, n_steps: d.steps(), record_every: d.record_every, contact: d.contact },
        symmetrize: d.symmetrize,
        tau_window: (d.tau_window[0].0, d.tau_window[1].0),
        concurrent,
    };
    let run = run_gate(&spec.axis.grid, &spec.basis, g1d, &opts).map_err(|e| e.to_string())?;
    Ok(GateOutcome { params, run })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidebandRow {
    pub eta: f64,
    /// 1/m
    pub k_eff: f64,
    pub probabilities: Vec<f64>,
    pub ratio_20_10: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidebandTable {
    pub basis: String,
    /// Level spacing used for the η↔k mapping, rad/s.
    pub omega_well: f64,
    pub rows: Vec<SidebandRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamanReport {
    pub k_mw: f64,
    pub eta_mw: f64,
    pub k_opt: f64,
    pub eta_opt: f64,
    /// rad/s
    pub omega0: f64,
    pub omega_sideband: f64,
    pub omega_sideband_hz: f64,
    pub pi_pulse_duration: f64,
    /// k₁ − k₂ in 1/m and 1/cm.
    pub delta_k_duplication: f64,
    pub delta_k_swap_desired: f64,
    pub delta_k_swap_undesired: f64,
    pub delta_k_duplication_per_cm: f64,
    pub delta_k_swap_desired_per_cm: f64,
    pub delta_k_swap_undesired_per_cm: f64,
    pub doublet: SidebandTable,
    pub single_well: SidebandTable,
}

fn sideband_table(eig: &EigenSet, basis: SidebandBasis, name: &str, etas: &[f64], n_max: usize) -> Result<SidebandTable, String> {
    let omega_well = well_omega(eig, basis).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for &eta in etas {
        let k = k_from_eta(eta, eig.grid.mass, omega_well);
        let p = sideband_probabilities(eig, k, n_max, basis).map_err(|e| e.to_string())?;
        let ratio = if p[1] > 0.0 { p[2] / p[1] } else { f64::NAN };
        rows.push(SidebandRow { eta, k_eff: k, probabilities: p, ratio_20_10: ratio });
    }
    Ok(SidebandTable { basis: name.into(), omega_well, rows })
}

pub fn compute_raman(cfg: &RunConfig, trap: &TrapOutcome, spec: &SpectrumOutcome) -> Result<RamanReport, String> {
    let r = &cfg.raman;
    let tau = 2.0 * std::f64::consts::PI;
    let mass = trap.chip.species.mass;
    let nu_hf = trap.chip.species.hyperfine_freq;
    let k_mw = tau * nu_hf / SPEED_OF_LIGHT;
    let k_opt = 2.0 * tau / r.optical_wavelength.0;
    let mw = RamanSetup {
        rabi_1: tau * r.rabi_1.0,
        rabi_2: tau * r.rabi_2.0,
        detuning: tau * r.detuning.0,
        k_effective: k_mw,
        trap_omega: tau * r.trap_freq.0,
        mass,
    };
    let e = |x: crate::raman::RamanError| x.to_string();
    let eta_mw = lamb_dicke(&mw).map_err(e)?;
    let eta_opt = lamb_dicke(&RamanSetup { k_effective: k_opt, ..mw }).map_err(e)?;
    let (omega0, omega_sideband) = rabi_chain(&mw).map_err(e)?;
    let cond = |s, b| sideband_condition(r.trap_freq.0, nu_hf, s, b).map_err(e);
    let dup = cond(RamanScheme::Duplication, Branch::Desired)?;
    let swap = cond(RamanScheme::Swap, Branch::Desired)?;
    let swap_bad = cond(RamanScheme::Swap, Branch::Undesired)?;

    let doublet = sideband_table(&spec.eig, SidebandBasis::Doublet, "doublet", &r.etas, r.n_max)?;
    // hard walls at the barrier top between the wells
    let g = &spec.axis.grid;
    let half = 0.5 * trap.charac.separation;
    let split = (0..g.len())
        .filter(|&k| g.x(k).abs() < half)
        .max_by(|&a, &b| g.values[a].total_cmp(&g.values[b]))
        .map(|k| g.x(k))
        .unwrap_or(0.0);
    let single = single_well_eigenstates(&spec.eig, split, r.n_max + 2).map_err(e)?;
    let single_well = sideband_table(&single, SidebandBasis::Direct, "single_well", &r.etas, r.n_max)?;
    Ok(RamanReport {
        k_mw,
        eta_mw,
        k_opt,
        eta_opt,
        omega0,
        omega_sideband,
        omega_sideband_hz: omega_sideband / tau,
        pi_pulse_duration: pi_pulse_duration(omega_sideband),
        delta_k_duplication: dup,
        delta_k_swap_desired: swap,
        delta_k_swap_undesired: swap_bad,
        delta_k_duplication_per_cm: dup / 100.0,
        delta_k_swap_desired_per_cm: swap / 100.0,
        delta_k_swap_undesired_per_cm: swap_bad / 100.0,
        doublet,
        single_well,
    })
}

pub fn compute_scheme(cfg: &RunConfig) -> Result<Vec<SchemeReport>, String> {
    let s = &cfg.scheme;
    [SchemeKind::Duplication, SchemeKind::Swap]
        .into_iter()
        .map(|kind| verify_scheme(&Scheme { kind, phase: s.phase }, s.trials, s.seed).map_err(|e| e.to_string()))
        .collect()
}

/// Runs the requested stages and their dependencies in memory. A failing stage
/// marks its dependents as skipped; independent stages still run.
pub fn compute(cfg: &RunConfig, stages: &[Stage], concurrent: bool) -> Results {
    let mut res = Results::default();
    for stage in stage_closure(stages) {
        let missing: Vec<&str> = stage
            .requires()
            .iter()
            .filter(|d| !res.records.iter().any(|r| r.stage == **d && r.status == StageStatus::Ok))
            .map(|d| d.name())
            .collect();
        if !missing.is_empty() {
            res.records.push(StageRecord {
                stage,
                status: StageStatus::Skipped,
                error: Some(format!("requires {}", missing.join(", "))),
            });
            continue;
        }
        let outcome: Result<(), String> = match stage {
            Stage::Trap => compute_trap(cfg).map(|t| res.trap = Some(t)),
            Stage::Spectrum => compute_spectrum(cfg, res.trap.as_ref().expect("dependency ran")).map(|s| res.spectrum = Some(s)),
            Stage::Gate => compute_gate(cfg, res.trap.as_ref().expect("dependency ran"), concurrent).map(|g| res.gate = Some(g)),
            Stage::Raman => compute_raman(cfg, res.trap.as_ref().expect("dependency ran"), res.spectrum.as_ref().expect("dependency ran"))
                .map(|r| res.raman = Some(r)),
            Stage::Scheme => compute_scheme(cfg).map(|s| res.scheme = Some(s)),
        };
        res.records.push(match outcome {
            Ok(()) => StageRecord { stage, status: StageStatus::Ok, error: None },
            Err(e) => StageRecord { stage, status: StageStatus::Failed, error: Some(e) },
        });
    }
    res
}

// ---------------------------------------------------------------- reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimumReport {
    pub position: [f64; 3],
    pub field: f64,
    pub field_gauss: f64,
    pub potential: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapReport {
    pub minima: Vec<MinimumReport>,
    pub beta: f64,
    pub hessian_axis_angle: f64,
    pub freqs: [f64; 3],
    pub freqs_khz: [f64; 3],
    pub well_freqs: [[f64; 3]; 2],
    pub axis: [f64; 3],
    pub midpoint: [f64; 3],
    pub separation: f64,
    pub separation_um: f64,
    pub height_z0: f64,
    pub height_z0_um: f64,
    pub barrier_position: [f64; 3],
    pub barrier_field: f64,
    pub barrier_field_gauss: f64,
    pub barrier_field_on_segment: f64,
    pub barrier_field_on_segment_gauss: f64,
    pub barrier_height: f64,
    pub barrier_height_hz: f64,
    pub bias: [f64; 3],
    pub bias_gauss: [f64; 3],
    pub tuning: Option<TuningRecord>,
}

pub fn trap_report(t: &TrapOutcome) -> TrapReport {
    let c = &t.charac;
    TrapReport {
        minima: c
            .minima
            .iter()
            .map(|m| MinimumReport {
                position: m.position.to_array(),
                field: m.field_magnitude,
                field_gauss: m.field_magnitude / GAUSS,
                potential: m.potential,
            })
            .collect(),
        beta: c.beta,
        hessian_axis_angle: c.hessian_axis_angle,
        freqs: c.freqs,
        freqs_khz: c.freqs.map(|f| f / 1e3),
        well_freqs: [c.well_modes[0].freqs, c.well_modes[1].freqs],
        axis: c.axis.to_array(),
        midpoint: c.midpoint.to_array(),
        separation: c.separation,
        separation_um: c.separation * 1e6,
        height_z0: c.height_z0,
        height_z0_um: c.height_z0 * 1e6,
        barrier_position: c.barrier_position.to_array(),
        barrier_field: c.barrier_field,
        barrier_field_gauss: c.barrier_field / GAUSS,
        barrier_field_on_segment: c.barrier_field_on_segment,
        barrier_field_on_segment_gauss: c.barrier_field_on_segment / GAUSS,
        barrier_height: c.barrier_height,
        barrier_height_hz: c.barrier_height / PLANCK,
        bias: t.chip.bias.to_array(),
        bias_gauss: t.chip.bias.to_array().map(|b| b / GAUSS),
        tuning: t.tuning.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub grid_n: usize,
    pub energies: Vec<f64>,
    /// E_n / (h ν_x′) with ν_x′ the longitudinal trap frequency.
    pub energies_over_hnu: Vec<f64>,
    pub doublet_splittings: [f64; 2],
    pub doublet_splittings_hz: [f64; 2],
    pub well_centers: [f64; 4],
    pub density_overlaps: [f64; 2],
    pub barrier_height: f64,
    pub axis_shift: f64,
}

pub fn spectrum_summary(trap: &TrapOutcome, s: &SpectrumOutcome) -> SpectrumSummary {
    let g = &s.axis.grid;
    let hnu = PLANCK * trap.charac.freqs[0];
    let b = &s.basis;
    let half = 0.5 * trap.charac.separation;
    let barrier = (0..g.len()).filter(|&k| g.x(k).abs() < half).map(|k| g.values[k]).fold(0.0, f64::max);
    SpectrumSummary {
        grid_n: g.len(),
        energies: s.eig.energies.clone(),
        energies_over_hnu: s.eig.energies.iter().map(|e| e / hnu).collect(),
        doublet_splittings: b.doublet_splittings,
        doublet_splittings_hz: b.doublet_splittings.map(|d| d / PLANCK),
        well_centers: [&b.g_left, &b.g_right, &b.e_left, &b.e_right].map(|f| g.mean_position(f)),
        density_overlaps: b.density_overlaps(),
        barrier_height: barrier,
        axis_shift: s.axis.shift,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSummary {
    pub scattering_length: f64,
    pub omega_perp: f64,
    pub transverse_correction: bool,
    pub g1d: f64,
    pub grid_n: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub symmetrize: bool,
    pub tau_star: Option<f64>,
    pub f_ge: Option<f64>,
    pub f_ee: Option<f64>,
    pub phi: Option<f64>,
    pub phi_over_pi: Option<f64>,
    /// φ(τ*) reduced to (−π, π], over π.
    pub phi_wrapped_over_pi: Option<f64>,
    pub min_f_gg: f64,
    pub max_p_phi_ge: f64,
    pub max_p_phi_ee: f64,
    /// Relative ⟨H⟩ drift of the gg, ge and ee trajectories.
    pub energy_drift: [f64; 3],
    pub leak_threshold: f64,
    pub leakage_within_threshold: bool,
    pub warnings: Vec<String>,
}

pub fn gate_summary(cfg: &RunConfig, g: &GateOutcome) -> GateSummary {
    let r = &g.run;
    let (lge, lee) = r.max_leakage();
    let pi = std::f64::consts::PI;
    GateSummary {
        scattering_length: g.params.scattering_length,
        omega_perp: g.params.omega_perp,
        transverse_correction: g.params.transverse_correction,
        g1d: r.g1d,
        grid_n: cfg.dynamics.grid_n,
        dt: cfg.dynamics.dt.0,
        n_steps: cfg.dynamics.steps(),
        symmetrize: cfg.dynamics.symmetrize,
        tau_star: r.tau_star.map(|t| t.time),
        f_ge: r.tau_star.map(|t| t.f_ge),
        f_ee: r.tau_star.map(|t| t.f_ee),
        phi: r.tau_star.map(|t| t.phi),
        phi_over_pi: r.tau_star.map(|t| t.phi / pi),
        phi_wrapped_over_pi: r.tau_star.map(|t| wrap_phase(t.phi) / pi),
        min_f_gg: r.min_f_gg(),
        max_p_phi_ge: lge,
        max_p_phi_ee: lee,
        energy_drift: r.energy_drifts(),
        leak_threshold: cfg.dynamics.leak_threshold,
        leakage_within_threshold: lge < cfg.dynamics.leak_threshold && lee < cfg.dynamics.leak_threshold,
        warnings: r.warnings.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub stages: Vec<StageRecord>,
    pub spectrum: Option<SpectrumSummary>,
    pub gate: Option<GateSummary>,
}

/// Scalar figures of merit per stage, used for sweep tables.
pub fn metrics(res: &Results) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    if let Some(t) = &res.trap {
        let c = &t.charac;
        m.insert("b_min_gauss".into(), c.minima[0].field_magnitude / GAUSS);
        m.insert("barrier_gauss".into(), c.barrier_field / GAUSS);
        m.insert("beta".into(), c.beta);
        m.insert("separation_um".into(), c.separation * 1e6);
        m.insert("z0_um".into(), c.height_z0 * 1e6);
        for (k, name) in ["f_long_khz", "f_trans_khz", "f_z_khz"].iter().enumerate() {
            m.insert((*name).into(), c.freqs[k] / 1e3);
        }
        if let Some(tu) = &t.tuning {
            m.insert("tuned_bias_gauss".into(), tu.tuned_bias / GAUSS);
        }
    }
    if let Some(s) = &res.spectrum {
        m.insert("splitting_g_hz".into(), s.basis.doublet_splittings[0] / PLANCK);
        m.insert("splitting_e_hz".into(), s.basis.doublet_splittings[1] / PLANCK);
    }
    if let Some(g) = &res.gate {
        let r = &g.run;
        if let Some(t) = r.tau_star {
            m.insert("tau_star_ms".into(), t.time * 1e3);
            m.insert("f_ge".into(), t.f_ge);
            m.insert("f_ee".into(), t.f_ee);
            m.insert("phi_over_pi".into(), t.phi / std::f64::consts::PI);
        }
        m.insert("g1d".into(), r.g1d);
        m.insert("min_f_gg".into(), r.min_f_gg());
        let (a, b) = r.max_leakage();
        m.insert("max_p_phi_ge".into(), a);
        m.insert("max_p_phi_ee".into(), b);
        m.insert("max_energy_drift".into(), r.energy_drifts().into_iter().fold(0.0, f64::max));
    }
    if let Some(r) = &res.raman {
        for row in &r.doublet.rows {
            m.insert(format!("ratio_20_10_eta_{}", row.eta), row.ratio_20_10);
        }
    }
    if let Some(s) = &res.scheme {
        m.insert("scheme_max_deviation".into(), s.iter().map(|r| r.max_deviation).fold(0.0, f64::max));
    }
    m
}

// ---------------------------------------------------------------- files

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub stages: Vec<StageRecord>,
    pub files: Vec<FileRecord>,
    pub complete: bool,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Collects artifacts and writes each one as temp file + rename.
struct Writer {
    dir: PathBuf,
    files: Vec<FileRecord>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, PipelineError> {
        std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io { path: dir.display().to_string(), source })?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        debug_assert!(!name.contains('/') && !name.contains(".."));
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let io = |source, p: &Path| PipelineError::Io { path: p.display().to_string(), source };
        std::fs::write(&tmp, bytes).map_err(|e| io(e, &tmp))?;
        std::fs::rename(&tmp, &path).map_err(|e| io(e, &path))?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileRecord { name: name.into(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        self.put(name, text.as_bytes())
    }
}

/// One CSV cell with 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_table(header: &[&str], columns: &[&[f64]]) -> String {
    let rows = columns.iter().map(|c| c.len()).min().unwrap_or(0);
    let mut out = header.join(",");
    out.push('\n');
    for k in 0..rows {
        let line: Vec<String> = columns.iter().map(|c| fmt_num(c[k])).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn eigenstates_csv(s: &SpectrumOutcome) -> String {
    let g = &s.axis.grid;
    let x = g.positions();
    let b = &s.basis;
    let st = &s.eig.states;
    csv_table(
        &["x", "V", "psi0", "psi1", "psi2", "psi3", "gL", "gR", "eL", "eR"],
        &[&x, &g.values, &st[0], &st[1], &st[2], &st[3], &b.g_left, &b.g_right, &b.e_left, &b.e_right],
    )
}

fn gate_csv(r: &GateRun) -> String {
    csv_table(
        &["t", "F_gg", "F_ge", "F_ee", "phi", "P_phi_ge", "P_phi_ee", "E_gg", "E_ge", "E_ee"],
        &[&r.times, &r.f_gg, &r.f_ge, &r.f_ee, &r.phi, &r.p_phi_ge, &r.p_phi_ee, &r.energy_gg, &r.energy_ge, &r.energy_ee],
    )
}

fn write_plots(w: &mut Writer, res: &Results) -> Result<(), PipelineError> {
    use plot::{line_chart, Series};
    const MAX_POINTS: usize = 1500;
    if let Some(s) = &res.spectrum {
        let g = &s.axis.grid;
        let x_um: Vec<f64> = g.positions().iter().map(|x| x * 1e6).collect();
        let v_khz: Vec<f64> = g.values.iter().map(|v| v / PLANCK / 1e3).collect();
        // well states drawn at their mean energy, scaled for visibility
        let peak = v_khz.iter().cloned().fold(0.0, f64::max).max(1e-30);
        let b = &s.basis;
        let e = &s.eig.energies;
        let levels = [(0.5 * (e[0] + e[1]), &b.g_left, &b.g_right), (0.5 * (e[2] + e[3]), &b.e_left, &b.e_right)];
        let mut curves = Vec::new();
        for (en, l, r) in levels {
            let base = en / PLANCK / 1e3;
            let amp = |f: &Vec<f64>| {
                let m = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                f.iter().map(|v| base + 0.08 * peak * v / m).collect::<Vec<f64>>()
            };
            curves.push(amp(l));
            curves.push(amp(r));
        }
        let names = ["gL", "gR", "eL", "eR"];
        let mut series = vec![Series { label: "V(x′)", x: &x_um, y: &v_khz }];
        for (k, c) in curves.iter().enumerate() {
            series.push(Series { label: names[k], x: &x_um, y: c });
        }
        w.put("potential.svg", line_chart("Axis potential and well states", "x′ (μm)", "V / h (kHz)", &series, MAX_POINTS).as_bytes())?;
    }
    if let Some(g) = &res.gate {
        let r = &g.run;
        let t_ms: Vec<f64> = r.times.iter().map(|t| t * 1e3).collect();
        let fid = [
            Series { label: "F_gg", x: &t_ms, y: &r.f_gg },
            Series { label: "F_ge", x: &t_ms, y: &r.f_ge },
            Series { label: "F_ee", x: &t_ms, y: &r.f_ee },
        ];
        w.put("fidelity.svg", line_chart("Revival fidelities", "t (ms)", "F", &fid, MAX_POINTS).as_bytes())?;
        let phi_pi: Vec<f64> = r.phi.iter().map(|p| p / std::f64::consts::PI).collect();
        w.put(
            "phase.svg",
            line_chart("Gate phase", "t (ms)", "φ / π", &[Series { label: "φ/π", x: &t_ms, y: &phi_pi }], MAX_POINTS).as_bytes(),
        )?;
        let leak = [Series { label: "P_Φge", x: &t_ms, y: &r.p_phi_ge }, Series { label: "P_Φee", x: &t_ms, y: &r.p_phi_ee }];
        w.put("leakage.svg", line_chart("Same-well populations", "t (ms)", "P", &leak, MAX_POINTS).as_bytes())?;
    }
    Ok(())
}

fn finish(w: Writer, cfg: &RunConfig, records: Vec<StageRecord>) -> Result<Manifest, PipelineError> {
    let mut files = w.files.clone();
    files.sort_by(|a, b| a.name.cmp(&b.name));
    let complete = records.iter().all(|r| r.status == StageStatus::Ok);
    let manifest = Manifest { config_sha256: sha256_hex(cfg.to_json().as_bytes()), stages: records, files, complete };
    let mut w = w;
    w.json("manifest.json", &manifest)?;
    Ok(manifest)
}

/// Runs the stages (plus dependencies) and writes all artifacts into `out`.
/// Stage failures are recorded in the manifest rather than returned as errors.
pub fn run_pipeline(cfg: &RunConfig, stages: &[Stage], out: &Path, opts: &RunOptions) -> Result<Manifest, PipelineError> {
    cfg.validate()?;
    let mut w = Writer::new(out)?;
    let res = compute(cfg, stages, opts.concurrent);
    if let Some(t) = &res.trap {
        w.json("trap_report.json", &trap_report(t))?;
    }
    if let Some(s) = &res.spectrum {
        w.put("eigenstates.csv", eigenstates_csv(s).as_bytes())?;
    }
    if let Some(g) = &res.gate {
        w.put("gate_timeseries.csv", gate_csv(&g.run).as_bytes())?;
    }
    if let Some(r) = &res.raman {
        w.json("raman_report.json", r)?;
    }
    if let Some(s) = &res.scheme {
        w.json("scheme_report.json", s)?;
    }
    let summary = RunSummary {
        config: cfg.clone(),
        stages: res.records.clone(),
        spectrum: match (&res.trap, &res.spectrum) {
            (Some(t), Some(s)) => Some(spectrum_summary(t, s)),
            _ => None,
        },
        gate: res.gate.as_ref().map(|g| gate_summary(cfg, g)),
    };
    w.json("summary.json", &summary)?;
    if opts.plots && cfg.outputs.plots {
        write_plots(&mut w, &res)?;
    }
    finish(w, cfg, res.records)
}

// ---------------------------------------------------------------- sweeps

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: serde_json::Value,
    pub ok: bool,
    pub error: Option<String>,
    pub metrics: BTreeMap<String, f64>,
}

enum Segment<'a> {
    Key(&'a str),
    Index(usize),
}

fn parse_path(path: &str) -> Result<Vec<Segment<'_>>, String> {
    let mut segs = Vec::new();
    for part in path.split('.') {
        let (key, mut rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if key.is_empty() {
            return Err(format!("empty key in {path:?}"));
        }
        segs.push(Segment::Key(key));
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(|| format!("unclosed index in {path:?}"))?;
            let idx = rest[1..close].parse().map_err(|_| format!("bad index in {path:?}"))?;
            segs.push(Segment::Index(idx));
            rest = &rest[close + 1..];
        }
    }
    Ok(segs)
}

/// Replaces the value at a dotted path (`a.b[1].c`); the path must exist.
pub fn set_path(root: &mut serde_json::Value, path: &str, value: serde_json::Value) -> Result<(), String> {
    let mut cur = root;
    for seg in parse_path(path)? {
        cur = match seg {
            Segment::Key(k) => cur.get_mut(k).ok_or_else(|| format!("{path:?}: no field {k:?}"))?,
            Segment::Index(i) => cur.get_mut(i).ok_or_else(|| format!("{path:?}: index {i} out of range"))?,
        };
    }
    *cur = value;
    Ok(())
}

/// Reruns `spec.stage` (with dependencies) for every value. Row failures are
/// recorded and do not stop the sweep; row order follows `spec.values`.
pub fn sweep(cfg: &RunConfig, spec: &SweepSpec, concurrent: bool) -> Result<Vec<SweepRow>, PipelineError> {
    if spec.values.is_empty() {
        return Err(PipelineError::Sweep("no values".into()));
    }
    let mut base = serde_json::to_value(cfg).expect("configuration serializes");
    if let Some(obj) = base.as_object_mut() {
        obj.remove("sweep");
    }
    // resolve the path once up front
    set_path(&mut base.clone(), &spec.parameter, serde_json::Value::Null).map_err(PipelineError::Sweep)?;
    let row = |(index, value): (usize, &serde_json::Value)| {
        let mut v = base.clone();
        let built = set_path(&mut v, &spec.parameter, value.clone())
            .and_then(|_| RunConfig::from_value(v).map_err(|e| e.to_string()));
        match built {
            Err(e) => SweepRow { index, value: value.clone(), ok: false, error: Some(e), metrics: BTreeMap::new() },
            Ok(c) => {
                // rows already run in parallel; keep each row's trajectories sequential
                let res = compute(&c, &[spec.stage], false);
                let error = res.records.iter().find_map(|r| r.error.clone());
                SweepRow { index, value: value.clone(), ok: res.complete(), error, metrics: metrics(&res) }
            }
        }
    };
    let rows = if concurrent {
        spec.values.par_iter().enumerate().map(row).collect()
    } else {
        spec.values.iter().enumerate().map(row).collect()
    };
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut keys: Vec<&String> = rows.iter().flat_map(|r| r.metrics.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut out = String::from("index,value,ok");
    for k in &keys {
        out.push(',');
        out.push_str(k);
    }
    out.push('\n');
    for r in rows {
        let value = r.value.to_string().replace('"', "");
        let _ = write!(out, "{},\"{}\",{}", r.index, value, r.ok);
        for k in &keys {
            out.push(',');
            if let Some(v) = r.metrics.get(*k) {
                out.push_str(&fmt_num(*v));
            }
        }
        out.push('\n');
    }
    out
}

/// Runs the configured sweep and writes sweep.csv, sweep.json and a plot.
pub fn run_sweep(cfg: &RunConfig, out: &Path, opts: &RunOptions) -> Result<(Manifest, Vec<SweepRow>), PipelineError> {
    cfg.validate()?;
    let spec = cfg.sweep.clone().ok_or_else(|| PipelineError::Sweep("configuration has no \"sweep\" section".into()))?;
    let rows = sweep(cfg, &spec, opts.concurrent)?;
    let mut w = Writer::new(out)?;
    w.put("sweep.csv", sweep_csv(&rows).as_bytes())?;
    w.json("sweep.json", &rows)?;
    if opts.plots && cfg.outputs.plots {
        let metric = match spec.stage {
            Stage::Gate => "phi_over_pi",
            Stage::Trap | Stage::Spectrum => "b_min_gauss",
            Stage::Raman => "ratio_20_10_eta_0.05",
            Stage::Scheme => "scheme_max_deviation",
        };
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| {
                let x = match &r.value {
                    serde_json::Value::Number(n) => n.as_f64(),
                    serde_json::Value::String(s) => s.split_whitespace().next().and_then(|t| t.parse().ok()),
                    _ => None,
                }?;
                Some((x, *r.metrics.get(metric)?))
            })
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let svg = plot::line_chart(&format!("Sweep of {}", spec.parameter), &spec.parameter, metric, &[plot::Series { label: metric, x: &x, y: &y }], 1000);
        w.put("sweep.svg", svg.as_bytes())?;
    }
    let records = vec![StageRecord {
        stage: spec.stage,
        status: if rows.iter().all(|r| r.ok) { StageStatus::Ok } else { StageStatus::Failed },
        error: rows.iter().find_map(|r| r.error.clone()),
    }];
    Ok((finish(w, cfg, records)?, rows))
}
