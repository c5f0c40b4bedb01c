use std::f64::consts::PI;
use std::sync::OnceLock;

use chipgate::chipfield::ChipConfig;
use chipgate::collider2d::*;
use chipgate::constants::{HBAR, RB87_MASS};
use chipgate::spectrum1d::*;
use chipgate::trapfinder::*;
use num_complex::Complex64;

const N: usize = 128;
const DT: f64 = 0.25e-6;

struct Fixture {
    grid: Grid1D,
    basis: LocalizedBasis,
    g1d: f64,
}

fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = ChipConfig::<f64>::paper();
        let ch = analyze_trap(&cfg, &default_seeds(), &DescentOptions::default(), &CharacterizeOptions::default()).unwrap();
        let grid = axis_potential(&cfg, &ch, 1.5e-6, N, true).unwrap().grid;
        let eig = solve_eigenstates(&grid, 8, KineticKind::Fourier).unwrap();
        let basis = localized_basis(&eig).unwrap();
        let omega_perp = 2.0 * PI * (ch.freqs[1] * ch.freqs[2]).sqrt();
        let p = InteractionParams { scattering_length: 5.3e-9, omega_perp, mass: cfg.species.mass, transverse_correction: true };
        Fixture { grid, basis, g1d: g1d_coupling(&p).unwrap() }
    })
}

fn opts(n_steps: usize, dt: f64) -> PropagationOptions {
    PropagationOptions { dt, n_steps, record_every: 20, contact: ContactModel::Delta }
}

fn gate(potential: &Grid1D, g1d: f64, n_steps: usize, dt: f64, symmetrize: bool) -> GateRun {
    let f = fixture();
    let o = GateOptions { propagation: opts(n_steps, dt), symmetrize, tau_window: (0.0, 1.0), concurrent: false };
    run_gate(potential, &f.basis, g1d, &o).unwrap()
}

#[test]
fn free_gaussian_spreads_like_the_analytic_packet() {
    let grid = Grid1D::symmetric(1.5e-6, N, RB87_MASS, |_| 0.0).unwrap();
    let s0 = 100e-9;
    let packet = |t: f64| -> Vec<Complex64> {
        let tau = Complex64::new(1.0, HBAR * t / (2.0 * RB87_MASS * s0 * s0));
        grid.positions().iter().map(|x| (-(x * x) / (4.0 * s0 * s0 * tau)).exp() / tau.sqrt()).collect()
    };
    let real0: Vec<f64> = packet(0.0).iter().map(|c| c.re).collect();
    let psi = product_state(&real0, &real0, &grid, false).unwrap();
    let t = 20e-6;
    let n_steps = 400;
    let (_, out) = propagate(&psi, &grid, 0.0, &opts(n_steps, t / n_steps as f64), &[]).unwrap();
    let f = packet(t);
    let mut amps = Vec::with_capacity(N * N);
    for a in &f {
        for b in &f {
            amps.push(a * b);
        }
    }
    let mut exact = Psi2D { amps, grid: grid.clone() };
    let norm = exact.norm_sqr().sqrt();
    exact.amps.iter_mut().for_each(|a| *a /= norm);
    let fidelity = exact.inner(&out).norm_sqr();
    assert!((1.0 - fidelity).abs() < 1e-10, "fidelity {fidelity}");
    // the packet has spread: σ(t)/σ₀ = |1 + iħt/2Mσ₀²|
    let width = |p: &Psi2D| {
        let x = grid.positions();
        let n = grid.len();
        let mut m2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                m2 += x[i] * x[i] * p.amps[i * n + j].norm_sqr();
            }
        }
        (m2 * grid.spacing * grid.spacing).sqrt()
    };
    let want = (1.0 + (HBAR * t / (2.0 * RB87_MASS * s0 * s0)).powi(2)).sqrt();
    assert!((width(&out) / width(&psi) - want).abs() < 1e-6);
}

#[test]
fn zero_coupling_gives_zero_phase() {
    let f = fixture();
    let run = gate(&f.grid, 0.0, 2000, DT, true);
    let worst = run.phi.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    assert!(worst < 1e-6, "max |φ| = {worst:e}");
}

#[test]
fn potential_offset_leaves_phase_and_fidelities_unchanged() {
    let f = fixture();
    let mut shifted = f.grid.clone();
    let v0 = 0.3 * f.grid.max_value();
    shifted.values.iter_mut().for_each(|v| *v += v0);
    let a = gate(&f.grid, f.g1d, 2000, DT, true);
    let b = gate(&shifted, f.g1d, 2000, DT, true);
    for k in 0..a.times.len() {
        assert!((a.phi[k] - b.phi[k]).abs() < 1e-9, "t {}: {} vs {}", a.times[k], a.phi[k], b.phi[k]);
        for (x, y) in [(&a.f_gg, &b.f_gg), (&a.f_ge, &b.f_ge), (&a.f_ee, &b.f_ee)] {
            assert!((x[k] - y[k]).abs() < 1e-10);
        }
    }
}

#[test]
fn norm_and_exchange_symmetry_are_preserved() {
    let f = fixture();
    let b = &f.basis;
    let psi = product_state(&b.e_left, &b.e_right, &f.grid, true).unwrap();
    let (traj, out) = propagate(&psi, &f.grid, f.g1d, &opts(4000, DT), &[]).unwrap();
    assert!(traj.norm_drift() < 1e-8, "norm drift {:e}", traj.norm_drift());
    assert!(psi.exchange_asymmetry() < 1e-14);
    assert!(out.exchange_asymmetry() < 1e-10, "asymmetry {:e}", out.exchange_asymmetry());
}

#[test]
fn energy_is_conserved_away_from_the_contact_cusp() {
    let f = fixture();
    let b = &f.basis;
    let ee = product_state(&b.e_left, &b.e_right, &f.grid, true).unwrap();
    let gg = product_state(&b.g_left, &b.g_right, &f.grid, true).unwrap();
    let o = opts(4000, DT);
    let (free, _) = propagate(&ee, &f.grid, 0.0, &o, &[]).unwrap();
    assert!(free.energy_drift() < 1e-6, "free drift {:e}", free.energy_drift());
    let (deep, _) = propagate(&gg, &f.grid, f.g1d, &o, &[]).unwrap();
    assert!(deep.energy_drift() < 1e-6, "gg drift {:e}", deep.energy_drift());
}

// The discrete delta populates the grid cutoff, where the split-operator error
// is largest; the resulting ⟨H⟩ drift is second order in dt.
#[test]
fn contact_energy_drift_is_second_order_in_dt() {
    let f = fixture();
    let b = &f.basis;
    let ee = product_state(&b.e_left, &b.e_right, &f.grid, true).unwrap();
    let drift = |dt: f64| propagate(&ee, &f.grid, f.g1d, &opts((1e-3 / dt) as usize, dt), &[]).unwrap().0.energy_drift();
    let (a, c) = (drift(DT), drift(DT / 2.0));
    assert!(c < a / 3.0, "{a:e} -> {c:e}");
}

#[test]
fn halving_dt_barely_moves_the_phase() {
    let f = fixture();
    let t_end = 0.5e-3;
    let coarse = gate(&f.grid, f.g1d, (t_end / DT) as usize, DT, true);
    let fine = gate(&f.grid, f.g1d, (t_end / (DT / 2.0)) as usize, DT / 2.0, true);
    let (a, b) = (coarse.phi.last().unwrap(), fine.phi.last().unwrap());
    assert!((coarse.times.last().unwrap() - fine.times.last().unwrap()).abs() < 1e-12);
    assert!((a - b).abs() < 1e-3, "φ {a} vs {b}");
}

#[test]
fn symmetrized_overlap_follows_from_distinguishable_run() {
    let f = fixture();
    let b = &f.basis;
    for (l, r) in [(&b.g_left, &b.g_right), (&b.g_left, &b.e_right), (&b.e_left, &b.e_right)] {
        let dist = product_state(l, r, &f.grid, false).unwrap();
        let sym = product_state(l, r, &f.grid, true).unwrap();
        let o = opts(2000, DT);
        let (td, out) = propagate(&dist, &f.grid, f.g1d, &o, &[]).unwrap();
        let (ts, _) = propagate(&sym, &f.grid, f.g1d, &o, &[]).unwrap();
        // ψ_S = (ψ + Pψ)/√(2(1+s)) and [H, P] = 0 give
        // ⟨ψ_S|U|ψ_S⟩ = (⟨ψ|Uψ⟩ + ⟨Pψ|Uψ⟩)/(1+s)
        let s = dist.inner(&dist.exchanged()).re;
        let direct = *td.overlaps.last().unwrap();
        let exchange = dist.exchanged().inner(&out);
        let predicted = (direct + exchange) / (1.0 + s);
        let got = *ts.overlaps.last().unwrap();
        assert!((predicted - got).norm() < 1e-10, "{predicted} vs {got}");
    }
}

#[test]
fn interaction_suppresses_same_well_population() {
    let f = fixture();
    // a quarter of the excited-doublet tunnelling period and a bit more
    let steps = 3200;
    let with = gate(&f.grid, f.g1d, steps, DT, true);
    let without = gate(&f.grid, 0.0, steps, DT, true);
    let (_, lee_g) = with.max_leakage();
    let (_, lee_0) = without.max_leakage();
    assert!(lee_0 > 0.3, "free tunnelling leakage {lee_0}");
    assert!(lee_g < lee_0, "{lee_g} vs {lee_0}");
    for k in 0..with.times.len() {
        assert!((0.0..=1.0 + 1e-12).contains(&with.p_phi_ee[k]));
    }
    assert!(with.p_phi_ge[0] < 1e-3 && with.p_phi_ee[0] < 1e-3);
}

#[test]
fn gaussian_contact_is_close_to_delta_on_a_fine_grid() {
    let f = fixture();
    let b = &f.basis;
    let psi = product_state(&b.e_left, &b.e_right, &f.grid, true).unwrap();
    let mut o = opts(1000, DT);
    let (delta, _) = propagate(&psi, &f.grid, f.g1d, &o, &[]).unwrap();
    o.contact = ContactModel::Gaussian;
    let (gauss, _) = propagate(&psi, &f.grid, f.g1d, &o, &[]).unwrap();
    let (fd, fg) = (revival_fidelity(&delta), revival_fidelity(&gauss));
    let worst = fd.iter().zip(&fg).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(worst < 0.05, "fidelity difference {worst}");
}

#[test]
fn mismatched_grids_are_rejected() {
    let f = fixture();
    let other = Grid1D::symmetric(1.0e-6, N, RB87_MASS, |_| 0.0).unwrap();
    let psi = product_state(&f.basis.g_left, &f.basis.g_right, &f.grid, true).unwrap();
    assert!(matches!(propagate(&psi, &other, 0.0, &opts(10, DT), &[]), Err(CollisionError::GridMismatch(_))));
}
