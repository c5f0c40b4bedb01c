//! Double-well trap geometry: minima search, curvature analysis, bias tuning and
//! extraction of the one-dimensional potential along the axis joining the wells.

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chipfield::{field_magnitude, field_magnitude_gradient, zeeman_energy, ChipConfig, FieldError, Vec3};
use crate::spectrum1d::Grid1D;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrapError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("no minimum found from {seeds} seed(s):\n{}", trace.join("\n"))]
    DescentFailed { seeds: usize, trace: Vec<String> },
    #[error("Hessian at {position:?} is not positive definite (eigenvalues {eigenvalues:?})")]
    SaddlePoint { position: [f64; 3], eigenvalues: [f64; 3] },
    #[error("expected two distinct minima, found {0}")]
    MinimaCount(usize),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("bias tuning failed: {0}")]
    TuningFailed(String),
}

use crate::Vec3d;

fn from_na(v: &Vector3<f64>) -> Vec3d {
    Vec3::new(v[0], v[1], v[2])
}

/// Central-difference gradient of a scalar field.
pub fn gradient<F>(f: &F, p: Vec3d, h: f64) -> Result<Vector3<f64>, FieldError>
where
    F: Fn(Vec3d) -> Result<f64, FieldError>,
{
    let mut g = Vector3::zeros();
    for i in 0..3 {
        let e = Vec3::zero().with_component(i, h);
        g[i] = (f(p + e)? - f(p - e)?) / (2.0 * h);
    }
    Ok(g)
}

/// Second-order central-difference Hessian of a scalar field.
pub fn hessian<F>(f: &F, p: Vec3d, h: f64) -> Result<Matrix3<f64>, FieldError>
where
    F: Fn(Vec3d) -> Result<f64, FieldError>,
{
    let f0 = f(p)?;
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        let ei = Vec3::zero().with_component(i, h);
        m[(i, i)] = (f(p + ei)? - 2.0 * f0 + f(p - ei)?) / (h * h);
        for j in (i + 1)..3 {
            let ej = Vec3::zero().with_component(j, h);
            let v = (f(p + ei + ej)? - f(p + ei - ej)? - f(p - ei + ej)? + f(p - ei - ej)?)
                / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapMinimum {
    pub position: Vec3d,
    /// |B| at the minimum, T.
    pub field_magnitude: f64,
    /// Zeeman potential, J.
    pub potential: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    /// Finite-difference step for gradient and Hessian, m.
    pub fd_step: f64,
    /// Required gradient norm of |B| at an accepted minimum, T/m.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Largest Newton displacement per iteration, m.
    pub max_step: f64,
    /// Minima closer than this are merged, m.
    pub dedup_radius: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { fd_step: 1e-9, grad_tol: 1e-6, max_iter: 200, max_step: 50e-9, dedup_radius: 1e-9 }
    }
}

/// Hessian from central differences of a gradient field, symmetrized.
pub fn hessian_from_gradient<G>(grad: &G, p: Vec3d, h: f64) -> Result<Matrix3<f64>, FieldError>
where
    G: Fn(Vec3d) -> Result<Vector3<f64>, FieldError>,
{
    let mut m = Matrix3::zeros();
    for j in 0..3 {
        let e = Vec3::zero().with_component(j, h);
        let d = (grad(p + e)? - grad(p - e)?) / (2.0 * h);
        m.set_column(j, &d);
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Damped Newton descent of `f` from `seed`. Returns the converged point or a
/// description of why it stopped.
fn newton_descent<F, G>(f: &F, grad: &G, seed: Vec3d, opts: &DescentOptions) -> Result<Vec3d, String>
where
    F: Fn(Vec3d) -> Result<f64, FieldError>,
    G: Fn(Vec3d) -> Result<Vector3<f64>, FieldError>,
{
    let mut p = seed;
    let mut fp = f(p).map_err(|e| format!("seed {seed:?}: {e}"))?;
    let mut g = grad(p).map_err(|e| format!("seed {seed:?}: {e}"))?;
    for iter in 0..opts.max_iter {
        if g.norm() < opts.grad_tol {
            return Ok(p);
        }
        let h = hessian_from_gradient(grad, p, opts.fd_step).map_err(|e| format!("iter {iter}: {e}"))?;
        // saddle-free Newton: flip negative curvature, floor tiny eigenvalues
        let eig = SymmetricEigen::new(h);
        let scale = eig.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
        let floor = (scale * 1e-8).max(f64::MIN_POSITIVE);
        let mut step = Vector3::zeros();
        for k in 0..3 {
            let v = eig.eigenvectors.column(k);
            let lam = eig.eigenvalues[k].abs().max(floor);
            step -= v * (v.dot(&g) / lam);
        }
        let len = step.norm();
        if len > opts.max_step {
            step *= opts.max_step / len;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = p + from_na(&(step * alpha));
            if let (Ok(ft), Ok(gt)) = (f(trial), grad(trial)) {
                // near the bottom f is flat to rounding; a smaller gradient also counts
                if ft < fp || (ft <= fp * (1.0 + 1e-14) && gt.norm() < g.norm()) {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((np, nf, ng)) => {
                p = np;
                fp = nf;
                g = ng;
            }
            None => break,
        }
    }
    if g.norm() < opts.grad_tol {
        Ok(p)
    } else {
        Err(format!(
            "seed {seed:?}: stopped at {p:?} with |grad| = {:e} (tolerance {:e})",
            g.norm(),
            opts.grad_tol
        ))
    }
}

/// Multistart minimization of an arbitrary scalar field with a finite-difference
/// gradient; returns deduplicated local minima sorted by x.
pub fn find_minima_of<F>(f: &F, seeds: &[Vec3d], opts: &DescentOptions) -> Result<Vec<Vec3d>, TrapError>
where
    F: Fn(Vec3d) -> Result<f64, FieldError>,
{
    let grad = |p: Vec3d| gradient(f, p, opts.fd_step);
    find_minima_with_gradient(f, &grad, seeds, opts)
}

/// Multistart minimization with a caller-supplied gradient. Only points with a
/// positive-definite Hessian are kept.
pub fn find_minima_with_gradient<F, G>(
    f: &F,
    grad: &G,
    seeds: &[Vec3d],
    opts: &DescentOptions,
) -> Result<Vec<Vec3d>, TrapError>
where
    F: Fn(Vec3d) -> Result<f64, FieldError>,
    G: Fn(Vec3d) -> Result<Vector3<f64>, FieldError>,
{
    if seeds.is_empty() || seeds.iter().any(|s| !s.is_finite()) {
        return Err(TrapError::Domain("seeds must be finite and non-empty".into()));
    }
    let mut trace = Vec::new();
    let mut found: Vec<(Vec3d, f64)> = Vec::new();
    for &seed in seeds {
        match newton_descent(f, grad, seed, opts) {
            Ok(p) => {
                let h = hessian_from_gradient(grad, p, opts.fd_step)?;
                let eig = SymmetricEigen::new(h);
                if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
                    trace.push(format!("seed {seed:?}: converged to non-minimum at {p:?}"));
                    continue;
                }
                let fp = f(p)?;
                match found.iter_mut().find(|(q, _)| (*q - p).norm() < opts.dedup_radius) {
                    Some(existing) => {
                        if fp < existing.1 {
                            *existing = (p, fp);
                        }
                    }
                    None => found.push((p, fp)),
                }
            }
            Err(msg) => trace.push(msg),
        }
    }
    if found.is_empty() {
        return Err(TrapError::DescentFailed { seeds: seeds.len(), trace });
    }
    found.sort_by(|a, b| a.0.x.total_cmp(&b.0.x).then(a.0.y.total_cmp(&b.0.y)));
    Ok(found.into_iter().map(|(p, _)| p).collect())
}

/// Analytic gradient of |B| as a nalgebra vector.
pub fn field_gradient(config: &ChipConfig<f64>, p: Vec3d) -> Result<Vector3<f64>, FieldError> {
    let g = field_magnitude_gradient(config, p)?;
    Ok(Vector3::new(g.x, g.y, g.z))
}

/// Minima of |B| for the chip configuration.
pub fn find_minima(
    config: &ChipConfig<f64>,
    seeds: &[Vec3d],
    opts: &DescentOptions,
) -> Result<Vec<TrapMinimum>, TrapError> {
    config.validate()?;
    let f = |p: Vec3d| field_magnitude(config, p);
    let grad = |p: Vec3d| field_gradient(config, p);
    find_minima_with_gradient(&f, &grad, seeds, opts)?
        .into_iter()
        .map(|p| {
            let b = field_magnitude(config, p)?;
            Ok(TrapMinimum { position: p, field_magnitude: b, potential: zeeman_energy(&config.species, b) })
        })
        .collect()
}

/// Seeds at (±0.4, 0, 1.2) μm, one per well of the H configuration.
pub fn default_seeds() -> Vec<Vec3d> {
    vec![Vec3::new(-0.4e-6, 0.0, 1.2e-6), Vec3::new(0.4e-6, 0.0, 1.2e-6)]
}

/// Principal frequencies and axes from a potential-energy Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalModes {
    /// (longitudinal, transverse in-plane, transverse out-of-plane), Hz.
    pub freqs: [f64; 3],
    pub axes: [Vec3d; 3],
}

/// Normal-mode analysis of an energy Hessian (J/m²) for a particle of `mass`.
pub fn normal_modes(h: &Matrix3<f64>, mass: f64, position: Vec3d) -> Result<NormalModes, TrapError> {
    let eig = SymmetricEigen::new(*h);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lams = idx.map(|k| eig.eigenvalues[k]);
    if lams.iter().any(|&l| l <= 0.0) {
        return Err(TrapError::SaddlePoint { position: position.to_array(), eigenvalues: lams });
    }
    let mut vecs = idx.map(|k| from_na(&eig.eigenvectors.column(k).into_owned()));
    // the stiffer of the two transverse modes with the larger z weight is the z mode
    if vecs[1].z.abs() > vecs[2].z.abs() {
        vecs.swap(1, 2);
        let l = [lams[0], lams[2], lams[1]];
        return Ok(build_modes(l, vecs, mass));
    }
    Ok(build_modes(lams, vecs, mass))
}

fn build_modes(lams: [f64; 3], mut vecs: [Vec3d; 3], mass: f64) -> NormalModes {
    for v in vecs.iter_mut() {
        let lead = if v.x.abs() >= v.y.abs().max(v.z.abs()) {
            v.x
        } else if v.y.abs() >= v.z.abs() {
            v.y
        } else {
            v.z
        };
        if lead < 0.0 {
            *v = -*v;
        }
    }
    NormalModes {
        freqs: lams.map(|l| (l / mass).sqrt() / (2.0 * std::f64::consts::PI)),
        axes: vecs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacterizeOptions {
    /// Central-difference step for the potential Hessian, m.
    pub hessian_step: f64,
    /// Golden-section termination on the barrier coordinate, m.
    pub barrier_tol: f64,
}

impl Default for CharacterizeOptions {
    fn default() -> Self {
        Self { hessian_step: 1e-9, barrier_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapCharacterization {
    pub minima: [TrapMinimum; 2],
    /// In-plane angle of the axis X′ joining the minima, measured from X, rad.
    pub beta: f64,
    /// In-plane angle of the soft Hessian eigenvector (diagnostic), rad.
    pub hessian_axis_angle: f64,
    /// Mean over both wells of (ω_x′, ω_y′, ω_z)/2π, Hz.
    pub freqs: [f64; 3],
    pub well_modes: [NormalModes; 2],
    /// Unit vector along X′ from the first to the second minimum.
    pub axis: Vec3d,
    pub midpoint: Vec3d,
    pub separation: f64,
    pub height_z0: f64,
    pub barrier_position: Vec3d,
    /// |B| at the saddle between the wells, T.
    pub barrier_field: f64,
    /// |B| at the maximum along the straight segment joining the minima, T.
    pub barrier_field_on_segment: f64,
    /// Saddle energy above the mean well bottom, J.
    pub barrier_height: f64,
}

/// Orthonormal frame (axis, in-plane transverse, out-of-plane transverse).
fn transverse_frame(axis: Vec3d) -> (Vec3d, Vec3d) {
    let zhat = Vec3::new(0.0, 0.0, 1.0);
    let cross = |a: Vec3d, b: Vec3d| Vec3::new(a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x);
    let e2 = cross(zhat, axis);
    let e2 = e2 * (1.0 / e2.norm());
    let e3 = cross(axis, e2);
    (e2, e3 * (1.0 / e3.norm()))
}

/// Minimizes |B| over the plane through `center` perpendicular to `axis`.
/// Returns the transverse offset (along e2, e3) and the minimal |B|.
fn relax_transverse(
    config: &ChipConfig<f64>,
    center: Vec3d,
    axis: Vec3d,
    start: [f64; 2],
    h: f64,
) -> Result<([f64; 2], f64), TrapError> {
    let (e2, e3) = transverse_frame(axis);
    let at = |q: Vector2<f64>| center + e2 * q[0] + e3 * q[1];
    let f = |q: Vector2<f64>| field_magnitude(config, at(q));
    let mut q = Vector2::new(start[0], start[1]);
    let mut fq = f(q)?;
    for _ in 0..100 {
        let mut g = Vector2::zeros();
        let mut hm = Matrix2::zeros();
        let f0 = fq;
        for i in 0..2 {
            let mut ei = Vector2::zeros();
            ei[i] = h;
            let (fp, fm) = (f(q + ei)?, f(q - ei)?);
            g[i] = (fp - fm) / (2.0 * h);
            hm[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        }
        let (ex, ey) = (Vector2::new(h, 0.0), Vector2::new(0.0, h));
        let m = (f(q + ex + ey)? - f(q + ex - ey)? - f(q - ex + ey)? + f(q - ex - ey)?) / (4.0 * h * h);
        hm[(0, 1)] = m;
        hm[(1, 0)] = m;
        let step = match hm.cholesky() {
            Some(ch) => -ch.solve(&g),
            None => -g * (1e-9 / g.norm().max(1e-300)),
        };
        let mut alpha = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let trial = q + step * alpha;
            let ft = f(trial)?;
            if ft < fq {
                q = trial;
                fq = ft;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved || (step * alpha).norm() < 1e-15 {
            break;
        }
    }
    Ok(([q[0], q[1]], fq))
}

/// Golden-section search for the maximum of `f` on [lo, hi].
fn golden_max<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64), TrapError>
where
    F: Fn(f64) -> Result<f64, TrapError>,
{
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (hi - lo).abs() > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (lo + hi);
    Ok((x, f(x)?))
}

/// Curvature, axes and barrier of a two-minimum trap.
pub fn characterize(
    config: &ChipConfig<f64>,
    minima: &[TrapMinimum; 2],
    opts: &CharacterizeOptions,
) -> Result<TrapCharacterization, TrapError> {
    let moment = config.species.moment();
    let grad_u = |p: Vec3d| field_gradient(config, p).map(|g| g * moment);
    let mut modes = Vec::with_capacity(2);
    for m in minima {
        let h = hessian_from_gradient(&grad_u, m.position, opts.hessian_step)?;
        modes.push(normal_modes(&h, config.species.mass, m.position)?);
    }
    let well_modes = [modes[0], modes[1]];
    let freqs = [0, 1, 2].map(|k| 0.5 * (well_modes[0].freqs[k] + well_modes[1].freqs[k]));

    let (pa, pb) = (minima[0].position, minima[1].position);
    let d = pb - pa;
    let separation = d.norm();
    if separation <= 0.0 {
        return Err(TrapError::MinimaCount(1));
    }
    let axis = d * (1.0 / separation);
    let beta = axis.y.atan2(axis.x);
    let soft = well_modes[0].axes[0];
    let soft = if soft.x < 0.0 { -soft } else { soft };
    let hessian_axis_angle = soft.y.atan2(soft.x);
    let midpoint = (pa + pb) * 0.5;

    // barrier on the straight segment
    let on_segment = |s: f64| -> Result<f64, TrapError> { Ok(field_magnitude(config, pa + d * s)?) };
    let (_, barrier_field_on_segment) = golden_max(on_segment, 0.0, 1.0, opts.barrier_tol / separation)?;

    // saddle: maximum along X′ of the transversely relaxed |B|
    let relaxed = |s: f64| -> Result<f64, TrapError> {
        Ok(relax_transverse(config, pa + d * s, axis, [0.0, 0.0], opts.hessian_step)?.1)
    };
    let (s_star, barrier_field) = golden_max(relaxed, 0.0, 1.0, opts.barrier_tol / separation)?;
    let (q, _) = relax_transverse(config, pa + d * s_star, axis, [0.0, 0.0], opts.hessian_step)?;
    let (e2, e3) = transverse_frame(axis);
    let barrier_position = pa + d * s_star + e2 * q[0] + e3 * q[1];

    let mean_u = 0.5 * (minima[0].potential + minima[1].potential);
    Ok(TrapCharacterization {
        minima: *minima,
        beta,
        hessian_axis_angle,
        freqs,
        well_modes,
        axis,
        midpoint,
        separation,
        height_z0: 0.5 * (pa.z + pb.z),
        barrier_position,
        barrier_field,
        barrier_field_on_segment,
        barrier_height: zeeman_energy(&config.species, barrier_field) - mean_u,
    })
}

/// Finds exactly two minima and characterizes them.
pub fn analyze_trap(
    config: &ChipConfig<f64>,
    seeds: &[Vec3d],
    descent: &DescentOptions,
    opts: &CharacterizeOptions,
) -> Result<TrapCharacterization, TrapError> {
    let minima = find_minima(config, seeds, descent)?;
    if minima.len() != 2 {
        return Err(TrapError::MinimaCount(minima.len()));
    }
    characterize(config, &[minima[0], minima[1]], opts)
}

/// Which bias component `tune_bias` adjusts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasComponent {
    X,
    Y,
}

impl BiasComponent {
    fn index(self) -> usize {
        match self {
            BiasComponent::X => 0,
            BiasComponent::Y => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOptions {
    /// Scan half-width relative to the starting bias component.
    pub relative_span: f64,
    pub scan_points: usize,
    /// Root tolerance on |B|_min − target, T.
    pub field_tol: f64,
    pub seeds: Vec<Vec3d>,
    pub descent: DescentOptions,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            relative_span: 0.1,
            scan_points: 50,
            field_tol: 1e-9,
            seeds: default_seeds(),
            descent: DescentOptions::default(),
        }
    }
}

/// One row of the bias scan performed by [`tune_bias`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasScanPoint {
    pub bias: f64,
    pub min_field: f64,
}

/// Mean |B| over the minima found from `seeds`.
pub fn min_field(config: &ChipConfig<f64>, seeds: &[Vec3d], opts: &DescentOptions) -> Result<(f64, Vec<Vec3d>), TrapError> {
    let minima = find_minima(config, seeds, opts)?;
    let b = minima.iter().map(|m| m.field_magnitude).sum::<f64>() / minima.len() as f64;
    Ok((b, minima.iter().map(|m| m.position).collect()))
}

/// Scan of |B|_min against one bias component over `values`.
pub fn bias_scan(
    config: &ChipConfig<f64>,
    component: BiasComponent,
    values: &[f64],
    opts: &TuneOptions,
) -> Result<Vec<BiasScanPoint>, TrapError> {
    let mut seeds = opts.seeds.clone();
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = *config;
        c.bias = c.bias.with_component(component.index(), v);
        let (b, pos) = min_field(&c, &seeds, &opts.descent)?;
        if pos.len() == opts.seeds.len() {
            seeds = pos;
        }
        out.push(BiasScanPoint { bias: v, min_field: b });
    }
    Ok(out)
}

/// Adjusts one bias component so that |B| at the trap minima equals `target_field`.
pub fn tune_bias(
    config: &ChipConfig<f64>,
    target_field: f64,
    component: BiasComponent,
    opts: &TuneOptions,
) -> Result<(ChipConfig<f64>, Vec<BiasScanPoint>), TrapError> {
    let i = component.index();
    let b0 = config.bias.component(i);
    let span = opts.relative_span * b0.abs().max(1e-6);
    let n = opts.scan_points.max(2);
    let values: Vec<f64> = (0..n).map(|k| b0 - span + 2.0 * span * k as f64 / (n - 1) as f64).collect();
    let scan = bias_scan(config, component, &values, opts)?;
    let resid: Vec<f64> = scan.iter().map(|p| p.min_field - target_field).collect();
    let bracket = resid
        .windows(2)
        .position(|w| w[0] == 0.0 || w[0].signum() != w[1].signum())
        .ok_or_else(|| {
            TrapError::TuningFailed(format!(
                "no sign change of |B|min - target over bias in [{:e}, {:e}] T",
                values[0],
                values[n - 1]
            ))
        })?;
    let increasing = scan[bracket + 1].min_field > scan[bracket].min_field;
    let monotone = scan.windows(2).all(|w| (w[1].min_field > w[0].min_field) == increasing && w[1].min_field != w[0].min_field);
    if !monotone {
        return Err(TrapError::TuningFailed("|B|min is not strictly monotone over the scan".into()));
    }
    let eval = |v: f64| -> Result<f64, TrapError> {
        let mut c = *config;
        c.bias = c.bias.with_component(i, v);
        Ok(min_field(&c, &opts.seeds, &opts.descent)?.0 - target_field)
    };
    let (mut lo, mut hi) = (values[bracket], values[bracket + 1]);
    let (mut flo, fhi) = (resid[bracket], resid[bracket + 1]);
    if flo == 0.0 {
        hi = lo;
    } else if fhi == 0.0 {
        lo = hi;
    }
    // bisection; the scan guarantees a simple root in the bracket
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-15 * b0.abs().max(1e-12) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = eval(mid)?;
        if fm.abs() < opts.field_tol {
            lo = mid;
            hi = mid;
            break;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let mut tuned = *config;
    tuned.bias = tuned.bias.with_component(i, 0.5 * (lo + hi));
    let final_resid = eval(tuned.bias.component(i))?;
    if final_resid.abs() >= 1e-7 {
        return Err(TrapError::TuningFailed(format!("residual {final_resid:e} T after root search")));
    }
    Ok((tuned, scan))
}

/// One-dimensional potential along X′ together with its placement in space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisPotential {
    pub grid: Grid1D,
    pub beta: f64,
    /// Point of the chip frame at x′ = 0 (midpoint of the minima).
    pub origin: Vec3d,
    pub axis: Vec3d,
    /// Energy subtracted so that the minimum of the samples is zero, J.
    pub shift: f64,
    /// Whether each sample was relaxed to the transverse field minimum.
    pub relaxed: bool,
}

/// Samples the Zeeman potential along X′ on `n_points` uniform points covering
/// [−halfwidth, halfwidth). With `relax`, each sample sits at the |B| minimum of
/// the transverse plane (the valley floor followed by transversely frozen atoms).
pub fn axis_potential(
    config: &ChipConfig<f64>,
    charac: &TrapCharacterization,
    halfwidth: f64,
    n_points: usize,
    relax: bool,
) -> Result<AxisPotential, TrapError> {
    if n_points < 64 {
        return Err(TrapError::Domain(format!("need at least 64 points, got {n_points}")));
    }
    let half_sep = 0.5 * charac.separation;
    if !(halfwidth > half_sep) {
        return Err(TrapError::Domain(format!(
            "halfwidth {halfwidth:e} m does not contain both minima (±{half_sep:e} m)"
        )));
    }
    let spacing = 2.0 * halfwidth / n_points as f64;
    let origin_x = -halfwidth;
    let sample = |xp: f64, start: [f64; 2]| -> Result<([f64; 2], f64), TrapError> {
        let center = charac.midpoint + charac.axis * xp;
        if relax {
            relax_transverse(config, center, charac.axis, start, 1e-9)
        } else {
            Ok((start, field_magnitude(config, center)?))
        }
    };
    let mut values = vec![0.0; n_points];
    // continue the transverse offset outward from the center in both directions
    let center_idx = n_points / 2;
    let mut start = [0.0, 0.0];
    for k in center_idx..n_points {
        let (q, b) = sample(origin_x + k as f64 * spacing, start)?;
        start = q;
        values[k] = zeeman_energy(&config.species, b);
    }
    start = [0.0, 0.0];
    for k in (0..center_idx).rev() {
        let (q, b) = sample(origin_x + k as f64 * spacing, start)?;
        start = q;
        values[k] = zeeman_energy(&config.species, b);
    }
    let shift = values.iter().cloned().fold(f64::INFINITY, f64::min);
    for v in values.iter_mut() {
        *v -= shift;
    }
    let grid = Grid1D::new(origin_x, spacing, values, config.species.mass)
        .map_err(|e| TrapError::Domain(e.to_string()))?;
    Ok(AxisPotential { grid, beta: charac.beta, origin: charac.midpoint, axis: charac.axis, shift, relaxed: relax })
}
