//! Magnetostatics of the H-shaped wire configuration.
//!
//! Three infinitely long, thin wires lie in the chip plane z = 0: a trapping wire
//! along X carrying `I`, and two crossing wires along Y at x = ±a/2 carrying `αI`.
//! A homogeneous bias field parallel to the surface closes the trap. Everything
//! here is a pure function of its inputs.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants;
use crate::scalar::Real;

/// Default distance below which a point counts as lying on a wire.
pub const DEFAULT_WIRE_EPSILON: f64 = 1.0e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("field evaluated {distance:e} m from a wire (singular below {epsilon:e} m)")]
    Singular { distance: f64, epsilon: f64 },
    #[error("invalid chip configuration: {0}")]
    InvalidConfig(String),
}

/// Cartesian 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> T {
        // hypot keeps small tesla-scale components away from underflow in f32
        self.x.hypot(self.y).hypot(self.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn component(self, i: usize) -> T {
        match i {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("Vec3 component index {i} out of range"),
        }
    }

    pub fn with_component(mut self, i: usize, v: T) -> Self {
        match i {
            0 => self.x = v,
            1 => self.y = v,
            2 => self.z = v,
            _ => panic!("Vec3 component index {i} out of range"),
        }
        self
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Direction of an infinite straight wire lying in the z = 0 plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WireAxis {
    X,
    Y,
}

/// Infinite thin wire in the chip plane. `offset` is the in-plane transverse
/// coordinate: y for an X wire, x for a Y wire. Positive current flows along +axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wire<T> {
    pub axis: WireAxis,
    pub offset: T,
    pub current: T,
}

impl<T: Real> Wire<T> {
    pub fn field(&self, kappa: T, point: Vec3<T>, epsilon: T) -> Result<Vec3<T>, FieldError> {
        // perpendicular distance vector from the wire to the point
        let (u, z) = match self.axis {
            WireAxis::X => (point.y - self.offset, point.z),
            WireAxis::Y => (point.x - self.offset, point.z),
        };
        let r2 = u * u + z * z;
        let r = r2.sqrt();
        if !(r >= epsilon) {
            return Err(FieldError::Singular {
                distance: r.to_f64_lossy(),
                epsilon: epsilon.to_f64_lossy(),
            });
        }
        let s = kappa * self.current / r2;
        Ok(match self.axis {
            // x̂ × (0, u, z) = (0, −z, u)
            WireAxis::X => Vec3::new(T::zero(), -z * s, u * s),
            // ŷ × (u, 0, z) = (z, 0, −u)
            WireAxis::Y => Vec3::new(z * s, T::zero(), -u * s),
        })
    }
}

impl<T: Real> Wire<T> {
    /// Jacobian ∂B_i/∂x_j of the wire field at `point`.
    pub fn jacobian(&self, kappa: T, point: Vec3<T>, epsilon: T) -> Result<[[T; 3]; 3], FieldError> {
        let (u, z) = match self.axis {
            WireAxis::X => (point.y - self.offset, point.z),
            WireAxis::Y => (point.x - self.offset, point.z),
        };
        let r2 = u * u + z * z;
        if !(r2.sqrt() >= epsilon) {
            return Err(FieldError::Singular { distance: r2.sqrt().to_f64_lossy(), epsilon: epsilon.to_f64_lossy() });
        }
        let two = T::lit(2.0);
        let s = kappa * self.current / r2;
        let t = two * s / r2;
        // b_u = −z s, b_z = u s in the (u, z) plane of the wire
        let dbu_du = t * u * z;
        let dbu_dz = -s + t * z * z;
        let dbz_du = s - t * u * u;
        let dbz_dz = -t * u * z;
        let o = T::zero();
        Ok(match self.axis {
            // B = (0, b_u, b_z), u = y
            WireAxis::X => [[o, o, o], [o, dbu_du, dbu_dz], [o, dbz_du, dbz_dz]],
            // B = (−b_u, 0, −b_z), u = x
            WireAxis::Y => [[-dbu_du, o, -dbu_dz], [o, o, o], [-dbz_du, o, -dbz_dz]],
        })
    }
}

/// Field of a single infinite wire with κ = μ0/2π and the default on-wire epsilon.
pub fn wire_field<T: Real>(
    axis: WireAxis,
    offset: T,
    current: T,
    point: Vec3<T>,
) -> Result<Vec3<T>, FieldError> {
    Wire { axis, offset, current }.field(
        T::lit(constants::KAPPA),
        point,
        T::lit(DEFAULT_WIRE_EPSILON),
    )
}

/// Atomic species constants entering the Zeeman potential and the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomSpecies<T> {
    /// kg
    pub mass: T,
    /// g_F·m_F, the Zeeman slope factor of the trapped states.
    pub gf_mf: T,
    /// J/T
    pub bohr_magneton: T,
    /// T
    pub magic_field: T,
    /// Hz
    pub hyperfine_freq: T,
}

impl<T: Real> AtomSpecies<T> {
    /// ⁸⁷Rb clock pair |F=2,mF=1⟩, |F=1,mF=−1⟩, both with g_F·m_F = 1/2.
    pub fn rb87() -> Self {
        Self {
            mass: T::lit(constants::RB87_MASS),
            gf_mf: T::lit(0.5),
            bohr_magneton: T::lit(constants::BOHR_MAGNETON),
            magic_field: T::lit(constants::RB87_MAGIC_FIELD),
            hyperfine_freq: T::lit(constants::RB87_HYPERFINE),
        }
    }

    /// Magnetic moment μ = g_F m_F μ_B.
    pub fn moment(&self) -> T {
        self.gf_mf * self.bohr_magneton
    }
}

/// Complete H-configuration experiment definition (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChipConfig<T> {
    pub wire_separation_a: T,
    pub current_i: T,
    pub alpha: T,
    pub bias: Vec3<T>,
    pub kappa: T,
    pub species: AtomSpecies<T>,
    pub wire_epsilon: T,
}

fn default_epsilon<T: Real>() -> T {
    T::lit(DEFAULT_WIRE_EPSILON)
}

impl<T: Real> ChipConfig<T> {
    /// a = 1.5 μm, I = 29.9 mA, α = 0.093, B_b = (−9.91, 50, 0) G.
    pub fn paper() -> Self {
        Self {
            wire_separation_a: T::lit(1.5e-6),
            current_i: T::lit(29.9e-3),
            alpha: T::lit(0.093),
            bias: Vec3::new(T::lit(-9.91e-4), T::lit(50.0e-4), T::zero()),
            kappa: T::lit(constants::KAPPA),
            species: AtomSpecies::rb87(),
            wire_epsilon: default_epsilon(),
        }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let bad = |m: &str| Err(FieldError::InvalidConfig(m.to_string()));
        if !(self.wire_separation_a > T::zero()) {
            return bad("wire_separation_a must be > 0");
        }
        if self.current_i == T::zero() || !self.current_i.is_finite() {
            return bad("current_i must be finite and nonzero");
        }
        if !(self.kappa > T::zero()) {
            return bad("kappa must be > 0");
        }
        if !(self.alpha >= T::zero()) {
            return bad("alpha must be >= 0");
        }
        if !self.bias.is_finite() {
            return bad("bias components must be finite");
        }
        if !(self.species.mass > T::zero()) {
            return bad("species mass must be > 0");
        }
        if !(self.species.magic_field > T::zero()) {
            return bad("species magic_field must be > 0");
        }
        Ok(())
    }

    /// The trapping wire and the two crossing wires (at x = +a/2 and x = −a/2).
    pub fn wires(&self) -> [Wire<T>; 3] {
        let half = self.wire_separation_a / T::lit(2.0);
        let cross = self.alpha * self.current_i;
        [
            Wire { axis: WireAxis::X, offset: T::zero(), current: self.current_i },
            Wire { axis: WireAxis::Y, offset: half, current: cross },
            Wire { axis: WireAxis::Y, offset: -half, current: cross },
        ]
    }
}

/// Field at a point together with its magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample<T> {
    pub position: Vec3<T>,
    pub b: Vec3<T>,
    pub magnitude: T,
}

/// Total field: trapping wire + bias + both crossing wires.
pub fn chip_field<T: Real>(
    config: &ChipConfig<T>,
    point: Vec3<T>,
) -> Result<FieldSample<T>, FieldError> {
    let mut b = config.bias;
    for wire in config.wires() {
        b += wire.field(config.kappa, point, config.wire_epsilon)?;
    }
    Ok(FieldSample { position: point, b, magnitude: b.norm() })
}

/// Jacobian ∂B_i/∂x_j of the total field (the bias is uniform).
pub fn chip_field_jacobian<T: Real>(config: &ChipConfig<T>, point: Vec3<T>) -> Result<[[T; 3]; 3], FieldError> {
    let mut j = [[T::zero(); 3]; 3];
    for wire in config.wires() {
        let jw = wire.jacobian(config.kappa, point, config.wire_epsilon)?;
        for r in 0..3 {
            for c in 0..3 {
                j[r][c] = j[r][c] + jw[r][c];
            }
        }
    }
    Ok(j)
}

/// Analytic gradient of |B|: Jᵀ B / |B|.
pub fn field_magnitude_gradient<T: Real>(config: &ChipConfig<T>, point: Vec3<T>) -> Result<Vec3<T>, FieldError> {
    let s = chip_field(config, point)?;
    let j = chip_field_jacobian(config, point)?;
    let b = s.b.to_array();
    let mut g = [T::zero(); 3];
    for (c, gc) in g.iter_mut().enumerate() {
        *gc = (b[0] * j[0][c] + b[1] * j[1][c] + b[2] * j[2][c]) / s.magnitude;
    }
    Ok(Vec3::from_array(g))
}

/// Field magnitude only.
pub fn field_magnitude<T: Real>(config: &ChipConfig<T>, point: Vec3<T>) -> Result<T, FieldError> {
    chip_field(config, point).map(|s| s.magnitude)
}

/// Zeeman potential U = g_F m_F μ_B |B| of the trapped clock states.
pub fn zeeman_potential<T: Real>(config: &ChipConfig<T>, point: Vec3<T>) -> Result<T, FieldError> {
    Ok(config.species.moment() * field_magnitude(config, point)?)
}

/// Potential energy for a given field magnitude.
pub fn zeeman_energy<T: Real>(species: &AtomSpecies<T>, magnitude: T) -> T {
    species.moment() * magnitude
}
