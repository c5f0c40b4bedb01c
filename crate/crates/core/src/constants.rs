//! Physical constants and unit factors (SI).

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Wire field constant μ0/(2π), T·m/A.
pub const KAPPA: f64 = 2.0e-7;

/// One gauss in tesla.
pub const GAUSS: f64 = 1.0e-4;
pub const MICROMETER: f64 = 1.0e-6;
pub const NANOMETER: f64 = 1.0e-9;
pub const MILLIAMPERE: f64 = 1.0e-3;
pub const KILOHERTZ: f64 = 1.0e3;
pub const MILLISECOND: f64 = 1.0e-3;
pub const MICROSECOND: f64 = 1.0e-6;

/// ⁸⁷Rb mass used throughout, kg.
pub const RB87_MASS: f64 = 1.44e-25;
/// ⁸⁷Rb ground-state hyperfine splitting, Hz.
pub const RB87_HYPERFINE: f64 = 6.835e9;
/// Magic offset field for the |F=2,mF=1⟩ / |F=1,mF=−1⟩ clock pair, T.
pub const RB87_MAGIC_FIELD: f64 = 3.23 * GAUSS;
