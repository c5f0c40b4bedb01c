//! Double-well chip trap simulator: field, trap, 1D spectrum, two-atom
//! collisions, Raman sidebands, transfer-scheme logic and the run pipeline.

pub mod chipfield;
pub mod collider2d;
pub mod conductor;
pub mod constants;
pub mod gatelogic;
pub mod raman;
pub mod scalar;
pub mod spectrum1d;
pub mod trapfinder;

pub use scalar::Real;

// The closed-form parts are generic; the numerical pipeline runs in f64.
pub type Vec3f = chipfield::Vec3<f32>;
pub type Vec3d = chipfield::Vec3<f64>;
pub type ChipConfigF32 = chipfield::ChipConfig<f32>;
pub type ChipConfigF64 = chipfield::ChipConfig<f64>;
pub type RamanSetupF32 = raman::RamanSetup<f32>;
pub type RamanSetupF64 = raman::RamanSetup<f64>;
pub type SchemeF32 = gatelogic::Scheme<f32>;
pub type SchemeF64 = gatelogic::Scheme<f64>;
