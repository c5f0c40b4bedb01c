//! Run configuration: JSON with optional unit-suffixed values ("50 G",
//! "1.5 um"), normalized to SI on load and written back as plain SI numbers.

use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::chipfield::{AtomSpecies, ChipConfig, Vec3};
use crate::collider2d::ContactModel;
use crate::constants;
use crate::spectrum1d::KineticKind;
use crate::trapfinder::BiasComponent;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} (line {line}, column {column}): {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn parse_quantity(text: &str, units: &[(&str, f64)], what: &str) -> Result<f64, String> {
    let t = text.trim();
    let split = t
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit() || c == '.' || c == '+' || c == '-' || ((c == 'e' || c == 'E') && i > 0 && {
                // exponent marker only when followed by a digit or sign
                t[i + 1..].starts_with(|n: char| n.is_ascii_digit() || n == '-' || n == '+')
            }))
        })
        .map(|(i, _)| i)
        .unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let value: f64 = num.trim().parse().map_err(|_| format!("cannot read a number from {text:?}"))?;
    let unit = unit.trim();
    let factor = if unit.is_empty() {
        1.0
    } else {
        units.iter().find(|(u, _)| *u == unit).map(|(_, f)| *f).ok_or_else(|| {
            let known: Vec<&str> = units.iter().map(|(u, _)| *u).collect();
            format!("unknown unit {unit:?} for {what}; expected one of {}", known.join(", "))
        })?
    };
    // shift the decimal exponent for powers of ten so "-9.91 G" parses to the
    // nearest double instead of carrying a multiplication rounding error
    let k = factor.log10().round();
    if factor != 1.0 && (10f64.powi(k as i32) == factor) {
        let n = num.trim();
        let (mantissa, e0) = match n.find(['e', 'E']) {
            Some(i) => (&n[..i], n[i + 1..].parse::<i32>().unwrap_or(0)),
            None => (n, 0),
        };
        if let Ok(v) = format!("{mantissa}e{}", e0 + k as i32).parse::<f64>() {
            return Ok(v);
        }
    }
    Ok(value * factor)
}

macro_rules! quantity {
    ($(#[$doc:meta])* $name:ident, $what:literal, [$(($unit:literal, $factor:expr)),* $(,)?]) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
        pub struct $name(pub f64);

        impl $name {
            pub const UNITS: &'static [(&'static str, f64)] = &[$(($unit, $factor)),*];

            pub fn parse(text: &str) -> Result<Self, String> {
                parse_quantity(text, Self::UNITS, $what).map(Self)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_f64(self.0)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                struct V;
                impl<'de> Visitor<'de> for V {
                    type Value = $name;
                    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                        write!(f, "{} as an SI number or a string with a unit", $what)
                    }
                    fn visit_f64<E: de::Error>(self, v: f64) -> Result<$name, E> {
                        Ok($name(v))
                    }
                    fn visit_i64<E: de::Error>(self, v: i64) -> Result<$name, E> {
                        Ok($name(v as f64))
                    }
                    fn visit_u64<E: de::Error>(self, v: u64) -> Result<$name, E> {
                        Ok($name(v as f64))
                    }
                    fn visit_str<E: de::Error>(self, v: &str) -> Result<$name, E> {
                        $name::parse(v).map_err(E::custom)
                    }
                }
                d.deserialize_any(V)
            }
        }
    };
}

quantity!(
    /// Metres.
    Length, "a length", [("m", 1.0), ("mm", 1e-3), ("um", 1e-6), ("μm", 1e-6), ("nm", 1e-9)]
);
quantity!(
    /// Amperes.
    Current, "a current", [("A", 1.0), ("mA", 1e-3), ("uA", 1e-6), ("μA", 1e-6)]
);
quantity!(
    /// Tesla.
    MagneticField, "a magnetic field", [("T", 1.0), ("mT", 1e-3), ("G", constants::GAUSS), ("mG", 1e-3 * constants::GAUSS)]
);
quantity!(
    /// Seconds.
    Time, "a time", [("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("μs", 1e-6), ("ns", 1e-9)]
);
quantity!(
    /// Hertz (cycles per second).
    Frequency, "a frequency", [("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9)]
);

fn default_kappa() -> f64 {
    constants::KAPPA
}
fn default_wire_epsilon() -> Length {
    Length(1e-9)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSection {
    /// kg
    pub mass: f64,
    pub gf_mf: f64,
    /// J/T
    pub bohr_magneton: f64,
    pub magic_field: MagneticField,
    pub hyperfine_freq: Frequency,
}

impl Default for SpeciesSection {
    fn default() -> Self {
        Self {
            mass: constants::RB87_MASS,
            gf_mf: 0.5,
            bohr_magneton: constants::BOHR_MAGNETON,
            magic_field: MagneticField(constants::RB87_MAGIC_FIELD),
            hyperfine_freq: Frequency(constants::RB87_HYPERFINE),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChipSection {
    pub wire_separation_a: Length,
    pub current_i: Current,
    pub alpha: f64,
    pub bias: [MagneticField; 3],
    /// T·m/A
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_wire_epsilon")]
    pub wire_epsilon: Length,
    #[serde(default)]
    pub species: SpeciesSection,
}

impl ChipSection {
    pub fn to_chip(&self) -> ChipConfig<f64> {
        let s = &self.species;
        ChipConfig {
            wire_separation_a: self.wire_separation_a.0,
            current_i: self.current_i.0,
            alpha: self.alpha,
            bias: Vec3::new(self.bias[0].0, self.bias[1].0, self.bias[2].0),
            kappa: self.kappa,
            species: AtomSpecies {
                mass: s.mass,
                gf_mf: s.gf_mf,
                bohr_magneton: s.bohr_magneton,
                magic_field: s.magic_field.0,
                hyperfine_freq: s.hyperfine_freq.0,
            },
            wire_epsilon: self.wire_epsilon.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneSection {
    pub target_field: MagneticField,
    pub component: BiasComponent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapSection {
    pub seeds: Vec<[Length; 3]>,
    pub hessian_step: Length,
    /// Gradient tolerance on |B| at accepted minima, T/m.
    pub grad_tol: f64,
    /// Follow the transverse field minimum when sampling the axis potential.
    pub relax_axis: bool,
    /// Retune one bias component to put the minima at a target field first.
    pub tune: Option<TuneSection>,
}

impl Default for TrapSection {
    fn default() -> Self {
        Self {
            seeds: vec![
                [Length(-0.4e-6), Length(0.0), Length(1.2e-6)],
                [Length(0.4e-6), Length(0.0), Length(1.2e-6)],
            ],
            hessian_step: Length(1e-9),
            grad_tol: 1e-6,
            relax_axis: true,
            tune: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub halfwidth: Length,
    pub grid_n: usize,
    pub n_states: usize,
    pub kinetic: KineticKind,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { halfwidth: Length(1.5e-6), grid_n: 1024, n_states: 8, kinetic: KineticKind::Fourier }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSection {
    pub grid_n: usize,
    pub halfwidth: Length,
    pub dt: Time,
    /// Propagated time; ignored when `n_steps` is set.
    pub duration: Time,
    pub n_steps: Option<usize>,
    pub record_every: usize,
    pub scattering_length: Length,
    pub transverse_correction: bool,
    pub contact: ContactModel,
    pub symmetrize: bool,
    pub tau_window: [Time; 2],
    pub leak_threshold: f64,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self {
            grid_n: 256,
            halfwidth: Length(1.5e-6),
            dt: Time(0.25e-6),
            duration: Time(22e-3),
            n_steps: None,
            record_every: 34,
            scattering_length: Length(5.3e-9),
            transverse_correction: true,
            contact: ContactModel::Delta,
            symmetrize: true,
            tau_window: [Time(10e-3), Time(22e-3)],
            leak_threshold: 0.05,
        }
    }
}

impl DynamicsSection {
    pub fn steps(&self) -> usize {
        self.n_steps.unwrap_or_else(|| (self.duration.0 / self.dt.0).round() as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RamanSection {
    /// Lamb-Dicke parameters at which sideband probabilities are tabulated.
    pub etas: Vec<f64>,
    pub n_max: usize,
    /// Trap frequency used for the microwave Lamb-Dicke factor and Δk conditions.
    pub trap_freq: Frequency,
    pub optical_wavelength: Length,
    /// Single-photon Rabi frequencies and detuning, as cyclic frequencies.
    pub rabi_1: Frequency,
    pub rabi_2: Frequency,
    pub detuning: Frequency,
}

impl Default for RamanSection {
    fn default() -> Self {
        Self {
            etas: vec![0.01, 0.02, 0.05],
            n_max: 2,
            trap_freq: Frequency(10e3),
            optical_wavelength: Length(800e-9),
            // Ω₀ = Ω₁Ω₂/2Δ = 2π·100 kHz
            rabi_1: Frequency(2e6),
            rabi_2: Frequency(2e6),
            detuning: Frequency(20e6),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeSection {
    /// rad
    pub phase: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for SchemeSection {
    fn default() -> Self {
        Self { phase: std::f64::consts::PI, trials: 1000, seed: 20_050_101 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub plots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { plots: true }
    }
}

/// Pipeline stages; each needs the ones listed by `requires`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Trap,
    Spectrum,
    Gate,
    Raman,
    Scheme,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Trap, Stage::Spectrum, Stage::Gate, Stage::Raman, Stage::Scheme];

    pub fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Trap | Stage::Scheme => &[],
            Stage::Spectrum => &[Stage::Trap],
            Stage::Gate | Stage::Raman => &[Stage::Spectrum],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Trap => "trap",
            Stage::Spectrum => "spectrum",
            Stage::Gate => "gate",
            Stage::Raman => "raman",
            Stage::Scheme => "scheme",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Dotted path into the configuration, e.g. "dynamics.scattering_length".
    pub parameter: String,
    pub values: Vec<serde_json::Value>,
    pub stage: Stage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub chip: ChipSection,
    #[serde(default)]
    pub trap: TrapSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    #[serde(default)]
    pub raman: RamanSection,
    #[serde(default)]
    pub scheme: SchemeSection,
    #[serde(default)]
    pub outputs: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

/// The shipped configuration with the paper's trap parameters.
pub const PAPER_JSON: &str = include_str!("../../configs/paper.json");

impl RunConfig {
    pub fn paper() -> Self {
        Self::from_json(PAPER_JSON).expect("shipped configuration is valid")
    }

    /// Parses and validates; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ConfigError::Parse { path, line: inner.line(), column: inner.column(), message: inner.to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| ConfigError::Parse {
            path: e.path().to_string(),
            line: 0,
            column: 0,
            message: e.into_inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |path: &str, message: &str| Err(ConfigError::Invalid { path: path.into(), message: message.into() });
        let c = &self.chip;
        if !(c.wire_separation_a.0 > 0.0) {
            return bad("chip.wire_separation_a", "must be > 0");
        }
        if c.current_i.0 == 0.0 || !c.current_i.0.is_finite() {
            return bad("chip.current_i", "must be finite and nonzero");
        }
        if !(c.alpha >= 0.0) {
            return bad("chip.alpha", "must be >= 0");
        }
        if c.bias.iter().any(|b| !b.0.is_finite()) {
            return bad("chip.bias", "components must be finite");
        }
        if !(c.kappa > 0.0) {
            return bad("chip.kappa", "must be > 0");
        }
        if !(c.wire_epsilon.0 > 0.0) {
            return bad("chip.wire_epsilon", "must be > 0");
        }
        let s = &c.species;
        for (name, v) in [
            ("chip.species.mass", s.mass),
            ("chip.species.bohr_magneton", s.bohr_magneton),
            ("chip.species.magic_field", s.magic_field.0),
            ("chip.species.hyperfine_freq", s.hyperfine_freq.0),
        ] {
            if !(v > 0.0) {
                return bad(name, "must be > 0");
            }
        }
        if !(s.gf_mf != 0.0 && s.gf_mf.is_finite()) {
            return bad("chip.species.gf_mf", "must be finite and nonzero");
        }
        let t = &self.trap;
        if t.seeds.is_empty() {
            return bad("trap.seeds", "at least one seed is required");
        }
        if t.seeds.iter().flatten().any(|x| !x.0.is_finite()) {
            return bad("trap.seeds", "coordinates must be finite");
        }
        if !(t.hessian_step.0 > 0.0) {
            return bad("trap.hessian_step", "must be > 0");
        }
        if !(t.grad_tol > 0.0) {
            return bad("trap.grad_tol", "must be > 0");
        }
        if let Some(tune) = &t.tune {
            if !(tune.target_field.0 > 0.0) {
                return bad("trap.tune.target_field", "must be > 0");
            }
        }
        let sp = &self.spectrum;
        if !(sp.halfwidth.0 > 0.0) {
            return bad("spectrum.halfwidth", "must be > 0");
        }
        if sp.grid_n < 64 {
            return bad("spectrum.grid_n", "must be at least 64");
        }
        if sp.n_states < 4 || sp.n_states > sp.grid_n / 4 {
            return bad("spectrum.n_states", "must lie in [4, grid_n/4]");
        }
        let d = &self.dynamics;
        if d.grid_n < 64 {
            return bad("dynamics.grid_n", "must be at least 64");
        }
        if !(d.halfwidth.0 > 0.0) {
            return bad("dynamics.halfwidth", "must be > 0");
        }
        if !(d.dt.0 > 0.0) {
            return bad("dynamics.dt", "must be > 0");
        }
        if d.n_steps.is_none() && !(d.duration.0 > 0.0) {
            return bad("dynamics.duration", "must be > 0");
        }
        if d.steps() == 0 {
            return bad("dynamics.n_steps", "must be > 0");
        }
        if d.record_every == 0 {
            return bad("dynamics.record_every", "must be > 0");
        }
        if !(d.scattering_length.0 >= 0.0) {
            return bad("dynamics.scattering_length", "must be >= 0");
        }
        if !(d.tau_window[0].0 >= 0.0 && d.tau_window[1].0 > d.tau_window[0].0) {
            return bad("dynamics.tau_window", "must be an increasing pair of times");
        }
        if !(d.leak_threshold > 0.0 && d.leak_threshold <= 1.0) {
            return bad("dynamics.leak_threshold", "must lie in (0, 1]");
        }
        let r = &self.raman;
        if r.etas.is_empty() || r.etas.iter().any(|e| !(*e >= 0.0)) {
            return bad("raman.etas", "need at least one non-negative value");
        }
        if r.n_max < 2 {
            return bad("raman.n_max", "must be at least 2");
        }
        for (name, v) in [
            ("raman.trap_freq", r.trap_freq.0),
            ("raman.optical_wavelength", r.optical_wavelength.0),
            ("raman.rabi_1", r.rabi_1.0),
            ("raman.rabi_2", r.rabi_2.0),
            ("raman.detuning", r.detuning.0),
        ] {
            if !(v > 0.0) {
                return bad(name, "must be > 0");
            }
        }
        if !self.scheme.phase.is_finite() {
            return bad("scheme.phase", "must be finite");
        }
        if self.scheme.trials == 0 {
            return bad("scheme.trials", "must be at least 1");
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return bad("sweep.values", "need at least one value");
            }
        }
        Ok(())
    }
}
