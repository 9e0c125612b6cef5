//! Laboratory units to the dimensionless model.
//!
//! Intensities are normalized as `I = g²|α|²/(Γ²/4)` with `|α|²` in photons
//! per second and `g² = d²ω_L/(2ε₀ħSc)`, which fixes the saturation intensity
//! at `ε₀cħ²Γ²/(2d²)`. Time is measured in units of `1/Γ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Variant};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const EPSILON_0: f64 = 8.854_187_8128e-12;

/// Cesium D2 line, `6S₁/₂ F=4 → 6P₃/₂ F′=5`.
pub mod cesium {
    pub const WAVELENGTH: f64 = 852.35e-9;
    pub const GAMMA_OVER_2PI: f64 = 5.2e6;
    /// Mean squared Clebsch–Gordan coefficient of σ+ transitions from F=4,
    /// relative to the stretched transition.
    pub const MEAN_CG_SQUARED: f64 = 11.0 / 27.0;
}

/// Dipole of a closed two-level transition with decay rate `gamma` (s⁻¹) at
/// angular frequency `omega`: `d² = 3πε₀ħc³Γ/ω³`.
pub fn cycling_dipole(gamma: f64, omega: f64) -> f64 {
    (3.0 * PI * EPSILON_0 * HBAR * SPEED_OF_LIGHT.powi(3) * gamma / omega.powi(3)).sqrt()
}

/// Saturation intensity (W/m²) implied by a dipole under this normalization.
pub fn saturation_intensity(dipole: f64, gamma: f64) -> f64 {
    EPSILON_0 * SPEED_OF_LIGHT * (HBAR * gamma).powi(2) / (2.0 * dipole * dipole)
}

/// Dipole implied by a saturation intensity; inverse of [`saturation_intensity`].
pub fn dipole_from_saturation(intensity: f64, gamma: f64) -> f64 {
    (EPSILON_0 * SPEED_OF_LIGHT / (2.0 * intensity)).sqrt() * HBAR * gamma
}

/// Experimental parameters in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConfig {
    /// `Γ/2π` (Hz).
    pub gamma_over_2pi: f64,
    /// Probe wavelength (m).
    pub wavelength: f64,
    /// Geometric length of the linear cavity (m).
    pub cavity_length: f64,
    /// Intensity transmission `t²` of the input mirror.
    pub input_transmission: f64,
    /// Other round-trip intensity losses.
    pub extra_loss: f64,
    /// Beam waist (m).
    pub waist: f64,
    /// Effective transition dipole (C·m).
    pub dipole: Option<f64>,
    /// Alternative to `dipole` (W/m²).
    pub saturation_intensity: Option<f64>,
    pub atom_number: f64,
    /// `(ω₀ − ω_L)/2π` (Hz).
    pub atomic_detuning: f64,
    /// Input power (W), assuming perfect mode matching.
    pub input_power: f64,
}

impl Default for PhysicalConfig {
    /// The cold-cesium cavity: 25 cm linear cavity, 260 µm waist, 10 % input
    /// mirror, 1 % window losses, probe 22Γ from resonance.
    fn default() -> Self {
        Self {
            gamma_over_2pi: cesium::GAMMA_OVER_2PI,
            wavelength: cesium::WAVELENGTH,
            cavity_length: 0.25,
            input_transmission: 0.1,
            extra_loss: 0.01,
            waist: 260e-6,
            dipole: None,
            saturation_intensity: None,
            atom_number: 1e8,
            atomic_detuning: 22.0 * cesium::GAMMA_OVER_2PI,
            input_power: 100e-6,
        }
    }
}

/// Dimensionless couplings derived from a [`PhysicalConfig`], kept for
/// inspection next to the resulting [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    /// `Γ` (s⁻¹).
    pub gamma: f64,
    pub omega_laser: f64,
    pub dipole: f64,
    /// `g²` (s⁻¹).
    pub g_squared: f64,
    /// Mode cross-section `πw²/2` (m²).
    pub mode_area: f64,
    /// Round-trip time `2L/c` (s).
    pub round_trip_time: f64,
    /// Resonant empty-cavity intensity `t²a_in²/γ_cav²`.
    pub resonant_intensity: f64,
}

impl PhysicalConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma_over_2pi", self.gamma_over_2pi),
            ("wavelength", self.wavelength),
            ("cavity_length", self.cavity_length),
            ("input_transmission", self.input_transmission),
            ("waist", self.waist),
            ("input_power", self.input_power),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.extra_loss >= 0.0 && self.extra_loss.is_finite()) {
            return Err(Error::invalid("extra_loss", "must be non-negative"));
        }
        if !(self.atom_number >= 0.0 && self.atom_number.is_finite()) {
            return Err(Error::invalid("atom_number", "must be non-negative"));
        }
        if !self.atomic_detuning.is_finite() {
            return Err(Error::invalid("atomic_detuning", "must be finite"));
        }
        if self.input_transmission >= 1.0 {
            return Err(Error::invalid("input_transmission", "must be below 1"));
        }
        for (name, v) in [("dipole", self.dipole), ("saturation_intensity", self.saturation_intensity)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::invalid(name, format!("must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        2.0 * PI * self.gamma_over_2pi
    }

    pub fn omega_atom(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.wavelength
    }

    pub fn omega_laser(&self) -> f64 {
        self.omega_atom() - 2.0 * PI * self.atomic_detuning
    }

    /// Effective dipole: configured, implied by the saturation intensity, or
    /// the cycling dipole scaled by the mean σ+ line strength.
    pub fn effective_dipole(&self) -> Result<f64> {
        let gamma = self.gamma();
        let from_sat = self.saturation_intensity.map(|i| dipole_from_saturation(i, gamma));
        match (self.dipole, from_sat) {
            (Some(d), Some(ds)) => {
                let mismatch = (d - ds).abs() / d.max(ds);
                if mismatch > 0.05 {
                    return Err(Error::InconsistentConfig(format!(
                        "dipole {d:.4e} C·m and saturation intensity {:.4e} W/m² (dipole {ds:.4e}) differ by {:.1}%",
                        self.saturation_intensity.unwrap_or_default(),
                        100.0 * mismatch
                    )));
                }
                Ok(d)
            }
            (Some(d), None) => Ok(d),
            (None, Some(ds)) => Ok(ds),
            (None, None) => Ok(cycling_dipole(gamma, self.omega_atom()) * cesium::MEAN_CG_SQUARED.sqrt()),
        }
    }

    pub fn derived(&self) -> Result<Derived> {
        self.validate()?;
        let gamma = self.gamma();
        let omega_laser = self.omega_laser();
        let dipole = self.effective_dipole()?;
        let mode_area = PI * self.waist * self.waist / 2.0;
        let g_squared = dipole * dipole * omega_laser / (2.0 * EPSILON_0 * HBAR * mode_area * SPEED_OF_LIGHT);
        let gamma_cav = self.gamma_cav();
        let drive_sq = 4.0 * g_squared * self.input_power / (HBAR * omega_laser) / (gamma * gamma);
        Ok(Derived {
            gamma,
            omega_laser,
            dipole,
            g_squared,
            mode_area,
            round_trip_time: 2.0 * self.cavity_length / SPEED_OF_LIGHT,
            resonant_intensity: self.input_transmission * drive_sq / (gamma_cav * gamma_cav),
        })
    }

    /// `γ_cav = t²/2 + extra_loss/2`.
    pub fn gamma_cav(&self) -> f64 {
        0.5 * (self.input_transmission + self.extra_loss)
    }

    /// Atom number giving cooperativity `c` with everything else unchanged.
    pub fn atoms_for_cooperativity(&self, c: f64) -> Result<f64> {
        let d = self.derived()?;
        Ok(c * self.gamma_cav() * d.gamma / d.g_squared)
    }

    /// Input power giving resonant intensity `intensity`.
    pub fn power_for_resonant_intensity(&self, intensity: f64) -> Result<f64> {
        let d = self.derived()?;
        Ok(self.input_power * intensity / d.resonant_intensity)
    }
}

/// Converts to model units. The orientation parameters are left at `β = 0`
/// and `γ_p = 0`; callers set them (see [`crate::presets::with_default_pumping`]).
pub fn to_dimensionless(config: &PhysicalConfig) -> Result<ModelParams> {
    let d = config.derived()?;
    let gamma_cav = config.gamma_cav();
    let delta = 2.0 * 2.0 * PI * config.atomic_detuning / d.gamma;
    let drive_sq = 4.0 * d.g_squared * config.input_power / (HBAR * d.omega_laser) / (d.gamma * d.gamma);
    Ok(ModelParams {
        delta,
        phi0: 0.0,
        gamma_cav,
        kappa: gamma_cav / d.round_trip_time / d.gamma,
        cooperativity: d.g_squared * config.atom_number / (gamma_cav * d.gamma),
        beta: 0.0,
        gamma_p: 0.0,
        drive: drive_sq.sqrt(),
        mirror_transmission: config.input_transmission,
        variant: Variant::Simple,
    })
}
