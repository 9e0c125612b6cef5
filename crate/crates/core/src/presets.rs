//! Named scenarios for the cold-cesium cavity.
//!
//! All presets start from [`reference_config`]: the 25 cm cavity with the probe
//! 22Γ from resonance and enough atoms for `C = 400`. Input powers are the
//! quoted ones, assuming perfect mode matching.
//!
//! Values that are not measured quantities and had to be chosen:
//!
//! - `γ_p = 10⁻³` and `β` from the sublevel rate equations at `I = 10`
//!   ([`with_default_pumping`]);
//! - scan rates, slow on the cavity time scale;
//! - the drives of the `fig6_*` presets, set as multiples of the Kerr cusp
//!   intensity;
//! - `fig2` has `β = 0`, since the trapping beams scramble the orientation;
//! - `stepwise` uses `C = 1000` and `selfpulse` sits inside the
//!   self-pulsing window found by [`crate::steady::instability_map`].

use std::sync::Mutex;

use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::{steady_start, ScanProtocol};
use crate::error::{Error, Result};
use crate::model::{ModelParams, SystemState};
use crate::steady::{instability_map, kerr_cusp_intensity, linspace};
use crate::units::{to_dimensionless, PhysicalConfig};
use crate::zeeman::pumping_beta;

pub const DEFAULT_GAMMA_P: f64 = 1e-3;
/// Intensity at which the default `β` is extracted.
pub const BETA_REFERENCE_INTENSITY: f64 = 10.0;
pub const REFERENCE_COOPERATIVITY: f64 = 400.0;
/// `Φ₀` ramp rate of the pumped scans (rad per `Γ⁻¹`).
pub const SCAN_RATE: f64 = 5e-6;
/// Ramp rate of the Kerr hysteresis scans.
pub const KERR_SCAN_RATE: f64 = 2e-6;
/// Resonant drive of `kerr_pure` in units of the Kerr cusp intensity.
pub const KERR_CUSP_MULTIPLE: f64 = 4.0;

pub const PRESET_NAMES: &[&str] = &[
    "fig2", "fig3_p1", "fig3_p2", "fig3_p3", "fig3_p4", "fig4", "fig6_p1", "fig6_p2", "fig6_p3", "fig6_p4",
    "kerr_pure", "stepwise", "selfpulse",
];

/// Input powers (W) of the four length scans.
pub const FIG3_POWERS: [f64; 4] = [10e-6, 30e-6, 80e-6, 300e-6];
/// Drives of the four computed scans, in units of the Kerr cusp intensity.
pub const FIG6_CUSP_MULTIPLES: [f64; 4] = [0.7, 2.0, 5.0, 12.0];

/// A fully specified run.
#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub name: String,
    pub params: ModelParams,
    pub protocol: ScanProtocol,
    pub initial: SystemState,
    /// Run the ramp forward and then back.
    pub round_trip: bool,
    pub physical: Option<PhysicalConfig>,
}

static BETA_CACHE: Mutex<Vec<(u64, f64)>> = Mutex::new(Vec::new());

/// `β` from the rate equations at [`BETA_REFERENCE_INTENSITY`], memoized per
/// detuning.
pub fn default_beta(delta: f64) -> Result<f64> {
    let key = delta.abs().to_bits();
    if let Some(&(_, b)) = BETA_CACHE.lock().expect("poisoned").iter().find(|(k, _)| *k == key) {
        return Ok(b);
    }
    let b = pumping_beta(BETA_REFERENCE_INTENSITY, delta.abs())?;
    BETA_CACHE.lock().expect("poisoned").push((key, b));
    Ok(b)
}

/// Sets `β` and `γ_p` to the defaults.
pub fn with_default_pumping(params: ModelParams) -> Result<ModelParams> {
    Ok(params.with_pumping(default_beta(params.delta)?, DEFAULT_GAMMA_P))
}

/// The experimental cavity with `C = 400` at input power `power` (W).
pub fn reference_config(power: f64) -> Result<PhysicalConfig> {
    let base = PhysicalConfig {
        input_power: power,
        ..PhysicalConfig::default()
    };
    Ok(PhysicalConfig {
        atom_number: base.atoms_for_cooperativity(REFERENCE_COOPERATIVITY)?,
        ..base
    })
}

fn config_for(cooperativity: f64, resonant_intensity: f64) -> Result<PhysicalConfig> {
    let base = PhysicalConfig::default();
    Ok(PhysicalConfig {
        atom_number: base.atoms_for_cooperativity(cooperativity)?,
        input_power: base.power_for_resonant_intensity(resonant_intensity)?,
        ..base
    })
}

/// `Φ₀` interval covering the resonance from fully pumped (`p = 1`, if
/// `pumped`) to the Kerr-shifted unpumped peak, with `margin` on each side.
fn resonance_span(params: &ModelParams, pumped: bool, margin: f64) -> Result<(f64, f64)> {
    let phase_l = params.linear_phase()?;
    let kerr = params.kerr_coefficient()? * params.resonant_intensity();
    let low = if pumped { -2.0 * phase_l } else { -phase_l };
    Ok((low - margin, -phase_l + kerr + margin))
}

/// Linear ramp over `span` at `rate`, sampled about every 2 time units.
fn ramp(span: (f64, f64), rate: f64) -> ScanProtocol {
    let duration = (span.1 - span.0).abs() / rate;
    let samples = (duration / 2.0).ceil() as usize + 1;
    ScanProtocol::linear_ramp(span.0, span.1, duration, samples.clamp(2001, 400_001))
}

fn scan_scenario(name: &str, physical: PhysicalConfig, pumped: bool, rate: f64, round_trip: bool) -> Result<Scenario> {
    let mut params = to_dimensionless(&physical)?;
    params = if pumped {
        with_default_pumping(params)?
    } else {
        params.with_pumping(0.0, DEFAULT_GAMMA_P)
    };
    let span = resonance_span(&params, pumped, 0.3)?;
    let protocol = ramp(span, rate);
    params = params.with_phi0(span.0);
    let initial = steady_start(&params)?;
    Ok(Scenario {
        name: name.to_string(),
        params,
        protocol,
        initial,
        round_trip,
        physical: Some(physical),
    })
}

/// Starting point for configuration files: the experimental cavity at
/// 100 µW with default pumping, held at `Φ₀ = −1.5·Φ_L`.
pub fn base_scenario() -> Result<Scenario> {
    let physical = reference_config(100e-6)?;
    let params = with_default_pumping(to_dimensionless(&physical)?)?;
    let phi0 = -1.5 * params.linear_phase()?;
    let params = params.with_phi0(phi0);
    Ok(Scenario {
        name: "custom".into(),
        params,
        protocol: ScanProtocol::static_phase(phi0, 20_000.0, 10_001),
        initial: steady_start(&params)?,
        round_trip: false,
        physical: Some(physical),
    })
}

/// Looks up a preset by name.
pub fn preset_scenario(name: &str) -> Result<Scenario> {
    match name {
        "fig2" => scan_scenario(name, reference_config(100e-6)?, false, SCAN_RATE, true),
        "fig3_p1" | "fig3_p2" | "fig3_p3" | "fig3_p4" => {
            let k = name.as_bytes()[6] - b'1';
            scan_scenario(name, reference_config(FIG3_POWERS[k as usize])?, true, SCAN_RATE, false)
        }
        "fig6_p1" | "fig6_p2" | "fig6_p3" | "fig6_p4" => {
            let k = (name.as_bytes()[6] - b'1') as usize;
            let cusp = kerr_cusp_intensity(&to_dimensionless(&reference_config(100e-6)?)?)?;
            let physical = config_for(REFERENCE_COOPERATIVITY, FIG6_CUSP_MULTIPLES[k] * cusp)?;
            scan_scenario(name, physical, true, SCAN_RATE, false)
        }
        "fig4" => {
            // about 10 ms; C halves over the run
            let physical = reference_config(80e-6)?;
            let params = with_default_pumping(to_dimensionless(&physical)?)?;
            let duration = 3.3e5;
            let phi0 = -1.1 * params.linear_phase()?;
            let protocol = ScanProtocol::atom_decay(phi0, std::f64::consts::LN_2 / duration, duration, 66_001);
            let params = params.with_phi0(phi0);
            Ok(Scenario {
                name: name.into(),
                params,
                protocol,
                initial: steady_start(&params)?,
                round_trip: false,
                physical: Some(physical),
            })
        }
        "kerr_pure" => {
            let probe = to_dimensionless(&reference_config(100e-6)?)?;
            let cusp = kerr_cusp_intensity(&probe)?;
            // at 2x the cusp the upward jump takes longer than the 5/κ
            // switch window; 4x gives clean jumps in both directions
            let physical = config_for(REFERENCE_COOPERATIVITY, KERR_CUSP_MULTIPLE * cusp)?;
            let mut params = to_dimensionless(&physical)?.with_pumping(0.0, DEFAULT_GAMMA_P);
            let span = resonance_span(&params, false, 0.2)?;
            let protocol = ramp(span, KERR_SCAN_RATE);
            params = params.with_phi0(span.0);
            Ok(Scenario {
                name: name.into(),
                params,
                protocol,
                initial: steady_start(&params)?,
                round_trip: true,
                physical: Some(physical),
            })
        }
        "stepwise" => {
            let physical = config_for(1000.0, 200.0)?;
            let params = to_dimensionless(&physical)?.with_pumping(default_beta(44.0)?, 0.0);
            let phase_l = params.linear_phase()?;
            let protocol = ramp((-0.5 * phase_l, -2.2 * phase_l), 1e-3);
            let protocol = ScanProtocol {
                samples: 40_001,
                ..protocol
            };
            Ok(Scenario {
                name: name.into(),
                params: params.with_phi0(protocol.phi0_start),
                protocol,
                initial: SystemState::dark(),
                round_trip: false,
                physical: Some(physical),
            })
        }
        "selfpulse" => {
            let physical = config_for(REFERENCE_COOPERATIVITY, 140.0)?;
            let params = with_default_pumping(to_dimensionless(&physical)?)?;
            let phi0 = self_pulsing_centre(&params)?;
            let params = params.with_phi0(phi0);
            let point = crate::steady::find_fixed_points(&params)?[0];
            Ok(Scenario {
                name: name.into(),
                params,
                protocol: ScanProtocol::static_phase(phi0, 30_000.0, 150_001),
                initial: SystemState::new(point.field * Complex64::new(0.9, 0.0), point.orientation, 0.0),
                round_trip: false,
                physical: Some(physical),
            })
        }
        _ => Err(Error::UnknownPreset {
            name: name.to_string(),
            valid: PRESET_NAMES.join(", "),
        }),
    }
}

/// Middle of the `Φ₀` interval where every steady state is unstable with at
/// least one unstable focus.
pub fn self_pulsing_centre(params: &ModelParams) -> Result<f64> {
    let span = resonance_span(params, true, 0.3)?;
    let axis = linspace(span.0, span.1, 4001);
    let map = instability_map(params, &axis, &[params.drive])?;
    let cells: Vec<f64> = map.cells.iter().filter(|c| c.is_self_pulsing()).map(|c| c.phi0).collect();
    match (cells.first(), cells.last()) {
        (Some(a), Some(b)) => Ok(0.5 * (a + b)),
        _ => Err(Error::RootFinding("no self-pulsing window at this drive".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_preset_lists_choices() {
        match preset_scenario("fig9") {
            Err(Error::UnknownPreset { valid, .. }) => assert!(valid.contains("kerr_pure")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn captions() {
        let fig2 = preset_scenario("fig2").unwrap();
        assert!((fig2.params.delta - 44.0).abs() < 1e-9);
        assert_eq!(fig2.physical.unwrap().input_power, 100e-6);
        assert_eq!(fig2.params.beta, 0.0);
        let fig4 = preset_scenario("fig4").unwrap();
        assert_eq!(fig4.physical.unwrap().input_power, 80e-6);
        assert_eq!(fig4.protocol.kind, crate::dynamics::ScanKind::AtomDecayDrift);
        let kerr = preset_scenario("kerr_pure").unwrap();
        assert_eq!(kerr.params.beta, 0.0);
        let cusp = kerr_cusp_intensity(&kerr.params).unwrap();
        assert!((kerr.params.resonant_intensity() / cusp - KERR_CUSP_MULTIPLE).abs() < 1e-9);
    }

    #[test]
    fn every_preset_is_valid_and_quasi_static() {
        for name in PRESET_NAMES {
            let s = preset_scenario(name).unwrap();
            s.params.validate().unwrap();
            s.protocol.validate().unwrap();
            assert!(s.protocol.is_quasi_static(&s.params), "{name}");
            assert!((s.params.cooperativity - REFERENCE_COOPERATIVITY).abs() < 1e-9 || *name == "stepwise");
        }
    }

    #[test]
    fn default_beta_is_memoized() {
        let a = default_beta(44.0).unwrap();
        let b = default_beta(-44.0).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0 && a < 1e-4);
    }
}
