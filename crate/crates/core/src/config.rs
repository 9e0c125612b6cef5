//! Flat `key = value` run configuration.
//!
//! Blank lines and text after `#` are ignored. Keys name fields of
//! [`PhysicalConfig`], [`ModelParams`] and [`ScanProtocol`], plus a few
//! conveniences:
//!
//! | key | meaning |
//! |---|---|
//! | `preset` | start from a named scenario instead of the default one |
//! | `resonant_intensity` | sets `drive` so that `t²a_in²/γ_cav² = value` |
//! | `ramp_rate` | with `phi0_start`/`phi0_end`, sets `duration` |
//! | `initial_orientation` | starting `p` (the field starts dark) |
//! | `pumping` | `default` fills `β` and `γ_p` from the rate equations |
//!
//! If any physical key appears, the physical configuration (default or the
//! preset's) is updated and converted first; model keys then override the
//! converted values.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::dynamics::ScanKind;
use crate::error::{Error, Result};
use crate::model::{SystemState, Variant};
use crate::presets::{self, Scenario};
use crate::units::{self, PhysicalConfig};

const PHYSICAL_KEYS: &[&str] = &[
    "gamma_over_2pi",
    "wavelength",
    "cavity_length",
    "input_transmission",
    "extra_loss",
    "waist",
    "dipole",
    "saturation_intensity",
    "atom_number",
    "atomic_detuning",
    "input_power",
];

const MODEL_KEYS: &[&str] = &[
    "delta",
    "phi0",
    "gamma_cav",
    "kappa",
    "cooperativity",
    "beta",
    "gamma_p",
    "drive",
    "mirror_transmission",
    "variant",
    "resonant_intensity",
    "pumping",
];

const PROTOCOL_KEYS: &[&str] = &[
    "kind",
    "phi0_start",
    "phi0_end",
    "ramp_rate",
    "atom_decay_rate",
    "duration",
    "samples",
    "output_coupling",
    "round_trip",
    "initial_orientation",
];

/// Parsed configuration: key to `(value, line number)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    pub source: String,
    pub entries: BTreeMap<String, (String, usize)>,
}

pub fn known_keys() -> impl Iterator<Item = &'static str> {
    ["preset"].into_iter().chain(PHYSICAL_KEYS.iter().copied()).chain(MODEL_KEYS.iter().copied()).chain(PROTOCOL_KEYS.iter().copied())
}

impl Config {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| Error::ConfigParse {
                path: source.to_string(),
                line: line_no,
                reason,
            };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if !known_keys().any(|k| k == key) {
                return Err(err(format!(
                    "unknown key `{key}` (valid: {})",
                    known_keys().collect::<Vec<_>>().join(", ")
                )));
            }
            if value.is_empty() {
                return Err(err(format!("missing value for `{key}`")));
            }
            if entries.insert(key.to_string(), (value.to_string(), line_no)).is_some() {
                return Err(err(format!("duplicate key `{key}`")));
            }
        }
        Ok(Self {
            source: source.to_string(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn value<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|e: T::Err| Error::ConfigParse {
                path: self.source.clone(),
                line: *line,
                reason: format!("bad value `{v}` for `{key}`: {e}"),
            }),
        }
    }

    fn has_any(&self, keys: &[&str]) -> bool {
        keys.iter().any(|k| self.entries.contains_key(*k))
    }

    /// Builds a scenario on top of `base` (or the `preset` key, or the default
    /// scenario).
    pub fn scenario(&self, base: Option<Scenario>) -> Result<Scenario> {
        let mut scenario = match (self.get("preset"), base) {
            (Some(name), _) => presets::preset_scenario(name)?,
            (None, Some(s)) => s,
            (None, None) => presets::base_scenario()?,
        };

        if self.has_any(PHYSICAL_KEYS) {
            let mut phys = scenario.physical.unwrap_or_default();
            self.apply_physical(&mut phys)?;
            let converted = units::to_dimensionless(&phys)?;
            let p = &mut scenario.params;
            p.delta = converted.delta;
            p.gamma_cav = converted.gamma_cav;
            p.kappa = converted.kappa;
            p.cooperativity = converted.cooperativity;
            p.drive = converted.drive;
            p.mirror_transmission = converted.mirror_transmission;
            scenario.physical = Some(phys);
        } else if self.has_any(MODEL_KEYS) {
            scenario.physical = None;
        }

        let p = &mut scenario.params;
        macro_rules! set {
            ($($key:literal => $field:ident),*) => {$(
                if let Some(v) = self.value::<f64>($key)? {
                    p.$field = v;
                }
            )*};
        }
        set!("delta" => delta, "gamma_cav" => gamma_cav, "kappa" => kappa, "cooperativity" => cooperativity,
             "beta" => beta, "gamma_p" => gamma_p, "drive" => drive, "mirror_transmission" => mirror_transmission);
        if let Some(v) = self.value::<Variant>("variant")? {
            p.variant = v;
        }
        if let Some(mode) = self.get("pumping") {
            if mode != "default" {
                return Err(self.bad("pumping", "only `default` is recognised"));
            }
            *p = presets::with_default_pumping(*p)?;
            for key in ["beta", "gamma_p"] {
                if self.entries.contains_key(key) {
                    return Err(Error::InconsistentConfig(format!("`pumping = default` conflicts with `{key}`")));
                }
            }
        }
        if let Some(i) = self.value::<f64>("resonant_intensity")? {
            if self.entries.contains_key("drive") {
                return Err(Error::InconsistentConfig("give either `drive` or `resonant_intensity`".into()));
            }
            p.drive = p.drive_for_resonant_intensity(i);
        }

        self.apply_protocol(&mut scenario)?;
        if let Some(v) = self.value::<f64>("phi0")? {
            scenario.params.phi0 = v;
            if scenario.protocol.kind != ScanKind::LinearPhaseRamp && !self.entries.contains_key("phi0_start") {
                scenario.protocol.phi0_start = v;
                scenario.protocol.phi0_end = v;
            }
        } else {
            scenario.params.phi0 = scenario.protocol.phi0_start;
        }
        if let Some(v) = self.value::<f64>("initial_orientation")? {
            scenario.initial = SystemState::new(Default::default(), v, 0.0);
        } else if self.has_any(PHYSICAL_KEYS) || self.has_any(MODEL_KEYS) || self.has_any(PROTOCOL_KEYS) {
            // the preset's starting state belongs to its own parameters; without
            // relaxation the steady state is fully pumped, so start dark
            scenario.initial = if scenario.params.gamma_p == 0.0 {
                SystemState::dark()
            } else {
                crate::dynamics::steady_start(&scenario.params).unwrap_or_else(|_| SystemState::dark())
            };
        }
        scenario.params.validate()?;
        scenario.protocol.validate()?;
        Ok(scenario)
    }

    fn bad(&self, key: &str, reason: &str) -> Error {
        let (value, line) = self.entries.get(key).cloned().unwrap_or_default();
        Error::ConfigParse {
            path: self.source.clone(),
            line,
            reason: format!("bad value `{value}` for `{key}`: {reason}"),
        }
    }

    fn apply_physical(&self, phys: &mut PhysicalConfig) -> Result<()> {
        macro_rules! set {
            ($($key:literal => $field:ident),*) => {$(
                if let Some(v) = self.value::<f64>($key)? {
                    phys.$field = v;
                }
            )*};
        }
        set!("gamma_over_2pi" => gamma_over_2pi, "wavelength" => wavelength, "cavity_length" => cavity_length,
             "input_transmission" => input_transmission, "extra_loss" => extra_loss, "waist" => waist,
             "atom_number" => atom_number, "atomic_detuning" => atomic_detuning, "input_power" => input_power);
        if let Some(v) = self.value::<f64>("dipole")? {
            phys.dipole = Some(v);
        }
        if let Some(v) = self.value::<f64>("saturation_intensity")? {
            phys.saturation_intensity = Some(v);
        }
        Ok(())
    }

    fn apply_protocol(&self, scenario: &mut Scenario) -> Result<()> {
        let proto = &mut scenario.protocol;
        if let Some(kind) = self.get("kind") {
            proto.kind = match kind {
                "static" | "static_phase" => ScanKind::StaticPhase,
                "ramp" | "linear_phase_ramp" => ScanKind::LinearPhaseRamp,
                "atom_decay" | "atom_decay_drift" => ScanKind::AtomDecayDrift,
                _ => return Err(self.bad("kind", "expected static_phase, linear_phase_ramp or atom_decay_drift")),
            };
        }
        macro_rules! set {
            ($($key:literal => $field:ident),*) => {$(
                if let Some(v) = self.value::<f64>($key)? {
                    proto.$field = v;
                }
            )*};
        }
        set!("phi0_start" => phi0_start, "phi0_end" => phi0_end, "atom_decay_rate" => atom_decay_rate,
             "duration" => duration, "output_coupling" => output_coupling);
        if let Some(v) = self.value::<usize>("samples")? {
            proto.samples = v;
        }
        if let Some(v) = self.value::<bool>("round_trip")? {
            scenario.round_trip = v;
        }
        if proto.kind == ScanKind::StaticPhase && !self.entries.contains_key("phi0_end") {
            proto.phi0_end = proto.phi0_start;
        }
        if let Some(rate) = self.value::<f64>("ramp_rate")? {
            if !(rate > 0.0) {
                return Err(self.bad("ramp_rate", "must be positive"));
            }
            let duration = (proto.phi0_end - proto.phi0_start).abs() / rate;
            if self.entries.contains_key("duration") && (duration - proto.duration).abs() > 1e-9 * duration {
                return Err(Error::InconsistentConfig(format!(
                    "ramp_rate {rate} implies duration {duration}, but duration = {}",
                    proto.duration
                )));
            }
            proto.duration = duration;
        }
        Ok(())
    }
}
