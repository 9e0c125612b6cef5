//! Dimensionless cavity/orientation model.
//!
//! Time is measured in units of the natural linewidth (Γ = 1). The field is
//! stored in the scaling `a = 2gα/Γ`, so `|a|²` is directly the intracavity
//! intensity normalized to the saturation intensity. The round-trip equation
//! for the field is divided by the round-trip time, which turns it into
//!
//! ```text
//! da/dt = (κ/γ_cav) · (t·a_in − (γ_cav − iΦ_cav)·a)
//! dp/dt = −γ_p·p + R(I)·(1 − p)
//! ```
//!
//! where `t` is the amplitude transmission of the coupling mirror and `R(I)`
//! the pumping rate, linear in the intensity for the Kerr-expansion variant
//! and saturating for the full two-level variant.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which atomic response is used for the phase shift and the pumping rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Linear plus Kerr phase, pumping rate `β·I`.
    Simple,
    /// Complex saturated two-level phase and saturated pumping.
    Saturated,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simple" => Ok(Variant::Simple),
            "saturated" => Ok(Variant::Saturated),
            other => Err(Error::invalid(
                "variant",
                format!("`{other}` (valid: simple, saturated)"),
            )),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Simple => "simple",
            Variant::Saturated => "saturated",
        })
    }
}

/// All dimensionless model constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Normalized detuning `2(ω₀ − ω_L)/Γ`.
    pub delta: f64,
    /// Geometric round-trip phase (radians).
    pub phi0: f64,
    /// Mirror decay coefficient per round trip.
    pub gamma_cav: f64,
    /// Cavity field decay rate `γ_cav/τ` in units of Γ.
    pub kappa: f64,
    /// Bistability parameter `C = g²N/(γ_cav Γ)`.
    pub cooperativity: f64,
    /// Pumping rate per unit normalized intensity (units of Γ).
    pub beta: f64,
    /// Orientation relaxation rate (units of Γ).
    pub gamma_p: f64,
    /// Input field amplitude, scaled like the intracavity field.
    pub drive: f64,
    /// Intensity transmission `t²` of the coupling mirror.
    pub mirror_transmission: f64,
    pub variant: Variant,
}

impl ModelParams {
    /// Parameters with the coupling mirror as the only loss (`t² = 2γ_cav`).
    pub fn new(delta: f64, gamma_cav: f64, kappa: f64, cooperativity: f64) -> Self {
        Self {
            delta,
            phi0: 0.0,
            gamma_cav,
            kappa,
            cooperativity,
            beta: 0.0,
            gamma_p: 0.0,
            drive: 0.0,
            mirror_transmission: 2.0 * gamma_cav,
            variant: Variant::Simple,
        }
    }

    pub fn with_phi0(mut self, phi0: f64) -> Self {
        self.phi0 = phi0;
        self
    }

    pub fn with_drive(mut self, drive: f64) -> Self {
        self.drive = drive;
        self
    }

    pub fn with_pumping(mut self, beta: f64, gamma_p: f64) -> Self {
        self.beta = beta;
        self.gamma_p = gamma_p;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("delta", self.delta),
            ("phi0", self.phi0),
            ("gamma_cav", self.gamma_cav),
            ("kappa", self.kappa),
            ("cooperativity", self.cooperativity),
            ("beta", self.beta),
            ("gamma_p", self.gamma_p),
            ("drive", self.drive),
            ("mirror_transmission", self.mirror_transmission),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(Error::invalid(name, format!("{value} is not finite")));
            }
        }
        if self.gamma_cav <= 0.0 {
            return Err(Error::invalid("gamma_cav", "must be > 0"));
        }
        if self.kappa <= 0.0 {
            return Err(Error::invalid("kappa", "must be > 0"));
        }
        if self.mirror_transmission <= 0.0 || self.mirror_transmission > 1.0 {
            return Err(Error::invalid("mirror_transmission", "must lie in (0, 1]"));
        }
        if self.beta < 0.0 {
            return Err(Error::invalid("beta", "must be >= 0"));
        }
        if self.gamma_p < 0.0 {
            return Err(Error::invalid("gamma_p", "must be >= 0"));
        }
        if self.cooperativity < 0.0 {
            return Err(Error::invalid("cooperativity", "must be >= 0"));
        }
        if self.variant == Variant::Simple && self.delta == 0.0 {
            return Err(Error::DegenerateDetuning);
        }
        Ok(())
    }

    /// Amplitude transmission `t` of the coupling mirror.
    pub fn input_coupling(&self) -> f64 {
        self.mirror_transmission.sqrt()
    }

    /// Injected field term `t·a_in`.
    pub fn injection(&self) -> f64 {
        self.input_coupling() * self.drive
    }

    /// Intracavity intensity of the empty cavity on resonance, `t²a_in²/γ_cav²`.
    pub fn resonant_intensity(&self) -> f64 {
        let y = self.injection() / self.gamma_cav;
        y * y
    }

    /// Drive amplitude that gives a resonant empty-cavity intensity `intensity`.
    pub fn drive_for_resonant_intensity(&self, intensity: f64) -> f64 {
        intensity.max(0.0).sqrt() * self.gamma_cav / self.input_coupling()
    }

    /// Linear atomic phase shift `Φ_L = 2Cγ_cav/δ`.
    pub fn linear_phase(&self) -> Result<f64> {
        if self.delta == 0.0 {
            return Err(Error::DegenerateDetuning);
        }
        Ok(self.linear_phase_unchecked())
    }

    /// Kerr coefficient `K = 4Cγ_cav/δ³`.
    pub fn kerr_coefficient(&self) -> Result<f64> {
        if self.delta == 0.0 {
            return Err(Error::DegenerateDetuning);
        }
        Ok(self.kerr_coefficient_unchecked())
    }

    #[inline]
    fn linear_phase_unchecked(&self) -> f64 {
        2.0 * self.cooperativity * self.gamma_cav / self.delta
    }

    #[inline]
    fn kerr_coefficient_unchecked(&self) -> f64 {
        4.0 * self.cooperativity * self.gamma_cav / (self.delta * self.delta * self.delta)
    }

    /// `Φ₀ + Φ_L(1 + p) − K·I`.
    pub fn total_phase_simple(&self, intensity: f64, orientation: f64) -> Result<f64> {
        let phase_l = self.linear_phase()?;
        let k = self.kerr_coefficient_unchecked();
        Ok(self.phi0 + phase_l * (1.0 + orientation) - k * intensity)
    }

    /// Saturated two-level phase `Φ₁ = 2Cγ_cav(δ + i)/(1 + δ² + 2I)`.
    ///
    /// The imaginary part is the absorption of the unpumped medium.
    pub fn phi1_saturated(&self, intensity: f64) -> Complex64 {
        let denom = self.saturation_denominator(intensity);
        Complex64::new(self.delta, 1.0) * (2.0 * self.cooperativity * self.gamma_cav / denom)
    }

    #[inline]
    pub fn saturation_denominator(&self, intensity: f64) -> f64 {
        1.0 + self.delta * self.delta + 2.0 * intensity
    }

    /// Round-trip phase for the configured variant; complex only for `Saturated`.
    pub fn total_phase(&self, intensity: f64, orientation: f64) -> Complex64 {
        match self.variant {
            Variant::Simple => Complex64::new(
                self.phi0 + self.linear_phase_unchecked() * (1.0 + orientation)
                    - self.kerr_coefficient_unchecked() * intensity,
                0.0,
            ),
            Variant::Saturated => self.phi0 + self.phi1_saturated(intensity) * (1.0 + orientation),
        }
    }

    /// Complex loss `Λ = γ_cav − iΦ_cav`; its real part is the effective decay
    /// per round trip, including absorption for the saturated variant.
    #[inline]
    pub fn round_trip_loss(&self, intensity: f64, orientation: f64) -> Complex64 {
        self.gamma_cav - Complex64::i() * self.total_phase(intensity, orientation)
    }

    /// Partial derivatives `(∂Λ/∂I, ∂Λ/∂p)`.
    pub fn round_trip_loss_derivatives(&self, intensity: f64, orientation: f64) -> (Complex64, Complex64) {
        let i = Complex64::i();
        match self.variant {
            Variant::Simple => (
                i * self.kerr_coefficient_unchecked(),
                -i * self.linear_phase_unchecked(),
            ),
            Variant::Saturated => {
                let phi1 = self.phi1_saturated(intensity);
                let dphi1 = -2.0 * phi1 / self.saturation_denominator(intensity);
                (-i * dphi1 * (1.0 + orientation), -i * phi1)
            }
        }
    }

    /// Pumping rate `R(I)` multiplying `(1 − p)`.
    ///
    /// In the saturated variant the coefficient is rescaled by `1 + δ²` so both
    /// variants agree at low intensity.
    #[inline]
    pub fn pumping_rate(&self, intensity: f64) -> f64 {
        match self.variant {
            Variant::Simple => self.beta * intensity,
            Variant::Saturated => {
                let s0 = 1.0 + self.delta * self.delta;
                self.beta * s0 * intensity / self.saturation_denominator(intensity)
            }
        }
    }

    /// `dR/dI`.
    #[inline]
    pub fn pumping_rate_derivative(&self, intensity: f64) -> f64 {
        match self.variant {
            Variant::Simple => self.beta,
            Variant::Saturated => {
                let s0 = 1.0 + self.delta * self.delta;
                let s = self.saturation_denominator(intensity);
                self.beta * s0 * s0 / (s * s)
            }
        }
    }

    /// Steady orientation for a frozen intensity, `R/(γ_p + R)`.
    ///
    /// Returns `None` when the orientation is neutral (`γ_p = 0` and no light).
    pub fn steady_orientation(&self, intensity: f64) -> Option<f64> {
        let rate = self.pumping_rate(intensity);
        let total = self.gamma_p + rate;
        (total > 0.0).then(|| rate / total)
    }

    /// Cavity field rate `κ/γ_cav = 1/τ`.
    #[inline]
    pub fn round_trip_rate(&self) -> f64 {
        self.kappa / self.gamma_cav
    }

    /// `da/dt`.
    pub fn field_rhs(&self, state: &SystemState) -> Complex64 {
        let loss = self.round_trip_loss(state.intensity(), state.orientation);
        self.round_trip_rate() * (self.injection() - loss * state.field)
    }

    /// `dp/dt`.
    pub fn orientation_rhs(&self, state: &SystemState) -> f64 {
        let p = state.orientation;
        -self.gamma_p * p + self.pumping_rate(state.intensity()) * (1.0 - p)
    }

    /// Both right-hand sides in real coordinates `(Re a, Im a, p)`.
    pub fn rhs_real(&self, y: &[f64; 3]) -> [f64; 3] {
        let state = SystemState::from_real(y, 0.0);
        let da = self.field_rhs(&state);
        [da.re, da.im, self.orientation_rhs(&state)]
    }

    /// Analytic Jacobian of [`rhs_real`](Self::rhs_real).
    pub fn jacobian_real(&self, y: &[f64; 3]) -> [[f64; 3]; 3] {
        let a = Complex64::new(y[0], y[1]);
        let p = y[2];
        let intensity = a.norm_sqr();
        let rate = self.round_trip_rate();
        let loss = self.round_trip_loss(intensity, p);
        let (dl_di, dl_dp) = self.round_trip_loss_derivatives(intensity, p);

        // d(Λa)/dx = Λ + a·Λ_I·2x, d(Λa)/dy = iΛ + a·Λ_I·2y, d(Λa)/dp = a·Λ_p
        let d_dx = -rate * (loss + a * dl_di * (2.0 * y[0]));
        let d_dy = -rate * (Complex64::i() * loss + a * dl_di * (2.0 * y[1]));
        let d_dp = -rate * a * dl_dp;

        let dr = self.pumping_rate_derivative(intensity) * (1.0 - p);
        [
            [d_dx.re, d_dy.re, d_dp.re],
            [d_dx.im, d_dy.im, d_dp.im],
            [
                dr * 2.0 * y[0],
                dr * 2.0 * y[1],
                -self.gamma_p - self.pumping_rate(intensity),
            ],
        ]
    }
}

/// Dynamical variables of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    /// Scaled complex intracavity amplitude, `|a|² = I`.
    pub field: Complex64,
    /// Ground-state orientation in `[0, 1]`.
    pub orientation: f64,
    pub time: f64,
}

impl SystemState {
    pub fn new(field: Complex64, orientation: f64, time: f64) -> Self {
        Self {
            field,
            orientation,
            time,
        }
    }

    /// Dark, unpumped cavity at `t = 0`.
    pub fn dark() -> Self {
        Self::new(Complex64::new(0.0, 0.0), 0.0, 0.0)
    }

    pub fn from_real(y: &[f64; 3], time: f64) -> Self {
        Self::new(Complex64::new(y[0], y[1]), y[2], time)
    }

    pub fn to_real(&self) -> [f64; 3] {
        [self.field.re, self.field.im, self.orientation]
    }

    #[inline]
    pub fn intensity(&self) -> f64 {
        self.field.norm_sqr()
    }
}
