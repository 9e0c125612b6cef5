//! Time-domain runs of the coupled field/orientation system.
//!
//! A [`ScanProtocol`] prescribes how `Φ₀` or `C` move during a run;
//! [`integrate`] samples the trajectory on a uniform grid, and the detectors
//! below turn a [`ScanTrace`] into switch events and limit-cycle reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{self, OdeSystem, Options};
use crate::model::{ModelParams, SystemState};
use crate::steady::{find_fixed_points, linspace};

/// What varies during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    /// Everything fixed at `phi0_start`.
    StaticPhase,
    /// `Φ₀` moves linearly from `phi0_start` to `phi0_end` over `duration`.
    LinearPhaseRamp,
    /// `Φ₀ = phi0_start` while `C(t) = C·exp(−atom_decay_rate·t)`.
    AtomDecayDrift,
}

/// Quasi-static scans move `Φ₀` by less than this per cavity lifetime `1/κ`.
pub const QUASI_STATIC_LIMIT: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanProtocol {
    pub kind: ScanKind,
    pub phi0_start: f64,
    pub phi0_end: f64,
    pub atom_decay_rate: f64,
    pub duration: f64,
    /// Number of output samples, including both ends.
    pub samples: usize,
    /// `γ_out` in `P_out = γ_out·I`.
    pub output_coupling: f64,
}

impl ScanProtocol {
    pub fn static_phase(phi0: f64, duration: f64, samples: usize) -> Self {
        Self {
            kind: ScanKind::StaticPhase,
            phi0_start: phi0,
            phi0_end: phi0,
            atom_decay_rate: 0.0,
            duration,
            samples,
            output_coupling: 1.0,
        }
    }

    pub fn linear_ramp(phi0_start: f64, phi0_end: f64, duration: f64, samples: usize) -> Self {
        Self {
            kind: ScanKind::LinearPhaseRamp,
            phi0_end,
            ..Self::static_phase(phi0_start, duration, samples)
        }
    }

    pub fn atom_decay(phi0: f64, decay_rate: f64, duration: f64, samples: usize) -> Self {
        Self {
            kind: ScanKind::AtomDecayDrift,
            atom_decay_rate: decay_rate,
            ..Self::static_phase(phi0, duration, samples)
        }
    }

    /// The same ramp run backwards.
    pub fn reversed(&self) -> Self {
        Self {
            phi0_start: self.phi0_end,
            phi0_end: self.phi0_start,
            ..*self
        }
    }

    /// `dΦ₀/dt` in radians per `Γ⁻¹`.
    pub fn ramp_rate(&self) -> f64 {
        match self.kind {
            ScanKind::LinearPhaseRamp => (self.phi0_end - self.phi0_start) / self.duration,
            _ => 0.0,
        }
    }

    /// Fastest rate of change of the cavity phase imposed by the protocol.
    /// For atom decay this bounds `d/dt [Φ_L(t)·(1 + p)]` with `p ≤ 1`.
    pub fn phase_sweep_rate(&self, params: &ModelParams) -> f64 {
        match self.kind {
            ScanKind::StaticPhase => 0.0,
            ScanKind::LinearPhaseRamp => self.ramp_rate().abs(),
            ScanKind::AtomDecayDrift => {
                let phase_l = params.linear_phase().map(f64::abs).unwrap_or(0.0);
                2.0 * phase_l * self.atom_decay_rate
            }
        }
    }

    pub fn is_quasi_static(&self, params: &ModelParams) -> bool {
        self.phase_sweep_rate(params) / params.kappa < QUASI_STATIC_LIMIT
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("duration", "must be positive and finite"));
        }
        if self.samples < 2 {
            return Err(Error::invalid("samples", "need at least 2 samples"));
        }
        if !(self.phi0_start.is_finite() && self.phi0_end.is_finite()) {
            return Err(Error::invalid("phi0", "must be finite"));
        }
        if !(self.atom_decay_rate >= 0.0 && self.atom_decay_rate.is_finite()) {
            return Err(Error::invalid("atom_decay_rate", "must be non-negative"));
        }
        if !(self.output_coupling > 0.0) {
            return Err(Error::invalid("output_coupling", "must be positive"));
        }
        Ok(())
    }

    /// `Φ₀` at time `t` after the start.
    pub fn phi0_at(&self, t: f64) -> f64 {
        match self.kind {
            ScanKind::LinearPhaseRamp => self.phi0_start + self.ramp_rate() * t,
            _ => self.phi0_start,
        }
    }

    /// Parameters in force at time `t` after the start.
    pub fn params_at(&self, base: &ModelParams, t: f64) -> ModelParams {
        let mut p = base.with_phi0(self.phi0_at(t));
        if self.kind == ScanKind::AtomDecayDrift {
            p.cooperativity = base.cooperativity * (-self.atom_decay_rate * t).exp();
        }
        p
    }
}

/// Sampled trajectory of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanTrace {
    pub times: Vec<f64>,
    pub output_power: Vec<f64>,
    pub intensity: Vec<f64>,
    pub orientation: Vec<f64>,
    pub phi_cav: Vec<f64>,
    pub phi0: Vec<f64>,
    /// Cavity decay rate of the run, sets the switch-detection window.
    pub kappa: f64,
}

impl ScanTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, params: &ModelParams, y: &[f64], coupling: f64) {
        let intensity = y[0] * y[0] + y[1] * y[1];
        self.times.push(t);
        self.intensity.push(intensity);
        self.output_power.push(coupling * intensity);
        self.orientation.push(y[2]);
        self.phi_cav.push(params.total_phase(intensity, y[2]).re);
        self.phi0.push(params.phi0);
    }
}

struct ScanSystem<'a> {
    base: &'a ModelParams,
    protocol: &'a ScanProtocol,
}

impl OdeSystem for ScanSystem<'_> {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let f = self.protocol.params_at(self.base, t).rhs_real(&[y[0], y[1], y[2]]);
        dy.copy_from_slice(&f);
    }

    fn project(&self, y: &mut [f64]) -> bool {
        let clamped = y[2].clamp(0.0, 1.0);
        let changed = clamped != y[2];
        y[2] = clamped;
        changed
    }
}

/// Final state of a run together with its trace.
#[derive(Debug, Clone)]
pub struct Run {
    pub trace: ScanTrace,
    pub final_state: SystemState,
}

fn options_for(tol: f64) -> Result<Options> {
    if !(1e-12..=1e-3).contains(&tol) {
        return Err(Error::invalid("tol", format!("{tol} is outside [1e-12, 1e-3]")));
    }
    Ok(Options::with_tol(tol, tol * 1e-2))
}

/// Integrates the system under `protocol`, starting from `initial` (whose
/// `time` offsets the reported sample times).
pub fn run(params: &ModelParams, protocol: &ScanProtocol, initial: &SystemState, tol: f64) -> Result<Run> {
    params.validate()?;
    protocol.validate()?;
    let options = options_for(tol)?;
    if !(0.0..=1.0).contains(&initial.orientation) {
        return Err(Error::invalid("orientation", "initial orientation must lie in [0, 1]"));
    }
    let system = ScanSystem { base: params, protocol };
    let grid = linspace(0.0, protocol.duration, protocol.samples);
    let sol = integrate::integrate(&system, 0.0, &initial.to_real(), &grid, &options)
        .map_err(|e| shift_time(e, initial.time))?;

    let mut trace = ScanTrace {
        kappa: params.kappa,
        ..ScanTrace::default()
    };
    for (t, y) in sol.times.iter().zip(&sol.states) {
        trace.push(initial.time + t, &protocol.params_at(params, *t), y, protocol.output_coupling);
    }
    let last = sol.states.last().expect("at least two samples");
    let final_state = SystemState::from_real(&[last[0], last[1], last[2]], initial.time + protocol.duration);
    Ok(Run { trace, final_state })
}

fn shift_time(e: Error, t0: f64) -> Error {
    match e {
        Error::StepSizeUnderflow { t } => Error::StepSizeUnderflow { t: t + t0 },
        Error::NonFiniteState { t } => Error::NonFiniteState { t: t + t0 },
        Error::TooManySteps { steps, t } => Error::TooManySteps { steps, t: t + t0 },
        other => other,
    }
}

/// Integrates and returns the sampled trace.
pub fn integrate(params: &ModelParams, protocol: &ScanProtocol, initial: &SystemState, tol: f64) -> Result<ScanTrace> {
    run(params, protocol, initial, tol).map(|r| r.trace)
}

/// A ramp followed by the same ramp reversed, the second leg starting where
/// the first ended.
pub fn hysteresis_loop(
    params: &ModelParams,
    protocol: &ScanProtocol,
    initial: &SystemState,
    tol: f64,
) -> Result<(ScanTrace, ScanTrace)> {
    let forward = run(params, protocol, initial, tol)?;
    let backward = run(params, &protocol.reversed(), &forward.final_state, tol)?;
    Ok((forward.trace, backward.trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub time: f64,
    pub direction: SwitchDirection,
    /// `Φ₀` at the steepest point of the jump.
    pub phi0: f64,
    pub index: usize,
}

/// Abrupt jumps of the output power: changes larger than half the trace's
/// global range within `5/κ`. Each contiguous run of qualifying windows is
/// one event, located at its steepest sample step.
pub fn detect_switches(trace: &ScanTrace) -> Vec<SwitchEvent> {
    let n = trace.len();
    if n < 2 {
        return Vec::new();
    }
    let power = &trace.output_power;
    let (lo, hi) = power.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let threshold = 0.5 * (hi - lo);
    if !(threshold > 0.0) {
        return Vec::new();
    }
    let dt = (trace.times[n - 1] - trace.times[0]) / (n - 1) as f64;
    let window = 5.0 / trace.kappa;
    let k = ((window / dt).round() as usize).clamp(1, n - 1);

    let sign_at = |i: usize| {
        let d = power[i + k] - power[i];
        if d > threshold {
            1
        } else if d < -threshold {
            -1
        } else {
            0
        }
    };
    let mut events = Vec::new();
    let mut i = 0;
    while i + k < n {
        let s = sign_at(i);
        if s == 0 {
            i += 1;
            continue;
        }
        let start = i;
        while i + k < n && sign_at(i) == s {
            i += 1;
        }
        let end = (i - 1 + k).min(n - 1);
        let steepest = (start..end)
            .max_by(|&a, &b| {
                let da = s as f64 * (power[a + 1] - power[a]);
                let db = s as f64 * (power[b + 1] - power[b]);
                da.total_cmp(&db)
            })
            .unwrap_or(start);
        events.push(SwitchEvent {
            time: 0.5 * (trace.times[steepest] + trace.times[steepest + 1]),
            direction: if s > 0 { SwitchDirection::Up } else { SwitchDirection::Down },
            phi0: 0.5 * (trace.phi0[steepest] + trace.phi0[steepest + 1]),
            index: steepest,
        });
    }
    events
}

/// Outcome of [`detect_limit_cycle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub detected: bool,
    /// Mean peak spacing (0 when nothing periodic was found).
    pub period: f64,
    pub frequency: f64,
    /// Peak-to-trough of the analysed signal.
    pub amplitude: f64,
    pub window: (f64, f64),
    pub peaks: usize,
    /// Largest relative deviation of a peak spacing from the mean.
    pub dispersion: f64,
}

/// Minimum number of peaks for a detection.
pub const MIN_PEAKS: usize = 5;
/// Maximum relative spread of peak spacings for a detection.
pub const MAX_DISPERSION: f64 = 0.1;
const MIN_WINDOW_SAMPLES: usize = 16;

/// Peak times of `values`: one per excursion above the mid level, refined by
/// a parabola through the largest sample and its neighbours. Excursions cut
/// by the window edges are skipped.
pub fn excursion_peaks(times: &[f64], values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 3 {
        return Vec::new();
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mid = 0.5 * (lo + hi);
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        if values[i] <= mid {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && values[i] > mid {
            i += 1;
        }
        if start == 0 || i == n {
            continue;
        }
        let j = (start..i).max_by(|&a, &b| values[a].total_cmp(&values[b])).expect("non-empty");
        peaks.push(refine_peak(times, values, j));
    }
    peaks
}

fn refine_peak(times: &[f64], values: &[f64], j: usize) -> f64 {
    if j == 0 || j + 1 >= values.len() {
        return times[j];
    }
    let (y0, y1, y2) = (values[j - 1], values[j], values[j + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    if denom >= 0.0 {
        return times[j];
    }
    let shift = (0.5 * (y0 - y2) / denom).clamp(-1.0, 1.0);
    let h = if shift >= 0.0 { times[j + 1] - times[j] } else { times[j] - times[j - 1] };
    times[j] + shift * h
}

/// Periodicity test on an arbitrary sampled signal.
pub fn detect_cycle_in(times: &[f64], values: &[f64], settle_fraction: f64) -> Result<CycleReport> {
    if !(settle_fraction > 0.0 && settle_fraction < 1.0) {
        return Err(Error::invalid("settle_fraction", "must lie in (0, 1)"));
    }
    let start = ((times.len() as f64) * settle_fraction).floor() as usize;
    let (t, v) = (&times[start.min(times.len())..], &values[start.min(values.len())..]);
    if t.len() < MIN_WINDOW_SAMPLES {
        return Err(Error::WindowTooShort(format!(
            "{} samples after settling, need {MIN_WINDOW_SAMPLES}",
            t.len()
        )));
    }
    let window = (t[0], t[t.len() - 1]);
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let amplitude = hi - lo;
    let mut report = CycleReport {
        detected: false,
        period: 0.0,
        frequency: 0.0,
        amplitude,
        window,
        peaks: 0,
        dispersion: 0.0,
    };
    // flat to rounding: a converged steady state
    if amplitude <= 1e-9 * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE) {
        return Ok(report);
    }
    let peaks = excursion_peaks(t, v);
    report.peaks = peaks.len();
    if peaks.len() < 2 {
        return Ok(report);
    }
    let spacings: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
    let period = spacings.iter().sum::<f64>() / spacings.len() as f64;
    if window.1 - window.0 < 2.0 * period {
        return Err(Error::WindowTooShort(format!(
            "window of {:.4e} holds fewer than 2 candidate periods of {period:.4e}",
            window.1 - window.0
        )));
    }
    report.dispersion = spacings.iter().map(|s| (s - period).abs() / period).fold(0.0, f64::max);
    report.period = period;
    report.frequency = 1.0 / period;
    report.detected = peaks.len() >= MIN_PEAKS && report.dispersion < MAX_DISPERSION;
    Ok(report)
}

/// Limit-cycle test on the output power after discarding the first
/// `settle_fraction` of the trace.
pub fn detect_limit_cycle(trace: &ScanTrace, settle_fraction: f64) -> Result<CycleReport> {
    detect_cycle_in(&trace.times, &trace.output_power, settle_fraction)
}

/// How orientation and intensity move together inside a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismReport {
    pub intensity: CycleReport,
    pub orientation: CycleReport,
    /// Delay of the orientation behind the intensity at peak cross-correlation,
    /// in `[−T/2, T/2)`.
    pub lag: f64,
    pub lag_fraction: f64,
    /// `max p − min p` over the window.
    pub orientation_swing: f64,
    /// `(max I − min I)/max I` over the window.
    pub intensity_swing: f64,
}

/// Cross-correlates intensity and orientation over the settled window.
pub fn cycle_mechanism(trace: &ScanTrace, settle_fraction: f64) -> Result<MechanismReport> {
    let intensity = detect_cycle_in(&trace.times, &trace.intensity, settle_fraction)?;
    let orientation = detect_cycle_in(&trace.times, &trace.orientation, settle_fraction)?;
    let start = ((trace.len() as f64) * settle_fraction).floor() as usize;
    let i_win = &trace.intensity[start..];
    let p_win = &trace.orientation[start..];
    let stats = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        (lo, hi, v.iter().sum::<f64>() / v.len() as f64)
    };
    let (i_lo, i_hi, i_mean) = stats(i_win);
    let (p_lo, p_hi, p_mean) = stats(p_win);

    let mut lag = 0.0;
    let mut lag_fraction = 0.0;
    if intensity.detected {
        let dt = (trace.times[trace.len() - 1] - trace.times[0]) / (trace.len() - 1) as f64;
        let half = ((0.5 * intensity.period / dt).round() as isize).max(1);
        let n = i_win.len() as isize;
        let mut best = (f64::NEG_INFINITY, 0isize);
        for shift in -half..half {
            let mut acc = 0.0;
            let mut count = 0usize;
            for k in 0..n {
                let j = k + shift;
                if (0..n).contains(&j) {
                    acc += (i_win[k as usize] - i_mean) * (p_win[j as usize] - p_mean);
                    count += 1;
                }
            }
            let c = acc / count.max(1) as f64;
            if c > best.0 {
                best = (c, shift);
            }
        }
        lag = best.1 as f64 * dt;
        lag_fraction = lag / intensity.period;
    }
    Ok(MechanismReport {
        intensity,
        orientation,
        lag,
        lag_fraction,
        orientation_swing: p_hi - p_lo,
        intensity_swing: if i_hi > 0.0 { (i_hi - i_lo) / i_hi } else { 0.0 },
    })
}

/// State on the lowest-intensity stable fixed point of `params`, the natural
/// starting point of a quasi-static scan.
pub fn steady_start(params: &ModelParams) -> Result<SystemState> {
    let points = find_fixed_points(params)?;
    let point = points
        .iter()
        .find(|p| p.stability.is_stable())
        .unwrap_or(&points[0]);
    Ok(SystemState::new(point.field, point.orientation, 0.0))
}

/// Ramp run with no orientation relaxation, where pumping only accumulates.
pub fn stepwise_pumping_run(
    params: &ModelParams,
    protocol: &ScanProtocol,
    initial: &SystemState,
    tol: f64,
) -> Result<ScanTrace> {
    if params.gamma_p != 0.0 {
        return Err(Error::invalid("gamma_p", "stepwise pumping needs gamma_p = 0"));
    }
    if protocol.kind != ScanKind::LinearPhaseRamp {
        return Err(Error::invalid("protocol", "stepwise pumping needs a linear phase ramp"));
    }
    integrate(params, protocol, initial, tol)
}

/// Summary of an orientation staircase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseReport {
    /// Dark stretches after a lit one, as `(first, last)` sample indices.
    pub plateaus: Vec<(usize, usize)>,
    /// Orientation level of each plateau.
    pub levels: Vec<f64>,
    /// Fraction of the total orientation gain accumulated while
    /// `P_out > light_fraction·max P_out`.
    pub localized_fraction: f64,
    pub total_rise: f64,
    pub nondecreasing: bool,
}

/// Splits a trace into lit and dark stretches (`P_out` above or below
/// `light_fraction` of its maximum). A dark stretch that follows a lit one,
/// lasts at least `min_duration` and gains less than `flatness` of the total
/// orientation rise is a plateau; plateaus at the same level (within
/// `flatness`) are merged.
pub fn analyse_staircase(trace: &ScanTrace, light_fraction: f64, flatness: f64, min_duration: f64) -> StaircaseReport {
    let p = &trace.orientation;
    let n = p.len();
    let total_rise = if n > 0 { p[n - 1] - p[0] } else { 0.0 };
    let nondecreasing = p.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let p_max = trace.output_power.iter().cloned().fold(0.0, f64::max);
    let lit: Vec<bool> = trace.output_power.iter().map(|&x| x > light_fraction * p_max).collect();

    let mut localized = 0.0;
    for k in 1..n {
        if lit[k] || lit[k - 1] {
            localized += p[k] - p[k - 1];
        }
    }
    let localized_fraction = if total_rise > 0.0 { localized / total_rise } else { 0.0 };

    let tolerance = flatness * total_rise.abs().max(f64::MIN_POSITIVE);
    let mut plateaus: Vec<(usize, usize)> = Vec::new();
    let mut levels: Vec<f64> = Vec::new();
    let mut seen_light = false;
    let mut k = 0;
    while k < n {
        if lit[k] {
            seen_light = true;
            k += 1;
            continue;
        }
        let start = k;
        while k < n && !lit[k] {
            k += 1;
        }
        let end = k - 1;
        let long = trace.times[end] - trace.times[start] >= min_duration;
        let flat = p[end] - p[start] <= tolerance;
        if !(seen_light && long && flat) {
            continue;
        }
        let level = 0.5 * (p[start] + p[end]);
        match (plateaus.last_mut(), levels.last()) {
            (Some(last), Some(&prev)) if (level - prev).abs() <= tolerance => last.1 = end,
            _ => {
                plateaus.push((start, end));
                levels.push(level);
            }
        }
    }
    StaircaseReport {
        plateaus,
        levels,
        localized_fraction,
        total_rise,
        nondecreasing,
    }
}
