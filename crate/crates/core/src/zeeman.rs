//! Optical pumping of the F=4 → F′=5 Zeeman manifold by σ+ light.
//!
//! Populations only (no Zeeman coherences). Ground sublevel `m` is excited to
//! `m′ = m + 1` at the saturated rate
//! `R_m = (Γ/2)·I·cg²(m) / (1 + δ² + 2I·cg²(m))`; every excited sublevel decays
//! at `Γ` into the ground sublevels with the squared Clebsch–Gordan branching
//! ratios. The manifold is closed, so total population is conserved.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{self, OdeSystem, Options};

pub const GROUND_LEVELS: usize = 9;
pub const EXCITED_LEVELS: usize = 11;
const F_GROUND: i32 = 4;
const F_EXCITED: i32 = 5;

/// Pumping rate per unit intensity is close to `RATE_SCALE/(1 + δ²)` for this
/// manifold; used only to size integration windows.
const RATE_SCALE: f64 = 0.0215;

/// Squared Clebsch–Gordan coefficient `|⟨4,m;1,+1|5,m+1⟩|² = (m+5)(m+6)/90`.
///
/// The stretched transition `m = 4` has weight 1.
pub fn cg_squared_sigma_plus(m: i32) -> Result<f64> {
    if !(-F_GROUND..=F_GROUND).contains(&m) {
        return Err(Error::invalid("m", format!("{m} outside -4..=4")));
    }
    Ok(f64::from((m + 5) * (m + 6)) / 90.0)
}

/// Spontaneous-emission branching of `|5,m′⟩` into `|4,m′+1⟩`, `|4,m′⟩` and
/// `|4,m′−1⟩` (σ−, π and σ+ photons).
pub fn branching_weights(m_excited: i32) -> Result<[f64; 3]> {
    if !(-F_EXCITED..=F_EXCITED).contains(&m_excited) {
        return Err(Error::invalid("m_excited", format!("{m_excited} outside -5..=5")));
    }
    let m = f64::from(m_excited);
    let to_upper = (4.0 - m) * (5.0 - m) / 90.0;
    let to_same = (5.0 - m) * (5.0 + m) / 45.0;
    let to_lower = (4.0 + m) * (5.0 + m) / 90.0;
    Ok([to_upper, to_same, to_lower])
}

/// Zeeman populations of the ground and excited hyperfine levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SublevelPopulations {
    /// `m = −4 … 4`
    pub ground: [f64; GROUND_LEVELS],
    /// `m′ = −5 … 5`
    pub excited: [f64; EXCITED_LEVELS],
}

impl SublevelPopulations {
    /// Ground state equally distributed, nothing excited.
    pub fn uniform_ground() -> Self {
        Self {
            ground: [1.0 / GROUND_LEVELS as f64; GROUND_LEVELS],
            excited: [0.0; EXCITED_LEVELS],
        }
    }

    pub fn total(&self) -> f64 {
        self.ground.iter().sum::<f64>() + self.excited.iter().sum::<f64>()
    }

    /// Population of `|4,4⟩` plus `|5,5⟩`.
    pub fn stretched(&self) -> f64 {
        self.ground[GROUND_LEVELS - 1] + self.excited[EXCITED_LEVELS - 1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.ground.iter().chain(&self.excited).any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::invalid("populations", "must be finite and non-negative"));
        }
        if (self.total() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("populations", format!("total {} != 1", self.total())));
        }
        Ok(())
    }

    fn to_vec(self) -> Vec<f64> {
        self.ground.iter().chain(&self.excited).copied().collect()
    }

    fn from_slice(v: &[f64]) -> Self {
        let mut ground = [0.0; GROUND_LEVELS];
        let mut excited = [0.0; EXCITED_LEVELS];
        ground.copy_from_slice(&v[..GROUND_LEVELS]);
        excited.copy_from_slice(&v[GROUND_LEVELS..]);
        Self { ground, excited }
    }
}

/// Linear population dynamics `dρ/dt = M·ρ`.
#[derive(Debug, Clone)]
pub struct RateSystem {
    matrix: DMatrix<f64>,
    /// Nonzero entries `(row, col, value)` of `matrix`, for the right-hand side.
    nonzeros: Vec<(usize, usize, f64)>,
}

impl RateSystem {
    /// Builds `M` from `(from, to, rate)` transfers.
    pub fn from_transfers(n: usize, transfers: &[(usize, usize, f64)]) -> Self {
        let mut matrix = DMatrix::zeros(n, n);
        for &(from, to, rate) in transfers {
            matrix[(from, from)] -= rate;
            matrix[(to, from)] += rate;
        }
        let nonzeros = (0..n)
            .flat_map(|j| (0..n).map(move |i| (i, j)))
            .filter_map(|(i, j)| (matrix[(i, j)] != 0.0).then(|| (i, j, matrix[(i, j)])))
            .collect();
        Self { matrix, nonzeros }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// σ+ pumping of F=4 → F′=5 at normalized intensity `intensity` and
    /// detuning `delta`; state order is ground `m = −4…4` then excited `m′ = −5…5`.
    pub fn sigma_plus(intensity: f64, delta: f64) -> Self {
        let ground = |m: i32| (m + F_GROUND) as usize;
        let excited = |m: i32| GROUND_LEVELS + (m + F_EXCITED) as usize;
        let mut transfers = Vec::with_capacity(GROUND_LEVELS + 3 * EXCITED_LEVELS);
        for m in -F_GROUND..=F_GROUND {
            let w = cg_squared_sigma_plus(m).expect("in range");
            let rate = 0.5 * intensity * w / (1.0 + delta * delta + 2.0 * intensity * w);
            if rate > 0.0 {
                transfers.push((ground(m), excited(m + 1), rate));
            }
        }
        for mp in -F_EXCITED..=F_EXCITED {
            let weights = branching_weights(mp).expect("in range");
            for (target, w) in [mp + 1, mp, mp - 1].into_iter().zip(weights) {
                if w > 0.0 {
                    transfers.push((excited(mp), ground(target), w));
                }
            }
        }
        Self::from_transfers(GROUND_LEVELS + EXCITED_LEVELS, &transfers)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Integrates from `initial` and samples on `n_points` equally spaced
    /// times in `[0, t_end]`.
    pub fn evolve(&self, initial: &[f64], t_end: f64, n_points: usize, rtol: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if !(t_end > 0.0) {
            return Err(Error::invalid("t_end", "must be > 0"));
        }
        if n_points < 2 {
            return Err(Error::invalid("n_points", "need at least 2 samples"));
        }
        let times: Vec<f64> = (0..n_points)
            .map(|i| t_end * i as f64 / (n_points - 1) as f64)
            .collect();
        let sol = integrate::integrate(self, 0.0, initial, &times, &Options::with_tol(rtol, rtol * 1e-4))?;
        Ok((sol.times, sol.states))
    }

    /// Normalized equilibrium from the null vector of `M`, together with the
    /// ratio of the two smallest singular values (small when the null space
    /// is one-dimensional).
    pub fn equilibrium(&self) -> (Vec<f64>, f64) {
        let svd = self.matrix.clone().svd(false, true);
        let v_t = svd.v_t.expect("requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        let null = v_t.row(order[0]);
        let sum: f64 = null.iter().sum();
        let eq = null.iter().map(|x| x / sum).collect();
        let ratio = svd.singular_values[order[0]] / svd.singular_values[order[1]];
        (eq, ratio)
    }
}

impl OdeSystem for RateSystem {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        dy.fill(0.0);
        for &(i, j, m) in &self.nonzeros {
            dy[i] += m * y[j];
        }
    }
}

/// Time course of the stretched-state population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpTrajectory {
    pub times: Vec<f64>,
    /// `N(t)`: population of `|4,4⟩ + |5,5⟩`.
    pub stretched: Vec<f64>,
    pub populations: Option<Vec<SublevelPopulations>>,
}

/// Integrates the σ+ rate equations.
pub fn evolve_populations(
    initial: &SublevelPopulations,
    intensity: f64,
    delta: f64,
    t_end: f64,
    n_points: usize,
    keep_populations: bool,
) -> Result<PumpTrajectory> {
    initial.validate()?;
    if !(intensity >= 0.0) || !intensity.is_finite() {
        return Err(Error::invalid("intensity", "must be finite and >= 0"));
    }
    let system = RateSystem::sigma_plus(intensity, delta);
    let (times, states) = system.evolve(&initial.to_vec(), t_end, n_points, 1e-8)?;
    let snapshots: Vec<SublevelPopulations> = states.iter().map(|s| SublevelPopulations::from_slice(s)).collect();
    Ok(PumpTrajectory {
        times,
        stretched: snapshots.iter().map(SublevelPopulations::stretched).collect(),
        populations: keep_populations.then_some(snapshots),
    })
}

/// Equilibrium populations under continuous σ+ pumping.
pub fn equilibrium_populations(intensity: f64, delta: f64) -> SublevelPopulations {
    let (eq, _) = RateSystem::sigma_plus(intensity, delta).equilibrium();
    SublevelPopulations::from_slice(&eq)
}

/// Single-exponential fit `N(t) = N∞ − (N∞ − N₀)·exp(−r·t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub rate: f64,
    pub asymptote: f64,
    pub initial: f64,
    /// Time interval used for the fit.
    pub window: (f64, f64),
    pub rms_residual: f64,
}

/// Fits the 10 %–90 % part of a rising curve.
pub fn fit_rise(times: &[f64], values: &[f64]) -> Result<ExponentialFit> {
    if times.len() != values.len() || times.len() < 3 {
        return Err(Error::FitFailure("need at least 3 samples".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span >= 1e-3) {
        return Err(Error::FitFailure(format!("curve spans only {span:.3e}")));
    }
    let start = values
        .iter()
        .position(|&v| v >= lo + 0.1 * span)
        .ok_or_else(|| Error::FitFailure("no 10% crossing".into()))?;
    let end = values
        .iter()
        .position(|&v| v >= lo + 0.9 * span)
        .ok_or_else(|| Error::FitFailure("no 90% crossing".into()))?;
    if end < start + 2 {
        return Err(Error::FitFailure("rise is not resolved by the sampling".into()));
    }
    let t0 = times[start];
    let ts: Vec<f64> = times[start..=end].iter().map(|t| t - t0).collect();
    let ys = &values[start..=end];
    let width = ts[ts.len() - 1];

    // For fixed r the model is linear in (A, B) = (N∞, N∞ − N₀).
    let linear = |r: f64| -> (f64, f64, f64) {
        let (mut s_e, mut s_ee, mut s_y, mut s_ey) = (0.0, 0.0, 0.0, 0.0);
        let n = ts.len() as f64;
        for (t, y) in ts.iter().zip(ys) {
            let e = (-r * t).exp();
            s_e += e;
            s_ee += e * e;
            s_y += y;
            s_ey += e * y;
        }
        let det = n * s_ee - s_e * s_e;
        let a = (s_ee * s_y - s_e * s_ey) / det;
        let b = -(n * s_ey - s_e * s_y) / det;
        let ssr = ts
            .iter()
            .zip(ys)
            .map(|(t, y)| (a - b * (-r * t).exp() - y).powi(2))
            .sum::<f64>();
        (a, b, ssr)
    };

    let guess = 9f64.ln() / width;
    let (lo_log, hi_log) = ((guess / 100.0).ln(), (guess * 100.0).ln());
    let grid = 400;
    let mut best = (f64::INFINITY, 0);
    for i in 0..=grid {
        let x = lo_log + (hi_log - lo_log) * i as f64 / grid as f64;
        let ssr = linear(x.exp()).2;
        if ssr < best.0 {
            best = (ssr, i);
        }
    }
    let step = (hi_log - lo_log) / grid as f64;
    let centre = lo_log + step * best.1 as f64;
    let (mut a, mut b) = (centre - step, centre + step);
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - golden * (b - a);
    let mut d = a + golden * (b - a);
    let (mut fc, mut fd) = (linear(c.exp()).2, linear(d.exp()).2);
    while (b - a).abs() > 1e-13 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = linear(c.exp()).2;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = linear(d.exp()).2;
        }
    }
    let rate = (0.5 * (a + b)).exp();
    let (asym, amp, ssr) = linear(rate);
    if !rate.is_finite() || !asym.is_finite() {
        return Err(Error::FitFailure("non-finite fit".into()));
    }
    Ok(ExponentialFit {
        rate,
        asymptote: asym,
        // shift the fitted offset back to t = 0 of the trajectory
        initial: asym - amp * (rate * t0).exp(),
        window: (t0, times[end]),
        rms_residual: (ssr / ts.len() as f64).sqrt(),
    })
}

/// Pumping coefficient `β = r/I` from the fitted rise of `N(t)`.
pub fn extract_beta(trajectory: &PumpTrajectory, intensity: f64) -> Result<f64> {
    if !(intensity > 0.0) {
        return Err(Error::invalid("intensity", "must be > 0"));
    }
    Ok(fit_rise(&trajectory.times, &trajectory.stretched)?.rate / intensity)
}

/// Integration window long enough to see the full rise at this intensity.
pub fn pumping_horizon(intensity: f64, delta: f64) -> f64 {
    8.0 * (1.0 + delta * delta) / (RATE_SCALE * intensity)
}

/// β for σ+ pumping from a uniform ground state.
pub fn pumping_beta(intensity: f64, delta: f64) -> Result<f64> {
    if !(intensity > 0.0) {
        return Err(Error::invalid("intensity", "must be > 0"));
    }
    let traj = evolve_populations(
        &SublevelPopulations::uniform_ground(),
        intensity,
        delta,
        pumping_horizon(intensity, delta),
        4001,
        false,
    )?;
    extract_beta(&traj, intensity)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Racah's closed form for the Wigner 3j symbol (integer arguments).
    fn wigner_3j(j1: i32, j2: i32, j3: i32, m1: i32, m2: i32, m3: i32) -> f64 {
        if m1 + m2 + m3 != 0 || j3 < (j1 - j2).abs() || j3 > j1 + j2 {
            return 0.0;
        }
        if m1.abs() > j1 || m2.abs() > j2 || m3.abs() > j3 {
            return 0.0;
        }
        let f = |n: i32| (1..=n).map(f64::from).product::<f64>();
        let triangle = f(j1 + j2 - j3) * f(j1 - j2 + j3) * f(-j1 + j2 + j3) / f(j1 + j2 + j3 + 1);
        let pre = (triangle
            * f(j1 + m1)
            * f(j1 - m1)
            * f(j2 + m2)
            * f(j2 - m2)
            * f(j3 + m3)
            * f(j3 - m3))
            .sqrt();
        let mut sum = 0.0;
        for k in 0..=(j1 + j2 + j3) {
            let terms = [k, j3 - j2 + k + m1, j3 - j1 + k - m2, j1 + j2 - j3 - k, j1 - k - m1, j2 - k + m2];
            if terms.iter().any(|&t| t < 0) {
                continue;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign / terms.iter().map(|&t| f(t)).product::<f64>();
        }
        let phase = if (j1 - j2 - m3).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        phase * pre * sum
    }

    /// `|⟨j1 m1; j2 m2 | J M⟩|² = (2J+1)·(j1 j2 J; m1 m2 −M)²`
    fn cg_sq(j1: i32, m1: i32, j2: i32, m2: i32, j: i32, m: i32) -> f64 {
        f64::from(2 * j + 1) * wigner_3j(j1, j2, j, m1, m2, -m).powi(2)
    }

    #[test]
    fn wigner_oracle_sanity() {
        // (1 1 0; 0 0 0) = −1/√3
        assert!((wigner_3j(1, 1, 0, 0, 0, 0) + 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert!((cg_sq(4, 4, 1, 1, 5, 5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cg_matches_brute_force() {
        for m in -4..=4 {
            let closed = cg_squared_sigma_plus(m).unwrap();
            assert!((closed - cg_sq(4, m, 1, 1, 5, m + 1)).abs() < 1e-12, "m={m}");
        }
        assert_eq!(cg_squared_sigma_plus(4).unwrap(), 1.0);
        assert!((cg_squared_sigma_plus(-4).unwrap() - 2.0 / 90.0).abs() < 1e-15);
        assert!(cg_squared_sigma_plus(5).is_err());
        assert!(cg_squared_sigma_plus(-5).is_err());
    }

    #[test]
    fn stretched_to_mean_ratio() {
        let w: Vec<f64> = (-4..=4).map(|m| cg_squared_sigma_plus(m).unwrap()).collect();
        let mean = w.iter().sum::<f64>() / 9.0;
        let ratio = w.iter().copied().fold(0.0, f64::max) / mean;
        assert!((ratio - 90.0 * 9.0 / 330.0).abs() < 1e-12);
        assert!((2.0..=2.5).contains(&ratio));
    }

    #[test]
    fn branching_matches_brute_force() {
        for mp in -5..=5 {
            let w = branching_weights(mp).unwrap();
            let want = [
                cg_sq(4, mp + 1, 1, -1, 5, mp),
                cg_sq(4, mp, 1, 0, 5, mp),
                cg_sq(4, mp - 1, 1, 1, 5, mp),
            ];
            for (a, b) in w.iter().zip(want) {
                assert!((a - b).abs() < 1e-12, "m'={mp}");
            }
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(branching_weights(5).unwrap(), [0.0, 0.0, 1.0]);
        assert_eq!(branching_weights(-5).unwrap(), [1.0, 0.0, 0.0]);
        assert!(branching_weights(6).is_err());
    }

    #[test]
    fn no_light_no_pumping() {
        let traj = evolve_populations(&SublevelPopulations::uniform_ground(), 0.0, 40.0, 1000.0, 11, false).unwrap();
        for n in traj.stretched {
            assert!((n - 1.0 / 9.0).abs() < 1e-14);
        }
    }

    #[test]
    fn conservation_and_positivity() {
        let traj = evolve_populations(&SublevelPopulations::uniform_ground(), 30.0, 40.0, 2e4, 201, true).unwrap();
        for pops in traj.populations.unwrap() {
            assert!((pops.total() - 1.0).abs() < 1e-9);
            assert!(pops.ground.iter().chain(&pops.excited).all(|&x| x >= -1e-12));
        }
    }

    #[test]
    fn rejects_bad_initial_state() {
        let mut p = SublevelPopulations::uniform_ground();
        p.ground[0] = 0.5;
        assert!(evolve_populations(&p, 1.0, 40.0, 10.0, 3, false).is_err());
    }

    #[test]
    fn equilibrium_is_stretched() {
        for intensity in [1.0, 10.0, 60.0] {
            let system = RateSystem::sigma_plus(intensity, 40.0);
            let (eq, ratio) = system.equilibrium();
            assert!(ratio < 1e-10, "null space not one-dimensional: {ratio}");
            let pops = SublevelPopulations::from_slice(&eq);
            assert!(pops.stretched() > 0.95);
        }
    }

    #[test]
    fn two_state_fit_recovers_analytic_rate() {
        // A → B at rate a, B → A at rate b: p_B relaxes at a + b.
        let (a, b) = (3e-3, 1e-3);
        let system = RateSystem::from_transfers(2, &[(0, 1, a), (1, 0, b)]);
        let (times, states) = system.evolve(&[1.0, 0.0], 4000.0, 2001, 1e-10).unwrap();
        let traj = PumpTrajectory {
            times,
            stretched: states.iter().map(|s| s[1]).collect(),
            populations: None,
        };
        let fit = fit_rise(&traj.times, &traj.stretched).unwrap();
        assert!(((fit.rate - (a + b)) / (a + b)).abs() < 1e-2, "{}", fit.rate);
        assert!((fit.asymptote - a / (a + b)).abs() < 1e-3);
        assert!(fit.initial.abs() < 1e-3);
        let beta = extract_beta(&traj, 2.0).unwrap();
        assert!((beta - fit.rate / 2.0).abs() < 1e-15);
    }

    #[test]
    fn flat_curve_cannot_be_fitted() {
        let traj = PumpTrajectory {
            times: (0..10).map(f64::from).collect(),
            stretched: vec![0.5; 10],
            populations: None,
        };
        assert!(matches!(extract_beta(&traj, 1.0), Err(Error::FitFailure(_))));
    }
}
