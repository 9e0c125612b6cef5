//! Dormand–Prince 5(4) integrator with PI step-size control and a
//! fourth-order continuous extension for sampling at arbitrary times.

use crate::error::{Error, Result};

/// A first-order system `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);

    /// Applied to every accepted state; returns `true` if `y` was modified.
    fn project(&self, _y: &mut [f64]) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step; `f64::INFINITY` for none.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Options {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }
}

impl Default for Options {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// States sampled on the requested grid.
#[derive(Debug, Clone)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: Stats,
}

// Butcher tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const PI_BETA: f64 = 0.04;

/// Integrates from `(t0, y0)` and returns the state at every time in
/// `sample_times` (which must be sorted and not precede `t0`).
pub fn integrate<S: OdeSystem + ?Sized>(
    system: &S,
    t0: f64,
    y0: &[f64],
    sample_times: &[f64],
    options: &Options,
) -> Result<Solution> {
    let n = system.dim();
    assert_eq!(y0.len(), n, "initial state has wrong dimension");
    if sample_times.windows(2).any(|w| w[1] < w[0]) || sample_times.first().is_some_and(|&s| s < t0) {
        return Err(Error::invalid("sample_times", "must be sorted and start at or after t0"));
    }
    if !(options.rtol > 0.0 && options.atol >= 0.0) {
        return Err(Error::invalid("tol", "rtol must be > 0 and atol >= 0"));
    }

    let mut stats = Stats::default();
    let mut out = Solution {
        times: Vec::with_capacity(sample_times.len()),
        states: Vec::with_capacity(sample_times.len()),
        stats,
    };
    let mut next_sample = 0;
    let mut y = y0.to_vec();
    system.project(&mut y);
    while next_sample < sample_times.len() && sample_times[next_sample] == t0 {
        out.times.push(t0);
        out.states.push(y.clone());
        next_sample += 1;
    }
    let Some(&t_end) = sample_times.last() else {
        return Ok(out);
    };
    if t_end == t0 {
        return Ok(out);
    }

    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err_vec = vec![0.0; n];
    let mut cont = vec![vec![0.0; n]; 5];

    let mut t = t0;
    system.rhs(t, &y, &mut k[0]);
    stats.evaluations += 1;
    let mut h = initial_step(system, t, &y, &k[0], options, t_end - t0, &mut stats);
    let mut err_old: f64 = 1e-4;
    let mut rejected_last = false;

    loop {
        if stats.accepted + stats.rejected >= options.max_steps {
            return Err(Error::TooManySteps {
                steps: options.max_steps,
                t,
            });
        }
        h = h.min(options.h_max).min(t_end - t);
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t });
        }

        // stages
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k[0][i];
        }
        system.rhs(t + C2 * h, &tmp, &mut k[1]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
        }
        system.rhs(t + C3 * h, &tmp, &mut k[2]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        system.rhs(t + C4 * h, &tmp, &mut k[3]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        system.rhs(t + C5 * h, &tmp, &mut k[4]);
        for i in 0..n {
            tmp[i] = y[i]
                + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
        }
        system.rhs(t + h, &tmp, &mut k[5]);
        for i in 0..n {
            y_new[i] = y[i]
                + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        let t_new = t + h;
        system.rhs(t_new, &y_new, &mut k[6]);
        stats.evaluations += 6;

        let mut err_sq = 0.0;
        for i in 0..n {
            err_vec[i] = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = options.atol + options.rtol * y[i].abs().max(y_new[i].abs());
            err_sq += (err_vec[i] / sc).powi(2);
        }
        let err = (err_sq / n as f64).sqrt();
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            if h <= 1e-14 * t.abs().max(1.0) * 10.0 {
                return Err(Error::NonFiniteState { t });
            }
            stats.rejected += 1;
            h *= FAC_MIN;
            rejected_last = true;
            continue;
        }

        if err <= 1.0 {
            stats.accepted += 1;
            // dense output coefficients on the unprojected step
            for i in 0..n {
                let dy = y_new[i] - y[i];
                let bspl = h * k[0][i] - dy;
                cont[0][i] = y[i];
                cont[1][i] = dy;
                cont[2][i] = bspl;
                cont[3][i] = dy - h * k[6][i] - bspl;
                cont[4][i] = h
                    * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
            }
            while next_sample < sample_times.len() && sample_times[next_sample] <= t_new {
                let ts = sample_times[next_sample];
                let theta = (ts - t) / h;
                let theta1 = 1.0 - theta;
                let mut ys: Vec<f64> = (0..n)
                    .map(|i| {
                        cont[0][i]
                            + theta
                                * (cont[1][i]
                                    + theta1 * (cont[2][i] + theta * (cont[3][i] + theta1 * cont[4][i])))
                    })
                    .collect();
                if ts == t_new {
                    ys.copy_from_slice(&y_new);
                }
                system.project(&mut ys);
                out.times.push(ts);
                out.states.push(ys);
                next_sample += 1;
            }

            std::mem::swap(&mut y, &mut y_new);
            t = t_new;
            if system.project(&mut y) {
                system.rhs(t, &y, &mut k[0]);
                stats.evaluations += 1;
            } else {
                k.swap(0, 6);
            }
            if next_sample >= sample_times.len() {
                break;
            }

            let fac11 = err.max(1e-16).powf(0.2 - PI_BETA * 0.75);
            let mut fac = fac11 / err_old.powf(PI_BETA) / SAFETY;
            fac = fac.clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if rejected_last {
                h_new = h_new.min(h);
            }
            err_old = err.max(1e-4);
            rejected_last = false;
            h = h_new;
        } else {
            stats.rejected += 1;
            let fac11 = err.powf(0.2 - PI_BETA * 0.75);
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            rejected_last = true;
        }
    }
    out.stats = stats;
    Ok(out)
}

fn initial_step<S: OdeSystem + ?Sized>(
    system: &S,
    t: f64,
    y: &[f64],
    f0: &[f64],
    options: &Options,
    span: f64,
    stats: &mut Stats,
) -> f64 {
    let n = y.len();
    let sc: Vec<f64> = y.iter().map(|v| options.atol + options.rtol * v.abs()).collect();
    let norm = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d0 = norm(y);
    let d1 = norm(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span).min(options.h_max);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; n];
    system.rhs(t + h0, &y1, &mut f1);
    stats.evaluations += 1;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span).min(options.h_max)
}
