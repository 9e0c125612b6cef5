//! Fixed points, bistability threshold, branch diagrams and linear stability.
//!
//! Steady states are found by eliminating the orientation, `p* = R(I)/(γ_p + R(I))`,
//! from the field balance `|t·a_in|² = |Λ(I, p*)|²·I` and clearing denominators,
//! which leaves a real polynomial in `I` (degree 3 without pumping, 5 with it).
//! All its roots come from companion-matrix eigenvalues; physical ones are
//! polished by damped Newton on the unreduced balance.

use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Variant};
use crate::poly::Poly;

/// Linear stability class of a fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stability {
    StableNode,
    StableFocus,
    Saddle,
    UnstableFocus,
    UnstableNode,
}

impl Stability {
    pub fn is_stable(self) -> bool {
        matches!(self, Stability::StableNode | Stability::StableFocus)
    }

    pub fn label(self) -> &'static str {
        match self {
            Stability::StableNode => "stable_node",
            Stability::StableFocus => "stable_focus",
            Stability::Saddle => "saddle",
            Stability::UnstableFocus => "unstable_focus",
            Stability::UnstableNode => "unstable_node",
        }
    }
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Relative tie tolerance on eigenvalue real parts.
const TIE_TOLERANCE: f64 = 1e-9;

/// Classifies a spectrum.
///
/// A spectrum containing a complex-conjugate pair is a focus, stable or
/// unstable by the sign of the largest real part; an all-real spectrum is a
/// node or, with mixed signs, a saddle. Real parts within `1e-9` of zero,
/// relative to the spectral radius, count as non-positive.
pub fn classify_stability(eigenvalues: &[Complex64]) -> Stability {
    let radius = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = TIE_TOLERANCE * radius;
    let has_pair = eigenvalues.iter().any(|z| z.im.abs() > tol);
    let max_re = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let min_re = eigenvalues.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    match (has_pair, max_re > tol) {
        (true, false) => Stability::StableFocus,
        (true, true) => Stability::UnstableFocus,
        (false, false) => Stability::StableNode,
        (false, true) if min_re > tol => Stability::UnstableNode,
        (false, true) => Stability::Saddle,
    }
}

/// A steady state of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub intensity: f64,
    pub orientation: f64,
    /// Real part of the round-trip phase at the fixed point.
    pub phase: f64,
    pub field: Complex64,
    pub eigenvalues: [Complex64; 3],
    pub stability: Stability,
    /// 2 for a tangency (double root), 1 otherwise.
    pub multiplicity: u8,
}

impl FixedPoint {
    /// Largest real part of the spectrum.
    pub fn growth_rate(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `|Im λ|`, the angular frequency of a focus.
    pub fn rotation_rate(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

/// Kerr bistability threshold `I_bist = 8γ_cav²/(3√3·K)`.
pub fn bistability_threshold(params: &ModelParams) -> Result<f64> {
    let k = params.kerr_coefficient()?;
    if !(k > 0.0) {
        return Err(Error::NoBistability(k));
    }
    Ok(8.0 * params.gamma_cav * params.gamma_cav / (3.0 * 3f64.sqrt() * k))
}

/// Peak intracavity intensity at the cusp of the pure Kerr cubic,
/// `8γ_cav/(3√3·K)`: the smallest resonant intensity `t²a_in²/γ_cav²` for
/// which some `Φ₀` has three steady states.
pub fn kerr_cusp_intensity(params: &ModelParams) -> Result<f64> {
    let k = params.kerr_coefficient()?;
    if !(k > 0.0) {
        return Err(Error::NoBistability(k));
    }
    Ok(8.0 * params.gamma_cav / (3.0 * 3f64.sqrt() * k))
}

/// The cleared steady-state polynomial in `I`.
pub fn steady_state_polynomial(params: &ModelParams) -> Poly {
    let d = Poly::constant(params.injection() * params.injection());
    let x = Poly::x();
    let gamma = params.gamma_cav;
    match params.variant {
        Variant::Simple => {
            let phase_l = 2.0 * params.cooperativity * gamma / params.delta;
            let k = 2.0 * phase_l / (params.delta * params.delta);
            // (γ_p + βI)·Φ_cav = (Φ₀ + Φ_L − K·I)(γ_p + βI) + Φ_L·β·I
            let e = Poly::new(vec![params.gamma_p, params.beta]);
            let q = &(&Poly::new(vec![params.phi0 + phase_l, -k]) * &e) + &Poly::new(vec![0.0, phase_l * params.beta]);
            let e2 = &e * &e;
            let loss = &(&e2.scale(gamma * gamma) + &(&q * &q)) * &x;
            &(&d * &e2) - &loss
        }
        Variant::Saturated => {
            let s0 = 1.0 + params.delta * params.delta;
            let beta_sat = params.beta * s0;
            let amp = 2.0 * params.cooperativity * gamma;
            let s = Poly::new(vec![s0, 2.0]);
            // 1 + p* = n1 / e
            let e = &s.scale(params.gamma_p) + &Poly::new(vec![0.0, beta_sat]);
            let n1 = &s.scale(params.gamma_p) + &Poly::new(vec![0.0, 2.0 * beta_sat]);
            let se = &s * &e;
            let re = &se.scale(gamma) + &n1.scale(amp);
            let im = &se.scale(params.phi0) + &n1.scale(amp * params.delta);
            let loss = &(&(&re * &re) + &(&im * &im)) * &x;
            &(&d * &(&se * &se)) - &loss
        }
    }
}

/// `|t·a_in|² − |Λ(I, p*(I))|²·I` and its derivative in `I`.
fn balance(params: &ModelParams, intensity: f64) -> Option<(f64, f64)> {
    let rate = params.pumping_rate(intensity);
    let total = params.gamma_p + rate;
    if total <= 0.0 {
        return None;
    }
    let p = rate / total;
    let dp = params.gamma_p * params.pumping_rate_derivative(intensity) / (total * total);
    let loss = params.round_trip_loss(intensity, p);
    let (dl_di, dl_dp) = params.round_trip_loss_derivatives(intensity, p);
    let dloss = dl_di + dl_dp * dp;
    let mag = loss.norm_sqr();
    let dmag = 2.0 * (loss.conj() * dloss).re;
    let d = params.injection() * params.injection();
    Some((d - mag * intensity, -mag - dmag * intensity))
}

fn polish(params: &ModelParams, start: f64) -> Option<f64> {
    let mut x = start.max(0.0);
    let (mut f, mut df) = balance(params, x)?;
    let scale = |x: f64| {
        let d = params.injection() * params.injection();
        d.max(params.round_trip_loss(x, 0.0).norm_sqr() * x).max(f64::MIN_POSITIVE)
    };
    for _ in 0..100 {
        if f.abs() <= 1e-15 * scale(x) || df == 0.0 {
            break;
        }
        let step = f / df;
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-6 {
            let trial = (x - lambda * step).max(0.0);
            if let Some((ft, dft)) = balance(params, trial) {
                if ft.abs() < f.abs() {
                    x = trial;
                    f = ft;
                    df = dft;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (f.abs() <= 1e-10 * scale(x)).then_some(x)
}

/// Linearization at a fixed point, in coordinates `(Re a, Im a, p)`.
pub fn jacobian(point: &FixedPoint, params: &ModelParams) -> [[f64; 3]; 3] {
    params.jacobian_real(&[point.field.re, point.field.im, point.orientation])
}

/// Eigenvalues of a 3×3 real matrix, sorted by decreasing real part.
pub fn eigenvalues(matrix: &[[f64; 3]; 3]) -> [Complex64; 3] {
    let m = Matrix3::from_fn(|r, c| matrix[r][c]);
    let eig = m.complex_eigenvalues();
    let mut out = [eig[0], eig[1], eig[2]];
    out.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    out
}

fn build_point(params: &ModelParams, intensity: f64, multiplicity: u8) -> FixedPoint {
    let orientation = params.steady_orientation(intensity).unwrap_or(0.0);
    let loss = params.round_trip_loss(intensity, orientation);
    let field = Complex64::new(params.injection(), 0.0) / loss;
    let mut point = FixedPoint {
        intensity,
        orientation,
        phase: params.total_phase(intensity, orientation).re,
        field,
        eigenvalues: [Complex64::new(0.0, 0.0); 3],
        stability: Stability::StableNode,
        multiplicity,
    };
    point.eigenvalues = eigenvalues(&jacobian(&point, params));
    point.stability = classify_stability(&point.eigenvalues);
    point
}

/// All steady states, ordered by increasing intensity.
pub fn find_fixed_points(params: &ModelParams) -> Result<Vec<FixedPoint>> {
    params.validate()?;
    if params.beta == 0.0 && params.gamma_p == 0.0 {
        return Err(Error::invalid(
            "gamma_p",
            "orientation is neutral when beta = gamma_p = 0; steady states are not isolated",
        ));
    }
    let poly = steady_state_polynomial(params);
    let roots = poly.roots()?;

    let mut found: Vec<f64> = Vec::new();
    for z in roots {
        let size = z.norm().max(1.0);
        if z.re < -1e-10 * size {
            continue;
        }
        if z.im.abs() < 1e-8 * size {
            if let Some(x) = polish(params, z.re) {
                found.push(x);
            }
        } else if z.im.abs() < 1e-5 * size {
            // split double roots come back as a close complex pair
            if let Some(x) = polish(params, z.re) {
                if (x - z.re).abs() < 1e-4 * size {
                    found.push(x);
                }
            }
        }
    }
    found.sort_by(f64::total_cmp);

    let mut points: Vec<FixedPoint> = Vec::new();
    let mut i = 0;
    while i < found.len() {
        let mut j = i + 1;
        while j < found.len() && (found[j] - found[i]).abs() <= 1e-9 * found[i].abs().max(1.0) {
            j += 1;
        }
        let x = found[i..j].iter().sum::<f64>() / (j - i) as f64;
        if params.gamma_p + params.pumping_rate(x) > 0.0 {
            points.push(build_point(params, x, (j - i).min(3) as u8));
        }
        i = j;
    }
    if points.is_empty() {
        return Err(Error::RootFinding("no physical steady state found".into()));
    }
    Ok(points)
}

/// Both right-hand sides evaluated at a fixed point.
pub fn residual(point: &FixedPoint, params: &ModelParams) -> f64 {
    let f = params.rhs_real(&[point.field.re, point.field.im, point.orientation]);
    f.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Steady states over a sweep of the geometric phase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchDiagram {
    pub phi0_grid: Vec<f64>,
    pub branches: Vec<Vec<FixedPoint>>,
    /// Φ₀ values where the number of steady states changes.
    pub turning_points: Vec<f64>,
}

pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n).map(|i| start + (end - start) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn count_states(params: &ModelParams, phi0: f64) -> Result<usize> {
    Ok(find_fixed_points(&params.with_phi0(phi0))?
        .iter()
        .map(|p| p.multiplicity as usize)
        .sum())
}

/// Sweeps `Φ₀` over `n` points in `[start, end]` and locates turning points
/// to `1e-6` by bisection on the change in branch count.
pub fn branch_diagram(params: &ModelParams, start: f64, end: f64, n: usize) -> Result<BranchDiagram> {
    if n < 2 {
        return Err(Error::invalid("resolution", "need at least 2 points"));
    }
    let phi0_grid = linspace(start, end, n);
    let branches = phi0_grid
        .par_iter()
        .map(|&phi0| find_fixed_points(&params.with_phi0(phi0)))
        .collect::<Result<Vec<_>>>()?;
    let mut turning_points = Vec::new();
    for k in 1..n {
        let (c0, c1) = (branches[k - 1].len(), branches[k].len());
        if c0 == c1 {
            continue;
        }
        let (mut lo, mut hi) = (phi0_grid[k - 1], phi0_grid[k]);
        while hi - lo > 1e-6 {
            let mid = 0.5 * (lo + hi);
            if count_states(params, mid)? == c0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        turning_points.push(0.5 * (lo + hi));
    }
    Ok(BranchDiagram {
        phi0_grid,
        branches,
        turning_points,
    })
}

/// One cell of an instability map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapCell {
    pub phi0: f64,
    pub drive: f64,
    /// Stability class of every steady state, by increasing intensity, or the
    /// solver error for this cell.
    pub classes: std::result::Result<Vec<Stability>, String>,
}

impl MapCell {
    pub fn n_roots(&self) -> Option<usize> {
        self.classes.as_ref().ok().map(Vec::len)
    }

    pub fn has(&self, class: Stability) -> bool {
        self.classes.as_ref().is_ok_and(|c| c.contains(&class))
    }

    pub fn has_stable(&self) -> bool {
        self.classes.as_ref().is_ok_and(|c| c.iter().any(|s| s.is_stable()))
    }

    /// An unstable focus with no stable steady state to settle on: the
    /// trajectory must keep oscillating.
    pub fn is_self_pulsing(&self) -> bool {
        self.has(Stability::UnstableFocus) && !self.has_stable()
    }
}

/// Classification grid over `(Φ₀, drive)`; `cells` is row-major with `drive`
/// as the slow index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstabilityMap {
    pub phi0_axis: Vec<f64>,
    pub drive_axis: Vec<f64>,
    pub cells: Vec<MapCell>,
}

impl InstabilityMap {
    pub fn cell(&self, drive_index: usize, phi0_index: usize) -> &MapCell {
        &self.cells[drive_index * self.phi0_axis.len() + phi0_index]
    }

    pub fn row(&self, drive_index: usize) -> &[MapCell] {
        let n = self.phi0_axis.len();
        &self.cells[drive_index * n..(drive_index + 1) * n]
    }
}

/// Evaluates the stability classes on every grid cell. Cells are independent
/// and computed in parallel; a failing cell records its error.
pub fn instability_map(params: &ModelParams, phi0_axis: &[f64], drive_axis: &[f64]) -> Result<InstabilityMap> {
    if phi0_axis.is_empty() || drive_axis.is_empty() {
        return Err(Error::invalid("resolution", "map axes must be non-empty"));
    }
    params.validate()?;
    let n = phi0_axis.len();
    let cells = (0..n * drive_axis.len())
        .into_par_iter()
        .map(|idx| {
            let (phi0, drive) = (phi0_axis[idx % n], drive_axis[idx / n]);
            let classes = find_fixed_points(&params.with_phi0(phi0).with_drive(drive))
                .map(|pts| pts.iter().map(|p| p.stability).collect())
                .map_err(|e| e.to_string());
            MapCell { phi0, drive, classes }
        })
        .collect();
    Ok(InstabilityMap {
        phi0_axis: phi0_axis.to_vec(),
        drive_axis: drive_axis.to_vec(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn kerr() -> ModelParams {
        ModelParams::new(44.0, 0.055, 1.0, 400.0).with_pumping(0.0, 1e-3)
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_stability(&[c(-1.0, 0.0), c(-2.0, 0.0), c(-3.0, 0.0)]), Stability::StableNode);
        assert_eq!(classify_stability(&[c(0.01, 2.0), c(0.01, -2.0), c(-1.0, 0.0)]), Stability::UnstableFocus);
        assert_eq!(classify_stability(&[c(-0.1, 2.0), c(-0.1, -2.0), c(-1.0, 0.0)]), Stability::StableFocus);
        assert_eq!(classify_stability(&[c(1.0, 0.0), c(-2.0, 0.0), c(-3.0, 0.0)]), Stability::Saddle);
        assert_eq!(classify_stability(&[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]), Stability::UnstableNode);
        assert_eq!(classify_stability(&[c(0.0, 0.0), c(-2.0, 0.0), c(-3.0, 0.0)]), Stability::StableNode);
    }

    #[test]
    fn threshold_values() {
        let mut p = ModelParams::new(10.0, 0.05, 1.0, 1.0);
        // choose C so that K = 0.1
        p.cooperativity = 0.1 * 1000.0 / (4.0 * 0.05);
        assert_relative_eq!(p.kerr_coefficient().unwrap(), 0.1, epsilon = 1e-12);
        assert!((bistability_threshold(&p).unwrap() - 0.03849).abs() < 1e-5);
        let mut q = p;
        q.gamma_cav *= 2.0;
        q.cooperativity /= 2.0; // keep K fixed
        assert_relative_eq!(bistability_threshold(&q).unwrap(), 4.0 * bistability_threshold(&p).unwrap(), max_relative = 1e-12);

        let mut neg = p;
        neg.delta = -10.0;
        assert!(matches!(bistability_threshold(&neg), Err(Error::NoBistability(_))));
    }

    #[test]
    fn empty_cavity_single_lorentzian_state() {
        for phi0 in [-0.3, 0.0, 0.02, 0.4] {
            let p = ModelParams::new(44.0, 0.05, 1.0, 0.0).with_pumping(1e-4, 1e-3).with_drive(0.3).with_phi0(phi0);
            let pts = find_fixed_points(&p).unwrap();
            assert_eq!(pts.len(), 1);
            let want = p.mirror_transmission * 0.09 / (0.05f64.powi(2) + phi0 * phi0);
            assert_relative_eq!(pts[0].intensity, want, max_relative = 1e-10);
            assert!(pts[0].stability.is_stable());
        }
    }

    #[test]
    fn empty_cavity_on_resonance_spectrum() {
        let p = ModelParams::new(44.0, 0.05, 0.9, 0.0).with_pumping(0.0, 2e-3).with_drive(0.3);
        let pt = find_fixed_points(&p).unwrap()[0];
        let mut re: Vec<f64> = pt.eigenvalues.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert_relative_eq!(re[0], -0.9, epsilon = 1e-10);
        assert_relative_eq!(re[1], -0.9, epsilon = 1e-10);
        assert_relative_eq!(re[2], -2e-3, epsilon = 1e-12);
        assert!(pt.eigenvalues.iter().all(|z| z.im.abs() < 1e-10));
    }

    #[test]
    fn kerr_bistable_three_states() {
        let base = kerr();
        let cusp = kerr_cusp_intensity(&base).unwrap();
        let drive = base.drive_for_resonant_intensity(2.0 * cusp);
        let p = base.with_drive(drive);
        // centre of the bistable interval, found from the branch diagram
        let diagram = branch_diagram(&p, -1.3, -0.5, 401).unwrap();
        assert_eq!(diagram.turning_points.len(), 2, "{:?}", diagram.turning_points);
        let centre = 0.5 * (diagram.turning_points[0] + diagram.turning_points[1]);
        let pts = find_fixed_points(&p.with_phi0(centre)).unwrap();
        assert_eq!(pts.len(), 3);
        assert!(pts[0].stability.is_stable());
        assert_eq!(pts[1].stability, Stability::Saddle);
        assert!(pts[2].stability.is_stable());
        let unstable = pts[1].eigenvalues.iter().filter(|z| z.re > 0.0).count();
        assert_eq!(unstable, 1);
        for pt in &pts {
            assert!(residual(pt, &p.with_phi0(centre)) < 1e-9);
        }
    }

    #[test]
    fn below_cusp_single_state_everywhere() {
        let base = kerr();
        let cusp = kerr_cusp_intensity(&base).unwrap();
        let p = base.with_drive(base.drive_for_resonant_intensity(0.9 * cusp));
        for phi0 in linspace(-1.5, 0.0, 301) {
            assert_eq!(find_fixed_points(&p.with_phi0(phi0)).unwrap().len(), 1, "phi0={phi0}");
        }
    }

    #[test]
    fn neutral_orientation_is_rejected() {
        let p = ModelParams::new(44.0, 0.05, 1.0, 400.0).with_drive(0.1);
        assert!(find_fixed_points(&p).is_err());
    }

    #[test]
    fn saturated_variant_residuals() {
        let p = ModelParams::new(44.0, 0.055, 1.0, 400.0)
            .with_pumping(1.34e-5, 1e-3)
            .with_variant(Variant::Saturated);
        let p = p.with_drive(p.drive_for_resonant_intensity(300.0));
        for phi0 in linspace(-2.5, 0.5, 61) {
            let q = p.with_phi0(phi0);
            for pt in find_fixed_points(&q).unwrap() {
                assert!(residual(&pt, &q) < 1e-9, "phi0={phi0} r={}", residual(&pt, &q));
            }
        }
    }

    #[test]
    fn pure_kerr_has_no_unstable_focus() {
        let base = kerr();
        let drives: Vec<f64> = [5.0, 50.0, 200.0, 800.0]
            .iter()
            .map(|&i| base.drive_for_resonant_intensity(i))
            .collect();
        let map = instability_map(&base, &linspace(-2.0, 0.5, 101), &drives).unwrap();
        assert!(map.cells.iter().all(|c| c.classes.is_ok()));
        assert!(!map.cells.iter().any(|c| c.has(Stability::UnstableFocus)));
    }

    #[test]
    fn map_is_row_major_by_drive() {
        let base = kerr();
        let map = instability_map(&base, &[0.0, 1.0, 2.0], &[0.1, 0.2]).unwrap();
        assert_eq!(map.cells.len(), 6);
        assert_eq!(map.cell(1, 2).phi0, 2.0);
        assert_eq!(map.cell(1, 2).drive, 0.2);
        assert_eq!(map.row(0).len(), 3);
    }
}
