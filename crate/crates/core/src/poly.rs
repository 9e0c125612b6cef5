//! Real polynomials in ascending coefficient order, with all-roots solving via
//! companion-matrix eigenvalues.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// `c[0] + c[1]·x + c[2]·x² + …`
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        Poly(coeffs.into())
    }

    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    /// The monomial `x`.
    pub fn x() -> Self {
        Poly(vec![0.0, 1.0])
    }

    /// Degree after dropping exactly-zero leading coefficients (`0` for constants).
    pub fn degree(&self) -> usize {
        self.0.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.0
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly::constant(0.0);
        }
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly(self.0.iter().map(|c| c * s).collect())
    }

    /// All complex roots.
    ///
    /// The variable is rescaled so the extreme coefficients have comparable
    /// magnitude before building the companion matrix; each eigenvalue is
    /// then refined by Newton iterations on the original polynomial.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let n = self.degree();
        if self.0.iter().any(|c| !c.is_finite()) {
            return Err(Error::RootFinding("non-finite coefficient".into()));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        // roots at zero
        let zeros = self.0.iter().position(|&c| c != 0.0).unwrap_or(0);
        let reduced = &self.0[zeros..=n];
        let m = reduced.len() - 1;
        let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
        if m == 0 {
            return Ok(roots);
        }

        let lead = reduced[m];
        let scale = (reduced[0].abs() / lead.abs()).powf(1.0 / m as f64);
        let scale = if scale.is_finite() && scale > 0.0 {
            scale
        } else {
            1.0
        };
        // monic coefficients of q(y) = p(scale·y)/(lead·scale^m)
        let monic: Vec<f64> = (0..m)
            .map(|k| reduced[k] * scale.powi(k as i32 - m as i32) / lead)
            .collect();

        let mut companion = DMatrix::<f64>::zeros(m, m);
        for k in 1..m {
            companion[(k, k - 1)] = 1.0;
        }
        for k in 0..m {
            companion[(k, m - 1)] = -monic[k];
        }
        let eigs = companion
            .try_schur(f64::EPSILON, 10_000)
            .ok_or_else(|| Error::RootFinding("companion Schur iteration did not converge".into()))?
            .complex_eigenvalues();

        let deriv = self.derivative();
        for z in eigs.iter() {
            let mut z = *z * scale;
            for _ in 0..8 {
                let f = self.eval_complex(z);
                let df = deriv.eval_complex(z);
                if df.norm() == 0.0 {
                    break;
                }
                let step = f / df;
                if !step.re.is_finite() || !step.im.is_finite() {
                    break;
                }
                let next = z - step;
                if self.eval_complex(next).norm() >= f.norm() {
                    break;
                }
                z = next;
            }
            roots.push(z);
        }
        Ok(roots)
    }
}

impl std::ops::Add for &Poly {
    type Output = Poly;

    fn add(self, rhs: &Poly) -> Poly {
        let n = self.0.len().max(rhs.0.len());
        Poly(
            (0..n)
                .map(|k| self.0.get(k).copied().unwrap_or(0.0) + rhs.0.get(k).copied().unwrap_or(0.0))
                .collect(),
        )
    }
}

impl std::ops::Sub for &Poly {
    type Output = Poly;

    fn sub(self, rhs: &Poly) -> Poly {
        self + &rhs.scale(-1.0)
    }
}

impl std::ops::Mul for &Poly {
    type Output = Poly;

    fn mul(self, rhs: &Poly) -> Poly {
        if self.0.is_empty() || rhs.0.is_empty() {
            return Poly::constant(0.0);
        }
        let mut out = vec![0.0; self.0.len() + rhs.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in rhs.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }
}
