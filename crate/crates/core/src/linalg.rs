//! Dense complex linear algebra used by the propagators.
//!
//! The no-jump generators handled here are tiny (at most a few dozen states)
//! but non-normal, and near exceptional points they become defective. The
//! propagator therefore diagonalizes once and reuses the eigenbasis for every
//! time point, falling back to Padé scaling-and-squaring when the eigenvector
//! matrix is too ill-conditioned to trust.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Eigenvector condition number above which the eigendecomposition is
/// abandoned in favour of scaling-and-squaring.
pub const MAX_EIGEN_CONDITION: f64 = 1e8;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Which algorithm a [`Propagator`] ended up using.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpMethod {
    Eigen,
    ScalingSquaring,
}

#[derive(Debug, Clone)]
enum Kernel {
    Eigen {
        vectors: DMatrix<C64>,
        inverse: DMatrix<C64>,
        values: DVector<C64>,
    },
    Pade,
}

/// Evaluates `exp(-i H t)` for a fixed generator `H` and arbitrary `t`.
#[derive(Debug, Clone)]
pub struct Propagator {
    generator: DMatrix<C64>,
    kernel: Kernel,
    condition: f64,
}

impl Propagator {
    pub fn new(generator: &DMatrix<C64>) -> Result<Self> {
        if !generator.is_square() {
            return Err(Error::DimensionMismatch {
                expected: generator.nrows(),
                found: generator.ncols(),
            });
        }
        if generator.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("generator"));
        }
        let n = generator.nrows();
        if n == 0 {
            return Ok(Self {
                generator: generator.clone(),
                kernel: Kernel::Pade,
                condition: 1.0,
            });
        }

        match eigendecompose(generator) {
            Some((values, vectors, inverse, condition)) if condition <= MAX_EIGEN_CONDITION => {
                Ok(Self {
                    generator: generator.clone(),
                    kernel: Kernel::Eigen { vectors, inverse, values },
                    condition,
                })
            }
            other => {
                let condition = other.map_or(f64::INFINITY, |d| d.3);
                log::debug!("eigenvector condition {condition:e}, using scaling-and-squaring");
                Ok(Self {
                    generator: generator.clone(),
                    kernel: Kernel::Pade,
                    condition,
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.generator.nrows()
    }

    pub fn method(&self) -> ExpMethod {
        match self.kernel {
            Kernel::Eigen { .. } => ExpMethod::Eigen,
            Kernel::Pade => ExpMethod::ScalingSquaring,
        }
    }

    /// Condition number of the eigenvector matrix (infinite when the
    /// decomposition failed outright).
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Eigenvalues of the generator, when the eigendecomposition was kept.
    pub fn eigenvalues(&self) -> Option<&DVector<C64>> {
        match &self.kernel {
            Kernel::Eigen { values, .. } => Some(values),
            Kernel::Pade => None,
        }
    }

    /// The full evolution operator `exp(-i H t)`.
    pub fn matrix(&self, t: f64) -> DMatrix<C64> {
        let n = self.dim();
        if t == 0.0 {
            return DMatrix::identity(n, n);
        }
        match &self.kernel {
            Kernel::Eigen { vectors, inverse, values } => {
                let mut scaled = vectors.clone();
                for (k, mut col) in scaled.column_iter_mut().enumerate() {
                    col *= (-I * values[k] * t).exp();
                }
                scaled * inverse
            }
            Kernel::Pade => (&self.generator * (-I * t)).exp(),
        }
    }

    /// `exp(-i H t) psi`.
    pub fn apply(&self, psi: &DVector<C64>, t: f64) -> DVector<C64> {
        if t == 0.0 {
            return psi.clone();
        }
        match &self.kernel {
            Kernel::Eigen { vectors, inverse, values } => {
                let mut coeffs = inverse * psi;
                for (k, c) in coeffs.iter_mut().enumerate() {
                    *c *= (-I * values[k] * t).exp();
                }
                vectors * coeffs
            }
            Kernel::Pade => self.matrix(t) * psi,
        }
    }
}

/// Eigenvalues, `V`, `V⁻¹` and the condition number of `V`.
type Eigensystem = (DVector<C64>, DMatrix<C64>, DMatrix<C64>, f64);

/// Schur-based eigendecomposition `H = V diag(λ) V⁻¹`, returning the
/// eigenvector condition number alongside.
fn eigendecompose(h: &DMatrix<C64>) -> Option<Eigensystem> {
    let n = h.nrows();
    let scale = h.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
    let schur = nalgebra::linalg::Schur::try_new(h.clone(), 1e-15 * scale, 10_000)?;
    let (q, t) = schur.unpack();

    let values = DVector::from_iterator(n, (0..n).map(|k| t[(k, k)]));
    let tiny = (1e-14 * scale).max(f64::MIN_POSITIVE);

    // Eigenvectors of the upper-triangular factor by back-substitution.
    let mut y = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        y[(k, k)] = C64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut acc = C64::new(0.0, 0.0);
            for l in (j + 1)..=k {
                acc += t[(j, l)] * y[(l, k)];
            }
            if acc == C64::new(0.0, 0.0) {
                continue;
            }
            let mut denom = t[(j, j)] - values[k];
            if denom.norm() < tiny {
                denom = C64::new(tiny, 0.0);
            }
            y[(j, k)] = -acc / denom;
        }
        let norm = y.column(k).norm();
        y.column_mut(k).unscale_mut(norm);
    }

    let vectors = q * y;
    if vectors.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    let sv = vectors.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let inverse = vectors.clone().try_inverse()?;
    if inverse.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    Some((values, vectors, inverse, condition))
}

/// Largest eigenvalue of the hermitian matrix `(H - H†) / 2i`.
///
/// A physical no-jump generator only removes norm, so this is ≤ 0 up to
/// round-off.
pub fn max_gain_rate(h: &DMatrix<C64>) -> f64 {
    let anti = (h - h.adjoint()) * C64::new(0.0, -0.5);
    anti.symmetric_eigenvalues().max()
}

pub fn norm_sqr(psi: &DVector<C64>) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum()
}

pub fn inner(a: &DVector<C64>, b: &DVector<C64>) -> C64 {
    a.dotc(b)
}

pub fn real_vector(values: &[f64]) -> DVector<C64> {
    DVector::from_iterator(values.len(), values.iter().map(|&x| C64::new(x, 0.0)))
}

pub fn basis_vector(dim: usize, index: usize) -> DVector<C64> {
    let mut v = DVector::zeros(dim);
    v[index] = C64::new(1.0, 0.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_at_zero_time() {
        let h = DMatrix::from_row_slice(2, 2, &[c(1.0, -0.5), c(0.3, 0.0), c(0.3, 0.0), c(0.0, -2.0)]);
        let p = Propagator::new(&h).unwrap();
        let psi = real_vector(&[0.6, 0.8]);
        assert_eq!(p.apply(&psi, 0.0), psi);
    }

    #[test]
    fn pure_decay_scalar() {
        let gamma = 1.7;
        let h = DMatrix::from_element(1, 1, c(0.0, -gamma / 2.0));
        let p = Propagator::new(&h).unwrap();
        for &t in &[0.1, 1.0, 3.5] {
            let amp = p.apply(&real_vector(&[1.0]), t)[0];
            assert_relative_eq!(amp.re, (-gamma * t / 2.0).exp(), max_relative = 1e-13);
            assert!(amp.im.abs() < 1e-15);
        }
    }

    #[test]
    fn defective_generator_falls_back() {
        // Jordan block: eigenvalue -i/2 with a single eigenvector.
        let h = DMatrix::from_row_slice(2, 2, &[c(0.0, -0.5), c(1.0, 0.0), c(0.0, 0.0), c(0.0, -0.5)]);
        let p = Propagator::new(&h).unwrap();
        assert_eq!(p.method(), ExpMethod::ScalingSquaring);
        let t = 0.7;
        let u = p.matrix(t);
        // exp(-i(λI + N)t) = e^{-iλt}(I - i N t)
        let decay = (-0.5 * t).exp();
        assert_relative_eq!(u[(0, 0)].re, decay, max_relative = 1e-12);
        assert_relative_eq!(u[(0, 1)].im, -t * decay, max_relative = 1e-12);
    }

    #[test]
    fn eigen_and_pade_agree_on_generic_matrix() {
        let h = DMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.2, -1.0),
                c(0.0, -0.7),
                c(0.0, 0.0),
                c(0.0, -0.7),
                c(0.0, -3.0),
                c(0.4, 0.0),
                c(0.0, 0.0),
                c(0.4, 0.0),
                c(0.0, 0.0),
            ],
        );
        let p = Propagator::new(&h).unwrap();
        assert_eq!(p.method(), ExpMethod::Eigen);
        let reference = (&h * c(0.0, -1.3)).exp();
        let u = p.matrix(1.3);
        assert!((u - reference).norm() < 1e-12);
    }

    #[test]
    fn passivity_of_decay_generator() {
        let h = DMatrix::from_row_slice(2, 2, &[c(0.0, -0.5), c(0.0, -0.5), c(0.0, -0.5), c(0.0, -0.5)]);
        assert!(max_gain_rate(&h) <= 1e-14);
        let gain = DMatrix::from_element(1, 1, c(0.0, 0.1));
        assert!(max_gain_rate(&gain) > 0.0);
    }
}
