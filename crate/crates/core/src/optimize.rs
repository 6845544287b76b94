//! Bounded one-dimensional optimisation.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Result of a bounded scalar search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
///
/// Stops once the bracket width falls below `rel_tol * |x|` (or `rel_tol`
/// when `x` is near zero).
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<Extremum> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(crate::error::invalid("bracket", format!("[{lo}, {hi}] is not a finite interval")));
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for it in 0..500 {
        let mid = 0.5 * (a + b);
        if (b - a) <= rel_tol * mid.abs().max(1e-300) || (b - a) <= rel_tol * f64::EPSILON {
            let (x, value) = if fc >= fd { (c, fc) } else { (d, fd) };
            return Ok(Extremum { x, value, iterations: it });
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    Err(Error::NonConvergence("golden-section search exceeded 500 iterations".into()))
}

/// Golden-section search for the minimum of `f`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<Extremum> {
    let best = golden_max(|x| -f(x), lo, hi, rel_tol)?;
    Ok(Extremum { value: -best.value, ..best })
}

/// Least-squares polynomial fit of the given degree, coefficients in
/// ascending order.
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Result<Vec<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), found: ys.len() });
    }
    if xs.len() <= degree {
        return Err(crate::error::invalid("points", "need more points than the degree"));
    }
    let cols = degree + 1;
    let a = nalgebra::DMatrix::from_fn(xs.len(), cols, |i, j| xs[i].powi(j as i32));
    let y = nalgebra::DVector::from_column_slice(ys);
    let svd = a.svd(true, true);
    let coeffs = svd
        .solve(&y, 1e-14)
        .map_err(|e| Error::NonConvergence(format!("least squares: {e}")))?;
    Ok(coeffs.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_peak() {
        let best = golden_max(|x| -(x - 1.3).powi(2) + 2.0, 0.0, 5.0, 1e-10).unwrap();
        assert!((best.x - 1.3).abs() < 1e-7);
        assert!((best.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn minimum_of_cosine() {
        let best = golden_min(f64::cos, 2.0, 4.0, 1e-10).unwrap();
        assert!((best.x - std::f64::consts::PI).abs() < 1e-7);
    }

    #[test]
    fn rejects_empty_bracket() {
        assert!(golden_max(|x| x, 1.0, 1.0, 1e-6).is_err());
    }

    #[test]
    fn recovers_quadratic() {
        let xs: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 2.0 * x + 0.5 * x * x).collect();
        let c = polyfit(&xs, &ys, 2).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-10);
        assert!((c[1] + 2.0).abs() < 1e-10);
        assert!((c[2] - 0.5).abs() < 1e-10);
    }
}
