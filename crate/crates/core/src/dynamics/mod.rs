//! No-jump propagation, quantum-jump integrals and the product-space oracle.
//!
//! Conditioned on no photon being emitted, a state evolves under
//! `H = H_coh - (i/2) Σ_c rate_c M_c`, where `M_c = L_c† L_c` for each decay
//! channel. The probability that channel `c` fires during a window is
//! `rate_c ∫ ⟨ψ(t)|M_c|ψ(t)⟩ dt`, which is what [`jump_integral`] evaluates.

pub mod oracle;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, Propagator};
use crate::statespace::{LabeledBasis, StepStructure};

pub use oracle::{lindblad_oracle, OracleTrajectory};

const PASSIVITY_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-10;

/// A decay channel restricted to the basis. `generator` is `L†L` (hermitian,
/// positive semi-definite).
#[derive(Debug, Clone, PartialEq)]
pub struct DecayChannel {
    pub name: String,
    pub rate: f64,
    pub generator: DMatrix<C64>,
}

impl DecayChannel {
    /// Collective channel `L = Σ_j row_j |ground⟩⟨j|`.
    pub fn collective(name: impl Into<String>, rate: f64, row: &[f64]) -> Self {
        let n = row.len();
        let generator = DMatrix::from_fn(n, n, |i, j| C64::new(row[i] * row[j], 0.0));
        Self { name: name.into(), rate, generator }
    }

    /// Independent emission from each listed label.
    pub fn individual(name: impl Into<String>, rate: f64, dim: usize, labels: &[usize]) -> Self {
        let mut generator = DMatrix::zeros(dim, dim);
        for &i in labels {
            generator[(i, i)] = C64::new(1.0, 0.0);
        }
        Self { name: name.into(), rate, generator }
    }
}

/// Non-hermitian generator of the no-jump evolution over a labeled basis.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveHamiltonian {
    basis: LabeledBasis,
    matrix: DMatrix<C64>,
    channels: Vec<DecayChannel>,
}

impl EffectiveHamiltonian {
    /// Wraps a raw matrix. The anti-hermitian part must be non-positive.
    pub fn new(basis: LabeledBasis, matrix: DMatrix<C64>) -> Result<Self> {
        check_square(&basis, &matrix)?;
        let h = Self { basis, matrix, channels: Vec::new() };
        h.check_passive()?;
        Ok(h)
    }

    /// Builds `H_coh - (i/2) Σ rate·L†L` and keeps the channels for jump
    /// bookkeeping.
    pub fn from_parts(basis: LabeledBasis, coherent: DMatrix<C64>, channels: Vec<DecayChannel>) -> Result<Self> {
        check_square(&basis, &coherent)?;
        let mut matrix = coherent;
        for c in &channels {
            if !(c.rate.is_finite() && c.rate >= 0.0) {
                return Err(invalid("rate", format!("channel {} has rate {}", c.name, c.rate)));
            }
            check_square(&basis, &c.generator)?;
            matrix -= &c.generator * C64::new(0.0, 0.5 * c.rate);
        }
        let h = Self { basis, matrix, channels };
        h.check_passive()?;
        Ok(h)
    }

    /// Hamiltonian of a protocol step at drive amplitude `omega`.
    pub fn from_structure(s: &StepStructure, omega: f64) -> Result<Self> {
        if !omega.is_finite() {
            return Err(Error::NonFinite("omega"));
        }
        let dim = s.basis.dim();
        let mut coherent = DMatrix::zeros(dim, dim);
        if let Some((a, b)) = s.drive {
            coherent[(a, b)] = C64::new(omega / 2.0, 0.0);
            coherent[(b, a)] = C64::new(omega / 2.0, 0.0);
        }
        let mut channels: Vec<DecayChannel> = s
            .channels
            .iter()
            .map(|c| DecayChannel::collective(format!("collective {}", c.name), c.rate, &c.row))
            .collect();
        channels.push(DecayChannel::individual("free space", s.gamma_star, dim, &s.excited));
        Self::from_parts(s.basis.clone(), coherent, channels)
    }

    fn check_passive(&self) -> Result<()> {
        if self.matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("effective Hamiltonian"));
        }
        let scale = self.matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let gain = linalg::max_gain_rate(&self.matrix);
        if gain > PASSIVITY_TOL * scale {
            return Err(invalid("matrix", format!("anti-hermitian part has gain rate {gain:e}")));
        }
        Ok(())
    }

    pub fn basis(&self) -> &LabeledBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn channels(&self) -> &[DecayChannel] {
        &self.channels
    }

    /// Total loss operator `i(H - H†)`, equal to `Σ rate·L†L`.
    pub fn loss_operator(&self) -> DMatrix<C64> {
        (&self.matrix - self.matrix.adjoint()) * C64::new(0.0, 1.0)
    }

    /// The initial basis state of the step as a vector.
    pub fn initial_state(&self) -> DVector<C64> {
        linalg::basis_vector(self.dim(), self.basis.initial())
    }
}

fn check_square(basis: &LabeledBasis, m: &DMatrix<C64>) -> Result<()> {
    if m.nrows() != basis.dim() || m.ncols() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), found: m.nrows().max(m.ncols()) });
    }
    Ok(())
}

fn check_state(h: &EffectiveHamiltonian, psi: &DVector<C64>, normalized: bool) -> Result<()> {
    if psi.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: psi.len() });
    }
    if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("state"));
    }
    if normalized {
        let n = linalg::norm_sqr(psi);
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n));
        }
    }
    Ok(())
}

/// `exp(-i H t) ψ0` with a halved-step consistency check.
pub fn propagate(h: &EffectiveHamiltonian, psi0: &DVector<C64>, t: f64) -> Result<DVector<C64>> {
    check_state(h, psi0, true)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", format!("{t} is not a non-negative time")));
    }
    let p = Propagator::new(h.matrix())?;
    checked_apply(&p, h.matrix(), psi0, t)
}

fn checked_apply(p: &Propagator, matrix: &DMatrix<C64>, psi: &DVector<C64>, t: f64) -> Result<DVector<C64>> {
    let full = p.apply(psi, t);
    let half = p.apply(&p.apply(psi, t / 2.0), t / 2.0);
    let scale = full.norm().max(1e-300);
    if (&full - &half).norm() <= 1e-10 * scale.max(1e-6) {
        return Ok(full);
    }
    // The eigenbasis is not accurate enough; retry with scaling-and-squaring.
    let u = (matrix * C64::new(0.0, -t)).exp();
    let uh = (matrix * C64::new(0.0, -t / 2.0)).exp();
    let full = &u * psi;
    let half = &uh * (&uh * psi);
    if (&full - &half).norm() <= 1e-10 * full.norm().max(1e-6) {
        Ok(full)
    } else {
        Err(Error::NonConvergence(format!("propagation to t = {t} failed the halved-step check")))
    }
}

/// Amplitudes of a no-jump evolution sampled on a time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    labels: Vec<String>,
    times: Vec<f64>,
    amplitudes: Vec<DVector<C64>>,
    evolution: Option<Evolution>,
}

/// What is needed to re-evaluate the state between grid points.
#[derive(Debug, Clone)]
struct Evolution {
    propagator: Propagator,
    psi0: DVector<C64>,
}

impl Evolution {
    fn state(&self, t: f64) -> DVector<C64> {
        self.propagator.apply(&self.psi0, t)
    }
}

impl Trajectory {
    /// A trajectory from precomputed samples; jump integrals fall back to
    /// composite Simpson on the samples.
    pub fn from_samples(labels: Vec<String>, times: Vec<f64>, amplitudes: Vec<DVector<C64>>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if times.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), found: amplitudes.len() });
        }
        if amplitudes.iter().any(|a| a.len() != labels.len()) {
            return Err(Error::DimensionMismatch { expected: labels.len(), found: amplitudes[0].len() });
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid);
        }
        Ok(Self { labels, times, amplitudes, evolution: None })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn amplitudes(&self, step: usize) -> &DVector<C64> {
        &self.amplitudes[step]
    }

    /// Population of basis state `i` at every grid point.
    pub fn populations(&self, i: usize) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a[i].norm_sqr()).collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.amplitudes.iter().map(linalg::norm_sqr).collect()
    }

    /// The same trajectory with every amplitude multiplied by `sqrt(norm)`,
    /// i.e. started from a state of squared norm `norm`.
    pub fn scaled(mut self, norm: f64) -> Self {
        let s = C64::new(norm.sqrt(), 0.0);
        for a in &mut self.amplitudes {
            *a *= s;
        }
        if let Some(ev) = &mut self.evolution {
            ev.psi0 *= s;
        }
        self
    }

    pub fn final_norm(&self) -> f64 {
        linalg::norm_sqr(self.amplitudes.last().expect("trajectory is never empty"))
    }

    /// CSV with header `t,<labels>` and populations at 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (t, a) in self.times.iter().zip(&self.amplitudes) {
            let _ = write!(out, "{}", fmt12(*t));
            for z in a.iter() {
                let _ = write!(out, ",{}", fmt12(z.norm_sqr()));
            }
            out.push('\n');
        }
        out
    }
}

/// A float with 12 significant digits.
pub fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

/// Validates a time grid: non-empty, starting at 0, strictly increasing.
pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid[0] != 0.0 || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidGrid);
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid);
    }
    Ok(())
}

/// `n` equally spaced points on `[0, t_end]`.
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
}

pub fn trajectory(h: &EffectiveHamiltonian, psi0: &DVector<C64>, grid: &[f64]) -> Result<Trajectory> {
    check_state(h, psi0, true)?;
    check_grid(grid)?;
    let propagator = Propagator::new(h.matrix())?;
    let mut amplitudes = Vec::with_capacity(grid.len());
    for &t in grid {
        amplitudes.push(checked_apply(&propagator, h.matrix(), psi0, t)?);
    }
    Ok(Trajectory {
        labels: h.basis().labels().to_vec(),
        times: grid.to_vec(),
        amplitudes,
        evolution: Some(Evolution { propagator, psi0: psi0.clone() }),
    })
}

/// Diagonal weight matrix from `(basis index, weight)` pairs.
pub fn diagonal_weights(dim: usize, weights: &[(usize, f64)]) -> Result<DMatrix<C64>> {
    let mut w = DMatrix::zeros(dim, dim);
    for &(i, wi) in weights {
        if i >= dim {
            return Err(Error::DimensionMismatch { expected: dim, found: i + 1 });
        }
        if !(wi.is_finite() && wi >= 0.0) {
            return Err(invalid("weights", format!("weight {wi} on state {i} is not non-negative")));
        }
        w[(i, i)] += C64::new(wi, 0.0);
    }
    Ok(w)
}

const QUAD_RTOL: f64 = 1e-10;
const QUAD_ATOL: f64 = 1e-16;

/// `rate · ∫ Σ_i w_i |c_i(t)|² dt` over the trajectory window.
pub fn jump_integral(traj: &Trajectory, weights: &[(usize, f64)], rate: f64) -> Result<f64> {
    let w = diagonal_weights(traj.labels.len(), weights)?;
    jump_integral_form(traj, &w, rate)
}

/// Same as [`jump_integral`] for a general positive semi-definite weight,
/// e.g. `L†L` of a collective channel.
pub fn jump_integral_form(traj: &Trajectory, weight: &DMatrix<C64>, rate: f64) -> Result<f64> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if !(rate.is_finite() && rate > 0.0) {
        return Err(invalid("rate", format!("{rate} is not a positive rate")));
    }
    if weight.nrows() != traj.labels.len() {
        return Err(Error::DimensionMismatch { expected: traj.labels.len(), found: weight.nrows() });
    }
    if traj.len() < 2 {
        return Ok(0.0);
    }
    let integral = match &traj.evolution {
        Some(ev) => {
            let f = |t: f64| expectation(weight, &ev.state(t));
            let mut total = 0.0;
            for w in traj.times.windows(2) {
                total += adaptive_simpson(&f, w[0], w[1], QUAD_RTOL)?;
            }
            total
        }
        None => {
            let values: Vec<f64> = traj.amplitudes.iter().map(|a| expectation(weight, a)).collect();
            simpson_samples(&traj.times, &values)
        }
    };
    Ok(rate * integral)
}

/// Jump probability over `[0, ∞)` starting from `psi0` (which may carry
/// less than unit norm, e.g. the state left when a laser is switched off).
pub fn jump_integral_infinite(
    h: &EffectiveHamiltonian,
    psi0: &DVector<C64>,
    weight: &DMatrix<C64>,
    rate: f64,
) -> Result<f64> {
    check_state(h, psi0, false)?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(invalid("rate", format!("{rate} is not a positive rate")));
    }
    if weight.nrows() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: weight.nrows() });
    }
    let propagator = Propagator::new(h.matrix())?;
    let slowest = slowest_decay(h.matrix());
    let f = |t: f64| expectation(weight, &propagator.apply(psi0, t));

    let fastest = h.matrix().iter().map(|z| z.norm()).fold(1e-12, f64::max);
    let mut a = 0.0;
    let mut len = 1.0 / fastest;
    let mut total = 0.0;
    let mut quiet = 0;
    while a < 1e7 {
        let b = a + len;
        let piece = adaptive_simpson(&f, a, b, QUAD_RTOL)?;
        total += piece;
        a = b;
        let tail_bound = f(a) / slowest.max(1e-12);
        if tail_bound <= 1e-13 * total.max(1e-300) || (total == 0.0 && f(a) == 0.0 && a * slowest > 60.0) {
            quiet += 1;
            if quiet >= 2 {
                return Ok(rate * total);
            }
        } else {
            quiet = 0;
        }
        len = (len * 2.0).min(4.0 / slowest.max(1e-12));
    }
    Err(Error::NonConvergence("jump integral over an infinite window did not settle".into()))
}

/// Smallest strictly positive decay rate `-2 Im λ` among the eigenvalues.
fn slowest_decay(h: &DMatrix<C64>) -> f64 {
    let scale = h.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    let ev = nalgebra::linalg::Schur::new(h.clone()).eigenvalues();
    ev.map(|v| {
        v.iter()
            .map(|l| -2.0 * l.im)
            .filter(|g| *g > 1e-12 * scale)
            .fold(f64::INFINITY, f64::min)
    })
    .filter(|g| g.is_finite())
    .unwrap_or(1.0)
}

fn expectation(w: &DMatrix<C64>, psi: &DVector<C64>) -> f64 {
    psi.dotc(&(w * psi)).re
}

/// Adaptive Simpson quadrature with a relative tolerance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rtol: f64) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // a coarse pre-split guards against integrands that vanish at the
    // three initial nodes but not in between
    let mut total = 0.0;
    let n = 8;
    let h = (b - a) / n as f64;
    let scale = whole.abs();
    for i in 0..n {
        let x0 = a + i as f64 * h;
        let x1 = x0 + h;
        let (f0, f1) = (f(x0), f(x1));
        let xm = 0.5 * (x0 + x1);
        let fm = f(xm);
        let s = h / 6.0 * (f0 + 4.0 * fm + f1);
        total += simpson_rec(f, x0, x1, f0, fm, f1, s, rtol, scale, 0)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    rtol: f64,
    scale: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let refined = left + right;
    let err = (refined - whole).abs();
    let tol = (rtol * refined.abs().max(scale * 1e-3)).max(QUAD_ATOL * (b - a));
    if err <= 15.0 * tol {
        return Ok(refined + (refined - whole) / 15.0);
    }
    if depth >= 40 {
        return Err(Error::NonConvergence(format!("adaptive Simpson on [{a}, {b}]")));
    }
    Ok(simpson_rec(f, a, m, fa, flm, fm, left, rtol, scale, depth + 1)?
        + simpson_rec(f, m, b, fm, frm, fb, right, rtol, scale, depth + 1)?)
}

/// Composite Simpson on possibly non-uniform samples (pairs of intervals
/// integrated through their interpolating parabola, trapezoid for a
/// leftover interval).
pub fn simpson_samples(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len();
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 < n {
        let (h0, h1) = (t[i + 1] - t[i], t[i + 2] - t[i + 1]);
        let hs = h0 + h1;
        total += hs / 6.0
            * (y[i] * (2.0 - h1 / h0) + y[i + 1] * hs * hs / (h0 * h1) + y[i + 2] * (2.0 - h0 / h1));
        i += 2;
    }
    if i + 1 < n {
        total += 0.5 * (t[i + 1] - t[i]) * (y[i] + y[i + 1]);
    }
    total
}

/// Norm remaining at `t` plus every channel's jump probability on `[0, t]`.
/// Equals one for any passive Hamiltonian built from its channels.
pub fn unraveling_balance(h: &EffectiveHamiltonian, psi0: &DVector<C64>, t: f64) -> Result<f64> {
    let traj = trajectory(h, psi0, &[0.0, t])?;
    let mut total = traj.final_norm();
    for c in h.channels() {
        if c.rate > 0.0 {
            total += jump_integral_form(&traj, &c.generator, c.rate)?;
        }
    }
    Ok(total)
}

/// The same over `[0, ∞)`.
pub fn unraveling_balance_infinite(h: &EffectiveHamiltonian, psi0: &DVector<C64>) -> Result<(f64, f64)> {
    let mut jumps = 0.0;
    for c in h.channels() {
        if c.rate > 0.0 {
            jumps += jump_integral_infinite(h, psi0, &c.generator, c.rate)?;
        }
    }
    // surviving norm: population that never decays (stationary dark states)
    let p = Propagator::new(h.matrix())?;
    let surviving = linalg::norm_sqr(&p.apply(psi0, 1e4 / slowest_decay(h.matrix()).max(1e-3)));
    Ok((surviving, jumps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::{step_structure, EnsembleParams, ProtocolStep};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn one_state(gamma: f64) -> EffectiveHamiltonian {
        let basis = LabeledBasis::new(vec!["e".into()], 0, 0).unwrap();
        EffectiveHamiltonian::from_parts(
            basis,
            DMatrix::zeros(1, 1),
            vec![DecayChannel::individual("decay", gamma, 1, &[0])],
        )
        .unwrap()
    }

    fn stepc(n: u32, p: f64, omega: f64) -> EffectiveHamiltonian {
        let params = EnsembleParams::new(n, n, 0, p).unwrap();
        let s = step_structure(ProtocolStep::P1StepC, &params).unwrap();
        EffectiveHamiltonian::from_structure(&s, omega).unwrap()
    }

    #[test]
    fn rejects_gain() {
        let basis = LabeledBasis::new(vec!["x".into()], 0, 0).unwrap();
        assert!(EffectiveHamiltonian::new(basis, DMatrix::from_element(1, 1, c(0.0, 0.2))).is_err());
    }

    #[test]
    fn propagate_zero_time_is_identity() {
        let h = stepc(10, 10.0, 3.0);
        let psi = h.initial_state();
        assert_eq!(propagate(&h, &psi, 0.0).unwrap(), psi);
    }

    #[test]
    fn propagate_rejects_bad_input() {
        let h = stepc(10, 10.0, 3.0);
        assert!(matches!(propagate(&h, &linalg::real_vector(&[1.0, 0.0]), 1.0), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(propagate(&h, &linalg::real_vector(&[1.0, 1.0, 0.0]), 1.0), Err(Error::NotNormalized(_))));
        let nan = linalg::real_vector(&[f64::NAN, 0.0, 0.0]);
        assert!(matches!(propagate(&h, &nan, 1.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn pure_decay_population() {
        let h = one_state(2.5);
        let psi = propagate(&h, &h.initial_state(), 0.8).unwrap();
        assert_relative_eq!(psi[0].re, (-2.5f64 * 0.4).exp(), max_relative = 1e-13);
        assert_relative_eq!(psi[0].norm_sqr(), (-2.5f64 * 0.8).exp(), max_relative = 1e-13);
    }

    #[test]
    fn stepc_goal_population_at_optimum() {
        let (nm, p) = (100.0f64, 100.0f64);
        let h = stepc(100, p, (nm * p).sqrt());
        let t = std::f64::consts::PI / p.sqrt();
        let psi = propagate(&h, &h.initial_state(), t).unwrap();
        assert!((psi[2].norm_sqr() - 0.723).abs() < 0.005, "{}", psi[2].norm_sqr());
    }

    #[test]
    fn zero_hamiltonian_keeps_populations() {
        let basis = LabeledBasis::new(vec!["a".into(), "b".into()], 0, 1).unwrap();
        let h = EffectiveHamiltonian::new(basis, DMatrix::zeros(2, 2)).unwrap();
        let psi = linalg::real_vector(&[0.6, 0.8]);
        let traj = trajectory(&h, &psi, &uniform_grid(5.0, 11)).unwrap();
        for p in traj.populations(0) {
            assert_relative_eq!(p, 0.36, max_relative = 1e-14);
        }
    }

    #[test]
    fn trajectory_rejects_bad_grid() {
        let h = one_state(1.0);
        let psi = h.initial_state();
        assert!(matches!(trajectory(&h, &psi, &[]), Err(Error::InvalidGrid)));
        assert!(matches!(trajectory(&h, &psi, &[0.1, 0.2]), Err(Error::InvalidGrid)));
        assert!(matches!(trajectory(&h, &psi, &[0.0, 0.2, 0.2]), Err(Error::InvalidGrid)));
    }

    #[test]
    fn csv_layout() {
        let h = one_state(1.0);
        let traj = trajectory(&h, &h.initial_state(), &[0.0, 1.0]).unwrap();
        let csv = traj.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,e");
        assert_eq!(lines[1], "0.00000000000e0,1.00000000000e0");
        let pop: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_relative_eq!(pop, (-1.0f64).exp(), max_relative = 1e-11);
    }

    #[test]
    fn jump_integral_zero_weights() {
        let h = stepc(10, 10.0, 2.0);
        let traj = trajectory(&h, &h.initial_state(), &uniform_grid(1.0, 5)).unwrap();
        assert_eq!(jump_integral(&traj, &[], 1.0).unwrap(), 0.0);
        assert!(jump_integral(&traj, &[(7, 1.0)], 1.0).is_err());
        assert!(jump_integral(&traj, &[(0, 1.0)], 0.0).is_err());
    }

    #[test]
    fn pure_decay_total_jump_is_one() {
        let h = one_state(1.7);
        let w = diagonal_weights(1, &[(0, 1.0)]).unwrap();
        let p = jump_integral_infinite(&h, &h.initial_state(), &w, 1.7).unwrap();
        assert_relative_eq!(p, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn finite_window_pure_decay() {
        let h = one_state(1.0);
        let traj = trajectory(&h, &h.initial_state(), &[0.0, 0.5, 2.0]).unwrap();
        let p = jump_integral(&traj, &[(0, 1.0)], 1.0).unwrap();
        assert_relative_eq!(p, 1.0 - (-2.0f64).exp(), max_relative = 1e-9);
    }

    #[test]
    fn sample_simpson_is_exact_on_parabolas() {
        let t = [0.0, 0.3, 1.0, 1.2, 2.0];
        let y: Vec<f64> = t.iter().map(|x| 1.0 + x - 0.7 * x * x).collect();
        let exact = 2.0 + 2.0 - 0.7 * 8.0 / 3.0;
        assert_relative_eq!(simpson_samples(&t, &y), exact, max_relative = 1e-13);
    }

    /// Independent oracle for the infinite-window quadratic form: solves
    /// `i(H† X - X H) = -W` by vectorization and returns `ψ† X ψ`.
    fn lyapunov_oracle(h: &DMatrix<C64>, w: &DMatrix<C64>, psi: &DVector<C64>) -> f64 {
        let n = h.nrows();
        let id = DMatrix::<C64>::identity(n, n);
        let i = c(0.0, 1.0);
        let a = id.kronecker(&(h.adjoint() * i)) - (h * i).transpose().kronecker(&id);
        let rhs = DVector::from_iterator(n * n, w.iter().map(|z| -*z));
        let x = a.lu().solve(&rhs).unwrap();
        let x = DMatrix::from_column_slice(n, n, x.as_slice());
        psi.dotc(&(x * psi)).re
    }

    #[test]
    fn infinite_window_matches_lyapunov_oracle() {
        let h = stepc(20, 30.0, 9.0);
        for ch in h.channels() {
            let got = jump_integral_infinite(&h, &h.initial_state(), &ch.generator, ch.rate).unwrap();
            let want = ch.rate * lyapunov_oracle(h.matrix(), &ch.generator, &h.initial_state());
            assert_relative_eq!(got, want, max_relative = 1e-8);
        }
    }

    proptest! {
        #[test]
        fn semigroup(n in 1u32..300, p in 1.0f64..500.0, omega in 0.0f64..50.0, t1 in 0.0f64..2.0, t2 in 0.0f64..2.0) {
            let h = stepc(n, p, omega);
            let psi = h.initial_state();
            let direct = propagate(&h, &psi, t1 + t2).unwrap();
            let mid = propagate(&h, &psi, t1).unwrap();
            let norm = linalg::norm_sqr(&mid).sqrt();
            let two = propagate(&h, &(mid / C64::new(norm, 0.0)), t2).unwrap() * C64::new(norm, 0.0);
            prop_assert!((direct - two).norm() <= 1e-10);
        }

        #[test]
        fn norm_is_monotone(n in 1u32..300, p in 1.0f64..500.0, omega in 0.0f64..50.0) {
            let h = stepc(n, p, omega);
            let traj = trajectory(&h, &h.initial_state(), &uniform_grid(3.0, 61)).unwrap();
            let norms = traj.norms();
            prop_assert!((norms[0] - 1.0).abs() < 1e-14);
            for w in norms.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-10);
            }
        }

        #[test]
        fn finite_window_balance(n in 1u32..200, p in 1.0f64..200.0, omega in 0.1f64..40.0, t in 0.01f64..3.0) {
            let h = stepc(n, p, omega);
            let total = unraveling_balance(&h, &h.initial_state(), t).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-7);
        }
    }
}
