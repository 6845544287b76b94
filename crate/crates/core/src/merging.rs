//! Two-mode Fock-space beamsplitter and the tree-merging planner.
//!
//! Two ensembles holding `k` excitations each are merged by a 50:50
//! beamsplitter between their collective modes, heralded on finding the
//! down mode empty (zero herald) or on a small number-resolved count
//! (threshold policy).
//!
//! Beamsplitter convention: creation operators transform as
//! `a↑† → √T a↑† + i e^{iφ} √R a↓†`, `a↓† → i e^{-iφ} √R a↑† + √T a↓†`.

use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_complex::Complex64 as C64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::dynamics::fmt12;
use crate::error::{invalid, Error, Result};
use crate::optimize::golden_min;

/// Pure state of two bosonic modes truncated at `cutoff` quanta per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    cutoff: usize,
    amplitudes: Vec<C64>,
}

impl TwoModeState {
    pub fn vacuum(cutoff: usize) -> Self {
        Self::fock(0, 0, cutoff).expect("vacuum fits any cutoff")
    }

    /// `|n_up, n_down⟩`.
    pub fn fock(n_up: usize, n_down: usize, cutoff: usize) -> Result<Self> {
        let need = n_up.max(n_down);
        if need > cutoff {
            return Err(Error::CutoffOverflow { cutoff, required: need });
        }
        let mut s = Self { cutoff, amplitudes: vec![C64::new(0.0, 0.0); (cutoff + 1) * (cutoff + 1)] };
        *s.amp_mut(n_up, n_down) = C64::new(1.0, 0.0);
        Ok(s)
    }

    /// Builds a state from `(n_up, n_down, amplitude)` triples.
    pub fn from_terms(cutoff: usize, terms: &[(usize, usize, C64)]) -> Result<Self> {
        let mut s = Self { cutoff, amplitudes: vec![C64::new(0.0, 0.0); (cutoff + 1) * (cutoff + 1)] };
        for &(u, d, a) in terms {
            if u.max(d) > cutoff {
                return Err(Error::CutoffOverflow { cutoff, required: u.max(d) });
            }
            *s.amp_mut(u, d) += a;
        }
        Ok(s)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    fn index(&self, up: usize, down: usize) -> usize {
        up * (self.cutoff + 1) + down
    }

    pub fn amp(&self, up: usize, down: usize) -> C64 {
        if up > self.cutoff || down > self.cutoff {
            return C64::new(0.0, 0.0);
        }
        self.amplitudes[self.index(up, down)]
    }

    fn amp_mut(&mut self, up: usize, down: usize) -> &mut C64 {
        let i = self.index(up, down);
        &mut self.amplitudes[i]
    }

    /// Iterates over `(n_up, n_down, amplitude)` for every stored entry.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        let c = self.cutoff + 1;
        self.amplitudes.iter().enumerate().map(move |(i, &a)| (i / c, i % c, a))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized(n));
        }
        let s = C64::new(n.sqrt().recip(), 0.0);
        Ok(Self { cutoff: self.cutoff, amplitudes: self.amplitudes.iter().map(|a| a * s).collect() })
    }

    /// Total photon number if the state is a number eigenstate (entries
    /// below `1e-24` in probability are ignored).
    pub fn total_number(&self) -> Option<usize> {
        let mut found = None;
        for (u, d, a) in self.terms() {
            if a.norm_sqr() > 1e-24 {
                match found {
                    None => found = Some(u + d),
                    Some(n) if n != u + d => return None,
                    _ => {}
                }
            }
        }
        found
    }

    /// Largest total photon number carried with non-zero amplitude.
    pub fn max_total(&self) -> usize {
        self.terms().filter(|t| t.2 != C64::new(0.0, 0.0)).map(|(u, d, _)| u + d).max().unwrap_or(0)
    }

    /// Same state stored with a different cutoff.
    pub fn with_cutoff(&self, cutoff: usize) -> Result<Self> {
        let mut out = Self { cutoff, amplitudes: vec![C64::new(0.0, 0.0); (cutoff + 1) * (cutoff + 1)] };
        for (u, d, a) in self.terms() {
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            if u.max(d) > cutoff {
                return Err(Error::CutoffOverflow { cutoff, required: u.max(d) });
            }
            *out.amp_mut(u, d) = a;
        }
        Ok(out)
    }

    /// `c_up a↑† + c_down a↓†` applied to the state (cutoff grows by one).
    pub fn create(&self, c_up: C64, c_down: C64) -> Self {
        let cutoff = self.cutoff + 1;
        let mut out = Self { cutoff, amplitudes: vec![C64::new(0.0, 0.0); (cutoff + 1) * (cutoff + 1)] };
        for (u, d, a) in self.terms() {
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            *out.amp_mut(u + 1, d) += c_up * a * ((u + 1) as f64).sqrt();
            *out.amp_mut(u, d + 1) += c_down * a * ((d + 1) as f64).sqrt();
        }
        out
    }

    /// Multiplies each `|u, d⟩` by `f(u, d)`.
    pub fn map_diagonal(&self, f: impl Fn(usize, usize) -> C64) -> Self {
        let c = self.cutoff + 1;
        Self {
            cutoff: self.cutoff,
            amplitudes: self.amplitudes.iter().enumerate().map(|(i, &a)| a * f(i / c, i % c)).collect(),
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        let cutoff = self.cutoff.max(other.cutoff);
        let mut acc = C64::new(0.0, 0.0);
        for u in 0..=cutoff {
            for d in 0..=cutoff {
                acc += self.amp(u, d).conj() * other.amp(u, d);
            }
        }
        acc
    }

    /// `1 - |⟨a|b⟩|²` for normalized states: zero iff equal up to phase.
    pub fn phase_distance(&self, other: &Self) -> f64 {
        let ov = self.inner(other).norm_sqr() / (self.norm_sqr() * other.norm_sqr());
        (1.0 - ov).max(0.0)
    }

    /// Probability of finding `c` quanta in the down mode, for `c = 0..=cutoff`.
    pub fn down_count_distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.cutoff + 1];
        for (_, d, a) in self.terms() {
            p[d] += a.norm_sqr();
        }
        p
    }

    /// CSV `count,probability` of the down-mode count.
    pub fn distribution_csv(&self) -> String {
        let mut out = String::from("count,probability\n");
        for (c, p) in self.down_count_distribution().into_iter().enumerate() {
            let _ = writeln!(out, "{c},{}", fmt12(p));
        }
        out
    }
}

/// Beamsplitter with transmittance `T` and phase `φ`.
pub fn beamsplitter(state: &TwoModeState, transmittance: f64, phase: f64) -> Result<TwoModeState> {
    if !(0.0..=1.0).contains(&transmittance) {
        return Err(invalid("transmittance", format!("{transmittance} is outside [0, 1]")));
    }
    if !phase.is_finite() {
        return Err(Error::NonFinite("phase"));
    }
    let n_max = state.max_total();
    if n_max > state.cutoff {
        return Err(Error::CutoffOverflow { cutoff: state.cutoff, required: n_max });
    }
    let theta = transmittance.sqrt().acos();
    let mut out = TwoModeState {
        cutoff: state.cutoff,
        amplitudes: vec![C64::new(0.0, 0.0); state.amplitudes.len()],
    };
    for n in 0..=n_max {
        let input = DVector::from_iterator(n + 1, (0..=n).map(|u| state.amp(u, n - u)));
        if input.iter().all(|a| *a == C64::new(0.0, 0.0)) {
            continue;
        }
        let u = sector_unitary(n, theta, phase);
        let output = u * input;
        for (x, a) in output.iter().enumerate() {
            *out.amp_mut(x, n - x) = *a;
        }
    }
    Ok(out)
}

/// 50:50 beamsplitter with zero phase.
pub fn balanced_beamsplitter(state: &TwoModeState) -> Result<TwoModeState> {
    beamsplitter(state, 0.5, 0.0)
}

/// `exp(iθ G)` on the `n`-photon sector with basis `|x, n-x⟩`, where
/// `G = e^{iφ} a↓†a↑ + e^{-iφ} a↑†a↓`.
///
/// `G = D G₀ D†` with `D = diag(e^{-iφx})` and `G₀` real symmetric
/// tridiagonal, so the exponential follows from a real eigensolve.
fn sector_unitary(n: usize, theta: f64, phase: f64) -> DMatrix<C64> {
    let dim = n + 1;
    let mut g0 = DMatrix::<f64>::zeros(dim, dim);
    for x in 0..n {
        let e = (((x + 1) * (n - x)) as f64).sqrt();
        g0[(x + 1, x)] = e;
        g0[(x, x + 1)] = e;
    }
    let eig = g0.symmetric_eigen();
    let v = eig.eigenvectors.map(|x| C64::new(x, 0.0));
    let mut scaled = v.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= C64::from_polar(1.0, theta * eig.eigenvalues[k]);
    }
    let mut u = scaled * v.transpose();
    for r in 0..dim {
        for c in 0..dim {
            u[(r, c)] *= C64::from_polar(1.0, -phase * (r as f64 - c as f64));
        }
    }
    u
}

// ---------------------------------------------------------------------------
// Exact rational oracle for the 50:50 beamsplitter.

fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// Exact probability of `|x, p+q-x⟩` after a 50:50 beamsplitter on `|p, q⟩`.
///
/// The amplitude is `G √(x!(N-x)!) / √(2^N p! q!)` with the Gaussian integer
/// `G = Σ_j C(p,j) C(q,x-j) i^{p+x-2j}`.
pub fn exact_output_probability(p: u64, q: u64, x: u64) -> BigRational {
    let n = p + q;
    if x > n {
        return BigRational::zero();
    }
    let (mut re, mut im) = (BigInt::zero(), BigInt::zero());
    for j in 0..=p.min(x) {
        if x - j > q {
            continue;
        }
        let c = binomial(p, j) * binomial(q, x - j);
        match (p + x - 2 * j) % 4 {
            0 => re += c,
            1 => im += c,
            2 => re -= c,
            _ => im -= c,
        }
    }
    let g2 = &re * &re + &im * &im;
    let num = g2 * factorial(x) * factorial(n - x);
    let den = (BigInt::one() << n) * factorial(p) * factorial(q);
    BigRational::new(num, den)
}

/// `(2k)! / (4^k (k!)²)` as an exact rational.
pub fn doubling_closed_form_exact(k: u64) -> BigRational {
    BigRational::new(factorial(2 * k), (BigInt::one() << (2 * k)) * factorial(k) * factorial(k))
}

/// `ln n!` by direct summation.
pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Closed form and exact projection of the doubling step `|k,k⟩ → |2k,0⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublingSuccess {
    pub k: u64,
    /// `(2k)!/(4^k (k!)²)` evaluated in log space.
    pub closed_form: f64,
    /// Probability of an empty down mode after the beamsplitter.
    pub projected: f64,
    pub closed_form_exact: BigRational,
    pub projected_exact: BigRational,
    /// Stirling estimate `1/√(πk)`.
    pub asymptotic: f64,
}

impl DoublingSuccess {
    pub fn exact_agreement(&self) -> bool {
        self.closed_form_exact == self.projected_exact
    }
}

pub fn doubling_success(k: u64) -> Result<DoublingSuccess> {
    if k == 0 {
        return Err(invalid("k", "must be at least 1"));
    }
    let closed_form = (ln_factorial(2 * k) - 2.0 * k as f64 * 2f64.ln() - 2.0 * ln_factorial(k)).exp();
    let projected_exact = exact_output_probability(k, k, 2 * k);
    Ok(DoublingSuccess {
        k,
        closed_form,
        projected: projected_exact.to_f64().unwrap_or(f64::NAN),
        closed_form_exact: doubling_closed_form_exact(k),
        projected_exact,
        asymptotic: 1.0 / (PI * k as f64).sqrt(),
    })
}

/// `q_k` as a float.
pub fn doubling_probability(k: u64) -> f64 {
    (ln_factorial(2 * k) - 2.0 * k as f64 * 2f64.ln() - 2.0 * ln_factorial(k)).exp()
}

// ---------------------------------------------------------------------------
// Planner

/// Heralding rule of a merge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MergePolicy {
    ZeroHerald,
    /// Accept up to `β m` quanta in the down mode.
    NumberResolved(f64),
}

impl fmt::Display for MergePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MergePolicy::ZeroHerald => write!(f, "ZERO_HERALD"),
            MergePolicy::NumberResolved(b) => write!(f, "NUMBER_RESOLVED({b})"),
        }
    }
}

impl FromStr for MergePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("ZERO_HERALD") {
            return Ok(MergePolicy::ZeroHerald);
        }
        let inner = t
            .strip_prefix("NUMBER_RESOLVED(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| invalid("merge_policy", format!("unknown policy `{s}`")))?;
        let beta: f64 = inner.trim().parse().map_err(|_| invalid("merge_policy", format!("bad β in `{s}`")))?;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(invalid("merge_policy", format!("β = {beta} is outside (0, 1)")));
        }
        Ok(MergePolicy::NumberResolved(beta))
    }
}

/// One level of a merge tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeLevel {
    pub level: u32,
    /// Excitations per input ensemble at this level.
    pub excitations: f64,
    pub success: f64,
    /// Expected repetitions to reach the output of this level.
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergePlan {
    pub target_m: u64,
    pub policy: MergePolicy,
    pub expected_repetitions: f64,
    pub step_log: Vec<MergeLevel>,
    /// Coefficient of `(log₂ m)²` in a quadratic fit of `ln R_m`.
    pub curvature: Option<f64>,
    /// Slope of `ln R_m` against `ln m`.
    pub exponent: Option<f64>,
}

impl MergePlan {
    /// CSV `level,excitations,q,cumulative_R`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,excitations,q,cumulative_R\n");
        for l in &self.step_log {
            let _ = writeln!(out, "{},{},{},{}", l.level, fmt12(l.excitations), fmt12(l.success), fmt12(l.cumulative));
        }
        out
    }
}

fn power_of_two_level(m: u64) -> Result<u32> {
    if m == 0 || !m.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(m));
    }
    Ok(m.trailing_zeros())
}

/// `R_m = (1 + 2 R_{m/2}) / q_{m/2}` with `R_1 = r1`.
pub fn repetition_recursion(m: u64, r1: f64) -> Result<MergePlan> {
    let levels = power_of_two_level(m)?;
    if !(r1.is_finite() && r1 > 0.0) {
        return Err(invalid("r1", format!("{r1} is not a positive cost")));
    }
    let mut r = r1;
    let mut log = Vec::with_capacity(levels as usize);
    for j in 0..levels {
        let k = 1u64 << j;
        let q = doubling_probability(k);
        r = (1.0 + 2.0 * r) / q;
        log.push(MergeLevel { level: j + 1, excitations: k as f64, success: q, cumulative: r });
    }
    let curvature = if levels >= 3 {
        let xs: Vec<f64> = log.iter().map(|l| (l.level) as f64).collect();
        let ys: Vec<f64> = log.iter().map(|l| l.cumulative.ln()).collect();
        crate::optimize::polyfit(&xs, &ys, 2).ok().map(|c| c[2])
    } else {
        None
    };
    Ok(MergePlan { target_m: m, policy: MergePolicy::ZeroHerald, expected_repetitions: r, step_log: log, curvature, exponent: None })
}

/// Which threshold success probability to use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdVariant {
    /// `(2/π) arcsin √β`, the arcsine density integrated to `βm` over `[0, m]`.
    Continuum,
    /// `(2/π) arcsin √(β/2)`, the same density over the full output range
    /// `[0, 2m]` of a merge of two `m`-excitation ensembles.
    PerMode,
    /// Exact 50:50 count distribution of a merge carrying `m` quanta in
    /// total, thresholded at `βm`.
    ExactDiscrete { m: u64 },
    /// Exact count distribution on `|m, m⟩`, thresholded at `βm`.
    ExactPerMode { m: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSuccess {
    pub continuum: f64,
    pub per_mode: f64,
    /// Merge with `m` quanta in total.
    pub exact: f64,
    /// Merge of `|m, m⟩`.
    pub exact_per_mode: f64,
}

/// Exact distribution of the down-mode count after a 50:50 beamsplitter on
/// `|m, m⟩`.
pub fn merge_count_distribution(m: u64) -> Result<Vec<f64>> {
    let cutoff = 2 * m as usize;
    let s = TwoModeState::fock(m as usize, m as usize, cutoff)?;
    Ok(balanced_beamsplitter(&s)?.down_count_distribution())
}

/// Exact down-mode count distribution of a 50:50 merge carrying `total`
/// quanta, split as evenly as possible between the inputs.
pub fn split_count_distribution(total: u64) -> Result<Vec<f64>> {
    let up = total.div_ceil(2) as usize;
    let down = total as usize - up;
    let s = TwoModeState::fock(up, down, total as usize)?;
    Ok(balanced_beamsplitter(&s)?.down_count_distribution())
}

fn cumulative_up_to(dist: &[f64], limit: f64) -> f64 {
    dist.iter().enumerate().filter(|(c, _)| (*c as f64) <= limit + 1e-12).map(|(_, p)| p).sum::<f64>().min(1.0)
}

pub fn threshold_success(m: u64, beta: f64) -> Result<ThresholdSuccess> {
    if m < 2 {
        return Err(invalid("m", "must be at least 2"));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid("beta", format!("{beta} is outside (0, 1]")));
    }
    let limit = beta * m as f64;
    let out = ThresholdSuccess {
        continuum: 2.0 / PI * beta.sqrt().asin(),
        per_mode: 2.0 / PI * (beta / 2.0).sqrt().asin(),
        exact: cumulative_up_to(&split_count_distribution(m)?, limit),
        exact_per_mode: cumulative_up_to(&merge_count_distribution(m)?, limit),
    };
    if (out.exact - out.continuum).abs() > 0.05 {
        log::info!(
            "threshold success at m = {m}, β = {beta}: exact {:.4}, continuum {:.4}, per-mode exact {:.4}, per-mode {:.4}",
            out.exact,
            out.continuum,
            out.exact_per_mode,
            out.per_mode
        );
    }
    Ok(out)
}

fn variant_success(variant: ThresholdVariant, beta: f64, dist: Option<&[f64]>) -> f64 {
    match variant {
        ThresholdVariant::Continuum => 2.0 / PI * beta.sqrt().asin(),
        ThresholdVariant::PerMode => 2.0 / PI * (beta / 2.0).sqrt().asin(),
        ThresholdVariant::ExactDiscrete { m } | ThresholdVariant::ExactPerMode { m } => {
            cumulative_up_to(dist.expect("distribution"), beta * m as f64)
        }
    }
}

fn variant_distribution(variant: ThresholdVariant) -> Result<Option<Vec<f64>>> {
    Ok(match variant {
        ThresholdVariant::ExactDiscrete { m } => Some(split_count_distribution(m)?),
        ThresholdVariant::ExactPerMode { m } => Some(merge_count_distribution(m)?),
        _ => None,
    })
}

/// `log_{2-β}(2/s_β)`.
pub fn threshold_exponent(beta: f64, s: f64) -> f64 {
    (2.0 / s).ln() / (2.0 - beta).ln()
}

/// Expected repetitions under the threshold policy with a continuous level
/// count `j = log_{2-β} m`:
/// `R = (r1 + 1/(2-s)) (2/s)^j - 1/(2-s)`.
pub fn threshold_plan(m: u64, beta: f64, variant: ThresholdVariant, r1: f64) -> Result<MergePlan> {
    if m < 2 {
        return Err(invalid("m", "must be at least 2"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("beta", format!("{beta} is outside (0, 1)")));
    }
    if !(r1.is_finite() && r1 > 0.0) {
        return Err(invalid("r1", format!("{r1} is not a positive cost")));
    }
    let dist = variant_distribution(variant)?;
    let s = variant_success(variant, beta, dist.as_deref());
    let growth = 2.0 - beta;
    let levels = (m as f64).ln() / growth.ln();
    let fixed = 1.0 / (2.0 - s);
    let cost = |j: f64| (r1 + fixed) * (2.0 / s).powf(j) - fixed;
    let mut log = Vec::new();
    let whole = levels.floor() as u32;
    for j in 1..=whole {
        log.push(MergeLevel { level: j, excitations: growth.powi(j as i32 - 1), success: s, cumulative: cost(j as f64) });
    }
    if levels > whole as f64 + 1e-12 {
        log.push(MergeLevel { level: whole + 1, excitations: growth.powf(levels - 1.0), success: s, cumulative: cost(levels) });
    }
    Ok(MergePlan {
        target_m: m,
        policy: MergePolicy::NumberResolved(beta),
        expected_repetitions: cost(levels),
        step_log: log,
        curvature: None,
        exponent: Some(threshold_exponent(beta, s)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaOptimum {
    pub variant: ThresholdVariant,
    pub beta: f64,
    pub exponent: f64,
}

/// Minimizes `log_{2-β}(2/s_β)` over `β ∈ (0.01, 0.9)`.
pub fn optimize_beta(variant: ThresholdVariant) -> Result<BetaOptimum> {
    let dist = variant_distribution(variant)?;
    let best = match variant {
        // The discrete success is a step function; scan the grid of jump points.
        ThresholdVariant::ExactDiscrete { m } | ThresholdVariant::ExactPerMode { m } => {
            let d = dist.as_deref().expect("distribution");
            let mut best = (f64::NAN, f64::INFINITY);
            for c in 0..=(m as usize) {
                let beta = c as f64 / m as f64;
                if !(0.01..=0.9).contains(&beta) {
                    continue;
                }
                let e = threshold_exponent(beta, cumulative_up_to(d, c as f64));
                if e < best.1 {
                    best = (beta, e);
                }
            }
            best
        }
        _ => {
            let e = golden_min(|b| threshold_exponent(b, variant_success(variant, b, None)), 0.01, 0.9, 1e-8)?;
            (e.x, e.value)
        }
    };
    log::info!("optimal threshold for {variant:?}: β = {:.4}, exponent {:.4}", best.0, best.1);
    Ok(BetaOptimum { variant, beta: best.0, exponent: best.1 })
}

/// Two NOON states of `n-1` photons joined by a twofold coincidence herald.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoonDoubling {
    pub n: u64,
    /// `2/(16·4^{n-1}) C(2n-2, n-1)`.
    pub probability: f64,
    /// `1/(8√(π(n-1)))`.
    pub asymptotic: f64,
}

pub fn noon_doubling_success(n: u64) -> Result<NoonDoubling> {
    if n < 2 {
        return Err(invalid("n", "must be at least 2"));
    }
    let k = n - 1;
    let ln_binom = ln_factorial(2 * k) - 2.0 * ln_factorial(k);
    let probability = (2f64.ln() - 16f64.ln() - k as f64 * 4f64.ln() + ln_binom).exp();
    Ok(NoonDoubling { n, probability, asymptotic: 1.0 / (8.0 * (PI * k as f64).sqrt()) })
}
