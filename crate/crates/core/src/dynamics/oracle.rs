//! Brute-force reference for the restricted bases.
//!
//! Every atom is kept as an individual multi-level system. Collective
//! channels are sums of single-atom transition operators, so nothing about
//! Dicke algebra or the few-state bases is assumed. The no-jump part of the
//! master equation is integrated with an embedded Dormand-Prince 5(4) pair
//! over the sector reachable from the initial state, and the result is
//! projected onto the labeled states of the step.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::statespace::{step_structure, EnsembleParams, ProtocolStep};

use super::check_grid;

/// Largest ensemble the oracle accepts.
pub const MAX_ORACLE_ATOMS: u32 = 6;

/// A group of identical atoms.
#[derive(Debug, Clone)]
pub struct Register {
    pub name: &'static str,
    pub atoms: usize,
    pub levels: Vec<&'static str>,
}

/// `Σ_atoms |to⟩⟨from|` on one register.
#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub register: usize,
    pub from: usize,
    pub to: usize,
}

type Config = Vec<u8>;
type Sparse = HashMap<Config, C64>;

/// Atoms of several registers, with the operators that act on them.
#[derive(Debug, Clone, Default)]
pub struct ProductSystem {
    registers: Vec<Register>,
    offsets: Vec<usize>,
    drives: Vec<(f64, Transition)>,
    collective: Vec<(f64, Vec<Transition>)>,
    individual: Vec<(f64, usize, usize)>,
}

impl ProductSystem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a register and returns its index.
    pub fn register(&mut self, name: &'static str, atoms: usize, levels: &[&'static str]) -> usize {
        let offset = self.registers.iter().map(|r| r.atoms).sum();
        self.offsets.push(offset);
        self.registers.push(Register { name, atoms, levels: levels.to_vec() });
        self.registers.len() - 1
    }

    pub fn level(&self, register: usize, name: &str) -> usize {
        self.registers[register]
            .levels
            .iter()
            .position(|l| *l == name)
            .unwrap_or_else(|| panic!("register {} has no level {name}", self.registers[register].name))
    }

    pub fn transition(&self, register: usize, from: &str, to: &str) -> Transition {
        Transition { register, from: self.level(register, from), to: self.level(register, to) }
    }

    /// Coherent term `(Ω/2)(T + T†)`.
    pub fn drive(&mut self, omega: f64, t: Transition) {
        self.drives.push((omega, t));
    }

    /// Collective decay with `L = Σ` of the given transitions.
    pub fn collective_decay(&mut self, rate: f64, ops: Vec<Transition>) {
        self.collective.push((rate, ops));
    }

    /// Independent decay of every atom of `register` that sits in `level`.
    pub fn individual_decay(&mut self, rate: f64, register: usize, level: &str) {
        let l = self.level(register, level);
        self.individual.push((rate, register, l));
    }

    fn total_atoms(&self) -> usize {
        self.registers.iter().map(|r| r.atoms).sum()
    }

    /// Symmetric state of one register with the given number of atoms per
    /// level, as a sparse map over that register's slot.
    fn dicke_register(&self, register: usize, counts: &[usize]) -> Vec<(Vec<u8>, f64)> {
        let r = &self.registers[register];
        assert_eq!(counts.len(), r.levels.len(), "one count per level");
        assert_eq!(counts.iter().sum::<usize>(), r.atoms, "counts must fill the register");
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(r.atoms);
        let mut left = counts.to_vec();
        fn rec(cur: &mut Vec<u8>, left: &mut [usize], n: usize, out: &mut Vec<Vec<u8>>) {
            if cur.len() == n {
                out.push(cur.clone());
                return;
            }
            for l in 0..left.len() {
                if left[l] > 0 {
                    left[l] -= 1;
                    cur.push(l as u8);
                    rec(cur, left, n, out);
                    cur.pop();
                    left[l] += 1;
                }
            }
        }
        let mut configs = Vec::new();
        rec(&mut cur, &mut left, r.atoms, &mut configs);
        let amp = 1.0 / (configs.len() as f64).sqrt();
        for c in configs {
            out.push((c, amp));
        }
        out
    }

    /// Tensor product of symmetric register states (`counts[r]` per register).
    pub fn dicke_product(&self, counts: &[&[usize]]) -> Sparse {
        let mut state: Vec<(Config, f64)> = vec![(Vec::new(), 1.0)];
        for (r, c) in counts.iter().enumerate() {
            let part = self.dicke_register(r, c);
            let mut next = Vec::with_capacity(state.len() * part.len());
            for (prefix, a) in &state {
                for (cfg, b) in &part {
                    let mut full = prefix.clone();
                    full.extend_from_slice(cfg);
                    next.push((full, a * b));
                }
            }
            state = next;
        }
        state.into_iter().map(|(c, a)| (c, C64::new(a, 0.0))).collect()
    }

    fn apply_transition(&self, t: &Transition, psi: &Sparse, coef: C64, out: &mut Sparse) {
        let off = self.offsets[t.register];
        let n = self.registers[t.register].atoms;
        for (cfg, amp) in psi {
            for slot in off..off + n {
                if cfg[slot] as usize == t.from {
                    let mut next = cfg.clone();
                    next[slot] = t.to as u8;
                    *out.entry(next).or_insert(C64::new(0.0, 0.0)) += coef * amp;
                }
            }
        }
    }

    pub fn apply_transition_sum(&self, ops: &[Transition], psi: &Sparse) -> Sparse {
        let mut out = Sparse::new();
        for t in ops {
            self.apply_transition(t, psi, C64::new(1.0, 0.0), &mut out);
        }
        out
    }

    /// `H_eff |cfg⟩` as a sparse vector.
    fn apply_h(&self, cfg: &Config) -> Sparse {
        let mut psi = Sparse::new();
        psi.insert(cfg.clone(), C64::new(1.0, 0.0));
        let mut out = Sparse::new();
        for (omega, t) in &self.drives {
            let c = C64::new(omega / 2.0, 0.0);
            self.apply_transition(t, &psi, c, &mut out);
            let back = Transition { register: t.register, from: t.to, to: t.from };
            self.apply_transition(&back, &psi, c, &mut out);
        }
        for (rate, ops) in &self.collective {
            let lowered = self.apply_transition_sum(ops, &psi);
            let raised: Vec<Transition> =
                ops.iter().map(|t| Transition { register: t.register, from: t.to, to: t.from }).collect();
            let c = C64::new(0.0, -0.5 * rate);
            for t in &raised {
                self.apply_transition(t, &lowered, c, &mut out);
            }
        }
        for &(rate, r, l) in &self.individual {
            let off = self.offsets[r];
            let count = cfg[off..off + self.registers[r].atoms].iter().filter(|&&x| x as usize == l).count();
            if count > 0 {
                *out.entry(cfg.clone()).or_insert(C64::new(0.0, 0.0)) += C64::new(0.0, -0.5 * rate * count as f64);
            }
        }
        out
    }

    /// Dense no-jump generator on the sector reachable from `seed`.
    pub fn reachable_sector(&self, seed: &Sparse) -> Sector {
        let mut index: HashMap<Config, usize> = HashMap::new();
        let mut configs: Vec<Config> = Vec::new();
        let mut queue = VecDeque::new();
        let mut seeds: Vec<&Config> = seed.keys().collect();
        seeds.sort();
        for c in seeds {
            assert_eq!(c.len(), self.total_atoms());
            index.insert(c.clone(), configs.len());
            configs.push(c.clone());
            queue.push_back(c.clone());
        }
        let mut columns: Vec<Sparse> = Vec::new();
        while let Some(cfg) = queue.pop_front() {
            let col = self.apply_h(&cfg);
            let mut keys: Vec<&Config> = col.keys().collect();
            keys.sort();
            for k in keys {
                if !index.contains_key(k) {
                    index.insert(k.clone(), configs.len());
                    configs.push(k.clone());
                    queue.push_back(k.clone());
                }
            }
            columns.push(col);
        }
        let n = configs.len();
        let mut h = DMatrix::zeros(n, n);
        for (j, col) in columns.iter().enumerate() {
            for (cfg, v) in col {
                h[(index[cfg], j)] += *v;
            }
        }
        Sector { index, h }
    }
}

/// The reachable configurations and the generator restricted to them.
#[derive(Debug, Clone)]
pub struct Sector {
    index: HashMap<Config, usize>,
    pub h: DMatrix<C64>,
}

impl Sector {
    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// Embeds a sparse state; amplitudes outside the sector are dropped and
    /// their weight returned alongside.
    pub fn embed(&self, psi: &Sparse) -> (DVector<C64>, f64) {
        let mut v = DVector::zeros(self.dim());
        let mut outside = 0.0;
        for (cfg, a) in psi {
            match self.index.get(cfg) {
                Some(&i) => v[i] += *a,
                None => outside += a.norm_sqr(),
            }
        }
        (v, outside)
    }

    /// `|ψ(t)⟩` on the grid by Dormand-Prince integration.
    pub fn evolve(&self, psi0: &DVector<C64>, grid: &[f64]) -> Result<Vec<DVector<C64>>> {
        let f = |y: &DVector<C64>| -> DVector<C64> { (&self.h * y) * C64::new(0.0, -1.0) };
        dopri5(f, psi0, grid, 1e-12, 1e-14)
    }
}

/// Dormand-Prince 5(4) with standard error control, returning the state at
/// each requested time.
pub fn dopri5<F>(f: F, y0: &DVector<C64>, grid: &[f64], rtol: f64, atol: f64) -> Result<Vec<DVector<C64>>>
where
    F: Fn(&DVector<C64>) -> DVector<C64>,
{
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const BS: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let _ = C; // autonomous system: stage times are not needed

    let mut out = Vec::with_capacity(grid.len());
    let mut y = y0.clone();
    let mut t = grid.first().copied().unwrap_or(0.0);
    let mut k1 = f(&y);
    let mut h: f64 = (0.01 * y.norm() / k1.norm().max(1e-300)).clamp(1e-10, 0.1);
    let mut steps = 0usize;
    for &target in grid {
        while t < target {
            let step = h.min(target - t);
            let mut k: Vec<DVector<C64>> = Vec::with_capacity(7);
            k.push(k1.clone());
            for row in &A[1..7] {
                let mut ys = y.clone();
                for (j, kj) in k.iter().enumerate() {
                    if row[j] != 0.0 {
                        ys.axpy(C64::new(step * row[j], 0.0), kj, C64::new(1.0, 0.0));
                    }
                }
                k.push(f(&ys));
            }
            let mut y5 = y.clone();
            let mut err = DVector::<C64>::zeros(y.len());
            for s in 0..7 {
                y5.axpy(C64::new(step * B[s], 0.0), &k[s], C64::new(1.0, 0.0));
                err.axpy(C64::new(step * (B[s] - BS[s]), 0.0), &k[s], C64::new(1.0, 0.0));
            }
            let mut acc = 0.0;
            for i in 0..y.len() {
                let sc = atol + rtol * y[i].norm().max(y5[i].norm());
                acc += (err[i].norm() / sc).powi(2);
            }
            let e = (acc / y.len().max(1) as f64).sqrt();
            if e <= 1.0 {
                t += step;
                y = y5;
                k1 = k.pop().expect("seven stages");
            }
            let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            // only grow the step from a full (not grid-truncated) step
            if e > 1.0 || step == h {
                h = step * factor;
            }
            steps += 1;
            if steps > 5_000_000 || !h.is_finite() || h < 1e-14 {
                return Err(Error::NonConvergence("Dormand-Prince step size collapsed".into()));
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// No-jump populations computed by the product-space oracle, projected on
/// the labeled states of a step.
#[derive(Debug, Clone)]
pub struct OracleTrajectory {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    /// `populations[t][i]` for restricted basis state `i`.
    pub populations: Vec<Vec<f64>>,
    /// Full norm in the product space at each time.
    pub norms: Vec<f64>,
    /// Number of product configurations that were integrated.
    pub sector_dim: usize,
}

impl OracleTrajectory {
    pub fn population(&self, i: usize) -> Vec<f64> {
        self.populations.iter().map(|p| p[i]).collect()
    }
}

/// Product-space reference for a protocol step.
///
/// `omega` is the drive on the step's laser-coupled transition (ignored by
/// protocol 2 step (e)).
pub fn lindblad_oracle(params: &EnsembleParams, step: ProtocolStep, omega: f64, grid: &[f64]) -> Result<OracleTrajectory> {
    params.validate()?;
    check_grid(grid)?;
    for n in [params.n_target, params.n_detector] {
        if n > MAX_ORACLE_ATOMS {
            return Err(Error::EnsembleTooLarge(n, MAX_ORACLE_ATOMS));
        }
    }
    let structure = step_structure(step, params)?;
    let (system, targets) = build_system(params, step, omega)?;
    let seed = &targets[structure.basis.initial()];
    let sector = system.reachable_sector(seed);
    let embedded: Vec<DVector<C64>> = targets.iter().map(|s| sector.embed(s).0).collect();
    let states = sector.evolve(&embedded[structure.basis.initial()], grid)?;
    let populations = states
        .iter()
        .map(|psi| embedded.iter().map(|b| b.dotc(psi).norm_sqr()).collect())
        .collect();
    let norms = states.iter().map(|psi| psi.norm_squared()).collect();
    Ok(OracleTrajectory {
        labels: structure.basis.labels().to_vec(),
        times: grid.to_vec(),
        populations,
        norms,
        sector_dim: sector.dim(),
    })
}

fn normalized(mut psi: Sparse) -> Sparse {
    let n: f64 = psi.values().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in psi.values_mut() {
        *a /= n;
    }
    psi
}

/// Builds the product system of a step and the sparse images of its
/// labeled basis states, in basis order.
fn build_system(p: &EnsembleParams, step: ProtocolStep, omega: f64) -> Result<(ProductSystem, Vec<Sparse>)> {
    let n = p.n_target as usize;
    let m = p.m as usize;
    let nm = n - m;
    let mut sys = ProductSystem::new();
    match step {
        ProtocolStep::P1StepC => {
            let src = sys.register("src", 1, &["g", "e1", "c"]);
            let tgt = sys.register("tgt", n, &["g", "e1", "c", "s1"]);
            sys.collective_decay(p.gamma_1d, vec![sys.transition(src, "e1", "g"), sys.transition(tgt, "e1", "g")]);
            sys.drive(omega, sys.transition(tgt, "e1", "c"));
            sys.individual_decay(p.gamma_star, src, "e1");
            sys.individual_decay(p.gamma_star, tgt, "e1");
            let psi1 = sys.dicke_product(&[&[0, 1, 0], &[nm, 0, 0, m]]);
            let ground = sys.dicke_product(&[&[1, 0, 0], &[nm, 0, 0, m]]);
            let psi2 = normalized(sys.apply_transition_sum(&[sys.transition(tgt, "g", "e1")], &ground));
            let psi3 = normalized(sys.apply_transition_sum(&[sys.transition(tgt, "g", "c")], &ground));
            Ok((sys, vec![psi1, psi2, psi3]))
        }
        ProtocolStep::P1StepE | ProtocolStep::GeneralZeno(_) => {
            let k = match step {
                ProtocolStep::GeneralZeno(k) => k as usize,
                _ => m,
            };
            let nb = p.n_detector as usize;
            if k + 1 > n {
                return Err(crate::error::invalid("k", "needs k + 1 atoms in ensemble a"));
            }
            let rest = n - k - 1;
            let a = sys.register("a", n, &["0", "1", "2"]);
            let b = sys.register("b", nb, &["0", "1", "2"]);
            sys.collective_decay(p.gamma_1d, vec![sys.transition(a, "2", "1"), sys.transition(b, "2", "1")]);
            sys.drive(omega, sys.transition(b, "0", "2"));
            sys.individual_decay(p.gamma_star, a, "2");
            sys.individual_decay(p.gamma_star, b, "2");
            let psi1 = sys.dicke_product(&[&[rest, k, 1], &[0, nb, 0]]);
            let psi2 = sys.dicke_product(&[&[rest, k + 1, 0], &[0, nb - 1, 1]]);
            let psi3 = sys.dicke_product(&[&[rest, k + 1, 0], &[1, nb - 1, 0]]);
            Ok((sys, vec![psi1, psi2, psi3]))
        }
        ProtocolStep::P2StepE => {
            let tgt = sys.register("tgt", n, &["g", "s", "e2", "mem"]);
            let det = sys.register("det", 1, &["s", "e2"]);
            sys.collective_decay(p.gamma_1d, vec![sys.transition(tgt, "e2", "s"), sys.transition(det, "e2", "s")]);
            sys.individual_decay(p.gamma_star, tgt, "e2");
            sys.individual_decay(p.gamma_star, det, "e2");
            let ground_s = sys.dicke_product(&[&[nm, 0, 0, m], &[1, 0]]);
            let ground_e = sys.dicke_product(&[&[nm, 0, 0, m], &[0, 1]]);
            let psi1 = normalized(sys.apply_transition_sum(&[sys.transition(tgt, "g", "e2")], &ground_s));
            let psi2 = normalized(sys.apply_transition_sum(&[sys.transition(tgt, "g", "s")], &ground_e));
            Ok((sys, vec![psi1, psi2]))
        }
        ProtocolStep::P3StepB => {
            let gamma_s = p
                .gamma_1d_s
                .ok_or_else(|| crate::error::invalid("gamma_1d_s", "protocol 3 needs the second guided-mode rate"))?;
            let src = sys.register("src", 1, &["g", "e", "s"]);
            let tgt = sys.register("tgt", n, &["g", "s", "e", "mem"]);
            let det = sys.register("det", 1, &["g", "s", "e"]);
            sys.collective_decay(p.gamma_1d, vec![sys.transition(src, "e", "g"), sys.transition(tgt, "e", "g")]);
            sys.collective_decay(gamma_s, vec![sys.transition(tgt, "e", "s"), sys.transition(det, "e", "s")]);
            sys.drive(omega, sys.transition(det, "g", "e"));
            for r in [src, tgt, det] {
                sys.individual_decay(p.gamma_star, r, "e");
            }
            let psi1 = sys.dicke_product(&[&[0, 1, 0], &[nm, 0, 0, m], &[0, 1, 0]]);
            let g_s = sys.dicke_product(&[&[1, 0, 0], &[nm, 0, 0, m], &[0, 1, 0]]);
            let g_e = sys.dicke_product(&[&[1, 0, 0], &[nm, 0, 0, m], &[0, 0, 1]]);
            let g_g = sys.dicke_product(&[&[1, 0, 0], &[nm, 0, 0, m], &[1, 0, 0]]);
            let psi2 = normalized(sys.apply_transition_sum(&[sys.transition(tgt, "g", "e")], &g_s));
            let psi3 = normalized(sys.apply_transition_sum(&[sys.transition(tgt, "g", "s")], &g_e));
            let psi4 = normalized(sys.apply_transition_sum(&[sys.transition(tgt, "g", "s")], &g_g));
            Ok((sys, vec![psi1, psi2, psi3, psi4]))
        }
    }
}
