//! Exhaustive enumeration over all (2d)^{N-1} walks.
//!
//! The path tree is cut at a fixed prefix depth into shards of roughly 2^16
//! leaves. Shards run in parallel and their accumulators are merged in shard
//! order, so every result is independent of the thread count.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::charges::ChargeVector;
use crate::error::{PolyqError, Result};
use crate::lattice::{check_dim, diameter_of, Site, Step, Walk};
use crate::spec::GibbsSpec;
use crate::stats::Neumaier;
use crate::structure::{detect_events, Events};

pub const DEFAULT_BUDGET: u64 = 1 << 26;
const SHARD_LEAVES_LOG2: f64 = 16.0;
const OVERFLOW_GUARD: f64 = 500.0;

/// Number of walks with N monomers, or an error beyond `budget`.
pub fn path_count(d: usize, n: usize, budget: u64) -> Result<u64> {
    check_dim(d)?;
    if n == 0 {
        return Err(PolyqError::OutOfRange("N must be at least 1".into()));
    }
    let mut paths: u128 = 1;
    for _ in 1..n {
        paths = paths.saturating_mul(2 * d as u128);
    }
    if paths > budget as u128 {
        return Err(PolyqError::BudgetExceeded { paths, budget });
    }
    Ok(paths as u64)
}

/// One complete path as seen by a visitor.
pub struct PathView<'a> {
    pub d: usize,
    pub positions: &'a [Site],
    /// H_N.
    pub energy: f64,
    /// Ĥ_N, accumulated independently of H_N.
    pub interaction: f64,
    pub max_local_time: u32,
    /// Σ_x −½ ln(1 − 2βL^x/N) when an annealed table is attached.
    pub annealed_log: f64,
    local: &'a Grid,
}

impl PathView<'_> {
    pub fn endpoint(&self) -> Site {
        *self.positions.last().unwrap()
    }

    pub fn diameter(&self) -> u32 {
        diameter_of(self.d, self.positions)
    }

    pub fn local_time(&self, x: &Site) -> u32 {
        self.local.l[self.local.idx(x)]
    }

    pub fn walk(&self) -> Walk {
        Walk::from_positions(self.d, self.positions.to_vec()).expect("enumerated paths are walks")
    }

    pub fn sample(&self) -> PathSample<'_> {
        PathSample {
            d: self.d,
            positions: self.positions,
            energy: self.energy,
            max_local_time: self.max_local_time,
        }
    }
}

/// The per-path data an [`Observable`] may look at; positions start at the origin.
pub struct PathSample<'a> {
    pub d: usize,
    pub positions: &'a [Site],
    pub energy: f64,
    pub max_local_time: u32,
}

impl PathSample<'_> {
    pub fn endpoint(&self) -> Site {
        *self.positions.last().unwrap()
    }

    pub fn diameter(&self) -> u32 {
        diameter_of(self.d, self.positions)
    }
}

/// Dense box [-n, n]^d holding running local times and charges.
struct Grid {
    d: usize,
    off: i32,
    stride: [usize; 4],
    l: Vec<u32>,
    q: Vec<f64>,
}

impl Grid {
    fn new(d: usize, n: usize) -> Grid {
        let side = 2 * n + 1;
        let mut stride = [0usize; 4];
        let mut s = 1;
        for st in stride.iter_mut().take(d) {
            *st = s;
            s *= side;
        }
        Grid {
            d,
            off: n as i32,
            stride,
            l: vec![0; s],
            q: vec![0.0; s],
        }
    }

    #[inline]
    fn idx(&self, x: &Site) -> usize {
        let mut k = 0;
        for a in 0..self.d {
            k += (x.0[a] + self.off) as usize * self.stride[a];
        }
        k
    }
}

struct Dfs<'a> {
    d: usize,
    n: usize,
    q: &'a [f64],
    grid: Grid,
    pos: Vec<Site>,
    annealed: Option<&'a [f64]>,
}

#[derive(Clone, Copy)]
struct State {
    h: f64,
    hhat: f64,
    lstar: u32,
    ann: f64,
}

impl<'a> Dfs<'a> {
    fn push(&mut self, x: Site, st: State) -> (State, usize) {
        let k = self.grid.idx(&x);
        let i = self.pos.len();
        let qi = self.q[i];
        let qx = self.grid.q[k];
        let lx = self.grid.l[k];
        self.grid.q[k] = qx + qi;
        self.grid.l[k] = lx + 1;
        self.pos.push(x);
        let ann = match self.annealed {
            Some(t) if st.ann.is_infinite() || t[lx as usize + 1].is_infinite() => f64::INFINITY,
            Some(t) => st.ann + (t[lx as usize + 1] - t[lx as usize]),
            None => 0.0,
        };
        (
            State {
                h: st.h + (2.0 * qx + qi) * qi,
                hhat: st.hhat + qx * qi,
                lstar: st.lstar.max(lx + 1),
                ann,
            },
            k,
        )
    }

    fn pop(&mut self, k: usize) {
        let i = self.pos.len() - 1;
        self.grid.q[k] -= self.q[i];
        self.grid.l[k] -= 1;
        self.pos.pop();
    }

    fn recurse<F: FnMut(&PathView)>(&mut self, st: State, f: &mut F) {
        if self.pos.len() == self.n {
            let view = PathView {
                d: self.d,
                positions: &self.pos,
                energy: st.h,
                interaction: st.hhat,
                max_local_time: st.lstar,
                annealed_log: st.ann,
                local: &self.grid,
            };
            f(&view);
            return;
        }
        let last = *self.pos.last().unwrap();
        for s in Step::all(self.d) {
            let (next, k) = self.push(last.add(&s.vector()), st);
            self.recurse(next, f);
            self.pop(k);
        }
    }
}

/// Enumeration configuration shared by all exact operations.
#[derive(Clone, Debug)]
pub struct Enumerator {
    d: usize,
    n: usize,
    q: Arc<Vec<f64>>,
    annealed: Option<Arc<Vec<f64>>>,
    paths: u64,
}

impl Enumerator {
    pub fn new(d: usize, q: &ChargeVector, budget: u64) -> Result<Self> {
        let n = q.len();
        let paths = path_count(d, n, budget)?;
        Ok(Enumerator {
            d,
            n,
            q: Arc::new(q.as_slice().to_vec()),
            annealed: None,
            paths,
        })
    }

    /// Attaches the table t[k] = −½ ln(1 − 2βk/N) (∞ once the argument is ≤ 0).
    fn with_annealed(mut self, beta: f64) -> Self {
        let n = self.n as f64;
        let t: Vec<f64> = (0..=self.n)
            .map(|k| {
                let a = 1.0 - 2.0 * beta * k as f64 / n;
                if a <= 0.0 {
                    f64::INFINITY
                } else {
                    -0.5 * a.ln()
                }
            })
            .collect();
        self.annealed = Some(Arc::new(t));
        self
    }

    pub fn paths(&self) -> u64 {
        self.paths
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    fn prefix_depth(&self) -> usize {
        let per_step = ((2 * self.d) as f64).log2();
        let total = (self.n - 1) as f64 * per_step;
        if total <= SHARD_LEAVES_LOG2 {
            0
        } else {
            (((total - SHARD_LEAVES_LOG2) / per_step).ceil() as usize).min(self.n - 1)
        }
    }

    /// Runs `visit` over every path; returns one accumulator per shard, in
    /// lexicographic shard order.
    pub fn run<A, M, V>(&self, make: M, visit: V) -> Vec<A>
    where
        A: Send,
        M: Fn() -> A + Sync,
        V: Fn(&mut A, &PathView) + Sync,
    {
        let depth = self.prefix_depth();
        let base = 2 * self.d;
        let shards = base.pow(depth as u32);
        (0..shards)
            .into_par_iter()
            .map(|s| {
                let mut acc = make();
                let mut dfs = Dfs {
                    d: self.d,
                    n: self.n,
                    q: &self.q,
                    grid: Grid::new(self.d, self.n),
                    pos: Vec::with_capacity(self.n),
                    annealed: self.annealed.as_deref().map(|v| v.as_slice()),
                };
                let zero = State {
                    h: 0.0,
                    hhat: 0.0,
                    lstar: 0,
                    ann: 0.0,
                };
                let (mut st, _) = dfs.push(Site::ORIGIN, zero);
                let mut digits = vec![0usize; depth];
                let mut r = s;
                for slot in digits.iter_mut().rev() {
                    *slot = r % base;
                    r /= base;
                }
                for &dgt in &digits {
                    let last = *dfs.pos.last().unwrap();
                    let (next, _) = dfs.push(last.add(&Step(dgt as u8).vector()), st);
                    st = next;
                }
                let mut f = |v: &PathView| visit(&mut acc, v);
                dfs.recurse(st, &mut f);
                acc
            })
            .collect()
    }
}

/// Per-path observables.
#[derive(Clone)]
pub enum Observable {
    /// H_N / N².
    EnergyOverN2,
    /// L*_N / N.
    LstarOverN,
    Diameter,
    /// 1{S_1 = step}.
    FirstStep(Step),
    /// Coordinate `axis` of S_{N-1}.
    EndpointCoord(usize),
    /// 1{S_α}.
    SAlpha(f64),
    /// 1{C_α}.
    CAlpha(f64),
    /// 1{L*_N ≥ x·N}.
    LstarAtLeast(f64),
    /// 1{Diam ≥ L}.
    DiameterAtLeast(u32),
    /// 1{Diam ≥ L and C_α}.
    DiameterAtLeastAndC(u32, f64),
    /// R_α: first monomer in the S_α square, N off S_α.
    RAlpha(f64),
    Custom(Arc<dyn Fn(&PathSample, &[f64]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Observable::EnergyOverN2 => write!(f, "H/N^2"),
            Observable::LstarOverN => write!(f, "L*/N"),
            Observable::Diameter => write!(f, "diameter"),
            Observable::FirstStep(s) => write!(f, "1{{S_1={:?}}}", s),
            Observable::EndpointCoord(a) => write!(f, "S_end[{a}]"),
            Observable::SAlpha(a) => write!(f, "1{{S_{a}}}"),
            Observable::CAlpha(a) => write!(f, "1{{C_{a}}}"),
            Observable::LstarAtLeast(x) => write!(f, "1{{L*>={x}N}}"),
            Observable::DiameterAtLeast(l) => write!(f, "1{{Diam>={l}}}"),
            Observable::DiameterAtLeastAndC(l, a) => write!(f, "1{{Diam>={l},C_{a}}}"),
            Observable::RAlpha(a) => write!(f, "R_{a}"),
            Observable::Custom(_) => write!(f, "custom"),
        }
    }
}

impl Observable {
    pub fn eval(&self, v: &PathSample, q: &[f64]) -> f64 {
        let n = v.positions.len() as f64;
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        match self {
            Observable::EnergyOverN2 => v.energy / (n * n),
            Observable::LstarOverN => v.max_local_time as f64 / n,
            Observable::Diameter => v.diameter() as f64,
            Observable::FirstStep(s) => ind(v.positions.len() > 1 && v.positions[1] == s.vector()),
            Observable::EndpointCoord(a) => v.endpoint().0[*a] as f64,
            Observable::SAlpha(a) => ind(events_of(v, q, *a).map_or(false, |e| e.s_alpha)),
            Observable::CAlpha(a) => ind(events_of(v, q, *a).map_or(false, |e| e.c_alpha)),
            Observable::LstarAtLeast(x) => ind(v.max_local_time as f64 >= x * n),
            Observable::DiameterAtLeast(l) => ind(v.diameter() >= *l),
            Observable::DiameterAtLeastAndC(l, a) => ind(
                v.diameter() >= *l && events_of(v, q, *a).map_or(false, |e| e.c_alpha),
            ),
            Observable::RAlpha(a) => events_of(v, q, *a).map_or(n, |e| e.r_alpha as f64),
            Observable::Custom(f) => f(v, q),
        }
    }
}

fn events_of(v: &PathSample, q: &[f64], alpha: f64) -> Option<Events> {
    let w = Walk::from_positions(v.d, v.positions.to_vec()).ok()?;
    let qv = ChargeVector::new(q.to_vec());
    detect_events(&qv, &w, alpha).ok()
}

/// Exact Gibbs computations at one (spec, q).
#[derive(Clone, Debug)]
pub struct ExactGibbs {
    en: Enumerator,
    beta: f64,
    pull: Vec<f64>,
    log_norm: f64,
    shift: f64,
}

/// ln Σ_e e^{λ·e} over the 2d unit steps; equals ln(2d) at λ = 0.
pub fn log_step_normalizer(pull: &[f64], d: usize) -> f64 {
    let m: f64 = Step::all(d).map(|s| s.vector().dot(pull).exp()).sum();
    m.ln()
}

impl ExactGibbs {
    pub fn new(spec: &GibbsSpec, q: &ChargeVector) -> Result<Self> {
        Self::with_budget(spec, q, DEFAULT_BUDGET)
    }

    pub fn with_budget(spec: &GibbsSpec, q: &ChargeVector, budget: u64) -> Result<Self> {
        spec.validate()?;
        q.check_len(spec.n)?;
        let en = Enumerator::new(spec.d, q, budget)?;
        let pull = spec.pull_vec();
        let log_norm = (spec.n - 1) as f64 * log_step_normalizer(&pull, spec.d);
        let mut g = ExactGibbs {
            en,
            beta: spec.beta,
            pull,
            log_norm,
            shift: 0.0,
        };
        let abs: f64 = q.as_slice().iter().map(|x| x.abs()).sum();
        let crude = spec.beta.abs() * abs * abs / spec.n as f64
            + g.pull.iter().map(|x| x.abs()).sum::<f64>() * (spec.n - 1) as f64;
        if crude > OVERFLOW_GUARD {
            g.shift = g.max_log_weight();
        }
        Ok(g)
    }

    #[inline]
    fn log_weight(&self, v: &PathView) -> f64 {
        self.beta * v.energy / self.en.n as f64 + v.endpoint().dot(&self.pull)
    }

    fn max_log_weight(&self) -> f64 {
        self.en
            .run(|| f64::NEG_INFINITY, |m, v| *m = m.max(self.log_weight(v)))
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn weighted_sums(&self, obs: &[Observable], filter: Option<&(dyn Fn(&PathView) -> bool + Sync)>) -> (Neumaier, Vec<Neumaier>) {
        let q: &[f64] = &self.en.q;
        let shards = self.en.run(
            || (Neumaier::default(), vec![Neumaier::default(); obs.len()]),
            |(z, acc), v| {
                if let Some(f) = filter {
                    if !f(v) {
                        return;
                    }
                }
                let w = (self.log_weight(v) - self.shift).exp();
                z.add(w);
                for (a, o) in acc.iter_mut().zip(obs) {
                    a.add(w * o.eval(&v.sample(), q));
                }
            },
        );
        let mut z = Neumaier::default();
        let mut acc = vec![Neumaier::default(); obs.len()];
        for (sz, sa) in &shards {
            z.merge(sz);
            for (a, b) in acc.iter_mut().zip(sa) {
                a.merge(b);
            }
        }
        (z, acc)
    }

    /// ln Z_N(β) (with the tilt when λ ≠ 0).
    pub fn log_partition(&self) -> f64 {
        let (z, _) = self.weighted_sums(&[], None);
        self.shift + z.value().ln() - self.log_norm
    }

    pub fn partition(&self) -> f64 {
        self.log_partition().exp()
    }

    /// ln Z_N^ε(β): only paths with L*_N ≤ εN contribute (−∞ when none do).
    pub fn truncated_log_partition(&self, eps: f64) -> f64 {
        let n = self.en.n as f64;
        let keep = move |v: &PathView| v.max_local_time as f64 <= eps * n;
        let (z, _) = self.weighted_sums(&[], Some(&keep));
        self.shift + z.value().ln() - self.log_norm
    }

    /// Gibbs expectations of several observables from one pass.
    pub fn expectations(&self, obs: &[Observable]) -> Vec<f64> {
        let (z, acc) = self.weighted_sums(obs, None);
        let z = z.value();
        acc.iter().map(|a| a.value() / z).collect()
    }

    pub fn expectation(&self, obs: &Observable) -> f64 {
        self.expectations(std::slice::from_ref(obs))[0]
    }

    /// ½ Σ_paths |P_N^β(path) − (2d)^{-(N-1)}|.
    pub fn tv_distance(&self) -> f64 {
        let (z, _) = self.weighted_sums(&[], None);
        let z = z.value();
        let uniform = 1.0 / self.en.paths as f64;
        let shards = self.en.run(Neumaier::default, |acc, v| {
            let p = (self.log_weight(v) - self.shift).exp() / z;
            acc.add((p - uniform).abs());
        });
        let mut acc = Neumaier::default();
        for s in &shards {
            acc.merge(s);
        }
        0.5 * acc.value()
    }

    /// Law of S_{N-1}.
    pub fn endpoint_law(&self) -> BTreeMap<Site, f64> {
        let shards = self.en.run(BTreeMap::<Site, Neumaier>::new, |m, v| {
            let w = (self.log_weight(v) - self.shift).exp();
            m.entry(v.endpoint()).or_default().add(w);
        });
        let mut merged: BTreeMap<Site, Neumaier> = BTreeMap::new();
        for s in &shards {
            for (k, a) in s {
                merged.entry(*k).or_default().merge(a);
            }
        }
        let z = {
            let mut t = Neumaier::default();
            for a in merged.values() {
                t.merge(a);
            }
            t.value()
        };
        merged.into_iter().map(|(k, a)| (k, a.value() / z)).collect()
    }

    /// Expectations under the weights exp((β/N)·2Ĥ_N) instead of exp((β/N)·H_N).
    pub fn expectations_interaction(&self, obs: &[Observable]) -> Vec<f64> {
        let q: &[f64] = &self.en.q;
        let n = self.en.n as f64;
        let sumsq: f64 = q.iter().map(|x| x * x).sum();
        let shift = self.shift - self.beta * sumsq / n;
        let shards = self.en.run(
            || (Neumaier::default(), vec![Neumaier::default(); obs.len()]),
            |(z, acc), v| {
                let lw = self.beta * 2.0 * v.interaction / n + v.endpoint().dot(&self.pull);
                let w = (lw - shift).exp();
                z.add(w);
                for (a, o) in acc.iter_mut().zip(obs) {
                    a.add(w * o.eval(&v.sample(), q));
                }
            },
        );
        let mut z = Neumaier::default();
        let mut acc = vec![Neumaier::default(); obs.len()];
        for (sz, sa) in &shards {
            z.merge(sz);
            for (a, b) in acc.iter_mut().zip(sa) {
                a.merge(b);
            }
        }
        acc.iter().map(|a| a.value() / z.value()).collect()
    }

    pub fn enumerator(&self) -> &Enumerator {
        &self.en
    }
}

/// ln Z_N(β) convenience wrapper.
pub fn log_partition(spec: &GibbsSpec, q: &ChargeVector) -> Result<f64> {
    Ok(ExactGibbs::new(spec, q)?.log_partition())
}

pub fn quenched_partition(spec: &GibbsSpec, q: &ChargeVector) -> Result<f64> {
    Ok(ExactGibbs::new(spec, q)?.partition())
}

pub fn truncated_partition(spec: &GibbsSpec, q: &ChargeVector, eps: f64) -> Result<f64> {
    Ok(ExactGibbs::new(spec, q)?.truncated_log_partition(eps).exp())
}

pub fn gibbs_expectation(spec: &GibbsSpec, q: &ChargeVector, obs: &Observable) -> Result<f64> {
    Ok(ExactGibbs::new(spec, q)?.expectation(obs))
}

pub fn tv_distance(spec: &GibbsSpec, q: &ChargeVector) -> Result<f64> {
    Ok(ExactGibbs::new(spec, q)?.tv_distance())
}

pub fn endpoint_law(spec: &GibbsSpec, q: &ChargeVector) -> Result<BTreeMap<Site, f64>> {
    Ok(ExactGibbs::new(spec, q)?.endpoint_law())
}

/// Annealed partition function for Gaussian charges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Annealed {
    Finite(f64),
    Infinite,
}

/// E Z_N(β) = (2d)^{-(N-1)} Σ_paths Π_x (1 − 2βL^x/N)^{-1/2} for standard
/// Gaussian charges.
pub fn annealed_partition_gaussian(d: usize, n: usize, beta: f64, budget: u64) -> Result<Annealed> {
    let zeros = ChargeVector::new(vec![0.0; n]);
    let en = Enumerator::new(d, &zeros, budget)?.with_annealed(beta);
    let shards = en.run(
        || (Neumaier::default(), false),
        |(acc, inf), v| {
            if v.annealed_log.is_infinite() {
                *inf = true;
            } else {
                acc.add(v.annealed_log.exp());
            }
        },
    );
    if shards.iter().any(|(_, inf)| *inf) {
        return Ok(Annealed::Infinite);
    }
    let mut acc = Neumaier::default();
    for (a, _) in &shards {
        acc.merge(a);
    }
    Ok(Annealed::Finite(acc.value() / en.paths() as f64))
}

/// Exact max of H_N over all walks and the first maximiser in enumeration order.
pub fn brute_max_energy(q: &ChargeVector, d: usize, budget: u64) -> Result<(f64, Walk)> {
    let en = Enumerator::new(d, q, budget)?;
    let shards = en.run(
        || (f64::NEG_INFINITY, Vec::new()),
        |(best, wit): &mut (f64, Vec<Site>), v| {
            if v.energy > *best {
                *best = v.energy;
                wit.clear();
                wit.extend_from_slice(v.positions);
            }
        },
    );
    let mut best = f64::NEG_INFINITY;
    let mut wit = Vec::new();
    for (b, w) in shards {
        if b > best {
            best = b;
            wit = w;
        }
    }
    Ok((best, Walk::from_positions(d, wit)?))
}

/// For every site x and level a ∈ 0..=N, the number of walks with L^x > a
/// (simple random walk, exact integer counts).
pub fn local_time_tail_counts(d: usize, n: usize, budget: u64) -> Result<BTreeMap<Site, Vec<u64>>> {
    let zeros = ChargeVector::new(vec![0.0; n]);
    let en = Enumerator::new(d, &zeros, budget)?;
    let shards = en.run(BTreeMap::<Site, Vec<u64>>::new, |m, v| {
        for (i, x) in v.positions.iter().enumerate() {
            if v.positions[..i].contains(x) {
                continue;
            }
            let l = v.local_time(x) as usize;
            let row = m.entry(*x).or_insert_with(|| vec![0; n + 1]);
            for slot in row.iter_mut().take(l) {
                *slot += 1;
            }
        }
    });
    let mut out: BTreeMap<Site, Vec<u64>> = BTreeMap::new();
    for s in shards {
        for (k, row) in s {
            let dst = out.entry(k).or_insert_with(|| vec![0; n + 1]);
            for (a, b) in dst.iter_mut().zip(row) {
                *a += b;
            }
        }
    }
    Ok(out)
}

/// (P_N^β{max H − H ≥ εN²}, e^{N(ln 2d − βε)}).
pub fn max_gap_probability(spec: &GibbsSpec, q: &ChargeVector, eps: f64) -> Result<(f64, f64)> {
    let (hmax, _) = brute_max_energy(q, spec.d, DEFAULT_BUDGET)?;
    let g = ExactGibbs::new(spec, q)?;
    let n = spec.n as f64;
    let obs = Observable::Custom(Arc::new(move |v, _| {
        if hmax - v.energy >= eps * n * n {
            1.0
        } else {
            0.0
        }
    }));
    let p = g.expectation(&obs);
    let bound = (n * (((2 * spec.d) as f64).ln() - spec.beta * eps)).exp();
    Ok((p, bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charges::ChargeLaw;

    fn spec(d: usize, n: usize, beta: f64) -> GibbsSpec {
        GibbsSpec::new(d, n, beta, ChargeLaw::Rademacher, 42).unwrap()
    }

    #[test]
    fn beta_zero_gives_one() {
        let s = spec(2, 6, 0.0);
        let q = s.charges().unwrap();
        assert!((quenched_partition(&s, &q).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_monomer() {
        let s = spec(3, 1, 0.7);
        let q = ChargeVector::new(vec![-1.5]);
        let z = quenched_partition(&s, &q).unwrap();
        assert!((z - (0.7f64 * 2.25).exp()).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let q = ChargeVector::new(vec![1.0; 12]);
        assert!(matches!(
            Enumerator::new(2, &q, 1000),
            Err(PolyqError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn sharding_matches_single_shard() {
        // d=1, N=20 gives 2^19 leaves and a non-trivial prefix split
        let s = spec(1, 20, 1.3);
        let q = s.charges().unwrap();
        let g = ExactGibbs::new(&s, &q).unwrap();
        assert!(g.en.prefix_depth() > 0);
        let mut z = Neumaier::default();
        let mut dfs = Dfs {
            d: 1,
            n: 20,
            q: q.as_slice(),
            grid: Grid::new(1, 20),
            pos: Vec::new(),
            annealed: None,
        };
        let st = State { h: 0.0, hhat: 0.0, lstar: 0, ann: 0.0 };
        let (st, _) = dfs.push(Site::ORIGIN, st);
        dfs.recurse(st, &mut |v: &PathView| z.add((1.3 * v.energy / 20.0).exp()));
        let direct = z.value().ln() - 19.0 * 2f64.ln();
        assert!((g.log_partition() - direct).abs() < 1e-12);
    }

    #[test]
    fn first_step_uniform_at_beta_zero() {
        let s = spec(2, 5, 0.0);
        let q = s.charges().unwrap();
        let p = gibbs_expectation(&s, &q, &Observable::FirstStep(Step(0))).unwrap();
        assert!((p - 0.25).abs() < 1e-14);
    }

    #[test]
    fn truncation_limits() {
        let s = spec(2, 7, 1.0);
        let q = s.charges().unwrap();
        let z = quenched_partition(&s, &q).unwrap();
        let full = truncated_partition(&s, &q, 8.0 / 14.0).unwrap();
        assert!((full - z).abs() < 1e-12 * z);
        assert_eq!(truncated_partition(&s, &q, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn overflow_guard_keeps_results_finite() {
        let s = spec(2, 6, 5000.0);
        let q = s.charges().unwrap();
        let g = ExactGibbs::new(&s, &q).unwrap();
        assert!(g.shift > 0.0);
        let lz = g.log_partition();
        assert!(lz.is_finite());
        let e = g.expectation(&Observable::EnergyOverN2);
        let (hmax, _) = brute_max_energy(&q, 2, DEFAULT_BUDGET).unwrap();
        assert!((e - hmax / 36.0).abs() < 1e-9);
    }

    #[test]
    fn annealed_trivial_cases() {
        assert_eq!(annealed_partition_gaussian(2, 4, 1.0, DEFAULT_BUDGET).unwrap(), Annealed::Infinite);
        match annealed_partition_gaussian(2, 5, 0.0, DEFAULT_BUDGET).unwrap() {
            Annealed::Finite(v) => assert!((v - 1.0).abs() < 1e-14),
            Annealed::Infinite => panic!(),
        }
    }

    #[test]
    fn tail_counts_small_case() {
        // d=1, N=3: paths ++, +-, -+, --; origin visited twice on +- and -+
        let t = local_time_tail_counts(1, 3, DEFAULT_BUDGET).unwrap();
        assert_eq!(t[&Site::ORIGIN][0], 4);
        assert_eq!(t[&Site::ORIGIN][1], 2);
        assert_eq!(t[&Site::ORIGIN][2], 0);
    }
}
