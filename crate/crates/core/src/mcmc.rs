//! Metropolis sampling of the polymer measure at fixed charges.
//!
//! The workhorse move replaces one increment and rigidly translates whichever
//! side of the chain is shorter. An optional window move mixes two proposals
//! on a random window: the fold onto the current argmax sites and a uniform
//! regrowth of the window increments, with both proposal densities evaluated
//! in each direction.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::charges::{derive_seed, rng_from_seed, ChargeVector};
use crate::error::{PolyqError, Result};
use crate::exact::{Observable, PathSample};
use crate::field::occupation_of;
use crate::lattice::{Site, Step, Walk};
use crate::spec::GibbsSpec;
use crate::stats::{batch_means, integrated_autocorrelation_time, Estimate, DEFAULT_BATCHES};
use crate::structure::{argmax_points, d1_strategy, fold_window, optimal_trajectory};

const CHAIN_STREAM: u64 = 0x1000;
const TI_STREAM: u64 = 0x2000;
const WINDOW_MEAN: f64 = 8.0;

/// Acceptance counters per move kind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct MoveStats {
    pub shift_proposed: u64,
    pub shift_accepted: u64,
    pub window_proposed: u64,
    pub window_accepted: u64,
}

/// A proposed single-increment change.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub index: usize,
    pub step: Step,
    pub delta_h: f64,
    /// Change of S_{N-1} − S_0.
    pub delta_end: Site,
    move_prefix: bool,
}

#[derive(Clone, Copy, Debug, Default)]
struct Cell {
    l: u32,
    q: f64,
}

/// One Markov chain at fixed disorder.
pub struct Chain {
    d: usize,
    n: usize,
    beta: f64,
    pull: Vec<f64>,
    q: Vec<f64>,
    integral: bool,
    /// Absolute positions; the walk is `pos[i] - pos[0]`.
    pos: Vec<Site>,
    field: FxHashMap<Site, Cell>,
    h: f64,
    rng: ChaCha8Rng,
    stats: MoveStats,
    scratch: FxHashMap<Site, f64>,
    window_rate: f64,
}

impl Chain {
    pub fn new(spec: &GibbsSpec, q: &ChargeVector, init: &Walk, seed: u64) -> Result<Chain> {
        spec.validate()?;
        q.check_len(spec.n)?;
        if init.len() != spec.n || init.d() != spec.d {
            return Err(PolyqError::InvalidWalk("initial walk does not match the spec".into()));
        }
        let mut c = Chain {
            d: spec.d,
            n: spec.n,
            beta: spec.beta,
            pull: spec.pull_vec(),
            q: q.as_slice().to_vec(),
            integral: q.is_integral(),
            pos: init.positions().to_vec(),
            field: FxHashMap::default(),
            h: 0.0,
            rng: rng_from_seed(seed),
            stats: MoveStats::default(),
            scratch: FxHashMap::default(),
            window_rate: 0.0,
        };
        c.rebuild_field();
        Ok(c)
    }

    /// Probability per sweep of attempting one window move.
    pub fn set_window_rate(&mut self, rate: f64) {
        self.window_rate = rate.clamp(0.0, 1.0);
    }

    fn rebuild_field(&mut self) {
        self.field.clear();
        for (x, &qi) in self.pos.iter().zip(&self.q) {
            let c = self.field.entry(*x).or_default();
            c.l += 1;
            c.q += qi;
        }
        self.h = self.recompute_energy();
    }

    /// H_N recomputed from the field.
    pub fn recompute_energy(&self) -> f64 {
        let mut v: Vec<(&Site, &Cell)> = self.field.iter().collect();
        v.sort_unstable_by(|a, b| a.0.cmp(b.0));
        crate::stats::neumaier_sum(v.into_iter().map(|(_, c)| c.q * c.q))
    }

    pub fn energy(&self) -> f64 {
        self.h
    }

    pub fn stats(&self) -> MoveStats {
        self.stats
    }

    pub fn max_local_time(&self) -> u32 {
        self.field.values().map(|c| c.l).max().unwrap_or(0)
    }

    /// Positions re-anchored at the origin.
    pub fn relative_positions(&self) -> Vec<Site> {
        let base = self.pos[0];
        self.pos.iter().map(|x| x.sub(&base)).collect()
    }

    pub fn walk(&self) -> Walk {
        Walk::from_positions(self.d, self.relative_positions()).expect("chain holds a valid walk")
    }

    fn q_at(&self, x: &Site) -> f64 {
        self.field.get(x).map_or(0.0, |c| c.q)
    }

    /// Candidate replacing increment `i` (S_i → S_{i+1}) by `step`.
    pub fn propose_suffix_shift(&mut self, i: usize, step: Step) -> Candidate {
        assert!(i + 1 < self.n, "increment index out of range");
        let old = self.pos[i + 1].sub(&self.pos[i]);
        let t = step.vector().sub(&old);
        let move_prefix = i + 1 > self.n - i - 1;
        let (range, shift) = if move_prefix {
            (0..i + 1, Site::ORIGIN.sub(&t))
        } else {
            (i + 1..self.n, t)
        };
        let delta_h = if t == Site::ORIGIN {
            0.0
        } else {
            self.scratch.clear();
            for j in range {
                *self.scratch.entry(self.pos[j]).or_insert(0.0) += self.q[j];
            }
            // ΔH = 2 Σ_y J(y) [R(y+s) − R(y)], R = Q − J the charge left behind
            let mut acc = 0.0;
            for (y, &jy) in &self.scratch {
                let ys = y.add(&shift);
                let r_new = self.q_at(&ys) - self.scratch.get(&ys).copied().unwrap_or(0.0);
                let r_old = self.q_at(y) - jy;
                acc += jy * (r_new - r_old);
            }
            2.0 * acc
        };
        Candidate {
            index: i,
            step,
            delta_h,
            delta_end: t,
            move_prefix,
        }
    }

    /// Log Metropolis ratio βΔH/N + λ·ΔS_{N-1}.
    pub fn log_ratio(&self, c: &Candidate) -> f64 {
        self.beta * c.delta_h / self.n as f64 + c.delta_end.dot(&self.pull)
    }

    pub fn apply(&mut self, c: &Candidate) {
        if c.delta_end == Site::ORIGIN {
            return;
        }
        let (range, shift) = if c.move_prefix {
            (0..c.index + 1, Site::ORIGIN.sub(&c.delta_end))
        } else {
            (c.index + 1..self.n, c.delta_end)
        };
        for j in range.clone() {
            let x = self.pos[j];
            let cell = self.field.get_mut(&x).expect("occupied site");
            cell.l -= 1;
            cell.q -= self.q[j];
            if cell.l == 0 {
                self.field.remove(&x);
            }
        }
        for j in range {
            let x = self.pos[j].add(&shift);
            self.pos[j] = x;
            let cell = self.field.entry(x).or_default();
            cell.l += 1;
            cell.q += self.q[j];
        }
        self.h += c.delta_h;
    }

    fn accept(&mut self, log_ratio: f64) -> bool {
        log_ratio >= 0.0 || self.rng.random::<f64>() < log_ratio.exp()
    }

    /// N−1 single-increment updates, then at most one window move.
    pub fn sweep(&mut self) {
        if self.n < 2 {
            return;
        }
        for _ in 0..self.n - 1 {
            let i = self.rng.random_range(0..self.n - 1);
            let s = Step(self.rng.random_range(0..2 * self.d) as u8);
            let c = self.propose_suffix_shift(i, s);
            self.stats.shift_proposed += 1;
            if self.accept(self.log_ratio(&c)) {
                self.apply(&c);
                self.stats.shift_accepted += 1;
            }
        }
        if self.window_rate > 0.0 && self.n >= 3 && self.rng.random::<f64>() < self.window_rate {
            self.window_move();
        }
        let fresh = self.recompute_energy();
        debug_assert!(
            if self.integral {
                fresh == self.h
            } else {
                (fresh - self.h).abs() <= 1e-6 * fresh.abs().max(1.0)
            },
            "cached energy {} drifted from {}",
            self.h,
            fresh
        );
        self.h = fresh;
    }

    fn window_move(&mut self) {
        let n = self.n;
        let p = 1.0 / WINDOW_MEAN;
        let mut m = 1;
        while m < n - 1 && self.rng.random::<f64>() > p {
            m += 1;
        }
        let a = self.rng.random_range(1..=n - m);
        let b = a + m - 1;
        self.stats.window_proposed += 1;

        let cur = self.relative_positions();
        let fold_cur = self.fold_of(&cur, a, b);
        let proposal = if self.rng.random::<bool>() {
            match &fold_cur {
                Some(f) if *f != cur => f.clone(),
                _ => return,
            }
        } else {
            let mut next = cur.clone();
            for k in a - 1..b {
                let s = Step(self.rng.random_range(0..2 * self.d) as u8);
                next[k + 1] = next[k].add(&s.vector());
            }
            let t = next[b].sub(&cur[b]);
            for x in next.iter_mut().skip(b + 1) {
                *x = x.add(&t);
            }
            if next == cur {
                return;
            }
            next
        };
        let regrow_density = ((2 * self.d) as f64).powi(-(m as i32));
        let compatible = same_increments_outside(&cur, &proposal, a, b);
        let forward = 0.5 * f64::from(u8::from(fold_cur.as_ref() == Some(&proposal)))
            + 0.5 * regrow_density * f64::from(u8::from(compatible));
        let fold_back = self.fold_of(&proposal, a, b);
        let backward = 0.5 * f64::from(u8::from(fold_back.as_ref() == Some(&cur)))
            + 0.5 * regrow_density * f64::from(u8::from(compatible));
        if backward == 0.0 {
            return;
        }
        let field = occupation_of(&self.q, &proposal);
        let h_new = field.energy();
        let d_end = proposal[n - 1].sub(&cur[n - 1]);
        let log_r = self.beta * (h_new - self.h) / n as f64
            + d_end.dot(&self.pull)
            + (backward / forward).ln();
        if self.accept(log_r) {
            self.pos = proposal;
            self.rebuild_field();
            self.stats.window_accepted += 1;
        }
    }

    fn fold_of(&self, positions: &[Site], a: usize, b: usize) -> Option<Vec<Site>> {
        let field = occupation_of(&self.q, positions);
        let pts = argmax_points(&field, self.d);
        fold_window(&self.q, positions, &pts, a, b)
    }

    fn observe(&self, obs: &[Observable], out: &mut [Vec<f64>]) {
        let rel = self.relative_positions();
        let s = PathSample {
            d: self.d,
            positions: &rel,
            energy: self.h,
            max_local_time: self.max_local_time(),
        };
        for (o, v) in obs.iter().zip(out.iter_mut()) {
            v.push(o.eval(&s, &self.q));
        }
    }
}

fn same_increments_outside(x: &[Site], y: &[Site], a: usize, b: usize) -> bool {
    (0..x.len() - 1)
        .filter(|&k| k + 1 < a || k > b - 1)
        .all(|k| x[k + 1].sub(&x[k]) == y[k + 1].sub(&y[k]))
}

/// Starting configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// Uniform simple random walk.
    Hot,
    /// The maximal-energy fold (the one-dimensional strategy when d = 1).
    Cold,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BurnIn {
    /// Ten times the integrated autocorrelation time of H from a pilot run.
    Auto,
    Sweeps(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub sweeps: usize,
    pub burn_in: BurnIn,
    pub init: Init,
    /// Window moves per sweep (0 disables them).
    pub window_rate: f64,
    /// Independent chains, merged by averaging.
    pub chains: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sweeps: 10_000,
            burn_in: BurnIn::Auto,
            init: Init::Hot,
            window_rate: 0.0,
            chains: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    pub estimates: Vec<Estimate>,
    pub burn_in: usize,
    /// Integrated autocorrelation time of H over the production run (sweeps).
    pub tau_energy: f64,
    /// τ exceeded sweeps/50 on some chain.
    pub unconverged: bool,
    pub stats: MoveStats,
}

pub fn initial_walk(spec: &GibbsSpec, q: &ChargeVector, init: Init, seed: u64) -> Result<Walk> {
    match init {
        Init::Hot => {
            let mut rng = rng_from_seed(seed);
            let steps = (1..spec.n)
                .map(|_| Step(rng.random_range(0..2 * spec.d) as u8))
                .collect();
            Walk::from_steps(spec.d, steps)
        }
        Init::Cold if spec.d == 1 => Ok(d1_strategy(q, crate::charges::Sign::Plus)),
        Init::Cold => optimal_trajectory(q, spec.d),
    }
}

struct ChainRun {
    series: Vec<Vec<f64>>,
    burn_in: usize,
    tau: f64,
    stats: MoveStats,
}

fn run_chain(
    spec: &GibbsSpec,
    q: &ChargeVector,
    cfg: &RunConfig,
    obs: &[Observable],
    seed: u64,
) -> Result<ChainRun> {
    let init = initial_walk(spec, q, cfg.init, derive_seed(seed, 1))?;
    let mut chain = Chain::new(spec, q, &init, derive_seed(seed, 2))?;
    chain.set_window_rate(cfg.window_rate);
    let burn_in = match cfg.burn_in {
        BurnIn::Sweeps(b) => {
            for _ in 0..b {
                chain.sweep();
            }
            b
        }
        BurnIn::Auto => {
            let pilot = (cfg.sweeps / 10).max(100);
            let mut hs = Vec::with_capacity(pilot);
            for _ in 0..pilot {
                chain.sweep();
                hs.push(chain.energy());
            }
            let target = (10.0 * integrated_autocorrelation_time(&hs)).ceil() as usize;
            for _ in pilot..target {
                chain.sweep();
            }
            pilot.max(target)
        }
    };
    let mut series: Vec<Vec<f64>> = obs.iter().map(|_| Vec::with_capacity(cfg.sweeps)).collect();
    let mut hs = Vec::with_capacity(cfg.sweeps);
    for _ in 0..cfg.sweeps {
        chain.sweep();
        hs.push(chain.energy());
        chain.observe(obs, &mut series);
    }
    Ok(ChainRun {
        series,
        burn_in,
        tau: integrated_autocorrelation_time(&hs),
        stats: chain.stats(),
    })
}

/// Metropolis estimates of Gibbs expectations; one estimate per observable.
pub fn metropolis_run(
    spec: &GibbsSpec,
    q: &ChargeVector,
    cfg: &RunConfig,
    obs: &[Observable],
) -> Result<RunResult> {
    if cfg.sweeps == 0 {
        return Err(PolyqError::OutOfRange("sweeps must be at least 1".into()));
    }
    let chains = cfg.chains.max(1);
    let runs: Vec<Result<ChainRun>> = (0..chains)
        .into_par_iter()
        .map(|c| run_chain(spec, q, cfg, obs, derive_seed(spec.seed, CHAIN_STREAM + c as u64)))
        .collect();
    let runs: Vec<ChainRun> = runs.into_iter().collect::<Result<_>>()?;
    let mut estimates = Vec::with_capacity(obs.len());
    for (k, o) in obs.iter().enumerate() {
        let per: Vec<Estimate> = runs
            .iter()
            .map(|r| batch_means(&r.series[k], DEFAULT_BATCHES, &format!("mcmc:{o:?}")))
            .collect();
        estimates.push(merge_estimates(&per));
    }
    let mut stats = MoveStats::default();
    for r in &runs {
        stats.shift_proposed += r.stats.shift_proposed;
        stats.shift_accepted += r.stats.shift_accepted;
        stats.window_proposed += r.stats.window_proposed;
        stats.window_accepted += r.stats.window_accepted;
    }
    let tau = runs.iter().map(|r| r.tau).fold(0.0, f64::max);
    Ok(RunResult {
        estimates,
        burn_in: runs.iter().map(|r| r.burn_in).max().unwrap_or(0),
        tau_energy: tau,
        unconverged: tau > cfg.sweeps as f64 / 50.0,
        stats,
    })
}

/// Equal-weight average of independent estimates.
pub fn merge_estimates(per: &[Estimate]) -> Estimate {
    let k = per.len() as f64;
    let mean = per.iter().map(|e| e.mean).sum::<f64>() / k;
    let var = per.iter().map(|e| e.stderr * e.stderr).sum::<f64>() / (k * k);
    Estimate {
        mean,
        stderr: var.sqrt(),
        n_samples: per.iter().map(|e| e.n_samples).sum(),
        tau_int: per.iter().map(|e| e.tau_int).fold(0.0, f64::max),
        method: per[0].method.clone(),
    }
}

/// One point of a thermodynamic-integration curve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TiPoint {
    pub beta: f64,
    /// F_N(β) = (1/N) ln Z_N(β).
    pub f: f64,
    pub f_stderr: f64,
    /// E[H/N²] at β.
    pub derivative: Estimate,
    pub extra: Vec<Estimate>,
    pub unconverged: bool,
}

/// F_N on a β grid starting at 0, by trapezoidal integration of E[H/N²].
/// `extra` observables are estimated alongside at each grid point.
pub fn free_energy_ti(
    spec: &GibbsSpec,
    q: &ChargeVector,
    betas: &[f64],
    cfg: &RunConfig,
    extra: &[Observable],
) -> Result<Vec<TiPoint>> {
    if betas.first() != Some(&0.0) {
        return Err(PolyqError::Precondition("the beta grid must start at 0".into()));
    }
    if betas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PolyqError::Precondition("the beta grid must be increasing".into()));
    }
    let mut obs = vec![Observable::EnergyOverN2];
    obs.extend_from_slice(extra);
    let runs: Vec<Result<RunResult>> = betas
        .par_iter()
        .enumerate()
        .map(|(k, &b)| {
            let mut s = spec.with_beta(b);
            s.seed = derive_seed(spec.seed, TI_STREAM + k as u64);
            metropolis_run(&s, q, cfg, &obs)
        })
        .collect();
    let runs: Vec<RunResult> = runs.into_iter().collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(betas.len());
    let mut f = 0.0;
    let mut coef = vec![0.0; betas.len()];
    for (k, r) in runs.iter().enumerate() {
        if k > 0 {
            let h = betas[k] - betas[k - 1];
            f += 0.5 * h * (runs[k - 1].estimates[0].mean + r.estimates[0].mean);
            coef[k - 1] += 0.5 * h;
            coef[k] += 0.5 * h;
        }
        let var: f64 = (0..=k)
            .map(|j| {
                let se = runs[j].estimates[0].stderr;
                coef[j] * coef[j] * se * se
            })
            .sum();
        out.push(TiPoint {
            beta: betas[k],
            f,
            f_stderr: var.sqrt(),
            derivative: r.estimates[0].clone(),
            extra: r.estimates[1..].to_vec(),
            unconverged: r.unconverged,
        });
    }
    Ok(out)
}

/// Stationary frequency of an indicator observable.
pub fn event_frequency(spec: &GibbsSpec, q: &ChargeVector, event: Observable, cfg: &RunConfig) -> Result<Estimate> {
    Ok(metropolis_run(spec, q, cfg, &[event])?.estimates.remove(0))
}

/// Estimate of E[R_α].
pub fn r_alpha(spec: &GibbsSpec, q: &ChargeVector, alpha: f64, cfg: &RunConfig) -> Result<Estimate> {
    event_frequency(spec, q, Observable::RAlpha(alpha), cfg)
}
