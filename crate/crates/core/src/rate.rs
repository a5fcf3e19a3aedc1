//! Large deviations of the local time at the origin.
//!
//! The Green function G(u) = Σ_k e^{-uk} P(S_k = 0) is evaluated by a tensor
//! midpoint rule on the Fourier side, the return-time transform by the
//! renewal identity φ = 1 − 1/G, and the rate by
//! I(ε) = ε·R(g⁻¹(1/ε)) with g = −φ'/φ and R(u) = −ln φ(u) − u·g(u).
//! Exact return and first-return probabilities, a renewal recursion for the
//! tail, and two Monte Carlo tail estimators serve as independent oracles.

use std::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};
use statrs::function::factorial::ln_binomial;

use crate::charges::{derive_seed, rng_from_seed};
use crate::error::{PolyqError, Result};
use crate::lattice::{check_dim, Site, Step};
use crate::pulling::tilted_step_law;
use crate::stats::{iid_estimate, Estimate};

/// Smallest u used by the quadrature; below it the integrand spike is unresolved.
pub const U_MIN: f64 = 1e-4;
const U_MAX: f64 = 60.0;
const MC_BLOCK: usize = 4096;

/// Default points per axis for the midpoint rule.
pub fn default_order(d: usize) -> usize {
    match d {
        1 => 4096,
        2 => 512,
        3 => 96,
        _ => 32,
    }
}

/// Midpoint rule for (2π)^{-d} ∫ f(G(ξ)) dξ with G(ξ) = d⁻¹ Σ cos ξ_j.
/// `m` nodes per axis on (−π, π); the cosine symmetry halves them.
fn torus_mean(d: usize, m: usize, f: &(dyn Fn(f64) -> f64 + Sync)) -> f64 {
    let half = (m / 2).max(1);
    let c: Vec<f64> = (0..half)
        .map(|k| ((k as f64 + 0.5) * PI / half as f64).cos())
        .collect();
    let df = d as f64;
    // outer axis in parallel, inner axes by recursion over partial sums
    fn inner(c: &[f64], depth: usize, partial: f64, df: f64, f: &(dyn Fn(f64) -> f64 + Sync)) -> f64 {
        if depth == 0 {
            return f(partial / df);
        }
        c.iter().map(|&x| inner(c, depth - 1, partial + x, df, f)).sum()
    }
    // summed in index order so the result does not depend on the thread count
    let slices: Vec<f64> = c.par_iter().map(|&x| inner(&c, d - 1, x, df, f)).collect();
    slices.iter().sum::<f64>() / (half as f64).powi(d as i32)
}

fn check_u(u: f64) -> Result<()> {
    if u > 0.0 && u.is_finite() {
        Ok(())
    } else {
        Err(PolyqError::OutOfRange(format!("u must be positive and finite, got {u}")))
    }
}

/// G(u) − 1, integrated directly so that large u keeps its relative precision.
fn green_minus_one(u: f64, d: usize, m: usize) -> f64 {
    let a = (-u).exp();
    torus_mean(d, m, &|g| {
        let x = a * g;
        x / (1.0 - x)
    })
}

/// dG/du.
fn green_derivative(u: f64, d: usize, m: usize) -> f64 {
    let a = (-u).exp();
    -torus_mean(d, m, &|g| {
        let x = a * g;
        x / ((1.0 - x) * (1.0 - x))
    })
}

/// A quadrature value with its Richardson error estimate |Q_M − Q_{2M}|.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

/// Green function Σ_k e^{-uk} P(S_k = 0) with `m` midpoint nodes per axis.
pub fn green_function(u: f64, d: usize, m: usize) -> Result<Quadrature> {
    check_u(u)?;
    check_dim(d)?;
    let a = green_minus_one(u, d, m);
    let b = green_minus_one(u, d, 2 * m);
    Ok(Quadrature {
        value: 1.0 + a,
        error: (a - b).abs(),
    })
}

/// E e^{-uτ₁} with τ₁ the first return time, from φ = 1 − 1/G.
pub fn phi(u: f64, d: usize, m: usize) -> Result<f64> {
    check_u(u)?;
    check_dim(d)?;
    let gm1 = green_minus_one(u, d, m);
    Ok(gm1 / (1.0 + gm1))
}

/// φ'(u) by central differences of the quadrature, step h and h/2 combined
/// by one Richardson step.
pub fn phi_derivative(u: f64, d: usize, m: usize) -> Result<f64> {
    check_u(u)?;
    let h = (1e-4 * u.max(1.0)).min(0.25 * u);
    let cd = |h: f64| -> Result<f64> { Ok((phi(u + h, d, m)? - phi(u - h, d, m)?) / (2.0 * h)) };
    let (a, b) = (cd(h)?, cd(0.5 * h)?);
    Ok((4.0 * b - a) / 3.0)
}

/// φ'(u) = G'(u)/G(u)², with G' integrated in closed form.
pub fn phi_derivative_analytic(u: f64, d: usize, m: usize) -> Result<f64> {
    check_u(u)?;
    check_dim(d)?;
    let g = 1.0 + green_minus_one(u, d, m);
    Ok(green_derivative(u, d, m) / (g * g))
}

/// Green function, φ and φ' tabulated on a grid of u.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReturnTransform {
    pub d: usize,
    pub order: usize,
    pub u: Vec<f64>,
    pub green: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
}

pub fn return_transform(us: &[f64], d: usize, m: usize) -> Result<ReturnTransform> {
    check_dim(d)?;
    let rows: Vec<Result<(f64, f64, f64)>> = us
        .par_iter()
        .map(|&u| {
            let g = green_function(u, d, m)?.value;
            Ok((g, phi(u, d, m)?, phi_derivative(u, d, m)?))
        })
        .collect();
    let mut t = ReturnTransform {
        d,
        order: m,
        u: us.to_vec(),
        green: Vec::with_capacity(us.len()),
        phi: Vec::with_capacity(us.len()),
        dphi: Vec::with_capacity(us.len()),
    };
    for r in rows {
        let (g, p, dp) = r?;
        t.green.push(g);
        t.phi.push(p);
        t.dphi.push(dp);
    }
    Ok(t)
}

/// g(u) = −φ'(u)/φ(u).
pub fn g(u: f64, d: usize, m: usize) -> Result<f64> {
    Ok(-phi_derivative(u, d, m)? / phi(u, d, m)?)
}

/// R(u) = −ln φ(u) − u·g(u).
pub fn r(u: f64, d: usize, m: usize) -> Result<f64> {
    Ok(-phi(u, d, m)?.ln() - u * g(u, d, m)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatePoint {
    pub epsilon: f64,
    pub rate: f64,
    pub u_star: f64,
    /// The root of g(u) = 1/ε lies below `U_MIN` and was clamped there.
    pub extrapolated: bool,
}

/// lim −(1/N) ln P{L_N^0 > εN} for 0 < ε < 1/2.
pub fn rate_i(epsilon: f64, d: usize) -> Result<RatePoint> {
    rate_i_with_order(epsilon, d, default_order(d))
}

pub fn rate_i_with_order(epsilon: f64, d: usize, m: usize) -> Result<RatePoint> {
    check_dim(d)?;
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(PolyqError::OutOfRange(format!(
            "epsilon must lie in (0, 1/2), got {epsilon}; the rate is infinite from 1/2 on"
        )));
    }
    let target = 1.0 / epsilon;
    let point = |u: f64, extrapolated: bool| -> Result<RatePoint> {
        Ok(RatePoint {
            epsilon,
            rate: epsilon * r(u, d, m)?,
            u_star: u,
            extrapolated,
        })
    };
    if g(U_MIN, d, m)? <= target {
        return point(U_MIN, true);
    }
    let mut lo = U_MIN;
    let mut hi = 1.0f64;
    while g(hi, d, m)? > target {
        lo = hi;
        hi *= 2.0;
        if hi > U_MAX {
            return Err(PolyqError::Precondition(format!(
                "no root of g(u) = {target} below u = {U_MAX}"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid, d, m)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    point(0.5 * (lo + hi), false)
}

/// I(ε) on a grid, evaluated in parallel.
pub fn rate_curve(eps: &[f64], d: usize) -> Result<Vec<RatePoint>> {
    eps.par_iter().map(|&e| rate_i(e, d)).collect()
}

/// P(S_k = 0) for k = 0..=kmax.
pub fn return_probabilities(d: usize, kmax: usize) -> Result<Vec<f64>> {
    check_dim(d)?;
    let one: Vec<f64> = (0..=kmax)
        .map(|k| {
            if k % 2 == 1 {
                0.0
            } else {
                (ln_binomial(k as u64, (k / 2) as u64) - k as f64 * std::f64::consts::LN_2).exp()
            }
        })
        .collect();
    // split the k steps between the first axis and the remaining ones
    let mut p = one.clone();
    for dd in 2..=d {
        let share = 1.0 / dd as f64;
        let (la, lb) = (share.ln(), (1.0 - share).ln());
        let prev = p;
        p = (0..=kmax)
            .map(|k| {
                (0..=k)
                    .step_by(2)
                    .filter(|&j| prev[k - j] > 0.0)
                    .map(|j| {
                        let w = ln_binomial(k as u64, j as u64) + j as f64 * la + (k - j) as f64 * lb;
                        w.exp() * one[j] * prev[k - j]
                    })
                    .sum()
            })
            .collect();
    }
    Ok(p)
}

/// P(τ₁ = k) for k = 0..=kmax (entry 0 is zero), from the renewal recursion.
pub fn first_return_probabilities(d: usize, kmax: usize) -> Result<Vec<f64>> {
    let u = return_probabilities(d, kmax)?;
    let mut f = vec![0.0; kmax + 1];
    for n in 1..=kmax {
        let s: f64 = (1..n).map(|k| f[k] * u[n - k]).sum();
        f[n] = (u[n] - s).max(0.0);
    }
    Ok(f)
}

/// Σ_{k≤kmax} e^{-uk} f_k, an independent route to φ.
pub fn phi_series(u: f64, d: usize, kmax: usize) -> Result<f64> {
    check_u(u)?;
    let f = first_return_probabilities(d, kmax)?;
    Ok(f.iter().enumerate().map(|(k, x)| x * (-u * k as f64).exp()).sum())
}

/// Σ_{k≤kmax} e^{-uk} P(S_k = 0).
pub fn green_series(u: f64, d: usize, kmax: usize) -> Result<f64> {
    check_u(u)?;
    let p = return_probabilities(d, kmax)?;
    Ok(p.iter().enumerate().map(|(k, x)| x * (-u * k as f64).exp()).sum())
}

/// Returns needed after time 0 for L_N^0 > εN.
fn returns_needed(n: usize, epsilon: f64) -> usize {
    (epsilon * n as f64).floor().max(0.0) as usize
}

/// Truncated convolution on 0..len with a running log scale.
fn conv_scaled(a: &(Vec<f64>, f64), b: &(Vec<f64>, f64), len: usize) -> (Vec<f64>, f64) {
    let mut c = vec![0.0; len];
    for (i, &x) in a.0.iter().enumerate().filter(|(_, x)| **x != 0.0) {
        for (j, &y) in b.0[..len - i].iter().enumerate() {
            c[i + j] += x * y;
        }
    }
    let s: f64 = c.iter().sum();
    if s > 0.0 {
        for x in &mut c {
            *x /= s;
        }
        (c, a.1 + b.1 + s.ln())
    } else {
        (c, f64::NEG_INFINITY)
    }
}

/// ln P{L_N^0 > εN} for the simple walk, exactly: the m-th return time is a
/// sum of m independent first-return times, convolved by repeated squaring.
pub fn renewal_log_tail(d: usize, n: usize, epsilon: f64) -> Result<f64> {
    if n == 0 {
        return Err(PolyqError::OutOfRange("N must be at least 1".into()));
    }
    let m = returns_needed(n, epsilon);
    if m == 0 {
        return Ok(0.0);
    }
    if 2 * m > n - 1 {
        return Ok(f64::NEG_INFINITY);
    }
    let f = first_return_probabilities(d, n - 1)?;
    let mut base = (f, 0.0);
    let mut delta = vec![0.0; n];
    delta[0] = 1.0;
    let mut acc = (delta, 0.0);
    let mut k = m;
    while k > 0 {
        if k & 1 == 1 {
            acc = conv_scaled(&acc, &base, n);
        }
        k >>= 1;
        if k > 0 {
            base = conv_scaled(&base, &base, n);
        }
    }
    Ok(acc.1 + acc.0.iter().sum::<f64>().ln())
}

/// Plain Monte Carlo tail with a Clopper–Pearson interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailEstimate {
    pub probability: f64,
    pub lower: f64,
    pub upper: f64,
    pub hits: u64,
    pub samples: u64,
    pub confidence: f64,
}

fn clopper_pearson(k: u64, n: u64, conf: f64) -> (f64, f64) {
    let a = 1.0 - conf;
    let lo = if k == 0 {
        0.0
    } else {
        Beta::new(k as f64, (n - k + 1) as f64).map_or(0.0, |b| b.inverse_cdf(a / 2.0))
    };
    let hi = if k == n {
        1.0
    } else {
        Beta::new((k + 1) as f64, (n - k) as f64).map_or(1.0, |b| b.inverse_cdf(1.0 - a / 2.0))
    };
    (lo, hi)
}

/// P{L_N^0 > εN} by direct simulation of the simple walk.
pub fn mc_tail_oracle(d: usize, n: usize, epsilon: f64, samples: u64, seed: u64) -> Result<TailEstimate> {
    mc_tail_oracle_pulled(d, n, epsilon, &vec![0.0; d], samples, seed)
}

/// The same under the tilted step law with force λ.
pub fn mc_tail_oracle_pulled(
    d: usize,
    n: usize,
    epsilon: f64,
    pull: &[f64],
    samples: u64,
    seed: u64,
) -> Result<TailEstimate> {
    check_dim(d)?;
    if n == 0 || samples == 0 {
        return Err(PolyqError::OutOfRange("N and samples must be positive".into()));
    }
    let threshold = epsilon * n as f64;
    // at most ⌈N/2⌉ visits, all at even times
    if n.div_ceil(2) as f64 <= threshold {
        return Ok(TailEstimate {
            probability: 0.0,
            lower: 0.0,
            upper: 0.0,
            hits: 0,
            samples,
            confidence: 1.0,
        });
    }
    let law = tilted_step_law(pull, d)?;
    let uniform = pull.iter().all(|&x| x == 0.0);
    let pick = WeightedIndex::new(law.iter().map(|(_, p)| *p))
        .map_err(|e| PolyqError::Precondition(e.to_string()))?;
    let steps: Vec<Site> = law.iter().map(|(s, _)| s.vector()).collect();
    let blocks = samples.div_ceil(MC_BLOCK as u64);
    let hits: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_from_seed(derive_seed(seed, b));
            let count = (samples - b * MC_BLOCK as u64).min(MC_BLOCK as u64);
            let mut h = 0;
            for _ in 0..count {
                let mut x = Site::ORIGIN;
                let mut visits = 1u32;
                for _ in 1..n {
                    let k = if uniform {
                        rng.random_range(0..2 * d)
                    } else {
                        pick.sample(&mut rng)
                    };
                    x = x.add(&steps[k]);
                    visits += u32::from(x == Site::ORIGIN);
                }
                h += u64::from(visits as f64 > threshold);
            }
            h
        })
        .sum();
    let conf = 0.95;
    let (lower, upper) = clopper_pearson(hits, samples, conf);
    Ok(TailEstimate {
        probability: hits as f64 / samples as f64,
        lower,
        upper,
        hits,
        samples,
        confidence: conf,
    })
}

/// Importance-sampled tail for the simple walk.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TiltedTail {
    pub estimate: Estimate,
    /// Exponential tilt applied to the first-return law.
    pub tilt: f64,
    /// −(1/N) ln of the estimated probability.
    pub rate: f64,
}

/// P{L_N^0 > εN} with first-return times drawn from f_k e^{-uk}/φ_N(u),
/// u chosen so the tilted mean return time is (N−1)/m.
pub fn tilted_tail_estimate(d: usize, n: usize, epsilon: f64, samples: usize, seed: u64) -> Result<TiltedTail> {
    if n < 2 || samples == 0 {
        return Err(PolyqError::OutOfRange("need N ≥ 2 and samples ≥ 1".into()));
    }
    let m = returns_needed(n, epsilon);
    let exact = |p: f64, method: &str| TiltedTail {
        estimate: Estimate::exact(p, method),
        tilt: 0.0,
        rate: -p.ln() / n as f64,
    };
    if m == 0 {
        return Ok(exact(1.0, "trivial"));
    }
    if 2 * m > n - 1 {
        return Ok(exact(0.0, "trivial"));
    }
    let f = first_return_probabilities(d, n - 1)?;
    let support: Vec<usize> = (1..n).filter(|&k| f[k] > 0.0).collect();
    let logf: Vec<f64> = support.iter().map(|&k| f[k].ln()).collect();
    let tilted = |u: f64| -> (Vec<f64>, f64, f64) {
        let lw: Vec<f64> = support.iter().zip(&logf).map(|(&k, lf)| lf - u * k as f64).collect();
        let mx = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = lw.iter().map(|x| (x - mx).exp()).collect();
        let s: f64 = w.iter().sum();
        let mean = support.iter().zip(&w).map(|(&k, x)| k as f64 * x).sum::<f64>() / s;
        (w, mx + s.ln(), mean)
    };
    let target = (n - 1) as f64 / m as f64;
    let (mut lo, mut hi) = (-1.0, 1.0);
    while tilted(hi).2 > target {
        hi *= 2.0;
    }
    while tilted(lo).2 < target {
        lo *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if tilted(mid).2 > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u = 0.5 * (lo + hi);
    let (w, log_phi, _) = tilted(u);
    let pick = WeightedIndex::new(&w).map_err(|e| PolyqError::Precondition(e.to_string()))?;
    let log_base = m as f64 * log_phi;
    let blocks = samples.div_ceil(MC_BLOCK);
    let vals: Vec<f64> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = rng_from_seed(derive_seed(seed, b as u64));
            let count = (samples - b * MC_BLOCK).min(MC_BLOCK);
            let pick = &pick;
            let support = &support;
            (0..count)
                .map(move |_| {
                    let mut t = 0usize;
                    for _ in 0..m {
                        t += support[pick.sample(&mut rng)];
                        if t > n - 1 {
                            return 0.0;
                        }
                    }
                    (log_base + u * t as f64).exp()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let estimate = iid_estimate(&vals, "tilted-return-times");
    let rate = -estimate.mean.ln() / n as f64;
    Ok(TiltedTail {
        estimate,
        tilt: u,
        rate,
    })
}

/// α·ln((1/d) Σ_j cosh λ_j), a lower bound on the rate under the pulled law.
pub fn pulled_rate_bound(pull: &[f64], alpha: f64, d: usize) -> Result<f64> {
    check_dim(d)?;
    if pull.len() != d {
        return Err(PolyqError::LengthMismatch {
            what: "pull vector",
            got: pull.len(),
            expected: d,
        });
    }
    let m = pull.iter().map(|x| x.cosh()).sum::<f64>() / d as f64;
    Ok(alpha * m.ln())
}

/// Expected local time at the origin over N monomers, by simulation.
pub fn mc_mean_local_time(d: usize, n: usize, pull: &[f64], samples: usize, seed: u64) -> Result<Estimate> {
    check_dim(d)?;
    let law = tilted_step_law(pull, d)?;
    let pick = WeightedIndex::new(law.iter().map(|(_, p)| *p))
        .map_err(|e| PolyqError::Precondition(e.to_string()))?;
    let steps: Vec<Site> = law.iter().map(|(s, _): &(Step, f64)| s.vector()).collect();
    let blocks = samples.div_ceil(MC_BLOCK);
    let vals: Vec<f64> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = rng_from_seed(derive_seed(seed, b as u64));
            let count = (samples - b * MC_BLOCK).min(MC_BLOCK);
            let (pick, steps) = (&pick, &steps);
            (0..count)
                .map(move |_| {
                    let mut x = Site::ORIGIN;
                    let mut l = 1u32;
                    for _ in 1..n {
                        x = x.add(&steps[pick.sample(&mut rng)]);
                        l += u32::from(x == Site::ORIGIN);
                    }
                    l as f64
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(iid_estimate(&vals, "mc-local-time"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d1_green_has_closed_form() {
        for &u in &[0.01, 0.3, 1.0, 4.0] {
            let q = green_function(u, 1, 4096).unwrap();
            let exact = 1.0 / (1.0 - (-2.0 * u).exp()).sqrt();
            assert!((q.value - exact).abs() < 1e-9 * exact, "u={u}");
            assert!(q.error < 1e-9 * exact);
        }
    }

    #[test]
    fn large_u_limits() {
        let g = green_function(20.0, 1, 4096).unwrap().value;
        assert!((g - 1.0).abs() < 1e-6);
        for d in 1..=3 {
            let u = 8.0;
            let p = phi(u, d, default_order(d)).unwrap();
            let lead = (-2.0 * u).exp() / (2 * d) as f64;
            assert!((p / lead - 1.0).abs() < 1e-3, "d={d}: {p} vs {lead}");
        }
    }

    #[test]
    fn rejects_bad_u_and_epsilon() {
        assert!(green_function(0.0, 1, 64).is_err());
        assert!(phi(-1.0, 2, 64).is_err());
        assert!(rate_i(0.5, 1).is_err());
        assert!(rate_i(0.0, 1).is_err());
    }

    #[test]
    fn first_returns_match_closed_form_in_d1() {
        let f = first_return_probabilities(1, 60).unwrap();
        for n in 1..=30usize {
            let k = 2 * n;
            let c = (ln_binomial(k as u64, n as u64) - k as f64 * std::f64::consts::LN_2).exp();
            let exact = c / (k as f64 - 1.0);
            assert!((f[k] - exact).abs() < 1e-14, "k={k}");
            assert_eq!(f[k - 1], 0.0);
        }
    }

    #[test]
    fn d2_returns_are_squared_d1_returns() {
        let p1 = return_probabilities(1, 80).unwrap();
        let p2 = return_probabilities(2, 80).unwrap();
        for k in 0..=80 {
            assert!((p2[k] - p1[k] * p1[k]).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn derivative_routes_agree() {
        for &u in &[0.05, 0.5, 2.0] {
            let a = phi_derivative(u, 1, 512).unwrap();
            let b = phi_derivative_analytic(u, 1, 512).unwrap();
            assert!((a - b).abs() < 1e-8, "u={u}: {a} vs {b}");
        }
    }

    #[test]
    fn renewal_tail_matches_brute_force() {
        // L_N^0 for every path of the 1d walk with N = 12
        let n = 12;
        let mut counts = vec![0u64; n + 1];
        for mask in 0u32..(1 << (n - 1)) {
            let mut x = 0i32;
            let mut l = 1;
            for k in 0..n - 1 {
                x += if mask >> k & 1 == 1 { 1 } else { -1 };
                l += usize::from(x == 0);
            }
            counts[l] += 1;
        }
        let total = (1u64 << (n - 1)) as f64;
        for &eps in &[0.1, 0.2, 0.25, 0.3, 0.45] {
            let thr = eps * n as f64;
            let hits: u64 = (0..=n).filter(|&l| l as f64 > thr).map(|l| counts[l]).sum();
            let p = renewal_log_tail(1, n, eps).unwrap().exp();
            assert!((p - hits as f64 / total).abs() < 1e-14, "eps={eps}");
        }
    }

    #[test]
    fn rate_is_monotone_and_small_near_zero() {
        let eps = [0.05, 0.1, 0.2, 0.3, 0.4, 0.45];
        let c = rate_curve(&eps, 1).unwrap();
        for w in c.windows(2) {
            assert!(w[1].rate >= w[0].rate);
        }
        assert!(c[0].rate < 0.01);
        assert!(c.iter().all(|p| !p.extrapolated));
    }

    #[test]
    fn pulled_bound_arithmetic() {
        let b = pulled_rate_bound(&[2f64.ln()], 0.3, 1).unwrap();
        assert!((b - 0.3 * 1.25f64.ln()).abs() < 1e-15);
        assert_eq!(pulled_rate_bound(&[0.0, 0.0], 0.4, 2).unwrap(), 0.0);
    }

    #[test]
    fn mc_tail_trivial_for_even_n_past_half() {
        let t = mc_tail_oracle(1, 10, 0.5, 100, 1).unwrap();
        assert_eq!(t.probability, 0.0);
        assert_eq!(t.upper, 0.0);
    }
}
