//! Charge laws, charge vectors and the moment constants derived from a law.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::function::erf::erfc;
use std::fmt;
use std::str::FromStr;

use crate::error::{PolyqError, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Distribution of a single charge. Every law has mean 0 and variance 1.
#[derive(Clone, Debug, PartialEq)]
pub enum ChargeLaw {
    Rademacher,
    Gaussian,
    /// Uniform on [-√3, √3].
    UniformSymmetric,
    Discrete(DiscreteLaw),
}

/// A finitely supported law, normalised to mean 0 and variance 1.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteLaw {
    values: Vec<f64>,
    probs: Vec<f64>,
    raw: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(PolyqError::InvalidLaw(
                "values and probabilities must be non-empty and of equal length".into(),
            ));
        }
        if values.iter().chain(&probs).any(|x| !x.is_finite()) {
            return Err(PolyqError::InvalidLaw("non-finite parameter".into()));
        }
        if probs.iter().any(|&p| p < 0.0) {
            return Err(PolyqError::InvalidLaw("negative probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(PolyqError::InvalidLaw(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let mean: f64 = values.iter().zip(&probs).map(|(v, p)| v * p).sum();
        let var: f64 = values
            .iter()
            .zip(&probs)
            .map(|(v, p)| p * (v - mean) * (v - mean))
            .sum();
        if var <= 0.0 {
            return Err(PolyqError::InvalidLaw("variance is zero".into()));
        }
        let sd = var.sqrt();
        let normalized = values.iter().map(|v| (v - mean) / sd).collect();
        Ok(DiscreteLaw {
            values: normalized,
            probs,
            raw: values,
        })
    }

    /// Support points after normalisation.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.values.iter().zip(&self.probs).map(|(&v, &p)| p * f(v)).sum()
    }
}

impl ChargeLaw {
    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        Ok(ChargeLaw::Discrete(DiscreteLaw::new(values, probs)?))
    }

    /// True when every draw is an integer, so energies are exact in f64.
    pub fn is_integral(&self) -> bool {
        match self {
            ChargeLaw::Rademacher => true,
            ChargeLaw::Discrete(l) => l.values.iter().all(|v| v.fract() == 0.0),
            _ => false,
        }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ChargeLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            ChargeLaw::Gaussian => rng.sample(StandardNormal),
            ChargeLaw::UniformSymmetric => rng.random_range(-SQRT3..SQRT3),
            ChargeLaw::Discrete(l) => {
                let idx = WeightedIndex::new(&l.probs).expect("validated weights");
                l.values[idx.sample(rng)]
            }
        }
    }

    /// E e^{-c|q|} for c ≥ 0.
    pub fn laplace_abs(&self, c: f64) -> f64 {
        match self {
            ChargeLaw::Rademacher => (-c).exp(),
            ChargeLaw::Gaussian => {
                // 2 e^{c²/2} Φ̄(c) = erfcx(c/√2)
                erfcx(c / std::f64::consts::SQRT_2)
            }
            ChargeLaw::UniformSymmetric => {
                let a = c * SQRT3;
                if a < 1e-8 {
                    1.0 - a / 2.0
                } else {
                    -(-a).exp_m1() / a
                }
            }
            ChargeLaw::Discrete(l) => l.expect(|v| (-c * v.abs()).exp()),
        }
    }

    /// ln E e^{tq}.
    pub fn log_mgf(&self, t: f64) -> f64 {
        match self {
            ChargeLaw::Rademacher => t.abs() + (-2.0 * t.abs()).exp().ln_1p() - std::f64::consts::LN_2,
            ChargeLaw::Gaussian => t * t / 2.0,
            ChargeLaw::UniformSymmetric => {
                let a = (t * SQRT3).abs();
                if a < 1e-6 {
                    a * a / 6.0
                } else {
                    // ln(sinh a / a)
                    a + (-(-2.0 * a).exp_m1()).ln() - std::f64::consts::LN_2 - a.ln()
                }
            }
            ChargeLaw::Discrete(l) => {
                let m = l
                    .values
                    .iter()
                    .zip(&l.probs)
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(&v, _)| t * v)
                    .fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = l.expect(|v| (t * v - m).exp());
                m + s.ln()
            }
        }
    }

    /// P(q^ε > s) for s ≥ 0, where q^+ = max(q,0) and q^- = max(-q,0).
    fn tail_signed(&self, sign: Sign, s: f64) -> f64 {
        match self {
            ChargeLaw::Rademacher => {
                if s < 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            ChargeLaw::Gaussian => 0.5 * erfc(s / std::f64::consts::SQRT_2),
            ChargeLaw::UniformSymmetric => ((SQRT3 - s) / (2.0 * SQRT3)).max(0.0),
            ChargeLaw::Discrete(l) => l.expect(|v| f64::from(u8::from(sign.apply(v) > s))),
        }
    }

    fn signed_mean(&self, sign: Sign) -> f64 {
        match self {
            ChargeLaw::Rademacher => 0.5,
            ChargeLaw::Gaussian => 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            ChargeLaw::UniformSymmetric => SQRT3 / 4.0,
            ChargeLaw::Discrete(l) => l.expect(|v| sign.apply(v).max(0.0)),
        }
    }

    /// E min(m_ε q^ε, m_ε' q'^ε') for independent q, q'.
    fn pair_min(&self, a: Sign, b: Sign, ma: f64, mb: f64) -> f64 {
        if ma <= 0.0 || mb <= 0.0 {
            return 0.0;
        }
        match self {
            ChargeLaw::Discrete(l) => {
                let mut acc = 0.0;
                for (&v, &p) in l.values.iter().zip(&l.probs) {
                    for (&w, &r) in l.values.iter().zip(&l.probs) {
                        acc += p * r * (ma * a.apply(v).max(0.0)).min(mb * b.apply(w).max(0.0));
                    }
                }
                acc
            }
            ChargeLaw::Rademacher => 0.5 * 0.5 * ma.min(mb),
            _ => {
                // ∫_0^∞ P(m_a q^a > t) P(m_b q^b > t) dt
                let upper = match self {
                    ChargeLaw::UniformSymmetric => SQRT3 * ma.min(mb),
                    _ => 40.0 * ma.min(mb),
                };
                let f = |t: f64| self.tail_signed(a, t / ma) * self.tail_signed(b, t / mb);
                gauss_legendre(f, 0.0, upper, 400)
            }
        }
    }

    fn name(&self) -> String {
        match self {
            ChargeLaw::Rademacher => "rademacher".into(),
            ChargeLaw::Gaussian => "gaussian".into(),
            ChargeLaw::UniformSymmetric => "uniform".into(),
            ChargeLaw::Discrete(l) => {
                let v: Vec<String> = l.raw.iter().map(|x| format!("{x}")).collect();
                let p: Vec<String> = l.probs.iter().map(|x| format!("{x}")).collect();
                format!("discrete:{};{}", v.join(","), p.join(","))
            }
        }
    }
}

impl fmt::Display for ChargeLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Accepts `rademacher`, `gaussian`, `uniform` and `discrete:v1,v2,...;p1,p2,...`.
impl FromStr for ChargeLaw {
    type Err = PolyqError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "rademacher" => return Ok(ChargeLaw::Rademacher),
            "gaussian" | "normal" => return Ok(ChargeLaw::Gaussian),
            "uniform" | "uniform-symmetric" => return Ok(ChargeLaw::UniformSymmetric),
            _ => {}
        }
        let rest = s
            .strip_prefix("discrete:")
            .ok_or_else(|| PolyqError::InvalidLaw(format!("unknown law `{s}`")))?;
        let (vals, probs) = rest
            .split_once(';')
            .ok_or_else(|| PolyqError::InvalidLaw("expected `values;probabilities`".into()))?;
        let parse = |t: &str| -> Result<Vec<f64>> {
            t.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| PolyqError::InvalidLaw(format!("bad number `{x}`")))
                })
                .collect()
        };
        ChargeLaw::discrete(parse(vals)?, parse(probs)?)
    }
}

impl Serialize for ChargeLaw {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for ChargeLaw {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Sign label ε ∈ {+, -}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    /// ε·x.
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Sign::Plus => x,
            Sign::Minus => -x,
        }
    }

    /// Sign of a charge, with zero counted as `+`.
    pub fn of(x: f64) -> Sign {
        if x < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    /// q^ε = max(εq, 0).
    pub fn part(self, x: f64) -> f64 {
        self.apply(x).max(0.0)
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// A frozen realisation q_0, ..., q_{N-1}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChargeVector {
    q: Vec<f64>,
    #[serde(skip)]
    integral: bool,
}

impl ChargeVector {
    pub fn new(q: Vec<f64>) -> Self {
        let integral = q.iter().all(|x| x.fract() == 0.0 && x.abs() < 1e6);
        ChargeVector { q, integral }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// All charges are small integers; sums and energies are then exact.
    pub fn is_integral(&self) -> bool {
        self.integral
    }

    pub fn sum_sq(&self) -> f64 {
        crate::stats::neumaier_sum(self.q.iter().map(|x| x * x))
    }

    /// Charges q_{start}, ..., q_{end-1}.
    pub fn slice(&self, start: usize, end: usize) -> ChargeVector {
        ChargeVector::new(self.q[start..end].to_vec())
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.q.len() != n {
            return Err(PolyqError::LengthMismatch {
                what: "charge vector",
                got: self.q.len(),
                expected: n,
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for ChargeVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.q[i]
    }
}

/// Deterministic RNG for a seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent seed for sub-stream `stream` of `seed` (splitmix64 finaliser).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sample_charges(law: &ChargeLaw, n: usize, seed: u64) -> Result<ChargeVector> {
    if n == 0 {
        return Err(PolyqError::OutOfRange("n must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let q = (0..n).map(|_| law.sample_one(&mut rng)).collect();
    Ok(ChargeVector::new(q))
}

/// Moment constants of a charge law.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChargeMoments {
    pub kappa: f64,
    /// False when κ comes from the grid search rather than a closed form.
    pub kappa_exact: bool,
    pub mean_plus: f64,
    pub mean_minus: f64,
    pub gamma: f64,
    pub lambda: f64,
    #[serde(skip)]
    law: ChargeLaw,
}

impl ChargeMoments {
    pub fn law(&self) -> &ChargeLaw {
        &self.law
    }

    /// β_α = ln(2d)·max(8/((1-α)γ), 4/λ).
    pub fn beta_alpha(&self, alpha: f64, d: usize) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(PolyqError::OutOfRange(format!("alpha={alpha} not in (0,1)")));
        }
        crate::lattice::check_dim(d)?;
        if self.gamma <= 0.0 || self.lambda <= 0.0 {
            return Err(PolyqError::Degenerate(
                "beta_alpha is infinite because gamma or lambda vanishes".into(),
            ));
        }
        let l2d = ((2 * d) as f64).ln();
        Ok(l2d * (8.0 / ((1.0 - alpha) * self.gamma)).max(4.0 / self.lambda))
    }

    /// ρ = 2d·E e^{-βα√γ|q|}.
    pub fn rho(&self, beta: f64, alpha: f64, d: usize) -> f64 {
        let c = beta * alpha * self.gamma.sqrt();
        (2 * d) as f64 * self.law.laplace_abs(c)
    }

    /// (Eq⁺)² + (Eq⁻)².
    pub fn signed_square_sum(&self) -> f64 {
        self.mean_plus * self.mean_plus + self.mean_minus * self.mean_minus
    }
}

/// Computes κ, Eq^±, γ and λ for a law.
pub fn charge_moments(law: &ChargeLaw) -> Result<ChargeMoments> {
    let (kappa, kappa_exact) = match law {
        ChargeLaw::Rademacher | ChargeLaw::Gaussian | ChargeLaw::UniformSymmetric => (1.0, true),
        ChargeLaw::Discrete(_) => (kappa_grid(law)?, false),
    };
    let mean_plus = law.signed_mean(Sign::Plus);
    let mean_minus = law.signed_mean(Sign::Minus);
    let gamma = (mean_plus * mean_plus).min(mean_minus * mean_minus);
    let m = |s: Sign| match s {
        Sign::Plus => mean_plus,
        Sign::Minus => mean_minus,
    };
    let mut lambda = f64::INFINITY;
    for a in Sign::BOTH {
        for b in Sign::BOTH {
            lambda = lambda.min(law.pair_min(a, b, m(a), m(b)));
        }
    }
    Ok(ChargeMoments {
        kappa,
        kappa_exact,
        mean_plus,
        mean_minus,
        gamma,
        lambda,
        law: law.clone(),
    })
}

/// sup over t ∈ ±[1e-3, 50] (log grid) of 2 ln E e^{tq} / t².
fn kappa_grid(law: &ChargeLaw) -> Result<f64> {
    const POINTS: usize = 2000;
    let (lo, hi) = (1e-3f64.ln(), 50f64.ln());
    let mut best: f64 = 0.0;
    for k in 0..POINTS {
        let t = (lo + (hi - lo) * k as f64 / (POINTS - 1) as f64).exp();
        for s in [t, -t] {
            let v = 2.0 * law.log_mgf(s) / (s * s);
            if !v.is_finite() {
                return Err(PolyqError::KappaUnbounded);
            }
            best = best.max(v);
        }
    }
    Ok(best)
}

/// Scaled complementary error function e^{x²} erfc(x) for x ≥ 0.
pub(crate) fn erfcx(x: f64) -> f64 {
    if x < 25.0 {
        (x * x).exp() * erfc(x)
    } else {
        let x2 = x * x;
        let s = 1.0 - 0.5 / x2 + 0.75 / (x2 * x2) - 1.875 / (x2 * x2 * x2);
        s / (x * std::f64::consts::PI.sqrt())
    }
}

/// Composite Gauss–Legendre (5 points per panel).
pub(crate) fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        0.538_469_310_105_683_1,
        -0.538_469_310_105_683_1,
        0.906_179_845_938_664,
        -0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in X.iter().zip(W.iter()) {
            acc += w * f(mid + 0.5 * h * x);
        }
    }
    acc * 0.5 * h
}
