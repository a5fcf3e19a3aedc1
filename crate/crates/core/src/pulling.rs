//! The walk under a constant pulling force λ and bounds on β_c(λ).

use serde::Serialize;

use crate::charges::{charge_moments, ChargeLaw, ChargeVector};
use crate::error::{PolyqError, Result};
use crate::exact::{ExactGibbs, DEFAULT_BUDGET};
use crate::lattice::{check_dim, Step};
use crate::mcmc::{free_energy_ti, RunConfig, TiPoint};
use crate::rate::pulled_rate_bound;
use crate::spec::GibbsSpec;
use crate::stats::Estimate;

fn check_pull(pull: &[f64], d: usize) -> Result<()> {
    check_dim(d)?;
    if pull.len() != d {
        return Err(PolyqError::LengthMismatch {
            what: "pull vector",
            got: pull.len(),
            expected: d,
        });
    }
    if pull.iter().any(|x| !x.is_finite()) {
        return Err(PolyqError::OutOfRange("pull must be finite".into()));
    }
    Ok(())
}

/// E e^{λ·S₁} = (1/d) Σ_j cosh λ_j.
pub fn step_mgf(pull: &[f64]) -> f64 {
    pull.iter().map(|x| x.cosh()).sum::<f64>() / pull.len() as f64
}

/// P_λ{S₁ = e} = e^{λ·e} / Σ_e' e^{λ·e'} for each of the 2d unit steps.
pub fn tilted_step_law(pull: &[f64], d: usize) -> Result<Vec<(Step, f64)>> {
    check_pull(pull, d)?;
    let w: Vec<(Step, f64)> = Step::all(d).map(|s| (s, s.vector().dot(pull).exp())).collect();
    let z: f64 = w.iter().map(|(_, x)| x).sum();
    Ok(w.into_iter().map(|(s, x)| (s, x / z)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Mcmc,
}

/// ln Z_N(β, λ) = ln E_λ e^{βH_N/N}.
#[derive(Clone, Debug, Serialize)]
pub struct TiltedPartition {
    pub log_z: Estimate,
    /// The integration curve, when sampled.
    pub curve: Vec<TiPoint>,
}

/// Exact: enumeration with the tilt. Mcmc: integration of E_λ[H/N²] in β
/// from 0 on `grid` points, using Z_N(0, λ) = 1.
pub fn tilted_partition(
    spec: &GibbsSpec,
    q: &ChargeVector,
    method: Method,
    cfg: &RunConfig,
    grid: usize,
) -> Result<TiltedPartition> {
    spec.validate()?;
    match method {
        Method::Exact => {
            let g = ExactGibbs::with_budget(spec, q, DEFAULT_BUDGET)?;
            Ok(TiltedPartition {
                log_z: Estimate::exact(g.log_partition(), "exact"),
                curve: Vec::new(),
            })
        }
        Method::Mcmc => {
            let k = grid.max(2);
            let betas: Vec<f64> = (0..k).map(|i| spec.beta * i as f64 / (k - 1) as f64).collect();
            if spec.beta <= 0.0 {
                return Err(PolyqError::Precondition("sampled partition needs beta > 0".into()));
            }
            let curve = free_energy_ti(spec, q, &betas, cfg, &[])?;
            let last = curve.last().expect("nonempty grid");
            let n = spec.n as f64;
            let log_z = Estimate {
                mean: n * last.f,
                stderr: n * last.f_stderr,
                n_samples: curve.iter().map(|p| p.derivative.n_samples).sum(),
                tau_int: curve.iter().map(|p| p.derivative.tau_int).fold(0.0, f64::max),
                method: "thermodynamic-integration".into(),
            };
            Ok(TiltedPartition { log_z, curve })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BetaCBounds {
    /// None when κ is unbounded.
    pub lower: Option<f64>,
    pub upper: f64,
    pub kappa: f64,
    pub note: &'static str,
}

/// Lower: κ^{-1/2}·max(√(ln E e^{λ·S₁}/s), κ^{-1/2}); upper:
/// (2 ln(2d)(1 + 1{d=1}) + 4‖λ‖_∞)/s, with s = (Eq⁺)² + (Eq⁻)².
pub fn beta_c_bounds(pull: &[f64], law: &ChargeLaw, d: usize) -> Result<BetaCBounds> {
    check_pull(pull, d)?;
    let m = charge_moments(law)?;
    let s = m.signed_square_sum();
    if s <= 0.0 {
        return Err(PolyqError::Degenerate("Eq⁺ and Eq⁻ both vanish".into()));
    }
    let sup = pull.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let factor = if d == 1 { 2.0 } else { 1.0 };
    let upper = (2.0 * ((2 * d) as f64).ln() * factor + 4.0 * sup) / s;
    let lower = m.kappa.is_finite().then(|| {
        let k = m.kappa.powf(-0.5);
        k * (step_mgf(pull).ln() / s).sqrt().max(k)
    });
    Ok(BetaCBounds {
        lower,
        upper,
        kappa: m.kappa,
        note: "lower bound uses the nested maximum with κ^{-1/2} applied twice, as written",
    })
}

/// Upper bound on β_c(λ+μ) − β_c(λ): 2‖μ‖_∞·β_c / I_λ(1/(2κβ_c)), with the
/// rate replaced by its lower bound α·ln E e^{λ·S₁}. Infinite at λ = 0.
pub fn lipschitz_gap(pull: &[f64], mu: &[f64], beta_c: f64, kappa: f64) -> Result<f64> {
    let d = pull.len();
    check_pull(pull, d)?;
    check_pull(mu, d)?;
    if !(beta_c > 0.0 && kappa > 0.0) {
        return Err(PolyqError::OutOfRange("beta_c and kappa must be positive".into()));
    }
    let sup = mu.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if sup == 0.0 {
        return Ok(0.0);
    }
    let rate = pulled_rate_bound(pull, 1.0 / (2.0 * kappa * beta_c), d)?;
    if rate <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 * sup * beta_c / rate)
}

/// Grid bracket for β_c: the first β whose sampled F_N(β) − β/N exceeds three
/// standard errors, and the grid point before it.
#[derive(Clone, Debug, Serialize)]
pub struct BetaCBracket {
    pub below: Option<f64>,
    pub above: Option<f64>,
    pub curve: Vec<TiPoint>,
}

pub fn beta_c_bracket(spec: &GibbsSpec, q: &ChargeVector, betas: &[f64], cfg: &RunConfig) -> Result<BetaCBracket> {
    let curve = free_energy_ti(spec, q, betas, cfg, &[])?;
    let n = spec.n as f64;
    let hit = curve
        .iter()
        .position(|p| p.f - p.beta / n > 3.0 * p.f_stderr && p.f_stderr > 0.0);
    Ok(BetaCBracket {
        below: hit.and_then(|k| k.checked_sub(1)).map(|k| curve[k].beta),
        above: hit.map(|k| curve[k].beta),
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charges::rng_from_seed;
    use crate::exact::quenched_partition;
    use rand::Rng;

    #[test]
    fn step_law_values() {
        let l = tilted_step_law(&[0.0, 0.0, 0.0], 3).unwrap();
        assert!(l.iter().all(|(_, p)| *p == 1.0 / 6.0));
        let l = tilted_step_law(&[3f64.ln()], 1).unwrap();
        assert!((l[0].1 - 0.9).abs() < 1e-15);
        assert!((l[1].1 - 0.1).abs() < 1e-15);
        let mut rng = rng_from_seed(2);
        for _ in 0..100 {
            let pull: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let s: f64 = tilted_step_law(&pull, 4).unwrap().iter().map(|(_, p)| p).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_force_reduces_exactly() {
        let spec = GibbsSpec::new(2, 7, 1.3, ChargeLaw::Rademacher, 5).unwrap();
        let q = spec.charges().unwrap();
        let pulled = spec.clone().with_pull(vec![0.0, 0.0]).unwrap();
        let a = tilted_partition(&pulled, &q, Method::Exact, &RunConfig::default(), 0).unwrap();
        let b = quenched_partition(&spec, &q).unwrap();
        assert_eq!(a.log_z.mean, b.ln());
    }

    #[test]
    fn tilted_partition_is_one_at_beta_zero() {
        let spec = GibbsSpec::new(2, 6, 0.0, ChargeLaw::Gaussian, 3)
            .unwrap()
            .with_pull(vec![0.7, -0.2])
            .unwrap();
        let q = spec.charges().unwrap();
        let z = tilted_partition(&spec, &q, Method::Exact, &RunConfig::default(), 0).unwrap();
        assert!(z.log_z.mean.abs() < 1e-12);
    }

    #[test]
    fn bounds_at_zero_force() {
        let r = beta_c_bounds(&[0.0, 0.0], &ChargeLaw::Rademacher, 2).unwrap();
        assert!((r.upper - 4.0 * 4f64.ln()).abs() < 1e-12);
        assert!((r.lower.unwrap() - 1.0).abs() < 1e-12);
        let g = beta_c_bounds(&[0.0; 3], &ChargeLaw::Gaussian, 3).unwrap();
        assert!((g.upper - 2.0 * std::f64::consts::PI * 6f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn lipschitz_gap_cases() {
        assert_eq!(lipschitz_gap(&[0.5], &[0.0], 3.0, 1.0).unwrap(), 0.0);
        assert_eq!(lipschitz_gap(&[0.0], &[0.1], 3.0, 1.0).unwrap(), f64::INFINITY);
        for k in 1..20 {
            let l = 0.1 * k as f64;
            let b = lipschitz_gap(&[l, -l], &[0.05, 0.0], 5.0, 1.0).unwrap();
            assert!(b.is_finite() && b > 0.0);
        }
    }
}
