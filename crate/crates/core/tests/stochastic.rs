use rand::Rng;

use polyq::charges::rng_from_seed;
use polyq::exact::{local_time_tail_counts, ExactGibbs, Observable};
use polyq::mcmc::{metropolis_run, BurnIn, Init, RunConfig};
use polyq::pulling::{tilted_partition, Method};
use polyq::rate::{
    default_order, green_function, green_series, mc_mean_local_time, mc_tail_oracle, mc_tail_oracle_pulled, phi,
    phi_series, pulled_rate_bound, rate_i,
};
use polyq::{ChargeLaw, GibbsSpec, Site};

#[test]
fn green_matches_return_series() {
    let a = green_function(1.0, 1, default_order(1)).unwrap().value;
    assert!((a - green_series(1.0, 1, 200).unwrap()).abs() < 1e-6);
    let b = green_function(0.5, 2, default_order(2)).unwrap().value;
    assert!((b - green_series(0.5, 2, 200).unwrap()).abs() < 1e-5);
}

#[test]
fn renewal_identity_on_a_grid() {
    for d in 1..=2 {
        let mut prev = 1.0;
        for k in 0..=12 {
            let u = 0.05 * 100f64.powf(k as f64 / 12.0);
            let g = green_function(u, d, default_order(d)).unwrap().value;
            let p = phi_series(u, d, 3000).unwrap();
            assert!((g * (1.0 - p) - 1.0).abs() < 1e-5, "d={d} u={u}");
            let q = phi(u, d, default_order(d)).unwrap();
            assert!(q > 0.0 && q < prev);
            prev = q;
        }
    }
}

#[test]
fn phi_near_zero_is_close_to_recurrence() {
    assert!(phi(1e-3, 1, default_order(1)).unwrap() > 0.9);
}

#[test]
fn phi_matches_simulated_return_times() {
    // τ₁ capped at 400 steps; the capped mass contributes at most e^{-1200}
    let (d, u) = (2, 3.0);
    let mut rng = rng_from_seed(17);
    let samples = 400_000;
    let mut acc = 0.0;
    for _ in 0..samples {
        let mut x = Site::ORIGIN;
        for t in 1..=400 {
            x = x.add(&polyq::Step(rng.random_range(0..4)).vector());
            if x == Site::ORIGIN {
                acc += (-u * t as f64).exp();
                break;
            }
        }
    }
    let mc = acc / samples as f64;
    let p = phi(u, d, default_order(d)).unwrap();
    assert!((mc - p).abs() < 2e-3, "{mc} vs {p}");
}

#[test]
fn tail_oracle_matches_enumeration() {
    let n = 10;
    let counts = local_time_tail_counts(1, n, 1 << 20).unwrap();
    let exact = counts[&Site::ORIGIN][2] as f64 / 512.0;
    let t = mc_tail_oracle(1, n, 0.2, 200_000, 3).unwrap();
    let se = (exact * (1.0 - exact) / t.samples as f64).sqrt();
    assert!((t.probability - exact).abs() <= 4.0 * se, "{} vs {exact}", t.probability);
    assert!(t.lower < t.probability && t.probability < t.upper);
    let mut prev = 1.0;
    for eps in [0.05, 0.1, 0.2, 0.3, 0.4] {
        let p = mc_tail_oracle(1, n, eps, 20_000, 3).unwrap().probability;
        assert!(p <= prev);
        prev = p;
    }
}

#[test]
fn rate_is_continuous_and_vanishes_at_zero() {
    for d in 1..=2 {
        let eps: Vec<f64> = (1..=12).map(|k| 0.035 * k as f64).collect();
        let pts: Vec<f64> = eps.iter().map(|&e| rate_i(e, d).unwrap().rate).collect();
        for w in pts.windows(3) {
            let (a, b) = (w[1] - w[0], w[2] - w[1]);
            assert!(a >= 0.0 && b >= 0.0 && b <= 10.0 * a.max(1e-12));
        }
        let small = rate_i(0.01, d).unwrap().rate;
        assert!(small < pts[0] && small < 0.3 * pts[2], "d={d}");
    }
}

#[test]
fn pulled_bound_below_simulated_rate() {
    let (n, alpha, pull) = (500, 0.01, [0.5]);
    let bound = pulled_rate_bound(&pull, alpha, 1).unwrap();
    let t = mc_tail_oracle_pulled(1, n, alpha, &pull, 20_000, 5).unwrap();
    assert!(t.hits > 0);
    let rate_hi = -t.lower.ln() / n as f64;
    assert!(bound <= rate_hi, "{bound} vs {rate_hi}");
}

#[test]
fn pulling_lowers_the_local_time() {
    let free = mc_mean_local_time(1, 200, &[0.0], 20_000, 1).unwrap();
    let pulled = mc_mean_local_time(1, 200, &[0.3], 20_000, 2).unwrap();
    assert!(pulled.mean <= free.mean + 3.0 * (free.stderr.powi(2) + pulled.stderr.powi(2)).sqrt());
}

#[test]
fn tilted_partition_enumeration_and_sampling_agree() {
    let spec = GibbsSpec::new(1, 8, 2.0, ChargeLaw::Rademacher, 13)
        .unwrap()
        .with_pull(vec![0.4])
        .unwrap();
    let q = spec.charges().unwrap();
    let exact = tilted_partition(&spec, &q, Method::Exact, &RunConfig::default(), 0).unwrap();
    let cfg = RunConfig {
        sweeps: 40_000,
        burn_in: BurnIn::Auto,
        init: Init::Hot,
        window_rate: 0.0,
        chains: 2,
    };
    let mc = tilted_partition(&spec, &q, Method::Mcmc, &cfg, 33).unwrap();
    assert!((mc.log_z.mean - exact.log_z.mean).abs() <= 3.0 * mc.log_z.stderr, "{:?} vs {:?}", mc.log_z, exact.log_z);
}

#[test]
fn zero_force_chain_is_sample_for_sample_identical() {
    let spec = GibbsSpec::new(2, 12, 3.0, ChargeLaw::Gaussian, 2).unwrap();
    let q = spec.charges().unwrap();
    let pulled = spec.clone().with_pull(vec![0.0, 0.0]).unwrap();
    let cfg = RunConfig {
        sweeps: 300,
        window_rate: 0.2,
        ..Default::default()
    };
    let obs = [Observable::EnergyOverN2, Observable::Diameter, Observable::EndpointCoord(1)];
    let a = metropolis_run(&spec, &q, &cfg, &obs).unwrap();
    let b = metropolis_run(&pulled, &q, &cfg, &obs).unwrap();
    assert_eq!(a.estimates, b.estimates);
    assert_eq!(a.stats, b.stats);
}

/// The fold/regrow window move must leave the Gibbs measure invariant.
#[test]
fn window_moves_preserve_the_gibbs_measure() {
    let spec = GibbsSpec::new(2, 8, 4.0, ChargeLaw::Rademacher, 21).unwrap();
    let q = spec.charges().unwrap();
    let obs = [Observable::EnergyOverN2, Observable::LstarOverN, Observable::Diameter];
    let exact = ExactGibbs::new(&spec, &q).unwrap().expectations(&obs);
    let cfg = RunConfig {
        sweeps: 100_000,
        burn_in: BurnIn::Sweeps(1000),
        init: Init::Hot,
        window_rate: 1.0,
        chains: 2,
    };
    let r = metropolis_run(&spec, &q, &cfg, &obs).unwrap();
    assert!(r.stats.window_accepted > 0);
    for (e, x) in r.estimates.iter().zip(&exact) {
        assert!(e.within(*x, 4.0), "{e:?} vs {x}");
    }
}

#[test]
fn pulled_chain_matches_enumeration() {
    let spec = GibbsSpec::new(2, 7, 1.5, ChargeLaw::Rademacher, 4)
        .unwrap()
        .with_pull(vec![0.6, -0.3])
        .unwrap();
    let q = spec.charges().unwrap();
    let obs = [Observable::EndpointCoord(0), Observable::EndpointCoord(1), Observable::EnergyOverN2];
    let exact = ExactGibbs::new(&spec, &q).unwrap().expectations(&obs);
    let cfg = RunConfig {
        sweeps: 100_000,
        burn_in: BurnIn::Sweeps(1000),
        init: Init::Hot,
        window_rate: 0.3,
        chains: 2,
    };
    let r = metropolis_run(&spec, &q, &cfg, &obs).unwrap();
    for (e, x) in r.estimates.iter().zip(&exact) {
        assert!(e.within(*x, 4.0), "{e:?} vs {x}");
    }
}
